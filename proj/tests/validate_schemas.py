#!/usr/bin/env python3
"""Run the CLI on the test fixtures and validate every JSON report against its schema."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def load(path):
    with open(path) as fh:
        return json.load(fh)


def run(exe, args, expect=0):
    proc = subprocess.run([exe, *args], capture_output=True, text=True)
    if proc.returncode != expect:
        raise SystemExit(f"{' '.join(args)}: exit {proc.returncode}\n{proc.stderr}")


def main():
    exe, schema_dir, data = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])
    schemas = {p.name.split(".")[0]: load(p) for p in schema_dir.glob("*.schema.json")}
    for schema in schemas.values():
        jsonschema.Draft202012Validator.check_schema(schema)

    design, response = str(data / "design_30x8.csv"), str(data / "response_30.csv")
    cases = []
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for i, extra in enumerate([["--loss", "huber", "--huber-scale", "1", "--lambda", "0.05"],
                                   ["--loss", "square", "--tau", "0.5", "--intercept"],
                                   ["--loss", "huber", "--huber-scale", "0.5", "--lambda", "10"]]):
            out = tmp / f"fit{i}.json"
            run(exe, ["fit", "--design", design, "--response", response, *extra, "--out", str(out)])
            cases.append(("fit", out))
        out = tmp / "select.json"
        run(exe, ["select", "--design", design, "--response", response,
                  "--grid", str(data / "grid_candidates.json"), "--out", str(out)])
        cases.append(("select", out))
        out = tmp / "select_none.json"
        run(exe, ["select", "--design", design, "--response", response,
                  "--grid", str(data / "grid_candidates.json"), "--eta", "1.1", "--out", str(out)],
            expect=3)
        cases.append(("select", out))
        for i, extra in enumerate([[], ["--loss", "square", "--lambda", "0"],
                                   ["--fault", "drop-psi-prime"]]):
            out = tmp / f"check{i}.json"
            run(exe, ["check-derivatives", *extra, "--out", str(out)], expect=2 if extra[:1] == ["--fault"] else 0)
            cases.append(("check_derivatives", out))
        out_dir = tmp / "diag"
        run(exe, ["diagnose", "--config", str(data / "sim_fixture_huber.json"), "--cell", "1",
                  "--out-dir", str(out_dir)])
        cases.append(("diagnose", out_dir / "diagnose.json"))

        failures = 0
        for name, path in cases:
            try:
                jsonschema.validate(load(path), schemas[name])
                print(f"ok   {name} {path.name}")
            except jsonschema.ValidationError as err:
                failures += 1
                print(f"FAIL {name} {path.name}: {err.message}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
