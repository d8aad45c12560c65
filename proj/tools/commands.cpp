#include "commands.hpp"

#include "adacrit/criterion.hpp"
#include "adacrit/csv.hpp"
#include "adacrit/diagnostics.hpp"
#include "adacrit/error.hpp"
#include "adacrit/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace adacrit::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

json to_array(const Vector& v)
{
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) {
        out.push_back(v[i]);
    }
    return out;
}

json to_array(const std::vector<Index>& v)
{
    json out = json::array();
    for (Index i : v) {
        out.push_back(i);
    }
    return out;
}

json optional_number(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

LossSpec make_loss(const std::string& name, double scale)
{
    if (name == "square") {
        return LossSpec::square();
    }
    if (name == "huber") {
        return LossSpec::huber(scale);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown loss '" + name + "' (expected huber or square)");
}

void write_text(const std::string& path, const std::string& text, std::ostream& out)
{
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
    }
    f << text;
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    }
    return f;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Dataset load_dataset(const std::string& design, const std::string& response, bool header)
{
    Matrix X = read_matrix_csv(design, header);
    Vector y = read_vector_csv(response, header);
    if (X.rows() != y.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    response + ": expected " + std::to_string(X.rows()) + " rows, got "
                        + std::to_string(y.size()));
    }
    return Dataset(std::move(X), std::move(y));
}

int exit_code_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::IllPosed:
    case ErrorCode::ConfigSchema:
        return kInputError;
    case ErrorCode::NoFeasibleCandidate:
        return kInfeasible;
    default:
        return kNumericalError;
    }
}

template <class F>
int guarded(std::ostream& err, F&& body)
{
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumericalError;
    }
}

json fit_json(const FitResult& fit)
{
    json j;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["kkt_residual"] = fit.kkt_residual;
    j["objective"] = fit.objective;
    j["beta_hat"] = to_array(fit.beta_hat);
    j["intercept_hat"] = fit.has_intercept ? json(fit.intercept_hat) : json(nullptr);
    j["active_set"] = to_array(fit.active_set);
    j["p_hat"] = fit.p_hat();
    j["degenerate"] = fit.degenerate;
    return j;
}

void add_sensitivity(json& j, const SensitivityBundle& b, const CriterionReport& c)
{
    j["df"] = b.df;
    j["trace_V"] = b.trace_V;
    j["n_hat"] = b.n_hat;
    j["tau_eff"] = b.tau_eff;
    j["crit_adaptive"] = optional_number(c.crit_adaptive);
    j["crit_per_sample"] = optional_number(c.crit_per_sample);
    j["ratio"] = c.zero_trace_v ? json(nullptr) : json(c.ratio);
    j["constraint_value"] = c.constraint_value;
}

} // namespace

int run_fit(const FitArgs& args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Dataset data = load_dataset(args.design, args.response, args.header);
        const LossSpec loss = make_loss(args.model.loss, args.model.huber_scale);
        const PenaltySpec penalty = PenaltySpec::elastic_net(args.model.lambda, args.model.tau);
        FitOptions options;
        options.intercept = args.model.intercept;
        options.max_iterations = args.model.max_iterations;
        options.kkt_tolerance = args.model.kkt_tolerance;
        const FitResult fit = adacrit::fit(data, loss, penalty, options);

        json report;
        report["n"] = data.n();
        report["p"] = data.p();
        report["loss"] = args.model.loss;
        report["huber_scale"] = loss.is_square() ? json(nullptr) : json(loss.scale);
        report["lambda"] = penalty.lambda;
        report["tau"] = penalty.tau;
        const json fit_fields = fit_json(fit);
        for (const auto& [k, v] : fit_fields.items()) {
            report[k] = v;
        }
        report["residuals"] = to_array(fit.residuals);
        int code = fit.converged ? kOk : kNumericalError;
        std::string failure;
        try {
            const SensitivityBundle bundle = sensitivity_closed_form(data, loss, penalty, fit);
            add_sensitivity(report, bundle, crit_adaptive(fit, bundle, loss));
        } catch (const Error& e) {
            failure = e.what();
            code = kNumericalError;
            for (const char* key : {"df", "trace_V", "n_hat", "tau_eff", "crit_adaptive",
                                    "crit_per_sample", "ratio", "constraint_value"}) {
                report[key] = nullptr;
            }
        }
        report["error"] = failure.empty() ? json(nullptr) : json(failure);

        write_text(args.out_json, report.dump(2) + "\n", out);
        if (!args.out_beta.empty()) {
            std::ofstream f = open_out(args.out_beta);
            write_vector_csv(f, fit.beta_hat);
        }
        if (!fit.converged) {
            err << "error: solver did not converge in " << fit.iterations
                << " iterations (kkt residual " << fit.kkt_residual << ")\n";
        } else if (!failure.empty()) {
            err << "error: " << failure << '\n';
        }
        return code;
    });
}

int run_select(const SelectArgs& args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Dataset data = load_dataset(args.design, args.response, args.header);
        const std::vector<sim::GridCell> cells = sim::parse_grid(read_file(args.grid));
        FitOptions options;
        options.intercept = args.intercept;
        options.max_iterations = args.max_iterations;
        options.kkt_tolerance = args.kkt_tolerance;

        std::vector<CriterionReport> reports(cells.size());
        std::vector<std::string> failures(cells.size());
        json candidates = json::array();
        for (std::size_t k = 0; k < cells.size(); ++k) {
            const LossSpec loss = cells[k].loss();
            const PenaltySpec penalty = cells[k].penalty();
            json entry;
            entry["index"] = k;
            entry["loss"] = loss.is_square() ? "square" : "huber";
            entry["huber_scale"] = loss.is_square() ? json(nullptr) : json(loss.scale);
            entry["lambda"] = penalty.lambda;
            entry["tau"] = penalty.tau;
            try {
                const FitResult fit = adacrit::fit(data, loss, penalty, options);
                entry["converged"] = fit.converged;
                entry["p_hat"] = fit.p_hat();
                if (!fit.converged) {
                    failures[k] = "solver did not converge";
                } else {
                    const SensitivityBundle bundle =
                        sensitivity_closed_form(data, loss, penalty, fit);
                    reports[k] = crit_adaptive(fit, bundle, loss, args.eta);
                    add_sensitivity(entry, bundle, reports[k]);
                }
            } catch (const Error& e) {
                if (e.code() == ErrorCode::IllPosed) {
                    throw;
                }
                failures[k] = e.what();
            }
            candidates.push_back(std::move(entry));
        }
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (!failures[k].empty()) {
                reports[k] = CriterionReport{};
                reports[k].eta = args.eta;
            }
        }

        SelectionReport selection = rank_reports(reports);
        json ranking = json::array();
        for (auto& entry : selection.ranking) {
            if (!failures[entry.index].empty()) {
                entry.reason = failures[entry.index];
            }
            json row;
            row["index"] = entry.index;
            row["crit_adaptive"] = optional_number(entry.report.crit_adaptive);
            row["constraint_value"] = entry.report.constraint_value;
            row["constraint_ok"] = entry.report.constraint_ok;
            row["feasible"] = entry.feasible;
            row["reason"] = entry.feasible ? json(nullptr) : json(entry.reason);
            ranking.push_back(std::move(row));
            auto& c = candidates[entry.index];
            c["constraint_ok"] = entry.report.constraint_ok;
            c["feasible"] = entry.feasible;
            c["reason"] = entry.feasible ? json(nullptr) : json(entry.reason);
        }

        json report;
        report["n"] = data.n();
        report["p"] = data.p();
        report["eta"] = args.eta;
        report["selected"] = selection.selected ? json(*selection.selected) : json(nullptr);
        report["ranking"] = std::move(ranking);
        report["candidates"] = std::move(candidates);
        write_text(args.out_json, report.dump(2) + "\n", out);
        if (!selection.selected) {
            err << "error: no candidate satisfies (1/n) sum psi'(r_i) >= " << args.eta << '\n';
            return kInfeasible;
        }
        return kOk;
    });
}

int run_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const sim::SimConfig config = sim::read_sim_config(args.config);
        if (args.jobs < 1) {
            throw Error(ErrorCode::InvalidArgument, "--jobs must be at least 1");
        }
        sim::RunOptions options;
        options.jobs = args.jobs;
        const sim::GridResult result = sim::run_grid(config, options);
        const auto summary = sim::aggregate(result);

        const fs::path dir(args.out_dir);
        fs::create_directories(dir);
        {
            std::ofstream f = open_out(dir / "grid.csv");
            sim::write_grid_csv(f, result);
        }
        {
            std::ofstream f = open_out(dir / "summary.csv");
            sim::write_summary_csv(f, summary);
        }
        sim::write_pivot_csvs(dir, summary);

        std::size_t failed = 0;
        for (const auto& r : result.records) {
            failed += r.status != "ok";
        }
        out << "records " << result.records.size() << ", failed " << failed << ", written to "
            << dir.string() << '\n';
        return kOk;
    });
}

int run_diagnose(const DiagnoseArgs& args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const sim::SimConfig config = sim::read_sim_config(args.config);
        if (args.cell >= config.grid.size()) {
            throw Error(ErrorCode::InvalidArgument,
                        "--cell " + std::to_string(args.cell) + " out of range (grid has "
                            + std::to_string(config.grid.size()) + " cells)");
        }
        if (args.bins < 1) {
            throw Error(ErrorCode::InvalidArgument, "--bins must be at least 1");
        }
        const sim::GridCell& cell = config.grid[args.cell];
        const LossSpec loss = cell.loss();
        const PenaltySpec penalty = cell.penalty();
        const sim::Simulator simulator(config);

        std::vector<double> zeta1;
        double max_gap = 0.0;
        int skipped = 0;
        for (int rep = 0; rep < config.replications; ++rep) {
            const sim::Replicate r = simulator.replicate(rep);
            const Dataset& data = r.sample.data;
            try {
                const FitResult fit = adacrit::fit(data, loss, penalty);
                if (!fit.converged) {
                    ++skipped;
                    continue;
                }
                const SensitivityBundle bundle = sensitivity_closed_form(data, loss, penalty, fit);
                const ZetaReport z =
                    zeta_statistics(fit, bundle, r.sigma, r.beta_star, r.sample.eps);
                zeta1.push_back(z.zetas[0]);
                const RepresentationCheck rc =
                    residual_representation_check(fit, bundle, r.sigma, loss);
                max_gap = std::max(max_gap, rc.gap.maxCoeff());
            } catch (const Error&) {
                ++skipped;
            }
        }
        if (zeta1.size() < 2) {
            throw Error(ErrorCode::DegenerateFit, "fewer than two usable replications");
        }

        const fs::path dir(args.out_dir);
        fs::create_directories(dir);
        {
            std::ofstream f = open_out(dir / "zeta1.csv");
            f << "replication_value\n";
            for (double z : zeta1) {
                f << format_double(z) << '\n';
            }
        }
        {
            std::ofstream f = open_out(dir / "qq.csv");
            write_qq_csv(f, qq_points(zeta1));
        }
        {
            std::ofstream f = open_out(dir / "histogram.csv");
            write_histogram_csv(f, histogram(zeta1, args.bins));
        }
        const MomentSummary s = summarize(zeta1);
        json report;
        report["cell"] = args.cell;
        report["replications"] = config.replications;
        report["used"] = zeta1.size();
        report["skipped"] = skipped;
        report["zeta1"] = {{"mean", s.mean},
                           {"variance", s.variance},
                           {"skewness", s.skewness},
                           {"excess_kurtosis", s.excess_kurtosis},
                           {"ks_statistic", s.ks_statistic}};
        report["max_representation_gap"] = max_gap;
        {
            std::ofstream f = open_out(dir / "diagnose.json");
            f << report.dump(2) << '\n';
        }
        out << report.dump(2) << '\n';
        return kOk;
    });
}

namespace {

struct CheckLine {
    std::string name;
    double value;
    double tolerance;
    bool pass() const { return value <= tolerance; }
};

double relative_frobenius(const Matrix& a, const Matrix& b)
{
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

} // namespace

int run_check_derivatives(const CheckArgs& args, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        if (args.n < 1 || args.n > 100 || args.p < 1 || args.p > 50) {
            throw Error(ErrorCode::InvalidArgument, "check-derivatives requires 1<=n<=100, 1<=p<=50");
        }
        if (!(args.step > 0.0) || args.step > 1e-2) {
            throw Error(ErrorCode::InvalidArgument, "--step must lie in (0, 1e-2]");
        }
        if (!args.fault.empty() && args.fault != "drop-psi-prime") {
            throw Error(ErrorCode::InvalidArgument, "unknown --fault '" + args.fault + "'");
        }
        const LossSpec loss = make_loss(args.loss, args.huber_scale);
        const PenaltySpec penalty = PenaltySpec::elastic_net(args.lambda, args.tau);
        FitOptions options;
        options.max_iterations = 200000;
        options.kkt_tolerance = 1e-12;

        // Isotropic design; redraw until the fit sits away from every kink.
        const Matrix identity = Matrix::Identity(args.p, args.p);
        const Vector beta_star = sim::make_signal(args.p) * 10.0;
        sim::SimulatedData sample;
        FitResult fit;
        double margin = 0.0;
        int attempt = 0;
        for (; attempt < 100; ++attempt) {
            sample = sim::generate(args.n, identity, beta_star, sim::NoiseKind::gaussian(1.0),
                                   sim::derive_seed(args.seed, static_cast<std::uint64_t>(attempt), 3));
            fit = adacrit::fit(sample.data, loss, penalty, options);
            margin = kink_margin(sample.data, loss, penalty, fit);
            if (fit.converged && margin >= kKinkMargin) {
                break;
            }
        }
        if (attempt == 100) {
            throw Error(ErrorCode::NonConvergence, "no instance with kink margin >= 1e-2 in 100 draws");
        }
        const Dataset& data = sample.data;
        const SensitivityBundle bundle = sensitivity_closed_form(data, loss, penalty, fit);

        Matrix jac = jacobian_y(bundle, data, fit);
        if (args.fault == "drop-psi-prime") {
            const Matrix Xs = data.X(Eigen::all, bundle.active_set);
            jac.setZero();
            jac(bundle.active_set, Eigen::all) = bundle.A_hat * Xs.transpose();
        }
        const FdSensitivity fd = sensitivity_fd_oracle(data, loss, penalty, options, args.step);

        std::vector<CheckLine> lines;
        lines.push_back({"jacobian_y", relative_frobenius(jac, fd.jacobian), kJacobianRelTol});
        lines.push_back({"df", std::abs(bundle.df - fd.df), kTraceAbsTol});
        lines.push_back({"trace_V", std::abs(bundle.trace_V - fd.trace_V), kTraceAbsTol});

        double jx = 0.0;
        std::vector<Index> columns = bundle.active_set;
        if (columns.size() > 3) {
            columns.resize(3);
        }
        for (Index j = 0; j < data.p(); ++j) {
            if (std::find(bundle.active_set.begin(), bundle.active_set.end(), j)
                == bundle.active_set.end()) {
                columns.push_back(j);
                break;
            }
        }
        for (Index i : {Index{0}, data.n() / 2, data.n() - 1}) {
            for (Index j : columns) {
                const Vector closed = jacobian_x_entry(bundle, data, fit, i, j);
                const Vector numeric =
                    jacobian_x_entry_fd(data, loss, penalty, options, fit, i, j, args.step);
                jx = std::max(jx, (closed - numeric).norm() / std::max(numeric.norm(), 1.0));
            }
        }
        lines.push_back({"jacobian_x", jx, kJacobianRelTol});

        const ContractionReport fine =
            contraction_check(data, loss, penalty, fit, bundle, beta_star, options, args.step);
        const ContractionReport coarse = contraction_check(data, loss, penalty, fit, bundle,
                                                           beta_star, options, 10.0 * args.step);
        json contraction = json::array();
        for (int k = 1; k <= 5; ++k) {
            lines.push_back({"contraction_" + std::to_string(k), fine.residual(k),
                             kContractionAbsTol});
            contraction.push_back({{"identity", k},
                                   {"residual", fine.residual(k)},
                                   {"residual_coarse_step", coarse.residual(k)}});
        }

        json checks = json::array();
        bool all_pass = true;
        for (const auto& line : lines) {
            checks.push_back({{"name", line.name},
                              {"value", line.value},
                              {"tolerance", line.tolerance},
                              {"pass", line.pass()}});
            all_pass = all_pass && line.pass();
        }
        json report;
        report["n"] = args.n;
        report["p"] = args.p;
        report["loss"] = args.loss;
        report["huber_scale"] = loss.is_square() ? json(nullptr) : json(loss.scale);
        report["lambda"] = args.lambda;
        report["tau"] = args.tau;
        report["seed"] = args.seed;
        report["draw"] = attempt;
        report["kink_margin"] = margin;
        report["p_hat"] = fit.p_hat();
        report["step"] = args.step;
        report["fault"] = args.fault.empty() ? json(nullptr) : json(args.fault);
        report["checks"] = std::move(checks);
        report["contraction"] = std::move(contraction);
        report["pass"] = all_pass;

        if (!args.out_json.empty()) {
            write_text(args.out_json, report.dump(2) + "\n", out);
        }
        for (const auto& line : lines) {
            out << (line.pass() ? "ok   " : "FAIL ") << line.name << " " << line.value
                << " (tol " << line.tolerance << ")\n";
        }
        if (!all_pass) {
            for (const auto& line : lines) {
                if (!line.pass()) {
                    err << "error: " << line.name << " residual " << line.value
                        << " exceeds tolerance " << line.tolerance << '\n';
                }
            }
            return kNumericalError;
        }
        return kOk;
    });
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Adaptive tuning criteria for regularized robust M-estimators"};
    app.require_subcommand(1);

    auto add_model = [](CLI::App* cmd, ModelFlags& m) {
        cmd->add_option("--loss", m.loss, "huber or square")->capture_default_str();
        cmd->add_option("--huber-scale", m.huber_scale, "Huber threshold")->capture_default_str();
        cmd->add_option("--lambda", m.lambda, "l1 weight")->capture_default_str();
        cmd->add_option("--tau", m.tau, "ridge weight")->capture_default_str();
        cmd->add_flag("--intercept", m.intercept, "fit an unpenalized intercept");
        cmd->add_option("--max-iter", m.max_iterations)->capture_default_str();
        cmd->add_option("--tol", m.kkt_tolerance, "KKT tolerance")->capture_default_str();
    };

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "fit one estimator and report its criteria");
    fit_cmd->add_option("--design", fit_args.design, "n x p CSV")->required();
    fit_cmd->add_option("--response", fit_args.response, "n x 1 CSV")->required();
    fit_cmd->add_flag("--header", fit_args.header, "skip the first CSV row");
    add_model(fit_cmd, fit_args.model);
    fit_cmd->add_option("--out", fit_args.out_json, "JSON report path (stdout by default)");
    fit_cmd->add_option("--beta-out", fit_args.out_beta, "beta_hat CSV path");

    SelectArgs select_args;
    auto* select_cmd = app.add_subcommand("select", "rank a grid of candidates");
    select_cmd->add_option("--design", select_args.design)->required();
    select_cmd->add_option("--response", select_args.response)->required();
    select_cmd->add_flag("--header", select_args.header);
    select_cmd->add_option("--grid", select_args.grid, "candidate grid JSON")->required();
    select_cmd->add_option("--eta", select_args.eta)->capture_default_str();
    select_cmd->add_flag("--intercept", select_args.intercept);
    select_cmd->add_option("--max-iter", select_args.max_iterations)->capture_default_str();
    select_cmd->add_option("--tol", select_args.kkt_tolerance)->capture_default_str();
    select_cmd->add_option("--out", select_args.out_json);

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "run a simulation grid");
    sim_cmd->add_option("--config", sim_args.config)->required();
    sim_cmd->add_option("--out-dir", sim_args.out_dir)->required();
    sim_cmd->add_option("--jobs", sim_args.jobs)->capture_default_str();

    DiagnoseArgs diag_args;
    auto* diag_cmd = app.add_subcommand("diagnose", "residual normality of one grid cell");
    diag_cmd->add_option("--config", diag_args.config)->required();
    diag_cmd->add_option("--cell", diag_args.cell)->capture_default_str();
    diag_cmd->add_option("--out-dir", diag_args.out_dir)->required();
    diag_cmd->add_option("--bins", diag_args.bins)->capture_default_str();

    CheckArgs check_args;
    auto* check_cmd =
        app.add_subcommand("check-derivatives", "closed forms against finite differences");
    check_cmd->add_option("--n", check_args.n)->capture_default_str();
    check_cmd->add_option("--p", check_args.p)->capture_default_str();
    check_cmd->add_option("--loss", check_args.loss)->capture_default_str();
    check_cmd->add_option("--huber-scale", check_args.huber_scale)->capture_default_str();
    check_cmd->add_option("--lambda", check_args.lambda)->capture_default_str();
    check_cmd->add_option("--tau", check_args.tau)->capture_default_str();
    check_cmd->add_option("--seed", check_args.seed)->capture_default_str();
    check_cmd->add_option("--step", check_args.step)->capture_default_str();
    check_cmd->add_option("--fault", check_args.fault, "inject a known error (drop-psi-prime)");
    check_cmd->add_option("--out", check_args.out_json);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o;
        std::ostringstream e_out;
        const int code = app.exit(e, o, e_out);
        out << o.str();
        err << e_out.str();
        return code == 0 ? kOk : kInputError;
    }

    if (fit_cmd->parsed()) {
        return run_fit(fit_args, out, err);
    }
    if (select_cmd->parsed()) {
        return run_select(select_args, out, err);
    }
    if (sim_cmd->parsed()) {
        return run_simulate(sim_args, out, err);
    }
    if (diag_cmd->parsed()) {
        return run_diagnose(diag_args, out, err);
    }
    return run_check_derivatives(check_args, out, err);
}

} // namespace adacrit::cli
