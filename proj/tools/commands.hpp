#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace adacrit::cli {

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kInputError = 1,
    kNumericalError = 2,
    kInfeasible = 3,
};

struct ModelFlags {
    std::string loss = "huber"; // huber | square
    double huber_scale = 1.0;
    double lambda = 0.0;
    double tau = 0.0;
    bool intercept = false;
    int max_iterations = 50000;
    double kkt_tolerance = 1e-8;
};

struct FitArgs {
    std::string design;
    std::string response;
    bool header = false;
    ModelFlags model;
    std::string out_json;
    std::string out_beta;
};

struct SelectArgs {
    std::string design;
    std::string response;
    bool header = false;
    std::string grid;
    double eta = 0.05;
    bool intercept = false;
    int max_iterations = 50000;
    double kkt_tolerance = 1e-8;
    std::string out_json;
};

struct SimulateArgs {
    std::string config;
    std::string out_dir;
    int jobs = 1;
};

struct DiagnoseArgs {
    std::string config;
    std::size_t cell = 0;
    std::string out_dir;
    std::size_t bins = 30;
};

struct CheckArgs {
    int n = 25;
    int p = 10;
    std::string loss = "huber";
    double huber_scale = 1.0;
    double lambda = 0.05;
    double tau = 0.1;
    std::uint64_t seed = 1;
    double step = 1e-4;
    std::string fault; // empty | drop-psi-prime
    std::string out_json;
};

/// Tolerances used by check-derivatives.
inline constexpr double kJacobianRelTol = 1e-3;
inline constexpr double kTraceAbsTol = 1e-3;
inline constexpr double kContractionAbsTol = 1e-3;
inline constexpr double kKinkMargin = 1e-2;

int run_fit(const FitArgs& args, std::ostream& out, std::ostream& err);
int run_select(const SelectArgs& args, std::ostream& out, std::ostream& err);
int run_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
int run_diagnose(const DiagnoseArgs& args, std::ostream& out, std::ostream& err);
int run_check_derivatives(const CheckArgs& args, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches; returns the process exit code.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace adacrit::cli
