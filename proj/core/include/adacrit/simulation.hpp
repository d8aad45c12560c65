#pragma once

#include "adacrit/criterion.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace adacrit::sim {

struct NoiseKind {
    enum class Type { StudentT, Gaussian };
    Type type = Type::StudentT;
    double dof = 2.0;   // StudentT
    double sigma = 1.0; // Gaussian

    static NoiseKind student_t(double dof) { return {Type::StudentT, dof, 1.0}; }
    static NoiseKind gaussian(double sigma) { return {Type::Gaussian, 2.0, sigma}; }
};

enum class DesignKind { Gaussian, Rademacher };

/// One (loss, lambda, tau) grid cell; a missing huber_scale means square loss.
struct GridCell {
    std::optional<double> huber_scale;
    double lambda = 0.0;
    double tau = 0.0;

    LossSpec loss() const;
    PenaltySpec penalty() const;
};

struct SimConfig {
    int n = 0;
    int p = 0;
    std::uint64_t sigma_seed = 0;
    NoiseKind noise_kind;
    std::optional<Vector> custom_signal; // empty means the sparse default signal
    std::vector<GridCell> grid;
    int replications = 1;
    std::uint64_t base_seed = 0;
    bool redraw_sigma = false;
    DesignKind design_kind = DesignKind::Gaussian;

    void validate() const;
};

/// Strict JSON parsing: unknown or missing required fields throw Error(ConfigSchema).
SimConfig parse_sim_config(const std::string& json_text);
SimConfig read_sim_config(const std::filesystem::path& path);
std::string to_json(const SimConfig& config);

/// R^T R / (2p) with R a 2p x p Rademacher matrix drawn from `seed`.
Matrix make_covariance(int p, std::uint64_t seed);

/// First min(100, ceil(p/10)) coordinates equal sqrt(p)/100, the rest zero.
Vector make_signal(int p);

/// count values from lo to hi, evenly spaced on a log scale.
std::vector<double> log_spaced(double lo, double hi, int count);

/// Samples rows N(0, Sigma) through a cached Cholesky factor.
class DesignSampler {
public:
    explicit DesignSampler(Matrix sigma);

    const Matrix& sigma() const noexcept { return sigma_; }
    const Matrix& factor() const noexcept { return factor_; }

private:
    Matrix sigma_;
    Matrix factor_; // lower triangular, Sigma = L L^T
};

struct SimulatedData {
    Dataset data;
    Vector eps;
};

/// X rows L z with z iid N(0, 1) (or Rademacher), eps iid from `noise`, y = X beta_star + eps.
SimulatedData generate(int n, const DesignSampler& design, const Vector& beta_star,
                       const NoiseKind& noise, std::uint64_t seed,
                       DesignKind design_kind = DesignKind::Gaussian);
SimulatedData generate(int n, const Matrix& sigma, const Vector& beta_star,
                       const NoiseKind& noise, std::uint64_t seed);

/// Candidate grid document: {"candidates": [cell, ...]} or a bare array of cells, where a
/// cell is {"loss": "huber"|"square", "huber_scale": s, "lambda": l, "tau": t}.
std::vector<GridCell> parse_grid(const std::string& json_text);

/// Seed for replication `rep` and stream `stream` derived from a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t rep, std::uint64_t stream);

/// One replication's ground truth and sample.
struct Replicate {
    Matrix sigma;
    Vector beta_star;
    SimulatedData sample;
};

/// Produces the replicates of a configuration; Sigma is drawn once unless redraw_sigma.
class Simulator {
public:
    explicit Simulator(SimConfig config);

    const SimConfig& config() const noexcept { return config_; }
    Replicate replicate(int replication) const;

private:
    SimConfig config_;
    DesignSampler fixed_;
    Vector signal_;
};

struct GridRecord {
    std::size_t cell = 0;
    int replication = 0;
    double huber_scale = 0.0; // 0 for square loss
    double lambda = 0.0;
    double tau = 0.0;
    std::string status = "ok"; // ok | nonconvergence | singular | degenerate
    double df = 0.0;
    double trace_V = 0.0;
    double n_hat = 0.0;
    Index p_hat = 0;
    double trace_sigma_A = 0.0;
    double crit_adaptive = 0.0; // NaN when tr V vanishes
    double crit_oracle = 0.0;
    double oos_error = 0.0;
    double eps_norm_sq_over_n = 0.0;
    double constraint_value = 0.0;
    int solver_iterations = 0;
    int n = 0; // not serialized
};

struct GridResult {
    std::vector<GridRecord> records; // sorted by (cell, replication)
};

struct RunOptions {
    int jobs = 1;
    FitOptions fit;
};

GridResult run_grid(const SimConfig& config, const RunOptions& options = {});

/// One replication of one cell, reproducing the record run_grid would produce.
GridRecord run_cell(const SimConfig& config, std::size_t cell, int replication,
                    const FitOptions& fit_options = {});

inline const std::vector<std::string>& grid_csv_columns()
{
    static const std::vector<std::string> columns = {
        "cell", "replication", "huber_scale", "lambda", "tau", "status", "df", "trace_V",
        "n_hat", "p_hat", "trace_sigma_A", "crit_adaptive", "crit_oracle", "oos_error",
        "eps_norm_sq_over_n", "constraint_value", "solver_iterations"};
    return columns;
}

void write_grid_csv(std::ostream& os, const GridResult& result);

struct QuantitySummary {
    double mean = 0.0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

struct CellSummary {
    std::size_t cell = 0;
    double huber_scale = 0.0;
    double lambda = 0.0;
    double tau = 0.0;
    int records = 0;
    int failures = 0;
    std::map<std::string, QuantitySummary> metrics;
};

/// Metric names summarized by aggregate, in output order.
const std::vector<std::string>& summary_metrics();

/// Per-cell mean/median/quartiles over successful replications.
std::vector<CellSummary> aggregate(const GridResult& result);

void write_summary_csv(std::ostream& os, const std::vector<CellSummary>& summary);

/// One heatmap-ready file per metric: pivot_<metric>.csv with huber_scale,lambda,tau,mean.
void write_pivot_csvs(const std::filesystem::path& dir, const std::vector<CellSummary>& summary);

double median(std::vector<double> values);
double quantile(std::vector<double> values, double prob);

} // namespace adacrit::sim
