#pragma once

#include "adacrit/sensitivity.hpp"

#include <optional>
#include <vector>

namespace adacrit {

inline constexpr double kDefaultEta = 0.05;

struct CriterionReport {
    /// ||r + (df / tr V) psi(r)||^2; empty when tr V is numerically zero.
    std::optional<double> crit_adaptive;
    std::optional<double> crit_per_sample; // crit_adaptive / n
    double ratio = 0.0;                    // df / tr V
    std::optional<double> crit_oracle;     // ||r + tr[Sigma A] psi(r)||^2, when Sigma is known
    double constraint_value = 0.0;         // (1/n) sum psi'(r_i)
    bool constraint_ok = false;
    double eta = kDefaultEta;
    bool zero_trace_v = false;
};

/// Adaptive criterion. A trace_V below 1e-12 * n yields a report flagged zero_trace_v with
/// no numeric criterion and constraint_ok = false.
CriterionReport crit_adaptive(const FitResult& fit, const SensitivityBundle& bundle,
                              const LossSpec& loss, double eta = kDefaultEta);

/// Same, also filling crit_oracle from Sigma.
CriterionReport crit_adaptive(const FitResult& fit, const SensitivityBundle& bundle,
                              const LossSpec& loss, const Matrix& sigma, double eta = kDefaultEta);

/// ||r + tr[Sigma A_hat] psi(r)||^2, unnormalized.
double crit_oracle_sigma(const FitResult& fit, const SensitivityBundle& bundle,
                         const Matrix& sigma, const LossSpec& loss);

/// (beta_hat - beta_star)^T Sigma (beta_hat - beta_star).
double out_of_sample_error(const Vector& beta_hat, const Vector& beta_star, const Matrix& sigma);

struct Candidate {
    const FitResult* fit;
    const SensitivityBundle* bundle;
    LossSpec loss;
};

struct RankedEntry {
    std::size_t index = 0;
    CriterionReport report;
    bool feasible = false;
    std::string reason; // empty when feasible
};

struct SelectionReport {
    std::optional<std::size_t> selected;
    /// Feasible candidates by increasing criterion (ties by index), then infeasible ones in
    /// input order.
    std::vector<RankedEntry> ranking;
};

/// Ranks every candidate; never throws on infeasibility.
SelectionReport rank_candidates(const std::vector<Candidate>& candidates, double eta = kDefaultEta);
SelectionReport rank_reports(const std::vector<CriterionReport>& reports);

/// argmin of the adaptive criterion subject to (1/n) sum psi'(r_i) >= eta, smallest index on
/// ties. Throws Error(NoFeasibleCandidate) when no candidate satisfies the constraint.
SelectionReport select(const std::vector<Candidate>& candidates, double eta = kDefaultEta);

} // namespace adacrit
