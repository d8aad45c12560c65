#pragma once

#include "adacrit/model.hpp"

#include <optional>
#include <vector>

namespace adacrit {

struct FitOptions {
    int max_iterations = 50000;
    double kkt_tolerance = 1e-8;
    bool intercept = false;
    std::optional<Vector> initial_point;
    double initial_intercept = 0.0;
};

struct FitResult {
    Vector beta_hat;
    double intercept_hat = 0.0;
    bool has_intercept = false;
    Vector residuals;
    std::vector<Index> active_set;
    int iterations = 0;
    double kkt_residual = 0.0;
    double objective = 0.0;
    bool converged = false;
    /// Intercept fit with sum_i psi'(r_i) == 0: the intercept Jacobian formulae do not apply.
    bool degenerate = false;

    Index p_hat() const noexcept { return static_cast<Index>(active_set.size()); }
};

/// (1/n) sum rho(y - b0 - X b) + g(b).
double objective(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                 const Vector& beta, double intercept = 0.0);

/// Max distance of (1/n)(X^T psi(r))_j to the subdifferential of g at beta_j; with
/// `with_intercept` also |(1/n) 1^T psi(r)|.
double kkt_residual(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                    const Vector& beta, double intercept = 0.0, bool with_intercept = false);

/// Accelerated proximal gradient with backtracking and objective-based restart, stopped on
/// the KKT residual. A run that hits the iteration cap returns the last (lowest-objective)
/// iterate with `converged == false`. Throws Error(IllPosed) when lambda = tau = 0 and p > n.
FitResult fit(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
              const FitOptions& options = {});

/// Same as fit with options.intercept forced on; the intercept is unpenalized.
FitResult fit_with_intercept(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                             FitOptions options = {});

std::vector<Index> support_of(const Vector& beta);

} // namespace adacrit
