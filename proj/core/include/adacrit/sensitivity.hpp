#pragma once

#include "adacrit/solver.hpp"

#include <string>
#include <vector>

namespace adacrit {

/// Ridge floor applied to tau before inverting the active-set system.
inline constexpr double kRidgeFloor = 1e-10;

/// Derivative objects of the M-estimator at a fit.
///
/// A_hat is the active-set block of the p x p sensitivity matrix, which vanishes outside
/// active_set x active_set. With an intercept, the diag{psi'(r)} weighting in every formula
/// becomes the rank-corrected matrix diag{psi'} - psi' psi'^T / sum(psi'), and df counts the
/// intercept (df is the trace of the Jacobian of the fitted values in y).
struct SensitivityBundle {
    Matrix A_hat;
    std::vector<Index> active_set;
    Index n = 0;
    Index p = 0;
    double df = 0.0;
    double trace_V = 0.0;
    double n_hat = 0.0;
    Index p_hat = 0;
    Vector psi_prime_diag;
    Vector psi_residuals; // psi(r)
    double tau_eff = 0.0;
    bool intercept = false;

    /// Psi'-weighted active columns, W = Psi' X_S (n x p_hat).
    Matrix weighted_active;

    /// A_hat embedded in p x p.
    Matrix A_full() const;
};

SensitivityBundle sensitivity_closed_form(const Dataset& data, const LossSpec& loss,
                                          const PenaltySpec& penalty, const FitResult& fit);

/// p x n Jacobian of beta_hat in y: column i is A_hat X^T Psi' e_i.
Matrix jacobian_y(const SensitivityBundle& bundle, const Dataset& data, const FitResult& fit);

/// Gradient of the intercept in y (zero vector without intercept).
Vector intercept_jacobian_y(const SensitivityBundle& bundle, const Dataset& data,
                            const FitResult& fit);

/// d beta_hat / d x_ij = A_hat e_j psi(r_i) - beta_hat_j * A_hat X^T Psi' e_i.
Vector jacobian_x_entry(const SensitivityBundle& bundle, const Dataset& data,
                        const FitResult& fit, Index i, Index j);

/// tr[Sigma A_hat] over the active block.
double trace_sigma_A(const SensitivityBundle& bundle, const Matrix& sigma);

/// V v without materializing V (n x n).
Vector apply_V(const SensitivityBundle& bundle, const Vector& v);

/// diag{psi'} - psi' psi'^T / sum(psi'). Throws Error(DegenerateFit) when sum(psi') == 0.
Matrix intercept_psi_matrix(const Vector& psi_prime_diag);
Matrix intercept_psi_matrix(const FitResult& fit, const LossSpec& loss);

/// Distance of the fit to the nondifferentiable set: Huber kinks, inactive coordinates
/// whose score is close to lambda, and active coordinates close to zero.
double kink_margin(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                   const FitResult& fit);

struct FdSensitivity {
    FitResult base;
    Matrix jacobian;            // p x n
    Vector intercept_jacobian;  // n, zero without intercept
    double df = 0.0;
    double trace_V = 0.0;
};

/// Central differences of the fit in each y_i with step * (1 + |y_i|), warm-started at the
/// base fit. Throws Error(NonConvergence) if any refit fails to converge.
FdSensitivity sensitivity_fd_oracle(const Dataset& data, const LossSpec& loss,
                                    const PenaltySpec& penalty, const FitOptions& options,
                                    double step);

/// Central difference of beta_hat in x_ij with step * (1 + |x_ij|).
Vector jacobian_x_entry_fd(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                           const FitOptions& options, const FitResult& base, Index i, Index j,
                           double step);

/// Both sides of the five contraction identities for isotropic design (Sigma = I, G = X,
/// h = beta_hat - beta_star, psi = psi(r)). Left sides come from finite differences of the
/// fit over every entry of G with y = G beta_star + eps held consistent; right sides from
/// the closed forms.
struct ContractionReport {
    Vector lhs1, rhs1; // per observation i
    Vector lhs2, rhs2; // per feature j
    double lhs3 = 0.0, rhs3 = 0.0;
    double lhs4 = 0.0, rhs4 = 0.0;
    double lhs5 = 0.0, rhs5 = 0.0;

    double residual(int identity) const; // identity in 1..5, max-abs for 1 and 2
    double max_residual() const;
};

ContractionReport contraction_check(const Dataset& data, const LossSpec& loss,
                                    const PenaltySpec& penalty, const FitResult& fit,
                                    const SensitivityBundle& bundle, const Vector& beta_star,
                                    const FitOptions& options, double step);

} // namespace adacrit
