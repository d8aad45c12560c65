#pragma once

#include "adacrit/sensitivity.hpp"

#include <iosfwd>
#include <span>
#include <vector>

// Residual-distribution diagnostics. Everything taking beta_star or eps is simulation-only.
namespace adacrit {

struct MomentSummary {
    double mean = 0.0;
    double variance = 0.0; // unbiased
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    double ks_statistic = 0.0; // sup |F_emp - Phi|
};

struct ZetaReport {
    Vector zetas;
    MomentSummary summary;
};

/// zeta_i = (r_i + tr[Sigma A] psi(r_i) - eps_i) / ||Sigma^{1/2}(beta_hat - beta_star)||.
/// Throws Error(DegenerateDenominator) when beta_hat == beta_star in the Sigma norm.
ZetaReport zeta_statistics(const FitResult& fit, const SensitivityBundle& bundle,
                           const Matrix& sigma, const Vector& beta_star, const Vector& eps);

struct RepresentationCheck {
    Vector gap;                   // |r_i - prox[t rho](u_i)|
    Vector effective_observation; // u_i = r_i + t psi(r_i)
    double t_hat = 0.0;           // tr[Sigma A]
};

RepresentationCheck residual_representation_check(const FitResult& fit,
                                                  const SensitivityBundle& bundle,
                                                  const Matrix& sigma, const LossSpec& loss);

struct SquareLossNormality {
    Vector oracle;   // (sigma^2 + ||h||^2)^{-1/2} (1 + tr[Sigma A]) r_i
    Vector adaptive; // (sigma^2 + ||h||^2)^{-1/2} r_i / (1 - df/n)
    double oracle_factor = 0.0;   // 1 + tr[Sigma A]
    double adaptive_factor = 0.0; // 1 / (1 - df/n)
};

SquareLossNormality square_loss_normality_stat(const FitResult& fit,
                                               const SensitivityBundle& bundle,
                                               const Matrix& sigma, const Vector& beta_star,
                                               double sigma_noise);

double standard_normal_cdf(double x);
double standard_normal_quantile(double prob);

/// Kolmogorov-Smirnov distance of the empirical CDF to N(0,1), O(m log m).
double ks_statistic(std::span<const double> values);

MomentSummary summarize(std::span<const double> values);

struct QqPoint {
    double theoretical;
    double empirical;
};

/// Plotting positions (k - 0.5) / m against the sorted sample.
std::vector<QqPoint> qq_points(std::span<const double> values);

struct HistogramBin {
    double left;
    double right;
    std::size_t count;
};

std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins);

void write_qq_csv(std::ostream& os, const std::vector<QqPoint>& points);
void write_histogram_csv(std::ostream& os, const std::vector<HistogramBin>& bins);

} // namespace adacrit
