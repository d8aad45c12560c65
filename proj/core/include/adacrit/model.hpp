#pragma once

#include <Eigen/Dense>

namespace adacrit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Robust loss rho. Square is u^2/2; Huber is scale^2 * H(u / scale) with
/// H(u) = u^2/2 on |u| <= 1 and |u| - 1/2 outside.
struct LossSpec {
    enum class Kind { Square, Huber };

    Kind kind = Kind::Square;
    double scale = 1.0; // Huber only

    static LossSpec square() { return {Kind::Square, 1.0}; }
    static LossSpec huber(double scale);

    bool is_square() const noexcept { return kind == Kind::Square; }
};

/// Elastic-Net family: lambda * ||b||_1 + (tau / 2) * ||b||_2^2.
struct PenaltySpec {
    enum class Kind { ElasticNet, Ridge, Lasso };

    Kind kind = Kind::ElasticNet;
    double lambda = 0.0;
    double tau = 0.0;

    static PenaltySpec elastic_net(double lambda, double tau);
    static PenaltySpec ridge(double tau);
    static PenaltySpec lasso(double lambda);

    /// Strong-convexity modulus with respect to Sigma, tau / lambda_max(Sigma).
    double strong_convexity(double sigma_max_eigenvalue) const noexcept {
        return tau / sigma_max_eigenvalue;
    }
};

struct Dataset {
    Matrix X;
    Vector y;

    Dataset() = default;
    Dataset(Matrix design, Vector response);

    Eigen::Index n() const noexcept { return X.rows(); }
    Eigen::Index p() const noexcept { return X.cols(); }
};

double rho(const LossSpec& loss, double u) noexcept;
double psi(const LossSpec& loss, double u) noexcept;
double psi_prime(const LossSpec& loss, double u) noexcept;

/// Unique z with z + t * psi(z) = u.
double loss_prox(const LossSpec& loss, double u, double t);

Vector psi(const LossSpec& loss, const Vector& u);
Vector psi_prime(const LossSpec& loss, const Vector& u);

double penalty_value(const PenaltySpec& penalty, const Vector& b) noexcept;

/// argmin_b ||b - v||^2 / (2 step) + g(b). Produces exact zeros.
Vector penalty_prox(const PenaltySpec& penalty, const Vector& v, double step);
double penalty_prox(const PenaltySpec& penalty, double v, double step) noexcept;

} // namespace adacrit
