#include "adacrit/model.hpp"

#include "adacrit/error.hpp"

#include <algorithm>
#include <cmath>

namespace adacrit {

const char* to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IllPosed: return "IllPosed";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::ZeroTraceV: return "ZeroTraceV";
    case ErrorCode::NoFeasibleCandidate: return "NoFeasibleCandidate";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::ConfigSchema: return "ConfigSchema";
    }
    return "Unknown";
}

LossSpec LossSpec::huber(double scale)
{
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw Error(ErrorCode::InvalidArgument, "Huber scale must be positive and finite");
    }
    return {Kind::Huber, scale};
}

PenaltySpec PenaltySpec::elastic_net(double lambda, double tau)
{
    if (!(lambda >= 0.0) || !(tau >= 0.0) || !std::isfinite(lambda) || !std::isfinite(tau)) {
        throw Error(ErrorCode::InvalidArgument, "penalty weights must be nonnegative and finite");
    }
    return {Kind::ElasticNet, lambda, tau};
}

PenaltySpec PenaltySpec::ridge(double tau)
{
    auto pen = elastic_net(0.0, tau);
    pen.kind = Kind::Ridge;
    return pen;
}

PenaltySpec PenaltySpec::lasso(double lambda)
{
    auto pen = elastic_net(lambda, 0.0);
    pen.kind = Kind::Lasso;
    return pen;
}

Dataset::Dataset(Matrix design, Vector response)
    : X(std::move(design)), y(std::move(response))
{
    if (X.rows() < 1 || X.cols() < 1) {
        throw Error(ErrorCode::InvalidArgument, "design must have n >= 1 rows and p >= 1 columns");
    }
    if (y.size() != X.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "response length differs from design rows");
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "design and response must be finite");
    }
}

double rho(const LossSpec& loss, double u) noexcept
{
    if (loss.kind == LossSpec::Kind::Square) {
        return 0.5 * u * u;
    }
    const double a = std::abs(u);
    const double s = loss.scale;
    return a <= s ? 0.5 * u * u : s * (a - 0.5 * s);
}

double psi(const LossSpec& loss, double u) noexcept
{
    if (loss.kind == LossSpec::Kind::Square) {
        return u;
    }
    return std::clamp(u, -loss.scale, loss.scale);
}

double psi_prime(const LossSpec& loss, double u) noexcept
{
    if (loss.kind == LossSpec::Kind::Square) {
        return 1.0;
    }
    // closed quadratic interval at the kink
    return std::abs(u) <= loss.scale ? 1.0 : 0.0;
}

double loss_prox(const LossSpec& loss, double u, double t)
{
    if (!(t > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "loss_prox requires t > 0");
    }
    if (loss.kind == LossSpec::Kind::Square) {
        return u / (1.0 + t);
    }
    const double s = loss.scale;
    if (std::abs(u) <= (1.0 + t) * s) {
        return u / (1.0 + t);
    }
    return u - t * s * (u > 0.0 ? 1.0 : -1.0);
}

Vector psi(const LossSpec& loss, const Vector& u)
{
    if (loss.kind == LossSpec::Kind::Square) {
        return u;
    }
    return u.cwiseMax(-loss.scale).cwiseMin(loss.scale);
}

Vector psi_prime(const LossSpec& loss, const Vector& u)
{
    if (loss.kind == LossSpec::Kind::Square) {
        return Vector::Ones(u.size());
    }
    const double s = loss.scale;
    return u.unaryExpr([s](double v) { return std::abs(v) <= s ? 1.0 : 0.0; });
}

double penalty_value(const PenaltySpec& penalty, const Vector& b) noexcept
{
    return penalty.lambda * b.lpNorm<1>() + 0.5 * penalty.tau * b.squaredNorm();
}

double penalty_prox(const PenaltySpec& penalty, double v, double step) noexcept
{
    const double shrunk = std::max(std::abs(v) - step * penalty.lambda, 0.0);
    if (shrunk == 0.0) {
        return 0.0;
    }
    return (v > 0.0 ? shrunk : -shrunk) / (1.0 + step * penalty.tau);
}

Vector penalty_prox(const PenaltySpec& penalty, const Vector& v, double step)
{
    if (!(step > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "penalty_prox requires step > 0");
    }
    return v.unaryExpr([&](double x) { return penalty_prox(penalty, x, step); });
}

} // namespace adacrit
