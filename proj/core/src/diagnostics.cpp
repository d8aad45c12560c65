#include "adacrit/diagnostics.hpp"

#include "adacrit/csv.hpp"
#include "adacrit/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace adacrit {

namespace {

double sigma_norm(const Vector& h, const Matrix& sigma)
{
    if (sigma.rows() != h.size() || sigma.cols() != h.size()) {
        throw Error(ErrorCode::DimensionMismatch, "Sigma must be p x p");
    }
    return std::sqrt(std::max(h.dot(sigma * h), 0.0));
}

} // namespace

ZetaReport zeta_statistics(const FitResult& fit, const SensitivityBundle& bundle,
                           const Matrix& sigma, const Vector& beta_star, const Vector& eps)
{
    if (eps.size() != fit.residuals.size()) {
        throw Error(ErrorCode::DimensionMismatch, "eps length differs from n");
    }
    const double denom = sigma_norm(fit.beta_hat - beta_star, sigma);
    if (!(denom > 0.0)) {
        throw Error(ErrorCode::DegenerateDenominator, "beta_hat equals beta_star");
    }
    const double t = trace_sigma_A(bundle, sigma);
    ZetaReport rep;
    rep.zetas = (fit.residuals + t * bundle.psi_residuals - eps) / denom;
    rep.summary = summarize({rep.zetas.data(), static_cast<std::size_t>(rep.zetas.size())});
    return rep;
}

RepresentationCheck residual_representation_check(const FitResult& fit,
                                                  const SensitivityBundle& bundle,
                                                  const Matrix& sigma, const LossSpec& loss)
{
    RepresentationCheck rep;
    rep.t_hat = trace_sigma_A(bundle, sigma);
    const Index n = fit.residuals.size();
    rep.effective_observation = fit.residuals + rep.t_hat * bundle.psi_residuals;
    rep.gap = Vector::Zero(n);
    if (rep.t_hat <= 0.0) {
        // prox of the zero function is the identity
        return rep;
    }
    for (Index i = 0; i < n; ++i) {
        const double z = loss_prox(loss, rep.effective_observation[i], rep.t_hat);
        rep.gap[i] = std::abs(fit.residuals[i] - z);
    }
    return rep;
}

SquareLossNormality square_loss_normality_stat(const FitResult& fit,
                                               const SensitivityBundle& bundle,
                                               const Matrix& sigma, const Vector& beta_star,
                                               double sigma_noise)
{
    const double h = sigma_norm(fit.beta_hat - beta_star, sigma);
    const double scale = 1.0 / std::sqrt(sigma_noise * sigma_noise + h * h);
    const double n = static_cast<double>(fit.residuals.size());
    SquareLossNormality out;
    out.oracle_factor = 1.0 + trace_sigma_A(bundle, sigma);
    out.adaptive_factor = 1.0 / (1.0 - bundle.df / n);
    out.oracle = scale * out.oracle_factor * fit.residuals;
    out.adaptive = scale * out.adaptive_factor * fit.residuals;
    return out;
}

double standard_normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double standard_normal_quantile(double prob)
{
    if (!(prob > 0.0 && prob < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "quantile probability must lie in (0, 1)");
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

double ks_statistic(std::span<const double> values)
{
    if (values.empty()) {
        throw Error(ErrorCode::InvalidArgument, "ks_statistic of an empty sample");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double m = static_cast<double>(sorted.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        const double cdf = standard_normal_cdf(sorted[k]);
        const double above = static_cast<double>(k + 1) / m - cdf;
        const double below = cdf - static_cast<double>(k) / m;
        worst = std::max({worst, above, below});
    }
    return worst;
}

MomentSummary summarize(std::span<const double> values)
{
    if (values.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "summarize needs at least two values");
    }
    const double m = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= m;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (double v : values) {
        const double c = v - mean;
        const double c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    m2 /= m;
    m3 /= m;
    m4 /= m;

    MomentSummary s;
    s.mean = mean;
    s.variance = m2 * m / (m - 1.0);
    s.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    s.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
    s.ks_statistic = ks_statistic(values);
    return s;
}

std::vector<QqPoint> qq_points(std::span<const double> values)
{
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double m = static_cast<double>(sorted.size());
    std::vector<QqPoint> out;
    out.reserve(sorted.size());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        const double prob = (static_cast<double>(k) + 0.5) / m;
        out.push_back({standard_normal_quantile(prob), sorted[k]});
    }
    return out;
}

std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins)
{
    if (values.empty() || bins == 0) {
        throw Error(ErrorCode::InvalidArgument, "histogram needs data and at least one bin");
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<HistogramBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].left = lo + width * static_cast<double>(b);
        out[b].right = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
        out[b].count = 0;
    }
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        out[std::min(b, bins - 1)].count += 1;
    }
    return out;
}

void write_qq_csv(std::ostream& os, const std::vector<QqPoint>& points)
{
    os << "theoretical_quantile,empirical_quantile\n";
    for (const auto& pt : points) {
        os << format_double(pt.theoretical) << ',' << format_double(pt.empirical) << '\n';
    }
}

void write_histogram_csv(std::ostream& os, const std::vector<HistogramBin>& bins)
{
    os << "bin_left,bin_right,count\n";
    for (const auto& b : bins) {
        os << format_double(b.left) << ',' << format_double(b.right) << ',' << b.count << '\n';
    }
}

} // namespace adacrit
