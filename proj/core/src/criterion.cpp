#include "adacrit/criterion.hpp"

#include "adacrit/error.hpp"

#include <algorithm>
#include <numeric>

namespace adacrit {

CriterionReport crit_adaptive(const FitResult& fit, const SensitivityBundle& bundle,
                              const LossSpec& loss, double eta)
{
    CriterionReport rep;
    const double n = static_cast<double>(fit.residuals.size());
    rep.eta = eta;
    rep.constraint_value = bundle.n_hat / n;

    if (bundle.trace_V <= 1e-12 * n) {
        rep.zero_trace_v = true;
        rep.constraint_ok = false;
        return rep;
    }
    rep.constraint_ok = rep.constraint_value >= eta;
    rep.ratio = bundle.df / bundle.trace_V;
    const Vector proxy = fit.residuals + rep.ratio * psi(loss, fit.residuals);
    rep.crit_adaptive = proxy.squaredNorm();
    rep.crit_per_sample = *rep.crit_adaptive / n;
    return rep;
}

CriterionReport crit_adaptive(const FitResult& fit, const SensitivityBundle& bundle,
                              const LossSpec& loss, const Matrix& sigma, double eta)
{
    CriterionReport rep = crit_adaptive(fit, bundle, loss, eta);
    rep.crit_oracle = crit_oracle_sigma(fit, bundle, sigma, loss);
    return rep;
}

double crit_oracle_sigma(const FitResult& fit, const SensitivityBundle& bundle,
                         const Matrix& sigma, const LossSpec& loss)
{
    const double t = trace_sigma_A(bundle, sigma);
    return (fit.residuals + t * psi(loss, fit.residuals)).squaredNorm();
}

double out_of_sample_error(const Vector& beta_hat, const Vector& beta_star, const Matrix& sigma)
{
    if (beta_hat.size() != beta_star.size() || sigma.rows() != beta_hat.size()
        || sigma.cols() != beta_hat.size()) {
        throw Error(ErrorCode::DimensionMismatch, "out_of_sample_error dimensions disagree");
    }
    const Vector h = beta_hat - beta_star;
    return h.dot(sigma * h);
}

SelectionReport rank_reports(const std::vector<CriterionReport>& reports)
{
    SelectionReport out;
    std::vector<RankedEntry> feasible;
    std::vector<RankedEntry> infeasible;
    for (std::size_t k = 0; k < reports.size(); ++k) {
        RankedEntry e;
        e.index = k;
        e.report = reports[k];
        if (e.report.zero_trace_v || !e.report.crit_adaptive) {
            e.reason = "trace_V is numerically zero";
        } else if (!e.report.constraint_ok) {
            e.reason = "constraint (1/n) sum psi'(r_i) >= eta violated";
        } else {
            e.feasible = true;
        }
        (e.feasible ? feasible : infeasible).push_back(std::move(e));
    }
    std::stable_sort(feasible.begin(), feasible.end(), [](const RankedEntry& a, const RankedEntry& b) {
        return *a.report.crit_adaptive < *b.report.crit_adaptive;
    });
    if (!feasible.empty()) {
        out.selected = feasible.front().index;
    }
    out.ranking = std::move(feasible);
    out.ranking.insert(out.ranking.end(), std::make_move_iterator(infeasible.begin()),
                       std::make_move_iterator(infeasible.end()));
    return out;
}

SelectionReport rank_candidates(const std::vector<Candidate>& candidates, double eta)
{
    std::vector<CriterionReport> reports;
    reports.reserve(candidates.size());
    for (const auto& c : candidates) {
        reports.push_back(crit_adaptive(*c.fit, *c.bundle, c.loss, eta));
    }
    return rank_reports(reports);
}

SelectionReport select(const std::vector<Candidate>& candidates, double eta)
{
    if (candidates.empty()) {
        throw Error(ErrorCode::InvalidArgument, "select requires at least one candidate");
    }
    SelectionReport rep = rank_candidates(candidates, eta);
    if (!rep.selected) {
        throw Error(ErrorCode::NoFeasibleCandidate,
                    "no candidate satisfies (1/n) sum psi'(r_i) >= " + std::to_string(eta));
    }
    return rep;
}

} // namespace adacrit
