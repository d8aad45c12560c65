#include "adacrit/sensitivity.hpp"

#include "adacrit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace adacrit {

namespace {

Matrix active_columns(const Matrix& X, const std::vector<Index>& active)
{
    Matrix out(X.rows(), static_cast<Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
        out.col(static_cast<Index>(k)) = X.col(active[k]);
    }
    return out;
}

// Psi' v for the (possibly rank-corrected) weighting.
Vector apply_psi_weight(const Vector& d, bool intercept, const Vector& v)
{
    Vector out = d.cwiseProduct(v);
    if (intercept) {
        out -= d * (d.dot(v) / d.sum());
    }
    return out;
}

Matrix apply_psi_weight(const Vector& d, bool intercept, const Matrix& M)
{
    Matrix out = d.asDiagonal() * M;
    if (intercept) {
        const Eigen::RowVectorXd proj = d.transpose() * M / d.sum();
        out -= d * proj;
    }
    return out;
}

FitOptions warm(const FitOptions& options, const FitResult& base)
{
    FitOptions o = options;
    o.initial_point = base.beta_hat;
    o.initial_intercept = base.intercept_hat;
    return o;
}

FitResult refit_checked(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                        const FitOptions& options)
{
    FitResult f = fit(data, loss, penalty, options);
    if (!f.converged) {
        throw Error(ErrorCode::NonConvergence,
                    "finite-difference refit stopped with KKT residual "
                        + std::to_string(f.kkt_residual));
    }
    return f;
}

} // namespace

Matrix SensitivityBundle::A_full() const
{
    Matrix full = Matrix::Zero(p, p);
    for (std::size_t a = 0; a < active_set.size(); ++a) {
        for (std::size_t b = 0; b < active_set.size(); ++b) {
            full(active_set[a], active_set[b]) =
                A_hat(static_cast<Index>(a), static_cast<Index>(b));
        }
    }
    return full;
}

SensitivityBundle sensitivity_closed_form(const Dataset& data, const LossSpec& loss,
                                          const PenaltySpec& penalty, const FitResult& fit)
{
    if (fit.beta_hat.size() != data.p() || fit.residuals.size() != data.n()) {
        throw Error(ErrorCode::DimensionMismatch, "fit does not match dataset dimensions");
    }

    SensitivityBundle b;
    b.n = data.n();
    b.p = data.p();
    b.intercept = fit.has_intercept;
    b.active_set = fit.active_set;
    b.p_hat = static_cast<Index>(fit.active_set.size());
    b.psi_prime_diag = psi_prime(loss, fit.residuals);
    b.psi_residuals = psi(loss, fit.residuals);
    b.n_hat = b.psi_prime_diag.sum();
    b.tau_eff = std::max(penalty.tau, kRidgeFloor);

    const Vector& d = b.psi_prime_diag;
    double trace_weight = b.n_hat;
    if (b.intercept) {
        if (b.n_hat == 0.0) {
            throw Error(ErrorCode::DegenerateFit,
                        "intercept fit with every residual outside the quadratic regime");
        }
        trace_weight = b.n_hat - d.squaredNorm() / b.n_hat;
    }

    const Matrix XS = active_columns(data.X, b.active_set);
    b.weighted_active = apply_psi_weight(d, b.intercept, XS);

    const double nd = static_cast<double>(b.n);
    if (b.p_hat == 0) {
        b.A_hat = Matrix(0, 0);
        b.df = b.intercept ? 1.0 : 0.0;
        b.trace_V = trace_weight;
        return b;
    }

    const Matrix gram = XS.transpose() * b.weighted_active; // X_S^T Psi' X_S
    Matrix M = gram;
    M.diagonal().array() += nd * b.tau_eff;

    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-16)) {
        throw Error(ErrorCode::SingularSystem, "active-set system is numerically singular");
    }
    b.A_hat = llt.solve(Matrix::Identity(b.p_hat, b.p_hat));
    b.A_hat = 0.5 * (b.A_hat + b.A_hat.transpose());

    // tr[M^{-1} X_S^T Psi' X_S] and tr[M^{-1} W^T W]
    const double trace_hat = b.A_hat.cwiseProduct(gram).sum();
    const Matrix WtW = b.weighted_active.transpose() * b.weighted_active;
    const double trace_sq = b.A_hat.cwiseProduct(WtW).sum();

    b.df = trace_hat + (b.intercept ? 1.0 : 0.0);
    b.trace_V = trace_weight - trace_sq;
    return b;
}

Matrix jacobian_y(const SensitivityBundle& bundle, const Dataset& data, const FitResult& fit)
{
    (void)fit;
    Matrix J = Matrix::Zero(data.p(), data.n());
    if (bundle.p_hat == 0) {
        return J;
    }
    const Matrix active_rows = bundle.A_hat * bundle.weighted_active.transpose();
    for (std::size_t a = 0; a < bundle.active_set.size(); ++a) {
        J.row(bundle.active_set[a]) = active_rows.row(static_cast<Index>(a));
    }
    return J;
}

Vector intercept_jacobian_y(const SensitivityBundle& bundle, const Dataset& data,
                            const FitResult& fit)
{
    if (!bundle.intercept) {
        return Vector::Zero(data.n());
    }
    // d^T (I - X J) / n_hat
    const Matrix J = jacobian_y(bundle, data, fit);
    const Vector& d = bundle.psi_prime_diag;
    const Eigen::RowVectorXd dX = d.transpose() * data.X;
    return (d.transpose() - dX * J).transpose() / bundle.n_hat;
}

Vector jacobian_x_entry(const SensitivityBundle& bundle, const Dataset& data,
                        const FitResult& fit, Index i, Index j)
{
    if (i < 0 || i >= data.n() || j < 0 || j >= data.p()) {
        throw Error(ErrorCode::InvalidArgument, "entry index out of range");
    }
    Vector out = Vector::Zero(data.p());
    if (bundle.p_hat == 0) {
        return out;
    }
    const auto it = std::find(bundle.active_set.begin(), bundle.active_set.end(), j);
    Vector local = Vector::Zero(bundle.p_hat);
    if (it != bundle.active_set.end()) {
        const Index k = static_cast<Index>(it - bundle.active_set.begin());
        local = bundle.A_hat.col(k) * bundle.psi_residuals[i];
    }
    local -= fit.beta_hat[j] * (bundle.A_hat * bundle.weighted_active.row(i).transpose());
    for (std::size_t a = 0; a < bundle.active_set.size(); ++a) {
        out[bundle.active_set[a]] = local[static_cast<Index>(a)];
    }
    return out;
}

double trace_sigma_A(const SensitivityBundle& bundle, const Matrix& sigma)
{
    if (sigma.rows() != bundle.p || sigma.cols() != bundle.p) {
        throw Error(ErrorCode::DimensionMismatch, "Sigma must be p x p");
    }
    double total = 0.0;
    for (std::size_t a = 0; a < bundle.active_set.size(); ++a) {
        for (std::size_t c = 0; c < bundle.active_set.size(); ++c) {
            total += sigma(bundle.active_set[a], bundle.active_set[c])
                     * bundle.A_hat(static_cast<Index>(c), static_cast<Index>(a));
        }
    }
    return total;
}

Vector apply_V(const SensitivityBundle& bundle, const Vector& v)
{
    if (v.size() != bundle.n) {
        throw Error(ErrorCode::DimensionMismatch, "vector length differs from n");
    }
    Vector out = apply_psi_weight(bundle.psi_prime_diag, bundle.intercept, v);
    if (bundle.p_hat > 0) {
        out -= bundle.weighted_active * (bundle.A_hat * (bundle.weighted_active.transpose() * v));
    }
    return out;
}

Matrix intercept_psi_matrix(const Vector& d)
{
    const double total = d.sum();
    if (total == 0.0) {
        throw Error(ErrorCode::DegenerateFit, "sum of psi'(r) is zero");
    }
    Matrix out = -(d * d.transpose()) / total;
    out.diagonal() += d;
    return out;
}

Matrix intercept_psi_matrix(const FitResult& fit, const LossSpec& loss)
{
    return intercept_psi_matrix(psi_prime(loss, fit.residuals));
}

double kink_margin(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                   const FitResult& fit)
{
    double margin = std::numeric_limits<double>::infinity();
    if (!loss.is_square()) {
        for (Index i = 0; i < fit.residuals.size(); ++i) {
            margin = std::min(margin, std::abs(std::abs(fit.residuals[i]) - loss.scale));
        }
    }
    if (penalty.lambda > 0.0) {
        const Vector score =
            data.X.transpose() * psi(loss, fit.residuals) / static_cast<double>(data.n());
        for (Index j = 0; j < fit.beta_hat.size(); ++j) {
            if (fit.beta_hat[j] == 0.0) {
                margin = std::min(margin, penalty.lambda - std::abs(score[j]));
            } else {
                margin = std::min(margin, std::abs(fit.beta_hat[j]));
            }
        }
    }
    return margin;
}

FdSensitivity sensitivity_fd_oracle(const Dataset& data, const LossSpec& loss,
                                    const PenaltySpec& penalty, const FitOptions& options,
                                    double step)
{
    if (!(step > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "finite-difference step must be positive");
    }
    FdSensitivity out;
    out.base = refit_checked(data, loss, penalty, options);
    const FitOptions warm_opts = warm(options, out.base);

    const Index n = data.n();
    const Index p = data.p();
    out.jacobian = Matrix::Zero(p, n);
    out.intercept_jacobian = Vector::Zero(n);

    Dataset perturbed = data;
    for (Index i = 0; i < n; ++i) {
        const double h = step * (1.0 + std::abs(data.y[i]));
        perturbed.y[i] = data.y[i] + h;
        const FitResult plus = refit_checked(perturbed, loss, penalty, warm_opts);
        perturbed.y[i] = data.y[i] - h;
        const FitResult minus = refit_checked(perturbed, loss, penalty, warm_opts);
        perturbed.y[i] = data.y[i];
        out.jacobian.col(i) = (plus.beta_hat - minus.beta_hat) / (2.0 * h);
        out.intercept_jacobian[i] = (plus.intercept_hat - minus.intercept_hat) / (2.0 * h);
    }

    // Jacobian of fitted values X beta + 1 b0 in y
    const Vector d = psi_prime(loss, out.base.residuals);
    double df = 0.0;
    double trace_V = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double h_ii = data.X.row(i).dot(out.jacobian.col(i)) + out.intercept_jacobian[i];
        df += h_ii;
        trace_V += d[i] * (1.0 - h_ii);
    }
    out.df = df;
    out.trace_V = trace_V;
    return out;
}

Vector jacobian_x_entry_fd(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                           const FitOptions& options, const FitResult& base, Index i, Index j,
                           double step)
{
    const FitOptions warm_opts = warm(options, base);
    const double h = step * (1.0 + std::abs(data.X(i, j)));
    Dataset perturbed = data;
    perturbed.X(i, j) = data.X(i, j) + h;
    const FitResult plus = refit_checked(perturbed, loss, penalty, warm_opts);
    perturbed.X(i, j) = data.X(i, j) - h;
    const FitResult minus = refit_checked(perturbed, loss, penalty, warm_opts);
    return (plus.beta_hat - minus.beta_hat) / (2.0 * h);
}

double ContractionReport::residual(int identity) const
{
    switch (identity) {
    case 1: return (lhs1 - rhs1).cwiseAbs().maxCoeff();
    case 2: return (lhs2 - rhs2).cwiseAbs().maxCoeff();
    case 3: return std::abs(lhs3 - rhs3);
    case 4: return std::abs(lhs4 - rhs4);
    case 5: return std::abs(lhs5 - rhs5);
    default: throw Error(ErrorCode::InvalidArgument, "contraction identity must be in 1..5");
    }
}

double ContractionReport::max_residual() const
{
    double worst = 0.0;
    for (int k = 1; k <= 5; ++k) {
        worst = std::max(worst, residual(k));
    }
    return worst;
}

ContractionReport contraction_check(const Dataset& data, const LossSpec& loss,
                                    const PenaltySpec& penalty, const FitResult& fit,
                                    const SensitivityBundle& bundle, const Vector& beta_star,
                                    const FitOptions& options, double step)
{
    if (fit.has_intercept) {
        throw Error(ErrorCode::InvalidArgument, "contraction identities assume no intercept");
    }
    if (beta_star.size() != data.p()) {
        throw Error(ErrorCode::DimensionMismatch, "beta_star length differs from p");
    }
    const Index n = data.n();
    const Index p = data.p();
    const Matrix& G = data.X;
    const Vector eps = data.y - G * beta_star;

    const Vector h = fit.beta_hat - beta_star;
    const Vector ps = psi(loss, fit.residuals);
    const Vector Gh = G * h;
    const Vector Gtps = G.transpose() * ps;

    ContractionReport rep;
    rep.lhs1 = Vector::Zero(n);
    rep.lhs2 = Vector::Zero(p);

    const FitOptions warm_opts = warm(options, fit);
    Dataset perturbed = data;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
            const double dg = step * (1.0 + std::abs(G(i, j)));
            auto solve_at = [&](double offset) {
                perturbed.X(i, j) = G(i, j) + offset;
                perturbed.y[i] = perturbed.X.row(i).dot(beta_star) + eps[i];
                const FitResult f = refit_checked(perturbed, loss, penalty, warm_opts);
                Vector psi_f = psi(loss, f.residuals);
                return std::pair<Vector, Vector>{f.beta_hat - beta_star, std::move(psi_f)};
            };
            const auto [h_plus, psi_plus] = solve_at(dg);
            const auto [h_minus, psi_minus] = solve_at(-dg);
            perturbed.X(i, j) = G(i, j);
            perturbed.y[i] = data.y[i];

            const Vector dh = (h_plus - h_minus) / (2.0 * dg);
            const Vector dpsi = (psi_plus - psi_minus) / (2.0 * dg);

            rep.lhs1[i] += dh[j];
            rep.lhs2[j] += dpsi[i];
            rep.lhs3 += dh[j] * ps[i] + h[j] * dpsi[i];
            // d(e_i^T G h)/dg_ij = h_j + e_i^T G dh
            rep.lhs4 += dh[j] * Gh[i] + h[j] * (h[j] + G.row(i).dot(dh));
            // d(e_j^T G^T psi)/dg_ij = psi_i + e_j^T G^T dpsi
            rep.lhs5 += dpsi[i] * Gtps[j] + ps[i] * (ps[i] + G.col(j).dot(dpsi));
        }
    }

    const Matrix A = bundle.A_full();
    const Vector& d = bundle.psi_prime_diag;
    const double trA = A.trace();
    const double trV = bundle.trace_V;
    const double df = bundle.df;
    const Vector Ah = A * h;
    const Vector GAh = G * Ah;
    const Vector Dpsi = d.cwiseProduct(ps);
    const Vector AGtDpsi = A * (G.transpose() * Dpsi);
    const Vector DGh = d.cwiseProduct(Gh);

    rep.rhs1 = trA * ps - d.cwiseProduct(GAh);
    rep.rhs2 = -AGtDpsi - trV * h;
    rep.rhs3 = ps.squaredNorm() * trA - 2.0 * Dpsi.dot(GAh) - h.squaredNorm() * trV;
    rep.rhs4 = trA * ps.dot(Gh) - Ah.dot(G.transpose() * DGh) + static_cast<double>(n) * h.squaredNorm()
               + ps.dot(GAh) - h.squaredNorm() * df;
    rep.rhs5 = -Gtps.dot(AGtDpsi) - trV * ps.dot(Gh) - Gh.dot(apply_V(bundle, ps))
               + (static_cast<double>(p) - df) * ps.squaredNorm();
    return rep;
}

} // namespace adacrit
