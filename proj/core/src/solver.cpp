#include "adacrit/solver.hpp"

#include "adacrit/error.hpp"

#include <algorithm>
#include <cmath>

namespace adacrit {

namespace {

double mean_loss(const LossSpec& loss, const Vector& r)
{
    double total = 0.0;
    for (Index i = 0; i < r.size(); ++i) {
        total += rho(loss, r[i]);
    }
    return total / static_cast<double>(r.size());
}

// Largest squared singular value of [1 X] (or X), by power iteration on the Gram operator.
double gram_operator_norm(const Matrix& X, bool with_intercept)
{
    const Index p = X.cols();
    Vector v = Vector::LinSpaced(p, 1.0, 2.0);
    double v0 = with_intercept ? 1.5 : 0.0;
    double estimate = 0.0;
    for (int it = 0; it < 500; ++it) {
        const double norm = std::sqrt(v.squaredNorm() + v0 * v0);
        if (norm == 0.0) {
            break;
        }
        v /= norm;
        v0 /= norm;
        Vector u = X * v;
        if (with_intercept) {
            u.array() += v0;
        }
        const double next = u.squaredNorm();
        v = X.transpose() * u;
        v0 = with_intercept ? u.sum() : 0.0;
        if (std::abs(next - estimate) <= 1e-9 * next) {
            estimate = next;
            break;
        }
        estimate = next;
    }
    return estimate;
}

double kkt_from_gradient(const PenaltySpec& penalty, const Vector& beta, const Vector& score)
{
    // score = (1/n) X^T psi(r)
    double worst = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        const double b = beta[j];
        double dist;
        if (b != 0.0) {
            dist = std::abs(score[j] - penalty.lambda * (b > 0.0 ? 1.0 : -1.0) - penalty.tau * b);
        } else {
            dist = std::max(0.0, std::abs(score[j]) - penalty.lambda);
        }
        worst = std::max(worst, dist);
    }
    return worst;
}

} // namespace

std::vector<Index> support_of(const Vector& beta)
{
    std::vector<Index> active;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta[j] != 0.0) {
            active.push_back(j);
        }
    }
    return active;
}

double objective(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                 const Vector& beta, double intercept)
{
    Vector r = data.y - data.X * beta;
    r.array() -= intercept;
    return mean_loss(loss, r) + penalty_value(penalty, beta);
}

double kkt_residual(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                    const Vector& beta, double intercept, bool with_intercept)
{
    if (beta.size() != data.p()) {
        throw Error(ErrorCode::DimensionMismatch, "beta length differs from design columns");
    }
    const double n = static_cast<double>(data.n());
    Vector r = data.y - data.X * beta;
    r.array() -= intercept;
    const Vector score_psi = psi(loss, r);
    const Vector score = data.X.transpose() * score_psi / n;
    double worst = kkt_from_gradient(penalty, beta, score);
    if (with_intercept) {
        worst = std::max(worst, std::abs(score_psi.sum() / n));
    }
    return worst;
}

FitResult fit(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
              const FitOptions& options)
{
    const Index n = data.n();
    const Index p = data.p();
    const double nd = static_cast<double>(n);
    const bool icpt = options.intercept;
    const double tol = options.kkt_tolerance;

    if (!(tol > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "kkt_tolerance must be positive");
    }
    if (options.max_iterations < 1) {
        throw Error(ErrorCode::InvalidArgument, "max_iterations must be positive");
    }
    if (penalty.lambda == 0.0 && penalty.tau == 0.0 && p > n) {
        throw Error(ErrorCode::IllPosed, "lambda = tau = 0 with p > n has no unique minimizer");
    }

    Vector x = Vector::Zero(p);
    double x0 = 0.0;
    if (options.initial_point) {
        if (options.initial_point->size() != p) {
            throw Error(ErrorCode::DimensionMismatch, "initial_point length differs from p");
        }
        x = *options.initial_point;
    }
    if (icpt) {
        x0 = options.initial_intercept;
    }

    const double col_norm_max = data.X.colwise().norm().maxCoeff();
    // psi is 1-Lipschitz, so ||[1 X]||_op^2 / n bounds the gradient's Lipschitz constant;
    // backtracking only corrects an underestimate from power iteration.
    const double lipschitz_bound = std::max(gram_operator_norm(data.X, icpt) / nd, 1e-12);
    double lipschitz = lipschitz_bound;

    auto residual_of = [&](const Vector& b, double b0) {
        Vector r = data.y - data.X * b;
        if (icpt) {
            r.array() -= b0;
        }
        return r;
    };

    Vector r_x = residual_of(x, x0);
    double f_x = mean_loss(loss, r_x);
    double obj_x = f_x + penalty_value(penalty, x);

    Vector x_prev = x;
    double x0_prev = x0;
    Vector r_prev = r_x;
    double t_k = 1.0;

    FitResult result;
    result.has_intercept = icpt;

    auto exact_kkt = [&](const Vector& b, const Vector& r) {
        const Vector ps = psi(loss, r);
        const Vector score = data.X.transpose() * ps / nd;
        double worst = kkt_from_gradient(penalty, b, score);
        if (icpt) {
            worst = std::max(worst, std::abs(ps.sum() / nd));
        }
        return worst;
    };

    double kkt = exact_kkt(x, r_x);
    int iter = 0;
    while (kkt > tol && iter < options.max_iterations) {
        ++iter;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_k * t_k));
        const double mom = (t_k - 1.0) / t_next;

        const Vector yv = x + mom * (x - x_prev);
        const double y0 = x0 + mom * (x0 - x0_prev);
        const Vector r_y = r_x + mom * (r_x - r_prev);

        const double f_y = mean_loss(loss, r_y);
        const Vector psi_y = psi(loss, r_y);
        const Vector grad = -(data.X.transpose() * psi_y) / nd;
        const double grad0 = icpt ? -psi_y.sum() / nd : 0.0;

        Vector xn;
        double x0n = 0.0;
        Vector r_n;
        double f_n = 0.0;
        for (;;) {
            const double step = 1.0 / lipschitz;
            xn = penalty_prox(penalty, yv - step * grad, step);
            x0n = icpt ? y0 - step * grad0 : 0.0;
            r_n = residual_of(xn, x0n);
            f_n = mean_loss(loss, r_n);
            const Vector dx = xn - yv;
            const double d0 = x0n - y0;
            const double model = f_y + grad.dot(dx) + grad0 * d0
                                 + 0.5 * lipschitz * (dx.squaredNorm() + d0 * d0);
            // sums of n loss terms carry rounding well above the quadratic term near optimum
            if (f_n <= model + 1e-13 * (1.0 + std::abs(f_y)) || lipschitz >= 64.0 * lipschitz_bound) {
                break;
            }
            lipschitz *= 2.0;
        }

        const double obj_n = f_n + penalty_value(penalty, xn);
        if (obj_n > obj_x && mom > 0.0) {
            // restart momentum from the current iterate
            x_prev = x;
            x0_prev = x0;
            r_prev = r_x;
            t_k = 1.0;
            continue;
        }

        // Cheap upper bound on the KKT residual at xn, from the prox optimality condition.
        const double bound = col_norm_max / nd * (r_n - r_y).norm()
                             + (icpt ? std::sqrt(nd) / nd * (r_n - r_y).norm() : 0.0)
                             + lipschitz * std::max((xn - yv).cwiseAbs().maxCoeff(),
                                                    std::abs(x0n - y0));

        x_prev = std::move(x);
        x0_prev = x0;
        r_prev = std::move(r_x);
        x = std::move(xn);
        x0 = x0n;
        r_x = std::move(r_n);
        obj_x = obj_n;
        t_k = t_next;

        if (bound <= 50.0 * tol || iter % 25 == 0) {
            kkt = exact_kkt(x, r_x);
        }
    }

    result.beta_hat = x;
    result.intercept_hat = icpt ? x0 : 0.0;
    result.residuals = residual_of(x, result.intercept_hat);
    result.active_set = support_of(x);
    result.iterations = iter;
    result.kkt_residual = exact_kkt(x, result.residuals);
    result.objective = mean_loss(loss, result.residuals) + penalty_value(penalty, x);
    result.converged = result.kkt_residual <= tol;
    if (icpt) {
        result.degenerate = psi_prime(loss, result.residuals).sum() == 0.0;
    }
    return result;
}

FitResult fit_with_intercept(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                             FitOptions options)
{
    options.intercept = true;
    return fit(data, loss, penalty, options);
}

} // namespace adacrit
