#include "adacrit/error.hpp"
#include "adacrit/model.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace adacrit;

TEST(Psi, HuberQuadraticRegime)
{
    EXPECT_DOUBLE_EQ(psi(LossSpec::huber(1.0), 0.5), 0.5);
}

TEST(Psi, HuberClipped)
{
    EXPECT_DOUBLE_EQ(psi(LossSpec::huber(1.0), 3.0), 1.0);
    EXPECT_DOUBLE_EQ(psi(LossSpec::huber(1.0), -3.0), -1.0);
}

TEST(Psi, Square)
{
    EXPECT_DOUBLE_EQ(psi(LossSpec::square(), -2.0), -2.0);
}

TEST(PsiPrime, Examples)
{
    const auto h = LossSpec::huber(1.0);
    EXPECT_EQ(psi_prime(h, 0.999), 1.0);
    EXPECT_EQ(psi_prime(h, 1.001), 0.0);
    EXPECT_EQ(psi_prime(LossSpec::square(), 57.0), 1.0);
}

TEST(PsiPrime, ClosedAtKink)
{
    const auto h = LossSpec::huber(2.0);
    EXPECT_EQ(psi_prime(h, 2.0), 1.0);
    EXPECT_EQ(psi_prime(h, -2.0), 1.0);
}

TEST(Rho, HuberMatchesScaledH)
{
    const auto h = LossSpec::huber(2.0);
    EXPECT_DOUBLE_EQ(rho(h, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(rho(h, 5.0), 4.0 * (2.5 - 0.5));
    EXPECT_DOUBLE_EQ(rho(LossSpec::square(), 3.0), 4.5);
}

TEST(LossSpec, RejectsNonPositiveScale)
{
    EXPECT_THROW(LossSpec::huber(0.0), Error);
    EXPECT_THROW(LossSpec::huber(-1.0), Error);
}

TEST(LossProx, Examples)
{
    EXPECT_DOUBLE_EQ(loss_prox(LossSpec::square(), 2.0, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(loss_prox(LossSpec::huber(1.0), 5.0, 2.0), 3.0);
}

TEST(LossProx, MatchesBisection)
{
    const auto h = LossSpec::huber(1.0);
    const double z = oracle::bisection([&](double v) { return v + 2.0 * psi(h, v) - 5.0; },
                                       -10.0, 10.0);
    EXPECT_NEAR(loss_prox(h, 5.0, 2.0), z, 1e-12);
}

TEST(LossProx, RejectsNonPositiveStep)
{
    EXPECT_THROW(loss_prox(LossSpec::square(), 1.0, 0.0), Error);
}

TEST(LossProx, RoundTrip)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z(0.0, 3.0);
    std::uniform_real_distribution<double> t(0.01, 10.0);
    std::uniform_real_distribution<double> scale(0.1, 5.0);
    for (int k = 0; k < 10000; ++k) {
        const LossSpec loss = k % 2 ? LossSpec::huber(scale(rng)) : LossSpec::square();
        const double x = z(rng);
        const double step = t(rng);
        const double u = x + step * psi(loss, x);
        EXPECT_NEAR(loss_prox(loss, u, step), x, 1e-12 * (std::abs(u) + 1.0));
    }
}

TEST(LossProx, SolvesDefiningEquation)
{
    std::mt19937_64 rng(12);
    std::normal_distribution<double> u(0.0, 10.0);
    std::uniform_real_distribution<double> t(1e-3, 20.0);
    std::uniform_real_distribution<double> scale(0.1, 5.0);
    for (int k = 0; k < 10000; ++k) {
        const LossSpec loss = LossSpec::huber(scale(rng));
        const double a = u(rng);
        const double step = t(rng);
        const double z = loss_prox(loss, a, step);
        ASSERT_LE(std::abs(z + step * psi(loss, z) - a), 1e-12 * (std::abs(a) + 1.0));
    }
}

TEST(PsiProperty, MonotoneAndOneLipschitz)
{
    std::mt19937_64 rng(13);
    std::normal_distribution<double> u(0.0, 4.0);
    std::uniform_real_distribution<double> scale(0.05, 5.0);
    for (int k = 0; k < 10000; ++k) {
        const LossSpec loss = LossSpec::huber(scale(rng));
        const double a = u(rng), b = u(rng);
        const double da = psi(loss, b) - psi(loss, a);
        ASSERT_LE(std::abs(da), std::abs(b - a) + 1e-15);
        ASSERT_GE(da * (b - a), 0.0);
        ASSERT_LE(std::abs(psi(loss, a)), loss.scale);
        ASSERT_GE(psi_prime(loss, a), 0.0);
        ASSERT_LE(psi_prime(loss, a), 1.0);
    }
    EXPECT_EQ(psi(LossSpec::huber(0.3), 0.0), 0.0);
}

TEST(PsiProperty, DerivativeMatchesFiniteDifference)
{
    std::mt19937_64 rng(14);
    std::normal_distribution<double> u(0.0, 3.0);
    std::uniform_real_distribution<double> scale(0.1, 3.0);
    const double h = 1e-7;
    int checked = 0;
    while (checked < 10000) {
        const LossSpec loss = LossSpec::huber(scale(rng));
        const double x = u(rng);
        if (std::abs(std::abs(x) - loss.scale) <= 1e-3) {
            continue;
        }
        const double slope = (psi(loss, x + h) - psi(loss, x - h)) / (2 * h);
        ASSERT_NEAR(psi_prime(loss, x), slope, 1e-6);
        ++checked;
    }
}

TEST(PenaltyValue, Examples)
{
    EXPECT_DOUBLE_EQ(penalty_value(PenaltySpec::elastic_net(1.0, 0.0), Vector{{1.0, -2.0}}), 3.0);
    EXPECT_DOUBLE_EQ(penalty_value(PenaltySpec::elastic_net(0.0, 2.0), Vector{{1.0, 1.0}}), 2.0);
    EXPECT_DOUBLE_EQ(penalty_value(PenaltySpec::elastic_net(0.5, 1.0), Vector{{2.0, 0.0}}), 3.0);
}

TEST(PenaltyValue, MinimizedAtZero)
{
    std::mt19937_64 rng(15);
    const auto pen = PenaltySpec::elastic_net(0.3, 0.7);
    EXPECT_EQ(penalty_value(pen, Vector::Zero(5)), 0.0);
    for (int k = 0; k < 100; ++k) {
        EXPECT_GE(penalty_value(pen, oracle::random_vector(5, rng)), 0.0);
    }
}

TEST(PenaltySpec, Factories)
{
    const auto r = PenaltySpec::ridge(0.4);
    EXPECT_EQ(r.lambda, 0.0);
    EXPECT_EQ(r.tau, 0.4);
    const auto l = PenaltySpec::lasso(0.2);
    EXPECT_EQ(l.tau, 0.0);
    EXPECT_THROW(PenaltySpec::elastic_net(-1.0, 0.0), Error);
    EXPECT_DOUBLE_EQ(PenaltySpec::elastic_net(0.1, 0.6).strong_convexity(3.0), 0.2);
}

TEST(PenaltyProx, Examples)
{
    const Vector a = penalty_prox(PenaltySpec::elastic_net(1.0, 0.0), Vector{{3.0, -0.5}}, 1.0);
    EXPECT_DOUBLE_EQ(a[0], 2.0);
    EXPECT_EQ(a[1], 0.0);
    const Vector b = penalty_prox(PenaltySpec::elastic_net(0.0, 1.0), Vector{{4.0}}, 1.0);
    EXPECT_DOUBLE_EQ(b[0], 2.0);
    const Vector c = penalty_prox(PenaltySpec::elastic_net(1.0, 1.0), Vector{{2.0}}, 0.5);
    EXPECT_DOUBLE_EQ(c[0], 1.0);
}

TEST(PenaltyProx, ThirdExampleMatchesGridSearch)
{
    const auto pen = PenaltySpec::elastic_net(1.0, 1.0);
    const double x = oracle::grid_min_1d(
        [&](double b) { return (b - 2.0) * (b - 2.0) / (2 * 0.5) + std::abs(b) + 0.5 * b * b; },
        -3.0, 3.0, 1e-5);
    EXPECT_NEAR(penalty_prox(pen, 2.0, 0.5), x, 1e-4);
}

TEST(PenaltyProx, MatchesGridSearchOnRandomInputs)
{
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> v(-3.0, 3.0);
    std::uniform_real_distribution<double> w(0.0, 2.0);
    std::uniform_real_distribution<double> s(0.1, 2.0);
    for (int k = 0; k < 40; ++k) {
        const auto pen = PenaltySpec::elastic_net(w(rng), w(rng));
        const double a = v(rng);
        const double step = s(rng);
        const double x = oracle::grid_min_1d(
            [&](double b) {
                return (b - a) * (b - a) / (2 * step) + pen.lambda * std::abs(b)
                       + 0.5 * pen.tau * b * b;
            },
            -4.0, 4.0, 1e-5);
        ASSERT_NEAR(penalty_prox(pen, a, step), x, 1e-4);
    }
}

TEST(PenaltyProx, ExactZerosAndValidation)
{
    const auto pen = PenaltySpec::lasso(1.0);
    const Vector out = penalty_prox(pen, Vector{{0.99, -0.2, 1.0}}, 1.0);
    EXPECT_EQ(out[0], 0.0);
    EXPECT_EQ(out[1], 0.0);
    EXPECT_EQ(out[2], 0.0);
    EXPECT_THROW(penalty_prox(pen, Vector{{1.0}}, 0.0), Error);
}

TEST(Dataset, Validation)
{
    EXPECT_THROW(Dataset(Matrix(0, 2), Vector(0)), Error);
    EXPECT_THROW(Dataset(Matrix::Zero(3, 2), Vector::Zero(2)), Error);
    Matrix X = Matrix::Zero(2, 2);
    X(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(Dataset(X, Vector::Zero(2)), Error);
    const Dataset ok(Matrix::Ones(3, 2), Vector::Zero(3));
    EXPECT_EQ(ok.n(), 3);
    EXPECT_EQ(ok.p(), 2);
}

TEST(VectorHelpers, ElementwiseAgreeWithScalar)
{
    const auto h = LossSpec::huber(1.0);
    const Vector u{{-2.0, -0.5, 0.0, 1.0, 4.0}};
    const Vector a = psi(h, u);
    const Vector b = psi_prime(h, u);
    for (Index i = 0; i < u.size(); ++i) {
        EXPECT_EQ(a[i], psi(h, u[i]));
        EXPECT_EQ(b[i], psi_prime(h, u[i]));
    }
}
