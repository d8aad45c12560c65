#include "adacrit/error.hpp"
#include "adacrit/simulation.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace adacrit;
using namespace adacrit::sim;

namespace {

const char* kConfig = R"({
  "n": 40, "p": 20, "sigma_seed": 5,
  "noise_kind": {"type": "student_t", "dof": 2},
  "signal_kind": "paper_sparse",
  "grid": [
    {"loss": "huber", "huber_scale": 0.34, "lambda": 0.01, "tau": 0.01},
    {"loss": "square", "lambda": 0.02, "tau": 0.1}
  ],
  "replications": 4, "base_seed": 11
})";

std::string serialize(const GridResult& r)
{
    std::ostringstream os;
    write_grid_csv(os, r);
    return os.str();
}

ErrorCode parse_error_code(const std::string& text)
{
    try {
        parse_sim_config(text);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST(Covariance, UnitDiagonalPsdDeterministic)
{
    const Matrix s = make_covariance(50, 7);
    EXPECT_EQ(s.diagonal(), Vector::Ones(50));
    EXPECT_EQ((s - s.transpose()).norm(), 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
    EXPECT_EQ((make_covariance(50, 7) - s).norm(), 0.0);
    EXPECT_GT((make_covariance(50, 8) - s).norm(), 0.0);
    // Entries are k / (2p) for integer k with the same parity as 2p.
    for (Index i = 0; i < 50; ++i) {
        for (Index j = 0; j < 50; ++j) {
            const double k = s(i, j) * 100.0;
            EXPECT_NEAR(k, std::round(k), 1e-9);
        }
    }
    const DesignSampler sampler(make_covariance(30, 2));
    EXPECT_LE((sampler.factor() * sampler.factor().transpose() - sampler.sigma()).norm(), 1e-10);
}

TEST(Signal, Examples)
{
    const Vector s = make_signal(1000);
    for (Index j = 0; j < 100; ++j) {
        EXPECT_DOUBLE_EQ(s[j], std::sqrt(10.0) / 10.0);
    }
    EXPECT_EQ(s.tail(900).norm(), 0.0);
    // 100 entries of squared value 1000 / 10^4.
    EXPECT_NEAR(s.squaredNorm(), 10.0, 1e-12);
    EXPECT_EQ((make_signal(3000).array() != 0.0).count(), 100);
    const Vector t = make_signal(10);
    EXPECT_DOUBLE_EQ(t[0], std::sqrt(10.0) / 100.0);
    EXPECT_EQ(t.tail(9).norm(), 0.0);
    EXPECT_EQ((make_signal(15).array() != 0.0).count(), 2);
}

TEST(LogSpaced, Endpoints)
{
    const auto v = log_spaced(0.0032, 0.041, 4);
    ASSERT_EQ(v.size(), 4u);
    EXPECT_DOUBLE_EQ(v.front(), 0.0032);
    EXPECT_DOUBLE_EQ(v.back(), 0.041);
    EXPECT_NEAR(v[1] / v[0], v[2] / v[1], 1e-12);
}

TEST(Generate, NoiselessAndDeterministic)
{
    const Matrix sigma = make_covariance(10, 1);
    const Vector beta = make_signal(10);
    const auto a = generate(30, sigma, beta, NoiseKind::gaussian(0.0), 4);
    EXPECT_EQ((a.data.y - a.data.X * beta).norm(), 0.0);
    EXPECT_EQ(a.eps.norm(), 0.0);
    const auto b = generate(30, sigma, beta, NoiseKind::student_t(2.0), 4);
    const auto c = generate(30, sigma, beta, NoiseKind::student_t(2.0), 4);
    EXPECT_EQ((b.data.X - c.data.X).norm(), 0.0);
    EXPECT_EQ((b.eps - c.eps).norm(), 0.0);
    EXPECT_EQ(b.data.y, b.data.X * beta + b.eps);
}

TEST(Generate, SampleCovarianceConverges)
{
    const int p = 20;
    const Matrix sigma = make_covariance(p, 3);
    const auto s = generate(50 * p, sigma, Vector::Zero(p), NoiseKind::gaussian(1.0), 9);
    const Matrix emp = s.data.X.transpose() * s.data.X / static_cast<double>(50 * p);
    Eigen::SelfAdjointEigenSolver<Matrix> diff(emp - sigma), base(sigma);
    const double op = diff.eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_LE(op / base.eigenvalues().maxCoeff(), 0.2);
}

TEST(Generate, RademacherDesign)
{
    const auto s = generate(20, DesignSampler(Matrix::Identity(5, 5)), Vector::Zero(5),
                            NoiseKind::gaussian(1.0), 3, DesignKind::Rademacher);
    EXPECT_TRUE((s.data.X.array().abs() == 1.0).all());
}

TEST(DeriveSeed, DistinctStreams)
{
    EXPECT_NE(derive_seed(1, 0, 1), derive_seed(1, 1, 1));
    EXPECT_NE(derive_seed(1, 0, 1), derive_seed(1, 0, 2));
    EXPECT_NE(derive_seed(1, 0, 1), derive_seed(2, 0, 1));
    EXPECT_EQ(derive_seed(1, 3, 1), derive_seed(1, 3, 1));
}

TEST(Config, RoundTrip)
{
    const SimConfig c = parse_sim_config(kConfig);
    EXPECT_EQ(c.n, 40);
    EXPECT_EQ(c.grid.size(), 2u);
    EXPECT_FALSE(c.grid[1].huber_scale);
    EXPECT_EQ(c.noise_kind.type, NoiseKind::Type::StudentT);
    const SimConfig d = parse_sim_config(to_json(c));
    EXPECT_EQ(to_json(c), to_json(d));
}

TEST(Config, SchemaViolations)
{
    const std::string base = kConfig;
    const auto with = [&](const std::string& from, const std::string& to) {
        std::string s = base;
        s.replace(s.find(from), from.size(), to);
        return s;
    };
    EXPECT_EQ(parse_error_code(with("\"base_seed\": 11", "\"base_seed\": 11, \"extra\": 1")),
              ErrorCode::ConfigSchema);
    EXPECT_EQ(parse_error_code(with("\"base_seed\": 11", "\"seed\": 11")), ErrorCode::ConfigSchema);
    EXPECT_EQ(parse_error_code(with("\"replications\": 4", "\"replications\": 0")),
              ErrorCode::ConfigSchema);
    EXPECT_EQ(parse_error_code(with("\"n\": 40", "\"n\": \"forty\"")), ErrorCode::ConfigSchema);
    EXPECT_EQ(parse_error_code(with("\"dof\": 2", "\"dof\": 2, \"sigma\": 1")),
              ErrorCode::ConfigSchema);
    EXPECT_EQ(parse_error_code("{"), ErrorCode::ConfigSchema);
    EXPECT_EQ(parse_error_code(R"({"n": 40, "p": 20, "sigma_seed": 5,
        "noise_kind": {"type": "gaussian", "sigma": 1}, "signal_kind": "paper_sparse",
        "grid": [], "replications": 1, "base_seed": 1})"),
              ErrorCode::ConfigSchema);
    EXPECT_EQ(parse_error_code(with("\"paper_sparse\"", "{\"custom\": [1, 2]}")),
              ErrorCode::ConfigSchema);
}

TEST(Config, CustomSignalAndOptions)
{
    std::string s = kConfig;
    std::string custom = "{\"custom\": [";
    for (int j = 0; j < 20; ++j) {
        custom += (j ? ",0" : "1");
    }
    custom += "]}";
    s.replace(s.find("\"paper_sparse\""), 14, custom);
    s.replace(s.find("\"base_seed\": 11"), 15,
              "\"base_seed\": 11, \"redraw_sigma\": true, \"design_kind\": \"rademacher\"");
    const SimConfig c = parse_sim_config(s);
    ASSERT_TRUE(c.custom_signal);
    EXPECT_EQ((*c.custom_signal)[0], 1.0);
    EXPECT_TRUE(c.redraw_sigma);
    EXPECT_EQ(c.design_kind, DesignKind::Rademacher);
}

TEST(ParseGrid, Forms)
{
    EXPECT_EQ(parse_grid(R"({"candidates": [{"loss": "square", "lambda": 0.1, "tau": 0}]})").size(), 1u);
    EXPECT_EQ(parse_grid(R"([{"loss": "huber", "huber_scale": 1, "lambda": 0.1, "tau": 0},
                             {"loss": "square", "lambda": 0.1, "tau": 0}])").size(), 2u);
    EXPECT_THROW(parse_grid("[]"), Error);
    EXPECT_THROW(parse_grid(R"([{"loss": "huber", "lambda": 0.1, "tau": 0}])"), Error);
    EXPECT_THROW(parse_grid(R"([{"loss": "square", "lambda": -1, "tau": 0}])"), Error);
}

TEST(RunGrid, RecordMatchesDirectComputation)
{
    SimConfig c = parse_sim_config(kConfig);
    c.grid.resize(1);
    c.replications = 1;
    const GridResult g = run_grid(c);
    ASSERT_EQ(g.records.size(), 1u);
    const GridRecord& rec = g.records[0];

    const Simulator simulator(c);
    const Replicate rep = simulator.replicate(0);
    const LossSpec loss = c.grid[0].loss();
    const PenaltySpec pen = c.grid[0].penalty();
    const FitResult f = fit(rep.sample.data, loss, pen);
    const SensitivityBundle b = sensitivity_closed_form(rep.sample.data, loss, pen, f);
    const CriterionReport cr = crit_adaptive(f, b, loss, rep.sigma);
    EXPECT_EQ(rec.status, "ok");
    EXPECT_EQ(rec.df, b.df);
    EXPECT_EQ(rec.trace_V, b.trace_V);
    EXPECT_EQ(rec.n_hat, b.n_hat);
    EXPECT_EQ(rec.p_hat, b.p_hat);
    EXPECT_EQ(rec.trace_sigma_A, trace_sigma_A(b, rep.sigma));
    EXPECT_EQ(rec.crit_adaptive, *cr.crit_adaptive);
    EXPECT_EQ(rec.crit_oracle, *cr.crit_oracle);
    EXPECT_EQ(rec.oos_error, out_of_sample_error(f.beta_hat, rep.beta_star, rep.sigma));
    EXPECT_EQ(rec.eps_norm_sq_over_n, rep.sample.eps.squaredNorm() / 40.0);
    EXPECT_EQ(rec.constraint_value, cr.constraint_value);
    EXPECT_EQ(rec.solver_iterations, f.iterations);
    EXPECT_EQ(rep.sigma, make_covariance(20, 5));
}

TEST(RunGrid, DeterministicAcrossJobsAndCellRerun)
{
    const SimConfig c = parse_sim_config(kConfig);
    const GridResult a = run_grid(c);
    RunOptions opt;
    opt.jobs = 3;
    const GridResult b = run_grid(c, opt);
    EXPECT_EQ(serialize(a), serialize(b));
    ASSERT_EQ(a.records.size(), 8u);
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        EXPECT_EQ(a.records[k].cell, k / 4);
        EXPECT_EQ(a.records[k].replication, static_cast<int>(k % 4));
    }
    const GridRecord single = run_cell(c, 1, 2);
    GridResult one;
    one.records = {single};
    GridResult ref;
    ref.records = {a.records[6]};
    EXPECT_EQ(serialize(one), serialize(ref));
    EXPECT_THROW(run_cell(c, 2, 0), Error);
}

TEST(RunGrid, RedrawSigmaChangesCovariance)
{
    SimConfig c = parse_sim_config(kConfig);
    c.redraw_sigma = true;
    const Simulator s(c);
    EXPECT_GT((s.replicate(0).sigma - s.replicate(1).sigma).norm(), 0.0);
    c.redraw_sigma = false;
    const Simulator t(c);
    EXPECT_EQ(t.replicate(0).sigma, t.replicate(1).sigma);
}

TEST(RunGrid, FullScaleSmoke)
{
    SimConfig c;
    c.n = 1001;
    c.p = 1000;
    c.sigma_seed = 1;
    c.noise_kind = NoiseKind::student_t(2.0);
    c.grid = {{0.054 * std::sqrt(1001.0), 0.036, 1e-10}};
    c.replications = 1;
    c.base_seed = 3;
    const GridResult g = run_grid(c);
    const GridRecord& r = g.records.front();
    ASSERT_EQ(r.status, "ok");
    EXPECT_GT(r.df / 1001.0, 0.0);
    EXPECT_LT(r.df / 1001.0, 1.0);
    EXPECT_GT(r.n_hat / 1001.0, 0.0);
    EXPECT_LT(r.n_hat / 1001.0, 1.0 + 1e-12);
    EXPECT_GT(r.trace_V, 0.0);
}

TEST(RunGrid, ApproximationErrorShrinksWithN)
{
    const auto median_gap = [](int n) {
        SimConfig c;
        c.n = n;
        c.p = n / 2;
        c.sigma_seed = 2;
        c.noise_kind = NoiseKind::student_t(2.0);
        c.grid = {{0.054 * std::sqrt(static_cast<double>(n)), 0.01, 0.01}};
        c.replications = 30;
        c.base_seed = 8;
        RunOptions opt;
        opt.jobs = 4;
        const auto summary = aggregate(run_grid(c, opt));
        return summary.front().metrics.at("approximation_error").median;
    };
    EXPECT_LT(median_gap(400), median_gap(200));
}

TEST(Aggregate, SingleRecordAndHandComputedMeans)
{
    GridResult g;
    GridRecord r;
    r.n = 10;
    r.df = 2.0;
    r.trace_V = 4.0;
    r.trace_sigma_A = 0.75;
    r.crit_adaptive = 30.0;
    r.oos_error = 0.5;
    r.eps_norm_sq_over_n = 2.0;
    g.records = {r};
    const auto one = aggregate(g);
    EXPECT_EQ(one.front().metrics.at("df").mean, 2.0);
    EXPECT_EQ(one.front().metrics.at("ratio_gap").mean, 0.25);
    EXPECT_EQ(one.front().metrics.at("approximation_error").mean, 0.5);

    GridRecord a = r, b = r, c = r;
    a.replication = 0;
    b.replication = 1;
    c.replication = 2;
    a.df = 1.0;
    b.df = 2.5;
    c.df = 6.0;
    c.status = "singular";
    GridRecord d = r;
    d.replication = 3;
    d.df = 4.0;
    g.records = {a, b, c, d};
    const auto three = aggregate(g);
    const auto& df = three.front().metrics.at("df");
    EXPECT_DOUBLE_EQ(df.mean, 2.5);
    EXPECT_DOUBLE_EQ(df.median, 2.5);
    EXPECT_DOUBLE_EQ(df.q25, 1.75);
    EXPECT_DOUBLE_EQ(df.q75, 3.25);
    EXPECT_EQ(three.front().failures, 1);
    EXPECT_EQ(three.front().records, 4);

    std::reverse(g.records.begin(), g.records.end());
    std::ostringstream x, y;
    write_summary_csv(x, three);
    write_summary_csv(y, aggregate(g));
    EXPECT_EQ(x.str(), y.str());
    EXPECT_THROW(aggregate(GridResult{}), Error);
}

TEST(Pivots, OneFilePerMetric)
{
    const SimConfig c = parse_sim_config(kConfig);
    const auto summary = aggregate(run_grid(c));
    const auto dir = std::filesystem::temp_directory_path() / "adacrit_pivots_test";
    std::filesystem::remove_all(dir);
    write_pivot_csvs(dir, summary);
    for (const auto& m : summary_metrics()) {
        std::ifstream in(dir / ("pivot_" + m + ".csv"));
        ASSERT_TRUE(in) << m;
        std::string header;
        std::getline(in, header);
        EXPECT_EQ(header, "huber_scale,lambda,tau,mean");
        int rows = 0;
        for (std::string line; std::getline(in, line);) {
            ++rows;
        }
        EXPECT_EQ(rows, 2);
    }
    std::filesystem::remove_all(dir);
}

TEST(Quantile, LinearInterpolation)
{
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0}), 2.5);
    EXPECT_EQ(quantile({0.0, 10.0}, 0.3), 3.0);
    EXPECT_TRUE(std::isnan(median({})));
}
