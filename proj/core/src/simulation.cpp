#include "adacrit/simulation.hpp"

#include "adacrit/csv.hpp"
#include "adacrit/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace adacrit::sim {

using json = nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kSigmaStream = 2;

[[noreturn]] void schema_error(const std::string& what)
{
    throw Error(ErrorCode::ConfigSchema, what);
}

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& required,
                const std::set<std::string>& optional)
{
    if (!obj.is_object()) {
        schema_error(where + " must be an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (!required.count(key) && !optional.count(key)) {
            schema_error("unknown field '" + key + "' in " + where);
        }
    }
    for (const auto& key : required) {
        if (!obj.contains(key)) {
            schema_error("missing field '" + key + "' in " + where);
        }
    }
}

template <class T>
T get_number(const json& obj, const std::string& key, const std::string& where)
{
    const json& v = obj.at(key);
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) {
            schema_error("field '" + key + "' in " + where + " must be an integer");
        }
    } else {
        if (!v.is_number()) {
            schema_error("field '" + key + "' in " + where + " must be a number");
        }
    }
    return v.get<T>();
}

NoiseKind parse_noise(const json& j)
{
    check_keys(j, "noise_kind", {"type"}, {"dof", "sigma"});
    const std::string type = j.at("type").get<std::string>();
    if (type == "student_t") {
        check_keys(j, "noise_kind", {"type", "dof"}, {});
        return NoiseKind::student_t(get_number<double>(j, "dof", "noise_kind"));
    }
    if (type == "gaussian") {
        check_keys(j, "noise_kind", {"type", "sigma"}, {});
        return NoiseKind::gaussian(get_number<double>(j, "sigma", "noise_kind"));
    }
    schema_error("noise_kind.type must be 'student_t' or 'gaussian'");
}

GridCell parse_cell(const json& j)
{
    check_keys(j, "grid cell", {"loss", "lambda", "tau"}, {"huber_scale"});
    GridCell c;
    const std::string loss = j.at("loss").get<std::string>();
    if (loss == "huber") {
        if (!j.contains("huber_scale")) {
            schema_error("huber grid cell needs 'huber_scale'");
        }
        c.huber_scale = get_number<double>(j, "huber_scale", "grid cell");
    } else if (loss == "square") {
        if (j.contains("huber_scale")) {
            schema_error("square-loss grid cell must not set 'huber_scale'");
        }
    } else {
        schema_error("grid cell loss must be 'huber' or 'square'");
    }
    c.lambda = get_number<double>(j, "lambda", "grid cell");
    c.tau = get_number<double>(j, "tau", "grid cell");
    return c;
}

GridRecord evaluate_cell(const Replicate& rep, const GridCell& cell, std::size_t cell_index,
                         int replication, const FitOptions& fit_options)
{
    const double nan = std::numeric_limits<double>::quiet_NaN();
    GridRecord r;
    r.cell = cell_index;
    r.replication = replication;
    r.huber_scale = cell.huber_scale.value_or(0.0);
    r.lambda = cell.lambda;
    r.tau = cell.tau;
    r.n = static_cast<int>(rep.sample.data.n());
    const Dataset& data = rep.sample.data;
    const double n = static_cast<double>(data.n());
    r.eps_norm_sq_over_n = rep.sample.eps.squaredNorm() / n;

    const LossSpec loss = cell.loss();
    const FitResult f = fit(data, loss, cell.penalty(), fit_options);
    r.solver_iterations = f.iterations;
    r.oos_error = out_of_sample_error(f.beta_hat, rep.beta_star, rep.sigma);
    r.p_hat = f.p_hat();
    if (!f.converged) {
        r.status = "nonconvergence";
    }

    SensitivityBundle bundle;
    try {
        bundle = sensitivity_closed_form(data, loss, cell.penalty(), f);
    } catch (const Error& e) {
        r.status = e.code() == ErrorCode::DegenerateFit ? "degenerate" : "singular";
        r.df = r.trace_V = r.trace_sigma_A = r.crit_adaptive = r.crit_oracle = nan;
        r.n_hat = psi_prime(loss, f.residuals).sum();
        r.constraint_value = r.n_hat / n;
        return r;
    }
    r.df = bundle.df;
    r.trace_V = bundle.trace_V;
    r.n_hat = bundle.n_hat;
    r.trace_sigma_A = trace_sigma_A(bundle, rep.sigma);
    const CriterionReport crit = crit_adaptive(f, bundle, loss, rep.sigma);
    r.crit_adaptive = crit.crit_adaptive.value_or(nan);
    r.crit_oracle = *crit.crit_oracle;
    r.constraint_value = crit.constraint_value;
    return r;
}

} // namespace

LossSpec GridCell::loss() const
{
    return huber_scale ? LossSpec::huber(*huber_scale) : LossSpec::square();
}

PenaltySpec GridCell::penalty() const
{
    return PenaltySpec::elastic_net(lambda, tau);
}

void SimConfig::validate() const
{
    if (n < 1 || p < 1) {
        schema_error("n and p must be at least 1");
    }
    if (replications < 1) {
        schema_error("replications must be at least 1");
    }
    if (grid.empty()) {
        schema_error("grid must be nonempty");
    }
    if (custom_signal && custom_signal->size() != p) {
        schema_error("custom signal length must equal p");
    }
    if (noise_kind.type == NoiseKind::Type::StudentT && !(noise_kind.dof > 0.0)) {
        schema_error("student_t dof must be positive");
    }
    if (noise_kind.type == NoiseKind::Type::Gaussian && !(noise_kind.sigma >= 0.0)) {
        schema_error("gaussian sigma must be nonnegative");
    }
    for (const auto& c : grid) {
        if ((c.huber_scale && !(*c.huber_scale > 0.0)) || !(c.lambda >= 0.0) || !(c.tau >= 0.0)) {
            schema_error("grid cell parameters out of range");
        }
        if (c.lambda == 0.0 && c.tau == 0.0 && p > n) {
            schema_error("grid cell with lambda = tau = 0 requires n >= p");
        }
    }
}

SimConfig parse_sim_config(const std::string& json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        schema_error(std::string("invalid JSON: ") + e.what());
    }
    try {
        check_keys(j, "config",
                   {"n", "p", "sigma_seed", "noise_kind", "signal_kind", "grid", "replications",
                    "base_seed"},
                   {"redraw_sigma", "design_kind"});
        SimConfig c;
        c.n = get_number<int>(j, "n", "config");
        c.p = get_number<int>(j, "p", "config");
        c.sigma_seed = get_number<std::uint64_t>(j, "sigma_seed", "config");
        c.noise_kind = parse_noise(j.at("noise_kind"));
        const json& signal = j.at("signal_kind");
        if (signal.is_string()) {
            if (signal.get<std::string>() != "paper_sparse") {
                schema_error("signal_kind must be 'paper_sparse' or {\"custom\": [...]}");
            }
        } else {
            check_keys(signal, "signal_kind", {"custom"}, {});
            const auto values = signal.at("custom").get<std::vector<double>>();
            c.custom_signal = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
        }
        if (!j.at("grid").is_array()) {
            schema_error("grid must be an array");
        }
        for (const auto& cell : j.at("grid")) {
            c.grid.push_back(parse_cell(cell));
        }
        c.replications = get_number<int>(j, "replications", "config");
        c.base_seed = get_number<std::uint64_t>(j, "base_seed", "config");
        if (j.contains("redraw_sigma")) {
            if (!j.at("redraw_sigma").is_boolean()) {
                schema_error("redraw_sigma must be a boolean");
            }
            c.redraw_sigma = j.at("redraw_sigma").get<bool>();
        }
        if (j.contains("design_kind")) {
            const std::string kind = j.at("design_kind").get<std::string>();
            if (kind == "gaussian") {
                c.design_kind = DesignKind::Gaussian;
            } else if (kind == "rademacher") {
                c.design_kind = DesignKind::Rademacher;
            } else {
                schema_error("design_kind must be 'gaussian' or 'rademacher'");
            }
        }
        c.validate();
        return c;
    } catch (const json::exception& e) {
        schema_error(std::string("malformed config: ") + e.what());
    }
}

std::vector<GridCell> parse_grid(const std::string& json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        schema_error(std::string("invalid JSON: ") + e.what());
    }
    try {
        const json* cells = &j;
        if (j.is_object()) {
            check_keys(j, "grid document", {"candidates"}, {});
            cells = &j.at("candidates");
        }
        if (!cells->is_array() || cells->empty()) {
            schema_error("grid must be a nonempty array of cells");
        }
        std::vector<GridCell> out;
        for (const auto& cell : *cells) {
            GridCell c = parse_cell(cell);
            if ((c.huber_scale && !(*c.huber_scale > 0.0)) || !(c.lambda >= 0.0) || !(c.tau >= 0.0)) {
                schema_error("grid cell parameters out of range");
            }
            out.push_back(c);
        }
        return out;
    } catch (const json::exception& e) {
        schema_error(std::string("malformed grid: ") + e.what());
    }
}

SimConfig read_sim_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_sim_config(buf.str());
}

std::string to_json(const SimConfig& config)
{
    json j;
    j["n"] = config.n;
    j["p"] = config.p;
    j["sigma_seed"] = config.sigma_seed;
    if (config.noise_kind.type == NoiseKind::Type::StudentT) {
        j["noise_kind"] = {{"type", "student_t"}, {"dof", config.noise_kind.dof}};
    } else {
        j["noise_kind"] = {{"type", "gaussian"}, {"sigma", config.noise_kind.sigma}};
    }
    if (config.custom_signal) {
        j["signal_kind"] = {{"custom", std::vector<double>(config.custom_signal->begin(),
                                                           config.custom_signal->end())}};
    } else {
        j["signal_kind"] = "paper_sparse";
    }
    j["grid"] = json::array();
    for (const auto& c : config.grid) {
        json cell = {{"loss", c.huber_scale ? "huber" : "square"}, {"lambda", c.lambda}, {"tau", c.tau}};
        if (c.huber_scale) {
            cell["huber_scale"] = *c.huber_scale;
        }
        j["grid"].push_back(cell);
    }
    j["replications"] = config.replications;
    j["base_seed"] = config.base_seed;
    j["redraw_sigma"] = config.redraw_sigma;
    j["design_kind"] = config.design_kind == DesignKind::Gaussian ? "gaussian" : "rademacher";
    return j.dump(2);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t rep, std::uint64_t stream)
{
    return splitmix64(splitmix64(splitmix64(root) ^ rep) ^ (stream * 0x632be59bd9b4e019ULL));
}

Matrix make_covariance(int p, std::uint64_t seed)
{
    if (p < 1) {
        throw Error(ErrorCode::InvalidArgument, "p must be at least 1");
    }
    std::mt19937_64 rng(seed);
    Matrix R(2 * p, p);
    for (Index i = 0; i < R.rows(); ++i) {
        for (Index j = 0; j < R.cols(); ++j) {
            R(i, j) = (rng() >> 63) ? 1.0 : -1.0;
        }
    }
    Matrix sigma = Matrix(R.transpose() * R) / (2.0 * p);
    // exact symmetry
    return 0.5 * (sigma + sigma.transpose());
}

Vector make_signal(int p)
{
    if (p < 1) {
        throw Error(ErrorCode::InvalidArgument, "p must be at least 1");
    }
    const int support = std::min({p, 100, (p + 9) / 10});
    Vector beta = Vector::Zero(p);
    beta.head(support).setConstant(std::sqrt(static_cast<double>(p)) / 100.0);
    return beta;
}

std::vector<double> log_spaced(double lo, double hi, int count)
{
    if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
        throw Error(ErrorCode::InvalidArgument, "log_spaced needs 0 < lo <= hi and count >= 1");
    }
    std::vector<double> out(static_cast<std::size_t>(count));
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (int k = 0; k < count; ++k) {
        out[static_cast<std::size_t>(k)] = std::exp(a + (b - a) * k / (count - 1));
    }
    out.front() = lo;
    out.back() = hi;
    return out;
}

DesignSampler::DesignSampler(Matrix sigma) : sigma_(std::move(sigma))
{
    if (sigma_.rows() != sigma_.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "Sigma must be square");
    }
    Eigen::LLT<Matrix> llt(sigma_);
    if (llt.info() != Eigen::Success) {
        Matrix jittered = sigma_;
        jittered.diagonal().array() += 1e-12;
        llt.compute(jittered);
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorCode::InvalidArgument, "Sigma is not positive definite");
        }
    }
    factor_ = llt.matrixL();
}

SimulatedData generate(int n, const DesignSampler& design, const Vector& beta_star,
                       const NoiseKind& noise, std::uint64_t seed, DesignKind design_kind)
{
    const Index p = design.sigma().rows();
    if (beta_star.size() != p) {
        throw Error(ErrorCode::DimensionMismatch, "beta_star length differs from Sigma");
    }
    std::mt19937_64 rng(seed);
    Matrix Z(n, p);
    if (design_kind == DesignKind::Gaussian) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < p; ++j) {
                Z(i, j) = normal(rng);
            }
        }
    } else {
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < p; ++j) {
                Z(i, j) = (rng() >> 63) ? 1.0 : -1.0;
            }
        }
    }
    SimulatedData out;
    Matrix X = Z * design.factor().transpose();
    out.eps = Vector(n);
    if (noise.type == NoiseKind::Type::StudentT) {
        std::student_t_distribution<double> t(noise.dof);
        for (Index i = 0; i < n; ++i) {
            out.eps[i] = t(rng);
        }
    } else {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < n; ++i) {
            out.eps[i] = noise.sigma * normal(rng);
        }
    }
    Vector y = X * beta_star + out.eps;
    out.data = Dataset(std::move(X), std::move(y));
    return out;
}

SimulatedData generate(int n, const Matrix& sigma, const Vector& beta_star,
                       const NoiseKind& noise, std::uint64_t seed)
{
    return generate(n, DesignSampler(sigma), beta_star, noise, seed);
}

Simulator::Simulator(SimConfig config)
    : config_((config.validate(), std::move(config))),
      fixed_(make_covariance(config_.p, config_.sigma_seed)),
      signal_(config_.custom_signal ? *config_.custom_signal : make_signal(config_.p))
{
}

Replicate Simulator::replicate(int replication) const
{
    if (replication < 0) {
        throw Error(ErrorCode::InvalidArgument, "replication index must be nonnegative");
    }
    Replicate rep;
    rep.beta_star = signal_;
    const std::uint64_t seed =
        derive_seed(config_.base_seed, static_cast<std::uint64_t>(replication), kDataStream);
    if (config_.redraw_sigma) {
        DesignSampler redrawn(make_covariance(
            config_.p, derive_seed(config_.sigma_seed, static_cast<std::uint64_t>(replication),
                                   kSigmaStream)));
        rep.sample = generate(config_.n, redrawn, signal_, config_.noise_kind, seed,
                              config_.design_kind);
        rep.sigma = redrawn.sigma();
    } else {
        rep.sample = generate(config_.n, fixed_, signal_, config_.noise_kind, seed,
                              config_.design_kind);
        rep.sigma = fixed_.sigma();
    }
    return rep;
}

GridRecord run_cell(const SimConfig& config, std::size_t cell, int replication,
                    const FitOptions& fit_options)
{
    if (cell >= config.grid.size() || replication < 0 || replication >= config.replications) {
        throw Error(ErrorCode::InvalidArgument, "cell or replication out of range");
    }
    const Simulator simulator(config);
    return evaluate_cell(simulator.replicate(replication), config.grid[cell], cell, replication,
                         fit_options);
}

GridResult run_grid(const SimConfig& config, const RunOptions& options)
{
    const Simulator simulator(config);
    const std::size_t cells = config.grid.size();
    const auto reps = static_cast<std::size_t>(config.replications);

    GridResult result;
    result.records.resize(cells * reps);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= reps) {
                return;
            }
            const Replicate rep = simulator.replicate(static_cast<int>(r));
            for (std::size_t c = 0; c < cells; ++c) {
                result.records[c * reps + r] =
                    evaluate_cell(rep, config.grid[c], c, static_cast<int>(r), options.fit);
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(reps)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < jobs; ++t) {
            pool.emplace_back(worker);
        }
    }
    return result;
}

void write_grid_csv(std::ostream& os, const GridResult& result)
{
    const auto& cols = grid_csv_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) {
        os << (k ? "," : "") << cols[k];
    }
    os << '\n';
    for (const auto& r : result.records) {
        os << r.cell << ',' << r.replication << ',' << format_double(r.huber_scale) << ','
           << format_double(r.lambda) << ',' << format_double(r.tau) << ',' << r.status << ','
           << format_double(r.df) << ',' << format_double(r.trace_V) << ','
           << format_double(r.n_hat) << ',' << r.p_hat << ',' << format_double(r.trace_sigma_A)
           << ',' << format_double(r.crit_adaptive) << ',' << format_double(r.crit_oracle) << ','
           << format_double(r.oos_error) << ',' << format_double(r.eps_norm_sq_over_n) << ','
           << format_double(r.constraint_value) << ',' << r.solver_iterations << '\n';
    }
}

const std::vector<std::string>& summary_metrics()
{
    static const std::vector<std::string> metrics = {
        "df", "trace_V", "n_hat", "p_hat", "trace_sigma_A", "crit_adaptive", "crit_oracle",
        "oos_error", "eps_norm_sq_over_n", "constraint_value", "solver_iterations",
        "ratio_gap", "approximation_error"};
    return metrics;
}

double quantile(std::vector<double> values, double prob)
{
    if (values.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(values.begin(), values.end());
    const double pos = prob * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values)
{
    return quantile(std::move(values), 0.5);
}

std::vector<CellSummary> aggregate(const GridResult& result)
{
    if (result.records.empty()) {
        throw Error(ErrorCode::InvalidArgument, "aggregate of an empty result");
    }
    std::map<std::size_t, std::vector<const GridRecord*>> by_cell;
    for (const auto& r : result.records) {
        by_cell[r.cell].push_back(&r);
    }

    std::vector<CellSummary> out;
    for (const auto& [cell, recs] : by_cell) {
        CellSummary s;
        s.cell = cell;
        s.huber_scale = recs.front()->huber_scale;
        s.lambda = recs.front()->lambda;
        s.tau = recs.front()->tau;
        s.records = static_cast<int>(recs.size());
        std::map<std::string, std::vector<double>> values;
        for (const GridRecord* r : recs) {
            if (r->status != "ok") {
                ++s.failures;
                continue;
            }
            values["df"].push_back(r->df);
            values["trace_V"].push_back(r->trace_V);
            values["n_hat"].push_back(r->n_hat);
            values["p_hat"].push_back(static_cast<double>(r->p_hat));
            values["trace_sigma_A"].push_back(r->trace_sigma_A);
            values["crit_adaptive"].push_back(r->crit_adaptive);
            values["crit_oracle"].push_back(r->crit_oracle);
            values["oos_error"].push_back(r->oos_error);
            values["eps_norm_sq_over_n"].push_back(r->eps_norm_sq_over_n);
            values["constraint_value"].push_back(r->constraint_value);
            values["solver_iterations"].push_back(static_cast<double>(r->solver_iterations));
            values["ratio_gap"].push_back(std::abs(r->trace_sigma_A - r->df / r->trace_V));
            const double n = static_cast<double>(r->n);
            values["approximation_error"].push_back(
                std::abs(r->oos_error - (r->crit_adaptive / n - r->eps_norm_sq_over_n)));
        }
        for (const auto& name : summary_metrics()) {
            const auto& v = values[name];
            QuantitySummary q;
            if (v.empty()) {
                q.mean = q.median = q.q25 = q.q75 = std::numeric_limits<double>::quiet_NaN();
            } else {
                double total = 0.0;
                for (double x : v) {
                    total += x;
                }
                q.mean = total / static_cast<double>(v.size());
                q.median = median(v);
                q.q25 = quantile(v, 0.25);
                q.q75 = quantile(v, 0.75);
            }
            s.metrics[name] = q;
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_summary_csv(std::ostream& os, const std::vector<CellSummary>& summary)
{
    os << "cell,huber_scale,lambda,tau,records,failures";
    for (const auto& name : summary_metrics()) {
        os << ',' << name << "_mean," << name << "_median," << name << "_q25," << name << "_q75";
    }
    os << '\n';
    for (const auto& s : summary) {
        os << s.cell << ',' << format_double(s.huber_scale) << ',' << format_double(s.lambda) << ','
           << format_double(s.tau) << ',' << s.records << ',' << s.failures;
        for (const auto& name : summary_metrics()) {
            const auto& q = s.metrics.at(name);
            os << ',' << format_double(q.mean) << ',' << format_double(q.median) << ','
               << format_double(q.q25) << ',' << format_double(q.q75);
        }
        os << '\n';
    }
}

void write_pivot_csvs(const std::filesystem::path& dir, const std::vector<CellSummary>& summary)
{
    std::filesystem::create_directories(dir);
    for (const auto& name : summary_metrics()) {
        std::ofstream out(dir / ("pivot_" + name + ".csv"));
        if (!out) {
            throw Error(ErrorCode::InvalidArgument, "cannot write pivot file in " + dir.string());
        }
        out << "huber_scale,lambda,tau,mean\n";
        for (const auto& s : summary) {
            out << format_double(s.huber_scale) << ',' << format_double(s.lambda) << ','
                << format_double(s.tau) << ',' << format_double(s.metrics.at(name).mean) << '\n';
        }
    }
}

} // namespace adacrit::sim
