#include "nsmc/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nsmc {

namespace {

constexpr double PUMP_T[10] = {94.32, 15.72, 62.88, 125.76, 5.24,
                               31.44, 1.048, 1.048, 2.096, 10.48};
constexpr int PUMP_Y[10] = {5, 1, 5, 14, 3, 19, 1, 1, 4, 22};

double lse2(double a, double b) {
    const double m = std::max(a, b);
    if (m == -std::numeric_limits<double>::infinity()) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

BuiltModel build_conjugate_toy() {
    BuiltModel bm;
    GraphModel& m = bm.model;
    Node x;
    x.id = {"x", -1};
    x.role = Role::Latent;
    x.dist = constant_dist(Family::Gaussian, {0.0, 1.0});
    const int xi = m.add_node(std::move(x));
    Node y;
    y.id = {"y", -1};
    y.role = Role::Observed;
    y.parents = {{"x", -1}};
    y.dist.family = Family::Gaussian;
    y.dist.transform = [](std::span<const double> p) {
        return std::vector<double>{p[0], 1.0};
    };
    m.add_node(std::move(y));

    bm.inverse = build_inverse(m, {xi});
    bm.train_defaults.hidden_sizes = {32};
    bm.train_defaults.components = 1;
    return bm;
}

BuiltModel build_regression(const RegressionConfig& cfg) {
    if (cfg.N < 1) throw InvalidParameters("regression N must be >= 1");
    BuiltModel bm;
    GraphModel& m = bm.model;
    std::vector<int> w_idx;
    for (int d = 0; d < 3; ++d) {
        Node w;
        w.id = {"w" + std::to_string(d), -1};
        w.role = Role::Latent;
        w.dist = constant_dist(Family::Laplace, {0.0, std::pow(10.0, 1 - d)});
        w_idx.push_back(m.add_node(std::move(w)));
    }
    m.add_plate("data", cfg.N);
    for (int n = 0; n < cfg.N; ++n) {
        Node z;
        z.id = {"z", n};
        z.role = Role::Observed;
        z.plate = "data";
        z.dist = constant_dist(Family::Uniform, {-10.0, 10.0});
        m.add_node(std::move(z));
        Node t;
        t.id = {"t", n};
        t.role = Role::Observed;
        t.plate = "data";
        t.parents = {{"w0", -1}, {"w1", -1}, {"w2", -1}, {"z", n}};
        t.dist.family = Family::StudentT;
        t.dist.transform = [](std::span<const double> p) {
            const double z = p[3];
            return std::vector<double>{4.0, p[0] + p[1] * z + p[2] * z * z, 1.0};
        };
        m.add_node(std::move(t));
    }
    bm.inverse = assign_share_groups(group_joint_blocks(build_inverse(m, w_idx)), m);
    bm.train_defaults.hidden_sizes = {200, 200};
    bm.train_defaults.components = 3;
    return bm;
}

BuiltModel build_pump(const PumpConfig& cfg) {
    if (cfg.N < 1) throw InvalidParameters("pump N must be >= 1");
    BuiltModel bm;
    GraphModel& m = bm.model;
    Node alpha;
    alpha.id = {"alpha", -1};
    alpha.role = Role::Latent;
    alpha.dist = constant_dist(Family::Exponential, {1.0});
    const int ai = m.add_node(std::move(alpha));
    Node beta;
    beta.id = {"beta", -1};
    beta.role = Role::Latent;
    beta.dist = constant_dist(Family::Gamma, {0.1, 1.0});
    const int bi = m.add_node(std::move(beta));

    m.add_plate("pump", cfg.N);
    std::vector<int> theta_idx;
    for (int n = 0; n < cfg.N; ++n) {
        Node th;
        th.id = {"theta", n};
        th.role = Role::Latent;
        th.plate = "pump";
        th.parents = {{"alpha", -1}, {"beta", -1}};
        th.dist.family = Family::Gamma;
        th.dist.transform = [](std::span<const double> p) {
            return std::vector<double>{p[0], p[1]};
        };
        theta_idx.push_back(m.add_node(std::move(th)));
        Node t;
        t.id = {"t", n};
        t.role = Role::Observed;
        t.plate = "pump";
        t.dist = constant_dist(Family::Exponential, {1.0 / cfg.mean_exposure});
        m.add_node(std::move(t));
        Node y;
        y.id = {"y", n};
        y.role = Role::Observed;
        y.plate = "pump";
        y.parents = {{"theta", n}, {"t", n}};
        y.dist.family = Family::Poisson;
        y.dist.transform = [](std::span<const double> p) {
            return std::vector<double>{p[0] * p[1]};
        };
        m.add_node(std::move(y));
    }

    // Latent order (beta, alpha, theta_1..N): reversed-graph processing then
    // yields theta_n <- {t_n, y_n}, alpha <- theta_{1:N}, beta <- {theta, alpha},
    // and block grouping merges (alpha, beta).
    std::vector<int> order{bi, ai};
    order.insert(order.end(), theta_idx.begin(), theta_idx.end());
    bm.inverse = assign_share_groups(group_joint_blocks(build_inverse(m, order)), m);
    for (auto& f : bm.inverse.factors)
        if (f.targets.size() == 2) f.summarize_conditioners = true;

    bm.fixture = m.blank();
    if (cfg.N <= 10) {
        for (int n = 0; n < cfg.N; ++n) {
            bm.fixture[m.index_of({"t", n})] = PUMP_T[n];
            bm.fixture[m.index_of({"y", n})] = static_cast<double>(PUMP_Y[n]);
        }
        bm.has_fixture = true;
    }
    bm.train_defaults.hidden_sizes = {500, 500};
    bm.train_defaults.components = 10;
    return bm;
}

std::vector<double> FhmmConfig::mu() const {
    std::vector<double> v(D);
    for (int i = 0; i < D; ++i)
        v[i] = D == 1 ? mu_low : mu_low + (mu_high - mu_low) * i / (D - 1);
    return v;
}

BuiltModel build_fhmm(const FhmmConfig& cfg) {
    if (cfg.D < 1 || cfg.T < 1) throw InvalidParameters("fhmm needs D >= 1 and T >= 1");
    BuiltModel bm;
    GraphModel& m = bm.model;
    m.add_plate("time", cfg.T);
    const auto mu = cfg.mu();
    const double var = cfg.sigma * cfg.sigma;
    const double ps = cfg.p_switch;
    for (int t = 0; t < cfg.T; ++t) {
        for (int i = 0; i < cfg.D; ++i) {
            Node x;
            x.id = {"x" + std::to_string(i), t};
            x.role = Role::Latent;
            x.plate = "time";
            if (t == 0) {
                x.dist = constant_dist(Family::Bernoulli, {cfg.p_init});
            } else {
                x.parents = {{"x" + std::to_string(i), t - 1}};
                x.dist.family = Family::Bernoulli;
                x.dist.transform = [ps](std::span<const double> p) {
                    return std::vector<double>{p[0] > 0.5 ? 1.0 - ps : ps};
                };
            }
            m.add_node(std::move(x));
        }
        Node y;
        y.id = {"y", t};
        y.role = Role::Observed;
        y.plate = "time";
        for (int i = 0; i < cfg.D; ++i) y.parents.push_back({"x" + std::to_string(i), t});
        y.dist.family = Family::Gaussian;
        y.dist.transform = [mu, var](std::span<const double> p) {
            double s = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) s += mu[i] * p[i];
            return std::vector<double>{s, var};
        };
        m.add_node(std::move(y));
    }

    // Handcrafted forward-time inverse (the generic reversed-graph algorithm
    // would run backward in time): all D states at step t jointly, given the
    // previous states and y_t; the t=1 factor sees only y_1.
    InverseModel inv;
    for (int t = 0; t < cfg.T; ++t) {
        InverseFactor f;
        for (int i = 0; i < cfg.D; ++i)
            f.targets.push_back(m.index_of({"x" + std::to_string(i), t}));
        if (t > 0) {
            for (int i = 0; i < cfg.D; ++i)
                f.conditioners.push_back(m.index_of({"x" + std::to_string(i), t - 1}));
            f.share_group = "time:x";
        }
        f.conditioners.push_back(m.index_of({"y", t}));
        inv.factors.push_back(std::move(f));
        for (int i = 0; i < cfg.D; ++i)
            inv.source_order.push_back(m.index_of({"x" + std::to_string(i), t}));
    }
    inv.observed_nodes = m.observed();
    inv.observed_parents.assign(inv.observed_nodes.size(), {});
    bm.inverse = std::move(inv);
    bm.train_defaults.hidden_sizes = {300, 300, 300, 300};
    bm.train_defaults.components = 1;
    return bm;
}

namespace {

double parse_num(const std::map<std::string, std::string>& o, const std::string& key,
                 double fallback) {
    auto it = o.find(key);
    return it == o.end() ? fallback : std::stod(it->second);
}

}  // namespace

BuiltModel build_model(const std::string& name,
                       const std::map<std::string, std::string>& overrides) {
    if (name == "conjugate-toy") return build_conjugate_toy();
    if (name == "regression") {
        RegressionConfig c;
        c.N = static_cast<int>(parse_num(overrides, "N", c.N));
        return build_regression(c);
    }
    if (name == "pump") {
        PumpConfig c;
        c.N = static_cast<int>(parse_num(overrides, "N", c.N));
        c.mean_exposure = parse_num(overrides, "mean_exposure", c.mean_exposure);
        return build_pump(c);
    }
    if (name == "fhmm") {
        FhmmConfig c;
        c.D = static_cast<int>(parse_num(overrides, "D", c.D));
        c.T = static_cast<int>(parse_num(overrides, "T", c.T));
        c.mu_low = parse_num(overrides, "mu_low", c.mu_low);
        c.mu_high = parse_num(overrides, "mu_high", c.mu_high);
        c.sigma = parse_num(overrides, "sigma", c.sigma);
        c.p_init = parse_num(overrides, "p_init", c.p_init);
        c.p_switch = parse_num(overrides, "p_switch", c.p_switch);
        return build_fhmm(c);
    }
    throw Error("unknown model '" + name + "'");
}

namespace {

double fhmm_emit_log(const FhmmConfig& cfg, const std::vector<double>& mu, int state,
                     double y) {
    double mean = 0.0;
    for (int i = 0; i < cfg.D; ++i)
        if (state & (1 << i)) mean += mu[i];
    const double var = cfg.sigma * cfg.sigma;
    const double d = y - mean;
    return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

double fhmm_init_log(const FhmmConfig& cfg, int state) {
    double lp = 0.0;
    for (int i = 0; i < cfg.D; ++i)
        lp += (state & (1 << i)) ? std::log(cfg.p_init) : std::log1p(-cfg.p_init);
    return lp;
}

double fhmm_trans_log(const FhmmConfig& cfg, int s0, int s1) {
    const int diff = s0 ^ s1;
    double lp = 0.0;
    for (int i = 0; i < cfg.D; ++i)
        lp += (diff & (1 << i)) ? std::log(cfg.p_switch) : std::log1p(-cfg.p_switch);
    return lp;
}

}  // namespace

FhmmOracle exact_fhmm(const FhmmConfig& cfg, const std::vector<double>& y) {
    if (static_cast<int>(y.size()) != cfg.T)
        throw DimensionMismatch("observation length must equal T");
    const int S = 1 << cfg.D;
    const auto mu = cfg.mu();
    const double ninf = -std::numeric_limits<double>::infinity();

    std::vector<std::vector<double>> alpha(cfg.T, std::vector<double>(S)),
        beta(cfg.T, std::vector<double>(S, 0.0));
    for (int s = 0; s < S; ++s)
        alpha[0][s] = fhmm_init_log(cfg, s) + fhmm_emit_log(cfg, mu, s, y[0]);
    for (int t = 1; t < cfg.T; ++t)
        for (int s1 = 0; s1 < S; ++s1) {
            double acc = ninf;
            for (int s0 = 0; s0 < S; ++s0)
                acc = lse2(acc, alpha[t - 1][s0] + fhmm_trans_log(cfg, s0, s1));
            alpha[t][s1] = acc + fhmm_emit_log(cfg, mu, s1, y[t]);
        }
    for (int t = cfg.T - 2; t >= 0; --t)
        for (int s0 = 0; s0 < S; ++s0) {
            double acc = ninf;
            for (int s1 = 0; s1 < S; ++s1)
                acc = lse2(acc, fhmm_trans_log(cfg, s0, s1) +
                                    fhmm_emit_log(cfg, mu, s1, y[t + 1]) + beta[t + 1][s1]);
            beta[t][s0] = acc;
        }

    FhmmOracle out;
    {
        double acc = ninf;
        for (int s = 0; s < S; ++s) acc = lse2(acc, alpha[cfg.T - 1][s]);
        out.log_evidence = acc;
    }
    out.marginals.assign(cfg.T, std::vector<double>(cfg.D, 0.0));
    for (int t = 0; t < cfg.T; ++t) {
        double norm = ninf;
        for (int s = 0; s < S; ++s) norm = lse2(norm, alpha[t][s] + beta[t][s]);
        for (int s = 0; s < S; ++s) {
            const double p = std::exp(alpha[t][s] + beta[t][s] - norm);
            for (int i = 0; i < cfg.D; ++i)
                if (s & (1 << i)) out.marginals[t][i] += p;
        }
    }
    return out;
}

double fhmm_evidence_by_summation(const FhmmConfig& cfg, const std::vector<double>& y) {
    const long total_bits = static_cast<long>(cfg.D) * cfg.T;
    if (total_bits > 24) throw InvalidParameters("trajectory enumeration infeasible");
    const auto mu = cfg.mu();
    const long n_traj = 1L << total_bits;
    double acc = -std::numeric_limits<double>::infinity();
    for (long traj = 0; traj < n_traj; ++traj) {
        double lp = 0.0;
        int prev = 0;
        for (int t = 0; t < cfg.T; ++t) {
            const int s = static_cast<int>((traj >> (static_cast<long>(t) * cfg.D)) &
                                           ((1L << cfg.D) - 1));
            lp += t == 0 ? fhmm_init_log(cfg, s) : fhmm_trans_log(cfg, prev, s);
            lp += fhmm_emit_log(cfg, mu, s, y[t]);
            prev = s;
        }
        acc = lse2(acc, lp);
    }
    return acc;
}

std::vector<double> fhmm_episode(const FhmmConfig& cfg, Rng& rng) {
    const auto mu = cfg.mu();
    std::vector<int> state(cfg.D, 0);
    std::vector<double> y(cfg.T);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, cfg.sigma);
    for (int t = 0; t < cfg.T; ++t) {
        for (int i = 0; i < cfg.D; ++i) {
            if (t == 0)
                state[i] = u(rng) < cfg.p_init ? 1 : 0;
            else if (u(rng) < cfg.p_switch)
                state[i] = 1 - state[i];
        }
        double mean = 0.0;
        for (int i = 0; i < cfg.D; ++i) mean += mu[i] * state[i];
        y[t] = mean + noise(rng);
    }
    return y;
}

namespace {

std::vector<std::vector<double>> read_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read data file " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

Assignment load_observations(const BuiltModel& bm, const std::string& model_name,
                             const std::string& path) {
    const GraphModel& m = bm.model;
    Assignment obs = m.blank();
    const auto rows = read_rows(path);
    if (rows.empty()) throw EmptyDataset("no data rows in " + path);
    if (model_name == "conjugate-toy") {
        obs[m.index_of({"y", -1})] = rows[0][0];
        return obs;
    }
    if (model_name == "regression" || model_name == "pump") {
        const char* a = model_name == "regression" ? "z" : "t";
        const char* b = model_name == "regression" ? "t" : "y";
        int expected = 0;
        while (m.find({a, expected})) ++expected;
        if (static_cast<int>(rows.size()) != expected)
            throw DimensionMismatch(model_name + " model was built for N=" +
                                    std::to_string(expected) + " observations, data file has " +
                                    std::to_string(rows.size()));
        for (int n = 0; n < expected; ++n) {
            if (rows[n].size() < 2) throw Error("expected two columns in " + path);
            obs[m.index_of({a, n})] = rows[n][0];
            obs[m.index_of({b, n})] = rows[n][1];
        }
        return obs;
    }
    if (model_name == "fhmm") {
        int T = 0;
        while (m.find({"y", T})) ++T;
        if (static_cast<int>(rows.size()) != T + 1)
            throw DimensionMismatch("fhmm data file must have a header row plus T=" +
                                    std::to_string(T) + " observations");
        for (int t = 0; t < T; ++t) obs[m.index_of({"y", t})] = rows[t + 1][0];
        return obs;
    }
    throw Error("unknown model '" + model_name + "'");
}

void save_pump_fixture(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << "# pump failure fixture: exposure time, failure count\n";
    for (int n = 0; n < 10; ++n) out << PUMP_T[n] << " " << PUMP_Y[n] << "\n";
}

}  // namespace nsmc
