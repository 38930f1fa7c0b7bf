#include "nsmc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

namespace nsmc {

namespace {
constexpr double NEG_INF = -std::numeric_limits<double>::infinity();
}

double logsumexp(std::span<const double> v) {
    double m = NEG_INF;
    for (double x : v) m = std::max(m, x);
    if (m == NEG_INF) return NEG_INF;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

double ess(std::span<const double> logw) {
    const double lse = logsumexp(logw);
    if (lse == NEG_INF) return 0.0;
    double s2 = 0.0;
    for (double lw : logw) {
        const double w = std::exp(lw - lse);
        s2 += w * w;
    }
    return 1.0 / s2;
}

double TargetSequence::log_incremental(int step, const GraphModel& m,
                                       const Assignment& a) const {
    if (incremental) return incremental(step, m, a);
    double total = 0.0;
    for (int v : factor_nodes[step]) {
        const auto params = m.node_params(v, a);
        const double lp = log_pdf(m.node(v).dist.family, params, a[v]);
        if (lp == NEG_INF) return NEG_INF;
        total += lp;
    }
    return total;
}

TargetSequence make_sequence(const GraphModel& m,
                             const std::vector<std::vector<int>>& step_vars) {
    TargetSequence seq;
    const int n = m.size();
    std::vector<int> step_of(n, -2);  // -1 = observed (assigned from the start)
    for (int v : m.observed()) step_of[v] = -1;
    for (std::size_t s = 0; s < step_vars.size(); ++s) {
        seq.steps.push_back(SmcStep{step_vars[s]});
        for (int v : step_vars[s]) {
            if (v < 0 || v >= n || m.node(v).role != Role::Latent || step_of[v] != -2)
                throw InvalidOrder("step variables must list each latent exactly once");
            step_of[v] = static_cast<int>(s);
        }
    }
    for (int v : m.latents())
        if (step_of[v] == -2)
            throw MissingVariable("latent " + to_string(m.node(v).id) +
                                  " not covered by the target sequence");

    seq.factor_nodes.assign(step_vars.size(), {});
    for (int v = 0; v < n; ++v) {
        int at = step_of[v];
        for (int p : m.parents(v)) at = std::max(at, step_of[p]);
        seq.factor_nodes[std::max(at, 0)].push_back(v);
    }
    return seq;
}

TargetSequence prior_sequence(const GraphModel& m) {
    std::vector<std::vector<int>> steps;
    for (int v : topological_sort(m))
        if (m.node(v).role == Role::Latent) steps.push_back({v});
    return make_sequence(m, steps);
}

TargetSequence inverse_sequence(const GraphModel& m,
                                const std::vector<InverseFactor>& factors) {
    std::vector<std::vector<int>> steps;
    for (const auto& f : factors) steps.push_back(f.targets);
    return make_sequence(m, steps);
}

Proposal prior_proposal(const GraphModel& m, const TargetSequence& seq) {
    // Steps are copied so the proposal stays valid if the sequence moves.
    return Proposal{[&m, steps = seq.steps](int step, Assignment& a, Rng& rng) {
        double logq = 0.0;
        for (int v : steps[step].vars) {
            const auto params = m.node_params(v, a);
            a[v] = sample(m.node(v).dist.family, params, rng);
            logq += log_pdf(m.node(v).dist.family, params, a[v]);
        }
        return logq;
    }};
}

Proposal learned_proposal(const GraphModel& m, const TrainArtifact& art) {
    return Proposal{[&m, &art](int step, Assignment& a, Rng& rng) {
        const InverseFactor& f = art.factors[step];
        const MaskedNetwork& net = art.nets[art.net_of_factor[step]];
        std::vector<double> cond, target;
        extract_row(m, f, a, cond, target);  // targets still NaN, unused
        auto [x, logq] = sample_net(net, cond, rng);
        for (std::size_t i = 0; i < f.targets.size(); ++i) a[f.targets[i]] = x[i];
        return logq;
    }};
}

std::vector<double> SmcResult::normalized_weights() const {
    const double lse = logsumexp(logw);
    std::vector<double> w(logw.size());
    for (std::size_t k = 0; k < logw.size(); ++k) w[k] = std::exp(logw[k] - lse);
    return w;
}

std::vector<int> resample_indices(std::span<const double> norm_w, int K, ResampleScheme s,
                                  Rng& rng) {
    std::vector<int> idx(K);
    const int n = static_cast<int>(norm_w.size());
    if (s == ResampleScheme::Multinomial) {
        std::discrete_distribution<int> d(norm_w.begin(), norm_w.end());
        for (int k = 0; k < K; ++k) idx[k] = d(rng);
        std::sort(idx.begin(), idx.end());
        return idx;
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double offset = u(rng) / K;
    double cum = norm_w[0];
    int j = 0;
    for (int k = 0; k < K; ++k) {
        const double point = offset + static_cast<double>(k) / K;
        while (cum < point && j + 1 < n) cum += norm_w[++j];
        idx[k] = j;
    }
    return idx;
}

namespace {

// Runs `seq` over an existing equal-or-weighted population, extending
// r.ess_history etc. `stream` keeps rng draws distinct across d&c nodes.
void advance(const GraphModel& m, const TargetSequence& seq, const Proposal& prop,
             const SmcConfig& cfg, SmcResult& r, double& logz_acc, unsigned stream) {
    const int K = cfg.n_particles;
    const double logK = std::log(static_cast<double>(K));
    const int base_step = static_cast<int>(r.ancestors.size());

    for (std::size_t n = 0; n < seq.steps.size(); ++n) {
        bool did_resample = false;
        std::vector<int> anc(K);
        std::iota(anc.begin(), anc.end(), 0);
        const bool first = base_step == 0 && n == 0;
        if (!first && cfg.resample_threshold > 0.0 &&
            ess(r.logw) < cfg.resample_threshold * K) {
            const double lse = logsumexp(r.logw);
            if (lse == NEG_INF) throw DegenerateWeights("all particle weights are zero");
            logz_acc += lse - logK;
            std::vector<double> w(K);
            for (int k = 0; k < K; ++k) w[k] = std::exp(r.logw[k] - lse);
            Rng rng = derive_rng(cfg.seed, 0x52530000ULL + stream, base_step + n);
            anc = resample_indices(w, K, cfg.scheme, rng);
            std::vector<Assignment> next(K);
            for (int k = 0; k < K; ++k) next[k] = r.particles[anc[k]];
            r.particles = std::move(next);
            std::fill(r.logw.begin(), r.logw.end(), 0.0);
            did_resample = true;
        }
        r.resampled.push_back(did_resample);
        r.ancestors.push_back(std::move(anc));

        for (int k = 0; k < K; ++k) {
            Rng rng = derive_rng(cfg.seed, 0x50520000ULL + stream,
                                 (static_cast<std::uint64_t>(base_step + n) << 32) |
                                     static_cast<std::uint64_t>(k));
            const double logq = prop.sample_step(static_cast<int>(n), r.particles[k], rng);
            const double delta = seq.log_incremental(static_cast<int>(n), m, r.particles[k]);
            r.logw[k] += delta - logq;
        }
        r.ess_history.push_back(ess(r.logw));
        const double lse = logsumexp(r.logw);
        if (lse == NEG_INF) throw DegenerateWeights("all particle weights are zero");
        r.log_evidence_history.push_back(logz_acc + lse - logK);
    }
    r.log_evidence = r.log_evidence_history.empty() ? logz_acc : r.log_evidence_history.back();
}

}  // namespace

SmcResult run_smc(const GraphModel& m, const TargetSequence& seq, const Proposal& prop,
                  const Assignment& obs, const SmcConfig& cfg) {
    if (cfg.n_particles < 1) throw InvalidParameters("n_particles must be positive");
    for (int v : m.observed())
        if (std::isnan(obs[v]))
            throw MissingVariable("observed node " + to_string(m.node(v).id) + " unassigned");
    SmcResult r;
    Assignment init = m.blank();
    for (int v : m.observed()) init[v] = obs[v];
    r.particles.assign(cfg.n_particles, init);
    r.logw.assign(cfg.n_particles, 0.0);
    double logz_acc = 0.0;
    advance(m, seq, prop, cfg, r, logz_acc, 0);
    return r;
}

double estimate(const SmcResult& r, const std::function<double(const Assignment&)>& f) {
    const auto w = r.normalized_weights();
    double total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) total += w[k] * f(r.particles[k]);
    return total;
}

double posterior_mean(const SmcResult& r, int node) {
    return estimate(r, [node](const Assignment& a) { return a[node]; });
}

std::vector<int> unique_ancestries(const SmcResult& r) {
    const int T = static_cast<int>(r.ancestors.size());
    const int K = static_cast<int>(r.logw.size());
    std::vector<int> ua(T, 0);
    std::vector<int> cur(K);
    std::iota(cur.begin(), cur.end(), 0);
    for (int t = T - 1; t >= 0; --t) {
        std::set<int> distinct(cur.begin(), cur.end());
        ua[t] = static_cast<int>(distinct.size());
        for (int& c : cur) c = r.ancestors[t][c];
    }
    return ua;
}

SmcResult dc_smc(const GraphModel& m, const DcTree& tree, const Assignment& obs,
                 const SmcConfig& cfg) {
    // Depth-first node numbering keeps every node's rng streams distinct.
    unsigned next_stream = 0;
    std::function<SmcResult(const DcTree&)> run = [&](const DcTree& node) -> SmcResult {
        const unsigned stream = next_stream++;
        const int K = cfg.n_particles;
        SmcResult r;
        double logz_acc = 0.0;
        if (node.children.empty()) {
            Assignment init = m.blank();
            for (int v : m.observed()) init[v] = obs[v];
            r.particles.assign(K, init);
            r.logw.assign(K, 0.0);
        } else {
            std::vector<SmcResult> kids;
            for (const auto& c : node.children) kids.push_back(run(c));
            // Resample each child to an unweighted population, then merge
            // particle-by-particle (children cover disjoint latents).
            Assignment init = m.blank();
            for (int v : m.observed()) init[v] = obs[v];
            r.particles.assign(K, init);
            r.logw.assign(K, 0.0);
            for (std::size_t c = 0; c < kids.size(); ++c) {
                auto& kid = kids[c];
                logz_acc += kid.log_evidence;
                const auto w = kid.normalized_weights();
                Rng rng = derive_rng(cfg.seed, 0x44430000ULL + stream, c);
                const auto idx = resample_indices(w, K, cfg.scheme, rng);
                for (int k = 0; k < K; ++k) {
                    const Assignment& src = kid.particles[idx[k]];
                    for (int v = 0; v < m.size(); ++v)
                        if (m.node(v).role == Role::Latent && !std::isnan(src[v]))
                            r.particles[k][v] = src[v];
                }
            }
        }
        advance(m, node.seq, node.prop, cfg, r, logz_acc, stream);
        return r;
    };
    return run(tree);
}

void write_diagnostics_csv(std::ostream& os, const SmcResult& r) {
    const auto ua = unique_ancestries(r);
    os << "step,ess,resampled,unique_ancestries,log_evidence\n";
    for (std::size_t t = 0; t < r.ess_history.size(); ++t)
        os << t << "," << r.ess_history[t] << "," << (r.resampled[t] ? 1 : 0) << ","
           << ua[t] << "," << r.log_evidence_history[t] << "\n";
}

}  // namespace nsmc
