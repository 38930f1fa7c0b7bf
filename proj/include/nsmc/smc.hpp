#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "nsmc/graph.hpp"
#include "nsmc/train.hpp"

namespace nsmc {

// One step of an SMC target sequence: the latents instantiated at that step.
struct SmcStep {
    std::vector<int> vars;
};

struct TargetSequence {
    std::vector<SmcStep> steps;
    // factor_nodes[n]: node indices whose log density enters gamma_n /
    // gamma_{n-1} (every factor that becomes evaluable at step n).
    std::vector<std::vector<int>> factor_nodes;
    // Optional replacement for the default incremental target (log gamma_n -
    // log gamma_{n-1} as a function of the extended assignment).
    std::function<double(int step, const GraphModel&, const Assignment&)> incremental;

    double log_incremental(int step, const GraphModel& m, const Assignment& a) const;
};

// Default intermediate targets: after grouping the latents into steps, each
// step picks up the model factors whose variables are all assigned once the
// step's latents join (observations count as assigned from the start).
TargetSequence make_sequence(const GraphModel& m,
                             const std::vector<std::vector<int>>& step_vars);

// Forward ancestral order, one latent per step.
TargetSequence prior_sequence(const GraphModel& m);
// One step per inverse factor, in inverse sampling order.
TargetSequence inverse_sequence(const GraphModel& m, const std::vector<InverseFactor>& factors);

struct Proposal {
    // Samples step n's variables into `a` and returns log q_n. Must be
    // deterministic given the rng state.
    std::function<double(int step, Assignment& a, Rng& rng)> sample_step;
};

// Samples each step variable from its conditional prior (requires parents
// assigned, i.e. a forward sequence).
Proposal prior_proposal(const GraphModel& m, const TargetSequence& seq);
// Samples step n from the trained inverse network of factor n.
Proposal learned_proposal(const GraphModel& m, const TrainArtifact& art);

enum class ResampleScheme { Multinomial, Systematic };

struct SmcConfig {
    int n_particles = 100;
    // Resample when ESS < threshold * K; 1.0 resamples every step, <= 0 never
    // (plain importance sampling over the whole sequence).
    double resample_threshold = 0.5;
    ResampleScheme scheme = ResampleScheme::Systematic;
    unsigned seed = 0;
};

struct SmcResult {
    std::vector<Assignment> particles;
    std::vector<double> logw;  // final unnormalized log weights
    double log_evidence = 0.0;
    std::vector<double> ess_history;           // after each step's reweighting
    std::vector<double> log_evidence_history;  // running estimate
    std::vector<bool> resampled;               // before step n (n>=1)
    // ancestors[n][k]: index in the step-(n-1) population of the particle
    // that became particle k at step n (identity when not resampled).
    std::vector<std::vector<int>> ancestors;

    std::vector<double> normalized_weights() const;
};

double ess(std::span<const double> logw);
double logsumexp(std::span<const double> v);

// Returns K indices into the weight vector.
std::vector<int> resample_indices(std::span<const double> norm_w, int K, ResampleScheme s,
                                  Rng& rng);

// `obs` must have every observed node assigned; latents may be NaN.
SmcResult run_smc(const GraphModel& m, const TargetSequence& seq, const Proposal& prop,
                  const Assignment& obs, const SmcConfig& cfg);

// Self-normalized posterior expectation of f.
double estimate(const SmcResult& r, const std::function<double(const Assignment&)>& f);
double posterior_mean(const SmcResult& r, int node);

// unique_ancestries(r)[t]: number of distinct step-t ancestors of the final
// particle population.
std::vector<int> unique_ancestries(const SmcResult& r);

// Divide-and-conquer SMC: children run independently over disjoint latent
// sets, are resampled to equal weights, merged particle-by-particle, then the
// node's own sequence extends the merged population.
struct DcTree {
    TargetSequence seq;  // may have no steps (pure merge node)
    Proposal prop;
    std::vector<DcTree> children;
};

SmcResult dc_smc(const GraphModel& m, const DcTree& tree, const Assignment& obs,
                 const SmcConfig& cfg);

// Per-step diagnostics table (step, ess, resampled, unique_ancestries,
// running log evidence).
void write_diagnostics_csv(std::ostream& os, const SmcResult& r);

}  // namespace nsmc
