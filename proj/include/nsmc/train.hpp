#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nsmc/graph.hpp"
#include "nsmc/inverse.hpp"
#include "nsmc/made.hpp"

namespace nsmc {

struct TrainConfig {
    int n_train = 10000;  // synthetic rows per epoch
    int n_validate = 1000;
    int minibatch = 100;
    int max_steps = 500;  // updates per epoch
    int n_epochs = 50;
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double early_stop_slack = 1e-6;
    std::vector<int> hidden_sizes{50};
    int components = 4;
    unsigned seed = 0;
    bool verbose = false;
};

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long t = 0;

    static AdamState like(const MaskedNetwork& net);
};

// Core Adam recurrence with bias correction on one parameter array; t is the
// 1-based update count.
void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                 std::span<double> v, long t, const TrainConfig& cfg);

// One update with bias correction; grads are divided by `scale` (batch size).
void adam_step(MaskedNetwork& net, const GradientSet& g, AdamState& st,
               const TrainConfig& cfg, double scale);

struct FactorDataset {
    std::vector<std::vector<double>> cond, target;

    std::size_t size() const { return target.size(); }
};

// Fixed-size conditioner summary used when a factor sets
// summarize_conditioners: (mean, mean-of-logs, sd-of-logs, count).
std::vector<double> summarize(std::span<const double> values);

// Extracts the (cond, target) row of `f` from a full model assignment.
void extract_row(const GraphModel& m, const InverseFactor& f, const Assignment& a,
                 std::vector<double>& cond, std::vector<double>& target);

// Pools rows from every listed factor over fresh ancestral draws until at
// least n_rows rows exist, then truncates.
FactorDataset synth_dataset(const GraphModel& m, const std::vector<InverseFactor>& factors,
                            int n_rows, Rng& rng);

double validation_nll(const MaskedNetwork& net, const FactorDataset& data);

struct NetTrainResult {
    double final_val_nll = 0.0;
    double best_val_nll = 0.0;
    int epochs_run = 0;
    std::vector<int> steps_per_epoch;
    // Held-out NLL after every update, across epochs (not persisted in
    // artifacts).
    std::vector<double> val_trace;
};

// Hybrid optimization: every epoch draws fresh train/validation sets, runs
// minibatch Adam, and ends the epoch when held-out NLL stops improving.
// Input normalization is fit from the first epoch's training set.
NetTrainResult train_factor(MaskedNetwork& net, const GraphModel& m,
                            const std::vector<InverseFactor>& factors,
                            const TrainConfig& cfg, unsigned net_seed);

struct TrainArtifact {
    std::string model_name;
    std::vector<InverseFactor> factors;  // inverse sampling order
    std::vector<int> net_of_factor;      // factor index -> net index
    std::vector<MaskedNetwork> nets;
    std::vector<NetTrainResult> results;
    nlohmann::json meta;
};

// Network shape chosen per factor group from the model's families: Bernoulli
// head iff every target is Bernoulli, mixture head otherwise; conditioner
// and target transforms derived from families (Poisson/Gamma/Exponential
// conditioners -> log1p, Gamma/Exponential targets -> log-space).
NetworkShape shape_for(const GraphModel& m, const InverseFactor& f, const TrainConfig& cfg);
void set_transforms(MaskedNetwork& net, const GraphModel& m, const InverseFactor& f);

// Trains one network per factor (shared across a share_group).
TrainArtifact train_all(const GraphModel& m, const InverseModel& inv,
                        const std::string& model_name, const TrainConfig& cfg);

// Artifact files are deterministic for a fixed model/config/seed.
void save_artifact(const std::string& path, const TrainArtifact& art, const GraphModel& m);
TrainArtifact load_artifact(const std::string& path, const GraphModel& m);

}  // namespace nsmc
