#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nsmc/error.hpp"
#include "nsmc/rng.hpp"

#include "json.hpp"

namespace nsmc {

enum class HeadKind { Mixture, Bernoulli };

// Applied to raw inputs before normalization. Log targets are modeled in
// log-space with the change-of-variables term included in densities.
enum class InputTransform { Identity, Log1p, Log };

struct NetworkShape {
    int n_targets = 1;
    int n_cond = 0;
    std::vector<int> hidden_sizes;
    HeadKind head = HeadKind::Mixture;
    int components = 1;  // mixture size D

    int input_dim() const { return n_cond + n_targets; }
    int output_dim() const {
        return head == HeadKind::Mixture ? n_targets * 3 * components : n_targets;
    }
    void validate() const;
};

// Binary connectivity masks enforcing the autoregressive property over target
// dimensions. Hidden unit labels m in 0..N-1: a unit labeled m sees the
// conditioning inputs always and target inputs x_1..x_m; the head for x_i
// sees hidden units labeled m < i.
struct MaskSet {
    std::vector<std::vector<int>> labels;    // per hidden layer
    std::vector<std::vector<double>> masks;  // per weight layer, row-major (out x in)
};

// Labels are round-robin 0..N-1 by default, shuffled when labeling_seed is
// given.
MaskSet build_masks(const NetworkShape& shape,
                    std::optional<unsigned> labeling_seed = std::nullopt);

struct HeadParams {
    HeadKind kind = HeadKind::Mixture;
    int n = 0, d = 0;
    // mixture, indexed [i*d + k]; weights sum to 1 per target, stdevs >= floor
    std::vector<double> weight, mean, stdev;
    // bernoulli, indexed [i]
    std::vector<double> prob;
};

struct MaskedNetwork {
    NetworkShape shape;
    MaskSet masks;
    std::vector<std::vector<double>> W;  // per layer, row-major; masked entries stay 0
    std::vector<std::vector<double>> b;

    std::vector<InputTransform> cond_transform;    // per conditioning input
    std::vector<InputTransform> target_transform;  // per target (Identity or Log)
    std::vector<double> cond_mean, cond_scale;
    std::vector<double> target_mean, target_scale;
    double sigma_floor = 1e-3;

    std::vector<int> layer_sizes() const;  // [input, hidden..., output]
    std::vector<std::vector<double>*> param_arrays();
    std::vector<const std::vector<double>*> param_arrays() const;
};

MaskedNetwork make_network(const NetworkShape& shape, Rng& init_rng,
                           std::optional<unsigned> labeling_seed = std::nullopt);

struct GradientSet {
    std::vector<std::vector<double>> dW, db;
    double value = 0.0;  // accumulated -log q

    std::vector<std::vector<double>*> param_arrays();
};

GradientSet zero_gradients(const MaskedNetwork& net);

// Scratch buffers reusable across calls.
struct NetWorkspace {
    std::vector<std::vector<double>> act, delta;
    std::vector<double> z, in, relu_mask_scratch;
};

// Head parameters at (cond, targets); entries of `targets` at positions >= i
// do not affect head i. Raw (model-space) inputs.
HeadParams forward(const MaskedNetwork& net, std::span<const double> cond,
                   std::span<const double> targets, NetWorkspace* ws = nullptr);

double log_prob(const MaskedNetwork& net, std::span<const double> cond,
                std::span<const double> targets, NetWorkspace* ws = nullptr);

// Sequential autoregressive draw; returns the sample and its log density.
std::pair<std::vector<double>, double> sample_net(const MaskedNetwork& net,
                                                  std::span<const double> cond, Rng& rng,
                                                  NetWorkspace* ws = nullptr);

// Exact reverse-mode gradients of -log q; gradient entries at masked weight
// positions are zero.
GradientSet backward(const MaskedNetwork& net, std::span<const double> cond,
                     std::span<const double> targets, NetWorkspace* ws = nullptr);

// Adds gradients (and -log q into acc.value) without reallocating.
void backward_accumulate(const MaskedNetwork& net, std::span<const double> cond,
                         std::span<const double> targets, GradientSet& acc,
                         NetWorkspace& ws);

// Versioned weight-file round trip; value-exact.
nlohmann::json to_json(const MaskedNetwork& net);
MaskedNetwork network_from_json(const nlohmann::json& j);

}  // namespace nsmc
