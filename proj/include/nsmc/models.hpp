#pragma once

#include <map>
#include <string>
#include <vector>

#include "nsmc/graph.hpp"
#include "nsmc/inverse.hpp"
#include "nsmc/train.hpp"

namespace nsmc {

struct RegressionConfig {
    int N = 50;  // dataset size fixed at training time
};

struct PumpConfig {
    int N = 10;
    double mean_exposure = 50.0;  // training law for t_n
};

struct FhmmConfig {
    int D = 20;
    int T = 30;
    double mu_low = 30.0, mu_high = 500.0;  // per-device consumption, linear spread
    double sigma = 10.0;
    double p_init = 0.1;
    double p_switch = 0.05;

    std::vector<double> mu() const;
};

struct BuiltModel {
    GraphModel model;
    InverseModel inverse;
    TrainConfig train_defaults;  // network shape and optimizer defaults
    // Embedded observation fixture (pump only); empty elsewhere.
    Assignment fixture;
    bool has_fixture = false;
};

// x ~ N(0,1), y | x ~ N(x,1); exact posterior x | y ~ N(y/2, 1/2).
BuiltModel build_conjugate_toy();

// Laplace-prior polynomial regression with StudentT(4) likelihood.
BuiltModel build_regression(const RegressionConfig& cfg = {});

// Hierarchical Gamma-Poisson pump-failure model with the classic 10-pump
// fixture embedded.
BuiltModel build_pump(const PumpConfig& cfg = {});

// Factorial HMM: D independent binary chains, additive Gaussian observation.
// The inverse runs forward in time: one factor per step over all D states.
BuiltModel build_fhmm(const FhmmConfig& cfg = {});

// Dispatch by CLI model name with key=value overrides (N, D, T, sigma, ...).
BuiltModel build_model(const std::string& name,
                       const std::map<std::string, std::string>& overrides = {});

// Exact FHMM quantities by forward-backward over the 2^D joint state space.
struct FhmmOracle {
    double log_evidence = 0.0;
    // marginals[t][i] = P(x_t^i = 1 | y_{1:T})
    std::vector<std::vector<double>> marginals;
};

FhmmOracle exact_fhmm(const FhmmConfig& cfg, const std::vector<double>& y);

// Independent cross-check: direct summation over all 2^(D*T) trajectories.
double fhmm_evidence_by_summation(const FhmmConfig& cfg, const std::vector<double>& y);

// Simulates an observation sequence from the FHMM.
std::vector<double> fhmm_episode(const FhmmConfig& cfg, Rng& rng);

// Data files: pump/regression as two-column text, fhmm as a parameter header
// row followed by one observation per row, conjugate-toy as a single value.
Assignment load_observations(const BuiltModel& bm, const std::string& model_name,
                             const std::string& path);
void save_pump_fixture(const std::string& path);

}  // namespace nsmc
