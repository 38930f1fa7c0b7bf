#pragma once

#include <span>
#include <vector>

#include "nsmc/rng.hpp"

namespace nsmc {

// Supported one-dimensional families. Parameter vectors:
//   Gaussian(mean, variance), Laplace(location, scale),
//   StudentT(dof, location, scale), Gamma(shape, rate), Exponential(rate),
//   Poisson(rate), Bernoulli(probability), Uniform(low, high)
enum class Family {
    Gaussian,
    Laplace,
    StudentT,
    Gamma,
    Exponential,
    Poisson,
    Bernoulli,
    Uniform,
};

const char* family_name(Family f);
int family_param_count(Family f);
bool family_discrete(Family f);

// Throws InvalidParameters on constraint violations (variance > 0, rate >= 0,
// probability in [0,1], low < high).
void check_params(Family f, std::span<const double> p);

// Natural-log density/mass; -inf outside support.
double log_pdf(Family f, std::span<const double> p, double x);

double sample(Family f, std::span<const double> p, Rng& rng);

}  // namespace nsmc
