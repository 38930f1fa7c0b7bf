#include "nsmc/dist.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "nsmc/error.hpp"

namespace nsmc {

namespace {
constexpr double NEG_INF = -std::numeric_limits<double>::infinity();
constexpr double LOG_2PI = 1.8378770664093454836;

bool is_integer(double x) { return std::floor(x) == x; }
}  // namespace

const char* family_name(Family f) {
    switch (f) {
        case Family::Gaussian: return "gaussian";
        case Family::Laplace: return "laplace";
        case Family::StudentT: return "student_t";
        case Family::Gamma: return "gamma";
        case Family::Exponential: return "exponential";
        case Family::Poisson: return "poisson";
        case Family::Bernoulli: return "bernoulli";
        case Family::Uniform: return "uniform";
    }
    return "?";
}

int family_param_count(Family f) {
    switch (f) {
        case Family::StudentT: return 3;
        case Family::Exponential:
        case Family::Poisson:
        case Family::Bernoulli: return 1;
        default: return 2;
    }
}

bool family_discrete(Family f) { return f == Family::Poisson || f == Family::Bernoulli; }

void check_params(Family f, std::span<const double> p) {
    if (static_cast<int>(p.size()) != family_param_count(f))
        throw InvalidParameters(std::string(family_name(f)) + ": wrong parameter count");
    for (double v : p)
        if (!std::isfinite(v)) throw InvalidParameters(std::string(family_name(f)) + ": non-finite parameter");
    auto fail = [&](const char* what) {
        std::ostringstream os;
        os << family_name(f) << ": " << what;
        throw InvalidParameters(os.str());
    };
    switch (f) {
        case Family::Gaussian:
            if (p[1] <= 0) fail("variance must be > 0");
            break;
        case Family::Laplace:
            if (p[1] <= 0) fail("scale must be > 0");
            break;
        case Family::StudentT:
            if (p[0] <= 0) fail("dof must be > 0");
            if (p[2] <= 0) fail("scale must be > 0");
            break;
        case Family::Gamma:
            if (p[0] <= 0 || p[1] <= 0) fail("shape and rate must be > 0");
            break;
        case Family::Exponential:
            if (p[0] <= 0) fail("rate must be > 0");
            break;
        case Family::Poisson:
            if (p[0] < 0) fail("rate must be >= 0");
            break;
        case Family::Bernoulli:
            if (p[0] < 0 || p[0] > 1) fail("probability must be in [0,1]");
            break;
        case Family::Uniform:
            if (p[0] >= p[1]) fail("low must be < high");
            break;
    }
}

double log_pdf(Family f, std::span<const double> p, double x) {
    switch (f) {
        case Family::Gaussian: {
            const double m = p[0], v = p[1];
            const double d = x - m;
            return -0.5 * (LOG_2PI + std::log(v)) - d * d / (2.0 * v);
        }
        case Family::Laplace: {
            const double m = p[0], b = p[1];
            return -std::log(2.0 * b) - std::abs(x - m) / b;
        }
        case Family::StudentT: {
            const double nu = p[0], m = p[1], s = p[2];
            const double z = (x - m) / s;
            return std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0) -
                   0.5 * std::log(nu * M_PI) - std::log(s) -
                   (nu + 1.0) / 2.0 * std::log1p(z * z / nu);
        }
        case Family::Gamma: {
            const double a = p[0], r = p[1];
            if (x <= 0) return NEG_INF;
            return a * std::log(r) - std::lgamma(a) + (a - 1.0) * std::log(x) - r * x;
        }
        case Family::Exponential: {
            const double r = p[0];
            if (x < 0) return NEG_INF;
            return std::log(r) - r * x;
        }
        case Family::Poisson: {
            const double r = p[0];
            if (x < 0 || !is_integer(x)) return NEG_INF;
            if (r == 0.0) return x == 0.0 ? 0.0 : NEG_INF;
            return x * std::log(r) - r - std::lgamma(x + 1.0);
        }
        case Family::Bernoulli: {
            const double q = p[0];
            if (x == 1.0) return q > 0 ? std::log(q) : NEG_INF;
            if (x == 0.0) return q < 1 ? std::log1p(-q) : NEG_INF;
            return NEG_INF;
        }
        case Family::Uniform: {
            const double lo = p[0], hi = p[1];
            if (x < lo || x > hi) return NEG_INF;
            return -std::log(hi - lo);
        }
    }
    return NEG_INF;
}

double sample(Family f, std::span<const double> p, Rng& rng) {
    switch (f) {
        case Family::Gaussian: {
            std::normal_distribution<double> d(p[0], std::sqrt(p[1]));
            return d(rng);
        }
        case Family::Laplace: {
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            const double v = u(rng);
            return p[0] - p[1] * std::copysign(std::log1p(-2.0 * std::abs(v)), v);
        }
        case Family::StudentT: {
            std::student_t_distribution<double> d(p[0]);
            return p[1] + p[2] * d(rng);
        }
        case Family::Gamma: {
            std::gamma_distribution<double> d(p[0], 1.0 / p[1]);
            // tiny shapes underflow to exactly 0, which is outside the support
            return std::max(d(rng), 1e-300);
        }
        case Family::Exponential: {
            std::exponential_distribution<double> d(p[0]);
            return d(rng);
        }
        case Family::Poisson: {
            if (p[0] == 0.0) return 0.0;
            // Normal approximation for huge rates (hierarchical priors can
            // produce them); the library sampler degrades there.
            if (p[0] > 1e6) {
                std::normal_distribution<double> d(p[0], std::sqrt(p[0]));
                return std::max(0.0, std::round(d(rng)));
            }
            std::poisson_distribution<long> d(p[0]);
            return static_cast<double>(d(rng));
        }
        case Family::Bernoulli: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            return u(rng) < p[0] ? 1.0 : 0.0;
        }
        case Family::Uniform: {
            std::uniform_real_distribution<double> u(p[0], p[1]);
            return u(rng);
        }
    }
    return 0.0;
}

}  // namespace nsmc
