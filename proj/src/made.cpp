#include "nsmc/made.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsmc/kernels.hpp"

namespace nsmc {

namespace {

constexpr double NEG_INF = -std::numeric_limits<double>::infinity();
constexpr double LOG_2PI = 1.8378770664093454836;

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double transform_input(InputTransform t, double x) {
    switch (t) {
        case InputTransform::Identity: return x;
        case InputTransform::Log1p: return std::log1p(x);
        case InputTransform::Log: return std::log(x);
    }
    return x;
}

double logsumexp(std::span<const double> v) {
    double m = NEG_INF;
    for (double x : v) m = std::max(m, x);
    if (m == NEG_INF) return NEG_INF;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// log of the head-i mixture density at normalized target z.
double mixture_log_term(const HeadParams& h, int i, double z, std::vector<double>& scratch) {
    const int d = h.d;
    scratch.resize(d);
    for (int k = 0; k < d; ++k) {
        const double mu = h.mean[i * d + k];
        const double sg = h.stdev[i * d + k];
        const double zz = (z - mu) / sg;
        scratch[k] = std::log(h.weight[i * d + k]) - 0.5 * (LOG_2PI + zz * zz) - std::log(sg);
    }
    return logsumexp(scratch);
}

// log |dz/dx| for target i at raw value x, z = (T(x) - m) / s.
double target_log_jacobian(const MaskedNetwork& net, int i, double x) {
    double lj = -std::log(net.target_scale[i]);
    if (net.target_transform[i] == InputTransform::Log) lj -= std::log(x);
    return lj;
}

}  // namespace

void NetworkShape::validate() const {
    if (n_targets < 1 || n_cond < 0 || hidden_sizes.empty() || components < 1)
        throw ShapeMismatch("invalid network shape");
    for (int h : hidden_sizes)
        if (h < 1) throw ShapeMismatch("invalid hidden layer size");
}

namespace {

MaskSet rebuild_masks(const NetworkShape& shape, std::vector<std::vector<int>> labels) {
    const int N = shape.n_targets;
    const int C = shape.n_cond;
    const int L = static_cast<int>(shape.hidden_sizes.size());

    MaskSet ms;
    ms.labels = std::move(labels);
    ms.masks.resize(L + 1);
    // input -> first hidden: conditioning inputs always connect, target input
    // x_j (0-based j) connects to a unit labeled m iff j < m.
    {
        const int rows = shape.hidden_sizes[0], cols = C + N;
        auto& M = ms.masks[0];
        M.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        for (int u = 0; u < rows; ++u) {
            const int m = ms.labels[0][u];
            for (int j = 0; j < C; ++j) M[u * cols + j] = 1.0;
            for (int j = 0; j < N; ++j) M[u * cols + C + j] = j < m ? 1.0 : 0.0;
        }
    }
    // hidden -> hidden: label m feeds label m' iff m <= m'.
    for (int l = 1; l < L; ++l) {
        const int rows = shape.hidden_sizes[l], cols = shape.hidden_sizes[l - 1];
        auto& M = ms.masks[l];
        M.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        for (int u = 0; u < rows; ++u)
            for (int v = 0; v < cols; ++v)
                M[u * cols + v] = ms.labels[l - 1][v] <= ms.labels[l][u] ? 1.0 : 0.0;
    }
    // last hidden -> output: head for x_i (0-based) sees labels m <= i-1,
    // i.e. the 1-based rule m < i.
    {
        const int rows = shape.output_dim(), cols = shape.hidden_sizes[L - 1];
        auto& M = ms.masks[L];
        M.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        const int per = shape.head == HeadKind::Mixture ? 3 * shape.components : 1;
        for (int o = 0; o < rows; ++o) {
            const int i = o / per;
            for (int v = 0; v < cols; ++v)
                M[o * cols + v] = ms.labels[L - 1][v] <= i ? 1.0 : 0.0;
        }
    }
    return ms;
}

}  // namespace

MaskSet build_masks(const NetworkShape& shape, std::optional<unsigned> labeling_seed) {
    shape.validate();
    const int N = shape.n_targets;
    const int L = static_cast<int>(shape.hidden_sizes.size());
    std::vector<std::vector<int>> labels(L);
    for (int l = 0; l < L; ++l) {
        labels[l].resize(shape.hidden_sizes[l]);
        for (int u = 0; u < shape.hidden_sizes[l]; ++u) labels[l][u] = u % N;
        if (labeling_seed) {
            Rng rng = derive_rng(*labeling_seed, 0x6d61646cULL, l);
            std::shuffle(labels[l].begin(), labels[l].end(), rng);
        }
    }
    return rebuild_masks(shape, std::move(labels));
}

std::vector<int> MaskedNetwork::layer_sizes() const {
    std::vector<int> s;
    s.push_back(shape.input_dim());
    for (int h : shape.hidden_sizes) s.push_back(h);
    s.push_back(shape.output_dim());
    return s;
}

std::vector<std::vector<double>*> MaskedNetwork::param_arrays() {
    std::vector<std::vector<double>*> p;
    for (std::size_t l = 0; l < W.size(); ++l) {
        p.push_back(&W[l]);
        p.push_back(&b[l]);
    }
    return p;
}

std::vector<const std::vector<double>*> MaskedNetwork::param_arrays() const {
    std::vector<const std::vector<double>*> p;
    for (std::size_t l = 0; l < W.size(); ++l) {
        p.push_back(&W[l]);
        p.push_back(&b[l]);
    }
    return p;
}

std::vector<std::vector<double>*> GradientSet::param_arrays() {
    std::vector<std::vector<double>*> p;
    for (std::size_t l = 0; l < dW.size(); ++l) {
        p.push_back(&dW[l]);
        p.push_back(&db[l]);
    }
    return p;
}

MaskedNetwork make_network(const NetworkShape& shape, Rng& init_rng,
                           std::optional<unsigned> labeling_seed) {
    shape.validate();
    MaskedNetwork net;
    net.shape = shape;
    net.masks = build_masks(shape, labeling_seed);
    const auto sizes = net.layer_sizes();
    const int L = static_cast<int>(sizes.size()) - 1;
    net.W.resize(L);
    net.b.resize(L);
    for (int l = 0; l < L; ++l) {
        const int rows = sizes[l + 1], cols = sizes[l];
        const double r = std::sqrt(6.0 / (rows + cols));
        std::uniform_real_distribution<double> u(-r, r);
        net.W[l].resize(static_cast<std::size_t>(rows) * cols);
        for (std::size_t k = 0; k < net.W[l].size(); ++k)
            net.W[l][k] = u(init_rng) * net.masks.masks[l][k];
        net.b[l].assign(rows, 0.0);
    }
    // Spread mixture mean biases to avoid component collapse.
    if (shape.head == HeadKind::Mixture && shape.components > 1) {
        const int D = shape.components;
        for (int i = 0; i < shape.n_targets; ++i)
            for (int k = 0; k < D; ++k)
                net.b[L - 1][i * 3 * D + D + k] = -2.0 + 4.0 * k / (D - 1);
    }
    net.cond_transform.assign(shape.n_cond, InputTransform::Identity);
    net.target_transform.assign(shape.n_targets, InputTransform::Identity);
    net.cond_mean.assign(shape.n_cond, 0.0);
    net.cond_scale.assign(shape.n_cond, 1.0);
    net.target_mean.assign(shape.n_targets, 0.0);
    net.target_scale.assign(shape.n_targets, 1.0);
    return net;
}

GradientSet zero_gradients(const MaskedNetwork& net) {
    GradientSet g;
    g.dW.resize(net.W.size());
    g.db.resize(net.b.size());
    for (std::size_t l = 0; l < net.W.size(); ++l) {
        g.dW[l].assign(net.W[l].size(), 0.0);
        g.db[l].assign(net.b[l].size(), 0.0);
    }
    return g;
}

namespace {

// Transformed, normalized input vector; target entries from z (already
// normalized).
void build_input(const MaskedNetwork& net, std::span<const double> cond,
                 std::span<const double> z, std::vector<double>& in) {
    const int C = net.shape.n_cond, N = net.shape.n_targets;
    in.resize(C + N);
    for (int j = 0; j < C; ++j)
        in[j] = (transform_input(net.cond_transform[j], cond[j]) - net.cond_mean[j]) /
                net.cond_scale[j];
    for (int i = 0; i < N; ++i) in[C + i] = z[i];
}

void normalize_targets(const MaskedNetwork& net, std::span<const double> targets,
                       std::vector<double>& z) {
    const int N = net.shape.n_targets;
    z.resize(N);
    for (int i = 0; i < N; ++i)
        z[i] = (transform_input(net.target_transform[i], targets[i]) - net.target_mean[i]) /
               net.target_scale[i];
}

void check_dims(const MaskedNetwork& net, std::span<const double> cond,
                std::span<const double> targets) {
    if (static_cast<int>(cond.size()) != net.shape.n_cond ||
        static_cast<int>(targets.size()) != net.shape.n_targets)
        throw DimensionMismatch("masked network input dimension mismatch");
}

// Runs the net on a prepared input, filling ws.act (act[0] = input,
// act[1..L] = hidden relu activations, act[L+1] = raw output).
void run_forward(const MaskedNetwork& net, const std::vector<double>& in, NetWorkspace& ws) {
    const auto sizes = net.layer_sizes();
    const int L = static_cast<int>(net.W.size());
    ws.act.resize(L + 1);
    ws.act[0] = in;
    for (int l = 0; l < L; ++l) {
        auto& out = ws.act[l + 1];
        out.resize(sizes[l + 1]);
        kern::matvec(net.W[l].data(), sizes[l + 1], sizes[l], ws.act[l].data(), out.data());
        for (int i = 0; i < sizes[l + 1]; ++i) out[i] += net.b[l][i];
        if (l + 1 < static_cast<int>(sizes.size()) - 1)  // hidden: relu
            for (auto& v : out) v = v > 0.0 ? v : 0.0;
    }
}

HeadParams heads_from_output(const MaskedNetwork& net, const std::vector<double>& out) {
    HeadParams h;
    h.kind = net.shape.head;
    h.n = net.shape.n_targets;
    h.d = net.shape.components;
    if (h.kind == HeadKind::Bernoulli) {
        h.prob.resize(h.n);
        for (int i = 0; i < h.n; ++i) h.prob[i] = sigmoid(out[i]);
        return h;
    }
    const int D = h.d;
    h.weight.resize(h.n * D);
    h.mean.resize(h.n * D);
    h.stdev.resize(h.n * D);
    for (int i = 0; i < h.n; ++i) {
        const double* a = out.data() + i * 3 * D;
        const double* mu = a + D;
        const double* s = a + 2 * D;
        double m = NEG_INF;
        for (int k = 0; k < D; ++k) m = std::max(m, a[k]);
        double tot = 0.0;
        for (int k = 0; k < D; ++k) tot += std::exp(a[k] - m);
        for (int k = 0; k < D; ++k) {
            h.weight[i * D + k] = std::exp(a[k] - m) / tot;
            h.mean[i * D + k] = mu[k];
            h.stdev[i * D + k] = std::max(softplus(s[k]), net.sigma_floor);
        }
    }
    return h;
}

}  // namespace

HeadParams forward(const MaskedNetwork& net, std::span<const double> cond,
                   std::span<const double> targets, NetWorkspace* ws) {
    check_dims(net, cond, targets);
    NetWorkspace local;
    NetWorkspace& w = ws ? *ws : local;
    normalize_targets(net, targets, w.z);
    build_input(net, cond, w.z, w.in);
    run_forward(net, w.in, w);
    return heads_from_output(net, w.act.back());
}

double log_prob(const MaskedNetwork& net, std::span<const double> cond,
                std::span<const double> targets, NetWorkspace* ws) {
    check_dims(net, cond, targets);
    NetWorkspace local;
    NetWorkspace& w = ws ? *ws : local;
    const int N = net.shape.n_targets;
    for (int i = 0; i < N; ++i)
        if (net.target_transform[i] == InputTransform::Log && targets[i] <= 0.0)
            return NEG_INF;
    normalize_targets(net, targets, w.z);
    build_input(net, cond, w.z, w.in);
    run_forward(net, w.in, w);
    const HeadParams h = heads_from_output(net, w.act.back());
    double total = 0.0;
    if (h.kind == HeadKind::Bernoulli) {
        for (int i = 0; i < N; ++i) {
            if (targets[i] == 1.0)
                total += std::log(h.prob[i]);
            else if (targets[i] == 0.0)
                total += std::log1p(-h.prob[i]);
            else
                return NEG_INF;
        }
        return total;
    }
    for (int i = 0; i < N; ++i) {
        total += mixture_log_term(h, i, w.z[i], w.relu_mask_scratch);
        total += target_log_jacobian(net, i, targets[i]);
    }
    return total;
}

std::pair<std::vector<double>, double> sample_net(const MaskedNetwork& net,
                                                  std::span<const double> cond, Rng& rng,
                                                  NetWorkspace* ws) {
    const int N = net.shape.n_targets;
    if (static_cast<int>(cond.size()) != net.shape.n_cond)
        throw DimensionMismatch("masked network input dimension mismatch");
    NetWorkspace local;
    NetWorkspace& w = ws ? *ws : local;
    std::vector<double> x(N, 0.0);
    w.z.assign(N, 0.0);
    double logq = 0.0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < N; ++i) {
        build_input(net, cond, w.z, w.in);
        run_forward(net, w.in, w);
        const HeadParams h = heads_from_output(net, w.act.back());
        if (h.kind == HeadKind::Bernoulli) {
            x[i] = unif(rng) < h.prob[i] ? 1.0 : 0.0;
            logq += x[i] == 1.0 ? std::log(h.prob[i]) : std::log1p(-h.prob[i]);
            w.z[i] = x[i];
        } else {
            const int D = h.d;
            double u = unif(rng);
            int k = 0;
            for (; k < D - 1; ++k) {
                u -= h.weight[i * D + k];
                if (u < 0.0) break;
            }
            std::normal_distribution<double> g(h.mean[i * D + k], h.stdev[i * D + k]);
            const double zdraw = g(rng);
            const double raw = zdraw * net.target_scale[i] + net.target_mean[i];
            x[i] = net.target_transform[i] == InputTransform::Log ? std::exp(raw) : raw;
            // Recompute z from x so the reported density matches log_prob
            // bit-for-bit.
            w.z[i] = (transform_input(net.target_transform[i], x[i]) - net.target_mean[i]) /
                     net.target_scale[i];
            logq += mixture_log_term(h, i, w.z[i], w.relu_mask_scratch);
            logq += target_log_jacobian(net, i, x[i]);
        }
    }
    return {std::move(x), logq};
}

namespace {

void apply_masks(const MaskedNetwork& net, GradientSet& g) {
    for (std::size_t l = 0; l < g.dW.size(); ++l) {
        const auto& M = net.masks.masks[l];
        auto& dW = g.dW[l];
        for (std::size_t k = 0; k < dW.size(); ++k) dW[k] *= M[k];
    }
}

}  // namespace

void backward_accumulate(const MaskedNetwork& net, std::span<const double> cond,
                         std::span<const double> targets, GradientSet& acc,
                         NetWorkspace& ws) {
    check_dims(net, cond, targets);
    const int N = net.shape.n_targets;
    normalize_targets(net, targets, ws.z);
    build_input(net, cond, ws.z, ws.in);
    run_forward(net, ws.in, ws);
    const HeadParams h = heads_from_output(net, ws.act.back());
    const auto sizes = net.layer_sizes();
    const int L = static_cast<int>(net.W.size());

    ws.delta.resize(L + 1);
    auto& dout = ws.delta[L];
    dout.assign(sizes.back(), 0.0);

    double nll = 0.0;
    if (h.kind == HeadKind::Bernoulli) {
        for (int i = 0; i < N; ++i) {
            const double xi = targets[i];
            nll -= xi == 1.0 ? std::log(h.prob[i]) : std::log1p(-h.prob[i]);
            dout[i] = h.prob[i] - xi;
        }
    } else {
        const int D = net.shape.components;
        std::vector<double>& lk = ws.relu_mask_scratch;
        for (int i = 0; i < N; ++i) {
            const double z = ws.z[i];
            const double lse = mixture_log_term(h, i, z, lk);
            nll -= lse + target_log_jacobian(net, i, targets[i]);
            const double* raw_s = ws.act.back().data() + i * 3 * D + 2 * D;
            for (int k = 0; k < D; ++k) {
                const double al = h.weight[i * D + k];
                const double mu = h.mean[i * D + k];
                const double sg = h.stdev[i * D + k];
                const double r = std::exp(lk[k] - lse);  // component responsibility
                dout[i * 3 * D + k] = al - r;
                dout[i * 3 * D + D + k] = -r * (z - mu) / (sg * sg);
                double ds = 0.0;
                if (softplus(raw_s[k]) > net.sigma_floor) {
                    const double dg = (z - mu) * (z - mu) / (sg * sg * sg) - 1.0 / sg;
                    ds = -r * dg * sigmoid(raw_s[k]);
                }
                dout[i * 3 * D + 2 * D + k] = ds;
            }
        }
    }
    acc.value += nll;

    for (int l = L - 1; l >= 0; --l) {
        const auto& delta = ws.delta[l + 1];
        const int rows = sizes[l + 1], cols = sizes[l];
        kern::ger(acc.dW[l].data(), rows, cols, delta.data(), ws.act[l].data());
        kern::axpy(1.0, delta.data(), acc.db[l].data(), rows);
        if (l > 0) {
            auto& dprev = ws.delta[l];
            dprev.resize(cols);
            kern::matvec_t(net.W[l].data(), rows, cols, delta.data(), dprev.data());
            const auto& a = ws.act[l];
            for (int j = 0; j < cols; ++j)
                if (a[j] <= 0.0) dprev[j] = 0.0;  // relu'
        }
    }
    apply_masks(net, acc);
}

GradientSet backward(const MaskedNetwork& net, std::span<const double> cond,
                     std::span<const double> targets, NetWorkspace* ws) {
    GradientSet g = zero_gradients(net);
    NetWorkspace local;
    backward_accumulate(net, cond, targets, g, ws ? *ws : local);
    return g;
}

nlohmann::json to_json(const MaskedNetwork& net) {
    nlohmann::json j;
    j["format"] = "nsmc-made";
    j["version"] = 1;
    j["shape"] = {{"n_targets", net.shape.n_targets},
                  {"n_cond", net.shape.n_cond},
                  {"hidden_sizes", net.shape.hidden_sizes},
                  {"head", net.shape.head == HeadKind::Mixture ? "mixture" : "bernoulli"},
                  {"components", net.shape.components}};
    j["labels"] = net.masks.labels;
    j["sigma_floor"] = net.sigma_floor;
    auto tf = [](const std::vector<InputTransform>& v) {
        std::vector<int> r;
        for (auto t : v) r.push_back(static_cast<int>(t));
        return r;
    };
    j["cond_transform"] = tf(net.cond_transform);
    j["target_transform"] = tf(net.target_transform);
    j["cond_mean"] = net.cond_mean;
    j["cond_scale"] = net.cond_scale;
    j["target_mean"] = net.target_mean;
    j["target_scale"] = net.target_scale;
    j["W"] = net.W;
    j["b"] = net.b;
    return j;
}

MaskedNetwork network_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "nsmc-made" || j.value("version", -1) != 1)
        throw Error("unsupported network file version");
    NetworkShape shape;
    shape.n_targets = j["shape"]["n_targets"];
    shape.n_cond = j["shape"]["n_cond"];
    shape.hidden_sizes = j["shape"]["hidden_sizes"].get<std::vector<int>>();
    shape.head = j["shape"]["head"] == "mixture" ? HeadKind::Mixture : HeadKind::Bernoulli;
    shape.components = j["shape"]["components"];
    MaskedNetwork net;
    net.shape = shape;
    net.masks = rebuild_masks(shape, j["labels"].get<std::vector<std::vector<int>>>());
    net.sigma_floor = j["sigma_floor"];
    auto tf = [](const std::vector<int>& v) {
        std::vector<InputTransform> r;
        for (int t : v) r.push_back(static_cast<InputTransform>(t));
        return r;
    };
    net.cond_transform = tf(j["cond_transform"].get<std::vector<int>>());
    net.target_transform = tf(j["target_transform"].get<std::vector<int>>());
    net.cond_mean = j["cond_mean"].get<std::vector<double>>();
    net.cond_scale = j["cond_scale"].get<std::vector<double>>();
    net.target_mean = j["target_mean"].get<std::vector<double>>();
    net.target_scale = j["target_scale"].get<std::vector<double>>();
    net.W = j["W"].get<std::vector<std::vector<double>>>();
    net.b = j["b"].get<std::vector<std::vector<double>>>();
    return net;
}

}  // namespace nsmc
