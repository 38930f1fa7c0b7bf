#include "nsmc/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace nsmc {

AdamState AdamState::like(const MaskedNetwork& net) {
    AdamState st;
    for (const auto* p : net.param_arrays()) {
        st.m.emplace_back(p->size(), 0.0);
        st.v.emplace_back(p->size(), 0.0);
    }
    return st;
}

void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                 std::span<double> v, long t, const TrainConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
        p[k] -= cfg.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.eps);
    }
}

void adam_step(MaskedNetwork& net, const GradientSet& g, AdamState& st,
               const TrainConfig& cfg, double scale) {
    ++st.t;
    auto params = net.param_arrays();
    auto grads = const_cast<GradientSet&>(g).param_arrays();
    std::vector<double> scaled;
    for (std::size_t a = 0; a < params.size(); ++a) {
        const auto& gr = *grads[a];
        scaled.assign(gr.size(), 0.0);
        for (std::size_t k = 0; k < gr.size(); ++k) scaled[k] = gr[k] / scale;
        adam_update(*params[a], scaled, st.m[a], st.v[a], st.t, cfg);
    }
}

std::vector<double> summarize(std::span<const double> values) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0, mlog = 0.0;
    for (double v : values) {
        mean += v;
        mlog += std::log(std::max(v, 1e-300));
    }
    mean /= n;
    mlog /= n;
    double var = 0.0;
    for (double v : values) {
        const double d = std::log(std::max(v, 1e-300)) - mlog;
        var += d * d;
    }
    var = values.size() > 1 ? var / (n - 1.0) : 0.0;
    return {mean, mlog, std::sqrt(var), n};
}

void extract_row(const GraphModel& m, const InverseFactor& f, const Assignment& a,
                 std::vector<double>& cond, std::vector<double>& target) {
    (void)m;
    cond.clear();
    if (f.summarize_conditioners) {
        std::vector<double> raw;
        raw.reserve(f.conditioners.size());
        for (int c : f.conditioners) raw.push_back(a[c]);
        cond = summarize(raw);
    } else {
        for (int c : f.conditioners) cond.push_back(a[c]);
    }
    target.clear();
    for (int t : f.targets) target.push_back(a[t]);
}

FactorDataset synth_dataset(const GraphModel& m, const std::vector<InverseFactor>& factors,
                            int n_rows, Rng& rng) {
    FactorDataset ds;
    std::vector<double> cond, target;
    while (static_cast<int>(ds.size()) < n_rows) {
        const Assignment a = ancestral_sample(m, rng);
        for (const auto& f : factors) {
            extract_row(m, f, a, cond, target);
            ds.cond.push_back(cond);
            ds.target.push_back(target);
        }
    }
    ds.cond.resize(n_rows);
    ds.target.resize(n_rows);
    return ds;
}

double validation_nll(const MaskedNetwork& net, const FactorDataset& data) {
    if (data.size() == 0) throw EmptyDataset("empty validation set");
    NetWorkspace ws;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        total -= log_prob(net, data.cond[i], data.target[i], &ws);
    return total / static_cast<double>(data.size());
}

namespace {

void fit_normalization(MaskedNetwork& net, const FactorDataset& data) {
    auto fit = [&](int dim, const std::vector<std::vector<double>>& rows,
                   const std::vector<InputTransform>& tf, std::vector<double>& mean,
                   std::vector<double>& scale) {
        const double n = static_cast<double>(rows.size());
        for (int j = 0; j < dim; ++j) {
            double mu = 0.0;
            for (const auto& r : rows) {
                double v = r[j];
                if (tf[j] == InputTransform::Log1p) v = std::log1p(v);
                if (tf[j] == InputTransform::Log) v = std::log(v);
                mu += v;
            }
            mu /= n;
            double var = 0.0;
            for (const auto& r : rows) {
                double v = r[j];
                if (tf[j] == InputTransform::Log1p) v = std::log1p(v);
                if (tf[j] == InputTransform::Log) v = std::log(v);
                var += (v - mu) * (v - mu);
            }
            var /= n;
            mean[j] = mu;
            scale[j] = var > 1e-16 ? std::sqrt(var) : 1.0;
        }
    };
    fit(net.shape.n_cond, data.cond, net.cond_transform, net.cond_mean, net.cond_scale);
    if (net.shape.head == HeadKind::Mixture)
        fit(net.shape.n_targets, data.target, net.target_transform, net.target_mean,
            net.target_scale);
}

}  // namespace

NetTrainResult train_factor(MaskedNetwork& net, const GraphModel& m,
                            const std::vector<InverseFactor>& factors,
                            const TrainConfig& cfg, unsigned net_seed) {
    NetTrainResult res;
    res.best_val_nll = std::numeric_limits<double>::infinity();
    AdamState adam = AdamState::like(net);
    GradientSet grads = zero_gradients(net);
    NetWorkspace ws;

    for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
        Rng data_rng = derive_rng(cfg.seed, net_seed, 2 * epoch);
        Rng shuffle_rng = derive_rng(cfg.seed, net_seed, 2 * epoch + 1);
        FactorDataset train = synth_dataset(m, factors, cfg.n_train, data_rng);
        FactorDataset val = synth_dataset(m, factors, cfg.n_validate, data_rng);
        if (epoch == 0) fit_normalization(net, train);

        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_best = std::numeric_limits<double>::infinity();
        std::size_t cursor = 0;
        int steps = 0;
        for (; steps < cfg.max_steps; ++steps) {
            for (auto& w : grads.dW) std::fill(w.begin(), w.end(), 0.0);
            for (auto& b : grads.db) std::fill(b.begin(), b.end(), 0.0);
            grads.value = 0.0;
            const int bs = std::min<int>(cfg.minibatch, static_cast<int>(train.size()));
            for (int k = 0; k < bs; ++k) {
                const std::size_t i = order[cursor];
                cursor = (cursor + 1) % order.size();
                backward_accumulate(net, train.cond[i], train.target[i], grads, ws);
            }
            adam_step(net, grads, adam, cfg, bs);
            const double vnll = validation_nll(net, val);
            res.val_trace.push_back(vnll);
            if (vnll < epoch_best) epoch_best = vnll;
            res.final_val_nll = vnll;
            if (vnll > epoch_best + cfg.early_stop_slack) {
                ++steps;
                break;
            }
        }
        res.steps_per_epoch.push_back(steps);
        ++res.epochs_run;
        if (epoch_best < res.best_val_nll) res.best_val_nll = epoch_best;
    }
    return res;
}

NetworkShape shape_for(const GraphModel& m, const InverseFactor& f, const TrainConfig& cfg) {
    NetworkShape s;
    s.n_targets = static_cast<int>(f.targets.size());
    s.n_cond = f.summarize_conditioners ? 4 : static_cast<int>(f.conditioners.size());
    s.hidden_sizes = cfg.hidden_sizes;
    s.components = cfg.components;
    const bool all_bern = std::all_of(f.targets.begin(), f.targets.end(), [&](int t) {
        return m.node(t).dist.family == Family::Bernoulli;
    });
    s.head = all_bern ? HeadKind::Bernoulli : HeadKind::Mixture;
    return s;
}

void set_transforms(MaskedNetwork& net, const GraphModel& m, const InverseFactor& f) {
    auto cond_tf = [](Family fam) {
        switch (fam) {
            case Family::Poisson:
            case Family::Gamma:
            case Family::Exponential: return InputTransform::Log1p;
            default: return InputTransform::Identity;
        }
    };
    auto target_tf = [](Family fam) {
        switch (fam) {
            case Family::Gamma:
            case Family::Exponential: return InputTransform::Log;
            default: return InputTransform::Identity;
        }
    };
    if (!f.summarize_conditioners)
        for (std::size_t j = 0; j < f.conditioners.size(); ++j)
            net.cond_transform[j] = cond_tf(m.node(f.conditioners[j]).dist.family);
    if (net.shape.head == HeadKind::Mixture)
        for (std::size_t i = 0; i < f.targets.size(); ++i)
            net.target_transform[i] = target_tf(m.node(f.targets[i]).dist.family);
}

TrainArtifact train_all(const GraphModel& m, const InverseModel& inv,
                        const std::string& model_name, const TrainConfig& cfg) {
    TrainArtifact art;
    art.model_name = model_name;
    art.factors = inv.factors;
    art.net_of_factor.assign(inv.factors.size(), -1);

    std::map<std::string, int> group_net;
    std::vector<std::vector<InverseFactor>> net_factors;
    for (std::size_t i = 0; i < inv.factors.size(); ++i) {
        const auto& f = inv.factors[i];
        int idx;
        if (!f.share_group.empty() && group_net.count(f.share_group)) {
            idx = group_net[f.share_group];
        } else {
            idx = static_cast<int>(net_factors.size());
            net_factors.emplace_back();
            if (!f.share_group.empty()) group_net[f.share_group] = idx;
        }
        art.net_of_factor[i] = idx;
        net_factors[idx].push_back(f);
    }

    for (std::size_t n = 0; n < net_factors.size(); ++n) {
        const auto& group = net_factors[n];
        const NetworkShape shape = shape_for(m, group.front(), cfg);
        Rng init_rng = derive_rng(cfg.seed, 0x7472ULL, n);
        MaskedNetwork net = make_network(shape, init_rng);
        set_transforms(net, m, group.front());
        NetTrainResult r = train_factor(net, m, group, cfg, static_cast<unsigned>(n + 1));
        art.nets.push_back(std::move(net));
        art.results.push_back(std::move(r));
    }

    art.meta = {{"n_train", cfg.n_train},
                {"n_validate", cfg.n_validate},
                {"minibatch", cfg.minibatch},
                {"max_steps", cfg.max_steps},
                {"n_epochs", cfg.n_epochs},
                {"lr", cfg.lr},
                {"seed", cfg.seed},
                {"hidden_sizes", cfg.hidden_sizes},
                {"components", cfg.components}};
    return art;
}

namespace {

VarId parse_var(const std::string& s) {
    const auto lb = s.find('[');
    if (lb == std::string::npos) return VarId{s, -1};
    return VarId{s.substr(0, lb), std::stoi(s.substr(lb + 1, s.size() - lb - 2))};
}

nlohmann::json names_of(const std::vector<int>& idx, const GraphModel& m) {
    nlohmann::json a = nlohmann::json::array();
    for (int v : idx) a.push_back(to_string(m.node(v).id));
    return a;
}

}  // namespace

void save_artifact(const std::string& path, const TrainArtifact& art, const GraphModel& m) {
    nlohmann::json j;
    j["format"] = "nsmc-artifact";
    j["version"] = 1;
    j["model"] = art.model_name;
    j["meta"] = art.meta;
    j["net_of_factor"] = art.net_of_factor;
    j["factors"] = nlohmann::json::array();
    j["nets"] = nlohmann::json::array();
    j["results"] = nlohmann::json::array();
    for (const auto& f : art.factors) {
        nlohmann::json fj;
        fj["targets"] = names_of(f.targets, m);
        fj["conditioners"] = names_of(f.conditioners, m);
        fj["share_group"] = f.share_group;
        fj["summarize"] = f.summarize_conditioners;
        j["factors"].push_back(fj);
    }
    for (const auto& n : art.nets) j["nets"].push_back(to_json(n));
    for (const auto& r : art.results)
        j["results"].push_back({{"final_val_nll", r.final_val_nll},
                                {"best_val_nll", r.best_val_nll},
                                {"epochs_run", r.epochs_run},
                                {"steps_per_epoch", r.steps_per_epoch}});
    std::ofstream out(path);
    if (!out) throw Error("cannot write artifact " + path);
    out << j.dump(2) << "\n";
}

TrainArtifact load_artifact(const std::string& path, const GraphModel& m) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read artifact " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "nsmc-artifact" || j.value("version", -1) != 1)
        throw Error("unsupported artifact version in " + path);
    TrainArtifact art;
    art.model_name = j["model"];
    art.meta = j["meta"];
    art.net_of_factor = j["net_of_factor"].get<std::vector<int>>();
    for (const auto& fj : j["factors"]) {
        InverseFactor f;
        for (const auto& s : fj["targets"])
            f.targets.push_back(m.index_of(parse_var(s.get<std::string>())));
        for (const auto& s : fj["conditioners"])
            f.conditioners.push_back(m.index_of(parse_var(s.get<std::string>())));
        f.share_group = fj["share_group"];
        f.summarize_conditioners = fj["summarize"];
        art.factors.push_back(std::move(f));
    }
    for (const auto& nj : j["nets"]) art.nets.push_back(network_from_json(nj));
    for (const auto& rj : j["results"]) {
        NetTrainResult r;
        r.final_val_nll = rj["final_val_nll"];
        r.best_val_nll = rj["best_val_nll"];
        r.epochs_run = rj["epochs_run"];
        r.steps_per_epoch = rj["steps_per_epoch"].get<std::vector<int>>();
        art.results.push_back(std::move(r));
    }
    return art;
}

}  // namespace nsmc
