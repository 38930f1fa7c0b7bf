#include "nsmc/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "nsmc/models.hpp"
#include "nsmc/smc.hpp"

namespace nsmc {

namespace {

double num_override(const RunConfig& cfg, const std::string& key, double fallback) {
    auto it = cfg.overrides.find(key);
    return it == cfg.overrides.end() ? fallback : std::stod(it->second);
}

TrainConfig make_train_config(const BuiltModel& bm, const RunConfig& cfg) {
    TrainConfig tc = bm.train_defaults;
    tc.seed = cfg.seed;
    tc.n_train = static_cast<int>(num_override(cfg, "n_train", tc.n_train));
    tc.n_validate = static_cast<int>(num_override(cfg, "n_validate", tc.n_validate));
    tc.minibatch = static_cast<int>(num_override(cfg, "minibatch", tc.minibatch));
    tc.max_steps = static_cast<int>(num_override(cfg, "max_steps", tc.max_steps));
    tc.n_epochs = static_cast<int>(num_override(cfg, "n_epochs", tc.n_epochs));
    tc.lr = num_override(cfg, "lr", tc.lr);
    tc.components = static_cast<int>(num_override(cfg, "components", tc.components));
    tc.early_stop_slack = num_override(cfg, "early_stop_slack", tc.early_stop_slack);
    if (auto it = cfg.overrides.find("hidden"); it != cfg.overrides.end()) {
        tc.hidden_sizes.clear();
        std::istringstream ss(it->second);
        std::string part;
        while (std::getline(ss, part, ',')) tc.hidden_sizes.push_back(std::stoi(part));
    }
    return tc;
}

SmcConfig make_smc_config(const RunConfig& cfg, unsigned seed) {
    SmcConfig sc;
    sc.n_particles = cfg.particles;
    sc.seed = seed;
    sc.resample_threshold = num_override(cfg, "resample_threshold", sc.resample_threshold);
    if (auto it = cfg.overrides.find("scheme"); it != cfg.overrides.end()) {
        if (it->second == "multinomial")
            sc.scheme = ResampleScheme::Multinomial;
        else if (it->second == "systematic")
            sc.scheme = ResampleScheme::Systematic;
        else
            throw UsageError("unknown resampling scheme '" + it->second + "'");
    }
    return sc;
}

Assignment resolve_observations(const BuiltModel& bm, const RunConfig& cfg) {
    if (!cfg.data.empty()) return load_observations(bm, cfg.model, cfg.data);
    if (bm.has_fixture) return bm.fixture;
    throw UsageError("model '" + cfg.model + "' has no embedded fixture; pass --data");
}

struct InferenceSetup {
    TargetSequence seq;
    Proposal prop;
    std::shared_ptr<TrainArtifact> art;  // keeps learned_proposal's referent alive
};

InferenceSetup make_setup(const BuiltModel& bm, const RunConfig& cfg) {
    InferenceSetup s;
    if (cfg.proposal == "prior") {
        s.seq = prior_sequence(bm.model);
        s.prop = prior_proposal(bm.model, s.seq);
    } else if (cfg.proposal == "learned") {
        if (cfg.artifact.empty())
            throw UsageError("learned proposal requires --artifact");
        s.art = std::make_shared<TrainArtifact>(load_artifact(cfg.artifact, bm.model));
        if (s.art->model_name != cfg.model)
            throw Error("artifact was trained for model '" + s.art->model_name + "'");
        s.seq = inverse_sequence(bm.model, s.art->factors);
        s.prop = learned_proposal(bm.model, *s.art);
    } else {
        throw UsageError("proposal must be 'prior' or 'learned'");
    }
    return s;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f << std::setprecision(17);
    return f;
}

nlohmann::json manifest_of(const RunConfig& cfg, double wall_s) {
    return {{"command", cfg.command}, {"model", cfg.model},
            {"proposal", cfg.proposal}, {"particles", cfg.particles},
            {"seed", cfg.seed},         {"wall_time_s", wall_s}};
}

}  // namespace

std::string resolve_out(const std::string& explicit_path, const std::string& fallback) {
    if (!explicit_path.empty()) return explicit_path;
    if (const char* dir = std::getenv("NSMC_OUT_DIR"))
        return std::string(dir) + "/" + fallback;
    return fallback;
}

int cmd_train(const RunConfig& cfg) {
    const BuiltModel bm = build_model(cfg.model, cfg.overrides);
    const TrainConfig tc = make_train_config(bm, cfg);
    const std::string art_path = resolve_out(cfg.artifact, cfg.model + ".artifact.json");

    const auto t0 = std::chrono::steady_clock::now();
    TrainArtifact art = train_all(bm.model, bm.inverse, cfg.model, tc);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    save_artifact(art_path, art, bm.model);
    const std::string trace_path = resolve_out(cfg.out, cfg.model + ".trace.csv");
    auto trace = open_out(trace_path);
    trace << "net,eval,val_nll\n";
    for (std::size_t n = 0; n < art.results.size(); ++n)
        for (std::size_t i = 0; i < art.results[n].val_trace.size(); ++i)
            trace << n << "," << i << "," << art.results[n].val_trace[i] << "\n";

    for (std::size_t n = 0; n < art.results.size(); ++n)
        std::cout << "net " << n << ": epochs=" << art.results[n].epochs_run
                  << " best_val_nll=" << art.results[n].best_val_nll
                  << " final_val_nll=" << art.results[n].final_val_nll << "\n";
    std::cout << "artifact: " << art_path << " (" << wall << " s)\n";
    return 0;
}

int cmd_infer(const RunConfig& cfg) {
    if (cfg.particles < 1) throw UsageError("--particles must be >= 1");
    const BuiltModel bm = build_model(cfg.model, cfg.overrides);
    const Assignment obs = resolve_observations(bm, cfg);
    const InferenceSetup setup = make_setup(bm, cfg);
    const SmcConfig sc = make_smc_config(cfg, cfg.seed);

    const auto t0 = std::chrono::steady_clock::now();
    const SmcResult r = run_smc(bm.model, setup.seq, setup.prop, obs, sc);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string out_path = resolve_out(cfg.out, cfg.model + ".results.csv");
    auto out = open_out(out_path);
    out << "metric,variable,value\n";
    out << "log_evidence,," << r.log_evidence << "\n";
    out << "ess_final,," << ess(r.logw) << "\n";
    for (int v : bm.model.latents()) {
        const double mean = posterior_mean(r, v);
        const double m2 = estimate(r, [v](const Assignment& a) { return a[v] * a[v]; });
        out << "posterior_mean," << to_string(bm.model.node(v).id) << "," << mean << "\n";
        out << "posterior_stdev," << to_string(bm.model.node(v).id) << ","
            << std::sqrt(std::max(0.0, m2 - mean * mean)) << "\n";
    }
    auto diag = open_out(out_path + ".diag.csv");
    write_diagnostics_csv(diag, r);
    auto man = open_out(out_path + ".manifest.json");
    man << manifest_of(cfg, wall).dump(2) << "\n";
    std::cout << "log_evidence=" << std::setprecision(12) << r.log_evidence
              << " results: " << out_path << "\n";
    return 0;
}

int cmd_benchmark(const RunConfig& cfg) {
    const BuiltModel bm = build_model(cfg.model, cfg.overrides);
    const Assignment obs = resolve_observations(bm, cfg);

    std::vector<int> kgrid{5, 10, 50, 100, 500, 1000, 5000};
    if (auto it = cfg.overrides.find("kgrid"); it != cfg.overrides.end()) {
        kgrid.clear();
        std::istringstream ss(it->second);
        std::string part;
        while (std::getline(ss, part, ',')) kgrid.push_back(std::stoi(part));
    }
    const int n_seeds = static_cast<int>(num_override(cfg, "seeds", 10));

    std::vector<std::string> proposals{"learned", "prior"};  // rows sorted by K, seed, proposal
    std::map<std::string, InferenceSetup> setups;
    for (const auto& p : proposals) {
        RunConfig pc = cfg;
        pc.proposal = p;
        setups.emplace(p, make_setup(bm, pc));
    }

    const std::string out_path = resolve_out(cfg.out, cfg.model + ".benchmark.csv");
    auto out = open_out(out_path);
    out << "model,K,seed,proposal,log_evidence,ess_final,unique_ancestries_final\n";
    std::ofstream ancestry;
    if (cfg.model == "fhmm") {
        ancestry = open_out(out_path + ".ancestry.csv");
        ancestry << "proposal,seed,step,unique_ancestries\n";
    }

    struct Cell {
        std::vector<double> logz, essf;
    };
    std::map<std::pair<int, std::string>, Cell> cells;

    const auto t0 = std::chrono::steady_clock::now();
    for (int K : kgrid) {
        for (int s = 0; s < n_seeds; ++s) {
            for (const auto& p : proposals) {
                RunConfig rc = cfg;
                rc.particles = K;
                const SmcConfig sc = make_smc_config(rc, cfg.seed + s);
                const auto& setup = setups.at(p);
                const SmcResult r = run_smc(bm.model, setup.seq, setup.prop, obs, sc);
                const auto ua = unique_ancestries(r);
                const int ua_final = ua.empty() ? 0 : ua.front();
                out << cfg.model << "," << K << "," << (cfg.seed + s) << "," << p << ","
                    << r.log_evidence << "," << ess(r.logw) << "," << ua_final << "\n";
                cells[{K, p}].logz.push_back(r.log_evidence);
                cells[{K, p}].essf.push_back(ess(r.logw));
                if (ancestry.is_open() && K == 100)
                    for (std::size_t t = 0; t < ua.size(); ++t)
                        ancestry << p << "," << (cfg.seed + s) << "," << t << "," << ua[t]
                                 << "\n";
            }
        }
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    auto summary = open_out(out_path + ".summary.csv");
    summary << "K,proposal,mean_log_evidence,stdev_log_evidence,mean_ess\n";
    for (const auto& [key, cell] : cells) {
        const double n = static_cast<double>(cell.logz.size());
        double mean = 0.0, me = 0.0;
        for (double v : cell.logz) mean += v;
        mean /= n;
        for (double v : cell.essf) me += v;
        me /= n;
        double var = 0.0;
        for (double v : cell.logz) var += (v - mean) * (v - mean);
        var = n > 1 ? var / (n - 1) : 0.0;
        summary << key.first << "," << key.second << "," << mean << "," << std::sqrt(var)
                << "," << me << "\n";
    }
    auto man = open_out(out_path + ".manifest.json");
    man << manifest_of(cfg, wall).dump(2) << "\n";
    std::cout << "benchmark rows: " << kgrid.size() * n_seeds * proposals.size()
              << " -> " << out_path << "\n";
    return 0;
}

int cmd_inspect(const RunConfig& cfg) {
    const BuiltModel bm = build_model(cfg.model, cfg.overrides);
    std::ostringstream os;
    os << "model " << cfg.model << ": " << bm.model.size() << " nodes ("
       << bm.model.latents().size() << " latent, " << bm.model.observed().size()
       << " observed)\n";
    os << describe(bm.inverse, bm.model);
    os << "networks:\n";
    std::map<std::string, bool> seen;
    int n_nets = 0;
    for (const auto& f : bm.inverse.factors) {
        if (!f.share_group.empty()) {
            if (seen.count(f.share_group)) continue;
            seen[f.share_group] = true;
        }
        const NetworkShape s = shape_for(bm.model, f, bm.train_defaults);
        os << "  net " << n_nets++ << ":";
        if (!f.share_group.empty()) os << " share_group=" << f.share_group;
        os << " targets=" << s.n_targets << " cond=" << s.n_cond << " hidden=";
        for (std::size_t i = 0; i < s.hidden_sizes.size(); ++i)
            os << (i ? "x" : "") << s.hidden_sizes[i];
        os << (s.head == HeadKind::Mixture ? " mixture(D=" + std::to_string(s.components) + ")"
                                           : " bernoulli")
           << "\n";
    }
    std::cout << os.str();
    if (!cfg.out.empty()) {
        auto f = open_out(cfg.out);
        f << os.str();
    }
    return 0;
}

int run_command(const RunConfig& cfg) {
    try {
        if (cfg.command == "train") return cmd_train(cfg);
        if (cfg.command == "infer") return cmd_infer(cfg);
        if (cfg.command == "benchmark") return cmd_benchmark(cfg);
        if (cfg.command == "inspect") return cmd_inspect(cfg);
        throw UsageError("unknown command '" + cfg.command + "'");
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DegenerateWeights& e) {
        std::cerr << "degenerate weights: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace nsmc
