#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nsmc/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Amortized SMC inference for graphical models"};
    app.require_subcommand(1);

    nsmc::RunConfig cfg;
    std::vector<std::string> sets;
    for (const char* name : {"train", "infer", "benchmark", "inspect"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--model", cfg.model, "model name")->required();
        sub->add_option("--particles", cfg.particles, "particle count K");
        sub->add_option("--proposal", cfg.proposal, "prior | learned");
        sub->add_option("--seed", cfg.seed, "rng seed");
        sub->add_option("--artifact", cfg.artifact, "trained artifact path");
        sub->add_option("--data", cfg.data, "observation data path");
        sub->add_option("--out", cfg.out, "results path");
        sub->add_option("--set", sets, "key=value override")->take_all();
        sub->callback([&cfg, name] { cfg.command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "usage error: --set expects key=value, got '%s'\n",
                         kv.c_str());
            return 1;
        }
        cfg.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return nsmc::run_command(cfg);
}
