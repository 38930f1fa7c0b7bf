#pragma once

#include <map>
#include <string>

#include "nsmc/error.hpp"

namespace nsmc {

struct UsageError : Error {
    using Error::Error;
};

struct RunConfig {
    std::string command;
    std::string model;
    std::string proposal = "prior";
    int particles = 100;
    unsigned seed = 0;
    std::string artifact;
    std::string data;
    std::string out;
    std::map<std::string, std::string> overrides;  // --set key=value
};

// Dispatches to the cmd_* functions and maps errors to exit codes:
// 0 success, 1 usage error, 2 runtime inference error, 3 degenerate weights.
int run_command(const RunConfig& cfg);

int cmd_train(const RunConfig& cfg);
int cmd_infer(const RunConfig& cfg);
int cmd_benchmark(const RunConfig& cfg);
int cmd_inspect(const RunConfig& cfg);

// Resolves an output path: explicit value, else NSMC_OUT_DIR/<fallback>, else
// ./<fallback>.
std::string resolve_out(const std::string& explicit_path, const std::string& fallback);

}  // namespace nsmc
