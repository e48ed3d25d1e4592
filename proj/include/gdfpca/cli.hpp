#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gdfpca/fpca.hpp"
#include "gdfpca/simulate.hpp"

namespace gdfpca {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

int exit_code_for(ErrorKind kind);

/// Worker count: requested (0 = hardware), capped by GDFPCA_THREADS when set.
int resolve_threads(int requested);

/// Runs fn(0..n-1) on a bounded pool; fn must write only to its own slot.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct BenchSetting {
    int p = 30;
    int units = 40;
    double kappa = 0.0;
    int lag = 1;
    SimCase sim_case = SimCase::baseline;
};

struct BenchConfig {
    std::vector<BenchSetting> settings;
    std::vector<Method> methods;
    int replicates = 100;
    std::uint64_t seed = 1;
    int threads = 0;
    int q_max = 4;
    FitConfig fit;
};

struct BenchRow {
    std::string sim_case;
    std::string method;
    int p = 0;
    int units = 0;
    double kappa = 0.0;
    int q = 0;
    double mean = 0.0;
    double std_error = 0.0;
    int replicates = 0;
    int failures = 0;
};

/// Monte Carlo NMSE(q) table. Replicate r of every setting uses simulate(cfg, r)
/// so methods are compared on identical data.
std::vector<BenchRow> run_bench(const BenchConfig& cfg, std::ostream* progress = nullptr);
std::string bench_csv(const std::vector<BenchRow>& rows);

/// Full command line; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace gdfpca
