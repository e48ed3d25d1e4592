#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gdfpca/common.hpp"
#include "gdfpca/funcdata.hpp"
#include "gdfpca/graphical.hpp"
#include "gdfpca/scores.hpp"
#include "gdfpca/spectral.hpp"

namespace gdfpca {

enum class SimCase { baseline, case1_nonseparable, case2_static };

const char* to_string(SimCase c);
SimCase parse_sim_case(const std::string& name);

struct SimConfig {
    int p = 30;
    int units = 40;  // J
    int k = 4;
    int lag = 1;     // L
    double kappa = 0.0;
    std::vector<double> rho{0.8, 0.7, 0.6, 0.5};
    std::uint64_t seed = 1;
    SimCase sim_case = SimCase::baseline;
    int grid_size = 0;  // 0 selects J/4 + 10

    int resolved_grid_size() const { return grid_size > 0 ? grid_size : units / 4 + 10; }
    int effective_lag() const { return sim_case == SimCase::case2_static ? 0 : lag; }
    void validate() const;
};

struct GroundTruth {
    SimConfig config;
    EdgeSet graph;
    std::vector<Mat> innovation_precision;  // Phi_k^b, p x p
    ScoreArray scores;                      // lags -L..L around 1..J
    FunctionalFilterSet filters;            // w_l phi_kl (before any per-series fluctuation)
    Panel curves;                           // eps
    MFTSObservations observations;          // Y
    Vec noise_var;
};

/// Deterministic generator for replicate r of a base seed.
std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t replicate);

EdgeSet gen_graph(int p, double kappa, std::mt19937_64& rng);

Mat gen_precision(const EdgeSet& edges, int p, int k, std::mt19937_64& rng);

/// p x (J + 2L) AR(1) scores with innovations N(0, precision^{-1}).
Mat gen_scores(const Mat& precision, double rho, int units, int lag, std::mt19937_64& rng);

/// (1, sqrt2 sin 2pi t, sqrt2 cos 2pi t, sqrt2 sin 4pi t, ...)[m - 1] on the grid.
Vec fourier_basis(int m, const TimeGrid& grid);

/// exp(-2|l|) normalized to unit sum of squares, l = -L..L.
Vec lag_weights(int lag);

/// True weighted filters w_l phi_kl for k <= K, |l| <= L.
FunctionalFilterSet true_filters(int k, int lag, const TimeGrid& grid);

/// sigma_i^2 = mean_j |eps_ij|^2 / 5 and Y = eps + noise.
MFTSObservations add_noise(const Panel& curves, const TimeGrid& grid, std::mt19937_64& rng, Vec* noise_var = nullptr);

GroundTruth simulate(const SimConfig& cfg, std::uint64_t replicate = 0);

/// Population pooled spectral kernel sum_i f_ii(t, s | theta) of a baseline or case-2 generator.
CMat true_pooled_kernel(const GroundTruth& truth, double theta);

} // namespace gdfpca
