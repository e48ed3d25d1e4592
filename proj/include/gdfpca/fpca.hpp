#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gdfpca/funcdata.hpp"
#include "gdfpca/graphical.hpp"
#include "gdfpca/scores.hpp"
#include "gdfpca/spectral.hpp"

namespace gdfpca {

enum class Method { SFPCA, WSFPCA, GSFPCA, KG_SFPCA, DFPCA, WDFPCA, GDFPCA, KG_DFPCA };

const char* to_string(Method m);
/// Accepts the canonical names plus KG_GSFPCA / KG_GDFPCA for the known-graph variants.
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

bool is_dynamic(Method m);
bool is_per_series(Method m);
bool uses_precision(Method m);
bool needs_graph(Method m);

struct TruncationConfig {
    double fve_threshold = 0.80;
    double filter_energy_threshold = 0.95;
    int k_max = 0;    // 0: all Z eigenvalues, so V is the total variance
    int l_max = -1;   // negative: floor(J/4)
    int fixed_k = 0;  // > 0 bypasses FVE selection

    void validate() const;
};

struct FitConfig {
    TruncationConfig truncation;
    int bandwidth = 0;            // 0: floor(J^0.4)
    std::vector<double> lambdas;  // empty: default grid from each eigen-matrix set
    int lambda_count = 10;
    AdmmConfig admm;
    ExtractOptions extract;
    std::optional<EdgeSet> graph;
};

/// Smallest K whose cumulative share of sum_j sum_{k <= K_max} nu_k(theta_j) reaches the threshold.
int select_K(const std::vector<Vec>& eigenvalues_by_freq, double fve_threshold, int k_max);
/// Static analogue on lag-0 eigenvalues.
int select_K(const Vec& eigenvalues, double fve_threshold, int k_max);

/// One fitted model: pooled over all series, or for a single series.
struct ComponentModel {
    std::vector<int> series;          // indices of the series this model covers
    int k = 0;
    FunctionalFilterSet filters;
    std::vector<Vec> eigenvalues;     // per frequency (static: one entry)
    EigenMatrixSet eigenmatrices;     // graph methods only
    std::vector<PrecisionSet> precision;
    std::vector<double> lambda;       // selected lambda per component (penalized methods)
    ScoreArray scores;
    int extraction_iterations = 0;
    bool extraction_converged = true;
};

struct FitResult {
    Method method = Method::GDFPCA;
    TimeGrid grid;
    Mat means;       // p x Z
    Vec noise_var;   // p
    int bandwidth = 0;
    std::vector<ComponentModel> models;
    std::vector<std::string> warnings;

    Eigen::Index num_series() const { return means.rows(); }
    /// mu + expansion over the first q components (q < 0: all).
    Panel reconstruction(int q = -1) const;
};

FitResult fit(Method method, const MFTSObservations& obs, const FitConfig& cfg = {});

/// 100 * sum |truth - estimate|^2 / sum |truth|^2 with quadrature norms.
double nmse(const Panel& truth, const Panel& estimate, const TimeGrid& grid);

} // namespace gdfpca
