#pragma once

#include <utility>
#include <vector>

#include "gdfpca/common.hpp"

namespace gdfpca {

/// Unordered pairs (i1, i2) with i1 < i2, zero-based, sorted.
using Edge = std::pair<int, int>;
using EdgeSet = std::vector<Edge>;

EdgeSet normalize_edges(EdgeSet edges);

struct AdmmConfig {
    double rho = 1.0;
    int max_iter = 1000;
    double tol = 1e-5;
    bool adapt_rho = true;
    double relaxation = 1.0;  // over-relaxation factor in [1, 2)
};

/// Phi_k(theta_j) on the full frequency grid (index j-1).
struct PrecisionSet {
    std::vector<CMat> matrices;
    double lambda = 0.0;
    int iterations = 0;
    bool converged = true;
    bool ridge_fallback = false;

    Eigen::Index units() const { return Eigen::Index(matrices.size()); }
    Eigen::Index dim() const { return matrices.empty() ? 0 : matrices.front().rows(); }
    /// Off-diagonal pairs i1 < i2 whose entries are nonzero at some frequency.
    int nonzero_groups() const;
};

/// Minimizes sum_theta [tr(eta Phi) - logdet Phi] + lambda sum_{i1 != i2} |Phi[i1,i2](.)|_2
/// over the frequency grid. eta is given on the full grid and must satisfy
/// eta(2 pi - theta) = conj(eta(theta)); the problem is solved on theta <= pi
/// (plus theta = 2 pi) with multiplicity weights and reflected.
PrecisionSet joint_glasso(const std::vector<CMat>& eta, double lambda, const AdmmConfig& cfg = {},
                          const PrecisionSet* warm_start = nullptr);

/// Full-grid penalized objective.
double glasso_objective(const std::vector<CMat>& eta, const PrecisionSet& phi, double lambda);

/// Smallest lambda for which the all-diagonal precision satisfies the group KKT conditions.
double lambda_max(const std::vector<CMat>& eta);

/// count log-spaced values from 1e-3 * lambda_max to lambda_max (ascending).
std::vector<double> default_lambda_grid(const std::vector<CMat>& eta, int count = 10);

/// (J / (2 r)) * (p + 2 * nonzero groups)
double aic_degrees_of_freedom(Eigen::Index p, Eigen::Index units, int bandwidth, int nonzero_groups);

struct AicSelection {
    double lambda = 0.0;
    PrecisionSet precision;
    std::vector<double> lambdas;
    std::vector<double> aic;
    std::vector<int> nonzero;
};

AicSelection aic_select(const std::vector<CMat>& eta, std::vector<double> lambdas, int bandwidth,
                        const AdmmConfig& cfg = {});

/// Gaussian MLE with Phi[i1,i2] = 0 off the edge set, per frequency.
PrecisionSet constrained_mle(const std::vector<CMat>& eta, const EdgeSet& edges, double tol = 1e-7,
                             int max_sweeps = 1000);

/// -Phi[i1,i2] / (Phi[i1,i1] Phi[i2,i2] - Phi[i1,i2] Phi[i2,i1])
cplx partial_spectrum(const CMat& phi, int i1, int i2);

struct PmiResult {
    Mat pmi;
    bool clamped = false;
};

PmiResult partial_mutual_info(const std::vector<PrecisionSet>& sets);

EdgeSet threshold_graph(const Mat& pmi, double tau);

struct EdgeRecovery {
    int true_positive = 0;
    int false_positive = 0;
    int false_negative = 0;
    double precision() const;
    double recall() const;
    double f1() const;
};

EdgeRecovery compare_edges(const EdgeSet& estimated, const EdgeSet& truth);

} // namespace gdfpca
