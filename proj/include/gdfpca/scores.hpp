#pragma once

#include <vector>

#include "gdfpca/common.hpp"
#include "gdfpca/graphical.hpp"
#include "gdfpca/spectral.hpp"

namespace gdfpca {

/// Per-component score matrices on a lag-extended time axis. For component k
/// with filter lags lo..hi, column c holds time index j' = first[k] + c, where
/// first[k] = 1 + lo and the axis has J + hi - lo columns.
struct ScoreArray {
    std::vector<Mat> values;  // p x (J + hi - lo) per component
    std::vector<int> first;

    int num_components() const { return int(values.size()); }
    Eigen::Index num_series() const { return values.empty() ? 0 : values.front().rows(); }
    int last(int k) const { return first[std::size_t(k)] + int(values[std::size_t(k)].cols()) - 1; }
    double at(int i, int time_index, int k) const {
        return values[std::size_t(k)](i, time_index - first[std::size_t(k)]);
    }

    /// Empty (zero) scores shaped for the given filters and J.
    static ScoreArray zeros(const FunctionalFilterSet& filters, Eigen::Index p, Eigen::Index units);
};

/// xi_{i j' k} = sum_l <eps_{i, j'-l}, phi_kl>, with eps = 0 outside 1..J.
ScoreArray integrate_scores(const Panel& centered, const FunctionalFilterSet& filters);

/// xi_{ijk} = <eps_ij, basis_k>.
ScoreArray static_scores(const Panel& centered, const StaticEigenbasis& basis, const TimeGrid& grid);

/// mu_i + sum_{k < q} sum_l phi_kl xi_{i, j+l, k}; q < 0 uses every component.
/// means may be empty (zero mean).
Panel reconstruct(const Mat& means, const FunctionalFilterSet& filters, const ScoreArray& scores, int q = -1);

/// DFT vectors rho(theta_j)[m] = exp(-i (m+1) theta_j) / sqrt(2 pi N), stored as columns of an N x J matrix.
CMat whittle_dft(Eigen::Index length, Eigen::Index units);

/// -1/2 sum_j [xi~* Phi xi~ - logdet Phi] with xi~(theta_j) = Xi rho(theta_j).
class WhittleTerm {
public:
    WhittleTerm(const PrecisionSet& precision, Eigen::Index length);

    double value(const Mat& xi, Mat* gradient = nullptr) const;
    /// d' H d for the (constant) Hessian of value().
    double curvature(const Mat& direction) const;
    double logdet_sum() const noexcept { return logdet_sum_; }

private:
    std::vector<CMat> phi_;
    CMat dft_;
    double logdet_sum_ = 0.0;
};

double whittle_loglik(const Mat& xi, const PrecisionSet& precision);

/// Data and prior ingredients of the conditional score density.
struct ScoreProblem {
    Panel observations;            // Y, p panels of J x Z
    Mat means;                     // p x Z
    Vec noise_var;                 // p
    FunctionalFilterSet filters;   // L = 0 filters give the static variant
    std::vector<PrecisionSet> precision;  // one per component
};

class ConditionalObjective {
public:
    explicit ConditionalObjective(ScoreProblem problem);

    double value(const ScoreArray& xi, ScoreArray* gradient = nullptr) const;
    double curvature(const ScoreArray& direction) const;
    const ScoreProblem& problem() const noexcept { return problem_; }

private:
    ScoreProblem problem_;
    std::vector<WhittleTerm> whittle_;
};

double conditional_objective(const ScoreProblem& problem, const ScoreArray& xi, ScoreArray* gradient = nullptr);

struct ExtractOptions {
    int max_iter = 500;
    double rel_tol = 1e-8;  // stop once |gradient| <= rel_tol * max(1, |initial gradient|)
};

struct ExtractionResult {
    ScoreArray scores;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Maximizes the conditional objective from init by conjugate-gradient ascent
/// with exact line search.
ExtractionResult extract_scores(const ScoreProblem& problem, const ScoreArray& init, const ExtractOptions& opt = {});

} // namespace gdfpca
