#pragma once

#include <string>
#include <vector>

#include "gdfpca/common.hpp"
#include "gdfpca/funcdata.hpp"

namespace gdfpca {

/// floor(J^0.4), at least 1.
int default_bandwidth(Eigen::Index units);

/// floor(J/4), at least 0.
int default_max_lag(Eigen::Index units);

/// (1/J) sum_i sum_{j=1}^{J-g} eps_i(j+g) (x) eps_ij; negative lags return the transpose.
Mat pooled_autocov(const Panel& centered, int lag);

/// Lag-window (Bartlett) kernel from autocovariances of lags 0..r-1.
/// autocovs[g] holds pooled_autocov(., g) for g >= 0.
CMat lag_window_kernel(const std::vector<Mat>& autocovs, int bandwidth, double theta);

/// F_pool(theta_j) on the full frequency grid (index j-1).
struct PooledSpectralKernel {
    std::vector<CMat> kernels;
};

PooledSpectralKernel pooled_spectral_kernel(const Panel& centered, int bandwidth);

struct EigenPairs {
    Vec values;     // K, descending, clamped at 0
    CMat vectors;   // Z x K, unit quadrature norm
};

/// Eigenpairs of the integral operator with kernel F on the grid
/// (Hermitian eigenproblem of W^1/2 F W^1/2).
EigenPairs eigendecompose_kernel(const CMat& kernel, const TimeGrid& grid, int k);

/// Per-frequency eigenpairs v_k(.|theta_j) of the pooled kernel. The stored
/// vector v_k is the eigenvector of the discretized operator; the conjugate of
/// v_k is the eigenfunction in the convention f = sum nu conj(psi(t)) psi(s).
struct EigenSystem {
    TimeGrid grid;
    Eigen::Index units = 0;
    std::vector<Vec> values;    // per frequency index, length K
    std::vector<CMat> vectors;  // per frequency index, Z x K
    std::vector<std::string> warnings;

    int num_components() const { return values.empty() ? 0 : int(values.front().size()); }

    /// theta-independent real eigenfunctions (the static path expressed as an eigensystem).
    static EigenSystem constant(const Mat& basis, const Vec& eigenvalues, const TimeGrid& grid, Eigen::Index units);
};

/// Eigendecomposition on theta_j <= pi and theta_J (others left empty).
EigenSystem raw_eigensystem(const PooledSpectralKernel& kernel, const TimeGrid& grid, int k);

/// Phase continuity along the grid plus conjugate reflection to theta > pi.
EigenSystem align_phases(EigenSystem raw);

EigenSystem dynamic_eigensystem(const Panel& centered, const TimeGrid& grid, int bandwidth, int k);

/// Filters phi_kl for lags lag_lo..lag_hi of one component.
struct FilterComponent {
    int lag_lo = 0;
    int lag_hi = 0;
    Mat filters;  // Z x (lag_hi - lag_lo + 1)

    auto filter(int lag) const { return filters.col(lag - lag_lo); }
    int lag_count() const { return lag_hi - lag_lo + 1; }
    /// symmetric truncation L_k (valid when lag_lo == -lag_hi)
    int max_lag() const { return lag_hi; }
};

struct FunctionalFilterSet {
    TimeGrid grid;
    std::vector<FilterComponent> components;
    double max_imag_residue = 0.0;

    int num_components() const { return int(components.size()); }
    double energy(int k) const;
    /// first q components (all lags kept)
    FunctionalFilterSet first(int q) const;
    /// L = 0 filter set whose single filter per component is the given basis column.
    static FunctionalFilterSet from_basis(const Mat& basis, const TimeGrid& grid);
};

/// Untruncated filters for |l| <= l_max, lag range capped at one period of the
/// J-point frequency grid: [-(ceil(J/2)-1), floor(J/2)].
FunctionalFilterSet filter_bank(const EigenSystem& es, int l_max);

/// Smallest symmetric L with sum_{|l|<=L} |phi_kl|^2 >= tau * (energy of the bank).
int select_lag(const FilterComponent& bank, const TimeGrid& grid, double tau);

/// filter_bank followed by per-component truncation to |l| <= L_k.
FunctionalFilterSet compute_filters(const EigenSystem& es, int l_max, double tau);

/// eta_k(theta_j) as p x p Hermitian PSD matrices, indexed [k][j-1].
struct EigenMatrixSet {
    std::vector<std::vector<CMat>> matrices;

    int num_components() const { return int(matrices.size()); }
    Eigen::Index units() const { return matrices.empty() ? 0 : Eigen::Index(matrices.front().size()); }
    Eigen::Index dim() const { return units() == 0 ? 0 : matrices.front().front().rows(); }
};

/// Projections a_ijk(theta) = <v_k(.|theta), eps_ij> combined with the Bartlett window.
/// With clamp_psd == false the raw symmetrized estimate is returned.
EigenMatrixSet eigenmatrices(const Panel& centered, const EigenSystem& es, int bandwidth, bool clamp_psd = true);

struct StaticEigenbasis {
    Mat basis;        // Z x K, orthonormal in the quadrature metric
    Vec eigenvalues;  // all Z eigenvalues, descending, clamped at 0
};

StaticEigenbasis static_eigenbasis(const Panel& centered, const TimeGrid& grid, int k);

} // namespace gdfpca
