#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "gdfpca/common.hpp"

namespace gdfpca {

/// Within-unit evaluation grid on [0,1] with trapezoidal quadrature weights.
class TimeGrid {
public:
    TimeGrid() = default;
    explicit TimeGrid(Vec points);

    /// Z equally spaced points including both endpoints.
    static TimeGrid uniform(Eigen::Index z);

    Eigen::Index size() const noexcept { return points_.size(); }
    const Vec& points() const noexcept { return points_; }
    const Vec& weights() const noexcept { return weights_; }
    bool is_uniform(double tol = 1e-9) const;

    bool operator==(const TimeGrid& other) const;

private:
    Vec points_;
    Vec weights_;
};

/// theta_j = 2 pi j / J for j = 1..J (stored zero-based: index j-1).
class FreqGrid {
public:
    explicit FreqGrid(Eigen::Index units);

    Eigen::Index size() const noexcept { return units_; }
    double theta(Eigen::Index idx) const noexcept { return kTwoPi * double(idx + 1) / double(units_); }

    /// Index of 2 pi - theta_idx on the grid (theta_J = 2 pi maps to itself).
    Eigen::Index mirror(Eigen::Index idx) const noexcept {
        return idx == units_ - 1 ? idx : units_ - 2 - idx;
    }
    bool self_mirrored(Eigen::Index idx) const noexcept { return mirror(idx) == idx; }

    /// Frequencies that are solved directly: theta_j <= pi plus theta_J = 2 pi.
    /// Every other index is the mirror of one of these.
    std::vector<Eigen::Index> half_indices() const;

    /// 1 for self-mirrored frequencies, 2 otherwise (for half-grid sums).
    double multiplicity(Eigen::Index idx) const noexcept { return self_mirrored(idx) ? 1.0 : 2.0; }

private:
    Eigen::Index units_;
};

struct MFTSObservations {
    Panel values;
    TimeGrid grid;

    void validate() const;
};

struct SmoothedMFTS {
    Panel curves;
    Mat means;          // p x Z
    Vec noise_var;      // p
    Panel centered;
    bool noise_fallback = false;
};

double inner_product(const Eigen::Ref<const Vec>& f, const Eigen::Ref<const Vec>& g, const TimeGrid& grid);
cplx inner_product(const Eigen::Ref<const CVec>& f, const Eigen::Ref<const CVec>& g, const TimeGrid& grid);
double norm_squared(const Eigen::Ref<const Vec>& f, const TimeGrid& grid);

struct SmoothResult {
    Vec smoothed;
    double residual_ss = 0.0;
    double effective_df = 0.0;
    double alpha = 0.0;
};

/// Whittaker smoother: minimizes |y - x|^2 + alpha |D2 x|^2.
/// The penalty eigenbasis is factored once per grid size so that every alpha
/// is a diagonal rescaling.
class WhittakerSmoother {
public:
    explicit WhittakerSmoother(Eigen::Index z);

    Eigen::Index size() const noexcept { return basis_.rows(); }

    SmoothResult smooth(const Eigen::Ref<const Vec>& y, double alpha) const;

    /// alpha chosen by GCV over 25 log-spaced values in [1e-6, 1e4].
    SmoothResult smooth_gcv(const Eigen::Ref<const Vec>& y) const;

    static const std::vector<double>& alpha_grid();

private:
    Mat basis_;
    Vec penalty_eigs_;
};

SmoothResult presmooth_curve(const Eigen::Ref<const Vec>& y, const TimeGrid& grid);

SmoothedMFTS presmooth_panel(const MFTSObservations& obs);

/// Centers an already-smooth panel without pre-smoothing (mean over time units).
Panel center_panel(const Panel& curves, Mat* means = nullptr);

/// Long-format CSV: series_id, time_unit, grid_index (all 1-based), value.
MFTSObservations load_csv(const std::filesystem::path& path);
void save_csv(const MFTSObservations& obs, const std::filesystem::path& path);

} // namespace gdfpca
