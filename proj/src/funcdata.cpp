#include "gdfpca/funcdata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gdfpca {

TimeGrid::TimeGrid(Vec points) : points_(std::move(points)), weights_(Vec::Zero(points_.size())) {
    const auto z = points_.size();
    for (Eigen::Index i = 0; i < z; ++i) {
        if (!std::isfinite(points_[i]) || points_[i] < 0.0 || points_[i] > 1.0)
            throw Error(ErrorKind::invalid_input, "grid points must lie in [0,1]");
        if (i > 0 && points_[i] <= points_[i - 1])
            throw Error(ErrorKind::invalid_input, "grid points must be strictly increasing");
    }
    for (Eigen::Index i = 0; i + 1 < z; ++i) {
        const double h = points_[i + 1] - points_[i];
        weights_[i] += 0.5 * h;
        weights_[i + 1] += 0.5 * h;
    }
}

TimeGrid TimeGrid::uniform(Eigen::Index z) {
    if (z < 2) throw Error(ErrorKind::invalid_input, "a grid needs at least two points");
    return TimeGrid(Vec::LinSpaced(z, 0.0, 1.0));
}

bool TimeGrid::is_uniform(double tol) const {
    if (size() < 3) return true;
    const double h = points_[1] - points_[0];
    for (Eigen::Index i = 1; i + 1 < size(); ++i)
        if (std::abs(points_[i + 1] - points_[i] - h) > tol) return false;
    return true;
}

bool TimeGrid::operator==(const TimeGrid& other) const {
    return size() == other.size() && (points_ - other.points_).cwiseAbs().maxCoeff() < 1e-12;
}

FreqGrid::FreqGrid(Eigen::Index units) : units_(units) {
    if (units < 2) throw Error(ErrorKind::insufficient_data, "frequency grid needs J >= 2");
}

std::vector<Eigen::Index> FreqGrid::half_indices() const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index idx = 0; idx < units_ / 2; ++idx) out.push_back(idx);
    out.push_back(units_ - 1);
    return out;
}

void MFTSObservations::validate() const {
    if (values.empty()) throw Error(ErrorKind::invalid_input, "panel has no series");
    const auto j = values.front().rows();
    for (const auto& m : values) {
        if (m.rows() != j || m.cols() != grid.size())
            throw Error(ErrorKind::invalid_input, "panel dimensions are inconsistent");
        if (!m.allFinite()) throw Error(ErrorKind::invalid_input, "panel contains non-finite values");
    }
}

double inner_product(const Eigen::Ref<const Vec>& f, const Eigen::Ref<const Vec>& g, const TimeGrid& grid) {
    if (f.size() != grid.size() || g.size() != grid.size())
        throw Error(ErrorKind::invalid_input, "inner product length mismatch");
    return (grid.weights().array() * f.array() * g.array()).sum();
}

cplx inner_product(const Eigen::Ref<const CVec>& f, const Eigen::Ref<const CVec>& g, const TimeGrid& grid) {
    if (f.size() != grid.size() || g.size() != grid.size())
        throw Error(ErrorKind::invalid_input, "inner product length mismatch");
    cplx acc{0.0, 0.0};
    for (Eigen::Index z = 0; z < f.size(); ++z) acc += grid.weights()[z] * std::conj(f[z]) * g[z];
    return acc;
}

double norm_squared(const Eigen::Ref<const Vec>& f, const TimeGrid& grid) {
    return inner_product(f, f, grid);
}

// ---------------------------------------------------------------------------

WhittakerSmoother::WhittakerSmoother(Eigen::Index z) {
    if (z < 5) throw Error(ErrorKind::insufficient_data, "smoothing needs at least 5 grid points");
    Mat d = Mat::Zero(z - 2, z);
    for (Eigen::Index r = 0; r < z - 2; ++r) {
        d(r, r) = 1.0;
        d(r, r + 1) = -2.0;
        d(r, r + 2) = 1.0;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(d.transpose() * d);
    basis_ = es.eigenvectors();
    // constants and lines span the null space; their computed eigenvalues are O(1e-15) noise
    penalty_eigs_ = es.eigenvalues().cwiseMax(0.0);
    penalty_eigs_.head(2).setZero();
}

const std::vector<double>& WhittakerSmoother::alpha_grid() {
    static const std::vector<double> grid = [] {
        std::vector<double> g(25);
        for (int i = 0; i < 25; ++i) g[i] = std::pow(10.0, -6.0 + 10.0 * i / 24.0);
        return g;
    }();
    return grid;
}

SmoothResult WhittakerSmoother::smooth(const Eigen::Ref<const Vec>& y, double alpha) const {
    if (y.size() != size()) throw Error(ErrorKind::invalid_input, "curve length does not match smoother");
    if (!y.allFinite()) throw Error(ErrorKind::invalid_input, "curve contains non-finite values");
    const Vec shrink = (1.0 + alpha * penalty_eigs_.array()).inverse().matrix();
    const Vec coef = basis_.transpose() * y;
    SmoothResult out;
    out.smoothed = basis_ * shrink.cwiseProduct(coef);
    out.residual_ss = (y - out.smoothed).squaredNorm();
    out.effective_df = shrink.sum();
    out.alpha = alpha;
    return out;
}

SmoothResult WhittakerSmoother::smooth_gcv(const Eigen::Ref<const Vec>& y) const {
    if (y.size() != size()) throw Error(ErrorKind::invalid_input, "curve length does not match smoother");
    if (!y.allFinite()) throw Error(ErrorKind::invalid_input, "curve contains non-finite values");
    const Vec coef = basis_.transpose() * y;
    const double z = double(size());
    double best_score = std::numeric_limits<double>::infinity();
    double best_alpha = alpha_grid().front();
    for (double alpha : alpha_grid()) {
        const Vec keep = (1.0 + alpha * penalty_eigs_.array()).inverse().matrix();
        // residual in the eigenbasis: (1 - keep) * coef
        const double rss = ((1.0 - keep.array()) * coef.array()).square().sum();
        const double df = keep.sum();
        const double denom = (z - df) * (z - df);
        if (denom <= 0.0) continue;
        const double score = z * rss / denom;
        if (score < best_score) {
            best_score = score;
            best_alpha = alpha;
        }
    }
    return smooth(y, best_alpha);
}

SmoothResult presmooth_curve(const Eigen::Ref<const Vec>& y, const TimeGrid& grid) {
    if (y.size() != grid.size()) throw Error(ErrorKind::invalid_input, "curve length does not match grid");
    if (y.size() < 5) throw Error(ErrorKind::insufficient_data, "smoothing needs at least 5 grid points");
    return WhittakerSmoother(y.size()).smooth_gcv(y);
}

Panel center_panel(const Panel& curves, Mat* means) {
    Panel out;
    out.reserve(curves.size());
    if (means) *means = Mat(curves.size(), num_points(curves));
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const Eigen::RowVectorXd mu = curves[i].colwise().mean();
        out.push_back(curves[i].rowwise() - mu);
        if (means) means->row(Eigen::Index(i)) = mu;
    }
    return out;
}

SmoothedMFTS presmooth_panel(const MFTSObservations& obs) {
    obs.validate();
    const auto j_units = num_units(obs.values);
    const auto z = obs.grid.size();
    if (j_units < 2) throw Error(ErrorKind::insufficient_data, "pre-smoothing needs J >= 2");
    const WhittakerSmoother smoother(z);

    SmoothedMFTS out;
    out.noise_var = Vec(obs.values.size());
    out.curves.reserve(obs.values.size());
    for (std::size_t i = 0; i < obs.values.size(); ++i) {
        Mat smooth(j_units, z);
        double rss = 0.0, df = 0.0;
        for (Eigen::Index j = 0; j < j_units; ++j) {
            const auto res = smoother.smooth_gcv(obs.values[i].row(j).transpose());
            smooth.row(j) = res.smoothed.transpose();
            rss += res.residual_ss;
            df += res.effective_df;
        }
        const double dof = double(j_units * z) - df;
        double var;
        if (dof <= 1e-8 * double(j_units * z)) {
            var = rss / double(j_units * z);
            out.noise_fallback = true;
        } else {
            var = rss / dof;
        }
        out.noise_var[Eigen::Index(i)] = std::max(var, 1e-12);
        out.curves.push_back(std::move(smooth));
    }
    out.centered = center_panel(out.curves, &out.means);
    return out;
}

} // namespace gdfpca
