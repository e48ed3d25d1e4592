#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "gdfpca/common.hpp"
#include "gdfpca/funcdata.hpp"
#include "gdfpca/graphical.hpp"
#include "gdfpca/scores.hpp"

namespace gdfpca::testing {

inline CMat random_complex(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    CMat m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = cplx(n(rng), n(rng));
    return m;
}

inline Mat random_real(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Mat m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
    return m;
}

/// A A* / p + shift I, Hermitian positive definite.
inline CMat random_hpd(Eigen::Index p, std::mt19937_64& rng, double shift = 0.5) {
    const CMat a = random_complex(p, p, rng);
    CMat h = a * a.adjoint() / double(p);
    h.diagonal().array() += shift;
    return 0.5 * (h + h.adjoint());
}

inline Panel random_panel(int p, Eigen::Index units, Eigen::Index z, std::mt19937_64& rng) {
    Panel out;
    for (int i = 0; i < p; ++i) out.push_back(random_real(units, z, rng));
    return out;
}

/// eta on the full grid with eta(2 pi - theta) = conj(eta(theta)).
inline std::vector<CMat> symmetric_stack(Eigen::Index p, Eigen::Index units, std::mt19937_64& rng) {
    const FreqGrid fg(units);
    std::vector<CMat> out(static_cast<std::size_t>(units));
    for (auto idx : fg.half_indices()) {
        CMat h = random_hpd(p, rng);
        if (fg.self_mirrored(idx)) h = CMat(h.real().cast<cplx>());
        out[std::size_t(idx)] = h;
        out[std::size_t(fg.mirror(idx))] = h.conjugate();
    }
    return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("gdfpca_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline FunctionalFilterSet random_filters(int k, int lag, const TimeGrid& grid, std::mt19937_64& rng) {
    FunctionalFilterSet f;
    f.grid = grid;
    for (int c = 0; c < k; ++c) f.components.push_back({-lag, lag, 0.5 * random_real(grid.size(), 2 * lag + 1, rng)});
    return f;
}

inline ScoreArray random_scores(const FunctionalFilterSet& f, int p, int units, std::mt19937_64& rng) {
    auto s = ScoreArray::zeros(f, p, units);
    for (auto& m : s.values) m = random_real(m.rows(), m.cols(), rng);
    return s;
}

inline PrecisionSet random_precision(int p, int units, std::mt19937_64& rng) {
    PrecisionSet ps;
    ps.matrices = symmetric_stack(p, units, rng);
    return ps;
}

inline ScoreProblem random_problem(int p, int units, int k, int lag, std::mt19937_64& rng) {
    const auto grid = TimeGrid::uniform(7);
    ScoreProblem pr;
    pr.filters = random_filters(k, lag, grid, rng);
    pr.observations = random_panel(p, units, 7, rng);
    pr.means = random_real(p, 7, rng) * 0.1;
    pr.noise_var = (random_real(p, 1, rng).array().abs() + 0.5).matrix();
    for (int c = 0; c < k; ++c) pr.precision.push_back(random_precision(p, units, rng));
    return pr;
}

// Brute-force partial cross-spectrum of (i1, i2) given the rest: off-diagonal
// of eta_AA - eta_AC eta_CC^{-1} eta_CA.
inline cplx schur_partial(const CMat& eta, int i1, int i2) {
    const auto p = eta.rows();
    std::vector<int> rest;
    for (int i = 0; i < p; ++i)
        if (i != i1 && i != i2) rest.push_back(i);
    CMat aa(2, 2), ac(2, Eigen::Index(rest.size())), cc(Eigen::Index(rest.size()), Eigen::Index(rest.size()));
    const int a[2] = {i1, i2};
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) aa(r, c) = eta(a[r], a[c]);
        for (std::size_t c = 0; c < rest.size(); ++c) ac(r, Eigen::Index(c)) = eta(a[r], rest[c]);
    }
    for (std::size_t r = 0; r < rest.size(); ++r)
        for (std::size_t c = 0; c < rest.size(); ++c) cc(Eigen::Index(r), Eigen::Index(c)) = eta(rest[r], rest[c]);
    const CMat schur = rest.empty() ? aa : CMat(aa - ac * cc.inverse() * ac.adjoint());
    return schur(0, 1);
}

/// max |analytic - central difference| over max |analytic| for the gradient at x.
inline double gradient_fd_error(const ConditionalObjective& obj, const ScoreArray& x, double h = 1e-5) {
    ScoreArray g;
    obj.value(x, &g);
    double err = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < x.values.size(); ++k)
        for (Eigen::Index c = 0; c < x.values[k].cols(); ++c)
            for (Eigen::Index i = 0; i < x.values[k].rows(); ++i) {
                ScoreArray xp = x, xm = x;
                xp.values[k](i, c) += h;
                xm.values[k](i, c) -= h;
                const double fd = (obj.value(xp) - obj.value(xm)) / (2.0 * h);
                err = std::max(err, std::abs(fd - g.values[k](i, c)));
                scale = std::max(scale, std::abs(g.values[k](i, c)));
            }
    return err / scale;
}

} // namespace gdfpca::testing
