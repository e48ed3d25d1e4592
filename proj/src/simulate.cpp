#include "gdfpca/simulate.hpp"

#include <cmath>

namespace gdfpca {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double min_eigenvalue(const Mat& m) {
    return Eigen::SelfAdjointEigenSolver<Mat>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

} // namespace

const char* to_string(SimCase c) {
    switch (c) {
        case SimCase::baseline: return "baseline";
        case SimCase::case1_nonseparable: return "case1";
        case SimCase::case2_static: return "case2";
    }
    return "baseline";
}

SimCase parse_sim_case(const std::string& name) {
    if (name == "baseline") return SimCase::baseline;
    if (name == "case1" || name == "case1_nonseparable") return SimCase::case1_nonseparable;
    if (name == "case2" || name == "case2_static") return SimCase::case2_static;
    throw Error(ErrorKind::config, "unknown simulation case '" + name + "'");
}

void SimConfig::validate() const {
    if (p < 1) throw Error(ErrorKind::config, "p must be positive");
    if (units < 2) throw Error(ErrorKind::config, "J must be at least 2");
    if (k < 1) throw Error(ErrorKind::config, "K must be positive");
    if (lag < 0) throw Error(ErrorKind::config, "L must be nonnegative");
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw Error(ErrorKind::config, "kappa must be nonnegative");
    if (int(rho.size()) < k) throw Error(ErrorKind::config, "need one AR coefficient per component");
    for (int c = 0; c < k; ++c)
        if (!(std::abs(rho[std::size_t(c)]) < 1.0)) throw Error(ErrorKind::config, "AR coefficients must lie in (-1, 1)");
    const int m_max = k * (2 * effective_lag() + 1);
    const int freq = m_max / 2;  // highest integer frequency used
    if (resolved_grid_size() < 2 * freq || resolved_grid_size() < 2)
        throw Error(ErrorKind::config, "grid of " + std::to_string(resolved_grid_size()) +
                                           " points is too coarse for " + std::to_string(m_max) +
                                           " Fourier basis functions");
}

std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t replicate) {
    std::seed_seq seq{splitmix64(seed), splitmix64(seed ^ splitmix64(replicate + 1))};
    return std::mt19937_64(seq);
}

EdgeSet gen_graph(int p, double kappa, std::mt19937_64& rng) {
    if (!(kappa >= 0.0)) throw Error(ErrorKind::config, "kappa must be nonnegative");
    const double prob = std::min(kappa / double(p), 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    EdgeSet edges;
    for (int a = 0; a < p; ++a)
        for (int b = a + 1; b < p; ++b)
            if (unif(rng) < prob) edges.emplace_back(a, b);
    return edges;
}

Mat gen_precision(const EdgeSet& edges, int p, int k, std::mt19937_64& rng) {
    const double d = 0.2 * std::exp(double(k) / 10.0);
    Mat diag = d * Mat::Identity(p, p);
    Mat off = Mat::Zero(p, p);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const auto& [a, b] : normalize_edges(edges)) {
        const double mag = 0.1 + 0.25 * unif(rng);
        const double r = unif(rng) < 0.5 ? -mag : mag;
        off(a, b) = off(b, a) = r * d;
    }
    const double floor = 0.01 * d;
    if (min_eigenvalue(diag + off) >= floor) return diag + off;
    double lo = 0.0, hi = 1.0;
    for (int step = 0; step < 30; ++step) {
        const double mid = 0.5 * (lo + hi);
        (min_eigenvalue(diag + mid * off) >= floor ? lo : hi) = mid;
    }
    return diag + lo * off;
}

Mat gen_scores(const Mat& precision, double rho, int units, int lag, std::mt19937_64& rng) {
    if (!(std::abs(rho) < 1.0)) throw Error(ErrorKind::config, "AR coefficient must lie in (-1, 1)");
    const auto p = precision.rows();
    Eigen::LLT<Mat> llt(precision);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::numerical, "innovation precision is not positive definite");
    const Mat upper = llt.matrixU();
    std::normal_distribution<double> normal(0.0, 1.0);
    // b = U^{-1} z has covariance (U' U)^{-1} = precision^{-1}
    auto draw = [&] {
        Vec z(p);
        for (Eigen::Index i = 0; i < p; ++i) z[i] = normal(rng);
        return Vec(upper.triangularView<Eigen::Upper>().solve(z));
    };
    const int n = units + 2 * lag;
    Mat out(p, n);
    out.col(0) = draw() / std::sqrt(1.0 - rho * rho);
    for (int c = 1; c < n; ++c) out.col(c) = rho * out.col(c - 1) + draw();
    return out;
}

Vec fourier_basis(int m, const TimeGrid& grid) {
    if (m < 1) throw Error(ErrorKind::invalid_input, "Fourier index is 1-based");
    const Vec& t = grid.points();
    if (m == 1) return Vec::Ones(t.size());
    const double s2 = std::sqrt(2.0);
    if (m % 2 == 0) return s2 * (std::numbers::pi * double(m) * t.array()).sin().matrix();
    return s2 * (std::numbers::pi * double(m - 1) * t.array()).cos().matrix();
}

Vec lag_weights(int lag) {
    Vec w(2 * lag + 1);
    for (int l = -lag; l <= lag; ++l) w[l + lag] = std::exp(-2.0 * std::abs(l));
    return w / w.norm();
}

FunctionalFilterSet true_filters(int k, int lag, const TimeGrid& grid) {
    const Vec w = lag_weights(lag);
    FunctionalFilterSet out;
    out.grid = grid;
    for (int c = 1; c <= k; ++c) {
        FilterComponent comp{-lag, lag, Mat(grid.size(), 2 * lag + 1)};
        for (int l = -lag; l <= lag; ++l) {
            const int m = (c - 1) * (2 * lag + 1) + (l + lag) + 1;
            comp.filters.col(l + lag) = w[l + lag] * fourier_basis(m, grid);
        }
        out.components.push_back(std::move(comp));
    }
    return out;
}

MFTSObservations add_noise(const Panel& curves, const TimeGrid& grid, std::mt19937_64& rng, Vec* noise_var) {
    MFTSObservations obs;
    obs.grid = grid;
    Vec var(Eigen::Index(curves.size()));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& e = curves[i];
        double s = 0.0;
        for (Eigen::Index j = 0; j < e.rows(); ++j) s += norm_squared(e.row(j).transpose(), grid);
        var[Eigen::Index(i)] = s / double(e.rows()) / 5.0;
        const double sd = std::sqrt(var[Eigen::Index(i)]);
        Mat y = e;
        for (Eigen::Index j = 0; j < y.rows(); ++j)
            for (Eigen::Index z = 0; z < y.cols(); ++z) y(j, z) += sd * normal(rng);
        obs.values.push_back(std::move(y));
    }
    if (noise_var) *noise_var = var;
    return obs;
}

GroundTruth simulate(const SimConfig& cfg, std::uint64_t replicate) {
    cfg.validate();
    GroundTruth gt;
    gt.config = cfg;
    auto rng = replicate_rng(cfg.seed, replicate);
    const int lag = cfg.effective_lag();
    const auto grid = TimeGrid::uniform(cfg.resolved_grid_size());

    gt.graph = gen_graph(cfg.p, cfg.kappa, rng);
    for (int k = 1; k <= cfg.k; ++k) gt.innovation_precision.push_back(gen_precision(gt.graph, cfg.p, k, rng));
    for (int k = 1; k <= cfg.k; ++k) {
        gt.scores.values.push_back(
            gen_scores(gt.innovation_precision[std::size_t(k - 1)], cfg.rho[std::size_t(k - 1)], cfg.units, lag, rng));
        gt.scores.first.push_back(1 - lag);
    }
    gt.filters = true_filters(cfg.k, lag, grid);
    gt.curves = reconstruct(Mat(), gt.filters, gt.scores);
    if (cfg.sim_case == SimCase::case1_nonseparable) {
        // Every filter of series i carries the same factor, so it multiplies the whole curve.
        for (std::size_t i = 0; i < gt.curves.size(); ++i) {
            const Vec factor =
                (1.0 + 5.0 * (double(i + 1) * grid.points().array() / double(cfg.p)).sin()).matrix();
            gt.curves[i] = gt.curves[i] * factor.asDiagonal();
        }
    }
    gt.observations = add_noise(gt.curves, grid, rng, &gt.noise_var);
    return gt;
}

CMat true_pooled_kernel(const GroundTruth& truth, double theta) {
    if (truth.config.sim_case == SimCase::case1_nonseparable)
        throw Error(ErrorKind::invalid_input, "no closed-form kernel for the fluctuating case");
    const auto z = truth.filters.grid.size();
    CMat f = CMat::Zero(z, z);
    for (int k = 0; k < truth.filters.num_components(); ++k) {
        const auto& comp = truth.filters.components[std::size_t(k)];
        CVec u = CVec::Zero(z);
        for (int l = comp.lag_lo; l <= comp.lag_hi; ++l)
            u += comp.filter(l).cast<cplx>() * std::polar(1.0, -double(l) * theta);
        const Mat cov = truth.innovation_precision[std::size_t(k)].inverse();
        const double rho = truth.config.rho[std::size_t(k)];
        const double s = cov.trace() / (kTwoPi * std::norm(1.0 - rho * std::polar(1.0, theta)));
        f += s * u * u.adjoint();
    }
    return f;
}

} // namespace gdfpca
