#include <gtest/gtest.h>

#include <cmath>

#include "gdfpca/scores.hpp"
#include "gdfpca/simulate.hpp"
#include "support.hpp"

using namespace gdfpca;
using namespace gdfpca::testing;

namespace {

ScoreArray scaled(const ScoreArray& a, double t, const ScoreArray* b = nullptr) {
    ScoreArray out = a;
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] = b ? Mat(a.values[k] + t * b->values[k]) : Mat(t * a.values[k]);
    return out;
}

double naive_whittle(const Mat& xi, const PrecisionSet& ps) {
    const auto n = xi.cols();
    const auto units = ps.units();
    double total = 0.0;
    for (Eigen::Index j = 0; j < units; ++j) {
        const double th = kTwoPi * double(j + 1) / double(units);
        CVec rho(n);
        for (Eigen::Index m = 0; m < n; ++m) rho[m] = std::polar(1.0 / std::sqrt(kTwoPi * double(n)), -double(m + 1) * th);
        const CVec x = xi.cast<cplx>() * rho;
        const CMat& phi = ps.matrices[std::size_t(j)];
        total += (x.adjoint() * phi * x)(0, 0).real() - std::log(phi.determinant().real());
    }
    return -0.5 * total;
}

// Spectral precision of the simulated AR(1) scores: 2 pi |1 - rho e^{i theta}|^2 Phi^b.
PrecisionSet true_score_precision(const Mat& phi_b, double rho, int units) {
    PrecisionSet ps;
    const FreqGrid fg(units);
    for (Eigen::Index j = 0; j < units; ++j) {
        const double s = kTwoPi * std::norm(1.0 - rho * std::polar(1.0, fg.theta(j)));
        ps.matrices.push_back((s * phi_b).cast<cplx>());
    }
    return ps;
}

} // namespace

TEST(IntegrateScores, UnitProjection) {
    const auto grid = TimeGrid::uniform(11);
    const Vec phi = fourier_basis(2, grid);
    const auto f = FunctionalFilterSet::from_basis(phi, grid);
    Panel eps{Mat::Zero(5, 11), Mat::Zero(5, 11)};
    eps[1].row(0) = phi.transpose();
    const auto s = integrate_scores(eps, f);
    EXPECT_EQ(s.first[0], 1);
    EXPECT_NEAR(s.at(1, 1, 0), 1.0, 1e-12);
    EXPECT_NEAR(s.values[0].cwiseAbs().sum(), 1.0, 1e-12);
}

TEST(IntegrateScores, LagIndexingAndZeroPadding) {
    std::mt19937_64 rng(1);
    const auto grid = TimeGrid::uniform(9);
    const auto f = random_filters(1, 2, grid, rng);
    const Panel eps = random_panel(2, 6, 9, rng);
    const auto s = integrate_scores(eps, f);
    EXPECT_EQ(s.first[0], -1);
    EXPECT_EQ(s.last(0), 8);
    for (int i = 0; i < 2; ++i)
        for (int t = -1; t <= 8; ++t) {
            double want = 0.0;
            for (int l = -2; l <= 2; ++l) {
                const int j = t - l;
                if (j >= 1 && j <= 6) want += inner_product(Vec(eps[std::size_t(i)].row(j - 1).transpose()), Vec(f.components[0].filter(l)), grid);
            }
            EXPECT_NEAR(s.at(i, t, 0), want, 1e-12);
        }
}

TEST(IntegrateScores, ShiftEquivariantInInterior) {
    std::mt19937_64 rng(2);
    const auto grid = TimeGrid::uniform(9);
    const auto f = random_filters(2, 1, grid, rng);
    const Mat base = random_real(12, 9, rng);
    Mat shifted = Mat::Zero(12, 9);
    shifted.bottomRows(11) = base.topRows(11);
    const auto a = integrate_scores({base}, f);
    const auto b = integrate_scores({shifted}, f);
    for (int k = 0; k < 2; ++k)
        for (int t = 3; t <= 10; ++t) EXPECT_NEAR(b.at(0, t + 1, k), a.at(0, t, k), 1e-12);
}

TEST(StaticScores, ProjectionAndOrthogonality) {
    const auto grid = TimeGrid::uniform(21);
    Mat basis(21, 2);
    basis.col(0) = fourier_basis(1, grid);
    basis.col(1) = fourier_basis(2, grid);
    const StaticEigenbasis sb{basis, Vec::Ones(21)};
    Panel eps{Mat(3, 21)};
    eps[0].row(0) = 2.0 * basis.col(0).transpose();
    eps[0].row(1) = fourier_basis(5, grid).transpose();
    eps[0].row(2) = -basis.col(1).transpose();
    const auto s = static_scores(eps, sb, grid);
    EXPECT_NEAR(s.at(0, 1, 0), 2.0, 1e-12);
    EXPECT_NEAR(s.at(0, 2, 0), 0.0, 1e-12);
    EXPECT_NEAR(s.at(0, 2, 1), 0.0, 1e-12);
    EXPECT_NEAR(s.at(0, 3, 1), -1.0, 1e-12);
}

TEST(StaticScores, FullBasisRoundTrip) {
    std::mt19937_64 rng(3);
    const auto grid = TimeGrid::uniform(10);
    const Panel eps = center_panel(random_panel(2, 8, 10, rng));
    const auto sb = static_eigenbasis(eps, grid, 10);
    const auto s = static_scores(eps, sb, grid);
    const auto back = reconstruct(Mat(), FunctionalFilterSet::from_basis(sb.basis, grid), s);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_LT((back[i] - eps[i]).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Reconstruct, ZeroScoresGiveMeanAndLinearity) {
    std::mt19937_64 rng(4);
    const auto grid = TimeGrid::uniform(6);
    const auto f = random_filters(2, 1, grid, rng);
    const Mat mu = random_real(3, 6, rng);
    const auto zero = ScoreArray::zeros(f, 3, 5);
    const auto r0 = reconstruct(mu, f, zero);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) EXPECT_LT((r0[std::size_t(i)].row(j) - mu.row(i)).cwiseAbs().maxCoeff(), 1e-15);
    const auto a = random_scores(f, 3, 5, rng), b = random_scores(f, 3, 5, rng);
    const auto lhs = reconstruct(Mat(), f, scaled(scaled(a, 2.0), -3.0, &b));
    const auto ra = reconstruct(Mat(), f, a), rb = reconstruct(Mat(), f, b);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LT((lhs[i] - (2.0 * ra[i] - 3.0 * rb[i])).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Whittle, DftNorm) {
    const CMat r = whittle_dft(14, 10);
    for (Eigen::Index j = 0; j < 10; ++j) EXPECT_NEAR(r.col(j).squaredNorm(), 1.0 / kTwoPi, 1e-14);
}

TEST(Whittle, ZeroScores) {
    std::mt19937_64 rng(5);
    const auto ps = random_precision(3, 8, rng);
    double logdet = 0.0;
    for (const auto& m : ps.matrices) logdet += std::log(m.determinant().real());
    EXPECT_NEAR(whittle_loglik(Mat::Zero(3, 10), ps), 0.5 * logdet, 1e-10);
}

TEST(Whittle, ScalarConstant) {
    std::mt19937_64 rng(6);
    const double c = 1.7;
    PrecisionSet ps;
    ps.matrices.assign(9, CMat::Constant(1, 1, c));
    const Mat xi = random_real(1, 11, rng);
    const CMat r = whittle_dft(11, 9);
    const double energy = (xi.cast<cplx>() * r).squaredNorm();
    EXPECT_NEAR(whittle_loglik(xi, ps), -0.5 * c * energy + 4.5 * std::log(c), 1e-10);
}

TEST(Whittle, MatchesNaiveDft) {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 5; ++rep) {
        const auto ps = random_precision(4, 12, rng);
        const Mat xi = random_real(4, 14, rng);
        EXPECT_NEAR(whittle_loglik(xi, ps), naive_whittle(xi, ps), 1e-9);
    }
}

TEST(Objective, NoiselessTruthLeavesPrior) {
    std::mt19937_64 rng(8);
    auto pr = random_problem(3, 8, 2, 1, rng);
    const auto xi = random_scores(pr.filters, 3, 8, rng);
    pr.observations = reconstruct(pr.means, pr.filters, xi);
    double prior = 0.0;
    for (int k = 0; k < 2; ++k) prior += whittle_loglik(xi.values[std::size_t(k)], pr.precision[std::size_t(k)]);
    EXPECT_NEAR(conditional_objective(pr, xi), prior, 1e-9);
}

TEST(Objective, ConcaveQuadraticAlongLines) {
    std::mt19937_64 rng(9);
    const auto pr = random_problem(3, 8, 2, 1, rng);
    const ConditionalObjective obj(pr);
    for (int rep = 0; rep < 5; ++rep) {
        const auto x = random_scores(pr.filters, 3, 8, rng), d = random_scores(pr.filters, 3, 8, rng);
        const double f0 = obj.value(x), f1 = obj.value(scaled(x, 1.0, &d)), fm = obj.value(scaled(x, -1.0, &d));
        const double f2 = obj.value(scaled(x, 2.0, &d));
        const double lead = 0.5 * (f1 + fm - 2.0 * f0);
        EXPECT_LE(lead, 0.0);
        EXPECT_NEAR(lead, 0.5 * obj.curvature(d), 1e-8 * std::max(1.0, std::abs(lead)));
        // exact quadratic: the third point is predicted by the first three
        const double b = 0.5 * (f1 - fm);
        EXPECT_NEAR(f2, f0 + 2.0 * b + 4.0 * lead, 1e-8 * std::max(1.0, std::abs(f2)));
    }
}

TEST(Objective, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(10);
    for (int rep = 0; rep < 10; ++rep) {
        const auto pr = random_problem(3, 8, 2, 1, rng);
        const ConditionalObjective obj(pr);
        const auto x = random_scores(pr.filters, 3, 8, rng);
        EXPECT_LT(gradient_fd_error(obj, x), 1e-5) << "instance " << rep;
    }
}

TEST(Objective, RejectsNonPositiveNoise) {
    std::mt19937_64 rng(11);
    auto pr = random_problem(2, 6, 1, 0, rng);
    pr.noise_var[1] = 0.0;
    EXPECT_THROW(ConditionalObjective{pr}, Error);
}

TEST(Extract, MonotoneAscent) {
    std::mt19937_64 rng(12);
    const auto pr = random_problem(3, 8, 2, 1, rng);
    const auto init = random_scores(pr.filters, 3, 8, rng);
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 1; it <= 12; ++it) {
        ExtractOptions opt;
        opt.max_iter = it;
        opt.rel_tol = 0.0;
        const auto r = extract_scores(pr, init, opt);
        EXPECT_GE(r.objective, prev - 1e-10);
        prev = r.objective;
    }
    const auto full = extract_scores(pr, init);
    EXPECT_TRUE(full.converged);
    ScoreArray g;
    ConditionalObjective(pr).value(full.scores, &g);
    double gmax = 0.0;
    for (const auto& m : g.values) gmax = std::max(gmax, m.cwiseAbs().maxCoeff());
    EXPECT_LT(gmax, 1e-3);
}

TEST(Extract, DiffusePriorFitsNoiselessData) {
    std::mt19937_64 rng(13);
    auto pr = random_problem(2, 10, 2, 1, rng);
    const auto xi = random_scores(pr.filters, 2, 10, rng);
    pr.observations = reconstruct(pr.means, pr.filters, xi);
    for (auto& ps : pr.precision)
        for (auto& m : ps.matrices) m *= 1e-8;
    ExtractOptions opt;
    opt.max_iter = 5000;
    opt.rel_tol = 1e-15;
    const auto r = extract_scores(pr, ScoreArray::zeros(pr.filters, 2, 10), opt);
    const auto fit = reconstruct(pr.means, pr.filters, r.scores);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_LT((fit[i] - pr.observations[i]).cwiseAbs().maxCoeff(), 1e-4);
}

// L = 0: with L > 0 the J-frequency Whittle term leaves 2L directions of the
// J + 2L scores unpenalized, and the data term sets those.
TEST(Extract, ConcentratedPriorShrinksToZero) {
    std::mt19937_64 rng(14);
    auto pr = random_problem(2, 10, 2, 0, rng);
    for (auto& ps : pr.precision)
        for (auto& m : ps.matrices) m *= 1e8;
    const auto r = extract_scores(pr, random_scores(pr.filters, 2, 10, rng));
    for (const auto& m : r.scores.values) EXPECT_LT(m.cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Extract, GraphPriorBeatsIntegrationOnSimulatedScores) {
    SimConfig cfg;
    cfg.units = 20;
    cfg.kappa = 6.0;
    int wins = 0;
    double err_int = 0.0, err_ext = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto gt = simulate(cfg, std::uint64_t(rep));
        ScoreProblem pr;
        pr.observations = gt.observations.values;
        pr.means = Mat::Zero(cfg.p, gt.observations.grid.size());
        pr.noise_var = gt.noise_var;
        pr.filters = gt.filters;
        for (int k = 0; k < cfg.k; ++k)
            pr.precision.push_back(true_score_precision(gt.innovation_precision[std::size_t(k)], cfg.rho[std::size_t(k)], cfg.units));
        const auto init = integrate_scores(pr.observations, pr.filters);
        const auto ext = extract_scores(pr, init);
        double a = 0.0, b = 0.0;
        for (int k = 0; k < cfg.k; ++k) {
            a += (init.values[std::size_t(k)] - gt.scores.values[std::size_t(k)]).squaredNorm();
            b += (ext.scores.values[std::size_t(k)] - gt.scores.values[std::size_t(k)]).squaredNorm();
        }
        err_int += a;
        err_ext += b;
        if (b < a) ++wins;
    }
    EXPECT_LT(err_ext, err_int);
    EXPECT_GE(wins, 18);
}

TEST(IntegrateScores, InteriorBeatsBoundaryOnSimulatedData) {
    SimConfig cfg;
    cfg.units = 40;
    double interior = 0.0, boundary = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        const auto gt = simulate(cfg, std::uint64_t(rep));
        const auto s = integrate_scores(gt.observations.values, gt.filters);
        std::vector<double> ti, ei, tb, eb;
        for (int i = 0; i < cfg.p; ++i)
            for (int t = s.first[0]; t <= s.last(0); ++t) {
                const bool edge = t <= 1 || t >= cfg.units;
                (edge ? tb : ti).push_back(gt.scores.at(i, t, 0));
                (edge ? eb : ei).push_back(s.at(i, t, 0));
            }
        auto corr = [](const std::vector<double>& x, const std::vector<double>& y) {
            const Eigen::Map<const Vec> a(x.data(), Eigen::Index(x.size())), b(y.data(), Eigen::Index(y.size()));
            const Vec ac = (a.array() - a.mean()).matrix(), bc = (b.array() - b.mean()).matrix();
            return ac.dot(bc) / (ac.norm() * bc.norm());
        };
        interior += corr(ti, ei);
        boundary += corr(tb, eb);
    }
    EXPECT_GT(interior, boundary);
}
