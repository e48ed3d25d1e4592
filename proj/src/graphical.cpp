#include "gdfpca/graphical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "gdfpca/funcdata.hpp"

namespace gdfpca {

namespace {

struct HalfGrid {
    std::vector<Eigen::Index> indices;
    std::vector<double> weights;
};

HalfGrid half_grid(Eigen::Index units) {
    const FreqGrid freqs(units);
    HalfGrid h;
    h.indices = freqs.half_indices();
    for (auto idx : h.indices) h.weights.push_back(freqs.multiplicity(idx));
    return h;
}

bool is_self_mirrored(Eigen::Index idx, Eigen::Index units) { return FreqGrid(units).self_mirrored(idx); }

std::vector<CMat> reflect_full(const std::vector<CMat>& half, const HalfGrid& h, Eigen::Index units) {
    const FreqGrid freqs(units);
    std::vector<CMat> full(static_cast<std::size_t>(units));
    for (std::size_t c = 0; c < h.indices.size(); ++c) full[std::size_t(h.indices[c])] = half[c];
    for (Eigen::Index idx = 0; idx < units; ++idx)
        if (full[std::size_t(idx)].size() == 0) full[std::size_t(idx)] = full[std::size_t(freqs.mirror(idx))].conjugate();
    return full;
}

void check_eta(const std::vector<CMat>& eta) {
    if (eta.size() < 2) throw Error(ErrorKind::invalid_input, "eigen-matrices need at least two frequencies");
    const auto p = eta.front().rows();
    for (const auto& m : eta)
        if (m.rows() != p || m.cols() != p) throw Error(ErrorKind::invalid_input, "eigen-matrix sizes differ");
}

double average_trace(const std::vector<CMat>& eta) {
    double t = 0.0;
    for (const auto& m : eta) t += m.trace().real();
    return t / double(eta.size() * std::size_t(eta.front().rows()));
}

// Hermitian PD check with a relative floor.
bool is_pd(const CMat& m, double floor_rel = 1e-12) {
    Eigen::SelfAdjointEigenSolver<CMat> es(m, Eigen::EigenvaluesOnly);
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    return es.eigenvalues().minCoeff() > floor_rel * std::max(top, 1e-300);
}

double logdet_pd(const CMat& m) {
    Eigen::LLT<CMat> llt(m);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::invalid_input, "precision matrix is not positive definite");
    double s = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) s += std::log(llt.matrixL()(i, i).real());
    return 2.0 * s;
}

CMat hermitian_part(const CMat& m) { return 0.5 * (m + m.adjoint()); }

} // namespace

EdgeSet normalize_edges(EdgeSet edges) {
    for (auto& e : edges)
        if (e.first > e.second) std::swap(e.first, e.second);
    edges.erase(std::remove_if(edges.begin(), edges.end(), [](const Edge& e) { return e.first == e.second; }),
                edges.end());
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

int PrecisionSet::nonzero_groups() const {
    const auto p = dim();
    int count = 0;
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = a + 1; b < p; ++b) {
            for (const auto& m : matrices)
                if (m(a, b) != cplx(0.0, 0.0)) {
                    ++count;
                    break;
                }
        }
    return count;
}

double lambda_max(const std::vector<CMat>& eta) {
    check_eta(eta);
    const auto p = eta.front().rows();
    double best = 0.0;
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = a + 1; b < p; ++b) {
            double s = 0.0;
            for (const auto& m : eta) s += std::norm(m(a, b));
            best = std::max(best, std::sqrt(s));
        }
    return best;
}

std::vector<double> default_lambda_grid(const std::vector<CMat>& eta, int count) {
    count = std::max(count, 1);
    const double top = std::max(lambda_max(eta), 1e-12);
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int c = 0; c < count; ++c)
        grid[std::size_t(c)] = count == 1 ? top : top * std::pow(10.0, -3.0 + 3.0 * double(c) / double(count - 1));
    return grid;
}

double glasso_objective(const std::vector<CMat>& eta, const PrecisionSet& phi, double lambda) {
    check_eta(eta);
    if (phi.matrices.size() != eta.size()) throw Error(ErrorKind::invalid_input, "precision/eta grid mismatch");
    double obj = 0.0;
    for (std::size_t j = 0; j < eta.size(); ++j)
        obj += (eta[j] * phi.matrices[j]).trace().real() - logdet_pd(phi.matrices[j]);
    const auto p = eta.front().rows();
    double pen = 0.0;
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = a + 1; b < p; ++b) {
            double s = 0.0;
            for (const auto& m : phi.matrices) s += std::norm(m(a, b));
            pen += 2.0 * std::sqrt(s);
        }
    return obj + lambda * pen;
}

namespace {

struct BlockSolution {
    std::vector<CMat> half;
    int iterations = 0;
    bool converged = true;
};

// ADMM on one screened block (half grid, scaled problem).
BlockSolution admm_block(const std::vector<CMat>& s, const HalfGrid& h, Eigen::Index units, double lambda,
                         const AdmmConfig& cfg, const std::vector<CMat>* warm, std::vector<CMat>* dual, double* rho_io) {
    const auto nh = s.size();
    const auto p = s.front().rows();
    const double alpha = std::clamp(cfg.relaxation, 1.0, 1.95);
    std::vector<CMat> theta(nh), zmat(nh), u(nh, CMat::Zero(p, p));
    if (dual && dual->size() == nh) u = *dual;
    for (std::size_t c = 0; c < nh; ++c) {
        if (warm) {
            zmat[c] = (*warm)[c];
        } else {
            zmat[c] = CMat::Zero(p, p);
            for (Eigen::Index a = 0; a < p; ++a) zmat[c](a, a) = 1.0 / std::max(s[c](a, a).real(), 1e-12);
        }
        theta[c] = zmat[c];
    }

    BlockSolution out;
    out.converged = false;
    double rho = rho_io && *rho_io > 0.0 ? *rho_io : cfg.rho;
    double s_norm2 = 0.0;
    for (std::size_t c = 0; c < nh; ++c) s_norm2 += h.weights[c] * s[c].squaredNorm();
    const double s_norm = std::sqrt(s_norm2);
    std::vector<CMat> z_old(nh), relaxed(nh);
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        out.iterations = iter;
        // Theta-update: rho Theta - Theta^{-1} = rho (Z - U) - S, eigenvalue-wise.
        for (std::size_t c = 0; c < nh; ++c) {
            const CMat q = hermitian_part(rho * (zmat[c] - u[c]) - s[c]);
            if (is_self_mirrored(h.indices[c], units)) {
                Eigen::SelfAdjointEigenSolver<Mat> es(q.real());
                Vec g = es.eigenvalues();
                for (Eigen::Index e = 0; e < g.size(); ++e)
                    g[e] = std::max((g[e] + std::sqrt(g[e] * g[e] + 4.0 * rho)) / (2.0 * rho), 1e-9);
                theta[c] = (es.eigenvectors() * g.asDiagonal() * es.eigenvectors().transpose()).cast<cplx>();
            } else {
                Eigen::SelfAdjointEigenSolver<CMat> es(q);
                Vec g = es.eigenvalues();
                for (Eigen::Index e = 0; e < g.size(); ++e)
                    g[e] = std::max((g[e] + std::sqrt(g[e] * g[e] + 4.0 * rho)) / (2.0 * rho), 1e-9);
                theta[c] = es.eigenvectors() * g.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
            }
        }
        // Z-update: group soft-threshold across the frequency stack.
        for (std::size_t c = 0; c < nh; ++c) {
            z_old[c] = zmat[c];
            relaxed[c] = alpha * theta[c] + (1.0 - alpha) * zmat[c];
        }
        const double thresh = lambda / rho;
        for (Eigen::Index a = 0; a < p; ++a) {
            for (std::size_t c = 0; c < nh; ++c) zmat[c](a, a) = (relaxed[c](a, a) + u[c](a, a)).real();
            for (Eigen::Index b = a + 1; b < p; ++b) {
                double nrm2 = 0.0;
                for (std::size_t c = 0; c < nh; ++c) nrm2 += h.weights[c] * std::norm(relaxed[c](a, b) + u[c](a, b));
                const double nrm = std::sqrt(nrm2);
                const double scale = nrm > thresh ? 1.0 - thresh / nrm : 0.0;
                for (std::size_t c = 0; c < nh; ++c) {
                    const cplx v = scale * (relaxed[c](a, b) + u[c](a, b));
                    zmat[c](a, b) = v;
                    zmat[c](b, a) = std::conj(v);
                }
            }
        }
        double r2 = 0.0, s2 = 0.0, th2 = 0.0, z2 = 0.0, u2 = 0.0;
        for (std::size_t c = 0; c < nh; ++c) {
            u[c] += relaxed[c] - zmat[c];
            r2 += h.weights[c] * (theta[c] - zmat[c]).squaredNorm();
            s2 += h.weights[c] * (zmat[c] - z_old[c]).squaredNorm();
            th2 += h.weights[c] * theta[c].squaredNorm();
            z2 += h.weights[c] * zmat[c].squaredNorm();
            u2 += h.weights[c] * u[c].squaredNorm();
        }
        const double r = std::sqrt(r2);
        const double sd = rho * std::sqrt(s2);
        const double eps_pri = cfg.tol * std::max({std::sqrt(th2), std::sqrt(z2), 1e-12});
        // Dual residual is a stationarity residual of S - Theta^{-1} + rho U, so it is measured against |S| as well.
        const double eps_dual = cfg.tol * std::max({rho * std::sqrt(u2), s_norm, 1e-12});
        if (r < eps_pri && sd < eps_dual) {
            out.converged = true;
            break;
        }
        if (cfg.adapt_rho) {
            if (r > 10.0 * sd) {
                rho *= 2.0;
                for (auto& m : u) m /= 2.0;
            } else if (sd > 10.0 * r) {
                rho /= 2.0;
                for (auto& m : u) m *= 2.0;
            }
        }
    }
    if (dual) *dual = std::move(u);
    if (rho_io) *rho_io = rho;
    out.half.resize(nh);
    for (std::size_t c = 0; c < nh; ++c)
        // Z carries the exact zeros; fall back to Theta if thresholding broke definiteness.
        out.half[c] = is_pd(zmat[c], 1e-10) ? zmat[c] : theta[c];
    return out;
}

// Connected components of {(a, b): weighted group norm of S[a, b] > lambda}.
std::vector<std::vector<Eigen::Index>> screen_blocks(const std::vector<CMat>& s, const HalfGrid& h, double lambda) {
    const auto p = s.front().rows();
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(p));
    for (Eigen::Index a = 0; a < p; ++a) parent[std::size_t(a)] = a;
    auto find = [&](Eigen::Index a) {
        while (parent[std::size_t(a)] != a) a = parent[std::size_t(a)] = parent[std::size_t(parent[std::size_t(a)])];
        return a;
    };
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = a + 1; b < p; ++b) {
            double nrm2 = 0.0;
            for (std::size_t c = 0; c < s.size(); ++c) nrm2 += h.weights[c] * std::norm(s[c](a, b));
            if (std::sqrt(nrm2) > lambda) parent[std::size_t(find(a))] = find(b);
        }
    std::vector<std::vector<Eigen::Index>> blocks;
    std::vector<long> slot(static_cast<std::size_t>(p), -1);
    for (Eigen::Index a = 0; a < p; ++a) {
        const auto root = std::size_t(find(a));
        if (slot[root] < 0) {
            slot[root] = long(blocks.size());
            blocks.emplace_back();
        }
        blocks[std::size_t(slot[root])].push_back(a);
    }
    return blocks;
}

} // namespace

namespace {

// Scaled dual variables and penalty parameter carried along a lambda path.
struct PathState {
    std::vector<CMat> dual;  // half grid, p x p
    double rho = 0.0;
};

PrecisionSet joint_glasso_impl(const std::vector<CMat>& eta, double lambda, const AdmmConfig& cfg,
                               const PrecisionSet* warm_start, PathState* state) {
    if (lambda < 0.0) throw Error(ErrorKind::invalid_input, "lambda must be nonnegative");
    const auto units = Eigen::Index(eta.size());
    const auto p = eta.front().rows();
    const auto h = half_grid(units);
    const auto nh = h.indices.size();

    PrecisionSet out;
    out.lambda = lambda;

    std::vector<CMat> s(nh);
    bool singular = false;
    for (std::size_t c = 0; c < nh; ++c) {
        s[c] = hermitian_part(eta[std::size_t(h.indices[c])]);
        if (!is_pd(s[c])) singular = true;
    }
    if (singular && lambda == 0.0) {
        const double ridge = 1e-8 * std::max(average_trace(eta), 1e-300);
        for (auto& m : s) m += ridge * CMat::Identity(p, p);
        out.ridge_fallback = true;
    }

    std::vector<CMat> half(nh);
    if (lambda == 0.0) {
        // Separable problem: each frequency's minimizer is the inverse.
        for (std::size_t c = 0; c < nh; ++c) half[c] = hermitian_part(s[c].llt().solve(CMat::Identity(p, p)));
    } else {
        // Rescale so the average diagonal is 1: Phi = Phi'/c solves the problem with eta/c and lambda/c.
        const double scale = std::max(average_trace(eta), 1e-300);
        for (auto& m : s) m /= scale;
        const double lam = lambda / scale;
        for (auto& m : half) m = CMat::Zero(p, p);
        // Off-block entries of the solution vanish exactly (group-lasso KKT), so blocks are solved separately.
        for (const auto& block : screen_blocks(s, h, lam)) {
            const auto b = Eigen::Index(block.size());
            if (b == 1) {
                const auto a = block.front();
                for (std::size_t c = 0; c < nh; ++c) half[c](a, a) = 1.0 / std::max(s[c](a, a).real(), 1e-12);
                continue;
            }
            std::vector<CMat> sub(nh), warm_sub;
            for (std::size_t c = 0; c < nh; ++c) sub[c] = s[c](block, block);
            if (warm_start && warm_start->matrices.size() == std::size_t(units)) {
                warm_sub.resize(nh);
                for (std::size_t c = 0; c < nh; ++c)
                    warm_sub[c] = scale * warm_start->matrices[std::size_t(h.indices[c])](block, block);
            }
            std::vector<CMat> dual_sub;
            double rho = state ? state->rho : 0.0;
            if (state && state->dual.size() == nh) {
                dual_sub.resize(nh);
                for (std::size_t c = 0; c < nh; ++c) dual_sub[c] = state->dual[c](block, block);
            }
            auto sol = admm_block(sub, h, units, lam, cfg, warm_sub.empty() ? nullptr : &warm_sub, &dual_sub, &rho);
            if (state) {
                if (state->dual.size() != nh) state->dual.assign(nh, CMat::Zero(p, p));
                for (std::size_t c = 0; c < nh; ++c) state->dual[c](block, block) = dual_sub[c];
                state->rho = rho;
            }
            out.iterations = std::max(out.iterations, sol.iterations);
            out.converged = out.converged && sol.converged;
            for (std::size_t c = 0; c < nh; ++c) half[c](block, block) = sol.half[c];
        }
        for (auto& m : half) m /= scale;
    }
    for (std::size_t c = 0; c < nh; ++c)
        if (is_self_mirrored(h.indices[c], units)) half[c] = half[c].real().cast<cplx>();
    out.matrices = reflect_full(half, h, units);
    return out;
}

} // namespace

PrecisionSet joint_glasso(const std::vector<CMat>& eta, double lambda, const AdmmConfig& cfg,
                          const PrecisionSet* warm_start) {
    check_eta(eta);
    return joint_glasso_impl(eta, lambda, cfg, warm_start, nullptr);
}

double aic_degrees_of_freedom(Eigen::Index p, Eigen::Index units, int bandwidth, int nonzero_groups) {
    return double(units) / (2.0 * double(bandwidth)) * (double(p) + 2.0 * double(nonzero_groups));
}

AicSelection aic_select(const std::vector<CMat>& eta, std::vector<double> lambdas, int bandwidth,
                        const AdmmConfig& cfg) {
    check_eta(eta);
    if (lambdas.empty()) throw Error(ErrorKind::invalid_input, "empty lambda grid");
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
    const auto units = Eigen::Index(eta.size());
    const auto p = eta.front().rows();

    AicSelection out;
    double best = std::numeric_limits<double>::infinity();
    std::optional<PrecisionSet> warm;
    PathState state;
    // Largest lambda first: each solution (and its dual state) warm-starts the next, denser one.
    for (double lambda : lambdas) {
        auto fit = joint_glasso_impl(eta, lambda, cfg, warm ? &*warm : nullptr, &state);
        double lik = 0.0;
        for (std::size_t j = 0; j < eta.size(); ++j)
            lik += (eta[j] * fit.matrices[j]).trace().real() - logdet_pd(fit.matrices[j]);
        const int nz = fit.nonzero_groups();
        const double aic = lik + 2.0 * aic_degrees_of_freedom(p, units, bandwidth, nz);
        out.lambdas.push_back(lambda);
        out.aic.push_back(aic);
        out.nonzero.push_back(nz);
        if (aic < best) {
            best = aic;
            out.lambda = lambda;
            out.precision = fit;
        }
        warm = std::move(fit);
    }
    return out;
}

PrecisionSet constrained_mle(const std::vector<CMat>& eta, const EdgeSet& edges_in, double tol, int max_sweeps) {
    check_eta(eta);
    const auto units = Eigen::Index(eta.size());
    const auto p = eta.front().rows();
    const auto edges = normalize_edges(edges_in);
    std::vector<std::vector<Eigen::Index>> nbrs(static_cast<std::size_t>(p));
    for (const auto& [a, b] : edges) {
        if (a < 0 || b >= p) throw Error(ErrorKind::invalid_input, "edge index out of range");
        nbrs[std::size_t(a)].push_back(b);
        nbrs[std::size_t(b)].push_back(a);
    }
    for (auto& n : nbrs) std::sort(n.begin(), n.end());

    const auto h = half_grid(units);
    PrecisionSet out;
    out.lambda = 0.0;
    std::vector<CMat> half(h.indices.size());
    for (std::size_t c = 0; c < h.indices.size(); ++c) {
        CMat s = hermitian_part(eta[std::size_t(h.indices[c])]);
        if (!is_pd(s)) {
            s += 1e-8 * std::max(average_trace(eta), 1e-300) * CMat::Identity(p, p);
            out.ridge_fallback = true;
        }
        CMat w = s;
        std::vector<CVec> beta(static_cast<std::size_t>(p));
        bool done = false;
        int sweep = 0;
        while (!done && sweep < max_sweeps) {
            ++sweep;
            double change = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                const auto& nb = nbrs[std::size_t(j)];
                CVec b = CVec::Zero(p);
                if (!nb.empty()) {
                    const auto m = Eigen::Index(nb.size());
                    CMat wnn(m, m);
                    CVec snj(m);
                    for (Eigen::Index x = 0; x < m; ++x) {
                        snj[x] = s(nb[std::size_t(x)], j);
                        for (Eigen::Index y = 0; y < m; ++y) wnn(x, y) = w(nb[std::size_t(x)], nb[std::size_t(y)]);
                    }
                    const CVec bn = wnn.llt().solve(snj);
                    for (Eigen::Index x = 0; x < m; ++x) b[nb[std::size_t(x)]] = bn[x];
                }
                // w12 = W11 beta over the rows other than j
                CVec w12 = w * b;
                for (Eigen::Index r = 0; r < p; ++r) {
                    if (r == j) continue;
                    change = std::max(change, std::abs(w12[r] - w(r, j)));
                    w(r, j) = w12[r];
                    w(j, r) = std::conj(w12[r]);
                }
                beta[std::size_t(j)] = std::move(b);
            }
            done = change < tol;
        }
        if (!done) out.converged = false;
        out.iterations = std::max(out.iterations, sweep);

        CMat theta = CMat::Zero(p, p);
        for (Eigen::Index j = 0; j < p; ++j) {
            const CVec& b = beta[std::size_t(j)];
            cplx wb{0.0, 0.0};
            for (Eigen::Index r = 0; r < p; ++r)
                if (r != j) wb += std::conj(w(r, j)) * b[r];
            const double t22 = 1.0 / (s(j, j).real() - wb.real());
            theta(j, j) = t22;
            for (Eigen::Index r = 0; r < p; ++r)
                if (r != j) theta(r, j) = -b[r] * t22;
        }
        theta = hermitian_part(theta);
        if (is_self_mirrored(h.indices[c], units)) theta = theta.real().cast<cplx>();
        half[c] = std::move(theta);
    }
    out.matrices = reflect_full(half, h, units);
    return out;
}

cplx partial_spectrum(const CMat& phi, int i1, int i2) {
    if (i1 == i2) throw Error(ErrorKind::invalid_input, "partial spectrum needs distinct indices");
    if (i1 < 0 || i2 < 0 || i1 >= phi.rows() || i2 >= phi.rows()) throw Error(ErrorKind::invalid_input, "index out of range");
    const cplx den = phi(i1, i1) * phi(i2, i2) - phi(i1, i2) * phi(i2, i1);
    if (!(std::abs(den) > 1e-300) || !std::isfinite(std::abs(den)))
        throw Error(ErrorKind::degenerate_precision, "zero denominator in partial spectrum");
    return -phi(i1, i2) / den;
}

PmiResult partial_mutual_info(const std::vector<PrecisionSet>& sets) {
    if (sets.empty()) throw Error(ErrorKind::invalid_input, "no precision sets supplied");
    const auto p = sets.front().dim();
    PmiResult out;
    out.pmi = Mat::Zero(p, p);
    for (const auto& set : sets)
        for (const auto& phi : set.matrices)
            for (Eigen::Index a = 0; a < p; ++a)
                for (Eigen::Index b = a + 1; b < p; ++b) {
                    double ratio = std::norm(phi(a, b)) / (phi(a, a).real() * phi(b, b).real());
                    if (!(ratio < 1.0 - 1e-12)) {
                        ratio = 1.0 - 1e-12;
                        out.clamped = true;
                    }
                    out.pmi(a, b) -= std::log1p(-ratio) / kTwoPi;
                }
    out.pmi = out.pmi.selfadjointView<Eigen::Upper>();
    out.pmi.diagonal().setZero();
    return out;
}

EdgeSet threshold_graph(const Mat& pmi, double tau) {
    if (tau < 0.0) throw Error(ErrorKind::invalid_input, "threshold must be nonnegative");
    EdgeSet out;
    for (Eigen::Index a = 0; a < pmi.rows(); ++a)
        for (Eigen::Index b = a + 1; b < pmi.cols(); ++b)
            if (pmi(a, b) > tau) out.emplace_back(int(a), int(b));
    return out;
}

double EdgeRecovery::precision() const {
    const int d = true_positive + false_positive;
    return d == 0 ? 1.0 : double(true_positive) / d;
}
double EdgeRecovery::recall() const {
    const int d = true_positive + false_negative;
    return d == 0 ? 1.0 : double(true_positive) / d;
}
double EdgeRecovery::f1() const {
    const int d = 2 * true_positive + false_positive + false_negative;
    return d == 0 ? 1.0 : 2.0 * true_positive / double(d);
}

EdgeRecovery compare_edges(const EdgeSet& estimated, const EdgeSet& truth) {
    const auto est = normalize_edges(estimated);
    const auto tru = normalize_edges(truth);
    EdgeRecovery r;
    const std::set<Edge> t(tru.begin(), tru.end());
    for (const auto& e : est) (t.count(e) ? r.true_positive : r.false_positive)++;
    r.false_negative = int(tru.size()) - r.true_positive;
    return r;
}

} // namespace gdfpca
