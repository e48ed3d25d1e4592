#include "gdfpca/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace gdfpca {

namespace {

// cos/sin with exact zeros at integer multiples of pi so that kernels at
// theta = pi and theta = 2 pi come out exactly real.
std::pair<double, double> unit_phase(double angle) {
    const double turns = angle / std::numbers::pi;
    if (std::abs(turns - std::round(turns)) < 1e-12) {
        const long n = std::lround(turns);
        return {n % 2 == 0 ? 1.0 : -1.0, 0.0};
    }
    return {std::cos(angle), std::sin(angle)};
}

// Makes a real eigenvector's sign deterministic: <v, 1> >= 0, falling back to
// the first coordinate whose magnitude is not negligible.
void orient_real(Eigen::Ref<Vec> v, const TimeGrid& grid) {
    const double mass = (grid.weights().array() * v.array()).sum();
    if (std::abs(mass) > 1e-6) {
        if (mass < 0) v = -v;
        return;
    }
    for (Eigen::Index z = 0; z < v.size(); ++z) {
        if (std::abs(v[z]) > 1e-8) {
            if (v[z] < 0) v = -v;
            return;
        }
    }
}

} // namespace

int default_bandwidth(Eigen::Index units) {
    return std::max(1, int(std::floor(std::pow(double(units), 0.4))));
}

int default_max_lag(Eigen::Index units) { return std::max(0, int(units / 4)); }

Mat pooled_autocov(const Panel& centered, int lag) {
    const auto units = num_units(centered);
    const int g = std::abs(lag);
    if (g >= units) throw Error(ErrorKind::invalid_lag, "lag " + std::to_string(lag) + " requires |g| < J");
    const auto z = num_points(centered);
    Mat acc = Mat::Zero(z, z);
    for (const auto& e : centered)
        acc.noalias() += e.bottomRows(units - g).transpose() * e.topRows(units - g);
    acc /= double(units);
    if (lag < 0) return acc.transpose();
    return acc;
}

CMat lag_window_kernel(const std::vector<Mat>& autocovs, int bandwidth, double theta) {
    if (bandwidth < 1) throw Error(ErrorKind::invalid_input, "bandwidth must be positive");
    if (autocovs.empty()) throw Error(ErrorKind::invalid_input, "no autocovariances supplied");
    const int lags = std::min<int>(bandwidth, int(autocovs.size()));
    Mat re = autocovs[0];
    Mat im = Mat::Zero(re.rows(), re.cols());
    for (int g = 1; g < lags; ++g) {
        const double w = 1.0 - double(g) / double(bandwidth);
        const auto [c, s] = unit_phase(g * theta);
        re += w * c * (autocovs[g] + autocovs[g].transpose());
        if (s != 0.0) im += w * s * (autocovs[g] - autocovs[g].transpose());
    }
    CMat out(re.rows(), re.cols());
    out.real() = re / kTwoPi;
    out.imag() = im / kTwoPi;
    return out;
}

PooledSpectralKernel pooled_spectral_kernel(const Panel& centered, int bandwidth) {
    const auto units = num_units(centered);
    const FreqGrid freqs(units);
    const int lags = std::min<int>(bandwidth, int(units));
    std::vector<Mat> autocovs;
    autocovs.reserve(std::size_t(lags));
    for (int g = 0; g < lags; ++g) autocovs.push_back(pooled_autocov(centered, g));

    PooledSpectralKernel out;
    out.kernels.resize(std::size_t(units));
    for (auto idx : freqs.half_indices()) out.kernels[std::size_t(idx)] = lag_window_kernel(autocovs, bandwidth, freqs.theta(idx));
    for (Eigen::Index idx = 0; idx < units; ++idx) {
        auto m = freqs.mirror(idx);
        if (out.kernels[std::size_t(idx)].size() == 0) out.kernels[std::size_t(idx)] = out.kernels[std::size_t(m)].conjugate();
    }
    return out;
}

EigenPairs eigendecompose_kernel(const CMat& kernel, const TimeGrid& grid, int k) {
    const auto z = grid.size();
    if (kernel.rows() != z || kernel.cols() != z)
        throw Error(ErrorKind::invalid_input, "kernel size does not match grid");
    const double scale = std::max(1.0, kernel.cwiseAbs().maxCoeff());
    if ((kernel - kernel.adjoint()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw Error(ErrorKind::invalid_input, "kernel is not Hermitian");
    k = std::clamp<int>(k, 1, int(z));

    const Vec root = grid.weights().cwiseSqrt();
    const Vec inv_root = root.cwiseInverse();
    EigenPairs out;
    out.values.resize(k);
    out.vectors.resize(z, k);

    if (kernel.imag().cwiseAbs().maxCoeff() == 0.0) {
        Mat m = root.asDiagonal() * kernel.real() * root.asDiagonal();
        m = 0.5 * (m + m.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(m);
        for (int c = 0; c < k; ++c) {
            const auto src = z - 1 - c;
            out.values[c] = std::max(0.0, es.eigenvalues()[src]);
            Vec v = inv_root.cwiseProduct(es.eigenvectors().col(src));
            orient_real(v, grid);
            out.vectors.col(c) = v.cast<cplx>();
        }
        return out;
    }

    CMat m = root.asDiagonal() * kernel * root.asDiagonal();
    m = 0.5 * (m + m.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMat> es(m);
    for (int c = 0; c < k; ++c) {
        const auto src = z - 1 - c;
        out.values[c] = std::max(0.0, es.eigenvalues()[src]);
        out.vectors.col(c) = inv_root.cast<cplx>().cwiseProduct(es.eigenvectors().col(src));
    }
    return out;
}

EigenSystem EigenSystem::constant(const Mat& basis, const Vec& eigenvalues, const TimeGrid& grid, Eigen::Index units) {
    EigenSystem es;
    es.grid = grid;
    es.units = units;
    const CMat vecs = basis.cast<cplx>();
    const Vec vals = eigenvalues.head(basis.cols());
    es.values.assign(std::size_t(units), vals);
    es.vectors.assign(std::size_t(units), vecs);
    return es;
}

EigenSystem raw_eigensystem(const PooledSpectralKernel& kernel, const TimeGrid& grid, int k) {
    const auto units = Eigen::Index(kernel.kernels.size());
    const FreqGrid freqs(units);
    EigenSystem es;
    es.grid = grid;
    es.units = units;
    es.values.resize(std::size_t(units));
    es.vectors.resize(std::size_t(units));
    for (auto idx : freqs.half_indices()) {
        auto pairs = eigendecompose_kernel(kernel.kernels[std::size_t(idx)], grid, k);
        es.values[std::size_t(idx)] = std::move(pairs.values);
        es.vectors[std::size_t(idx)] = std::move(pairs.vectors);
    }
    return es;
}

EigenSystem align_phases(EigenSystem es) {
    const FreqGrid freqs(es.units);
    const auto& w = es.grid.weights();
    const int k_count = es.num_components();

    // Chain: theta_J (= 0), theta_1, ..., theta_floor(J/2).
    std::vector<Eigen::Index> chain{es.units - 1};
    for (Eigen::Index idx = 0; idx < es.units / 2; ++idx) chain.push_back(idx);

    for (auto idx : chain)
        if (es.vectors[std::size_t(idx)].size() == 0)
            throw Error(ErrorKind::invalid_input, "eigensystem is missing a half-grid frequency");

    {
        auto& v0 = es.vectors[std::size_t(chain.front())];
        for (int k = 0; k < k_count; ++k) {
            // theta = 0 kernel is real: rotate to the real axis, then orient.
            auto col = v0.col(k);
            Eigen::Index arg = 0;
            col.cwiseAbs().maxCoeff(&arg);
            const cplx ph = col[arg] / std::abs(col[arg]);
            Vec re = (col * std::conj(ph)).real();
            orient_real(re, es.grid);
            col = re.cast<cplx>();
        }
    }

    for (std::size_t c = 1; c < chain.size(); ++c) {
        const auto prev = chain[c - 1];
        const auto cur = chain[c];
        for (int k = 0; k < k_count; ++k) {
            auto col = es.vectors[std::size_t(cur)].col(k);
            const auto pcol = es.vectors[std::size_t(prev)].col(k);
            cplx overlap{0.0, 0.0};
            for (Eigen::Index z = 0; z < col.size(); ++z) overlap += w[z] * std::conj(pcol[z]) * col[z];
            if (freqs.self_mirrored(cur)) {
                // theta = pi: eigenvector must stay real; only the sign is free.
                Eigen::Index arg = 0;
                col.cwiseAbs().maxCoeff(&arg);
                const cplx ph = col[arg] / std::abs(col[arg]);
                col = ((col * std::conj(ph)).real()).cast<cplx>();
                overlap = overlap * std::conj(ph);
                if (overlap.real() < 0) col = -col;
            } else if (std::abs(overlap) > 0.0) {
                col *= std::conj(overlap) / std::abs(overlap);
            }
            if (std::abs(overlap) < 1e-6)
                es.warnings.push_back("component " + std::to_string(k + 1) + ": near-zero eigenvector overlap at theta_" +
                                      std::to_string(cur + 1) + " (eigenvalue crossing suspected)");
        }
    }

    for (Eigen::Index idx = 0; idx < es.units; ++idx) {
        const auto m = freqs.mirror(idx);
        if (idx == m || (idx < es.units / 2) || idx == es.units - 1) continue;
        es.vectors[std::size_t(idx)] = es.vectors[std::size_t(m)].conjugate();
        es.values[std::size_t(idx)] = es.values[std::size_t(m)];
    }
    return es;
}

EigenSystem dynamic_eigensystem(const Panel& centered, const TimeGrid& grid, int bandwidth, int k) {
    return align_phases(raw_eigensystem(pooled_spectral_kernel(centered, bandwidth), grid, k));
}

// ---------------------------------------------------------------------------

double FunctionalFilterSet::energy(int k) const {
    const auto& c = components.at(std::size_t(k));
    double e = 0.0;
    for (int l = c.lag_lo; l <= c.lag_hi; ++l) e += norm_squared(c.filter(l), grid);
    return e;
}

FunctionalFilterSet FunctionalFilterSet::first(int q) const {
    FunctionalFilterSet out;
    out.grid = grid;
    out.max_imag_residue = max_imag_residue;
    q = std::clamp(q, 0, num_components());
    out.components.assign(components.begin(), components.begin() + q);
    return out;
}

FunctionalFilterSet FunctionalFilterSet::from_basis(const Mat& basis, const TimeGrid& grid) {
    FunctionalFilterSet out;
    out.grid = grid;
    for (Eigen::Index k = 0; k < basis.cols(); ++k) out.components.push_back({0, 0, basis.col(k)});
    return out;
}

FunctionalFilterSet filter_bank(const EigenSystem& es, int l_max) {
    if (l_max < 0) throw Error(ErrorKind::invalid_input, "l_max must be nonnegative");
    const auto units = es.units;
    const FreqGrid freqs(units);
    const int hi = std::min<int>(l_max, int(units / 2));
    const int lo = -std::min<int>(l_max, int((units + 1) / 2) - 1);
    const auto z = es.grid.size();

    FunctionalFilterSet out;
    out.grid = es.grid;
    for (int k = 0; k < es.num_components(); ++k) {
        FilterComponent comp{lo, hi, Mat(z, hi - lo + 1)};
        for (int l = lo; l <= hi; ++l) {
            CVec acc = CVec::Zero(z);
            for (Eigen::Index idx = 0; idx < units; ++idx) {
                const auto [c, s] = unit_phase(double(l) * freqs.theta(idx));
                acc += es.vectors[std::size_t(idx)].col(k) * cplx(c, s);
            }
            acc /= double(units);
            const double residue = acc.imag().cwiseAbs().maxCoeff();
            out.max_imag_residue = std::max(out.max_imag_residue, residue);
            if (residue > 1e-4)
                throw Error(ErrorKind::phase_alignment, "filter imaginary residue " + std::to_string(residue) +
                                                            " at component " + std::to_string(k + 1) + ", lag " +
                                                            std::to_string(l));
            comp.filters.col(l - lo) = acc.real();
        }
        out.components.push_back(std::move(comp));
    }
    return out;
}

int select_lag(const FilterComponent& bank, const TimeGrid& grid, double tau) {
    double total = 0.0;
    for (int l = bank.lag_lo; l <= bank.lag_hi; ++l) total += norm_squared(bank.filter(l), grid);
    const int cap = std::max(-bank.lag_lo, bank.lag_hi);
    double acc = 0.0;
    for (int lag = 0; lag <= cap; ++lag) {
        if (lag <= bank.lag_hi) acc += norm_squared(bank.filter(lag), grid);
        if (lag > 0 && -lag >= bank.lag_lo) acc += norm_squared(bank.filter(-lag), grid);
        if (acc >= tau * total) return lag;
    }
    return cap;
}

FunctionalFilterSet compute_filters(const EigenSystem& es, int l_max, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::invalid_input, "filter energy threshold must be in (0,1)");
    auto bank = filter_bank(es, l_max);
    for (auto& comp : bank.components) {
        const int lk = select_lag(comp, bank.grid, tau);
        const int lo = std::max(comp.lag_lo, -lk);
        const int hi = std::min(comp.lag_hi, lk);
        Mat kept = comp.filters.middleCols(lo - comp.lag_lo, hi - lo + 1);
        comp = FilterComponent{lo, hi, std::move(kept)};
    }
    return bank;
}

// ---------------------------------------------------------------------------

EigenMatrixSet eigenmatrices(const Panel& centered, const EigenSystem& es, int bandwidth, bool clamp_psd) {
    const auto p = Eigen::Index(centered.size());
    const auto units = num_units(centered);
    if (units != es.units) throw Error(ErrorKind::invalid_input, "eigensystem and panel disagree on J");
    if (num_points(centered) != es.grid.size()) throw Error(ErrorKind::invalid_input, "grid mismatch");
    const FreqGrid freqs(units);
    const int k_count = es.num_components();
    const int lags = std::min<int>(bandwidth, int(units));
    const Vec& w = es.grid.weights();

    EigenMatrixSet out;
    out.matrices.assign(std::size_t(k_count), std::vector<CMat>(std::size_t(units)));
    for (auto idx : freqs.half_indices()) {
        const double theta = freqs.theta(idx);
        for (int k = 0; k < k_count; ++k) {
            const CVec& v = es.vectors[std::size_t(idx)].col(k);
            const Vec wr = w.cwiseProduct(v.real());
            const Vec wi = w.cwiseProduct(v.imag());
            CMat a(p, units);
            for (Eigen::Index i = 0; i < p; ++i) {
                a.row(i).real() = (centered[std::size_t(i)] * wr).transpose();
                a.row(i).imag() = -(centered[std::size_t(i)] * wi).transpose();
            }
            CMat eta = a * a.adjoint();
            for (int g = 1; g < lags; ++g) {
                const double weight = 1.0 - double(g) / double(bandwidth);
                const auto [c, s] = unit_phase(g * theta);
                const CMat fwd = a.rightCols(units - g) * a.leftCols(units - g).adjoint();
                eta += weight * (cplx(c, s) * fwd + cplx(c, -s) * fwd.adjoint());
            }
            eta /= kTwoPi * double(units);
            eta = (0.5 * (eta + eta.adjoint())).eval();
            if (freqs.self_mirrored(idx)) eta = eta.real().cast<cplx>();
            if (clamp_psd) {
                Eigen::SelfAdjointEigenSolver<CMat> sol(eta);
                if (sol.eigenvalues().minCoeff() < 0.0) {
                    eta = sol.eigenvectors() * sol.eigenvalues().cwiseMax(0.0).cast<cplx>().asDiagonal() *
                          sol.eigenvectors().adjoint();
                    eta = (0.5 * (eta + eta.adjoint())).eval();
                    if (freqs.self_mirrored(idx)) eta = eta.real().cast<cplx>();
                }
            }
            out.matrices[std::size_t(k)][std::size_t(idx)] = std::move(eta);
        }
    }
    for (int k = 0; k < k_count; ++k)
        for (Eigen::Index idx = 0; idx < units; ++idx)
            if (out.matrices[std::size_t(k)][std::size_t(idx)].size() == 0)
                out.matrices[std::size_t(k)][std::size_t(idx)] =
                    out.matrices[std::size_t(k)][std::size_t(freqs.mirror(idx))].conjugate();
    return out;
}

StaticEigenbasis static_eigenbasis(const Panel& centered, const TimeGrid& grid, int k) {
    const auto z = grid.size();
    if (num_points(centered) != z) throw Error(ErrorKind::invalid_input, "grid mismatch");
    k = std::clamp<int>(k, 1, int(z));
    const Mat c0 = pooled_autocov(centered, 0);
    const Vec root = grid.weights().cwiseSqrt();
    Mat m = root.asDiagonal() * c0 * root.asDiagonal();
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    StaticEigenbasis out;
    out.eigenvalues = es.eigenvalues().reverse().cwiseMax(0.0);
    out.basis.resize(z, k);
    for (int c = 0; c < k; ++c) {
        Vec v = root.cwiseInverse().cwiseProduct(es.eigenvectors().col(z - 1 - c));
        orient_real(v, grid);
        out.basis.col(c) = v;
    }
    return out;
}

} // namespace gdfpca
