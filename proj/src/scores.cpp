#include "gdfpca/scores.hpp"

#include <cmath>

namespace gdfpca {

namespace {

void check_panel(const Panel& panel, const TimeGrid& grid) {
    if (panel.empty()) throw Error(ErrorKind::invalid_input, "empty panel");
    for (const auto& m : panel)
        if (m.cols() != grid.size() || m.rows() != panel.front().rows())
            throw Error(ErrorKind::invalid_input, "panel and filter grids do not match");
}

// out_k(i, j + l - first) += scale_i * <panel_i(j), phi_kl>, either quadrature or plain sums.
void accumulate_adjoint(const Panel& panel, const FunctionalFilterSet& filters, bool quadrature, const Vec* scale,
                        ScoreArray& out) {
    const auto units = num_units(panel);
    for (int k = 0; k < filters.num_components(); ++k) {
        const auto& comp = filters.components[std::size_t(k)];
        auto& dst = out.values[std::size_t(k)];
        const int first = out.first[std::size_t(k)];
        for (int l = comp.lag_lo; l <= comp.lag_hi; ++l) {
            Vec phi = comp.filter(l);
            if (quadrature) phi = phi.cwiseProduct(filters.grid.weights());
            const int off = 1 + l - first;  // column of time unit j = 1
            for (std::size_t i = 0; i < panel.size(); ++i) {
                const Vec proj = panel[i] * phi;
                const double s = scale ? (*scale)[Eigen::Index(i)] : 1.0;
                dst.row(Eigen::Index(i)).segment(off, units) += s * proj.transpose();
            }
        }
    }
}

double dot(const ScoreArray& a, const ScoreArray& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) s += a.values[k].cwiseProduct(b.values[k]).sum();
    return s;
}

void axpy(double t, const ScoreArray& x, ScoreArray& y) {
    for (std::size_t k = 0; k < x.values.size(); ++k) y.values[k] += t * x.values[k];
}

void scale_add(double beta, ScoreArray& d, const ScoreArray& g) {
    for (std::size_t k = 0; k < d.values.size(); ++k) d.values[k] = g.values[k] + beta * d.values[k];
}

} // namespace

ScoreArray ScoreArray::zeros(const FunctionalFilterSet& filters, Eigen::Index p, Eigen::Index units) {
    ScoreArray s;
    for (const auto& c : filters.components) {
        s.values.push_back(Mat::Zero(p, units + c.lag_hi - c.lag_lo));
        s.first.push_back(1 + c.lag_lo);
    }
    return s;
}

ScoreArray integrate_scores(const Panel& centered, const FunctionalFilterSet& filters) {
    check_panel(centered, filters.grid);
    auto out = ScoreArray::zeros(filters, Eigen::Index(centered.size()), num_units(centered));
    accumulate_adjoint(centered, filters, true, nullptr, out);
    return out;
}

ScoreArray static_scores(const Panel& centered, const StaticEigenbasis& basis, const TimeGrid& grid) {
    return integrate_scores(centered, FunctionalFilterSet::from_basis(basis.basis, grid));
}

Panel reconstruct(const Mat& means, const FunctionalFilterSet& filters, const ScoreArray& scores, int q) {
    const auto p = scores.num_series();
    const auto z = filters.grid.size();
    const int kq = q < 0 ? filters.num_components() : std::min(q, filters.num_components());
    if (scores.num_components() < kq) throw Error(ErrorKind::invalid_input, "fewer score components than filters");
    Eigen::Index units = -1;
    for (int k = 0; k < kq; ++k) {
        const auto& c = filters.components[std::size_t(k)];
        const auto u = scores.values[std::size_t(k)].cols() - (c.lag_hi - c.lag_lo);
        if (units >= 0 && u != units) throw Error(ErrorKind::invalid_input, "score lengths disagree");
        units = u;
    }
    if (units < 0) {
        if (scores.values.empty()) throw Error(ErrorKind::invalid_input, "no scores to reconstruct from");
        const auto& c = filters.components.front();
        units = scores.values.front().cols() - (c.lag_hi - c.lag_lo);
    }
    if (means.size() != 0 && (means.rows() != p || means.cols() != z))
        throw Error(ErrorKind::invalid_input, "mean curves do not match scores");

    Panel out(std::size_t(p), Mat::Zero(units, z));
    for (Eigen::Index i = 0; i < p; ++i) {
        auto& x = out[std::size_t(i)];
        if (means.size() != 0) x.rowwise() += means.row(i);
        for (int k = 0; k < kq; ++k) {
            const auto& c = filters.components[std::size_t(k)];
            const auto& xi = scores.values[std::size_t(k)];
            const int first = scores.first[std::size_t(k)];
            for (int l = c.lag_lo; l <= c.lag_hi; ++l)
                x.noalias() += xi.row(i).segment(1 + l - first, units).transpose() * c.filter(l).transpose();
        }
    }
    return out;
}

CMat whittle_dft(Eigen::Index length, Eigen::Index units) {
    CMat r(length, units);
    const double norm = 1.0 / std::sqrt(kTwoPi * double(length));
    for (Eigen::Index m = 0; m < length; ++m)
        for (Eigen::Index j = 0; j < units; ++j) {
            // reduce (m+1)(j+1) mod J exactly before forming the angle
            const auto e = ((m + 1) % units) * ((j + 1) % units) % units;
            r(m, j) = std::polar(norm, -kTwoPi * double(e) / double(units));
        }
    return r;
}

WhittleTerm::WhittleTerm(const PrecisionSet& precision, Eigen::Index length)
    : phi_(precision.matrices), dft_(whittle_dft(length, precision.units())) {
    for (const auto& m : phi_) {
        const CMat h = 0.5 * (m + m.adjoint());
        Eigen::LLT<CMat> llt(h);
        if (llt.info() != Eigen::Success) throw Error(ErrorKind::invalid_input, "precision matrix is not positive definite");
        double s = 0.0;
        for (Eigen::Index i = 0; i < h.rows(); ++i) s += std::log(llt.matrixL()(i, i).real());
        logdet_sum_ += 2.0 * s;
    }
}

double WhittleTerm::value(const Mat& xi, Mat* gradient) const {
    if (xi.cols() != dft_.rows() || (!phi_.empty() && xi.rows() != phi_.front().rows()))
        throw Error(ErrorKind::invalid_input, "score matrix does not match the Whittle term");
    const CMat tx = xi.cast<cplx>() * dft_;  // p x J
    CMat g(tx.rows(), tx.cols());
    double quad = 0.0;
    for (std::size_t j = 0; j < phi_.size(); ++j) {
        g.col(Eigen::Index(j)) = phi_[j] * tx.col(Eigen::Index(j));
        quad += tx.col(Eigen::Index(j)).dot(g.col(Eigen::Index(j))).real();
    }
    if (gradient) *gradient = -(g * dft_.adjoint()).real();
    return -0.5 * (quad - logdet_sum_);
}

double WhittleTerm::curvature(const Mat& direction) const {
    const CMat td = direction.cast<cplx>() * dft_;
    double quad = 0.0;
    for (std::size_t j = 0; j < phi_.size(); ++j)
        quad += td.col(Eigen::Index(j)).dot(phi_[j] * td.col(Eigen::Index(j))).real();
    return -quad;
}

double whittle_loglik(const Mat& xi, const PrecisionSet& precision) {
    return WhittleTerm(precision, xi.cols()).value(xi);
}

ConditionalObjective::ConditionalObjective(ScoreProblem problem) : problem_(std::move(problem)) {
    const auto& pr = problem_;
    check_panel(pr.observations, pr.filters.grid);
    const auto p = Eigen::Index(pr.observations.size());
    if (pr.means.rows() != p || pr.means.cols() != pr.filters.grid.size())
        throw Error(ErrorKind::invalid_input, "mean curves do not match observations");
    if (pr.noise_var.size() != p) throw Error(ErrorKind::invalid_input, "noise variance length mismatch");
    for (Eigen::Index i = 0; i < p; ++i)
        if (!(pr.noise_var[i] > 0.0)) throw Error(ErrorKind::invalid_input, "noise variance must be positive");
    if (int(pr.precision.size()) != pr.filters.num_components())
        throw Error(ErrorKind::invalid_input, "need one precision set per component");
    const auto units = num_units(pr.observations);
    for (int k = 0; k < pr.filters.num_components(); ++k) {
        const auto& c = pr.filters.components[std::size_t(k)];
        const auto& ps = pr.precision[std::size_t(k)];
        if (ps.units() != units || ps.dim() != p) throw Error(ErrorKind::invalid_input, "precision set shape mismatch");
        whittle_.emplace_back(ps, units + c.lag_hi - c.lag_lo);
    }
}

double ConditionalObjective::value(const ScoreArray& xi, ScoreArray* gradient) const {
    const auto& pr = problem_;
    const auto recon = reconstruct(pr.means, pr.filters, xi);
    Panel resid(pr.observations.size());
    double data = 0.0;
    Vec inv_var = pr.noise_var.cwiseInverse();
    for (std::size_t i = 0; i < resid.size(); ++i) {
        resid[i] = pr.observations[i] - recon[i];
        data -= 0.5 * inv_var[Eigen::Index(i)] * resid[i].squaredNorm();
    }
    double prior = 0.0;
    if (gradient) {
        *gradient = ScoreArray::zeros(pr.filters, xi.num_series(), num_units(pr.observations));
        accumulate_adjoint(resid, pr.filters, false, &inv_var, *gradient);
    }
    for (std::size_t k = 0; k < whittle_.size(); ++k) {
        Mat g;
        prior += whittle_[k].value(xi.values[k], gradient ? &g : nullptr);
        if (gradient) gradient->values[k] += g;
    }
    return data + prior;
}

double ConditionalObjective::curvature(const ScoreArray& d) const {
    const auto& pr = problem_;
    const auto rd = reconstruct(Mat(), pr.filters, d);
    double c = 0.0;
    for (std::size_t i = 0; i < rd.size(); ++i) c -= rd[i].squaredNorm() / pr.noise_var[Eigen::Index(i)];
    for (std::size_t k = 0; k < whittle_.size(); ++k) c += whittle_[k].curvature(d.values[k]);
    return c;
}

double conditional_objective(const ScoreProblem& problem, const ScoreArray& xi, ScoreArray* gradient) {
    return ConditionalObjective(problem).value(xi, gradient);
}

ExtractionResult extract_scores(const ScoreProblem& problem, const ScoreArray& init, const ExtractOptions& opt) {
    const ConditionalObjective obj(problem);
    ExtractionResult out;
    out.scores = init;
    ScoreArray g;
    double f = obj.value(out.scores, &g);
    ScoreArray d = g;
    double gg = dot(g, g);
    const double gg0 = gg;
    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        out.iterations = iter;
        if (gg == 0.0) {
            out.converged = true;
            break;
        }
        double gd = dot(g, d);
        if (gd <= 0.0) {  // restart along the gradient
            d = g;
            gd = gg;
        }
        const double curv = obj.curvature(d);
        if (!(curv < 0.0)) {
            out.converged = true;  // flat along d: nothing to gain
            break;
        }
        const double t = -gd / curv;
        axpy(t, d, out.scores);
        ScoreArray g_new;
        const double f_new = obj.value(out.scores, &g_new);
        if (f_new < f - 1e-10 * std::max(1.0, std::abs(f)))
            throw Error(ErrorKind::internal, "score ascent decreased the objective");
        f = f_new;
        // Polak-Ribiere coefficient, clipped at zero
        double num = 0.0;
        for (std::size_t k = 0; k < g.values.size(); ++k)
            num += g_new.values[k].cwiseProduct(g_new.values[k] - g.values[k]).sum();
        const double beta = std::max(0.0, num / gg);
        g = std::move(g_new);
        gg = dot(g, g);
        scale_add(beta, d, g);
        if (gg <= opt.rel_tol * opt.rel_tol * std::max(1.0, gg0)) {
            out.converged = true;
            break;
        }
    }
    out.objective = f;
    return out;
}

} // namespace gdfpca
