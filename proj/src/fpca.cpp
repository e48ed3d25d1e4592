#include "gdfpca/fpca.hpp"

#include <algorithm>
#include <numeric>

namespace gdfpca {

namespace {

struct MethodName {
    Method method;
    const char* name;
};

constexpr MethodName kNames[] = {
    {Method::SFPCA, "SFPCA"},     {Method::WSFPCA, "WSFPCA"}, {Method::GSFPCA, "GSFPCA"},
    {Method::KG_SFPCA, "KG_SFPCA"}, {Method::DFPCA, "DFPCA"},   {Method::WDFPCA, "WDFPCA"},
    {Method::GDFPCA, "GDFPCA"},   {Method::KG_DFPCA, "KG_DFPCA"},
};

void fit_model(Method method, const Panel& y, const Panel& centered, const Mat& means, const Vec& noise_var,
               const TimeGrid& grid, int bandwidth, const FitConfig& cfg, ComponentModel& model,
               std::vector<std::string>& warnings) {
    const auto& tr = cfg.truncation;
    const auto units = num_units(centered);
    const int z = int(grid.size());
    const int cap = tr.k_max > 0 ? std::min(tr.k_max, z) : z;
    EigenSystem es;
    if (is_dynamic(method)) {
        const auto kernel = pooled_spectral_kernel(centered, bandwidth);
        std::vector<Vec> spectrum;
        spectrum.reserve(kernel.kernels.size());
        for (const auto& f : kernel.kernels) spectrum.push_back(eigendecompose_kernel(f, grid, cap).values);
        model.k = tr.fixed_k > 0 ? std::min(tr.fixed_k, cap) : select_K(spectrum, tr.fve_threshold, cap);
        es = align_phases(raw_eigensystem(kernel, grid, model.k));
        for (const auto& w : es.warnings) warnings.push_back(w);
        model.eigenvalues = es.values;
        const int l_max = tr.l_max >= 0 ? tr.l_max : default_max_lag(units);
        model.filters = compute_filters(es, l_max, tr.filter_energy_threshold);
        model.scores = integrate_scores(centered, model.filters);
    } else {
        const auto basis = static_eigenbasis(centered, grid, cap);
        model.eigenvalues = {basis.eigenvalues};
        const int avail = int(basis.basis.cols());
        model.k = tr.fixed_k > 0 ? std::min(tr.fixed_k, avail) : std::min(avail, select_K(basis.eigenvalues, tr.fve_threshold, cap));
        const Mat kept = basis.basis.leftCols(model.k);
        model.filters = FunctionalFilterSet::from_basis(kept, grid);
        model.scores = integrate_scores(centered, model.filters);
        if (uses_precision(method)) es = EigenSystem::constant(kept, basis.eigenvalues, grid, units);
    }
    if (!uses_precision(method)) return;

    model.eigenmatrices = eigenmatrices(centered, es, bandwidth);
    for (int k = 0; k < model.k; ++k) {
        const auto& eta = model.eigenmatrices.matrices[std::size_t(k)];
        if (needs_graph(method)) {
            model.precision.push_back(constrained_mle(eta, *cfg.graph));
            model.lambda.push_back(0.0);
        } else {
            auto grid_l = cfg.lambdas.empty() ? default_lambda_grid(eta, cfg.lambda_count) : cfg.lambdas;
            auto sel = aic_select(eta, std::move(grid_l), bandwidth, cfg.admm);
            model.lambda.push_back(sel.lambda);
            model.precision.push_back(std::move(sel.precision));
        }
        const auto& ps = model.precision.back();
        if (ps.ridge_fallback) warnings.push_back("component " + std::to_string(k + 1) + ": ridge added to singular eigen-matrix");
        if (!ps.converged) warnings.push_back("component " + std::to_string(k + 1) + ": precision solver hit its iteration limit");
    }
    ScoreProblem problem{y, means, noise_var, model.filters, model.precision};
    auto ex = extract_scores(problem, model.scores, cfg.extract);
    model.scores = std::move(ex.scores);
    model.extraction_iterations = ex.iterations;
    model.extraction_converged = ex.converged;
    if (!ex.converged) warnings.push_back("score extraction hit its iteration limit");
}

} // namespace

const char* to_string(Method m) {
    for (const auto& n : kNames)
        if (n.method == m) return n.name;
    return "?";
}

Method parse_method(const std::string& name) {
    std::string up(name);
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return char(std::toupper(c)); });
    if (up == "KG_GDFPCA") return Method::KG_DFPCA;
    if (up == "KG_GSFPCA") return Method::KG_SFPCA;
    for (const auto& n : kNames)
        if (up == n.name) return n.method;
    throw Error(ErrorKind::config, "unknown method '" + name + "'");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> all{Method::SFPCA,  Method::WSFPCA, Method::GSFPCA, Method::KG_SFPCA,
                                         Method::DFPCA,  Method::WDFPCA, Method::GDFPCA, Method::KG_DFPCA};
    return all;
}

bool is_dynamic(Method m) {
    return m == Method::DFPCA || m == Method::WDFPCA || m == Method::GDFPCA || m == Method::KG_DFPCA;
}
bool is_per_series(Method m) { return m == Method::SFPCA || m == Method::DFPCA; }
bool uses_precision(Method m) {
    return m == Method::GSFPCA || m == Method::KG_SFPCA || m == Method::GDFPCA || m == Method::KG_DFPCA;
}
bool needs_graph(Method m) { return m == Method::KG_SFPCA || m == Method::KG_DFPCA; }

void TruncationConfig::validate() const {
    if (!(fve_threshold > 0.0 && fve_threshold <= 1.0)) throw Error(ErrorKind::config, "FVE threshold must be in (0, 1]");
    if (!(filter_energy_threshold > 0.0 && filter_energy_threshold < 1.0))
        throw Error(ErrorKind::config, "filter energy threshold must be in (0, 1)");
    if (k_max < 0) throw Error(ErrorKind::config, "K_max must be nonnegative");
    if (fixed_k < 0) throw Error(ErrorKind::config, "fixed K must be nonnegative");
}

int select_K(const std::vector<Vec>& values, double fve_threshold, int k_max) {
    if (values.empty()) throw Error(ErrorKind::invalid_input, "no eigenvalues supplied");
    k_max = std::min<int>(k_max, int(values.front().size()));
    Vec per_k = Vec::Zero(k_max);
    for (const auto& v : values) per_k += v.head(k_max).cwiseMax(0.0);
    const double total = per_k.sum();
    if (!(total > 0.0)) return 1;
    double acc = 0.0;
    for (int k = 0; k < k_max; ++k) {
        acc += per_k[k];
        if (acc >= fve_threshold * total * (1.0 - 1e-12)) return k + 1;
    }
    return k_max;
}

int select_K(const Vec& eigenvalues, double fve_threshold, int k_max) {
    return select_K(std::vector<Vec>{eigenvalues}, fve_threshold, k_max);
}

Panel FitResult::reconstruction(int q) const {
    Panel out(static_cast<std::size_t>(num_series()));
    for (const auto& m : models) {
        Mat mu(Eigen::Index(m.series.size()), grid.size());
        for (std::size_t s = 0; s < m.series.size(); ++s) mu.row(Eigen::Index(s)) = means.row(m.series[s]);
        auto part = reconstruct(mu, m.filters, m.scores, q);
        for (std::size_t s = 0; s < m.series.size(); ++s) out[std::size_t(m.series[s])] = std::move(part[s]);
    }
    return out;
}

FitResult fit(Method method, const MFTSObservations& obs, const FitConfig& cfg) {
    obs.validate();
    cfg.truncation.validate();
    if (needs_graph(method) && !cfg.graph)
        throw Error(ErrorKind::missing_graph, std::string(to_string(method)) + " needs a known edge set");
    const auto p = int(obs.values.size());
    if (cfg.graph)
        for (const auto& [a, b] : *cfg.graph)
            if (a < 0 || b < 0 || a >= p || b >= p) throw Error(ErrorKind::invalid_input, "graph edge refers to a missing series");

    const auto smoothed = presmooth_panel(obs);
    FitResult out;
    out.method = method;
    out.grid = obs.grid;
    out.means = smoothed.means;
    out.noise_var = smoothed.noise_var;
    out.bandwidth = cfg.bandwidth > 0 ? cfg.bandwidth : default_bandwidth(num_units(obs.values));
    if (smoothed.noise_fallback) out.warnings.push_back("noise variance estimate hit its floor");

    if (is_per_series(method)) {
        for (int i = 0; i < p; ++i) {
            ComponentModel model;
            model.series = {i};
            fit_model(method, {obs.values[std::size_t(i)]}, {smoothed.centered[std::size_t(i)]}, smoothed.means.row(i),
                      smoothed.noise_var.segment(i, 1), obs.grid, out.bandwidth, cfg, model, out.warnings);
            out.models.push_back(std::move(model));
        }
    } else {
        ComponentModel model;
        model.series.resize(std::size_t(p));
        std::iota(model.series.begin(), model.series.end(), 0);
        fit_model(method, obs.values, smoothed.centered, smoothed.means, smoothed.noise_var, obs.grid, out.bandwidth,
                  cfg, model, out.warnings);
        out.models.push_back(std::move(model));
    }
    return out;
}

double nmse(const Panel& truth, const Panel& estimate, const TimeGrid& grid) {
    if (truth.size() != estimate.size()) throw Error(ErrorKind::invalid_input, "panels differ in series count");
    double num = 0.0, den = 0.0;
    const Vec& w = grid.weights();
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i].rows() != estimate[i].rows() || truth[i].cols() != estimate[i].cols())
            throw Error(ErrorKind::invalid_input, "panels differ in shape");
        num += ((truth[i] - estimate[i]).array().square().rowwise() * w.transpose().array()).sum();
        den += (truth[i].array().square().rowwise() * w.transpose().array()).sum();
    }
    if (!(den > 0.0)) throw Error(ErrorKind::invalid_input, "NMSE undefined for a zero truth");
    return 100.0 * num / den;
}

} // namespace gdfpca
