#include "gdfpca/serialize.hpp"

#include <fstream>

namespace gdfpca {

using nlohmann::json;

json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat matrix_from_json(const json& j) {
    if (!j.is_array()) throw Error(ErrorKind::parse, "matrix must be an array of rows");
    const auto rows = Eigen::Index(j.size());
    const auto cols = rows == 0 ? Eigen::Index(0) : Eigen::Index(j.front().size());
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[std::size_t(r)];
        if (!row.is_array() || Eigen::Index(row.size()) != cols) throw Error(ErrorKind::parse, "ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[std::size_t(c)].get<double>();
    }
    return m;
}

json matrix_to_json(const CMat& m) { return json{{"re", matrix_to_json(Mat(m.real()))}, {"im", matrix_to_json(Mat(m.imag()))}}; }

CMat cmatrix_from_json(const json& j) {
    const Mat re = matrix_from_json(j.at("re"));
    const Mat im = matrix_from_json(j.at("im"));
    if (re.rows() != im.rows() || re.cols() != im.cols()) throw Error(ErrorKind::parse, "re/im shapes differ");
    CMat m(re.rows(), re.cols());
    m.real() = re;
    m.imag() = im;
    return m;
}

json edges_to_json(const EdgeSet& edges) {
    json arr = json::array();
    for (const auto& [a, b] : normalize_edges(edges)) arr.push_back({a, b});
    return json{{"edges", arr}};
}

EdgeSet edges_from_json(const json& j) {
    const json& arr = j.is_object() ? j.at("edges") : j;
    if (!arr.is_array()) throw Error(ErrorKind::parse, "edge list must be an array");
    EdgeSet out;
    for (const auto& e : arr) {
        if (!e.is_array() || e.size() != 2) throw Error(ErrorKind::parse, "edges are pairs [i1, i2]");
        out.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    return normalize_edges(out);
}

EdgeSet load_edges(const std::filesystem::path& path) { return edges_from_json(read_json(path)); }

json filters_to_json(const FunctionalFilterSet& filters) {
    json comps = json::array();
    for (const auto& c : filters.components)
        comps.push_back({{"lag_lo", c.lag_lo}, {"lag_hi", c.lag_hi}, {"filters", matrix_to_json(Mat(c.filters.transpose()))}});
    const Vec& t = filters.grid.points();
    return json{{"grid", std::vector<double>(t.data(), t.data() + t.size())},
                {"max_imag_residue", filters.max_imag_residue},
                {"components", comps}};
}

FunctionalFilterSet filters_from_json(const json& j) {
    FunctionalFilterSet out;
    const auto pts = j.at("grid").get<std::vector<double>>();
    out.grid = TimeGrid(Eigen::Map<const Vec>(pts.data(), Eigen::Index(pts.size())));
    out.max_imag_residue = j.value("max_imag_residue", 0.0);
    for (const auto& c : j.at("components")) {
        FilterComponent comp{c.at("lag_lo").get<int>(), c.at("lag_hi").get<int>(),
                             Mat(matrix_from_json(c.at("filters")).transpose())};
        if (comp.filters.cols() != comp.lag_count() || comp.filters.rows() != out.grid.size())
            throw Error(ErrorKind::parse, "filter matrix shape does not match its lag range");
        out.components.push_back(std::move(comp));
    }
    return out;
}

json precision_to_json(const std::vector<PrecisionSet>& sets) {
    json arr = json::array();
    for (const auto& s : sets) {
        json mats = json::array();
        for (const auto& m : s.matrices) mats.push_back(matrix_to_json(m));
        arr.push_back({{"lambda", s.lambda},
                       {"iterations", s.iterations},
                       {"converged", s.converged},
                       {"ridge_fallback", s.ridge_fallback},
                       {"matrices", mats}});
    }
    return json{{"components", arr}};
}

std::vector<PrecisionSet> precision_from_json(const json& j) {
    std::vector<PrecisionSet> out;
    for (const auto& c : j.at("components")) {
        PrecisionSet s;
        s.lambda = c.value("lambda", 0.0);
        s.iterations = c.value("iterations", 0);
        s.converged = c.value("converged", true);
        s.ridge_fallback = c.value("ridge_fallback", false);
        for (const auto& m : c.at("matrices")) s.matrices.push_back(cmatrix_from_json(m));
        out.push_back(std::move(s));
    }
    return out;
}

void save_scores_csv(const std::vector<ScoreArray>& arrays, const std::vector<std::vector<int>>& series,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::invalid_input, "cannot write " + path.string());
    out << "series_id,time_index,component,value\n";
    for (std::size_t a = 0; a < arrays.size(); ++a) {
        const auto& sc = arrays[a];
        for (Eigen::Index i = 0; i < sc.num_series(); ++i)
            for (int k = 0; k < sc.num_components(); ++k)
                for (int t = sc.first[std::size_t(k)]; t <= sc.last(k); ++t)
                    out << series[a][std::size_t(i)] + 1 << ',' << t << ',' << k + 1 << ','
                        << format_double(sc.at(int(i), t, k)) << '\n';
    }
}

void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::invalid_input, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::invalid_input, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, path.string() + ": " + e.what());
    }
}

json save_fit(const FitResult& fit, const std::filesystem::path& dir, const Panel* truth) {
    std::filesystem::create_directories(dir);
    json meta;
    meta["method"] = to_string(fit.method);
    meta["p"] = fit.num_series();
    meta["Z"] = fit.grid.size();
    meta["bandwidth"] = fit.bandwidth;
    meta["noise_var"] = std::vector<double>(fit.noise_var.data(), fit.noise_var.data() + fit.noise_var.size());
    meta["warnings"] = fit.warnings;
    json models = json::array();
    int k_max = 0;
    for (const auto& m : fit.models) {
        std::vector<int> lags;
        for (const auto& c : m.filters.components) lags.push_back(c.lag_hi);
        models.push_back({{"series", m.series},
                          {"K", m.k},
                          {"L", lags},
                          {"lambda", m.lambda},
                          {"extraction_iterations", m.extraction_iterations},
                          {"extraction_converged", m.extraction_converged}});
        k_max = std::max(k_max, m.k);
    }
    meta["models"] = models;

    MFTSObservations recon{fit.reconstruction(), fit.grid};
    save_csv(recon, dir / "reconstruction.csv");

    std::vector<ScoreArray> arrays;
    std::vector<std::vector<int>> series;
    json filters = json::array();
    json precision = json::array();
    for (const auto& m : fit.models) {
        arrays.push_back(m.scores);
        series.push_back(m.series);
        filters.push_back(filters_to_json(m.filters));
        if (!m.precision.empty()) precision.push_back(precision_to_json(m.precision));
    }
    save_scores_csv(arrays, series, dir / "scores.csv");
    write_json(json{{"models", filters}}, dir / "filters.json");
    if (uses_precision(fit.method)) write_json(json{{"models", precision}}, dir / "precision.json");

    if (truth) {
        json curve = json::array();
        for (int q = 1; q <= k_max; ++q) {
            const auto est = fit.reconstruction(q);
            curve.push_back({{"q", q}, {"nmse", nmse(*truth, est, fit.grid)}});
        }
        meta["nmse"] = curve;
    }
    write_json(meta, dir / "meta.json");
    return meta;
}

std::vector<PrecisionSet> load_precision(const std::filesystem::path& dir) {
    const auto path = dir / "precision.json";
    if (!std::filesystem::exists(path))
        throw Error(ErrorKind::invalid_input, dir.string() +
                                                  " has no precision sets; fit with GDFPCA, GSFPCA, KG_DFPCA or KG_SFPCA");
    const auto j = read_json(path);
    std::vector<PrecisionSet> out;
    for (const auto& m : j.at("models")) {
        auto sets = precision_from_json(m);
        for (auto& s : sets) out.push_back(std::move(s));
    }
    if (out.empty()) throw Error(ErrorKind::invalid_input, "precision.json holds no components");
    return out;
}

void save_truth(const GroundTruth& truth, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_csv(truth.observations, dir / "obs.csv");
    save_csv(MFTSObservations{truth.curves, truth.observations.grid}, dir / "truth.csv");
    write_json(edges_to_json(truth.graph), dir / "graph.json");
    const auto& c = truth.config;
    json meta{{"p", c.p},
              {"J", c.units},
              {"Z", c.resolved_grid_size()},
              {"K", c.k},
              {"L", c.effective_lag()},
              {"kappa", c.kappa},
              {"rho", c.rho},
              {"seed", c.seed},
              {"case", to_string(c.sim_case)},
              {"edges", truth.graph.size()},
              {"noise_var", std::vector<double>(truth.noise_var.data(), truth.noise_var.data() + truth.noise_var.size())}};
    json prec = json::array();
    for (const auto& m : truth.innovation_precision) prec.push_back(matrix_to_json(m));
    meta["innovation_precision"] = prec;
    write_json(meta, dir / "meta.json");
}

} // namespace gdfpca
