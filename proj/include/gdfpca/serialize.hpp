#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gdfpca/fpca.hpp"
#include "gdfpca/simulate.hpp"

namespace gdfpca {

long parse_index_field(std::string_view field, std::size_t line_no, const char* name);
double parse_value_field(std::string_view field, std::size_t line_no);
/// Shortest round-trip decimal form.
std::string format_double(double v);

nlohmann::json matrix_to_json(const Mat& m);
Mat matrix_from_json(const nlohmann::json& j);
/// {"re": [[...]], "im": [[...]]}
nlohmann::json matrix_to_json(const CMat& m);
CMat cmatrix_from_json(const nlohmann::json& j);

nlohmann::json edges_to_json(const EdgeSet& edges);
/// Accepts [[a, b], ...] or {"edges": [[a, b], ...]}, 0-based.
EdgeSet edges_from_json(const nlohmann::json& j);
EdgeSet load_edges(const std::filesystem::path& path);

nlohmann::json filters_to_json(const FunctionalFilterSet& filters);
FunctionalFilterSet filters_from_json(const nlohmann::json& j);

nlohmann::json precision_to_json(const std::vector<PrecisionSet>& sets);
std::vector<PrecisionSet> precision_from_json(const nlohmann::json& j);

/// series_id, time_index, component, value (series and component 1-based).
void save_scores_csv(const std::vector<ScoreArray>& arrays, const std::vector<std::vector<int>>& series,
                     const std::filesystem::path& path);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

/// Writes meta.json, reconstruction.csv, scores.csv, filters.json and, for graph
/// methods, precision.json into dir. When truth is given, NMSE(q) is recorded.
nlohmann::json save_fit(const FitResult& fit, const std::filesystem::path& dir, const Panel* truth = nullptr);

/// Precision sets of a fit directory; throws naming the methods that produce them.
std::vector<PrecisionSet> load_precision(const std::filesystem::path& dir);

/// obs.csv, truth.csv, graph.json, meta.json
void save_truth(const GroundTruth& truth, const std::filesystem::path& dir);

} // namespace gdfpca
