#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "gdfpca/funcdata.hpp"
#include "gdfpca/serialize.hpp"

namespace gdfpca {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    auto p = csv;
    p += ".json";
    return p;
}

} // namespace

long parse_index_field(std::string_view field, std::size_t line_no, const char* name) {
    long v = 0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": cannot parse " + name + " '" +
                                          std::string(field) + "'");
    return v;
}

double parse_value_field(std::string_view field, std::size_t line_no) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v))
        throw Error(ErrorKind::parse,
                    "line " + std::to_string(line_no) + ": non-numeric value '" + std::string(field) + "'");
    return v;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw Error(ErrorKind::internal, "double formatting failed");
    return std::string(buf, ptr);
}

MFTSObservations load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::invalid_input, "cannot open " + path.string());

    struct Cell {
        long i, j, z;
    };
    std::vector<Cell> cells;
    std::vector<double> values;
    long p = 0, units = 0, z_max = 0;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim(line);
        if (view.empty()) continue;
        const auto fields = split_fields(view);
        if (line_no == 1 && !fields.empty() && fields[0] == "series_id") continue;
        if (fields.size() != 4)
            throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected 4 fields, got " +
                                              std::to_string(fields.size()));
        const long i = parse_index_field(fields[0], line_no, "series_id");
        const long j = parse_index_field(fields[1], line_no, "time_unit");
        const long z = parse_index_field(fields[2], line_no, "grid_index");
        if (i < 1 || j < 1 || z < 1)
            throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": indices are 1-based");
        values.push_back(parse_value_field(fields[3], line_no));
        cells.push_back({i, j, z});
        p = std::max(p, i);
        units = std::max(units, j);
        z_max = std::max(z_max, z);
    }
    if (cells.empty()) throw Error(ErrorKind::missing_data, path.string() + " contains no observations");

    MFTSObservations obs;
    const auto side = sidecar_path(path);
    if (std::filesystem::exists(side)) {
        std::ifstream sin(side);
        const auto meta = nlohmann::json::parse(sin);
        if (meta.contains("grid")) {
            const auto pts = meta.at("grid").get<std::vector<double>>();
            if (long(pts.size()) != z_max)
                throw Error(ErrorKind::invalid_input, "sidecar grid length does not match grid_index range");
            obs.grid = TimeGrid(Eigen::Map<const Vec>(pts.data(), Eigen::Index(pts.size())));
        }
    }
    if (obs.grid.size() == 0) obs.grid = TimeGrid::uniform(z_max);

    std::vector<unsigned char> seen(std::size_t(p * units * z_max), 0);
    obs.values.assign(std::size_t(p), Mat::Zero(units, z_max));
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c];
        const auto flat = std::size_t(((cell.i - 1) * units + (cell.j - 1)) * z_max + (cell.z - 1));
        if (seen[flat])
            throw Error(ErrorKind::invalid_input, "duplicate cell (" + std::to_string(cell.i) + "," +
                                                      std::to_string(cell.j) + "," + std::to_string(cell.z) + ")");
        seen[flat] = 1;
        obs.values[std::size_t(cell.i - 1)](cell.j - 1, cell.z - 1) = values[c];
    }
    for (long i = 0; i < p; ++i)
        for (long j = 0; j < units; ++j)
            for (long z = 0; z < z_max; ++z)
                if (!seen[std::size_t((i * units + j) * z_max + z)])
                    throw Error(ErrorKind::missing_data, "missing cell (series " + std::to_string(i + 1) +
                                                             ", time unit " + std::to_string(j + 1) +
                                                             ", grid index " + std::to_string(z + 1) + ")");
    return obs;
}

void save_csv(const MFTSObservations& obs, const std::filesystem::path& path) {
    obs.validate();
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::invalid_input, "cannot write " + path.string());
    out << "series_id,time_unit,grid_index,value\n";
    for (std::size_t i = 0; i < obs.values.size(); ++i) {
        const auto& m = obs.values[i];
        for (Eigen::Index j = 0; j < m.rows(); ++j)
            for (Eigen::Index z = 0; z < m.cols(); ++z)
                out << i + 1 << ',' << j + 1 << ',' << z + 1 << ',' << format_double(m(j, z)) << '\n';
    }
    nlohmann::json meta;
    meta["p"] = obs.values.size();
    meta["J"] = num_units(obs.values);
    meta["Z"] = obs.grid.size();
    meta["grid"] = std::vector<double>(obs.grid.points().data(), obs.grid.points().data() + obs.grid.size());
    std::ofstream(sidecar_path(path)) << meta.dump(2) << '\n';
}

} // namespace gdfpca
