#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gdfpca {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

/// One J x Z matrix per series; row j holds the curve of time unit j on the grid.
using Panel = std::vector<Mat>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class ErrorKind {
    invalid_input,
    insufficient_data,
    missing_data,
    parse,
    invalid_lag,
    phase_alignment,
    degenerate_precision,
    missing_graph,
    config,
    numerical,
    internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::invalid_input: return "invalid input";
        case ErrorKind::insufficient_data: return "insufficient data";
        case ErrorKind::missing_data: return "missing data";
        case ErrorKind::parse: return "parse error";
        case ErrorKind::invalid_lag: return "invalid lag";
        case ErrorKind::phase_alignment: return "phase alignment failure";
        case ErrorKind::degenerate_precision: return "degenerate precision";
        case ErrorKind::missing_graph: return "missing graph";
        case ErrorKind::config: return "configuration error";
        case ErrorKind::numerical: return "numerical failure";
        case ErrorKind::internal: return "internal error";
    }
    return "error";
}

inline std::size_t num_series(const Panel& panel) { return panel.size(); }
inline Eigen::Index num_units(const Panel& panel) { return panel.empty() ? 0 : panel.front().rows(); }
inline Eigen::Index num_points(const Panel& panel) { return panel.empty() ? 0 : panel.front().cols(); }

} // namespace gdfpca
