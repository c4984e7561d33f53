#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cstdio>
#include <sstream>
#include <string>

#include "nsc/errors.hpp"

namespace nsc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Largest singular value.  Cheap at the matrix sizes this library works with.
inline double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() == 1 || m.cols() == 1) return m.norm();
    return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

/// Spectral radius (largest |eigenvalue|) of a square matrix.
inline double spectral_radius(const Matrix& m) {
    if (m.rows() != m.cols())
        throw DimensionError("spectral_radius: matrix must be square");
    if (m.rows() == 1) return std::abs(m(0, 0));
    return m.eigenvalues().cwiseAbs().maxCoeff();
}

/// Flatten a matrix row-major into a vector.  Decision variables that are
/// matrices (feedback gains) travel through projections in this layout.
inline Vector flatten_rm(const Matrix& m) {
    Vector v(m.size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) v(k++) = m(i, j);
    return v;
}

/// Inverse of flatten_rm.
inline Matrix unflatten_rm(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols)
        throw DimensionError("unflatten_rm: size " + std::to_string(v.size()) +
                             " does not fold into " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    Matrix m(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v(k++);
    return m;
}

/// Format a double with 17 significant digits (round-trip exact for IEEE754).
inline std::string fmt_g17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
}

/// Compact human-readable rendering of a vector, for error messages.
inline std::string to_string(const Vector& v) {
    std::ostringstream os;
    os << "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        os << v(i);
    }
    os << "]";
    return os.str();
}

} // namespace nsc
