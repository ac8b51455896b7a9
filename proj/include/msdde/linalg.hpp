#pragma once

// Dense linear algebra shared by every module. Matrices and vectors are plain
// Eigen dynamic types; the exponential is Eigen's scaling-and-squaring Pade
// implementation behind a checked entry point.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <string>

#include "msdde/errors.hpp"

namespace msdde {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

inline void require_square(const Matrix& a, const char* what) {
    if (a.rows() != a.cols() || a.rows() < 1) {
        throw InvalidArgument(std::string(what) + ": expected a non-empty square matrix, got " +
                              std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
}

/// Induced 1-norm (max column sum).
inline double one_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    return a.cwiseAbs().colwise().sum().maxCoeff();
}

/// exp(A) by scaling and squaring with a diagonal Pade approximant whose degree
/// (3, 5, 7, 9 or 13) is picked from the 1-norm of A.
inline Matrix mat_exp(const Matrix& a) {
    require_square(a, "mat_exp");
    if (!all_finite(a)) throw InvalidArgument("mat_exp: matrix has non-finite entries");
    if (a.rows() == 1) {
        Matrix out(1, 1);
        out(0, 0) = std::exp(a(0, 0));
        return out;
    }
    return a.exp();
}

/// [A, B] = AB - BA.
inline Matrix lie_bracket(const Matrix& a, const Matrix& b) {
    require_square(a, "lie_bracket");
    require_square(b, "lie_bracket");
    if (a.rows() != b.rows()) {
        throw InvalidArgument("lie_bracket: dimension mismatch (" + std::to_string(a.rows()) +
                              " vs " + std::to_string(b.rows()) + ")");
    }
    // Both products are materialized so that [A,B] == -[B,A] bitwise.
    const Matrix ab = a * b;
    const Matrix ba = b * a;
    return ab - ba;
}

inline bool is_zero(const Matrix& a) { return a.size() == 0 || (a.array() == 0.0).all(); }

}  // namespace msdde
