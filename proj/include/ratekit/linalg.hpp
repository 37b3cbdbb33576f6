#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "ratekit/errors.hpp"

namespace ratekit {

namespace detail {

/// Names the columns a column-pivoted QR leaves beyond the numerical rank.
inline std::string collinear_column_names(const Eigen::MatrixXd& a,
                                          const std::vector<std::string>& names) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    const auto perm = qr.colsPermutation().indices();
    std::string out;
    for (Eigen::Index i = rank; i < a.cols(); ++i) {
        if (!out.empty()) out += ", ";
        const Eigen::Index col = perm(i);
        out += (col < static_cast<Eigen::Index>(names.size()))
                   ? names[static_cast<std::size_t>(col)]
                   : ("column " + std::to_string(col));
    }
    return out.empty() ? "(none identified)" : out;
}

} // namespace detail

/// Solves the symmetric positive-definite system A x = b by LDLT, checking
/// the pivots against 1e-12 times the largest pivot. Near-singular systems
/// raise a RankError naming the collinear columns.
inline Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                 const std::vector<std::string>& column_names,
                                 const char* context) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    const Eigen::VectorXd d = ldlt.vectorD();
    const double max_pivot = d.cwiseAbs().maxCoeff();
    if (!(max_pivot > 0.0) || d.minCoeff() <= 1e-12 * max_pivot || ldlt.info() != Eigen::Success)
        throw RankError(std::string(context) + ": singular normal equations; collinear columns: " +
                        detail::collinear_column_names(a, column_names));
    return ldlt.solve(b);
}

/// Inverse of a symmetric positive-definite matrix with the same pivot check.
inline Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& a,
                                  const std::vector<std::string>& column_names,
                                  const char* context) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    const Eigen::VectorXd d = ldlt.vectorD();
    const double max_pivot = d.cwiseAbs().maxCoeff();
    if (!(max_pivot > 0.0) || d.minCoeff() <= 1e-12 * max_pivot || ldlt.info() != Eigen::Success)
        throw RankError(std::string(context) + ": singular matrix; collinear columns: " +
                        detail::collinear_column_names(a, column_names));
    return ldlt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
}

} // namespace ratekit
