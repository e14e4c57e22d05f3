#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "promptinv/error.hpp"
#include "promptinv/rng.hpp"

namespace promptinv {

// Standard Gaussian matrix, filled row by row from the stream.
inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

// Modified Gram-Schmidt with one re-orthogonalization pass. Column signs
// follow the input, so results are reproducible bit for bit.
inline Eigen::MatrixXd orthonormalize_columns(Eigen::MatrixXd m) {
  if (m.cols() > m.rows()) {
    throw ValidationError("orthonormalize: more columns (" + std::to_string(m.cols()) + ") than rows (" +
                          std::to_string(m.rows()) + ")");
  }
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < j; ++k) {
        m.col(j) -= m.col(k).dot(m.col(j)) * m.col(k);
      }
    }
    const double norm = m.col(j).norm();
    if (!(norm > 1e-12)) throw RuntimeFailure("orthonormalize: rank-deficient input");
    m.col(j) /= norm;
  }
  return m;
}

inline double orthonormality_error(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd gram = m.transpose() * m;
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

}  // namespace promptinv
