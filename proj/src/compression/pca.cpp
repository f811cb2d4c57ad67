// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Eigenvalues>

#include "rasp_forge/compression/compression.hpp"
#include "rasp_forge/errors.hpp"
#include "rasp_forge/runtime/forward.hpp"

namespace rasp_forge::compression {

using Eigen::Index;
using Eigen::MatrixXd;

MatrixXd pca_components(const MatrixXd& samples, int d) {
  if (d < 1 || d > samples.cols()) {
    throw ModelError("PCA width " + std::to_string(d) + " must lie in [1, " + std::to_string(samples.cols()) + "]");
  }
  if (samples.rows() < d) {
    throw ModelError("PCA needs at least d = " + std::to_string(d) + " samples, got " + std::to_string(samples.rows()));
  }
  const MatrixXd centered = samples.rowwise() - samples.colwise().mean();
  const MatrixXd cov = centered.transpose() * centered / static_cast<double>(samples.rows());
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw ModelError("PCA eigen-decomposition failed");
  // Eigenvalues come in ascending order; keep the last d columns, largest first.
  const MatrixXd& vectors = solver.eigenvectors();
  MatrixXd w(samples.cols(), d);
  for (int k = 0; k < d; ++k) w.col(k) = vectors.col(samples.cols() - 1 - k);
  return w;
}

MatrixXd pca_baseline(const CompiledModel& model, const std::vector<ValueSeq>& inputs, int d) {
  std::vector<Eigen::RowVectorXd> rows;
  for (const auto& in : inputs) {
    Trace trace;
    forward(model, in, &trace);
    for (const auto& r : trace.residuals) {
      for (Index p = 1; p < r.rows(); ++p) rows.emplace_back(r.row(p));
    }
  }
  MatrixXd samples(static_cast<Index>(rows.size()), model.config.residual_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) samples.row(static_cast<Index>(i)) = rows[i];
  return pca_components(samples, d);
}

}  // namespace rasp_forge::compression
