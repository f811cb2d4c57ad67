// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rasp_forge/compression/compression.hpp"
#include "rasp_forge/errors.hpp"
#include "rasp_forge/runtime/forward.hpp"

namespace rasp_forge::compression {

using Eigen::Index;
using Eigen::MatrixXd;

namespace {

double cosine(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const double na = a.squaredNorm();
  const double nb = b.squaredNorm();
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / std::sqrt(na * nb);
}

}  // namespace

double DiagnosticsReport::row_norm(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw ModelError("no residual dimension labelled '" + label + "'");
  return round_trip.row(it - labels.begin()).norm();
}

DiagnosticsReport diagnostics(const CompiledModel& model, const MatrixXd& w, const std::vector<ValueSeq>& inputs) {
  DiagnosticsReport report;
  report.round_trip = w * w.transpose();
  report.labels = model.residual_labels;
  const int layers = 2 * model.config.num_layers;
  for (int l = 0; l < model.config.num_layers; ++l) {
    report.layer_names.push_back("attn_" + std::to_string(l + 1));
    report.layer_names.push_back("mlp_" + std::to_string(l + 1));
  }
  std::vector<double> sums(static_cast<std::size_t>(layers), 0.0);
  std::size_t positions = 0, hits = 0;
  for (const auto& in : inputs) {
    const Reference ref = make_reference(model, in);
    const CompressedRun run = compressed_forward(model, w, in);
    for (int k = 1; k <= layers; ++k) {
      const auto& h = ref.residuals[static_cast<std::size_t>(k)];
      const auto& h_hat = run.residuals[static_cast<std::size_t>(k)];
      for (Index p = 1; p < h.rows(); ++p) sums[static_cast<std::size_t>(k - 1)] += cosine(h.row(p), h_hat.row(p));
    }
    for (std::size_t i = 0; i < in.size(); ++i) hits += outputs_match(model, run.output[i], ref.output[i]) ? 1 : 0;
    positions += in.size();
  }
  for (double s : sums) report.per_layer_cosine.push_back(positions ? s / static_cast<double>(positions) : 1.0);
  report.accuracy = positions ? static_cast<double>(hits) / static_cast<double>(positions) : 1.0;
  return report;
}

std::string diagnostics_csv(const DiagnosticsReport& report) {
  std::ostringstream out;
  out << "# rasp-forge diagnostics version 1\n";
  out << "metric,layer,value\n";
  out << "accuracy,," << format_number(report.accuracy) << '\n';
  for (std::size_t k = 0; k < report.per_layer_cosine.size(); ++k) {
    out << "cosine," << report.layer_names[k] << ',' << format_number(report.per_layer_cosine[k]) << '\n';
  }
  for (std::size_t i = 0; i < report.labels.size(); ++i) {
    out << "round_trip_row_norm," << report.labels[i] << ',' << format_number(report.row_norm(report.labels[i])) << '\n';
  }
  return out.str();
}

std::string round_trip_heatmap(const DiagnosticsReport& report, TraceFormat format) {
  return export_matrix(report.round_trip, report.labels, report.labels, format, "round trip W W^T");
}

}  // namespace rasp_forge::compression
