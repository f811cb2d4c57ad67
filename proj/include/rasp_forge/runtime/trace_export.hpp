// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "rasp_forge/runtime/forward.hpp"

namespace rasp_forge {

enum class TraceFormat { csv, svg, pgm };

/// Throws ModelError for anything but csv, svg or pgm.
TraceFormat parse_trace_format(const std::string& name);

/// `labels` names the residual dimensions, `positions` the sequence
/// positions (BOS first). CSV is long format, one row per
/// (sublayer, position, dimension); SVG and PGM draw one panel per
/// snapshot with positions across and dimensions down.
std::string export_trace(const Trace& trace, const std::vector<std::string>& labels,
                         const std::vector<std::string>& positions, TraceFormat format);

/// One labelled heatmap of a matrix (CSV rows are `row,column,value`).
std::string export_matrix(const Eigen::MatrixXd& matrix, const std::vector<std::string>& row_labels,
                          const std::vector<std::string>& col_labels, TraceFormat format, const std::string& title);

}  // namespace rasp_forge
