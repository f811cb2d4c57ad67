// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/runtime/trace_export.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rasp_forge/errors.hpp"

namespace rasp_forge {

namespace {

constexpr int kCell = 14;
constexpr int kLabelWidth = 150;
constexpr int kTitleHeight = 20;
constexpr int kAxisHeight = 40;
constexpr int kPanelGap = 12;

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double max_abs(const Trace& trace) {
  double m = 0.0;
  for (const auto& r : trace.residuals) m = std::max(m, r.cwiseAbs().maxCoeff());
  return m > 0.0 ? m : 1.0;
}

// Diverging map: negative blue, zero white, positive dark grey.
std::string fill(double v, double scale) {
  const double t = std::clamp(std::abs(v) / scale, 0.0, 1.0);
  const int shade = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  std::ostringstream out;
  if (v < 0) {
    out << "rgb(" << shade << "," << shade << ",255)";
  } else {
    out << "rgb(" << shade << "," << shade << "," << shade << ")";
  }
  return out.str();
}

void check(const Trace& trace, const std::vector<std::string>& labels, const std::vector<std::string>& positions) {
  if (trace.residuals.empty()) throw ModelError("trace is empty");
  const auto& r = trace.residuals.front();
  if (static_cast<std::size_t>(r.cols()) != labels.size() || static_cast<std::size_t>(r.rows()) != positions.size()) {
    throw ModelError("trace shape does not match its labels");
  }
}

std::string to_csv(const Trace& trace, const std::vector<std::string>& labels) {
  std::ostringstream out;
  out << "# rasp-forge trace version 1\n";
  out << "sublayer,position,dimension_label,value,changed\n";
  for (std::size_t k = 0; k < trace.residuals.size(); ++k) {
    const auto& r = trace.residuals[k];
    const auto changed = trace.changed(k);
    for (Eigen::Index p = 0; p < r.rows(); ++p) {
      for (Eigen::Index d = 0; d < r.cols(); ++d) {
        out << csv_field(trace.names[k]) << ',' << p << ',' << csv_field(labels[static_cast<std::size_t>(d)]) << ','
            << format_number(r(p, d)) << ',' << (changed[static_cast<std::size_t>(p)][static_cast<std::size_t>(d)] ? 1 : 0)
            << '\n';
      }
    }
  }
  return out.str();
}

std::string to_svg(const Trace& trace, const std::vector<std::string>& labels, const std::vector<std::string>& positions) {
  const int n = static_cast<int>(positions.size());
  const int d = static_cast<int>(labels.size());
  const int panel_w = n * kCell;
  const int panels = static_cast<int>(trace.residuals.size());
  const int width = kLabelWidth + panels * (panel_w + kPanelGap);
  const int height = kTitleHeight + d * kCell + kAxisHeight;
  const double scale = max_abs(trace);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" data-version=\"1\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"monospace\" font-size=\"10\">\n";
  for (int dim = 0; dim < d; ++dim) {
    out << "<text x=\"" << kLabelWidth - 4 << "\" y=\"" << kTitleHeight + dim * kCell + kCell - 3
        << "\" text-anchor=\"end\">" << xml_escape(labels[static_cast<std::size_t>(dim)]) << "</text>\n";
  }
  for (int k = 0; k < panels; ++k) {
    const auto& r = trace.residuals[static_cast<std::size_t>(k)];
    const auto changed = trace.changed(static_cast<std::size_t>(k));
    const int x0 = kLabelWidth + k * (panel_w + kPanelGap);
    out << "<g class=\"panel\" data-sublayer=\"" << xml_escape(trace.names[static_cast<std::size_t>(k)]) << "\">\n";
    out << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"" << kTitleHeight - 6 << "\" text-anchor=\"middle\">"
        << xml_escape(trace.names[static_cast<std::size_t>(k)]) << "</text>\n";
    for (int dim = 0; dim < d; ++dim) {
      for (int p = 0; p < n; ++p) {
        const bool hit = changed[static_cast<std::size_t>(p)][static_cast<std::size_t>(dim)];
        out << "<rect x=\"" << x0 + p * kCell << "\" y=\"" << kTitleHeight + dim * kCell << "\" width=\"" << kCell
            << "\" height=\"" << kCell << "\" fill=\"" << fill(r(p, dim), scale) << "\" stroke=\""
            << (hit ? "red" : "#ccc") << "\" stroke-width=\"" << (hit ? 2 : 0.5) << "\"><title>"
            << xml_escape(labels[static_cast<std::size_t>(dim)]) << " @ " << p << ": " << format_number(r(p, dim))
            << "</title></rect>\n";
      }
    }
    for (int p = 0; p < n; ++p) {
      const int x = x0 + p * kCell + kCell / 2;
      const int y = kTitleHeight + d * kCell + 6;
      out << "<text x=\"" << x << "\" y=\"" << y << "\" transform=\"rotate(90 " << x << ' ' << y << ")\">"
          << xml_escape(positions[static_cast<std::size_t>(p)]) << "</text>\n";
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

// Plain (P2) grey map; panels side by side, changed cells get a black frame.
std::string to_pgm(const Trace& trace, const std::vector<std::string>& labels, const std::vector<std::string>& positions) {
  constexpr int cell = 8;
  constexpr int gap = 4;
  const int n = static_cast<int>(positions.size());
  const int d = static_cast<int>(labels.size());
  const int panels = static_cast<int>(trace.residuals.size());
  const int width = panels * n * cell + (panels - 1) * gap;
  const int height = d * cell;
  std::vector<int> pixels(static_cast<std::size_t>(width * height), 255);
  const double scale = max_abs(trace);
  for (int k = 0; k < panels; ++k) {
    const auto& r = trace.residuals[static_cast<std::size_t>(k)];
    const auto changed = trace.changed(static_cast<std::size_t>(k));
    for (int dim = 0; dim < d; ++dim) {
      for (int p = 0; p < n; ++p) {
        const double t = std::clamp(std::abs(r(p, dim)) / scale, 0.0, 1.0);
        const int grey = 64 + static_cast<int>(std::lround(191.0 * (1.0 - t)));
        const bool hit = changed[static_cast<std::size_t>(p)][static_cast<std::size_t>(dim)];
        for (int yy = 0; yy < cell; ++yy) {
          for (int xx = 0; xx < cell; ++xx) {
            const bool border = hit && (xx == 0 || yy == 0 || xx == cell - 1 || yy == cell - 1);
            const int x = k * (n * cell + gap) + p * cell + xx;
            const int y = dim * cell + yy;
            pixels[static_cast<std::size_t>(y * width + x)] = border ? 0 : grey;
          }
        }
      }
    }
  }
  std::ostringstream out;
  out << "P2\n# version 1\n# rasp-forge residual trace\n";
  out << "# panels:";
  for (const auto& name : trace.names) out << ' ' << name;
  out << "\n# rows (" << cell << "px each):";
  for (const auto& l : labels) out << ' ' << l;
  out << "\n# columns (" << cell << "px each, per panel):";
  for (const auto& p : positions) out << ' ' << p;
  out << '\n' << width << ' ' << height << "\n255\n";
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out << pixels[static_cast<std::size_t>(y * width + x)] << (x + 1 < width ? " " : "\n");
  }
  return out.str();
}

std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& rows,
                       const std::vector<std::string>& cols, const std::string& title) {
  std::ostringstream out;
  out << "# rasp-forge matrix version 1: " << title << '\n';
  out << "row,column,value\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << csv_field(rows[static_cast<std::size_t>(i)]) << ',' << csv_field(cols[static_cast<std::size_t>(j)]) << ','
          << format_number(m(i, j)) << '\n';
    }
  }
  return out.str();
}

std::string matrix_svg(const Eigen::MatrixXd& m, const std::vector<std::string>& rows,
                       const std::vector<std::string>& cols, const std::string& title) {
  const int r = static_cast<int>(m.rows());
  const int c = static_cast<int>(m.cols());
  const double scale = m.size() && m.cwiseAbs().maxCoeff() > 0 ? m.cwiseAbs().maxCoeff() : 1.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" data-version=\"1\" width=\"" << kLabelWidth + c * kCell + kPanelGap
      << "\" height=\"" << kTitleHeight + r * kCell + kLabelWidth << "\" font-family=\"monospace\" font-size=\"10\">\n";
  out << "<text x=\"" << kLabelWidth << "\" y=\"" << kTitleHeight - 6 << "\">" << xml_escape(title) << "</text>\n";
  out << "<g class=\"panel\" data-sublayer=\"" << xml_escape(title) << "\">\n";
  for (int i = 0; i < r; ++i) {
    out << "<text x=\"" << kLabelWidth - 4 << "\" y=\"" << kTitleHeight + i * kCell + kCell - 3 << "\" text-anchor=\"end\">"
        << xml_escape(rows[static_cast<std::size_t>(i)]) << "</text>\n";
    for (int j = 0; j < c; ++j) {
      out << "<rect x=\"" << kLabelWidth + j * kCell << "\" y=\"" << kTitleHeight + i * kCell << "\" width=\"" << kCell
          << "\" height=\"" << kCell << "\" fill=\"" << fill(m(i, j), scale) << "\" stroke=\"#ccc\" stroke-width=\"0.5\"><title>"
          << xml_escape(rows[static_cast<std::size_t>(i)]) << " / " << xml_escape(cols[static_cast<std::size_t>(j)]) << ": "
          << format_number(m(i, j)) << "</title></rect>\n";
    }
  }
  for (int j = 0; j < c; ++j) {
    const int x = kLabelWidth + j * kCell + kCell / 2;
    const int y = kTitleHeight + r * kCell + 6;
    out << "<text x=\"" << x << "\" y=\"" << y << "\" transform=\"rotate(90 " << x << ' ' << y << ")\">"
        << xml_escape(cols[static_cast<std::size_t>(j)]) << "</text>\n";
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

std::string matrix_pgm(const Eigen::MatrixXd& m, const std::vector<std::string>& rows,
                       const std::vector<std::string>& cols, const std::string& title) {
  constexpr int cell = 8;
  const double scale = m.size() && m.cwiseAbs().maxCoeff() > 0 ? m.cwiseAbs().maxCoeff() : 1.0;
  const int width = static_cast<int>(m.cols()) * cell;
  const int height = static_cast<int>(m.rows()) * cell;
  std::ostringstream out;
  out << "P2\n# version 1\n# " << title << "\n# rows:";
  for (const auto& l : rows) out << ' ' << l;
  out << "\n# columns:";
  for (const auto& l : cols) out << ' ' << l;
  out << '\n' << width << ' ' << height << "\n255\n";
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = std::clamp(std::abs(m(y / cell, x / cell)) / scale, 0.0, 1.0);
      out << static_cast<int>(std::lround(255.0 * (1.0 - t))) << (x + 1 < width ? " " : "\n");
    }
  }
  return out.str();
}

}  // namespace

std::string export_matrix(const Eigen::MatrixXd& matrix, const std::vector<std::string>& row_labels,
                          const std::vector<std::string>& col_labels, TraceFormat format, const std::string& title) {
  if (static_cast<std::size_t>(matrix.rows()) != row_labels.size() ||
      static_cast<std::size_t>(matrix.cols()) != col_labels.size()) {
    throw ModelError("matrix shape does not match its labels");
  }
  switch (format) {
    case TraceFormat::csv: return matrix_csv(matrix, row_labels, col_labels, title);
    case TraceFormat::svg: return matrix_svg(matrix, row_labels, col_labels, title);
    case TraceFormat::pgm: return matrix_pgm(matrix, row_labels, col_labels, title);
  }
  throw ModelError("unknown trace format");
}

TraceFormat parse_trace_format(const std::string& name) {
  if (name == "csv") return TraceFormat::csv;
  if (name == "svg") return TraceFormat::svg;
  if (name == "pgm") return TraceFormat::pgm;
  throw ModelError("unknown trace format '" + name + "' (expected csv, svg or pgm)");
}

std::string export_trace(const Trace& trace, const std::vector<std::string>& labels,
                         const std::vector<std::string>& positions, TraceFormat format) {
  check(trace, labels, positions);
  switch (format) {
    case TraceFormat::csv: return to_csv(trace, labels);
    case TraceFormat::svg: return to_svg(trace, labels, positions);
    case TraceFormat::pgm: return to_pgm(trace, labels, positions);
  }
  throw ModelError("unknown trace format");
}

}  // namespace rasp_forge
