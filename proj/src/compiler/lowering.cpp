// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include "rasp_forge/compiler/compiler.hpp"
#include "rasp_forge/errors.hpp"

namespace rasp_forge::compiler {

using craft::BasisDirection;
using craft::CraftAttentionHead;
using craft::CraftMLP;
using craft::kBos;
using craft::kOne;
using craft::LinearMap;
using craft::VectorSpace;

namespace {

using Eigen::Index;

Index at(const VectorSpace& space, const BasisDirection& d) { return static_cast<Index>(space.index_of(d)); }

VectorSpace hidden_space(std::size_t n) {
  std::vector<BasisDirection> basis;
  basis.reserve(n);
  for (std::size_t i = 0; i < n; ++i) basis.push_back({"hidden", Value(static_cast<double>(i))});
  return VectorSpace(std::move(basis));
}

CraftMLP make_mlp(const std::string& name, VectorSpace input, std::size_t hidden, VectorSpace output,
                  const CompileOptions& options) {
  if (hidden > options.max_hidden) {
    throw CompileError("MLP for '" + name + "' needs " + std::to_string(hidden) + " hidden units (limit " +
                       std::to_string(options.max_hidden) + "); shrink the vocabulary or max_seq_len");
  }
  CraftMLP mlp;
  mlp.name = name;
  mlp.w1.input = std::move(input);
  mlp.w1.output = hidden_space(hidden);
  mlp.w2.input = mlp.w1.output;
  mlp.w2.output = std::move(output);
  mlp.w1.matrix = Eigen::MatrixXd::Zero(static_cast<Index>(mlp.w1.input.size()), static_cast<Index>(hidden));
  mlp.w2.matrix = Eigen::MatrixXd::Zero(static_cast<Index>(hidden), static_cast<Index>(mlp.w2.output.size()));
  return mlp;
}

// Output-space encoding of `v`, scaled by `scale`, added to row `h` of W2.
void write_output(CraftMLP& mlp, Index h, const std::string& name, Encoding encoding, const Value& v, double scale) {
  if (v.is_none()) return;
  if (encoding == Encoding::numerical) {
    mlp.w2.matrix(h, 0) += scale * v.as_number();
  } else {
    mlp.w2.matrix(h, at(mlp.w2.output, {name, v})) += scale;
  }
}

Value evaluate_fn(const SOpNode& node, std::span<const Value> args) {
  try {
    return (*node.fn)(args);
  } catch (const EvalError& e) {
    throw CompileError("'" + node.name + "': " + e.what());
  }
}

void require_categorical(const Program& p, SOpId id, const std::string& user) {
  if (p.sop(id).encoding != Encoding::categorical) {
    throw CompileError("selector of '" + user + "' reads numerical s-op '" + p.sop(id).name +
                       "'; attention queries and keys must be categorical");
  }
}

// Bilinear form over (query one-hots + one) x (key one-hots + tokens:bos).
LinearMap selector_qk(const CompGraph& graph, SelectorId id, double bos_beta, const CompileOptions& options,
                      const std::string& user) {
  const Program& p = graph.program;
  const SelectorNode& sel = p.selector(id);
  require_categorical(p, sel.keys, user);
  require_categorical(p, sel.queries, user);
  LinearMap qk;
  qk.input = direct_sum(sop_space(graph, sel.queries), VectorSpace({kOne}));
  qk.output = direct_sum(sop_space(graph, sel.keys), VectorSpace({kBos}));
  qk.matrix = Eigen::MatrixXd::Zero(static_cast<Index>(qk.input.size()), static_cast<Index>(qk.output.size()));
  const auto& qv = graph.values(sel.queries);
  const auto& kv = graph.values(sel.keys);
  for (const auto& q : qv) {
    for (const auto& k : kv) {
      bool hit = false;
      try {
        hit = sel.predicate(k, q);
      } catch (const EvalError& e) {
        throw CompileError("selector '" + sel.name + "': " + e.what());
      }
      if (hit) {
        qk.matrix(at(qk.input, {p.sop(sel.queries).name, q}), at(qk.output, {p.sop(sel.keys).name, k})) = 1.0;
      }
    }
  }
  qk.matrix(at(qk.input, kOne), at(qk.output, kBos)) = bos_beta;
  qk.matrix *= options.inv_temperature;
  return qk;
}

CraftMLP categorical_map(const CompGraph& graph, SOpId id, const CompileOptions& options) {
  const Program& p = graph.program;
  const SOpNode& node = p.sop(id);
  const SOpId in = node.operands[0];
  const auto& xs = graph.values(in);
  CraftMLP mlp = make_mlp(node.name, direct_sum(sop_space(graph, in), VectorSpace({kOne})), xs.size(),
                          sop_space(graph, id), options);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto h = static_cast<Index>(i);
    mlp.w1.matrix(at(mlp.w1.input, {p.sop(in).name, xs[i]}), h) = 1.0;
    mlp.w1.matrix(at(mlp.w1.input, kOne), h) = -0.5;
    write_output(mlp, h, node.name, node.encoding, evaluate_fn(node, std::span(&xs[i], 1)), 2.0);
  }
  return mlp;
}

CraftMLP categorical_pair_map(const CompGraph& graph, SOpId id, const CompileOptions& options) {
  const Program& p = graph.program;
  const SOpNode& node = p.sop(id);
  const SOpId a = node.operands[0];
  const SOpId b = node.operands[1];
  const auto& as = graph.values(a);
  const auto& bs = graph.values(b);
  const VectorSpace spaces[] = {sop_space(graph, a), sop_space(graph, b), VectorSpace({kOne})};
  CraftMLP mlp = make_mlp(node.name, direct_sum(spaces), as.size() * bs.size(), sop_space(graph, id), options);
  Index h = 0;
  for (const auto& x : as) {
    for (const auto& y : bs) {
      mlp.w1.matrix(at(mlp.w1.input, {p.sop(a).name, x}), h) += 1.0;
      mlp.w1.matrix(at(mlp.w1.input, {p.sop(b).name, y}), h) += 1.0;
      mlp.w1.matrix(at(mlp.w1.input, kOne), h) = -1.0;
      const Value args[] = {x, y};
      write_output(mlp, h, node.name, node.encoding, evaluate_fn(node, args), 1.0);
      ++h;
    }
  }
  return mlp;
}

// f(x, y) = a x + b y + c on the annotated values, realised with ReLU(+-x),
// ReLU(+-y) and a constant unit.
CraftMLP linear_pair_map(const CompGraph& graph, SOpId id, const CompileOptions& options) {
  const Program& p = graph.program;
  const SOpNode& node = p.sop(id);
  if (node.encoding != Encoding::numerical) {
    throw CompileError("'" + node.name + "': a sequence_map of numerical s-ops must itself be numerical");
  }
  const auto& xs = graph.values(node.operands[0]);
  const auto& ys = graph.values(node.operands[1]);
  auto f = [&](const Value& x, const Value& y) {
    const Value args[] = {x, y};
    return evaluate_fn(node, args).as_number();
  };
  if (xs.empty() || ys.empty()) {
    throw CompileError("'" + node.name + "': operand has no possible values");
  }
  const double c0 = f(xs[0], ys[0]);
  const double a = xs.size() > 1 ? (f(xs[1], ys[0]) - c0) / (xs[1].as_number() - xs[0].as_number()) : 0.0;
  const double b = ys.size() > 1 ? (f(xs[0], ys[1]) - c0) / (ys[1].as_number() - ys[0].as_number()) : 0.0;
  const double c = c0 - a * xs[0].as_number() - b * ys[0].as_number();
  for (const auto& x : xs) {
    for (const auto& y : ys) {
      const double want = f(x, y);
      const double got = a * x.as_number() + b * y.as_number() + c;
      if (std::abs(want - got) > 1e-9 * std::max(1.0, std::abs(want))) {
        throw CompileError("'" + node.name + "': a sequence_map of two numerical s-ops must be linear (a*x + b*y + c)");
      }
    }
  }
  const BasisDirection dx = numerical_direction(p.sop(node.operands[0]).name);
  const BasisDirection dy = numerical_direction(p.sop(node.operands[1]).name);
  const VectorSpace inputs[] = {VectorSpace({dx}), VectorSpace({dy}), VectorSpace({kOne, kBos})};
  CraftMLP mlp = make_mlp(node.name, direct_sum(inputs), 5, sop_space(graph, id), options);
  auto& w1 = mlp.w1.matrix;
  w1(at(mlp.w1.input, dx), 0) += 1.0;
  w1(at(mlp.w1.input, dx), 1) += -1.0;
  w1(at(mlp.w1.input, dy), 2) += 1.0;
  w1(at(mlp.w1.input, dy), 3) += -1.0;
  w1(at(mlp.w1.input, kOne), 4) = 1.0;
  w1(at(mlp.w1.input, kBos), 4) = -1.0;
  mlp.w2.matrix.col(0) << a, -a, b, -b, c;
  return mlp;
}

}  // namespace

BasisDirection numerical_direction(const std::string& name) { return {name, std::nullopt}; }

BasisDirection selector_width_scratch(const std::string& name) {
  return {name + "_selector_width_attn_output", std::nullopt};
}

VectorSpace sop_space(const CompGraph& graph, SOpId id) {
  const SOpNode& node = graph.program.sop(id);
  if (node.encoding == Encoding::numerical) {
    return VectorSpace({numerical_direction(node.name)});
  }
  std::vector<BasisDirection> basis;
  for (const auto& v : graph.values(id)) basis.push_back({node.name, v});
  return VectorSpace(std::move(basis));
}

CraftMLP discretizing_mlp(const std::string& name, const BasisDirection& input,
                          const std::vector<std::pair<double, Value>>& samples, const VectorSpace& output,
                          Encoding output_encoding, const CompileOptions& options, double input_at_bos) {
  auto points = samples;
  std::sort(points.begin(), points.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
  if (points.empty()) {
    throw CompileError("'" + name + "': numerical input has no possible values");
  }
  double min_gap = std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
  for (std::size_t j = 1; j < points.size(); ++j) {
    min_gap = std::min(min_gap, points[j].first - points[j - 1].first);
    if (!(points[j].second == points[j - 1].second)) ++steps;
  }
  if (min_gap <= 0.0) {
    throw CompileError("'" + name + "': duplicate numerical input values");
  }
  const double delta = min_gap / options.ramp_divisor;
  const std::string group = output.size() ? output[0].group : name;
  CraftMLP mlp = make_mlp(name, VectorSpace({input, kOne, kBos}), 1 + 2 * steps, output, options);
  auto& w1 = mlp.w1.matrix;
  const Index ix = at(mlp.w1.input, input);
  const Index ione = at(mlp.w1.input, kOne);
  const Index ibos = at(mlp.w1.input, kBos);
  // Constant unit: 1 except at BOS; carries f at the smallest input.
  w1(ione, 0) = 1.0;
  w1(ibos, 0) = -1.0;
  write_output(mlp, 0, group, output_encoding, points[0].second, 1.0);
  Index h = 1;
  for (std::size_t j = 1; j < points.size(); ++j) {
    if (points[j].second == points[j - 1].second) continue;
    const double t = 0.5 * (points[j - 1].first + points[j].first);
    for (double shift : {0.5, -0.5}) {
      const double bias = shift - t / delta;
      w1(ix, h) = 1.0 / delta;
      w1(ione, h) = bias;
      // Push the unit below zero at BOS whatever the input reads there.
      w1(ibos, h) = -(std::max(input_at_bos / delta + bias, 0.0) + 1.0);
      const double sign = shift > 0 ? 1.0 : -1.0;
      write_output(mlp, h, group, output_encoding, points[j].second, sign);
      write_output(mlp, h, group, output_encoding, points[j - 1].second, -sign);
      ++h;
    }
  }
  return mlp;
}

CraftMLP lower_map(const CompGraph& graph, SOpId id, const CompileOptions& options) {
  const Program& p = graph.program;
  const SOpNode& node = p.sop(id);
  if (node.kind == SOpKind::map) {
    const SOpId in = node.operands[0];
    if (p.sop(in).encoding == Encoding::categorical) {
      return categorical_map(graph, id, options);
    }
    std::vector<std::pair<double, Value>> samples;
    for (const auto& x : graph.values(in)) samples.emplace_back(x.as_number(), evaluate_fn(node, std::span(&x, 1)));
    return discretizing_mlp(node.name, numerical_direction(p.sop(in).name), samples, sop_space(graph, id),
                            node.encoding, options, 0.0);
  }
  if (node.kind != SOpKind::sequence_map) {
    throw CompileError("'" + node.name + "' is not an elementwise operation");
  }
  const Encoding ea = p.sop(node.operands[0]).encoding;
  const Encoding eb = p.sop(node.operands[1]).encoding;
  if (ea == Encoding::categorical && eb == Encoding::categorical) {
    return categorical_pair_map(graph, id, options);
  }
  if (ea == Encoding::numerical && eb == Encoding::numerical) {
    return linear_pair_map(graph, id, options);
  }
  throw CompileError("'" + node.name + "': sequence_map mixing a numerical and a categorical s-op is unsupported");
}

CraftAttentionHead lower_selector_aggregate(const CompGraph& graph, SOpId id, const CompileOptions& options) {
  const Program& p = graph.program;
  const SOpNode& node = p.sop(id);
  CraftAttentionHead head;
  head.name = node.name;
  head.bos_beta = 0.5;
  head.inv_temperature = options.inv_temperature;
  head.w_qk = selector_qk(graph, *node.selector, head.bos_beta, options, node.name);
  const SOpId value = node.operands[0];
  head.w_ov.input = sop_space(graph, value);
  head.w_ov.output = sop_space(graph, id);
  head.w_ov.matrix = Eigen::MatrixXd::Zero(static_cast<Index>(head.w_ov.input.size()),
                                           static_cast<Index>(head.w_ov.output.size()));
  if (node.encoding == Encoding::numerical) {
    head.w_ov.matrix(0, 0) = 1.0;
  } else {
    for (const auto& v : graph.values(value)) {
      head.w_ov.matrix(at(head.w_ov.input, {p.sop(value).name, v}), at(head.w_ov.output, {node.name, v})) = 1.0;
    }
  }
  return head;
}

std::pair<CraftAttentionHead, CraftMLP> lower_selector_width(const CompGraph& graph, SOpId id,
                                                             const CompileOptions& options) {
  const SOpNode& node = graph.program.sop(id);
  CraftAttentionHead head;
  head.name = node.name + "_attn";
  head.bos_beta = 1.0;
  head.inv_temperature = options.inv_temperature;
  head.w_qk = selector_qk(graph, *node.selector, head.bos_beta, options, node.name);
  const BasisDirection scratch = selector_width_scratch(node.name);
  head.w_ov.input = VectorSpace({kBos});
  head.w_ov.output = VectorSpace({scratch});
  head.w_ov.matrix = Eigen::MatrixXd::Ones(1, 1);

  // BOS takes 1 / (1 + w) of the attention when w keys are selected.
  std::vector<std::pair<double, Value>> samples;
  for (int k = 0; k <= options.max_seq_len; ++k) samples.emplace_back(1.0 / (1.0 + k), Value(k));
  CraftMLP mlp = discretizing_mlp(node.name, scratch, samples, sop_space(graph, id), node.encoding, options, 1.0);
  return {head, mlp};
}

}  // namespace rasp_forge::compiler
