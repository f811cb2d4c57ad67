// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "rasp_forge/compression/compression.hpp"
#include "rasp_forge/errors.hpp"
#include "rasp_forge/runtime/forward.hpp"

namespace rasp_forge::compression {

using Eigen::Index;
using Eigen::MatrixXd;

namespace {

struct HeadCache {
  MatrixXd q, k, v, attn;
};

struct SublayerCache {
  std::vector<HeadCache> heads;  // attention
  MatrixXd pre;                  // MLP pre-activation
};

int num_sublayers(const CompiledModel& model) { return 2 * model.config.num_layers; }

bool is_attention(int k) { return k % 2 == 0; }

MatrixXd attention_forward(const AttentionLayer& layer, const MatrixXd& x, bool causal, SublayerCache& cache) {
  const Index n = x.rows();
  MatrixXd delta = MatrixXd::Zero(n, x.cols());
  for (const auto& head : layer.heads) {
    HeadCache h;
    h.q = x * head.w_q;
    h.k = x * head.w_k;
    h.v = x * head.w_v;
    const MatrixXd logits = h.q * h.k.transpose() / std::sqrt(static_cast<double>(head.w_k.cols()));
    h.attn = MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      const Index visible = causal ? i + 1 : n;
      const double m = logits.row(i).head(visible).maxCoeff();
      double total = 0.0;
      for (Index j = 0; j < visible; ++j) {
        h.attn(i, j) = std::exp(logits(i, j) - m);
        total += h.attn(i, j);
      }
      h.attn.row(i) /= total;
    }
    delta += h.attn * h.v * head.w_o;
    cache.heads.push_back(std::move(h));
  }
  return delta;
}

MatrixXd attention_backward(const AttentionLayer& layer, const SublayerCache& cache, const MatrixXd& g_out) {
  MatrixXd g_x = MatrixXd::Zero(g_out.rows(), g_out.cols());
  for (std::size_t i = 0; i < layer.heads.size(); ++i) {
    const auto& head = layer.heads[i];
    const auto& h = cache.heads[i];
    const double scale = 1.0 / std::sqrt(static_cast<double>(head.w_k.cols()));
    const MatrixXd g_z = g_out * head.w_o.transpose();
    const MatrixXd g_attn = g_z * h.v.transpose();
    const MatrixXd g_v = h.attn.transpose() * g_z;
    // Softmax backward per row; masked entries have attn 0 and stay 0.
    const Eigen::VectorXd row_dot = (g_attn.cwiseProduct(h.attn)).rowwise().sum();
    const MatrixXd g_logits = h.attn.cwiseProduct(g_attn.colwise() - row_dot) * scale;
    const MatrixXd g_q = g_logits * h.k;
    const MatrixXd g_k = g_logits.transpose() * h.q;
    g_x += g_q * head.w_q.transpose() + g_k * head.w_k.transpose() + g_v * head.w_v.transpose();
  }
  return g_x;
}

MatrixXd mlp_forward(const MlpLayer& layer, const MatrixXd& x, SublayerCache& cache) {
  cache.pre = x * layer.w1;
  return cache.pre.cwiseMax(0.0) * layer.w2;
}

MatrixXd mlp_backward(const MlpLayer& layer, const SublayerCache& cache, const MatrixXd& g_out) {
  MatrixXd g_pre = g_out * layer.w2.transpose();
  for (Index i = 0; i < g_pre.size(); ++i) {
    if (cache.pre.data()[i] <= 0.0) g_pre.data()[i] = 0.0;
  }
  return g_pre * layer.w1.transpose();
}

// Forward on the compressed stream, keeping what backward needs.
struct Tape {
  MatrixXd embedded;
  std::vector<MatrixXd> s;       // compressed states s_0 .. s_K
  std::vector<MatrixXd> x;       // decompressed x_k = s_k W^T
  std::vector<MatrixXd> deltas;  // sublayer outputs, delta_k reads x_k
  std::vector<SublayerCache> caches;
};

Tape run_tape(const CompiledModel& model, const MatrixXd& w, const MatrixXd& embedded) {
  Tape t;
  t.embedded = embedded;
  t.s.push_back(embedded * w);
  t.x.push_back(t.s.back() * w.transpose());
  const int layers = num_sublayers(model);
  t.caches.resize(static_cast<std::size_t>(layers));
  for (int k = 0; k < layers; ++k) {
    const auto l = static_cast<std::size_t>(k / 2);
    auto& cache = t.caches[static_cast<std::size_t>(k)];
    MatrixXd delta = is_attention(k) ? attention_forward(model.weights.attention[l], t.x.back(), model.config.causal, cache)
                                     : mlp_forward(model.weights.mlp[l], t.x.back(), cache);
    t.s.push_back(t.s.back() + delta * w);
    t.x.push_back(t.s.back() * w.transpose());
    t.deltas.push_back(std::move(delta));
  }
  return t;
}

void check_shape(const CompiledModel& model, const MatrixXd& w) {
  if (w.rows() != model.config.residual_dim || w.cols() < 1 || w.cols() > model.config.residual_dim) {
    throw ModelError("projection is " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                     "; expected " + std::to_string(model.config.residual_dim) + " x d with 1 <= d <= " +
                     std::to_string(model.config.residual_dim));
  }
}

struct Counts {
  double outputs = 0.0;    // positions with a defined target
  double positions = 0.0;  // non-BOS positions
};

Counts count(const CompiledModel& model, std::span<const Reference> batch) {
  Counts c;
  for (const auto& r : batch) {
    c.positions += static_cast<double>(r.tokens.size());
    if (model.config.output_encoding == Encoding::numerical) {
      c.outputs += static_cast<double>(r.tokens.size());
    } else {
      for (int t : r.target_class) c.outputs += t >= 0 ? 1.0 : 0.0;
    }
  }
  return c;
}

// Adds one sequence's output loss; returns dL/dx_final when wanted.
double output_loss(const CompiledModel& model, const Reference& ref, const MatrixXd& x_final, double weight,
                   MatrixXd* g_x) {
  const MatrixXd out = x_final * model.weights.unembed;
  MatrixXd g_out = MatrixXd::Zero(out.rows(), out.cols());
  double total = 0.0;
  for (Index p = 1; p < out.rows(); ++p) {
    const auto i = static_cast<std::size_t>(p - 1);
    if (model.config.output_encoding == Encoding::numerical) {
      const double e = out(p, 0) - ref.target_value[i];
      total += e * e;
      g_out(p, 0) = 2.0 * e * weight;
      continue;
    }
    const int target = ref.target_class[i];
    if (target < 0) continue;
    const double m = out.row(p).maxCoeff();
    const Eigen::RowVectorXd e = (out.row(p).array() - m).exp().matrix();
    const double z = e.sum();
    total += std::log(z) - (out(p, target) - m);
    g_out.row(p) = e / z * weight;
    g_out(p, target) -= weight;
  }
  if (g_x) *g_x = g_out * model.weights.unembed.transpose();
  return total;
}

LossAndGrad evaluate(const CompiledModel& model, const MatrixXd& w, std::span<const Reference> batch,
                     double layer_loss_weight, LayerTarget target, bool want_grad) {
  check_shape(model, w);
  const Counts c = count(model, batch);
  const double d_model = static_cast<double>(model.config.residual_dim);
  const double out_weight = c.outputs > 0 ? 1.0 / c.outputs : 0.0;
  const double layer_weight = c.positions > 0 ? 1.0 / (c.positions * d_model) : 0.0;
  const int layers = num_sublayers(model);

  LossAndGrad result;
  if (want_grad) result.grad = MatrixXd::Zero(w.rows(), w.cols());
  double out_sum = 0.0;
  double layer_sum = 0.0;
  for (const auto& ref : batch) {
    const Tape t = run_tape(model, w, ref.residuals.front());
    const Index n = t.embedded.rows();
    MatrixXd g_final;
    out_sum += output_loss(model, ref, t.x.back(), out_weight, want_grad ? &g_final : nullptr);
    // g_layer[k] is dL_layer/d(compared vector at sublayer k).
    std::vector<MatrixXd> g_layer(static_cast<std::size_t>(layers + 1));
    const bool on_residual = target == LayerTarget::residual;
    for (int k = 1; k <= layers; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      MatrixXd diff = on_residual ? MatrixXd(t.x[ku] - ref.residuals[ku])
                                  : MatrixXd(t.deltas[ku - 1] * w * w.transpose() -
                                             (ref.residuals[ku] - ref.residuals[ku - 1]));
      diff.row(0).setZero();  // BOS is not scored
      layer_sum += diff.squaredNorm();
      if (want_grad) g_layer[ku] = 2.0 * layer_loss_weight * layer_weight * diff;
    }
    if (!want_grad) continue;

    MatrixXd& g = result.grad;
    MatrixXd g_x = g_final;
    if (layers > 0 && on_residual) g_x += g_layer[static_cast<std::size_t>(layers)];
    MatrixXd g_s = MatrixXd::Zero(n, w.cols());
    for (int k = layers; k >= 1; --k) {
      const auto ku = static_cast<std::size_t>(k);
      // x_k = s_k W^T
      g_s += g_x * w;
      g.noalias() += g_x.transpose() * t.s[ku];
      // s_k = s_{k-1} + u with u = delta_{k-1} W
      const MatrixXd& delta = t.deltas[ku - 1];
      MatrixXd g_u = g_s;
      if (!on_residual) {
        // compared vector is u W^T
        g_u += g_layer[ku] * w;
        g.noalias() += g_layer[ku].transpose() * (delta * w);
      }
      g.noalias() += delta.transpose() * g_u;
      const MatrixXd g_delta = g_u * w.transpose();
      const auto l = static_cast<std::size_t>((k - 1) / 2);
      const auto& cache = t.caches[ku - 1];
      g_x = is_attention(k - 1) ? attention_backward(model.weights.attention[l], cache, g_delta)
                                : mlp_backward(model.weights.mlp[l], cache, g_delta);
      if (k - 1 >= 1 && on_residual) g_x += g_layer[ku - 1];
    }
    // x_0 = s_0 W^T and s_0 = e W
    g_s += g_x * w;
    g.noalias() += g_x.transpose() * t.s[0];
    g.noalias() += t.embedded.transpose() * g_s;
  }
  result.loss.l_out = out_sum * out_weight;
  result.loss.l_layer = layer_sum * layer_weight;
  result.loss.total = result.loss.l_out + layer_loss_weight * result.loss.l_layer;
  return result;
}

}  // namespace

Reference make_reference(const CompiledModel& model, std::span<const Value> tokens) {
  Reference r;
  r.tokens.assign(tokens.begin(), tokens.end());
  Trace trace;
  const MatrixXd final = forward(model, tokens, &trace);
  r.residuals = std::move(trace.residuals);
  r.output = decode(model, final);
  const MatrixXd out = final * model.weights.unembed;
  for (Index p = 1; p < out.rows(); ++p) {
    if (model.config.output_encoding == Encoding::numerical) {
      r.target_value.push_back(out(p, 0));
      r.target_class.push_back(-1);
    } else {
      Index best = 0;
      const double m = out.cols() ? out.row(p).maxCoeff(&best) : 0.0;
      r.target_class.push_back(m < 0.5 ? -1 : static_cast<int>(best));
      r.target_value.push_back(0.0);
    }
  }
  return r;
}

CompressedRun compressed_forward(const CompiledModel& model, const MatrixXd& w, std::span<const Value> tokens) {
  check_shape(model, w);
  Tape t = run_tape(model, w, embed(model, tokens));
  CompressedRun run;
  run.output = decode(model, t.x.back());
  run.residuals = std::move(t.x);
  return run;
}

LayerTarget parse_layer_target(const std::string& name) {
  if (name == "residual") return LayerTarget::residual;
  if (name == "sublayer-output") return LayerTarget::sublayer_output;
  throw ModelError("unknown layer target '" + name + "' (expected residual or sublayer-output)");
}

LossParts loss(const CompiledModel& model, const MatrixXd& w, std::span<const Reference> batch,
               double layer_loss_weight, LayerTarget target) {
  return evaluate(model, w, batch, layer_loss_weight, target, false).loss;
}

LossAndGrad loss_and_grad(const CompiledModel& model, const MatrixXd& w, std::span<const Reference> batch,
                          double layer_loss_weight, LayerTarget target) {
  return evaluate(model, w, batch, layer_loss_weight, target, true);
}

bool outputs_match(const CompiledModel& model, const Value& a, const Value& b) {
  if (model.config.output_encoding == Encoding::numerical) {
    return std::abs(a.as_number() - b.as_number()) <= kNumericalMatchTolerance;
  }
  return a == b;
}

}  // namespace rasp_forge::compression
