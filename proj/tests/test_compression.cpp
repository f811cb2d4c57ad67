// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <Eigen/QR>

#include "rasp_forge/compiler/compiler.hpp"
#include "rasp_forge/compression/compression.hpp"
#include "rasp_forge/errors.hpp"
#include "rasp_forge/frontend/builtins.hpp"
#include "rasp_forge/runtime/forward.hpp"
#include "rasp_forge/runtime/serialize.hpp"
#include "test_util.hpp"

using namespace rasp_forge;
using namespace rasp_forge::compression;
using namespace rasp_forge::testing;
using Eigen::MatrixXd;

namespace {

CompiledModel compile_case(const BuiltinCase& c) {
  compiler::CompileOptions o;
  o.vocab = c.vocab;
  o.max_seq_len = c.max_seq_len;
  return compiler::compile(frontend::load_builtin(c.name, c.params), o);
}

CompiledModel frac_prevs_model() { return compile_case(builtin_cases()[0]); }

MatrixXd random_w(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0 / std::sqrt(rows), 1.0 / std::sqrt(rows));
  MatrixXd w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  return w;
}

MatrixXd random_orthogonal(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  return qr.householderQ() * MatrixXd::Identity(n, n);
}

std::vector<Reference> references(const CompiledModel& m, const std::vector<ValueSeq>& inputs) {
  std::vector<Reference> out;
  for (const auto& in : inputs) out.push_back(make_reference(m, in));
  return out;
}

// ---- straight-line reimplementation over nested vectors ----
using Mat = std::vector<std::vector<double>>;

Mat to_mat(const MatrixXd& m) {
  Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

Mat mul(const Mat& a, const Mat& b) {
  const std::size_t inner = b.size();
  const std::size_t cols = inner ? b[0].size() : 0;
  Mat out(a.size(), std::vector<double>(cols, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < inner; ++k)
      for (std::size_t j = 0; j < cols; ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

Mat transpose(const Mat& a) {
  Mat out(a.empty() ? 0 : a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[j][i] = a[i][j];
  return out;
}

void add_into(Mat& a, const Mat& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
}

// Sum of squared output errors and of squared layer errors for one sequence.
std::pair<double, double> naive_sums(const CompiledModel& m, const MatrixXd& w_eigen, const ValueSeq& tokens) {
  const Mat w = to_mat(w_eigen);
  const Mat wt = transpose(w);
  Trace trace;
  const MatrixXd reference_final = forward(m, tokens, &trace);
  Mat s = mul(to_mat(embed(m, tokens)), w);
  const std::size_t n = s.size();
  double layer = 0.0;
  for (int l = 0; l < m.config.num_layers; ++l) {
    for (int half = 0; half < 2; ++half) {
      const Mat x = mul(s, wt);
      Mat delta(n, std::vector<double>(x[0].size(), 0.0));
      if (half == 0) {
        for (const auto& head : m.weights.attention[static_cast<std::size_t>(l)].heads) {
          const Mat q = mul(x, to_mat(head.w_q));
          const Mat k = mul(x, to_mat(head.w_k));
          const Mat v = mul(x, to_mat(head.w_v));
          Mat a(n, std::vector<double>(n));
          for (std::size_t i = 0; i < n; ++i) {
            double mx = -1e300;
            for (std::size_t j = 0; j < n; ++j) {
              double dot = 0.0;
              for (std::size_t c = 0; c < q[i].size(); ++c) dot += q[i][c] * k[j][c];
              a[i][j] = dot / std::sqrt(static_cast<double>(q[i].size()));
              mx = std::max(mx, a[i][j]);
            }
            double z = 0.0;
            for (auto& e : a[i]) z += (e = std::exp(e - mx));
            for (auto& e : a[i]) e /= z;
          }
          add_into(delta, mul(mul(a, v), to_mat(head.w_o)));
        }
      } else if (m.weights.mlp[static_cast<std::size_t>(l)].w1.cols() > 0) {
        Mat h = mul(x, to_mat(m.weights.mlp[static_cast<std::size_t>(l)].w1));
        for (auto& row : h)
          for (auto& e : row) e = e > 0 ? e : 0;
        delta = mul(h, to_mat(m.weights.mlp[static_cast<std::size_t>(l)].w2));
      }
      add_into(s, mul(delta, w));
      const Mat h_hat = mul(s, wt);
      const auto& h = trace.residuals[static_cast<std::size_t>(2 * l + half + 1)];
      for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < h_hat[i].size(); ++j) {
          const double e = h_hat[i][j] - h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          layer += e * e;
        }
    }
  }
  const Mat y = mul(mul(s, wt), to_mat(m.weights.unembed));
  const MatrixXd y_ref = reference_final * m.weights.unembed;
  double out = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double e = y[i][0] - y_ref(static_cast<Eigen::Index>(i), 0);
    out += e * e;
  }
  return {out, layer};
}

void check_gradient(const CompiledModel& m, int d, std::uint64_t seed, std::size_t batch_size,
                    LayerTarget target = LayerTarget::residual) {
  std::mt19937_64 rng(seed);
  std::vector<ValueSeq> inputs;
  for (std::size_t i = 0; i < batch_size; ++i) inputs.push_back(sample_input(m, rng));
  const auto batch = references(m, inputs);
  MatrixXd w = random_w(m.config.residual_dim, d, seed + 1);
  const MatrixXd g = loss_and_grad(m, w, batch, 1.0, target).grad;
  constexpr double h = 1e-5;
  int bad = 0;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      const double keep = w(i, j);
      w(i, j) = keep + h;
      const double up = loss(m, w, batch, 1.0, target).total;
      w(i, j) = keep - h;
      const double down = loss(m, w, batch, 1.0, target).total;
      w(i, j) = keep;
      const double fd = (up - down) / (2 * h);
      const double err = std::abs(fd - g(i, j)) / std::max({std::abs(fd), std::abs(g(i, j)), 1e-6});
      worst = std::max(worst, err);
      if (err > 1e-4) ++bad;
    }
  }
  INFO("worst relative error " << worst);
  CHECK(bad == 0);
}

}  // namespace

TEST_CASE("compressed_forward at d = D") {
  for (const auto& c : builtin_cases()) {
    const auto m = compile_case(c);
    const int big_d = m.config.residual_dim;
    const MatrixXd eye = MatrixXd::Identity(big_d, big_d);
    const MatrixXd q = random_orthogonal(big_d, 3);
    for_each_input(c.vocab, 3, [&](const ValueSeq& in) {
      Trace trace;
      forward(m, in, &trace);
      const auto id = compressed_forward(m, eye, in);
      CHECK(id.output == run(m, in));
      for (std::size_t k = 0; k < trace.residuals.size(); ++k) CHECK(id.residuals[k] == trace.residuals[k]);
      const auto rot = compressed_forward(m, q, in);
      const auto plain = decode(m, trace.residuals.back());
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (m.config.output_encoding == Encoding::numerical) {
          CHECK(std::abs(rot.output[i].as_number() - plain[i].as_number()) < 1e-8);
        } else {
          CHECK(rot.output[i] == plain[i]);
        }
      }
      CHECK((rot.residuals.back() - trace.residuals.back()).cwiseAbs().maxCoeff() < 1e-8);
    });
  }
  const auto m = frac_prevs_model();
  CHECK_THROWS_AS(compressed_forward(m, MatrixXd::Identity(3, 3), chars("ab")), ModelError);
}

TEST_CASE("loss: identity gives zero layer loss and zero numerical output loss") {
  const auto m = frac_prevs_model();
  const auto batch = references(m, {chars("xacx"), chars("ab"), chars("x")});
  const int big_d = m.config.residual_dim;
  const auto parts = loss(m, MatrixXd::Identity(big_d, big_d), batch);
  CHECK(parts.l_layer == 0.0);
  CHECK(parts.l_out == 0.0);
  const auto g = loss_and_grad(m, MatrixXd::Identity(big_d, big_d), batch).grad;
  CHECK(g.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("loss matches a straight-line reimplementation") {
  const auto m = frac_prevs_model();
  const MatrixXd w = random_w(m.config.residual_dim, 6, 42);
  const std::vector<ValueSeq> inputs{chars("xacx"), chars("bx")};
  const auto parts = loss(m, w, references(m, inputs), 1.0);
  double out = 0.0, layer = 0.0, positions = 0.0;
  for (const auto& in : inputs) {
    const auto [o, l] = naive_sums(m, w, in);
    out += o;
    layer += l;
    positions += static_cast<double>(in.size());
  }
  CHECK(parts.l_out == doctest::Approx(out / positions).epsilon(1e-12));
  CHECK(parts.l_layer == doctest::Approx(layer / (positions * m.config.residual_dim)).epsilon(1e-12));
  CHECK(parts.total == parts.l_out + parts.l_layer);
}

TEST_CASE("property: total loss decomposes exactly") {
  const auto m = frac_prevs_model();
  const auto batch = references(m, {chars("xacx"), chars("cc")});
  for (double weight : {0.0, 0.5, 1.0, 3.0}) {
    const auto p = loss(m, random_w(m.config.residual_dim, 4, 9), batch, weight);
    CHECK(p.total == p.l_out + weight * p.l_layer);
  }
}

TEST_CASE("gradient matches central finite differences") {
  const auto cases = builtin_cases();
  SUBCASE("frac_prevs d = 8") { check_gradient(compile_case(cases[0]), 8, 1, 4); }
  SUBCASE("sort_unique d = 8") { check_gradient(compile_case(cases[1]), 8, 2, 4); }
  SUBCASE("sublayer-output layer target") {
    check_gradient(compile_case(cases[0]), 8, 3, 4, LayerTarget::sublayer_output);
    check_gradient(compile_case(cases[1]), 8, 4, 4, LayerTarget::sublayer_output);
  }
}

TEST_CASE("sublayer-output layer target") {
  const auto m = frac_prevs_model();
  const auto batch = references(m, {chars("xacx"), chars("ab")});
  const int big_d = m.config.residual_dim;
  CHECK(loss(m, MatrixXd::Identity(big_d, big_d), batch, 1.0, LayerTarget::sublayer_output).l_layer == 0.0);
  CHECK(parse_layer_target("sublayer-output") == LayerTarget::sublayer_output);
  CHECK_THROWS_AS(parse_layer_target("delta"), ModelError);
}

TEST_CASE("property: gradient is correct on every builtin with D <= 20") {
  for (const auto& c : builtin_cases()) {
    const auto m = compile_case(c);
    if (m.config.residual_dim > 20) continue;
    INFO(c.name);
    check_gradient(m, std::min(5, m.config.residual_dim), 5, 3);
  }
}

TEST_CASE("layer loss weight enters the gradient linearly") {
  const auto m = frac_prevs_model();
  const auto batch = references(m, {chars("xacx"), chars("ba")});
  const MatrixXd w = random_w(m.config.residual_dim, 6, 8);
  const MatrixXd g0 = loss_and_grad(m, w, batch, 0.0).grad;
  const MatrixXd g1 = loss_and_grad(m, w, batch, 1.0).grad;
  const MatrixXd g2 = loss_and_grad(m, w, batch, 2.0).grad;
  CHECK(((g2 - g0) - 2.0 * (g1 - g0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("learning rate schedule") {
  CompressionConfig c;
  c.steps = 100;
  CHECK(learning_rate(c, 0) == 1e-3);
  CHECK(learning_rate(c, 25) == doctest::Approx(0.5 * (1e-3 + 1e-6)));
  CHECK(learning_rate(c, 50) == 1e-6);
  CHECK(learning_rate(c, 99) == 1e-6);
  CHECK(full_schedule(c).steps == 300000);
  CHECK(full_schedule(c).batch_size == 256);
}

TEST_CASE("train: zero steps, determinism, frozen model") {
  const auto m = frac_prevs_model();
  CompressionConfig c;
  c.d = 4;
  c.steps = 0;
  c.seed = 3;
  CHECK(train(m, c).w == init_state(m, c).w);
  const double bound = 1.0 / std::sqrt(m.config.residual_dim);
  CHECK(init_state(m, c).w.cwiseAbs().maxCoeff() <= bound);

  c.steps = 60;
  c.batch_size = 8;
  c.metrics_every = 20;
  const std::string before = serialize_weights(m);
  const auto a = train(m, c);
  const auto b = train(m, c);
  CHECK(serialize_weights(m) == before);
  CHECK(a.w == b.w);
  CHECK(a.history.size() == 4);
  CHECK(a.history.back().step == 60);
  CHECK(metrics_csv(a.history).rfind("step,l_out,l_layer,accuracy,lr\n", 0) == 0);

  c.d = m.config.residual_dim + 1;
  CHECK_THROWS_AS(train(m, c), ModelError);
}

TEST_CASE("train: divergence guard") {
  const auto m = frac_prevs_model();
  CompressionConfig c;
  c.steps = 5;
  c.batch_size = 2;
  c.lr_start = c.lr_end = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(train(m, c), doctest::Contains("not finite"), ModelError);
}

TEST_CASE("train: one dimension loses to eight") {
  const auto m = frac_prevs_model();
  CompressionConfig c;
  c.steps = 1500;
  c.batch_size = 32;
  c.metrics_every = 500;
  c.d = 1;
  const double narrow = train(m, c).history.back().l_out;
  c.d = 8;
  const auto wide = train(m, c);
  CHECK(narrow > wide.history.back().l_out);
  CHECK(wide.history.back().l_out < wide.history.front().l_out);
}

TEST_CASE("eval inputs") {
  const auto m = frac_prevs_model();
  CHECK(eval_inputs(m, 0).size() == 4 + 16 + 64 + 256);
  compiler::CompileOptions o;
  o.vocab = chars("abcdefgh");
  o.max_seq_len = 6;
  const auto big = compiler::compile(frontend::load_builtin("frac_prevs", {{"token", "a"}}), o);
  const auto sampled = eval_inputs(big, 1);
  CHECK(sampled.size() == 1000);
  CHECK(sampled == eval_inputs(big, 1));
}

TEST_CASE("projection files") {
  const auto m = frac_prevs_model();
  const MatrixXd w = random_w(m.config.residual_dim, 5, 4);
  const auto path = std::filesystem::temp_directory_path() / "rasp_forge_projection.json";
  save_projection(w, m.residual_labels, path);
  CHECK(load_projection(path, m.residual_labels) == w);
  auto other = m.residual_labels;
  other[0] = "renamed";
  CHECK_THROWS_AS(load_projection(path, other), ModelError);
  std::filesystem::remove(path);
}

TEST_CASE("pca") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const MatrixXd basis = random_orthogonal(7, 9).leftCols(3);
  MatrixXd coeffs(50, 3);
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) coeffs.data()[i] = g(rng);
  const MatrixXd data = coeffs * basis.transpose();
  const MatrixXd w = pca_components(data, 3);
  CHECK((w.transpose() * w - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  const MatrixXd centered = data.rowwise() - data.colwise().mean();
  CHECK((centered * w * w.transpose() - centered).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(pca_components(data.topRows(2), 3), ModelError);
}

TEST_CASE("pca baseline keeps high-variance dims whatever their task role") {
  const auto m = frac_prevs_model();
  const auto inputs = eval_inputs(m, 0);
  const MatrixXd w = pca_baseline(m, inputs, 8);
  CHECK((w.transpose() * w - MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
  // Per-dimension variance over the same residual vectors.
  std::vector<Eigen::RowVectorXd> rows;
  for (const auto& in : inputs) {
    Trace t;
    forward(m, in, &t);
    for (const auto& r : t.residuals)
      for (Eigen::Index p = 1; p < r.rows(); ++p) rows.emplace_back(r.row(p));
  }
  MatrixXd samples(static_cast<Eigen::Index>(rows.size()), m.config.residual_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) samples.row(static_cast<Eigen::Index>(i)) = rows[i];
  const Eigen::RowVectorXd var = (samples.rowwise() - samples.colwise().mean()).colwise().squaredNorm() / samples.rows();
  const Eigen::VectorXd diag = (w * w.transpose()).diagonal();
  const int a = residual_index(m, "tokens:a");
  CHECK(var(a) > 0.1);
  CHECK(diag(a) > 0.5);  // irrelevant to the task, kept for its variance
  for (Eigen::Index j = 0; j < var.size(); ++j) {
    if (var(j) == 0.0) CHECK(diag(j) < 1e-10);
  }
}

TEST_CASE("diagnostics at d = D with an orthonormal W") {
  for (const auto& c : builtin_cases()) {
    const auto m = compile_case(c);
    std::vector<ValueSeq> inputs;
    for_each_input(c.vocab, 3, [&](const ValueSeq& in) { inputs.push_back(in); });
    const auto r = diagnostics(m, random_orthogonal(m.config.residual_dim, 2), inputs);
    CHECK((r.round_trip - MatrixXd::Identity(m.config.residual_dim, m.config.residual_dim)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.accuracy == 1.0);
    REQUIRE(r.per_layer_cosine.size() == static_cast<std::size_t>(2 * m.config.num_layers));
    for (double cos : r.per_layer_cosine) CHECK(cos == doctest::Approx(1.0).epsilon(1e-12));
    const auto id = diagnostics(m, MatrixXd::Identity(m.config.residual_dim, m.config.residual_dim), inputs);
    for (double cos : id.per_layer_cosine) CHECK(cos == 1.0);
    CHECK(id.accuracy == 1.0);
  }
  const auto m = frac_prevs_model();
  const auto r = diagnostics(m, random_w(m.config.residual_dim, 3, 1), {chars("xacx")});
  const std::string csv = diagnostics_csv(r);
  CHECK(csv.find("cosine,mlp_2,") != std::string::npos);
  CHECK(csv.find("round_trip_row_norm,tokens:a,") != std::string::npos);
  CHECK(round_trip_heatmap(r, TraceFormat::svg).find("tokens:a") != std::string::npos);
  CHECK(round_trip_heatmap(r, TraceFormat::pgm).rfind("P2\n", 0) == 0);
}
