// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/runtime/serialize.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rasp_forge/errors.hpp"

namespace rasp_forge {

using nlohmann::json;

namespace {

json value_json(const Value& v) {
  if (v.is_none()) return nullptr;
  if (v.is_bool()) return v.as_bool();
  if (v.is_number()) return v.as_number();
  return v.as_string();
}

Value json_value(const json& j) {
  if (j.is_null()) return {};
  if (j.is_boolean()) return Value(j.get<bool>());
  if (j.is_number()) return Value(j.get<double>());
  if (j.is_string()) return Value(j.get<std::string>());
  throw ModelError("malformed weight file: unsupported value " + j.dump());
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// `cols_if_empty` fixes the width of matrices with no rows.
Eigen::MatrixXd json_matrix(const json& j, Eigen::Index cols_if_empty, const char* what) {
  if (!j.is_array()) throw ModelError(std::string("malformed weight file: ") + what + " is not a matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ModelError(std::string("malformed weight file: ragged rows in ") + what);
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& x = row[static_cast<std::size_t>(c)];
      if (!x.is_number()) throw ModelError(std::string("malformed weight file: non-numeric entry in ") + what);
      m(i, c) = x.get<double>();
    }
  }
  return m;
}

}  // namespace

std::string serialize_weights(const CompiledModel& model) {
  check_consistent(model);
  const auto& c = model.config;
  json config{{"num_blocks", c.num_layers},
              {"d_model", c.residual_dim},
              {"max_seq_len", c.max_seq_len},
              {"causal", c.causal},
              {"inv_temperature", c.inv_temperature},
              {"output_name", c.output_name},
              {"output_encoding", to_string(c.output_encoding)},
              {"heads_per_layer", heads_per_layer(model)},
              {"key_size", key_sizes(model)},
              {"value_size", value_sizes(model)},
              {"mlp_hidden_sizes", mlp_hidden_sizes(model)},
              {"source", c.source},
              {"compile_options", c.options}};
  config["vocab"] = json::array();
  for (const auto& v : c.vocab) config["vocab"].push_back(value_json(v));
  config["output_values"] = json::array();
  for (const auto& v : c.output_values) config["output_values"].push_back(value_json(v));

  json blocks = json::array();
  for (int l = 0; l < c.num_layers; ++l) {
    json heads = json::array();
    for (const auto& h : model.weights.attention[static_cast<std::size_t>(l)].heads) {
      heads.push_back(
          {{"w_q", matrix_json(h.w_q)}, {"w_k", matrix_json(h.w_k)}, {"w_v", matrix_json(h.w_v)}, {"w_o", matrix_json(h.w_o)}});
    }
    const auto& mlp = model.weights.mlp[static_cast<std::size_t>(l)];
    blocks.push_back({{"attention", {{"heads", heads}}}, {"mlp", {{"w1", matrix_json(mlp.w1)}, {"w2", matrix_json(mlp.w2)}}}});
  }
  json doc{{"version", kWeightFormatVersion},
           {"config", config},
           {"residual_labels", model.residual_labels},
           {"embed", {{"token", matrix_json(model.weights.token_embed)}, {"position", matrix_json(model.weights.pos_embed)}}},
           {"blocks", blocks},
           {"unembed", matrix_json(model.weights.unembed)}};
  return doc.dump(1) + "\n";
}

CompiledModel deserialize_weights(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelError(std::string("malformed weight file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("version")) {
    throw ModelError("malformed weight file: missing version");
  }
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kWeightFormatVersion) {
    throw ModelError("unsupported weight file version " + doc["version"].dump() + " (expected " +
                     std::to_string(kWeightFormatVersion) + ")");
  }
  CompiledModel model;
  try {
    const json& c = doc.at("config");
    auto& config = model.config;
    config.num_layers = c.at("num_blocks").get<int>();
    config.residual_dim = c.at("d_model").get<int>();
    config.max_seq_len = c.at("max_seq_len").get<int>();
    config.causal = c.at("causal").get<bool>();
    config.inv_temperature = c.at("inv_temperature").get<double>();
    config.output_name = c.at("output_name").get<std::string>();
    const auto encoding = c.at("output_encoding").get<std::string>();
    if (encoding != "categorical" && encoding != "numerical") {
      throw ModelError("malformed weight file: unknown output encoding '" + encoding + "'");
    }
    config.output_encoding = encoding == "numerical" ? Encoding::numerical : Encoding::categorical;
    for (const auto& v : c.at("vocab")) config.vocab.push_back(json_value(v));
    for (const auto& v : c.at("output_values")) config.output_values.push_back(json_value(v));
    config.source = c.value("source", "");
    config.options = c.value("compile_options", std::map<std::string, std::string>{});
    model.residual_labels = doc.at("residual_labels").get<std::vector<std::string>>();

    const Eigen::Index d = config.residual_dim;
    model.weights.token_embed = json_matrix(doc.at("embed").at("token"), d, "token embedding");
    model.weights.pos_embed = json_matrix(doc.at("embed").at("position"), d, "position embedding");
    const json& blocks = doc.at("blocks");
    if (!blocks.is_array() || static_cast<int>(blocks.size()) != config.num_layers) {
      throw ModelError("malformed weight file: expected " + std::to_string(config.num_layers) + " blocks");
    }
    for (const auto& b : blocks) {
      AttentionLayer layer;
      for (const auto& h : b.at("attention").at("heads")) {
        AttentionHead head;
        head.w_q = json_matrix(h.at("w_q"), 0, "W_q");
        head.w_k = json_matrix(h.at("w_k"), 0, "W_k");
        head.w_v = json_matrix(h.at("w_v"), 0, "W_v");
        head.w_o = json_matrix(h.at("w_o"), d, "W_o");
        layer.heads.push_back(std::move(head));
      }
      model.weights.attention.push_back(std::move(layer));
      MlpLayer mlp;
      mlp.w1 = json_matrix(b.at("mlp").at("w1"), 0, "W1");
      mlp.w2 = json_matrix(b.at("mlp").at("w2"), d, "W2");
      model.weights.mlp.push_back(std::move(mlp));
    }
    model.weights.unembed = json_matrix(doc.at("unembed"), 0, "unembedding");
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed weight file: ") + e.what());
  }
  check_consistent(model);
  return model;
}

void save_weights(const CompiledModel& model, const std::filesystem::path& path) {
  const std::string text = serialize_weights(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ModelError("failed writing '" + path.string() + "'");
}

CompiledModel load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot read '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return deserialize_weights(text.str());
}

}  // namespace rasp_forge
