// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rasp_forge/compiler/compiler.hpp"
#include "rasp_forge/compression/compression.hpp"
#include "rasp_forge/errors.hpp"
#include "rasp_forge/frontend/builtins.hpp"
#include "rasp_forge/frontend/parser.hpp"
#include "rasp_forge/rasp/interpreter.hpp"
#include "rasp_forge/runtime/forward.hpp"
#include "rasp_forge/runtime/serialize.hpp"
#include "rasp_forge/runtime/trace_export.hpp"

namespace rasp_forge::cli {

namespace {

namespace fs = std::filesystem;

// Thrown for bad flag values that CLI11 cannot see.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CompileArgs {
  std::string builtin;
  std::string source;
  std::vector<std::string> params;
  std::string vocab;
  int max_seq_len = 5;
  bool causal = false;
  double inv_temperature = 100.0;
  std::string output;
};

struct RunArgs {
  std::string model;
  std::string input;
  bool check_oracle = false;
  std::string format = "csv";
  std::string output;
};

struct CompressArgs {
  std::string model;
  int d = 6;
  long steps = 20000;
  int batch_size = 256;
  std::uint64_t seed = 0;
  bool full_schedule = false;
  int metrics_every = 100;
  std::string output = ".";
  std::string projection;
  std::string format = "svg";
  std::string layer_target = "residual";
};

int display_digits() {
  if (const char* env = std::getenv("RASP_FORGE_PRECISION")) {
    const auto v = parse_number(env);
    if (!v || *v < 1 || *v > 17 || *v != std::floor(*v)) {
      throw UsageError("RASP_FORGE_PRECISION must be an integer in [1, 17], got '" + std::string(env) + "'");
    }
    return static_cast<int>(*v);
  }
  return 4;
}

std::string display(const ValueSeq& values) {
  const int digits = display_digits();
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    const Value& v = values[i];
    if (v.is_number()) {
      // Float noise below this reads as zero on screen.
      const double x = std::abs(v.as_number()) < 1e-9 ? 0.0 : v.as_number();
      out += format_number_display(x, digits);
    } else {
      out += v.to_string();
    }
  }
  return out + "]";
}

std::string read_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw UsageError("cannot read " + path);
  std::ostringstream buf;
  buf << file.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream file(path);
  if (!file) throw UsageError("cannot write " + path.string());
  file << text;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

// "xacx" splits per character when every vocab entry is one character;
// otherwise the input is comma separated.
ValueSeq parse_input(const ModelConfig& config, const std::string& input) {
  std::vector<std::string> pieces;
  const bool single_chars = std::all_of(config.vocab.begin(), config.vocab.end(),
                                        [](const Value& v) { return v.to_string().size() == 1; });
  if (input.find(',') == std::string::npos && single_chars) {
    for (char c : input) pieces.emplace_back(1, c);
  } else if (!input.empty()) {
    pieces = split(input, ',');
  }
  ValueSeq out;
  for (const auto& p : pieces) {
    const auto it = std::find_if(config.vocab.begin(), config.vocab.end(), [&](const Value& v) {
      if (v.is_number()) {
        const auto n = parse_number(p);
        return n && *n == v.as_number();
      }
      return v.to_string() == p;
    });
    if (it == config.vocab.end()) {
      throw ModelError("token not in vocabulary: '" + p + "' (vocabulary " + format_values(config.vocab) + ")");
    }
    out.push_back(*it);
  }
  return out;
}

Program load_program(const CompileArgs& a) {
  if (a.builtin.empty() == a.source.empty()) throw UsageError("give exactly one of --builtin or --source");
  if (!a.source.empty()) {
    if (!a.params.empty()) throw UsageError("--param only applies to --builtin");
    return frontend::parse(read_file(a.source));
  }
  frontend::BuiltinParams params;
  for (const auto& kv : a.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects KEY=VALUE, got '" + kv + "'");
    params[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return frontend::load_builtin(a.builtin, params);
}

int do_compile(const CompileArgs& a, std::ostream& out) {
  if (a.vocab.empty()) throw UsageError("--vocab is required");
  const Program program = load_program(a);
  compiler::CompileOptions options;
  options.vocab = make_vocab(split(a.vocab, ','));
  options.max_seq_len = a.max_seq_len;
  options.causal = a.causal;
  options.inv_temperature = a.inv_temperature;
  CompiledModel model;
  try {
    model = compiler::compile(program, options);
  } catch (const EvalError& e) {
    throw CompileError(e.what());
  }
  write_file(a.output, serialize_weights(model));
  out << "compiled '" << model.config.output_name << "': " << model.config.num_layers << " layers, D = "
      << model.config.residual_dim << ", written to " << a.output << '\n';
  return kExitOk;
}

int do_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  const CompiledModel model = load_weights(a.model);
  const ValueSeq input = parse_input(model.config, a.input);
  const ValueSeq got = run(model, input);
  out << display(got) << '\n';
  if (!a.check_oracle) return kExitOk;
  EvalOptions eval;
  eval.causal = model.config.causal;
  const ValueSeq want = evaluate(frontend::parse(model.config.source), input, eval);
  bool ok = want.size() == got.size();
  for (std::size_t i = 0; ok && i < got.size(); ++i) {
    if (model.config.output_encoding == Encoding::numerical) {
      const double w = want[i].is_none() ? 0.0 : want[i].as_number();
      ok = std::abs(got[i].as_number() - w) <= 1e-4;
    } else {
      ok = got[i] == want[i];
    }
  }
  if (!ok) {
    err << "oracle mismatch: compiled " << display(got) << ", interpreter " << display(want) << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int do_trace(const RunArgs& a, std::ostream& out) {
  const CompiledModel model = load_weights(a.model);
  const TraceFormat format = parse_trace_format(a.format);
  const ValueSeq input = parse_input(model.config, a.input);
  Trace trace;
  forward(model, input, &trace);
  std::vector<std::string> positions{"bos"};
  for (const auto& t : input) positions.push_back(t.to_string());
  const std::string text = export_trace(trace, model.residual_labels, positions, format);
  if (a.output.empty()) {
    out << text;
  } else {
    write_file(a.output, text);
  }
  return kExitOk;
}

void write_diagnostics(const CompiledModel& model, const Eigen::MatrixXd& w, const fs::path& dir, TraceFormat format,
                       std::ostream& out) {
  const auto report = compression::diagnostics(model, w, compression::eval_inputs(model, 1));
  write_file(dir / "diagnostics.csv", compression::diagnostics_csv(report));
  const std::string ext = format == TraceFormat::csv ? "csv" : format == TraceFormat::svg ? "svg" : "pgm";
  write_file(dir / ("round_trip." + ext), compression::round_trip_heatmap(report, format));
  out << "accuracy " << format_number_display(report.accuracy, display_digits()) << ", per-layer cosine";
  for (std::size_t k = 0; k < report.per_layer_cosine.size(); ++k) {
    out << ' ' << report.layer_names[k] << '=' << format_number_display(report.per_layer_cosine[k], display_digits());
  }
  out << '\n';
}

int do_compress(const CompressArgs& a, std::ostream& out) {
  const CompiledModel model = load_weights(a.model);
  const TraceFormat format = parse_trace_format(a.format);
  compression::CompressionConfig config;
  config.d = a.d;
  config.steps = a.steps;
  config.batch_size = a.batch_size;
  config.seed = a.seed;
  config.metrics_every = a.metrics_every;
  config.layer_target = compression::parse_layer_target(a.layer_target);
  if (a.full_schedule) config = compression::full_schedule(config);
  const auto state = compression::train(model, config);
  const fs::path dir(a.output);
  fs::create_directories(dir);
  compression::save_projection(state.w, model.residual_labels, dir / "projection.json");
  write_file(dir / "metrics.csv", compression::metrics_csv(state.history));
  const auto& last = state.history.back();
  out << "d = " << a.d << ": l_out " << format_number_display(last.l_out, display_digits()) << ", l_layer "
      << format_number_display(last.l_layer, display_digits()) << '\n';
  write_diagnostics(model, state.w, dir, format, out);
  return kExitOk;
}

int do_diagnose(const CompressArgs& a, std::ostream& out) {
  const CompiledModel model = load_weights(a.model);
  const TraceFormat format = parse_trace_format(a.format);
  const auto w = compression::load_projection(a.projection, model.residual_labels);
  write_diagnostics(model, w, fs::path(a.output), format, out);
  return kExitOk;
}

int do_list(std::ostream& out) {
  for (const auto& b : frontend::list_builtins()) {
    out << b.name;
    if (!b.required.empty()) {
      out << "  required:";
      for (const auto& r : b.required) out << ' ' << r;
    }
    if (!b.optional.empty()) {
      out << "  optional:";
      for (const auto& [k, v] : b.optional) out << ' ' << k << '=' << v;
    }
    out << "\n    " << b.summary << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compile RASP programs into transformer weights, run them and compress them.", "rasp-forge"};
  app.require_subcommand(1);

  CompileArgs c;
  auto* compile = app.add_subcommand("compile", "compile a program into a weight file");
  compile->add_option("--builtin", c.builtin, "builtin program name");
  compile->add_option("--source", c.source, "program source file");
  compile->add_option("--param", c.params, "builtin parameter KEY=VALUE (repeatable)");
  compile->add_option("--vocab", c.vocab, "comma-separated token vocabulary")->required();
  compile->add_option("--max-seq-len", c.max_seq_len, "positions including BOS")->check(CLI::Range(2, 4096));
  compile->add_flag("--causal", c.causal, "causal attention");
  compile->add_option("--inv-temperature", c.inv_temperature, "attention softmax sharpness")
      ->check(CLI::PositiveNumber);
  compile->add_option("-o,--output", c.output, "weight file to write")->required();

  RunArgs r;
  auto* run_cmd = app.add_subcommand("run", "run a compiled model on one input");
  run_cmd->add_option("model", r.model, "weight file")->required();
  run_cmd->add_option("--input", r.input, "tokens as a string or comma-separated list")->required();
  run_cmd->add_flag("--check-oracle", r.check_oracle, "compare against the interpreter");

  RunArgs t;
  auto* trace = app.add_subcommand("trace", "export the residual stream of one run");
  trace->add_option("model", t.model, "weight file")->required();
  trace->add_option("--input", t.input, "tokens as a string or comma-separated list")->required();
  trace->add_option("--format", t.format, "csv, svg or pgm")->check(CLI::IsMember({"csv", "svg", "pgm"}));
  trace->add_option("-o,--output", t.output, "file to write (default stdout)");

  CompressArgs k;
  auto* compress = app.add_subcommand("compress", "learn a projection of the residual stream");
  compress->add_option("model", k.model, "weight file")->required();
  compress->add_option("--d", k.d, "compressed width")->check(CLI::PositiveNumber);
  compress->add_option("--steps", k.steps, "training steps")->check(CLI::NonNegativeNumber);
  compress->add_option("--batch-size", k.batch_size, "sequences per step")->check(CLI::PositiveNumber);
  compress->add_option("--seed", k.seed, "random seed");
  compress->add_option("--metrics-every", k.metrics_every, "steps between metric rows")->check(CLI::PositiveNumber);
  compress->add_flag("--full-schedule", k.full_schedule, "3e5 steps at batch 256");
  compress->add_option("--layer-target", k.layer_target, "layer loss compares: residual or sublayer-output")
      ->check(CLI::IsMember({"residual", "sublayer-output"}));
  compress->add_option("--format", k.format, "round-trip heatmap format: csv, svg or pgm")
      ->check(CLI::IsMember({"csv", "svg", "pgm"}));
  compress->add_option("-o,--output", k.output, "output directory");

  CompressArgs g;
  auto* diagnose = app.add_subcommand("diagnose", "recompute diagnostics from a saved projection");
  diagnose->add_option("model", g.model, "weight file")->required();
  diagnose->add_option("--projection", g.projection, "projection file from compress")->required();
  diagnose->add_option("--format", g.format, "round-trip heatmap format: csv, svg or pgm")
      ->check(CLI::IsMember({"csv", "svg", "pgm"}));
  diagnose->add_option("-o,--output", g.output, "output directory");

  auto* list = app.add_subcommand("list-builtins", "list builtin programs and their parameters");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (compile->parsed()) return do_compile(c, out);
    if (run_cmd->parsed()) return do_run(r, out, err);
    if (trace->parsed()) return do_trace(t, out);
    if (compress->parsed()) return do_compress(k, out);
    if (diagnose->parsed()) return do_diagnose(g, out);
    if (list->parsed()) return do_list(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitCompile;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitCompile;
  } catch (const CompileError& e) {
    err << "error: " << e.what() << '\n';
    return kExitCompile;
  } catch (const ModelError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const EvalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace rasp_forge::cli
