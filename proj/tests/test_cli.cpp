// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using rasp_forge::cli::run_cli;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "rasp_forge_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string frac_prevs_model() {
  const auto path = (scratch_dir() / "m.json").string();
  REQUIRE(cli({"compile", "--builtin", "frac_prevs", "--vocab", "a,b,c,x", "--max-seq-len", "5", "-o", path}).code == 0);
  return path;
}

}  // namespace

TEST_CASE("compile then run") {
  const auto model = frac_prevs_model();
  const auto r = cli({"run", model, "--input", "xacx"});
  CHECK(r.code == 0);
  CHECK(r.out == "[1, 0.5, 0.3333, 0.5]\n");
  CHECK(cli({"run", model, "--input", "x,a,c,x", "--check-oracle"}).out == r.out);

  setenv("RASP_FORGE_PRECISION", "2", 1);
  CHECK(cli({"run", model, "--input", "xacx"}).out == "[1, 0.5, 0.33, 0.5]\n");
  setenv("RASP_FORGE_PRECISION", "zero", 1);
  CHECK(cli({"run", model, "--input", "xacx"}).code == 1);
  unsetenv("RASP_FORGE_PRECISION");
}

TEST_CASE("exit codes") {
  const auto model = frac_prevs_model();
  const auto bad_token = cli({"run", model, "--input", "xq"});
  CHECK(bad_token.code == 3);
  CHECK(bad_token.err.find("token not in vocabulary") != std::string::npos);
  CHECK(cli({"run", model, "--input", "xxxxx"}).code == 3);
  CHECK(cli({"run", (scratch_dir() / "missing.json").string(), "--input", "x"}).code == 3);
  CHECK(cli({}).code == 1);
  CHECK(cli({"compile", "--vocab", "a"}).code == 1);
  CHECK(cli({"compile", "--builtin", "frac_prevs", "--source", "x.rasp", "--vocab", "a", "-o", "m"}).code == 1);
  CHECK(cli({"trace", model, "--input", "x", "--format", "png"}).code == 1);
  CHECK(cli({"compile", "--builtin", "nope", "--vocab", "a", "-o", (scratch_dir() / "n.json").string()}).code == 2);

  const auto src = scratch_dir() / "bad.rasp";
  std::ofstream(src) << "s = select(indices, indices, <=)\nreturn aggregate(s, tokens)\n";
  const auto r = cli({"compile", "--source", src.string(), "--vocab", "a,b", "-o", (scratch_dir() / "b.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: ", 0) == 0);
  std::ofstream(src) << "return = ;\n";
  CHECK(cli({"compile", "--source", src.string(), "--vocab", "a", "-o", (scratch_dir() / "b.json").string()}).code == 2);
}

TEST_CASE("check-oracle reports a mismatch") {
  const auto model = frac_prevs_model();
  // Tamper with the stored source so the interpreter disagrees.
  std::string text = slurp(model);
  const std::string from = "(x == \\\"x\\\")";
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), "(x == \\\"a\\\")");
  const auto tampered = scratch_dir() / "tampered.json";
  std::ofstream(tampered) << text;
  const auto r = cli({"run", tampered.string(), "--input", "xacx", "--check-oracle"});
  CHECK(r.code == 3);
  CHECK(r.err.find("oracle mismatch") != std::string::npos);
}

TEST_CASE("source programs, builtin params and causal models") {
  const auto src = scratch_dir() / "rev.rasp";
  std::ofstream(src) << "opp = (length - indices) - 1\nflip = select(indices, opp, ==)\nreturn aggregate(flip, tokens)\n";
  const auto m = (scratch_dir() / "rev.json").string();
  REQUIRE(cli({"compile", "--source", src.string(), "--vocab", "a,b,c", "--max-seq-len", "6", "-o", m}).code == 0);
  CHECK(cli({"run", m, "--input", "abcc", "--check-oracle"}).out == "[c, c, b, a]\n");

  const auto s = (scratch_dir() / "sort.json").string();
  REQUIRE(cli({"compile", "--builtin", "sort", "--param", "min_key=1", "--param", "context_length=5", "--vocab", "1,2,3",
               "-o", s})
              .code == 0);
  CHECK(cli({"run", s, "--input", "3,1,2,1", "--check-oracle"}).out == "[1, 1, 2, 3]\n");
  CHECK(cli({"compile", "--builtin", "sort", "--param", "min_key", "--vocab", "1", "-o", s}).code == 1);

  const auto c = (scratch_dir() / "causal.json").string();
  REQUIRE(cli({"compile", "--builtin", "frac_prevs", "--vocab", "a,x", "--causal", "-o", c}).code == 0);
  CHECK(cli({"run", c, "--input", "xaax", "--check-oracle"}).out == "[1, 0.5, 0.3333, 0.5]\n");
}

TEST_CASE("trace output") {
  const auto model = frac_prevs_model();
  const auto csv = cli({"trace", model, "--input", "xacx"});
  CHECK(csv.code == 0);
  CHECK(csv.out.rfind("# rasp-forge trace version 1\n", 0) == 0);
  const auto svg = scratch_dir() / "t.svg";
  CHECK(cli({"trace", model, "--input", "xacx", "--format", "svg", "-o", svg.string()}).code == 0);
  CHECK(slurp(svg).find("<svg") != std::string::npos);
}

TEST_CASE("compress and diagnose are reproducible") {
  const auto model = frac_prevs_model();
  const auto a = scratch_dir() / "ca";
  const auto b = scratch_dir() / "cb";
  for (const auto& dir : {a, b}) {
    const auto r = cli({"compress", model, "--d", "6", "--steps", "300", "--batch-size", "16", "--seed", "0",
                        "--metrics-every", "100", "-o", dir.string()});
    REQUIRE(r.code == 0);
  }
  for (const char* f : {"projection.json", "metrics.csv", "diagnostics.csv", "round_trip.svg"}) {
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK(!slurp(a / f).empty());
  }
  std::istringstream metrics(slurp(a / "metrics.csv"));
  std::string line, first, last;
  std::getline(metrics, line);
  CHECK(line == "step,l_out,l_layer,accuracy,lr");
  std::getline(metrics, first);
  while (std::getline(metrics, line)) last = line;
  auto l_out = [](const std::string& row) { return std::stod(row.substr(row.find(',') + 1)); };
  CHECK(std::isfinite(l_out(last)));
  CHECK(l_out(last) < l_out(first));

  const auto d = scratch_dir() / "cd";
  const auto r = cli({"diagnose", model, "--projection", (a / "projection.json").string(), "-o", d.string()});
  CHECK(r.code == 0);
  CHECK(slurp(d / "diagnostics.csv") == slurp(a / "diagnostics.csv"));
  CHECK(cli({"compress", model, "--d", "99", "--steps", "1", "-o", d.string()}).code == 3);
}

TEST_CASE("list-builtins") {
  const auto r = cli({"list-builtins"});
  CHECK(r.code == 0);
  for (const char* name : {"frac_prevs", "sort_unique", "sort", "pair_balance", "dyck_n"}) {
    CHECK(r.out.find(name) != std::string::npos);
  }
  CHECK(r.out.find("required: min_key context_length") != std::string::npos);
}
