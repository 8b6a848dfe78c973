#pragma once

// Run configuration: `key = value` lines with `#` comments. Anything that
// affects results lives here; command-line flags only pick the subcommand
// and input paths. Environment variables with the SYNLM_ prefix override
// file values (for CI), e.g. SYNLM_WORKERS=1.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synlm/util.hpp"

namespace synlm {

struct RunConfig {
  std::string dev_treebank;
  std::string check_treebank;
  std::string test_treebank;
  std::string dev_text;    // optional; treebank yields when empty
  std::string check_text;
  std::string test_text;
  std::string head_rules;  // optional; rightmost-head default when empty
  std::string trigram_model;
  std::vector<std::string> drop_labels;
  std::size_t vocab_size = 10000;
  std::size_t beam_depth = 100;
  double beam_threshold = 6.9;
  double eos_epsilon = 1e-4;
  std::vector<double> bucket_edges = {0, 1, 2, 4, 8, 16, 32, 64, 128, 256};
  std::size_t first_pass_iterations = 3;
  std::size_t l2r_iterations = 5;
  std::size_t lambda_em_iterations = 20;
  bool reestimate_lambdas = true;
  std::size_t workers = 0;  // 0 = available parallelism
  std::string out_dir = "out";
  bool deterministic = true;
  double interpolation_lambda = -1.0;  // <0: fit on check data

  static RunConfig load(const std::string& path);

  // Paths are checked when a command actually needs them so the error can
  // name the missing key.
  const std::string& require_path(const std::string& key, const std::string& value) const {
    if (value.empty()) fail("missing required config key '" + key + "'");
    if (!std::filesystem::exists(value))
      fail("config key '" + key + "': path does not exist: " + value);
    return value;
  }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  fail("config key '" + key + "': expected true or false, got '" + value + "'");
}

}  // namespace detail

inline RunConfig RunConfig::load(const std::string& path) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  for (const std::string& raw : read_lines(path)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      fail("config line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) fail("config line " + std::to_string(line_no) + ": empty key");
    if (kv.count(key)) fail("config: duplicate key '" + key + "'");
    kv[key] = value;
  }

  RunConfig cfg;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    std::string env_key = "SYNLM_";
    for (char c : key) env_key += static_cast<char>(c == '-' ? '_' : std::toupper(c));
    if (const char* env = std::getenv(env_key.c_str())) {
      kv.erase(key);
      return std::string(env);
    }
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string value = it->second;
    kv.erase(it);
    return value;
  };
  auto str = [&](const std::string& key, std::string& dst) {
    if (auto v = take(key)) dst = *v;
  };
  auto num = [&](const std::string& key, std::size_t& dst) {
    if (auto v = take(key)) dst = parse_u64(*v);
  };
  auto real = [&](const std::string& key, double& dst) {
    if (auto v = take(key)) dst = parse_double(*v);
  };
  auto flag = [&](const std::string& key, bool& dst) {
    if (auto v = take(key)) dst = detail::parse_bool(key, *v);
  };

  str("dev_treebank", cfg.dev_treebank);
  str("check_treebank", cfg.check_treebank);
  str("test_treebank", cfg.test_treebank);
  str("dev_text", cfg.dev_text);
  str("check_text", cfg.check_text);
  str("test_text", cfg.test_text);
  str("head_rules", cfg.head_rules);
  str("trigram_model", cfg.trigram_model);
  str("out_dir", cfg.out_dir);
  if (auto v = take("drop_labels")) cfg.drop_labels = split_ws(*v);
  num("vocab_size", cfg.vocab_size);
  num("beam_depth", cfg.beam_depth);
  real("beam_threshold", cfg.beam_threshold);
  real("eos_epsilon", cfg.eos_epsilon);
  if (auto v = take("bucket_edges")) {
    cfg.bucket_edges.clear();
    for (const std::string& tok : split_ws(*v)) cfg.bucket_edges.push_back(parse_double(tok));
  }
  num("first_pass_iterations", cfg.first_pass_iterations);
  num("l2r_iterations", cfg.l2r_iterations);
  num("lambda_em_iterations", cfg.lambda_em_iterations);
  flag("reestimate_lambdas", cfg.reestimate_lambdas);
  num("workers", cfg.workers);
  flag("deterministic", cfg.deterministic);
  real("interpolation_lambda", cfg.interpolation_lambda);

  if (!kv.empty()) fail("config: unknown key '" + kv.begin()->first + "'");
  if (!cfg.deterministic) fail("config: deterministic=false is not supported");
  if (cfg.beam_depth < 1) fail("config: beam_depth must be >= 1");
  if (cfg.beam_threshold < 0) fail("config: beam_threshold must be >= 0");
  if (cfg.eos_epsilon <= 0 || cfg.eos_epsilon >= 1) fail("config: eos_epsilon must be in (0,1)");
  if (cfg.lambda_em_iterations < 1) fail("config: lambda_em_iterations must be >= 1");
  if (cfg.interpolation_lambda > 1.0) fail("config: interpolation_lambda must be <= 1");
  return cfg;
}

}  // namespace synlm
