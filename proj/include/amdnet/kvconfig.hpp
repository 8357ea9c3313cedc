#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "amdnet/errors.hpp"
#include "amdnet/model.hpp"
#include "amdnet/synthdata.hpp"
#include "amdnet/trainer.hpp"

namespace amdnet {

/// Everything the CLI can configure, from one `key = value` file.
struct RunConfig {
  SyntheticCorpusSpec corpus;
  TrainConfig train;

  RunConfig() {
    // Desk-scale defaults shared between generator and model.
    train.model.clips = corpus.clips;
    train.model.input_dim = corpus.input_dim;
  }

  void set_seed(std::uint64_t seed) {
    corpus.seed = seed;
    train.seed = seed;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
  try {
    return std::stoull(v);
  } catch (...) {
    throw input_error("config: bad integer for " + key + ": " + v);
  }
}

inline double to_real(const std::string& key, const std::string& v) {
  try {
    return std::stod(v);
  } catch (...) {
    throw input_error("config: bad number for " + key + ": " + v);
  }
}

}  // namespace detail

/// `key = value` lines; '#' starts a comment; later keys override earlier.
inline std::vector<std::pair<std::string, std::string>> parse_kv_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw input_error("config: cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw input_error("config: expected key = value at line " + std::to_string(lineno));
    out.emplace_back(detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
  return out;
}

inline void apply_kv(RunConfig& rc, const std::string& key, const std::string& value) {
  using detail::to_count;
  using detail::to_real;
  ModelConfig& m = rc.train.model;
  LossWeights& w = rc.train.weights;
  SyntheticCorpusSpec& c = rc.corpus;
  TrainConfig& t = rc.train;
  if (key == "num_videos") c.num_videos = to_count(key, value);
  else if (key == "moments_per_video") c.moments_per_video = to_count(key, value);
  else if (key == "queries_per_moment") c.queries_per_moment = to_count(key, value);
  else if (key == "num_latent_concepts") c.num_latent_concepts = to_count(key, value);
  else if (key == "noise_std") c.noise_std = to_real(key, value);
  else if (key == "temporal_smoothing") c.temporal_smoothing = to_count(key, value);
  else if (key == "clips") { c.clips = to_count(key, value); m.clips = c.clips; }
  else if (key == "input_dim") { c.input_dim = to_count(key, value); m.input_dim = c.input_dim; }
  else if (key == "dim") m.dim = to_count(key, value);
  else if (key == "moments") m.moments = to_count(key, value);
  else if (key == "sigma") m.sigma = to_real(key, value);
  else if (key == "window") m.window = window_from_string(value);
  else if (key == "mask_mode") m.mask_mode = mask_mode_from_string(value);
  else if (key == "temperature") m.temperature = to_real(key, value);
  else if (key == "similarity") m.similarity = similarity_from_string(value);
  else if (key == "ffn_hidden") m.ffn_hidden = to_count(key, value);
  else if (key == "base_layers") m.base_layers = to_count(key, value);
  else if (key == "lambda_ret") w.lambda_ret = to_real(key, value);
  else if (key == "lambda_div") w.lambda_div = to_real(key, value);
  else if (key == "lambda_rel") w.lambda_rel = to_real(key, value);
  else if (key == "alpha") w.alpha = to_real(key, value);
  else if (key == "beta") w.beta = to_real(key, value);
  else if (key == "batch_size") t.batch_size = to_count(key, value);
  else if (key == "lr") t.lr = to_real(key, value);
  else if (key == "max_epochs") t.max_epochs = to_count(key, value);
  else if (key == "patience") t.patience = to_count(key, value);
  else if (key == "eval_every") t.eval_every = to_count(key, value);
  else if (key == "val_fraction") t.val_fraction = to_real(key, value);
  else if (key == "seed") rc.set_seed(to_count(key, value));
  else throw input_error("config: unknown key: " + key);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig rc;
  for (const auto& [k, v] : parse_kv_file(path)) apply_kv(rc, k, v);
  return rc;
}

}  // namespace amdnet
