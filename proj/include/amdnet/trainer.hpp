#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "amdnet/adam.hpp"
#include "amdnet/engine.hpp"
#include "amdnet/model.hpp"
#include "amdnet/objectives.hpp"
#include "amdnet/synthdata.hpp"

namespace amdnet {

struct TrainConfig {
  std::size_t batch_size = 128;
  double lr = 3e-4;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;   // evals without SumR improvement before stopping
  std::size_t eval_every = 1;  // epochs between validation evals
  double val_fraction = 0.10;
  std::uint64_t seed = 42;
  bool use_div_loss = true;
  bool use_rel_loss = true;
  ModelConfig model;
  LossWeights weights;

  void validate() const {
    if (batch_size < 2) throw input_error("train config: batch_size must be >= 2");
    if (patience < 1) throw input_error("train config: patience must be >= 1");
    if (eval_every < 1) throw input_error("train config: eval_every must be >= 1");
    if (!(lr > 0)) throw input_error("train config: lr must be positive");
    if (val_fraction < 0 || val_fraction >= 1)
      throw input_error("train config: val_fraction must be in [0,1)");
    model.validate();
    weights.validate();
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  double ret = 0, div = 0, rel = 0, total = 0;
  double wall_ms = 0;  // kept out of the deterministic report file
};

struct EvalPoint {
  std::size_t epoch = 0;
  double sum_r = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::vector<EvalPoint> evals;
  std::size_t best_epoch = 0;
  double best_sum_r = 0;
  std::size_t epochs_run = 0;
};

struct BatchAssembly {
  std::size_t ordinal = 0;
  std::vector<std::size_t> videos;   // corpus video indices
  std::vector<std::size_t> queries;  // corpus query indices
  BatchPairing pairing;              // within-batch indices
};

namespace detail {

inline std::vector<std::vector<std::size_t>> queries_by_video(const CorpusData& corpus) {
  std::vector<std::vector<std::size_t>> out(corpus.manifest.videos.size());
  for (std::size_t q = 0; q < corpus.manifest.queries.size(); ++q)
    out[corpus.video_index.at(corpus.manifest.queries[q].video_id)].push_back(q);
  return out;
}

inline bool in_validation(const std::string& video_id, std::uint64_t seed, double fraction) {
  std::uint64_t h = fnv1a64(video_id.data(), video_id.size());
  h = fnv1a64(&seed, sizeof seed, h);
  return double(h % 10000) < fraction * 10000.0;
}

}  // namespace detail

struct BatchLossVars {
  Var total, ret, div, rel;
};

/// Assembles Eq.-style total loss for one batch of whole videos with their
/// queries attached. Scores are cosine (or raw dot) max-over-clips per pair.
template <typename T>
BatchLossVars build_batch_loss(Tape<T>& tape, const Model<T>& model, const CorpusData& corpus,
                               const BatchAssembly& batch, const TrainConfig& cfg) {
  const ModelConfig& mc = model.config();
  const bool cosine = mc.similarity == SimilarityKind::kCosine;
  const bool with_moments = mc.moment_module;
  const bool use_div = cfg.use_div_loss && with_moments;
  const bool use_rel = cfg.use_rel_loss && with_moments;
  const std::size_t nq = batch.queries.size();

  Tensor<T> qraw(nq, mc.input_dim);
  for (std::size_t i = 0; i < nq; ++i) {
    const Tensor<float>& src = corpus.query_features[batch.queries[i]];
    for (std::size_t j = 0; j < mc.input_dim; ++j) qraw(i, j) = T(src[j]);
  }
  Var queries = model.encode_queries(tape, tape.input(std::move(qraw)));
  Var qn = cosine ? l2_normalize_rows(tape, queries) : queries;

  std::vector<Var> score_cols, div_terms, rel_terms;
  for (std::size_t vi = 0; vi < batch.videos.size(); ++vi) {
    const std::size_t v = batch.videos[vi];
    auto graph = model.video_graph(tape, corpus.video_features[v].template cast<T>());
    Var rows = cosine ? l2_normalize_rows(tape, graph.enhanced) : graph.enhanced;
    score_cols.push_back(row_max(tape, matmul_nt(tape, qn, rows)));
    if (use_div) {
      // Unit-sum rows make the alpha target reachable: peak-normalized rows
      // have ||row||^2 >= 1, which would shrink widths without bound.
      Var dist = l1_normalize_rows(tape, graph.mask);
      div_terms.push_back(diversity_loss(tape, dist, T(cfg.weights.alpha)));
    }
    if (use_rel) {
      Var hinges = relevance_hinges(tape, qn, graph.roi, graph.summary, T(cfg.weights.beta),
                                    mc.similarity, cosine);
      Tensor<T> indicator(nq, 1);
      for (std::size_t q : batch.pairing.queries_of_video[vi]) indicator[q] = T(1) / T(nq);
      rel_terms.push_back(weighted_sum(tape, hinges, std::move(indicator)));
    }
  }

  BatchLossVars out;
  out.ret = retrieval_loss(tape, concat_cols(tape, score_cols), batch.pairing,
                           T(mc.temperature));
  std::vector<Var> parts{out.ret};
  std::vector<T> coeffs{T(cfg.weights.lambda_ret)};
  if (use_div) {
    out.div = affine_combine(tape, div_terms,
                             std::vector<T>(div_terms.size(), T(1) / T(div_terms.size())));
    parts.push_back(out.div);
    coeffs.push_back(T(cfg.weights.lambda_div));
  }
  if (use_rel) {
    out.rel = affine_combine(tape, rel_terms, std::vector<T>(rel_terms.size(), T(1)));
    parts.push_back(out.rel);
    coeffs.push_back(T(cfg.weights.lambda_rel));
  }
  out.total = affine_combine(tape, parts, coeffs);
  return out;
}

/// Whole-video batches in shuffled order; the partial final batch is kept.
inline std::vector<BatchAssembly> make_batches(const CorpusData& corpus,
                                               const std::vector<std::size_t>& train_videos,
                                               const std::vector<std::vector<std::size_t>>& qbv,
                                               std::size_t batch_size, std::mt19937_64& rng) {
  std::vector<std::size_t> order = train_videos;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<BatchAssembly> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    BatchAssembly b;
    b.ordinal = batches.size();
    const std::size_t end = std::min(order.size(), start + batch_size);
    b.pairing.queries_of_video.resize(end - start);
    for (std::size_t i = start; i < end; ++i) {
      const std::size_t v = order[i];
      const std::size_t local_v = i - start;
      b.videos.push_back(v);
      for (std::size_t q : qbv[v]) {
        b.pairing.queries_of_video[local_v].push_back(b.queries.size());
        b.pairing.video_of_query.push_back(local_v);
        b.queries.push_back(q);
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

template <typename T>
struct TrainResult {
  Model<T> model;
  TrainReport report;
};

/// End-to-end optimization: Adam over the joint loss, per-epoch validation
/// SumR, early stopping, best-checkpoint restore. Deterministic for a fixed
/// config and seed.
template <typename T = double>
TrainResult<T> train(const CorpusData& corpus, const TrainConfig& cfg) {
  cfg.validate();
  if (corpus.manifest.videos.empty()) throw input_error("train: empty corpus");

  Model<T> model(cfg.model, cfg.seed);
  AdamState<T> adam(model.params(), T(cfg.lr));
  auto qbv = detail::queries_by_video(corpus);

  std::vector<std::size_t> train_videos, val_videos, val_queries;
  for (std::size_t v = 0; v < corpus.manifest.videos.size(); ++v) {
    if (detail::in_validation(corpus.manifest.videos[v].id, cfg.seed, cfg.val_fraction))
      val_videos.push_back(v);
    else
      train_videos.push_back(v);
  }
  if (val_videos.size() < 2) {  // degenerate corpora: validate on everything
    val_videos.resize(corpus.manifest.videos.size());
    std::iota(val_videos.begin(), val_videos.end(), 0);
  }
  if (train_videos.empty()) throw input_error("train: no training videos after the split");
  for (std::size_t v : val_videos)
    for (std::size_t q : qbv[v]) val_queries.push_back(q);

  TrainReport report;
  ParamStore<T> best_params = model.params().clone();
  std::size_t evals_since_best = 0;
  bool have_best = false;
  std::mt19937_64 batch_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochStats stats;
    stats.epoch = epoch;
    std::size_t steps = 0;
    for (const auto& batch :
         make_batches(corpus, train_videos, qbv, cfg.batch_size, batch_rng)) {
      Tape<T> tape;
      BatchLossVars loss;
      try {
        loss = build_batch_loss(tape, model, corpus, batch, cfg);
      } catch (const data_error& e) {
        throw data_error("train: aborted in epoch " + std::to_string(epoch) + " batch " +
                         std::to_string(batch.ordinal) + ": " + e.what());
      }
      const double total = double(tape.value(loss.total)[0]);
      if (!std::isfinite(total))
        throw data_error("train: non-finite loss in epoch " + std::to_string(epoch) + " batch " +
                         std::to_string(batch.ordinal));
      stats.total += total;
      stats.ret += double(tape.value(loss.ret)[0]);
      if (loss.div.valid()) stats.div += double(tape.value(loss.div)[0]);
      if (loss.rel.valid()) stats.rel += double(tape.value(loss.rel)[0]);
      model.params().zero_grad();
      tape.backward(loss.total);
      adam.step(model.params());
      ++steps;
    }
    stats.ret /= double(steps);
    stats.div /= double(steps);
    stats.rel /= double(steps);
    stats.total /= double(steps);
    stats.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(stats);
    report.epochs_run = epoch;

    if (epoch % cfg.eval_every == 0) {
      Model<float> snapshot = model.template cast<float>();
      const double sum_r = t2v_sum_recall(corpus, snapshot, val_videos, val_queries);
      report.evals.push_back(EvalPoint{epoch, sum_r});
      if (!have_best || sum_r > report.best_sum_r) {
        report.best_sum_r = sum_r;
        report.best_epoch = epoch;
        best_params = model.params().clone();
        have_best = true;
        evals_since_best = 0;
      } else if (++evals_since_best >= cfg.patience) {
        break;
      }
    }
  }

  return TrainResult<T>{Model<T>(cfg.model, std::move(best_params)), std::move(report)};
}

// ------------------------------ checkpoints --------------------------------

inline void save_checkpoint(const Model<float>& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "checkpoint.jsonl", std::ios::trunc);
  if (!out) throw data_error("save_checkpoint: cannot open " + dir.string());
  out << nlohmann::json{{"type", "checkpoint"},
                        {"config", config_to_json(model.config())},
                        {"fingerprint", model.fingerprint()},
                        {"params", model.params().count()}}
             .dump()
      << '\n';
  for (std::size_t i = 0; i < model.params().count(); ++i) {
    const Parameter<float>& p = model.params()[i];
    char file[64];
    std::snprintf(file, sizeof file, "p%03zu.prvf", i);
    write_feature_file(dir / file, p.value.rank() == 2
                                       ? p.value
                                       : p.value.reshaped(1, p.value.size()));
    out << nlohmann::json{{"type", "param"},
                          {"name", p.name},
                          {"file", file},
                          {"rows", p.value.rows()},
                          {"cols", p.value.cols()}}
               .dump()
        << '\n';
  }
}

inline Model<float> load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "checkpoint.jsonl");
  if (!in) throw data_error("load_checkpoint: cannot open " + (dir / "checkpoint.jsonl").string());
  std::string line;
  ModelConfig cfg;
  std::string fingerprint;
  ParamStore<float> params;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw data_error("load_checkpoint: bad record");
    const std::string type = j.value("type", "");
    if (type == "checkpoint") {
      cfg = config_from_json(j.at("config"));
      fingerprint = j.at("fingerprint").get<std::string>();
      have_header = true;
    } else if (type == "param") {
      Tensor<float> v = load_feature_file(dir / j.at("file").get<std::string>());
      const std::size_t rows = j.at("rows").get<std::size_t>();
      const std::size_t cols = j.at("cols").get<std::size_t>();
      if (v.rows() != rows || v.cols() != cols)
        throw data_error("load_checkpoint: shape mismatch for " + j.at("name").get<std::string>());
      params.create(j.at("name").get<std::string>(), std::move(v));
    }
  }
  if (!have_header) throw data_error("load_checkpoint: missing header");
  Model<float> model(cfg, std::move(params));
  if (model.fingerprint() != fingerprint)
    throw data_error("load_checkpoint: fingerprint mismatch, checkpoint is corrupt");
  return model;
}

// ------------------------------- reports -----------------------------------

/// Deterministic training report (no wall-clock content).
inline void write_train_report(const TrainReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("write_train_report: cannot open " + path.string());
  out << nlohmann::json{{"type", "train_report"},
                        {"best_epoch", r.best_epoch},
                        {"best_sum_r", r.best_sum_r},
                        {"epochs_run", r.epochs_run}}
             .dump()
      << '\n';
  for (const auto& e : r.epochs)
    out << nlohmann::json{{"type", "epoch"},
                          {"epoch", e.epoch},
                          {"ret", e.ret},
                          {"div", e.div},
                          {"rel", e.rel},
                          {"total", e.total}}
               .dump()
        << '\n';
  for (const auto& e : r.evals)
    out << nlohmann::json{{"type", "eval"}, {"epoch", e.epoch}, {"sum_r", e.sum_r}}.dump() << '\n';
}

/// Wall-clock sidecar, separate so the main report stays byte-reproducible.
inline void write_train_timing(const TrainReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << "epoch,wall_ms\n";
  for (const auto& e : r.epochs) out << e.epoch << ',' << e.wall_ms << '\n';
}

// ------------------------------- ablation ----------------------------------

struct AblationRow {
  std::string label;
  bool moment_module = false;
  bool div_loss = false;
  bool rel_loss = false;
};

template <typename T>
struct AblationResult {
  AblationRow row;
  TrainResult<T> trained;
  double corpus_sum_r = 0;  // full-corpus evaluation of the best checkpoint
};

/// The four cumulative configurations: plain base encoder, +moment module,
/// +diversity loss, +relevance loss. Shared seed across rows.
template <typename T = double>
std::vector<AblationResult<T>> ablate(const CorpusData& corpus, const TrainConfig& cfg) {
  const AblationRow rows[4] = {{"baseline", false, false, false},
                               {"moment", true, false, false},
                               {"moment+div", true, true, false},
                               {"full", true, true, true}};
  std::vector<AblationResult<T>> results;
  for (const AblationRow& row : rows) {
    TrainConfig c = cfg;
    c.model.moment_module = row.moment_module;
    c.use_div_loss = row.div_loss;
    c.use_rel_loss = row.rel_loss;
    TrainResult<T> trained = train<T>(corpus, c);
    Model<float> snapshot = trained.model.template cast<float>();
    const double sum_r = evaluate_corpus(corpus, snapshot).t2v.sum_r;
    results.push_back(AblationResult<T>{row, std::move(trained), sum_r});
  }
  return results;
}

}  // namespace amdnet
