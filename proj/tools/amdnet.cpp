// Command-line surface: corpus generation, training, ablation, evaluation,
// indexing, search and the ranking benchmark.
//
// Exit codes: 0 success, 2 input error, 3 data/format error.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "amdnet/engine.hpp"
#include "amdnet/evalkit.hpp"
#include "amdnet/kvconfig.hpp"
#include "amdnet/synthdata.hpp"
#include "amdnet/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string precision = "f64";
};

amdnet::RunConfig make_run_config(const GlobalOpts& g) {
  amdnet::RunConfig rc;
  if (!g.config_path.empty()) rc = amdnet::load_run_config(g.config_path);
  if (g.seed) rc.set_seed(*g.seed);
  if (g.precision != "f32" && g.precision != "f64")
    throw amdnet::input_error("--precision must be f32 or f64");
  return rc;
}

std::vector<double> parse_reals(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& csv) {
  std::vector<std::size_t> out;
  for (double v : parse_reals(csv)) out.push_back(std::size_t(v));
  return out;
}

void write_bins_csv(const std::vector<amdnet::BinSummary>& bins, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << "bin,lo,hi,count,sum_r\n";
  out << std::setprecision(10);
  for (const auto& b : bins)
    out << b.label << ',' << b.lo << ',' << b.hi << ',' << b.count << ',' << b.sum_r << '\n';
}

json recall_json(const amdnet::RecallSet& r) {
  return json{{"r1", r.r1}, {"r5", r.r5}, {"r10", r.r10}, {"r100", r.r100}, {"sum_r", r.sum_r}};
}

void write_eval_outputs(const amdnet::EvalReport& rep, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "eval_report.jsonl", std::ios::trunc);
  json summary{{"type", "eval_summary"},
               {"t2v", recall_json(rep.t2v)},
               {"v2t", recall_json(rep.v2t)},
               {"latent_margin", rep.latent_margin}};
  if (rep.has_moments)
    summary["localization"] = json{{"mean_best_iou", rep.localization.mean_best_iou},
                                   {"mean_pairwise_iou", rep.localization.mean_pairwise_iou}};
  out << summary.dump() << '\n';
  for (const auto& b : rep.mv_bins)
    out << json{{"type", "mv_bin"}, {"bin", b.label}, {"count", b.count}, {"sum_r", b.sum_r}}.dump()
        << '\n';
  for (const auto& b : rep.overlap_bins)
    out << json{{"type", "overlap_bin"}, {"bin", b.label}, {"count", b.count}, {"sum_r", b.sum_r}}
               .dump()
        << '\n';
  for (std::size_t q = 0; q < rep.per_query.size(); ++q) {
    json top = json::array();
    for (const auto& [id, score] : rep.per_query[q].ranking)
      top.push_back(json{{"video", id}, {"score", score}});
    out << json{{"type", "query"},
                {"id", rep.per_query[q].query_id},
                {"gt_rank", rep.per_query[q].gt_rank},
                {"mv_ratio", rep.analyses[q].mv_ratio},
                {"overlap", rep.analyses[q].overlap_degree},
                {"top", top}}
               .dump()
        << '\n';
  }
  write_bins_csv(std::vector<amdnet::BinSummary>(rep.mv_bins.begin(), rep.mv_bins.end()),
                 out_dir / "mv_bins.csv");
  write_bins_csv(rep.overlap_bins, out_dir / "overlap_bins.csv");
}

void print_recalls(const char* tag, const amdnet::RecallSet& r) {
  std::cout << tag << " R@1 " << r.r1 << "  R@5 " << r.r5 << "  R@10 " << r.r10 << "  R@100 "
            << r.r100 << "  SumR " << r.sum_r << '\n';
}

int run_gen(const GlobalOpts& g, const std::string& out_dir) {
  amdnet::RunConfig rc = make_run_config(g);
  amdnet::CorpusManifest m = amdnet::generate_corpus(rc.corpus, out_dir);
  std::cout << "generated " << m.videos.size() << " videos, " << m.queries.size()
            << " queries under " << out_dir << '\n';
  return 0;
}

template <typename T>
int train_with(const amdnet::RunConfig& rc, const amdnet::CorpusData& corpus,
               const fs::path& out_dir) {
  auto result = amdnet::train<T>(corpus, rc.train);
  fs::create_directories(out_dir);
  amdnet::save_checkpoint(result.model.template cast<float>(), out_dir / "checkpoint");
  amdnet::write_train_report(result.report, out_dir / "train_report.jsonl");
  amdnet::write_train_timing(result.report, out_dir / "train_timing.txt");
  std::cout << "trained " << result.report.epochs_run << " epochs, best val SumR "
            << result.report.best_sum_r << " at epoch " << result.report.best_epoch << '\n';
  return 0;
}

int run_train(const GlobalOpts& g, const std::string& corpus_path, const std::string& out_dir,
              bool no_moment, bool no_div, bool no_rel) {
  amdnet::RunConfig rc = make_run_config(g);
  rc.train.model.moment_module = !no_moment;
  rc.train.use_div_loss = !no_div;
  rc.train.use_rel_loss = !no_rel;
  amdnet::CorpusData corpus = amdnet::load_corpus(corpus_path);
  if (g.precision == "f32") return train_with<float>(rc, corpus, out_dir);
  return train_with<double>(rc, corpus, out_dir);
}

int run_ablate(const GlobalOpts& g, const std::string& corpus_path, const std::string& out_dir) {
  amdnet::RunConfig rc = make_run_config(g);
  amdnet::CorpusData corpus = amdnet::load_corpus(corpus_path);
  auto rows = amdnet::ablate<double>(corpus, rc.train);
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "ablate.csv", std::ios::trunc);
  csv << "row,moment_module,div_loss,rel_loss,corpus_sum_r,best_val_sum_r,epochs\n";
  csv << std::setprecision(10);
  std::ofstream jl(fs::path(out_dir) / "ablate_report.jsonl", std::ios::trunc);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const fs::path row_dir = fs::path(out_dir) / ("row" + std::to_string(i) + "_" + r.row.label);
    amdnet::save_checkpoint(r.trained.model.cast<float>(), row_dir / "checkpoint");
    amdnet::write_train_report(r.trained.report, row_dir / "train_report.jsonl");
    amdnet::write_train_timing(r.trained.report, row_dir / "train_timing.txt");
    csv << r.row.label << ',' << r.row.moment_module << ',' << r.row.div_loss << ','
        << r.row.rel_loss << ',' << r.corpus_sum_r << ',' << r.trained.report.best_sum_r << ','
        << r.trained.report.epochs_run << '\n';
    jl << json{{"type", "ablation_row"},
               {"row", r.row.label},
               {"moment_module", r.row.moment_module},
               {"div_loss", r.row.div_loss},
               {"rel_loss", r.row.rel_loss},
               {"corpus_sum_r", r.corpus_sum_r}}
              .dump()
       << '\n';
    std::cout << r.row.label << ": corpus SumR " << r.corpus_sum_r << '\n';
  }
  return 0;
}

int run_eval(const GlobalOpts& g, const std::string& corpus_path, const std::string& params_dir,
             const std::string& out_dir, const std::string& overlap_bins) {
  amdnet::CorpusData corpus = amdnet::load_corpus(corpus_path);
  amdnet::Model<float> model = amdnet::load_checkpoint(params_dir);
  amdnet::EvalOptions opt;
  if (!overlap_bins.empty()) opt.overlap_edges = parse_reals(overlap_bins);
  auto rep = amdnet::evaluate_corpus(corpus, model, opt);
  write_eval_outputs(rep, out_dir);
  print_recalls("t2v:", rep.t2v);
  print_recalls("v2t:", rep.v2t);
  if (rep.has_moments)
    std::cout << "localization: best IoU " << rep.localization.mean_best_iou << ", pairwise IoU "
              << rep.localization.mean_pairwise_iou << '\n';
  return 0;
}

int run_index(const GlobalOpts&, const std::string& corpus_path, const std::string& params_dir,
              const std::string& out_dir, bool dense) {
  amdnet::CorpusData corpus = amdnet::load_corpus(corpus_path);
  amdnet::Model<float> model = amdnet::load_checkpoint(params_dir);
  amdnet::VideoIndex index =
      dense ? amdnet::build_dense_baseline(corpus, model) : amdnet::build_index(corpus, model);
  amdnet::save_index(index, out_dir);
  std::cout << "indexed " << index.count() << " videos (" << amdnet::to_string(index.kind)
            << ", " << index.rows_per_video << " rows/video, "
            << index.per_video_payload_bytes() << " payload bytes/video)\n";
  return 0;
}

int run_search(const GlobalOpts&, const std::string& index_dir, const std::string& params_dir,
               const std::string& query_file, std::size_t top_k, const std::string& out_path) {
  amdnet::VideoIndex index = amdnet::load_index(index_dir);
  amdnet::Model<float> model = amdnet::load_checkpoint(params_dir);
  amdnet::verify_compatible(model, index);
  amdnet::Tensor<float> queries = amdnet::load_feature_file(query_file);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) throw amdnet::data_error("search: cannot open " + out_path);
    out = &file;
  }
  for (std::size_t r = 0; r < queries.rows(); ++r) {
    amdnet::Tensor<float> row(1, queries.cols());
    for (std::size_t j = 0; j < queries.cols(); ++j) row[j] = queries(r, j);
    auto result = amdnet::rank_query(row, index, model, top_k);
    for (std::size_t i = 0; i < result.ranking.size(); ++i)
      (*out) << json{{"type", "hit"},
                     {"query_row", r},
                     {"rank", i + 1},
                     {"video", result.ranking[i].first},
                     {"score", result.ranking[i].second}}
                    .dump()
             << '\n';
  }
  return 0;
}

int run_bench(const GlobalOpts& g, const std::string& corpus_path, const std::string& sizes_csv,
              bool baseline, std::size_t repetitions, const std::string& params_dir,
              const std::string& out_dir) {
  amdnet::RunConfig rc = make_run_config(g);
  amdnet::CorpusData corpus = amdnet::load_corpus(corpus_path);
  std::optional<amdnet::Model<float>> model;
  if (!params_dir.empty()) {
    model.emplace(amdnet::load_checkpoint(params_dir));
  } else {
    rc.train.model.clips = corpus.manifest.spec.clips;
    rc.train.model.input_dim = corpus.manifest.spec.input_dim;
    model.emplace(rc.train.model, rc.train.seed);  // untrained weights: timing only
  }
  auto report = amdnet::bench(corpus, *model, parse_sizes(sizes_csv), repetitions, baseline);
  fs::create_directories(out_dir);
  std::ofstream jl(fs::path(out_dir) / "bench_report.jsonl", std::ios::trunc);
  jl << json{{"type", "bench_meta"},
             {"machine", report.machine},
             {"top_k", report.top_k},
             {"repetitions", repetitions}}
            .dump()
     << '\n';
  std::ofstream csv(fs::path(out_dir) / "bench.csv", std::ios::trunc);
  csv << "kind,db_size,repetitions,median_ms,mean_ms,stddev_ms,index_bytes,scratch_bytes\n";
  csv << std::setprecision(10);
  for (const auto& row : report.rows) {
    jl << json{{"type", "bench_row"},
               {"kind", row.kind},
               {"db_size", row.db_size},
               {"median_ms", row.median_ms},
               {"mean_ms", row.mean_ms},
               {"stddev_ms", row.stddev_ms},
               {"index_bytes", row.index_bytes},
               {"scratch_bytes", row.scratch_bytes}}
              .dump()
       << '\n';
    csv << row.kind << ',' << row.db_size << ',' << row.repetitions << ',' << row.median_ms << ','
        << row.mean_ms << ',' << row.stddev_ms << ',' << row.index_bytes << ','
        << row.scratch_bytes << '\n';
    std::cout << row.kind << " size " << row.db_size << ": median " << row.median_ms
              << " ms, index " << row.index_bytes << " bytes\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"amdnet: moment-aware partially relevant video retrieval"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "key = value config file");
  app.add_option("--seed", g.seed, "seed override for generation/training");
  app.add_option("--precision", g.precision, "training precision: f32 or f64")
      ->check(CLI::IsMember({"f32", "f64"}));

  std::string corpus_path, out_dir, params_dir, index_dir, query_file, overlap_bins;
  std::string sizes_csv = "500,1000,1500,2000,2500";
  std::size_t top_k = 10, repetitions = 100;
  bool no_moment = false, no_div = false, no_rel = false, dense = false, baseline = false;

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a model on a corpus");
  train->add_option("--corpus", corpus_path, "manifest.jsonl path")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_flag("--no-moment", no_moment, "disable the moment module");
  train->add_flag("--no-div", no_div, "disable the diversity loss");
  train->add_flag("--no-rel", no_rel, "disable the relevance loss");

  auto* ablate = app.add_subcommand("ablate", "run the four-row ablation");
  ablate->add_option("--corpus", corpus_path)->required();
  ablate->add_option("--out", out_dir)->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  eval->add_option("--corpus", corpus_path)->required();
  eval->add_option("--params", params_dir, "checkpoint directory")->required();
  eval->add_option("--out", out_dir)->required();
  eval->add_option("--overlap-bins", overlap_bins, "overlap-degree bin edges, e.g. 0,0.2,0.5,1");

  auto* index = app.add_subcommand("index", "build and persist a video index");
  index->add_option("--corpus", corpus_path)->required();
  index->add_option("--params", params_dir)->required();
  index->add_option("--out", out_dir)->required();
  index->add_flag("--dense", dense, "build the dense multi-scale clip baseline");

  auto* search = app.add_subcommand("search", "rank a query file against an index");
  search->add_option("--index", index_dir)->required();
  search->add_option("--params", params_dir)->required();
  search->add_option("--query-file", query_file, "PRVF file, one query per row")->required();
  search->add_option("--top-k", top_k);
  search->add_option("--out", out_dir, "write hits to this file instead of stdout");

  auto* bench = app.add_subcommand("bench", "single-query ranking benchmark");
  bench->add_option("--corpus", corpus_path)->required();
  bench->add_option("--sizes", sizes_csv, "database sizes, comma separated");
  bench->add_flag("--baseline", baseline, "also benchmark the dense clip baseline");
  bench->add_option("--repetitions", repetitions);
  bench->add_option("--params", params_dir, "optional checkpoint (untrained model otherwise)");
  bench->add_option("--out", out_dir)->required();

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return run_gen(g, out_dir);
    if (train->parsed()) return run_train(g, corpus_path, out_dir, no_moment, no_div, no_rel);
    if (ablate->parsed()) return run_ablate(g, corpus_path, out_dir);
    if (eval->parsed()) return run_eval(g, corpus_path, params_dir, out_dir, overlap_bins);
    if (index->parsed()) return run_index(g, corpus_path, params_dir, out_dir, dense);
    if (search->parsed()) return run_search(g, index_dir, params_dir, query_file, top_k, out_dir);
    if (bench->parsed())
      return run_bench(g, corpus_path, sizes_csv, baseline, repetitions, params_dir, out_dir);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const amdnet::input_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const amdnet::data_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
