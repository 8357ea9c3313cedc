#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "amdnet/errors.hpp"
#include "amdnet/feature_io.hpp"
#include "amdnet/tensor.hpp"

namespace amdnet {

/// Desk-scale stand-in for a PRVR corpus: each video is a concatenation of
/// moment segments, each segment emits frames around a latent concept vector,
/// each query is a noisy copy of its moment's concept in raw feature space.
struct SyntheticCorpusSpec {
  std::size_t num_videos = 200;
  std::size_t moments_per_video = 3;
  std::size_t queries_per_moment = 2;
  std::size_t clips = 32;      // frames emitted per video
  std::size_t input_dim = 128;
  std::size_t num_latent_concepts = 64;
  double noise_std = 0.4;          // relative to unit-norm concepts
  std::size_t temporal_smoothing = 3;  // moving-average width over frames, 0/1 = off
  std::uint64_t seed = 1;

  void validate() const;
};

inline constexpr double kMinMomentWidth = 0.05;

inline void SyntheticCorpusSpec::validate() const {
  if (num_videos == 0 || moments_per_video == 0 || queries_per_moment == 0)
    throw input_error("corpus spec: counts must be positive");
  if (noise_std < 0) throw input_error("corpus spec: noise_std must be nonnegative");
  if (clips < 2 || input_dim == 0) throw input_error("corpus spec: bad feature geometry");
  if (num_latent_concepts < moments_per_video)
    throw input_error("corpus spec: need at least moments_per_video distinct concepts");
  if (double(moments_per_video) * kMinMomentWidth > 1.0)
    throw input_error("corpus spec: infeasible, moments_per_video * min_width exceeds the video");
  if (moments_per_video >= 3) {
    const double min_total = 0.06 + 0.22 + 0.42 + kMinMomentWidth * double(moments_per_video - 3);
    if (min_total > 1.0)
      throw input_error("corpus spec: infeasible, cannot stratify widths for this many moments");
  }
}

struct PlantedMoment {
  double start = 0.0;
  double end = 0.0;
  std::size_t concept_id = 0;
  std::vector<std::string> query_ids;
};

struct VideoRecord {
  std::string id;
  std::string path;  // relative to the manifest directory
  std::vector<PlantedMoment> moments;
};

struct QueryRecord {
  std::string id;
  std::string video_id;
  std::string path;
};

struct CorpusManifest {
  SyntheticCorpusSpec spec;
  std::vector<VideoRecord> videos;
  std::vector<QueryRecord> queries;
  std::string concepts_path;
};

namespace detail {

inline nlohmann::json spec_to_json(const SyntheticCorpusSpec& s) {
  return nlohmann::json{{"num_videos", s.num_videos},
                        {"moments_per_video", s.moments_per_video},
                        {"queries_per_moment", s.queries_per_moment},
                        {"clips", s.clips},
                        {"input_dim", s.input_dim},
                        {"num_latent_concepts", s.num_latent_concepts},
                        {"noise_std", s.noise_std},
                        {"temporal_smoothing", s.temporal_smoothing},
                        {"seed", s.seed}};
}

inline SyntheticCorpusSpec spec_from_json(const nlohmann::json& j) {
  SyntheticCorpusSpec s;
  s.num_videos = j.at("num_videos").get<std::size_t>();
  s.moments_per_video = j.at("moments_per_video").get<std::size_t>();
  s.queries_per_moment = j.at("queries_per_moment").get<std::size_t>();
  s.clips = j.at("clips").get<std::size_t>();
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.num_latent_concepts = j.at("num_latent_concepts").get<std::size_t>();
  s.noise_std = j.at("noise_std").get<double>();
  s.temporal_smoothing = j.at("temporal_smoothing").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

/// Segment widths for one video. For three or more moments the first three
/// widths land in the short/middle/long moment-to-video bins (0,0.2],
/// (0.2,0.4], (0.4,1.0]; extras stay small. Order is shuffled afterwards.
inline std::vector<double> sample_widths(std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w;
  if (count == 1) {
    w = {1.0};
  } else if (count == 2) {
    const double a = 0.15 + 0.20 * u(rng);
    w = {a, 1.0 - a};
  } else {
    const double w_short = 0.06 + 0.09 * u(rng);   // (0, 0.2]
    const double w_mid = 0.22 + 0.10 * u(rng);     // (0.2, 0.4]
    const std::size_t extras = count - 3;
    std::vector<double> extra(extras);
    double budget = 1.0 - w_short - w_mid - 0.42;  // keep the long bin reachable
    double extra_sum = 0.0;
    for (std::size_t i = 0; i < extras; ++i) {
      const double remaining = extras - i;
      const double hi = std::min(0.25, budget - extra_sum - kMinMomentWidth * (remaining - 1));
      extra[i] = kMinMomentWidth + (hi - kMinMomentWidth) * u(rng) * 0.8;
      extra_sum += extra[i];
    }
    w.push_back(w_short);
    w.push_back(w_mid);
    w.push_back(1.0 - w_short - w_mid - extra_sum);  // > 0.42
    for (double e : extra) w.push_back(e);
  }
  std::shuffle(w.begin(), w.end(), rng);
  return w;
}

inline void smooth_rows(Tensor<float>& x, std::size_t width) {
  if (width < 2) return;
  const std::size_t rows = x.rows(), cols = x.cols();
  const std::size_t half = width / 2;
  Tensor<float> out(rows, cols);
  for (std::size_t f = 0; f < rows; ++f) {
    const std::size_t lo = f >= half ? f - half : 0;
    const std::size_t hi = std::min(rows - 1, f + half);
    for (std::size_t j = 0; j < cols; ++j) {
      float acc = 0.0f;
      for (std::size_t i = lo; i <= hi; ++i) acc += x(i, j);
      out(f, j) = acc / float(hi - lo + 1);
    }
  }
  x = std::move(out);
}

}  // namespace detail

inline void save_manifest(const CorpusManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("save_manifest: cannot open " + path.string());
  nlohmann::json head{{"type", "corpus"}, {"concepts", m.concepts_path}};
  head["spec"] = detail::spec_to_json(m.spec);
  out << head.dump() << '\n';
  for (const auto& v : m.videos) {
    nlohmann::json moments = nlohmann::json::array();
    for (const auto& pm : v.moments)
      moments.push_back(nlohmann::json{{"start", pm.start},
                                       {"end", pm.end},
                                       {"concept", pm.concept_id},
                                       {"queries", pm.query_ids}});
    out << nlohmann::json{{"type", "video"}, {"id", v.id}, {"path", v.path}, {"moments", moments}}
               .dump()
        << '\n';
  }
  for (const auto& q : m.queries)
    out << nlohmann::json{{"type", "query"}, {"id", q.id}, {"video", q.video_id}, {"path", q.path}}
               .dump()
        << '\n';
  if (!out) throw data_error("save_manifest: write failed for " + path.string());
}

inline CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("load_manifest: cannot open " + path.string());
  CorpusManifest m;
  std::unordered_map<std::string, bool> video_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw data_error("load_manifest: bad record at line " + std::to_string(lineno) + ": " +
                       e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "corpus") {
      m.spec = detail::spec_from_json(j.at("spec"));
      m.concepts_path = j.value("concepts", "");
    } else if (type == "video") {
      VideoRecord v;
      v.id = j.at("id").get<std::string>();
      v.path = j.at("path").get<std::string>();
      for (const auto& pm : j.at("moments")) {
        PlantedMoment p;
        p.start = pm.at("start").get<double>();
        p.end = pm.at("end").get<double>();
        p.concept_id = pm.at("concept").get<std::size_t>();
        p.query_ids = pm.at("queries").get<std::vector<std::string>>();
        v.moments.push_back(std::move(p));
      }
      video_ids[v.id] = true;
      m.videos.push_back(std::move(v));
    } else if (type == "query") {
      m.queries.push_back(QueryRecord{j.at("id").get<std::string>(),
                                      j.at("video").get<std::string>(),
                                      j.at("path").get<std::string>()});
    } else {
      throw data_error("load_manifest: unknown record type at line " + std::to_string(lineno));
    }
  }
  for (const auto& q : m.queries)
    if (!video_ids.count(q.video_id))
      throw data_error("load_manifest: query " + q.id + " references missing video " + q.video_id);
  return m;
}

/// Generates feature files plus manifest under out_dir. Deterministic: the
/// same spec produces byte-identical files.
inline CorpusManifest generate_corpus(const SyntheticCorpusSpec& spec,
                                      const std::filesystem::path& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "features");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Unit-norm latent concepts.
  Tensor<float> concepts(spec.num_latent_concepts, spec.input_dim);
  for (std::size_t c = 0; c < spec.num_latent_concepts; ++c) {
    double sq = 0.0;
    std::vector<double> v(spec.input_dim);
    for (auto& x : v) {
      x = gauss(rng);
      sq += x * x;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t j = 0; j < spec.input_dim; ++j)
      concepts(c, j) = float(v[j] * inv);
  }
  write_feature_file(out_dir / "concepts.prvf", concepts);

  CorpusManifest m;
  m.spec = spec;
  m.concepts_path = "concepts.prvf";
  const double noise_scale = spec.noise_std / std::sqrt(double(spec.input_dim));
  std::size_t query_counter = 0;

  for (std::size_t vi = 0; vi < spec.num_videos; ++vi) {
    char vid[16];
    std::snprintf(vid, sizeof vid, "v%05zu", vi);
    VideoRecord video;
    video.id = vid;
    video.path = std::string("features/") + vid + ".prvf";

    std::vector<double> widths = detail::sample_widths(spec.moments_per_video, rng);

    // Distinct concepts within one video.
    std::vector<std::size_t> pool(spec.num_latent_concepts);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    for (std::size_t i = 0; i < spec.moments_per_video; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }

    double cursor = 0.0;
    for (std::size_t mi = 0; mi < spec.moments_per_video; ++mi) {
      PlantedMoment pm;
      pm.start = cursor;
      cursor += widths[mi];
      pm.end = mi + 1 == spec.moments_per_video ? 1.0 : cursor;
      pm.concept_id = pool[mi];
      video.moments.push_back(std::move(pm));
    }

    // Frames: per-frame concept + noise, then temporal smoothing.
    Tensor<float> frames(spec.clips, spec.input_dim);
    for (std::size_t f = 0; f < spec.clips; ++f) {
      const double x = (double(f) + 0.5) / double(spec.clips);
      std::size_t seg = 0;
      while (seg + 1 < video.moments.size() && x >= video.moments[seg].end) ++seg;
      const std::size_t cid = video.moments[seg].concept_id;
      for (std::size_t j = 0; j < spec.input_dim; ++j)
        frames(f, j) = float(concepts(cid, j) + noise_scale * gauss(rng));
    }
    detail::smooth_rows(frames, spec.temporal_smoothing);
    write_feature_file(out_dir / video.path, frames);

    // Queries: noisy concept copies in raw feature space.
    for (std::size_t mi = 0; mi < spec.moments_per_video; ++mi) {
      for (std::size_t qi = 0; qi < spec.queries_per_moment; ++qi) {
        char qid[16];
        std::snprintf(qid, sizeof qid, "q%06zu", query_counter++);
        Tensor<float> qf(1, spec.input_dim);
        for (std::size_t j = 0; j < spec.input_dim; ++j)
          qf(0, j) =
              float(concepts(video.moments[mi].concept_id, j) + noise_scale * gauss(rng));
        const std::string qpath = std::string("features/") + qid + ".prvf";
        write_feature_file(out_dir / qpath, qf);
        video.moments[mi].query_ids.push_back(qid);
        m.queries.push_back(QueryRecord{qid, video.id, qpath});
      }
    }
    m.videos.push_back(std::move(video));
  }

  save_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

/// Corpus loaded into memory: manifest plus all raw feature tensors.
struct CorpusData {
  CorpusManifest manifest;
  std::filesystem::path root;
  std::vector<Tensor<float>> video_features;  // aligned with manifest.videos
  std::vector<Tensor<float>> query_features;  // aligned with manifest.queries
  Tensor<float> concepts;
  std::unordered_map<std::string, std::size_t> video_index;
  std::unordered_map<std::string, std::size_t> query_index;

  const Tensor<float>& video_raw(const std::string& id) const {
    auto it = video_index.find(id);
    if (it == video_index.end()) throw data_error("unknown video id: " + id);
    return video_features[it->second];
  }
};

inline CorpusData load_corpus(const std::filesystem::path& manifest_path) {
  CorpusData data;
  data.manifest = load_manifest(manifest_path);
  data.root = manifest_path.parent_path();
  data.video_features.reserve(data.manifest.videos.size());
  for (std::size_t i = 0; i < data.manifest.videos.size(); ++i) {
    const auto& v = data.manifest.videos[i];
    data.video_features.push_back(load_feature_file(data.root / v.path));
    data.video_index[v.id] = i;
  }
  data.query_features.reserve(data.manifest.queries.size());
  for (std::size_t i = 0; i < data.manifest.queries.size(); ++i) {
    const auto& q = data.manifest.queries[i];
    data.query_features.push_back(load_feature_file(data.root / q.path));
    data.query_index[q.id] = i;
  }
  if (!data.manifest.concepts_path.empty() &&
      std::filesystem::exists(data.root / data.manifest.concepts_path))
    data.concepts = load_feature_file(data.root / data.manifest.concepts_path);
  return data;
}

/// Mean of sim(query, own concept) - mean sim(query, other concepts) in raw
/// feature space; positive margins make the retrieval task learnable.
inline double latent_margin(const CorpusData& data) {
  if (data.concepts.empty()) throw data_error("latent_margin: corpus has no concepts file");
  const std::size_t nc = data.concepts.rows(), dim = data.concepts.cols();
  auto cosine = [&](const Tensor<float>& q, std::size_t cid) {
    double dot = 0.0, qn = 0.0, cn = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      dot += double(q[j]) * data.concepts(cid, j);
      qn += double(q[j]) * q[j];
      cn += double(data.concepts(cid, j)) * data.concepts(cid, j);
    }
    return dot / std::sqrt(qn * cn);
  };
  double margin = 0.0;
  std::size_t count = 0;
  for (const auto& v : data.manifest.videos) {
    for (const auto& pm : v.moments) {
      for (const auto& qid : pm.query_ids) {
        const Tensor<float>& q = data.query_features[data.query_index.at(qid)];
        const double own = cosine(q, pm.concept_id);
        double others = 0.0;
        for (std::size_t c = 0; c < nc; ++c)
          if (c != pm.concept_id) others += cosine(q, c);
        margin += own - others / double(nc - 1);
        ++count;
      }
    }
  }
  return margin / double(count);
}

}  // namespace amdnet
