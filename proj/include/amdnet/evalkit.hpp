#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "amdnet/errors.hpp"
#include "amdnet/tensor.hpp"

namespace amdnet {

/// One query's retrieval outcome: videos ordered by nonincreasing score with
/// ascending-id tie break, plus the 1-based rank of the ground-truth video.
struct RankingResult {
  std::string query_id;
  std::vector<std::pair<std::string, float>> ranking;  // may be truncated to top-k
  std::size_t gt_rank = 0;                             // computed over the full database
};

// Paper-scale SumR reference points on the real datasets. Not reproducible at
// desk scale (they need the real CLIP features); kept as documented targets
// for anyone feeding real features through the same ingestion format.
inline constexpr double kPaperScaleSumRActivityNet = 172.8;
inline constexpr double kPaperScaleSumRTvr = 205.1;

inline double recall_at_k(const std::vector<RankingResult>& results, std::size_t k) {
  if (results.empty()) throw input_error("recall_at_k: empty result set");
  if (k < 1) throw input_error("recall_at_k: k must be >= 1");
  std::size_t hits = 0;
  for (const auto& r : results) {
    if (r.gt_rank == 0) throw input_error("recall_at_k: result without ground-truth rank");
    if (r.gt_rank <= k) ++hits;
  }
  return 100.0 * double(hits) / double(results.size());
}

inline double sum_recall(const std::vector<RankingResult>& results) {
  return recall_at_k(results, 1) + recall_at_k(results, 5) + recall_at_k(results, 10) +
         recall_at_k(results, 100);
}

/// Video-to-text recall: fraction of videos whose best-ranked relevant query
/// lands in the top k. scores is videos x queries; ties break toward the
/// lower query index.
inline double video_to_text_recall(const Tensor<float>& scores,
                                   const std::vector<std::vector<std::size_t>>& queries_of_video,
                                   std::size_t k) {
  const std::size_t nv = scores.rows(), nq = scores.cols();
  if (nv == 0 || queries_of_video.size() != nv)
    throw input_error("video_to_text_recall: bad inputs");
  if (k < 1) throw input_error("video_to_text_recall: k must be >= 1");
  std::size_t hits = 0;
  for (std::size_t v = 0; v < nv; ++v) {
    const auto& relevant = queries_of_video[v];
    if (relevant.empty())
      throw input_error("video_to_text_recall: video without relevant queries");
    std::size_t best_rank = nq + 1;
    for (std::size_t q : relevant) {
      std::size_t rank = 1;
      for (std::size_t j = 0; j < nq; ++j) {
        if (scores(v, j) > scores(v, q) || (scores(v, j) == scores(v, q) && j < q)) ++rank;
      }
      best_rank = std::min(best_rank, rank);
    }
    if (best_rank <= k) ++hits;
  }
  return 100.0 * double(hits) / double(nv);
}

struct QueryAnalysis {
  double mv_ratio = 0.0;       // relevant moment length / video length, in (0,1]
  double overlap_degree = 0.0; // max overlap with sibling moments, in [0,1]
};

struct BinSummary {
  std::string label;
  double lo = 0.0, hi = 0.0;  // (lo, hi] except the special zero bin
  std::size_t count = 0;
  double sum_r = 0.0;
};

/// Moment-to-video grouping with the fixed short/middle/long bins
/// (0,0.2], (0.2,0.4], (0.4,1.0].
inline std::array<BinSummary, 3> group_by_mv(const std::vector<QueryAnalysis>& analyses,
                                             const std::vector<RankingResult>& results) {
  if (analyses.size() != results.size()) throw input_error("group_by_mv: size mismatch");
  std::array<BinSummary, 3> bins{BinSummary{"short", 0.0, 0.2}, BinSummary{"middle", 0.2, 0.4},
                                 BinSummary{"long", 0.4, 1.0}};
  std::array<std::vector<RankingResult>, 3> grouped;
  for (std::size_t i = 0; i < analyses.size(); ++i) {
    const double r = analyses[i].mv_ratio;
    if (!(r > 0.0) || r > 1.0)
      throw data_error("group_by_mv: moment-to-video ratio outside (0,1]");
    const std::size_t b = r <= 0.2 ? 0 : (r <= 0.4 ? 1 : 2);
    grouped[b].push_back(results[i]);
  }
  for (std::size_t b = 0; b < 3; ++b) {
    bins[b].count = grouped[b].size();
    bins[b].sum_r = grouped[b].empty() ? 0.0 : sum_recall(grouped[b]);
  }
  return bins;
}

/// Per-moment overlap degree: max over sibling moments of
/// intersection / own length. A lone moment scores 0.
inline std::vector<double> overlap_degree(const std::vector<std::pair<double, double>>& moments) {
  std::vector<double> out(moments.size(), 0.0);
  for (std::size_t i = 0; i < moments.size(); ++i) {
    const double len = moments[i].second - moments[i].first;
    if (!(len > 0.0)) throw data_error("overlap_degree: zero-length moment");
    for (std::size_t j = 0; j < moments.size(); ++j) {
      if (i == j) continue;
      const double inter = std::max(
          0.0, std::min(moments[i].second, moments[j].second) -
                   std::max(moments[i].first, moments[j].first));
      out[i] = std::max(out[i], inter / len);
    }
  }
  return out;
}

/// Overlap-degree grouping; edges are configurable, a dedicated bin holds
/// U == 0 and the rest are (lo, hi].
inline std::vector<BinSummary> group_by_overlap(const std::vector<QueryAnalysis>& analyses,
                                                const std::vector<RankingResult>& results,
                                                const std::vector<double>& edges = {0.0, 0.2, 0.5,
                                                                                    1.0}) {
  if (analyses.size() != results.size()) throw input_error("group_by_overlap: size mismatch");
  if (edges.size() < 2) throw input_error("group_by_overlap: need at least two edges");
  std::vector<BinSummary> bins;
  bins.push_back(BinSummary{"U=0", 0.0, 0.0});
  for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
    std::ostringstream label;
    label << "U(" << edges[e] << "," << edges[e + 1] << "]";
    bins.push_back(BinSummary{label.str(), edges[e], edges[e + 1]});
  }
  std::vector<std::vector<RankingResult>> grouped(bins.size());
  for (std::size_t i = 0; i < analyses.size(); ++i) {
    const double u = analyses[i].overlap_degree;
    if (u < 0.0 || u > 1.0) throw data_error("group_by_overlap: U outside [0,1]");
    std::size_t b = 0;
    if (u > 0.0) {
      b = bins.size() - 1;
      for (std::size_t e = 1; e < bins.size(); ++e)
        if (u <= bins[e].hi) {
          b = e;
          break;
        }
    }
    grouped[b].push_back(results[i]);
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].count = grouped[b].size();
    bins[b].sum_r = grouped[b].empty() ? 0.0 : sum_recall(grouped[b]);
  }
  return bins;
}

struct SpanInterval {
  double lo = 0.0, hi = 0.0;
};

/// Span anchors to a concrete interval [c - gamma w, c + gamma w] clipped to
/// [0,1]; gamma = 3 sigma matches the window support.
inline SpanInterval span_interval(double center, double width, double gamma) {
  SpanInterval s{std::max(0.0, center - gamma * width), std::min(1.0, center + gamma * width)};
  if (s.hi < s.lo) s.hi = s.lo;
  return s;
}

inline double interval_iou(const SpanInterval& a, const SpanInterval& b) {
  const double inter = std::max(0.0, std::min(a.hi, b.hi) - std::max(a.lo, b.lo));
  const double uni = std::max(a.hi, b.hi) - std::min(a.lo, b.lo);
  return uni > 0.0 ? inter / uni : 0.0;
}

struct LocalizationQuality {
  double mean_best_iou = 0.0;      // planted moments vs best predicted span
  double mean_pairwise_iou = 0.0;  // diversity of the predicted spans
};

inline LocalizationQuality localization_quality(
    const std::vector<std::vector<SpanInterval>>& predicted_per_video,
    const std::vector<std::vector<std::pair<double, double>>>& planted_per_video) {
  if (predicted_per_video.size() != planted_per_video.size())
    throw input_error("localization_quality: video count mismatch");
  double best_sum = 0.0;
  std::size_t planted_count = 0;
  double pair_sum = 0.0;
  std::size_t pair_videos = 0;
  for (std::size_t v = 0; v < predicted_per_video.size(); ++v) {
    const auto& pred = predicted_per_video[v];
    for (const auto& gt : planted_per_video[v]) {
      const SpanInterval g{gt.first, gt.second};
      double best = 0.0;
      for (const auto& p : pred) best = std::max(best, interval_iou(p, g));
      best_sum += best;
      ++planted_count;
    }
    if (pred.size() >= 2) {
      double acc = 0.0;
      std::size_t pairs = 0;
      for (std::size_t a = 0; a < pred.size(); ++a)
        for (std::size_t b = a + 1; b < pred.size(); ++b) {
          acc += interval_iou(pred[a], pred[b]);
          ++pairs;
        }
      pair_sum += acc / double(pairs);
      ++pair_videos;
    }
  }
  LocalizationQuality q;
  q.mean_best_iou = planted_count ? best_sum / double(planted_count) : 0.0;
  q.mean_pairwise_iou = pair_videos ? pair_sum / double(pair_videos) : 0.0;
  return q;
}

/// R^2 of the least-squares line through (x, y); 1 means perfectly linear.
inline double linear_fit_r2(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw input_error("linear_fit_r2: need >= 2 points");
  const double n = double(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw input_error("linear_fit_r2: degenerate x values");
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean_y = sy / n;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double fit = slope * xs[i] + intercept;
    ss_res += (ys[i] - fit) * (ys[i] - fit);
    ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
  }
  if (ss_tot == 0.0) return 1.0;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace amdnet
