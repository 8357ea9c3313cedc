#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "amdnet/model.hpp"
#include "amdnet/ops.hpp"

namespace amdnet {

struct LossWeights {
  double lambda_ret = 0.02;
  double lambda_div = 1.0;
  double lambda_rel = 1.0;
  double alpha = 0.15;  // diversity target
  double beta = 0.1;    // relevance margin

  void validate() const {
    if (lambda_ret < 0 || lambda_div < 0 || lambda_rel < 0 || alpha < 0)
      throw input_error("loss weights must be nonnegative");
  }
};

/// Positive/negative pairing of a batch: every query has exactly one positive
/// video; a video owns the set of its positive queries.
struct BatchPairing {
  std::vector<std::size_t> video_of_query;
  std::vector<std::vector<std::size_t>> queries_of_video;

  void validate(std::size_t n_queries, std::size_t n_videos) const {
    if (video_of_query.size() != n_queries || queries_of_video.size() != n_videos)
      throw input_error("batch pairing does not match the score matrix");
    for (std::size_t v : video_of_query)
      if (v >= n_videos) throw input_error("batch pairing references a video outside the batch");
  }
};

template <typename T>
struct BatchScores {
  Tensor<T> scores;  // queries x videos
  BatchPairing pairing;
};

/// Fused infoNCE retrieval loss over exp(S / temperature).
///
/// Per video, the video-to-multiquery term averages log ratios over the
/// video's positive queries (other positives of the same video are excluded
/// from its negative set); the query-to-video term uses all other batch
/// videos as negatives and is averaged over the same positives. A global max
/// shift keeps exp in range; the loss is invariant to it.
template <typename T>
Var retrieval_loss(Tape<T>& t, Var scores, const BatchPairing& pairing, T temperature) {
  const Tensor<T>& S = t.value(scores);
  const std::size_t nq = S.rows(), nv = S.cols();
  if (nq == 0 || nv == 0) throw input_error("retrieval_loss: empty batch");
  pairing.validate(nq, nv);

  T mx = S[0];
  for (std::size_t i = 1; i < S.size(); ++i) mx = std::max(mx, S[i]);
  const T shift = mx / temperature;

  Tensor<T> e(nq, nv);
  for (std::size_t i = 0; i < S.size(); ++i) e[i] = std::exp(S[i] / temperature - shift);

  std::vector<T> row_sum(nq, T(0)), col_sum(nv, T(0)), col_pos_sum(nv, T(0));
  for (std::size_t q = 0; q < nq; ++q)
    for (std::size_t v = 0; v < nv; ++v) {
      row_sum[q] += e(q, v);
      col_sum[v] += e(q, v);
    }
  for (std::size_t v = 0; v < nv; ++v)
    for (std::size_t q : pairing.queries_of_video[v]) col_pos_sum[v] += e(q, v);

  T loss = T(0);
  for (std::size_t v = 0; v < nv; ++v) {
    const auto& pos = pairing.queries_of_video[v];
    if (pos.empty()) continue;
    T acc = T(0);
    for (std::size_t q : pos) {
      const T eqv = e(q, v);
      const T d1 = eqv + (col_sum[v] - col_pos_sum[v]);  // negatives: queries outside P_v
      acc += std::log(eqv / d1) + std::log(eqv / row_sum[q]);
    }
    loss -= acc / static_cast<T>(pos.size());
  }
  loss /= static_cast<T>(nv);

  Tensor<T> out(1, 1);
  out[0] = loss;
  return t.push(std::move(out), [scores, pairing, temperature, e = std::move(e),
                                 row_sum = std::move(row_sum), col_sum = std::move(col_sum),
                                 col_pos_sum = std::move(col_pos_sum)](Tape<T>& t, Var self) {
    const Tensor<T>* g = t.grad_if_any(self);
    if (!g) return;
    const T go = (*g)[0];
    const std::size_t nq = e.rows(), nv = e.cols();
    Tensor<T> ge(nq, nv);

    std::vector<T> row_coef(nq, T(0)), col_coef(nv, T(0));
    for (std::size_t v = 0; v < nv; ++v) {
      const auto& pos = pairing.queries_of_video[v];
      if (pos.empty()) continue;
      const T w = T(1) / (static_cast<T>(nv) * static_cast<T>(pos.size()));
      for (std::size_t q : pos) {
        const T eqv = e(q, v);
        const T d1 = eqv + (col_sum[v] - col_pos_sum[v]);
        row_coef[q] += w / row_sum[q];
        col_coef[v] += w / d1;
        ge(q, v) += -T(2) * w / eqv + w / d1;
      }
    }
    for (std::size_t q = 0; q < nq; ++q)
      for (std::size_t v = 0; v < nv; ++v) ge(q, v) += row_coef[q];
    for (std::size_t v = 0; v < nv; ++v) {
      const auto& pos = pairing.queries_of_video[v];
      std::vector<char> is_pos(nq, 0);
      for (std::size_t q : pos) is_pos[q] = 1;
      for (std::size_t q = 0; q < nq; ++q)
        if (!is_pos[q]) ge(q, v) += col_coef[v];
    }

    Tensor<T>& gs = t.grad(scores);
    for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += go * ge[i] * e[i] / temperature;
  });
}

/// || M M^T - alpha I ||_F^2 for one mask.
template <typename T>
Var diversity_loss(Tape<T>& t, Var mask, T alpha) {
  Var gram = matmul_nt(t, mask, mask);
  return frobenius_sq(t, sub_scaled_identity(t, gram, alpha));
}

/// Hinge column for one video: [beta + sim(q, summary) - max_h sim(q, roi_h)]_+
/// for every query row. Callers pick out the rows that belong to the video.
/// Pass queries_normalized=true when the rows are already unit length
/// (normalization is idempotent, this only skips redundant tape nodes).
template <typename T>
Var relevance_hinges(Tape<T>& t, Var queries, Var roi, Var summary, T beta, SimilarityKind sim,
                     bool queries_normalized = false) {
  Var q = queries, r = roi, s = summary;
  if (sim == SimilarityKind::kCosine) {
    if (!queries_normalized) q = l2_normalize_rows(t, q);
    r = l2_normalize_rows(t, r);
    s = l2_normalize_rows(t, s);
  }
  Var best_moment = row_max(t, matmul_nt(t, q, r));  // queries x 1
  Var global = matmul_nt(t, q, s);                   // queries x 1
  const std::size_t nq = t.value(best_moment).rows();
  Var margin = add(t, global, t.input(Tensor<T>::full(nq, 1, beta)));
  return relu(t, add(t, margin, scale(t, best_moment, T(-1))));
}

template <typename T>
Var total_loss(Tape<T>& t, Var ret, Var div, Var rel, const LossWeights& w) {
  return affine_combine(t, std::vector<Var>{ret, div, rel},
                        std::vector<T>{static_cast<T>(w.lambda_ret), static_cast<T>(w.lambda_div),
                                       static_cast<T>(w.lambda_rel)});
}

// ------------------------- value-level surface ------------------------------

template <typename T>
T retrieval_loss(const BatchScores<T>& batch, T temperature) {
  Tape<T> t;
  return t.value(retrieval_loss(t, t.input(batch.scores), batch.pairing, temperature))[0];
}

template <typename T>
T diversity_loss(const Tensor<T>& mask, T alpha) {
  Tape<T> t;
  return t.value(diversity_loss(t, t.input(mask), alpha))[0];
}

template <typename T>
T relevance_loss(const Tensor<T>& query, const Tensor<T>& roi, const Tensor<T>& summary, T beta,
                 SimilarityKind sim) {
  Tape<T> t;
  Var h = relevance_hinges(t, t.input(query.reshaped(1, query.size())), t.input(roi),
                           t.input(summary.reshaped(1, summary.size())), beta, sim);
  return t.value(h)[0];
}

template <typename T>
T total_loss(T ret, T div, T rel, const LossWeights& w) {
  return static_cast<T>(w.lambda_ret) * ret + static_cast<T>(w.lambda_div) * div +
         static_cast<T>(w.lambda_rel) * rel;
}

}  // namespace amdnet
