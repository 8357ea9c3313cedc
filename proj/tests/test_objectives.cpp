#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "amdnet/adam.hpp"
#include "amdnet/gradcheck.hpp"
#include "amdnet/model.hpp"
#include "amdnet/objectives.hpp"

using amdnet::BatchPairing;
using amdnet::BatchScores;
using amdnet::LossWeights;
using amdnet::Model;
using amdnet::ModelConfig;
using amdnet::ParamStore;
using amdnet::SimilarityKind;
using amdnet::Tape;
using amdnet::Tensor;
using amdnet::Var;

namespace {

Tensor<double> rand_mat(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -1.0,
                        double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

BatchScores<double> make_batch(Tensor<double> scores, std::vector<std::size_t> gt) {
  BatchScores<double> b;
  b.scores = std::move(scores);
  b.pairing.video_of_query = gt;
  b.pairing.queries_of_video.assign(b.scores.cols(), {});
  for (std::size_t q = 0; q < gt.size(); ++q) b.pairing.queries_of_video[gt[q]].push_back(q);
  return b;
}

}  // namespace

TEST(LossWeights, PaperDefaults) {
  LossWeights w;
  EXPECT_DOUBLE_EQ(w.lambda_ret, 0.02);
  EXPECT_DOUBLE_EQ(w.lambda_div, 1.0);
  EXPECT_DOUBLE_EQ(w.lambda_rel, 1.0);
  EXPECT_DOUBLE_EQ(w.alpha, 0.15);
  EXPECT_DOUBLE_EQ(w.beta, 0.1);
}

TEST(RetrievalLoss, SinglePairNoNegativesIsZero) {
  auto batch = make_batch(Tensor<double>::from_rows({{0.37}}), {0});
  EXPECT_DOUBLE_EQ(amdnet::retrieval_loss(batch, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(amdnet::retrieval_loss(batch, 0.07), 0.0);
}

TEST(RetrievalLoss, TwoVideosEqualScores) {
  // All four log terms are log(1/2); loss = 2 ln 2.
  auto batch = make_batch(Tensor<double>::from_rows({{0.4, 0.4}, {0.4, 0.4}}), {0, 1});
  EXPECT_NEAR(amdnet::retrieval_loss(batch, 1.0), 2.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(amdnet::retrieval_loss(batch, 1.0), 1.3863, 1e-4);
}

TEST(RetrievalLoss, MonotonicInScores) {
  std::mt19937_64 rng(1);
  auto batch = make_batch(rand_mat(rng, 6, 3), {0, 0, 1, 1, 2, 2});
  const double base = amdnet::retrieval_loss(batch, 0.5);
  EXPECT_TRUE(std::isfinite(base));

  // Increasing a positive score strictly decreases the loss.
  auto up_pos = batch;
  up_pos.scores(0, 0) += 0.05;
  EXPECT_LT(amdnet::retrieval_loss(up_pos, 0.5), base);

  // Increasing a negative score strictly increases the loss.
  auto up_neg = batch;
  up_neg.scores(0, 2) += 0.05;
  EXPECT_GT(amdnet::retrieval_loss(up_neg, 0.5), base);
}

TEST(RetrievalLoss, EmptyBatchRejected) {
  BatchScores<double> empty;
  empty.scores = Tensor<double>(0, 0);
  EXPECT_THROW(amdnet::retrieval_loss(empty, 1.0), amdnet::input_error);
}

TEST(RetrievalLoss, MultiPositiveExcludesSiblingsFromNegatives) {
  // Video 0 owns queries {0,1}. With the sibling excluded, query 0's
  // video-to-multiquery denominator only adds query 2.
  Tensor<double> s = Tensor<double>::from_rows({{1.0, 0.2}, {0.8, 0.1}, {0.3, 0.9}});
  auto batch = make_batch(s, {0, 0, 1});
  const double tau = 1.0;
  auto e = [&](double x) { return std::exp(x / tau); };
  double expect = 0.0;
  // video 0, query 0
  expect -= 0.5 * (std::log(e(1.0) / (e(1.0) + e(0.3))) +
                   std::log(e(1.0) / (e(1.0) + e(0.2))));
  // video 0, query 1
  expect -= 0.5 * (std::log(e(0.8) / (e(0.8) + e(0.3))) +
                   std::log(e(0.8) / (e(0.8) + e(0.1))));
  // video 1, query 2 (negatives: queries 0 and 1)
  expect -= std::log(e(0.9) / (e(0.9) + e(0.2) + e(0.1))) +
            std::log(e(0.9) / (e(0.9) + e(0.3)));
  expect /= 2.0;  // mean over videos
  EXPECT_NEAR(amdnet::retrieval_loss(batch, tau), expect, 1e-12);
}

TEST(RetrievalLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  ParamStore<double> ps;
  ps.create("scores", rand_mat(rng, 6, 3));
  BatchPairing pairing;
  pairing.video_of_query = {0, 0, 1, 1, 2, 2};
  pairing.queries_of_video = {{0, 1}, {2, 3}, {4, 5}};
  auto build = [&](Tape<double>& t) {
    return amdnet::retrieval_loss(t, t.param(ps.at("scores")), pairing, 0.2);
  };
  auto forward = [&]() {
    Tape<double> t;
    return t.value(build(t))[0];
  };
  auto backward = [&]() {
    Tape<double> t;
    t.backward(build(t));
  };
  auto rep = amdnet::finite_diff_grad_check<double>(ps, forward, backward, 1e-5, 200, 3);
  EXPECT_EQ(rep.probe_failures, 0u);
  EXPECT_LE(rep.max_rel_err, 1e-4) << "worst analytic=" << rep.worst_analytic
                                   << " numeric=" << rep.worst_numeric;
}

TEST(DiversityLoss, ZeroMaskGivesAlphaSquaredTimesHeads) {
  Tensor<double> m(4, 32);
  EXPECT_NEAR(amdnet::diversity_loss(m, 0.15), 4 * 0.15 * 0.15, 1e-15);
  EXPECT_NEAR(amdnet::diversity_loss(m, 0.15), 0.09, 1e-15);
}

TEST(DiversityLoss, OrthogonalRowsWithTargetNormVanish) {
  const double alpha = 0.15;
  Tensor<double> m(3, 16);
  m(0, 2) = std::sqrt(alpha);
  m(1, 7) = std::sqrt(alpha);
  m(2, 11) = std::sqrt(alpha);
  EXPECT_NEAR(amdnet::diversity_loss(m, alpha), 0.0, 1e-15);
}

TEST(DiversityLoss, NonnegativeAndZeroOnlyAtTarget) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor<double> m = rand_mat(rng, 3, 8, 0.0, 1.0);
    EXPECT_GE(amdnet::diversity_loss(m, 0.15), 0.0);
  }
  Tensor<double> overlapping = Tensor<double>::from_rows({{1.0, 0.0}, {1.0, 0.0}});
  EXPECT_GT(amdnet::diversity_loss(overlapping, 0.15), 0.0);
}

TEST(RelevanceLoss, SatisfiedMarginIsZero) {
  // Raw inner-product mode for hand numbers: sim(q, summary)=0.3, best
  // moment 0.5, beta 0.1 -> hinge 0.
  Tensor<double> q = Tensor<double>::row({1.0, 0.0});
  Tensor<double> roi = Tensor<double>::from_rows({{0.5, 0.0}, {0.2, 0.0}});
  Tensor<double> summary = Tensor<double>::row({0.3, 0.0});
  EXPECT_DOUBLE_EQ(amdnet::relevance_loss(q, roi, summary, 0.1, SimilarityKind::kDot), 0.0);
}

TEST(RelevanceLoss, ViolatedMarginHandValue) {
  Tensor<double> q = Tensor<double>::row({1.0, 0.0});
  Tensor<double> roi = Tensor<double>::from_rows({{0.35, 0.0}, {0.2, 0.0}});
  Tensor<double> summary = Tensor<double>::row({0.3, 0.0});
  EXPECT_NEAR(amdnet::relevance_loss(q, roi, summary, 0.1, SimilarityKind::kDot), 0.05, 1e-12);
}

TEST(RelevanceLoss, BoundedUnderCosine) {
  std::mt19937_64 rng(5);
  const double beta = 0.1;
  for (int rep = 0; rep < 30; ++rep) {
    Tensor<double> q = rand_mat(rng, 1, 6);
    Tensor<double> roi = rand_mat(rng, 4, 6);
    Tensor<double> summary = rand_mat(rng, 1, 6);
    const double v = amdnet::relevance_loss(q, roi, summary, beta, SimilarityKind::kCosine);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, beta + 2.0);  // cosine range is [-1, 1]
  }
}

TEST(TotalLoss, WeightedCombination) {
  LossWeights w;  // 0.02, 1, 1
  EXPECT_NEAR(amdnet::total_loss(2.0, 3.0, 5.0, w), 8.04, 1e-12);
  w.lambda_div = 0.0;
  w.lambda_rel = 0.0;
  EXPECT_DOUBLE_EQ(amdnet::total_loss(7.0, 3.0, 5.0, w), 0.02 * 7.0);
}

// ---------------------------------------------------------------------------
// Finite-difference checks of each loss through the full model graph,
// including span prediction and the Gaussian mask.
// ---------------------------------------------------------------------------

namespace {

struct MiniBatch {
  std::vector<Tensor<double>> videos;  // raw frames
  Tensor<double> queries;              // raw rows
  BatchPairing pairing;
};

MiniBatch make_mini_batch(const ModelConfig& cfg, std::mt19937_64& rng) {
  MiniBatch b;
  const std::size_t n_videos = 3, per_video = 2;
  b.queries = rand_mat(rng, n_videos * per_video, cfg.input_dim);
  b.pairing.queries_of_video.assign(n_videos, {});
  for (std::size_t v = 0; v < n_videos; ++v) {
    b.videos.push_back(rand_mat(rng, 10, cfg.input_dim));
    for (std::size_t k = 0; k < per_video; ++k) {
      b.pairing.video_of_query.push_back(v);
      b.pairing.queries_of_video[v].push_back(v * per_video + k);
    }
  }
  return b;
}

enum class Objective { kRetrieval, kDiversity, kRelevance };

Var build_objective(Tape<double>& t, const Model<double>& model, const MiniBatch& b,
                    Objective which) {
  const auto& cfg = model.config();
  Var queries = model.encode_queries(t, t.input(b.queries));
  Var qn = amdnet::l2_normalize_rows(t, queries);
  std::vector<Var> score_cols, div_terms, rel_terms;
  const std::size_t nq = b.queries.rows();
  for (std::size_t v = 0; v < b.videos.size(); ++v) {
    auto g = model.video_graph(t, b.videos[v]);
    Var vn = amdnet::l2_normalize_rows(t, g.enhanced);
    score_cols.push_back(amdnet::row_max(t, amdnet::matmul_nt(t, qn, vn)));
    div_terms.push_back(amdnet::diversity_loss(t, g.mask, 0.15));
    Var hinges = amdnet::relevance_hinges(t, qn, g.roi, g.summary, 0.1, cfg.similarity, true);
    Tensor<double> indicator(nq, 1);
    for (std::size_t q : b.pairing.queries_of_video[v]) indicator[q] = 1.0 / double(nq);
    rel_terms.push_back(amdnet::weighted_sum(t, hinges, indicator));
  }
  switch (which) {
    case Objective::kRetrieval: {
      Var s = amdnet::concat_cols(t, score_cols);
      return amdnet::retrieval_loss(t, s, b.pairing, 0.07);
    }
    case Objective::kDiversity:
      return amdnet::affine_combine(
          t, div_terms, std::vector<double>(div_terms.size(), 1.0 / double(div_terms.size())));
    case Objective::kRelevance:
      return amdnet::affine_combine(t, rel_terms, std::vector<double>(rel_terms.size(), 1.0));
  }
  throw std::logic_error("unreachable");
}

}  // namespace

TEST(LossGradients, AllThreeThroughFullGraph) {
  ModelConfig cfg;
  cfg.clips = 8;
  cfg.dim = 16;
  cfg.input_dim = 12;
  cfg.moments = 2;
  Model<double> model(cfg, 77);
  std::mt19937_64 rng(78);
  MiniBatch batch = make_mini_batch(cfg, rng);

  // A few optimizer steps move the parameters to a generic point: at the
  // zero-init span head all moment rows are identical and the max-similarity
  // terms sit exactly on ties, where central differences straddle the kink.
  {
    amdnet::AdamState<double> adam(model.params(), 1e-3);
    for (int step = 0; step < 3; ++step) {
      Tape<double> t;
      std::vector<Var> parts{build_objective(t, model, batch, Objective::kRetrieval),
                             build_objective(t, model, batch, Objective::kDiversity),
                             build_objective(t, model, batch, Objective::kRelevance)};
      Var total = amdnet::affine_combine(t, parts, std::vector<double>{0.02, 1.0, 1.0});
      model.params().zero_grad();
      t.backward(total);
      adam.step(model.params());
    }
  }

  for (auto which : {Objective::kRetrieval, Objective::kDiversity, Objective::kRelevance}) {
    auto forward = [&]() {
      Tape<double> t;
      return t.value(build_objective(t, model, batch, which))[0];
    };
    auto backward = [&]() {
      Tape<double> t;
      t.backward(build_objective(t, model, batch, which));
    };
    auto rep = amdnet::finite_diff_grad_check<double>(model.params(), forward, backward, 1e-5,
                                                      200, 79 + int(which));
    EXPECT_EQ(rep.probe_failures, 0u);
    EXPECT_LE(rep.max_rel_err, 1e-4)
        << "objective " << int(which) << " worst " << rep.worst_param << "["
        << rep.worst_index << "] a=" << rep.worst_analytic << " n=" << rep.worst_numeric;
  }
}
