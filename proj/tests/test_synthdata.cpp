#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "amdnet/feature_io.hpp"
#include "amdnet/synthdata.hpp"

namespace fs = std::filesystem;
using amdnet::CorpusManifest;
using amdnet::SyntheticCorpusSpec;
using amdnet::Tensor;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::path(testing::TempDir()) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

SyntheticCorpusSpec small_spec() {
  SyntheticCorpusSpec spec;
  spec.num_videos = 12;
  spec.moments_per_video = 3;
  spec.queries_per_moment = 2;
  spec.clips = 32;
  spec.input_dim = 24;
  spec.num_latent_concepts = 10;
  spec.seed = 5;
  return spec;
}

}  // namespace

TEST(FeatureFile, RoundTripBitwise) {
  fs::path dir = fresh_dir("prvf_roundtrip");
  Tensor<float> x(7, 5);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = float(i) * 0.25f - 3.0f;
  amdnet::write_feature_file(dir / "x.prvf", x);
  Tensor<float> y = amdnet::load_feature_file(dir / "x.prvf");
  EXPECT_EQ(x, y);
}

TEST(FeatureFile, ExactBytesForKnownPayload) {
  fs::path dir = fresh_dir("prvf_bytes");
  Tensor<float> x(1, 2);
  x[0] = 1.0f;
  x[1] = 2.0f;
  amdnet::write_feature_file(dir / "x.prvf", x);
  const std::string bytes = slurp(dir / "x.prvf");
  ASSERT_EQ(bytes.size(), 14u + 4u * 2u);
  EXPECT_EQ(bytes.substr(0, 4), "PRVF");
  const unsigned char expect_header[] = {0x01, 0x00, 0x01, 0x00, 0x00, 0x00,
                                         0x02, 0x00, 0x00, 0x00};
  for (std::size_t i = 0; i < sizeof expect_header; ++i)
    EXPECT_EQ((unsigned char)bytes[4 + i], expect_header[i]) << "header byte " << i;
  const unsigned char expect_payload[] = {0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40};
  for (std::size_t i = 0; i < sizeof expect_payload; ++i)
    EXPECT_EQ((unsigned char)bytes[14 + i], expect_payload[i]) << "payload byte " << i;
}

TEST(FeatureFile, WriteFailureSurfacesPath) {
  Tensor<float> x(1, 1);
  try {
    amdnet::write_feature_file("/nonexistent_dir_for_sure/x.prvf", x);
    FAIL() << "expected data_error";
  } catch (const amdnet::data_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent_dir_for_sure/x.prvf"), std::string::npos);
  }
}

TEST(FeatureFile, SizeFormula) {
  fs::path dir = fresh_dir("prvf_size");
  Tensor<float> x(9, 13);
  amdnet::write_feature_file(dir / "x.prvf", x);
  EXPECT_EQ(fs::file_size(dir / "x.prvf"), 14u + 4u * 9u * 13u);
}

TEST(FeatureFile, BadMagicRejected) {
  fs::path dir = fresh_dir("prvf_magic");
  std::ofstream out(dir / "bad.prvf", std::ios::binary);
  out << "XXXX";
  std::string rest(20, '\0');
  out.write(rest.data(), rest.size());
  out.close();
  try {
    amdnet::load_feature_file(dir / "bad.prvf");
    FAIL() << "expected data_error";
  } catch (const amdnet::data_error& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }
}

TEST(FeatureFile, TruncationRejected) {
  fs::path dir = fresh_dir("prvf_trunc");
  Tensor<float> x(4, 4);
  amdnet::write_feature_file(dir / "x.prvf", x);
  std::string bytes = slurp(dir / "x.prvf");
  bytes.resize(bytes.size() - 5);  // drop payload bytes, keep declared shape
  std::ofstream out(dir / "x.prvf", std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), bytes.size());
  out.close();
  try {
    amdnet::load_feature_file(dir / "x.prvf");
    FAIL() << "expected data_error";
  } catch (const amdnet::data_error& e) {
    EXPECT_NE(std::string(e.what()).find("disagrees"), std::string::npos);
  }
}

TEST(FeatureFile, NanPayloadRejected) {
  fs::path dir = fresh_dir("prvf_nan");
  Tensor<float> x(1, 3);
  x[1] = std::numeric_limits<float>::quiet_NaN();
  amdnet::write_feature_file(dir / "x.prvf", x);
  try {
    amdnet::load_feature_file(dir / "x.prvf");
    FAIL() << "expected data_error";
  } catch (const amdnet::data_error& e) {
    EXPECT_NE(std::string(e.what()).find("NaN"), std::string::npos);
  }
}

TEST(Generator, ManifestCountsMatchSpec) {
  fs::path dir = fresh_dir("gen_counts");
  SyntheticCorpusSpec spec = small_spec();
  CorpusManifest m = amdnet::generate_corpus(spec, dir);
  EXPECT_EQ(m.videos.size(), spec.num_videos);
  std::size_t moments = 0, queries_listed = 0;
  for (const auto& v : m.videos) {
    moments += v.moments.size();
    for (const auto& pm : v.moments) queries_listed += pm.query_ids.size();
  }
  EXPECT_EQ(moments, spec.num_videos * spec.moments_per_video);
  EXPECT_EQ(queries_listed, spec.num_videos * spec.moments_per_video * spec.queries_per_moment);
  EXPECT_EQ(m.queries.size(), queries_listed);
}

TEST(Generator, SpansValidAndNonNested) {
  fs::path dir = fresh_dir("gen_spans");
  CorpusManifest m = amdnet::generate_corpus(small_spec(), dir);
  for (const auto& v : m.videos) {
    for (const auto& pm : v.moments) {
      EXPECT_GE(pm.start, 0.0);
      EXPECT_LT(pm.start, pm.end);
      EXPECT_LE(pm.end, 1.0);
    }
    for (std::size_t a = 0; a < v.moments.size(); ++a)
      for (std::size_t b = 0; b < v.moments.size(); ++b) {
        if (a == b) continue;
        const bool nested = v.moments[a].start <= v.moments[b].start + 1e-12 &&
                            v.moments[b].end <= v.moments[a].end + 1e-12;
        EXPECT_FALSE(nested) << v.id;
      }
  }
}

TEST(Generator, MomentToVideoRatiosCoverAllBins) {
  fs::path dir = fresh_dir("gen_bins");
  CorpusManifest m = amdnet::generate_corpus(small_spec(), dir);
  std::size_t bins[3] = {0, 0, 0};
  for (const auto& v : m.videos)
    for (const auto& pm : v.moments) {
      const double r = pm.end - pm.start;
      if (r <= 0.2)
        ++bins[0];
      else if (r <= 0.4)
        ++bins[1];
      else
        ++bins[2];
    }
  EXPECT_GT(bins[0], 0u);
  EXPECT_GT(bins[1], 0u);
  EXPECT_GT(bins[2], 0u);
}

TEST(Generator, LatentMarginPositive) {
  fs::path dir = fresh_dir("gen_margin");
  amdnet::generate_corpus(small_spec(), dir);
  amdnet::CorpusData data = amdnet::load_corpus(dir / "manifest.jsonl");
  EXPECT_GT(amdnet::latent_margin(data), 0.1);
}

TEST(Generator, DeterministicAcrossRuns) {
  SyntheticCorpusSpec spec = small_spec();
  spec.num_videos = 4;
  fs::path a = fresh_dir("gen_det_a");
  fs::path b = fresh_dir("gen_det_b");
  amdnet::generate_corpus(spec, a);
  amdnet::generate_corpus(spec, b);
  EXPECT_EQ(slurp(a / "manifest.jsonl"), slurp(b / "manifest.jsonl"));
  for (const auto& entry : fs::directory_iterator(a / "features")) {
    const fs::path rel = entry.path().filename();
    EXPECT_EQ(slurp(entry.path()), slurp(b / "features" / rel)) << rel;
  }
}

TEST(Generator, InfeasibleSpecRejected) {
  SyntheticCorpusSpec spec = small_spec();
  spec.moments_per_video = 40;  // 40 * 0.05 > 1
  spec.num_latent_concepts = 64;
  fs::path dir = fresh_dir("gen_reject");
  EXPECT_THROW(amdnet::generate_corpus(spec, dir), amdnet::input_error);
}

TEST(Manifest, LoadRejectsDanglingQuery) {
  fs::path dir = fresh_dir("manifest_dangling");
  std::ofstream out(dir / "manifest.jsonl");
  out << R"({"type":"query","id":"q1","video":"missing","path":"features/q1.prvf"})" << "\n";
  out.close();
  EXPECT_THROW(amdnet::load_manifest(dir / "manifest.jsonl"), amdnet::data_error);
}

TEST(Manifest, RoundTrip) {
  fs::path dir = fresh_dir("manifest_roundtrip");
  SyntheticCorpusSpec spec = small_spec();
  spec.num_videos = 3;
  CorpusManifest m = amdnet::generate_corpus(spec, dir);
  CorpusManifest r = amdnet::load_manifest(dir / "manifest.jsonl");
  ASSERT_EQ(r.videos.size(), m.videos.size());
  ASSERT_EQ(r.queries.size(), m.queries.size());
  for (std::size_t i = 0; i < m.videos.size(); ++i) {
    EXPECT_EQ(r.videos[i].id, m.videos[i].id);
    ASSERT_EQ(r.videos[i].moments.size(), m.videos[i].moments.size());
    for (std::size_t k = 0; k < m.videos[i].moments.size(); ++k) {
      EXPECT_DOUBLE_EQ(r.videos[i].moments[k].start, m.videos[i].moments[k].start);
      EXPECT_DOUBLE_EQ(r.videos[i].moments[k].end, m.videos[i].moments[k].end);
      EXPECT_EQ(r.videos[i].moments[k].query_ids, m.videos[i].moments[k].query_ids);
    }
  }
}
