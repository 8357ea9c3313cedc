#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef AMDNET_CLI_PATH
#error "AMDNET_CLI_PATH must be defined by the build"
#endif

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(AMDNET_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::path(testing::TempDir()) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_tiny_config(const fs::path& path) {
  std::ofstream out(path);
  out << "num_videos = 8\n"
         "moments_per_video = 3\n"
         "queries_per_moment = 1\n"
         "clips = 8\n"
         "input_dim = 12\n"
         "num_latent_concepts = 8\n"
         "noise_std = 0.3\n"
         "dim = 16\n"
         "moments = 2\n"
         "batch_size = 8\n"
         "max_epochs = 2\n"
         "seed = 3\n";
}

}  // namespace

TEST(Cli, UsageErrorsExitWithCode2) {
  EXPECT_EQ(run(""), 2);                       // missing subcommand
  EXPECT_EQ(run("gen"), 2);                    // missing --out
  EXPECT_EQ(run("train --corpus x"), 2);       // missing --out
  EXPECT_EQ(run("--precision f16 gen --out /tmp/x"), 2);
}

TEST(Cli, MissingDataExitsWithCode3) {
  fs::path dir = fresh_dir("cli_missing");
  EXPECT_EQ(run("eval --corpus " + (dir / "nope.jsonl").string() + " --params " + dir.string() +
                " --out " + (dir / "out").string()),
            3);
}

TEST(Cli, UnknownConfigKeyExitsWithCode2) {
  fs::path dir = fresh_dir("cli_badcfg");
  std::ofstream(dir / "bad.conf") << "not_a_key = 1\n";
  EXPECT_EQ(run("--config " + (dir / "bad.conf").string() + " gen --out " +
                (dir / "corpus").string()),
            2);
}

TEST(Cli, EndToEndPipeline) {
  fs::path dir = fresh_dir("cli_pipeline");
  write_tiny_config(dir / "run.conf");
  const std::string cfg = " --config " + (dir / "run.conf").string();

  ASSERT_EQ(run(cfg + " gen --out " + (dir / "corpus").string()), 0);
  ASSERT_TRUE(fs::exists(dir / "corpus" / "manifest.jsonl"));

  const std::string manifest = (dir / "corpus" / "manifest.jsonl").string();
  ASSERT_EQ(run(cfg + " train --corpus " + manifest + " --out " + (dir / "run").string()), 0);
  ASSERT_TRUE(fs::exists(dir / "run" / "checkpoint" / "checkpoint.jsonl"));
  ASSERT_TRUE(fs::exists(dir / "run" / "train_report.jsonl"));
  ASSERT_TRUE(fs::exists(dir / "run" / "train_timing.txt"));

  const std::string ckpt = (dir / "run" / "checkpoint").string();
  ASSERT_EQ(run(cfg + " eval --corpus " + manifest + " --params " + ckpt + " --out " +
                (dir / "eval").string()),
            0);
  ASSERT_TRUE(fs::exists(dir / "eval" / "eval_report.jsonl"));
  ASSERT_TRUE(fs::exists(dir / "eval" / "mv_bins.csv"));
  ASSERT_TRUE(fs::exists(dir / "eval" / "overlap_bins.csv"));

  ASSERT_EQ(run(cfg + " index --corpus " + manifest + " --params " + ckpt + " --out " +
                (dir / "index").string()),
            0);
  ASSERT_TRUE(fs::exists(dir / "index" / "embeddings.prvf"));

  // Use one of the corpus query files as the search probe.
  std::string probe;
  for (const auto& e : fs::directory_iterator(dir / "corpus" / "features"))
    if (e.path().filename().string()[0] == 'q') {
      probe = e.path().string();
      break;
    }
  ASSERT_FALSE(probe.empty());
  ASSERT_EQ(run(" search --index " + (dir / "index").string() + " --params " + ckpt +
                " --query-file " + probe + " --top-k 3 --out " + (dir / "hits.jsonl").string()),
            0);
  ASSERT_TRUE(fs::exists(dir / "hits.jsonl"));

  ASSERT_EQ(run(cfg + " bench --corpus " + manifest + " --sizes 4,8 --repetitions 100 --out " +
                (dir / "bench").string()),
            0);
  ASSERT_TRUE(fs::exists(dir / "bench" / "bench.csv"));
}

TEST(Cli, TrainAtF32Precision) {
  fs::path dir = fresh_dir("cli_f32");
  write_tiny_config(dir / "run.conf");
  const std::string cfg = " --config " + (dir / "run.conf").string();
  ASSERT_EQ(run(cfg + " gen --out " + (dir / "corpus").string()), 0);
  ASSERT_EQ(run(cfg + " --precision f32 train --corpus " +
                (dir / "corpus" / "manifest.jsonl").string() + " --out " + (dir / "run").string()),
            0);
  ASSERT_TRUE(fs::exists(dir / "run" / "checkpoint" / "checkpoint.jsonl"));
}

TEST(Cli, CorruptQueryFileExitsWithCode3) {
  fs::path dir = fresh_dir("cli_corrupt");
  write_tiny_config(dir / "run.conf");
  const std::string cfg = " --config " + (dir / "run.conf").string();
  ASSERT_EQ(run(cfg + " gen --out " + (dir / "corpus").string()), 0);
  const std::string manifest = (dir / "corpus" / "manifest.jsonl").string();
  ASSERT_EQ(run(cfg + " train --corpus " + manifest + " --out " + (dir / "run").string()), 0);
  ASSERT_EQ(run(cfg + " index --corpus " + manifest + " --params " +
                (dir / "run" / "checkpoint").string() + " --out " + (dir / "index").string()),
            0);
  std::ofstream(dir / "bad.prvf") << "XXXXnotaprvf";
  EXPECT_EQ(run(" search --index " + (dir / "index").string() + " --params " +
                (dir / "run" / "checkpoint").string() + " --query-file " +
                (dir / "bad.prvf").string() + " --top-k 3"),
            3);
}
