#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace emoclim;
using testing_support::TempDir;
using testing_support::slurp;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run cli(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(EMOCLIM_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Small synthetic set with a trained checkpoint, shared by several tests.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const auto d = dir_->path().string();
    ASSERT_EQ(cli(*dir_, "synth --out-dir " + d + "/data --seed 2 --per-class 15 --image-dim 12 --audio-dim 10 --tags "
                           "--tag-items 300 --tag-count 6")
                  .code,
              0);
    const auto r = cli(*dir_, "train --config " + d + "/data/config.json --epochs 3 --embed-dim 16 --hidden-dim 64 --batch-size 16 "
                                  "--lr 1e-3 --out " + d + "/m.ckpt");
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string path(const std::string& name) { return (dir_->path() / name).string(); }

  static TempDir* dir_;
};

TempDir* CliPipeline::dir_ = nullptr;

}  // namespace

TEST(Cli, HelpListsFlagsWithDefaults) {
  TempDir dir("help");
  const auto r = cli(dir, "gradcheck --help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--seeds UINT:POSITIVE [20]"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("--seed UINT [0]"), std::string::npos);
  const auto s = cli(dir, "synth --help");
  EXPECT_NE(s.out.find("--per-class UINT [100]"), std::string::npos) << s.out;
  const auto e = cli(dir, "eval-retrieval --help");
  EXPECT_NE(e.out.find("--k"), std::string::npos);
  EXPECT_NE(e.out.find("--threads"), std::string::npos);
}

TEST(Cli, ParseErrorsExitThree) {
  TempDir dir("parse");
  EXPECT_EQ(cli(dir, "").code, 3);
  EXPECT_EQ(cli(dir, "split --seed 1").code, 3);
  EXPECT_EQ(cli(dir, "no-such-command").code, 3);
}

TEST(Cli, GradcheckPassesAndPerturbedFails) {
  TempDir dir("grad");
  const auto ok = cli(dir, "gradcheck --seeds 3");
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("max_rel_error "), std::string::npos);
  EXPECT_NE(ok.out.find("worst: "), std::string::npos);
  const auto bad = cli(dir, "gradcheck --seeds 1 --perturb-gradient 0.01");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("FAILED"), std::string::npos);
}

TEST(Cli, SplitIsDeterministicAndCorruptionExitsTwo) {
  TempDir dir("split");
  const auto d = dir.path().string();
  ASSERT_EQ(cli(dir, "synth --out-dir " + d + " --seed 1 --per-class 10").code, 0);
  ASSERT_EQ(cli(dir, "split --features " + d + "/image.emof --seed 4 --out " + d + "/a.json").code, 0);
  ASSERT_EQ(cli(dir, "split --features " + d + "/image.emof --seed 4 --out " + d + "/b.json").code, 0);
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  const auto split = read_split(dir / "a.json");
  EXPECT_EQ(split.train.size() + split.val.size() + split.test.size(), 60u);

  auto bytes = read_file_bytes(dir / "image.emof");
  bytes.resize(bytes.size() - 3);
  write_file_atomic(dir / "bad.emof", bytes);
  const auto r = cli(dir, "split --features " + d + "/bad.emof --seed 4 --out " + d + "/c.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("byte offset"), std::string::npos) << r.err;
}

TEST(Cli, UnknownSourceLabelExitsThree) {
  TempDir dir("tax");
  FeatureFile f;
  f.modality = Modality::Image;
  f.feature_dim = 2;
  f.taxonomy = {Modality::Image, "custom", {"joy"}, {}};
  f.records.push_back({"x", "joy", Tensor2<float>(1, 2, 1.0f)});
  write_feature_file(dir / "t.emof", f);
  EXPECT_EQ(cli(dir, "split --features " + (dir / "t.emof").string() + " --out " + (dir / "s.json").string()).code, 3);
}

TEST(Cli, UnknownConfigKeyExitsThree) {
  TempDir dir("cfg");
  write_file_atomic(dir / "c.json", std::string(R"({"epochs": 2, "learning_rate": 0.1})"));
  const auto r = cli(dir, "train --config " + (dir / "c.json").string() + " --out " + (dir / "m.ckpt").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("learning_rate"), std::string::npos);
}

TEST_F(CliPipeline, ZeroEpochsFailsWithMessage) {
  const auto r = cli(*dir_, "train --config " + path("data/config.json") + " --epochs 0 --out " + path("z.ckpt"));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("epochs"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(path("z.ckpt")));
}

TEST_F(CliPipeline, RerunGivesByteIdenticalCheckpoint) {
  const auto r = cli(*dir_, "train --config " + path("data/config.json") + " --epochs 3 --embed-dim 16 --hidden-dim 64 "
                                "--batch-size 16 --lr 1e-3 --out " + path("m2.ckpt"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("m.ckpt")), slurp(path("m2.ckpt")));
  // log: one JSON object per epoch, at the path named in the synth config
  std::ifstream log(path("data/train.log.jsonl"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch"), lines + 1);
    EXPECT_TRUE(j.contains("wall_time_s"));
    EXPECT_EQ(j.at("train_components").size(), 4u);
    ++lines;
  }
  EXPECT_EQ(lines, 3u);
}

TEST_F(CliPipeline, FlagsOverrideConfig) {
  const auto ckpt = load_checkpoint(path("m.ckpt"));
  EXPECT_EQ(ckpt.config.epochs, 3u);
  EXPECT_EQ(ckpt.config.embed_dim, 16u);
  EXPECT_EQ(ckpt.config.seed, 2u);  // from the synth config
}

TEST_F(CliPipeline, EvalRetrievalWritesReportAndCsv) {
  const auto r = cli(*dir_, "eval-retrieval --ckpt " + path("m.ckpt") + " --image-features " + path("data/image.emof") +
                                " --audio-features " + path("data/audio.emof") + " --splits " + path("data") +
                                " --k 5 --out " + path("r1.json") + " --csv " + path("r1.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(slurp(path("r1.json")));
  EXPECT_EQ(report.at("k"), 5);
  EXPECT_EQ(report.at("directions").size(), 4u);
  EXPECT_TRUE(std::filesystem::exists(path("r1.csv")));
  const auto t = cli(*dir_, "eval-retrieval --config " + path("data/config.json") + " --ckpt " + path("m.ckpt") +
                                " --threads 3 --out " + path("r2.json"));
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(slurp(path("r1.json")), slurp(path("r2.json")));
}

TEST_F(CliPipeline, EmbedMatchesInProcessPipeline) {
  ASSERT_EQ(cli(*dir_, "embed --ckpt " + path("m.ckpt") + " --features " + path("data/image.emof") + " --out " +
                           path("ie.emof"))
                .code,
            0);
  ASSERT_EQ(cli(*dir_, "embed --ckpt " + path("m.ckpt") + " --features " + path("data/audio.emof") + " --out " +
                           path("ae.emof"))
                .code,
            0);
  const auto ie = read_feature_file(path("ie.emof"));
  const auto ae = read_feature_file(path("ae.emof"));
  EXPECT_EQ(ie.feature_dim, 16u);
  for (const auto* f : {&ie, &ae}) {
    for (const auto& rec : f->records) {
      ASSERT_EQ(rec.num_chunks(), 1u);
      EXPECT_NEAR(std::sqrt(dot<float>(rec.chunks.row(0), rec.chunks.row(0))), 1.0, 1e-5);
    }
  }
  // Rank the embedded test items and compare with the in-process report.
  const auto ckpt = load_checkpoint(path("m.ckpt"));
  const auto image_split = read_split(path("data/image_split.json"));
  const auto audio_split = read_split(path("data/audio_split.json"));
  auto as_embeddings = [](const Dataset& d) {
    std::vector<JointEmbedding> out;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto row = d.records[i].chunks.row(0);
      out.push_back({{row.begin(), row.end()}, d.modality, d.labels[i], d.records[i].item_id});
    }
    return out;
  };
  const auto from_files = evaluate_retrieval(as_embeddings(select(unify(ie), image_split.test)),
                                             as_embeddings(select(unify(ae), audio_split.test)), 5);
  const auto in_process = evaluate_retrieval(ckpt.model, select(load_dataset(path("data/image.emof")), image_split.test),
                                             select(load_dataset(path("data/audio.emof")), audio_split.test), 5);
  EXPECT_EQ(to_json(from_files), to_json(in_process));
}

TEST_F(CliPipeline, EmbedEmptyInputGivesEmptyOutput) {
  FeatureFile empty;
  empty.modality = Modality::Audio;
  empty.feature_dim = 10;
  empty.taxonomy = music_taxonomy();
  write_feature_file(path("empty.emof"), empty);
  const auto r = cli(*dir_, "embed --ckpt " + path("m.ckpt") + " --features " + path("empty.emof") + " --out " +
                                path("empty_out.emof"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = read_feature_file(path("empty_out.emof"));
  EXPECT_TRUE(out.records.empty());
  EXPECT_EQ(out.feature_dim, 16u);
}

TEST_F(CliPipeline, ProbeTaggingWritesMetrics) {
  const auto r = cli(*dir_, "probe-tagging --ckpt " + path("m.ckpt") + " --tagged-features " +
                                path("data/tagged.emof") + " --split " + path("data/tagged_split.json") +
                                " --epochs 5 --hidden-dim 32 --out " + path("probe.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("probe.json")));
  EXPECT_EQ(j.at("input"), "joint_embedding");
  EXPECT_EQ(j.at("per_tag").size(), 6u);
  const double auc = j.at("macro_roc_auc");
  EXPECT_GE(auc, 0.0);
  EXPECT_LE(auc, 1.0);
  const auto raw = cli(*dir_, "probe-tagging --tagged-features " + path("data/tagged.emof") + " --split " +
                                  path("data/tagged_split.json") + " --epochs 5 --hidden-dim 32 --out " +
                                  path("probe_raw.json"));
  ASSERT_EQ(raw.code, 0) << raw.err;
  EXPECT_EQ(nlohmann::json::parse(slurp(path("probe_raw.json"))).at("input"), "raw_features");
}

TEST_F(CliPipeline, MissingTagsForItemIsIntegrityFailure) {
  TagFile tags = read_tag_file(path("data/tagged.emot"));
  tags.items.pop_back();
  write_tag_file(path("partial.emot"), tags);
  const auto r = cli(*dir_, "probe-tagging --tagged-features " + path("data/tagged.emof") + " --tags " +
                                path("partial.emot") + " --split " + path("data/tagged_split.json") +
                                " --epochs 1 --out " + path("p.json"));
  EXPECT_EQ(r.code, 2);
}
