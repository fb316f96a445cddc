#include "capscore/commands.h"
#include "capscore/protocol_files.h"
#include "capscore/synth.h"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace capscore;
namespace fs = std::filesystem;

namespace {

std::vector<fs::path> created_dirs;

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("capscore_cli_" + std::to_string(getpid()) + "_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  created_dirs.push_back(dir);
  return dir;
}

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::istringstream in(read_file(p));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

// Runs the built executable; returns its exit status.
int run_cli(const std::string& args, const fs::path& stderr_path = "/dev/null") {
  const std::string cmd = std::string(CAPSCORE_CLI) + " " + args + " >/dev/null 2>" + stderr_path.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

CliConfig base(const std::string& sub, const fs::path& corpus) {
  CliConfig c;
  c.subcommand = sub;
  c.dataset = corpus / "dataset.jsonl";
  c.cache = corpus / "embeddings.svec";
  return c;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    corpus_ = fresh_dir("corpus");
    CliConfig g;
    g.subcommand = "gen-synth";
    g.out = corpus_;
    g.count = 150;
    g.seed = 5;
    g.d_clip = 16;
    g.d_rb = 12;
    std::ostringstream log;
    cmd_gen_synth(g, log);
  }
  static void TearDownTestSuite() {
    for (const auto& d : created_dirs) fs::remove_all(d);
    created_dirs.clear();
  }
  static fs::path corpus_;
};

fs::path Cli::corpus_;

}  // namespace

TEST_F(Cli, GenSynthIsByteDeterministic) {
  auto other = fresh_dir("corpus2");
  CliConfig g;
  g.subcommand = "gen-synth";
  g.out = other;
  g.count = 150;
  g.seed = 5;
  g.d_clip = 16;
  g.d_rb = 12;
  std::ostringstream log;
  cmd_gen_synth(g, log);
  for (const char* f : {"dataset.jsonl", "foil.jsonl", "pascal.jsonl", "embeddings.svec"}) {
    EXPECT_EQ(read_file(other / f), read_file(corpus_ / f)) << f;
  }
  const auto rows = read_jsonl(corpus_ / "dataset.jsonl");
  ASSERT_EQ(rows.size(), 150u);
  for (const auto& r : rows) {
    const double s = r["human_score"].get<double>();
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST_F(Cli, LatentScorerIsPerfectOnFoil) {
  for (std::size_t n : {1u, 4u}) {
    auto c = base("eval-foil", corpus_);
    c.dataset = corpus_ / "foil.jsonl";
    c.scorer = "latent";
    c.n_refs = n;
    std::ostringstream log;
    EXPECT_DOUBLE_EQ(cmd_eval_foil(c, log).metrics.at("accuracy"), 100.0);
  }
  auto c = base("eval-corr", corpus_);
  c.scorer = "latent";
  std::ostringstream log;
  EXPECT_DOUBLE_EQ(cmd_eval_corr(c, log).metrics.at("tau_b"), 1.0);
}

TEST_F(Cli, MissingCacheIdIsValidationErrorNamingId) {
  auto dir = fresh_dir("missing");
  auto text = read_file(corpus_ / "dataset.jsonl");
  text += R"({"id":"ghost-17","image_ref":"x","candidate":"a cat","references":["a dog"],"human_score":3})" "\n";
  write_file_atomic(dir / "dataset.jsonl", text);
  auto c = base("train", corpus_);
  c.dataset = dir / "dataset.jsonl";
  c.out = dir / "model.svtm";
  std::ostringstream log, err;
  EXPECT_EQ(run_command(c, log, err), 2);
  EXPECT_NE(err.str().find("ghost-17"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "model.svtm"));
  EXPECT_FALSE(fs::exists(dir / "model.svtm.history.json"));
}

TEST_F(Cli, EmptyDatasetScoresToEmptyFile) {
  auto dir = fresh_dir("empty");
  write_file_atomic(dir / "dataset.jsonl", "");
  auto c = base("score", corpus_);
  c.dataset = dir / "dataset.jsonl";
  c.scorer = "latent";
  c.out = dir / "scores.jsonl";
  std::ostringstream log, err;
  EXPECT_EQ(run_command(c, log, err), 0) << err.str();
  EXPECT_EQ(read_file(dir / "scores.jsonl"), "");
}

TEST_F(Cli, TrainThenScoreReproducesBestEpochValidationScores) {
  auto dir = fresh_dir("train");
  auto t = base("train", corpus_);
  t.out = dir / "model.svtm";
  t.seed = 11;
  t.train.learning_rate = 1e-3;
  t.train.max_epochs = 3;
  std::ostringstream log;
  const auto result = cmd_train(t, log);
  ASSERT_TRUE(fs::exists(dir / "model.svtm.history.json"));
  const auto history = nlohmann::json::parse(read_file(dir / "model.svtm.history.json"));
  EXPECT_EQ(history["best_epoch"].get<std::size_t>(), result.best_epoch);
  EXPECT_EQ(history["epochs"].size(), result.history.size());

  // Validation split recomputed independently of the command code.
  const auto cache = read_cache(corpus_ / "embeddings.svec");
  std::vector<LabeledExample> all;
  for (const auto& s : load_dataset(corpus_ / "dataset.jsonl")) all.push_back({s.id, cache.at(s.id), s.human_score});
  const auto parts = split_dataset<LabeledExample>(all, {}, 11);
  const auto expected = score_all(parts.val, result.params, profile_config("desk", 16, 12));

  auto s = base("score", corpus_);
  s.checkpoint = dir / "model.svtm";
  s.split = "val";
  s.seed = 11;
  s.out = dir / "val.jsonl";
  cmd_score(s, log);
  const auto rows = read_jsonl(dir / "val.jsonl");
  ASSERT_EQ(rows.size(), expected.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i]["id"], parts.val[i].id);
    EXPECT_NEAR(rows[i]["score"].get<double>(), expected[i], 1e-6);
  }

  // Reference order inside a sample does not change its score.
  const auto ck = load_checkpoint(dir / "model.svtm");
  for (const auto& ex : parts.val) {
    if (ex.embeddings.num_refs() < 2) continue;
    std::vector<std::size_t> rev(ex.embeddings.num_refs());
    for (std::size_t i = 0; i < rev.size(); ++i) rev[i] = rev.size() - 1 - i;
    EXPECT_NEAR(score_sample(ex.embeddings, ck.params, ck.config),
                score_sample(select_references(ex.embeddings, rev), ck.params, ck.config), 1e-12);
  }

  // Thread count never changes the output.
  s.threads = 3;
  s.out = dir / "val3.jsonl";
  cmd_score(s, log);
  EXPECT_EQ(read_file(dir / "val3.jsonl"), read_file(dir / "val.jsonl"));
}

TEST_F(Cli, HandBuiltPascalFixture) {
  auto dir = fresh_dir("pascal");
  // v = e0; a caption with cosine q to the image is (q, sqrt(1-q^2)).
  auto cap = [](double q) {
    return Embedding{static_cast<float>(q), static_cast<float>(std::sqrt(1 - q * q))};
  };
  EmbeddingCache cache;
  cache.d_clip = 2;
  cache.d_rb = 2;
  std::vector<Pascal50sItem> items;
  struct Row {
    const char* id;
    PascalCategory cat;
    char majority;
    double qa, qb;
  };
  // HC: A wins and is the majority (hit). HI: A wins, B is the majority (miss). MM: B wins and is the majority (hit).
  for (const Row& r : {Row{"i0", PascalCategory::HC, 'A', 0.9, 0.1}, Row{"i1", PascalCategory::HI, 'B', 0.8, 0.2},
                       Row{"i2", PascalCategory::MM, 'B', 0.3, 0.6}}) {
    Pascal50sItem it;
    it.id = r.id;
    it.image_ref = std::string("img-") + r.id;
    it.caption_a = "caption a";
    it.caption_b = "caption b";
    it.references = {"ref one", "ref two"};
    it.category = r.cat;
    it.majority_label = r.majority;
    items.push_back(it);
    for (auto [side, q] : {std::pair{'A', r.qa}, std::pair{'B', r.qb}}) {
      EmbeddingSet e;
      e.v = {1, 0};
      e.c_clip = cap(q);
      e.c_rb = {1, 0};
      e.r_clip = {{0, 1}, {1, 1}};
      e.r_rb = {{1, 1}, {0, 1}};
      cache.records.emplace(pascal_key(r.id, side), e);
    }
  }
  write_file_atomic(dir / "pascal.jsonl", pascal_to_jsonl(items));
  write_cache(dir / "cache.svec", cache);
  CliConfig c;
  c.subcommand = "eval-pascal";
  c.dataset = dir / "pascal.jsonl";
  c.cache = dir / "cache.svec";
  c.scorer = "latent";
  c.refs_per_item = 1;
  c.out = dir / "report.json";
  std::ostringstream log;
  const auto report = cmd_eval_pascal(c, log);
  EXPECT_DOUBLE_EQ(report.metrics.at("HC"), 100.0);
  EXPECT_DOUBLE_EQ(report.metrics.at("HI"), 0.0);
  EXPECT_DOUBLE_EQ(report.metrics.at("MM"), 100.0);
  EXPECT_EQ(report.metrics.count("HM"), 0u);
  EXPECT_NEAR(report.metrics.at("mean"), 200.0 / 3, 1e-12);
  const auto j = nlohmann::json::parse(read_file(dir / "report.json"));
  EXPECT_EQ(j["sample_count"], 3);
}

TEST_F(Cli, ExitCodesAndNoPartialOutputs) {
  auto dir = fresh_dir("exit");
  const auto ds = (corpus_ / "dataset.jsonl").string();
  const auto cache = (corpus_ / "embeddings.svec").string();
  EXPECT_EQ(run_cli("score --dataset " + ds + " --cache " + cache + " --scorer latent --out " +
                    (dir / "ok.jsonl").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "ok.jsonl"));
  EXPECT_EQ(run_cli("score --dataset " + ds + " --cache " + (dir / "nope.svec").string() + " --out " +
                    (dir / "a.jsonl").string()),
            3);
  write_file_atomic(dir / "corrupt.svec", "SVEC\x01");
  EXPECT_EQ(run_cli("score --dataset " + ds + " --cache " + (dir / "corrupt.svec").string() +
                    " --scorer latent --out " + (dir / "b.jsonl").string()),
            3);
  EXPECT_EQ(run_cli("eval-foil --dataset " + ds + " --cache " + cache + " --n-refs 2"), 2);
  EXPECT_EQ(run_cli("train --bogus-flag"), 2);
  EXPECT_EQ(run_cli("score --dataset " + ds + " --cache " + cache + " --out " + (dir / "c.jsonl").string()), 2);
  for (const char* f : {"a.jsonl", "b.jsonl", "c.jsonl"}) EXPECT_FALSE(fs::exists(dir / f)) << f;
  for (const auto& entry : fs::directory_iterator(dir)) {
    EXPECT_NE(entry.path().extension(), ".tmp") << entry.path();
  }
}

TEST_F(Cli, ConfigFilePrecedence) {
  auto dir = fresh_dir("config");
  write_file_atomic(dir / "cfg.json",
                    nlohmann::json{{"dataset", (corpus_ / "foil.jsonl").string()},
                                   {"cache", (corpus_ / "embeddings.svec").string()},
                                   {"scorer", "latent"},
                                   {"n-refs", 4},
                                   {"out", (dir / "from_file.json").string()}}
                        .dump());
  ASSERT_EQ(run_cli("eval-foil --config " + (dir / "cfg.json").string()), 0);
  auto j = nlohmann::json::parse(read_file(dir / "from_file.json"));
  EXPECT_EQ(j["config"]["n_refs"], 4);
  EXPECT_EQ(j["config"]["scorer"], "latent");

  ASSERT_EQ(run_cli("eval-foil --config " + (dir / "cfg.json").string() + " --n-refs 1 --out " +
                    (dir / "from_flags.json").string()),
            0);
  j = nlohmann::json::parse(read_file(dir / "from_flags.json"));
  EXPECT_EQ(j["config"]["n_refs"], 1);
  EXPECT_EQ(j["config"]["scorer"], "latent");
  EXPECT_FALSE(fs::exists(dir / "from_file.json.tmp"));

  write_file_atomic(dir / "broken.json", "{not json");
  EXPECT_EQ(run_cli("eval-foil --config " + (dir / "broken.json").string()), 2);
}
