#pragma once

#include "capscore/error.h"
#include "capscore/eval_stats.h"
#include "capscore/synth.h"
#include "capscore/model.h"
#include "capscore/trainer.h"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace capscore {

// Everything a subcommand can be told. Fields irrelevant to a command are ignored.
struct CliConfig {
  std::string subcommand;
  std::filesystem::path dataset;
  std::filesystem::path cache;
  std::filesystem::path checkpoint;
  std::filesystem::path out;
  std::filesystem::path history;  // train; defaults to <out>.history.json
  std::uint64_t seed = 0;
  std::string mode;  // empty: checkpoint/default; full | raw_features | mlp_ablation | aggregate:max | aggregate:mean
  std::string profile = "desk";
  std::string split = "all";     // all | train | val | test
  std::string scorer = "model";  // model | latent | constant
  std::string precision = "f64";
  bool normalize = true;
  std::size_t refs_per_item = 5;
  std::size_t n_refs = 1;
  std::size_t repetitions = 3;
  std::size_t threads = 1;
  std::size_t limit = 0;  // bench: 0 = all samples
  std::size_t count = 100;
  std::size_t d_clip = 512;
  std::size_t d_rb = 768;
  TrainConfig train;
};

// Applies a --mode selector to a model config.
void apply_mode(ModelConfig& config, const std::string& mode);
ModelConfig profile_config(const std::string& profile, std::size_t d_clip, std::size_t d_rb);

// Each command writes its outputs atomically, prints a short summary to log and
// throws capscore::Error on failure.
void cmd_gen_synth(const CliConfig& cfg, std::ostream& log);
TrainResult cmd_train(const CliConfig& cfg, std::ostream& log);
void cmd_score(const CliConfig& cfg, std::ostream& log);
EvalReport cmd_eval_corr(const CliConfig& cfg, std::ostream& log);
EvalReport cmd_eval_foil(const CliConfig& cfg, std::ostream& log);
EvalReport cmd_eval_pascal(const CliConfig& cfg, std::ostream& log);
EvalReport cmd_bench(const CliConfig& cfg, std::ostream& log);

// Dispatches on cfg.subcommand and maps errors to exit codes
// (0 ok, 2 validation, 3 I/O, 4 numeric).
int run_command(const CliConfig& cfg, std::ostream& log, std::ostream& err);

// Scores sets in parallel; results land by index so thread count never changes output.
std::vector<double> score_many(const SampleScorer& scorer, std::span<const EmbeddingSet> sets,
                               std::size_t threads);

}  // namespace capscore
