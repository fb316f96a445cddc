// capscore: train, score and evaluate the similarity-vector caption metric.

#include "capscore/commands.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

namespace {

// Config-file values become extra flags for keys the command line did not set,
// so precedence is flags > file > defaults.
std::vector<std::string> merge_config_file(std::vector<std::string> args) {
  std::string path;
  std::set<std::string> given;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    const std::string key = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    given.insert(key);
    if (key == "config") {
      if (eq != std::string::npos) {
        path = a.substr(eq + 1);
      } else if (i + 1 < args.size()) {
        path = args[i + 1];
      }
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw capscore::Error(capscore::ErrorKind::io, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw capscore::Error(capscore::ErrorKind::parse, "config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw capscore::Error(capscore::ErrorKind::parse, "config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (given.count(it.key())) continue;
    if (it->is_boolean()) {
      if (it->get<bool>()) args.push_back("--" + it.key());
      continue;
    }
    args.push_back("--" + it.key());
    args.push_back(it->is_string() ? it->get<std::string>() : it->dump());
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  capscore::CliConfig cfg;
  CLI::App app{"Similarity-vector transformer caption metric"};
  app.require_subcommand(1);

  std::string config_path;
  bool no_normalize = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (flags override it)");
    sub->add_option("--seed", cfg.seed, "Seed for every randomized step");
    sub->add_flag("--no-normalize", no_normalize, "Keep cached embeddings unnormalized");
  };
  auto inputs = [&](CLI::App* sub) {
    sub->add_option("--dataset", cfg.dataset, "JSON Lines input");
    sub->add_option("--cache", cfg.cache, "Embedding cache (.svec)");
  };
  auto scoring = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", cfg.checkpoint, "Model checkpoint (.svtm)");
    sub->add_option("--mode", cfg.mode, "Override aggregate: full | aggregate:max | aggregate:mean");
    sub->add_option("--scorer", cfg.scorer, "model | latent | constant")->capture_default_str();
    sub->add_option("--precision", cfg.precision, "f64 | f32")->capture_default_str();
    sub->add_option("--threads", cfg.threads, "Scoring threads")->capture_default_str();
  };

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset and embedding cache");
  common(gen);
  gen->add_option("--count", cfg.count, "Number of dataset samples")->capture_default_str();
  gen->add_option("--out", cfg.out, "Output directory")->required();
  gen->add_option("--d-clip", cfg.d_clip, "Image/text joint embedding width")->capture_default_str();
  gen->add_option("--d-rb", cfg.d_rb, "Sentence embedding width")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train on a dataset; writes checkpoint and history");
  common(tr);
  inputs(tr);
  tr->add_option("--out", cfg.out, "Checkpoint path")->required();
  tr->add_option("--history", cfg.history, "History JSON path (default <out>.history.json)");
  tr->add_option("--mode", cfg.mode, "full | raw_features | mlp_ablation | aggregate:max | aggregate:mean");
  tr->add_option("--profile", cfg.profile, "desk | full")->capture_default_str();
  tr->add_option("--lr", cfg.train.learning_rate, "Adam learning rate")->capture_default_str();
  tr->add_option("--batch-size", cfg.train.batch_size)->capture_default_str();
  tr->add_option("--epochs", cfg.train.max_epochs, "Maximum epochs")->capture_default_str();
  tr->add_option("--patience", cfg.train.patience_epochs)->capture_default_str();
  tr->add_option("--huber-delta", cfg.train.huber_delta)->capture_default_str();

  auto* sc = app.add_subcommand("score", "Score every sample; writes JSON Lines {id, score}");
  common(sc);
  inputs(sc);
  scoring(sc);
  sc->add_option("--out", cfg.out, "Output JSONL")->required();
  sc->add_option("--split", cfg.split, "all | train | val | test (split by --seed)")->capture_default_str();

  auto* corr = app.add_subcommand("eval-corr", "Kendall tau_b / tau_c against human judgments");
  common(corr);
  inputs(corr);
  scoring(corr);
  corr->add_option("--out", cfg.out, "Report JSON");
  corr->add_option("--split", cfg.split, "all | train | val | test (split by --seed)")->capture_default_str();

  auto* foil = app.add_subcommand("eval-foil", "Pairwise hallucination accuracy");
  common(foil);
  inputs(foil);
  scoring(foil);
  foil->add_option("--out", cfg.out, "Report JSON");
  foil->add_option("--n-refs", cfg.n_refs, "1 or 4")->capture_default_str();

  auto* pascal = app.add_subcommand("eval-pascal", "PASCAL-50S pairwise accuracy per category");
  common(pascal);
  inputs(pascal);
  scoring(pascal);
  pascal->add_option("--out", cfg.out, "Report JSON");
  pascal->add_option("--refs-per-item", cfg.refs_per_item)->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Per-sample inference timing");
  common(bench);
  inputs(bench);
  scoring(bench);
  bench->add_option("--out", cfg.out, "Report JSON");
  bench->add_option("--repetitions", cfg.repetitions)->capture_default_str();
  bench->add_option("--limit", cfg.limit, "Use only the first N samples (0 = all)");

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = merge_config_file(std::move(args));
  } catch (const capscore::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return capscore::exit_code_for(e.kind());
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes vectors back to front
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  cfg.normalize = !no_normalize;
  cfg.subcommand = app.get_subcommands().front()->get_name();
  return capscore::run_command(cfg, std::cout, std::cerr);
}
