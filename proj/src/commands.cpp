#include "capscore/commands.h"

#include "capscore/error.h"
#include "capscore/protocol_files.h"
#include "capscore/synth.h"

#include <json.hpp>

#include <memory>
#include <ostream>
#include <thread>

namespace capscore {

namespace fs = std::filesystem;

void apply_mode(ModelConfig& config, const std::string& mode) {
  if (mode.empty() || mode == "full") {
    config.features.mode = FeatureMode::full;
    config.arch = Arch::transformer;
    config.aggregate = Aggregate::none;
  } else if (mode == "raw_features") {
    config.features.mode = FeatureMode::raw_features;
  } else if (mode == "mlp_ablation") {
    config.arch = Arch::mlp_ablation;
  } else if (mode == "aggregate:max") {
    config.aggregate = Aggregate::max;
  } else if (mode == "aggregate:mean") {
    config.aggregate = Aggregate::mean;
  } else {
    throw Error(ErrorKind::validation, "unknown --mode '" + mode + "'");
  }
}

ModelConfig profile_config(const std::string& profile, std::size_t d_clip, std::size_t d_rb) {
  if (profile == "desk") return desk_profile(d_clip, d_rb);
  if (profile == "full") return full_profile(d_clip, d_rb);
  throw Error(ErrorKind::validation, "unknown --profile '" + profile + "'");
}

std::vector<double> score_many(const SampleScorer& scorer, std::span<const EmbeddingSet> sets,
                               std::size_t threads) {
  std::vector<double> out(sets.size());
  threads = std::max<std::size_t>(1, std::min(threads, sets.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < sets.size(); ++i) out[i] = scorer(sets[i]);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  const std::size_t chunk = (sets.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t * chunk; i < std::min(sets.size(), (t + 1) * chunk); ++i) {
          out[i] = scorer(sets[i]);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

namespace {

void require(const fs::path& p, const char* flag) {
  if (p.empty()) throw Error(ErrorKind::validation, std::string("missing required ") + flag);
  if (!fs::exists(p)) throw Error(ErrorKind::io, std::string(flag) + " '" + p.string() + "' does not exist");
}

void require_out(const fs::path& p) {
  if (p.empty()) throw Error(ErrorKind::validation, "missing required --out");
}

std::vector<LabeledExample> join_dataset(const std::vector<CaptionSample>& samples,
                                         const EmbeddingCache& cache) {
  std::vector<LabeledExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    auto it = cache.records.find(s.id);
    if (it == cache.records.end()) {
      throw Error(ErrorKind::validation, "cache has no entry for id '" + s.id + "'");
    }
    if (it->second.num_refs() != s.references.size()) {
      throw Error(ErrorKind::validation, "cache entry '" + s.id + "' has " +
                                             std::to_string(it->second.num_refs()) +
                                             " references, dataset lists " +
                                             std::to_string(s.references.size()));
    }
    out.push_back({s.id, it->second, s.human_score});
  }
  return out;
}

std::vector<LabeledExample> select_split(std::vector<LabeledExample> all, const std::string& split,
                                         std::uint64_t seed) {
  if (split == "all") return all;
  if (all.empty()) return all;
  auto parts = split_dataset<LabeledExample>(all, {}, seed);
  if (split == "train") return parts.train;
  if (split == "val") return parts.val;
  if (split == "test") return parts.test;
  throw Error(ErrorKind::validation, "unknown --split '" + split + "'");
}

struct LoadedModel {
  ModelConfig config;
  ModelParams<double> params;
  ModelParams<float> params_f32;
};

LoadedModel load_model(const CliConfig& cfg, const EmbeddingCache& cache) {
  require(cfg.checkpoint, "--checkpoint");
  auto ck = load_checkpoint(cfg.checkpoint);
  if (!cfg.mode.empty()) {
    ModelConfig want = ck.config;
    apply_mode(want, cfg.mode);
    if (want.features.mode != ck.config.features.mode || want.arch != ck.config.arch) {
      throw Error(ErrorKind::configuration,
                  "--mode " + cfg.mode + " is incompatible with the checkpoint's architecture");
    }
    ck.config.aggregate = want.aggregate;
  }
  if (ck.config.features.d_clip != cache.d_clip || ck.config.features.d_rb != cache.d_rb) {
    throw Error(ErrorKind::configuration,
                "checkpoint expects d_clip=" + std::to_string(ck.config.features.d_clip) +
                    ", d_rb=" + std::to_string(ck.config.features.d_rb) + " but cache has " +
                    std::to_string(cache.d_clip) + ", " + std::to_string(cache.d_rb));
  }
  return {ck.config, ck.params, ck.params.cast<float>()};
}

SampleScorer make_scorer(const CliConfig& cfg, const EmbeddingCache& cache, std::string& description) {
  if (cfg.scorer == "latent") {
    description = "latent";
    return [](const EmbeddingSet& e) { return cosine(e.c_clip, e.v); };
  }
  if (cfg.scorer == "constant") {
    description = "constant";
    return [](const EmbeddingSet&) { return 0.5; };
  }
  if (cfg.scorer != "model") throw Error(ErrorKind::validation, "unknown --scorer '" + cfg.scorer + "'");
  auto model = std::make_shared<LoadedModel>(load_model(cfg, cache));
  description = config_to_json(model->config);
  if (cfg.precision == "f32") {
    return [model](const EmbeddingSet& e) {
      return static_cast<double>(score_sample(e, model->params_f32, model->config));
    };
  }
  if (cfg.precision != "f64") throw Error(ErrorKind::validation, "--precision must be f32 or f64");
  return [model](const EmbeddingSet& e) { return score_sample(e, model->params, model->config); };
}

nlohmann::json echo(const CliConfig& cfg, const std::string& scorer_desc) {
  nlohmann::json j = {{"dataset", cfg.dataset.string()}, {"cache", cfg.cache.string()},
                      {"seed", cfg.seed},                {"scorer", cfg.scorer},
                      {"precision", cfg.precision}};
  if (cfg.scorer == "model") j["model"] = nlohmann::json::parse(scorer_desc);
  return j;
}

void emit(const EvalReport& report, const CliConfig& cfg, std::ostream& log) {
  if (!cfg.out.empty()) write_file_atomic(cfg.out, report.to_json());
  log << report.summary();
}

}  // namespace

void cmd_gen_synth(const CliConfig& cfg, std::ostream& log) {
  require_out(cfg.out);
  SynthConfig sc;
  sc.count = cfg.count;
  sc.seed = cfg.seed;
  sc.d_clip = cfg.d_clip;
  sc.d_rb = cfg.d_rb;
  const auto corpus = generate_synthetic(sc);
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create '" + cfg.out.string() + "'");
  write_file_atomic(cfg.out / "dataset.jsonl", dataset_to_jsonl(corpus.dataset));
  write_file_atomic(cfg.out / "foil.jsonl", foil_to_jsonl(corpus.foil));
  write_file_atomic(cfg.out / "pascal.jsonl", pascal_to_jsonl(corpus.pascal));
  write_cache(cfg.out / "embeddings.svec", corpus.cache);
  log << "wrote " << corpus.dataset.size() << " samples, " << corpus.foil.size() << " FOIL pairs, "
      << corpus.pascal.size() << " PASCAL items to " << cfg.out.string() << "\n";
}

TrainResult cmd_train(const CliConfig& cfg, std::ostream& log) {
  require(cfg.dataset, "--dataset");
  require(cfg.cache, "--cache");
  require_out(cfg.out);
  const auto cache = read_cache(cfg.cache, cfg.normalize);
  const auto examples = join_dataset(load_dataset(cfg.dataset), cache);
  for (const auto& ex : examples) {
    if (!ex.target) throw Error(ErrorKind::validation, "sample '" + ex.id + "' has no human_score");
  }
  if (examples.empty()) throw Error(ErrorKind::domain, "dataset is empty");

  ModelConfig mc = profile_config(cfg.profile, cache.d_clip, cache.d_rb);
  apply_mode(mc, cfg.mode);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;

  const auto parts = split_dataset<LabeledExample>(examples, {}, cfg.seed);
  log << "training on " << parts.train.size() << " samples, validating on " << parts.val.size()
      << " (" << parts.test.size() << " held out)\n";
  auto result = train(parts.train, parts.val, mc, tc);

  save_checkpoint(result.params, mc, cfg.out);
  fs::path history = cfg.history;
  if (history.empty()) {
    history = cfg.out;
    history += ".history.json";
  }
  write_file_atomic(history, history_to_json(result));
  for (const auto& r : result.history) {
    log << "epoch " << r.epoch << "  loss " << r.mean_loss << "  val tau_c " << r.val_tau_c << "\n";
  }
  log << "best epoch " << result.best_epoch << ", checkpoint " << cfg.out.string() << "\n";
  return result;
}

void cmd_score(const CliConfig& cfg, std::ostream& log) {
  require(cfg.dataset, "--dataset");
  require(cfg.cache, "--cache");
  require_out(cfg.out);
  const auto cache = read_cache(cfg.cache, cfg.normalize);
  const auto examples =
      select_split(join_dataset(load_dataset(cfg.dataset), cache), cfg.split, cfg.seed);
  std::string desc;
  auto scorer = make_scorer(cfg, cache, desc);

  std::vector<EmbeddingSet> sets;
  for (const auto& ex : examples) sets.push_back(ex.embeddings);
  const auto scores = score_many(scorer, sets, cfg.threads);

  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out += nlohmann::json{{"id", examples[i].id}, {"score", scores[i]}}.dump();
    out += '\n';
  }
  write_file_atomic(cfg.out, out);
  log << "scored " << examples.size() << " samples -> " << cfg.out.string() << "\n";
}

EvalReport cmd_eval_corr(const CliConfig& cfg, std::ostream& log) {
  require(cfg.dataset, "--dataset");
  require(cfg.cache, "--cache");
  const auto cache = read_cache(cfg.cache, cfg.normalize);
  const auto examples =
      select_split(join_dataset(load_dataset(cfg.dataset), cache), cfg.split, cfg.seed);
  std::string desc;
  auto scorer = make_scorer(cfg, cache, desc);

  std::vector<EmbeddingSet> sets;
  std::vector<double> human;
  for (const auto& ex : examples) {
    if (!ex.target) throw Error(ErrorKind::validation, "sample '" + ex.id + "' has no human_score");
    sets.push_back(ex.embeddings);
    human.push_back(*ex.target);
  }
  const auto scores = score_many(scorer, sets, cfg.threads);

  EvalReport report;
  report.protocol = "correlation";
  report.sample_count = examples.size();
  report.metrics["tau_b"] = kendall_tau_b(scores, human);
  report.metrics["tau_c"] = kendall_tau_c(scores, human);
  auto conf = echo(cfg, desc);
  conf["split"] = cfg.split;
  report.config_json = conf.dump();
  emit(report, cfg, log);
  return report;
}

EvalReport cmd_eval_foil(const CliConfig& cfg, std::ostream& log) {
  require(cfg.dataset, "--dataset");
  require(cfg.cache, "--cache");
  if (cfg.n_refs != 1 && cfg.n_refs != 4) throw Error(ErrorKind::validation, "--n-refs must be 1 or 4");
  const auto cache = read_cache(cfg.cache, cfg.normalize);
  const auto items = join_foil(parse_foil_file(read_file(cfg.dataset)), cache);
  std::string desc;
  auto scorer = make_scorer(cfg, cache, desc);

  EvalReport report;
  report.protocol = "foil-" + std::to_string(cfg.n_refs) + "ref";
  report.sample_count = items.size();
  report.metrics["accuracy"] = foil_accuracy(scorer, items, cfg.n_refs);
  auto conf = echo(cfg, desc);
  conf["n_refs"] = cfg.n_refs;
  report.config_json = conf.dump();
  emit(report, cfg, log);
  return report;
}

EvalReport cmd_eval_pascal(const CliConfig& cfg, std::ostream& log) {
  require(cfg.dataset, "--dataset");
  require(cfg.cache, "--cache");
  const auto cache = read_cache(cfg.cache, cfg.normalize);
  const auto cases = join_pascal(parse_pascal_file(read_file(cfg.dataset)), cache);
  std::string desc;
  auto scorer = make_scorer(cfg, cache, desc);

  const auto result = pascal50s_accuracy(scorer, cases, cfg.refs_per_item, cfg.seed);
  EvalReport report;
  report.protocol = "pascal50s";
  report.sample_count = cases.size();
  for (const auto& [cat, acc] : result.accuracy) report.metrics[to_string(cat)] = acc;
  report.metrics["mean"] = result.mean;
  auto conf = echo(cfg, desc);
  conf["refs_per_item"] = cfg.refs_per_item;
  report.config_json = conf.dump();
  emit(report, cfg, log);
  return report;
}

EvalReport cmd_bench(const CliConfig& cfg, std::ostream& log) {
  require(cfg.dataset, "--dataset");
  require(cfg.cache, "--cache");
  const auto cache = read_cache(cfg.cache, cfg.normalize);
  auto examples = join_dataset(load_dataset(cfg.dataset), cache);
  if (cfg.limit > 0 && examples.size() > cfg.limit) examples.resize(cfg.limit);
  std::string desc;
  auto scorer = make_scorer(cfg, cache, desc);

  std::vector<EmbeddingSet> sets;
  for (const auto& ex : examples) sets.push_back(ex.embeddings);
  EvalReport report;
  report.protocol = "bench";
  report.sample_count = sets.size();
  report.timing = bench_inference(scorer, sets, cfg.repetitions);
  auto conf = echo(cfg, desc);
  conf["repetitions"] = cfg.repetitions;
  report.config_json = conf.dump();
  emit(report, cfg, log);
  return report;
}

int run_command(const CliConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    const auto& c = cfg.subcommand;
    if (c == "gen-synth") {
      cmd_gen_synth(cfg, log);
    } else if (c == "train") {
      cmd_train(cfg, log);
    } else if (c == "score") {
      cmd_score(cfg, log);
    } else if (c == "eval-corr") {
      cmd_eval_corr(cfg, log);
    } else if (c == "eval-foil") {
      cmd_eval_foil(cfg, log);
    } else if (c == "eval-pascal") {
      cmd_eval_pascal(cfg, log);
    } else if (c == "bench") {
      cmd_bench(cfg, log);
    } else {
      throw Error(ErrorKind::validation, "unknown subcommand '" + c + "'");
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: I/O error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace capscore
