#include "capscore/trainer.h"

#include "capscore/error.h"
#include "capscore/eval_stats.h"
#include "capscore/rng.h"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <numeric>

namespace capscore {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw Error(ErrorKind::configuration, "learning_rate must be > 0");
  if (!(beta1 > 0 && beta1 < 1)) throw Error(ErrorKind::configuration, "beta1 must be in (0,1)");
  if (!(beta2 > 0 && beta2 < 1)) throw Error(ErrorKind::configuration, "beta2 must be in (0,1)");
  if (!(huber_delta > 0)) throw Error(ErrorKind::configuration, "huber_delta must be > 0");
  if (batch_size == 0) throw Error(ErrorKind::configuration, "batch_size must be positive");
  if (patience_epochs == 0) throw Error(ErrorKind::configuration, "patience_epochs must be positive");
}

HuberResult huber_loss(double y_hat, double y, double delta) {
  if (!std::isfinite(y_hat) || !std::isfinite(y) || !std::isfinite(delta)) {
    throw Error(ErrorKind::numeric, "huber_loss: non-finite input");
  }
  if (!(delta > 0)) throw Error(ErrorKind::domain, "huber_loss: delta must be > 0");
  const double e = y_hat - y;
  if (std::abs(e) < delta) return {0.5 * e * e, e};
  return {delta * (std::abs(e) - 0.5 * delta), e > 0 ? delta : -delta};
}

TrainState::TrainState(ModelParams<double> initial)
    : params(std::move(initial)), first_moment(params), second_moment(params) {
  for (auto* m : first_moment.tensors()) m->setZero();
  for (auto* m : second_moment.tensors()) m->setZero();
}

void adam_step(TrainState& state, const ModelParams<double>& grads, const TrainConfig& config) {
  auto p = state.params.tensors();
  auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  if (g.size() != p.size()) throw Error(ErrorKind::consistency, "adam_step: gradient tensor count");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i]->rows() != p[i]->rows() || g[i]->cols() != p[i]->cols()) {
      throw Error(ErrorKind::consistency, "adam_step: gradient shape mismatch");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    *m[i] = config.beta1 * *m[i] + (1.0 - config.beta1) * *g[i];
    *v[i] = config.beta2 * *v[i] + (1.0 - config.beta2) * g[i]->cwiseAbs2();
    const auto m_hat = m[i]->array() / correction1;
    const auto v_hat = v[i]->array() / correction2;
    p[i]->array() -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon);
  }
}

bool EarlyStopper::observe(double value) {
  ++epoch_;
  if (value > best_) {
    best_ = value;
    best_epoch_ = epoch_;
    since_improvement_ = 0;
    return true;
  }
  ++since_improvement_;
  return false;
}

std::vector<double> score_all(std::span<const LabeledExample> examples, const ModelParams<double>& params,
                              const ModelConfig& config) {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(score_sample(ex.embeddings, params, config));
  return out;
}

namespace {

void require_targets(std::span<const LabeledExample> set, const char* which) {
  for (const auto& ex : set) {
    if (!ex.target) {
      throw Error(ErrorKind::validation,
                  std::string(which) + " sample '" + ex.id + "' has no human_score");
    }
  }
}

double tau_c_or_nan(std::span<const double> scores, std::span<const double> targets) {
  try {
    return kendall_tau_c(scores, targets);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::domain) return std::numeric_limits<double>::quiet_NaN();
    throw;
  }
}

}  // namespace

TrainResult train(std::span<const LabeledExample> train_set, std::span<const LabeledExample> val_set,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  const TrainHooks& hooks) {
  model_config.validate();
  return train_from(init_params(model_config, train_config.seed), train_set, val_set, model_config,
                    train_config, hooks);
}

TrainResult train_from(ModelParams<double> initial, std::span<const LabeledExample> train_set,
                       std::span<const LabeledExample> val_set, const ModelConfig& model_config,
                       const TrainConfig& train_config, const TrainHooks& hooks) {
  model_config.validate();
  train_config.validate();
  require_targets(train_set, "training");
  require_targets(val_set, "validation");
  if (val_set.empty()) throw Error(ErrorKind::domain, "validation set is empty");
  if (train_set.empty() && train_config.max_epochs > 0) {
    throw Error(ErrorKind::domain, "training set is empty");
  }

  std::vector<double> val_targets;
  for (const auto& ex : val_set) val_targets.push_back(*ex.target);

  TrainState state(std::move(initial));
  TrainResult result;
  result.params = state.params;
  EarlyStopper stopper(train_config.patience_epochs);
  // Shuffle stream is separate from the init stream so both are reproducible.
  Rng rng(splitmix64(train_config.seed ^ 0x53485546464C45ULL));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    double loss_sum = 0.0;

    ModelParams<double> grads = state.params;
    for (std::size_t start = 0; start < order.size(); start += train_config.batch_size) {
      const std::size_t end = std::min(order.size(), start + train_config.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      for (auto* g : grads.tensors()) g->setZero();
      // Fixed in-batch order keeps the gradient sum deterministic.
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = train_set[order[i]];
        auto traced = score_sample_traced(ex.embeddings, state.params, model_config);
        const auto h = huber_loss(traced.score, *ex.target, train_config.huber_delta);
        loss_sum += h.loss;
        backward_sample(traced, h.grad * inv_batch, state.params, grads);
      }
      adam_step(state, grads, train_config);
    }

    const auto val_scores = score_all(val_set, state.params, model_config);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(order.size());
    rec.val_tau_c = tau_c_or_nan(val_scores, val_targets);
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec, state.params, val_scores);

    if (stopper.observe(std::isnan(rec.val_tau_c) ? -std::numeric_limits<double>::infinity()
                                                  : rec.val_tau_c)) {
      if (!std::isnan(rec.val_tau_c)) {
        result.params = state.params;
        result.best_epoch = epoch;
        result.best_tau_c = rec.val_tau_c;
      }
    }
    state.best_tau = stopper.best();
    state.epochs_since_improvement = stopper.should_stop() ? train_config.patience_epochs : 0;
    if (stopper.should_stop()) break;
  }
  return result;
}

std::string history_to_json(const TrainResult& result) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& r : result.history) {
    nlohmann::json tau = std::isnan(r.val_tau_c) ? nlohmann::json(nullptr) : nlohmann::json(r.val_tau_c);
    epochs.push_back({{"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"val_tau_c", tau},
                      {"wall_ms", r.wall_ms}});
  }
  nlohmann::json j = {{"best_epoch", result.best_epoch}, {"epochs", epochs}};
  return j.dump(2) + "\n";
}

}  // namespace capscore
