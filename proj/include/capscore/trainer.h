#pragma once

#include "capscore/embedding_io.h"
#include "capscore/model.h"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace capscore {

struct TrainConfig {
  double learning_rate = 5e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 16;
  double huber_delta = 0.5;
  std::size_t max_epochs = 20;
  std::size_t patience_epochs = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct HuberResult {
  double loss;
  double grad;  // d loss / d y_hat
};

// Quadratic for |e| < delta, linear beyond; e = y_hat - y.
HuberResult huber_loss(double y_hat, double y, double delta);

struct TrainState {
  ModelParams<double> params;
  ModelParams<double> first_moment;
  ModelParams<double> second_moment;
  std::uint64_t step = 0;
  double best_tau = -std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;

  explicit TrainState(ModelParams<double> initial);
};

// Bias-corrected Adam, no weight decay.
void adam_step(TrainState& state, const ModelParams<double>& grads, const TrainConfig& config);

// Strict-improvement early stopping on a maximized metric.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  // Returns true when value beats every earlier value.
  bool observe(double value);
  bool should_stop() const { return since_improvement_ >= patience_; }
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 = none yet

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_improvement_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

struct LabeledExample {
  std::string id;
  EmbeddingSet embeddings;
  std::optional<double> target;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double val_tau_c = 0.0;  // NaN when undefined (constant scores)
  double wall_ms = 0.0;
};

struct TrainHooks {
  // Called after every epoch with the params at the end of that epoch and the
  // validation scores they produce.
  std::function<void(const EpochRecord&, const ModelParams<double>&, std::span<const double>)> on_epoch;
};

struct TrainResult {
  ModelParams<double> params;  // snapshot from the best epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 = initial params returned
  double best_tau_c = std::numeric_limits<double>::quiet_NaN();
};

std::vector<double> score_all(std::span<const LabeledExample> examples, const ModelParams<double>& params,
                              const ModelConfig& config);

TrainResult train(std::span<const LabeledExample> train_set, std::span<const LabeledExample> val_set,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  const TrainHooks& hooks = {});

// Starts from given params instead of init_params(config, seed).
TrainResult train_from(ModelParams<double> initial, std::span<const LabeledExample> train_set,
                       std::span<const LabeledExample> val_set, const ModelConfig& model_config,
                       const TrainConfig& train_config, const TrainHooks& hooks = {});

std::string history_to_json(const TrainResult& result);

}  // namespace capscore
