#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "akde/metrics.hpp"
#include "akde/model.hpp"

namespace akde {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t t = 0;
};

// One bias-corrected Adam update from Parameter::grad. Throws NumericError
// naming the first parameter with a non-finite gradient; nothing is updated
// in that case.
void adam_step(AdamState& state, std::span<Parameter* const> params, const AdamConfig& cfg);

enum class StopMetric { r2_at_1, r10_at_1, r10_at_3, r10_at_5 };

std::optional<double> metric_value(const MetricReport& report, StopMetric metric);
const char* metric_name(StopMetric metric);

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  std::uint64_t seed = 0;
  StopMetric stop_metric = StopMetric::r10_at_1;

  void validate() const;
};

// Tracks the best metric seen; improvement means strictly greater.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  // Returns true when `value` is a new best.
  bool observe(double value);
  bool should_stop() const { return stale_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 before any observation
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_ = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  MetricReport metrics;

  // One JSON object: epoch, loss and the four recall metrics (null if absent).
  std::string to_json_line() const;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string divergence_reason;
};

// Scores every group of `groups` with `model`.
std::vector<std::vector<double>> score_groups(DualEncoder& model, std::span<const EvaluationGroup> groups);

MetricReport evaluate(DualEncoder& model, std::span<const EvaluationGroup> groups, const UnigramModel& unigram = {});

// Mean-BCE Adam training with per-epoch validation and early stopping. On
// return the model holds the parameters of the best epoch (or the initial
// parameters if no epoch completed). `on_epoch` sees each record as it is made.
TrainResult train(DualEncoder& model, std::span<const Triple> data, std::span<const EvaluationGroup> validation,
                  const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch = {});

// Forward + backward + Adam on one batch; returns the batch loss before the
// update. Gradients are zeroed first.
double train_step(DualEncoder& model, AdamState& state, std::span<const Triple> batch, const AdamConfig& cfg);

}  // namespace akde
