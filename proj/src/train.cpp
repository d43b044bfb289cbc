#include "akde/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

namespace akde {

void adam_step(AdamState& state, std::span<Parameter* const> params, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (Parameter* p : params) {
      state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: optimizer state does not match parameters");
  for (Parameter* p : params)
    if (!p->grad.allFinite()) throw NumericError("adam_step: non-finite gradient in " + p->name);

  ++state.t;
  const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * p.grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= cfg.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + cfg.eps);
  }
}

std::optional<double> metric_value(const MetricReport& report, StopMetric metric) {
  switch (metric) {
    case StopMetric::r2_at_1: return report.r2_at_1;
    case StopMetric::r10_at_1: return report.r10_at_1;
    case StopMetric::r10_at_3: return report.r10_at_3;
    case StopMetric::r10_at_5: return report.r10_at_5;
  }
  return std::nullopt;
}

const char* metric_name(StopMetric metric) {
  switch (metric) {
    case StopMetric::r2_at_1: return "R2@1";
    case StopMetric::r10_at_1: return "R10@1";
    case StopMetric::r10_at_3: return "R10@3";
    case StopMetric::r10_at_5: return "R10@5";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (max_epochs < 1) throw ConfigError("need at least one epoch");
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience < 1) throw ConfigError("patience must be at least 1");
}

bool EarlyStopping::observe(double value) {
  ++epochs_;
  if (best_epoch_ == 0 || value > best_) {
    best_ = value;
    best_epoch_ = epochs_;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

std::string EpochRecord::to_json_line() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["loss"] = loss;
  j["R2@1"] = opt(metrics.r2_at_1);
  j["R10@1"] = opt(metrics.r10_at_1);
  j["R10@3"] = opt(metrics.r10_at_3);
  j["R10@5"] = opt(metrics.r10_at_5);
  return j.dump();
}

std::vector<std::vector<double>> score_groups(DualEncoder& model, std::span<const EvaluationGroup> groups) {
  std::vector<std::vector<double>> scores;
  scores.reserve(groups.size());
  for (const auto& g : groups) scores.push_back(model.score_candidates(g.flat_context(), g.candidates));
  return scores;
}

MetricReport evaluate(DualEncoder& model, std::span<const EvaluationGroup> groups, const UnigramModel& unigram) {
  const auto scores = score_groups(model, groups);
  return make_report(groups, scores, unigram);
}

double train_step(DualEncoder& model, AdamState& state, std::span<const Triple> batch, const AdamConfig& cfg) {
  const auto params = model.params().parameters();
  for (Parameter* p : params) p->zero_grad();
  Graph g;
  Var loss = model.loss(g, batch);
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value)) throw NumericError("training loss is not finite");
  g.backward(loss);
  g.accumulate_parameter_grads();
  adam_step(state, params, cfg);
  ++model.params().version;
  return value;
}

namespace {

std::vector<Matrix> snapshot(ModelParams& params) {
  std::vector<Matrix> out;
  for (Parameter* p : params.parameters()) out.push_back(p->value);
  return out;
}

void restore(ModelParams& params, const std::vector<Matrix>& values) {
  const auto ps = params.parameters();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = values[i];
  ++params.version;
}

}  // namespace

TrainResult train(DualEncoder& model, std::span<const Triple> data, std::span<const EvaluationGroup> validation,
                  const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (data.empty()) throw ConfigError("training data is empty");
  if (validation.empty()) throw ConfigError("validation data is empty");

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  AdamState adam;
  EarlyStopping stopping(cfg.patience);
  std::vector<Matrix> best = snapshot(model.params());
  std::vector<Triple> batch;
  batch.reserve(cfg.batch_size);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        batch.clear();
        for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
        loss_sum += train_step(model, adam, batch, cfg.adam) * static_cast<double>(batch.size());
      }
    } catch (const NumericError& e) {
      result.diverged = true;
      result.divergence_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_sum / static_cast<double>(data.size());
    record.metrics = evaluate(model, validation);
    const auto metric = metric_value(record.metrics, cfg.stop_metric);
    if (!metric)
      throw ConfigError(std::string("validation groups are too small for the early-stop metric ") +
                        metric_name(cfg.stop_metric));
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
    if (stopping.observe(*metric)) best = snapshot(model.params());
    if (stopping.should_stop()) break;
  }

  restore(model.params(), best);
  result.best_epoch = stopping.best_epoch();
  return result;
}

}  // namespace akde
