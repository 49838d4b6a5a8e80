// Copyright 2026 The leakaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "leakaudit/trainer.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "leakaudit/checkpoint.h"

namespace leakaudit {
namespace {

using json = nlohmann::json;

std::string EpochDir(const std::string& root, int epoch) {
  return (std::filesystem::path(root) / absl::StrCat("epoch_", epoch)).string();
}

json EpochToJson(const EpochRecord& r) {
  json j = {{"epoch", r.epoch},
            {"checkpoint", r.checkpoint_dir},
            {"train_loss", r.train_loss},
            {"test_loss", r.test_loss ? json(*r.test_loss) : json(nullptr)},
            {"steps", r.steps}};
  if (r.accountant) {
    const auto& a = *r.accountant;
    j["accountant"] = {{"q", a.q},         {"sigma", a.sigma},
                       {"steps", a.steps}, {"epsilon", a.epsilon},
                       {"delta", a.delta}, {"optimal_order", a.optimal_order}};
  } else {
    j["accountant"] = nullptr;
  }
  return j;
}

// Finishes an epoch: evaluation, checkpoint and log entry.
absl::Status WriteTrainLog(const TrainOptions& options, const TrainLog& log) {
  if (options.checkpoint_root.empty()) return absl::OkStatus();
  std::filesystem::create_directories(options.checkpoint_root);
  std::ofstream out(
      std::filesystem::path(options.checkpoint_root) / "train_log.json",
      std::ios::binary | std::ios::trunc);
  out << TrainLogToJson(log).dump(2) << '\n';
  if (!out) return absl::DataLossError("cannot write train log");
  return absl::OkStatus();
}

absl::Status CloseEpoch(const ParameterSet& params, int epoch,
                        double train_loss, int64_t steps,
                        std::optional<AccountantSnapshot> accountant,
                        const TrainOptions& options, TrainLog& log) {
  EpochRecord rec;
  rec.epoch = epoch;
  rec.train_loss = train_loss;
  rec.steps = steps;
  rec.accountant = accountant;
  if (!options.eval_samples.empty()) {
    auto loss = EvaluateLmLoss(params, options.eval_samples, options.eval_seed);
    if (!loss.ok()) return loss.status();
    rec.test_loss = *loss;
  }
  if (!options.checkpoint_root.empty()) {
    rec.checkpoint_dir = EpochDir(options.checkpoint_root, epoch);
    json lineage = options.lineage;
    lineage["epoch"] = epoch;
    if (absl::Status s = SaveCheckpoint(params, rec.checkpoint_dir, lineage);
        !s.ok()) {
      return s;
    }
    std::ofstream out(std::filesystem::path(rec.checkpoint_dir) / "log.json",
                      std::ios::binary | std::ios::trunc);
    out << EpochToJson(rec).dump(2) << '\n';
    if (!out) return absl::DataLossError("cannot write epoch log");
  }
  log.epochs.push_back(std::move(rec));
  return WriteTrainLog(options, log);
}

// Restores the last finite parameters and records the failure. Training
// stops but the call still succeeds so earlier checkpoints stay usable.
absl::StatusOr<TrainLog> MarkDiverged(TrainLog& log, ParameterSet& params,
                                      const ParameterSet& last_good,
                                      const absl::Status& why,
                                      const TrainOptions& options) {
  log.diverged = true;
  log.divergence_message = std::string(why.message());
  params = last_good;
  if (absl::Status s = WriteTrainLog(options, log); !s.ok()) return s;
  return log;
}

}  // namespace

absl::Status ValidateTrainConfig(const TrainConfig& c) {
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    return absl::InvalidArgumentError("learning_rate must be finite and >= 0");
  }
  if (c.epochs < 1) return absl::InvalidArgumentError("epochs must be >= 1");
  if (c.batch_size < 1 || c.lot_size < 1) {
    return absl::InvalidArgumentError("batch_size and lot_size must be >= 1");
  }
  if (c.dp) {
    if (!(c.dp->clip_norm > 0.0)) {
      return absl::InvalidArgumentError("clip_norm must be > 0");
    }
    if (!(c.dp->noise_std >= 0.0)) {
      return absl::InvalidArgumentError("noise_std (sigma) must be >= 0");
    }
    if (!(c.dp->delta > 0.0 && c.dp->delta < 1.0)) {
      return absl::InvalidArgumentError("delta must lie in (0, 1)");
    }
    if (c.dp->patient_cap < 1) {
      return absl::InvalidArgumentError("patient_cap must be >= 1");
    }
  }
  return absl::OkStatus();
}

json TrainLogToJson(const TrainLog& log) {
  json epochs = json::array();
  for (const auto& r : log.epochs) epochs.push_back(EpochToJson(r));
  return {{"epochs", epochs},
          {"diverged", log.diverged},
          {"divergence_message", log.divergence_message}};
}

absl::StatusOr<TrainLog> TrainLogFromJson(const json& j) {
  TrainLog log;
  try {
    log.diverged = j.at("diverged").get<bool>();
    log.divergence_message = j.at("divergence_message").get<std::string>();
    for (const auto& e : j.at("epochs")) {
      EpochRecord r;
      r.epoch = e.at("epoch").get<int>();
      r.checkpoint_dir = e.at("checkpoint").get<std::string>();
      r.train_loss = e.at("train_loss").get<double>();
      if (!e.at("test_loss").is_null())
        r.test_loss = e["test_loss"].get<double>();
      r.steps = e.at("steps").get<int64_t>();
      if (!e.at("accountant").is_null()) {
        const json& a = e["accountant"];
        r.accountant = AccountantSnapshot{
            a.at("q").get<double>(),
            a.at("sigma").get<double>(),
            a.at("steps").get<int64_t>(),
            a.at("epsilon").is_null() ? std::numeric_limits<double>::infinity()
                                      : a["epsilon"].get<double>(),
            a.at("delta").get<double>(),
            a.at("optimal_order").get<int>()};
      }
      log.epochs.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("bad train log: ", e.what()));
  }
  return log;
}

double ClipGradient(GradientSet& grad, double clip_norm) {
  const double norm = std::sqrt(grad.SquaredNorm());
  if (norm > clip_norm) grad.Scale(clip_norm / norm);
  return norm;
}

void ApplyUpdate(ParameterSet& params, const GradientSet& grad, double lr) {
  auto dst = params.tensors();
  const auto src = grad.tensors();
  for (size_t i = 0; i < dst.size(); ++i) {
    auto& v = dst[i].values;
    const auto& g = src[i].values;
    for (size_t k = 0; k < v.size(); ++k) v[k] -= lr * g[k];
  }
}

DpSgdOptimizer::DpSgdOptimizer(const ModelConfig& model, const DpConfig& dp,
                               double learning_rate, double expected_lot_size,
                               Rng noise_rng)
    : dp_(dp),
      learning_rate_(learning_rate),
      expected_lot_size_(expected_lot_size),
      noise_rng_(std::move(noise_rng)),
      sum_(model) {}

void DpSgdOptimizer::Accumulate(GradientSet& per_sample) {
  ClipGradient(per_sample, dp_.clip_norm);
  sum_.AddScaled(per_sample, 1.0);
  ++lot_count_;
}

void DpSgdOptimizer::Step(ParameterSet& params) {
  const double noise_scale = dp_.noise_std * dp_.clip_norm;
  if (noise_scale > 0.0) {
    std::normal_distribution<double> normal(0.0, noise_scale);
    for (Tensor& t : sum_.tensors()) {
      for (double& v : t.values) v += normal(noise_rng_);
    }
  }
  sum_.Scale(1.0 / expected_lot_size_);
  ApplyUpdate(params, sum_, learning_rate_);
  sum_ = GradientSet(params.config());
  lot_count_ = 0;
}

uint64_t EvalObjectiveSeed(uint64_t objective_seed, size_t index) {
  return DeriveSeed(objective_seed, "eval_objective", index);
}

absl::StatusOr<double> EvaluateLmLoss(const ParameterSet& params,
                                      std::span<const Sample> samples,
                                      uint64_t objective_seed) {
  if (samples.empty()) return absl::InvalidArgumentError("no samples");
  double total = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    auto e = SampleError(params, samples[i].tokens,
                         EvalObjectiveSeed(objective_seed, i));
    if (!e.ok()) return e.status();
    total += *e;
  }
  return total / static_cast<double>(samples.size());
}

absl::StatusOr<TrainLog> TrainSgd(ParameterSet& params,
                                  std::span<const Sample> train_samples,
                                  const TrainConfig& config, uint64_t seed,
                                  const TrainOptions& options) {
  if (absl::Status s = ValidateTrainConfig(config); !s.ok()) return s;
  if (train_samples.empty()) {
    return absl::InvalidArgumentError("empty training set");
  }
  Rng shuffle_rng = MakeStream(seed, "shuffle");
  Rng mask_rng = MakeStream(seed, "mask");
  std::vector<size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainLog log;
  ParameterSet last_good = params;
  int64_t steps = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      GradientSet mean(params.config());
      for (size_t b = start; b < end; ++b) {
        const Sample& s = train_samples[order[b]];
        auto obj = MakeObjective(s.tokens, params.config(), mask_rng());
        if (!obj.ok()) return obj.status();
        auto lg = Backward(params, *obj);
        if (!lg.ok()) {
          if (absl::IsInternal(lg.status())) {
            return MarkDiverged(log, params, last_good, lg.status(), options);
          }
          return lg.status();
        }
        loss_sum += lg->mean_loss;
        mean.AddScaled(lg->gradient, 1.0);
      }
      mean.Scale(1.0 / static_cast<double>(end - start));
      ApplyUpdate(params, mean, config.learning_rate);
      ++steps;
    }
    if (!params.AllFinite()) {
      return MarkDiverged(
          log, params, last_good,
          absl::InternalError(
              "non-finite parameters after update (model diverged)"),
          options);
    }
    if (absl::Status s = CloseEpoch(
            params, epoch, loss_sum / static_cast<double>(order.size()), steps,
            std::nullopt, options, log);
        !s.ok()) {
      if (absl::IsInternal(s)) {
        return MarkDiverged(log, params, last_good, s, options);
      }
      return s;
    }
    last_good = params;
  }
  return log;
}

absl::StatusOr<TrainLog> TrainDpSgd(ParameterSet& params,
                                    std::span<const Sample> train_samples,
                                    const TrainConfig& config, uint64_t seed,
                                    const TrainOptions& options) {
  if (absl::Status s = ValidateTrainConfig(config); !s.ok()) return s;
  if (!config.dp) {
    return absl::InvalidArgumentError("DP-SGD requires a dp section");
  }
  if (train_samples.empty()) {
    return absl::InvalidArgumentError("empty training set");
  }
  const DpConfig& dp = *config.dp;
  const double n = static_cast<double>(train_samples.size());
  const double q = std::min(1.0, config.lot_size / n);
  const double expected_lot = q * n;
  const int64_t steps_per_epoch =
      std::max<int64_t>(1, std::llround(n / expected_lot));

  auto accountant = MakeAccountant(q, dp.noise_std);
  if (!accountant.ok()) return accountant.status();
  AccountantState acct = *std::move(accountant);

  Rng sampling_rng = MakeStream(seed, "sampling");
  Rng mask_rng = MakeStream(seed, "mask");
  DpSgdOptimizer optimizer(params.config(), dp, config.learning_rate,
                           expected_lot, MakeStream(seed, "noise"));
  std::bernoulli_distribution include(q);

  TrainLog log;
  ParameterSet last_good = params;
  int64_t steps = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    int64_t loss_count = 0;
    for (int64_t step = 0; step < steps_per_epoch; ++step) {
      for (size_t i = 0; i < train_samples.size(); ++i) {
        if (!include(sampling_rng)) continue;
        auto obj =
            MakeObjective(train_samples[i].tokens, params.config(), mask_rng());
        if (!obj.ok()) return obj.status();
        auto lg = Backward(params, *obj);
        if (!lg.ok()) {
          if (absl::IsInternal(lg.status())) {
            return MarkDiverged(log, params, last_good, lg.status(), options);
          }
          return lg.status();
        }
        loss_sum += lg->mean_loss;
        ++loss_count;
        optimizer.Accumulate(lg->gradient);
      }
      // An empty lot is still a mechanism invocation: noise-only update.
      optimizer.Step(params);
      acct = Compose(acct, 1);
      ++steps;
    }
    if (!params.AllFinite()) {
      return MarkDiverged(
          log, params, last_good,
          absl::InternalError(
              "non-finite parameters after update (model diverged)"),
          options);
    }
    AccountantSnapshot snap{q, dp.noise_std, acct.steps, 0.0, dp.delta, 0};
    if (auto budget = ToEpsilon(acct, dp.delta); budget.ok()) {
      snap.epsilon = budget->epsilon;
      snap.optimal_order = budget->optimal_order;
    } else {
      snap.epsilon = std::numeric_limits<double>::infinity();
    }
    const double mean_loss =
        loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    if (absl::Status s =
            CloseEpoch(params, epoch, mean_loss, steps, snap, options, log);
        !s.ok()) {
      if (absl::IsInternal(s)) {
        return MarkDiverged(log, params, last_good, s, options);
      }
      return s;
    }
    last_good = params;
  }
  return log;
}

}  // namespace leakaudit
