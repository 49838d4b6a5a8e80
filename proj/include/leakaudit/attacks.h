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

// Membership-inference experiment and the five attacks: sample-, admission-
// and patient-level black-box thresholds (S-BBA, A-BBA, P-BBA) and the two
// learned white-box attacks over attention (S-AWBA) and gradient (S-GWBA)
// features.

#ifndef LEAKAUDIT_ATTACKS_H_
#define LEAKAUDIT_ATTACKS_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "leakaudit/corpus.h"
#include "leakaudit/model.h"
#include "leakaudit/report.h"
#include "nlohmann/json.hpp"

namespace leakaudit {

enum class AttackKind { kSbba, kAbba, kPbba, kSawba, kSgwba };

std::string_view AttackName(AttackKind kind);
absl::StatusOr<AttackKind> ParseAttackName(std::string_view name);
// Every attack, in report order.
std::span<const AttackKind> AllAttacks();

enum class GroupUnit { kSample, kAdmission, kPatient };
std::string_view UnitName(GroupUnit unit);
GroupUnit AttackUnit(AttackKind kind);

struct ErrorThreshold {
  double mu_tr = 0.0;
};

absl::StatusOr<ErrorThreshold> ComputeThreshold(
    std::span<const double> train_errors);

// Member iff e < mu_tr; a tie goes to non-member.
MembershipLabel SbbaPredict(double e, const ErrorThreshold& threshold);

// One sample as seen by the adversary. `b` is the hidden label, used only to
// score predictions and to train learned attack models.
struct ScoredSample {
  std::string sample_id;
  std::string patient_id;
  std::string admission_id;
  MembershipLabel b = MembershipLabel::kMember;
  double error = 0.0;
  std::vector<double> features;
};

struct UnitPrediction {
  std::string unit_id;
  MembershipLabel b = MembershipLabel::kMember;
  MembershipLabel predicted = MembershipLabel::kMember;
  double score = 0.0;
};

struct AttackOutcome {
  std::string attack;
  std::string checkpoint;
  uint64_t seed = 0;
  double threshold = 0.0;  // mu_tr for threshold attacks
  std::vector<UnitPrediction> predictions;
  double p_member_given_train = 0.0;  // Pr[A = 0 | b = 0]
  double p_member_given_test = 0.0;   // Pr[A = 0 | b = 1]
  double pl = 0.0;
  int n_train_units = 0;
  int n_test_units = 0;
};

nlohmann::json AttackOutcomeToJson(const AttackOutcome& outcome);
absl::StatusOr<AttackOutcome> AttackOutcomeFromJson(const nlohmann::json& j);

// Fills the summary fields of `outcome` from its predictions.
absl::Status SummarizeOutcome(AttackOutcome& outcome);

// Averages errors per group (one unit each) and applies the S-BBA rule with
// `threshold`. kSample keeps one unit per sample.
absl::StatusOr<AttackOutcome> GroupAttack(std::span<const ScoredSample> samples,
                                          GroupUnit unit,
                                          const ErrorThreshold& threshold);

// C(a) = sum_i a_i ln a_i with 0 ln 0 = 0. `a` must be on the simplex to 1e-4.
absl::StatusOr<double> AttentionConcentration(std::span<const double> a);

// Per (layer, head): concentration of each non-pad query row, reduced to
// mean, median, p5 and p95. Length n_layers * n_heads * 4.
absl::StatusOr<std::vector<double>> ExtractAttentionFeatures(
    const ForwardTrace& trace);
std::vector<std::string> AttentionFeatureNames(int n_layers, int n_heads);

// Squared L2 norm of each tensor, in inventory order.
std::vector<double> ExtractGradientFeatures(const GradientSet& grads);
std::vector<std::string> GradientFeatureNames(const TensorSet& like);

struct AttackHyper {
  double l2 = 1e-4;
  int iterations = 1000;
  double step = 0.1;
};

struct DroppedFeature {
  int index = 0;
  std::string reason;  // "zero variance" or "duplicate of <k>"
};

// Logistic regression on z-scored features predicting b. Both classes carry
// equal total weight in the loss, matching the uniform prior on b.
struct AttackModel {
  std::vector<int> kept;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<DroppedFeature> dropped;

  // Pr[b = 1 | x].
  double ProbNonMember(std::span<const double> x) const;
  MembershipLabel Predict(std::span<const double> x) const;
};

absl::StatusOr<AttackModel> FitAttackModel(
    std::span<const std::vector<double>> features,
    std::span<const MembershipLabel> labels, const AttackHyper& hyper);

// An adversary turns the two sides of the experiment into an outcome. It may
// read `b` only through the documented protocol of its kind.
class Adversary {
 public:
  virtual ~Adversary() = default;
  virtual std::string name() const = 0;
  virtual absl::StatusOr<AttackOutcome> Run(std::span<const ScoredSample> train,
                                            std::span<const ScoredSample> test,
                                            uint64_t split_seed) const = 0;
};

// S-BBA / A-BBA / P-BBA. Without a fixed threshold, mu_tr is the mean error
// over the train side.
class ThresholdAdversary : public Adversary {
 public:
  ThresholdAdversary(std::string name, GroupUnit unit,
                     std::optional<ErrorThreshold> fixed = std::nullopt);
  std::string name() const override { return name_; }
  absl::StatusOr<AttackOutcome> Run(std::span<const ScoredSample> train,
                                    std::span<const ScoredSample> test,
                                    uint64_t split_seed) const override;

 private:
  std::string name_;
  GroupUnit unit_;
  std::optional<ErrorThreshold> fixed_;
};

// S-AWBA / S-GWBA: a logistic model trained on a patient-disjoint 20% of each
// side, evaluated on the remaining 80%.
class LearnedAdversary : public Adversary {
 public:
  LearnedAdversary(std::string name, AttackHyper hyper,
                   double train_fraction = 0.2);
  std::string name() const override { return name_; }
  absl::StatusOr<AttackOutcome> Run(std::span<const ScoredSample> train,
                                    std::span<const ScoredSample> test,
                                    uint64_t split_seed) const override;

 private:
  std::string name_;
  AttackHyper hyper_;
  double train_fraction_;
};

// Per-sample fixed rule; useful as a reference attacker.
class RuleAdversary : public Adversary {
 public:
  using Rule = std::function<MembershipLabel(const ScoredSample&)>;
  RuleAdversary(std::string name, Rule rule);
  std::string name() const override { return name_; }
  absl::StatusOr<AttackOutcome> Run(std::span<const ScoredSample> train,
                                    std::span<const ScoredSample> test,
                                    uint64_t split_seed) const override;

 private:
  std::string name_;
  Rule rule_;
};

absl::StatusOr<AttackOutcome> RunMembershipExperiment(
    const Adversary& adversary, std::span<const ScoredSample> train,
    std::span<const ScoredSample> test, uint64_t split_seed);

// Patient-disjoint selection of roughly `fraction` of the patients in
// `samples` (at least one, never all). Returns a flag per sample.
absl::StatusOr<std::vector<bool>> SelectAttackTrainingSplit(
    std::span<const ScoredSample> samples, double fraction, uint64_t seed,
    std::string_view stream);

enum class FeatureKind { kNone, kAttention, kGradient };

// Scores samples against a checkpoint: e(x) under a fresh objective drawn
// from `objective_seed` and the requested white-box features. Training mask
// seeds are never reused here.
absl::StatusOr<std::vector<ScoredSample>> ScoreSamples(
    const ParameterSet& params, std::span<const Sample> samples,
    FeatureKind kind, uint64_t objective_seed);

uint64_t AttackObjectiveSeed(uint64_t seed, size_t index);

absl::Status WriteFeatureCsv(const std::string& path,
                             std::span<const std::string> feature_names,
                             std::span<const ScoredSample> train,
                             std::span<const ScoredSample> test);

}  // namespace leakaudit

#endif  // LEAKAUDIT_ATTACKS_H_
