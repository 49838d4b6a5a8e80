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

// Privacy-leakage metric, rarity-bucket analysis and report emission.

#ifndef LEAKAUDIT_REPORT_H_
#define LEAKAUDIT_REPORT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "leakaudit/corpus.h"
#include "nlohmann/json.hpp"

namespace leakaudit {

// b in the membership experiment: 0 = member (training data), 1 = non-member.
enum class MembershipLabel : int { kMember = 0, kNonMember = 1 };

// PL = Pr[A = 0 | b = 0] - Pr[A = 0 | b = 1]: the fraction of member
// predictions on the train side minus that on the test side.
absl::StatusOr<double> ComputePl(
    std::span<const MembershipLabel> predictions_train,
    std::span<const MembershipLabel> predictions_test);

struct LeakageRow {
  std::string model_id;
  std::string objective;
  std::string sigma;  // "non-DP" or the noise multiplier
  int epoch = 0;
  std::string attack;
  std::string unit;  // sample, admission or patient
  double pl = 0.0;
  int n_train_units = 0;
  int n_test_units = 0;
  uint64_t seed = 0;
  std::string checkpoint;
};

struct UtilityRow {
  std::string model_id;
  std::string objective;
  std::string sigma;
  int epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  uint64_t seed = 0;
};

struct AccountantRow {
  std::string model_id;
  double sigma = 0.0;
  double q = 0.0;
  int64_t steps = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  int optimal_order = 0;
  int group_k = 1;
  double group_epsilon = 0.0;
  double group_delta = 0.0;
  bool group_delta_capped = false;
  uint64_t seed = 0;
};

struct LeakageReport {
  std::vector<LeakageRow> rows;
  std::vector<UtilityRow> utility;
  std::vector<AccountantRow> accountant;
  // Free-form run metadata; the only place timestamps may appear.
  nlohmann::json metadata = nlohmann::json::object();
};

struct BucketLeakage {
  int bucket = 0;
  double log_prob_lo = 0.0;
  double log_prob_hi = 0.0;
  double mean_log_prob = 0.0;
  double mean_prob = 0.0;
  int n_patients = 0;
  int n_train = 0;
  int n_test = 0;
  // Unset when the bucket lacks patients on either side.
  std::optional<double> pl;
};

struct RarityAnalysis {
  double threshold = 0.0;
  std::vector<BucketLeakage> buckets;
  // Between bucket mean probability and bucket PL, over buckets with a PL.
  std::optional<double> spearman;
  std::optional<double> pearson;
};

// Per-bucket PL from patient-level (P-BBA) predictions made with the shared
// threshold `mu_tr`. `patient_log_prob` maps every bucketed patient to its
// profile log-probability.
absl::StatusOr<RarityAnalysis> BucketedPl(
    std::span<const RarityBucket> buckets,
    const std::map<std::string, MembershipLabel>& predictions_train,
    const std::map<std::string, MembershipLabel>& predictions_test,
    double mu_tr, const std::map<std::string, double>& patient_log_prob);

// Spearman rho with average-rank ties. Requires equal lengths >= 3; returns
// nullopt when either input is constant.
absl::StatusOr<std::optional<double>> RankCorrelation(
    std::span<const double> xs, std::span<const double> ys);

inline constexpr char kReportCsvHeader[] =
    "model_id,objective,sigma,epoch,attack,unit,pl,n_train_units,"
    "n_test_units,seed";
inline constexpr char kRarityCsvHeader[] =
    "bucket,log_prob_lo,log_prob_hi,mean_prob,n_patients,pl";

enum class ReportFormat { kCsv, kJson };

// CSV holds the leakage rows only; JSON holds the whole report.
absl::Status EmitReport(const LeakageReport& report, const std::string& path,
                        ReportFormat format);
absl::StatusOr<LeakageReport> ReadReportJson(const std::string& path);

nlohmann::json ReportToJson(const LeakageReport& report);
absl::StatusOr<LeakageReport> ReportFromJson(const nlohmann::json& j);

absl::Status WriteRarityCsv(const RarityAnalysis& analysis,
                            const std::string& path);

std::string FormatSigma(std::optional<double> sigma);

}  // namespace leakaudit

#endif  // LEAKAUDIT_REPORT_H_
