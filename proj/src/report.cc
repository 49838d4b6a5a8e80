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

#include "leakaudit/report.h"

#include <cmath>
#include <fstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "leakaudit/stats.h"

namespace leakaudit {
namespace {

using json = nlohmann::json;

double MemberFraction(std::span<const MembershipLabel> predictions) {
  size_t zeros = 0;
  for (MembershipLabel p : predictions) {
    if (p == MembershipLabel::kMember) ++zeros;
  }
  return static_cast<double>(zeros) / static_cast<double>(predictions.size());
}

std::string Num(double v) { return absl::StrFormat("%.12g", v); }

json OptionalNumber(std::optional<double> v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

absl::StatusOr<double> ComputePl(
    std::span<const MembershipLabel> predictions_train,
    std::span<const MembershipLabel> predictions_test) {
  if (predictions_train.empty() || predictions_test.empty()) {
    return absl::InvalidArgumentError(
        "PL needs predictions on both the train and the test side");
  }
  return MemberFraction(predictions_train) - MemberFraction(predictions_test);
}

absl::StatusOr<RarityAnalysis> BucketedPl(
    std::span<const RarityBucket> buckets,
    const std::map<std::string, MembershipLabel>& predictions_train,
    const std::map<std::string, MembershipLabel>& predictions_test,
    double mu_tr, const std::map<std::string, double>& patient_log_prob) {
  if (buckets.empty()) return absl::InvalidArgumentError("no retained buckets");
  RarityAnalysis out;
  out.threshold = mu_tr;
  std::vector<double> probs, pls;
  for (const RarityBucket& b : buckets) {
    BucketLeakage r;
    r.bucket = b.bucket_index;
    r.log_prob_lo = b.log_prob_lo;
    r.log_prob_hi = b.log_prob_hi;
    r.n_patients = static_cast<int>(b.member_patient_ids.size());
    std::vector<MembershipLabel> tr, te;
    double sum_log = 0.0, sum_prob = 0.0;
    for (const auto& pid : b.member_patient_ids) {
      auto lp = patient_log_prob.find(pid);
      if (lp == patient_log_prob.end()) {
        return absl::InvalidArgumentError(
            absl::StrCat("no log-probability for patient '", pid, "'"));
      }
      sum_log += lp->second;
      sum_prob += std::exp(lp->second);
      if (auto it = predictions_train.find(pid);
          it != predictions_train.end()) {
        tr.push_back(it->second);
      } else if (auto jt = predictions_test.find(pid);
                 jt != predictions_test.end()) {
        te.push_back(jt->second);
      }
    }
    if (tr.empty() && te.empty()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "bucket ", b.bucket_index, " has no patients on either side"));
    }
    r.mean_log_prob = sum_log / r.n_patients;
    r.mean_prob = sum_prob / r.n_patients;
    r.n_train = static_cast<int>(tr.size());
    r.n_test = static_cast<int>(te.size());
    if (!tr.empty() && !te.empty()) {
      auto pl = ComputePl(tr, te);
      if (!pl.ok()) return pl.status();
      r.pl = *pl;
      probs.push_back(r.mean_prob);
      pls.push_back(*pl);
    }
    out.buckets.push_back(r);
  }
  if (probs.size() >= 3) {
    out.spearman = Spearman(probs, pls);
    out.pearson = Pearson(probs, pls);
  }
  return out;
}

absl::StatusOr<std::optional<double>> RankCorrelation(
    std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    return absl::InvalidArgumentError("rank correlation needs equal lengths");
  }
  if (xs.size() < 3) {
    return absl::InvalidArgumentError("rank correlation needs >= 3 points");
  }
  return Spearman(xs, ys);
}

std::string FormatSigma(std::optional<double> sigma) {
  return sigma ? absl::StrFormat("%g", *sigma) : std::string("non-DP");
}

json ReportToJson(const LeakageReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"model_id", r.model_id},
                    {"objective", r.objective},
                    {"sigma", r.sigma},
                    {"epoch", r.epoch},
                    {"attack", r.attack},
                    {"unit", r.unit},
                    {"pl", r.pl},
                    {"n_train_units", r.n_train_units},
                    {"n_test_units", r.n_test_units},
                    {"seed", r.seed},
                    {"checkpoint", r.checkpoint}});
  }
  json utility = json::array();
  for (const auto& u : report.utility) {
    utility.push_back({{"model_id", u.model_id},
                       {"objective", u.objective},
                       {"sigma", u.sigma},
                       {"epoch", u.epoch},
                       {"train_loss", u.train_loss},
                       {"test_loss", u.test_loss},
                       {"seed", u.seed}});
  }
  json accountant = json::array();
  for (const auto& a : report.accountant) {
    accountant.push_back({{"model_id", a.model_id},
                          {"sigma", a.sigma},
                          {"q", a.q},
                          {"steps", a.steps},
                          {"epsilon", a.epsilon},
                          {"delta", a.delta},
                          {"optimal_order", a.optimal_order},
                          {"group_k", a.group_k},
                          {"group_epsilon", a.group_epsilon},
                          {"group_delta", a.group_delta},
                          {"group_delta_capped", a.group_delta_capped},
                          {"seed", a.seed}});
  }
  return {{"rows", rows},
          {"utility", utility},
          {"accountant", accountant},
          {"metadata", report.metadata}};
}

absl::StatusOr<LeakageReport> ReportFromJson(const json& j) {
  LeakageReport report;
  try {
    for (const auto& r : j.at("rows")) {
      report.rows.push_back(LeakageRow{
          r.at("model_id").get<std::string>(),
          r.at("objective").get<std::string>(),
          r.at("sigma").get<std::string>(), r.at("epoch").get<int>(),
          r.at("attack").get<std::string>(), r.at("unit").get<std::string>(),
          r.at("pl").get<double>(), r.at("n_train_units").get<int>(),
          r.at("n_test_units").get<int>(), r.at("seed").get<uint64_t>(),
          r.at("checkpoint").get<std::string>()});
    }
    for (const auto& u : j.at("utility")) {
      report.utility.push_back(UtilityRow{
          u.at("model_id").get<std::string>(),
          u.at("objective").get<std::string>(),
          u.at("sigma").get<std::string>(), u.at("epoch").get<int>(),
          u.at("train_loss").get<double>(), u.at("test_loss").get<double>(),
          u.at("seed").get<uint64_t>()});
    }
    for (const auto& a : j.at("accountant")) {
      report.accountant.push_back(AccountantRow{
          a.at("model_id").get<std::string>(), a.at("sigma").get<double>(),
          a.at("q").get<double>(), a.at("steps").get<int64_t>(),
          a.at("epsilon").is_null() ? INFINITY : a["epsilon"].get<double>(),
          a.at("delta").get<double>(), a.at("optimal_order").get<int>(),
          a.at("group_k").get<int>(),
          a.at("group_epsilon").is_null() ? INFINITY
                                          : a["group_epsilon"].get<double>(),
          a.at("group_delta").get<double>(),
          a.at("group_delta_capped").get<bool>(),
          a.at("seed").get<uint64_t>()});
    }
    report.metadata = j.value("metadata", json::object());
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("bad report JSON: ", e.what()));
  }
  return report;
}

absl::Status EmitReport(const LeakageReport& report, const std::string& path,
                        ReportFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  if (format == ReportFormat::kJson) {
    out << ReportToJson(report).dump(2) << '\n';
  } else {
    out << kReportCsvHeader << '\n';
    for (const auto& r : report.rows) {
      out << r.model_id << ',' << r.objective << ',' << r.sigma << ','
          << r.epoch << ',' << r.attack << ',' << r.unit << ',' << Num(r.pl)
          << ',' << r.n_train_units << ',' << r.n_test_units << ',' << r.seed
          << '\n';
    }
  }
  out.flush();
  if (!out) return absl::DataLossError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

absl::StatusOr<LeakageReport> ReadReportJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  try {
    return ReportFromJson(json::parse(in));
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed report ", path, ": ", e.what()));
  }
}

absl::Status WriteRarityCsv(const RarityAnalysis& analysis,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  out << kRarityCsvHeader << '\n';
  for (const auto& b : analysis.buckets) {
    out << b.bucket << ',' << Num(b.log_prob_lo) << ',' << Num(b.log_prob_hi)
        << ',' << Num(b.mean_prob) << ',' << b.n_patients << ','
        << (b.pl ? Num(*b.pl) : std::string()) << '\n';
  }
  out.flush();
  if (!out) return absl::DataLossError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

}  // namespace leakaudit
