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

#include "leakaudit/attacks.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_replace.h"
#include "leakaudit/rng.h"
#include "leakaudit/stats.h"

namespace leakaudit {
namespace {

using json = nlohmann::json;

constexpr std::array<AttackKind, 5> kAllAttacks = {
    AttackKind::kSbba, AttackKind::kAbba, AttackKind::kPbba, AttackKind::kSawba,
    AttackKind::kSgwba};

double Sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

std::string GroupKey(const ScoredSample& s, GroupUnit unit) {
  switch (unit) {
    case GroupUnit::kSample:
      return s.sample_id;
    case GroupUnit::kAdmission:
      return absl::StrCat(s.patient_id, "/", s.admission_id);
    case GroupUnit::kPatient:
      return s.patient_id;
  }
  return s.sample_id;
}

absl::Status CheckSides(std::span<const ScoredSample> train,
                        std::span<const ScoredSample> test) {
  if (train.empty() || test.empty()) {
    return absl::InvalidArgumentError(
        "membership experiment needs samples on both sides");
  }
  for (const auto& s : train) {
    if (s.b != MembershipLabel::kMember) {
      return absl::InvalidArgumentError(
          absl::StrCat("train-side sample ", s.sample_id, " is labelled b=1"));
    }
  }
  for (const auto& s : test) {
    if (s.b != MembershipLabel::kNonMember) {
      return absl::InvalidArgumentError(
          absl::StrCat("test-side sample ", s.sample_id, " is labelled b=0"));
    }
  }
  return absl::OkStatus();
}

std::vector<ScoredSample> Concat(std::span<const ScoredSample> a,
                                 std::span<const ScoredSample> b) {
  std::vector<ScoredSample> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

std::string_view AttackName(AttackKind kind) {
  switch (kind) {
    case AttackKind::kSbba:
      return "S-BBA";
    case AttackKind::kAbba:
      return "A-BBA";
    case AttackKind::kPbba:
      return "P-BBA";
    case AttackKind::kSawba:
      return "S-AWBA";
    case AttackKind::kSgwba:
      return "S-GWBA";
  }
  return "?";
}

absl::StatusOr<AttackKind> ParseAttackName(std::string_view name) {
  for (AttackKind k : kAllAttacks) {
    if (AttackName(k) == name) return k;
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown attack '", std::string(name), "'"));
}

std::span<const AttackKind> AllAttacks() { return kAllAttacks; }

std::string_view UnitName(GroupUnit unit) {
  switch (unit) {
    case GroupUnit::kSample:
      return "sample";
    case GroupUnit::kAdmission:
      return "admission";
    case GroupUnit::kPatient:
      return "patient";
  }
  return "?";
}

GroupUnit AttackUnit(AttackKind kind) {
  switch (kind) {
    case AttackKind::kAbba:
      return GroupUnit::kAdmission;
    case AttackKind::kPbba:
      return GroupUnit::kPatient;
    default:
      return GroupUnit::kSample;
  }
}

absl::StatusOr<ErrorThreshold> ComputeThreshold(
    std::span<const double> train_errors) {
  if (train_errors.empty()) {
    return absl::InvalidArgumentError("threshold needs training errors");
  }
  for (double e : train_errors) {
    if (!std::isfinite(e)) {
      return absl::InvalidArgumentError("non-finite training error");
    }
  }
  return ErrorThreshold{Mean(train_errors)};
}

MembershipLabel SbbaPredict(double e, const ErrorThreshold& threshold) {
  return e < threshold.mu_tr ? MembershipLabel::kMember
                             : MembershipLabel::kNonMember;
}

absl::Status SummarizeOutcome(AttackOutcome& outcome) {
  std::vector<MembershipLabel> tr, te;
  for (const auto& p : outcome.predictions) {
    (p.b == MembershipLabel::kMember ? tr : te).push_back(p.predicted);
  }
  auto pl = ComputePl(tr, te);
  if (!pl.ok()) return pl.status();
  auto zeros = [](const std::vector<MembershipLabel>& v) {
    return static_cast<double>(
               std::count(v.begin(), v.end(), MembershipLabel::kMember)) /
           static_cast<double>(v.size());
  };
  outcome.p_member_given_train = zeros(tr);
  outcome.p_member_given_test = zeros(te);
  outcome.pl = *pl;
  outcome.n_train_units = static_cast<int>(tr.size());
  outcome.n_test_units = static_cast<int>(te.size());
  return absl::OkStatus();
}

json AttackOutcomeToJson(const AttackOutcome& o) {
  json predictions = json::array();
  for (const auto& p : o.predictions) {
    predictions.push_back({{"unit", p.unit_id},
                           {"b", static_cast<int>(p.b)},
                           {"predicted", static_cast<int>(p.predicted)},
                           {"score", p.score}});
  }
  return {{"attack", o.attack},
          {"checkpoint", o.checkpoint},
          {"pl", o.pl},
          {"p_member_given_train", o.p_member_given_train},
          {"p_member_given_test", o.p_member_given_test},
          {"n_train_units", o.n_train_units},
          {"n_test_units", o.n_test_units},
          {"seed", o.seed},
          {"threshold", o.threshold},
          {"predictions", predictions}};
}

absl::StatusOr<AttackOutcome> AttackOutcomeFromJson(const json& j) {
  AttackOutcome o;
  auto label = [](const json& v) {
    const int x = v.get<int>();
    if (x != 0 && x != 1) throw std::out_of_range("label must be 0 or 1");
    return static_cast<MembershipLabel>(x);
  };
  try {
    o.attack = j.at("attack").get<std::string>();
    o.checkpoint = j.at("checkpoint").get<std::string>();
    o.pl = j.at("pl").get<double>();
    o.p_member_given_train = j.at("p_member_given_train").get<double>();
    o.p_member_given_test = j.at("p_member_given_test").get<double>();
    o.n_train_units = j.at("n_train_units").get<int>();
    o.n_test_units = j.at("n_test_units").get<int>();
    o.seed = j.at("seed").get<uint64_t>();
    if (j.contains("threshold")) o.threshold = j["threshold"].get<double>();
    if (j.contains("predictions")) {
      for (const auto& p : j["predictions"]) {
        o.predictions.push_back(UnitPrediction{
            p.at("unit").get<std::string>(), label(p.at("b")),
            label(p.at("predicted")), p.at("score").get<double>()});
      }
    }
  } catch (const std::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("bad attack outcome: ", e.what()));
  }
  if (!o.predictions.empty()) {
    // The stored PL must agree with the stored predictions.
    AttackOutcome check = o;
    if (absl::Status s = SummarizeOutcome(check); !s.ok()) return s;
    if (check.pl != o.pl || check.n_train_units != o.n_train_units ||
        check.n_test_units != o.n_test_units) {
      return absl::InvalidArgumentError(
          absl::StrCat("attack outcome PL ", o.pl,
                       " disagrees with its predictions (", check.pl, ")"));
    }
  }
  return o;
}

absl::StatusOr<AttackOutcome> GroupAttack(std::span<const ScoredSample> samples,
                                          GroupUnit unit,
                                          const ErrorThreshold& threshold) {
  struct Group {
    double sum = 0.0;
    int count = 0;
    MembershipLabel b;
  };
  std::vector<std::string> order;
  std::map<std::string, Group> groups;
  for (const auto& s : samples) {
    std::string key = GroupKey(s, unit);
    if (key.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("sample ", s.sample_id, " lacks a ",
                       std::string(UnitName(unit)), " key"));
    }
    auto [it, inserted] = groups.try_emplace(key, Group{0.0, 0, s.b});
    if (inserted) order.push_back(key);
    if (it->second.b != s.b) {
      return absl::InvalidArgumentError(
          absl::StrCat(std::string(UnitName(unit)), " ", key,
                       " spans both sides of the split"));
    }
    it->second.sum += s.error;
    ++it->second.count;
  }
  AttackOutcome out;
  out.threshold = threshold.mu_tr;
  for (const auto& key : order) {
    const Group& g = groups.at(key);
    if (g.count == 0) return absl::InternalError("empty group");
    const double e = g.sum / g.count;
    out.predictions.push_back(
        UnitPrediction{key, g.b, SbbaPredict(e, threshold), e});
  }
  if (absl::Status s = SummarizeOutcome(out); !s.ok()) return s;
  return out;
}

absl::StatusOr<double> AttentionConcentration(std::span<const double> a) {
  if (a.empty()) return absl::InvalidArgumentError("empty attention vector");
  double sum = 0.0, c = 0.0;
  for (double v : a) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      return absl::InvalidArgumentError("attention entry outside [0, inf)");
    }
    sum += v;
    if (v > 0.0) c += v * std::log(v);
  }
  if (std::abs(sum - 1.0) > 1e-4) {
    return absl::InvalidArgumentError(
        absl::StrFormat("attention vector sums to %.6g, not 1", sum));
  }
  return c;
}

absl::StatusOr<std::vector<double>> ExtractAttentionFeatures(
    const ForwardTrace& trace) {
  const int n = trace.seq_len;
  int queries = 0;
  for (bool q : trace.query_mask) queries += q ? 1 : 0;
  if (queries < 2) {
    return absl::InvalidArgumentError(
        "attention features need at least 2 non-pad positions");
  }
  std::vector<double> out;
  for (const auto& layer : trace.attention) {
    for (const auto& head : layer) {
      if (head.size() != static_cast<size_t>(n) * n) {
        return absl::InvalidArgumentError("attention matrix has wrong size");
      }
      std::vector<double> conc;
      conc.reserve(queries);
      for (int i = 0; i < n; ++i) {
        if (!trace.query_mask[i]) continue;
        auto c = AttentionConcentration(std::span<const double>(head).subspan(
            static_cast<size_t>(i) * n, n));
        if (!c.ok()) return c.status();
        conc.push_back(*c);
      }
      out.push_back(Mean(conc));
      out.push_back(Median(conc));
      out.push_back(Percentile(conc, 0.05));
      out.push_back(Percentile(conc, 0.95));
    }
  }
  return out;
}

std::vector<std::string> AttentionFeatureNames(int n_layers, int n_heads) {
  std::vector<std::string> names;
  for (int l = 0; l < n_layers; ++l) {
    for (int h = 0; h < n_heads; ++h) {
      for (const char* agg : {"mean", "median", "p5", "p95"}) {
        names.push_back(absl::StrFormat("att_L%d_H%d_%s", l, h, agg));
      }
    }
  }
  return names;
}

std::vector<double> ExtractGradientFeatures(const GradientSet& grads) {
  std::vector<double> out;
  out.reserve(grads.size());
  for (const Tensor& t : grads.tensors()) {
    double s = 0.0;
    for (double v : t.values) s += v * v;
    out.push_back(s);
  }
  return out;
}

std::vector<std::string> GradientFeatureNames(const TensorSet& like) {
  std::vector<std::string> names;
  for (const Tensor& t : like.tensors()) {
    names.push_back(
        absl::StrCat("grad_", absl::StrReplaceAll(t.name, {{".", "_"}})));
  }
  return names;
}

double AttackModel::ProbNonMember(std::span<const double> x) const {
  double t = bias;
  for (size_t j = 0; j < kept.size(); ++j) {
    t += weights[j] * (x[kept[j]] - mean[j]) / stddev[j];
  }
  return Sigmoid(t);
}

MembershipLabel AttackModel::Predict(std::span<const double> x) const {
  return ProbNonMember(x) > 0.5 ? MembershipLabel::kNonMember
                                : MembershipLabel::kMember;
}

absl::StatusOr<AttackModel> FitAttackModel(
    std::span<const std::vector<double>> features,
    std::span<const MembershipLabel> labels, const AttackHyper& hyper) {
  const size_t n = features.size();
  if (n == 0 || labels.size() != n) {
    return absl::InvalidArgumentError("features and labels must align");
  }
  if (hyper.iterations < 0 || !(hyper.step > 0) || !(hyper.l2 >= 0)) {
    return absl::InvalidArgumentError("bad attack hyperparameters");
  }
  const size_t dim = features[0].size();
  size_t n_pos = 0;
  for (size_t i = 0; i < n; ++i) {
    if (features[i].size() != dim) {
      return absl::InvalidArgumentError("inconsistent feature dimension");
    }
    for (double v : features[i]) {
      if (!std::isfinite(v)) {
        return absl::InvalidArgumentError("non-finite attack feature");
      }
    }
    if (labels[i] == MembershipLabel::kNonMember) ++n_pos;
  }
  if (n_pos == 0 || n_pos == n) {
    return absl::InvalidArgumentError("attack model needs both classes");
  }

  AttackModel model;
  std::vector<std::vector<double>> z;  // kept columns, standardized
  for (size_t j = 0; j < dim; ++j) {
    double m = 0.0;
    for (size_t i = 0; i < n; ++i) m += features[i][j];
    m /= n;
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) {
      var += (features[i][j] - m) * (features[i][j] - m);
    }
    const double sd = std::sqrt(var / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) {
      model.dropped.push_back({static_cast<int>(j), "zero variance"});
      continue;
    }
    std::vector<double> col(n);
    for (size_t i = 0; i < n; ++i) col[i] = (features[i][j] - m) / sd;
    int dup = -1;
    for (size_t k = 0; k < z.size() && dup < 0; ++k) {
      bool same = true;
      for (size_t i = 0; i < n && same; ++i) {
        same = std::abs(z[k][i] - col[i]) <= 1e-12;
      }
      if (same) dup = model.kept[k];
    }
    if (dup >= 0) {
      model.dropped.push_back(
          {static_cast<int>(j), absl::StrCat("duplicate of ", dup)});
      continue;
    }
    model.kept.push_back(static_cast<int>(j));
    model.mean.push_back(m);
    model.stddev.push_back(sd);
    z.push_back(std::move(col));
  }

  // Balanced class weights, normalized to sum to one.
  const double w_pos = 0.5 / n_pos;
  const double w_neg = 0.5 / (n - n_pos);
  std::vector<double> y(n), w(n);
  for (size_t i = 0; i < n; ++i) {
    const bool pos = labels[i] == MembershipLabel::kNonMember;
    y[i] = pos ? 1.0 : 0.0;
    w[i] = pos ? w_pos : w_neg;
  }
  const size_t d = z.size();
  model.weights.assign(d, 0.0);
  std::vector<double> grad(d), t(n);
  for (int it = 0; it < hyper.iterations; ++it) {
    std::fill(t.begin(), t.end(), model.bias);
    for (size_t k = 0; k < d; ++k) {
      const double wk = model.weights[k];
      const std::vector<double>& col = z[k];
      for (size_t i = 0; i < n; ++i) t[i] += wk * col[i];
    }
    double gb = 0.0;
    for (size_t i = 0; i < n; ++i) {
      t[i] = w[i] * (Sigmoid(t[i]) - y[i]);
      gb += t[i];
    }
    for (size_t k = 0; k < d; ++k) {
      double g = 0.0;
      const std::vector<double>& col = z[k];
      for (size_t i = 0; i < n; ++i) g += t[i] * col[i];
      grad[k] = g + hyper.l2 * model.weights[k];
    }
    for (size_t k = 0; k < d; ++k) model.weights[k] -= hyper.step * grad[k];
    model.bias -= hyper.step * gb;
  }
  return model;
}

ThresholdAdversary::ThresholdAdversary(std::string name, GroupUnit unit,
                                       std::optional<ErrorThreshold> fixed)
    : name_(std::move(name)), unit_(unit), fixed_(fixed) {}

absl::StatusOr<AttackOutcome> ThresholdAdversary::Run(
    std::span<const ScoredSample> train, std::span<const ScoredSample> test,
    uint64_t split_seed) const {
  ErrorThreshold threshold;
  if (fixed_) {
    threshold = *fixed_;
  } else {
    std::vector<double> errors;
    for (const auto& s : train) errors.push_back(s.error);
    auto t = ComputeThreshold(errors);
    if (!t.ok()) return t.status();
    threshold = *t;
  }
  auto out = GroupAttack(Concat(train, test), unit_, threshold);
  if (!out.ok()) return out.status();
  out->attack = name_;
  out->seed = split_seed;
  return out;
}

absl::StatusOr<std::vector<bool>> SelectAttackTrainingSplit(
    std::span<const ScoredSample> samples, double fraction, uint64_t seed,
    std::string_view stream) {
  std::vector<std::string> patients;
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (seen.insert(s.patient_id).second) patients.push_back(s.patient_id);
  }
  if (patients.size() < 2) {
    return absl::FailedPreconditionError(
        "a patient-disjoint attack split needs at least 2 patients per side");
  }
  Rng rng = MakeStream(seed, stream);
  std::shuffle(patients.begin(), patients.end(), rng);
  const long long p = static_cast<long long>(patients.size());
  const long long k = std::clamp(std::llround(fraction * p), 1LL, p - 1);
  std::set<std::string> chosen(patients.begin(), patients.begin() + k);
  std::vector<bool> flags;
  flags.reserve(samples.size());
  for (const auto& s : samples) flags.push_back(chosen.contains(s.patient_id));
  return flags;
}

LearnedAdversary::LearnedAdversary(std::string name, AttackHyper hyper,
                                   double train_fraction)
    : name_(std::move(name)), hyper_(hyper), train_fraction_(train_fraction) {}

absl::StatusOr<AttackOutcome> LearnedAdversary::Run(
    std::span<const ScoredSample> train, std::span<const ScoredSample> test,
    uint64_t split_seed) const {
  if (train.size() < 5 || test.size() < 5) {
    return absl::FailedPreconditionError(
        absl::StrCat(name_, " needs at least 5 samples per side (got ",
                     train.size(), " and ", test.size(), ")"));
  }
  auto fit_train = SelectAttackTrainingSplit(train, train_fraction_, split_seed,
                                             "attack_split_train");
  if (!fit_train.ok()) return fit_train.status();
  auto fit_test = SelectAttackTrainingSplit(test, train_fraction_, split_seed,
                                            "attack_split_test");
  if (!fit_test.ok()) return fit_test.status();

  std::vector<std::vector<double>> x;
  std::vector<MembershipLabel> y;
  std::vector<const ScoredSample*> eval;
  auto route = [&](std::span<const ScoredSample> side,
                   const std::vector<bool>& flags) {
    for (size_t i = 0; i < side.size(); ++i) {
      if (flags[i]) {
        x.push_back(side[i].features);
        y.push_back(side[i].b);
      } else {
        eval.push_back(&side[i]);
      }
    }
  };
  route(train, *fit_train);
  route(test, *fit_test);
  auto model = FitAttackModel(x, y, hyper_);
  if (!model.ok()) return model.status();

  AttackOutcome out;
  out.attack = name_;
  out.seed = split_seed;
  for (const ScoredSample* s : eval) {
    if (s->features.size() != x[0].size()) {
      return absl::InvalidArgumentError("inconsistent feature dimension");
    }
    out.predictions.push_back(
        UnitPrediction{s->sample_id, s->b, model->Predict(s->features),
                       model->ProbNonMember(s->features)});
  }
  if (absl::Status st = SummarizeOutcome(out); !st.ok()) return st;
  return out;
}

RuleAdversary::RuleAdversary(std::string name, Rule rule)
    : name_(std::move(name)), rule_(std::move(rule)) {}

absl::StatusOr<AttackOutcome> RuleAdversary::Run(
    std::span<const ScoredSample> train, std::span<const ScoredSample> test,
    uint64_t split_seed) const {
  AttackOutcome out;
  out.attack = name_;
  out.seed = split_seed;
  for (const auto& side : {train, test}) {
    for (const auto& s : side) {
      out.predictions.push_back(
          UnitPrediction{s.sample_id, s.b, rule_(s), 0.0});
    }
  }
  if (absl::Status st = SummarizeOutcome(out); !st.ok()) return st;
  return out;
}

absl::StatusOr<AttackOutcome> RunMembershipExperiment(
    const Adversary& adversary, std::span<const ScoredSample> train,
    std::span<const ScoredSample> test, uint64_t split_seed) {
  if (absl::Status s = CheckSides(train, test); !s.ok()) return s;
  return adversary.Run(train, test, split_seed);
}

uint64_t AttackObjectiveSeed(uint64_t seed, size_t index) {
  return DeriveSeed(seed, "attack_objective", index);
}

absl::StatusOr<std::vector<ScoredSample>> ScoreSamples(
    const ParameterSet& params, std::span<const Sample> samples,
    FeatureKind kind, uint64_t objective_seed) {
  std::vector<ScoredSample> out;
  out.reserve(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    const Sample& sample = samples[i];
    ScoredSample s;
    s.sample_id = sample.SampleId();
    s.patient_id = sample.patient_id;
    s.admission_id = sample.admission_id;
    s.b = sample.side == Side::kTrain ? MembershipLabel::kMember
                                      : MembershipLabel::kNonMember;
    auto objective = MakeObjective(sample.tokens, params.config(),
                                   AttackObjectiveSeed(objective_seed, i));
    if (!objective.ok()) return objective.status();
    switch (kind) {
      case FeatureKind::kNone: {
        auto loss = Loss(params, *objective);
        if (!loss.ok()) return loss.status();
        s.error = *loss;
        break;
      }
      case FeatureKind::kAttention: {
        auto trace = Forward(params, *objective);
        if (!trace.ok()) return trace.status();
        s.error = trace->mean_loss;
        auto f = ExtractAttentionFeatures(*trace);
        if (!f.ok()) {
          return absl::Status(
              f.status().code(),
              absl::StrCat(s.sample_id, ": ", f.status().message()));
        }
        s.features = *std::move(f);
        break;
      }
      case FeatureKind::kGradient: {
        auto lg = Backward(params, *objective);
        if (!lg.ok()) return lg.status();
        s.error = lg->mean_loss;
        s.features = ExtractGradientFeatures(lg->gradient);
        break;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

absl::Status WriteFeatureCsv(const std::string& path,
                             std::span<const std::string> feature_names,
                             std::span<const ScoredSample> train,
                             std::span<const ScoredSample> test) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  out << "sample_id,patient_id,admission_id,b";
  for (const auto& name : feature_names) out << ',' << name;
  out << '\n';
  for (const auto& side : {train, test}) {
    for (const auto& s : side) {
      if (s.features.size() != feature_names.size()) {
        return absl::InvalidArgumentError(
            absl::StrCat("sample ", s.sample_id, " has ", s.features.size(),
                         " features, header has ", feature_names.size()));
      }
      out << s.sample_id << ',' << s.patient_id << ',' << s.admission_id << ','
          << static_cast<int>(s.b);
      for (double v : s.features) out << ',' << absl::StrFormat("%.17g", v);
      out << '\n';
    }
  }
  out.flush();
  if (!out) return absl::DataLossError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

}  // namespace leakaudit
