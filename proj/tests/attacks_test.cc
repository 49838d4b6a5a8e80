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

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "leakaudit/stats.h"
#include "testing/oracles.h"
#include "testing/status_matchers.h"

namespace leakaudit {
namespace {

using ::leakaudit::testing::FlatSquaredNorm;
using ::leakaudit::testing::KahanSum;
using ::leakaudit::testing::SortPercentile;
using ::leakaudit::testing::StatusIs;
using ::testing::HasSubstr;

constexpr MembershipLabel kIn = MembershipLabel::kMember;
constexpr MembershipLabel kOut = MembershipLabel::kNonMember;

ScoredSample Scored(std::string id, std::string patient, std::string admission,
                    MembershipLabel b, double error,
                    std::vector<double> features = {}) {
  return ScoredSample{
      std::move(id), std::move(patient), std::move(admission), b,
      error,         std::move(features)};
}

TEST(ThresholdTest, Mean) {
  EXPECT_NEAR(ComputeThreshold(std::vector<double>{0.1, 0.3})->mu_tr, 0.2,
              1e-16);
  EXPECT_EQ(ComputeThreshold(std::vector<double>(7, 0.4))->mu_tr, 0.4);
  EXPECT_FALSE(ComputeThreshold(std::vector<double>{}).ok());
}

TEST(ThresholdTest, MatchesKahanOracle) {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> dist(0.0, 1.0);
  std::vector<double> xs(1000);
  for (double& x : xs) x = dist(rng);
  const double want = KahanSum(xs) / 1000.0;
  EXPECT_NEAR(ComputeThreshold(xs)->mu_tr, want, 1e-12 * want);
}

TEST(SbbaTest, StrictInequality) {
  EXPECT_EQ(SbbaPredict(0.2, {0.2}), kOut);
  EXPECT_EQ(SbbaPredict(0.0, {0.2}), kIn);
  EXPECT_EQ(SbbaPredict(0.3, {0.2}), kOut);
}

std::vector<ScoredSample> FourSampleTrain() {
  return {Scored("t1", "p1", "a", kIn, 0.1), Scored("t2", "p2", "a", kIn, 0.3)};
}
std::vector<ScoredSample> FourSampleTest() {
  return {Scored("o1", "q1", "a", kOut, 0.25),
          Scored("o2", "q2", "a", kOut, 0.5)};
}

TEST(SbbaTest, FourSampleEnumeration) {
  const ThresholdAdversary sbba("S-BBA", GroupUnit::kSample);
  LA_ASSERT_OK_AND_ASSIGN(
      AttackOutcome out,
      RunMembershipExperiment(sbba, FourSampleTrain(), FourSampleTest(), 1));
  EXPECT_NEAR(out.threshold, 0.2, 1e-16);
  EXPECT_EQ(out.p_member_given_train, 0.5);
  EXPECT_EQ(out.p_member_given_test, 0.0);
  EXPECT_EQ(out.pl, 0.5);
  EXPECT_EQ(out.n_train_units, 2);
  EXPECT_EQ(out.n_test_units, 2);
}

TEST(ExperimentTest, ConstantAndOracleAdversaries) {
  const RuleAdversary always_in("const",
                                [](const ScoredSample&) { return kIn; });
  LA_ASSERT_OK_AND_ASSIGN(AttackOutcome c,
                          RunMembershipExperiment(always_in, FourSampleTrain(),
                                                  FourSampleTest(), 1));
  EXPECT_EQ(c.pl, 0.0);
  const RuleAdversary oracle("oracle",
                             [](const ScoredSample& s) { return s.b; });
  LA_ASSERT_OK_AND_ASSIGN(
      AttackOutcome o,
      RunMembershipExperiment(oracle, FourSampleTrain(), FourSampleTest(), 1));
  EXPECT_EQ(o.pl, 1.0);
}

TEST(ExperimentTest, RejectsEmptyOrMislabelledSides) {
  const ThresholdAdversary sbba("S-BBA", GroupUnit::kSample);
  EXPECT_FALSE(RunMembershipExperiment(sbba, {}, FourSampleTest(), 1).ok());
  EXPECT_THAT(
      RunMembershipExperiment(sbba, FourSampleTest(), FourSampleTest(), 1),
      StatusIs(absl::StatusCode::kInvalidArgument, HasSubstr("b=1")));
}

TEST(ExperimentTest, PlAgreesWithComputePl) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredSample> train, test;
  for (int i = 0; i < 40; ++i) {
    train.push_back(Scored(absl::StrCat("t", i), "p", "a", kIn, u(rng) * 0.9));
    test.push_back(Scored(absl::StrCat("o", i), "q", "a", kOut, u(rng)));
  }
  const ThresholdAdversary sbba("S-BBA", GroupUnit::kSample);
  LA_ASSERT_OK_AND_ASSIGN(AttackOutcome out,
                          RunMembershipExperiment(sbba, train, test, 1));
  std::vector<MembershipLabel> ptr, pte;
  for (const auto& p : out.predictions) {
    (p.b == kIn ? ptr : pte).push_back(p.predicted);
  }
  EXPECT_EQ(out.pl, *ComputePl(ptr, pte));
  EXPECT_GE(out.pl, -1.0);
  EXPECT_LE(out.pl, 1.0);
}

TEST(ExperimentTest, MonotoneTransformInvariance) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  std::vector<ScoredSample> train, test, train_t, test_t;
  for (int i = 0; i < 30; ++i) {
    train.push_back(Scored(absl::StrCat("t", i), "p", "a", kIn, u(rng)));
    test.push_back(Scored(absl::StrCat("o", i), "q", "a", kOut, u(rng)));
  }
  const double mu = ComputeThreshold([&] {
                      std::vector<double> e;
                      for (const auto& s : train) e.push_back(s.error);
                      return e;
                    }())
                        ->mu_tr;
  auto f = [](double e) { return std::exp(3 * e) + 1; };
  for (auto s : train) {
    s.error = f(s.error);
    train_t.push_back(s);
  }
  for (auto s : test) {
    s.error = f(s.error);
    test_t.push_back(s);
  }
  const ThresholdAdversary plain("S-BBA", GroupUnit::kSample,
                                 ErrorThreshold{mu});
  const ThresholdAdversary moved("S-BBA", GroupUnit::kSample,
                                 ErrorThreshold{f(mu)});
  EXPECT_EQ(RunMembershipExperiment(plain, train, test, 1)->pl,
            RunMembershipExperiment(moved, train_t, test_t, 1)->pl);
}

TEST(GroupAttackTest, SingletonGroupsReproduceSbba) {
  std::vector<ScoredSample> all = FourSampleTrain();
  for (auto& s : FourSampleTest()) all.push_back(s);
  LA_ASSERT_OK_AND_ASSIGN(auto by_patient,
                          GroupAttack(all, GroupUnit::kPatient, {0.2}));
  LA_ASSERT_OK_AND_ASSIGN(auto by_sample,
                          GroupAttack(all, GroupUnit::kSample, {0.2}));
  EXPECT_EQ(by_patient.pl, by_sample.pl);
  for (size_t i = 0; i < all.size(); ++i) {
    EXPECT_EQ(by_patient.predictions[i].predicted,
              by_sample.predictions[i].predicted);
  }
}

TEST(GroupAttackTest, MeanThenStrictRule) {
  const std::vector<ScoredSample> group = {Scored("s1", "p", "a", kIn, 0.1),
                                           Scored("s2", "p", "a", kIn, 0.3),
                                           Scored("s3", "q", "a", kOut, 0.9)};
  LA_ASSERT_OK_AND_ASSIGN(auto out,
                          GroupAttack(group, GroupUnit::kPatient, {0.2}));
  ASSERT_EQ(out.predictions.size(), 2u);
  EXPECT_NEAR(out.predictions[0].score, 0.2, 1e-16);
  EXPECT_EQ(out.predictions[0].predicted, kOut);
}

TEST(GroupAttackTest, TwoGroupBruteForce) {
  // Admission keys repeat across patients; units must still be distinct.
  const std::vector<ScoredSample> samples = {
      Scored("1", "p1", "a1", kIn, 0.05), Scored("2", "p1", "a1", kIn, 0.15),
      Scored("3", "p1", "a2", kIn, 0.5),  Scored("4", "p2", "a1", kIn, 0.1),
      Scored("5", "q1", "a1", kOut, 0.3), Scored("6", "q1", "a2", kOut, 0.1),
      Scored("7", "q2", "a1", kOut, 0.6), Scored("8", "q2", "a1", kOut, 0.2)};
  const double mu = 0.25;
  // Admission means: p1/a1 .10 (in), p1/a2 .5, p2/a1 .1 (in); q1/a1 .3,
  // q1/a2 .1 (in), q2/a1 .4.
  LA_ASSERT_OK_AND_ASSIGN(auto adm,
                          GroupAttack(samples, GroupUnit::kAdmission, {mu}));
  EXPECT_EQ(adm.n_train_units, 3);
  EXPECT_EQ(adm.n_test_units, 3);
  EXPECT_NEAR(adm.pl, 2.0 / 3 - 1.0 / 3, 1e-15);
  // Patient means: p1 .2333 (in), p2 .1 (in), q1 .2 (in), q2 .4.
  LA_ASSERT_OK_AND_ASSIGN(auto pat,
                          GroupAttack(samples, GroupUnit::kPatient, {mu}));
  EXPECT_NEAR(pat.pl, 1.0 - 0.5, 1e-15);
}

TEST(GroupAttackTest, GroupSpanningSidesIsRejected) {
  const std::vector<ScoredSample> bad = {Scored("1", "p", "a", kIn, 0.1),
                                         Scored("2", "p", "a", kOut, 0.1)};
  EXPECT_FALSE(GroupAttack(bad, GroupUnit::kPatient, {0.2}).ok());
}

TEST(ConcentrationTest, Examples) {
  EXPECT_EQ(*AttentionConcentration(std::vector<double>{0, 1, 0, 0}), 0.0);
  EXPECT_NEAR(*AttentionConcentration(std::vector<double>(4, 0.25)), -1.3863,
              1e-4);
  EXPECT_NEAR(*AttentionConcentration(std::vector<double>{0.5, 0.5, 0, 0}),
              std::log(0.5), 1e-15);
  EXPECT_FALSE(AttentionConcentration(std::vector<double>{0.5, 0.4}).ok());
  EXPECT_FALSE(AttentionConcentration(std::vector<double>{1.5, -0.5}).ok());
}

ForwardTrace RandomTrace(int layers, int heads, int n, int valid,
                         uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> g(0.5, 1.0);
  ForwardTrace t;
  t.seq_len = n;
  t.query_mask.assign(n, false);
  for (int i = 0; i < valid; ++i) t.query_mask[i] = true;
  t.attention.assign(layers, std::vector<std::vector<double>>(heads));
  for (auto& layer : t.attention) {
    for (auto& head : layer) {
      head.assign(n * n, 0.0);
      for (int i = 0; i < n; ++i) {
        double s = 0;
        for (int j = 0; j < valid; ++j) s += head[i * n + j] = g(rng) + 1e-9;
        for (int j = 0; j < valid; ++j) head[i * n + j] /= s;
      }
    }
  }
  return t;
}

TEST(AttentionFeaturesTest, LengthAndNames) {
  const ForwardTrace t = RandomTrace(2, 2, 8, 6, 1);
  LA_ASSERT_OK_AND_ASSIGN(auto f, ExtractAttentionFeatures(t));
  EXPECT_EQ(f.size(), 16u);
  const auto names = AttentionFeatureNames(2, 2);
  ASSERT_EQ(names.size(), 16u);
  EXPECT_EQ(names[0], "att_L0_H0_mean");
  EXPECT_EQ(names[7], "att_L0_H1_p95");
  EXPECT_EQ(names[15], "att_L1_H1_p95");
}

TEST(AttentionFeaturesTest, IdenticalRowsGiveConstantAggregates) {
  ForwardTrace t = RandomTrace(1, 1, 5, 5, 2);
  auto& head = t.attention[0][0];
  for (int i = 1; i < 5; ++i) {
    std::copy(head.begin(), head.begin() + 5, head.begin() + i * 5);
  }
  LA_ASSERT_OK_AND_ASSIGN(auto f, ExtractAttentionFeatures(t));
  const double c =
      *AttentionConcentration(std::span<const double>(head).first(5));
  for (double v : f) EXPECT_NEAR(v, c, 1e-15);
}

TEST(AttentionFeaturesTest, MatchesSortPercentileOracle) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const ForwardTrace t = RandomTrace(2, 3, 16, 11, seed);
    LA_ASSERT_OK_AND_ASSIGN(auto f, ExtractAttentionFeatures(t));
    size_t k = 0;
    for (const auto& layer : t.attention) {
      for (const auto& head : layer) {
        std::vector<double> c;
        for (int i = 0; i < 11; ++i) {
          double v = 0;
          for (int j = 0; j < 16; ++j) {
            const double a = head[i * 16 + j];
            if (a > 0) v += a * std::log(a);
          }
          c.push_back(v);
        }
        EXPECT_NEAR(f[k++], KahanSum(c) / c.size(), 1e-9);
        EXPECT_NEAR(f[k++], SortPercentile(c, 0.5), 1e-9);
        EXPECT_NEAR(f[k++], SortPercentile(c, 0.05), 1e-9);
        EXPECT_NEAR(f[k++], SortPercentile(c, 0.95), 1e-9);
      }
    }
  }
}

TEST(AttentionFeaturesTest, NeedsTwoPositions) {
  EXPECT_FALSE(ExtractAttentionFeatures(RandomTrace(1, 1, 4, 1, 0)).ok());
}

ModelConfig TinyModel() {
  ModelConfig c;
  c.n_layers = 2;
  c.n_heads = 2;
  c.model_dim = 8;
  c.ff_dim = 16;
  c.vocab_size = 24;
  c.seq_len = 8;
  return c;
}

TEST(GradientFeaturesTest, ZeroAndSingleTensor) {
  const GradientSet zero(TinyModel());
  for (double v : ExtractGradientFeatures(zero)) EXPECT_EQ(v, 0.0);
  GradientSet g(TinyModel());
  g.tensors()[0].values[0] = 3;
  g.tensors()[0].values[1] = 4;
  const auto f = ExtractGradientFeatures(g);
  EXPECT_EQ(f[0], 25.0);
  EXPECT_EQ(f.size(), g.size());
  const auto names = GradientFeatureNames(g);
  EXPECT_EQ(names[0], "grad_embedding_tok_emb");
  EXPECT_THAT(names, ::testing::Contains("grad_layer0_attn_q_w"));
}

TEST(GradientFeaturesTest, SumEqualsFlatNorm) {
  const ModelConfig c = TinyModel();
  const ParameterSet params = testing::PerturbedParams(c, 2, 0.1);
  const auto tokens = testing::RandomSequence(c, 8, 3);
  LA_ASSERT_OK_AND_ASSIGN(auto obj, MakeObjective(tokens, c, 1));
  LA_ASSERT_OK_AND_ASSIGN(auto lg, Backward(params, obj));
  const auto f = ExtractGradientFeatures(lg.gradient);
  const double flat = FlatSquaredNorm(lg.gradient);
  EXPECT_NEAR(KahanSum(f), flat, 1e-9 * flat);
  for (double v : f) EXPECT_GE(v, 0.0);
}

TEST(AttackModelTest, SeparableOneDimensional) {
  std::vector<std::vector<double>> x;
  std::vector<MembershipLabel> y;
  for (int i = 0; i < 20; ++i) {
    x.push_back({i < 10 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i});
    y.push_back(i < 10 ? kIn : kOut);
  }
  LA_ASSERT_OK_AND_ASSIGN(AttackModel m, FitAttackModel(x, y, AttackHyper{}));
  for (size_t i = 0; i < x.size(); ++i) EXPECT_EQ(m.Predict(x[i]), y[i]);
}

TEST(AttackModelTest, Errors) {
  std::vector<std::vector<double>> x = {{1.0}, {2.0}};
  EXPECT_THAT(FitAttackModel(x, std::vector<MembershipLabel>{kIn, kIn}, {}),
              StatusIs(absl::StatusCode::kInvalidArgument, HasSubstr("both")));
  std::vector<std::vector<double>> ragged = {{1.0}, {2.0, 3.0}};
  EXPECT_FALSE(
      FitAttackModel(ragged, std::vector<MembershipLabel>{kIn, kOut}, {}).ok());
}

TEST(AttackModelTest, ZeroVarianceColumnDroppedAndRecorded) {
  std::vector<std::vector<double>> x;
  std::vector<MembershipLabel> y;
  for (int i = 0; i < 10; ++i) {
    x.push_back({static_cast<double>(i), 7.0});
    y.push_back(i < 5 ? kIn : kOut);
  }
  LA_ASSERT_OK_AND_ASSIGN(AttackModel m, FitAttackModel(x, y, {}));
  ASSERT_EQ(m.dropped.size(), 1u);
  EXPECT_EQ(m.dropped[0].index, 1);
  EXPECT_EQ(m.dropped[0].reason, "zero variance");
  EXPECT_EQ(m.kept, std::vector<int>{0});
}

std::pair<std::vector<std::vector<double>>, std::vector<MembershipLabel>>
NoisyData(uint64_t seed, int n, int dim, double signal) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> x;
  std::vector<MembershipLabel> y;
  for (int i = 0; i < n; ++i) {
    const bool out = i % 2 == 1;
    std::vector<double> row(dim);
    for (double& v : row) v = normal(rng);
    row[0] += out ? signal : 0.0;
    x.push_back(std::move(row));
    y.push_back(out ? kOut : kIn);
  }
  return {x, y};
}

TEST(AttackModelTest, DuplicatedColumnGivesIdenticalPredictions) {
  auto [x, y] = NoisyData(4, 60, 1, 1.0);
  std::vector<std::vector<double>> doubled = x;
  for (auto& row : doubled) row.push_back(row[0]);
  LA_ASSERT_OK_AND_ASSIGN(AttackModel single, FitAttackModel(x, y, {}));
  LA_ASSERT_OK_AND_ASSIGN(AttackModel dup, FitAttackModel(doubled, y, {}));
  ASSERT_EQ(dup.dropped.size(), 1u);
  EXPECT_EQ(dup.dropped[0].reason, "duplicate of 0");
  auto [held, unused] = NoisyData(5, 100, 1, 1.0);
  for (auto& row : held) {
    const double p = single.ProbNonMember(row);
    row.push_back(row[0]);
    EXPECT_EQ(dup.ProbNonMember(row), p);
  }
}

TEST(AttackModelTest, ScaleInvariance) {
  auto [x, y] = NoisyData(6, 80, 4, 1.5);
  std::vector<std::vector<double>> scaled = x;
  for (auto& row : scaled) {
    for (double& v : row) v *= 37.5;
  }
  LA_ASSERT_OK_AND_ASSIGN(AttackModel m, FitAttackModel(x, y, {}));
  LA_ASSERT_OK_AND_ASSIGN(AttackModel ms, FitAttackModel(scaled, y, {}));
  auto [held, unused] = NoisyData(7, 200, 4, 1.5);
  for (auto row : held) {
    const auto label = m.Predict(row);
    for (double& v : row) v *= 37.5;
    EXPECT_EQ(ms.Predict(row), label);
  }
}

std::vector<ScoredSample> Side(const std::string& prefix, MembershipLabel b,
                               int n_patients, int per_patient,
                               std::mt19937_64& rng, double signal) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ScoredSample> out;
  for (int p = 0; p < n_patients; ++p) {
    for (int k = 0; k < per_patient; ++k) {
      std::vector<double> f = {normal(rng) + (b == kOut ? signal : 0.0),
                               normal(rng), normal(rng)};
      out.push_back(Scored(absl::StrCat(prefix, p, "_", k),
                           absl::StrCat(prefix, p), "a", b, 0.0, f));
    }
  }
  return out;
}

TEST(LearnedAdversaryTest, PermutationNullIsNearZero) {
  double sum = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto train = Side("t", kIn, 40, 5, rng, 0.0);
    auto test = Side("o", kOut, 40, 5, rng, 0.0);
    const LearnedAdversary adv("S-GWBA", AttackHyper{});
    LA_ASSERT_OK_AND_ASSIGN(auto out,
                            RunMembershipExperiment(adv, train, test, seed));
    EXPECT_NEAR(out.pl, 0.0, 0.15);
    sum += out.pl;
  }
  EXPECT_NEAR(sum / 5, 0.0, 0.05);
}

TEST(LearnedAdversaryTest, FindsSignalAndHoldsOutFittingPatients) {
  std::mt19937_64 rng(1);
  auto train = Side("t", kIn, 30, 4, rng, 2.0);
  auto test = Side("o", kOut, 30, 4, rng, 2.0);
  const LearnedAdversary adv("S-AWBA", AttackHyper{});
  LA_ASSERT_OK_AND_ASSIGN(auto out,
                          RunMembershipExperiment(adv, train, test, 3));
  EXPECT_GT(out.pl, 0.5);
  // 20% of 30 patients (6 x 4 samples) per side went to fitting.
  EXPECT_EQ(out.n_train_units, 96);
  EXPECT_EQ(out.n_test_units, 96);
  LA_ASSERT_OK_AND_ASSIGN(
      auto fit_flags,
      SelectAttackTrainingSplit(train, 0.2, 3, "attack_split_train"));
  std::set<std::string> fit_patients, eval_patients;
  for (size_t i = 0; i < train.size(); ++i) {
    (fit_flags[i] ? fit_patients : eval_patients).insert(train[i].patient_id);
  }
  for (const auto& p : fit_patients) EXPECT_FALSE(eval_patients.contains(p));
  std::set<std::string> evaluated;
  for (const auto& p : out.predictions) evaluated.insert(p.unit_id);
  for (size_t i = 0; i < train.size(); ++i) {
    EXPECT_EQ(evaluated.contains(train[i].sample_id), !fit_flags[i]);
  }
}

TEST(LearnedAdversaryTest, SmallSidesRejected) {
  std::mt19937_64 rng(1);
  auto train = Side("t", kIn, 2, 2, rng, 1.0);
  auto test = Side("o", kOut, 5, 2, rng, 1.0);
  const LearnedAdversary adv("S-AWBA", AttackHyper{});
  EXPECT_THAT(RunMembershipExperiment(adv, train, test, 1),
              StatusIs(absl::StatusCode::kFailedPrecondition, HasSubstr("5")));
}

TEST(ScoreSamplesTest, FeatureShapesAndLabels) {
  const ModelConfig c = TinyModel();
  const ParameterSet params = testing::PerturbedParams(c, 2, 0.05);
  std::vector<Sample> samples;
  for (int i = 0; i < 4; ++i) {
    samples.push_back(Sample{testing::RandomSequence(c, 6, i), "p", "a",
                             absl::StrCat("n", i), 0,
                             i < 2 ? Side::kTrain : Side::kTest});
  }
  LA_ASSERT_OK_AND_ASSIGN(auto plain,
                          ScoreSamples(params, samples, FeatureKind::kNone, 5));
  LA_ASSERT_OK_AND_ASSIGN(
      auto att, ScoreSamples(params, samples, FeatureKind::kAttention, 5));
  LA_ASSERT_OK_AND_ASSIGN(
      auto grad, ScoreSamples(params, samples, FeatureKind::kGradient, 5));
  for (size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(plain[i].b, i < 2 ? kIn : kOut);
    EXPECT_TRUE(plain[i].features.empty());
    EXPECT_EQ(att[i].features.size(), 16u);
    EXPECT_EQ(grad[i].features.size(), params.size());
    EXPECT_NEAR(plain[i].error, att[i].error, 1e-12);
    EXPECT_NEAR(plain[i].error, grad[i].error, 1e-12);
    EXPECT_EQ(plain[i].sample_id, samples[i].SampleId());
  }
}

TEST(FeatureCsvTest, HeaderAndRows) {
  const std::string path =
      (std::filesystem::path(::testing::TempDir()) / "features.csv").string();
  const std::vector<std::string> names = {"att_L0_H0_mean", "att_L0_H0_p95"};
  const std::vector<ScoredSample> train = {
      Scored("n/0", "p", "a", kIn, 1, {1, 2})};
  const std::vector<ScoredSample> test = {
      Scored("m/0", "q", "b", kOut, 1, {3, 4})};
  LA_ASSERT_OK(WriteFeatureCsv(path, names, train, test));
  std::ifstream in(path);
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  EXPECT_EQ(header,
            "sample_id,patient_id,admission_id,b,att_L0_H0_mean,att_L0_H0_p95");
  EXPECT_EQ(row1, "n/0,p,a,0,1,2");
  EXPECT_EQ(row2, "m/0,q,b,1,3,4");
}

TEST(AttackOutcomeJsonTest, RoundTrip) {
  AttackOutcome o;
  o.attack = "P-BBA";
  o.checkpoint = "runs/x/epoch_2";
  o.pl = 0.25;
  o.p_member_given_train = 0.75;
  o.p_member_given_test = 0.5;
  o.n_train_units = 8;
  o.n_test_units = 4;
  o.seed = 11;
  const auto j = AttackOutcomeToJson(o);
  for (const char* key :
       {"attack", "checkpoint", "pl", "p_member_given_train",
        "p_member_given_test", "n_train_units", "n_test_units", "seed"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  LA_ASSERT_OK_AND_ASSIGN(AttackOutcome back, AttackOutcomeFromJson(j));
  EXPECT_EQ(back.attack, "P-BBA");
  EXPECT_EQ(back.pl, 0.25);
  EXPECT_EQ(back.seed, 11u);
}

TEST(AttackNamesTest, RoundTrip) {
  for (AttackKind k : AllAttacks()) {
    EXPECT_EQ(*ParseAttackName(AttackName(k)), k);
  }
  EXPECT_FALSE(ParseAttackName("X-BBA").ok());
  EXPECT_EQ(AttackUnit(AttackKind::kPbba), GroupUnit::kPatient);
}

}  // namespace
}  // namespace leakaudit
