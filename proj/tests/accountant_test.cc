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

#include "leakaudit/accountant.h"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "testing/oracles.h"
#include "testing/status_matchers.h"

namespace leakaudit {
namespace {

using ::leakaudit::testing::RdpOracle;
using ::leakaudit::testing::StatusIs;
using ::testing::HasSubstr;

TEST(RdpStepTest, FullBatchIsClosedForm) {
  EXPECT_EQ(*RdpStepSubsampledGaussian(1.0, 1.0, 2), 1.0);
  for (double sigma : {0.5, 1.0, 2.0, 3.7}) {
    for (int alpha : {2, 3, 17, 1024}) {
      EXPECT_EQ(*RdpStepSubsampledGaussian(1.0, sigma, alpha),
                alpha / (2 * sigma * sigma));
    }
  }
}

TEST(RdpStepTest, VanishesAsSamplingRateShrinks) {
  double prev = *RdpStepSubsampledGaussian(0.1, 1.0, 8);
  for (double q : {1e-2, 1e-3, 1e-4, 1e-6}) {
    const double r = *RdpStepSubsampledGaussian(q, 1.0, 8);
    EXPECT_LT(r, prev);
    prev = r;
  }
  EXPECT_LT(prev, 1e-9);
}

TEST(RdpStepTest, MatchesHighPrecisionOracle) {
  for (double q : {0.001, 0.01, 0.1}) {
    for (double sigma : {0.5, 1.0, 2.0}) {
      for (int alpha : {2, 8, 32, 256}) {
        const double got = *RdpStepSubsampledGaussian(q, sigma, alpha);
        const double want = RdpOracle(q, sigma, alpha);
        EXPECT_LE(std::abs(got - want), 1e-9 * std::abs(want))
            << "q=" << q << " sigma=" << sigma << " alpha=" << alpha;
      }
    }
  }
}

TEST(RdpStepTest, Errors) {
  EXPECT_EQ(*RdpStepSubsampledGaussian(0.1, 0.0, 4),
            std::numeric_limits<double>::infinity());
  EXPECT_FALSE(RdpStepSubsampledGaussian(0.1, 1.0, 1).ok());
  EXPECT_FALSE(RdpStepSubsampledGaussian(0.0, 1.0, 4).ok());
  EXPECT_FALSE(RdpStepSubsampledGaussian(1.5, 1.0, 4).ok());
  EXPECT_FALSE(RdpStepSubsampledGaussian(0.5, -1.0, 4).ok());
}

TEST(AccountantTest, DefaultOrders) {
  const auto orders = DefaultRdpOrders();
  EXPECT_EQ(orders.front(), 2);
  EXPECT_EQ(orders[62], 64);
  EXPECT_EQ(orders.back(), 1024);
  EXPECT_EQ(orders.size(), 67u);
  EXPECT_TRUE(std::is_sorted(orders.begin(), orders.end()));
}

TEST(AccountantTest, RejectsUnsortedOrders) {
  EXPECT_FALSE(MakeAccountant(0.1, 1.0, {2, 4, 3}).ok());
  EXPECT_FALSE(MakeAccountant(0.1, 1.0, {2, 2}).ok());
}

TEST(ComposeTest, ZeroStepsUnchanged) {
  LA_ASSERT_OK_AND_ASSIGN(auto s, MakeAccountant(0.05, 1.1));
  s = Compose(s, 17);
  const auto same = Compose(s, 0);
  EXPECT_EQ(same.rdp, s.rdp);
  EXPECT_EQ(same.steps, 17);
}

TEST(ComposeTest, AdditiveAndLinear) {
  LA_ASSERT_OK_AND_ASSIGN(auto s, MakeAccountant(0.05, 1.1));
  EXPECT_EQ(Compose(Compose(s, 30), 12).rdp, Compose(s, 42).rdp);
  const auto one = Compose(s, 25), two = Compose(s, 50);
  for (size_t i = 0; i < one.rdp.size(); ++i) {
    EXPECT_EQ(two.rdp[i], 2 * one.rdp[i]);
    EXPECT_GE(one.rdp[i], 0.0);
  }
}

TEST(ToEpsilonTest, SingleOrderFormula) {
  LA_ASSERT_OK_AND_ASSIGN(auto s, MakeAccountant(1.0, 1.0, {2}));
  s = Compose(s, 1);
  LA_ASSERT_OK_AND_ASSIGN(auto b, ToEpsilon(s, 1e-6));
  EXPECT_NEAR(b.epsilon, 1.0 + std::log(1e6), 1e-12);
  EXPECT_NEAR(b.epsilon, 14.8155, 1e-4);
  EXPECT_EQ(b.optimal_order, 2);
}

TEST(ToEpsilonTest, ZeroRdpPicksLargestOrder) {
  LA_ASSERT_OK_AND_ASSIGN(auto s, MakeAccountant(0.01, 1.0));
  LA_ASSERT_OK_AND_ASSIGN(auto b, ToEpsilon(s, 1e-6));
  EXPECT_EQ(b.optimal_order, 1024);
  EXPECT_NEAR(b.epsilon, std::log(1e6) / 1023, 1e-15);
}

TEST(ToEpsilonTest, InfiniteRdpIsAnError) {
  LA_ASSERT_OK_AND_ASSIGN(auto s, MakeAccountant(0.01, 0.0));
  EXPECT_THAT(ToEpsilon(Compose(s, 1), 1e-6),
              StatusIs(absl::StatusCode::kFailedPrecondition, ::testing::_));
  LA_ASSERT_OK_AND_ASSIGN(auto ok, MakeAccountant(0.01, 1.0));
  EXPECT_FALSE(ToEpsilon(ok, 0.0).ok());
  EXPECT_FALSE(ToEpsilon(ok, 1.0).ok());
}

double Epsilon(double q, double sigma, int64_t steps) {
  return ToEpsilon(Compose(*MakeAccountant(q, sigma), steps), 1e-6)->epsilon;
}

TEST(ToEpsilonTest, MonotoneInSigmaStepsAndQ) {
  const double q = 16.0 / 600;
  const int64_t steps = 38;  // about one toy epoch
  EXPECT_LT(Epsilon(q, 2.0, steps), Epsilon(q, 1.0, steps));
  double prev = std::numeric_limits<double>::infinity();
  for (double sigma : {0.3, 0.5, 0.8, 1.0, 1.5, 2.0, 4.0}) {
    const double e = Epsilon(q, sigma, steps);
    EXPECT_LE(e, prev);
    prev = e;
  }
  prev = 0.0;
  for (int64_t n : {1, 10, 100, 1000}) {
    const double e = Epsilon(q, 1.0, n);
    EXPECT_GE(e, prev);
    prev = e;
  }
  EXPECT_LE(Epsilon(0.01, 1.0, 100), Epsilon(0.02, 1.0, 100));
}

TEST(GroupDpTest, Examples) {
  const GroupPrivacy g = GroupDp(0.1, 1e-6, 50);
  EXPECT_NEAR(g.epsilon, 5.0, 5.0 * 1e-12);
  const double want = 50 * std::exp(4.9) * 1e-6;
  EXPECT_NEAR(g.delta, want, want * 1e-12);
  EXPECT_NEAR(g.delta, 6.72e-3, 1e-5);
  EXPECT_FALSE(g.delta_capped);

  const GroupPrivacy id = GroupDp(0.7, 1e-5, 1);
  EXPECT_EQ(id.epsilon, 0.7);
  EXPECT_EQ(id.delta, 1e-5);

  const GroupPrivacy capped = GroupDp(1.0, 1e-6, 50);
  EXPECT_EQ(capped.delta, 1.0);
  EXPECT_TRUE(capped.delta_capped);
}

TEST(AccountantJsonTest, HasCalculatorFields) {
  auto s = Compose(*MakeAccountant(0.02, 1.0), 100);
  auto b = *ToEpsilon(s, 1e-6);
  const auto j = AccountantToJson(s, b);
  EXPECT_EQ(j.at("epsilon").get<double>(), b.epsilon);
  EXPECT_EQ(j.at("optimal_order").get<int>(), b.optimal_order);
  EXPECT_EQ(j.at("per_order_rdp").size(), s.orders.size());
}

}  // namespace
}  // namespace leakaudit
