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

// Renyi-DP accounting for the Poisson-subsampled Gaussian mechanism.

#ifndef LEAKAUDIT_ACCOUNTANT_H_
#define LEAKAUDIT_ACCOUNTANT_H_

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "nlohmann/json.hpp"

namespace leakaudit {

// Integer orders 2..64 plus 128, 256, 512, 1024.
std::vector<int> DefaultRdpOrders();

// RDP (nats) of one step of the sampled Gaussian mechanism with sampling rate
// q and noise multiplier sigma at integer order alpha:
//
//   q == 1: alpha / (2 sigma^2)
//   q < 1:  1/(alpha-1) * log sum_{k=0}^{alpha} C(alpha,k) (1-q)^(alpha-k) q^k
//                                              * exp(k (k-1) / (2 sigma^2))
//
// sigma == 0 yields +infinity.
absl::StatusOr<double> RdpStepSubsampledGaussian(double q, double sigma,
                                                 int alpha);

struct AccountantState {
  std::vector<int> orders;
  std::vector<double> rdp;
  double q = 1.0;
  double sigma = 1.0;
  int64_t steps = 0;
  // RDP of a single step per order, cached from (q, sigma).
  std::vector<double> per_step;
};

absl::StatusOr<AccountantState> MakeAccountant(
    double q, double sigma, std::vector<int> orders = DefaultRdpOrders());

// Accumulates `n_steps` more steps. RDP is kept as steps * per_step so that
// composition is exactly additive in the step count.
AccountantState Compose(const AccountantState& state, int64_t n_steps);

struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;
  int optimal_order = 0;
};

// epsilon = min over orders of rdp(alpha) + log(1/delta) / (alpha - 1).
absl::StatusOr<PrivacyBudget> ToEpsilon(const AccountantState& state,
                                        double delta);

struct GroupPrivacy {
  double epsilon = 0.0;
  double delta = 0.0;
  // Set when k * e^{(k-1) eps} * delta exceeded 1 and delta was capped.
  bool delta_capped = false;
};

// (k eps, k e^{(k-1) eps} delta) for groups of k correlated records.
GroupPrivacy GroupDp(double epsilon, double delta, int k);

nlohmann::json AccountantToJson(const AccountantState& state,
                                const PrivacyBudget& budget);

}  // namespace leakaudit

#endif  // LEAKAUDIT_ACCOUNTANT_H_
