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

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"

namespace leakaudit {
namespace {

double LogBinomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// log(sum(exp(terms))) as max + log1p(rest), keeping precision when the sum
// is close to one.
double LogSumExp(std::span<const double> terms) {
  const auto max_it = std::max_element(terms.begin(), terms.end());
  const double m = *max_it;
  double rest = 0.0;
  for (auto it = terms.begin(); it != terms.end(); ++it) {
    if (it != max_it) rest += std::exp(*it - m);
  }
  return m + std::log1p(rest);
}

}  // namespace

std::vector<int> DefaultRdpOrders() {
  std::vector<int> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  for (int a : {128, 256, 512, 1024}) orders.push_back(a);
  return orders;
}

absl::StatusOr<double> RdpStepSubsampledGaussian(double q, double sigma,
                                                 int alpha) {
  if (!(q > 0.0 && q <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("sampling rate must lie in (0, 1], got ", q));
  }
  if (!(sigma >= 0.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("noise multiplier must be >= 0, got ", sigma));
  }
  if (alpha < 2) {
    return absl::InvalidArgumentError(
        absl::StrCat("Renyi order must be an integer >= 2, got ", alpha));
  }
  if (sigma == 0.0) return std::numeric_limits<double>::infinity();
  const double two_var = 2.0 * sigma * sigma;
  if (q == 1.0) return alpha / two_var;

  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  std::vector<double> terms(alpha + 1);
  for (int k = 0; k <= alpha; ++k) {
    terms[k] = LogBinomial(alpha, k) + (alpha - k) * log_1mq + k * log_q +
               static_cast<double>(k) * (k - 1) / two_var;
  }
  return std::max(0.0, LogSumExp(terms) / (alpha - 1));
}

absl::StatusOr<AccountantState> MakeAccountant(double q, double sigma,
                                               std::vector<int> orders) {
  if (orders.empty()) return absl::InvalidArgumentError("no Renyi orders");
  if (!std::is_sorted(orders.begin(), orders.end()) ||
      std::adjacent_find(orders.begin(), orders.end()) != orders.end()) {
    return absl::InvalidArgumentError("orders must be strictly increasing");
  }
  AccountantState state;
  state.q = q;
  state.sigma = sigma;
  for (int a : orders) {
    auto step = RdpStepSubsampledGaussian(q, sigma, a);
    if (!step.ok()) return step.status();
    state.per_step.push_back(*step);
  }
  state.orders = std::move(orders);
  state.rdp.assign(state.orders.size(), 0.0);
  return state;
}

AccountantState Compose(const AccountantState& state, int64_t n_steps) {
  AccountantState next = state;
  if (n_steps <= 0) return next;
  next.steps += n_steps;
  for (size_t i = 0; i < next.rdp.size(); ++i) {
    next.rdp[i] = static_cast<double>(next.steps) * next.per_step[i];
  }
  return next;
}

absl::StatusOr<PrivacyBudget> ToEpsilon(const AccountantState& state,
                                        double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("delta must lie in (0, 1), got ", delta));
  }
  PrivacyBudget best{std::numeric_limits<double>::infinity(), delta, 0};
  const double log_inv_delta = -std::log(delta);
  for (size_t i = 0; i < state.orders.size(); ++i) {
    const double eps = state.rdp[i] + log_inv_delta / (state.orders[i] - 1);
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.optimal_order = state.orders[i];
    }
  }
  if (!std::isfinite(best.epsilon)) {
    return absl::FailedPreconditionError(
        "epsilon is infinite at every order (sigma = 0)");
  }
  return best;
}

GroupPrivacy GroupDp(double epsilon, double delta, int k) {
  GroupPrivacy g;
  g.epsilon = k * epsilon;
  g.delta = k * std::exp((k - 1) * epsilon) * delta;
  if (g.delta > 1.0) {
    g.delta = 1.0;
    g.delta_capped = true;
  }
  return g;
}

nlohmann::json AccountantToJson(const AccountantState& state,
                                const PrivacyBudget& budget) {
  nlohmann::json per_order = nlohmann::json::object();
  for (size_t i = 0; i < state.orders.size(); ++i) {
    per_order[std::to_string(state.orders[i])] = state.rdp[i];
  }
  return {{"q", state.q},
          {"sigma", state.sigma},
          {"steps", state.steps},
          {"delta", budget.delta},
          {"epsilon", budget.epsilon},
          {"optimal_order", budget.optimal_order},
          {"per_order_rdp", per_order}};
}

}  // namespace leakaudit
