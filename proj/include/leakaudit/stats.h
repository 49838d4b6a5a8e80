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

#ifndef LEAKAUDIT_STATS_H_
#define LEAKAUDIT_STATS_H_

#include <optional>
#include <span>
#include <vector>

namespace leakaudit {

double Mean(std::span<const double> xs);

// Percentile with linear interpolation between order statistics: the value at
// fractional rank p * (n - 1) of the sorted sample. `p` is in [0, 1].
double Percentile(std::span<const double> xs, double p);

double Median(std::span<const double> xs);

// Sample standard deviation (n - 1 denominator). Zero for n < 2.
double StdDev(std::span<const double> xs);

// Ranks starting at 1; tied values receive the average of their ranks.
std::vector<double> AverageRanks(std::span<const double> xs);

// Pearson correlation. nullopt when either input is constant or the lengths
// differ or are below 2.
std::optional<double> Pearson(std::span<const double> xs,
                              std::span<const double> ys);

// Spearman rank correlation with average-rank ties. Requires at least three
// points; nullopt when undefined.
std::optional<double> Spearman(std::span<const double> xs,
                               std::span<const double> ys);

}  // namespace leakaudit

#endif  // LEAKAUDIT_STATS_H_
