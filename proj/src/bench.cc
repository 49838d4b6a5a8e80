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

#include "leakaudit/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/time/clock.h"
#include "absl/time/time.h"
#include "leakaudit/stats.h"

namespace leakaudit {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr double kInf = std::numeric_limits<double>::infinity();

double SampleStdErr(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  return StdDev(xs) *
         std::sqrt(static_cast<double>(xs.size()) /
                   static_cast<double>(xs.size() - 1)) /
         std::sqrt(static_cast<double>(xs.size()));
}

// Indexes report rows by cell so checks can ask for "PL of attack X at the
// first/final epoch, averaged over cells, per seed".
class RowIndex {
 public:
  RowIndex(const ExperimentConfig& config, const LeakageReport& report)
      : cells_(ExpandGrid(config)) {
    for (const Cell& c : cells_) by_id_[c.id] = &c;
    for (const LeakageRow& r : report.rows) {
      pl_[{r.seed, r.model_id, r.attack, r.epoch}] = r.pl;
      int& last = final_epoch_[{r.seed, r.model_id}];
      last = std::max(last, r.epoch);
      seeds_.insert(r.seed);
    }
    for (const UtilityRow& u : report.utility) {
      test_loss_[{u.seed, u.model_id, u.epoch}] = u.test_loss;
      int& last = final_utility_epoch_[{u.seed, u.model_id}];
      last = std::max(last, u.epoch);
      seeds_.insert(u.seed);
    }
  }

  const std::vector<Cell>& cells() const { return cells_; }
  const std::set<uint64_t>& seeds() const { return seeds_; }

  std::optional<int> FinalEpoch(uint64_t seed, const std::string& cell) const {
    auto it = final_epoch_.find({seed, cell});
    if (it == final_epoch_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> Pl(uint64_t seed, const std::string& cell,
                           const std::string& attack, int epoch) const {
    auto it = pl_.find({seed, cell, attack, epoch});
    if (it == pl_.end()) return std::nullopt;
    return it->second;
  }

  // Final-epoch PL, or the given epoch when `epoch` > 0.
  std::optional<double> PlAt(uint64_t seed, const std::string& cell,
                             const std::string& attack, int epoch) const {
    if (epoch > 0) return Pl(seed, cell, attack, epoch);
    std::optional<int> last = FinalEpoch(seed, cell);
    if (!last) return std::nullopt;
    return Pl(seed, cell, attack, *last);
  }

  std::optional<double> FinalTestLoss(uint64_t seed,
                                      const std::string& cell) const {
    auto it = final_utility_epoch_.find({seed, cell});
    if (it == final_utility_epoch_.end()) return std::nullopt;
    return test_loss_.at({seed, cell, it->second});
  }

  // Per seed, the mean over `cells` of PL; then the list over seeds.
  std::vector<double> PerSeedMean(const std::vector<const Cell*>& cells,
                                  const std::string& attack, int epoch) const {
    std::vector<double> out;
    for (uint64_t seed : seeds_) {
      std::vector<double> xs;
      for (const Cell* c : cells) {
        if (auto v = PlAt(seed, c->id, attack, epoch)) xs.push_back(*v);
      }
      if (!xs.empty()) out.push_back(Mean(xs));
    }
    return out;
  }

  std::vector<const Cell*> Select(
      const std::function<bool(const Cell&)>& keep) const {
    std::vector<const Cell*> out;
    for (const Cell& c : cells_) {
      if (keep(c)) out.push_back(&c);
    }
    return out;
  }

 private:
  std::vector<Cell> cells_;
  std::map<std::string, const Cell*> by_id_;
  std::map<std::tuple<uint64_t, std::string, std::string, int>, double> pl_;
  std::map<std::pair<uint64_t, std::string>, int> final_epoch_;
  std::map<std::tuple<uint64_t, std::string, int>, double> test_loss_;
  std::map<std::pair<uint64_t, std::string>, int> final_utility_epoch_;
  std::set<uint64_t> seeds_;
};

double MeanOr(const std::vector<double>& xs, double fallback) {
  return xs.empty() ? fallback : Mean(xs);
}

std::string Fmt(double v) { return absl::StrFormat("%.4f", v); }

const std::string kSbba(AttackName(AttackKind::kSbba));

}  // namespace

std::vector<TrendCheck> EvaluateTrends(const ExperimentConfig& config,
                                       const LeakageReport& report,
                                       std::span<const CellRarity> rarity,
                                       const DivergedCells& diverged) {
  const RowIndex index(config, report);
  const auto non_dp =
      index.Select([](const Cell& c) { return !c.sigma.has_value(); });
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<TrendCheck> checks;

  // (a) every attack rises from epoch 1 to the final epoch.
  {
    TrendCheck t{"a",
                 "non-DP PL rises from epoch 1 to the final epoch for "
                 "every attack",
                 true, ""};
    std::vector<std::string> parts;
    for (AttackKind kind : config.attack.attacks) {
      const std::string name(AttackName(kind));
      const double first = MeanOr(index.PerSeedMean(non_dp, name, 1), nan);
      const double last = MeanOr(index.PerSeedMean(non_dp, name, 0), nan);
      const bool ok = last > first;
      t.passed = t.passed && ok;
      std::string per_model;
      for (const Cell* c : non_dp) {
        const double f = MeanOr(index.PerSeedMean({c}, name, 1), nan);
        const double l = MeanOr(index.PerSeedMean({c}, name, 0), nan);
        absl::StrAppendFormat(&per_model, " %s %.3f->%.3f", c->model_name, f,
                              l);
      }
      parts.push_back(absl::StrCat(name, " ", Fmt(first), "->", Fmt(last),
                                   ok ? "" : " (no rise)", " [",
                                   per_model.substr(1), "]"));
    }
    t.detail = absl::StrJoin(parts, "; ");
    checks.push_back(t);
  }

  // (b), (c) attack ordering on the final non-DP epoch.
  auto ordering = [&](const std::string& id, AttackKind stronger) {
    const std::string name(AttackName(stronger));
    const double s = MeanOr(index.PerSeedMean(non_dp, name, 0), nan);
    const double b = MeanOr(index.PerSeedMean(non_dp, kSbba, 0), nan);
    TrendCheck t{
        id, absl::StrCat(name, " PL >= S-BBA PL on the final non-DP epoch"),
        s >= b, absl::StrCat(name, " ", Fmt(s), " vs S-BBA ", Fmt(b))};
    checks.push_back(t);
  };
  ordering("b", AttackKind::kSgwba);
  ordering("c", AttackKind::kPbba);

  // (d) autoregressive vs masked, same (non-DP) noise level.
  {
    auto with = [&](Objective o) {
      return index.Select([o](const Cell& c) {
        return !c.sigma.has_value() && c.model.objective == o;
      });
    };
    const auto ar = with(Objective::kAr);
    const auto mlm = with(Objective::kMlm);
    TrendCheck t{"d", "AR S-BBA PL >= matched MLM S-BBA PL, final epoch", false,
                 ""};
    if (ar.empty() || mlm.empty()) {
      t.detail = "grid lacks an AR or an MLM non-DP model";
    } else {
      const double a = MeanOr(index.PerSeedMean(ar, kSbba, 0), nan);
      const double m = MeanOr(index.PerSeedMean(mlm, kSbba, 0), nan);
      t.passed = a >= m;
      t.detail = absl::StrCat("AR ", Fmt(a), " vs MLM ", Fmt(m));
    }
    checks.push_back(t);
  }

  // (e) strong noise removes S-BBA leakage that the non-DP model shows.
  {
    TrendCheck t{"e",
                 "DP sigma in {1, 2}: S-BBA PL <= 0.01 + 2 SE, non-DP "
                 "S-BBA PL > 0.03",
                 true, ""};
    const double plain = MeanOr(index.PerSeedMean(non_dp, kSbba, 0), nan);
    t.passed = plain > 0.03;
    std::vector<std::string> parts = {absl::StrCat("non-DP ", Fmt(plain))};
    int found = 0;
    for (double sigma : {1.0, 2.0}) {
      const auto cells = index.Select([sigma](const Cell& c) {
        return c.sigma.has_value() && *c.sigma == sigma;
      });
      if (cells.empty()) continue;
      ++found;
      const std::vector<double> xs = index.PerSeedMean(cells, kSbba, 0);
      const double m = MeanOr(xs, nan);
      const double se = SampleStdErr(xs);
      const bool ok = m <= 0.01 + 2.0 * se;
      t.passed = t.passed && ok;
      parts.push_back(absl::StrFormat("sigma %g: %.4f (se %.4f)%s", sigma, m,
                                      se, ok ? "" : " too high"));
    }
    if (found == 0) {
      t.passed = false;
      parts.push_back("grid has no sigma 1 or 2 cells");
    }
    t.detail = absl::StrJoin(parts, "; ");
    checks.push_back(t);
  }

  // (f) test loss ordered by noise level, per model variant.
  {
    TrendCheck t{"f", "DP test LM loss is nondecreasing in sigma", true, ""};
    std::vector<std::string> parts;
    for (const ModelVariant& m : config.models) {
      auto cells = index.Select([&m](const Cell& c) {
        return c.sigma.has_value() && c.model_name == m.name;
      });
      std::sort(cells.begin(), cells.end(), [](const Cell* x, const Cell* y) {
        return *x->sigma < *y->sigma;
      });
      if (cells.size() < 2) continue;
      std::vector<std::string> seq;
      double prev = -kInf;
      bool ok = true;
      for (const Cell* c : cells) {
        std::vector<double> xs;
        for (uint64_t seed : index.seeds()) {
          if (diverged.contains({seed, c->id})) {
            xs.push_back(kInf);
          } else if (auto v = index.FinalTestLoss(seed, c->id)) {
            xs.push_back(*v);
          }
        }
        const double loss = MeanOr(xs, nan);
        ok = ok && loss >= prev;
        prev = loss;
        seq.push_back(absl::StrFormat("%g:%.4f", *c->sigma, loss));
      }
      t.passed = t.passed && ok;
      parts.push_back(absl::StrCat(m.name, " ", absl::StrJoin(seq, " "),
                                   ok ? "" : " (not monotone)"));
    }
    if (parts.empty()) {
      t.passed = false;
      parts.push_back("grid has fewer than two DP noise levels");
    }
    t.detail = absl::StrJoin(parts, "; ");
    checks.push_back(t);
  }

  // (g) rarer disease profiles leak more on the final non-DP epoch.
  {
    TrendCheck t{"g",
                 "Spearman(bucket mean probability, bucket PL) < 0 on "
                 "the final non-DP epoch",
                 false, ""};
    std::vector<double> rhos;
    int missing = 0;
    for (const CellRarity& r : rarity) {
      std::optional<int> last = index.FinalEpoch(r.seed, r.cell);
      if (!last || r.epoch != *last) continue;
      if (r.analysis.spearman.has_value()) {
        rhos.push_back(*r.analysis.spearman);
      } else {
        ++missing;
      }
    }
    if (rhos.empty()) {
      t.detail = "no defined rank correlation";
    } else {
      const double m = Mean(rhos);
      t.passed = m < 0.0;
      t.detail =
          absl::StrFormat("mean rho %.4f over %zu checkpoints", m, rhos.size());
      if (missing > 0) absl::StrAppend(&t.detail, ", ", missing, " undefined");
    }
    checks.push_back(t);
  }
  return checks;
}

std::string FormatTrendSummary(std::span<const TrendCheck> checks) {
  std::string out;
  for (const TrendCheck& t : checks) {
    absl::StrAppend(&out, t.passed ? "PASS" : "FAIL", " (", t.id, ") ",
                    t.description, ": ", t.detail, "\n");
  }
  return out;
}

bool BenchResult::AllPassed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const TrendCheck& t) { return t.passed; });
}

absl::StatusOr<BenchResult> RunBench(const ExperimentConfig& config,
                                     const std::string& out_dir,
                                     const BenchOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  BenchResult result;
  const std::vector<uint64_t>& seeds =
      options.quick ? config.bench.quick_seeds : config.bench.seeds;
  for (uint64_t seed : seeds) {
    ExperimentConfig c = config;
    c.seed = seed;
    c.attack.seeds = {seed};
    const std::string ws =
        (fs::path(out_dir) / absl::StrCat("seed_", seed)).string();
    const std::string corpus_dir = CorpusDir(ws);
    const std::string run_dir = RunDir(ws, "bench");
    if (options.progress)
      *options.progress << "[bench] seed " << seed << std::endl;

    absl::StatusOr<CorpusSummary> summary = GenCorpus(c, corpus_dir);
    if (!summary.ok()) return summary.status();
    absl::StatusOr<std::vector<CellResult>> cells =
        TrainGrid(c, corpus_dir, run_dir, options.jobs, options.progress);
    if (!cells.ok()) return cells.status();
    for (const CellResult& r : *cells) {
      if (r.log.diverged) result.diverged.insert({seed, r.cell.id});
    }
    if (absl::Status s =
            AttackRun(c, corpus_dir, run_dir, c.attack.attacks, c.attack.seeds,
                      options.jobs, options.progress);
        !s.ok()) {
      return s;
    }
    absl::StatusOr<RunReport> run = ReportRun(
        c, corpus_dir, run_dir, (fs::path(run_dir) / "report").string());
    if (!run.ok()) return run.status();
    auto append = [](auto& to, auto& from) {
      to.insert(to.end(), std::make_move_iterator(from.begin()),
                std::make_move_iterator(from.end()));
    };
    append(result.report.rows, run->report.rows);
    append(result.report.utility, run->report.utility);
    append(result.report.accountant, run->report.accountant);
    append(result.rarity, run->rarity);
  }

  result.assertions_run = !options.quick;
  if (result.assertions_run) {
    result.checks =
        EvaluateTrends(config, result.report, result.rarity, result.diverged);
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  result.report.metadata = {
      {"generated_at",
       absl::FormatTime(absl::RFC3339_sec, absl::Now(), absl::UTCTimeZone())},
      {"seeds", seeds},
      {"quick", options.quick}};
  const fs::path dir(out_dir);
  if (absl::Status s = EmitReport(result.report, (dir / "report.csv").string(),
                                  ReportFormat::kCsv);
      !s.ok()) {
    return s;
  }
  if (absl::Status s = EmitReport(result.report, (dir / "report.json").string(),
                                  ReportFormat::kJson);
      !s.ok()) {
    return s;
  }

  json rarity = json::array();
  const CellRarity* primary = nullptr;
  for (const CellRarity& r : result.rarity) {
    rarity.push_back(CellRarityToJson(r));
    if (primary == nullptr ||
        (r.cell == primary->cell && r.seed == primary->seed &&
         r.epoch > primary->epoch)) {
      primary = &r;
    }
  }
  if (primary != nullptr) {
    if (absl::Status s =
            WriteRarityCsv(primary->analysis, (dir / "rarity.csv").string());
        !s.ok()) {
      return s;
    }
  }

  json trends = json::array();
  for (const TrendCheck& t : result.checks) {
    trends.push_back({{"id", t.id},
                      {"description", t.description},
                      {"passed", t.passed},
                      {"detail", t.detail}});
  }
  const std::vector<std::pair<std::string, json>> files = {
      {"rarity.json", rarity},
      {"budget.json", ReportToJson(result.report)["accountant"]},
      {"trends.json",
       {{"assertions_run", result.assertions_run},
        {"checks", trends},
        {"seconds", result.seconds}}}};
  for (const auto& [name, j] : files) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) {
      return absl::UnavailableError(
          absl::StrCat("cannot write ", (dir / name).string()));
    }
  }
  return result;
}

}  // namespace leakaudit
