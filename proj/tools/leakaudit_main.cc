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

// leakaudit command line.
//
// Exit codes: 0 success, 1 usage or config error, 2 trend assertion failure,
// 3 runtime failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "leakaudit/bench.h"
#include "leakaudit/config.h"
#include "leakaudit/pipeline.h"

namespace leakaudit {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitAssertion = 2;
constexpr int kExitRuntime = 3;

struct Flags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out = "leakaudit_out";
  bool quick = false;
  int jobs = 0;
  std::string run_id = "run";
  std::string corpus_dir;
  std::string report_dir;
  std::vector<std::string> attacks;
  std::vector<uint64_t> attack_seeds;
};

// Stage failures are runtime failures; config and flag problems are usage
// errors and say so explicitly.
int Fail(const absl::Status& status, int code = kExitRuntime) {
  std::cerr << "error: " << status.message() << std::endl;
  return code;
}

absl::StatusOr<ExperimentConfig> ResolveConfig(const Flags& flags) {
  ExperimentConfig config = DefaultBenchConfig();
  if (!flags.config_path.empty()) {
    absl::StatusOr<ExperimentConfig> loaded =
        LoadExperimentConfig(flags.config_path);
    if (!loaded.ok()) return loaded.status();
    config = *std::move(loaded);
  }
  if (flags.seed.has_value()) {
    config.seed = *flags.seed;
    config.bench.seeds = {*flags.seed};
    config.bench.quick_seeds = {*flags.seed};
  }
  return config;
}

int Jobs(const Flags& flags) {
  if (flags.jobs > 0) return flags.jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string CorpusDirFor(const Flags& flags) {
  return flags.corpus_dir.empty() ? CorpusDir(flags.out) : flags.corpus_dir;
}

int RunGenCorpus(const ExperimentConfig& config, const Flags& flags) {
  absl::StatusOr<CorpusSummary> s = GenCorpus(config, CorpusDirFor(flags));
  if (!s.ok()) return Fail(s.status());
  std::cout << absl::StrFormat(
      "corpus written to %s\n"
      "  patients        %d (train %d, test %d)\n"
      "  admissions      %d\n"
      "  notes           %d\n"
      "  tokens          %d\n"
      "  distinct codes  %d\n",
      CorpusDirFor(flags), s->patients, s->train_patients, s->test_patients,
      s->admissions, s->notes, s->tokens, s->distinct_codes);
  return kExitOk;
}

int RunTrain(const ExperimentConfig& config, const Flags& flags) {
  absl::StatusOr<std::vector<CellResult>> cells =
      TrainGrid(config, CorpusDirFor(flags), RunDir(flags.out, flags.run_id),
                Jobs(flags), &std::cout);
  if (!cells.ok()) return Fail(cells.status());
  int diverged = 0;
  for (const CellResult& c : *cells) diverged += c.log.diverged ? 1 : 0;
  std::cout << cells->size() << " cells trained, " << diverged << " diverged\n";
  return kExitOk;
}

int RunAttack(const ExperimentConfig& config, const Flags& flags) {
  std::vector<AttackKind> attacks = config.attack.attacks;
  if (!flags.attacks.empty()) {
    attacks.clear();
    for (const std::string& name : flags.attacks) {
      absl::StatusOr<AttackKind> kind = ParseAttackName(name);
      if (!kind.ok()) return Fail(kind.status(), kExitUsage);
      attacks.push_back(*kind);
    }
  }
  const std::vector<uint64_t> seeds =
      flags.attack_seeds.empty() ? config.attack.seeds : flags.attack_seeds;
  absl::Status s =
      AttackRun(config, CorpusDirFor(flags), RunDir(flags.out, flags.run_id),
                attacks, seeds, Jobs(flags), &std::cout);
  return s.ok() ? kExitOk : Fail(s);
}

int RunAccount(const ExperimentConfig& config, const Flags& flags) {
  absl::StatusOr<std::vector<AccountantRow>> rows =
      AccountRun(config, RunDir(flags.out, flags.run_id));
  if (!rows.ok()) return Fail(rows.status());
  for (const AccountantRow& r : *rows) {
    std::cout << absl::StrFormat(
        "%-16s sigma %-8g q %.3g steps %d  eps %.4g (order %d)  group k=%d: "
        "eps %.4g delta %.3g%s\n",
        r.model_id, r.sigma, r.q, r.steps, r.epsilon, r.optimal_order,
        r.group_k, r.group_epsilon, r.group_delta,
        r.group_delta_capped ? " (capped)" : "");
  }
  return kExitOk;
}

int ReportCommand(const ExperimentConfig& config, const Flags& flags) {
  const std::string run_dir = RunDir(flags.out, flags.run_id);
  const std::string out =
      flags.report_dir.empty()
          ? (std::filesystem::path(run_dir) / "report").string()
          : flags.report_dir;
  absl::StatusOr<RunReport> r =
      ReportRun(config, CorpusDirFor(flags), run_dir, out);
  if (!r.ok()) return Fail(r.status());
  std::cout << r->report.rows.size() << " leakage rows written to " << out
            << "\n";
  return kExitOk;
}

int RunBenchCommand(const ExperimentConfig& config, const Flags& flags) {
  BenchOptions options;
  options.quick = flags.quick;
  options.jobs = Jobs(flags);
  options.progress = &std::cout;
  absl::StatusOr<BenchResult> r = RunBench(config, flags.out, options);
  if (!r.ok()) return Fail(r.status());
  std::cout << absl::StrFormat("bench finished in %.1fs, outputs in %s\n",
                               r->seconds, flags.out);
  if (!r->assertions_run) {
    std::cout << "quick run: trend assertions skipped\n";
    return kExitOk;
  }
  std::cout << FormatTrendSummary(r->checks);
  return r->AllPassed() ? kExitOk : kExitAssertion;
}

int Main(int argc, char** argv) {
  CLI::App app{"Membership-inference privacy audit for small language models"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags flags;
  app.add_option("--config", flags.config_path, "Experiment config (JSON)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Override the experiment seed");
  app.add_option("--out", flags.out, "Workspace / output directory");
  app.add_flag("--quick", flags.quick, "Bench: one seed, no assertions");
  app.add_option("--jobs", flags.jobs,
                 "Concurrent grid cells (default: hardware threads)")
      ->check(CLI::NonNegativeNumber);

  auto* gen = app.add_subcommand("gen-corpus", "Generate corpus and split");
  gen->add_option("--corpus", flags.corpus_dir, "Corpus directory");

  auto* train = app.add_subcommand("train", "Train the model grid");
  train->add_option("--corpus", flags.corpus_dir, "Corpus directory");
  train->add_option("--run-id", flags.run_id, "Run identifier");

  auto* attack = app.add_subcommand("attack", "Run attacks on checkpoints");
  attack->add_option("--corpus", flags.corpus_dir, "Corpus directory");
  attack->add_option("--run-id", flags.run_id, "Run identifier");
  attack->add_option("--attacks", flags.attacks, "Attack names")
      ->delimiter(',');
  attack->add_option("--seeds", flags.attack_seeds, "Attack seeds")
      ->delimiter(',');

  auto* account = app.add_subcommand("account", "Privacy budgets of DP cells");
  account->add_option("--run-id", flags.run_id, "Run identifier");

  auto* report = app.add_subcommand("report", "Aggregate outcomes");
  report->add_option("--corpus", flags.corpus_dir, "Corpus directory");
  report->add_option("--run-id", flags.run_id, "Run identifier");
  report->add_option("--report-dir", flags.report_dir, "Output directory");

  auto* bench = app.add_subcommand("bench", "Seeded trend benchmark");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  absl::StatusOr<ExperimentConfig> config = ResolveConfig(flags);
  if (!config.ok()) return Fail(config.status(), kExitUsage);

  if (*gen) return RunGenCorpus(*config, flags);
  if (*train) return RunTrain(*config, flags);
  if (*attack) return RunAttack(*config, flags);
  if (*account) return RunAccount(*config, flags);
  if (*report) return ReportCommand(*config, flags);
  if (*bench) return RunBenchCommand(*config, flags);
  return kExitUsage;
}

}  // namespace
}  // namespace leakaudit

int main(int argc, char** argv) {
  try {
    return leakaudit::Main(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  }
}
