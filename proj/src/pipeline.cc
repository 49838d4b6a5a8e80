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

#include "leakaudit/pipeline.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/time/clock.h"
#include "absl/time/time.h"
#include "leakaudit/accountant.h"
#include "leakaudit/checkpoint.h"
#include "leakaudit/rng.h"

namespace leakaudit {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr char kCorpusFile[] = "corpus.jsonl";
constexpr char kSplitFile[] = "split.json";
constexpr char kSummaryFile[] = "summary.json";
constexpr char kGridFile[] = "grid.json";
constexpr char kTrainLogFile[] = "train_log.json";
constexpr char kThresholdFile[] = "threshold.json";

absl::Status EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    return absl::UnavailableError(
        absl::StrCat("cannot create directory ", dir, ": ", ec.message()));
  }
  return absl::OkStatus();
}

absl::Status WriteJson(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) return absl::DataLossError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

absl::StatusOr<json> ReadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("missing file ", path));
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::parse_error& e) {
    return absl::DataLossError(
        absl::StrCat(path, ": malformed JSON (", e.what(), ")"));
  }
}

// Runs fn(0..n-1) on up to `jobs` threads and returns the first error in
// index order.
absl::Status ParallelFor(size_t n, int jobs,
                         const std::function<absl::Status(size_t)>& fn) {
  std::vector<absl::Status> status(n);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < n; i = next++) status[i] = fn(i);
  };
  const int threads = std::clamp<int>(jobs, 1, std::max<int>(1, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& s : status) {
    if (!s.ok()) return s;
  }
  return absl::OkStatus();
}

class Progress {
 public:
  explicit Progress(std::ostream* out) : out_(out) {}
  void Line(const std::string& s) {
    if (out_ == nullptr) return;
    std::lock_guard<std::mutex> lock(mu_);
    *out_ << s << std::endl;
  }

 private:
  std::ostream* out_;
  std::mutex mu_;
};

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since)
      .count();
}

Vocabulary VocabularyFor(const ExperimentConfig& config) {
  return Vocabulary(
      config.corpus.synthetic.vocab_size,
      SyntheticCodeNames(config.corpus.synthetic.code_universe_size));
}

std::string CellDir(const std::string& run_dir, const Cell& cell) {
  return (fs::path(run_dir) / cell.id).string();
}

std::string EpochName(int epoch) { return absl::StrCat("epoch_", epoch); }

std::string AttackDir(const std::string& run_dir, const Cell& cell, int epoch,
                      uint64_t seed) {
  return (fs::path(CellDir(run_dir, cell)) / EpochName(epoch) / "attacks" /
          absl::StrCat("seed_", seed))
      .string();
}

std::string OutcomeFile(AttackKind kind) {
  return absl::StrCat(std::string(AttackName(kind)), ".json");
}

absl::StatusOr<TrainLog> ReadCellLog(const std::string& run_dir,
                                     const Cell& cell) {
  const std::string path =
      (fs::path(CellDir(run_dir, cell)) / kTrainLogFile).string();
  absl::StatusOr<json> j = ReadJson(path);
  if (!j.ok()) {
    return absl::NotFoundError(absl::StrCat("cell ", cell.id,
                                            " has no training log (", path,
                                            "); run the train stage first"));
  }
  return TrainLogFromJson(*j);
}

json ThresholdToJson(const ErrorThreshold& t, size_t n_train) {
  return {{"attack", std::string(AttackName(AttackKind::kSbba))},
          {"mu_tr", t.mu_tr},
          {"n_train_samples", n_train}};
}

absl::StatusOr<ErrorThreshold> ReadThreshold(const std::string& path) {
  absl::StatusOr<json> j = ReadJson(path);
  if (!j.ok()) return j.status();
  if (!j->contains("mu_tr") || !(*j)["mu_tr"].is_number()) {
    return absl::DataLossError(absl::StrCat(path, ": no numeric mu_tr"));
  }
  return ErrorThreshold{(*j)["mu_tr"].get<double>()};
}

bool IsThresholdAttack(AttackKind k) {
  return k == AttackKind::kSbba || k == AttackKind::kAbba ||
         k == AttackKind::kPbba;
}

}  // namespace

json CellRarityToJson(const CellRarity& r) {
  json buckets = json::array();
  for (const auto& b : r.analysis.buckets) {
    buckets.push_back({{"bucket", b.bucket},
                       {"log_prob_lo", b.log_prob_lo},
                       {"log_prob_hi", b.log_prob_hi},
                       {"mean_log_prob", b.mean_log_prob},
                       {"mean_prob", b.mean_prob},
                       {"n_patients", b.n_patients},
                       {"n_train", b.n_train},
                       {"n_test", b.n_test},
                       {"pl", b.pl ? json(*b.pl) : json(nullptr)}});
  }
  auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  return {{"cell", r.cell},
          {"objective", r.objective},
          {"epoch", r.epoch},
          {"seed", r.seed},
          {"threshold", r.analysis.threshold},
          {"spearman", opt(r.analysis.spearman)},
          {"pearson", opt(r.analysis.pearson)},
          {"buckets", buckets}};
}

std::string CorpusDir(const std::string& workspace) {
  return (fs::path(workspace) / "corpus").string();
}

std::string RunDir(const std::string& workspace, const std::string& run_id) {
  return (fs::path(workspace) / "runs" / run_id).string();
}

json CorpusSummaryToJson(const CorpusSummary& s) {
  return {{"patients", s.patients},
          {"train_patients", s.train_patients},
          {"test_patients", s.test_patients},
          {"admissions", s.admissions},
          {"notes", s.notes},
          {"tokens", s.tokens},
          {"distinct_codes", s.distinct_codes}};
}

CorpusSummary SummarizeCorpus(const Corpus& corpus, const CorpusSplit& split) {
  CorpusSummary s;
  s.patients = static_cast<int>(corpus.patients.size());
  s.train_patients = static_cast<int>(split.train_patients.size());
  s.test_patients = static_cast<int>(split.test_patients.size());
  s.admissions = static_cast<int>(corpus.AdmissionCount());
  s.notes = static_cast<int>(corpus.NoteCount());
  s.tokens = static_cast<int64_t>(corpus.TokenCount());
  std::set<std::string> codes;
  for (const auto& p : corpus.patients) {
    codes.insert(p.profile.begin(), p.profile.end());
  }
  s.distinct_codes = static_cast<int>(codes.size());
  return s;
}

absl::StatusOr<CorpusSummary> GenCorpus(const ExperimentConfig& config,
                                        const std::string& corpus_dir) {
  absl::StatusOr<Corpus> corpus;
  if (config.corpus.source == "jsonl") {
    corpus = IngestJsonl(config.corpus.path, VocabularyFor(config));
  } else {
    corpus = GenerateSyntheticCorpus(config.corpus.synthetic,
                                     DeriveSeed(config.seed, "corpus"));
  }
  if (!corpus.ok()) return corpus.status();
  absl::StatusOr<CorpusSplit> split = SplitByPatient(
      *corpus, config.corpus.split_ratio, DeriveSeed(config.seed, "split"));
  if (!split.ok()) return split.status();

  if (absl::Status s = EnsureDir(corpus_dir); !s.ok()) return s;
  const fs::path dir(corpus_dir);
  if (absl::Status s = WriteCorpusJsonl(*corpus, (dir / kCorpusFile).string());
      !s.ok()) {
    return s;
  }
  if (absl::Status s = WriteSplitManifest(*split, (dir / kSplitFile).string());
      !s.ok()) {
    return s;
  }
  CorpusSummary summary = SummarizeCorpus(*corpus, *split);
  if (absl::Status s = WriteJson((dir / kSummaryFile).string(),
                                 CorpusSummaryToJson(summary));
      !s.ok()) {
    return s;
  }
  return summary;
}

absl::StatusOr<LoadedCorpus> LoadCorpusDir(const ExperimentConfig& config,
                                           const std::string& corpus_dir) {
  const fs::path dir(corpus_dir);
  if (!fs::exists(dir / kCorpusFile) || !fs::exists(dir / kSplitFile)) {
    return absl::NotFoundError(
        absl::StrCat("no corpus in ", corpus_dir, "; run gen-corpus first"));
  }
  LoadedCorpus out;
  absl::StatusOr<Corpus> corpus =
      IngestJsonl((dir / kCorpusFile).string(), VocabularyFor(config));
  if (!corpus.ok()) return corpus.status();
  absl::StatusOr<CorpusSplit> split =
      ReadSplitManifest((dir / kSplitFile).string());
  if (!split.ok()) return split.status();
  out.corpus = *std::move(corpus);
  out.split = *std::move(split);
  return out;
}

std::vector<Sample> DropShortSamples(std::vector<Sample> samples,
                                     int min_tokens) {
  std::erase_if(samples, [min_tokens](const Sample& s) {
    return std::count_if(s.tokens.begin(), s.tokens.end(),
                         [](TokenId t) { return t != kPadToken; }) < min_tokens;
  });
  return samples;
}

std::vector<Cell> ExpandGrid(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  const TrainSection& t = config.train;
  for (size_t i = 0; i < config.models.size(); ++i) {
    const ModelVariant& m = config.models[i];
    Cell base;
    base.model_index = static_cast<int>(i);
    base.model_name = m.name;
    base.model = m.config;
    base.model.vocab_size = config.corpus.synthetic.vocab_size;
    if (t.non_dp) {
      Cell c = base;
      c.id = absl::StrCat(m.name, "_nondp");
      c.train = TrainConfig{t.learning_rate, t.epochs, t.batch_size,
                            t.batch_size, std::nullopt};
      cells.push_back(std::move(c));
    }
    if (t.dp.has_value()) {
      for (double sigma : t.dp->sigmas) {
        Cell c = base;
        c.id = absl::StrFormat("%s_sigma%g", m.name, sigma);
        c.sigma = sigma;
        c.train = TrainConfig{
            t.dp->learning_rate, t.dp->epochs, t.dp->lot_size, t.dp->lot_size,
            DpConfig{t.dp->clip_norm, sigma, t.dp->delta, t.dp->patient_cap}};
        cells.push_back(std::move(c));
      }
    }
  }
  return cells;
}

CellSamples SamplesForCell(const ExperimentConfig& config,
                           const LoadedCorpus& loaded, const Cell& cell) {
  CellSamples out;
  const int n = cell.model.seq_len;
  const int min_tokens = config.corpus.min_tokens;
  out.train = DropShortSamples(
      MakeSamples(SelectPatients(loaded.corpus, loaded.split.train_patients), n,
                  Side::kTrain),
      min_tokens);
  out.test = DropShortSamples(
      MakeSamples(SelectPatients(loaded.corpus, loaded.split.test_patients), n,
                  Side::kTest),
      min_tokens);
  if (cell.train.dp.has_value()) {
    out.train = CapPatientSamples(out.train, cell.train.dp->patient_cap,
                                  DeriveSeed(config.seed, "patient_cap"));
  }
  return out;
}

absl::StatusOr<std::vector<CellResult>> TrainGrid(
    const ExperimentConfig& config, const std::string& corpus_dir,
    const std::string& run_dir, int jobs, std::ostream* progress) {
  absl::StatusOr<LoadedCorpus> loaded = LoadCorpusDir(config, corpus_dir);
  if (!loaded.ok()) return loaded.status();
  if (absl::Status s = EnsureDir(run_dir); !s.ok()) return s;

  const std::vector<Cell> cells = ExpandGrid(config);
  std::vector<CellResult> results(cells.size());
  Progress out(progress);
  absl::Status status = ParallelFor(cells.size(), jobs, [&](size_t i) {
    const Cell& cell = cells[i];
    const auto start = std::chrono::steady_clock::now();
    const std::string dir = CellDir(run_dir, cell);
    std::error_code ec;
    fs::remove_all(dir, ec);  // stale epochs from an earlier run
    CellSamples samples = SamplesForCell(config, *loaded, cell);
    absl::StatusOr<ParameterSet> params = InitParams(
        cell.model, DeriveSeed(config.seed, "init", cell.model_index));
    if (!params.ok()) return params.status();

    TrainOptions options;
    options.checkpoint_root = dir;
    options.eval_samples = samples.test;
    options.eval_seed = DeriveSeed(config.seed, "eval");
    options.lineage = {{"cell", cell.id},
                       {"model", cell.model_name},
                       {"sigma", FormatSigma(cell.sigma)},
                       {"seed", config.seed}};
    const uint64_t train_seed =
        DeriveSeed(config.seed, "train", cell.model_index);
    absl::StatusOr<TrainLog> log =
        cell.sigma.has_value()
            ? TrainDpSgd(*params, samples.train, cell.train, train_seed,
                         options)
            : TrainSgd(*params, samples.train, cell.train, train_seed, options);
    if (!log.ok()) {
      return absl::Status(
          log.status().code(),
          absl::StrCat("cell ", cell.id, ": ", log.status().message()));
    }
    results[i] = CellResult{cell, *std::move(log)};
    const TrainLog& l = results[i].log;
    std::string line = absl::StrFormat(
        "[train] %-16s %zu train / %zu test samples, %zu epochs", cell.id,
        samples.train.size(), samples.test.size(), l.epochs.size());
    if (!l.epochs.empty() && l.epochs.back().test_loss.has_value()) {
      absl::StrAppendFormat(&line, ", test loss %.4f",
                            *l.epochs.back().test_loss);
    }
    if (l.diverged)
      absl::StrAppend(&line, ", DIVERGED: ", l.divergence_message);
    absl::StrAppendFormat(&line, " (%.1fs)", Seconds(start));
    out.Line(line);
    return absl::OkStatus();
  });
  if (!status.ok()) return status;

  json grid = json::array();
  for (const auto& r : results) {
    grid.push_back(
        {{"cell", r.cell.id},
         {"model", r.cell.model_name},
         {"objective", std::string(ObjectiveName(r.cell.model.objective))},
         {"sigma", FormatSigma(r.cell.sigma)},
         {"epochs_completed", r.log.epochs.size()},
         {"diverged", r.log.diverged},
         {"divergence_message", r.log.divergence_message}});
  }
  if (absl::Status s = WriteJson(
          (fs::path(run_dir) / kGridFile).string(),
          {{"config", ExperimentConfigToJson(config)}, {"cells", grid}});
      !s.ok()) {
    return s;
  }
  return results;
}

absl::Status AttackRun(const ExperimentConfig& config,
                       const std::string& corpus_dir,
                       const std::string& run_dir,
                       const std::vector<AttackKind>& attacks,
                       const std::vector<uint64_t>& seeds, int jobs,
                       std::ostream* progress) {
  if (attacks.empty())
    return absl::InvalidArgumentError("no attacks requested");
  if (seeds.empty()) return absl::InvalidArgumentError("no attack seeds");
  absl::StatusOr<LoadedCorpus> loaded = LoadCorpusDir(config, corpus_dir);
  if (!loaded.ok()) return loaded.status();

  struct Unit {
    const Cell* cell;
    int epoch;
  };
  const std::vector<Cell> cells = ExpandGrid(config);
  std::vector<Unit> units;
  for (const Cell& cell : cells) {
    absl::StatusOr<TrainLog> log = ReadCellLog(run_dir, cell);
    if (!log.ok()) return log.status();
    for (const EpochRecord& e : log->epochs) units.push_back({&cell, e.epoch});
  }

  const bool any_threshold =
      std::any_of(attacks.begin(), attacks.end(), IsThresholdAttack);
  const bool want_gradient = std::find(attacks.begin(), attacks.end(),
                                       AttackKind::kSgwba) != attacks.end();
  const bool want_attention = std::find(attacks.begin(), attacks.end(),
                                        AttackKind::kSawba) != attacks.end();

  Progress out(progress);
  return ParallelFor(units.size(), jobs, [&](size_t u) -> absl::Status {
    const Cell& cell = *units[u].cell;
    const int epoch = units[u].epoch;
    const auto start = std::chrono::steady_clock::now();
    const std::string ckpt =
        (fs::path(CellDir(run_dir, cell)) / EpochName(epoch)).string();
    absl::StatusOr<LoadedCheckpoint> loaded_ckpt = LoadCheckpoint(ckpt);
    if (!loaded_ckpt.ok()) return loaded_ckpt.status();
    const ParameterSet& params = loaded_ckpt->params;
    const CellSamples samples = SamplesForCell(config, *loaded, cell);
    const std::string ckpt_label = absl::StrCat(cell.id, "/", EpochName(epoch));

    std::string line =
        absl::StrFormat("[attack] %-16s epoch %d", cell.id, epoch);
    for (uint64_t seed : seeds) {
      const std::string dir = AttackDir(run_dir, cell, epoch, seed);
      if (absl::Status s = EnsureDir(dir); !s.ok()) return s;
      const uint64_t objective_seed = DeriveSeed(seed, "attack_objective");

      // Scores with the requested feature kind; errors are the same for all.
      std::map<FeatureKind,
               std::pair<std::vector<ScoredSample>, std::vector<ScoredSample>>>
          scored;
      auto score = [&](FeatureKind kind) -> absl::Status {
        if (scored.contains(kind)) return absl::OkStatus();
        auto tr = ScoreSamples(params, samples.train, kind, objective_seed);
        if (!tr.ok()) return tr.status();
        auto te = ScoreSamples(params, samples.test, kind, objective_seed);
        if (!te.ok()) return te.status();
        scored[kind] = {*std::move(tr), *std::move(te)};
        return absl::OkStatus();
      };
      // Errors come from a plain loss pass so that mu_tr does not depend on
      // which other attacks were requested.
      const FeatureKind error_kind = FeatureKind::kNone;

      const std::string threshold_path =
          (fs::path(dir) / kThresholdFile).string();
      if (any_threshold) {
        if (absl::Status s = score(error_kind); !s.ok()) return s;
        const auto& train = scored[error_kind].first;
        std::vector<double> errors;
        errors.reserve(train.size());
        for (const auto& s : train) errors.push_back(s.error);
        absl::StatusOr<ErrorThreshold> t = ComputeThreshold(errors);
        if (!t.ok()) return t.status();
        if (absl::Status s =
                WriteJson(threshold_path, ThresholdToJson(*t, errors.size()));
            !s.ok()) {
          return s;
        }
      }

      for (AttackKind kind : attacks) {
        absl::StatusOr<AttackOutcome> outcome;
        const std::string name(AttackName(kind));
        if (IsThresholdAttack(kind)) {
          absl::StatusOr<ErrorThreshold> t = ReadThreshold(threshold_path);
          if (!t.ok()) return t.status();
          const auto& [train, test] = scored[error_kind];
          outcome = RunMembershipExperiment(
              ThresholdAdversary(name, AttackUnit(kind), *t), train, test,
              seed);
        } else {
          const FeatureKind fk = kind == AttackKind::kSgwba
                                     ? FeatureKind::kGradient
                                     : FeatureKind::kAttention;
          if (absl::Status s = score(fk); !s.ok()) return s;
          const auto& [train, test] = scored[fk];
          outcome = RunMembershipExperiment(
              LearnedAdversary(name, config.attack.hyper,
                               config.attack.train_fraction),
              train, test, seed);
        }
        if (!outcome.ok()) {
          return absl::Status(outcome.status().code(),
                              absl::StrCat(name, " on ", ckpt_label, ": ",
                                           outcome.status().message()));
        }
        outcome->checkpoint = ckpt_label;
        outcome->seed = seed;
        if (absl::Status s =
                WriteJson((fs::path(dir) / OutcomeFile(kind)).string(),
                          AttackOutcomeToJson(*outcome));
            !s.ok()) {
          return s;
        }
        absl::StrAppendFormat(&line, " %s=%.3f", name, outcome->pl);
      }

      if (config.attack.write_features) {
        if (want_gradient) {
          const auto& [train, test] = scored[FeatureKind::kGradient];
          if (absl::Status s = WriteFeatureCsv(
                  (fs::path(dir) / "features_gradient.csv").string(),
                  GradientFeatureNames(params), train, test);
              !s.ok()) {
            return s;
          }
        }
        if (want_attention) {
          const auto& [train, test] = scored[FeatureKind::kAttention];
          if (absl::Status s = WriteFeatureCsv(
                  (fs::path(dir) / "features_attention.csv").string(),
                  AttentionFeatureNames(cell.model.n_layers,
                                        cell.model.n_heads),
                  train, test);
              !s.ok()) {
            return s;
          }
        }
      }
    }
    absl::StrAppendFormat(&line, " (%.1fs)", Seconds(start));
    out.Line(line);
    return absl::OkStatus();
  });
}

absl::StatusOr<std::vector<AccountantRow>> AccountRun(
    const ExperimentConfig& config, const std::string& run_dir) {
  std::vector<AccountantRow> rows;
  json cells = json::array();
  for (const Cell& cell : ExpandGrid(config)) {
    if (!cell.sigma.has_value()) continue;
    absl::StatusOr<TrainLog> log = ReadCellLog(run_dir, cell);
    if (!log.ok()) return log.status();
    json epochs = json::array();
    std::optional<AccountantSnapshot> last;
    for (const EpochRecord& e : log->epochs) {
      if (!e.accountant.has_value()) continue;
      last = e.accountant;
      epochs.push_back({{"epoch", e.epoch},
                        {"steps", e.accountant->steps},
                        {"epsilon", e.accountant->epsilon},
                        {"optimal_order", e.accountant->optimal_order}});
    }
    if (!last.has_value()) {
      return absl::NotFoundError(absl::StrCat(
          "cell ", cell.id, " has no accountant snapshot in its training log"));
    }
    const int k = config.report.group_k;
    const GroupPrivacy group = GroupDp(last->epsilon, last->delta, k);
    AccountantRow row{cell.id,
                      *cell.sigma,
                      last->q,
                      last->steps,
                      last->epsilon,
                      last->delta,
                      last->optimal_order,
                      k,
                      group.epsilon,
                      group.delta,
                      group.delta_capped,
                      config.seed};
    rows.push_back(row);
    cells.push_back({{"model_id", row.model_id},
                     {"sigma", row.sigma},
                     {"q", row.q},
                     {"steps", row.steps},
                     {"epsilon", row.epsilon},
                     {"delta", row.delta},
                     {"optimal_order", row.optimal_order},
                     {"group_dp",
                      {{"k", k},
                       {"epsilon", row.group_epsilon},
                       {"delta", row.group_delta},
                       {"delta_capped", row.group_delta_capped}}},
                     {"per_epoch", epochs},
                     {"seed", row.seed}});
  }
  if (absl::Status s =
          WriteJson((fs::path(run_dir) / "budget.json").string(), cells);
      !s.ok()) {
    return s;
  }
  return rows;
}

absl::StatusOr<RunReport> ReportRun(const ExperimentConfig& config,
                                    const std::string& corpus_dir,
                                    const std::string& run_dir,
                                    const std::string& out_dir) {
  absl::StatusOr<LoadedCorpus> loaded = LoadCorpusDir(config, corpus_dir);
  if (!loaded.ok()) return loaded.status();

  RunReport out;
  LeakageReport& report = out.report;
  const std::vector<Cell> cells = ExpandGrid(config);
  const bool want_rarity =
      std::find(config.attack.attacks.begin(), config.attack.attacks.end(),
                AttackKind::kPbba) != config.attack.attacks.end();

  std::vector<RarityBucket> buckets;
  std::map<std::string, double> log_prob;
  if (want_rarity) {
    const DiseaseStats stats = CodeProbabilityMle(loaded->corpus);
    for (const Patient& p : loaded->corpus.patients) {
      absl::StatusOr<ProfileProbability> pp =
          ComputeProfileProbability(p.profile, stats);
      if (!pp.ok()) return pp.status();
      log_prob[p.patient_id] = pp->log_prob;
    }
    absl::StatusOr<std::vector<RarityBucket>> b = BucketByLogProbability(
        loaded->corpus.patients, stats, config.report.n_buckets,
        config.report.min_bucket_size);
    if (!b.ok()) return b.status();
    buckets = *std::move(b);
  }

  for (const Cell& cell : cells) {
    absl::StatusOr<TrainLog> log = ReadCellLog(run_dir, cell);
    if (!log.ok()) return log.status();
    const std::string objective(ObjectiveName(cell.model.objective));
    const std::string sigma = FormatSigma(cell.sigma);
    for (const EpochRecord& e : log->epochs) {
      const std::string label = absl::StrCat(cell.id, "/", EpochName(e.epoch));
      const std::string ckpt =
          (fs::path(CellDir(run_dir, cell)) / EpochName(e.epoch)).string();
      if (!CheckpointExists(ckpt)) {
        return absl::NotFoundError(absl::StrCat("missing checkpoint ", ckpt));
      }
      report.utility.push_back(
          UtilityRow{cell.id, objective, sigma, e.epoch, e.train_loss,
                     e.test_loss.value_or(0.0), config.seed});
      for (uint64_t seed : config.attack.seeds) {
        const std::string dir = AttackDir(run_dir, cell, e.epoch, seed);
        std::optional<AttackOutcome> pbba;
        for (AttackKind kind : config.attack.attacks) {
          const std::string path = (fs::path(dir) / OutcomeFile(kind)).string();
          absl::StatusOr<json> j = ReadJson(path);
          if (!j.ok()) {
            return absl::NotFoundError(absl::StrCat(
                "missing attack outcome ", path, "; run the attack stage"));
          }
          absl::StatusOr<AttackOutcome> o = AttackOutcomeFromJson(*j);
          if (!o.ok()) return o.status();
          report.rows.push_back(LeakageRow{
              cell.id, objective, sigma, e.epoch, std::string(AttackName(kind)),
              std::string(UnitName(AttackUnit(kind))), o->pl, o->n_train_units,
              o->n_test_units, seed, label});
          if (kind == AttackKind::kPbba) pbba = *std::move(o);
        }
        if (want_rarity && !cell.sigma.has_value() && pbba.has_value()) {
          std::map<std::string, MembershipLabel> tr, te;
          for (const UnitPrediction& p : pbba->predictions) {
            (p.b == MembershipLabel::kMember ? tr : te)[p.unit_id] =
                p.predicted;
          }
          absl::StatusOr<RarityAnalysis> ra =
              BucketedPl(buckets, tr, te, pbba->threshold, log_prob);
          if (!ra.ok()) return ra.status();
          out.rarity.push_back(
              CellRarity{cell.id, objective, e.epoch, seed, *std::move(ra)});
        }
      }
    }
  }

  absl::StatusOr<std::vector<AccountantRow>> budget =
      AccountRun(config, run_dir);
  if (!budget.ok()) return budget.status();
  report.accountant = *std::move(budget);
  report.metadata = {
      {"generated_at",
       absl::FormatTime(absl::RFC3339_sec, absl::Now(), absl::UTCTimeZone())},
      {"seed", config.seed}};

  if (absl::Status s = EnsureDir(out_dir); !s.ok()) return s;
  const fs::path dir(out_dir);
  if (absl::Status s =
          EmitReport(report, (dir / "report.csv").string(), ReportFormat::kCsv);
      !s.ok()) {
    return s;
  }
  if (absl::Status s = EmitReport(report, (dir / "report.json").string(),
                                  ReportFormat::kJson);
      !s.ok()) {
    return s;
  }
  std::error_code ec;
  fs::copy_file(fs::path(run_dir) / "budget.json", dir / "budget.json",
                fs::copy_options::overwrite_existing, ec);
  if (ec) {
    return absl::UnavailableError(
        absl::StrCat("cannot copy budget.json: ", ec.message()));
  }

  // rarity.csv holds the first non-DP model at its final epoch; rarity.json
  // holds every analysed checkpoint.
  json all = json::array();
  const CellRarity* primary = nullptr;
  for (const CellRarity& r : out.rarity) {
    all.push_back(CellRarityToJson(r));
    if (primary == nullptr ||
        (r.cell == primary->cell && r.epoch > primary->epoch)) {
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
  if (absl::Status s = WriteJson((dir / "rarity.json").string(), all);
      !s.ok()) {
    return s;
  }
  return out;
}

}  // namespace leakaudit
