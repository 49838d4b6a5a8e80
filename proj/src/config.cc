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

#include "leakaudit/config.h"

#include <cmath>
#include <fstream>
#include <set>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "leakaudit/trainer.h"

namespace leakaudit {
namespace {

using json = nlohmann::json;

// Reads typed fields out of one JSON object and remembers which keys were
// consumed so that leftovers can be reported as unknown.
class FieldReader {
 public:
  FieldReader(const json& j, std::string path)
      : j_(j), path_(std::move(path)) {}

  absl::Status CheckObject() const {
    if (!j_.is_object()) {
      return absl::InvalidArgumentError(
          absl::StrCat(Where(), " must be an object"));
    }
    return absl::OkStatus();
  }

  const json* Child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string Path(const std::string& key) const {
    return path_.empty() ? key : absl::StrCat(path_, ".", key);
  }

  template <typename T>
  absl::Status Read(const std::string& key, T& out) {
    const json* v = Child(key);
    if (v == nullptr) return absl::OkStatus();
    return Convert(*v, Path(key), out);
  }

  absl::Status Finish() const {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) unknown.push_back(k);
    }
    if (unknown.empty()) return absl::OkStatus();
    return absl::InvalidArgumentError(absl::StrCat(
        "unknown key(s) in ", Where(), ": ", absl::StrJoin(unknown, ", ")));
  }

 private:
  std::string Where() const { return path_.empty() ? "config" : path_; }

  static absl::Status TypeError(const std::string& path, const char* want) {
    return absl::InvalidArgumentError(absl::StrCat(path, " must be ", want));
  }
  static absl::Status Convert(const json& v, const std::string& path,
                              int& out) {
    if (!v.is_number_integer()) return TypeError(path, "an integer");
    out = v.get<int>();
    return absl::OkStatus();
  }
  static absl::Status Convert(const json& v, const std::string& path,
                              uint64_t& out) {
    if (!v.is_number_integer() || v.get<int64_t>() < 0) {
      return TypeError(path, "a non-negative integer");
    }
    out = v.get<uint64_t>();
    return absl::OkStatus();
  }
  static absl::Status Convert(const json& v, const std::string& path,
                              double& out) {
    if (!v.is_number()) return TypeError(path, "a number");
    out = v.get<double>();
    return absl::OkStatus();
  }
  static absl::Status Convert(const json& v, const std::string& path,
                              bool& out) {
    if (!v.is_boolean()) return TypeError(path, "a boolean");
    out = v.get<bool>();
    return absl::OkStatus();
  }
  static absl::Status Convert(const json& v, const std::string& path,
                              std::string& out) {
    if (!v.is_string()) return TypeError(path, "a string");
    out = v.get<std::string>();
    return absl::OkStatus();
  }
  static absl::Status Convert(const json& v, const std::string& path,
                              IntRange& out) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
        !v[1].is_number_integer()) {
      return TypeError(path, "a [lo, hi] integer pair");
    }
    out = IntRange{v[0].get<int>(), v[1].get<int>()};
    return absl::OkStatus();
  }
  template <typename T>
  static absl::Status Convert(const json& v, const std::string& path,
                              std::vector<T>& out) {
    if (!v.is_array()) return TypeError(path, "an array");
    out.clear();
    for (size_t i = 0; i < v.size(); ++i) {
      T item{};
      if (absl::Status s = Convert(v[i], absl::StrCat(path, "[", i, "]"), item);
          !s.ok()) {
        return s;
      }
      out.push_back(std::move(item));
    }
    return absl::OkStatus();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

#define LA_RETURN_IF_ERROR(expr)                       \
  do {                                                 \
    if (absl::Status _s = (expr); !_s.ok()) return _s; \
  } while (0)

absl::Status ParseCorpus(const json& j, CorpusSection& out) {
  FieldReader r(j, "corpus");
  LA_RETURN_IF_ERROR(r.CheckObject());
  CorpusConfig& c = out.synthetic;
  LA_RETURN_IF_ERROR(r.Read("source", out.source));
  LA_RETURN_IF_ERROR(r.Read("path", out.path));
  LA_RETURN_IF_ERROR(r.Read("split_ratio", out.split_ratio));
  LA_RETURN_IF_ERROR(r.Read("min_tokens", out.min_tokens));
  LA_RETURN_IF_ERROR(r.Read("n_patients", c.n_patients));
  LA_RETURN_IF_ERROR(r.Read("code_universe_size", c.code_universe_size));
  LA_RETURN_IF_ERROR(r.Read("zipf_exponent", c.zipf_exponent));
  LA_RETURN_IF_ERROR(r.Read("notes_per_admission", c.notes_per_admission));
  LA_RETURN_IF_ERROR(
      r.Read("admissions_per_patient", c.admissions_per_patient));
  LA_RETURN_IF_ERROR(r.Read("note_length", c.note_length));
  LA_RETURN_IF_ERROR(r.Read("vocab_size", c.vocab_size));
  LA_RETURN_IF_ERROR(r.Read("boilerplate_fraction", c.boilerplate_fraction));
  LA_RETURN_IF_ERROR(r.Read("max_profile_size", c.max_profile_size));
  LA_RETURN_IF_ERROR(
      r.Read("one_note_per_admission", c.one_note_per_admission));
  LA_RETURN_IF_ERROR(r.Read("code_phrase_length", c.code_phrase_length));
  LA_RETURN_IF_ERROR(r.Read("patient_phrase_count", c.patient_phrase_count));
  LA_RETURN_IF_ERROR(r.Read("patient_phrase_length", c.patient_phrase_length));
  LA_RETURN_IF_ERROR(
      r.Read("boilerplate_span_count", c.boilerplate_span_count));
  LA_RETURN_IF_ERROR(
      r.Read("boilerplate_span_length", c.boilerplate_span_length));
  return r.Finish();
}

absl::Status ParseModel(const json& j, const std::string& path,
                        ModelVariant& out) {
  FieldReader r(j, path);
  LA_RETURN_IF_ERROR(r.CheckObject());
  ModelConfig& m = out.config;
  std::string objective = std::string(ObjectiveName(m.objective));
  LA_RETURN_IF_ERROR(r.Read("name", out.name));
  LA_RETURN_IF_ERROR(r.Read("objective", objective));
  LA_RETURN_IF_ERROR(r.Read("n_layers", m.n_layers));
  LA_RETURN_IF_ERROR(r.Read("n_heads", m.n_heads));
  LA_RETURN_IF_ERROR(r.Read("model_dim", m.model_dim));
  LA_RETURN_IF_ERROR(r.Read("ff_dim", m.ff_dim));
  LA_RETURN_IF_ERROR(r.Read("seq_len", m.seq_len));
  LA_RETURN_IF_ERROR(r.Read("mask_rate", m.mask_rate));
  absl::StatusOr<Objective> parsed = ParseObjective(objective);
  if (!parsed.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat(r.Path("objective"), ": ", parsed.status().message()));
  }
  m.objective = *parsed;
  return r.Finish();
}

absl::Status ParseDp(const json& j, DpSweep& out) {
  FieldReader r(j, "train.dp");
  LA_RETURN_IF_ERROR(r.CheckObject());
  LA_RETURN_IF_ERROR(r.Read("sigmas", out.sigmas));
  LA_RETURN_IF_ERROR(r.Read("epochs", out.epochs));
  LA_RETURN_IF_ERROR(r.Read("learning_rate", out.learning_rate));
  LA_RETURN_IF_ERROR(r.Read("lot_size", out.lot_size));
  LA_RETURN_IF_ERROR(r.Read("clip_norm", out.clip_norm));
  LA_RETURN_IF_ERROR(r.Read("delta", out.delta));
  LA_RETURN_IF_ERROR(r.Read("patient_cap", out.patient_cap));
  return r.Finish();
}

absl::Status ParseTrain(const json& j, TrainSection& out) {
  FieldReader r(j, "train");
  LA_RETURN_IF_ERROR(r.CheckObject());
  LA_RETURN_IF_ERROR(r.Read("non_dp", out.non_dp));
  LA_RETURN_IF_ERROR(r.Read("learning_rate", out.learning_rate));
  LA_RETURN_IF_ERROR(r.Read("epochs", out.epochs));
  LA_RETURN_IF_ERROR(r.Read("batch_size", out.batch_size));
  if (const json* dp = r.Child("dp"); dp != nullptr && !dp->is_null()) {
    DpSweep sweep;
    LA_RETURN_IF_ERROR(ParseDp(*dp, sweep));
    out.dp = std::move(sweep);
  }
  return r.Finish();
}

absl::Status ParseAttack(const json& j, AttackSection& out) {
  FieldReader r(j, "attack");
  LA_RETURN_IF_ERROR(r.CheckObject());
  std::vector<std::string> names;
  LA_RETURN_IF_ERROR(r.Read("attacks", names));
  if (r.Child("attacks") != nullptr) {
    out.attacks.clear();
    for (const auto& n : names) {
      absl::StatusOr<AttackKind> kind = ParseAttackName(n);
      if (!kind.ok()) {
        return absl::InvalidArgumentError(
            absl::StrCat("attack.attacks: ", kind.status().message()));
      }
      out.attacks.push_back(*kind);
    }
  }
  LA_RETURN_IF_ERROR(r.Read("seeds", out.seeds));
  LA_RETURN_IF_ERROR(r.Read("l2", out.hyper.l2));
  LA_RETURN_IF_ERROR(r.Read("iterations", out.hyper.iterations));
  LA_RETURN_IF_ERROR(r.Read("step", out.hyper.step));
  LA_RETURN_IF_ERROR(r.Read("train_fraction", out.train_fraction));
  LA_RETURN_IF_ERROR(r.Read("write_features", out.write_features));
  return r.Finish();
}

absl::Status ParseReport(const json& j, ReportSection& out) {
  FieldReader r(j, "report");
  LA_RETURN_IF_ERROR(r.CheckObject());
  LA_RETURN_IF_ERROR(r.Read("n_buckets", out.n_buckets));
  LA_RETURN_IF_ERROR(r.Read("min_bucket_size", out.min_bucket_size));
  LA_RETURN_IF_ERROR(r.Read("group_k", out.group_k));
  return r.Finish();
}

absl::Status ParseBench(const json& j, BenchSection& out) {
  FieldReader r(j, "bench");
  LA_RETURN_IF_ERROR(r.CheckObject());
  LA_RETURN_IF_ERROR(r.Read("seeds", out.seeds));
  LA_RETURN_IF_ERROR(r.Read("quick_seeds", out.quick_seeds));
  return r.Finish();
}

absl::Status Invalid(const std::string& what) {
  return absl::InvalidArgumentError(what);
}

}  // namespace

absl::Status ValidateExperimentConfig(const ExperimentConfig& c) {
  if (c.schema_version != kConfigSchemaVersion) {
    return Invalid(absl::StrCat("unsupported schema_version ", c.schema_version,
                                " (expected ", kConfigSchemaVersion, ")"));
  }
  const CorpusSection& corpus = c.corpus;
  if (corpus.source == "synthetic") {
    if (absl::Status s = ValidateCorpusConfig(corpus.synthetic); !s.ok()) {
      return Invalid(absl::StrCat("corpus: ", s.message()));
    }
  } else if (corpus.source == "jsonl") {
    if (corpus.path.empty())
      return Invalid("corpus.path is required for jsonl");
    if (corpus.synthetic.vocab_size <= kFirstRegularToken ||
        corpus.synthetic.code_universe_size < 1) {
      return Invalid("corpus: vocab_size/code_universe_size out of range");
    }
  } else {
    return Invalid(absl::StrCat(
        "corpus.source must be synthetic or jsonl, got '", corpus.source, "'"));
  }
  if (!(corpus.split_ratio > 0.0 && corpus.split_ratio < 1.0)) {
    return Invalid("corpus.split_ratio must lie in (0, 1)");
  }
  if (corpus.min_tokens < 1) return Invalid("corpus.min_tokens must be >= 1");

  if (c.models.empty()) return Invalid("models must list at least one variant");
  std::set<std::string> names;
  for (const auto& m : c.models) {
    if (m.name.empty()) return Invalid("every model needs a name");
    if (m.name.find_first_of("/\\ ") != std::string::npos) {
      return Invalid(absl::StrCat("model name '", m.name,
                                  "' may not contain spaces or slashes"));
    }
    if (!names.insert(m.name).second) {
      return Invalid(absl::StrCat("duplicate model name '", m.name, "'"));
    }
    ModelConfig mc = m.config;
    mc.vocab_size = corpus.synthetic.vocab_size;
    if (absl::Status s = ValidateModelConfig(mc); !s.ok()) {
      return Invalid(absl::StrCat("model '", m.name, "': ", s.message()));
    }
  }

  const TrainSection& t = c.train;
  if (!t.non_dp && !t.dp.has_value()) {
    return Invalid("train: neither non_dp nor dp cells requested");
  }
  if (t.non_dp) {
    TrainConfig tc{t.learning_rate, t.epochs, t.batch_size, t.batch_size, {}};
    if (absl::Status s = ValidateTrainConfig(tc); !s.ok()) {
      return Invalid(absl::StrCat("train: ", s.message()));
    }
  }
  if (t.dp.has_value()) {
    if (t.dp->sigmas.empty()) return Invalid("train.dp.sigmas is empty");
    std::set<double> seen;
    for (double s : t.dp->sigmas) {
      if (!(s > 0.0) || !std::isfinite(s)) {
        return Invalid("train.dp.sigmas must be positive and finite");
      }
      if (!seen.insert(s).second) return Invalid("train.dp.sigmas repeats");
    }
    TrainConfig tc{t.dp->learning_rate, t.dp->epochs, t.dp->lot_size,
                   t.dp->lot_size,
                   DpConfig{t.dp->clip_norm, t.dp->sigmas.front(), t.dp->delta,
                            t.dp->patient_cap}};
    if (absl::Status s = ValidateTrainConfig(tc); !s.ok()) {
      return Invalid(absl::StrCat("train.dp: ", s.message()));
    }
  }

  const AttackSection& a = c.attack;
  if (a.attacks.empty()) return Invalid("attack.attacks is empty");
  if (std::set<AttackKind>(a.attacks.begin(), a.attacks.end()).size() !=
      a.attacks.size()) {
    return Invalid("attack.attacks repeats an attack");
  }
  if (a.seeds.empty()) return Invalid("attack.seeds is empty");
  if (a.hyper.iterations < 1 || !(a.hyper.step > 0.0) || a.hyper.l2 < 0.0) {
    return Invalid("attack: iterations >= 1, step > 0 and l2 >= 0 required");
  }
  if (!(a.train_fraction > 0.0 && a.train_fraction < 1.0)) {
    return Invalid("attack.train_fraction must lie in (0, 1)");
  }

  if (c.report.n_buckets < 1 || c.report.min_bucket_size < 1) {
    return Invalid("report: n_buckets and min_bucket_size must be >= 1");
  }
  if (c.report.group_k < 1) return Invalid("report.group_k must be >= 1");
  if (c.bench.seeds.empty() || c.bench.quick_seeds.empty()) {
    return Invalid("bench seeds must be non-empty");
  }
  return absl::OkStatus();
}

absl::StatusOr<ExperimentConfig> ExperimentConfigFromJson(const json& j) {
  ExperimentConfig c;
  FieldReader r(j, "");
  LA_RETURN_IF_ERROR(r.CheckObject());
  if (!j.contains("schema_version")) {
    return Invalid("schema_version is required");
  }
  LA_RETURN_IF_ERROR(r.Read("schema_version", c.schema_version));
  if (c.schema_version != kConfigSchemaVersion) {
    return Invalid(
        absl::StrCat("unsupported schema_version ", c.schema_version));
  }
  LA_RETURN_IF_ERROR(r.Read("seed", c.seed));
  if (const json* v = r.Child("corpus")) {
    LA_RETURN_IF_ERROR(ParseCorpus(*v, c.corpus));
  }
  if (const json* v = r.Child("models")) {
    if (!v->is_array()) return Invalid("models must be an array");
    for (size_t i = 0; i < v->size(); ++i) {
      ModelVariant m;
      LA_RETURN_IF_ERROR(
          ParseModel((*v)[i], absl::StrCat("models[", i, "]"), m));
      c.models.push_back(std::move(m));
    }
  }
  if (const json* v = r.Child("train")) {
    LA_RETURN_IF_ERROR(ParseTrain(*v, c.train));
  }
  if (const json* v = r.Child("attack")) {
    LA_RETURN_IF_ERROR(ParseAttack(*v, c.attack));
  }
  if (const json* v = r.Child("report")) {
    LA_RETURN_IF_ERROR(ParseReport(*v, c.report));
  }
  if (const json* v = r.Child("bench")) {
    LA_RETURN_IF_ERROR(ParseBench(*v, c.bench));
  }
  LA_RETURN_IF_ERROR(r.Finish());
  for (auto& m : c.models) m.config.vocab_size = c.corpus.synthetic.vocab_size;
  LA_RETURN_IF_ERROR(ValidateExperimentConfig(c));
  return c;
}

json ExperimentConfigToJson(const ExperimentConfig& c) {
  const CorpusConfig& s = c.corpus.synthetic;
  auto range = [](const IntRange& r) { return json::array({r.lo, r.hi}); };
  json corpus = {
      {"source", c.corpus.source},
      {"split_ratio", c.corpus.split_ratio},
      {"min_tokens", c.corpus.min_tokens},
      {"n_patients", s.n_patients},
      {"code_universe_size", s.code_universe_size},
      {"zipf_exponent", s.zipf_exponent},
      {"notes_per_admission", range(s.notes_per_admission)},
      {"admissions_per_patient", range(s.admissions_per_patient)},
      {"note_length", range(s.note_length)},
      {"vocab_size", s.vocab_size},
      {"boilerplate_fraction", s.boilerplate_fraction},
      {"max_profile_size", s.max_profile_size},
      {"one_note_per_admission", s.one_note_per_admission},
      {"code_phrase_length", s.code_phrase_length},
      {"patient_phrase_count", s.patient_phrase_count},
      {"patient_phrase_length", s.patient_phrase_length},
      {"boilerplate_span_count", s.boilerplate_span_count},
      {"boilerplate_span_length", s.boilerplate_span_length},
  };
  if (!c.corpus.path.empty()) corpus["path"] = c.corpus.path;

  json models = json::array();
  for (const auto& m : c.models) {
    models.push_back(
        {{"name", m.name},
         {"objective", std::string(ObjectiveName(m.config.objective))},
         {"n_layers", m.config.n_layers},
         {"n_heads", m.config.n_heads},
         {"model_dim", m.config.model_dim},
         {"ff_dim", m.config.ff_dim},
         {"seq_len", m.config.seq_len},
         {"mask_rate", m.config.mask_rate}});
  }

  json train = {{"non_dp", c.train.non_dp},
                {"learning_rate", c.train.learning_rate},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size}};
  if (c.train.dp.has_value()) {
    const DpSweep& d = *c.train.dp;
    train["dp"] = {{"sigmas", d.sigmas},
                   {"epochs", d.epochs},
                   {"learning_rate", d.learning_rate},
                   {"lot_size", d.lot_size},
                   {"clip_norm", d.clip_norm},
                   {"delta", d.delta},
                   {"patient_cap", d.patient_cap}};
  }

  json attacks = json::array();
  for (AttackKind k : c.attack.attacks)
    attacks.push_back(std::string(AttackName(k)));

  return {{"schema_version", c.schema_version},
          {"seed", c.seed},
          {"corpus", corpus},
          {"models", models},
          {"train", train},
          {"attack",
           {{"attacks", attacks},
            {"seeds", c.attack.seeds},
            {"l2", c.attack.hyper.l2},
            {"iterations", c.attack.hyper.iterations},
            {"step", c.attack.hyper.step},
            {"train_fraction", c.attack.train_fraction},
            {"write_features", c.attack.write_features}}},
          {"report",
           {{"n_buckets", c.report.n_buckets},
            {"min_bucket_size", c.report.min_bucket_size},
            {"group_k", c.report.group_k}}},
          {"bench",
           {{"seeds", c.bench.seeds}, {"quick_seeds", c.bench.quick_seeds}}}};
}

absl::StatusOr<ExperimentConfig> LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    return absl::InvalidArgumentError(
        absl::StrCat("cannot open config ", path));
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": malformed JSON (", e.what(), ")"));
  }
  return ExperimentConfigFromJson(j);
}

ExperimentConfig DefaultBenchConfig() {
  ExperimentConfig c;
  c.seed = 1;
  CorpusConfig& s = c.corpus.synthetic;
  s.n_patients = 200;
  s.vocab_size = 256;
  s.note_length = {48, 96};

  ModelConfig base;
  base.n_layers = 2;
  base.n_heads = 2;
  base.model_dim = 48;
  base.ff_dim = 96;
  base.seq_len = 32;
  base.vocab_size = s.vocab_size;
  ModelConfig ar = base;
  ar.objective = Objective::kAr;
  ModelConfig mlm = base;
  mlm.objective = Objective::kMlm;
  c.models = {{"ar", ar}, {"mlm", mlm}};

  // Plain SGD on single samples: attention weights start near a saddle at
  // this init scale and need many small updates to move.
  c.train.learning_rate = 0.15;
  c.train.epochs = 4;
  c.train.batch_size = 1;
  // Lots of 16 keep the smallest noise levels small next to the init scale;
  // with single-sample lots they random-walk the weights off the saddle.
  DpSweep dp;
  dp.sigmas = {1e-4, 1e-2, 1.0, 2.0};
  dp.epochs = 3;
  dp.learning_rate = 0.6;
  dp.lot_size = 16;
  dp.clip_norm = 1.0;
  dp.delta = 1e-6;
  dp.patient_cap = 50;
  c.train.dp = dp;

  c.attack.attacks.assign(AllAttacks().begin(), AllAttacks().end());
  c.attack.seeds = {1};
  c.attack.write_features = true;
  c.report.n_buckets = 5;
  c.report.min_bucket_size = 5;
  c.report.group_k = 50;
  return c;
}

}  // namespace leakaudit
