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

#include "leakaudit/corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "leakaudit/rng.h"
#include "nlohmann/json.hpp"

namespace leakaudit {
namespace {

using json = nlohmann::json;

// One weighted draw per selected item; removed items are skipped.
std::vector<size_t> WeightedSampleWithoutReplacement(
    std::span<const double> weights, int k, Rng& rng) {
  std::vector<bool> taken(weights.size(), false);
  std::vector<size_t> picked;
  for (int draw = 0; draw < k; ++draw) {
    double total = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      if (!taken[i]) total += weights[i];
    }
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    double cumulative = 0.0;
    size_t choice = weights.size();
    size_t last_free = weights.size();
    for (size_t i = 0; i < weights.size(); ++i) {
      if (taken[i]) continue;
      last_free = i;
      cumulative += weights[i];
      if (u < cumulative) {
        choice = i;
        break;
      }
    }
    if (choice == weights.size()) choice = last_free;
    taken[choice] = true;
    picked.push_back(choice);
  }
  return picked;
}

int UniformInt(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::vector<TokenId> RandomPhrase(Rng& rng, int length, TokenId lo,
                                  TokenId hi) {
  std::vector<TokenId> phrase(length);
  for (auto& t : phrase)
    t = std::uniform_int_distribution<TokenId>(lo, hi)(rng);
  return phrase;
}

absl::Status RangeError(std::string_view name, const IntRange& r) {
  return absl::InvalidArgumentError(
      absl::StrCat(std::string(name), " must satisfy 1 <= lo <= hi, got [",
                   r.lo, ", ", r.hi, "]"));
}

}  // namespace

size_t Corpus::NoteCount() const {
  size_t n = 0;
  for (const auto& p : patients)
    for (const auto& a : p.admissions) n += a.notes.size();
  return n;
}

size_t Corpus::TokenCount() const {
  size_t n = 0;
  for (const auto& p : patients)
    for (const auto& a : p.admissions)
      for (const auto& note : a.notes) n += note.tokens.size();
  return n;
}

size_t Corpus::AdmissionCount() const {
  size_t n = 0;
  for (const auto& p : patients) n += p.admissions.size();
  return n;
}

std::vector<std::string> SyntheticCodeNames(int code_universe_size) {
  std::vector<std::string> names;
  names.reserve(code_universe_size);
  for (int i = 0; i < code_universe_size; ++i) {
    names.push_back(absl::StrFormat("C%03d", i));
  }
  return names;
}

Vocabulary::Vocabulary(int vocab_size, std::span<const std::string> codes) {
  words_ = {"[PAD]", "[UNK]", "[MASK]"};
  for (const auto& c : codes) words_.push_back(c);
  first_word_ = static_cast<TokenId>(words_.size());
  for (int id = first_word_; id < vocab_size; ++id) {
    words_.push_back(absl::StrCat("w", id));
  }
  for (size_t i = 0; i < words_.size(); ++i) {
    index_.emplace(words_[i], static_cast<TokenId>(i));
  }
}

TokenId Vocabulary::Lookup(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnkToken : it->second;
}

std::vector<TokenId> Vocabulary::Tokenize(std::string_view text) const {
  std::vector<TokenId> out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) out.push_back(Lookup(word));
  return out;
}

std::string Vocabulary::Detokenize(std::span<const TokenId> tokens) const {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += Word(tokens[i]);
  }
  return out;
}

absl::Status ValidateCorpusConfig(const CorpusConfig& c) {
  if (c.n_patients < 1 || c.code_universe_size < 1 || c.vocab_size < 1 ||
      c.max_profile_size < 1 || c.code_phrase_length < 0 ||
      c.patient_phrase_count < 1 || c.patient_phrase_length < 1 ||
      c.boilerplate_span_count < 1 || c.boilerplate_span_length < 1) {
    return absl::InvalidArgumentError("corpus counts must be >= 1");
  }
  if (c.notes_per_admission.lo < 1 ||
      c.notes_per_admission.hi < c.notes_per_admission.lo) {
    return RangeError("notes_per_admission_range", c.notes_per_admission);
  }
  if (c.admissions_per_patient.lo < 1 ||
      c.admissions_per_patient.hi < c.admissions_per_patient.lo) {
    return RangeError("admissions_per_patient_range", c.admissions_per_patient);
  }
  if (c.note_length.lo < 1 || c.note_length.hi < c.note_length.lo) {
    return RangeError("note_length_range", c.note_length);
  }
  if (!(c.boilerplate_fraction >= 0.0 && c.boilerplate_fraction <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("boilerplate_fraction must lie in [0, 1], got ",
                     c.boilerplate_fraction));
  }
  if (!std::isfinite(c.zipf_exponent) || c.zipf_exponent < 0.0) {
    return absl::InvalidArgumentError("zipf_exponent must be finite and >= 0");
  }
  if (c.vocab_size <= c.code_universe_size + kFirstRegularToken) {
    return absl::InvalidArgumentError(absl::StrCat(
        "vocab_size ", c.vocab_size, " must exceed code_universe_size + ",
        kFirstRegularToken, " reserved tokens"));
  }
  return absl::OkStatus();
}

absl::StatusOr<Corpus> GenerateSyntheticCorpus(const CorpusConfig& config,
                                               uint64_t seed) {
  if (absl::Status s = ValidateCorpusConfig(config); !s.ok()) return s;

  Corpus corpus;
  corpus.vocab_size = config.vocab_size;
  corpus.code_universe = SyntheticCodeNames(config.code_universe_size);
  const Vocabulary vocab(config.vocab_size, corpus.code_universe);
  const TokenId word_lo = vocab.FirstWordToken();
  const TokenId word_hi = config.vocab_size - 1;

  Rng lexicon = MakeStream(seed, "lexicon");
  std::vector<std::vector<TokenId>> boilerplate;
  for (int i = 0; i < config.boilerplate_span_count; ++i) {
    boilerplate.push_back(RandomPhrase(lexicon, config.boilerplate_span_length,
                                       word_lo, word_hi));
  }
  std::vector<std::vector<TokenId>> code_phrases;
  for (int c = 0; c < config.code_universe_size; ++c) {
    std::vector<TokenId> phrase{vocab.CodeToken(c)};
    const auto tail =
        RandomPhrase(lexicon, config.code_phrase_length, word_lo, word_hi);
    phrase.insert(phrase.end(), tail.begin(), tail.end());
    code_phrases.push_back(std::move(phrase));
  }

  std::vector<double> zipf(config.code_universe_size);
  for (int r = 0; r < config.code_universe_size; ++r) {
    zipf[r] = 1.0 / std::pow(static_cast<double>(r + 1), config.zipf_exponent);
  }
  const int max_profile =
      std::min(config.max_profile_size, config.code_universe_size);

  Rng profiles = MakeStream(seed, "profiles");
  Rng text = MakeStream(seed, "text");
  const double code_cut =
      config.boilerplate_fraction + 0.5 * (1.0 - config.boilerplate_fraction);

  for (int p = 0; p < config.n_patients; ++p) {
    Patient patient;
    patient.patient_id = absl::StrFormat("P%04d", p);
    const int profile_size = UniformInt(profiles, 1, max_profile);
    std::vector<size_t> codes =
        WeightedSampleWithoutReplacement(zipf, profile_size, profiles);
    std::sort(codes.begin(), codes.end());
    for (size_t c : codes) patient.profile.push_back(corpus.code_universe[c]);

    std::vector<std::vector<TokenId>> own_phrases;
    for (int i = 0; i < config.patient_phrase_count; ++i) {
      own_phrases.push_back(
          RandomPhrase(text, config.patient_phrase_length, word_lo, word_hi));
    }

    const int n_adm = UniformInt(text, config.admissions_per_patient.lo,
                                 config.admissions_per_patient.hi);
    for (int a = 0; a < n_adm; ++a) {
      const int n_notes = UniformInt(text, config.notes_per_admission.lo,
                                     config.notes_per_admission.hi);
      std::vector<Note> notes;
      for (int n = 0; n < n_notes; ++n) {
        Note note;
        note.note_id =
            absl::StrFormat("%s-A%02d-N%02d", patient.patient_id, a, n);
        const int length =
            UniformInt(text, config.note_length.lo, config.note_length.hi);
        while (static_cast<int>(note.tokens.size()) < length) {
          const double u =
              std::uniform_real_distribution<double>(0.0, 1.0)(text);
          const std::vector<TokenId>* segment;
          if (u < config.boilerplate_fraction) {
            segment = &boilerplate[UniformInt(
                text, 0, static_cast<int>(boilerplate.size()) - 1)];
          } else if (u < code_cut) {
            segment = &code_phrases[codes[UniformInt(
                text, 0, static_cast<int>(codes.size()) - 1)]];
          } else {
            segment = &own_phrases[UniformInt(
                text, 0, static_cast<int>(own_phrases.size()) - 1)];
          }
          note.tokens.insert(note.tokens.end(), segment->begin(),
                             segment->end());
        }
        note.tokens.resize(length);
        notes.push_back(std::move(note));
      }
      if (config.one_note_per_admission) {
        for (auto& note : notes) {
          Admission adm;
          adm.admission_id = absl::StrCat(note.note_id, "-E");
          adm.notes.push_back(std::move(note));
          patient.admissions.push_back(std::move(adm));
        }
      } else {
        Admission adm;
        adm.admission_id = absl::StrFormat("%s-A%02d", patient.patient_id, a);
        adm.notes = std::move(notes);
        patient.admissions.push_back(std::move(adm));
      }
    }
    corpus.patients.push_back(std::move(patient));
  }
  return corpus;
}

absl::StatusOr<Corpus> IngestJsonl(const std::string& path,
                                   const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));

  Corpus corpus;
  corpus.vocab_size = vocab.size();
  std::unordered_map<std::string, size_t> patient_index;
  std::vector<std::set<std::string>> profiles;
  std::vector<std::unordered_set<std::string>> note_ids;
  std::set<std::string> universe;

  std::string line;
  int line_no = 0;
  int records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto bad = [&](std::string_view why) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", line_no, ": ", std::string(why)));
    };
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      return bad(absl::StrCat("malformed JSON (", e.what(), ")"));
    }
    if (!rec.is_object()) return bad("record is not an object");
    for (const char* key : {"patient_id", "admission_id", "note_id"}) {
      if (!rec.contains(key) || !rec[key].is_string()) {
        return bad(absl::StrCat("missing string field '", key, "'"));
      }
    }
    if (!rec.contains("codes") || !rec["codes"].is_array()) {
      return bad("missing array field 'codes'");
    }
    Note note;
    note.note_id = rec["note_id"].get<std::string>();
    if (rec.contains("tokens")) {
      if (!rec["tokens"].is_array()) return bad("'tokens' must be an array");
      for (const auto& t : rec["tokens"]) {
        if (!t.is_number_integer()) return bad("token ids must be integers");
        const auto id = t.get<int64_t>();
        if (id < 0 || id >= vocab.size()) {
          return bad(absl::StrCat("token id ", id, " outside [0, ",
                                  vocab.size(), ")"));
        }
        note.tokens.push_back(static_cast<TokenId>(id));
      }
    } else if (rec.contains("text") && rec["text"].is_string()) {
      note.tokens = vocab.Tokenize(rec["text"].get<std::string>());
    } else {
      return bad("record needs 'tokens' or 'text'");
    }
    if (note.tokens.empty()) return bad("note has no tokens");

    const auto pid = rec["patient_id"].get<std::string>();
    auto [it, inserted] = patient_index.emplace(pid, corpus.patients.size());
    if (inserted) {
      corpus.patients.push_back(Patient{pid, {}, {}});
      profiles.emplace_back();
      note_ids.emplace_back();
    }
    const size_t pi = it->second;
    for (const auto& c : rec["codes"]) {
      if (!c.is_string()) return bad("codes must be strings");
      profiles[pi].insert(c.get<std::string>());
      universe.insert(c.get<std::string>());
    }
    if (!note_ids[pi].insert(note.note_id).second) {
      return bad(absl::StrCat("duplicate note_id '", note.note_id,
                              "' for patient '", pid, "'"));
    }
    Patient& patient = corpus.patients[pi];
    const auto aid = rec["admission_id"].get<std::string>();
    auto adm =
        std::find_if(patient.admissions.begin(), patient.admissions.end(),
                     [&](const Admission& a) { return a.admission_id == aid; });
    if (adm == patient.admissions.end()) {
      patient.admissions.push_back(Admission{aid, {}});
      adm = std::prev(patient.admissions.end());
    }
    adm->notes.push_back(std::move(note));
    ++records;
  }
  if (records == 0) return absl::InvalidArgumentError("no records");
  for (size_t i = 0; i < corpus.patients.size(); ++i) {
    if (profiles[i].empty()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "patient '", corpus.patients[i].patient_id, "' has no codes"));
    }
    corpus.patients[i].profile.assign(profiles[i].begin(), profiles[i].end());
  }
  corpus.code_universe.assign(universe.begin(), universe.end());
  return corpus;
}

absl::Status WriteCorpusJsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  for (const auto& p : corpus.patients) {
    for (const auto& a : p.admissions) {
      for (const auto& n : a.notes) {
        json rec = {{"patient_id", p.patient_id},
                    {"admission_id", a.admission_id},
                    {"note_id", n.note_id},
                    {"tokens", n.tokens},
                    {"codes", p.profile}};
        out << rec.dump() << '\n';
      }
    }
  }
  out.flush();
  if (!out) return absl::DataLossError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

absl::StatusOr<CorpusSplit> SplitByPatient(const Corpus& corpus, double ratio,
                                           uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("split ratio must lie in (0, 1), got ", ratio));
  }
  const size_t n = corpus.patients.size();
  if (n < 2) {
    return absl::InvalidArgumentError("need at least 2 patients to split");
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = MakeStream(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);
  auto n_train =
      static_cast<size_t>(std::llround(ratio * static_cast<double>(n)));
  n_train = std::clamp<size_t>(n_train, 1, n - 1);

  std::vector<bool> is_train(n, false);
  for (size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;
  CorpusSplit split;
  split.seed = seed;
  split.ratio = ratio;
  for (size_t i = 0; i < n; ++i) {
    (is_train[i] ? split.train_patients : split.test_patients)
        .push_back(corpus.patients[i].patient_id);
  }
  return split;
}

absl::Status WriteSplitManifest(const CorpusSplit& split,
                                const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  json j = {{"train", split.train_patients},
            {"test", split.test_patients},
            {"seed", split.seed},
            {"ratio", split.ratio}};
  out << j.dump(2) << '\n';
  if (!out) return absl::DataLossError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

absl::StatusOr<CorpusSplit> ReadSplitManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  try {
    json j = json::parse(in);
    CorpusSplit split;
    split.train_patients = j.at("train").get<std::vector<std::string>>();
    split.test_patients = j.at("test").get<std::vector<std::string>>();
    split.seed = j.at("seed").get<uint64_t>();
    split.ratio = j.at("ratio").get<double>();
    return split;
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("bad split manifest ", path, ": ", e.what()));
  }
}

Corpus SelectPatients(const Corpus& corpus, std::span<const std::string> ids) {
  const std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  Corpus out;
  out.vocab_size = corpus.vocab_size;
  out.code_universe = corpus.code_universe;
  for (const auto& p : corpus.patients) {
    if (wanted.contains(p.patient_id)) out.patients.push_back(p);
  }
  return out;
}

std::string_view SideName(Side side) {
  return side == Side::kTrain ? "train" : "test";
}

std::string Sample::SampleId() const {
  return absl::StrCat(note_id, "/", chunk);
}

std::vector<Sample> MakeSamples(const Corpus& corpus, int seq_len, Side side) {
  std::vector<Sample> samples;
  for (const auto& p : corpus.patients) {
    for (const auto& a : p.admissions) {
      for (const auto& n : a.notes) {
        const size_t len = n.tokens.size();
        int chunk = 0;
        for (size_t start = 0; start < len; start += seq_len, ++chunk) {
          Sample s;
          const size_t end = std::min(len, start + seq_len);
          s.tokens.assign(n.tokens.begin() + start, n.tokens.begin() + end);
          s.tokens.resize(seq_len, kPadToken);
          s.patient_id = p.patient_id;
          s.admission_id = a.admission_id;
          s.note_id = n.note_id;
          s.chunk = chunk;
          s.side = side;
          samples.push_back(std::move(s));
        }
      }
    }
  }
  return samples;
}

std::vector<Sample> CapPatientSamples(std::span<const Sample> samples, int k,
                                      uint64_t seed) {
  // Patients in first-appearance order so the RNG stream use is stable.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<size_t>> by_patient;
  for (size_t i = 0; i < samples.size(); ++i) {
    auto [it, inserted] = by_patient.try_emplace(samples[i].patient_id);
    if (inserted) order.push_back(samples[i].patient_id);
    it->second.push_back(i);
  }
  Rng rng = MakeStream(seed, "patient_cap");
  std::vector<bool> keep(samples.size(), false);
  for (const auto& pid : order) {
    std::vector<size_t>& idx = by_patient[pid];
    if (static_cast<int>(idx.size()) > k) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(k);
    }
    for (size_t i : idx) keep[i] = true;
  }
  std::vector<Sample> out;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (keep[i]) out.push_back(samples[i]);
  }
  return out;
}

DiseaseStats CodeProbabilityMle(const Corpus& corpus) {
  DiseaseStats stats;
  stats.total_patients = static_cast<int>(corpus.patients.size());
  std::map<std::string, int> counts;
  for (const auto& p : corpus.patients) {
    for (const auto& c : p.profile) ++counts[c];
  }
  for (const auto& [code, count] : counts) {
    stats.per_code_prob[code] =
        static_cast<double>(count) / static_cast<double>(stats.total_patients);
  }
  return stats;
}

absl::StatusOr<ProfileProbability> ComputeProfileProbability(
    std::span<const std::string> profile, const DiseaseStats& stats) {
  const std::set<std::string> mine(profile.begin(), profile.end());
  for (const auto& c : mine) {
    if (!stats.per_code_prob.contains(c)) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown code '", c, "' in profile"));
    }
  }
  double log_prob = 0.0;
  for (const auto& [code, p] : stats.per_code_prob) {
    const double q = mine.contains(code) ? p : 1.0 - p;
    log_prob += std::log(q);  // -inf when q == 0
  }
  return ProfileProbability{log_prob, std::exp(log_prob)};
}

absl::StatusOr<std::vector<RarityBucket>> BucketByLogProbability(
    std::span<const Patient> patients, const DiseaseStats& stats, int n_buckets,
    int min_size) {
  if (n_buckets < 1) {
    return absl::InvalidArgumentError("n_buckets must be >= 1");
  }
  if (patients.empty()) {
    return absl::InvalidArgumentError("no patients to bucket");
  }
  std::vector<double> log_probs;
  log_probs.reserve(patients.size());
  for (const auto& p : patients) {
    auto pp = ComputeProfileProbability(p.profile, stats);
    if (!pp.ok()) return pp.status();
    if (!std::isfinite(pp->log_prob)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "patient '", p.patient_id, "' has zero profile probability"));
    }
    log_probs.push_back(pp->log_prob);
  }
  const auto [min_it, max_it] =
      std::minmax_element(log_probs.begin(), log_probs.end());
  const double lo = *min_it;
  const double hi = *max_it;

  std::vector<RarityBucket> buckets;
  if (hi == lo) {
    RarityBucket only{0, lo, hi, {}};
    for (const auto& p : patients)
      only.member_patient_ids.push_back(p.patient_id);
    if (static_cast<int>(only.member_patient_ids.size()) >= min_size) {
      buckets.push_back(std::move(only));
    }
    return buckets;
  }
  const double width = (hi - lo) / n_buckets;
  std::vector<RarityBucket> all(n_buckets);
  for (int b = 0; b < n_buckets; ++b) {
    all[b].bucket_index = b;
    all[b].log_prob_lo = lo + b * width;
    all[b].log_prob_hi = b + 1 == n_buckets ? hi : lo + (b + 1) * width;
  }
  for (size_t i = 0; i < patients.size(); ++i) {
    const double normalized = (log_probs[i] - lo) / (hi - lo);
    const int b = std::min(static_cast<int>(std::floor(normalized * n_buckets)),
                           n_buckets - 1);
    all[b].member_patient_ids.push_back(patients[i].patient_id);
  }
  for (auto& b : all) {
    if (static_cast<int>(b.member_patient_ids.size()) >= min_size) {
      buckets.push_back(std::move(b));
    }
  }
  return buckets;
}

}  // namespace leakaudit
