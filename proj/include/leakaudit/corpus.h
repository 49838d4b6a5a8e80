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

// Hierarchical patient -> admission -> note corpora, patient-disjoint splits,
// fixed-length samples and disease-profile rarity statistics.

#ifndef LEAKAUDIT_CORPUS_H_
#define LEAKAUDIT_CORPUS_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace leakaudit {

using TokenId = int32_t;

inline constexpr TokenId kPadToken = 0;
inline constexpr TokenId kUnkToken = 1;
inline constexpr TokenId kMaskToken = 2;
inline constexpr TokenId kFirstRegularToken = 3;

struct Note {
  std::string note_id;
  std::vector<TokenId> tokens;
};

struct Admission {
  std::string admission_id;
  std::vector<Note> notes;
};

struct Patient {
  std::string patient_id;
  // Sorted, unique disease codes.
  std::vector<std::string> profile;
  std::vector<Admission> admissions;
};

struct Corpus {
  int vocab_size = 0;
  // Every code known to the corpus, sorted.
  std::vector<std::string> code_universe;
  std::vector<Patient> patients;

  size_t NoteCount() const;
  size_t TokenCount() const;
  size_t AdmissionCount() const;
};

// Closed vocabulary used by the whitespace tokenizer. Ids 0..2 are the
// reserved PAD/UNK/MASK tokens, then one token per disease code (spelled as
// the code itself), then generic words spelled "w<id>".
class Vocabulary {
 public:
  Vocabulary(int vocab_size, std::span<const std::string> codes);

  int size() const { return static_cast<int>(words_.size()); }
  TokenId CodeToken(size_t code_index) const {
    return kFirstRegularToken + static_cast<TokenId>(code_index);
  }
  TokenId FirstWordToken() const { return first_word_; }
  TokenId Lookup(std::string_view word) const;
  const std::string& Word(TokenId id) const { return words_.at(id); }

  std::vector<TokenId> Tokenize(std::string_view text) const;
  std::string Detokenize(std::span<const TokenId> tokens) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId first_word_;
};

// Synthetic vocabulary layout shared by generator and ingestion: code ids are
// "C000", "C001", ...
std::vector<std::string> SyntheticCodeNames(int code_universe_size);

struct IntRange {
  int lo = 1;
  int hi = 1;
};

struct CorpusConfig {
  int n_patients = 200;
  int code_universe_size = 40;
  double zipf_exponent = 1.2;
  IntRange notes_per_admission{1, 2};
  IntRange admissions_per_patient{1, 3};
  IntRange note_length{48, 96};
  int vocab_size = 256;
  double boilerplate_fraction = 0.3;
  int max_profile_size = 5;
  // Each note becomes an admission of its own (no visit structure).
  bool one_note_per_admission = false;
  int code_phrase_length = 3;
  int patient_phrase_count = 2;
  int patient_phrase_length = 4;
  int boilerplate_span_count = 6;
  int boilerplate_span_length = 8;
};

absl::Status ValidateCorpusConfig(const CorpusConfig& config);

// Deterministic in (config, seed). Profiles come from the "profiles" substream:
// per patient, a size drawn uniformly from 1..max_profile_size (capped at the
// universe size), then codes drawn without replacement with Zipf weights
// 1 / (rank + 1)^zipf_exponent.
absl::StatusOr<Corpus> GenerateSyntheticCorpus(const CorpusConfig& config,
                                               uint64_t seed);

// One JSON object per note: patient_id, admission_id, note_id, tokens (ints)
// or text (whitespace-tokenized against `vocab`), codes.
absl::StatusOr<Corpus> IngestJsonl(const std::string& path,
                                   const Vocabulary& vocab);
absl::Status WriteCorpusJsonl(const Corpus& corpus, const std::string& path);

struct CorpusSplit {
  std::vector<std::string> train_patients;
  std::vector<std::string> test_patients;
  uint64_t seed = 0;
  double ratio = 0.0;
};

// Patient-disjoint split; the train side gets round(ratio * N) patients
// (clamped so both sides are non-empty).
absl::StatusOr<CorpusSplit> SplitByPatient(const Corpus& corpus, double ratio,
                                           uint64_t seed);

absl::Status WriteSplitManifest(const CorpusSplit& split,
                                const std::string& path);
absl::StatusOr<CorpusSplit> ReadSplitManifest(const std::string& path);

// Sub-corpus holding only the listed patients, in corpus order.
Corpus SelectPatients(const Corpus& corpus, std::span<const std::string> ids);

enum class Side { kTrain, kTest };

std::string_view SideName(Side side);

struct Sample {
  std::vector<TokenId> tokens;
  std::string patient_id;
  std::string admission_id;
  std::string note_id;
  int chunk = 0;
  Side side = Side::kTrain;

  std::string SampleId() const;
};

// Chunks every note into consecutive non-overlapping windows of `seq_len`
// tokens, padding the final short window with PAD.
std::vector<Sample> MakeSamples(const Corpus& corpus, int seq_len, Side side);

// Keeps at most `k` samples per patient, chosen uniformly without
// replacement. Retained samples keep their input order.
std::vector<Sample> CapPatientSamples(std::span<const Sample> samples, int k,
                                      uint64_t seed);

struct DiseaseStats {
  int total_patients = 0;
  // Maximum likelihood estimate of each observed code.
  std::map<std::string, double> per_code_prob;
};

DiseaseStats CodeProbabilityMle(const Corpus& corpus);

struct ProfileProbability {
  double log_prob = 0.0;
  double prob = 0.0;
};

// Independent-codes likelihood of a profile: product of p(c) over the profile
// times product of 1 - p(c) over every other code in `stats`.
absl::StatusOr<ProfileProbability> ComputeProfileProbability(
    std::span<const std::string> profile, const DiseaseStats& stats);

struct RarityBucket {
  int bucket_index = 0;
  // Range in (natural) log-probability units; the last bucket is closed.
  double log_prob_lo = 0.0;
  double log_prob_hi = 0.0;
  std::vector<std::string> member_patient_ids;
};

// Min-max normalizes the patients' profile log-probabilities to [0, 1] and
// assigns them to `n_buckets` equal-width intervals. Buckets with fewer than
// `min_size` members are dropped from the result. If every patient has the
// same log-probability a single bucket is produced.
absl::StatusOr<std::vector<RarityBucket>> BucketByLogProbability(
    std::span<const Patient> patients, const DiseaseStats& stats, int n_buckets,
    int min_size);

}  // namespace leakaudit

#endif  // LEAKAUDIT_CORPUS_H_
