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

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "absl/strings/str_format.h"
#include "leakaudit/rng.h"
#include "testing/status_matchers.h"

namespace leakaudit {
namespace {

using ::leakaudit::testing::StatusIs;
using ::testing::ElementsAre;
using ::testing::HasSubstr;

std::string TempPath(const std::string& name) {
  return (std::filesystem::path(::testing::TempDir()) / name).string();
}

void WriteLines(const std::string& path,
                const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& l : lines) out << l << '\n';
}

CorpusConfig SmallConfig() {
  CorpusConfig c;
  c.n_patients = 20;
  c.code_universe_size = 10;
  c.vocab_size = 128;
  c.note_length = {20, 40};
  return c;
}

TEST(GenerateTest, MinimalCorpus) {
  CorpusConfig c = SmallConfig();
  c.n_patients = 1;
  c.admissions_per_patient = {1, 1};
  c.notes_per_admission = {1, 1};
  LA_ASSERT_OK_AND_ASSIGN(Corpus corpus, GenerateSyntheticCorpus(c, 1));
  ASSERT_EQ(corpus.patients.size(), 1u);
  EXPECT_EQ(corpus.NoteCount(), 1u);
  EXPECT_FALSE(corpus.patients[0].profile.empty());
}

TEST(GenerateTest, SameSeedIsByteIdentical) {
  const CorpusConfig c = SmallConfig();
  LA_ASSERT_OK_AND_ASSIGN(Corpus a, GenerateSyntheticCorpus(c, 42));
  LA_ASSERT_OK_AND_ASSIGN(Corpus b, GenerateSyntheticCorpus(c, 42));
  const std::string pa = TempPath("a.jsonl"), pb = TempPath("b.jsonl");
  LA_ASSERT_OK(WriteCorpusJsonl(a, pa));
  LA_ASSERT_OK(WriteCorpusJsonl(b, pb));
  std::ifstream fa(pa), fb(pb);
  const std::string sa((std::istreambuf_iterator<char>(fa)), {});
  const std::string sb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_FALSE(sa.empty());
  EXPECT_EQ(sa, sb);
  LA_ASSERT_OK_AND_ASSIGN(Corpus other, GenerateSyntheticCorpus(c, 43));
  EXPECT_NE(other.patients[0].admissions[0].notes[0].tokens,
            a.patients[0].admissions[0].notes[0].tokens);
}

// Reference draw of the profiles: inverse-CDF lookup over the remaining
// weights, consuming the same substream.
std::map<std::string, int> ReferenceCodeCounts(const CorpusConfig& c,
                                               uint64_t seed) {
  std::vector<std::string> names = SyntheticCodeNames(c.code_universe_size);
  Rng rng = MakeStream(seed, "profiles");
  std::map<std::string, int> counts;
  const int max_size = std::min(c.max_profile_size, c.code_universe_size);
  for (int p = 0; p < c.n_patients; ++p) {
    const int size = std::uniform_int_distribution<int>(1, max_size)(rng);
    std::vector<int> remaining(c.code_universe_size);
    std::iota(remaining.begin(), remaining.end(), 0);
    for (int k = 0; k < size; ++k) {
      std::vector<double> cdf;
      double acc = 0.0;
      for (int r : remaining) {
        acc += std::pow(r + 1.0, -c.zipf_exponent);
        cdf.push_back(acc);
      }
      const double u = std::uniform_real_distribution<double>(0.0, acc)(rng);
      size_t at = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
      at = std::min(at, remaining.size() - 1);
      ++counts[names[remaining[at]]];
      remaining.erase(remaining.begin() + at);
    }
  }
  return counts;
}

TEST(GenerateTest, ZipfProfilesMatchReferenceSampler) {
  CorpusConfig c;
  c.n_patients = 200;
  c.zipf_exponent = 1.2;
  LA_ASSERT_OK_AND_ASSIGN(Corpus corpus, GenerateSyntheticCorpus(c, 7));
  std::map<std::string, int> counts;
  for (const auto& p : corpus.patients) {
    EXPECT_GE(p.profile.size(), 1u);
    EXPECT_LE(p.profile.size(), 5u);
    EXPECT_TRUE(std::is_sorted(p.profile.begin(), p.profile.end()));
    for (const auto& code : p.profile) ++counts[code];
  }
  EXPECT_EQ(counts, ReferenceCodeCounts(c, 7));
  // Head codes dominate the tail.
  EXPECT_GT(counts["C000"], counts["C020"]);
}

TEST(GenerateTest, NotesMixProfileCodesAndBoilerplate) {
  CorpusConfig c = SmallConfig();
  c.boilerplate_fraction = 0.5;
  LA_ASSERT_OK_AND_ASSIGN(Corpus corpus, GenerateSyntheticCorpus(c, 3));
  const Vocabulary vocab(c.vocab_size, corpus.code_universe);
  int with_own_code = 0;
  for (const auto& p : corpus.patients) {
    std::set<TokenId> own;
    for (const auto& code : p.profile) own.insert(vocab.Lookup(code));
    bool seen = false;
    for (const auto& a : p.admissions) {
      for (const auto& n : a.notes) {
        EXPECT_GE(n.tokens.size(), 20u);
        EXPECT_LE(n.tokens.size(), 40u);
        for (TokenId t : n.tokens) {
          EXPECT_GE(t, kFirstRegularToken);
          EXPECT_LT(t, c.vocab_size);
          seen = seen || own.contains(t);
        }
      }
    }
    with_own_code += seen ? 1 : 0;
  }
  EXPECT_GE(with_own_code, 15);
}

TEST(GenerateTest, UmmModeHasOneNotePerAdmission) {
  CorpusConfig c = SmallConfig();
  c.one_note_per_admission = true;
  c.notes_per_admission = {1, 3};
  LA_ASSERT_OK_AND_ASSIGN(Corpus corpus, GenerateSyntheticCorpus(c, 5));
  EXPECT_EQ(corpus.NoteCount(), corpus.AdmissionCount());
}

TEST(GenerateTest, RejectsInvalidConfig) {
  CorpusConfig c = SmallConfig();
  c.n_patients = 0;
  EXPECT_FALSE(GenerateSyntheticCorpus(c, 1).ok());
  c = SmallConfig();
  c.boilerplate_fraction = 1.5;
  EXPECT_THAT(GenerateSyntheticCorpus(c, 1),
              StatusIs(absl::StatusCode::kInvalidArgument,
                       HasSubstr("boilerplate_fraction")));
  c = SmallConfig();
  c.vocab_size = c.code_universe_size + 3;
  EXPECT_FALSE(GenerateSyntheticCorpus(c, 1).ok());
}

TEST(IngestTest, EmptyFileHasNoRecords) {
  const std::string path = TempPath("empty.jsonl");
  WriteLines(path, {});
  const Vocabulary vocab(64, std::vector<std::string>{"C1"});
  EXPECT_THAT(
      IngestJsonl(path, vocab),
      StatusIs(absl::StatusCode::kInvalidArgument, HasSubstr("no records")));
}

TEST(IngestTest, GroupsAdmissionsUnderPatient) {
  const std::string path = TempPath("two.jsonl");
  WriteLines(
      path,
      {
          R"({"patient_id":"p","admission_id":"a1","note_id":"n1","tokens":[5,6],"codes":["C1"]})",
          R"({"patient_id":"p","admission_id":"a2","note_id":"n2","text":"C2 w9 zzz","codes":["C2"]})",
      });
  const Vocabulary vocab(64, std::vector<std::string>{"C1", "C2"});
  LA_ASSERT_OK_AND_ASSIGN(Corpus corpus, IngestJsonl(path, vocab));
  ASSERT_EQ(corpus.patients.size(), 1u);
  EXPECT_EQ(corpus.patients[0].admissions.size(), 2u);
  EXPECT_THAT(corpus.patients[0].profile, ElementsAre("C1", "C2"));
  const auto& tokens = corpus.patients[0].admissions[1].notes[0].tokens;
  ASSERT_EQ(tokens.size(), 3u);
  EXPECT_EQ(tokens[0], vocab.Lookup("C2"));
  EXPECT_EQ(tokens[2], kUnkToken);
}

TEST(IngestTest, MalformedLineIsNamed) {
  std::vector<std::string> lines;
  for (int i = 0; i < 10; ++i) {
    lines.push_back(absl::StrFormat(
        R"({"patient_id":"p%d","admission_id":"a","note_id":"n","tokens":[4],"codes":["C1"]})",
        i));
  }
  lines[6] = R"({"patient_id": "p6", broken)";
  const std::string path = TempPath("bad.jsonl");
  WriteLines(path, lines);
  const Vocabulary vocab(64, std::vector<std::string>{"C1"});
  EXPECT_THAT(IngestJsonl(path, vocab),
              StatusIs(absl::StatusCode::kInvalidArgument,
                       AllOf(HasSubstr(":7:"), HasSubstr("malformed"))));
}

TEST(IngestTest, DuplicateNoteIdRejected) {
  const std::string path = TempPath("dup.jsonl");
  WriteLines(
      path,
      {
          R"({"patient_id":"p","admission_id":"a1","note_id":"n1","tokens":[5],"codes":["C1"]})",
          R"({"patient_id":"p","admission_id":"a2","note_id":"n1","tokens":[6],"codes":["C1"]})",
      });
  const Vocabulary vocab(64, std::vector<std::string>{"C1"});
  EXPECT_THAT(
      IngestJsonl(path, vocab),
      StatusIs(absl::StatusCode::kInvalidArgument, HasSubstr("duplicate")));
}

TEST(IngestTest, RoundTripsGeneratedCorpus) {
  const CorpusConfig c = SmallConfig();
  LA_ASSERT_OK_AND_ASSIGN(Corpus corpus, GenerateSyntheticCorpus(c, 9));
  const std::string path = TempPath("rt.jsonl");
  LA_ASSERT_OK(WriteCorpusJsonl(corpus, path));
  const Vocabulary vocab(c.vocab_size, corpus.code_universe);
  LA_ASSERT_OK_AND_ASSIGN(Corpus back, IngestJsonl(path, vocab));
  ASSERT_EQ(back.patients.size(), corpus.patients.size());
  for (size_t i = 0; i < back.patients.size(); ++i) {
    EXPECT_EQ(back.patients[i].patient_id, corpus.patients[i].patient_id);
    EXPECT_EQ(back.patients[i].profile, corpus.patients[i].profile);
    EXPECT_EQ(back.patients[i].admissions.size(),
              corpus.patients[i].admissions.size());
  }
  EXPECT_EQ(back.TokenCount(), corpus.TokenCount());
}

Corpus NamedPatients(int n) {
  Corpus corpus;
  corpus.vocab_size = 16;
  for (int i = 0; i < n; ++i) {
    corpus.patients.push_back(
        Patient{absl::StrFormat("p%02d", i), {"C"}, {{"a", {{"n", {4, 5}}}}}});
  }
  return corpus;
}

TEST(SplitTest, RoundsToNearestAndIsDisjoint) {
  const Corpus corpus = NamedPatients(10);
  LA_ASSERT_OK_AND_ASSIGN(CorpusSplit split, SplitByPatient(corpus, 0.7, 3));
  EXPECT_EQ(split.train_patients.size(), 7u);
  EXPECT_EQ(split.test_patients.size(), 3u);
  std::set<std::string> train(split.train_patients.begin(),
                              split.train_patients.end());
  for (const auto& p : split.test_patients) EXPECT_FALSE(train.contains(p));
  LA_ASSERT_OK_AND_ASSIGN(CorpusSplit again, SplitByPatient(corpus, 0.7, 3));
  EXPECT_EQ(again.train_patients, split.train_patients);
}

TEST(SplitTest, Errors) {
  EXPECT_FALSE(SplitByPatient(NamedPatients(1), 0.7, 1).ok());
  EXPECT_FALSE(SplitByPatient(NamedPatients(5), 1.0, 1).ok());
  EXPECT_FALSE(SplitByPatient(NamedPatients(5), 0.0, 1).ok());
}

TEST(SplitTest, ManifestRoundTrip) {
  LA_ASSERT_OK_AND_ASSIGN(CorpusSplit split,
                          SplitByPatient(NamedPatients(12), 0.7, 8));
  const std::string path = TempPath("split.json");
  LA_ASSERT_OK(WriteSplitManifest(split, path));
  LA_ASSERT_OK_AND_ASSIGN(CorpusSplit back, ReadSplitManifest(path));
  EXPECT_EQ(back.train_patients, split.train_patients);
  EXPECT_EQ(back.test_patients, split.test_patients);
  EXPECT_EQ(back.seed, 8u);
}

Corpus OneNote(size_t length) {
  Corpus corpus = NamedPatients(1);
  corpus.patients[0].admissions[0].notes[0].tokens.assign(length, 7);
  return corpus;
}

TEST(SamplesTest, ChunkingAndPadding) {
  EXPECT_EQ(MakeSamples(OneNote(16), 8, Side::kTrain).size(), 2u);
  const auto samples = MakeSamples(OneNote(9), 8, Side::kTest);
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_EQ(samples[1].tokens[0], 7);
  EXPECT_EQ(
      std::count(samples[1].tokens.begin(), samples[1].tokens.end(), kPadToken),
      7);
  EXPECT_EQ(samples[1].side, Side::kTest);
  EXPECT_EQ(samples[1].SampleId(), "n/1");
  EXPECT_TRUE(MakeSamples(Corpus{}, 8, Side::kTrain).empty());
}

TEST(SamplesTest, CountMatchesCeilSum) {
  LA_ASSERT_OK_AND_ASSIGN(Corpus corpus,
                          GenerateSyntheticCorpus(SmallConfig(), 4));
  size_t expected = 0;
  for (const auto& p : corpus.patients) {
    for (const auto& a : p.admissions) {
      for (const auto& n : a.notes) expected += (n.tokens.size() + 15) / 16;
    }
  }
  EXPECT_EQ(MakeSamples(corpus, 16, Side::kTrain).size(), expected);
}

std::vector<Sample> PatientSamples(const std::string& pid, int n) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(Sample{{TokenId(3 + i % 5)}, pid, "a", "n", i, Side::kTrain});
  }
  return out;
}

TEST(CapTest, SmallPatientsUnchangedLargeCapped) {
  auto samples = PatientSamples("small", 3);
  const auto big = PatientSamples("big", 120);
  samples.insert(samples.end(), big.begin(), big.end());
  const auto capped = CapPatientSamples(samples, 50, 11);
  std::map<std::string, int> per;
  std::set<int> big_chunks;
  int last_chunk = -1;
  for (const auto& s : capped) {
    ++per[s.patient_id];
    if (s.patient_id == "big") {
      EXPECT_GT(s.chunk, last_chunk);  // input order kept
      last_chunk = s.chunk;
      EXPECT_TRUE(big_chunks.insert(s.chunk).second);  // no duplicates
    }
  }
  EXPECT_EQ(per["small"], 3);
  EXPECT_EQ(per["big"], 50);
  EXPECT_EQ(CapPatientSamples(samples, 50, 11).size(), capped.size());
}

TEST(CapTest, SelectionIsRoughlyUniform) {
  const auto samples = PatientSamples("p", 10);
  std::vector<int> hits(10, 0);
  for (uint64_t seed = 0; seed < 2000; ++seed) {
    for (const auto& s : CapPatientSamples(samples, 5, seed)) ++hits[s.chunk];
  }
  // Each chunk is kept with probability 1/2.
  for (int h : hits) EXPECT_NEAR(h / 2000.0, 0.5, 0.05);
}

Corpus ProfileCorpus(const std::vector<std::vector<std::string>>& profiles) {
  Corpus corpus;
  for (size_t i = 0; i < profiles.size(); ++i) {
    corpus.patients.push_back(
        Patient{absl::StrFormat("p%03d", i), profiles[i], {}});
  }
  return corpus;
}

TEST(MleTest, Counting) {
  std::vector<std::vector<std::string>> profiles(10, {"all"});
  for (int i = 0; i < 3; ++i) profiles[i].push_back("c");
  const DiseaseStats stats = CodeProbabilityMle(ProfileCorpus(profiles));
  EXPECT_EQ(stats.total_patients, 10);
  EXPECT_DOUBLE_EQ(stats.per_code_prob.at("c"), 0.3);
  EXPECT_EQ(stats.per_code_prob.at("all"), 1.0);
}

TEST(MleTest, MatchesBruteForceScan) {
  LA_ASSERT_OK_AND_ASSIGN(Corpus corpus,
                          GenerateSyntheticCorpus(CorpusConfig{}, 2));
  const DiseaseStats stats = CodeProbabilityMle(corpus);
  for (const auto& code : corpus.code_universe) {
    int n = 0;
    for (const auto& p : corpus.patients) {
      n +=
          std::find(p.profile.begin(), p.profile.end(), code) != p.profile.end()
              ? 1
              : 0;
    }
    if (n == 0) {
      EXPECT_FALSE(stats.per_code_prob.contains(code));
    } else {
      EXPECT_EQ(stats.per_code_prob.at(code), n / 200.0) << code;
    }
  }
}

TEST(ProfileProbabilityTest, Examples) {
  DiseaseStats stats{4, {{"c1", 0.5}, {"c2", 0.5}}};
  LA_ASSERT_OK_AND_ASSIGN(
      auto p, ComputeProfileProbability(std::vector<std::string>{"c1"}, stats));
  EXPECT_NEAR(p.prob, 0.25, 1e-15);
  stats.per_code_prob = {{"c1", 1.0}, {"c2", 1.0}};
  LA_ASSERT_OK_AND_ASSIGN(p, ComputeProfileProbability(
                                 std::vector<std::string>{"c1", "c2"}, stats));
  EXPECT_EQ(p.prob, 1.0);
  EXPECT_THAT(
      ComputeProfileProbability(std::vector<std::string>{"zz"}, stats),
      StatusIs(absl::StatusCode::kInvalidArgument, HasSubstr("unknown code")));
}

TEST(ProfileProbabilityTest, MatchesDirectProduct) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 20; ++trial) {
    DiseaseStats stats;
    std::vector<std::string> profile;
    long double direct = 1.0L;
    for (int c = 0; c < 5; ++c) {
      const std::string code = absl::StrFormat("c%d", c);
      const double p = u(rng);
      stats.per_code_prob[code] = p;
      if (rng() % 2) {
        profile.push_back(code);
        direct *= p;
      } else {
        direct *= 1.0L - p;
      }
    }
    LA_ASSERT_OK_AND_ASSIGN(auto got,
                            ComputeProfileProbability(profile, stats));
    EXPECT_NEAR(got.prob, static_cast<double>(direct), 1e-15);
    EXPECT_NEAR(got.log_prob, std::log(static_cast<double>(direct)), 1e-12);
  }
}

TEST(ProfileProbabilityTest, LogSpaceSurvivesManyCodes) {
  DiseaseStats stats;
  for (int c = 0; c < 2000; ++c)
    stats.per_code_prob[absl::StrFormat("c%d", c)] = 0.5;
  LA_ASSERT_OK_AND_ASSIGN(auto got, ComputeProfileProbability(
                                        std::vector<std::string>{"c1"}, stats));
  EXPECT_NEAR(got.log_prob, 2000 * std::log(0.5), 1e-9);
  EXPECT_EQ(got.prob, 0.0);
}

// Each patient gets a distinct single code with a chosen frequency so the
// log-probabilities are spread.
struct BucketFixture {
  Corpus corpus;
  DiseaseStats stats;
};

BucketFixture SpreadFixture(int n, uint64_t seed) {
  BucketFixture f;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < n; ++i) {
    const std::string code = absl::StrFormat("c%03d", i);
    f.stats.per_code_prob[code] = u(rng);
    f.corpus.patients.push_back(
        Patient{absl::StrFormat("p%03d", i), {code}, {}});
  }
  f.stats.total_patients = n;
  return f;
}

TEST(BucketTest, PartitionWithMinSizeOne) {
  const BucketFixture f = SpreadFixture(100, 1);
  LA_ASSERT_OK_AND_ASSIGN(
      auto buckets, BucketByLogProbability(f.corpus.patients, f.stats, 100, 1));
  size_t total = 0;
  std::set<std::string> seen;
  for (const auto& b : buckets) {
    total += b.member_patient_ids.size();
    for (const auto& id : b.member_patient_ids)
      EXPECT_TRUE(seen.insert(id).second);
  }
  EXPECT_EQ(total, 100u);
}

TEST(BucketTest, MatchesBruteForceIntervals) {
  const BucketFixture f = SpreadFixture(300, 2);
  std::vector<double> lp;
  for (const auto& p : f.corpus.patients) {
    lp.push_back(ComputeProfileProbability(p.profile, f.stats)->log_prob);
  }
  const double lo = *std::min_element(lp.begin(), lp.end());
  const double hi = *std::max_element(lp.begin(), lp.end());
  std::map<int, std::set<std::string>> expected;
  size_t argmax = 0;
  for (size_t i = 0; i < lp.size(); ++i) {
    const double norm = (lp[i] - lo) / (hi - lo);
    int b = norm >= 1.0 ? 9 : static_cast<int>(norm * 10);
    expected[b].insert(f.corpus.patients[i].patient_id);
    if (lp[i] == hi) argmax = i;
  }
  LA_ASSERT_OK_AND_ASSIGN(
      auto buckets, BucketByLogProbability(f.corpus.patients, f.stats, 10, 5));
  std::map<int, std::set<std::string>> got;
  for (const auto& b : buckets) {
    got[b.bucket_index].insert(b.member_patient_ids.begin(),
                               b.member_patient_ids.end());
  }
  for (auto it = expected.begin(); it != expected.end();) {
    it = it->second.size() < 5 ? expected.erase(it) : std::next(it);
  }
  EXPECT_EQ(got, expected);

  // The maximum lands in the closed last interval.
  LA_ASSERT_OK_AND_ASSIGN(
      auto all, BucketByLogProbability(f.corpus.patients, f.stats, 10, 1));
  ASSERT_EQ(all.back().bucket_index, 9);
  EXPECT_THAT(all.back().member_patient_ids,
              ::testing::Contains(f.corpus.patients[argmax].patient_id));
}

TEST(BucketTest, MinSizeDiscardsSmallBuckets) {
  const BucketFixture f = SpreadFixture(100, 3);
  LA_ASSERT_OK_AND_ASSIGN(
      auto buckets,
      BucketByLogProbability(f.corpus.patients, f.stats, 100, 10));
  for (const auto& b : buckets) EXPECT_GE(b.member_patient_ids.size(), 10u);
}

TEST(BucketTest, IdenticalLogProbsGiveOneBucket) {
  Corpus corpus =
      ProfileCorpus(std::vector<std::vector<std::string>>(12, {"c"}));
  const DiseaseStats stats = CodeProbabilityMle(corpus);
  LA_ASSERT_OK_AND_ASSIGN(
      auto buckets, BucketByLogProbability(corpus.patients, stats, 100, 10));
  ASSERT_EQ(buckets.size(), 1u);
  EXPECT_EQ(buckets[0].member_patient_ids.size(), 12u);
}

TEST(VocabularyTest, ReservedAndRoundTrip) {
  const Vocabulary vocab(32, std::vector<std::string>{"C000", "C001"});
  EXPECT_EQ(vocab.Lookup("[PAD]"), kPadToken);
  EXPECT_EQ(vocab.Lookup("[MASK]"), kMaskToken);
  EXPECT_EQ(vocab.Lookup("C001"), 4);
  EXPECT_EQ(vocab.Lookup("nope"), kUnkToken);
  const std::vector<TokenId> ids = {3, 4, 10};
  EXPECT_EQ(vocab.Tokenize(vocab.Detokenize(ids)), ids);
}

}  // namespace
}  // namespace leakaudit
