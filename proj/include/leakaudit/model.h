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

// A small pre-norm transformer language model (masked-LM or autoregressive)
// with exact analytic gradients and exposed attention probabilities.
//
// Tensor inventory, in order (d = model_dim, f = ff_dim, V = vocab_size,
// n = seq_len):
//
//   embedding.tok_emb  [V, d]     embedding.pos_emb  [n, d]
//   per layer l, prefix "layer<l>.":
//     ln1_g [d]  ln1_b [d]
//     attn_q_w [d, d]  attn_q_b [d]   attn_k_w [d, d]  attn_k_b [d]
//     attn_v_w [d, d]  attn_v_b [d]   attn_o_w [d, d]  attn_o_b [d]
//     ln2_g [d]  ln2_b [d]
//     ffn_w1 [d, f]  ffn_b1 [f]  ffn_w2 [f, d]  ffn_b2 [d]
//   head.lnf_g [d]  head.lnf_b [d]  head.out_w [d, V]  head.out_b [V]
//
// Matrices are row-major and act on row vectors: y = x W + b.

#ifndef LEAKAUDIT_MODEL_H_
#define LEAKAUDIT_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "leakaudit/corpus.h"

namespace leakaudit {

enum class Objective { kMlm, kAr };

std::string_view ObjectiveName(Objective objective);
absl::StatusOr<Objective> ParseObjective(std::string_view name);

struct ModelConfig {
  int n_layers = 2;
  int n_heads = 2;
  int model_dim = 16;
  int ff_dim = 32;
  int vocab_size = 64;
  int seq_len = 16;
  Objective objective = Objective::kAr;
  double mask_rate = 0.15;

  int head_dim() const { return model_dim / n_heads; }
  bool operator==(const ModelConfig&) const = default;
};

absl::Status ValidateModelConfig(const ModelConfig& config);

struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;

  // "embedding", "layer<l>" or "head".
  std::string_view group() const;
  // Name without the group prefix, e.g. "attn_q_w".
  std::string_view role() const;
};

// Named tensors laid out per the inventory above.
class TensorSet {
 public:
  TensorSet() = default;
  // All-zero tensors with the inventory shapes.
  explicit TensorSet(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::span<Tensor> tensors() { return tensors_; }
  std::span<const Tensor> tensors() const { return tensors_; }
  size_t size() const { return tensors_.size(); }
  size_t ParameterCount() const;
  bool AllFinite() const;

  // Index of the tensor named `name`, or -1.
  int Find(std::string_view name) const;

  bool SameShape(const TensorSet& other) const;

 protected:
  ModelConfig config_;
  std::vector<Tensor> tensors_;
};

class ParameterSet : public TensorSet {
 public:
  using TensorSet::TensorSet;
};

class GradientSet : public TensorSet {
 public:
  using TensorSet::TensorSet;

  static GradientSet ZerosLike(const TensorSet& like);

  double SquaredNorm() const;
  void Scale(double factor);
  // this += factor * other.
  void AddScaled(const GradientSet& other, double factor);
};

// Weights ~ N(0, 0.02^2), biases zero, layer-norm gains one.
absl::StatusOr<ParameterSet> InitParams(const ModelConfig& config,
                                        uint64_t seed);

struct ObjectiveInstance {
  std::vector<TokenId> input_tokens;
  std::vector<int> target_positions;
  std::vector<TokenId> target_tokens;
};

// MLM: every non-pad position is masked independently with probability
// mask_rate (at least one, chosen uniformly if none was drawn); masked inputs
// become MASK. AR: position i predicts token i + 1 whenever that token is not
// PAD.
absl::StatusOr<ObjectiveInstance> MakeObjective(std::span<const TokenId> tokens,
                                                const ModelConfig& config,
                                                uint64_t mask_seed);

struct ForwardTrace {
  int seq_len = 0;
  int vocab_size = 0;
  // seq_len x vocab_size, row-major.
  std::vector<double> logits;
  // attention[l][h] is a row-major seq_len x seq_len row-stochastic matrix.
  std::vector<std::vector<std::vector<double>>> attention;
  // Cross-entropy (nats) per target position, in target order.
  std::vector<double> per_position_loss;
  double mean_loss = 0.0;
  // Positions holding a non-pad input token.
  std::vector<bool> query_mask;
};

absl::StatusOr<ForwardTrace> Forward(const ParameterSet& params,
                                     const ObjectiveInstance& objective);

struct LossAndGradient {
  double mean_loss = 0.0;
  GradientSet gradient;
};

absl::StatusOr<LossAndGradient> Backward(const ParameterSet& params,
                                         const ObjectiveInstance& objective);

struct TraceAndGradient {
  ForwardTrace trace;
  GradientSet gradient;
};

// Forward trace and gradient from a single pass. The trace carries attention,
// losses and the query mask; logits are left empty.
absl::StatusOr<TraceAndGradient> ForwardBackward(
    const ParameterSet& params, const ObjectiveInstance& objective);

// Loss only; skips logits at non-target positions.
absl::StatusOr<double> Loss(const ParameterSet& params,
                            const ObjectiveInstance& objective);

// e(x): loss of `sample` under a fresh objective drawn with `objective_seed`.
absl::StatusOr<double> SampleError(const ParameterSet& params,
                                   std::span<const TokenId> sample,
                                   uint64_t objective_seed);

}  // namespace leakaudit

#endif  // LEAKAUDIT_MODEL_H_
