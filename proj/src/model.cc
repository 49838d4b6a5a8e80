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

#include "leakaudit/model.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "absl/strings/str_cat.h"
#include "leakaudit/rng.h"

namespace leakaudit {
namespace {

constexpr int kGlobalTensors = 2;  // tok_emb, pos_emb
constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

enum LayerSlot {
  kLn1G,
  kLn1B,
  kQW,
  kQB,
  kKW,
  kKB,
  kVW,
  kVB,
  kOW,
  kOB,
  kLn2G,
  kLn2B,
  kW1,
  kB1,
  kW2,
  kB2,
  kLayerSlots
};
constexpr const char* kLayerSlotNames[kLayerSlots] = {
    "ln1_g",    "ln1_b",    "attn_q_w", "attn_q_b", "attn_k_w", "attn_k_b",
    "attn_v_w", "attn_v_b", "attn_o_w", "attn_o_b", "ln2_g",    "ln2_b",
    "ffn_w1",   "ffn_b1",   "ffn_w2",   "ffn_b2"};

enum HeadSlot { kLnfG, kLnfB, kOutW, kOutB };

int LayerTensor(int layer, int slot) {
  return kGlobalTensors + layer * kLayerSlots + slot;
}
int HeadTensor(const ModelConfig& c, int slot) {
  return kGlobalTensors + c.n_layers * kLayerSlots + slot;
}

bool IsGainOrBias(std::string_view role) {
  return role.ends_with("_b") || role.ends_with("_g") || role == "ffn_b1" ||
         role == "ffn_b2";
}

// y[rows x out] = x[rows x in] * w[in x out] + b.
void LinearForward(const double* x, int rows, int in, const double* w,
                   const double* b, int out, double* y) {
  for (int i = 0; i < rows; ++i) {
    double* yr = y + static_cast<size_t>(i) * out;
    for (int j = 0; j < out; ++j) yr[j] = b[j];
    const double* xr = x + static_cast<size_t>(i) * in;
    for (int k = 0; k < in; ++k) {
      const double xv = xr[k];
      const double* wr = w + static_cast<size_t>(k) * out;
      for (int j = 0; j < out; ++j) yr[j] += xv * wr[j];
    }
  }
}

// Accumulates dw += x^T dy, db += colsum(dy) and dx += dy w^T (dx optional).
void LinearBackward(const double* x, const double* dy, int rows, int in,
                    int out, const double* w, double* dx, double* dw,
                    double* db) {
  for (int i = 0; i < rows; ++i) {
    const double* dyr = dy + static_cast<size_t>(i) * out;
    const double* xr = x + static_cast<size_t>(i) * in;
    for (int j = 0; j < out; ++j) db[j] += dyr[j];
    for (int k = 0; k < in; ++k) {
      const double xv = xr[k];
      double* dwr = dw + static_cast<size_t>(k) * out;
      for (int j = 0; j < out; ++j) dwr[j] += xv * dyr[j];
    }
    if (dx != nullptr) {
      double* dxr = dx + static_cast<size_t>(i) * in;
      for (int k = 0; k < in; ++k) {
        const double* wr = w + static_cast<size_t>(k) * out;
        double acc = 0.0;
        for (int j = 0; j < out; ++j) acc += dyr[j] * wr[j];
        dxr[k] += acc;
      }
    }
  }
}

void LayerNormForward(const double* x, int rows, int d, const double* g,
                      const double* b, double* y, double* mean, double* rstd) {
  for (int i = 0; i < rows; ++i) {
    const double* xr = x + static_cast<size_t>(i) * d;
    double m = 0.0;
    for (int j = 0; j < d; ++j) m += xr[j];
    m /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xr[j] - m) * (xr[j] - m);
    var /= d;
    const double r = 1.0 / std::sqrt(var + kLayerNormEps);
    mean[i] = m;
    rstd[i] = r;
    double* yr = y + static_cast<size_t>(i) * d;
    for (int j = 0; j < d; ++j) yr[j] = (xr[j] - m) * r * g[j] + b[j];
  }
}

// dx += d(LN)/dx^T dy; dg, db accumulate.
void LayerNormBackward(const double* x, const double* dy, int rows, int d,
                       const double* g, const double* mean, const double* rstd,
                       double* dx, double* dg, double* db) {
  std::vector<double> xhat(d), dxhat(d);
  for (int i = 0; i < rows; ++i) {
    const double* xr = x + static_cast<size_t>(i) * d;
    const double* dyr = dy + static_cast<size_t>(i) * d;
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (int j = 0; j < d; ++j) {
      xhat[j] = (xr[j] - mean[i]) * rstd[i];
      dxhat[j] = dyr[j] * g[j];
      dg[j] += dyr[j] * xhat[j];
      db[j] += dyr[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xhat[j];
    }
    mean_dxhat /= d;
    mean_dxhat_xhat /= d;
    double* dxr = dx + static_cast<size_t>(i) * d;
    for (int j = 0; j < d; ++j) {
      dxr[j] += rstd[i] * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
    }
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

double Gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double GeluGrad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) +
         0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

struct LayerCache {
  std::vector<double> x_in, ln1, ln1_mean, ln1_rstd;
  std::vector<double> q, k, v;
  std::vector<double> probs;  // heads x n x n
  std::vector<double> ctx, x_mid, ln2, ln2_mean, ln2_rstd;
  std::vector<double> ff_pre, ff_act;
};

struct Cache {
  std::vector<LayerCache> layers;
  std::vector<double> x_final, lnf, lnf_mean, lnf_rstd;
  // Softmax probabilities at target rows, targets x V.
  std::vector<double> target_probs;
  std::vector<bool> key_ok;
};

// Runs the network; fills `trace` (if non-null) and always the loss pieces
// needed by backward. Logits are materialized for all rows only when
// `all_logits` is set.
absl::Status RunForward(const ParameterSet& params,
                        const ObjectiveInstance& obj, bool all_logits,
                        Cache& cache, ForwardTrace* trace, double* mean_loss) {
  const ModelConfig& c = params.config();
  const int n = c.seq_len;
  const int d = c.model_dim;
  const int f = c.ff_dim;
  const int V = c.vocab_size;
  const int H = c.n_heads;
  const int dh = c.head_dim();
  const auto T = params.tensors();

  if (static_cast<int>(obj.input_tokens.size()) != n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "input has ", obj.input_tokens.size(), " tokens, model expects ", n));
  }
  if (obj.target_positions.empty() ||
      obj.target_positions.size() != obj.target_tokens.size()) {
    return absl::InvalidArgumentError("objective has no consistent targets");
  }
  for (TokenId t : obj.input_tokens) {
    if (t < 0 || t >= V) {
      return absl::InvalidArgumentError(
          absl::StrCat("token id ", t, " outside vocabulary of size ", V));
    }
  }
  for (size_t i = 0; i < obj.target_positions.size(); ++i) {
    const int p = obj.target_positions[i];
    const TokenId t = obj.target_tokens[i];
    if (p < 0 || p >= n || t < 0 || t >= V || t == kPadToken) {
      return absl::InvalidArgumentError("invalid target position or token");
    }
  }

  cache.key_ok.assign(n, false);
  for (int j = 0; j < n; ++j)
    cache.key_ok[j] = obj.input_tokens[j] != kPadToken;

  // Embedding.
  std::vector<double> x(static_cast<size_t>(n) * d);
  const auto& tok = T[0].values;
  const auto& pos = T[1].values;
  for (int i = 0; i < n; ++i) {
    const size_t tr = static_cast<size_t>(obj.input_tokens[i]) * d;
    for (int j = 0; j < d; ++j) {
      x[static_cast<size_t>(i) * d + j] = tok[tr + j] + pos[i * d + j];
    }
  }

  if (trace != nullptr) {
    trace->seq_len = n;
    trace->vocab_size = V;
    trace->attention.assign(c.n_layers, {});
    trace->query_mask = cache.key_ok;
  }

  const bool causal = c.objective == Objective::kAr;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.layers.resize(c.n_layers);
  std::vector<double> scores(n);
  for (int l = 0; l < c.n_layers; ++l) {
    LayerCache& lc = cache.layers[l];
    auto P = [&](int slot) { return T[LayerTensor(l, slot)].values.data(); };
    lc.x_in = x;
    lc.ln1.resize(x.size());
    lc.ln1_mean.resize(n);
    lc.ln1_rstd.resize(n);
    LayerNormForward(x.data(), n, d, P(kLn1G), P(kLn1B), lc.ln1.data(),
                     lc.ln1_mean.data(), lc.ln1_rstd.data());
    lc.q.resize(x.size());
    lc.k.resize(x.size());
    lc.v.resize(x.size());
    LinearForward(lc.ln1.data(), n, d, P(kQW), P(kQB), d, lc.q.data());
    LinearForward(lc.ln1.data(), n, d, P(kKW), P(kKB), d, lc.k.data());
    LinearForward(lc.ln1.data(), n, d, P(kVW), P(kVB), d, lc.v.data());

    lc.probs.assign(static_cast<size_t>(H) * n * n, 0.0);
    lc.ctx.assign(x.size(), 0.0);
    for (int h = 0; h < H; ++h) {
      const int off = h * dh;
      for (int i = 0; i < n; ++i) {
        double* prow = lc.probs.data() + (static_cast<size_t>(h) * n + i) * n;
        bool any = false;
        double mx = -INFINITY;
        for (int j = 0; j < n; ++j) {
          const bool ok = cache.key_ok[j] && (!causal || j <= i);
          if (!ok) continue;
          double s = 0.0;
          for (int t = 0; t < dh; ++t) {
            s += lc.q[i * d + off + t] * lc.k[j * d + off + t];
          }
          scores[j] = s * scale;
          mx = std::max(mx, scores[j]);
          any = true;
          prow[j] = 1.0;  // marks an allowed key
        }
        if (!any) {
          // Query with no admissible key attends to itself.
          prow[i] = 1.0;
          continue;
        }
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
          if (prow[j] == 0.0) continue;
          prow[j] = std::exp(scores[j] - mx);
          z += prow[j];
        }
        for (int j = 0; j < n; ++j) prow[j] /= z;
      }
      for (int i = 0; i < n; ++i) {
        const double* prow =
            lc.probs.data() + (static_cast<size_t>(h) * n + i) * n;
        double* cr = lc.ctx.data() + static_cast<size_t>(i) * d + off;
        for (int j = 0; j < n; ++j) {
          const double p = prow[j];
          if (p == 0.0) continue;
          const double* vr = lc.v.data() + static_cast<size_t>(j) * d + off;
          for (int t = 0; t < dh; ++t) cr[t] += p * vr[t];
        }
      }
      if (trace != nullptr) {
        trace->attention[l].emplace_back(
            lc.probs.begin() + static_cast<size_t>(h) * n * n,
            lc.probs.begin() + static_cast<size_t>(h + 1) * n * n);
      }
    }

    std::vector<double> attn_out(x.size());
    LinearForward(lc.ctx.data(), n, d, P(kOW), P(kOB), d, attn_out.data());
    for (size_t i = 0; i < x.size(); ++i) x[i] += attn_out[i];
    lc.x_mid = x;

    lc.ln2.resize(x.size());
    lc.ln2_mean.resize(n);
    lc.ln2_rstd.resize(n);
    LayerNormForward(x.data(), n, d, P(kLn2G), P(kLn2B), lc.ln2.data(),
                     lc.ln2_mean.data(), lc.ln2_rstd.data());
    lc.ff_pre.resize(static_cast<size_t>(n) * f);
    LinearForward(lc.ln2.data(), n, d, P(kW1), P(kB1), f, lc.ff_pre.data());
    lc.ff_act.resize(lc.ff_pre.size());
    for (size_t i = 0; i < lc.ff_pre.size(); ++i) {
      lc.ff_act[i] = Gelu(lc.ff_pre[i]);
    }
    std::vector<double> ff_out(x.size());
    LinearForward(lc.ff_act.data(), n, f, P(kW2), P(kB2), d, ff_out.data());
    for (size_t i = 0; i < x.size(); ++i) x[i] += ff_out[i];
  }

  cache.x_final = x;
  cache.lnf.resize(x.size());
  cache.lnf_mean.resize(n);
  cache.lnf_rstd.resize(n);
  LayerNormForward(x.data(), n, d, T[HeadTensor(c, kLnfG)].values.data(),
                   T[HeadTensor(c, kLnfB)].values.data(), cache.lnf.data(),
                   cache.lnf_mean.data(), cache.lnf_rstd.data());

  const double* out_w = T[HeadTensor(c, kOutW)].values.data();
  const double* out_b = T[HeadTensor(c, kOutB)].values.data();
  if (trace != nullptr && all_logits) {
    trace->logits.resize(static_cast<size_t>(n) * V);
    LinearForward(cache.lnf.data(), n, d, out_w, out_b, V,
                  trace->logits.data());
  }

  const size_t n_targets = obj.target_positions.size();
  cache.target_probs.resize(n_targets * V);
  std::vector<double> per_position(n_targets);
  double total = 0.0;
  for (size_t t = 0; t < n_targets; ++t) {
    const int p = obj.target_positions[t];
    double* row = cache.target_probs.data() + t * V;
    LinearForward(cache.lnf.data() + static_cast<size_t>(p) * d, 1, d, out_w,
                  out_b, V, row);
    const double mx = *std::max_element(row, row + V);
    double z = 0.0;
    for (int j = 0; j < V; ++j) z += std::exp(row[j] - mx);
    const double log_z = mx + std::log(z);
    per_position[t] = log_z - row[obj.target_tokens[t]];
    for (int j = 0; j < V; ++j) row[j] = std::exp(row[j] - log_z);
    total += per_position[t];
  }
  const double loss = total / static_cast<double>(n_targets);
  if (!std::isfinite(loss)) {
    return absl::InternalError("non-finite loss (model diverged)");
  }
  if (trace != nullptr) {
    trace->per_position_loss = std::move(per_position);
    trace->mean_loss = loss;
  }
  *mean_loss = loss;
  return absl::OkStatus();
}

GradientSet RunBackward(const ParameterSet& params,
                        const ObjectiveInstance& obj, const Cache& cache) {
  const ModelConfig& c = params.config();
  const int n = c.seq_len;
  const int d = c.model_dim;
  const int f = c.ff_dim;
  const int V = c.vocab_size;
  const int H = c.n_heads;
  const int dh = c.head_dim();
  const auto T = params.tensors();
  GradientSet grad(c);
  auto G = grad.tensors();

  // Head.
  const size_t n_targets = obj.target_positions.size();
  const double inv_targets = 1.0 / static_cast<double>(n_targets);
  std::vector<double> dlnf(static_cast<size_t>(n) * d, 0.0);
  std::vector<double> dlogit(V);
  const double* out_w = T[HeadTensor(c, kOutW)].values.data();
  double* d_out_w = G[HeadTensor(c, kOutW)].values.data();
  double* d_out_b = G[HeadTensor(c, kOutB)].values.data();
  for (size_t t = 0; t < n_targets; ++t) {
    const int p = obj.target_positions[t];
    const double* probs = cache.target_probs.data() + t * V;
    for (int j = 0; j < V; ++j) dlogit[j] = probs[j] * inv_targets;
    dlogit[obj.target_tokens[t]] -= inv_targets;
    LinearBackward(cache.lnf.data() + static_cast<size_t>(p) * d, dlogit.data(),
                   1, d, V, out_w, dlnf.data() + static_cast<size_t>(p) * d,
                   d_out_w, d_out_b);
  }
  std::vector<double> dx(static_cast<size_t>(n) * d, 0.0);
  LayerNormBackward(cache.x_final.data(), dlnf.data(), n, d,
                    T[HeadTensor(c, kLnfG)].values.data(),
                    cache.lnf_mean.data(), cache.lnf_rstd.data(), dx.data(),
                    G[HeadTensor(c, kLnfG)].values.data(),
                    G[HeadTensor(c, kLnfB)].values.data());

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> dP(n);
  for (int l = c.n_layers - 1; l >= 0; --l) {
    const LayerCache& lc = cache.layers[l];
    auto P = [&](int slot) { return T[LayerTensor(l, slot)].values.data(); };
    auto D = [&](int slot) { return G[LayerTensor(l, slot)].values.data(); };

    // Feed-forward branch: x_out = x_mid + ffn(ln2(x_mid)).
    std::vector<double> dff(static_cast<size_t>(n) * f, 0.0);
    LinearBackward(lc.ff_act.data(), dx.data(), n, f, d, P(kW2), dff.data(),
                   D(kW2), D(kB2));
    for (size_t i = 0; i < dff.size(); ++i) dff[i] *= GeluGrad(lc.ff_pre[i]);
    std::vector<double> dln2(dx.size(), 0.0);
    LinearBackward(lc.ln2.data(), dff.data(), n, d, f, P(kW1), dln2.data(),
                   D(kW1), D(kB1));
    LayerNormBackward(lc.x_mid.data(), dln2.data(), n, d, P(kLn2G),
                      lc.ln2_mean.data(), lc.ln2_rstd.data(), dx.data(),
                      D(kLn2G), D(kLn2B));

    // Attention branch: x_mid = x_in + attn(ln1(x_in)).
    std::vector<double> dctx(dx.size(), 0.0);
    LinearBackward(lc.ctx.data(), dx.data(), n, d, d, P(kOW), dctx.data(),
                   D(kOW), D(kOB));
    std::vector<double> dq(dx.size(), 0.0), dk(dx.size(), 0.0),
        dv(dx.size(), 0.0);
    for (int h = 0; h < H; ++h) {
      const int off = h * dh;
      for (int i = 0; i < n; ++i) {
        const double* prow =
            lc.probs.data() + (static_cast<size_t>(h) * n + i) * n;
        const double* dcr = dctx.data() + static_cast<size_t>(i) * d + off;
        double weighted = 0.0;
        for (int j = 0; j < n; ++j) {
          dP[j] = 0.0;
          if (prow[j] == 0.0) continue;
          const double* vr = lc.v.data() + static_cast<size_t>(j) * d + off;
          double* dvr = dv.data() + static_cast<size_t>(j) * d + off;
          double s = 0.0;
          for (int t = 0; t < dh; ++t) {
            s += dcr[t] * vr[t];
            dvr[t] += prow[j] * dcr[t];
          }
          dP[j] = s;
          weighted += prow[j] * s;
        }
        const double* qr = lc.q.data() + static_cast<size_t>(i) * d + off;
        double* dqr = dq.data() + static_cast<size_t>(i) * d + off;
        for (int j = 0; j < n; ++j) {
          if (prow[j] == 0.0) continue;
          const double ds = prow[j] * (dP[j] - weighted) * scale;
          if (ds == 0.0) continue;
          const double* kr = lc.k.data() + static_cast<size_t>(j) * d + off;
          double* dkr = dk.data() + static_cast<size_t>(j) * d + off;
          for (int t = 0; t < dh; ++t) {
            dqr[t] += ds * kr[t];
            dkr[t] += ds * qr[t];
          }
        }
      }
    }
    std::vector<double> dln1(dx.size(), 0.0);
    LinearBackward(lc.ln1.data(), dq.data(), n, d, d, P(kQW), dln1.data(),
                   D(kQW), D(kQB));
    LinearBackward(lc.ln1.data(), dk.data(), n, d, d, P(kKW), dln1.data(),
                   D(kKW), D(kKB));
    LinearBackward(lc.ln1.data(), dv.data(), n, d, d, P(kVW), dln1.data(),
                   D(kVW), D(kVB));
    LayerNormBackward(lc.x_in.data(), dln1.data(), n, d, P(kLn1G),
                      lc.ln1_mean.data(), lc.ln1_rstd.data(), dx.data(),
                      D(kLn1G), D(kLn1B));
  }

  double* dtok = G[0].values.data();
  double* dpos = G[1].values.data();
  for (int i = 0; i < n; ++i) {
    const size_t tr = static_cast<size_t>(obj.input_tokens[i]) * d;
    for (int j = 0; j < d; ++j) {
      const double g = dx[static_cast<size_t>(i) * d + j];
      dtok[tr + j] += g;
      dpos[static_cast<size_t>(i) * d + j] += g;
    }
  }
  return grad;
}

}  // namespace

std::string_view ObjectiveName(Objective objective) {
  return objective == Objective::kMlm ? "MLM" : "AR";
}

absl::StatusOr<Objective> ParseObjective(std::string_view name) {
  if (name == "MLM" || name == "mlm") return Objective::kMlm;
  if (name == "AR" || name == "ar") return Objective::kAr;
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown objective '", std::string(name), "' (expected MLM or AR)"));
}

absl::Status ValidateModelConfig(const ModelConfig& c) {
  if (c.n_layers < 1 || c.n_heads < 1 || c.model_dim < 1 || c.ff_dim < 1) {
    return absl::InvalidArgumentError("model sizes must be >= 1");
  }
  if (c.model_dim % c.n_heads != 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "model_dim ", c.model_dim, " not divisible by n_heads ", c.n_heads));
  }
  if (c.vocab_size <= kFirstRegularToken) {
    return absl::InvalidArgumentError("vocab_size must exceed 3");
  }
  if (c.seq_len < 2) return absl::InvalidArgumentError("seq_len must be >= 2");
  if (c.objective == Objective::kMlm &&
      !(c.mask_rate > 0.0 && c.mask_rate <= 1.0)) {
    return absl::InvalidArgumentError("mask_rate must lie in (0, 1]");
  }
  return absl::OkStatus();
}

std::string_view Tensor::group() const {
  const std::string_view n = name;
  return n.substr(0, n.find('.'));
}

std::string_view Tensor::role() const {
  const std::string_view n = name;
  const size_t dot = n.find('.');
  return dot == std::string_view::npos ? n : n.substr(dot + 1);
}

TensorSet::TensorSet(const ModelConfig& c) : config_(c) {
  const int d = c.model_dim, f = c.ff_dim, V = c.vocab_size, n = c.seq_len;
  auto add = [&](std::string name, std::vector<int> shape) {
    size_t count = 1;
    for (int s : shape) count *= static_cast<size_t>(s);
    tensors_.push_back(
        Tensor{std::move(name), std::move(shape), std::vector<double>(count)});
  };
  add("embedding.tok_emb", {V, d});
  add("embedding.pos_emb", {n, d});
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string p = absl::StrCat("layer", l, ".");
    for (int s = 0; s < kLayerSlots; ++s) {
      std::vector<int> shape;
      switch (s) {
        case kQW:
        case kKW:
        case kVW:
        case kOW:
          shape = {d, d};
          break;
        case kW1:
          shape = {d, f};
          break;
        case kB1:
          shape = {f};
          break;
        case kW2:
          shape = {f, d};
          break;
        default:
          shape = {d};
          break;
      }
      add(p + kLayerSlotNames[s], std::move(shape));
    }
  }
  add("head.lnf_g", {d});
  add("head.lnf_b", {d});
  add("head.out_w", {d, V});
  add("head.out_b", {V});
}

size_t TensorSet::ParameterCount() const {
  size_t n = 0;
  for (const auto& t : tensors_) n += t.values.size();
  return n;
}

bool TensorSet::AllFinite() const {
  for (const auto& t : tensors_)
    for (double v : t.values)
      if (!std::isfinite(v)) return false;
  return true;
}

int TensorSet::Find(std::string_view name) const {
  for (size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

bool TensorSet::SameShape(const TensorSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name != other.tensors_[i].name ||
        tensors_[i].shape != other.tensors_[i].shape) {
      return false;
    }
  }
  return true;
}

GradientSet GradientSet::ZerosLike(const TensorSet& like) {
  return GradientSet(like.config());
}

double GradientSet::SquaredNorm() const {
  double s = 0.0;
  for (const auto& t : tensors_)
    for (double v : t.values) s += v * v;
  return s;
}

void GradientSet::Scale(double factor) {
  for (auto& t : tensors_)
    for (double& v : t.values) v *= factor;
}

void GradientSet::AddScaled(const GradientSet& other, double factor) {
  for (size_t i = 0; i < tensors_.size(); ++i) {
    auto& dst = tensors_[i].values;
    const auto& src = other.tensors_[i].values;
    for (size_t j = 0; j < dst.size(); ++j) dst[j] += factor * src[j];
  }
}

absl::StatusOr<ParameterSet> InitParams(const ModelConfig& config,
                                        uint64_t seed) {
  if (absl::Status s = ValidateModelConfig(config); !s.ok()) return s;
  ParameterSet params(config);
  Rng rng = MakeStream(seed, "init");
  std::normal_distribution<double> normal(0.0, kInitStd);
  for (Tensor& t : params.tensors()) {
    const std::string_view role = t.role();
    if (role.ends_with("_g")) {
      std::fill(t.values.begin(), t.values.end(), 1.0);
    } else if (IsGainOrBias(role)) {
      std::fill(t.values.begin(), t.values.end(), 0.0);
    } else {
      for (double& v : t.values) v = normal(rng);
    }
  }
  return params;
}

absl::StatusOr<ObjectiveInstance> MakeObjective(std::span<const TokenId> tokens,
                                                const ModelConfig& config,
                                                uint64_t mask_seed) {
  std::vector<int> real;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] != kPadToken) real.push_back(static_cast<int>(i));
  }
  if (real.empty()) return absl::InvalidArgumentError("sample is all padding");

  ObjectiveInstance obj;
  obj.input_tokens.assign(tokens.begin(), tokens.end());
  if (config.objective == Objective::kAr) {
    for (size_t i = 0; i + 1 < tokens.size(); ++i) {
      if (tokens[i + 1] == kPadToken) continue;
      obj.target_positions.push_back(static_cast<int>(i));
      obj.target_tokens.push_back(tokens[i + 1]);
    }
    if (obj.target_positions.empty()) {
      return absl::InvalidArgumentError(
          "sample has no next-token targets (fewer than 2 real tokens)");
    }
    return obj;
  }

  Rng rng = MakeStream(mask_seed, "mask");
  std::bernoulli_distribution coin(config.mask_rate);
  std::vector<bool> masked(tokens.size(), false);
  bool any = false;
  for (int i : real) {
    if (coin(rng)) {
      masked[i] = true;
      any = true;
    }
  }
  if (!any) {
    const int pick = std::uniform_int_distribution<int>(
        0, static_cast<int>(real.size()) - 1)(rng);
    masked[real[pick]] = true;
  }
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (!masked[i]) continue;
    obj.target_positions.push_back(static_cast<int>(i));
    obj.target_tokens.push_back(tokens[i]);
    obj.input_tokens[i] = kMaskToken;
  }
  return obj;
}

absl::StatusOr<ForwardTrace> Forward(const ParameterSet& params,
                                     const ObjectiveInstance& objective) {
  Cache cache;
  ForwardTrace trace;
  double loss = 0.0;
  if (absl::Status s =
          RunForward(params, objective, true, cache, &trace, &loss);
      !s.ok()) {
    return s;
  }
  return trace;
}

absl::StatusOr<LossAndGradient> Backward(const ParameterSet& params,
                                         const ObjectiveInstance& objective) {
  Cache cache;
  double loss = 0.0;
  if (absl::Status s =
          RunForward(params, objective, false, cache, nullptr, &loss);
      !s.ok()) {
    return s;
  }
  return LossAndGradient{loss, RunBackward(params, objective, cache)};
}

absl::StatusOr<TraceAndGradient> ForwardBackward(
    const ParameterSet& params, const ObjectiveInstance& objective) {
  Cache cache;
  ForwardTrace trace;
  double loss = 0.0;
  if (absl::Status s =
          RunForward(params, objective, false, cache, &trace, &loss);
      !s.ok()) {
    return s;
  }
  return TraceAndGradient{std::move(trace),
                          RunBackward(params, objective, cache)};
}

absl::StatusOr<double> Loss(const ParameterSet& params,
                            const ObjectiveInstance& objective) {
  Cache cache;
  double loss = 0.0;
  if (absl::Status s =
          RunForward(params, objective, false, cache, nullptr, &loss);
      !s.ok()) {
    return s;
  }
  return loss;
}

absl::StatusOr<double> SampleError(const ParameterSet& params,
                                   std::span<const TokenId> sample,
                                   uint64_t objective_seed) {
  auto obj = MakeObjective(sample, params.config(), objective_seed);
  if (!obj.ok()) return obj.status();
  return Loss(params, *obj);
}

}  // namespace leakaudit
