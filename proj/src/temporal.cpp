#include "eitnet/temporal.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "eitnet/rng.hpp"

namespace eitnet {

namespace {

struct AttentionGroup {
  std::vector<Eigen::Index> queries;
  std::vector<Eigen::Index> keys;
};

void check_square(const Tensor& w, std::size_t d, const char* name) {
  if (w.rank() != 2 || w.dim(0) != d || w.dim(1) != d) {
    throw ShapeError(std::string("encoder ") + name + " must be [" + std::to_string(d) + "," +
                     std::to_string(d) + "], got " + to_string(w.shape()));
  }
}

void check_vector(const Tensor& b, std::size_t d, const char* name) {
  if (b.rank() != 1 || b.dim(0) != d) {
    throw ShapeError(std::string("encoder ") + name + " must be [" + std::to_string(d) +
                     "], got " + to_string(b.shape()));
  }
}

Tensor random_matrix(std::size_t rows, std::size_t cols, SplitMix64& rng) {
  Tensor w({rows, cols});
  const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(rows + cols));
  for (auto& v : w.data()) v = rng.uniform(-bound, bound);
  return w;
}

Tensor grouped_attention(const Tensor& tokens, const EncoderParams& p,
                         const std::vector<AttentionGroup>& groups) {
  const auto x = tokens.matrix();
  const RowMatrix q = (x * p.wq.matrix()).rowwise() + p.bq.vector().transpose();
  const RowMatrix k = (x * p.wk.matrix()).rowwise() + p.bk.vector().transpose();
  const RowMatrix v = (x * p.wv.matrix()).rowwise() + p.bv.vector().transpose();
  const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(p.d_model()));

  Tensor out(tokens.shape(), 0.0);
  auto z = out.matrix();
  for (const auto& g : groups) {
    const RowMatrix qg = q(g.queries, Eigen::all);
    const RowMatrix kg = k(g.keys, Eigen::all);
    const RowMatrix vg = v(g.keys, Eigen::all);
    RowMatrix scores = (qg * kg.transpose()) * scale;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      auto row = scores.row(r);
      row = (row.array() - row.maxCoeff()).exp().matrix();
      row /= row.sum();
    }
    z(g.queries, Eigen::all) = scores * vg;
  }
  return out;
}

std::vector<AttentionGroup> joint_groups(std::size_t count) {
  AttentionGroup g;
  g.queries.resize(count);
  std::iota(g.queries.begin(), g.queries.end(), Eigen::Index{0});
  g.keys = g.queries;
  return {g};
}

/// Groups for a factorized pass. Returns an empty list when the pass is
/// degenerate (all singleton groups, no summary tokens).
// Each token attends only to itself.
std::vector<AttentionGroup> singleton_groups(std::size_t n) {
  std::vector<AttentionGroup> groups;
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    groups.push_back({{idx}, {idx}});
  }
  return groups;
}

std::vector<AttentionGroup> factorized_groups(const TokenLayout& layout, bool temporal) {
  const std::size_t hw = layout.grid_h * layout.grid_w;
  const std::size_t group_count = temporal ? hw : layout.frames;
  const std::size_t group_size = temporal ? layout.frames : hw;
  if (group_size == 1 && layout.prefix == 0) return {};

  std::vector<Eigen::Index> prefix(layout.prefix);
  std::iota(prefix.begin(), prefix.end(), Eigen::Index{0});
  std::vector<AttentionGroup> groups;
  for (std::size_t g = 0; g < group_count; ++g) {
    AttentionGroup group;
    group.keys = prefix;
    for (std::size_t m = 0; m < group_size; ++m) {
      const std::size_t grid_index = temporal ? m * hw + g : g * hw + m;
      const auto idx = static_cast<Eigen::Index>(layout.prefix + grid_index);
      group.queries.push_back(idx);
      group.keys.push_back(idx);
    }
    groups.push_back(std::move(group));
  }
  if (layout.prefix > 0) {
    AttentionGroup summary = joint_groups(layout.token_count()).front();
    summary.queries = prefix;
    groups.push_back(std::move(summary));
  }
  return groups;
}

Tensor encoder_sublayer(const Tensor& x, const EncoderParams& p,
                        const std::vector<AttentionGroup>& groups) {
  const Tensor z = grouped_attention(x, p, groups);
  Tensor residual = z;
  residual.matrix() += x.matrix();
  const Tensor h = layer_norm(residual, p.ln1_gamma, p.ln1_beta);
  Tensor f = linear(relu(linear(h, p.w1, p.b1)), p.w2, p.b2);
  f.matrix() += h.matrix();
  return layer_norm(f, p.ln2_gamma, p.ln2_beta);
}

}  // namespace

void TokenSequence::validate() const {
  if (tokens.rank() != 2) {
    throw ShapeError("token sequence must be [S, d], got " + to_string(tokens.shape()));
  }
  if (layout) {
    if (layout->frames == 0 || layout->grid_h == 0 || layout->grid_w == 0) {
      throw ShapeError("token layout extents must be >= 1");
    }
    if (layout->token_count() != tokens.dim(0)) {
      throw ShapeError("token layout describes " + std::to_string(layout->token_count()) +
                       " tokens, sequence has " + std::to_string(tokens.dim(0)));
    }
  }
}

void EncoderParams::validate() const {
  const std::size_t d = d_model();
  check_square(wq, d, "W_q");
  check_square(wk, d, "W_k");
  check_square(wv, d, "W_v");
  check_vector(bq, d, "b_q");
  check_vector(bk, d, "b_k");
  check_vector(bv, d, "b_v");
  if (w1.rank() != 2 || w1.dim(0) != d) throw ShapeError("encoder W_1 must be [d, hidden]");
  check_vector(b1, w1.dim(1), "b_1");
  if (w2.rank() != 2 || w2.dim(0) != w1.dim(1) || w2.dim(1) != d) {
    throw ShapeError("encoder W_2 must be [hidden, d]");
  }
  check_vector(b2, d, "b_2");
  const auto n = static_cast<Eigen::Index>(d);
  if (ln1_gamma.size() != n || ln1_beta.size() != n || ln2_gamma.size() != n ||
      ln2_beta.size() != n) {
    throw ShapeError("encoder layer-norm parameters must have length d");
  }
}

EncoderParams random_encoder(std::size_t d_model, std::size_t hidden, std::uint64_t seed) {
  SplitMix64 rng(seed);
  EncoderParams p;
  p.wq = random_matrix(d_model, d_model, rng);
  p.wk = random_matrix(d_model, d_model, rng);
  p.wv = random_matrix(d_model, d_model, rng);
  p.bq = p.bk = p.bv = Tensor({d_model}, 0.0);
  p.w1 = random_matrix(d_model, hidden, rng);
  p.b1 = Tensor({hidden}, 0.0);
  p.w2 = random_matrix(hidden, d_model, rng);
  p.b2 = Tensor({d_model}, 0.0);
  const auto n = static_cast<Eigen::Index>(d_model);
  p.ln1_gamma = p.ln2_gamma = Vector::Ones(n);
  p.ln1_beta = p.ln2_beta = Vector::Zero(n);
  return p;
}

const char* to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::joint: return "joint";
    case AttentionMode::temporal: return "temporal";
    case AttentionMode::spatial: return "spatial";
    case AttentionMode::divided: return "divided";
  }
  return "?";
}

TokenSequence patch_embed(const Tensor& clip, std::size_t patch, const Tensor& proj_weight,
                          const Tensor& proj_bias, const Tensor& pos_enc) {
  if (clip.rank() != 4) {
    throw ShapeError("patch_embed: expected [C,T,H,W], got " + to_string(clip.shape()));
  }
  const std::size_t c = clip.dim(0), t = clip.dim(1), h = clip.dim(2), w = clip.dim(3);
  if (patch == 0 || h % patch != 0 || w % patch != 0) {
    throw ShapeError("patch_embed: patch size " + std::to_string(patch) +
                     " does not divide frame " + std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t gh = h / patch, gw = w / patch;
  const std::size_t count = t * gh * gw, flat = c * patch * patch;
  if (proj_weight.rank() != 2 || proj_weight.dim(0) != flat) {
    throw ShapeError("patch_embed: projection must have " + std::to_string(flat) + " rows");
  }
  const std::size_t d = proj_weight.dim(1);
  if (pos_enc.rank() != 2 || pos_enc.dim(0) < count || pos_enc.dim(1) != d) {
    throw ShapeError("patch_embed: positional table " + to_string(pos_enc.shape()) +
                     " too small for " + std::to_string(count) + " tokens of width " +
                     std::to_string(d));
  }
  Tensor patches({count, flat});
  std::size_t token = 0;
  for (std::size_t f = 0; f < t; ++f) {
    for (std::size_t gy = 0; gy < gh; ++gy) {
      for (std::size_t gx = 0; gx < gw; ++gx, ++token) {
        std::size_t k = 0;
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t dy = 0; dy < patch; ++dy) {
            for (std::size_t dx = 0; dx < patch; ++dx, ++k) {
              patches.at(token, k) = clip.at(ch, f, gy * patch + dy, gx * patch + dx);
            }
          }
        }
      }
    }
  }
  TokenSequence seq{linear(patches, proj_weight, proj_bias), TokenLayout{t, gh, gw, patch, 0}};
  seq.tokens.matrix() += pos_enc.matrix().topRows(static_cast<Eigen::Index>(count));
  return seq;
}

TokenSequence prepend_summary(const TokenSequence& seq, const Vector& token) {
  seq.validate();
  if (static_cast<std::size_t>(token.size()) != seq.width()) {
    throw ShapeError("summary token width " + std::to_string(token.size()) + " vs sequence " +
                     std::to_string(seq.width()));
  }
  Tensor tokens({seq.length() + 1, seq.width()});
  tokens.matrix().row(0) = token.transpose();
  tokens.matrix().bottomRows(static_cast<Eigen::Index>(seq.length())) = seq.tokens.matrix();
  TokenSequence out{std::move(tokens), seq.layout};
  if (out.layout) ++out.layout->prefix;
  return out;
}

RowMatrix attention_weights(const Tensor& tokens, const EncoderParams& params) {
  params.validate();
  const auto x = tokens.matrix();
  const RowMatrix q = (x * params.wq.matrix()).rowwise() + params.bq.vector().transpose();
  const RowMatrix k = (x * params.wk.matrix()).rowwise() + params.bk.vector().transpose();
  RowMatrix a = (q * k.transpose()) / std::sqrt(static_cast<Scalar>(params.d_model()));
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    a.row(r) = softmax(Vector(a.row(r).transpose())).transpose();
  }
  return a;
}

Tensor self_attention(const Tensor& tokens, const EncoderParams& params) {
  params.validate();
  if (tokens.rank() != 2 || tokens.dim(1) != params.d_model()) {
    throw ShapeError("self_attention: tokens " + to_string(tokens.shape()) +
                     " do not match d_model " + std::to_string(params.d_model()));
  }
  return grouped_attention(tokens, params, joint_groups(tokens.dim(0)));
}

TokenSequence encoder_block(const TokenSequence& seq, const EncoderParams& params,
                            AttentionMode mode) {
  seq.validate();
  params.validate();
  if (seq.width() != params.d_model()) {
    throw ShapeError("encoder_block: token width " + std::to_string(seq.width()) +
                     " vs d_model " + std::to_string(params.d_model()));
  }
  if (mode != AttentionMode::joint && !seq.layout) {
    throw ShapeError(std::string("encoder_block: ") + to_string(mode) +
                     " attention needs token layout metadata");
  }
  TokenSequence out = seq;
  switch (mode) {
    case AttentionMode::joint:
      out.tokens = encoder_sublayer(seq.tokens, params, joint_groups(seq.length()));
      break;
    case AttentionMode::temporal:
    case AttentionMode::spatial: {
      auto groups = factorized_groups(*seq.layout, mode == AttentionMode::temporal);
      if (groups.empty()) groups = singleton_groups(seq.length());
      out.tokens = encoder_sublayer(seq.tokens, params, groups);
      break;
    }
    case AttentionMode::divided: {
      bool applied = false;
      for (const bool temporal : {true, false}) {
        const auto groups = factorized_groups(*seq.layout, temporal);
        if (groups.empty()) continue;
        out.tokens = encoder_sublayer(out.tokens, params, groups);
        applied = true;
      }
      // A lone token still passes through one sub-block, as in the other modes.
      if (!applied) out.tokens = encoder_sublayer(seq.tokens, params, singleton_groups(seq.length()));
      break;
    }
  }
  return out;
}

Vector pool_tokens(const Tensor& tokens) {
  if (tokens.rank() != 2 || tokens.dim(0) == 0) {
    throw ShapeError("token pooling needs a nonempty [S, d] sequence");
  }
  return tokens.matrix().colwise().mean().transpose();
}

Vector classify_sequence(const Tensor& tokens, const LinearHead& classifier) {
  if (tokens.empty()) throw ValueError("classify_sequence: empty sequence");
  return softmax(classifier.apply(pool_tokens(tokens)));
}

}  // namespace eitnet
