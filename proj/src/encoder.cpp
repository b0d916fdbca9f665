#include "lmtx/encoder.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <random>

#include "lmtx/error.hpp"
#include "lmtx/hashing.hpp"
#include "lmtx/text.hpp"

namespace lmtx {
namespace {

constexpr double kZeroNormFloor = 1e-12;

struct UnitEmbedding {
  EmbeddingVector unit;
  double norm = 0.0;
};

UnitEmbedding encode_with_norm(const EncoderParams& params, const FeatureVector& features) {
  UnitEmbedding out;
  out.unit = encode_raw(params, features);
  double sq = 0.0;
  for (double x : out.unit) sq += x * x;
  out.norm = std::sqrt(sq);
  if (out.norm < kZeroNormFloor) {
    fail(ErrorCode::ZeroNorm, "embedding norm " + std::to_string(out.norm) +
                                  " below " + std::to_string(kZeroNormFloor));
  }
  const double inv = 1.0 / out.norm;
  for (double& x : out.unit) x *= inv;
  return out;
}

// With e = u / ||u||, maps dL/de to dL/du: (g - (g . e) e) / ||u||.
void grad_through_normalization(const EmbeddingVector& g, const UnitEmbedding& emb,
                                EmbeddingVector& out) {
  const std::size_t d = g.size();
  double dot = 0.0;
  for (std::size_t i = 0; i < d; ++i) dot += g[i] * emb.unit[i];
  out.resize(d);
  const double inv = 1.0 / emb.norm;
  for (std::size_t i = 0; i < d; ++i) out[i] = (g[i] - dot * emb.unit[i]) * inv;
}

void accumulate_feature_grad(const FeatureVector& features, const EmbeddingVector& du,
                             GradBuffer& grad) {
  for (const auto& [idx, weight] : features.entries) {
    grad.add_column(idx, weight, du.data());
  }
}

}  // namespace

std::uint32_t feature_index(std::uint64_t ngram_hash, std::uint64_t hash_dim) {
  return static_cast<std::uint32_t>(ngram_hash % hash_dim);
}

double feature_sign(std::uint64_t ngram_hash) {
  return (splitmix64(ngram_hash) >> 63) ? -1.0 : 1.0;
}

FeatureVector featurize(std::string_view text, std::uint64_t hash_dim) {
  const std::string lowered = lowercase_ascii(text);
  const std::vector<std::string_view> tokens = tokenize(lowered);

  std::vector<std::pair<std::uint32_t, double>> raw;
  raw.reserve(tokens.size() * 2);
  auto emit = [&](std::string_view ngram) {
    const std::uint64_t h = fnv1a64(ngram);
    raw.emplace_back(feature_index(h, hash_dim), feature_sign(h));
  };
  std::string bigram;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    emit(tokens[i]);
    if (i + 1 < tokens.size()) {
      bigram.assign(tokens[i]);
      bigram.push_back(' ');
      bigram.append(tokens[i + 1]);
      emit(bigram);
    }
  }

  std::sort(raw.begin(), raw.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  FeatureVector features;
  features.entries.reserve(raw.size());
  std::size_t i = 0;
  double sq = 0.0;
  while (i < raw.size()) {
    const std::uint32_t idx = raw[i].first;
    double sum = 0.0;
    while (i < raw.size() && raw[i].first == idx) {
      sum += raw[i].second;
      ++i;
    }
    if (sum != 0.0) {
      features.entries.emplace_back(idx, sum);
      sq += sum * sum;
    }
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& [idx, weight] : features.entries) weight *= inv;
  }
  return features;
}

EncoderParams init_encoder_params(std::uint64_t hash_dim, std::uint64_t embed_dim,
                                  std::uint64_t seed) {
  EncoderParams params;
  params.hash_dim = hash_dim;
  params.embed_dim = embed_dim;
  params.init_seed = seed;
  params.projection.resize(hash_dim * embed_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hash_dim));
  std::mt19937_64 rng(seed);
  for (double& value : params.projection) {
    value = (2.0 * to_unit_interval(rng()) - 1.0) * bound;
  }
  return params;
}

std::uint64_t params_fingerprint(const EncoderParams& params) {
  Fnv1a64 digest;
  digest.update_value(params.version);
  digest.update_value(params.hash_dim);
  digest.update_value(params.embed_dim);
  digest.update_value(params.init_seed);
  digest.update(params.projection.data(), params.projection.size() * sizeof(double));
  return digest.digest();
}

EmbeddingVector encode_raw(const EncoderParams& params, const FeatureVector& features) {
  EmbeddingVector u(params.embed_dim, 0.0);
  for (const auto& [idx, weight] : features.entries) {
    assert(idx < params.hash_dim);
    const double* col = params.column(idx);
    for (std::uint64_t d = 0; d < params.embed_dim; ++d) u[d] += weight * col[d];
  }
  return u;
}

EmbeddingVector encode(const EncoderParams& params, const FeatureVector& features) {
  return encode_with_norm(params, features).unit;
}

double score(const EmbeddingVector& a, const EmbeddingVector& b) {
  assert(a.size() == b.size());
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot;
}

void GradBuffer::init(std::uint64_t hash_dim, std::uint64_t embed_dim) {
  hash_dim_ = hash_dim;
  embed_dim_ = embed_dim;
  values_.assign(hash_dim * embed_dim, 0.0);
  touched_.clear();
  marked_.assign(hash_dim, 0);
}

void GradBuffer::add_column(std::uint32_t column, double coeff, const double* vec) {
  assert(column < hash_dim_);
  if (!marked_[column]) {
    marked_[column] = 1;
    touched_.push_back(column);
  }
  double* dst = values_.data() + static_cast<std::uint64_t>(column) * embed_dim_;
  for (std::uint64_t d = 0; d < embed_dim_; ++d) dst[d] += coeff * vec[d];
}

void GradBuffer::scale_touched(double factor) {
  for (std::uint32_t column : touched_) {
    double* dst = values_.data() + static_cast<std::uint64_t>(column) * embed_dim_;
    for (std::uint64_t d = 0; d < embed_dim_; ++d) dst[d] *= factor;
  }
}

void GradBuffer::clear() {
  for (std::uint32_t column : touched_) {
    double* dst = values_.data() + static_cast<std::uint64_t>(column) * embed_dim_;
    std::fill(dst, dst + embed_dim_, 0.0);
  }
  touched_.clear();
  std::fill(marked_.begin(), marked_.end(), 0);
}

double triplet_loss_and_grad(const EncoderParams& params, const FeatureVector& anchor,
                             const FeatureVector& positive,
                             const std::vector<const FeatureVector*>& negatives,
                             double margin, GradBuffer& grad) {
  const UnitEmbedding a = encode_with_norm(params, anchor);
  const UnitEmbedding p = encode_with_norm(params, positive);
  const double s_pos = score(a.unit, p.unit);
  const std::size_t dim = params.embed_dim;

  double loss = 0.0;
  std::size_t active = 0;
  EmbeddingVector g_anchor(dim, 0.0);
  EmbeddingVector du;
  for (const FeatureVector* negative : negatives) {
    const UnitEmbedding n = encode_with_norm(params, *negative);
    const double hinge = score(a.unit, n.unit) - s_pos + margin;
    if (hinge <= 0.0) continue;
    loss += hinge;
    ++active;
    for (std::size_t d = 0; d < dim; ++d) g_anchor[d] += n.unit[d] - p.unit[d];
    grad_through_normalization(a.unit, n, du);
    accumulate_feature_grad(*negative, du, grad);
  }
  if (active == 0) return 0.0;

  grad_through_normalization(g_anchor, a, du);
  accumulate_feature_grad(anchor, du, grad);

  EmbeddingVector g_pos(dim);
  const double k = -static_cast<double>(active);
  for (std::size_t d = 0; d < dim; ++d) g_pos[d] = k * a.unit[d];
  grad_through_normalization(g_pos, p, du);
  accumulate_feature_grad(positive, du, grad);

  return loss;
}

void AdamWState::init(std::size_t param_count, const AdamWConfig& cfg) {
  config = cfg;
  step = 0;
  m.assign(param_count, 0.0);
  v.assign(param_count, 0.0);
}

void adamw_step(EncoderParams& params, const GradBuffer& grad, AdamWState& opt) {
  assert(grad.values().size() == params.projection.size());
  assert(opt.m.size() == params.projection.size());

  const std::vector<double>& g = grad.values();
  for (std::uint32_t column : grad.touched()) {
    const double* entry = g.data() + static_cast<std::uint64_t>(column) * grad.embed_dim();
    for (std::uint64_t d = 0; d < grad.embed_dim(); ++d) {
      if (!std::isfinite(entry[d])) {
        fail(ErrorCode::NonFiniteGradient,
             "gradient at column " + std::to_string(column) + " is not finite");
      }
    }
  }

  opt.step += 1;
  const AdamWConfig& c = opt.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < params.projection.size(); ++i) {
    const double gi = g[i];
    opt.m[i] = c.beta1 * opt.m[i] + (1.0 - c.beta1) * gi;
    opt.v[i] = c.beta2 * opt.v[i] + (1.0 - c.beta2) * gi * gi;
    const double m_hat = opt.m[i] / bc1;
    const double v_hat = opt.v[i] / bc2;
    params.projection[i] -=
        c.lr * (m_hat / (std::sqrt(v_hat) + c.eps) + c.weight_decay * params.projection[i]);
  }
}

}  // namespace lmtx
