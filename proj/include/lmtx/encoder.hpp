#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lmtx {

// Sparse hashed n-gram features: entries sorted by index, no explicit zeros,
// L2-normalized when produced by featurize.
struct FeatureVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

std::uint32_t feature_index(std::uint64_t ngram_hash, std::uint64_t hash_dim);
double feature_sign(std::uint64_t ngram_hash);

FeatureVector featurize(std::string_view text, std::uint64_t hash_dim);

using EmbeddingVector = std::vector<double>;

// Trainable D x H projection shared by document and label encoding.
// Stored column major: column c (one hashed feature) occupies
// projection[c * embed_dim .. (c + 1) * embed_dim).
struct EncoderParams {
  std::uint64_t hash_dim = 0;
  std::uint64_t embed_dim = 0;
  std::uint32_t version = 1;
  std::uint64_t init_seed = 0;
  std::vector<double> projection;

  double* column(std::uint64_t c) { return projection.data() + c * embed_dim; }
  const double* column(std::uint64_t c) const {
    return projection.data() + c * embed_dim;
  }
};

EncoderParams init_encoder_params(std::uint64_t hash_dim, std::uint64_t embed_dim,
                                  std::uint64_t seed);

std::uint64_t params_fingerprint(const EncoderParams& params);

EmbeddingVector encode_raw(const EncoderParams& params, const FeatureVector& features);
EmbeddingVector encode(const EncoderParams& params, const FeatureVector& features);

double score(const EmbeddingVector& a, const EmbeddingVector& b);

// Dense gradient accumulator shaped like the projection; tracks which columns
// were written so clearing and scaling stay proportional to the batch.
class GradBuffer {
 public:
  void init(std::uint64_t hash_dim, std::uint64_t embed_dim);
  void add_column(std::uint32_t column, double coeff, const double* vec);
  void scale_touched(double factor);
  void clear();

  const std::vector<double>& values() const { return values_; }
  const std::vector<std::uint32_t>& touched() const { return touched_; }
  std::uint64_t embed_dim() const { return embed_dim_; }

 private:
  std::uint64_t hash_dim_ = 0;
  std::uint64_t embed_dim_ = 0;
  std::vector<double> values_;
  std::vector<std::uint32_t> touched_;
  std::vector<char> marked_;
};

// Hinge loss over one anchor, its positive and a set of negatives:
// sum_k [score(anchor, neg_k) - score(anchor, pos) + margin]_+ .
// Gradients flow through the normalization and accumulate into grad.
double triplet_loss_and_grad(const EncoderParams& params, const FeatureVector& anchor,
                             const FeatureVector& positive,
                             const std::vector<const FeatureVector*>& negatives,
                             double margin, GradBuffer& grad);

struct AdamWConfig {
  double lr = 2e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamWState {
  AdamWConfig config;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  void init(std::size_t param_count, const AdamWConfig& cfg);
};

void adamw_step(EncoderParams& params, const GradBuffer& grad, AdamWState& opt);

struct Checkpoint {
  EncoderParams params;
  AdamWState opt;
};

void save_checkpoint(const std::string& path, const EncoderParams& params,
                     const AdamWState& opt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lmtx
