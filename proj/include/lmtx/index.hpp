#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lmtx/encoder.hpp"

namespace lmtx {

// (label id, cosine score) pairs, scores non-increasing, ties by lower id.
using RankedList = std::vector<std::pair<std::uint32_t, double>>;

struct EmbeddingMatrix {
  std::uint64_t dim = 0;
  std::vector<double> data;

  std::size_t count() const { return dim ? data.size() / dim : 0; }
  const double* row(std::size_t i) const { return data.data() + i * dim; }
  void append(const EmbeddingVector& v) { data.insert(data.end(), v.begin(), v.end()); }
};

EmbeddingMatrix embed_all(const EncoderParams& params,
                          const std::vector<FeatureVector>& features);

enum class IndexBackend { Exact, Hnsw };

IndexBackend parse_index_backend(const std::string& name);
const char* index_backend_name(IndexBackend backend);

struct HnswParams {
  std::uint32_t m = 32;
  std::uint32_t ef_construction = 200;
  std::uint32_t ef_search = 100;
  std::uint64_t seed = 42;
};

RankedList exact_topk(const EmbeddingMatrix& labels, const EmbeddingVector& query,
                      std::size_t k);

class HnswGraph;

// Immutable after build; queries are safe to run concurrently.
class LabelIndex {
 public:
  LabelIndex(LabelIndex&&) noexcept;
  LabelIndex& operator=(LabelIndex&&) noexcept;
  ~LabelIndex();

  static LabelIndex build(const EmbeddingMatrix& labels, IndexBackend backend,
                          const HnswParams& hnsw, std::uint64_t params_fingerprint);

  RankedList query_topk(const EmbeddingVector& query, std::size_t k) const;

  std::size_t label_count() const { return labels_.count(); }
  IndexBackend backend() const { return backend_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  void save(const std::string& path) const;
  static LabelIndex load(const std::string& path);

 private:
  LabelIndex();

  IndexBackend backend_ = IndexBackend::Exact;
  HnswParams hnsw_params_;
  std::uint64_t fingerprint_ = 0;
  EmbeddingMatrix labels_;
  std::unique_ptr<HnswGraph> graph_;
};

struct Prediction {
  std::vector<RankedList> lists;
  std::vector<std::uint32_t> skipped;
};

// Top-m retrieval for every document; refuses an index built from other
// parameters, skips documents whose embedding vanishes and reports them.
Prediction predict_topm(const LabelIndex& index, const EncoderParams& params,
                        const std::vector<FeatureVector>& docs, std::size_t m);

}  // namespace lmtx
