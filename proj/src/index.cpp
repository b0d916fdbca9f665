#include "lmtx/index.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <random>

#include "lmtx/error.hpp"
#include "lmtx/hashing.hpp"

namespace lmtx {
namespace {

// Distances are negated inner products so smaller means more similar; the
// (distance, id) pair gives every comparison a deterministic total order.
using Scored = std::pair<double, std::uint32_t>;

double dot(const double* a, const double* b, std::uint64_t dim) {
  double s = 0.0;
  for (std::uint64_t i = 0; i < dim; ++i) s += a[i] * b[i];
  return s;
}

void put_bytes(std::ofstream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

template <typename T>
void put_value(std::ofstream& out, T value) {
  put_bytes(out, &value, sizeof(T));
}

void get_bytes(std::ifstream& in, void* data, std::size_t size, const std::string& path) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (in.gcount() != static_cast<std::streamsize>(size)) {
    fail(ErrorCode::IoError, "truncated index file " + path);
  }
}

template <typename T>
T get_value(std::ifstream& in, const std::string& path) {
  T value;
  get_bytes(in, &value, sizeof(T), path);
  return value;
}

constexpr char kIndexMagic[4] = {'L', 'M', 'T', 'I'};
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

class HnswGraph {
 public:
  std::uint32_t entry = 0;
  std::uint32_t max_level = 0;
  std::uint32_t m = 32;
  // links[node][layer] lists the node's neighbors on that layer.
  std::vector<std::vector<std::vector<std::uint32_t>>> links;

  void build(const EmbeddingMatrix& labels, const HnswParams& params) {
    const std::size_t n = labels.count();
    m = params.m;
    links.assign(n, {});

    const double level_scale =
        1.0 / std::log(static_cast<double>(std::max<std::uint32_t>(2, params.m)));
    std::mt19937_64 rng(params.seed);
    auto sample_level = [&] {
      double u;
      do {
        u = to_unit_interval(rng());
      } while (u <= 0.0);
      return static_cast<std::uint32_t>(-std::log(u) * level_scale);
    };

    for (std::uint32_t node = 0; node < n; ++node) {
      const std::uint32_t level = sample_level();
      links[node].assign(level + 1, {});
      const double* point = labels.row(node);
      if (node == 0) {
        entry = 0;
        max_level = level;
        continue;
      }

      std::vector<Scored> eps{{-dot(labels.row(entry), point, labels.dim), entry}};
      for (std::uint32_t layer = max_level; layer > level; --layer) {
        eps = search_layer(labels, point, std::move(eps), layer, 1);
        eps.resize(1);
      }

      for (std::uint32_t layer = std::min(level, max_level) + 1; layer-- > 0;) {
        eps = search_layer(labels, point, std::move(eps), layer, params.ef_construction);
        const std::uint32_t cap = layer == 0 ? 2 * m : m;
        links[node][layer] = select_neighbors(labels, eps, m);
        for (std::uint32_t nb : links[node][layer]) {
          auto& list = links[nb][layer];
          list.push_back(node);
          if (list.size() > cap) {
            std::vector<Scored> candidates;
            candidates.reserve(list.size());
            for (std::uint32_t other : list) {
              candidates.emplace_back(-dot(labels.row(other), labels.row(nb), labels.dim),
                                      other);
            }
            list = select_neighbors(labels, candidates, cap);
          }
        }
      }

      if (level > max_level) {
        entry = node;
        max_level = level;
      }
    }
  }

  RankedList search(const EmbeddingMatrix& labels, const double* query, std::size_t k,
                    std::uint32_t ef_search) const {
    if (labels.count() == 0 || k == 0) return {};
    std::vector<Scored> eps{{-dot(labels.row(entry), query, labels.dim), entry}};
    for (std::uint32_t layer = max_level; layer > 0; --layer) {
      eps = search_layer(labels, query, std::move(eps), layer, 1);
      eps.resize(1);
    }
    const auto ef = std::max<std::uint32_t>(ef_search, static_cast<std::uint32_t>(k));
    const auto found = search_layer(labels, query, std::move(eps), 0, ef);
    RankedList out;
    out.reserve(std::min(k, found.size()));
    for (std::size_t i = 0; i < found.size() && i < k; ++i) {
      out.emplace_back(found[i].second, -found[i].first);
    }
    return out;
  }

 private:
  // Best-first beam search on one layer; returns up to ef hits sorted by
  // (distance, id) ascending.
  std::vector<Scored> search_layer(const EmbeddingMatrix& labels, const double* query,
                                   std::vector<Scored> entries, std::uint32_t layer,
                                   std::uint32_t ef) const {
    std::vector<char> visited(labels.count(), 0);
    std::priority_queue<Scored, std::vector<Scored>, std::greater<Scored>> candidates;
    std::priority_queue<Scored> results;
    for (const Scored& e : entries) {
      if (visited[e.second]) continue;
      visited[e.second] = 1;
      candidates.push(e);
      results.push(e);
    }
    while (!candidates.empty()) {
      const Scored nearest = candidates.top();
      if (nearest.first > results.top().first) break;
      candidates.pop();
      for (std::uint32_t nb : links[nearest.second][layer]) {
        if (visited[nb]) continue;
        visited[nb] = 1;
        const Scored entry_nb{-dot(labels.row(nb), query, labels.dim), nb};
        if (results.size() < ef || entry_nb < results.top()) {
          candidates.push(entry_nb);
          results.push(entry_nb);
          if (results.size() > ef) results.pop();
        }
      }
    }
    std::vector<Scored> out;
    out.reserve(results.size());
    while (!results.empty()) {
      out.push_back(results.top());
      results.pop();
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  // Keeps a candidate only if it sits closer to the target than to every
  // neighbor already kept; spreads links across directions.
  std::vector<std::uint32_t> select_neighbors(const EmbeddingMatrix& labels,
                                              std::vector<Scored> candidates,
                                              std::uint32_t max_count) const {
    std::sort(candidates.begin(), candidates.end());
    std::vector<std::uint32_t> selected;
    for (const auto& [dist_to_target, id] : candidates) {
      if (selected.size() >= max_count) break;
      bool keep = true;
      for (std::uint32_t s : selected) {
        if (-dot(labels.row(id), labels.row(s), labels.dim) < dist_to_target) {
          keep = false;
          break;
        }
      }
      if (keep) selected.push_back(id);
    }
    return selected;
  }
};

EmbeddingMatrix embed_all(const EncoderParams& params,
                          const std::vector<FeatureVector>& features) {
  EmbeddingMatrix matrix;
  matrix.dim = params.embed_dim;
  matrix.data.reserve(features.size() * params.embed_dim);
  for (const FeatureVector& f : features) matrix.append(encode(params, f));
  return matrix;
}

IndexBackend parse_index_backend(const std::string& name) {
  if (name == "exact") return IndexBackend::Exact;
  if (name == "hnsw") return IndexBackend::Hnsw;
  fail(ErrorCode::TypeMismatch, "unknown index backend: " + name);
}

const char* index_backend_name(IndexBackend backend) {
  return backend == IndexBackend::Exact ? "exact" : "hnsw";
}

RankedList exact_topk(const EmbeddingMatrix& labels, const EmbeddingVector& query,
                      std::size_t k) {
  const std::size_t n = labels.count();
  const std::size_t take = std::min(k, n);
  if (take == 0) return {};
  std::vector<Scored> scored(n);
  for (std::size_t i = 0; i < n; ++i) {
    scored[i] = {-dot(labels.row(i), query.data(), labels.dim),
                 static_cast<std::uint32_t>(i)};
  }
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end());
  RankedList out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.emplace_back(scored[i].second, -scored[i].first);
  return out;
}

LabelIndex::LabelIndex() = default;
LabelIndex::LabelIndex(LabelIndex&&) noexcept = default;
LabelIndex& LabelIndex::operator=(LabelIndex&&) noexcept = default;
LabelIndex::~LabelIndex() = default;

LabelIndex LabelIndex::build(const EmbeddingMatrix& labels, IndexBackend backend,
                             const HnswParams& hnsw, std::uint64_t params_fingerprint) {
  if (labels.count() == 0) {
    fail(ErrorCode::SpecInfeasible, "cannot index an empty label space");
  }
  for (std::size_t i = 0; i < labels.count(); ++i) {
    const double norm = std::sqrt(dot(labels.row(i), labels.row(i), labels.dim));
    if (std::abs(norm - 1.0) > 1e-4) {
      fail(ErrorCode::NonUnitRow, "label row " + std::to_string(i) + " has norm " +
                                      std::to_string(norm));
    }
  }
  LabelIndex index;
  index.backend_ = backend;
  index.hnsw_params_ = hnsw;
  index.fingerprint_ = params_fingerprint;
  index.labels_ = labels;
  if (backend == IndexBackend::Hnsw) {
    index.graph_ = std::make_unique<HnswGraph>();
    index.graph_->build(index.labels_, hnsw);
  }
  return index;
}

RankedList LabelIndex::query_topk(const EmbeddingVector& query, std::size_t k) const {
  assert(query.size() == labels_.dim);
  if (backend_ == IndexBackend::Exact) return exact_topk(labels_, query, k);
  return graph_->search(labels_, query.data(), k, hnsw_params_.ef_search);
}

void LabelIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);

  put_bytes(out, kIndexMagic, sizeof(kIndexMagic));
  put_value(out, kIndexVersion);
  put_value(out, static_cast<std::uint32_t>(backend_));
  put_value(out, static_cast<std::uint64_t>(labels_.count()));
  put_value(out, labels_.dim);
  put_value(out, fingerprint_);
  put_bytes(out, labels_.data.data(), labels_.data.size() * sizeof(double));

  if (backend_ == IndexBackend::Hnsw) {
    put_value(out, hnsw_params_.m);
    put_value(out, hnsw_params_.ef_construction);
    put_value(out, hnsw_params_.ef_search);
    put_value(out, hnsw_params_.seed);
    put_value(out, graph_->entry);
    put_value(out, graph_->max_level);
    for (const auto& node : graph_->links) {
      put_value(out, static_cast<std::uint32_t>(node.size()));
      for (const auto& layer : node) {
        put_value(out, static_cast<std::uint32_t>(layer.size()));
        put_bytes(out, layer.data(), layer.size() * sizeof(std::uint32_t));
      }
    }
  }
  if (!out) fail(ErrorCode::IoError, "write failed on " + path);
}

LabelIndex LabelIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);

  char magic[4];
  get_bytes(in, magic, sizeof(magic), path);
  if (std::memcmp(magic, kIndexMagic, sizeof(kIndexMagic)) != 0) {
    fail(ErrorCode::IoError, "not an index file: " + path);
  }
  const auto version = get_value<std::uint32_t>(in, path);
  if (version != kIndexVersion) {
    fail(ErrorCode::VersionMismatch, "index format " + std::to_string(version) +
                                         ", supported " + std::to_string(kIndexVersion));
  }

  LabelIndex index;
  const auto backend = get_value<std::uint32_t>(in, path);
  index.backend_ = backend == 0 ? IndexBackend::Exact : IndexBackend::Hnsw;
  const auto count = get_value<std::uint64_t>(in, path);
  index.labels_.dim = get_value<std::uint64_t>(in, path);
  index.fingerprint_ = get_value<std::uint64_t>(in, path);
  index.labels_.data.resize(count * index.labels_.dim);
  get_bytes(in, index.labels_.data.data(), index.labels_.data.size() * sizeof(double),
            path);

  if (index.backend_ == IndexBackend::Hnsw) {
    index.hnsw_params_.m = get_value<std::uint32_t>(in, path);
    index.hnsw_params_.ef_construction = get_value<std::uint32_t>(in, path);
    index.hnsw_params_.ef_search = get_value<std::uint32_t>(in, path);
    index.hnsw_params_.seed = get_value<std::uint64_t>(in, path);
    index.graph_ = std::make_unique<HnswGraph>();
    index.graph_->m = index.hnsw_params_.m;
    index.graph_->entry = get_value<std::uint32_t>(in, path);
    index.graph_->max_level = get_value<std::uint32_t>(in, path);
    index.graph_->links.resize(count);
    for (auto& node : index.graph_->links) {
      node.resize(get_value<std::uint32_t>(in, path));
      for (auto& layer : node) {
        layer.resize(get_value<std::uint32_t>(in, path));
        get_bytes(in, layer.data(), layer.size() * sizeof(std::uint32_t), path);
      }
    }
  }
  return index;
}

Prediction predict_topm(const LabelIndex& index, const EncoderParams& params,
                        const std::vector<FeatureVector>& docs, std::size_t m) {
  if (index.fingerprint() != params_fingerprint(params)) {
    fail(ErrorCode::StaleIndex,
         "index was built from different encoder parameters; rebuild it");
  }
  Prediction out;
  out.lists.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    try {
      out.lists.push_back(index.query_topk(encode(params, docs[i]), m));
    } catch (const Error& err) {
      if (err.code() != ErrorCode::ZeroNorm) throw;
      out.lists.emplace_back();
      out.skipped.push_back(static_cast<std::uint32_t>(i));
    }
  }
  return out;
}

}  // namespace lmtx
