#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lmtx {

struct Document {
  std::uint32_t id = 0;
  std::string text;
};

// Immutable after load; ids are dense and positional (doc i sits at index i).
struct DocumentCollection {
  std::vector<Document> docs;

  std::size_t size() const { return docs.size(); }
  const Document& operator[](std::size_t i) const { return docs[i]; }
};

enum class DocFormat { RawText, Tabular, LineDelimitedRecords };

DocFormat parse_doc_format(const std::string& name);
const char* doc_format_name(DocFormat format);

enum class TabularField { Both, Title, Description };

struct LoadOptions {
  bool allow_empty = false;
  TabularField field = TabularField::Both;
};

struct LoadedDocuments {
  DocumentCollection collection;
  // original id -> dense id, populated for explicit-id formats only.
  std::vector<std::pair<std::uint64_t, std::uint32_t>> id_map;
};

LoadedDocuments load_documents(const std::string& path, DocFormat format,
                               const LoadOptions& options = {});
void save_documents(const DocumentCollection& collection, const std::string& path);
void save_id_map(const std::vector<std::pair<std::uint64_t, std::uint32_t>>& id_map,
                 const std::string& path);

struct LabelSpace {
  std::vector<std::string> texts;  // label k at index k

  std::uint32_t size() const { return static_cast<std::uint32_t>(texts.size()); }
};

LabelSpace load_label_space(const std::string& path);
void save_label_space(const LabelSpace& labels, const std::string& path);

// Evaluation-only relevance sets. Only the oracle teacher backend and the
// eval module may consume this type.
struct GroundTruth {
  std::vector<std::vector<std::uint32_t>> relevant;  // per doc, sorted ascending
  std::vector<std::uint32_t> empty_docs;             // docs with no relevant labels

  std::size_t size() const { return relevant.size(); }
  bool contains(std::uint32_t doc, std::uint32_t label) const;
};

GroundTruth load_ground_truth(const std::string& path, std::uint32_t label_count,
                              std::optional<std::uint32_t> expected_docs = {});
void save_ground_truth(const GroundTruth& truth, const std::string& path);

struct SplitSpec {
  std::uint32_t dev_size = 800;
  std::optional<std::uint32_t> train_subsample;
  std::uint64_t seed = 0;
};

struct Splits {
  std::vector<std::uint32_t> train;  // sorted doc ids
  std::vector<std::uint32_t> dev;    // sorted doc ids
};

// Dev is drawn first so its composition does not depend on the subsample size.
Splits make_splits(const DocumentCollection& docs, const SplitSpec& spec);

}  // namespace lmtx
