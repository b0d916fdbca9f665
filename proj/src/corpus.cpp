#include "lmtx/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "lmtx/error.hpp"
#include "lmtx/text.hpp"

namespace lmtx {
namespace {

using json = nlohmann::json;

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (in.bad()) fail(ErrorCode::IoError, "read failed on " + path);
  return lines;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  return out;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t value = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || s.empty()) return std::nullopt;
  return value;
}

std::string tabular_text(std::string_view title, std::string_view description,
                         TabularField field) {
  switch (field) {
    case TabularField::Title: return std::string(title);
    case TabularField::Description: return std::string(description);
    case TabularField::Both: break;
  }
  std::string combined(title);
  combined.push_back(' ');
  combined.append(description);
  return combined;
}

void append_document(DocumentCollection& collection, std::string text,
                     const LoadOptions& options, std::size_t line_number) {
  std::string normalized = normalize_whitespace(text);
  if (normalized.empty() && !options.allow_empty) {
    fail(ErrorCode::MalformedRecord,
         "empty document at line " + std::to_string(line_number));
  }
  Document doc;
  doc.id = static_cast<std::uint32_t>(collection.docs.size());
  doc.text = std::move(normalized);
  collection.docs.push_back(std::move(doc));
}

}  // namespace

DocFormat parse_doc_format(const std::string& name) {
  if (name == "raw-text") return DocFormat::RawText;
  if (name == "tabular") return DocFormat::Tabular;
  if (name == "line-delimited-records") return DocFormat::LineDelimitedRecords;
  fail(ErrorCode::TypeMismatch, "unknown document format: " + name);
}

const char* doc_format_name(DocFormat format) {
  switch (format) {
    case DocFormat::RawText: return "raw-text";
    case DocFormat::Tabular: return "tabular";
    case DocFormat::LineDelimitedRecords: return "line-delimited-records";
  }
  return "unknown";
}

LoadedDocuments load_documents(const std::string& path, DocFormat format,
                               const LoadOptions& options) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) fail(ErrorCode::EmptyFile, "no records in " + path);

  LoadedDocuments result;
  std::unordered_set<std::uint64_t> seen_ids;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const std::size_t line_number = i + 1;
    switch (format) {
      case DocFormat::RawText:
        append_document(result.collection, line, options, line_number);
        break;
      case DocFormat::Tabular: {
        const std::size_t tab1 = line.find('\t');
        const std::size_t tab2 =
            tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) {
          fail(ErrorCode::MalformedRecord,
               "expected id<TAB>title<TAB>description at line " +
                   std::to_string(line_number));
        }
        const auto original_id = parse_u64(std::string_view(line).substr(0, tab1));
        if (!original_id) {
          fail(ErrorCode::MalformedRecord,
               "bad id field at line " + std::to_string(line_number));
        }
        if (!seen_ids.insert(*original_id).second) {
          fail(ErrorCode::DuplicateExplicitId,
               "id " + std::to_string(*original_id) + " repeats at line " +
                   std::to_string(line_number));
        }
        std::string_view title = std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1);
        std::string_view description = std::string_view(line).substr(tab2 + 1);
        append_document(result.collection, tabular_text(title, description, options.field),
                        options, line_number);
        result.id_map.emplace_back(
            *original_id, static_cast<std::uint32_t>(result.collection.docs.size() - 1));
        break;
      }
      case DocFormat::LineDelimitedRecords: {
        json record;
        try {
          record = json::parse(line);
        } catch (const json::exception& ex) {
          fail(ErrorCode::MalformedRecord,
               "bad json at line " + std::to_string(line_number) + ": " + ex.what());
        }
        if (!record.is_object() || !record.contains("text") ||
            !record.at("text").is_string()) {
          fail(ErrorCode::MalformedRecord,
               "record missing string \"text\" at line " + std::to_string(line_number));
        }
        if (record.contains("id")) {
          if (!record.at("id").is_number_unsigned()) {
            fail(ErrorCode::MalformedRecord,
                 "non-integer id at line " + std::to_string(line_number));
          }
          const std::uint64_t original_id = record.at("id").get<std::uint64_t>();
          if (!seen_ids.insert(original_id).second) {
            fail(ErrorCode::DuplicateExplicitId,
                 "id " + std::to_string(original_id) + " repeats at line " +
                     std::to_string(line_number));
          }
          append_document(result.collection, record.at("text").get<std::string>(),
                          options, line_number);
          result.id_map.emplace_back(
              original_id, static_cast<std::uint32_t>(result.collection.docs.size() - 1));
        } else {
          append_document(result.collection, record.at("text").get<std::string>(),
                          options, line_number);
        }
        break;
      }
    }
  }
  return result;
}

void save_documents(const DocumentCollection& collection, const std::string& path) {
  auto out = open_out(path);
  for (const Document& doc : collection.docs) {
    out << doc.text << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed on " + path);
}

void save_id_map(const std::vector<std::pair<std::uint64_t, std::uint32_t>>& id_map,
                 const std::string& path) {
  auto out = open_out(path);
  for (const auto& [original, dense] : id_map) {
    out << original << '\t' << dense << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed on " + path);
}

LabelSpace load_label_space(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) fail(ErrorCode::EmptyFile, "no labels in " + path);
  LabelSpace labels;
  labels.texts.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string normalized = normalize_whitespace(lines[i]);
    if (normalized.empty()) {
      fail(ErrorCode::EmptyLabelText, "empty label text at line " + std::to_string(i + 1));
    }
    labels.texts.push_back(std::move(normalized));
  }
  return labels;
}

void save_label_space(const LabelSpace& labels, const std::string& path) {
  auto out = open_out(path);
  for (const std::string& text : labels.texts) {
    out << text << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed on " + path);
}

bool GroundTruth::contains(std::uint32_t doc, std::uint32_t label) const {
  if (doc >= relevant.size()) return false;
  const auto& set = relevant[doc];
  return std::binary_search(set.begin(), set.end(), label);
}

GroundTruth load_ground_truth(const std::string& path, std::uint32_t label_count,
                              std::optional<std::uint32_t> expected_docs) {
  const std::vector<std::string> lines = read_lines(path);
  GroundTruth truth;
  truth.relevant.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_number = i + 1;
    std::vector<std::uint32_t> ids;
    std::stringstream row(lines[i]);
    std::string field;
    while (std::getline(row, field, ',')) {
      std::string trimmed = normalize_whitespace(field);
      if (trimmed.empty()) {
        fail(ErrorCode::MalformedRecord,
             "empty label field at line " + std::to_string(line_number));
      }
      const auto value = parse_u64(trimmed);
      if (!value) {
        fail(ErrorCode::MalformedRecord,
             "bad label id \"" + trimmed + "\" at line " + std::to_string(line_number));
      }
      if (*value >= label_count) {
        fail(ErrorCode::LabelIdOutOfRange,
             "label id " + std::to_string(*value) + " at line " +
                 std::to_string(line_number) + " exceeds label count " +
                 std::to_string(label_count));
      }
      ids.push_back(static_cast<std::uint32_t>(*value));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.empty()) {
      truth.empty_docs.push_back(static_cast<std::uint32_t>(i));
    }
    truth.relevant.push_back(std::move(ids));
  }
  if (expected_docs && truth.relevant.size() != *expected_docs) {
    fail(ErrorCode::RowCountMismatch,
         "truth has " + std::to_string(truth.relevant.size()) + " rows, expected " +
             std::to_string(*expected_docs));
  }
  return truth;
}

void save_ground_truth(const GroundTruth& truth, const std::string& path) {
  auto out = open_out(path);
  for (const auto& ids : truth.relevant) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) out << ',';
      out << ids[i];
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed on " + path);
}

Splits make_splits(const DocumentCollection& docs, const SplitSpec& spec) {
  const std::size_t n = docs.size();
  if (spec.dev_size >= n) {
    fail(ErrorCode::SpecInfeasible,
         "dev_size " + std::to_string(spec.dev_size) + " must be smaller than corpus size " +
             std::to_string(n));
  }
  const std::size_t remainder = n - spec.dev_size;
  if (spec.train_subsample && *spec.train_subsample > remainder) {
    fail(ErrorCode::SpecInfeasible,
         "train_subsample " + std::to_string(*spec.train_subsample) +
             " exceeds available " + std::to_string(remainder) + " documents");
  }

  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  std::mt19937_64 rng(spec.seed);
  deterministic_shuffle(order, rng);

  Splits splits;
  splits.dev.assign(order.begin(), order.begin() + spec.dev_size);
  const std::size_t train_count = spec.train_subsample ? *spec.train_subsample : remainder;
  splits.train.assign(order.begin() + spec.dev_size,
                      order.begin() + spec.dev_size + train_count);
  std::sort(splits.dev.begin(), splits.dev.end());
  std::sort(splits.train.begin(), splits.train.end());
  return splits;
}

}  // namespace lmtx
