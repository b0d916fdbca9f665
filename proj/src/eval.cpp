#include "lmtx/eval.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "lmtx/error.hpp"

namespace lmtx {
namespace {

std::size_t hits_in_top(const RankedList& pred, const std::vector<std::uint32_t>& truth,
                        std::size_t m) {
  std::size_t hits = 0;
  const std::size_t take = std::min(m, pred.size());
  for (std::size_t i = 0; i < take; ++i) {
    if (std::binary_search(truth.begin(), truth.end(), pred[i].first)) ++hits;
  }
  return hits;
}

std::string shortest_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string csv_field(const std::optional<double>& value) {
  return value ? shortest_double(*value) : std::string();
}

std::string table_field(double value) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

std::string table_field(const std::optional<double>& value) {
  return value ? table_field(*value) : std::string("-");
}

void emit_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << "name,P@1,P@3,P@5,R@1,R@3,R@5,R@10,n,skipped\n";
  for (const MetricsRow& row : rows) {
    out << row.name << ',' << shortest_double(row.p1) << ',' << shortest_double(row.p3)
        << ',' << shortest_double(row.p5) << ',' << csv_field(row.r1) << ','
        << csv_field(row.r3) << ',' << csv_field(row.r5) << ',' << csv_field(row.r10)
        << ',' << row.instances << ',' << row.skipped << '\n';
  }
}

void emit_table(const std::vector<MetricsRow>& rows, std::ostream& out) {
  const char* headers[] = {"name", "P@1", "P@3", "P@5", "R@1",
                           "R@3",  "R@5", "R@10", "n",  "skipped"};
  std::vector<std::vector<std::string>> cells;
  for (const MetricsRow& row : rows) {
    cells.push_back({row.name, table_field(row.p1), table_field(row.p3),
                     table_field(row.p5), table_field(row.r1), table_field(row.r3),
                     table_field(row.r5), table_field(row.r10),
                     std::to_string(row.instances), std::to_string(row.skipped)});
  }
  std::size_t widths[10];
  for (std::size_t c = 0; c < 10; ++c) {
    widths[c] = std::string(headers[c]).size();
    for (const auto& row : cells) widths[c] = std::max(widths[c], row[c].size());
  }
  auto emit_row = [&](auto&& get) {
    for (std::size_t c = 0; c < 10; ++c) {
      if (c) out << "  ";
      out << std::left << std::setw(static_cast<int>(widths[c])) << get(c);
    }
    out << '\n';
  };
  emit_row([&](std::size_t c) { return headers[c]; });
  for (const auto& row : cells) {
    emit_row([&](std::size_t c) { return row[c]; });
  }
}

void emit_records(const std::vector<MetricsRow>& rows, std::ostream& out) {
  for (const MetricsRow& row : rows) {
    nlohmann::json record{{"name", row.name}, {"P@1", row.p1},        {"P@3", row.p3},
                          {"P@5", row.p5},    {"n", row.instances},   {"skipped", row.skipped}};
    if (row.r1) record["R@1"] = *row.r1;
    if (row.r3) record["R@3"] = *row.r3;
    if (row.r5) record["R@5"] = *row.r5;
    if (row.r10) record["R@10"] = *row.r10;
    out << record.dump() << '\n';
  }
}

}  // namespace

double precision_at(const RankedList& pred, const std::vector<std::uint32_t>& truth,
                    std::size_t m) {
  return static_cast<double>(hits_in_top(pred, truth, m)) / static_cast<double>(m);
}

double recall_at(const RankedList& pred, const std::vector<std::uint32_t>& truth,
                 std::size_t m) {
  if (truth.empty()) fail(ErrorCode::EmptyTruth, "recall undefined for empty truth");
  return static_cast<double>(hits_in_top(pred, truth, m)) /
         static_cast<double>(truth.size());
}

MetricsRow evaluate(const std::vector<RankedList>& predictions, const GroundTruth& truth,
                    std::uint32_t label_count, std::string name) {
  if (predictions.size() != truth.size()) {
    fail(ErrorCode::MissingPredictions,
         "have predictions for " + std::to_string(predictions.size()) + " of " +
             std::to_string(truth.size()) + " documents");
  }
  const std::size_t needed = std::min<std::size_t>(10, label_count);

  MetricsRow row;
  row.name = std::move(name);
  row.instances = predictions.size();
  double p1 = 0.0, p3 = 0.0, p5 = 0.0;
  double r1 = 0.0, r3 = 0.0, r5 = 0.0, r10 = 0.0;
  for (std::size_t doc = 0; doc < predictions.size(); ++doc) {
    const RankedList& pred = predictions[doc];
    if (pred.size() < needed) {
      fail(ErrorCode::MissingPredictions,
           "document " + std::to_string(doc) + " has " + std::to_string(pred.size()) +
               " predictions, needs " + std::to_string(needed));
    }
    const auto& relevant = truth.relevant[doc];
    p1 += precision_at(pred, relevant, 1);
    p3 += precision_at(pred, relevant, 3);
    p5 += precision_at(pred, relevant, 5);
    if (relevant.empty()) {
      row.skipped += 1;
      continue;
    }
    r1 += recall_at(pred, relevant, 1);
    r3 += recall_at(pred, relevant, 3);
    r5 += recall_at(pred, relevant, 5);
    r10 += recall_at(pred, relevant, 10);
  }

  const auto n = static_cast<double>(row.instances);
  if (row.instances > 0) {
    row.p1 = p1 / n;
    row.p3 = p3 / n;
    row.p5 = p5 / n;
  }
  const std::uint64_t with_truth = row.instances - row.skipped;
  if (with_truth > 0) {
    const auto d = static_cast<double>(with_truth);
    row.r1 = r1 / d;
    row.r3 = r3 / d;
    row.r5 = r5 / d;
    row.r10 = r10 / d;
  }
  return row;
}

double pseudo_label_quality(const std::vector<std::uint32_t>& pseudo,
                            const std::vector<std::uint32_t>& truth) {
  if (truth.empty()) fail(ErrorCode::EmptyTruth, "quality undefined for empty truth");
  std::size_t hits = 0;
  for (const std::uint32_t label : pseudo) {
    if (std::binary_search(truth.begin(), truth.end(), label)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double corpus_pseudo_label_quality(const std::vector<std::vector<std::uint32_t>>& pseudo_per_doc,
                                   const std::vector<std::uint32_t>& doc_ids,
                                   const GroundTruth& truth) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < doc_ids.size(); ++i) {
    const auto& relevant = truth.relevant.at(doc_ids[i]);
    if (relevant.empty()) continue;
    sum += pseudo_label_quality(pseudo_per_doc[i], relevant);
    ++counted;
  }
  if (counted == 0) {
    fail(ErrorCode::EmptyTruth, "no document with nonempty truth to average over");
  }
  return sum / static_cast<double>(counted);
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "table") return ReportFormat::Table;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "line-delimited-records") return ReportFormat::LineDelimited;
  fail(ErrorCode::TypeMismatch, "unknown report format: " + name);
}

const char* report_format_name(ReportFormat format) {
  switch (format) {
    case ReportFormat::Table: return "table";
    case ReportFormat::Csv: return "csv";
    case ReportFormat::LineDelimited: return "line-delimited-records";
  }
  return "unknown";
}

void emit_report(const std::vector<MetricsRow>& rows, ReportFormat format,
                 std::ostream& out) {
  switch (format) {
    case ReportFormat::Table: emit_table(rows, out); break;
    case ReportFormat::Csv: emit_csv(rows, out); break;
    case ReportFormat::LineDelimited: emit_records(rows, out); break;
  }
  if (!out) fail(ErrorCode::IoError, "report stream write failed");
}

void emit_report_to_path(const std::vector<MetricsRow>& rows, ReportFormat format,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  emit_report(rows, format, out);
}

}  // namespace lmtx
