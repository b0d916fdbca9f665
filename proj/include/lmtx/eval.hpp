#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lmtx/corpus.hpp"
#include "lmtx/index.hpp"

namespace lmtx {

struct MetricsRow {
  std::string name;
  double p1 = 0.0;
  double p3 = 0.0;
  double p5 = 0.0;
  std::optional<double> r1;
  std::optional<double> r3;
  std::optional<double> r5;
  std::optional<double> r10;
  std::uint64_t instances = 0;
  std::uint64_t skipped = 0;
};

// truth must be sorted ascending. Fewer than m predictions leave the
// denominator at m; an empty truth scores zero.
double precision_at(const RankedList& pred, const std::vector<std::uint32_t>& truth,
                    std::size_t m);

// Throws EmptyTruth for an empty truth set; such instances are skipped by
// evaluate instead of averaged.
double recall_at(const RankedList& pred, const std::vector<std::uint32_t>& truth,
                 std::size_t m);

// Macro average over instances. Every document needs at least min(10, L)
// predictions; empty-truth documents count toward precision, are excluded
// from recall and reported in skipped.
MetricsRow evaluate(const std::vector<RankedList>& predictions, const GroundTruth& truth,
                    std::uint32_t label_count, std::string name);

double pseudo_label_quality(const std::vector<std::uint32_t>& pseudo,
                            const std::vector<std::uint32_t>& truth);

// Macro mean of pseudo_label_quality over docs with nonempty truth;
// pseudo_per_doc[i] belongs to doc_ids[i].
double corpus_pseudo_label_quality(const std::vector<std::vector<std::uint32_t>>& pseudo_per_doc,
                                   const std::vector<std::uint32_t>& doc_ids,
                                   const GroundTruth& truth);

enum class ReportFormat { Table, Csv, LineDelimited };

ReportFormat parse_report_format(const std::string& name);
const char* report_format_name(ReportFormat format);

void emit_report(const std::vector<MetricsRow>& rows, ReportFormat format,
                 std::ostream& out);
void emit_report_to_path(const std::vector<MetricsRow>& rows, ReportFormat format,
                         const std::string& path);

}  // namespace lmtx
