#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lmtx/corpus.hpp"
#include "lmtx/eval.hpp"
#include "lmtx/index.hpp"
#include "lmtx/synth.hpp"
#include "lmtx/trainer.hpp"

namespace lmtx {

enum class TeacherKind { Oracle, Lexical, Remote };

TeacherKind parse_teacher_kind(const std::string& name);
const char* teacher_kind_name(TeacherKind kind);

// Fully resolved run configuration. Every field maps to one flat config key;
// parse_config applies defaults, then the file, then overrides.
struct RunConfig {
  // data
  std::string docs_path;
  DocFormat docs_format = DocFormat::RawText;
  TabularField tabular_field = TabularField::Both;
  bool allow_empty_docs = false;
  std::string labels_path;
  std::string truth_path;
  std::string test_docs_path;
  std::string test_truth_path;
  std::uint32_t dev_size = 800;
  std::optional<std::uint32_t> train_subsample;

  // encoder
  std::uint64_t hash_dim = 32768;
  std::uint64_t embed_dim = 64;
  std::string init_from;

  // label index
  IndexBackend index_backend = IndexBackend::Exact;
  HnswParams hnsw;
  std::string index_path;

  // teacher
  TeacherKind teacher_backend = TeacherKind::Oracle;
  std::string teacher_endpoint;
  std::string teacher_model;
  int teacher_timeout_ms = 30000;
  int teacher_max_retries = 3;
  int teacher_concurrency = 4;
  double oracle_flip_noise = 0.0;
  double lexical_threshold = 0.2;
  std::string prompt_template = "eurlex";
  std::string prompt_template_file;
  std::uint32_t max_doc_tokens = 430;
  std::string cache_path;

  // training loop
  TrainConfig trainer;

  // run artifacts
  std::string run_id = "run";
  std::string out_dir = "runs";
  bool keep_cycle_checkpoints = false;
  std::uint32_t threads = 1;

  // inference and reporting
  std::uint32_t top_m = 10;
  std::string predictions_path;
  ReportFormat report_format = ReportFormat::Table;
  std::string report_path;

  // synthetic benchmark
  SynthSpec synth;
  std::string synth_dir;

  // shortlist sweep
  std::vector<std::uint32_t> sweep_shortlist_sizes{5, 10, 20};
  std::string sweep_report_path;
};

// Applies one key=value assignment; rejects unknown keys and unparsable
// values. `where` names the source (file:line or the override flag) for
// error messages.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value,
                    const std::string& where);

// Empty path means no file: defaults plus overrides only. Overrides are
// key=value strings and win over file values.
RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides);

// Emits every key in canonical order; feeding the output back through
// parse_config reproduces the configuration.
void print_config(const RunConfig& cfg, std::ostream& out);

}  // namespace lmtx
