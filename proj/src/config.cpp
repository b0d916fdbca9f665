#include "lmtx/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "lmtx/error.hpp"

namespace lmtx {

TeacherKind parse_teacher_kind(const std::string& name) {
  if (name == "oracle") return TeacherKind::Oracle;
  if (name == "lexical") return TeacherKind::Lexical;
  if (name == "remote") return TeacherKind::Remote;
  fail(ErrorCode::TypeMismatch,
       "unknown teacher backend '" + name + "' (expected oracle, lexical or remote)");
}

const char* teacher_kind_name(TeacherKind kind) {
  switch (kind) {
    case TeacherKind::Oracle: return "oracle";
    case TeacherKind::Lexical: return "lexical";
    default: return "remote";
  }
}

namespace {

std::string trim(std::string_view s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && (s[begin] == ' ' || s[begin] == '\t')) ++begin;
  while (end > begin && (s[end - 1] == ' ' || s[end - 1] == '\t')) --end;
  return std::string(s.substr(begin, end - begin));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& where, const char* expected) {
  fail(ErrorCode::TypeMismatch, where + ": key '" + key + "' expects " + expected +
                                    ", got '" + value + "'");
}

struct Assignment {
  const std::string& key;
  const std::string& value;
  const std::string& where;

  bool boolean() const {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    bad_value(key, value, where, "a boolean");
  }

  template <typename T>
  T integer() const {
    T parsed{};
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    const auto result = std::from_chars(first, last, parsed);
    if (result.ec != std::errc{} || result.ptr != last) {
      bad_value(key, value, where, "an integer");
    }
    return parsed;
  }

  double real() const {
    double parsed{};
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    const auto result = std::from_chars(first, last, parsed);
    if (result.ec != std::errc{} || result.ptr != last) {
      bad_value(key, value, where, "a number");
    }
    return parsed;
  }

  std::vector<std::uint32_t> id_list() const {
    std::vector<std::uint32_t> out;
    std::size_t start = 0;
    while (start <= value.size()) {
      auto comma = value.find(',', start);
      if (comma == std::string::npos) comma = value.size();
      const auto item = trim(std::string_view(value).substr(start, comma - start));
      if (item.empty()) bad_value(key, value, where, "a comma-separated integer list");
      std::uint32_t parsed{};
      const auto result = std::from_chars(item.data(), item.data() + item.size(), parsed);
      if (result.ec != std::errc{} || result.ptr != item.data() + item.size()) {
        bad_value(key, value, where, "a comma-separated integer list");
      }
      out.push_back(parsed);
      start = comma + 1;
    }
    return out;
  }

  template <typename Fn>
  auto parsed_with(Fn&& parser) const {
    try {
      return parser(value);
    } catch (const Error& err) {
      fail(ErrorCode::TypeMismatch, where + ": key '" + key + "': " + err.what());
    }
  }
};

TabularField parse_tabular_field(const std::string& name) {
  if (name == "both") return TabularField::Both;
  if (name == "title") return TabularField::Title;
  if (name == "description") return TabularField::Description;
  fail(ErrorCode::TypeMismatch,
       "unknown tabular field '" + name + "' (expected both, title or description)");
}

const char* tabular_field_name(TabularField field) {
  switch (field) {
    case TabularField::Both: return "both";
    case TabularField::Title: return "title";
    default: return "description";
  }
}

using Setter = std::function<void(RunConfig&, const Assignment&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"docs_path", [](RunConfig& c, const Assignment& a) { c.docs_path = a.value; }},
      {"docs_format",
       [](RunConfig& c, const Assignment& a) {
         c.docs_format = a.parsed_with([](const std::string& v) { return parse_doc_format(v); });
       }},
      {"tabular_field",
       [](RunConfig& c, const Assignment& a) {
         c.tabular_field = a.parsed_with([](const std::string& v) { return parse_tabular_field(v); });
       }},
      {"allow_empty_docs",
       [](RunConfig& c, const Assignment& a) { c.allow_empty_docs = a.boolean(); }},
      {"labels_path", [](RunConfig& c, const Assignment& a) { c.labels_path = a.value; }},
      {"truth_path", [](RunConfig& c, const Assignment& a) { c.truth_path = a.value; }},
      {"test_docs_path",
       [](RunConfig& c, const Assignment& a) { c.test_docs_path = a.value; }},
      {"test_truth_path",
       [](RunConfig& c, const Assignment& a) { c.test_truth_path = a.value; }},
      {"dev_size",
       [](RunConfig& c, const Assignment& a) { c.dev_size = a.integer<std::uint32_t>(); }},
      {"train_subsample",
       [](RunConfig& c, const Assignment& a) {
         c.train_subsample = a.integer<std::uint32_t>();
       }},
      {"hash_dim",
       [](RunConfig& c, const Assignment& a) { c.hash_dim = a.integer<std::uint64_t>(); }},
      {"embed_dim",
       [](RunConfig& c, const Assignment& a) { c.embed_dim = a.integer<std::uint64_t>(); }},
      {"init_from", [](RunConfig& c, const Assignment& a) { c.init_from = a.value; }},
      {"index_backend",
       [](RunConfig& c, const Assignment& a) {
         c.index_backend =
             a.parsed_with([](const std::string& v) { return parse_index_backend(v); });
       }},
      {"hnsw_m",
       [](RunConfig& c, const Assignment& a) { c.hnsw.m = a.integer<std::uint32_t>(); }},
      {"hnsw_ef_construction",
       [](RunConfig& c, const Assignment& a) {
         c.hnsw.ef_construction = a.integer<std::uint32_t>();
       }},
      {"hnsw_ef_search",
       [](RunConfig& c, const Assignment& a) {
         c.hnsw.ef_search = a.integer<std::uint32_t>();
       }},
      {"hnsw_seed",
       [](RunConfig& c, const Assignment& a) { c.hnsw.seed = a.integer<std::uint64_t>(); }},
      {"index_path", [](RunConfig& c, const Assignment& a) { c.index_path = a.value; }},
      {"teacher_backend",
       [](RunConfig& c, const Assignment& a) {
         c.teacher_backend =
             a.parsed_with([](const std::string& v) { return parse_teacher_kind(v); });
       }},
      {"teacher_endpoint",
       [](RunConfig& c, const Assignment& a) { c.teacher_endpoint = a.value; }},
      {"teacher_model",
       [](RunConfig& c, const Assignment& a) { c.teacher_model = a.value; }},
      {"teacher_timeout_ms",
       [](RunConfig& c, const Assignment& a) { c.teacher_timeout_ms = a.integer<int>(); }},
      {"teacher_max_retries",
       [](RunConfig& c, const Assignment& a) { c.teacher_max_retries = a.integer<int>(); }},
      {"teacher_concurrency",
       [](RunConfig& c, const Assignment& a) { c.teacher_concurrency = a.integer<int>(); }},
      {"oracle_flip_noise",
       [](RunConfig& c, const Assignment& a) { c.oracle_flip_noise = a.real(); }},
      {"lexical_threshold",
       [](RunConfig& c, const Assignment& a) { c.lexical_threshold = a.real(); }},
      {"prompt_template",
       [](RunConfig& c, const Assignment& a) { c.prompt_template = a.value; }},
      {"prompt_template_file",
       [](RunConfig& c, const Assignment& a) { c.prompt_template_file = a.value; }},
      {"max_doc_tokens",
       [](RunConfig& c, const Assignment& a) {
         c.max_doc_tokens = a.integer<std::uint32_t>();
       }},
      {"cache_path", [](RunConfig& c, const Assignment& a) { c.cache_path = a.value; }},
      {"margin", [](RunConfig& c, const Assignment& a) { c.trainer.margin = a.real(); }},
      {"learning_rate",
       [](RunConfig& c, const Assignment& a) { c.trainer.optimizer.lr = a.real(); }},
      {"weight_decay",
       [](RunConfig& c, const Assignment& a) {
         c.trainer.optimizer.weight_decay = a.real();
       }},
      {"batch_size",
       [](RunConfig& c, const Assignment& a) {
         c.trainer.batch_size = a.integer<std::uint32_t>();
       }},
      {"shortlist_size",
       [](RunConfig& c, const Assignment& a) {
         c.trainer.shortlist_size = a.integer<std::uint32_t>();
       }},
      {"max_cycles",
       [](RunConfig& c, const Assignment& a) {
         c.trainer.max_cycles = a.integer<std::uint32_t>();
       }},
      {"epochs_per_cycle",
       [](RunConfig& c, const Assignment& a) {
         c.trainer.epochs_per_cycle = a.integer<std::uint32_t>();
       }},
      {"negative_mode",
       [](RunConfig& c, const Assignment& a) {
         c.trainer.negative_mode =
             a.parsed_with([](const std::string& v) { return parse_negative_mode(v); });
       }},
      {"patience",
       [](RunConfig& c, const Assignment& a) {
         c.trainer.patience = a.integer<std::uint32_t>();
       }},
      {"dev_judge_k",
       [](RunConfig& c, const Assignment& a) {
         c.trainer.dev_judge_k = a.integer<std::uint32_t>();
       }},
      {"seed",
       [](RunConfig& c, const Assignment& a) {
         c.trainer.seed = a.integer<std::uint64_t>();
       }},
      {"run_id", [](RunConfig& c, const Assignment& a) { c.run_id = a.value; }},
      {"out_dir", [](RunConfig& c, const Assignment& a) { c.out_dir = a.value; }},
      {"keep_cycle_checkpoints",
       [](RunConfig& c, const Assignment& a) { c.keep_cycle_checkpoints = a.boolean(); }},
      {"threads",
       [](RunConfig& c, const Assignment& a) { c.threads = a.integer<std::uint32_t>(); }},
      {"top_m",
       [](RunConfig& c, const Assignment& a) { c.top_m = a.integer<std::uint32_t>(); }},
      {"predictions_path",
       [](RunConfig& c, const Assignment& a) { c.predictions_path = a.value; }},
      {"report_format",
       [](RunConfig& c, const Assignment& a) {
         c.report_format =
             a.parsed_with([](const std::string& v) { return parse_report_format(v); });
       }},
      {"report_path", [](RunConfig& c, const Assignment& a) { c.report_path = a.value; }},
      {"synth_dir", [](RunConfig& c, const Assignment& a) { c.synth_dir = a.value; }},
      {"synth_topics",
       [](RunConfig& c, const Assignment& a) {
         c.synth.topics = a.integer<std::uint32_t>();
       }},
      {"synth_docs_per_topic",
       [](RunConfig& c, const Assignment& a) {
         c.synth.docs_per_topic = a.integer<std::uint32_t>();
       }},
      {"synth_labels_per_topic",
       [](RunConfig& c, const Assignment& a) {
         c.synth.labels_per_topic = a.integer<std::uint32_t>();
       }},
      {"synth_test_docs_per_topic",
       [](RunConfig& c, const Assignment& a) {
         c.synth.test_docs_per_topic = a.integer<std::uint32_t>();
       }},
      {"synth_words_per_topic",
       [](RunConfig& c, const Assignment& a) {
         c.synth.words_per_topic = a.integer<std::uint32_t>();
       }},
      {"synth_common_words",
       [](RunConfig& c, const Assignment& a) {
         c.synth.common_words = a.integer<std::uint32_t>();
       }},
      {"synth_common_rate",
       [](RunConfig& c, const Assignment& a) { c.synth.common_rate = a.real(); }},
      {"synth_neighbor_rate",
       [](RunConfig& c, const Assignment& a) { c.synth.neighbor_rate = a.real(); }},
      {"synth_doc_len_min",
       [](RunConfig& c, const Assignment& a) {
         c.synth.doc_len_min = a.integer<std::uint32_t>();
       }},
      {"synth_doc_len_max",
       [](RunConfig& c, const Assignment& a) {
         c.synth.doc_len_max = a.integer<std::uint32_t>();
       }},
      {"synth_seed",
       [](RunConfig& c, const Assignment& a) { c.synth.seed = a.integer<std::uint64_t>(); }},
      {"sweep_shortlist_sizes",
       [](RunConfig& c, const Assignment& a) { c.sweep_shortlist_sizes = a.id_list(); }},
      {"sweep_report_path",
       [](RunConfig& c, const Assignment& a) { c.sweep_report_path = a.value; }},
  };
  return table;
}

void apply_line(RunConfig& cfg, std::string_view raw, const std::string& where) {
  auto line = raw;
  if (const auto hash = line.find('#'); hash != std::string_view::npos) {
    line = line.substr(0, hash);
  }
  const auto text = trim(line);
  if (text.empty()) return;
  const auto equals = text.find('=');
  if (equals == std::string::npos) {
    fail(ErrorCode::TypeMismatch, where + ": expected key = value, got '" + text + "'");
  }
  const auto key = trim(std::string_view(text).substr(0, equals));
  const auto value = trim(std::string_view(text).substr(equals + 1));
  if (key.empty()) {
    fail(ErrorCode::TypeMismatch, where + ": missing key before '='");
  }
  set_config_key(cfg, key, value, where);
}

std::string format_double(double v) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, result.ptr);
}

}  // namespace

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value,
                    const std::string& where) {
  for (const auto& [name, setter] : setters()) {
    if (name == key) {
      setter(cfg, Assignment{key, value, where});
      return;
    }
  }
  fail(ErrorCode::UnknownKey, where + ": unknown configuration key '" + key + "'");
}

RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open config file " + path);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      apply_line(cfg, line, path + ":" + std::to_string(number));
    }
  }
  for (const auto& override_text : overrides) {
    apply_line(cfg, override_text, "override '" + override_text + "'");
  }
  return cfg;
}

void print_config(const RunConfig& cfg, std::ostream& out) {
  const auto emit = [&](const char* key, const std::string& value) {
    out << key << " = " << value << "\n";
  };
  const auto emit_str = [&](const char* key, const std::string& value) {
    if (!value.empty()) emit(key, value);
  };

  emit_str("docs_path", cfg.docs_path);
  emit("docs_format", doc_format_name(cfg.docs_format));
  emit("tabular_field", tabular_field_name(cfg.tabular_field));
  emit("allow_empty_docs", cfg.allow_empty_docs ? "true" : "false");
  emit_str("labels_path", cfg.labels_path);
  emit_str("truth_path", cfg.truth_path);
  emit_str("test_docs_path", cfg.test_docs_path);
  emit_str("test_truth_path", cfg.test_truth_path);
  emit("dev_size", std::to_string(cfg.dev_size));
  if (cfg.train_subsample) emit("train_subsample", std::to_string(*cfg.train_subsample));
  emit("hash_dim", std::to_string(cfg.hash_dim));
  emit("embed_dim", std::to_string(cfg.embed_dim));
  emit_str("init_from", cfg.init_from);
  emit("index_backend", index_backend_name(cfg.index_backend));
  emit("hnsw_m", std::to_string(cfg.hnsw.m));
  emit("hnsw_ef_construction", std::to_string(cfg.hnsw.ef_construction));
  emit("hnsw_ef_search", std::to_string(cfg.hnsw.ef_search));
  emit("hnsw_seed", std::to_string(cfg.hnsw.seed));
  emit_str("index_path", cfg.index_path);
  emit("teacher_backend", teacher_kind_name(cfg.teacher_backend));
  emit_str("teacher_endpoint", cfg.teacher_endpoint);
  emit_str("teacher_model", cfg.teacher_model);
  emit("teacher_timeout_ms", std::to_string(cfg.teacher_timeout_ms));
  emit("teacher_max_retries", std::to_string(cfg.teacher_max_retries));
  emit("teacher_concurrency", std::to_string(cfg.teacher_concurrency));
  emit("oracle_flip_noise", format_double(cfg.oracle_flip_noise));
  emit("lexical_threshold", format_double(cfg.lexical_threshold));
  emit("prompt_template", cfg.prompt_template);
  emit_str("prompt_template_file", cfg.prompt_template_file);
  emit("max_doc_tokens", std::to_string(cfg.max_doc_tokens));
  emit_str("cache_path", cfg.cache_path);
  emit("margin", format_double(cfg.trainer.margin));
  emit("learning_rate", format_double(cfg.trainer.optimizer.lr));
  emit("weight_decay", format_double(cfg.trainer.optimizer.weight_decay));
  emit("batch_size", std::to_string(cfg.trainer.batch_size));
  emit("shortlist_size", std::to_string(cfg.trainer.shortlist_size));
  emit("max_cycles", std::to_string(cfg.trainer.max_cycles));
  emit("epochs_per_cycle", std::to_string(cfg.trainer.epochs_per_cycle));
  emit("negative_mode", negative_mode_name(cfg.trainer.negative_mode));
  emit("patience", std::to_string(cfg.trainer.patience));
  emit("dev_judge_k", std::to_string(cfg.trainer.dev_judge_k));
  emit("seed", std::to_string(cfg.trainer.seed));
  emit("run_id", cfg.run_id);
  emit("out_dir", cfg.out_dir);
  emit("keep_cycle_checkpoints", cfg.keep_cycle_checkpoints ? "true" : "false");
  emit("threads", std::to_string(cfg.threads));
  emit("top_m", std::to_string(cfg.top_m));
  emit_str("predictions_path", cfg.predictions_path);
  emit("report_format", report_format_name(cfg.report_format));
  emit_str("report_path", cfg.report_path);
  emit_str("synth_dir", cfg.synth_dir);
  emit("synth_topics", std::to_string(cfg.synth.topics));
  emit("synth_docs_per_topic", std::to_string(cfg.synth.docs_per_topic));
  emit("synth_labels_per_topic", std::to_string(cfg.synth.labels_per_topic));
  emit("synth_test_docs_per_topic", std::to_string(cfg.synth.test_docs_per_topic));
  emit("synth_words_per_topic", std::to_string(cfg.synth.words_per_topic));
  emit("synth_common_words", std::to_string(cfg.synth.common_words));
  emit("synth_common_rate", format_double(cfg.synth.common_rate));
  emit("synth_neighbor_rate", format_double(cfg.synth.neighbor_rate));
  emit("synth_doc_len_min", std::to_string(cfg.synth.doc_len_min));
  emit("synth_doc_len_max", std::to_string(cfg.synth.doc_len_max));
  emit("synth_seed", std::to_string(cfg.synth.seed));
  std::ostringstream sizes;
  for (std::size_t i = 0; i < cfg.sweep_shortlist_sizes.size(); ++i) {
    if (i) sizes << ',';
    sizes << cfg.sweep_shortlist_sizes[i];
  }
  emit("sweep_shortlist_sizes", sizes.str());
  emit_str("sweep_report_path", cfg.sweep_report_path);
}

}  // namespace lmtx
