#include "lmtx/commands.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "lmtx/synth.hpp"
#include "lmtx/teacher.hpp"
#include "lmtx/trainer.hpp"

namespace lmtx {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownKey:
    case ErrorCode::TypeMismatch:
    case ErrorCode::MissingRequired:
    case ErrorCode::UsageError:
      return 1;
    case ErrorCode::RemoteUnavailable:
    case ErrorCode::RemoteMalformedResponse:
      return 3;
    default:
      return 2;
  }
}

namespace {

std::string run_dir_of(const RunConfig& cfg) {
  return (fs::path(cfg.out_dir) / cfg.run_id).string();
}

std::string predictions_path_of(const RunConfig& cfg) {
  if (!cfg.predictions_path.empty()) return cfg.predictions_path;
  return (fs::path(run_dir_of(cfg)) / "predictions.tsv").string();
}

void require_key(const std::string& value, const char* key) {
  if (value.empty()) {
    fail(ErrorCode::MissingRequired, std::string("missing required key '") + key + "'");
  }
}

void require_file(const std::string& value, const char* key) {
  require_key(value, key);
  if (!fs::exists(value)) {
    fail(ErrorCode::IoError, std::string(key) + " does not exist: " + value);
  }
}

void ensure_parent_dir(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string format_score(double v) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, result.ptr);
}

PromptTemplate prompt_of(const RunConfig& cfg) {
  if (!cfg.prompt_template_file.empty()) {
    require_file(cfg.prompt_template_file, "prompt_template_file");
    std::ifstream in(cfg.prompt_template_file, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return make_prompt_template(std::move(text), cfg.max_doc_tokens);
  }
  return builtin_prompt_template(cfg.prompt_template, cfg.max_doc_tokens);
}

std::unique_ptr<TeacherBackend> make_teacher(const RunConfig& cfg,
                                             const GroundTruth* truth) {
  switch (cfg.teacher_backend) {
    case TeacherKind::Oracle:
      if (!truth) {
        fail(ErrorCode::MissingRequired, "the oracle teacher requires truth_path");
      }
      return std::make_unique<OracleTeacher>(*truth, cfg.oracle_flip_noise,
                                             cfg.trainer.seed);
    case TeacherKind::Lexical:
      return std::make_unique<LexicalTeacher>(cfg.lexical_threshold);
    default:
      require_key(cfg.teacher_endpoint, "teacher_endpoint");
      require_key(cfg.teacher_model, "teacher_model");
      return std::make_unique<RemoteTeacher>(RemoteTeacherConfig{
          cfg.teacher_endpoint, cfg.teacher_model, cfg.teacher_timeout_ms,
          cfg.teacher_max_retries, cfg.teacher_concurrency});
  }
}

LoadedDocuments load_docs_at(const RunConfig& cfg, const std::string& path,
                             const char* key) {
  require_file(path, key);
  return load_documents(path, cfg.docs_format,
                        LoadOptions{cfg.allow_empty_docs, cfg.tabular_field});
}

LabelSpace load_labels_of(const RunConfig& cfg) {
  require_file(cfg.labels_path, "labels_path");
  return load_label_space(cfg.labels_path);
}

std::vector<FeatureVector> featurize_all(const std::vector<std::string>& texts,
                                         std::uint64_t hash_dim) {
  std::vector<FeatureVector> features;
  features.reserve(texts.size());
  for (const auto& text : texts) features.push_back(featurize(text, hash_dim));
  return features;
}

std::vector<FeatureVector> featurize_docs(const DocumentCollection& docs,
                                          std::uint64_t hash_dim) {
  std::vector<FeatureVector> features;
  features.reserve(docs.size());
  for (const auto& doc : docs.docs) features.push_back(featurize(doc.text, hash_dim));
  return features;
}

std::unique_ptr<JudgmentCache> open_cache(const RunConfig& cfg) {
  if (cfg.cache_path.empty()) return std::make_unique<JudgmentCache>();
  ensure_parent_dir(cfg.cache_path);
  return std::make_unique<JudgmentCache>(cfg.cache_path);
}

struct TrainArtifacts {
  TrainResult result;
  std::string run_dir;
  std::uint64_t teacher_calls = 0;
  CacheStats cache_stats;
};

TrainArtifacts do_train(const RunConfig& cfg) {
  const auto loaded = load_docs_at(cfg, cfg.docs_path, "docs_path");
  const auto labels = load_labels_of(cfg);
  std::optional<GroundTruth> truth;
  if (cfg.teacher_backend == TeacherKind::Oracle) {
    require_file(cfg.truth_path, "truth_path");
    truth = load_ground_truth(cfg.truth_path, labels.size(),
                              static_cast<std::uint32_t>(loaded.collection.size()));
  }
  const auto teacher = make_teacher(cfg, truth ? &*truth : nullptr);
  const auto splits = make_splits(
      loaded.collection, SplitSpec{cfg.dev_size, cfg.train_subsample, cfg.trainer.seed});
  const auto ctx = make_train_context(loaded.collection, splits, labels, cfg.hash_dim,
                                      prompt_of(cfg), cfg.index_backend, cfg.hnsw);

  EncoderParams params;
  if (!cfg.init_from.empty()) {
    require_file(cfg.init_from, "init_from");
    auto checkpoint = load_checkpoint(cfg.init_from);
    if (checkpoint.params.hash_dim != cfg.hash_dim ||
        checkpoint.params.embed_dim != cfg.embed_dim) {
      fail(ErrorCode::TypeMismatch,
           "init_from checkpoint was trained with hash_dim=" +
               std::to_string(checkpoint.params.hash_dim) + ", embed_dim=" +
               std::to_string(checkpoint.params.embed_dim) +
               "; the configuration asks for " + std::to_string(cfg.hash_dim) + "/" +
               std::to_string(cfg.embed_dim));
    }
    params = std::move(checkpoint.params);
  } else {
    params = init_encoder_params(cfg.hash_dim, cfg.embed_dim, cfg.trainer.seed);
  }

  const auto cache = open_cache(cfg);
  const RunPaths paths{run_dir_of(cfg), cfg.keep_cycle_checkpoints};
  TrainArtifacts artifacts;
  artifacts.result = train(params, ctx, cfg.trainer, *teacher, *cache, {}, &paths);
  artifacts.run_dir = paths.run_dir;
  artifacts.teacher_calls = teacher->backend_calls();
  artifacts.cache_stats = cache->stats();
  return artifacts;
}

void run_train(const RunConfig& cfg, std::ostream& out) {
  const auto artifacts = do_train(cfg);
  const auto& reports = artifacts.result.reports;
  nlohmann::json summary{
      {"run_dir", artifacts.run_dir},
      {"cycles", reports.size() - 1},
      {"best_cycle", artifacts.result.best_cycle},
      {"best_dev_p1", reports[artifacts.result.best_cycle].dev_p1},
      {"teacher_calls", artifacts.teacher_calls},
      {"cache_entries", artifacts.cache_stats.entries},
      {"cache_hits", artifacts.cache_stats.hits}};
  out << summary.dump() << "\n";
}

LabelIndex index_for(const RunConfig& cfg, const EncoderParams& params,
                     const std::vector<FeatureVector>& label_features) {
  if (!cfg.index_path.empty() && fs::exists(cfg.index_path)) {
    return LabelIndex::load(cfg.index_path);
  }
  auto index = LabelIndex::build(embed_all(params, label_features), cfg.index_backend,
                                 cfg.hnsw, params_fingerprint(params));
  if (!cfg.index_path.empty()) {
    ensure_parent_dir(cfg.index_path);
    index.save(cfg.index_path);
  }
  return index;
}

void run_infer(const RunConfig& cfg, std::ostream& out) {
  const auto checkpoint_path =
      !cfg.init_from.empty() ? cfg.init_from
                             : (fs::path(run_dir_of(cfg)) / "best").string();
  if (!fs::exists(checkpoint_path)) {
    fail(ErrorCode::MissingRequired, "no checkpoint at " + checkpoint_path +
                                         "; run train first or set init_from");
  }
  const auto checkpoint = load_checkpoint(checkpoint_path);
  const auto labels = load_labels_of(cfg);
  const auto label_features = featurize_all(labels.texts, checkpoint.params.hash_dim);
  const auto index = index_for(cfg, checkpoint.params, label_features);

  const auto& docs_path = !cfg.test_docs_path.empty() ? cfg.test_docs_path : cfg.docs_path;
  const auto loaded = load_docs_at(cfg, docs_path, "test_docs_path");
  const auto features = featurize_docs(loaded.collection, checkpoint.params.hash_dim);
  const auto prediction = predict_topm(index, checkpoint.params, features, cfg.top_m);

  const auto out_path = predictions_path_of(cfg);
  ensure_parent_dir(out_path);
  std::ofstream file(out_path, std::ios::binary);
  if (!file) fail(ErrorCode::IoError, "cannot write predictions to " + out_path);
  for (std::size_t doc = 0; doc < prediction.lists.size(); ++doc) {
    file << doc << '\t';
    const auto& list = prediction.lists[doc];
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i) file << ',';
      file << list[i].first << ':' << format_score(list[i].second);
    }
    file << '\n';
  }
  if (!file) fail(ErrorCode::IoError, "write failed on " + out_path);

  nlohmann::json summary{{"documents", prediction.lists.size()},
                         {"skipped", prediction.skipped.size()},
                         {"predictions_path", out_path},
                         {"checkpoint", checkpoint_path}};
  out << summary.dump() << "\n";
}

std::vector<RankedList> load_predictions(const std::string& path,
                                         std::size_t expected_docs,
                                         std::uint32_t label_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open predictions file " + path);
  std::vector<RankedList> lists(expected_docs);
  std::vector<char> seen(expected_docs, 0);
  std::size_t filled = 0;
  std::string line;
  std::size_t number = 0;
  const auto malformed = [&](const std::string& what) {
    fail(ErrorCode::MalformedRecord,
         path + ":" + std::to_string(number) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) malformed("expected doc_id<TAB>predictions");
    std::uint32_t doc{};
    {
      const auto* first = line.data();
      const auto* last = line.data() + tab;
      const auto result = std::from_chars(first, last, doc);
      if (result.ec != std::errc{} || result.ptr != last) malformed("bad document id");
    }
    if (doc >= expected_docs) malformed("document id " + std::to_string(doc) + " out of range");
    if (seen[doc]) malformed("duplicate document id " + std::to_string(doc));
    seen[doc] = 1;
    ++filled;
    std::size_t start = tab + 1;
    while (start < line.size()) {
      auto comma = line.find(',', start);
      if (comma == std::string::npos) comma = line.size();
      const auto colon = line.find(':', start);
      if (colon == std::string::npos || colon >= comma) {
        malformed("expected label:score entries");
      }
      std::uint32_t label{};
      {
        const auto* first = line.data() + start;
        const auto* last = line.data() + colon;
        const auto result = std::from_chars(first, last, label);
        if (result.ec != std::errc{} || result.ptr != last) malformed("bad label id");
      }
      if (label >= label_count) malformed("label id " + std::to_string(label) + " out of range");
      double score{};
      {
        const auto* first = line.data() + colon + 1;
        const auto* last = line.data() + comma;
        const auto result = std::from_chars(first, last, score);
        if (result.ec != std::errc{} || result.ptr != last) malformed("bad score");
      }
      lists[doc].emplace_back(label, score);
      start = comma + 1;
    }
  }
  if (filled != expected_docs) {
    fail(ErrorCode::MissingPredictions, path + " covers " + std::to_string(filled) +
                                            " of " + std::to_string(expected_docs) +
                                            " documents");
  }
  return lists;
}

void run_eval(const RunConfig& cfg, std::ostream& out) {
  const auto labels = load_labels_of(cfg);
  const auto& truth_path =
      !cfg.test_truth_path.empty() ? cfg.test_truth_path : cfg.truth_path;
  require_file(truth_path, "test_truth_path");
  const auto truth = load_ground_truth(truth_path, labels.size());
  const auto pred_path = predictions_path_of(cfg);
  if (!fs::exists(pred_path)) {
    fail(ErrorCode::MissingRequired,
         "no predictions at " + pred_path + "; run infer first or set predictions_path");
  }
  const auto lists = load_predictions(pred_path, truth.size(), labels.size());
  const auto row = evaluate(lists, truth, labels.size(), "test");
  if (cfg.report_path.empty()) {
    emit_report({row}, cfg.report_format, out);
  } else {
    emit_report_to_path({row}, cfg.report_format, cfg.report_path);
    out << nlohmann::json{{"report_path", cfg.report_path}}.dump() << "\n";
  }
}

void run_ingest(const RunConfig& cfg, std::ostream& out) {
  const auto loaded = load_docs_at(cfg, cfg.docs_path, "docs_path");
  const auto dir = run_dir_of(cfg);
  fs::create_directories(dir);
  save_documents(loaded.collection, (fs::path(dir) / "docs.txt").string());
  nlohmann::json summary{{"run_dir", dir}, {"documents", loaded.collection.size()}};
  if (!loaded.id_map.empty()) {
    save_id_map(loaded.id_map, (fs::path(dir) / "id_map.tsv").string());
    summary["id_map"] = true;
  }
  if (!cfg.labels_path.empty()) {
    const auto labels = load_labels_of(cfg);
    save_label_space(labels, (fs::path(dir) / "labels.txt").string());
    summary["labels"] = labels.size();
    if (!cfg.truth_path.empty()) {
      require_file(cfg.truth_path, "truth_path");
      const auto truth =
          load_ground_truth(cfg.truth_path, labels.size(),
                            static_cast<std::uint32_t>(loaded.collection.size()));
      save_ground_truth(truth, (fs::path(dir) / "truth.txt").string());
      summary["truth_rows"] = truth.size();
      summary["empty_truth_docs"] = truth.empty_docs.size();
    }
  } else if (!cfg.truth_path.empty()) {
    fail(ErrorCode::MissingRequired, "validating truth_path requires labels_path");
  }
  out << summary.dump() << "\n";
}

void run_cache_stats(const RunConfig& cfg, std::ostream& out) {
  require_key(cfg.cache_path, "cache_path");
  const JudgmentCache cache(cfg.cache_path);
  const auto stats = cache.stats();
  nlohmann::json summary{{"path", cfg.cache_path},
                         {"entries", stats.entries},
                         {"relevant", stats.relevant},
                         {"not_relevant", stats.not_relevant},
                         {"unparseable", stats.unparseable}};
  out << summary.dump() << "\n";
}

void run_synth(const RunConfig& cfg, std::ostream& out) {
  const auto dir = cfg.synth_dir.empty() ? (fs::path(cfg.out_dir) / "synth").string()
                                         : cfg.synth_dir;
  const auto corpus = generate_synth_corpus(cfg.synth);
  const auto files = write_synth_corpus(corpus, dir);
  nlohmann::json summary{{"dir", dir},
                         {"documents", corpus.docs.size()},
                         {"labels", corpus.labels.size()},
                         {"test_documents", corpus.test_docs.size()},
                         {"config_path", files.config_path}};
  out << summary.dump() << "\n";
}

MetricsRow test_metrics(const RunConfig& cfg, const EncoderParams& params,
                        const std::string& name) {
  const auto labels = load_labels_of(cfg);
  const auto label_features = featurize_all(labels.texts, params.hash_dim);
  const auto index = LabelIndex::build(embed_all(params, label_features),
                                       cfg.index_backend, cfg.hnsw,
                                       params_fingerprint(params));
  require_file(cfg.test_docs_path, "test_docs_path");
  const auto loaded = load_docs_at(cfg, cfg.test_docs_path, "test_docs_path");
  const auto features = featurize_docs(loaded.collection, params.hash_dim);
  const auto prediction = predict_topm(index, params, features, cfg.top_m);
  require_file(cfg.test_truth_path, "test_truth_path");
  const auto truth =
      load_ground_truth(cfg.test_truth_path, labels.size(),
                        static_cast<std::uint32_t>(loaded.collection.size()));
  return evaluate(prediction.lists, truth, labels.size(), name);
}

void run_sweep(const RunConfig& cfg, std::ostream& out) {
  require_file(cfg.test_docs_path, "test_docs_path");
  require_file(cfg.test_truth_path, "test_truth_path");
  if (cfg.sweep_shortlist_sizes.empty()) {
    fail(ErrorCode::SpecInfeasible, "sweep_shortlist_sizes is empty");
  }
  std::vector<MetricsRow> rows;
  for (const auto j : cfg.sweep_shortlist_sizes) {
    RunConfig sub = cfg;
    sub.trainer.shortlist_size = j;
    sub.run_id = cfg.run_id + "-j" + std::to_string(j);
    const auto artifacts = do_train(sub);
    rows.push_back(test_metrics(sub, artifacts.result.best.params,
                                "j=" + std::to_string(j)));
  }
  if (cfg.sweep_report_path.empty()) {
    emit_report(rows, ReportFormat::Csv, out);
  } else {
    emit_report_to_path(rows, ReportFormat::Csv, cfg.sweep_report_path);
    out << nlohmann::json{{"report_path", cfg.sweep_report_path}}.dump() << "\n";
  }
}

}  // namespace

void run_command(const std::string& command, const RunConfig& cfg, std::ostream& out) {
  if (command == "ingest") return run_ingest(cfg, out);
  if (command == "train") return run_train(cfg, out);
  if (command == "infer") return run_infer(cfg, out);
  if (command == "eval") return run_eval(cfg, out);
  if (command == "cache-stats") return run_cache_stats(cfg, out);
  if (command == "synth") return run_synth(cfg, out);
  if (command == "sweep") return run_sweep(cfg, out);
  fail(ErrorCode::UsageError, "unknown command '" + command + "'");
}

}  // namespace lmtx
