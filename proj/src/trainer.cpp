#include "lmtx/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lmtx/error.hpp"
#include "lmtx/hashing.hpp"
#include "lmtx/text.hpp"

namespace lmtx {

namespace fs = std::filesystem;

NegativeMode parse_negative_mode(const std::string& name) {
  if (name == "in-batch") return NegativeMode::InBatch;
  if (name == "in-batch+teacher-hard") return NegativeMode::InBatchTeacherHard;
  fail(ErrorCode::TypeMismatch, "unknown negative mode '" + name +
                                    "' (expected in-batch or in-batch+teacher-hard)");
}

const char* negative_mode_name(NegativeMode mode) {
  return mode == NegativeMode::InBatch ? "in-batch" : "in-batch+teacher-hard";
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.batch_size < 2) {
    fail(ErrorCode::SpecInfeasible, "batch size must be at least 2 so every anchor "
                                    "can draw in-batch negatives");
  }
  if (cfg.shortlist_size < 1) {
    fail(ErrorCode::SpecInfeasible, "shortlist size must be at least 1");
  }
  if (!(cfg.margin > 0.0)) {
    fail(ErrorCode::SpecInfeasible, "margin must be positive");
  }
}

TrainSet make_train_set(const DocumentCollection& docs,
                        const std::vector<std::uint32_t>& members,
                        std::uint64_t hash_dim) {
  TrainSet set;
  set.ids.reserve(members.size());
  set.texts.reserve(members.size());
  set.features.reserve(members.size());
  for (const auto pos : members) {
    const auto& doc = docs[pos];
    set.ids.push_back(doc.id);
    set.texts.push_back(doc.text);
    set.features.push_back(featurize(doc.text, hash_dim));
  }
  return set;
}

TrainContext make_train_context(const DocumentCollection& docs, const Splits& splits,
                                const LabelSpace& labels, std::uint64_t hash_dim,
                                PromptTemplate prompt, IndexBackend backend,
                                const HnswParams& hnsw) {
  TrainContext ctx;
  ctx.train = make_train_set(docs, splits.train, hash_dim);
  ctx.dev = make_train_set(docs, splits.dev, hash_dim);
  ctx.labels = &labels;
  ctx.label_features.reserve(labels.size());
  for (const auto& text : labels.texts) {
    ctx.label_features.push_back(featurize(text, hash_dim));
  }
  ctx.prompt = std::move(prompt);
  ctx.index_backend = backend;
  ctx.hnsw = hnsw;
  return ctx;
}

std::vector<Batch> assemble_batches(const PseudoLabelAssignment& assignment,
                                    const TrainConfig& cfg, std::mt19937_64& rng) {
  std::vector<std::uint32_t> docs;
  for (std::uint32_t i = 0; i < assignment.size(); ++i) {
    if (!assignment.positives[i].empty()) docs.push_back(i);
  }
  deterministic_shuffle(docs, rng);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < docs.size(); start += cfg.batch_size) {
    const auto end = std::min(docs.size(), start + cfg.batch_size);
    if (end - start < 2) break;
    Batch batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      const auto& pool = assignment.positives[docs[i]];
      batch.push_back({docs[i], pool[rng() % pool.size()]});
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<std::vector<std::uint32_t>> batch_negatives(
    const Batch& batch, const PseudoLabelAssignment& assignment,
    const TrainConfig& cfg) {
  std::vector<std::vector<std::uint32_t>> out(batch.size());
  for (std::size_t a = 0; a < batch.size(); ++a) {
    const auto& own = assignment.positives[batch[a].doc];
    auto& negs = out[a];
    auto admit = [&](std::uint32_t id) {
      if (std::binary_search(own.begin(), own.end(), id)) return;
      if (std::find(negs.begin(), negs.end(), id) != negs.end()) return;
      negs.push_back(id);
    };
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (b != a) admit(batch[b].positive);
    }
    if (cfg.negative_mode == NegativeMode::InBatchTeacherHard) {
      for (const auto id : assignment.rejected[batch[a].doc]) admit(id);
    }
  }
  return out;
}

namespace {

LabelIndex build_label_index(const EncoderParams& params, const TrainContext& ctx) {
  return LabelIndex::build(embed_all(params, ctx.label_features), ctx.index_backend,
                           ctx.hnsw, params_fingerprint(params));
}

// Documents whose features cancel to a zero embedding cannot be shortlisted;
// they sit the cycle out instead of aborting it.
bool try_encode(const EncoderParams& params, const FeatureVector& features,
                EmbeddingVector& out) {
  try {
    out = encode(params, features);
    return true;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ZeroNorm) return false;
    throw;
  }
}

}  // namespace

PseudoLabelAssignment run_cycle(EncoderParams& params, AdamWState& opt,
                                const TrainContext& ctx, const TrainConfig& cfg,
                                TeacherBackend& teacher, JudgmentCache& cache,
                                std::uint32_t cycle, CycleReport& report) {
  validate_train_config(cfg);
  if (ctx.train.size() < cfg.batch_size) {
    fail(ErrorCode::SpecInfeasible,
         "need at least " + std::to_string(cfg.batch_size) + " training documents, have " +
             std::to_string(ctx.train.size()));
  }

  const auto start = std::chrono::steady_clock::now();
  const auto calls_before = teacher.backend_calls();
  const auto hits_before = cache.stats().hits;

  report = CycleReport{};
  report.cycle = cycle;

  const auto index = build_label_index(params, ctx);

  PseudoLabelAssignment assignment;
  assignment.positives.resize(ctx.train.size());
  assignment.rejected.resize(ctx.train.size());
  for (std::size_t i = 0; i < ctx.train.size(); ++i) {
    EmbeddingVector query;
    if (!try_encode(params, ctx.train.features[i], query)) continue;
    const auto shortlist = index.query_topk(query, cfg.shortlist_size);
    auto verdicts = filter_shortlist(teacher, cache, ctx.train.ids[i], ctx.train.texts[i],
                                     shortlist, *ctx.labels, ctx.prompt);
    std::sort(verdicts.positives.begin(), verdicts.positives.end());
    report.unparseable += verdicts.unparseable;
    if (!verdicts.positives.empty()) {
      ++report.docs_with_positive;
      report.total_positives += verdicts.positives.size();
    }
    assignment.positives[i] = std::move(verdicts.positives);
    assignment.rejected[i] = std::move(verdicts.rejected);
  }
  if (report.docs_with_positive == 0) {
    fail(ErrorCode::NoTrainingSignal,
         "teacher approved no shortlisted label for any training document");
  }

  std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(cycle)));
  GradBuffer grad;
  grad.init(params.hash_dim, params.embed_dim);
  double loss_sum = 0.0;
  std::uint64_t batch_count = 0;
  std::vector<const FeatureVector*> negs;
  for (std::uint32_t epoch = 0; epoch < cfg.epochs_per_cycle; ++epoch) {
    for (const auto& batch : assemble_batches(assignment, cfg, rng)) {
      const auto negatives = batch_negatives(batch, assignment, cfg);
      grad.clear();
      double batch_loss = 0.0;
      for (std::size_t a = 0; a < batch.size(); ++a) {
        negs.clear();
        for (const auto id : negatives[a]) negs.push_back(&ctx.label_features[id]);
        batch_loss += triplet_loss_and_grad(params, ctx.train.features[batch[a].doc],
                                            ctx.label_features[batch[a].positive], negs,
                                            cfg.margin, grad);
      }
      grad.scale_touched(1.0 / static_cast<double>(batch.size()));
      adamw_step(params, grad, opt);
      loss_sum += batch_loss / static_cast<double>(batch.size());
      ++batch_count;
    }
  }

  report.mean_loss = batch_count ? loss_sum / static_cast<double>(batch_count) : 0.0;
  report.teacher_calls = teacher.backend_calls() - calls_before;
  report.cache_hits = cache.stats().hits - hits_before;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return assignment;
}

double dev_eval(const EncoderParams& params, const TrainContext& ctx,
                const TrainConfig& cfg, TeacherBackend& teacher,
                JudgmentCache& cache) {
  if (ctx.dev.size() == 0) {
    fail(ErrorCode::SpecInfeasible, "dev split is empty");
  }
  const auto index = build_label_index(params, ctx);
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < ctx.dev.size(); ++i) {
    EmbeddingVector query;
    if (!try_encode(params, ctx.dev.features[i], query)) continue;
    const auto top = index.query_topk(query, cfg.dev_judge_k);
    bool first_relevant = false;
    for (std::size_t r = 0; r < top.size(); ++r) {
      const auto label_id = top[r].first;
      const auto verdict = judge(teacher, cache, ctx.dev.ids[i], ctx.dev.texts[i],
                                 label_id, ctx.labels->texts[label_id], ctx.prompt);
      if (r == 0) first_relevant = verdict.relevant;
    }
    if (first_relevant) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ctx.dev.size());
}

namespace {

void append_cycle_record(const std::string& run_dir, const CycleReport& report) {
  nlohmann::json record{{"cycle", report.cycle},
                        {"docs_with_positive", report.docs_with_positive},
                        {"total_positives", report.total_positives},
                        {"teacher_calls", report.teacher_calls},
                        {"cache_hits", report.cache_hits},
                        {"unparseable", report.unparseable},
                        {"mean_loss", report.mean_loss},
                        {"dev_p1", report.dev_p1},
                        {"wall_seconds", report.wall_seconds}};
  std::ofstream out(fs::path(run_dir) / "cycles.log", std::ios::app);
  if (!out) fail(ErrorCode::IoError, "cannot append to cycles.log in " + run_dir);
  out << record.dump() << "\n";
}

std::string cycle_checkpoint_path(const std::string& run_dir, std::uint32_t cycle) {
  return (fs::path(run_dir) / ("ckpt-" + std::to_string(cycle))).string();
}

}  // namespace

TrainResult train(const EncoderParams& initial, const TrainContext& ctx,
                  const TrainConfig& cfg, TeacherBackend& teacher,
                  JudgmentCache& cache, const TrainHooks& hooks,
                  const RunPaths* paths) {
  validate_train_config(cfg);
  if (paths) {
    fs::create_directories(paths->run_dir);
    std::ofstream(fs::path(paths->run_dir) / "cycles.log", std::ios::trunc);
  }

  EncoderParams params = initial;
  AdamWState opt;
  opt.init(params.projection.size(), cfg.optimizer);

  TrainResult result;
  const auto evaluate_dev = [&](std::uint32_t cycle) {
    return hooks.dev_score ? hooks.dev_score(cycle)
                           : dev_eval(params, ctx, cfg, teacher, cache);
  };
  const auto record = [&](const CycleReport& report) {
    result.reports.push_back(report);
    if (hooks.on_cycle) hooks.on_cycle(report);
    if (paths) append_cycle_record(paths->run_dir, report);
  };

  if (paths && paths->keep_cycle_checkpoints) {
    save_checkpoint(cycle_checkpoint_path(paths->run_dir, 0), params, opt);
  }

  CycleReport baseline;
  baseline.dev_p1 = evaluate_dev(0);
  record(baseline);
  result.best = Checkpoint{params, opt};
  result.best_cycle = 0;
  double best_score = baseline.dev_p1;
  std::uint32_t stale_cycles = 0;

  for (std::uint32_t cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
    CycleReport report;
    const auto assignment = run_cycle(params, opt, ctx, cfg, teacher, cache, cycle, report);
    if (hooks.on_assignment) hooks.on_assignment(cycle, assignment);
    report.dev_p1 = evaluate_dev(cycle);
    record(report);
    if (paths && paths->keep_cycle_checkpoints) {
      save_checkpoint(cycle_checkpoint_path(paths->run_dir, cycle), params, opt);
    }
    if (report.dev_p1 > best_score) {
      best_score = report.dev_p1;
      result.best = Checkpoint{params, opt};
      result.best_cycle = cycle;
      stale_cycles = 0;
    } else if (++stale_cycles >= cfg.patience) {
      break;
    }
  }

  if (paths) {
    save_checkpoint((fs::path(paths->run_dir) / "best").string(), result.best.params,
                    result.best.opt);
  }
  return result;
}

}  // namespace lmtx
