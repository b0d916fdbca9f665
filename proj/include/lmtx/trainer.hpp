#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lmtx/corpus.hpp"
#include "lmtx/encoder.hpp"
#include "lmtx/index.hpp"
#include "lmtx/teacher.hpp"

namespace lmtx {

enum class NegativeMode { InBatch, InBatchTeacherHard };

NegativeMode parse_negative_mode(const std::string& name);
const char* negative_mode_name(NegativeMode mode);

struct TrainConfig {
  double margin = 0.3;
  AdamWConfig optimizer;
  std::uint32_t batch_size = 128;
  std::uint32_t shortlist_size = 10;
  std::uint32_t max_cycles = 8;
  std::uint32_t epochs_per_cycle = 1;
  NegativeMode negative_mode = NegativeMode::InBatch;
  std::uint32_t patience = 1;
  std::uint32_t dev_judge_k = 5;
  std::uint64_t seed = 42;
};

void validate_train_config(const TrainConfig& cfg);

// Documents prepared for training: ids and raw text for teacher prompts,
// hashed features fixed for the whole run.
struct TrainSet {
  std::vector<std::uint32_t> ids;
  std::vector<std::string> texts;
  std::vector<FeatureVector> features;

  std::size_t size() const { return ids.size(); }
};

TrainSet make_train_set(const DocumentCollection& docs,
                        const std::vector<std::uint32_t>& members,
                        std::uint64_t hash_dim);

struct TrainContext {
  TrainSet train;
  TrainSet dev;
  const LabelSpace* labels = nullptr;
  std::vector<FeatureVector> label_features;
  PromptTemplate prompt;
  IndexBackend index_backend = IndexBackend::Exact;
  HnswParams hnsw;
};

TrainContext make_train_context(const DocumentCollection& docs, const Splits& splits,
                                const LabelSpace& labels, std::uint64_t hash_dim,
                                PromptTemplate prompt,
                                IndexBackend backend = IndexBackend::Exact,
                                const HnswParams& hnsw = {});

// Teacher-approved and teacher-rejected shortlist labels for one cycle,
// indexed by train-set position. Positives are sorted; rejected keep
// shortlist order.
struct PseudoLabelAssignment {
  std::vector<std::vector<std::uint32_t>> positives;
  std::vector<std::vector<std::uint32_t>> rejected;

  std::size_t size() const { return positives.size(); }
};

struct CycleReport {
  std::uint32_t cycle = 0;
  std::uint64_t docs_with_positive = 0;
  std::uint64_t total_positives = 0;
  std::uint64_t teacher_calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t unparseable = 0;
  double mean_loss = 0.0;
  double dev_p1 = 0.0;
  double wall_seconds = 0.0;
};

struct BatchItem {
  std::uint32_t doc;       // train-set position
  std::uint32_t positive;  // chosen positive label id
};
using Batch = std::vector<BatchItem>;

// Shuffles the documents that have positives, draws one positive per
// document uniformly, and chunks into batches; a trailing batch of fewer
// than two documents is dropped.
std::vector<Batch> assemble_batches(const PseudoLabelAssignment& assignment,
                                    const TrainConfig& cfg, std::mt19937_64& rng);

// In-batch negatives: the other anchors' chosen positives minus the anchor's
// own positive set, deduplicated; hard mode appends the anchor's rejected
// shortlist labels.
std::vector<std::vector<std::uint32_t>> batch_negatives(
    const Batch& batch, const PseudoLabelAssignment& assignment,
    const TrainConfig& cfg);

// One training cycle: embed everything, build the label index, shortlist
// top-j per document, teacher-filter, then run triplet updates over the
// documents that got a positive. Fills everything in the report except
// dev_p1.
PseudoLabelAssignment run_cycle(EncoderParams& params, AdamWState& opt,
                                const TrainContext& ctx, const TrainConfig& cfg,
                                TeacherBackend& teacher, JudgmentCache& cache,
                                std::uint32_t cycle, CycleReport& report);

// Teacher-judged dev P@1: fraction of dev documents whose top retrieved
// label the teacher marks relevant. The top dev_judge_k labels are judged
// so the cache warms beyond rank 1.
double dev_eval(const EncoderParams& params, const TrainContext& ctx,
                const TrainConfig& cfg, TeacherBackend& teacher,
                JudgmentCache& cache);

struct TrainHooks {
  // Replaces dev_eval when set; receives the cycle number.
  std::function<double(std::uint32_t)> dev_score;
  std::function<void(const CycleReport&)> on_cycle;
  // Observes each cycle's pseudo-label assignment right after the teacher
  // filter, before the report is finalized.
  std::function<void(std::uint32_t, const PseudoLabelAssignment&)> on_assignment;
};

struct RunPaths {
  std::string run_dir;
  bool keep_cycle_checkpoints = false;
};

struct TrainResult {
  Checkpoint best;
  std::uint32_t best_cycle = 0;
  std::vector<CycleReport> reports;
};

// Full training loop with cycle-0 baseline evaluation, strict-improvement
// best tracking and patience-based early stopping. Returns the best
// checkpoint seen, never the last.
TrainResult train(const EncoderParams& initial, const TrainContext& ctx,
                  const TrainConfig& cfg, TeacherBackend& teacher,
                  JudgmentCache& cache, const TrainHooks& hooks = {},
                  const RunPaths* paths = nullptr);

}  // namespace lmtx
