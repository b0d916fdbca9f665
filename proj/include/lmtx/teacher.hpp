#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lmtx/corpus.hpp"
#include "lmtx/index.hpp"

namespace lmtx {

struct PromptTemplate {
  std::string text;
  std::size_t max_doc_tokens = 430;
};

// Validates that {doc} and {label_text} each appear exactly once.
PromptTemplate make_prompt_template(std::string text, std::size_t max_doc_tokens = 430);

// Built-in templates: eurlex, wiki10, amazoncat, wikiseealso, wikipedia.
PromptTemplate builtin_prompt_template(const std::string& name,
                                       std::size_t max_doc_tokens = 430);

std::string build_prompt(const PromptTemplate& tpl, std::string_view doc_text,
                         std::string_view label_text);

std::uint64_t prompt_hash(const std::string& rendered_prompt);

enum class ParseStatus { Clean, Unparseable };

struct Verdict {
  bool relevant = false;
  ParseStatus parse_status = ParseStatus::Clean;
  std::string raw;
};

// Total function: leading whitespace and punctuation stripped, case ignored;
// a reply starting with "yes" or "no" is clean, anything else counts as
// not relevant and unparseable.
Verdict parse_verdict(std::string_view reply);

struct CacheStats {
  std::uint64_t entries = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t relevant = 0;
  std::uint64_t not_relevant = 0;
  std::uint64_t unparseable = 0;
};

// Persistent append-only verdict store keyed by (doc id, label id, prompt
// hash). Thread safe; a key is written at most once and never changes.
class JudgmentCache {
 public:
  JudgmentCache() = default;
  explicit JudgmentCache(const std::string& path);

  JudgmentCache(const JudgmentCache&) = delete;
  JudgmentCache& operator=(const JudgmentCache&) = delete;

  std::optional<Verdict> lookup(std::uint32_t doc_id, std::uint32_t label_id,
                                std::uint64_t prompt_hash);
  Verdict insert(std::uint32_t doc_id, std::uint32_t label_id, std::uint64_t prompt_hash,
                 Verdict verdict);

  CacheStats stats() const;
  std::size_t size() const;

 private:
  struct Key {
    std::uint32_t doc_id;
    std::uint32_t label_id;
    std::uint64_t prompt_hash;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };

  void remember(const Key& key, const Verdict& verdict);

  mutable std::mutex mutex_;
  std::unordered_map<Key, Verdict, KeyHash> map_;
  std::string path_;
  CacheStats stats_;
};

class TeacherBackend {
 public:
  virtual ~TeacherBackend() = default;

  virtual Verdict judge_pair(std::uint32_t doc_id, std::uint32_t label_id,
                             const std::string& prompt, std::string_view doc_text,
                             std::string_view label_text) = 0;

  std::uint64_t backend_calls() const { return calls_.load(); }

 protected:
  std::atomic<std::uint64_t> calls_{0};
};

// Answers from ground truth, with each pair's verdict independently flipped
// with probability flip_noise; deterministic in (seed, doc id, label id).
class OracleTeacher : public TeacherBackend {
 public:
  OracleTeacher(const GroundTruth& truth, double flip_noise, std::uint64_t seed);
  Verdict judge_pair(std::uint32_t doc_id, std::uint32_t label_id,
                     const std::string& prompt, std::string_view doc_text,
                     std::string_view label_text) override;

 private:
  const GroundTruth& truth_;
  double flip_noise_;
  std::uint64_t seed_;
};

// Relevant iff the token-set Jaccard overlap of document and label text
// reaches the threshold.
class LexicalTeacher : public TeacherBackend {
 public:
  explicit LexicalTeacher(double threshold);
  Verdict judge_pair(std::uint32_t doc_id, std::uint32_t label_id,
                     const std::string& prompt, std::string_view doc_text,
                     std::string_view label_text) override;

 private:
  double threshold_;
};

struct RemoteTeacherConfig {
  std::string endpoint;
  std::string model;
  int timeout_ms = 30000;
  int max_retries = 3;
  int concurrency = 4;
};

// Chat-completion client; reads the bearer token from LMTX_TEACHER_TOKEN.
class RemoteTeacher : public TeacherBackend {
 public:
  explicit RemoteTeacher(RemoteTeacherConfig config);
  Verdict judge_pair(std::uint32_t doc_id, std::uint32_t label_id,
                     const std::string& prompt, std::string_view doc_text,
                     std::string_view label_text) override;

  const RemoteTeacherConfig& config() const { return config_; }

 private:
  RemoteTeacherConfig config_;
  std::string host_port_;
  std::string path_;
};

Verdict judge(TeacherBackend& backend, JudgmentCache& cache, std::uint32_t doc_id,
              std::string_view doc_text, std::uint32_t label_id,
              std::string_view label_text, const PromptTemplate& tpl);

struct ShortlistVerdicts {
  std::vector<std::uint32_t> positives;
  std::vector<std::uint32_t> rejected;
  std::uint32_t unparseable = 0;
};

// Partitions a shortlist by teacher verdict, preserving shortlist order.
ShortlistVerdicts filter_shortlist(TeacherBackend& backend, JudgmentCache& cache,
                                   std::uint32_t doc_id, std::string_view doc_text,
                                   const RankedList& shortlist, const LabelSpace& labels,
                                   const PromptTemplate& tpl);

}  // namespace lmtx
