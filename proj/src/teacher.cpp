#include "lmtx/teacher.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "lmtx/error.hpp"
#include "lmtx/hashing.hpp"
#include "lmtx/text.hpp"

namespace lmtx {
namespace {

using json = nlohmann::json;

constexpr std::string_view kDocSlot = "{doc}";
constexpr std::string_view kLabelSlot = "{label_text}";

std::size_t count_occurrences(const std::string& text, std::string_view needle) {
  std::size_t count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string truncate_tokens(std::string_view text, std::size_t max_tokens) {
  const std::vector<std::string_view> tokens = tokenize(text);
  if (tokens.size() <= max_tokens) return std::string(text);
  std::string out;
  for (std::size_t i = 0; i < max_tokens; ++i) {
    if (i) out.push_back(' ');
    out.append(tokens[i]);
  }
  return out;
}

std::uint64_t pair_stream(std::uint64_t seed, std::uint32_t doc_id,
                          std::uint32_t label_id) {
  const std::uint64_t pair =
      (static_cast<std::uint64_t>(doc_id) << 32) | static_cast<std::uint64_t>(label_id);
  return splitmix64(seed ^ splitmix64(pair));
}

const char* verdict_word(bool relevant) { return relevant ? "yes" : "no"; }

}  // namespace

PromptTemplate make_prompt_template(std::string text, std::size_t max_doc_tokens) {
  if (count_occurrences(text, kDocSlot) != 1 ||
      count_occurrences(text, kLabelSlot) != 1) {
    fail(ErrorCode::TypeMismatch,
         "prompt template needs exactly one {doc} and one {label_text}");
  }
  return PromptTemplate{std::move(text), max_doc_tokens};
}

PromptTemplate builtin_prompt_template(const std::string& name,
                                       std::size_t max_doc_tokens) {
  std::string text;
  if (name == "eurlex" || name == "wiki10") {
    text = "document = {doc}. Is the tag {label_text} relevant to the document? "
           "answer yes or no";
  } else if (name == "amazoncat") {
    text = "document = {doc}. The document is amazon product description, Is the tag "
           "{label_text} relevant to the document? answer yes or no";
  } else if (name == "wikiseealso") {
    text = "document = {doc}. The document is the wikipedia page. Does another "
           "wikipedia page name \"{label_text}\" has the relation to the document? "
           "answer yes or no";
  } else if (name == "wikipedia") {
    text = "document = {doc}, the document is the wikipedia page. Is the tag "
           "\"{label_text}\" relevant to the document? answer yes or no";
  } else {
    fail(ErrorCode::TypeMismatch,
         "unknown prompt template \"" + name +
             "\"; expected eurlex, wiki10, amazoncat, wikiseealso or wikipedia");
  }
  return make_prompt_template(std::move(text), max_doc_tokens);
}

std::string build_prompt(const PromptTemplate& tpl, std::string_view doc_text,
                         std::string_view label_text) {
  const std::string doc = truncate_tokens(doc_text, tpl.max_doc_tokens);
  const std::size_t doc_pos = tpl.text.find(kDocSlot);
  const std::size_t label_pos = tpl.text.find(kLabelSlot);

  struct Slot {
    std::size_t pos;
    std::size_t len;
    std::string_view replacement;
  };
  Slot slots[2] = {{doc_pos, kDocSlot.size(), doc},
                   {label_pos, kLabelSlot.size(), label_text}};
  if (slots[0].pos > slots[1].pos) std::swap(slots[0], slots[1]);

  std::string out;
  out.reserve(tpl.text.size() + doc.size() + label_text.size());
  std::size_t cursor = 0;
  for (const Slot& slot : slots) {
    out.append(tpl.text, cursor, slot.pos - cursor);
    out.append(slot.replacement);
    cursor = slot.pos + slot.len;
  }
  out.append(tpl.text, cursor, std::string::npos);
  return out;
}

std::uint64_t prompt_hash(const std::string& rendered_prompt) {
  return fnv1a64(rendered_prompt);
}

Verdict parse_verdict(std::string_view reply) {
  Verdict verdict;
  verdict.raw = std::string(reply);
  std::size_t i = 0;
  while (i < reply.size() && !std::isalnum(static_cast<unsigned char>(reply[i]))) ++i;
  auto lower_at = [&](std::size_t offset) {
    return static_cast<char>(
        std::tolower(static_cast<unsigned char>(reply[i + offset])));
  };
  if (i + 3 <= reply.size() && lower_at(0) == 'y' && lower_at(1) == 'e' &&
      lower_at(2) == 's') {
    verdict.relevant = true;
    verdict.parse_status = ParseStatus::Clean;
  } else if (i + 2 <= reply.size() && lower_at(0) == 'n' && lower_at(1) == 'o') {
    verdict.relevant = false;
    verdict.parse_status = ParseStatus::Clean;
  } else {
    verdict.relevant = false;
    verdict.parse_status = ParseStatus::Unparseable;
  }
  return verdict;
}

std::size_t JudgmentCache::KeyHash::operator()(const Key& k) const {
  const std::uint64_t pair =
      (static_cast<std::uint64_t>(k.doc_id) << 32) | static_cast<std::uint64_t>(k.label_id);
  return static_cast<std::size_t>(splitmix64(splitmix64(pair) ^ k.prompt_hash));
}

JudgmentCache::JudgmentCache(const std::string& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
      const Key key{record.at("doc_id").get<std::uint32_t>(),
                    record.at("label_id").get<std::uint32_t>(),
                    record.at("prompt_hash").get<std::uint64_t>()};
      Verdict verdict;
      verdict.relevant = record.at("verdict").get<std::string>() == "relevant";
      verdict.parse_status = record.at("parse_status").get<std::string>() == "clean"
                                 ? ParseStatus::Clean
                                 : ParseStatus::Unparseable;
      verdict.raw = record.at("raw").get<std::string>();
      if (map_.emplace(key, verdict).second) remember(key, verdict);
    } catch (const json::exception& ex) {
      fail(ErrorCode::MalformedRecord, "bad cache record at " + path + ":" +
                                           std::to_string(line_number) + ": " + ex.what());
    }
  }
}

void JudgmentCache::remember(const Key& key, const Verdict& verdict) {
  stats_.entries += 1;
  if (verdict.relevant) {
    stats_.relevant += 1;
  } else {
    stats_.not_relevant += 1;
  }
  if (verdict.parse_status == ParseStatus::Unparseable) stats_.unparseable += 1;
}

std::optional<Verdict> JudgmentCache::lookup(std::uint32_t doc_id, std::uint32_t label_id,
                                             std::uint64_t prompt_hash) {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = map_.find(Key{doc_id, label_id, prompt_hash});
  if (it == map_.end()) {
    stats_.misses += 1;
    return std::nullopt;
  }
  stats_.hits += 1;
  return it->second;
}

Verdict JudgmentCache::insert(std::uint32_t doc_id, std::uint32_t label_id,
                              std::uint64_t prompt_hash, Verdict verdict) {
  std::lock_guard<std::mutex> lock(mutex_);
  const Key key{doc_id, label_id, prompt_hash};
  const auto [it, inserted] = map_.emplace(key, std::move(verdict));
  if (inserted) {
    remember(key, it->second);
    if (!path_.empty()) {
      std::ofstream out(path_, std::ios::binary | std::ios::app);
      if (!out) fail(ErrorCode::IoError, "cannot append to " + path_);
      const json record{
          {"doc_id", key.doc_id},
          {"label_id", key.label_id},
          {"prompt_hash", key.prompt_hash},
          {"verdict", it->second.relevant ? "relevant" : "not_relevant"},
          {"parse_status",
           it->second.parse_status == ParseStatus::Clean ? "clean" : "unparseable"},
          {"raw", it->second.raw}};
      out << record.dump() << '\n';
      if (!out) fail(ErrorCode::IoError, "write failed on " + path_);
    }
  }
  return it->second;
}

CacheStats JudgmentCache::stats() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return stats_;
}

std::size_t JudgmentCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return map_.size();
}

OracleTeacher::OracleTeacher(const GroundTruth& truth, double flip_noise,
                             std::uint64_t seed)
    : truth_(truth), flip_noise_(flip_noise), seed_(seed) {}

Verdict OracleTeacher::judge_pair(std::uint32_t doc_id, std::uint32_t label_id,
                                  const std::string& prompt, std::string_view doc_text,
                                  std::string_view label_text) {
  ++calls_;
  const bool in_truth = truth_.contains(doc_id, label_id);
  const bool flip = to_unit_interval(pair_stream(seed_, doc_id, label_id)) < flip_noise_;
  Verdict verdict;
  verdict.relevant = in_truth != flip;
  verdict.parse_status = ParseStatus::Clean;
  verdict.raw = verdict_word(verdict.relevant);
  return verdict;
}

LexicalTeacher::LexicalTeacher(double threshold) : threshold_(threshold) {}

Verdict LexicalTeacher::judge_pair(std::uint32_t doc_id, std::uint32_t label_id,
                                   const std::string& prompt, std::string_view doc_text,
                                   std::string_view label_text) {
  ++calls_;
  const std::string doc_lower = lowercase_ascii(doc_text);
  const std::string label_lower = lowercase_ascii(label_text);
  std::vector<std::string_view> doc_tokens = tokenize(doc_lower);
  std::vector<std::string_view> label_tokens = tokenize(label_lower);
  std::sort(doc_tokens.begin(), doc_tokens.end());
  doc_tokens.erase(std::unique(doc_tokens.begin(), doc_tokens.end()), doc_tokens.end());
  std::sort(label_tokens.begin(), label_tokens.end());
  label_tokens.erase(std::unique(label_tokens.begin(), label_tokens.end()),
                     label_tokens.end());

  std::size_t shared = 0;
  for (const auto& token : label_tokens) {
    if (std::binary_search(doc_tokens.begin(), doc_tokens.end(), token)) ++shared;
  }
  const std::size_t unioned = doc_tokens.size() + label_tokens.size() - shared;
  const double jaccard =
      unioned == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(unioned);

  Verdict verdict;
  verdict.relevant = jaccard >= threshold_;
  verdict.parse_status = ParseStatus::Clean;
  verdict.raw = verdict_word(verdict.relevant);
  return verdict;
}

Verdict judge(TeacherBackend& backend, JudgmentCache& cache, std::uint32_t doc_id,
              std::string_view doc_text, std::uint32_t label_id,
              std::string_view label_text, const PromptTemplate& tpl) {
  const std::string prompt = build_prompt(tpl, doc_text, label_text);
  const std::uint64_t key = prompt_hash(prompt);
  if (auto cached = cache.lookup(doc_id, label_id, key)) return *cached;
  Verdict fresh = backend.judge_pair(doc_id, label_id, prompt, doc_text, label_text);
  return cache.insert(doc_id, label_id, key, std::move(fresh));
}

ShortlistVerdicts filter_shortlist(TeacherBackend& backend, JudgmentCache& cache,
                                   std::uint32_t doc_id, std::string_view doc_text,
                                   const RankedList& shortlist, const LabelSpace& labels,
                                   const PromptTemplate& tpl) {
  ShortlistVerdicts out;
  for (const auto& [label_id, unused_score] : shortlist) {
    const Verdict verdict =
        judge(backend, cache, doc_id, doc_text, label_id, labels.texts.at(label_id), tpl);
    if (verdict.parse_status == ParseStatus::Unparseable) out.unparseable += 1;
    if (verdict.relevant) {
      out.positives.push_back(label_id);
    } else {
      out.rejected.push_back(label_id);
    }
  }
  return out;
}

}  // namespace lmtx
