#pragma once

#include <cstdint>
#include <string>

#include "lmtx/corpus.hpp"

namespace lmtx {

// Topical benchmark generator: every topic owns a private vocabulary, its
// labels name small slices of that vocabulary, and its documents mix topic
// words with a shared common pool. Documents are relevant to every label of
// their topic and to nothing else, so a noiseless judge of the ground truth
// admits a consistent optimum.
struct SynthSpec {
  std::uint32_t topics = 50;
  std::uint32_t docs_per_topic = 40;
  std::uint32_t labels_per_topic = 4;
  std::uint32_t test_docs_per_topic = 8;
  std::uint32_t words_per_topic = 30;
  std::uint32_t common_words = 12;
  double common_rate = 0.35;
  double neighbor_rate = 0.15;
  std::uint32_t doc_len_min = 20;
  std::uint32_t doc_len_max = 40;
  std::uint64_t seed = 42;
};

void validate_synth_spec(const SynthSpec& spec);

struct SynthCorpus {
  DocumentCollection docs;
  GroundTruth truth;
  DocumentCollection test_docs;
  GroundTruth test_truth;
  LabelSpace labels;
};

SynthCorpus generate_synth_corpus(const SynthSpec& spec);

struct SynthFiles {
  std::string docs_path;
  std::string labels_path;
  std::string truth_path;
  std::string test_docs_path;
  std::string test_truth_path;
  std::string config_path;
};

// Writes the corpus plus a ready-to-train config into dir.
SynthFiles write_synth_corpus(const SynthCorpus& corpus, const std::string& dir);

}  // namespace lmtx
