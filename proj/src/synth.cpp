#include "lmtx/synth.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "lmtx/error.hpp"
#include "lmtx/hashing.hpp"

namespace lmtx {

namespace fs = std::filesystem;

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.topics == 0 || spec.docs_per_topic == 0 || spec.labels_per_topic == 0) {
    fail(ErrorCode::SpecInfeasible, "synthetic corpus needs at least one topic, "
                                    "document and label per topic");
  }
  if (spec.words_per_topic < 3 * spec.labels_per_topic) {
    fail(ErrorCode::SpecInfeasible,
         "topic vocabulary too small: need at least 3 words per label, have " +
             std::to_string(spec.words_per_topic) + " words for " +
             std::to_string(spec.labels_per_topic) + " labels");
  }
  if (spec.doc_len_min == 0 || spec.doc_len_max < spec.doc_len_min) {
    fail(ErrorCode::SpecInfeasible, "document length range is empty");
  }
  if (spec.common_rate < 0.0 || spec.common_rate >= 1.0) {
    fail(ErrorCode::SpecInfeasible, "common word rate must lie in [0, 1)");
  }
  if (spec.neighbor_rate < 0.0 || spec.neighbor_rate >= 1.0) {
    fail(ErrorCode::SpecInfeasible, "neighbor word rate must lie in [0, 1)");
  }
  if (spec.common_rate > 0.0 && spec.common_words == 0) {
    fail(ErrorCode::SpecInfeasible, "common word rate is positive but the common "
                                    "vocabulary is empty");
  }
}

namespace {

std::string topic_word(std::uint32_t topic, std::uint32_t word) {
  return "t" + std::to_string(topic) + "w" + std::to_string(word);
}

std::string synth_document(std::uint32_t topic, const SynthSpec& spec,
                           std::mt19937_64& rng) {
  const auto span = spec.doc_len_max - spec.doc_len_min + 1;
  const auto length = spec.doc_len_min + rng() % span;
  std::string text;
  for (std::uint32_t i = 0; i < length; ++i) {
    if (i) text += ' ';
    if (to_unit_interval(rng()) < spec.common_rate) {
      text += "c" + std::to_string(rng() % spec.common_words);
    } else {
      // topical drift: some tokens leak in from an adjacent topic, giving
      // documents near the topic boundary genuinely small label margins.
      std::uint32_t source = topic;
      if (to_unit_interval(rng()) < spec.neighbor_rate) {
        source = (topic + (rng() % 2 ? 1 : spec.topics - 1)) % spec.topics;
      }
      text += topic_word(source, static_cast<std::uint32_t>(rng() % spec.words_per_topic));
    }
  }
  return text;
}

std::vector<std::uint32_t> topic_labels(std::uint32_t topic, const SynthSpec& spec) {
  std::vector<std::uint32_t> ids;
  for (std::uint32_t l = 0; l < spec.labels_per_topic; ++l) {
    ids.push_back(topic * spec.labels_per_topic + l);
  }
  return ids;
}

void fill_split(DocumentCollection& docs, GroundTruth& truth, std::uint32_t per_topic,
                const SynthSpec& spec, std::mt19937_64& rng) {
  std::uint32_t id = 0;
  for (std::uint32_t t = 0; t < spec.topics; ++t) {
    for (std::uint32_t d = 0; d < per_topic; ++d) {
      docs.docs.push_back({id++, synth_document(t, spec, rng)});
      truth.relevant.push_back(topic_labels(t, spec));
    }
  }
}

}  // namespace

SynthCorpus generate_synth_corpus(const SynthSpec& spec) {
  validate_synth_spec(spec);
  std::mt19937_64 rng(spec.seed);

  SynthCorpus corpus;
  for (std::uint32_t t = 0; t < spec.topics; ++t) {
    for (std::uint32_t l = 0; l < spec.labels_per_topic; ++l) {
      corpus.labels.texts.push_back(topic_word(t, 3 * l) + " " + topic_word(t, 3 * l + 1) +
                                    " " + topic_word(t, 3 * l + 2));
    }
  }
  fill_split(corpus.docs, corpus.truth, spec.docs_per_topic, spec, rng);
  fill_split(corpus.test_docs, corpus.test_truth, spec.test_docs_per_topic, spec, rng);
  return corpus;
}

SynthFiles write_synth_corpus(const SynthCorpus& corpus, const std::string& dir) {
  fs::create_directories(dir);
  const auto at = [&](const char* name) { return (fs::path(dir) / name).string(); };

  SynthFiles files;
  files.docs_path = at("docs.txt");
  files.labels_path = at("labels.txt");
  files.truth_path = at("truth.txt");
  files.test_docs_path = at("test_docs.txt");
  files.test_truth_path = at("test_truth.txt");
  files.config_path = at("lmtx.config");

  save_documents(corpus.docs, files.docs_path);
  save_label_space(corpus.labels, files.labels_path);
  save_ground_truth(corpus.truth, files.truth_path);
  save_documents(corpus.test_docs, files.test_docs_path);
  save_ground_truth(corpus.test_truth, files.test_truth_path);

  std::ofstream out(files.config_path, std::ios::binary);
  out << "# training setup for the generated topical benchmark\n"
      << "docs_path = " << files.docs_path << "\n"
      << "docs_format = raw-text\n"
      << "labels_path = " << files.labels_path << "\n"
      << "truth_path = " << files.truth_path << "\n"
      << "test_docs_path = " << files.test_docs_path << "\n"
      << "test_truth_path = " << files.test_truth_path << "\n"
      << "dev_size = 200\n"
      << "hash_dim = 32768\n"
      << "embed_dim = 64\n"
      << "index_backend = exact\n"
      << "teacher_backend = oracle\n"
      << "oracle_flip_noise = 0\n"
      << "prompt_template = eurlex\n"
      << "cache_path = " << at("judgments.jsonl") << "\n"
      << "out_dir = " << at("runs") << "\n";
  if (!out) fail(ErrorCode::IoError, "cannot write synth config " + files.config_path);
  return files;
}

}  // namespace lmtx
