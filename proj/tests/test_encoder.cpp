#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "lmtx/encoder.hpp"
#include "lmtx/error.hpp"
#include "lmtx/hashing.hpp"
#include "testutil.hpp"

using namespace lmtx;
using testutil::TempDir;
using testutil::error_code_of;

namespace {

EncoderParams identity_params(std::uint64_t dim) {
  EncoderParams params;
  params.hash_dim = dim;
  params.embed_dim = dim;
  params.projection.assign(dim * dim, 0.0);
  for (std::uint64_t c = 0; c < dim; ++c) params.projection[c * dim + c] = 1.0;
  return params;
}

FeatureVector fv(std::vector<std::pair<std::uint32_t, double>> entries) {
  FeatureVector f;
  f.entries = std::move(entries);
  return f;
}

double loss_at(const EncoderParams& params, const FeatureVector& anchor,
               const FeatureVector& positive,
               const std::vector<const FeatureVector*>& negatives, double margin) {
  GradBuffer scratch;
  scratch.init(params.hash_dim, params.embed_dim);
  return triplet_loss_and_grad(params, anchor, positive, negatives, margin, scratch);
}

FeatureVector random_features(std::mt19937_64& rng, std::uint64_t hash_dim) {
  const std::size_t count = 1 + rng() % 4;
  std::vector<std::uint32_t> indices;
  while (indices.size() < count) {
    const auto idx = static_cast<std::uint32_t>(rng() % hash_dim);
    if (std::find(indices.begin(), indices.end(), idx) == indices.end()) {
      indices.push_back(idx);
    }
  }
  std::sort(indices.begin(), indices.end());
  FeatureVector f;
  double sq = 0.0;
  for (auto idx : indices) {
    double w = 2.0 * to_unit_interval(rng()) - 1.0;
    if (std::abs(w) < 0.1) w = w < 0 ? -0.1 : 0.1;
    f.entries.emplace_back(idx, w);
    sq += w * w;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& [idx, w] : f.entries) w *= inv;
  return f;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

}  // namespace

TEST_CASE("featurize basics") {
  CHECK(featurize("", 64).empty());
  CHECK(featurize("   \t  ", 64).empty());

  const auto single = featurize("hello", 64);
  REQUIRE(single.size() == 1);
  CHECK(std::abs(single.entries[0].second) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(featurize("Some Words", 128).entries == featurize("some   words", 128).entries);
}

TEST_CASE("featurize emits the hand-enumerated unigrams and bigrams") {
  const std::uint64_t hash_dim = 1u << 10;
  const auto features = featurize("a b", hash_dim);

  std::vector<std::pair<std::uint32_t, double>> expected;
  for (const char* ngram : {"a", "b", "a b"}) {
    const std::uint64_t h = fnv1a64(ngram);
    expected.emplace_back(feature_index(h, hash_dim), feature_sign(h));
  }
  std::sort(expected.begin(), expected.end());
  const double inv = 1.0 / std::sqrt(3.0);
  for (auto& [idx, w] : expected) w *= inv;

  REQUIRE(features.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(features.entries[i].first == expected[i].first);
    CHECK(features.entries[i].second == doctest::Approx(expected[i].second).epsilon(1e-12));
  }

  CHECK(featurize("a b", hash_dim).entries != featurize("b a", hash_dim).entries);
}

TEST_CASE("featurize output is sorted, zero-free and unit norm") {
  std::mt19937_64 rng(11);
  const char* texts[] = {"the quick brown fox", "jumps over the lazy dog",
                         "pack my box with five dozen jugs", "one"};
  for (const char* text : texts) {
    const auto f = featurize(text, 256);
    REQUIRE(!f.empty());
    double sq = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK(f.entries[i].second != 0.0);
      CHECK(f.entries[i].first < 256);
      if (i) CHECK(f.entries[i].first > f.entries[i - 1].first);
      sq += f.entries[i].second * f.entries[i].second;
    }
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("encode with an identity projection recovers basis vectors") {
  const auto params = identity_params(4);
  const auto e2 = encode(params, fv({{2, 1.0}}));
  CHECK(e2 == EmbeddingVector{0.0, 0.0, 1.0, 0.0});
  CHECK(encode(params, fv({{2, 0.25}})) == EmbeddingVector{0.0, 0.0, 1.0, 0.0});
}

TEST_CASE("encode rejects vanishing embeddings and normalizes the rest") {
  const auto params = init_encoder_params(32, 8, 5);
  CHECK(error_code_of([&] { encode(params, FeatureVector{}); }) == ErrorCode::ZeroNorm);

  const auto emb = encode(params, featurize("a handful of words to hash", 32));
  double sq = 0.0;
  for (double x : emb) sq += x * x;
  CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-6);
  CHECK(encode(params, featurize("a handful of words to hash", 32)) == emb);
}

TEST_CASE("score is the dot product on the sphere") {
  const EmbeddingVector x{1.0, 0.0};
  const EmbeddingVector y{0.0, 1.0};
  const EmbeddingVector neg_x{-1.0, 0.0};
  CHECK(score(x, x) == doctest::Approx(1.0));
  CHECK(score(x, y) == doctest::Approx(0.0));
  CHECK(score(x, neg_x) == doctest::Approx(-1.0));
  CHECK(score(x, y) == score(y, x));
}

TEST_CASE("triplet loss matches hand-computed fixtures") {
  const auto params = identity_params(4);
  GradBuffer grad;
  grad.init(4, 4);

  const auto anchor = fv({{0, 1.0}});
  const auto pos = fv({{1, 1.0}});

  SUBCASE("equal positive and negative scores leave exactly the margin") {
    const auto neg = fv({{1, 1.0}});
    std::vector<const FeatureVector*> negs{&neg};
    CHECK(triplet_loss_and_grad(params, anchor, pos, negs, 0.3, grad) ==
          doctest::Approx(0.3).epsilon(1e-12));
  }

  SUBCASE("negative colinear with the anchor costs 1 + margin") {
    const auto neg = fv({{0, 1.0}});
    std::vector<const FeatureVector*> negs{&neg};
    CHECK(triplet_loss_and_grad(params, anchor, pos, negs, 0.3, grad) ==
          doctest::Approx(1.3).epsilon(1e-12));
  }

  SUBCASE("inactive hinge yields zero loss and zero gradient") {
    const auto self_pos = fv({{0, 1.0}});
    const auto neg = fv({{1, 1.0}});
    std::vector<const FeatureVector*> negs{&neg};
    CHECK(triplet_loss_and_grad(params, anchor, self_pos, negs, 0.3, grad) == 0.0);
    CHECK(grad.touched().empty());
  }

  SUBCASE("no negatives means no loss") {
    CHECK(triplet_loss_and_grad(params, anchor, pos, {}, 0.3, grad) == 0.0);
  }
}

TEST_CASE("active loss decreases as the positive approaches the anchor") {
  const auto params = identity_params(3);
  const auto anchor = fv({{0, 1.0}});
  const auto neg = fv({{1, 1.0}});
  std::vector<const FeatureVector*> negs{&neg};
  const auto near_pos = fv({{0, 3.0}, {1, 1.0}});
  const auto far_pos = fv({{0, 1.0}, {1, 3.0}});
  const double near_loss = loss_at(params, anchor, near_pos, negs, 1.2);
  const double far_loss = loss_at(params, anchor, far_pos, negs, 1.2);
  CHECK(near_loss > 0.0);
  CHECK(near_loss < far_loss);
}

TEST_CASE("analytic gradients match central finite differences") {
  constexpr double kStep = 1e-5;
  constexpr double kRelTol = 1e-4;
  std::size_t checked = 0;

  for (std::uint64_t seed = 0; seed < 60 && checked < 20; ++seed) {
    std::mt19937_64 rng(seed * 7919 + 13);
    const std::uint64_t hash_dim = 8 + rng() % 25;
    const std::uint64_t embed_dim = 2 + rng() % 7;
    auto params = init_encoder_params(hash_dim, embed_dim, seed + 100);
    for (double& p : params.projection) p *= 3.0;

    const auto anchor = random_features(rng, hash_dim);
    const auto positive = random_features(rng, hash_dim);
    const std::size_t neg_count = rng() % 5;
    std::vector<FeatureVector> neg_storage;
    neg_storage.reserve(neg_count);
    for (std::size_t i = 0; i < neg_count; ++i) {
      neg_storage.push_back(random_features(rng, hash_dim));
    }
    std::vector<const FeatureVector*> negatives;
    for (const auto& n : neg_storage) negatives.push_back(&n);
    const double margin = 0.3;

    // Skip instances with a hinge close to its kink; finite differences
    // straddle the non-smooth point there.
    const auto e_a = encode(params, anchor);
    const double s_pos = score(e_a, encode(params, positive));
    bool near_kink = false;
    for (const auto* n : negatives) {
      const double hinge = score(e_a, encode(params, *n)) - s_pos + margin;
      if (std::abs(hinge) < 1e-3) near_kink = true;
    }
    if (near_kink) continue;

    GradBuffer grad;
    grad.init(hash_dim, embed_dim);
    triplet_loss_and_grad(params, anchor, positive, negatives, margin, grad);

    for (std::size_t i = 0; i < params.projection.size(); ++i) {
      const double saved = params.projection[i];
      params.projection[i] = saved + kStep;
      const double up = loss_at(params, anchor, positive, negatives, margin);
      params.projection[i] = saved - kStep;
      const double down = loss_at(params, anchor, positive, negatives, margin);
      params.projection[i] = saved;

      const double numeric = (up - down) / (2.0 * kStep);
      const double analytic = grad.values()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      const double rel = std::abs(numeric - analytic) / denom;
      if (rel > kRelTol) {
        CAPTURE(seed);
        CAPTURE(i);
        CAPTURE(numeric);
        CAPTURE(analytic);
        REQUIRE(rel <= kRelTol);
      }
    }
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("adamw fixture behavior") {
  EncoderParams params;
  params.hash_dim = 2;
  params.embed_dim = 2;
  params.projection = {0.5, -0.25, 0.125, 1.0};

  GradBuffer grad;
  grad.init(2, 2);

  SUBCASE("zero gradient and zero decay leave parameters untouched") {
    AdamWState opt;
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    opt.init(params.projection.size(), cfg);
    const auto before = params.projection;
    adamw_step(params, grad, opt);
    CHECK(params.projection == before);
    CHECK(opt.step == 1);
  }

  SUBCASE("zero gradient with decay shrinks every parameter by 1 - lr*wd") {
    AdamWState opt;
    opt.init(params.projection.size(), AdamWConfig{});
    const auto before = params.projection;
    adamw_step(params, grad, opt);
    const double factor = 1.0 - opt.config.lr * opt.config.weight_decay;
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(params.projection[i] == doctest::Approx(before[i] * factor).epsilon(1e-12));
    }
  }

  SUBCASE("first step moves a parameter by about the learning rate") {
    AdamWState opt;
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    opt.init(params.projection.size(), cfg);
    const double g = 0.37;
    const double dir[2] = {g, 0.0};
    grad.add_column(0, 1.0, dir);
    const double before = params.projection[0];
    adamw_step(params, grad, opt);
    const double expected_delta = cfg.lr * g / (std::abs(g) + cfg.eps);
    CHECK(before - params.projection[0] == doctest::Approx(expected_delta).epsilon(1e-9));
    CHECK(params.projection[1] == doctest::Approx(-0.25).epsilon(1e-12));
  }

  SUBCASE("non-finite gradients are rejected") {
    AdamWState opt;
    opt.init(params.projection.size(), AdamWConfig{});
    const double bad[2] = {std::numeric_limits<double>::infinity(), 0.0};
    grad.add_column(1, 1.0, bad);
    CHECK(error_code_of([&] { adamw_step(params, grad, opt); }) ==
          ErrorCode::NonFiniteGradient);
  }
}

TEST_CASE("params fingerprint tracks content") {
  const auto a = init_encoder_params(16, 4, 3);
  auto b = a;
  CHECK(params_fingerprint(a) == params_fingerprint(b));
  b.projection[5] += 1e-9;
  CHECK(params_fingerprint(a) != params_fingerprint(b));
  auto c = init_encoder_params(16, 4, 4);
  CHECK(params_fingerprint(a) != params_fingerprint(c));
}

TEST_CASE("checkpoints restore bit-identical state") {
  TempDir tmp;
  auto params = init_encoder_params(6, 4, 99);
  params.version = 1;
  AdamWState opt;
  AdamWConfig cfg;
  cfg.lr = 1e-3;
  cfg.weight_decay = 0.02;
  opt.init(params.projection.size(), cfg);

  GradBuffer grad;
  grad.init(6, 4);
  const double dir[4] = {0.3, -0.2, 0.05, 0.6};
  grad.add_column(2, 1.0, dir);
  adamw_step(params, grad, opt);
  adamw_step(params, grad, opt);

  const auto path = tmp.join("model.ckpt");
  save_checkpoint(path, params, opt);
  const auto restored = load_checkpoint(path);

  CHECK(restored.params.hash_dim == params.hash_dim);
  CHECK(restored.params.embed_dim == params.embed_dim);
  CHECK(restored.params.version == params.version);
  CHECK(restored.params.init_seed == params.init_seed);
  CHECK(restored.params.projection == params.projection);
  CHECK(restored.opt.m == opt.m);
  CHECK(restored.opt.v == opt.v);
  CHECK(restored.opt.step == opt.step);
  CHECK(restored.opt.config.lr == cfg.lr);
  CHECK(restored.opt.config.weight_decay == cfg.weight_decay);
}

TEST_CASE("damaged checkpoints are refused") {
  TempDir tmp;
  const auto params = init_encoder_params(5, 3, 1);
  AdamWState opt;
  opt.init(params.projection.size(), AdamWConfig{});
  const auto path = tmp.join("model.ckpt");
  save_checkpoint(path, params, opt);
  const std::string original = slurp(path);

  SUBCASE("truncated payload") {
    spit(path, original.substr(0, original.size() - 5));
    CHECK(error_code_of([&] { load_checkpoint(path); }) == ErrorCode::CorruptCheckpoint);
  }
  SUBCASE("flipped payload byte") {
    std::string bytes = original;
    bytes[40] = static_cast<char>(bytes[40] ^ 0x5a);
    spit(path, bytes);
    CHECK(error_code_of([&] { load_checkpoint(path); }) == ErrorCode::CorruptCheckpoint);
  }
  SUBCASE("future format version") {
    std::string bytes = original;
    const std::uint32_t future = 2;
    std::memcpy(bytes.data() + 4, &future, sizeof(future));
    spit(path, bytes);
    CHECK(error_code_of([&] { load_checkpoint(path); }) == ErrorCode::VersionMismatch);
  }
  SUBCASE("wrong magic") {
    std::string bytes = original;
    bytes[0] = 'Z';
    spit(path, bytes);
    CHECK(error_code_of([&] { load_checkpoint(path); }) == ErrorCode::CorruptCheckpoint);
  }
  SUBCASE("trailing garbage") {
    spit(path, original + "xx");
    CHECK(error_code_of([&] { load_checkpoint(path); }) == ErrorCode::CorruptCheckpoint);
  }
}
