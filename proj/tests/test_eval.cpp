#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "reid/errors.hpp"
#include "reid/eval.hpp"
#include "reid/losses.hpp"
#include "reid/sampling.hpp"

using namespace reid;

static EmbeddingBatch batch_1d(const std::vector<double>& xs,
                               const std::vector<int>& ids) {
  EmbeddingBatch emb;
  emb.features = Matrix(xs.size(), 1);
  emb.features.data = xs;
  emb.ids = ids;
  return emb;
}

TEST_CASE("rank_gallery ordering, ties, exclusions") {
  EmbeddingBatch gallery = batch_1d({0.5, 0.1, 0.9}, {0, 1, 2});
  CHECK(rank_gallery({0.0}, gallery, {}) ==
        std::vector<std::size_t>{1, 0, 2});

  EmbeddingBatch equidistant = batch_1d({0.3, 0.3, 0.3}, {0, 1, 2});
  CHECK(rank_gallery({0.0}, equidistant, {}) ==
        std::vector<std::size_t>{0, 1, 2});

  CHECK(rank_gallery({0.0}, gallery, {1}) == std::vector<std::size_t>{0, 2});
  CHECK_THROWS_AS(rank_gallery({0.0}, gallery, {0, 1, 2}),
                  EmptyGalleryAfterExclusion);
}

TEST_CASE("rank_gallery output is a permutation") {
  Rng rng(1);
  EmbeddingBatch gallery;
  gallery.features = Matrix(20, 4);
  for (double& x : gallery.features.data) x = rng.normal();
  gallery.ids.resize(20);
  Vector q(4);
  for (double& x : q) x = rng.normal();
  auto ranked = rank_gallery(q, gallery, {3, 7});
  CHECK(ranked.size() == 18);
  std::vector<std::size_t> sorted = ranked;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0, j = 0; i < 20; ++i) {
    if (i == 3 || i == 7) continue;
    CHECK(sorted[j++] == i);
  }
}

TEST_CASE("cmc hand examples") {
  // first match at rank 3 (0-based index 2)
  auto curve = cmc({{false, false, true, false, true}}, 5);
  CHECK(curve == std::vector<double>{0, 0, 1, 1, 1});

  auto ones = cmc({{true, false}, {true, true}}, 2);
  CHECK(ones == std::vector<double>{1, 1});

  CHECK_THROWS_AS(cmc({{false, false}}, 2), QueryWithoutMatch);
}

TEST_CASE("cmc matches first-hit oracle on random relevance lists") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nq = 1 + rng.below(8);
    const std::size_t len = 3 + rng.below(10);
    std::vector<std::vector<bool>> rel(nq);
    for (auto& flags : rel) {
      flags.resize(len);
      for (std::size_t i = 0; i < len; ++i) flags[i] = rng.below(3) == 0;
      flags[rng.below(len)] = true;  // guarantee a match
    }
    auto curve = cmc(rel, len);
    for (std::size_t r = 1; r <= len; ++r) {
      // direct scan oracle
      std::size_t hits = 0;
      for (const auto& flags : rel)
        for (std::size_t i = 0; i < r; ++i)
          if (flags[i]) {
            ++hits;
            break;
          }
      CHECK(curve[r - 1] ==
            static_cast<double>(hits) / static_cast<double>(nq));
      if (r > 1) CHECK(curve[r - 1] >= curve[r - 2]);  // monotone
      CHECK(curve[r - 1] <= 1.0);
    }
  }
}

TEST_CASE("average_precision") {
  // matches at positions 1 and 3
  CHECK(average_precision({true, false, true}) ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(average_precision({true, true, true}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(average_precision({false, false}), QueryWithoutMatch);

  // naive precision-at-k oracle
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 2 + rng.below(12);
    std::vector<bool> flags(len);
    for (std::size_t i = 0; i < len; ++i) flags[i] = rng.below(2) == 0;
    flags[rng.below(len)] = true;
    double sum = 0.0;
    std::size_t total = 0;
    for (std::size_t k = 0; k < len; ++k) {
      if (!flags[k]) continue;
      std::size_t in_top = 0;
      for (std::size_t i = 0; i <= k; ++i) in_top += flags[i];
      sum += static_cast<double>(in_top) / static_cast<double>(k + 1);
      ++total;
    }
    CHECK(std::fabs(average_precision(flags) - sum / total) < 1e-12);
  }
}

TEST_CASE("evaluate: self-retrieval and separated clusters") {
  EmbeddingBatch queries = batch_1d({0.0, 5.0}, {0, 1});
  EmbeddingBatch gallery = batch_1d({0.0, 5.0, 0.2, 5.2}, {0, 1, 0, 1});
  EvalProtocol protocol;
  protocol.max_rank = 4;
  EvalReport report = evaluate(queries, gallery, protocol);
  CHECK(report.cmc[0] == 1.0);
  CHECK(report.map > 0.99);
  CHECK(report.demarcation > 0.0);
}

TEST_CASE("evaluate: mAP equals mean of per-query AP oracle") {
  Rng rng(4);
  EmbeddingBatch queries, gallery;
  queries.features = Matrix(5, 3);
  gallery.features = Matrix(15, 3);
  for (double& x : queries.features.data) x = rng.normal();
  for (double& x : gallery.features.data) x = rng.normal();
  for (int i = 0; i < 5; ++i) queries.ids.push_back(i);
  for (int i = 0; i < 15; ++i) gallery.ids.push_back(i % 5);

  EvalProtocol protocol;
  protocol.max_rank = 5;
  EvalReport report = evaluate(queries, gallery, protocol);
  const double mean =
      std::accumulate(report.per_query_ap.begin(), report.per_query_ap.end(),
                      0.0) /
      report.per_query_ap.size();
  CHECK(std::fabs(report.map - mean) < 1e-12);

  // invariance under identity relabeling
  EmbeddingBatch q2 = queries, g2 = gallery;
  for (int& id : q2.ids) id = id * 7 + 3;
  for (int& id : g2.ids) id = id * 7 + 3;
  CHECK(evaluate(q2, g2, protocol).map == doctest::Approx(report.map));
}

TEST_CASE("evaluate: camera exclusion protocol") {
  EmbeddingBatch queries = batch_1d({0.0}, {0});
  queries.cameras = {0};
  // same id+camera entry sits closest but must be excluded
  EmbeddingBatch gallery = batch_1d({0.01, 0.5, 3.0}, {0, 0, 1});
  gallery.cameras = {0, 1, 0};
  EvalProtocol protocol;
  protocol.max_rank = 2;
  EvalReport report = evaluate(queries, gallery, protocol);
  CHECK(report.per_query_ap[0] == doctest::Approx(1.0));

  protocol.camera_exclusion = false;
  EvalReport no_excl = evaluate(queries, gallery, protocol);
  CHECK(no_excl.per_query_ap[0] == doctest::Approx(1.0));  // both id-0 items hit

  // query whose only match is excluded -> error, not a silent skip
  EmbeddingBatch gallery2 = batch_1d({0.01, 3.0}, {0, 1});
  gallery2.cameras = {0, 0};
  protocol.camera_exclusion = true;
  CHECK_THROWS_AS(evaluate(queries, gallery2, protocol), QueryWithoutMatch);
}

TEST_CASE("distance_histogram") {
  EmbeddingBatch emb = batch_1d({0.0, 0.1, 1.0, 1.2}, {0, 0, 1, 1});
  Histogram h = distance_histogram(emb, 10);
  std::size_t pos = std::accumulate(h.pos.begin(), h.pos.end(), std::size_t{0});
  std::size_t neg = std::accumulate(h.neg.begin(), h.neg.end(), std::size_t{0});
  CHECK(pos == 2);
  CHECK(neg == 4);

  // all pairs in one bin
  EmbeddingBatch tight = batch_1d({0.0, 0.0, 0.0, 0.0}, {0, 0, 1, 1});
  Histogram ht = distance_histogram(tight, 5);
  CHECK(ht.pos[0] == 2);
  CHECK(ht.neg[0] == 4);

  // bin totals match pair enumeration on random batches
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    EmbeddingBatch r;
    const std::size_t n = 6 + rng.below(10);
    r.features = Matrix(n, 3);
    for (double& x : r.features.data) x = rng.normal();
    r.ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.ids[i] = static_cast<int>(i % 3);
    Histogram hr = distance_histogram(r, 8);
    std::size_t total =
        std::accumulate(hr.pos.begin(), hr.pos.end(), std::size_t{0}) +
        std::accumulate(hr.neg.begin(), hr.neg.end(), std::size_t{0});
    CHECK(total == n * (n - 1) / 2);
  }

  EmbeddingBatch one_id = batch_1d({0.0, 1.0}, {0, 0});
  CHECK_THROWS_AS(distance_histogram(one_id, 5), SingleIdentityBatch);
  EmbeddingBatch no_pos = batch_1d({0.0, 1.0}, {0, 1});
  CHECK_THROWS_AS(distance_histogram(no_pos, 5), NoPositivePairs);
}

TEST_CASE("demarcation sign agrees with the msml hinge at alpha=0") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    EmbeddingBatch emb;
    const std::size_t n = 8;
    emb.features = Matrix(n, 3);
    for (double& x : emb.features.data) x = rng.normal();
    emb.ids = {0, 0, 0, 1, 1, 2, 2, 2};
    MarginConfig cfg;
    cfg.alpha = 0.0;
    cfg.normalize_inputs = false;
    const double dem = demarcation(pairwise_distances(emb.features), emb.ids);
    const double loss = msml_loss(emb, cfg).value;
    if (dem > 0.0) CHECK(loss == 0.0);
    if (loss > 0.0) CHECK(dem <= 0.0);
  }
}
