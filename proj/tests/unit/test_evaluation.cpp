#include <doctest.h>

#include <memory>
#include <numeric>
#include <random>

#include "rode/error.hpp"
#include "rode/evaluation.hpp"
#include "rode/harness.hpp"
#include "rode/kernels.hpp"
#include "support.hpp"

using namespace rode;

namespace {

Ranking ranking_with_relevant(std::size_t length, std::initializer_list<std::size_t> ranks) {
  Ranking r;
  r.order.resize(length);
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  r.relevant.assign(length, false);
  for (std::size_t k : ranks) r.relevant[k - 1] = true;
  return r;
}

}  // namespace

TEST_CASE("joint feature") {
  const double a[] = {1.0, 0.0};
  const double b[] = {0.0, 1.0};
  const auto j = joint_feature(a, b);
  CHECK(j[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(j[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
  const double u[] = {0.6, 0.8};
  CHECK(joint_feature(u, u) == std::vector<double>{0.6, 0.8});
  const double short_v[] = {1.0};
  CHECK_THROWS_AS(joint_feature(a, short_v), Error);
}

TEST_CASE("single-model joint feature is that model's embedding") {
  TrainConfig c;
  c.embed_dim = 4;
  TrainingState s;
  s.a = init_model(ModelId::A, 3, c);
  s.b = init_model(ModelId::B, 3, c);
  const Sample x{0, Modality::Infrared, {0.3, -1.0, 2.0}};
  CHECK(joint_feature(s, x, ModelId::B) == encoder_forward(s.b.encoders[1], x.feature));
  const auto j = joint_feature(s, x);
  CHECK(j == joint_feature(encoder_forward(s.a.encoders[1], x.feature),
                           encoder_forward(s.b.encoders[1], x.feature)));
}

TEST_CASE("cmc examples") {
  const Ranking top = ranking_with_relevant(20, {1});
  CHECK(cmc(std::span(&top, 1), 1) == 1.0);
  const Ranking third = ranking_with_relevant(20, {3});
  CHECK(cmc(std::span(&third, 1), 1) == 0.0);
  CHECK(cmc(std::span(&third, 1), 10) == 1.0);
}

TEST_CASE("average precision") {
  CHECK(average_precision(ranking_with_relevant(10, {1, 3})) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(average_precision(ranking_with_relevant(10, {1, 2, 3})) == 1.0);
  for (std::size_t r = 1; r <= 10; ++r)
    CHECK(average_precision(ranking_with_relevant(10, {r})) == doctest::Approx(1.0 / double(r)).epsilon(1e-15));
}

TEST_CASE("inverse negative penalty") {
  CHECK(inverse_negative_penalty(ranking_with_relevant(10, {1, 3})) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(inverse_negative_penalty(ranking_with_relevant(10, {1, 2, 3, 4})) == 1.0);
  for (std::size_t r = 1; r <= 10; ++r)
    CHECK(inverse_negative_penalty(ranking_with_relevant(10, {r})) == doctest::Approx(1.0 / double(r)).epsilon(1e-15));
}

TEST_CASE("queries without relevant items are skipped") {
  const Ranking rs[] = {ranking_with_relevant(5, {}), ranking_with_relevant(5, {2})};
  std::size_t skipped = 0;
  CHECK(map_score(rs, &skipped) == 0.5);
  CHECK(skipped == 1);
  const RetrievalMetrics m = retrieval_metrics(rs);
  CHECK(m.queries == 1);
  CHECK(m.skipped == 1);
}

TEST_CASE("ranking orders by similarity with index tie-break") {
  Matrix q(1, 2);
  q(0, 0) = 1.0;
  Matrix g(4, 2);
  g(0, 1) = 1.0;  // orthogonal
  g(1, 0) = 2.0;  // same direction
  g(2, 0) = 1.0;  // same direction, tie with 1
  g(3, 0) = -1.0;
  const int qid[] = {7};
  const int gid[] = {7, 1, 7, 2};
  const auto r = rank_gallery(q, qid, g, gid);
  CHECK(r[0].order == std::vector<std::size_t>{1, 2, 0, 3});
  CHECK(r[0].relevant == std::vector<bool>{false, true, true, false});
  CHECK_THROWS_AS(rank_gallery(q, gid, g, gid), Error);
}

TEST_CASE("metrics agree with an independent recount") {
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> size(1, 50), id_count(1, 8);
  for (int trial = 0; trial < 60; ++trial) {
    const auto nq = static_cast<std::size_t>(size(rng));
    const auto ng = static_cast<std::size_t>(size(rng));
    std::uniform_int_distribution<int> ids(0, id_count(rng));
    std::vector<int> qid(nq), gid(ng);
    for (int& v : qid) v = ids(rng);
    for (int& v : gid) v = ids(rng);
    Matrix qf = testing::gaussian_matrix(nq, 4, rng), gf = testing::gaussian_matrix(ng, 4, rng);
    // Quantize to create similarity ties.
    for (double& v : gf.data()) v = std::round(v);
    for (std::size_t i = 0; i < ng; ++i)
      if (norm(gf.row(i)) == 0.0) gf(i, 0) = 1.0;
    const auto rankings = rank_gallery(qf, qid, gf, gid);
    const Matrix qn = kernels::normalize_rows(qf), gn = kernels::normalize_rows(gf);
    double r1 = 0, r10 = 0, ap = 0, inp = 0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < nq; ++i) {
      std::vector<double> sim(ng);
      std::vector<char> rel(ng);
      for (std::size_t g = 0; g < ng; ++g) {
        double s = 0.0;
        for (std::size_t d = 0; d < 4; ++d) s += qn(i, d) * gn(g, d);
        sim[g] = s;
        rel[g] = gid[g] == qid[i];
      }
      std::unique_ptr<bool[]> flags(new bool[ng]);
      for (std::size_t g = 0; g < ng; ++g) flags[g] = rel[g];
      const auto rc = testing::recount(sim, std::span<const bool>(flags.get(), ng));
      if (!rc.has_relevant) continue;
      ++valid;
      r1 += rc.rank1;
      r10 += rc.rank10;
      ap += rc.ap;
      inp += rc.inp;
    }
    std::size_t skipped = 0;
    if (valid == 0) {
      CHECK(cmc(rankings, 1, &skipped) == 0.0);
      CHECK(skipped == nq);
      continue;
    }
    CHECK(cmc(rankings, 1) == doctest::Approx(r1 / valid).epsilon(1e-12));
    CHECK(cmc(rankings, 10) == doctest::Approx(r10 / valid).epsilon(1e-12));
    CHECK(map_score(rankings) == doctest::Approx(ap / valid).epsilon(1e-12));
    CHECK(minp(rankings) == doctest::Approx(inp / valid).epsilon(1e-12));
  }
}

TEST_CASE("cmc is non-decreasing in k") {
  std::mt19937_64 rng(9);
  const Matrix q = testing::gaussian_matrix(30, 5, rng), g = testing::gaussian_matrix(40, 5, rng);
  std::vector<int> qid(30), gid(40);
  for (std::size_t i = 0; i < 30; ++i) qid[i] = int(i % 6);
  for (std::size_t i = 0; i < 40; ++i) gid[i] = int(i % 6);
  const auto r = rank_gallery(q, qid, g, gid);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 40; ++k) {
    const double c = cmc(r, k);
    CHECK(c >= prev);
    prev = c;
  }
  CHECK(prev == 1.0);
}

TEST_CASE("evaluation covers both query directions") {
  const BenchmarkData data = make_benchmark(sanity_benchmark(0));
  TrainConfig c = sanity_config();
  TrainingState s;
  s.a = init_model(ModelId::A, data.test.dim, c);
  s.b = init_model(ModelId::B, data.test.dim, c);
  const EvaluationReport r = evaluate(s, data.test);
  CHECK(r.infrared_to_visible.queries == data.test.count(Modality::Infrared));
  CHECK(r.visible_to_infrared.queries == data.test.count(Modality::Visible));
  CHECK(r.infrared_to_visible.rank1 <= r.infrared_to_visible.rank10);
  CHECK(r.infrared_to_visible.rank10 <= r.infrared_to_visible.rank20);
}
