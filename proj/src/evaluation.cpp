#include "rode/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "rode/error.hpp"
#include "rode/kernels.hpp"

namespace rode {

std::vector<double> joint_feature(std::span<const double> feature_a,
                                  std::span<const double> feature_b) {
  if (feature_a.size() != feature_b.size()) throw Error("joint_feature: dimension mismatch");
  std::vector<double> v(feature_a.size());
  for (std::size_t d = 0; d < v.size(); ++d) v[d] = 0.5 * (feature_a[d] + feature_b[d]);
  normalize_in_place(v);
  return v;
}

std::vector<double> joint_feature(const TrainingState& state, const Sample& sample,
                                  std::optional<ModelId> single) {
  const std::size_t mi = index_of(sample.modality);
  if (single) return encoder_forward(state.model(*single).encoders[mi], sample.feature);
  return joint_feature(encoder_forward(state.a.encoders[mi], sample.feature),
                       encoder_forward(state.b.encoders[mi], sample.feature));
}

Matrix embed(const TrainingState& state, const Dataset& dataset, Modality modality,
             std::optional<ModelId> single) {
  const std::size_t mi = index_of(modality);
  const Matrix x = dataset.features(modality);
  if (single) return encode_rows(state.model(*single).encoders[mi], x);
  const Matrix fa = encode_rows(state.a.encoders[mi], x);
  const Matrix fb = encode_rows(state.b.encoders[mi], x);
  Matrix out(x.rows(), fa.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto v = joint_feature(fa.row(i), fb.row(i));
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

std::vector<Ranking> rank_gallery(const Matrix& query_features, std::span<const int> query_ids,
                                  const Matrix& gallery_features, std::span<const int> gallery_ids) {
  if (query_features.rows() != query_ids.size() || gallery_features.rows() != gallery_ids.size())
    throw Error("rank_gallery: id count does not match feature rows");
  const Matrix sim = kernels::inner_products(kernels::normalize_rows(query_features),
                                             kernels::normalize_rows(gallery_features));
  std::vector<Ranking> out(query_features.rows());
  const auto nq = static_cast<std::ptrdiff_t>(query_features.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t qi = 0; qi < nq; ++qi) {
    const auto q = static_cast<std::size_t>(qi);
    Ranking& r = out[q];
    r.query = q;
    r.order.resize(gallery_ids.size());
    std::iota(r.order.begin(), r.order.end(), std::size_t{0});
    const auto row = sim.row(q);
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    r.relevant.resize(r.order.size());
    for (std::size_t k = 0; k < r.order.size(); ++k)
      r.relevant[k] = gallery_ids[r.order[k]] == query_ids[q];
  }
  return out;
}

namespace {

bool has_relevant(const Ranking& r) {
  return std::find(r.relevant.begin(), r.relevant.end(), true) != r.relevant.end();
}

template <typename F>
double mean_over_valid(std::span<const Ranking> rankings, std::size_t* skipped, F&& per_query) {
  double total = 0.0;
  std::size_t used = 0, missing = 0;
  for (const Ranking& r : rankings) {
    if (!has_relevant(r)) {
      ++missing;
      continue;
    }
    total += per_query(r);
    ++used;
  }
  if (skipped) *skipped = missing;
  return used ? total / double(used) : 0.0;
}

}  // namespace

double cmc(std::span<const Ranking> rankings, std::size_t k, std::size_t* skipped) {
  return mean_over_valid(rankings, skipped, [k](const Ranking& r) {
    const std::size_t limit = std::min(k, r.relevant.size());
    for (std::size_t i = 0; i < limit; ++i)
      if (r.relevant[i]) return 1.0;
    return 0.0;
  });
}

double average_precision(const Ranking& r) {
  double hits = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < r.relevant.size(); ++i)
    if (r.relevant[i]) {
      hits += 1.0;
      sum += hits / double(i + 1);
    }
  return hits > 0.0 ? sum / hits : 0.0;
}

double inverse_negative_penalty(const Ranking& r) {
  double hits = 0.0;
  std::size_t hardest = 0;
  for (std::size_t i = 0; i < r.relevant.size(); ++i)
    if (r.relevant[i]) {
      hits += 1.0;
      hardest = i + 1;
    }
  return hardest ? hits / double(hardest) : 0.0;
}

double map_score(std::span<const Ranking> rankings, std::size_t* skipped) {
  return mean_over_valid(rankings, skipped, average_precision);
}

double minp(std::span<const Ranking> rankings, std::size_t* skipped) {
  return mean_over_valid(rankings, skipped, inverse_negative_penalty);
}

RetrievalMetrics retrieval_metrics(std::span<const Ranking> rankings) {
  RetrievalMetrics m;
  m.rank1 = cmc(rankings, 1, &m.skipped);
  m.rank10 = cmc(rankings, 10);
  m.rank20 = cmc(rankings, 20);
  m.map = map_score(rankings);
  m.minp = minp(rankings);
  m.queries = rankings.size() - m.skipped;
  return m;
}

EvaluationReport evaluate(const TrainingState& state, const Dataset& test,
                          std::optional<ModelId> single) {
  validate(test);
  const Matrix vis = embed(state, test, Modality::Visible, single);
  const Matrix ir = embed(state, test, Modality::Infrared, single);
  const auto vis_ids = test.identities(Modality::Visible);
  const auto ir_ids = test.identities(Modality::Infrared);
  EvaluationReport report;
  report.infrared_to_visible = retrieval_metrics(rank_gallery(ir, ir_ids, vis, vis_ids));
  report.visible_to_infrared = retrieval_metrics(rank_gallery(vis, vis_ids, ir, ir_ids));
  return report;
}

}  // namespace rode
