#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rode/dataset.hpp"
#include "rode/trainer.hpp"

namespace rode {

// One query's view of the gallery: gallery indices by descending cosine
// similarity (ties by ascending index) and the matching relevance flags.
struct Ranking {
  std::size_t query = 0;
  std::vector<std::size_t> order;
  std::vector<bool> relevant;  // relevant[r] refers to order[r]
};

// 0.5 * (f_A(x) + f_B(x)), L2-normalized. With `single` set, that model's
// feature alone.
std::vector<double> joint_feature(const TrainingState& state, const Sample& sample,
                                  std::optional<ModelId> single = std::nullopt);
std::vector<double> joint_feature(std::span<const double> feature_a,
                                  std::span<const double> feature_b);

std::vector<Ranking> rank_gallery(const Matrix& query_features, std::span<const int> query_ids,
                                  const Matrix& gallery_features, std::span<const int> gallery_ids);

// Queries without any relevant gallery item are skipped; `skipped` counts them.
double cmc(std::span<const Ranking> rankings, std::size_t k, std::size_t* skipped = nullptr);
double map_score(std::span<const Ranking> rankings, std::size_t* skipped = nullptr);
double minp(std::span<const Ranking> rankings, std::size_t* skipped = nullptr);

double average_precision(const Ranking& ranking);
double inverse_negative_penalty(const Ranking& ranking);

struct RetrievalMetrics {
  double rank1 = 0.0;
  double rank10 = 0.0;
  double rank20 = 0.0;
  double map = 0.0;
  double minp = 0.0;
  std::size_t queries = 0;
  std::size_t skipped = 0;
};

RetrievalMetrics retrieval_metrics(std::span<const Ranking> rankings);

struct EvaluationReport {
  RetrievalMetrics infrared_to_visible;  // infrared queries, visible gallery
  RetrievalMetrics visible_to_infrared;
};

// Embeds every sample with the joint feature and evaluates both directions.
EvaluationReport evaluate(const TrainingState& state, const Dataset& test,
                          std::optional<ModelId> single = std::nullopt);

// Embeds a whole modality with the joint feature.
Matrix embed(const TrainingState& state, const Dataset& dataset, Modality modality,
             std::optional<ModelId> single = std::nullopt);

}  // namespace rode
