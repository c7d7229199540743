#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "cmp/corpus/types.hpp"
#include "cmp/eval/metrics.hpp"
#include "cmp/model/cmp_model.hpp"

namespace cmp::testing {

/// Brute-force metric definitions, written without the library helpers.
double oracle_recall_at_k(const std::vector<std::vector<std::uint32_t>>& rankings,
                          const std::vector<std::set<std::uint32_t>>& relevant, std::size_t k);
double oracle_average_precision(const std::vector<std::uint32_t>& ranking, const std::set<std::uint32_t>& relevant);
double oracle_mean_average_precision(const std::vector<std::vector<std::uint32_t>>& rankings,
                                     const std::vector<std::set<std::uint32_t>>& relevant);

/// Random rankings of a shuffled gallery with one to four relevant ids per query.
struct MetricInstance {
  std::vector<eval::RankingResult> rankings;
  eval::GroundTruth truth;
  std::vector<std::vector<std::uint32_t>> ranked_ids;
  std::vector<std::set<std::uint32_t>> relevant;
};
MetricInstance random_metric_instance(std::uint64_t seed);

/// Small model dims for retrieval tests on 16-pixel images.
model::ModelConfig toy_model_config();

/// Two-stage ranking recomputed from the model's encoders: stable sort by
/// similarity, then by ITM margin within the first `shortlist_k`.
std::vector<std::uint32_t> oracle_two_stage(const model::CmpModel<float>& model,
                                            const std::vector<corpus::CorpusRecord>& gallery,
                                            const model::TextInput& query, std::size_t shortlist_k);

}  // namespace cmp::testing
