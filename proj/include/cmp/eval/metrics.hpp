#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cmp/corpus/types.hpp"
#include "cmp/eval/retrieval.hpp"

namespace cmp::eval {

enum class Setting { kBehaviorMatch, kIdentityMatch };

std::string to_string(Setting s);
/// Accepts "behavior", "identity", "behavior_match" and "identity_match".
Setting parse_setting(std::string_view text);

/// Relevant gallery record ids per query id.
struct GroundTruth {
  Setting setting = Setting::kBehaviorMatch;
  std::map<std::uint32_t, std::set<std::uint32_t>> relevant;

  /// Queries are identified by the record id that supplies their caption.
  /// Behavior match: that record only. Identity match: every gallery record
  /// of the same identity.
  static GroundTruth build(std::span<const corpus::CorpusRecord> queries,
                           std::span<const corpus::CorpusRecord> gallery, Setting setting);
  const std::set<std::uint32_t>& for_query(std::uint32_t query_id) const;
};

/// Fraction of rankings with a relevant id among the first k.
double recall_at_k(std::span<const RankingResult> rankings, const GroundTruth& truth, std::size_t k);
/// Uninterpolated average precision of one ranking.
double average_precision(std::span<const std::uint32_t> ranking, const std::set<std::uint32_t>& relevant);
double mean_average_precision(std::span<const RankingResult> rankings, const GroundTruth& truth);

struct MetricsReport {
  Setting setting = Setting::kBehaviorMatch;
  std::size_t n_queries = 0;
  std::size_t n_gallery = 0;
  double r1 = 0.0, r5 = 0.0, r10 = 0.0, map = 0.0;
  std::size_t shortlist_k = kDefaultShortlist;
  std::string checkpoint_hash;

  nlohmann::json to_json() const;
};

MetricsReport score_rankings(std::span<const RankingResult> rankings, const GroundTruth& truth,
                             std::size_t n_gallery, std::size_t shortlist_k, std::string checkpoint_hash = {});

struct Evaluation {
  MetricsReport report;
  std::vector<RankingResult> rankings;
};

/// Each query record's caption is searched against the gallery images.
Evaluation evaluate(const model::CmpModel<float>& model, std::span<const corpus::CorpusRecord> queries,
                    std::span<const corpus::CorpusRecord> gallery, Setting setting,
                    std::size_t shortlist_k = kDefaultShortlist, std::string checkpoint_hash = {});
/// Rankings only, reusable across settings.
std::vector<RankingResult> rank_queries(const GalleryIndex& index, std::span<const corpus::CorpusRecord> queries,
                                        std::size_t shortlist_k = kDefaultShortlist);

/// query_id,rank,record_id,sim,itm_prob (rank is 1-based; itm_prob empty
/// outside the shortlist).
void write_rank_csv(std::ostream& out, std::span<const RankingResult> rankings);

}  // namespace cmp::eval
