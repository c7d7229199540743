#include "cmp/eval/metrics.hpp"

#include <ostream>

#include "cmp/common/error.hpp"

namespace cmp::eval {

std::string to_string(Setting s) { return s == Setting::kBehaviorMatch ? "behavior_match" : "identity_match"; }

Setting parse_setting(std::string_view text) {
  if (text == "behavior" || text == "behavior_match") return Setting::kBehaviorMatch;
  if (text == "identity" || text == "identity_match") return Setting::kIdentityMatch;
  throw ConfigError("unknown setting '" + std::string(text) + "' (expected behavior or identity)", "setting");
}

GroundTruth GroundTruth::build(std::span<const corpus::CorpusRecord> queries,
                               std::span<const corpus::CorpusRecord> gallery, Setting setting) {
  GroundTruth truth;
  truth.setting = setting;
  std::map<std::uint32_t, std::set<std::uint32_t>> by_identity;
  std::set<std::uint32_t> gallery_ids;
  for (const auto& g : gallery) {
    by_identity[g.identity_id].insert(g.record_id);
    gallery_ids.insert(g.record_id);
  }
  for (const auto& q : queries) {
    auto& rel = truth.relevant[q.record_id];
    if (setting == Setting::kBehaviorMatch) {
      if (gallery_ids.count(q.record_id) != 0) rel.insert(q.record_id);
    } else {
      const auto it = by_identity.find(q.identity_id);
      if (it != by_identity.end()) rel = it->second;
    }
  }
  return truth;
}

const std::set<std::uint32_t>& GroundTruth::for_query(std::uint32_t query_id) const {
  const auto it = relevant.find(query_id);
  if (it == relevant.end()) throw ShapeError("no ground truth for query " + std::to_string(query_id));
  return it->second;
}

double recall_at_k(std::span<const RankingResult> rankings, const GroundTruth& truth, std::size_t k) {
  if (k == 0) throw ConfigError("k must be at least 1", "k");
  if (rankings.empty()) throw ShapeError("recall: no rankings");
  std::size_t hits = 0;
  for (const auto& r : rankings) {
    const auto& rel = truth.for_query(r.query_id);
    const std::size_t n = std::min(k, r.items.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (rel.count(r.items[i].record_id) != 0) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double average_precision(std::span<const std::uint32_t> ranking, const std::set<std::uint32_t>& relevant) {
  if (relevant.empty()) throw ShapeError("average precision: query has no relevant items");
  double sum = 0.0;
  std::size_t found = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (relevant.count(ranking[i]) == 0) continue;
    ++found;
    sum += static_cast<double>(found) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(relevant.size());
}

double mean_average_precision(std::span<const RankingResult> rankings, const GroundTruth& truth) {
  if (rankings.empty()) throw ShapeError("mAP: no rankings");
  double sum = 0.0;
  for (const auto& r : rankings) {
    const auto ids = r.ids();
    sum += average_precision(ids, truth.for_query(r.query_id));
  }
  return sum / static_cast<double>(rankings.size());
}

nlohmann::json MetricsReport::to_json() const {
  return {{"setting", to_string(setting)}, {"n_queries", n_queries}, {"n_gallery", n_gallery},
          {"r1", r1},  {"r5", r5},  {"r10", r10},  {"map", map},  {"shortlist_k", shortlist_k},
          {"checkpoint_hash", checkpoint_hash}};
}

MetricsReport score_rankings(std::span<const RankingResult> rankings, const GroundTruth& truth,
                             std::size_t n_gallery, std::size_t shortlist_k, std::string checkpoint_hash) {
  MetricsReport report;
  report.setting = truth.setting;
  report.n_queries = rankings.size();
  report.n_gallery = n_gallery;
  report.r1 = recall_at_k(rankings, truth, 1);
  report.r5 = recall_at_k(rankings, truth, 5);
  report.r10 = recall_at_k(rankings, truth, 10);
  report.map = mean_average_precision(rankings, truth);
  report.shortlist_k = shortlist_k;
  report.checkpoint_hash = std::move(checkpoint_hash);
  return report;
}

std::vector<RankingResult> rank_queries(const GalleryIndex& index, std::span<const corpus::CorpusRecord> queries,
                                        std::size_t shortlist_k) {
  std::vector<RankingResult> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(retrieve_two_stage(q.caption, index, shortlist_k, q.record_id));
  return out;
}

Evaluation evaluate(const model::CmpModel<float>& model, std::span<const corpus::CorpusRecord> queries,
                    std::span<const corpus::CorpusRecord> gallery, Setting setting, std::size_t shortlist_k,
                    std::string checkpoint_hash) {
  if (shortlist_k == 0) throw ConfigError("shortlist_k must be at least 1", "shortlist_k");
  const GalleryIndex index(model, gallery);
  Evaluation out;
  out.rankings = rank_queries(index, queries, shortlist_k);
  const auto truth = GroundTruth::build(queries, gallery, setting);
  out.report = score_rankings(out.rankings, truth, gallery.size(), shortlist_k, std::move(checkpoint_hash));
  return out;
}

void write_rank_csv(std::ostream& out, std::span<const RankingResult> rankings) {
  const auto old = out.precision(9);
  out << "query_id,rank,record_id,sim,itm_prob\n";
  for (const auto& r : rankings) {
    for (std::size_t i = 0; i < r.items.size(); ++i) {
      const auto& it = r.items[i];
      out << r.query_id << ',' << i + 1 << ',' << it.record_id << ',' << it.similarity << ',';
      if (it.itm_prob) out << *it.itm_prob;
      out << '\n';
    }
  }
  out.precision(old);
}

}  // namespace cmp::eval
