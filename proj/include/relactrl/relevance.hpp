#ifndef RELACTRL_RELEVANCE_HPP
#define RELACTRL_RELEVANCE_HPP

#include <cstdint>
#include <vector>

#include "relactrl/backbone.hpp"

namespace relactrl {

struct RelevanceRecord {
    int64_t layer_index = 0;
    double raw_fid = 0.0;
    double raw_hdd = 0.0;
    int64_t fid_rank = 0;  // 1 = least affected layer
    int64_t hdd_rank = 0;
    double crs = 0.0;      // in [0, 1]
};

struct TierEntry {
    int64_t n_groups = 1;
    int64_t window_s = 1;
};

// Ordered highest-relevance tier first. The invariant is that more relevant
// tiers never use more channel groups (fewer, wider groups = more capacity).
// Selected layers are cut into |tiers| runs at floor(j*k/T) boundaries.
struct TierPolicy {
    std::vector<TierEntry> tiers;

    static TierPolicy default_policy();
};

// Rank 1 = smallest value; ties broken by lower index.
std::vector<int64_t> rank_ascending(const std::vector<double>& values);

// Min-max normalized rank blend: 0.5 * (norm(F_i) + norm(H_i)). Throws if a
// rank sequence is constant, naming the offending metric.
std::vector<double> crs_from_ranks(const std::vector<int64_t>& fid_ranks,
                                   const std::vector<int64_t>& hdd_ranks);

// Full pipeline over raw skip-study metrics. When rank_normalize is false the
// min-max normalization runs over the raw values themselves instead of their
// ranks.
std::vector<RelevanceRecord> compute_records(const std::vector<int64_t>& layers,
                                             const std::vector<double>& raw_fid,
                                             const std::vector<double>& raw_hdd,
                                             bool rank_normalize = true);

// Top-k layers by CRS (ties to the lower layer index), tiered by CRS rank
// within the selection, output sorted by layer index.
PlacementPlan plan_placement(const std::vector<RelevanceRecord>& records, int64_t k,
                             const TierPolicy& policy = TierPolicy::default_policy());

}  // namespace relactrl

#endif
