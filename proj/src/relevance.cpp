#include "relactrl/relevance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace relactrl {

TierPolicy TierPolicy::default_policy() {
    return TierPolicy{{TierEntry{2, 2}, TierEntry{4, 2}, TierEntry{8, 2}}};
}

std::vector<int64_t> rank_ascending(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("rank_ascending: empty input");
    std::vector<size_t> order(values.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<int64_t> ranks(values.size());
    for (size_t r = 0; r < order.size(); ++r) ranks[order[r]] = int64_t(r) + 1;
    return ranks;
}

namespace {

std::vector<double> min_max_normalize(const std::vector<double>& v, const char* metric) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (*lo == *hi) {
        throw std::invalid_argument(std::string("crs: ") + metric +
                                    " sequence is constant; min-max normalization is undefined");
    }
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / (*hi - *lo);
    return out;
}

std::vector<double> blend(const std::vector<double>& f, const std::vector<double>& h) {
    std::vector<double> crs(f.size());
    for (size_t i = 0; i < f.size(); ++i) crs[i] = 0.5 * (f[i] + h[i]);
    return crs;
}

}  // namespace

std::vector<double> crs_from_ranks(const std::vector<int64_t>& fid_ranks,
                                   const std::vector<int64_t>& hdd_ranks) {
    if (fid_ranks.size() != hdd_ranks.size() || fid_ranks.size() < 2) {
        throw std::invalid_argument("crs: need two equal-length rank sequences of length >= 2");
    }
    std::vector<double> f(fid_ranks.begin(), fid_ranks.end());
    std::vector<double> h(hdd_ranks.begin(), hdd_ranks.end());
    return blend(min_max_normalize(f, "fid"), min_max_normalize(h, "hdd"));
}

std::vector<RelevanceRecord> compute_records(const std::vector<int64_t>& layers,
                                             const std::vector<double>& raw_fid,
                                             const std::vector<double>& raw_hdd,
                                             bool rank_normalize) {
    const size_t n = layers.size();
    if (raw_fid.size() != n || raw_hdd.size() != n || n < 2) {
        throw std::invalid_argument("compute_records: need >= 2 layers with both metrics");
    }
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(raw_fid[i]) || !std::isfinite(raw_hdd[i]) || raw_fid[i] < 0.0 ||
            raw_hdd[i] < 0.0) {
            throw std::invalid_argument("compute_records: metrics must be finite and >= 0");
        }
    }

    const std::vector<int64_t> f_ranks = rank_ascending(raw_fid);
    const std::vector<int64_t> h_ranks = rank_ascending(raw_hdd);
    std::vector<double> crs;
    if (rank_normalize) {
        crs = crs_from_ranks(f_ranks, h_ranks);
    } else {
        crs = blend(min_max_normalize(raw_fid, "fid"), min_max_normalize(raw_hdd, "hdd"));
    }

    std::vector<RelevanceRecord> records(n);
    for (size_t i = 0; i < n; ++i) {
        records[i] = RelevanceRecord{layers[i], raw_fid[i], raw_hdd[i],
                                     f_ranks[i], h_ranks[i], crs[i]};
    }
    return records;
}

PlacementPlan plan_placement(const std::vector<RelevanceRecord>& records, int64_t k,
                             const TierPolicy& policy) {
    const int64_t L = int64_t(records.size());
    if (k < 1 || k > L) {
        throw std::invalid_argument("plan_placement: k=" + std::to_string(k) +
                                    " outside [1, " + std::to_string(L) + "]");
    }
    if (policy.tiers.empty()) throw std::invalid_argument("plan_placement: empty tier policy");
    for (size_t i = 1; i < policy.tiers.size(); ++i) {
        if (policy.tiers[i].n_groups < policy.tiers[i - 1].n_groups) {
            throw std::invalid_argument(
                "tier policy must not give lower-relevance tiers fewer groups");
        }
    }

    // Highest CRS first; ties to the lower layer index.
    std::vector<size_t> order(records.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (records[a].crs != records[b].crs) return records[a].crs > records[b].crs;
        return records[a].layer_index < records[b].layer_index;
    });

    const int64_t T = int64_t(policy.tiers.size());
    PlacementPlan plan;
    plan.entries.reserve(size_t(k));
    for (int64_t r = 0; r < k; ++r) {
        // Tier runs split at floor(j*k/T); the remainder lands in the
        // lower-relevance tiers.
        int64_t tier = T - 1;
        for (int64_t j = 0; j < T; ++j) {
            if (r < ((j + 1) * k) / T) {
                tier = j;
                break;
            }
        }
        const TierEntry& te = policy.tiers[size_t(tier)];
        plan.entries.push_back(
            PlanEntry{records[order[size_t(r)]].layer_index, te.n_groups, te.window_s});
    }
    std::sort(plan.entries.begin(), plan.entries.end(),
              [](const PlanEntry& a, const PlanEntry& b) { return a.layer < b.layer; });
    return plan;
}

}  // namespace relactrl
