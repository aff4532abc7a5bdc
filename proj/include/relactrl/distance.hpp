#ifndef RELACTRL_DISTANCE_HPP
#define RELACTRL_DISTANCE_HPP

#include <cstdint>

#include "relactrl/tdsm.hpp"

namespace relactrl {

// Position of one element on the flattened H x (W*d) grid of a group volume.
// Distances between co-windowed elements are measured on this grid.
struct DistanceQuery {
    int64_t H = 1;
    int64_t W = 1;
    int64_t d = 1;   // channel width of the group volume
    int64_t t_h = 0; // row on the grid, in [0, H)
    int64_t t_w = 0; // column on the flattened axis, in [0, W*d)
};

// How Monte-Carlo draws are produced: a full ShuffleSpec over `total_channels`
// split into `n_groups`, observing group `group_index` (whose equal-split
// width must equal the query's d). The default observes a single-group spec,
// which is the pure form of the theory; multi-group contexts exercise the
// exact code path the mixer uses in production.
struct McContext {
    int64_t total_channels = 0;  // 0 means "use query d with a single group"
    int64_t n_groups = 1;
    int64_t group_index = 0;
};

struct McResult {
    double estimate = 0.0;
    double stderr_est = 0.0;
    int64_t samples = 0;
};

struct DistanceReport {
    double exact = 0.0;
    double lower_bound = 0.0;
    double mc_estimate = 0.0;
    double mc_stderr = 0.0;
    int64_t samples = 0;
};

// Mean grid distance from t_j to every cell of the H x (W*d) grid (the zero
// self-term included), divided by H*W*d - 1.
double exact_expected_distance(const DistanceQuery& q);

// Closed-form bound; always <= exact_expected_distance.
double distance_lower_bound(const DistanceQuery& q);

// Empirical expected interactive distance from actual shuffle draws: per draw,
// the mean pre-shuffle distance between t_j and the elements landing in its
// s x s window. Returns the across-draw mean and standard error.
McResult mc_distance(const DistanceQuery& q, const GroupWindow& window, const McContext& ctx,
                     int64_t samples, uint64_t seed);

// Per-position MC estimates with the shuffle draws shared across positions;
// index = t_h * (W*d) + t_w on the flattened grid.
std::vector<double> per_position_mc_distance(const FeatureGeometry& group_geom,
                                             const GroupWindow& window, int64_t samples,
                                             uint64_t seed);

// Mean of the per-position estimates over the whole grid.
double average_distance(const FeatureGeometry& group_geom, const GroupWindow& window,
                        int64_t samples, uint64_t seed);

DistanceReport verify_distance(const DistanceQuery& q, const GroupWindow& window,
                               int64_t samples, uint64_t seed);

}  // namespace relactrl

#endif
