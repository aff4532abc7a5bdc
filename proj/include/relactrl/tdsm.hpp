#ifndef RELACTRL_TDSM_HPP
#define RELACTRL_TDSM_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "relactrl/graph.hpp"
#include "relactrl/tensor.hpp"

namespace relactrl {

struct FeatureGeometry {
    int64_t H = 1;  // token-grid height
    int64_t W = 1;  // token-grid width
    int64_t D = 1;  // channel width

    int64_t tokens() const { return H * W; }
};

// Side of the square token window attention runs over. s must divide both H
// and W; there is no padding.
struct GroupWindow {
    int64_t s = 1;
};

// Seeded channel partition plus per-group element-level bijections.
//
// Channels are dealt into n groups of near-equal width (remainder to the
// leading groups), then the H*W*d_i scalar elements of each group volume are
// permuted. Shuffled group volumes are re-viewed as H x W token grids with
// d_i channels, which is what the windowed attention consumes. Everything is
// a pure function of (geometry, n, seed).
struct ShuffleSpec {
    FeatureGeometry geom;
    int64_t n_groups = 1;
    uint64_t seed = 0;

    std::vector<int64_t> widths;                        // d_1..d_n, sum = D
    std::vector<std::vector<int64_t>> group_channels;   // [g][slot] -> source channel
    std::vector<int64_t> group_of_channel;              // channel -> group
    std::vector<int64_t> slot_of_channel;               // channel -> slot
    std::vector<std::vector<size_t>> element_perm;      // [g]: group pos -> shuffled pos

    // [g][shuffled pos] -> flat index into the H*W*D input. shuffle gathers
    // through this map and unshuffle scatters back through the same map, so
    // the round trip is exact by construction.
    std::vector<std::shared_ptr<const std::vector<size_t>>> gather_map;
};

// Per-group projection quadruple, each d_i x d_i.
struct GroupProjections {
    Tensor q, k, v, o;
};

struct TdsmParams {
    std::vector<GroupProjections> groups;
};

// Graph-level handles for parameters that were lifted into a Graph.
struct GroupProjectionNodes {
    Graph::NodeId q, k, v, o;
};
struct TdsmParamNodes {
    std::vector<GroupProjectionNodes> groups;
};

ShuffleSpec make_shuffle_spec(const FeatureGeometry& geom, int64_t n_groups, uint64_t seed);

// Projections drawn normal(0, 1/sqrt(d_i)).
TdsmParams make_tdsm_params(const ShuffleSpec& spec, uint64_t seed);
int64_t tdsm_param_count(const TdsmParams& params);

TdsmParamNodes lift(Graph& g, const TdsmParams& params);

// Graph-building forms (differentiable).
std::vector<Graph::NodeId> shuffle(Graph& g, Graph::NodeId x, const ShuffleSpec& spec);
Graph::NodeId unshuffle(Graph& g, const std::vector<Graph::NodeId>& groups,
                        const ShuffleSpec& spec);
Graph::NodeId grouped_attention(Graph& g, Graph::NodeId group, const GroupWindow& window,
                                const GroupProjectionNodes& proj);
Graph::NodeId tdsm_forward(Graph& g, Graph::NodeId x, const ShuffleSpec& spec,
                           const GroupWindow& window, const TdsmParamNodes& params);

// Value-level conveniences; each builds a private Graph.
std::vector<Tensor> shuffle(const Tensor& x, const ShuffleSpec& spec);
Tensor unshuffle(const std::vector<Tensor>& groups, const ShuffleSpec& spec);
Tensor grouped_attention(const Tensor& group, const GroupWindow& window,
                         const GroupProjections& proj);
Tensor tdsm_forward(const Tensor& x, const ShuffleSpec& spec, const GroupWindow& window,
                    const TdsmParams& params);

}  // namespace relactrl

#endif
