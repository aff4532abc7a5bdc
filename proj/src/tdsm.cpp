#include "relactrl/tdsm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "relactrl/rng.hpp"

namespace relactrl {

namespace {

void check_geometry(const FeatureGeometry& geom) {
    if (geom.H < 1 || geom.W < 1 || geom.D < 1) {
        throw std::invalid_argument("geometry extents must be >= 1, got H=" +
                                    std::to_string(geom.H) + " W=" + std::to_string(geom.W) +
                                    " D=" + std::to_string(geom.D));
    }
}

void check_window(const GroupWindow& window, const FeatureGeometry& geom) {
    if (window.s < 1 || geom.H % window.s != 0 || geom.W % window.s != 0) {
        throw std::invalid_argument("window side " + std::to_string(window.s) +
                                    " must divide token grid " + std::to_string(geom.H) + "x" +
                                    std::to_string(geom.W) + " (no padding)");
    }
}

std::vector<int64_t> volume_shape(const FeatureGeometry& geom, int64_t d) {
    return {geom.H, geom.W, d};
}

}  // namespace

ShuffleSpec make_shuffle_spec(const FeatureGeometry& geom, int64_t n_groups, uint64_t seed) {
    check_geometry(geom);
    if (n_groups < 1 || n_groups > geom.D) {
        throw std::invalid_argument("n_groups must be in [1, D=" + std::to_string(geom.D) +
                                    "], got " + std::to_string(n_groups));
    }

    ShuffleSpec spec;
    spec.geom = geom;
    spec.n_groups = n_groups;
    spec.seed = seed;

    // Equal split, remainder to the leading groups.
    const int64_t base = geom.D / n_groups;
    const int64_t rem = geom.D % n_groups;
    spec.widths.resize(size_t(n_groups));
    for (int64_t g = 0; g < n_groups; ++g) spec.widths[size_t(g)] = base + (g < rem ? 1 : 0);

    // Random channel -> (group, slot) assignment.
    Stream channel_stream(derive_seed(seed, 0));
    std::vector<size_t> channel_perm = channel_stream.permutation(size_t(geom.D));
    spec.group_channels.resize(size_t(n_groups));
    spec.group_of_channel.assign(size_t(geom.D), 0);
    spec.slot_of_channel.assign(size_t(geom.D), 0);
    size_t cursor = 0;
    for (int64_t g = 0; g < n_groups; ++g) {
        auto& chans = spec.group_channels[size_t(g)];
        chans.resize(size_t(spec.widths[size_t(g)]));
        for (int64_t slot = 0; slot < spec.widths[size_t(g)]; ++slot) {
            const int64_t channel = int64_t(channel_perm[cursor++]);
            chans[size_t(slot)] = channel;
            spec.group_of_channel[size_t(channel)] = g;
            spec.slot_of_channel[size_t(channel)] = slot;
        }
    }

    // Per-group element permutation over the H*W*d_i flat positions, plus the
    // fused map from shuffled position to source flat index.
    spec.element_perm.resize(size_t(n_groups));
    spec.gather_map.resize(size_t(n_groups));
    for (int64_t g = 0; g < n_groups; ++g) {
        const int64_t d = spec.widths[size_t(g)];
        const size_t count = size_t(geom.H * geom.W * d);
        Stream perm_stream(derive_seed(seed, 1 + uint64_t(g)));
        std::vector<size_t> perm = perm_stream.permutation(count);
        std::vector<size_t> inverse(count);
        for (size_t q = 0; q < count; ++q) inverse[perm[q]] = q;

        auto map = std::make_shared<std::vector<size_t>>(count);
        for (size_t p = 0; p < count; ++p) {
            const size_t q = inverse[p];               // pre-shuffle group position
            const size_t token = q / size_t(d);        // h*W + w
            const size_t slot = q % size_t(d);
            const size_t channel = size_t(spec.group_channels[size_t(g)][slot]);
            (*map)[p] = token * size_t(geom.D) + channel;
        }
        spec.element_perm[size_t(g)] = std::move(perm);
        spec.gather_map[size_t(g)] = std::move(map);
    }
    return spec;
}

TdsmParams make_tdsm_params(const ShuffleSpec& spec, uint64_t seed) {
    TdsmParams params;
    params.groups.resize(size_t(spec.n_groups));
    for (int64_t g = 0; g < spec.n_groups; ++g) {
        const int64_t d = spec.widths[size_t(g)];
        const double sigma = 1.0 / std::sqrt(double(d));
        Stream s(derive_seed(seed, 0x7d50 + uint64_t(g)));
        auto draw = [&] {
            Tensor t({d, d}, 0.0);
            for (double& v : t.data) v = sigma * s.next_normal();
            return t;
        };
        params.groups[size_t(g)] = GroupProjections{draw(), draw(), draw(), draw()};
    }
    return params;
}

int64_t tdsm_param_count(const TdsmParams& params) {
    int64_t n = 0;
    for (const auto& g : params.groups) {
        n += g.q.numel() + g.k.numel() + g.v.numel() + g.o.numel();
    }
    return n;
}

TdsmParamNodes lift(Graph& g, const TdsmParams& params) {
    TdsmParamNodes nodes;
    nodes.groups.reserve(params.groups.size());
    for (const auto& p : params.groups) {
        nodes.groups.push_back(
            GroupProjectionNodes{g.leaf(p.q), g.leaf(p.k), g.leaf(p.v), g.leaf(p.o)});
    }
    return nodes;
}

std::vector<Graph::NodeId> shuffle(Graph& g, Graph::NodeId x, const ShuffleSpec& spec) {
    const Tensor& in = g.value(x);
    const auto expected = volume_shape(spec.geom, spec.geom.D);
    if (in.shape != expected) {
        throw std::invalid_argument("shuffle: input shape " + shape_to_string(in.shape) +
                                    " does not match spec geometry " + shape_to_string(expected));
    }
    std::vector<Graph::NodeId> out;
    out.reserve(size_t(spec.n_groups));
    for (int64_t i = 0; i < spec.n_groups; ++i) {
        out.push_back(g.gather(x, spec.gather_map[size_t(i)],
                               volume_shape(spec.geom, spec.widths[size_t(i)])));
    }
    return out;
}

Graph::NodeId unshuffle(Graph& g, const std::vector<Graph::NodeId>& groups,
                        const ShuffleSpec& spec) {
    if (groups.size() != size_t(spec.n_groups)) {
        throw std::invalid_argument("unshuffle: expected " + std::to_string(spec.n_groups) +
                                    " group volumes, got " + std::to_string(groups.size()));
    }
    Graph::NodeId acc = 0;
    for (int64_t i = 0; i < spec.n_groups; ++i) {
        const auto expected = volume_shape(spec.geom, spec.widths[size_t(i)]);
        if (g.shape(groups[size_t(i)]) != expected) {
            throw std::invalid_argument(
                "unshuffle: group " + std::to_string(i) + " has shape " +
                shape_to_string(g.shape(groups[size_t(i)])) + ", want " +
                shape_to_string(expected));
        }
        Graph::NodeId part = g.scatter_add(groups[size_t(i)], spec.gather_map[size_t(i)],
                                           volume_shape(spec.geom, spec.geom.D));
        acc = (i == 0) ? part : g.add(acc, part);
    }
    return acc;
}

Graph::NodeId grouped_attention(Graph& g, Graph::NodeId group, const GroupWindow& window,
                                const GroupProjectionNodes& proj) {
    const Tensor& in = g.value(group);
    if (in.rank() != 3) {
        throw std::invalid_argument("grouped_attention: expected H x W x d volume, got " +
                                    shape_to_string(in.shape));
    }
    const int64_t H = in.shape[0], W = in.shape[1], d = in.shape[2];
    check_window(window, FeatureGeometry{H, W, d});
    const int64_t s = window.s;
    const double scale = 1.0 / std::sqrt(double(d));

    Graph::NodeId out = 0;
    bool first = true;
    for (int64_t wh = 0; wh < H / s; ++wh) {
        for (int64_t ww = 0; ww < W / s; ++ww) {
            auto idx = std::make_shared<std::vector<size_t>>();
            idx->reserve(size_t(s * s * d));
            for (int64_t r = 0; r < s; ++r) {
                for (int64_t c = 0; c < s; ++c) {
                    const int64_t token = (wh * s + r) * W + (ww * s + c);
                    for (int64_t j = 0; j < d; ++j) idx->push_back(size_t(token * d + j));
                }
            }
            Graph::NodeId tokens = g.gather(group, idx, {s * s, d});
            Graph::NodeId q = g.matmul(tokens, proj.q);
            Graph::NodeId k = g.matmul(tokens, proj.k);
            Graph::NodeId v = g.matmul(tokens, proj.v);
            Graph::NodeId attn = g.softmax_rows(g.scale(g.matmul(q, g.transpose(k)), scale));
            Graph::NodeId mixed = g.matmul(g.matmul(attn, v), proj.o);
            Graph::NodeId placed = g.scatter_add(mixed, idx, {H, W, d});
            out = first ? placed : g.add(out, placed);
            first = false;
        }
    }
    return out;
}

Graph::NodeId tdsm_forward(Graph& g, Graph::NodeId x, const ShuffleSpec& spec,
                           const GroupWindow& window, const TdsmParamNodes& params) {
    if (params.groups.size() != size_t(spec.n_groups)) {
        throw std::invalid_argument("tdsm_forward: params cover " +
                                    std::to_string(params.groups.size()) + " groups, spec has " +
                                    std::to_string(spec.n_groups));
    }
    check_window(window, spec.geom);
    std::vector<Graph::NodeId> groups = shuffle(g, x, spec);
    for (size_t i = 0; i < groups.size(); ++i) {
        groups[i] = grouped_attention(g, groups[i], window, params.groups[i]);
    }
    return unshuffle(g, groups, spec);
}

std::vector<Tensor> shuffle(const Tensor& x, const ShuffleSpec& spec) {
    Graph g;
    auto ids = shuffle(g, g.leaf(x), spec);
    std::vector<Tensor> out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(g.value(id));
    return out;
}

Tensor unshuffle(const std::vector<Tensor>& groups, const ShuffleSpec& spec) {
    Graph g;
    std::vector<Graph::NodeId> ids;
    ids.reserve(groups.size());
    for (const auto& t : groups) ids.push_back(g.leaf(t));
    return g.value(unshuffle(g, ids, spec));
}

Tensor grouped_attention(const Tensor& group, const GroupWindow& window,
                         const GroupProjections& proj) {
    Graph g;
    GroupProjectionNodes nodes{g.leaf(proj.q), g.leaf(proj.k), g.leaf(proj.v), g.leaf(proj.o)};
    return g.value(grouped_attention(g, g.leaf(group), window, nodes));
}

Tensor tdsm_forward(const Tensor& x, const ShuffleSpec& spec, const GroupWindow& window,
                    const TdsmParams& params) {
    Graph g;
    return g.value(tdsm_forward(g, g.leaf(x), spec, window, lift(g, params)));
}

}  // namespace relactrl
