#include "relactrl/rglc.hpp"

#include <stdexcept>

namespace relactrl {

namespace {

void check_volume(const Tensor& t, const FeatureGeometry& geom, const char* name) {
    const std::vector<int64_t> want{geom.H, geom.W, geom.D};
    if (t.shape != want) {
        throw std::invalid_argument(std::string(name) + ": shape " + shape_to_string(t.shape) +
                                    " does not match geometry " + shape_to_string(want));
    }
}

}  // namespace

RglcParams make_rglc_params(const ShuffleSpec& spec, uint64_t seed) {
    const int64_t D = spec.geom.D;
    RglcParams p;
    p.zc_in = Tensor::zeros({D, D});
    p.zc_out = Tensor::zeros({D, D});
    p.tdsm = make_tdsm_params(spec, seed);
    p.mod = Tensor::zeros({3, D});
    return p;
}

int64_t rglc_param_count(const RglcParams& params) {
    return params.zc_in.numel() + params.zc_out.numel() + tdsm_param_count(params.tdsm) +
           (params.use_modulation ? params.mod.numel() : 0);
}

RglcParamNodes lift(Graph& g, const RglcParams& params) {
    RglcParamNodes n;
    n.zc_in = g.leaf(params.zc_in);
    n.zc_out = g.leaf(params.zc_out);
    n.tdsm = lift(g, params.tdsm);
    n.mod = g.leaf(params.mod);
    n.use_modulation = params.use_modulation;
    n.use_layer_norm = params.use_layer_norm;
    return n;
}

Graph::NodeId zero_conv(Graph& g, Graph::NodeId v, Graph::NodeId w) {
    // copy shapes out: node storage may reallocate as ops are recorded
    const std::vector<int64_t> v_shape = g.shape(v);
    const std::vector<int64_t> w_shape = g.shape(w);
    if (v_shape.size() != 3) {
        throw std::invalid_argument("zero_conv: expected H x W x D volume, got " +
                                    shape_to_string(v_shape));
    }
    const int64_t D = v_shape[2];
    if (w_shape != std::vector<int64_t>{D, D}) {
        throw std::invalid_argument("zero_conv: weight " + shape_to_string(w_shape) +
                                    " does not match channel width " + std::to_string(D));
    }
    const int64_t N = v_shape[0] * v_shape[1];
    Graph::NodeId flat = g.reshape(v, {N, D});
    return g.reshape(g.matmul(flat, w), v_shape);
}

Tensor zero_conv(const Tensor& v, const Tensor& w) {
    Graph g;
    return g.value(zero_conv(g, g.leaf(v), g.leaf(w)));
}

RglcOutputs rglc_forward(Graph& g, Graph::NodeId x, Graph::NodeId c, Graph::NodeId t,
                         const RglcParamNodes& params, const ShuffleSpec& spec,
                         const GroupWindow& window) {
    const FeatureGeometry& geom = spec.geom;
    check_volume(g.value(x), geom, "rglc x");
    check_volume(g.value(c), geom, "rglc c");
    if (g.value(t).numel() != geom.D) {
        throw std::invalid_argument("rglc t: embedding length " +
                                    std::to_string(g.value(t).numel()) + " != D=" +
                                    std::to_string(geom.D));
    }

    Graph::NodeId c_in = g.add(zero_conv(g, x, params.zc_in), c);

    Graph::NodeId mixer_in = c_in;
    if (params.use_modulation) {
        const int64_t D = geom.D;
        const int64_t N = geom.tokens();
        auto row_index = [D](int64_t r) {
            auto idx = std::make_shared<std::vector<size_t>>(size_t(D));
            for (int64_t j = 0; j < D; ++j) (*idx)[size_t(j)] = size_t(r * D + j);
            return idx;
        };
        Graph::NodeId t_flat = g.reshape(t, {D});
        Graph::NodeId ones = g.leaf(Tensor({D}, 1.0));
        Graph::NodeId shift = g.mul(g.gather(params.mod, row_index(0), {D}), t_flat);
        Graph::NodeId scale = g.add(ones, g.mul(g.gather(params.mod, row_index(1), {D}), t_flat));
        Graph::NodeId gate = g.add(ones, g.mul(g.gather(params.mod, row_index(2), {D}), t_flat));

        Graph::NodeId flat = g.reshape(c_in, {N, D});
        Graph::NodeId normed = params.use_layer_norm ? g.layer_norm_rows(flat) : flat;
        Graph::NodeId modulated = g.row_mul(g.row_add(g.row_mul(normed, scale), shift), gate);
        mixer_in = g.reshape(modulated, {geom.H, geom.W, geom.D});
    }

    Graph::NodeId h = g.add(tdsm_forward(g, mixer_in, spec, window, params.tdsm), c_in);
    Graph::NodeId c_cond = zero_conv(g, h, params.zc_out);
    return RglcOutputs{c_cond, h};
}

std::pair<Tensor, Tensor> rglc_forward(const RglcInputs& in, const RglcParams& params,
                                       const ShuffleSpec& spec, const GroupWindow& window) {
    Graph g;
    RglcOutputs out = rglc_forward(g, g.leaf(in.x), g.leaf(in.c), g.leaf(in.t), lift(g, params),
                                   spec, window);
    return {g.value(out.c_cond), g.value(out.c_next)};
}

}  // namespace relactrl
