#ifndef RELACTRL_RGLC_HPP
#define RELACTRL_RGLC_HPP

#include <cstdint>
#include <utility>

#include "relactrl/graph.hpp"
#include "relactrl/tdsm.hpp"

namespace relactrl {

// Lightweight control block: zero-convolution in/out around a TDSM core with
// a residual, conditioned on the timestep embedding.
//
// The timestep conditioning is deliberately cheap: `mod` holds three width-D
// rows (shift, scale, gate) applied elementwise to t, giving
//   shift = mod[0] * t,  scale = 1 + mod[1] * t,  gate = 1 + mod[2] * t,
// and the stream entering TDSM becomes gate * (scale * norm(c_in) + shift).
// With mod at zero and layer_norm disabled this is the identity.
struct RglcParams {
    Tensor zc_in;   // D x D, exactly zero at initialization
    Tensor zc_out;  // D x D, exactly zero at initialization
    TdsmParams tdsm;
    Tensor mod;     // 3 x D elementwise timestep maps

    bool use_modulation = true;
    bool use_layer_norm = true;
};

struct RglcInputs {
    Tensor x;  // H x W x D hidden state from the frozen block
    Tensor c;  // H x W x D running control stream
    Tensor t;  // D timestep embedding
};

struct RglcParamNodes {
    Graph::NodeId zc_in;
    Graph::NodeId zc_out;
    TdsmParamNodes tdsm;
    Graph::NodeId mod;
    bool use_modulation = true;
    bool use_layer_norm = true;
};

struct RglcOutputs {
    Graph::NodeId c_cond;  // injected into the backbone
    Graph::NodeId c_next;  // pre-zero-conv residual stream, fed to the next block
};

// Zero convs and mod start at exactly zero; TDSM projections are random.
RglcParams make_rglc_params(const ShuffleSpec& spec, uint64_t seed);
int64_t rglc_param_count(const RglcParams& params);

RglcParamNodes lift(Graph& g, const RglcParams& params);

// Per-token linear map (1x1 convolution) of an H x W x D volume by a D x D
// matrix.
Graph::NodeId zero_conv(Graph& g, Graph::NodeId v, Graph::NodeId w);
Tensor zero_conv(const Tensor& v, const Tensor& w);

RglcOutputs rglc_forward(Graph& g, Graph::NodeId x, Graph::NodeId c, Graph::NodeId t,
                         const RglcParamNodes& params, const ShuffleSpec& spec,
                         const GroupWindow& window);

std::pair<Tensor, Tensor> rglc_forward(const RglcInputs& in, const RglcParams& params,
                                       const ShuffleSpec& spec, const GroupWindow& window);

}  // namespace relactrl

#endif
