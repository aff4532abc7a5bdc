#ifndef RELACTRL_BACKBONE_HPP
#define RELACTRL_BACKBONE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "relactrl/rglc.hpp"
#include "relactrl/tdsm.hpp"

namespace relactrl {

struct ModelConfig {
    int64_t depth = 27;
    FeatureGeometry geom;
    int64_t heads = 1;
    int64_t ffn_mult = 4;
    bool cross_attention = false;  // cost-model concept; the toy backbone has no context input
};

struct PlanEntry {
    int64_t layer = 0;
    int64_t n_groups = 1;
    int64_t window_s = 1;
};

// Layers receiving a control block, sorted ascending, with the per-layer
// channel-group count chosen by the relevance tier.
struct PlacementPlan {
    std::vector<PlanEntry> entries;

    bool hosts(int64_t layer) const;
    std::vector<int64_t> layers() const;
};

struct BackboneBlockParams {
    Tensor wq, wk, wv, wo;  // D x D
    Tensor w1, w2;          // D x fD, fD x D
    Tensor mod_table;       // 6D per-block modulation offsets
};

struct RglcSite {
    RglcParams params;
    ShuffleSpec spec;
    GroupWindow window;
};

struct ControlledModel {
    ModelConfig cfg;
    PlacementPlan plan;
    uint64_t seed = 0;
    std::vector<BackboneBlockParams> blocks;
    Tensor t_proj;         // D x 6D shared timestep projection
    Tensor control_embed;  // D x D patchwise linear over the condition volume
    std::map<int64_t, RglcSite> control;  // keyed by layer index
};

struct SweepRow {
    int64_t layer = 0;
    double proxy_fid = 0.0;  // mean squared deviation, full vs skip
    double proxy_hdd = 0.0;  // max per-token L2 deviation
};

void validate_plan(const PlacementPlan& plan, const ModelConfig& cfg);

// Deterministic init from the seed. Zero-convs start exactly zero, so the
// control branch is a bit-exact no-op until demo_init is applied.
ControlledModel build_model(const ModelConfig& cfg, const PlacementPlan& plan, uint64_t seed);

// Redraws every zero-conv from normal(0, sigma) so skip studies have signal.
void demo_init(ControlledModel& model, uint64_t seed, double sigma = 0.02);
bool has_live_control(const ControlledModel& model);

// Runs the frozen blocks, injecting each hosted layer's c_cond into the block
// output. Layers listed in `skip` keep their control stream flowing but do
// not inject. Every skip index must be hosted by the plan.
Tensor forward(const ControlledModel& model, const Tensor& latent, const Tensor& cond,
               const Tensor& t_embed, const std::set<int64_t>& skip = {});

// Deviation proxies per hosted layer, sorted by layer index. Inputs are drawn
// per trial from the seed. Refuses models whose control branch is still a
// no-op (every proxy would be zero).
std::vector<SweepRow> skip_sweep(const ControlledModel& model, int64_t trials, uint64_t seed);

}  // namespace relactrl

#endif
