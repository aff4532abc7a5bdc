#ifndef RELACTRL_COSTMODEL_HPP
#define RELACTRL_COSTMODEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relactrl/backbone.hpp"

namespace relactrl {

// Architecture constants for analytical parameter/FLOP accounting. FLOPs use
// the multiply-accumulate = 2 FLOPs convention throughout; modulation math is
// counted in parameters (per-block tables) but ignored in FLOPs, where it is
// negligible against the matmuls.
struct ArchSpec {
    int64_t D = 1152;
    int64_t L = 27;
    int64_t heads = 16;
    int64_t ffn_mult = 4;
    int64_t tokens = 1024;
    bool cross_attention = true;
    bool modulation = true;  // per-block timestep tables (6D backbone, 3D rglc)
    // Named constant offsets (embedders, glue) added to the backbone totals.
    std::map<std::string, int64_t> extra_params;
};

enum class BlockKind {
    backbone,       // frozen transformer block
    copy,           // ControlNet-style duplicate of a backbone block
};

struct RglcShape {
    int64_t n_groups = 1;
    int64_t window_s = 1;
};

struct ComponentCost {
    std::string name;
    int64_t params = 0;
    int64_t flops = 0;
};

struct CostReport {
    std::vector<ComponentCost> components;
    int64_t total_params = 0;
    int64_t total_flops = 0;
    int64_t backbone_params = 0;
    int64_t backbone_flops = 0;
    double param_ratio_vs_backbone = 0.0;
    double flop_ratio_vs_backbone = 0.0;
    std::optional<double> param_ratio_vs_baseline;
    std::optional<double> flop_ratio_vs_baseline;
    std::string baseline_name;
};

// Which blocks a control plan is materialized with when costing it.
enum class PlanKind { rglc, copy };

// Baseline for relative ratios: the first-k copy-block branch, or none.
struct Baseline {
    int64_t copy_first_k = 0;  // 0 disables the baseline
};

int64_t equal_split_width(int64_t D, int64_t n_groups, int64_t index);

// Closed-form parameter counts.
//   backbone/copy: 4D^2 attn (+4D^2 cross-attn) + 2*ffn_mult*D^2 + 6D table
//   rglc:          2D^2 zero-convs + sum_i 4 d_i^2 projections + 3D table
int64_t block_params(const ArchSpec& spec, BlockKind kind);
int64_t rglc_block_params(const ArchSpec& spec, const RglcShape& shape);

// Closed-form FLOP counts at N tokens.
//   full attention:    8ND^2 + 4N^2D  (+8ND^2 cross)
//   ffn:               4*ffn_mult*N*D^2
//   grouped attention: sum_i (N/s^2) * (8 s^2 d_i^2 + 4 s^4 d_i)
//   zero-convs:        4ND^2
int64_t block_flops(const ArchSpec& spec, BlockKind kind, int64_t tokens);
int64_t rglc_block_flops(const ArchSpec& spec, const RglcShape& shape, int64_t tokens);

int64_t full_attention_flops(int64_t D, int64_t tokens);
int64_t grouped_attention_flops(const ArchSpec& spec, const RglcShape& shape, int64_t tokens);

// Parameter accounting for a plan against the backbone and, optionally, a
// copy-block baseline.
CostReport plan_cost(const ArchSpec& spec, const PlacementPlan& plan, const Baseline& baseline,
                     PlanKind kind = PlanKind::rglc);

// FLOP accounting at `tokens`; fills the flops side of the report.
CostReport plan_flops(const ArchSpec& spec, const PlacementPlan& plan, int64_t tokens,
                      const Baseline& baseline = {}, PlanKind kind = PlanKind::rglc);

}  // namespace relactrl

#endif
