#include "relactrl/costmodel.hpp"

#include <stdexcept>
#include <string>

namespace relactrl {

namespace {

void check_spec(const ArchSpec& spec) {
    if (spec.D < 1 || spec.L < 1 || spec.heads < 1 || spec.ffn_mult < 1 || spec.tokens < 1) {
        throw std::invalid_argument("arch spec fields must all be positive");
    }
}

void check_rglc_shape(const ArchSpec& spec, const RglcShape& shape) {
    if (shape.n_groups < 1 || shape.n_groups > spec.D) {
        throw std::invalid_argument("rglc n_groups " + std::to_string(shape.n_groups) +
                                    " invalid for D=" + std::to_string(spec.D));
    }
    if (shape.window_s < 1) throw std::invalid_argument("rglc window side must be >= 1");
}

int64_t extras_total(const ArchSpec& spec) {
    int64_t t = 0;
    for (const auto& [name, v] : spec.extra_params) t += v;
    return t;
}

}  // namespace

int64_t equal_split_width(int64_t D, int64_t n_groups, int64_t index) {
    const int64_t base = D / n_groups;
    const int64_t rem = D % n_groups;
    return base + (index < rem ? 1 : 0);
}

int64_t block_params(const ArchSpec& spec, BlockKind kind) {
    check_spec(spec);
    (void)kind;  // copy blocks are exact duplicates of backbone blocks
    int64_t p = 4 * spec.D * spec.D;                       // self-attention QKVO
    if (spec.cross_attention) p += 4 * spec.D * spec.D;    // cross-attention QKVO
    p += 2 * spec.ffn_mult * spec.D * spec.D;              // FFN in/out
    if (spec.modulation) p += 6 * spec.D;                  // per-block modulation table
    return p;
}

int64_t rglc_block_params(const ArchSpec& spec, const RglcShape& shape) {
    check_spec(spec);
    check_rglc_shape(spec, shape);
    int64_t p = 2 * spec.D * spec.D;  // two zero-convs
    for (int64_t i = 0; i < shape.n_groups; ++i) {
        const int64_t d = equal_split_width(spec.D, shape.n_groups, i);
        p += 4 * d * d;  // Q, K, V, O per group
    }
    if (spec.modulation) p += 3 * spec.D;  // shift/scale/gate timestep maps
    return p;
}

int64_t full_attention_flops(int64_t D, int64_t tokens) {
    return 8 * tokens * D * D + 4 * tokens * tokens * D;
}

int64_t grouped_attention_flops(const ArchSpec& spec, const RglcShape& shape, int64_t tokens) {
    check_rglc_shape(spec, shape);
    const int64_t s2 = shape.window_s * shape.window_s;
    if (tokens % s2 != 0) {
        throw std::invalid_argument("token count " + std::to_string(tokens) +
                                    " is not tiled by window of " + std::to_string(s2) +
                                    " tokens");
    }
    const int64_t windows = tokens / s2;
    int64_t f = 0;
    for (int64_t i = 0; i < shape.n_groups; ++i) {
        const int64_t d = equal_split_width(spec.D, shape.n_groups, i);
        f += windows * (8 * s2 * d * d + 4 * s2 * s2 * d);
    }
    return f;
}

int64_t block_flops(const ArchSpec& spec, BlockKind kind, int64_t tokens) {
    check_spec(spec);
    if (tokens < 1) throw std::invalid_argument("token count must be >= 1");
    (void)kind;
    int64_t f = full_attention_flops(spec.D, tokens);
    if (spec.cross_attention) f += 8 * tokens * spec.D * spec.D;
    f += 4 * spec.ffn_mult * tokens * spec.D * spec.D;
    return f;
}

int64_t rglc_block_flops(const ArchSpec& spec, const RglcShape& shape, int64_t tokens) {
    if (tokens < 1) throw std::invalid_argument("token count must be >= 1");
    return 4 * tokens * spec.D * spec.D +  // two zero-convs
           grouped_attention_flops(spec, shape, tokens);
}

namespace {

CostReport assemble(const ArchSpec& spec, const PlacementPlan& plan, const Baseline& baseline,
                    PlanKind kind, int64_t tokens, bool with_flops) {
    check_spec(spec);
    if (baseline.copy_first_k < 0 || baseline.copy_first_k > spec.L) {
        throw std::invalid_argument("baseline copy_first_k " +
                                    std::to_string(baseline.copy_first_k) + " outside [0, L=" +
                                    std::to_string(spec.L) + "]");
    }

    CostReport rep;
    rep.backbone_params = spec.L * block_params(spec, BlockKind::backbone) + extras_total(spec);
    rep.backbone_flops = with_flops ? spec.L * block_flops(spec, BlockKind::backbone, tokens) : 0;

    for (const auto& e : plan.entries) {
        ComponentCost c;
        if (kind == PlanKind::copy) {
            c.name = "copy_block_layer_" + std::to_string(e.layer);
            c.params = block_params(spec, BlockKind::copy);
            c.flops = with_flops ? block_flops(spec, BlockKind::copy, tokens) : 0;
        } else {
            const RglcShape shape{e.n_groups, e.window_s};
            c.name = "rglc_layer_" + std::to_string(e.layer) + "_n" + std::to_string(e.n_groups);
            c.params = rglc_block_params(spec, shape);
            c.flops = with_flops ? rglc_block_flops(spec, shape, tokens) : 0;
        }
        rep.total_params += c.params;
        rep.total_flops += c.flops;
        rep.components.push_back(std::move(c));
    }

    rep.param_ratio_vs_backbone = double(rep.total_params) / double(rep.backbone_params);
    if (with_flops) {
        rep.flop_ratio_vs_backbone = double(rep.total_flops) / double(rep.backbone_flops);
    }

    if (baseline.copy_first_k > 0) {
        rep.baseline_name = "copy_first_" + std::to_string(baseline.copy_first_k);
        const int64_t base_params = baseline.copy_first_k * block_params(spec, BlockKind::copy);
        rep.param_ratio_vs_baseline = double(rep.total_params) / double(base_params);
        if (with_flops) {
            const int64_t base_flops =
                baseline.copy_first_k * block_flops(spec, BlockKind::copy, tokens);
            rep.flop_ratio_vs_baseline = double(rep.total_flops) / double(base_flops);
        }
    }
    return rep;
}

}  // namespace

CostReport plan_cost(const ArchSpec& spec, const PlacementPlan& plan, const Baseline& baseline,
                     PlanKind kind) {
    return assemble(spec, plan, baseline, kind, spec.tokens, /*with_flops=*/false);
}

CostReport plan_flops(const ArchSpec& spec, const PlacementPlan& plan, int64_t tokens,
                      const Baseline& baseline, PlanKind kind) {
    if (tokens < 1) throw std::invalid_argument("plan_flops: token count must be >= 1");
    return assemble(spec, plan, baseline, kind, tokens, /*with_flops=*/true);
}

}  // namespace relactrl
