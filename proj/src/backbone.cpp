#include "relactrl/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "relactrl/rng.hpp"

namespace relactrl {

bool PlacementPlan::hosts(int64_t layer) const {
    for (const auto& e : entries)
        if (e.layer == layer) return true;
    return false;
}

std::vector<int64_t> PlacementPlan::layers() const {
    std::vector<int64_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.layer);
    return out;
}

void validate_plan(const PlacementPlan& plan, const ModelConfig& cfg) {
    int64_t prev = -1;
    for (const auto& e : plan.entries) {
        if (e.layer < 0 || e.layer >= cfg.depth) {
            throw std::invalid_argument("plan layer " + std::to_string(e.layer) +
                                        " outside [0, " + std::to_string(cfg.depth) + ")");
        }
        if (e.layer <= prev) {
            throw std::invalid_argument("plan layers must be unique and ascending, saw " +
                                        std::to_string(e.layer) + " after " +
                                        std::to_string(prev));
        }
        prev = e.layer;
        if (e.n_groups < 1 || e.n_groups > cfg.geom.D) {
            throw std::invalid_argument("plan layer " + std::to_string(e.layer) +
                                        ": n_groups " + std::to_string(e.n_groups) +
                                        " invalid for D=" + std::to_string(cfg.geom.D));
        }
        if (e.window_s < 1 || cfg.geom.H % e.window_s != 0 || cfg.geom.W % e.window_s != 0) {
            throw std::invalid_argument("plan layer " + std::to_string(e.layer) + ": window " +
                                        std::to_string(e.window_s) + " does not divide " +
                                        std::to_string(cfg.geom.H) + "x" +
                                        std::to_string(cfg.geom.W));
        }
    }
}

namespace {

Tensor random_normal(std::vector<int64_t> shape, Stream& s, double sigma) {
    Tensor t(std::move(shape), 0.0);
    for (double& v : t.data) v = sigma * s.next_normal();
    return t;
}

std::shared_ptr<std::vector<size_t>> head_column_index(int64_t n, int64_t d_total, int64_t head,
                                                       int64_t d_head) {
    auto idx = std::make_shared<std::vector<size_t>>();
    idx->reserve(size_t(n * d_head));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d_head; ++j)
            idx->push_back(size_t(i * d_total + head * d_head + j));
    return idx;
}

std::shared_ptr<std::vector<size_t>> segment_index(int64_t offset, int64_t len) {
    auto idx = std::make_shared<std::vector<size_t>>(size_t(len));
    for (int64_t j = 0; j < len; ++j) (*idx)[size_t(j)] = size_t(offset + j);
    return idx;
}

// Graph handles for one frozen block plus its six modulation vectors.
struct BlockCtx {
    Graph::NodeId wq, wk, wv, wo, w1, w2;
    Graph::NodeId shift1, scale1, gate1, shift2, scale2, gate2;
};

BlockCtx lift_block(Graph& g, const BackboneBlockParams& p, Graph::NodeId t_row,
                    Graph::NodeId shared_proj, int64_t D) {
    BlockCtx b;
    b.wq = g.leaf(p.wq);
    b.wk = g.leaf(p.wk);
    b.wv = g.leaf(p.wv);
    b.wo = g.leaf(p.wo);
    b.w1 = g.leaf(p.w1);
    b.w2 = g.leaf(p.w2);

    Graph::NodeId raw =
        g.add(g.reshape(g.matmul(t_row, shared_proj), {6 * D}), g.leaf(p.mod_table));
    Graph::NodeId ones = g.leaf(Tensor({D}, 1.0));
    b.shift1 = g.gather(raw, segment_index(0, D), {D});
    b.scale1 = g.add(ones, g.gather(raw, segment_index(D, D), {D}));
    b.gate1 = g.add(ones, g.gather(raw, segment_index(2 * D, D), {D}));
    b.shift2 = g.gather(raw, segment_index(3 * D, D), {D});
    b.scale2 = g.add(ones, g.gather(raw, segment_index(4 * D, D), {D}));
    b.gate2 = g.add(ones, g.gather(raw, segment_index(5 * D, D), {D}));
    return b;
}

Graph::NodeId multihead_attention(Graph& g, Graph::NodeId x, const BlockCtx& b, int64_t heads) {
    const int64_t N = g.shape(x)[0];
    const int64_t D = g.shape(x)[1];
    const int64_t d_head = D / heads;
    Graph::NodeId q = g.matmul(x, b.wq);
    Graph::NodeId k = g.matmul(x, b.wk);
    Graph::NodeId v = g.matmul(x, b.wv);

    Graph::NodeId merged = 0;
    for (int64_t h = 0; h < heads; ++h) {
        auto cols = head_column_index(N, D, h, d_head);
        Graph::NodeId qh = g.gather(q, cols, {N, d_head});
        Graph::NodeId kh = g.gather(k, cols, {N, d_head});
        Graph::NodeId vh = g.gather(v, cols, {N, d_head});
        Graph::NodeId attn =
            g.softmax_rows(g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(double(d_head))));
        Graph::NodeId oh = g.scatter_add(g.matmul(attn, vh), cols, {N, D});
        merged = (h == 0) ? oh : g.add(merged, oh);
    }
    return g.matmul(merged, b.wo);
}

Graph::NodeId block_forward(Graph& g, Graph::NodeId x, const BlockCtx& b, int64_t heads) {
    Graph::NodeId a_in = g.row_add(g.row_mul(g.layer_norm_rows(x), b.scale1), b.shift1);
    x = g.add(x, g.row_mul(multihead_attention(g, a_in, b, heads), b.gate1));
    Graph::NodeId f_in = g.row_add(g.row_mul(g.layer_norm_rows(x), b.scale2), b.shift2);
    Graph::NodeId f_out = g.matmul(g.gelu(g.matmul(f_in, b.w1)), b.w2);
    return g.add(x, g.row_mul(f_out, b.gate2));
}

}  // namespace

ControlledModel build_model(const ModelConfig& cfg, const PlacementPlan& plan, uint64_t seed) {
    if (cfg.depth < 1) throw std::invalid_argument("depth must be >= 1");
    if (cfg.geom.D % cfg.heads != 0 || cfg.heads < 1) {
        throw std::invalid_argument("D=" + std::to_string(cfg.geom.D) +
                                    " must be divisible by heads=" + std::to_string(cfg.heads));
    }
    if (cfg.cross_attention) {
        throw std::invalid_argument(
            "cross_attention is a cost-model setting; the toy backbone takes no context input");
    }
    validate_plan(plan, cfg);

    ControlledModel m;
    m.cfg = cfg;
    m.plan = plan;
    m.seed = seed;

    const int64_t D = cfg.geom.D;
    const double sigma = 1.0 / std::sqrt(double(D));

    Stream ws(derive_seed(seed, 0xb10c));
    m.blocks.reserve(size_t(cfg.depth));
    for (int64_t l = 0; l < cfg.depth; ++l) {
        BackboneBlockParams p;
        p.wq = random_normal({D, D}, ws, sigma);
        p.wk = random_normal({D, D}, ws, sigma);
        p.wv = random_normal({D, D}, ws, sigma);
        p.wo = random_normal({D, D}, ws, sigma);
        p.w1 = random_normal({D, cfg.ffn_mult * D}, ws, sigma);
        p.w2 = random_normal({cfg.ffn_mult * D, D}, ws, sigma);
        p.mod_table = Tensor::zeros({6 * D});
        m.blocks.push_back(std::move(p));
    }
    m.t_proj = random_normal({D, 6 * D}, ws, sigma);
    m.control_embed = random_normal({D, D}, ws, sigma);

    for (const auto& e : plan.entries) {
        RglcSite site;
        site.spec = make_shuffle_spec(cfg.geom, e.n_groups, derive_seed(seed, 0x5bec + uint64_t(e.layer)));
        site.window = GroupWindow{e.window_s};
        site.params = make_rglc_params(site.spec, derive_seed(seed, 0x9a1 + uint64_t(e.layer)));
        m.control.emplace(e.layer, std::move(site));
    }
    return m;
}

void demo_init(ControlledModel& model, uint64_t seed, double sigma) {
    Stream s(derive_seed(seed, 0xde30));
    for (auto& [layer, site] : model.control) {
        for (double& v : site.params.zc_in.data) v = sigma * s.next_normal();
        for (double& v : site.params.zc_out.data) v = sigma * s.next_normal();
    }
}

bool has_live_control(const ControlledModel& model) {
    for (const auto& [layer, site] : model.control) {
        for (double v : site.params.zc_out.data)
            if (v != 0.0) return true;
    }
    return false;
}

Tensor forward(const ControlledModel& model, const Tensor& latent, const Tensor& cond,
               const Tensor& t_embed, const std::set<int64_t>& skip) {
    const ModelConfig& cfg = model.cfg;
    const std::vector<int64_t> vol{cfg.geom.H, cfg.geom.W, cfg.geom.D};
    if (latent.shape != vol || cond.shape != vol) {
        throw std::invalid_argument("forward: latent/cond must be " + shape_to_string(vol) +
                                    ", got " + shape_to_string(latent.shape) + " and " +
                                    shape_to_string(cond.shape));
    }
    if (t_embed.numel() != cfg.geom.D) {
        throw std::invalid_argument("forward: t embedding must have length D");
    }
    for (int64_t l : skip) {
        if (!model.plan.hosts(l)) {
            throw std::invalid_argument("skip layer " + std::to_string(l) +
                                        " is not hosted by the placement plan");
        }
    }

    const int64_t D = cfg.geom.D;
    const int64_t N = cfg.geom.tokens();

    Graph g;
    Graph::NodeId x = g.reshape(g.leaf(latent), {N, D});
    Graph::NodeId t_leaf = g.leaf(t_embed);
    Graph::NodeId t_row = g.reshape(t_leaf, {1, D});
    Graph::NodeId shared_proj = g.leaf(model.t_proj);
    Graph::NodeId c = g.matmul(g.reshape(g.leaf(cond), {N, D}), g.leaf(model.control_embed));

    for (int64_t l = 0; l < cfg.depth; ++l) {
        BlockCtx b = lift_block(g, model.blocks[size_t(l)], t_row, shared_proj, D);
        x = block_forward(g, x, b, cfg.heads);

        auto it = model.control.find(l);
        if (it == model.control.end()) continue;
        const RglcSite& site = it->second;
        RglcOutputs out = rglc_forward(g, g.reshape(x, vol), g.reshape(c, vol), t_leaf,
                                       lift(g, site.params), site.spec, site.window);
        if (!skip.count(l)) {
            x = g.add(x, g.reshape(out.c_cond, {N, D}));
        }
        c = g.reshape(out.c_next, {N, D});
    }
    return Tensor(vol, g.value(g.reshape(x, vol)).data);
}

std::vector<SweepRow> skip_sweep(const ControlledModel& model, int64_t trials, uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("skip_sweep: trials must be >= 1");
    if (model.control.empty()) {
        throw std::invalid_argument("skip_sweep: the plan hosts no control blocks");
    }
    if (!has_live_control(model)) {
        throw std::invalid_argument(
            "skip_sweep: model is zero-initialized, every proxy would be 0; apply demo_init");
    }

    const FeatureGeometry& geom = model.cfg.geom;
    const int64_t N = geom.tokens();
    std::vector<SweepRow> rows;
    for (const auto& [layer, site] : model.control) rows.push_back(SweepRow{layer, 0.0, 0.0});

    for (int64_t trial = 0; trial < trials; ++trial) {
        Stream s(derive_seed(seed, 0x70a1 + uint64_t(trial)));
        Tensor latent = random_normal({geom.H, geom.W, geom.D}, s, 1.0);
        Tensor cond = random_normal({geom.H, geom.W, geom.D}, s, 1.0);
        Tensor t_embed = random_normal({geom.D}, s, 1.0);

        const Tensor full = forward(model, latent, cond, t_embed);
        for (auto& row : rows) {
            const Tensor skipped = forward(model, latent, cond, t_embed, {row.layer});
            double sq = 0.0;
            double max_token = 0.0;
            for (int64_t tok = 0; tok < N; ++tok) {
                double tok_sq = 0.0;
                for (int64_t j = 0; j < geom.D; ++j) {
                    const double dv = full.data[size_t(tok * geom.D + j)] -
                                      skipped.data[size_t(tok * geom.D + j)];
                    tok_sq += dv * dv;
                }
                sq += tok_sq;
                max_token = std::max(max_token, std::sqrt(tok_sq));
            }
            row.proxy_fid += sq / double(N * geom.D);
            row.proxy_hdd += max_token;
        }
    }
    for (auto& row : rows) {
        row.proxy_fid /= double(trials);
        row.proxy_hdd /= double(trials);
    }
    return rows;
}

}  // namespace relactrl
