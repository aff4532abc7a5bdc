#include "relactrl/distance.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "relactrl/rng.hpp"

namespace relactrl {

namespace {

void check_query(const DistanceQuery& q) {
    if (q.H < 1 || q.W < 1 || q.d < 1) {
        throw std::invalid_argument("distance query extents must be >= 1");
    }
    if (q.H * q.W * q.d < 2) {
        throw std::invalid_argument("distance is undefined on a single-element grid");
    }
    if (q.t_h < 0 || q.t_h >= q.H || q.t_w < 0 || q.t_w >= q.W * q.d) {
        throw std::invalid_argument("token (" + std::to_string(q.t_h) + "," +
                                    std::to_string(q.t_w) + ") outside the " +
                                    std::to_string(q.H) + "x" + std::to_string(q.W * q.d) +
                                    " grid");
    }
}

double grid_dist(int64_t cols, size_t a, size_t b) {
    const double dh = double(int64_t(a / size_t(cols)) - int64_t(b / size_t(cols)));
    const double dw = double(int64_t(a % size_t(cols)) - int64_t(b % size_t(cols)));
    return std::sqrt(dh * dh + dw * dw);
}

// Resolves the ShuffleSpec parameters used for MC draws and validates that
// the observed group really has the query's width under the equal-split rule.
struct ResolvedContext {
    FeatureGeometry geom;
    int64_t n_groups;
    int64_t group_index;
};

ResolvedContext resolve_context(const DistanceQuery& q, const McContext& ctx) {
    ResolvedContext r;
    if (ctx.total_channels == 0) {
        r.geom = FeatureGeometry{q.H, q.W, q.d};
        r.n_groups = 1;
        r.group_index = 0;
        return r;
    }
    r.geom = FeatureGeometry{q.H, q.W, ctx.total_channels};
    r.n_groups = ctx.n_groups;
    r.group_index = ctx.group_index;
    if (ctx.group_index < 0 || ctx.group_index >= ctx.n_groups) {
        throw std::invalid_argument("mc_distance: group index out of range");
    }
    const int64_t base = ctx.total_channels / ctx.n_groups;
    const int64_t rem = ctx.total_channels % ctx.n_groups;
    const int64_t width = base + (ctx.group_index < rem ? 1 : 0);
    if (width != q.d) {
        throw std::invalid_argument("mc_distance: group " + std::to_string(ctx.group_index) +
                                    " has width " + std::to_string(width) +
                                    " under the equal split, query expects " +
                                    std::to_string(q.d));
    }
    return r;
}

}  // namespace

double exact_expected_distance(const DistanceQuery& q) {
    check_query(q);
    const int64_t cols = q.W * q.d;
    double sum = 0.0;
    for (int64_t h = 0; h < q.H; ++h) {
        const double dh2 = double(h - q.t_h) * double(h - q.t_h);
        for (int64_t w = 0; w < cols; ++w) {
            const double dw = double(w - q.t_w);
            sum += std::sqrt(dh2 + dw * dw);
        }
    }
    return sum / (double(q.H) * double(cols) - 1.0);
}

double distance_lower_bound(const DistanceQuery& q) {
    check_query(q);
    const double H = double(q.H);
    const double Wd = double(q.W * q.d);
    const double th = double(q.t_h);
    const double tw = double(q.t_w);
    const double bracket = H * tw * (tw + 1.0) + Wd * th * (th + 1.0) +
                           H * (Wd - tw) * (Wd - tw - 1.0) + Wd * (H - th) * (H - th - 1.0);
    return std::sqrt(2.0) / (4.0 * (H * Wd - 1.0)) * bracket;
}

McResult mc_distance(const DistanceQuery& q, const GroupWindow& window, const McContext& ctx,
                     int64_t samples, uint64_t seed) {
    check_query(q);
    if (samples < 1) throw std::invalid_argument("mc_distance: samples must be >= 1");
    if (window.s < 1 || q.H % window.s != 0 || q.W % window.s != 0) {
        throw std::invalid_argument("mc_distance: window side " + std::to_string(window.s) +
                                    " does not tile the " + std::to_string(q.H) + "x" +
                                    std::to_string(q.W) + " token grid");
    }
    if (window.s * window.s * q.d < 2) {
        throw std::invalid_argument("mc_distance: degenerate window holds a single element");
    }
    const ResolvedContext rc = resolve_context(q, ctx);

    const int64_t cols = q.W * q.d;
    const size_t count = size_t(q.H * q.W * q.d);
    const size_t q_j = size_t(q.t_h * cols + q.t_w);
    const int64_t s = window.s;
    const int64_t wins_per_row = q.W / s;

    std::vector<double> dist_from(count);
    for (size_t p = 0; p < count; ++p) dist_from[p] = grid_dist(cols, q_j, p);

    auto window_of = [&](size_t shuffled_pos) {
        const int64_t token = int64_t(shuffled_pos) / q.d;
        const int64_t h = token / q.W;
        const int64_t w = token % q.W;
        return (h / s) * wins_per_row + (w / s);
    };

    // Welford so a constant sequence (full-grid window) reports stderr 0.
    double mean = 0.0, m2 = 0.0;
    for (int64_t k = 0; k < samples; ++k) {
        const ShuffleSpec spec =
            make_shuffle_spec(rc.geom, rc.n_groups, derive_seed(seed, uint64_t(k)));
        const std::vector<size_t>& perm = spec.element_perm[size_t(rc.group_index)];
        const int64_t home = window_of(perm[q_j]);
        double acc = 0.0;
        int64_t partners = 0;
        for (size_t p = 0; p < count; ++p) {
            if (p == q_j) continue;
            if (window_of(perm[p]) == home) {
                acc += dist_from[p];
                ++partners;
            }
        }
        const double draw_mean = (partners > 0) ? acc / double(partners) : 0.0;
        const double delta = draw_mean - mean;
        mean += delta / double(k + 1);
        m2 += delta * (draw_mean - mean);
    }

    McResult r;
    r.samples = samples;
    r.estimate = mean;
    if (samples > 1) {
        r.stderr_est = std::sqrt(m2 / double(samples - 1) / double(samples));
    }
    return r;
}

std::vector<double> per_position_mc_distance(const FeatureGeometry& group_geom,
                                             const GroupWindow& window, int64_t samples,
                                             uint64_t seed) {
    if (group_geom.H * group_geom.W * group_geom.D < 2) {
        throw std::invalid_argument("average_distance: grid must have at least two elements");
    }
    if (samples < 1) throw std::invalid_argument("average_distance: samples must be >= 1");
    if (window.s < 1 || group_geom.H % window.s != 0 || group_geom.W % window.s != 0) {
        throw std::invalid_argument("average_distance: window does not tile the token grid");
    }
    if (window.s * window.s * group_geom.D < 2) {
        throw std::invalid_argument("average_distance: degenerate window holds a single element");
    }

    const int64_t H = group_geom.H, W = group_geom.W, d = group_geom.D;
    const int64_t cols = W * d;
    const size_t count = size_t(H * W * d);
    const int64_t s = window.s;
    const int64_t wins_per_row = W / s;
    const size_t n_windows = size_t((H / s) * wins_per_row);
    const size_t members_per_window = size_t(s * s * d);

    std::vector<double> per_position(count, 0.0);
    std::vector<std::vector<size_t>> members(n_windows);
    for (auto& m : members) m.reserve(members_per_window);

    for (int64_t k = 0; k < samples; ++k) {
        const ShuffleSpec spec =
            make_shuffle_spec(group_geom, 1, derive_seed(seed, uint64_t(k)));
        const std::vector<size_t>& perm = spec.element_perm[0];
        for (auto& m : members) m.clear();
        for (size_t q = 0; q < count; ++q) {
            const size_t p = perm[q];
            const int64_t token = int64_t(p) / d;
            const int64_t win = (token / W / s) * wins_per_row + (token % W) / s;
            members[size_t(win)].push_back(q);
        }
        for (const auto& m : members) {
            for (size_t i = 0; i < m.size(); ++i) {
                for (size_t j = i + 1; j < m.size(); ++j) {
                    const double dist = grid_dist(cols, m[i], m[j]);
                    per_position[m[i]] += dist;
                    per_position[m[j]] += dist;
                }
            }
        }
    }

    const double denom = double(samples) * double(members_per_window - 1);
    for (double& v : per_position) v /= denom;
    return per_position;
}

double average_distance(const FeatureGeometry& group_geom, const GroupWindow& window,
                        int64_t samples, uint64_t seed) {
    const std::vector<double> per_position =
        per_position_mc_distance(group_geom, window, samples, seed);
    double total = 0.0;
    for (double v : per_position) total += v;
    return total / double(per_position.size());
}

DistanceReport verify_distance(const DistanceQuery& q, const GroupWindow& window,
                               int64_t samples, uint64_t seed) {
    DistanceReport rep;
    rep.exact = exact_expected_distance(q);
    rep.lower_bound = distance_lower_bound(q);
    const McResult mc = mc_distance(q, window, McContext{}, samples, seed);
    rep.mc_estimate = mc.estimate;
    rep.mc_stderr = mc.stderr_est;
    rep.samples = mc.samples;
    return rep;
}

}  // namespace relactrl
