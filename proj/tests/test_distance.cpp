#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "relactrl/distance.hpp"
#include "relactrl/rng.hpp"

using namespace relactrl;

namespace {

// Independent brute-force expectation: plain double sum over the grid.
double brute_force_expected(int64_t H, int64_t Wd, int64_t th, int64_t tw) {
    double sum = 0.0;
    for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < Wd; ++w)
            sum += std::sqrt(double((h - th) * (h - th)) + double((w - tw) * (w - tw)));
    return sum / (double(H) * double(Wd) - 1.0);
}

}  // namespace

TEST_CASE("exact expected distance on hand-checked grids") {
    // 2x2 grid from the corner: (1 + 1 + sqrt2) / 3
    const DistanceQuery q1{2, 2, 1, 0, 0};
    const double want1 = (2.0 + std::sqrt(2.0)) / 3.0;
    CHECK(exact_expected_distance(q1) == doctest::Approx(1.1380711874576983).epsilon(1e-12));
    CHECK(exact_expected_distance(q1) == doctest::Approx(want1).epsilon(1e-15));
    CHECK(exact_expected_distance(q1) ==
          doctest::Approx(brute_force_expected(2, 2, 0, 0)).epsilon(1e-15));

    // a 1x2 strip has a single other cell at distance 1
    CHECK(exact_expected_distance(DistanceQuery{1, 2, 1, 0, 0}) == doctest::Approx(1.0));

    // centre of a 1x3 strip: (1 + 1) / 2
    CHECK(exact_expected_distance(DistanceQuery{1, 3, 1, 0, 1}) == doctest::Approx(1.0));

    // W and d only enter through their product
    CHECK(exact_expected_distance(DistanceQuery{3, 4, 2, 1, 3}) ==
          doctest::Approx(exact_expected_distance(DistanceQuery{3, 8, 1, 1, 3})).epsilon(1e-15));
}

TEST_CASE("lower bound closed form on hand-checked grids") {
    CHECK(distance_lower_bound(DistanceQuery{2, 2, 1, 0, 0}) ==
          doctest::Approx(0.9428090415820634).epsilon(1e-12));  // sqrt(2)/12 * 8
    CHECK(distance_lower_bound(DistanceQuery{1, 3, 1, 0, 1}) ==
          doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));  // sqrt(2)/8 * 4
    CHECK(distance_lower_bound(DistanceQuery{2, 2, 1, 0, 0}) <=
          exact_expected_distance(DistanceQuery{2, 2, 1, 0, 0}));
}

TEST_CASE("absolute-deviation split identity") {
    // sum_{h=0}^{H-1} |h - t| = t(t+1)/2 + (H-t)(H-t-1)/2, the identity the
    // closed form rests on; checked by direct summation.
    for (int64_t H = 1; H <= 9; ++H) {
        for (int64_t t = 0; t < H; ++t) {
            int64_t direct = 0;
            for (int64_t h = 0; h < H; ++h) direct += std::llabs(h - t);
            const int64_t closed = t * (t + 1) / 2 + (H - t) * (H - t - 1) / 2;
            CHECK(direct == closed);
        }
    }
}

TEST_CASE("degenerate grids are rejected") {
    CHECK_THROWS_AS(exact_expected_distance(DistanceQuery{1, 1, 1, 0, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(distance_lower_bound(DistanceQuery{1, 1, 1, 0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(exact_expected_distance(DistanceQuery{2, 2, 1, 2, 0}),
                    std::invalid_argument);
}

TEST_CASE("bound holds exhaustively on small grids") {
    for (int64_t H = 1; H <= 12; ++H) {
        for (int64_t Wd = 1; Wd <= 12; ++Wd) {
            if (H * Wd < 2) continue;
            for (int64_t th = 0; th < H; ++th) {
                for (int64_t tw = 0; tw < Wd; ++tw) {
                    const DistanceQuery q{H, Wd, 1, th, tw};
                    CHECK(distance_lower_bound(q) <= exact_expected_distance(q) + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("corner expectation grows linearly under doubling") {
    const double e4 = exact_expected_distance(DistanceQuery{4, 4, 1, 0, 0});
    const double e8 = exact_expected_distance(DistanceQuery{8, 8, 1, 0, 0});
    const double e16 = exact_expected_distance(DistanceQuery{16, 16, 1, 0, 0});
    CHECK(e4 == doctest::Approx(brute_force_expected(4, 4, 0, 0)).epsilon(1e-15));
    const double r1 = e8 / e4;
    const double r2 = e16 / e8;
    // Discreteness keeps the first doubling high (~2.17); the ratio then
    // converges on 2 from above and is inside 5% by the 8 -> 16 step.
    CHECK(r1 > 2.0);
    CHECK(r2 > 2.0);
    CHECK(r2 < r1);
    CHECK(std::fabs(r2 - 2.0) / 2.0 < 0.05);
    const double e32 = exact_expected_distance(DistanceQuery{32, 32, 1, 0, 0});
    CHECK(std::fabs(e32 / e16 - 2.0) / 2.0 < 0.05);
}

TEST_CASE("exact and bound are mirror-symmetric") {
    const int64_t H = 5, Wd = 7;
    for (int64_t th = 0; th < H; ++th) {
        for (int64_t tw = 0; tw < Wd; ++tw) {
            const DistanceQuery q{H, Wd, 1, th, tw};
            const DistanceQuery vert{H, Wd, 1, H - 1 - th, tw};
            const DistanceQuery horz{H, Wd, 1, th, Wd - 1 - tw};
            CHECK(exact_expected_distance(q) ==
                  doctest::Approx(exact_expected_distance(vert)).epsilon(1e-13));
            CHECK(exact_expected_distance(q) ==
                  doctest::Approx(exact_expected_distance(horz)).epsilon(1e-13));
            CHECK(distance_lower_bound(q) ==
                  doctest::Approx(distance_lower_bound(vert)).epsilon(1e-13));
            CHECK(distance_lower_bound(q) ==
                  doctest::Approx(distance_lower_bound(horz)).epsilon(1e-13));
        }
    }
}

TEST_CASE("full-grid window makes the MC estimate exact with zero stderr") {
    const DistanceQuery q{2, 2, 1, 0, 0};
    const McResult mc = mc_distance(q, GroupWindow{2}, McContext{}, 50, 31);
    CHECK(mc.estimate == doctest::Approx(exact_expected_distance(q)).epsilon(1e-12));
    CHECK(mc.stderr_est == 0.0);
}

TEST_CASE("MC estimate is consistent with the exact expectation") {
    const DistanceQuery q{4, 4, 2, 1, 3};
    const McResult mc = mc_distance(q, GroupWindow{2}, McContext{}, 20000, 17);
    const double exact = exact_expected_distance(q);
    CHECK(std::fabs(mc.estimate - exact) < 3.0 * mc.stderr_est);
    CHECK(mc.stderr_est > 0.0);
}

TEST_CASE("MC input validation") {
    const DistanceQuery q{4, 4, 2, 0, 0};
    CHECK_THROWS_AS(mc_distance(q, GroupWindow{2}, McContext{}, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(mc_distance(q, GroupWindow{3}, McContext{}, 10, 1), std::invalid_argument);
    // context group width must agree with the query's d
    CHECK_THROWS_AS(mc_distance(q, GroupWindow{2}, McContext{8, 2, 0}, 10, 1),
                    std::invalid_argument);
    CHECK_NOTHROW(mc_distance(q, GroupWindow{2}, McContext{4, 2, 0}, 10, 1));
    // 1x1 window on a d=1 volume has no partners
    CHECK_THROWS_AS(mc_distance(DistanceQuery{4, 4, 1, 0, 0}, GroupWindow{1}, McContext{}, 10, 1),
                    std::invalid_argument);
}

TEST_CASE("average distance over a full-grid window averages the exact values") {
    const FeatureGeometry geom{2, 2, 1};
    const double avg = average_distance(geom, GroupWindow{2}, 10, 5);
    double want = 0.0;
    for (int64_t th = 0; th < 2; ++th)
        for (int64_t tw = 0; tw < 2; ++tw)
            want += exact_expected_distance(DistanceQuery{2, 2, 1, th, tw});
    want /= 4.0;
    CHECK(avg == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("average distance tracks the per-token exact expectation") {
    const FeatureGeometry geom{8, 8, 2};
    const double avg = average_distance(geom, GroupWindow{2}, 4000, 12);
    double want = 0.0;
    for (int64_t th = 0; th < 8; ++th)
        for (int64_t tw = 0; tw < 16; ++tw)
            want += exact_expected_distance(DistanceQuery{8, 8, 2, th, tw});
    want /= 128.0;
    CHECK(std::fabs(avg - want) / want < 0.05);
}

TEST_CASE("average distance rejects degenerate inputs") {
    CHECK_THROWS_AS(average_distance(FeatureGeometry{1, 1, 1}, GroupWindow{1}, 10, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(average_distance(FeatureGeometry{4, 4, 2}, GroupWindow{2}, 0, 1),
                    std::invalid_argument);
}

TEST_CASE("verify_distance packages a coherent report") {
    const DistanceQuery q{4, 4, 2, 0, 0};
    const DistanceReport rep = verify_distance(q, GroupWindow{2}, 2000, 77);
    CHECK(rep.lower_bound <= rep.exact + 1e-12);
    CHECK(rep.samples == 2000);
    CHECK(std::fabs(rep.mc_estimate - rep.exact) < 4.0 * rep.mc_stderr + 1e-9);
}
