#include <catch2/catch_amalgamated.hpp>

#include "kinlab/intersect.hpp"
#include "test_support.hpp"

using namespace kinlab;
using Catch::Approx;

namespace {

DiscreteSubmanifold<2> closed_geodesic(int a, int b, const Vec<2>& start, int extra_res = 0) {
    GeodesicSegmentSpec<2> spec;
    spec.start = TorusPoint<2>(start);
    spec.direction = Vec<2>(a, b);
    spec.length = std::hypot(double(a), double(b));
    int res = extra_res > 0 ? extra_res : std::max(2, int(std::ceil(spec.length / 0.15)));
    return discretize(spec, res);
}

}  // namespace

TEST_CASE("orthogonal closed geodesics cross once") {
    auto a = closed_geodesic(1, 0, Vec<2>(0.03, 0.51));
    auto b = closed_geodesic(0, 1, Vec<2>(0.43, 0.02));
    auto res = count_curve_curve_t2(a, b);
    CHECK(res.count == 1);
    REQUIRE(res.records.size() == 1);
    CHECK(res.records[0].sin_angle == Approx(1.0));
    CHECK_FALSE(res.records[0].degenerate);
}

TEST_CASE("parallel closed geodesics never cross") {
    auto a = closed_geodesic(1, 0, Vec<2>(0.0, 0.2));
    auto b = closed_geodesic(1, 0, Vec<2>(0.0, 0.7));
    CHECK(count_curve_curve_t2(a, b).count == 0);
}

TEST_CASE("(1,0) against (p,q) classes: counts match |q| and the grid oracle") {
    auto base = closed_geodesic(1, 0, Vec<2>(0.0, 0.287));
    int expected[] = {1, 2, 3};
    std::pair<int, int> classes[] = {{1, 1}, {1, 2}, {2, 3}};
    for (int i = 0; i < 3; ++i) {
        auto other = closed_geodesic(classes[i].first, classes[i].second, Vec<2>(0.11, 0.033));
        auto res = count_curve_curve_t2(base, other);
        CHECK(res.count == expected[i]);

        auto fine_a = testing::sample_geodesic(TorusPoint<2>(Vec<2>(0.0, 0.287)), Vec<2>(1, 0),
                                               1.0, 400);
        Vec<2> dir(classes[i].first, classes[i].second);
        auto fine_b = testing::sample_geodesic(TorusPoint<2>(Vec<2>(0.11, 0.033)), dir,
                                               dir.norm(), 400);
        CHECK(testing::grid_crossing_oracle(fine_a, fine_b) == expected[i]);
    }
}

TEST_CASE("counting is exactly translation equivariant") {
    auto a = closed_geodesic(1, 1, Vec<2>(0.21, 0.68));
    auto b = closed_geodesic(1, -1, Vec<2>(0.74, 0.31));
    auto base = count_curve_curve_t2(a, b);
    for (const Vec<2>& shift : {Vec<2>(0.318, 0.707), Vec<2>(0.9, 0.05)}) {
        auto at = a, bt = b;
        for (auto& v : at.vertices) v = translate(v, shift);
        for (auto& v : bt.vertices) v = translate(v, shift);
        CHECK(count_curve_curve_t2(at, bt).count == base.count);
    }
}

TEST_CASE("counting is symmetric in its arguments") {
    Philox rng(2718, 0);
    for (int trial = 0; trial < 12; ++trial) {
        GeodesicSegmentSpec<2> sa{random_point<2>(rng),
                                  Vec<2>(rng.next_gaussian(), rng.next_gaussian()),
                                  0.3 + 0.5 * rng.next_double()};
        GeodesicSegmentSpec<2> sb{random_point<2>(rng),
                                  Vec<2>(rng.next_gaussian(), rng.next_gaussian()),
                                  0.3 + 0.5 * rng.next_double()};
        auto a = discretize(sa, 5), b = discretize(sb, 5);
        CHECK(count_curve_curve_t2(a, b).count == count_curve_curve_t2(b, a).count);
    }
}

TEST_CASE("closed geodesic classes: count bounded below by |ad - bc| with equal parity") {
    struct ClassPair {
        int a, b, c, d;
    };
    ClassPair class_pairs[] = {{1, 0, 0, 1},  {1, 0, 1, 1},  {1, 1, 1, -1}, {2, 1, 1, 2},
                               {1, 2, 3, 1},  {3, 1, 2, -1}, {2, -1, 1, 3}, {1, 3, 3, 2},
                               {3, 2, 1, 0},  {2, 3, 3, -2}};
    Philox rng(37, 0);
    for (const auto& cp : class_pairs) {
        int hom = std::abs(cp.a * cp.d - cp.b * cp.c);
        REQUIRE(hom > 0);
        auto ga = closed_geodesic(cp.a, cp.b, Vec<2>(rng.next_double(), rng.next_double()));
        auto gb = closed_geodesic(cp.c, cp.d, Vec<2>(rng.next_double(), rng.next_double()));
        int count = count_curve_curve_t2(ga, gb).count;
        CHECK(count >= hom);
        CHECK((count - hom) % 2 == 0);
    }
}

TEST_CASE("counts are stable under mesh refinement for transversal configurations") {
    auto a1 = closed_geodesic(1, 2, Vec<2>(0.05, 0.61));
    auto b1 = closed_geodesic(2, -1, Vec<2>(0.52, 0.13));
    auto a2 = closed_geodesic(1, 2, Vec<2>(0.05, 0.61), 2 * a1.element_count());
    auto b2 = closed_geodesic(2, -1, Vec<2>(0.52, 0.13), 2 * b1.element_count());
    auto res1 = count_curve_curve_t2(a1, b1);
    for (const auto& r : res1.records) CHECK(r.sin_angle >= 0.05);
    CHECK(res1.count == count_curve_curve_t2(a2, b2).count);
}

TEST_CASE("a crossing at a shared mesh vertex counts once and is flagged") {
    // B passes exactly through an interior vertex of A
    GeodesicSegmentSpec<2> sa{TorusPoint<2>(Vec<2>(0.3, 0.5)), Vec<2>(1.0, 0.0), 0.4};
    auto a = discretize(sa, 4);  // vertex at (0.4, 0.5)
    GeodesicSegmentSpec<2> sb{TorusPoint<2>(Vec<2>(0.4, 0.4)), Vec<2>(0.0, 1.0), 0.2};
    auto b = discretize(sb, 2);  // interior vertex at (0.4, 0.5) as well
    auto res = count_curve_curve_t2(a, b);
    CHECK(res.count == 1);
    bool any_degenerate = false;
    for (const auto& r : res.records) any_degenerate |= r.degenerate;
    CHECK(any_degenerate);
}

TEST_CASE("collinear overlap counts zero and is reported degenerate") {
    GeodesicSegmentSpec<2> sa{TorusPoint<2>(Vec<2>(0.1, 0.5)), Vec<2>(1.0, 0.0), 0.5};
    GeodesicSegmentSpec<2> sb{TorusPoint<2>(Vec<2>(0.3, 0.5)), Vec<2>(1.0, 0.0), 0.5};
    auto res = count_curve_curve_t2(discretize(sa, 4), discretize(sb, 4));
    CHECK(res.count == 0);
    CHECK(res.any_degenerate());
    CHECK_FALSE(res.records.empty());
}

TEST_CASE("nearly tangential crossings are counted but flagged") {
    GeodesicSegmentSpec<2> sa{TorusPoint<2>(Vec<2>(0.2, 0.5)), Vec<2>(1.0, 0.0), 0.39};
    GeodesicSegmentSpec<2> sb{TorusPoint<2>(Vec<2>(0.2, 0.49993)), Vec<2>(1.0, 4e-4), 0.39};
    auto res = count_curve_curve_t2(discretize(sa, 2), discretize(sb, 2));
    CHECK(res.count == 1);
    REQUIRE_FALSE(res.records.empty());
    CHECK(res.records[0].sin_angle < kTauDegenerate);
    CHECK(res.records[0].degenerate);
}

TEST_CASE("T3: vertical geodesic crosses the z = 1/2 coordinate torus once") {
    GeodesicSegmentSpec<3> line{TorusPoint<3>(Vec<3>(0.37, 0.61, 0.0)), Vec<3>(0, 0, 1), 1.0};
    auto curve = discretize(line, 8);
    PlanePatchSpec<3> patch{TorusPoint<3>(Vec<3>(0.0, 0.0, 0.5)), Vec<3>(1, 0, 0),
                            Vec<3>(0, 1, 0), 1.0, 1.0};
    auto surface = discretize(patch, 8, 8);
    auto res = count_curve_surface_t3(curve, surface);
    CHECK(res.count == 1);
    CHECK(res.records[0].sin_angle == Approx(1.0));

    // symmetric dispatch
    CHECK(count_intersections<3>(surface, curve).count == 1);
}

TEST_CASE("T3: geodesic inside the surface plane is degenerate with count zero") {
    PlanePatchSpec<3> patch{TorusPoint<3>(Vec<3>(0.0, 0.0, 0.5)), Vec<3>(1, 0, 0),
                            Vec<3>(0, 1, 0), 1.0, 1.0};
    auto surface = discretize(patch, 8, 8);
    GeodesicSegmentSpec<3> inplane{TorusPoint<3>(Vec<3>(0.2, 0.3, 0.5)), Vec<3>(1, 1, 0), 0.5};
    auto curve = discretize(inplane, 4);
    auto res = count_curve_surface_t3(curve, surface);
    CHECK(res.count == 0);
    CHECK(res.any_degenerate());
}

TEST_CASE("T3: translated disk against a transversal segment matches a membership oracle") {
    Philox rng(909, 0);
    for (int trial = 0; trial < 8; ++trial) {
        Vec<3> shift(rng.next_double(), rng.next_double(), rng.next_double());
        PlanePatchSpec<3> patch{TorusPoint<3>(Vec<3>(0.3 + shift[0], 0.3 + shift[1], 0.5 + shift[2])),
                                Vec<3>(1, 0, 0), Vec<3>(0, 1, 0), 0.3, 0.3};
        auto surface = discretize(patch, 3, 3);
        GeodesicSegmentSpec<3> seg{TorusPoint<3>(Vec<3>(0.35 + shift[0] + 0.1 * rng.next_double(),
                                                        0.35 + shift[1] + 0.1 * rng.next_double(),
                                                        0.3 + shift[2])),
                                   Vec<3>(0.1 * rng.next_gaussian(), 0.1 * rng.next_gaussian(), 1.0),
                                   0.39};
        auto curve = discretize(seg, 2);
        auto res = count_curve_surface_t3(curve, surface);

        // oracle: march the segment finely; count sign changes of the plane
        // offset while the crossing point lies inside the patch rectangle
        int oracle = 0;
        Vec<3> u = seg.direction.normalized();
        const int fine = 4000;
        for (int i = 0; i < fine; ++i) {
            TorusPoint<3> p0 = translate(seg.start, Vec<3>(seg.length * i / fine * u));
            TorusPoint<3> p1 = translate(seg.start, Vec<3>(seg.length * (i + 1) / fine * u));
            Vec<3> d0 = torus_diff(p0, patch.origin);
            Vec<3> d1 = torus_diff(p1, patch.origin);
            if ((d0[2] > 0) != (d1[2] > 0)) {
                double t = d0[2] / (d0[2] - d1[2]);
                Vec<3> at = d0 + t * (d1 - d0);
                if (at[0] >= 0 && at[0] <= patch.len_u && at[1] >= 0 && at[1] <= patch.len_v)
                    ++oracle;
            }
        }
        CHECK(res.count == oracle);
    }
}

TEST_CASE("non-complementary dimensions are rejected") {
    PlanePatchSpec<3> patch{TorusPoint<3>(Vec<3>(0.0, 0.0, 0.5)), Vec<3>(1, 0, 0),
                            Vec<3>(0, 1, 0), 0.5, 0.5};
    auto surface = discretize(patch, 4, 4);
    CHECK_THROWS_AS(count_intersections<3>(surface, surface), std::invalid_argument);
}

TEST_CASE("records export to CSV with one row per record") {
    auto a = closed_geodesic(1, 0, Vec<2>(0.03, 0.51));
    auto b = closed_geodesic(0, 1, Vec<2>(0.43, 0.02));
    auto res = count_curve_curve_t2(a, b);
    std::string csv = records_to_csv(res.records);
    CHECK(csv.find("element_v,element_w,sin_angle,degenerate") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + int(res.records.size()));
}
