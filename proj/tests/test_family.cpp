#include <catch2/catch_amalgamated.hpp>

#include <atomic>

#include "kinlab/family.hpp"
#include "kinlab/family_models.hpp"
#include "kinlab/parallel.hpp"

using namespace kinlab;
using Catch::Approx;

namespace {

const FamilySpec<2>& t2_spec() {  // moderate radius for numerical experiments
    static FamilySpec<2> spec = make_grid_family<2>(6, 0.12, 1.4);
    return spec;
}

const FamilySpec<2>& t2_spec_calibrated() {
    static FamilySpec<2> spec = default_family<2>();
    return spec;
}

const FamilySpec<3>& t3_spec_calibrated() {
    static FamilySpec<3> spec = default_family<3>();
    return spec;
}

bool bitwise_equal(const TorusPoint<2>& a, const TorusPoint<2>& b) {
    return a.coords[0] == b.coords[0] && a.coords[1] == b.coords[1];
}

}  // namespace

TEST_CASE("grid atlas validates covering, embedding and connectivity") {
    const auto& spec = t2_spec();
    CHECK(spec.atlas.chart_count() == 36);
    CHECK(spec.atlas.cech_diameter == 3);
    CHECK(spec.num_blocks() == 144);
    CHECK(spec.param_dim() == 432);

    // negative control: drop one chart and the inner sets no longer cover
    ChartAtlas<2> broken = spec.atlas;
    broken.centers.pop_back();
    broken.scales.pop_back();
    CHECK_THROWS_WITH(broken.validate_and_finish(),
                      Catch::Matchers::ContainsSubstring("cover"));

    // embedding bound 4s < 1/2
    CHECK_THROWS_AS(make_grid_atlas<2>(6, 0.13), std::invalid_argument);
}

TEST_CASE("chart-local maps fix the complement of their chart exactly") {
    const auto& spec = t2_spec();
    Vec<2> t(0.4, -0.7);
    Eigen::VectorXd c(1);
    c << 0.9;
    auto v = SkewMatrix<2>::from_coeffs(c);
    int hits = 0;
    for (double x0 = 0.003; x0 < 1.0; x0 += 0.0613)
        for (double x1 = 0.007; x1 < 1.0; x1 += 0.0613)
            for (int chart : {0, 7, 35}) {
                TorusPoint<2> x(Vec<2>(x0, x1));
                if (spec.atlas.in_domain(chart, x)) continue;
                ++hits;
                CHECK(bitwise_equal(chart_local_apply(spec, chart, t, v, x), x));
            }
    CHECK(hits > 100);
}

TEST_CASE("chart-local map near the chart center is an exact translation") {
    const auto& spec = t2_spec();
    int chart = 14;
    TorusPoint<2> x(Vec<2>(spec.atlas.centers[chart] + Vec<2>(0.03, -0.02)));
    SkewMatrix<2> zero_v;

    CHECK(torus_distance(chart_local_apply(spec, chart, Vec<2>(Vec<2>::Zero()), zero_v, x), x) ==
          0.0);

    Vec<2> t(0.35, -0.6);
    TorusPoint<2> moved = chart_local_apply(spec, chart, t, zero_v, x);
    TorusPoint<2> expected = spec.atlas.from_chart(chart, Vec<2>(spec.atlas.to_chart(chart, x) + t));
    CHECK(torus_distance(moved, expected) < 1e-13);
}

TEST_CASE("identity parameters give the identity member") {
    const auto& spec = t2_spec();
    FamilyParams zero(spec.param_dim());
    for (double x0 = 0.05; x0 < 1.0; x0 += 0.13)
        for (double x1 = 0.02; x1 < 1.0; x1 += 0.17) {
            TorusPoint<2> x(Vec<2>(x0, x1));
            CHECK(bitwise_equal(family_apply(spec, zero, x), x));
        }
    TorusPoint<2> x(Vec<2>(0.31, 0.77));
    CHECK((family_jacobian(spec, zero, x) - Mat<2>::Identity()).norm() == 0.0);
}

TEST_CASE("a single nonzero block reduces to its chart-local map") {
    const auto& spec = t2_spec();
    int chart = 9, round = 2;
    int b = round * spec.atlas.chart_count() + chart;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.param_dim());
    Vec<2> t(0.5, 0.2);
    Eigen::VectorXd vc(1);
    vc << -0.6;
    w.segment(b * 3, 2) = t;
    w[b * 3 + 2] = vc[0];

    auto v = SkewMatrix<2>::from_coeffs(vc);
    Philox rng(2024, 0);
    for (int trial = 0; trial < 50; ++trial) {
        TorusPoint<2> x = random_point<2>(rng);
        CHECK(torus_distance(family_apply(spec, FamilyParams(w), x),
                             chart_local_apply(spec, chart, t, v, x)) == 0.0);
    }
}

TEST_CASE("jacobian of a pure rotation block in the inner ball is the rotation") {
    const auto& spec = t2_spec();
    int chart = 21;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.param_dim());
    w[chart * 3 + 2] = 1.1;  // round 0, rotation coefficient
    Eigen::VectorXd vc(1);
    vc << 1.1;
    Mat<2> expected = rotation_exp(SkewMatrix<2>::from_coeffs(vc)).mat;

    TorusPoint<2> x(Vec<2>(spec.atlas.centers[chart] + Vec<2>(0.04, 0.08)));
    REQUIRE(spec.atlas.to_chart(chart, x).norm() < 1.0);
    CHECK((family_jacobian(spec, FamilyParams(w), x) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("blockwise negated reversal is not the inverse (composition order matters)") {
    const auto& spec = t2_spec();
    Philox rng(5150, 0);
    FamilyParams w(rng.ball_point(spec.param_dim(), spec.radius));
    // reversed block order with negated parameters
    const int bd = 3, blocks = spec.num_blocks();
    Eigen::VectorXd rev = Eigen::VectorXd::Zero(spec.param_dim());
    for (int b = 0; b < blocks; ++b)
        rev.segment((blocks - 1 - b) * bd, bd) = -w.w.segment(b * bd, bd);

    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        TorusPoint<2> x = random_point<2>(rng);
        TorusPoint<2> back = family_apply(spec, FamilyParams(rev),
                                          family_apply(spec, w, x));
        worst = std::max(worst, torus_distance(back, x));
    }
    CHECK(worst > 1e-6);
}

TEST_CASE("spatial jacobian agrees with finite differences") {
    const auto& spec = t2_spec();
    Philox rng(31337, 0);
    const double h = 1e-6;
    for (int trial = 0; trial < 200; ++trial) {
        FamilyParams w(rng.ball_point(spec.param_dim(), spec.radius));
        TorusPoint<2> x = random_point<2>(rng);
        Mat<2> jac = family_jacobian(spec, w, x);
        Vec<2> dir(rng.next_gaussian(), rng.next_gaussian());
        dir.normalize();
        Vec<2> fd = torus_diff(family_apply(spec, w, translate(x, Vec<2>(h * dir))),
                               family_apply(spec, w, translate(x, Vec<2>(-h * dir)))) /
                    (2 * h);
        Vec<2> predicted = jac * dir;
        CHECK((predicted - fd).norm() / std::max(1.0, fd.norm()) < 1e-5);
    }
}

TEST_CASE("parameter derivative: fast chained sweep equals literal central differences") {
    const auto& spec = t2_spec();
    Philox rng(777, 0);
    for (int trial = 0; trial < 4; ++trial) {
        FamilyParams w(rng.ball_point(spec.param_dim(), spec.radius));
        TorusPoint<2> x = random_point<2>(rng);
        Eigen::MatrixXd fast = family_param_derivative(spec, w, x);
        Eigen::MatrixXd literal = family_param_derivative_fd(spec, w, x);
        CHECK((fast - literal).cwiseAbs().maxCoeff() < 1e-6);
    }
    // Richardson refinement stays close to the plain estimate
    FamilyParams w(rng.ball_point(spec.param_dim(), spec.radius));
    TorusPoint<2> x = random_point<2>(rng);
    Eigen::MatrixXd plain = family_param_derivative_fd(spec, w, x, false);
    Eigen::MatrixXd refined = family_param_derivative_fd(spec, w, x, true);
    CHECK((plain - refined).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("parameter derivative at identity parameters: chart-frame columns") {
    const auto& spec = t2_spec();
    int chart = 8;
    TorusPoint<2> x(spec.atlas.centers[chart]);  // chart center
    FamilyParams zero(spec.param_dim());
    Eigen::MatrixXd dev = family_param_derivative(spec, zero, x);
    double s = spec.atlas.scales[chart];
    // every round's t-columns for this chart equal the scaled frame
    for (int round = 0; round < spec.rounds(); ++round) {
        int b = round * spec.atlas.chart_count() + chart;
        Eigen::MatrixXd tcols = dev.middleCols(b * 3, 2);
        CHECK((tcols - s * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("parameter derivative has full rank at random samples") {
    const auto& spec = t2_spec_calibrated();
    Philox rng(4242, 0);
    for (int trial = 0; trial < 50; ++trial) {
        FamilyParams w(rng.ball_point(spec.param_dim(), spec.radius));
        TorusPoint<2> x = random_point<2>(rng);
        Eigen::MatrixXd dev = family_param_derivative(spec, w, x);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(dev);
        CHECK(svd.singularValues().minCoeff() >
              1e-13 * std::max(1.0, svd.singularValues().maxCoeff()));
    }
}

TEST_CASE("family members are bijective: blockwise inverse recovers preimages") {
    const auto& spec = t2_spec();
    const int num_w = 100, num_x = 1000;
    struct Partial {
        double worst = 0.0;
    };
    auto partials = chunked_map<Partial>(num_w, 0, [&](std::size_t wi, Partial& acc) {
        Philox rng(substream(99, wi), 0);
        FamilyParams w(rng.ball_point(spec.param_dim(), spec.radius));
        for (int xi = 0; xi < num_x; ++xi) {
            TorusPoint<2> x = random_point<2>(rng);
            TorusPoint<2> back = family_apply_inverse(spec, w, family_apply(spec, w, x));
            acc.worst = std::max(acc.worst, torus_distance(back, x));
        }
    }, 1);
    double worst = 0.0;
    for (const auto& p : partials) worst = std::max(worst, p.worst);
    INFO("worst inverse residual " << worst);
    CHECK(worst <= 1e-7);
}

TEST_CASE("transitivity witnesses on T2") {
    const auto& spec = t2_spec_calibrated();
    Philox rng(864, 0);

    // same plane at the same point: the zero witness
    auto sp = random_plane<2>(rng, random_point<2>(rng), 1);
    FamilyParams w0 = transitivity_witness(spec, sp, sp);
    CHECK(w0.w.norm() == 0.0);

    for (int k : {0, 1}) {
        double worst_pt = 0.0, worst_gap = 0.0, max_norm = 0.0;
        for (int trial = 0; trial < 30; ++trial) {
            auto a = random_plane<2>(rng, random_point<2>(rng), k);
            auto b = random_plane<2>(rng, random_point<2>(rng), k);
            FamilyParams w = transitivity_witness(spec, a, b);
            max_norm = std::max(max_norm, w.w.norm());
            auto [img, dh] = family_apply_jacobian(spec, w, a.base);
            worst_pt = std::max(worst_pt, torus_distance(img, b.base));
            if (k > 0) {
                GrassmannPlane<2> moved;
                moved.base = img;
                moved.basis = orthonormalize<2>(PlaneBasis<2>(dh * a.basis));
                worst_gap = std::max(worst_gap, subspace_gap(moved, b));
            }
        }
        INFO("k=" << k << " worst point err " << worst_pt << " worst gap " << worst_gap);
        CHECK(worst_pt <= 1e-8);
        CHECK(worst_gap <= 1e-6);
        CHECK(max_norm <= spec.radius);
    }

    // antipodal points, random lines
    auto a = random_plane<2>(rng, TorusPoint<2>(Vec<2>(0.1, 0.1)), 1);
    auto b = random_plane<2>(rng, TorusPoint<2>(Vec<2>(0.6, 0.6)), 1);
    FamilyParams w = transitivity_witness(spec, a, b);
    CHECK(torus_distance(family_apply(spec, w, a.base), b.base) <= 1e-8);
}

TEST_CASE("transitivity witnesses on T3") {
    const auto& spec = t3_spec_calibrated();
    Philox rng(865, 0);
    for (int k : {0, 1, 2}) {
        for (int trial = 0; trial < 10; ++trial) {
            auto a = random_plane<3>(rng, random_point<3>(rng), k);
            auto b = random_plane<3>(rng, random_point<3>(rng), k);
            FamilyParams w = transitivity_witness(spec, a, b);
            CHECK(w.w.norm() <= spec.radius);
            auto [img, dh] = family_apply_jacobian(spec, w, a.base);
            CHECK(torus_distance(img, b.base) <= 1e-8);
            if (k > 0) {
                GrassmannPlane<3> moved;
                moved.base = img;
                moved.basis = orthonormalize<3>(PlaneBasis<3>(dh * a.basis));
                CHECK(subspace_gap(moved, b) <= 1e-6);
            }
        }
    }
}

TEST_CASE("witness norm exceeding the radius raises the radius error") {
    FamilySpec<2> tiny = t2_spec_calibrated();
    tiny.radius = 0.05;
    Philox rng(111, 0);
    auto a = random_plane<2>(rng, TorusPoint<2>(Vec<2>(0.05, 0.05)), 1);
    auto b = random_plane<2>(rng, TorusPoint<2>(Vec<2>(0.55, 0.45)), 1);
    try {
        transitivity_witness(tiny, a, b);
        FAIL("expected RadiusTooSmallError");
    } catch (const RadiusTooSmallError& e) {
        CHECK(e.required_radius > tiny.radius);
    }
}

TEST_CASE("family spec validation rejects bad steps and radii") {
    FamilySpec<2> spec = t2_spec();
    spec.radius = -1.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = t2_spec();
    spec.flow_step = 0.5;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = t2_spec();
    spec.fd_step = 1.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
