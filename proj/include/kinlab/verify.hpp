#pragma once

// Named property suites: each one exercises a structural guarantee of the
// construction over randomized trials and reports (claim id, trials,
// failures, worst error). The batch passes iff every suite passes. Suites
// derive their own sub-streams from the batch seed, and the suite order is
// fixed so reports diff cleanly.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "kinlab/family.hpp"
#include "kinlab/kinematic.hpp"
#include "kinlab/rng.hpp"

namespace kinlab {

struct SuiteReport {
    std::string claim;
    int trials = 0;
    int failures = 0;
    double worst_error = 0.0;
    std::vector<std::string> notes;

    bool passed() const { return failures == 0; }

    void check(bool ok, double err) {
        trials += 1;
        if (!ok) failures += 1;
        if (std::isfinite(err)) worst_error = std::max(worst_error, err);
    }
};

// Submersivity of the evaluation map in the parameters: full-rank parameter
// derivative at random (w, x), plus the triangular translation-block
// structure at w = 0 (diagonal entries scale * bump(|y|), vanishing strict
// upper part).
template <int N>
SuiteReport suite_evaluation_submersion(const FamilySpec<N>& spec, int trials,
                                        std::uint64_t seed) {
    SuiteReport report;
    report.claim = "evaluation-submersion";
    Philox rng(substream(seed, 1), 0);
    double smin_min = std::numeric_limits<double>::infinity();
    double smin_sum = 0.0;
    for (int t = 0; t < trials; ++t) {
        FamilyParams w(rng.ball_point(spec.param_dim(), spec.radius));
        TorusPoint<N> x = random_point<N>(rng);
        Eigen::MatrixXd dev = family_param_derivative(spec, w, x);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(dev);
        double smin = svd.singularValues().minCoeff();
        double smax = svd.singularValues().maxCoeff();
        smin_min = std::min(smin_min, smin);
        smin_sum += smin;
        report.check(smin > 1e-13 * std::max(1.0, smax), 0.0);
    }
    report.notes.push_back("min singular value: min=" + std::to_string(smin_min) +
                           " mean=" + std::to_string(smin_sum / std::max(1, trials)));

    // structural check at w = 0 in the first inner chart of a random point
    for (int t = 0; t < std::min(trials, 8); ++t) {
        TorusPoint<N> x = random_point<N>(rng);
        int chart = spec.atlas.first_inner_chart(x);
        FamilyParams zero(spec.param_dim());
        Eigen::MatrixXd dev = family_param_derivative(spec, zero, x);
        int bd = FamilySpec<N>::block_dim();
        Eigen::MatrixXd tblock = dev.middleCols(chart * bd, N);  // round 0, chart, t-part
        double y_norm = spec.atlas.to_chart(chart, x).norm();
        double expected = spec.atlas.scales[chart] * BumpProfile::eval(y_norm);
        double err = 0.0;
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c) {
                if (c > r) err = std::max(err, std::abs(tblock(r, c)));  // strict upper
                if (c == r) err = std::max(err, std::abs(tblock(r, c) - expected));
            }
        report.check(err < 1e-6, err);
    }
    return report;
}

// Constructive transitivity on tangent planes: witnesses exist within the
// calibrated radius and verify numerically.
template <int N>
SuiteReport suite_plane_transitivity(const FamilySpec<N>& spec, int trials, std::uint64_t seed) {
    SuiteReport report;
    report.claim = "plane-transitivity";
    Philox rng(substream(seed, 2), 0);
    double max_norm = 0.0;
    for (int k = 0; k < N; ++k) {
        for (int t = 0; t < trials; ++t) {
            auto sp = random_plane<N>(rng, random_point<N>(rng), k);
            auto sq = random_plane<N>(rng, random_point<N>(rng), k);
            double err = std::numeric_limits<double>::infinity();
            bool ok = false;
            try {
                FamilyParams w = transitivity_witness(spec, sp, sq);
                max_norm = std::max(max_norm, w.w.norm());
                auto [image, dh] = family_apply_jacobian(spec, w, sp.base);
                double point_err = torus_distance(image, sq.base);
                double plane_err = 0.0;
                if (k > 0) {
                    GrassmannPlane<N> moved;
                    moved.base = image;
                    moved.basis = orthonormalize<N>(PlaneBasis<N>(dh * sp.basis));
                    plane_err = subspace_gap(moved, sq);
                }
                err = std::max(point_err, plane_err);
                ok = point_err <= 1e-8 && plane_err <= 1e-6 && w.w.norm() <= spec.radius;
            } catch (const std::exception&) {
                ok = false;
            }
            report.check(ok, err);
        }
    }
    report.notes.push_back("max witness norm " + std::to_string(max_norm) + " of radius " +
                           std::to_string(spec.radius));
    return report;
}

// The tangent space of the solution manifold: along any differentiable curve
// s -> (w(s), p(s)) the image velocity satisfies
//   qdot = (parameter derivative) wdot + dh pdot.
template <int N>
SuiteReport suite_solution_tangent_constraint(const FamilySpec<N>& spec, int trials,
                                              std::uint64_t seed) {
    SuiteReport report;
    report.claim = "solution-tangent-constraint";
    Philox rng(substream(seed, 3), 0);
    for (int t = 0; t < trials; ++t) {
        FamilyParams w(rng.ball_point(spec.param_dim(), 0.9 * spec.radius));
        TorusPoint<N> p = random_point<N>(rng);
        Eigen::VectorXd dw = rng.gaussian_vector(spec.param_dim());
        dw.normalize();
        Vec<N> dp;
        for (int c = 0; c < N; ++c) dp[c] = rng.next_gaussian();
        dp.normalize();

        Mat<N> dh_mat = family_jacobian(spec, w, p);
        Eigen::MatrixXd dev = family_param_derivative(spec, w, p);
        Vec<N> predicted = dev * dw + dh_mat * dp;
        // step scaled to the local velocity so the truncation error stays
        // below the tolerance even for strongly expanding members
        double h = 1e-5 / (1.0 + predicted.norm());
        auto eval = [&](double s) {
            FamilyParams ws(Eigen::VectorXd(w.w + s * dw));
            TorusPoint<N> ps = translate(p, Vec<N>(s * dp));
            return family_apply(spec, ws, ps);
        };
        Vec<N> qdot = torus_diff(eval(h), eval(-h)) / (2.0 * h);
        double err = (qdot - predicted).norm() / (1.0 + qdot.norm());
        report.check(err <= 1e-5, err);
    }
    return report;
}

// Graphs of linear maps: for S = graph(G) with the product metric,
// det(G G^T)^(-1/2) equals |det(pi_1|_S)| / NJ(pi_2|_S).
inline SuiteReport suite_graph_projection_identity(int trials, std::uint64_t seed) {
    SuiteReport report;
    report.claim = "graph-projection-identity";
    Philox rng(substream(seed, 4), 0);
    for (int t = 0; t < trials; ++t) {
        int a = 1 + static_cast<int>(rng.next_double() * 8);  // domain dim <= 8
        int b = 1 + static_cast<int>(rng.next_double() * a);  // codomain dim <= a
        a = std::min(a, 8);
        b = std::min(b, a);
        Eigen::MatrixXd g(b, a);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < a; ++j) g(i, j) = rng.next_gaussian();

        double lhs = 1.0 / std::sqrt((g * g.transpose()).determinant());

        Eigen::MatrixXd graph(a + b, a);
        graph.topRows(a) = Eigen::MatrixXd::Identity(a, a);
        graph.bottomRows(b) = g;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(graph);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a + b, a);
        double det1 = q.topRows(a).determinant();
        double nj2 = normal_jacobian(q.bottomRows(b));
        double rhs = std::abs(det1) / nj2;

        double rel = std::abs(lhs - rhs) / std::abs(lhs);
        report.check(rel <= 1e-9, rel);
    }
    return report;
}

// Agreement of the closed-form density ratio with the direct solution-space
// computation.
template <int N>
SuiteReport suite_density_ratio_agreement(const FamilySpec<N>& spec, int trials,
                                          std::uint64_t seed, double rel_tol = 1e-6) {
    SuiteReport report;
    report.claim = "density-ratio-agreement";
    Philox rng(substream(seed, 5), 0);
    for (int t = 0; t < trials; ++t) {
        int k = 1 + t % (N - 1);
        FamilyParams w(rng.ball_point(spec.param_dim(), spec.radius));
        TorusPoint<N> p = random_point<N>(rng);
        TorusPoint<N> q = family_apply(spec, w, p);
        auto plane_v = random_plane<N>(rng, p, k);
        auto plane_w = random_plane<N>(rng, q, N - k);
        double r1 = nj_ratio_formula(spec, w, p, plane_v.basis, plane_w.basis);
        double r2 = nj_ratio_direct(spec, w, p, plane_v.basis, plane_w.basis);
        double rel = std::abs(r1 - r2) / std::max(1e-300, std::abs(r2));
        report.check(rel <= rel_tol, rel);
    }
    return report;
}

}  // namespace kinlab
