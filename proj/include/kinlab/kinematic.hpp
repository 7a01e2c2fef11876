#pragma once

// Monte Carlo estimators for the averaged intersection count, the
// normal-Jacobian density ratio it localizes to, and conditional
// fiber integrals over the set of family members carrying one point
// (and tangent plane) onto another.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kinlab/errors.hpp"
#include "kinlab/family_models.hpp"
#include "kinlab/intersect.hpp"
#include "kinlab/parallel.hpp"
#include "kinlab/rng.hpp"
#include "kinlab/submanifold.hpp"

namespace kinlab {

struct EstimateReport {
    double estimate = 0.0;
    double std_error = 0.0;
    std::int64_t num_samples = 0;
    std::uint64_t seed = 0;
    double degenerate_fraction = 0.0;
    std::string config_hash;
    bool unreliable = false;  // degenerate fraction above 5%: discretization suspect

    // extra diagnostics (not all estimators fill all fields)
    double mean_raw = 0.0;       // unscaled per-sample mean
    double log_scale = 0.0;      // log of the measure normalization
    double acceptance_rate = 1.0;
};

struct RatioEntry {
    int pair_id = 0;
    double ratio = 0.0;  // estimate / (vol V * vol W)
    double estimate = 0.0;
    double std_error = 0.0;
    bool failed = false;
    std::string error;
};

struct RatioReport {
    std::vector<RatioEntry> ratios;
    double c_emp = 1.0;  // max(max ratio, 1 / min ratio), at least 1
};

// Per-sample outcomes in index order, for CSV export and convergence traces.
struct SampleLog {
    std::vector<int> counts;
    std::vector<std::uint8_t> degenerate;
};

namespace detail {

struct MomentPartial {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::int64_t degenerate = 0;
    std::int64_t accepted = 0;
    std::vector<int> counts;
    std::vector<std::uint8_t> flags;
};

// estimate = scale * mean computed through logs so that astronomically
// large or small measure normalizations only fail at the final cast.
inline double scaled(double log_scale, double value) {
    if (value == 0.0) return 0.0;
    return std::exp(log_scale + std::log(value));
}

}  // namespace detail

// Average geometric intersection count of h(V) with W over the family,
// normalized by the parameter-space volume:
//   estimate = Leb(params) * mean_i #( h_i(V) cap W ),  h_i sampled uniformly.
// Per-sample randomness is keyed by (seed, sample index); the result is
// bit-identical for any thread count.
template <int N, class Family>
EstimateReport mc_total_intersections(const Family& family, const DiscreteSubmanifold<N>& v,
                                      const DiscreteSubmanifold<N>& w, std::int64_t num_samples,
                                      std::uint64_t seed, int threads = 0,
                                      SampleLog* log = nullptr) {
    if (num_samples < 1) throw std::invalid_argument("mc_total_intersections: num_samples >= 1");
    if (v.dim + w.dim != N)
        throw std::invalid_argument("mc_total_intersections: dimensions must be complementary");

    const bool want_log = log != nullptr;
    auto partials = chunked_map<detail::MomentPartial>(
        static_cast<std::size_t>(num_samples), threads,
        [&](std::size_t i, detail::MomentPartial& acc) {
            Philox rng(seed, i);
            FamilyParams params = family.sample(rng);
            DiscreteSubmanifold<N> image = pushforward(v, family, params);
            IntersectionResult<N> res = count_intersections(image, w);
            double count = static_cast<double>(res.count);
            acc.sum += count;
            acc.sum_sq += count * count;
            if (res.any_degenerate()) acc.degenerate += 1;
            if (want_log) {
                acc.counts.push_back(res.count);
                acc.flags.push_back(res.any_degenerate() ? 1 : 0);
            }
        });

    double sum = 0.0, sum_sq = 0.0;
    std::int64_t degenerate = 0;
    for (auto& p : partials) {
        sum += p.sum;
        sum_sq += p.sum_sq;
        degenerate += p.degenerate;
        if (want_log) {
            log->counts.insert(log->counts.end(), p.counts.begin(), p.counts.end());
            log->degenerate.insert(log->degenerate.end(), p.flags.begin(), p.flags.end());
        }
    }

    const double m = static_cast<double>(num_samples);
    double mean = sum / m;
    double var = std::max(0.0, sum_sq / m - mean * mean);
    double std_err_raw = std::sqrt(var / m);

    EstimateReport rep;
    rep.num_samples = num_samples;
    rep.seed = seed;
    rep.degenerate_fraction = static_cast<double>(degenerate) / m;
    rep.unreliable = rep.degenerate_fraction > 0.05;
    rep.mean_raw = mean;
    rep.log_scale = family.log_param_volume();
    rep.estimate = detail::scaled(rep.log_scale, mean);
    rep.std_error = detail::scaled(rep.log_scale, std_err_raw);
    if (!std::isfinite(rep.estimate) || !std::isfinite(rep.std_error))
        throw std::runtime_error("mc_total_intersections: non-finite estimate");
    return rep;
}

// ---------------------------------------------------------------------------
// The translation action on T^2: closed form and Monte Carlo harness.

inline double translation_family_oracle(double theta, double len_i, double len_j) {
    return std::abs(std::sin(theta)) * len_i * len_j;
}

inline EstimateReport mc_translation_family(const DiscreteSubmanifold<2>& i_mesh,
                                            const DiscreteSubmanifold<2>& j_mesh,
                                            std::int64_t num_samples, std::uint64_t seed,
                                            int threads = 0) {
    return mc_total_intersections<2>(TranslationFamily{}, i_mesh, j_mesh, num_samples, seed,
                                     threads);
}

inline EstimateReport mc_translation_family(const GeodesicSegmentSpec<2>& i_spec,
                                            const GeodesicSegmentSpec<2>& j_spec,
                                            std::int64_t num_samples, std::uint64_t seed,
                                            int threads = 0) {
    auto res_for = [](double len) { return std::max(2, int(std::ceil(len / 0.2))); };
    return mc_translation_family(discretize(i_spec, res_for(i_spec.length)),
                                 discretize(j_spec, res_for(j_spec.length)), num_samples, seed,
                                 threads);
}

// ---------------------------------------------------------------------------
// Pointwise density ratio NJ(pi_1)/NJ(pi_2) of the two projections from the
// intersection constraint manifold, by two independent routes.

// Closed form: |det[-dh B_V | B_W]| / NJ(parameter derivative).
template <int N>
double nj_ratio_formula(const FamilySpec<N>& spec, const FamilyParams& w, const TorusPoint<N>& p,
                        const PlaneBasis<N>& basis_v, const PlaneBasis<N>& basis_w) {
    Mat<N> dh = family_jacobian(spec, w, p);
    Eigen::MatrixXd dev = family_param_derivative(spec, w, p);
    double nj_dev = normal_jacobian(dev);
    if (nj_dev < 1e-12)
        throw SubmersionFailureError("nj_ratio_formula: parameter derivative not surjective");
    return std::abs(transversality_det<N>(dh, basis_v, basis_w)) / nj_dev;
}

// Direct route: realize the solution space
//   E = { (hdot, a, b) : B_W b - dh B_V a = Dev hdot }
// inside R^(P+n) and take the ratio of the normal Jacobians of its two
// coordinate projections. For moderate parameter counts E is materialized as
// an explicit orthonormal kernel basis. For large ones the same quantities
// come from an orthonormal basis of the n-dimensional orthogonal complement
// (the constraint row space, thin QR): the principal angles of a subspace
// and of its complement against the two coordinate planes coincide, so the
// singular values c_i of the complement's last-n-coordinate block give
// NJ(Pi_1|_E) = prod c_i and NJ(Pi_2|_E) = prod sqrt(1 - c_i^2).
template <int N>
double nj_ratio_direct(const FamilySpec<N>& spec, const FamilyParams& w, const TorusPoint<N>& p,
                       const PlaneBasis<N>& basis_v, const PlaneBasis<N>& basis_w,
                       int explicit_basis_limit = 2048) {
    const int k = static_cast<int>(basis_v.cols());
    if (k + static_cast<int>(basis_w.cols()) != N)
        throw std::invalid_argument("nj_ratio_direct: plane dimensions must be complementary");
    Mat<N> dh = family_jacobian(spec, w, p);
    Eigen::MatrixXd dev = family_param_derivative(spec, w, p);
    const int np = static_cast<int>(dev.cols());

    Eigen::MatrixXd constraint(N, np + N);
    constraint.leftCols(np) = -dev;
    if (k > 0) constraint.middleCols(np, k) = -(dh * basis_v);
    constraint.rightCols(N - k) = basis_w;

    double nj1_sq = 1.0, nj2_sq = 1.0;
    if (np <= explicit_basis_limit) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraint.transpose());
        Eigen::MatrixXd q = qr.householderQ();
        Eigen::MatrixXd kernel = q.rightCols(np);  // orthonormal basis of E
        Eigen::MatrixXd a1 = kernel.topRows(np);
        Eigen::MatrixXd a2 = kernel.bottomRows(N);
        nj1_sq = std::pow(a1.determinant(), 2);
        nj2_sq = (a2 * a2.transpose()).determinant();
    } else {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraint.transpose());
        Eigen::MatrixXd complement =
            qr.householderQ() * Eigen::MatrixXd::Identity(np + N, N);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(complement.bottomRows(N)));
        for (int i = 0; i < N; ++i) {
            double c = std::min(1.0, svd.singularValues()[i]);
            nj1_sq *= c * c;
            nj2_sq *= std::max(0.0, 1.0 - c * c);
        }
    }
    if (!(nj2_sq > 1e-24))
        throw std::runtime_error("nj_ratio_direct: plane projection lost rank on E");
    if (nj1_sq < 0.0) nj1_sq = 0.0;
    return std::sqrt(nj1_sq / nj2_sq);
}

// ---------------------------------------------------------------------------
// Conditional fiber integrals over { h : h(p) in B_eps(q) }, rescaled by the
// target ball volume. Integrand choices:
//   Eta      -- NJ ratio density; the conditional weight reduces to
//               |det[-dh B_V | B_W]| exactly,
//   SinAngle -- angle defect sin(dh(plane_p), plane_q) times NJ(dev),
//   One      -- fiber volume (weight NJ(dev)).
enum class FiberIntegrand { Eta, SinAngle, One };

template <int N, class Family>
EstimateReport fiber_integral_estimate(const Family& family, const GrassmannPlane<N>& sigma_p,
                                       const GrassmannPlane<N>& sigma_q, double epsilon,
                                       std::int64_t num_samples, std::uint64_t seed,
                                       int threads = 0,
                                       FiberIntegrand integrand = FiberIntegrand::Eta) {
    if (!(epsilon > 0.0) || epsilon >= 0.5)
        throw std::invalid_argument("fiber_integral_estimate: need 0 < epsilon < 1/2");
    if (sigma_p.dim() + sigma_q.dim() != N)
        throw std::invalid_argument("fiber_integral_estimate: planes must be complementary");

    auto partials = chunked_map<detail::MomentPartial>(
        static_cast<std::size_t>(num_samples), threads,
        [&](std::size_t i, detail::MomentPartial& acc) {
            Philox rng(seed, i);
            FamilyParams params = family.sample(rng);
            TorusPoint<N> image = family.apply(params, sigma_p.base);
            if (torus_distance(image, sigma_q.base) >= epsilon) return;
            acc.accepted += 1;
            double weight = 0.0;
            Mat<N> dh = family.jacobian(params, sigma_p.base);
            switch (integrand) {
                case FiberIntegrand::Eta:
                    weight = std::abs(transversality_det<N>(dh, sigma_p.basis, sigma_q.basis));
                    break;
                case FiberIntegrand::SinAngle: {
                    GrassmannPlane<N> moved;
                    moved.base = image;
                    moved.basis = orthonormalize<N>(PlaneBasis<N>(dh * sigma_p.basis));
                    weight = sin_angle(moved, sigma_q) *
                             normal_jacobian(family.param_derivative(params, sigma_p.base));
                    break;
                }
                case FiberIntegrand::One:
                    weight = normal_jacobian(family.param_derivative(params, sigma_p.base));
                    break;
            }
            acc.sum += weight;
            acc.sum_sq += weight * weight;
            if (weight < kTauDegenerate) acc.degenerate += 1;
        });

    double sum = 0.0, sum_sq = 0.0;
    std::int64_t accepted = 0, degenerate = 0;
    for (const auto& p : partials) {
        sum += p.sum;
        sum_sq += p.sum_sq;
        accepted += p.accepted;
        degenerate += p.degenerate;
    }
    const double m = static_cast<double>(num_samples);
    if (accepted == 0) throw InsufficientSamplesError(0.0);

    double mean = sum / m;
    double var = std::max(0.0, sum_sq / m - mean * mean);
    EstimateReport rep;
    rep.num_samples = num_samples;
    rep.seed = seed;
    rep.acceptance_rate = static_cast<double>(accepted) / m;
    rep.degenerate_fraction = static_cast<double>(degenerate) / m;
    rep.unreliable = accepted > 0 && static_cast<double>(degenerate) / accepted > 0.05;
    rep.mean_raw = mean;
    rep.log_scale = family.log_param_volume() - log_ball_volume(N, epsilon);
    rep.estimate = detail::scaled(rep.log_scale, mean);
    rep.std_error = detail::scaled(rep.log_scale, std::sqrt(var / m));
    if (!std::isfinite(rep.estimate))
        throw std::runtime_error("fiber_integral_estimate: non-finite estimate");
    return rep;
}

// ---------------------------------------------------------------------------
// Ratio table over submanifold pairs: estimate / (vol V * vol W) per pair and
// the empirical two-sided constant. Per-pair estimator failures are recorded
// without aborting the batch.
template <int N, class Family>
RatioReport empirical_C(const Family& family,
                        const std::vector<std::pair<DiscreteSubmanifold<N>, DiscreteSubmanifold<N>>>& pairs,
                        std::int64_t num_samples, std::uint64_t seed, int threads = 0) {
    if (pairs.size() < 2) throw std::invalid_argument("empirical_C: need at least 2 pairs");
    RatioReport report;
    double max_ratio = 0.0;
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        RatioEntry entry;
        entry.pair_id = static_cast<int>(i);
        try {
            EstimateReport est =
                mc_total_intersections<N>(family, pairs[i].first, pairs[i].second, num_samples,
                                          substream(seed, i), threads);
            double volume_product = pairs[i].first.total_volume * pairs[i].second.total_volume;
            entry.estimate = est.estimate;
            entry.std_error = est.std_error;
            entry.ratio = detail::scaled(est.log_scale + std::log(1.0 / volume_product),
                                         est.mean_raw);
            if (entry.ratio > 0.0) {
                max_ratio = std::max(max_ratio, entry.ratio);
                min_ratio = std::min(min_ratio, entry.ratio);
            }
        } catch (const std::exception& e) {
            entry.failed = true;
            entry.error = e.what();
        }
        report.ratios.push_back(std::move(entry));
    }
    report.c_emp = 1.0;
    if (max_ratio > 0.0) report.c_emp = std::max(report.c_emp, max_ratio);
    if (std::isfinite(min_ratio) && min_ratio > 0.0)
        report.c_emp = std::max(report.c_emp, 1.0 / min_ratio);
    return report;
}

}  // namespace kinlab
