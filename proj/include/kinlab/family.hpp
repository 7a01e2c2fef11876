#pragma once

// The compactly generated diffeomorphism family on the torus. An atlas of
// affine charts x -> (x - c_i)/s_i onto B(0,4) carries, per chart, a local
// map  psi_i(t,v) = (cut-off translations along each axis) o (cut-off
// rotation), conjugated into the torus and extended by the identity. One
// family member is the composition of one such map per chart per round,
// with (Cech diameter + 1) rounds. Parameters live in a euclidean ball of
// radius R; the block layout is round-major, chart-minor, translation
// coordinates first, then the strictly-upper entries of the rotation
// generator.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinlab/errors.hpp"
#include "kinlab/flows.hpp"
#include "kinlab/linalg.hpp"
#include "kinlab/rng.hpp"
#include "kinlab/torus.hpp"

namespace kinlab {

template <int N>
struct ChartAtlas {
    std::vector<Vec<N>> centers;
    std::vector<double> scales;
    std::vector<std::vector<int>> adjacency;  // inner-set overlap graph
    int cech_diameter = 0;

    int chart_count() const { return static_cast<int>(centers.size()); }

    // Chart coordinates of x; the chart is usable only when |y| < 4.
    Vec<N> to_chart(int i, const TorusPoint<N>& x) const {
        Vec<N> d;
        for (int c = 0; c < N; ++c) d[c] = wrap_signed(x.coords[c] - centers[i][c]);
        return d / scales[i];
    }

    TorusPoint<N> from_chart(int i, const Vec<N>& y) const {
        return TorusPoint<N>(Vec<N>(centers[i] + scales[i] * y));
    }

    bool in_domain(int i, const TorusPoint<N>& x) const {
        return to_chart(i, x).norm() < 4.0;
    }

    bool in_inner(int i, const TorusPoint<N>& x) const {
        return to_chart(i, x).norm() < 1.0;
    }

    int first_inner_chart(const TorusPoint<N>& x) const {
        for (int i = 0; i < chart_count(); ++i)
            if (in_inner(i, x)) return i;
        return -1;
    }

    // Shortest overlap-graph path between charts (BFS).
    std::vector<int> chart_path(int from, int to) const {
        std::vector<int> prev(chart_count(), -1);
        std::deque<int> queue{from};
        std::vector<bool> seen(chart_count(), false);
        seen[from] = true;
        while (!queue.empty()) {
            int u = queue.front();
            queue.pop_front();
            if (u == to) break;
            for (int v : adjacency[u])
                if (!seen[v]) {
                    seen[v] = true;
                    prev[v] = u;
                    queue.push_back(v);
                }
        }
        if (!seen[to]) throw std::runtime_error("chart_path: atlas overlap graph disconnected");
        std::vector<int> path{to};
        while (path.back() != from) path.push_back(prev[path.back()]);
        std::reverse(path.begin(), path.end());
        return path;
    }

    // Checks embedding, inner-set covering (dense grid), overlap-graph
    // connectivity; fills adjacency and the Cech diameter.
    void validate_and_finish(int grid_per_axis = 0) {
        const int L = chart_count();
        if (L == 0 || scales.size() != centers.size())
            throw std::invalid_argument("atlas: empty or inconsistent chart lists");
        for (double s : scales)
            if (!(s > 0.0) || !(4.0 * s < 0.5))
                throw std::invalid_argument("atlas: chart scale must satisfy 0 < 4s < 1/2");

        if (grid_per_axis == 0) grid_per_axis = N == 2 ? 256 : 96;
        check_covering(grid_per_axis);

        adjacency.assign(L, {});
        for (int i = 0; i < L; ++i)
            for (int j = i + 1; j < L; ++j) {
                Vec<N> d;
                for (int c = 0; c < N; ++c) d[c] = wrap_signed(centers[i][c] - centers[j][c]);
                if (d.norm() < scales[i] + scales[j]) {
                    adjacency[i].push_back(j);
                    adjacency[j].push_back(i);
                }
            }

        cech_diameter = 0;
        for (int i = 0; i < L; ++i) {
            std::vector<int> dist(L, -1);
            std::deque<int> queue{i};
            dist[i] = 0;
            while (!queue.empty()) {
                int u = queue.front();
                queue.pop_front();
                for (int v : adjacency[u])
                    if (dist[v] < 0) {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
            }
            for (int j = 0; j < L; ++j) {
                if (dist[j] < 0)
                    throw std::invalid_argument("atlas: inner-set overlap graph disconnected");
                cech_diameter = std::max(cech_diameter, dist[j]);
            }
        }
    }

private:
    void check_covering(int grid) const {
        const int L = chart_count();
        std::vector<std::ptrdiff_t> idx(N, 0);
        std::ptrdiff_t total = 1;
        for (int c = 0; c < N; ++c) total *= grid;
        for (std::ptrdiff_t flat = 0; flat < total; ++flat) {
            TorusPoint<N> x;
            std::ptrdiff_t rest = flat;
            for (int c = 0; c < N; ++c) {
                x.coords[c] = static_cast<double>(rest % grid) / grid;
                rest /= grid;
            }
            bool covered = false;
            for (int i = 0; i < L && !covered; ++i) covered = in_inner(i, x);
            if (!covered)
                throw std::invalid_argument(
                    "atlas: inner sets fail to cover the torus (uncovered grid point)");
        }
    }
};

// Square-grid atlas with uniform scale. Default geometry: 6x6 charts at
// scale 0.12 on T^2, 7x7x7 at scale 0.1245 on T^3 (the tightest grids whose
// inner balls cover while the chart domains still embed).
template <int N>
ChartAtlas<N> make_grid_atlas(int per_axis, double scale) {
    ChartAtlas<N> atlas;
    std::ptrdiff_t total = 1;
    for (int c = 0; c < N; ++c) total *= per_axis;
    for (std::ptrdiff_t flat = 0; flat < total; ++flat) {
        Vec<N> center;
        std::ptrdiff_t rest = flat;
        for (int c = 0; c < N; ++c) {
            center[c] = static_cast<double>(rest % per_axis) / per_axis;
            rest /= per_axis;
        }
        atlas.centers.push_back(center);
        atlas.scales.push_back(scale);
    }
    atlas.validate_and_finish();
    return atlas;
}

constexpr int default_grid_per_axis(int n) { return n == 2 ? 6 : 7; }
constexpr double default_chart_scale(int n) { return n == 2 ? 0.12 : 0.1245; }

template <int N>
struct FamilySpec {
    ChartAtlas<N> atlas;
    double radius = 1.0;       // parameter-ball radius R
    double flow_step = 1e-2;   // RK4 step for the cut-off translation flows
    double fd_step = 1e-5;     // finite-difference step for derivatives

    static constexpr int dim = N;
    static constexpr int block_dim() { return N + N * (N - 1) / 2; }
    int rounds() const { return atlas.cech_diameter + 1; }
    int num_blocks() const { return rounds() * atlas.chart_count(); }
    int param_dim() const { return block_dim() * num_blocks(); }

    void validate() const {
        if (!(radius > 0.0)) throw std::invalid_argument("family: radius must be positive");
        if (!(flow_step > 0.0) || flow_step > 0.1)
            throw std::invalid_argument("family: flow_step must lie in (0, 0.1]");
        if (!(fd_step > 0.0) || fd_step > 1e-2)
            throw std::invalid_argument("family: fd_step must lie in (0, 1e-2]");
    }
};

struct FamilyParams {
    Eigen::VectorXd w;
    explicit FamilyParams(Eigen::VectorXd values) : w(std::move(values)) {}
    explicit FamilyParams(int n) : w(Eigen::VectorXd::Zero(n)) {}
};

namespace detail {

template <int N>
struct BlockRef {
    int chart;
    Eigen::Map<const Vec<N>> t;
    SkewMatrix<N> v;
    bool zero;
};

template <int N>
BlockRef<N> decode_block(const FamilySpec<N>& spec, const Eigen::VectorXd& w, int block) {
    const int bd = FamilySpec<N>::block_dim();
    const double* base = w.data() + static_cast<std::ptrdiff_t>(block) * bd;
    bool zero = true;
    for (int i = 0; i < bd; ++i)
        if (base[i] != 0.0) {
            zero = false;
            break;
        }
    BlockRef<N> ref{block % spec.atlas.chart_count(), Eigen::Map<const Vec<N>>(base),
                    SkewMatrix<N>(), zero};
    if (!zero)
        ref.v = SkewMatrix<N>::from_coeffs(
            Eigen::Map<const Eigen::VectorXd>(base + N, bd - N));
    return ref;
}

// One chart-local map applied in chart coordinates: rotation first, then the
// axis flows in index order.
template <int N>
Vec<N> block_apply_chart(const FamilySpec<N>& spec, const Vec<N>& t, const SkewMatrix<N>& v,
                         const Vec<N>& y) {
    Vec<N> z = local_rotation_apply(v, y);
    for (int axis = 0; axis < N; ++axis)
        z = translation_flow(axis, t[axis], z, spec.flow_step);
    return z;
}

template <int N>
PointWithJacobian<N> block_apply_chart_jacobian(const FamilySpec<N>& spec, const Vec<N>& t,
                                                const SkewMatrix<N>& v, const Vec<N>& y) {
    PointWithJacobian<N> acc = local_rotation_apply_jacobian(v, y);
    for (int axis = 0; axis < N; ++axis) {
        PointWithJacobian<N> step =
            translation_flow_jacobian(axis, t[axis], acc.point, spec.flow_step);
        acc.point = step.point;
        acc.jacobian = step.jacobian * acc.jacobian;
    }
    return acc;
}

}  // namespace detail

// psi_i(t, v) on the torus: identity outside the chart domain (bitwise, the
// support of the chart-local map lies in the closed 3-ball, strictly inside
// the chart image B(0,4)).
template <int N>
TorusPoint<N> chart_local_apply(const FamilySpec<N>& spec, int chart, const Vec<N>& t,
                                const SkewMatrix<N>& v, const TorusPoint<N>& x) {
    Vec<N> y = spec.atlas.to_chart(chart, x);
    if (y.norm() >= 3.0) return x;
    return spec.atlas.from_chart(chart, detail::block_apply_chart(spec, t, v, y));
}

template <int N>
std::pair<TorusPoint<N>, Mat<N>> chart_local_apply_jacobian(const FamilySpec<N>& spec, int chart,
                                                            const Vec<N>& t,
                                                            const SkewMatrix<N>& v,
                                                            const TorusPoint<N>& x) {
    Vec<N> y = spec.atlas.to_chart(chart, x);
    if (y.norm() >= 3.0) return {x, Mat<N>::Identity()};
    // uniform affine charts: the conjugated differential is the chart-space
    // differential itself
    auto res = detail::block_apply_chart_jacobian(spec, t, v, y);
    return {spec.atlas.from_chart(chart, res.point), res.jacobian};
}

template <int N>
TorusPoint<N> family_apply(const FamilySpec<N>& spec, const FamilyParams& params,
                           const TorusPoint<N>& x) {
    TorusPoint<N> cur = x;
    const int blocks = spec.num_blocks();
    for (int b = 0; b < blocks; ++b) {
        auto ref = detail::decode_block(spec, params.w, b);
        if (ref.zero) continue;
        cur = chart_local_apply(spec, ref.chart, Vec<N>(ref.t), ref.v, cur);
    }
    return cur;
}

template <int N>
std::pair<TorusPoint<N>, Mat<N>> family_apply_jacobian(const FamilySpec<N>& spec,
                                                       const FamilyParams& params,
                                                       const TorusPoint<N>& x) {
    TorusPoint<N> cur = x;
    Mat<N> jac = Mat<N>::Identity();
    const int blocks = spec.num_blocks();
    for (int b = 0; b < blocks; ++b) {
        auto ref = detail::decode_block(spec, params.w, b);
        if (ref.zero) continue;
        auto [next, dblock] = chart_local_apply_jacobian(spec, ref.chart, Vec<N>(ref.t), ref.v, cur);
        cur = next;
        jac = dblock * jac;
    }
    return {cur, jac};
}

template <int N>
Mat<N> family_jacobian(const FamilySpec<N>& spec, const FamilyParams& params,
                       const TorusPoint<N>& x) {
    return family_apply_jacobian(spec, params, x).second;
}

// Exact blockwise inverse: each chart-local map inverts as
// L(-v) o (reversed, negated axis flows), applied across blocks in reverse
// order. Used to probe bijectivity of family members.
template <int N>
TorusPoint<N> family_apply_inverse(const FamilySpec<N>& spec, const FamilyParams& params,
                                   const TorusPoint<N>& x) {
    TorusPoint<N> cur = x;
    for (int b = spec.num_blocks() - 1; b >= 0; --b) {
        auto ref = detail::decode_block(spec, params.w, b);
        if (ref.zero) continue;
        Vec<N> y = spec.atlas.to_chart(ref.chart, cur);
        if (y.norm() >= 3.0) continue;
        for (int axis = N - 1; axis >= 0; --axis)
            y = translation_flow(axis, -ref.t[axis], y, spec.flow_step);
        SkewMatrix<N> neg;
        neg.mat = -ref.v.mat;
        y = local_rotation_apply(neg, y);
        cur = spec.atlas.from_chart(ref.chart, y);
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Derivative with respect to the parameters: the n x N matrix of
// d/dw [ w -> Psi(w)(x) ].

// Literal method: central finite differences per parameter coordinate
// (2N full evaluations), optionally with one Richardson refinement.
template <int N>
Eigen::MatrixXd family_param_derivative_fd(const FamilySpec<N>& spec, const FamilyParams& params,
                                           const TorusPoint<N>& x, bool richardson = false) {
    const int np = spec.param_dim();
    auto fd_pass = [&](double delta) {
        Eigen::MatrixXd d(N, np);
        Eigen::VectorXd w = params.w;
        for (int j = 0; j < np; ++j) {
            double save = w[j];
            w[j] = save + delta;
            TorusPoint<N> plus = family_apply(spec, FamilyParams(w), x);
            w[j] = save - delta;
            TorusPoint<N> minus = family_apply(spec, FamilyParams(w), x);
            w[j] = save;
            d.col(j) = torus_diff(plus, minus) / (2.0 * delta);
        }
        return d;
    };
    Eigen::MatrixXd coarse = fd_pass(spec.fd_step);
    if (!richardson) return coarse;
    Eigen::MatrixXd fine = fd_pass(spec.fd_step / 2.0);
    return (4.0 * fine - coarse) / 3.0;
}

// Fast method: one forward sweep records the point entering each block, one
// backward sweep accumulates the spatial Jacobian of everything downstream,
// and each block's own parameter sensitivity comes from central differences
// of that single chart-local map. Agrees with the literal method to the
// finite-difference tolerance at a small fraction of the cost.
template <int N>
Eigen::MatrixXd family_param_derivative(const FamilySpec<N>& spec, const FamilyParams& params,
                                        const TorusPoint<N>& x) {
    const int blocks = spec.num_blocks();
    const int bd = FamilySpec<N>::block_dim();
    const double delta = spec.fd_step;

    std::vector<TorusPoint<N>> entry(blocks + 1);
    entry[0] = x;
    for (int b = 0; b < blocks; ++b) {
        auto ref = detail::decode_block(spec, params.w, b);
        entry[b + 1] = ref.zero ? entry[b]
                                : chart_local_apply(spec, ref.chart, Vec<N>(ref.t), ref.v, entry[b]);
    }

    Eigen::MatrixXd deriv = Eigen::MatrixXd::Zero(N, spec.param_dim());
    Mat<N> downstream = Mat<N>::Identity();  // jacobian of blocks after b at entry[b+1]
    for (int b = blocks - 1; b >= 0; --b) {
        auto ref = detail::decode_block(spec, params.w, b);
        Vec<N> y = spec.atlas.to_chart(ref.chart, entry[b]);
        if (y.norm() < 3.0) {
            // parameter sensitivity of this block alone
            Eigen::Matrix<double, N, Eigen::Dynamic> local(N, bd);
            Eigen::VectorXd theta(bd);
            theta.head(N) = ref.t;
            theta.tail(bd - N) = ref.v.to_coeffs();
            for (int j = 0; j < bd; ++j) {
                double save = theta[j];
                theta[j] = save + delta;
                Vec<N> plus = detail::block_apply_chart(
                    spec, Vec<N>(theta.head(N)),
                    SkewMatrix<N>::from_coeffs(theta.tail(bd - N)), y);
                theta[j] = save - delta;
                Vec<N> minus = detail::block_apply_chart(
                    spec, Vec<N>(theta.head(N)),
                    SkewMatrix<N>::from_coeffs(theta.tail(bd - N)), y);
                theta[j] = save;
                local.col(j) = spec.atlas.scales[ref.chart] * (plus - minus) / (2.0 * delta);
            }
            deriv.middleCols(b * bd, bd) = downstream * local;
            auto with_jac =
                detail::block_apply_chart_jacobian(spec, Vec<N>(ref.t), ref.v, y);
            downstream = downstream * with_jac.jacobian;
        }
        // outside the support: zero sensitivity, identity jacobian
    }
    return deriv;
}

// ---------------------------------------------------------------------------
// Constructive transitivity: parameters carrying one tangent plane onto
// another. Route the base point between inner sets along the overlap graph
// (one round per hop, pure translation), then align the planes with one
// rotation and finish with a translation inside the target chart.
template <int N>
FamilyParams transitivity_witness(const FamilySpec<N>& spec, const GrassmannPlane<N>& sigma_p,
                                  const GrassmannPlane<N>& sigma_q) {
    if (sigma_p.dim() != sigma_q.dim())
        throw std::invalid_argument("transitivity_witness: plane dimensions differ");
    const int bd = FamilySpec<N>::block_dim();
    const int L = spec.atlas.chart_count();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.param_dim());

    int start = spec.atlas.first_inner_chart(sigma_p.base);
    int goal = spec.atlas.first_inner_chart(sigma_q.base);
    if (start < 0 || goal < 0)
        throw std::runtime_error("transitivity_witness: point not in any inner set");
    std::vector<int> path = spec.atlas.chart_path(start, goal);
    const int hops = static_cast<int>(path.size()) - 1;
    if (hops + 1 > spec.rounds())
        throw std::runtime_error("transitivity_witness: path exceeds available rounds");

    TorusPoint<N> cur = sigma_p.base;
    for (int hop = 0; hop < hops; ++hop) {
        int chart = path[hop];
        int next_chart = path[hop + 1];
        // waypoint in the overlap of both inner sets: midpoint of the centers
        Vec<N> d;
        for (int c = 0; c < N; ++c)
            d[c] = wrap_signed(spec.atlas.centers[next_chart][c] - spec.atlas.centers[chart][c]);
        TorusPoint<N> waypoint(Vec<N>(spec.atlas.centers[chart] + 0.5 * d));
        Vec<N> t = spec.atlas.to_chart(chart, waypoint) - spec.atlas.to_chart(chart, cur);
        w.segment((static_cast<std::ptrdiff_t>(hop) * L + chart) * bd, N) = t;
        cur = waypoint;
    }

    // final round in the goal chart: rotate the plane, then translate
    Rotation<N> align = align_rotation(sigma_p, sigma_q);
    auto log = rotation_log(align);
    Vec<N> y_cur = spec.atlas.to_chart(goal, cur);
    Vec<N> y_goal = spec.atlas.to_chart(goal, sigma_q.base);
    Vec<N> t_final = y_goal - align.mat * y_cur;
    std::ptrdiff_t off = (static_cast<std::ptrdiff_t>(hops) * L + goal) * bd;
    w.segment(off, N) = t_final;
    w.segment(off + N, bd - N) = log.value.to_coeffs();

    double norm = w.norm();
    if (norm > spec.radius) throw RadiusTooSmallError(norm);
    return FamilyParams(std::move(w));
}

// Random tangent plane of dimension k with a Haar-distributed orthonormal
// basis.
template <int N>
GrassmannPlane<N> random_plane(Philox& rng, const TorusPoint<N>& base, int k) {
    GrassmannPlane<N> plane;
    plane.base = base;
    if (k == 0) {
        plane.basis = PlaneBasis<N>(N, 0);
        return plane;
    }
    PlaneBasis<N> g(N, k);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < k; ++j) g(i, j) = rng.next_gaussian();
    plane.basis = orthonormalize<N>(g);
    return plane;
}

template <int N>
TorusPoint<N> random_point(Philox& rng) {
    TorusPoint<N> p;
    for (int i = 0; i < N; ++i) p.coords[i] = rng.next_double();
    return p;
}

// Ball radius from a sample of witnesses: twice the largest norm needed over
// random plane pairs across every plane dimension.
template <int N>
double calibrate_radius(const FamilySpec<N>& spec, int pairs, std::uint64_t seed) {
    FamilySpec<N> probe = spec;
    probe.radius = std::numeric_limits<double>::infinity();
    double max_norm = 0.0;
    Philox rng(seed, 0x57u);
    for (int trial = 0; trial < pairs; ++trial) {
        int k = trial % (N + 1);
        auto sp = random_plane<N>(rng, random_point<N>(rng), k);
        auto sq = random_plane<N>(rng, random_point<N>(rng), k);
        FamilyParams w = transitivity_witness(probe, sp, sq);
        max_norm = std::max(max_norm, w.w.norm());
    }
    return 2.0 * max_norm;
}

// Grid-atlas family with optional radius auto-calibration (radius <= 0).
template <int N>
FamilySpec<N> make_grid_family(int per_axis, double scale, double radius, double flow_step = 1e-2,
                               double fd_step = 1e-5, std::uint64_t calibration_seed = 7) {
    FamilySpec<N> spec;
    spec.atlas = make_grid_atlas<N>(per_axis, scale);
    spec.flow_step = flow_step;
    spec.fd_step = fd_step;
    spec.radius = radius > 0.0 ? radius : 1.0;
    if (radius <= 0.0) spec.radius = calibrate_radius(spec, 200, calibration_seed);
    spec.validate();
    return spec;
}

template <int N>
FamilySpec<N> default_family(double radius = 0.0) {
    return make_grid_family<N>(default_grid_per_axis(N), default_chart_scale(N), radius);
}

}  // namespace kinlab
