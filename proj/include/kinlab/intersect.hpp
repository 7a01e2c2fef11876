#pragma once

// Geometric intersection counting for complementary-dimensional discrete
// submanifolds under torus wrapping. Elements are shorter than 0.4 < 1/2,
// so enumerating integer translates in a {-1,0,1}^n window around the
// nearest lift is exhaustive.
//
// Tie-breaking: a crossing at a shared element endpoint counts once,
// attributed to the lexicographically smallest element pair; collinear or
// in-plane overlaps count zero. Both carry degenerate flags, as do counted
// crossings whose plane angle falls below the reporting threshold.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "kinlab/linalg.hpp"
#include "kinlab/submanifold.hpp"
#include "kinlab/torus.hpp"

namespace kinlab {

constexpr double kTauSolve = 1e-9;       // determinant threshold in the solves
constexpr double kTauDegenerate = 1e-3;  // reporting threshold on sin(angle)

template <int N>
struct IntersectionRecord {
    TorusPoint<N> point;
    int element_v = -1;
    int element_w = -1;
    double sin_angle = 0.0;
    bool degenerate = false;
};

template <int N>
struct IntersectionResult {
    int count = 0;
    std::vector<IntersectionRecord<N>> records;

    bool any_degenerate() const {
        for (const auto& r : records)
            if (r.degenerate) return true;
        return false;
    }
};

namespace detail {

// Raw hit prior to endpoint dedup.
template <int N>
struct Hit {
    Vec<N> point;  // unreduced plane coordinates near mesh A's lift
    int ea, eb;
    bool interior;
    double sin_angle;
};

template <int N>
void dedup_and_count(std::vector<Hit<N>>& hits, IntersectionResult<N>& out,
                     double tau_degenerate) {
    // interior hits count directly
    for (const auto& h : hits)
        if (h.interior) {
            out.count += 1;
            out.records.push_back({TorusPoint<N>(h.point), h.ea, h.eb,
                                   h.sin_angle, h.sin_angle < tau_degenerate});
        }
    // endpoint hits: group by location, count the lexicographically smallest
    std::vector<Hit<N>> boundary;
    for (const auto& h : hits)
        if (!h.interior) boundary.push_back(h);
    std::sort(boundary.begin(), boundary.end(), [](const Hit<N>& a, const Hit<N>& b) {
        return std::pair(a.ea, a.eb) < std::pair(b.ea, b.eb);
    });
    std::vector<Vec<N>> taken;
    for (const auto& h : boundary) {
        bool dup = false;
        for (const auto& t : taken) {
            Vec<N> d;
            for (int c = 0; c < N; ++c) d[c] = wrap_signed(h.point[c] - t[c]);
            if (d.norm() < 1e-7) {
                dup = true;
                break;
            }
        }
        if (dup) continue;
        taken.push_back(h.point);
        out.count += 1;
        out.records.push_back({TorusPoint<N>(h.point), h.ea, h.eb, h.sin_angle, true});
    }
}

}  // namespace detail

template <int N>
double element_pair_sin_angle(const DiscreteSubmanifold<N>& a, int ea,
                              const DiscreteSubmanifold<N>& b, int eb) {
    Mat<N> m;
    const auto& ba = a.element_tangents[ea].basis;
    const auto& bb = b.element_tangents[eb].basis;
    m.leftCols(ba.cols()) = ba;
    m.rightCols(bb.cols()) = bb;
    return std::abs(m.determinant());
}

inline IntersectionResult<2> count_curve_curve_t2(const DiscreteSubmanifold<2>& a,
                                                  const DiscreteSubmanifold<2>& b,
                                                  double tau_solve = kTauSolve,
                                                  double tau_degenerate = kTauDegenerate) {
    if (a.dim != 1 || b.dim != 1)
        throw std::invalid_argument("count_curve_curve_t2: both meshes must be curves");
    IntersectionResult<2> out;
    std::vector<detail::Hit<2>> hits;
    const double tol = 1e-9;  // parameter-space endpoint tolerance

    for (int ea = 0; ea < a.element_count(); ++ea) {
        Vec<2> a0 = a.vertices[a.elements[ea][0]].coords;
        Vec<2> da = torus_diff(a.vertices[a.elements[ea][1]], a.vertices[a.elements[ea][0]]);
        for (int eb = 0; eb < b.element_count(); ++eb) {
            Vec<2> db = torus_diff(b.vertices[b.elements[eb][1]], b.vertices[b.elements[eb][0]]);
            Vec<2> b0_near = a0 + torus_diff(b.vertices[b.elements[eb][0]],
                                             a.vertices[a.elements[ea][0]]);
            double pair_sin = element_pair_sin_angle(a, ea, b, eb);
            for (int ox = -1; ox <= 1; ++ox)
                for (int oy = -1; oy <= 1; ++oy) {
                    Vec<2> b0 = b0_near + Vec<2>(ox, oy);
                    double det = da[0] * (-db[1]) - (-db[0]) * da[1];
                    Vec<2> rhs = b0 - a0;
                    if (std::abs(det) <= tau_solve) {
                        // parallel: collinear overlap counts zero, flagged
                        double off = da[0] * rhs[1] - da[1] * rhs[0];
                        if (std::abs(off) <= tau_solve * std::max(1.0, da.norm())) {
                            double la = da.squaredNorm();
                            if (la <= 0) continue;
                            double u0 = rhs.dot(da) / la;
                            double u1 = (rhs + db).dot(da) / la;
                            double lo = std::min(u0, u1), hi = std::max(u0, u1);
                            if (hi < -tol || lo > 1.0 + tol) continue;
                            double mid = 0.5 * (std::max(lo, 0.0) + std::min(hi, 1.0));
                            out.records.push_back({TorusPoint<2>(Vec<2>(a0 + mid * da)), ea, eb,
                                                   0.0, true});
                        }
                        continue;
                    }
                    double s = (rhs[0] * (-db[1]) - (-db[0]) * rhs[1]) / det;
                    double u = (da[0] * rhs[1] - da[1] * rhs[0]) / det;
                    if (s < -tol || s > 1.0 + tol || u < -tol || u > 1.0 + tol) continue;
                    bool interior = s > tol && s < 1.0 - tol && u > tol && u < 1.0 - tol;
                    hits.push_back({Vec<2>(a0 + s * da), ea, eb, interior, pair_sin});
                }
        }
    }
    detail::dedup_and_count(hits, out, tau_degenerate);
    return out;
}

inline IntersectionResult<3> count_curve_surface_t3(const DiscreteSubmanifold<3>& curve,
                                                    const DiscreteSubmanifold<3>& surface,
                                                    double tau_solve = kTauSolve,
                                                    double tau_degenerate = kTauDegenerate) {
    if (curve.dim != 1 || surface.dim != 2)
        throw std::invalid_argument("count_curve_surface_t3: expects a curve and a surface");
    IntersectionResult<3> out;
    std::vector<detail::Hit<3>> hits;
    const double tol = 1e-9;

    for (int ea = 0; ea < curve.element_count(); ++ea) {
        Vec<3> a0 = curve.vertices[curve.elements[ea][0]].coords;
        Vec<3> d = torus_diff(curve.vertices[curve.elements[ea][1]],
                              curve.vertices[curve.elements[ea][0]]);
        for (int eb = 0; eb < surface.element_count(); ++eb) {
            const auto& tri = surface.elements[eb];
            Vec<3> e1 = torus_diff(surface.vertices[tri[1]], surface.vertices[tri[0]]);
            Vec<3> e2 = torus_diff(surface.vertices[tri[2]], surface.vertices[tri[0]]);
            Vec<3> b0_near = a0 + torus_diff(surface.vertices[tri[0]],
                                             curve.vertices[curve.elements[ea][0]]);
            double pair_sin = element_pair_sin_angle(curve, ea, surface, eb);
            Vec<3> normal = e1.cross(e2);
            for (int ox = -1; ox <= 1; ++ox)
                for (int oy = -1; oy <= 1; ++oy)
                    for (int oz = -1; oz <= 1; ++oz) {
                        Vec<3> b0 = b0_near + Vec<3>(ox, oy, oz);
                        Eigen::Matrix3d m;
                        m.col(0) = d;
                        m.col(1) = -e1;
                        m.col(2) = -e2;
                        double det = m.determinant();
                        Vec<3> rhs = b0 - a0;
                        if (std::abs(det) <= tau_solve) {
                            // segment parallel to the triangle plane
                            double nn = normal.norm();
                            if (nn <= 0) continue;
                            double dist0 = std::abs(normal.dot(rhs)) / nn;
                            double dist1 = std::abs(normal.dot(Vec<3>(rhs - d))) / nn;
                            if (dist0 < 1e-9 && dist1 < 1e-9) {
                                // in-plane: report a degenerate marker at the
                                // segment midpoint if it projects near the triangle
                                out.records.push_back({TorusPoint<3>(Vec<3>(a0 + 0.5 * d)),
                                                       ea, eb, 0.0, true});
                            }
                            continue;
                        }
                        Vec<3> sol = m.partialPivLu().solve(rhs);
                        double s = sol[0], u = sol[1], v = sol[2];
                        if (s < -tol || s > 1.0 + tol) continue;
                        if (u < -tol || v < -tol || u + v > 1.0 + tol) continue;
                        bool interior = s > tol && s < 1.0 - tol && u > tol && v > tol &&
                                        u + v < 1.0 - tol;
                        hits.push_back({Vec<3>(a0 + s * d), ea, eb, interior, pair_sin});
                    }
        }
    }
    detail::dedup_and_count(hits, out, tau_degenerate);
    return out;
}

// Dimension-dispatching wrapper; counts are symmetric in the two arguments.
template <int N>
IntersectionResult<N> count_intersections(const DiscreteSubmanifold<N>& a,
                                          const DiscreteSubmanifold<N>& b,
                                          double tau_solve = kTauSolve,
                                          double tau_degenerate = kTauDegenerate) {
    if constexpr (N == 2) {
        return count_curve_curve_t2(a, b, tau_solve, tau_degenerate);
    } else {
        if (a.dim == 1 && b.dim == 2) return count_curve_surface_t3(a, b, tau_solve, tau_degenerate);
        if (a.dim == 2 && b.dim == 1) {
            IntersectionResult<N> res = count_curve_surface_t3(b, a, tau_solve, tau_degenerate);
            for (auto& r : res.records) std::swap(r.element_v, r.element_w);
            return res;
        }
        throw std::invalid_argument("count_intersections: dimensions must be complementary");
    }
}

template <int N>
std::string records_to_csv(const std::vector<IntersectionRecord<N>>& records) {
    std::ostringstream os;
    os.precision(17);
    os << "x,y";
    if (N == 3) os << ",z";
    os << ",element_v,element_w,sin_angle,degenerate\n";
    for (const auto& r : records) {
        for (int c = 0; c < N; ++c) os << (c ? "," : "") << r.point.coords[c];
        os << "," << r.element_v << "," << r.element_w << "," << r.sin_angle << ","
           << (r.degenerate ? 1 : 0) << "\n";
    }
    return os.str();
}

}  // namespace kinlab
