#pragma once

// The two local building blocks acting on the chart ball B(0,4):
//   - cut-off rotations  L(v): p -> exp(beta(|p|) v) p, sphere-preserving,
//     equal to exp(v) on B(0,2) and the identity outside B(0,3);
//   - cut-off axis translations, the flows of the fields beta(|p|) e_i.
// Both come with spatial Jacobians: the rotation's is exact (the cut-off
// enters only through the scalar beta(|p|)), the flow's is integrated
// alongside the trajectory via the variational equation.

#include <Eigen/Dense>
#include <cmath>

#include "kinlab/bump.hpp"
#include "kinlab/linalg.hpp"

namespace kinlab {

template <int N>
struct PointWithJacobian {
    Vec<N> point;
    Mat<N> jacobian;
};

// L(v)(p) = exp(beta(|p|) v) p.
template <int N>
Vec<N> local_rotation_apply(const SkewMatrix<N>& v, const Vec<N>& p) {
    double r = p.norm();
    if (r >= 3.0) return p;
    double b = BumpProfile::eval(r);
    SkewMatrix<N> scaled;
    scaled.mat = b * v.mat;
    return rotation_exp(scaled).mat * p;
}

// d/dp [exp(beta(|p|) v) p] = R + beta'(|p|) (v R p) (p/|p|)^T with
// R = exp(beta(|p|) v); beta' vanishes on [0,2] and [3,inf), so the formula
// needs no special case at p = 0.
template <int N>
PointWithJacobian<N> local_rotation_apply_jacobian(const SkewMatrix<N>& v, const Vec<N>& p) {
    double r = p.norm();
    if (r >= 3.0) return {p, Mat<N>::Identity()};
    double b = BumpProfile::eval(r);
    SkewMatrix<N> scaled;
    scaled.mat = b * v.mat;
    Mat<N> rot = rotation_exp(scaled).mat;
    Vec<N> image = rot * p;
    Mat<N> jac = rot;
    double db = BumpProfile::deriv(r);
    if (db != 0.0 && r > 0.0) jac += db * (v.mat * image) * (p.transpose() / r);
    return {image, jac};
}

namespace detail {

template <int N>
inline Vec<N> axis_field(int axis, const Vec<N>& y) {
    Vec<N> f = Vec<N>::Zero();
    double r = y.norm();
    f[axis] = r >= 3.0 ? 0.0 : BumpProfile::eval(r);
    return f;
}

// Field derivative: e_axis * beta'(|y|) y^T / |y|.
template <int N>
inline Mat<N> axis_field_deriv(int axis, const Vec<N>& y) {
    Mat<N> d = Mat<N>::Zero();
    double r = y.norm();
    if (r <= 2.0 || r >= 3.0) return d;
    double db = BumpProfile::deriv(r) / r;
    d.row(axis) = db * y.transpose();
    return d;
}

// True when the straight segment from y to y + t*e_axis stays in the closed
// ball B(0,2), where the field is constantly e_axis. The norm is convex along
// lines, so checking both endpoints suffices.
template <int N>
inline bool segment_in_core(int axis, const Vec<N>& y, double t) {
    if (y.norm() > 2.0) return false;
    Vec<N> end = y;
    end[axis] += t;
    return end.norm() <= 2.0;
}

}  // namespace detail

// Flow of the field beta(|y|) e_axis for time t: classical RK4 with fixed
// step, final partial step. Exact shortcuts where the field is constant
// (core ball) or zero (outside B(0,3)); RK4 reproduces both exactly, the
// shortcut only skips the stepping.
template <int N>
Vec<N> translation_flow(int axis, double t, const Vec<N>& p, double step) {
    if (t == 0.0 || p.norm() >= 3.0) return p;
    if (detail::segment_in_core<N>(axis, p, t)) {
        Vec<N> q = p;
        q[axis] += t;
        return q;
    }
    Vec<N> y = p;
    double remaining = std::abs(t);
    double dir = t >= 0.0 ? 1.0 : -1.0;
    while (remaining > 0.0) {
        if (y.norm() >= 3.0) break;  // field is identically zero from here on
        if (detail::segment_in_core<N>(axis, y, dir * remaining)) {
            y[axis] += dir * remaining;
            break;
        }
        double h = dir * std::min(step, remaining);
        Vec<N> k1 = detail::axis_field<N>(axis, y);
        Vec<N> k2 = detail::axis_field<N>(axis, Vec<N>(y + 0.5 * h * k1));
        Vec<N> k3 = detail::axis_field<N>(axis, Vec<N>(y + 0.5 * h * k2));
        Vec<N> k4 = detail::axis_field<N>(axis, Vec<N>(y + h * k3));
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        remaining -= std::abs(h);
    }
    return y;
}

// Flow plus the variational equation dJ/ds = DF(y(s)) J, J(0) = I, stepped
// with the same RK4 stages.
template <int N>
PointWithJacobian<N> translation_flow_jacobian(int axis, double t, const Vec<N>& p,
                                               double step) {
    PointWithJacobian<N> out{p, Mat<N>::Identity()};
    if (t == 0.0 || p.norm() >= 3.0) return out;
    if (detail::segment_in_core<N>(axis, p, t)) {
        out.point[axis] += t;
        return out;  // DF = 0 throughout the core
    }
    Vec<N> y = p;
    Mat<N> jac = Mat<N>::Identity();
    double remaining = std::abs(t);
    double dir = t >= 0.0 ? 1.0 : -1.0;
    while (remaining > 0.0) {
        if (y.norm() >= 3.0) break;
        if (detail::segment_in_core<N>(axis, y, dir * remaining)) {
            y[axis] += dir * remaining;
            break;
        }
        double h = dir * std::min(step, remaining);
        Vec<N> k1 = detail::axis_field<N>(axis, y);
        Mat<N> m1 = detail::axis_field_deriv<N>(axis, y) * jac;
        Vec<N> y2 = y + 0.5 * h * k1;
        Vec<N> k2 = detail::axis_field<N>(axis, y2);
        Mat<N> m2 = detail::axis_field_deriv<N>(axis, y2) * (jac + 0.5 * h * m1);
        Vec<N> y3 = y + 0.5 * h * k2;
        Vec<N> k3 = detail::axis_field<N>(axis, y3);
        Mat<N> m3 = detail::axis_field_deriv<N>(axis, y3) * (jac + 0.5 * h * m2);
        Vec<N> y4 = y + h * k3;
        Vec<N> k4 = detail::axis_field<N>(axis, y4);
        Mat<N> m4 = detail::axis_field_deriv<N>(axis, y4) * (jac + h * m3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        jac += (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
        remaining -= std::abs(h);
    }
    out.point = y;
    out.jacobian = jac;
    return out;
}

}  // namespace kinlab
