#pragma once

// Points of the flat torus T^n = R^n / Z^n in the canonical trivialization.
// All coordinates live in [0,1); differences and distances are wrap-aware
// (nearest integer translate). The injectivity radius is 1/2, so any two
// points closer than 1/2 have a unique shortest representative difference.

#include <Eigen/Core>
#include <cmath>

namespace kinlab {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int N>
using Mat = Eigen::Matrix<double, N, N>;

inline double wrap_unit(double x) {
    double y = x - std::floor(x);
    // floor can return exactly 1.0 units away for tiny negatives
    if (y >= 1.0) y -= 1.0;
    return y;
}

// Signed representative of x mod 1 in [-1/2, 1/2).
inline double wrap_signed(double x) {
    double y = x - std::round(x);
    if (y >= 0.5) y -= 1.0;
    if (y < -0.5) y += 1.0;
    return y;
}

template <int N>
struct TorusPoint {
    Vec<N> coords;

    TorusPoint() : coords(Vec<N>::Zero()) {}
    explicit TorusPoint(const Vec<N>& c) : coords(c) { reduce(); }

    void reduce() {
        for (int i = 0; i < N; ++i) coords[i] = wrap_unit(coords[i]);
    }

    static TorusPoint from_unreduced(const Vec<N>& c) { return TorusPoint(c); }
};

// Shortest representative of a - b, componentwise nearest integer translate.
template <int N>
Vec<N> torus_diff(const TorusPoint<N>& a, const TorusPoint<N>& b) {
    Vec<N> d;
    for (int i = 0; i < N; ++i) d[i] = wrap_signed(a.coords[i] - b.coords[i]);
    return d;
}

template <int N>
double torus_distance(const TorusPoint<N>& a, const TorusPoint<N>& b) {
    return torus_diff(a, b).norm();
}

template <int N>
TorusPoint<N> translate(const TorusPoint<N>& p, const Vec<N>& v) {
    return TorusPoint<N>(Vec<N>(p.coords + v));
}

}  // namespace kinlab
