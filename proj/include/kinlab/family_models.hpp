#pragma once

// Uniform interface over the two parameter families the estimators run on:
// the constructed chart-composition family restricted to a parameter ball,
// and the exactly solvable translation action of T^2 on itself.

#include <Eigen/Dense>
#include <cmath>

#include "kinlab/family.hpp"
#include "kinlab/rng.hpp"
#include "kinlab/torus.hpp"

namespace kinlab {

inline double log_ball_volume(int dim, double radius) {
    return 0.5 * dim * std::log(M_PI) + dim * std::log(radius) - std::lgamma(0.5 * dim + 1.0);
}

template <int N>
struct ConstructedFamily {
    FamilySpec<N> spec;

    explicit ConstructedFamily(FamilySpec<N> s) : spec(std::move(s)) {}

    int param_dim() const { return spec.param_dim(); }
    double log_param_volume() const { return log_ball_volume(spec.param_dim(), spec.radius); }

    FamilyParams sample(Philox& rng) const {
        return FamilyParams(rng.ball_point(spec.param_dim(), spec.radius));
    }

    TorusPoint<N> apply(const FamilyParams& w, const TorusPoint<N>& x) const {
        return family_apply(spec, w, x);
    }
    Mat<N> jacobian(const FamilyParams& w, const TorusPoint<N>& x) const {
        return family_jacobian(spec, w, x);
    }
    Eigen::MatrixXd param_derivative(const FamilyParams& w, const TorusPoint<N>& x) const {
        return family_param_derivative(spec, w, x);
    }
};

// The translation action a -> (x -> x + a) of T^2 on itself: parameter space
// the unit-volume torus, identity differential, identity parameter
// derivative.
struct TranslationFamily {
    static constexpr int dim = 2;

    int param_dim() const { return 2; }
    double log_param_volume() const { return 0.0; }

    FamilyParams sample(Philox& rng) const {
        Eigen::VectorXd a(2);
        a[0] = rng.next_double();
        a[1] = rng.next_double();
        return FamilyParams(a);
    }

    TorusPoint<2> apply(const FamilyParams& w, const TorusPoint<2>& x) const {
        return translate(x, Vec<2>(w.w));
    }
    Mat<2> jacobian(const FamilyParams&, const TorusPoint<2>&) const {
        return Mat<2>::Identity();
    }
    Eigen::MatrixXd param_derivative(const FamilyParams&, const TorusPoint<2>&) const {
        return Eigen::MatrixXd::Identity(2, 2);
    }
};

}  // namespace kinlab
