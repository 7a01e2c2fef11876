#pragma once

// Dense linear-algebra kernel: normal Jacobians, the SO(n) exponential and
// principal logarithm, tangent k-planes with orthonormal bases, angles
// between complementary subspaces, and the transversality determinant.
// Everything here is a pure function over small matrices (n <= 3 in the
// shipped geometry; the dynamic-size entry points take arbitrary sizes).

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "kinlab/torus.hpp"

namespace kinlab {

constexpr double kOrthoTol = 1e-10;      // orthogonality / det checks
constexpr double kSubspaceGapTol = 1e-10;  // projector comparisons

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Basis matrix of a k-plane in R^n: n rows, 0..n columns.
template <int N>
using PlaneBasis = Eigen::Matrix<double, N, Eigen::Dynamic, 0, N, N>;

// ---------------------------------------------------------------------------
// Normal Jacobian: NJ(A) = sqrt(det(A A^T)), the volume distortion of a
// surjective map orthogonal to its kernel. Zero exactly when A is not
// surjective. Defined for any shape; rows > cols always yields 0.
inline double normal_jacobian(const MatrixXd& A) {
    if (!A.allFinite()) throw std::invalid_argument("normal_jacobian: non-finite entries");
    if (A.rows() == 0) return 1.0;  // empty product: the unique map onto {0}
    if (A.rows() > A.cols()) return 0.0;  // can never be surjective
    MatrixXd gram = A * A.transpose();
    double det = gram.determinant();
    return det > 0.0 ? std::sqrt(det) : 0.0;
}

// ---------------------------------------------------------------------------
// Skew-symmetric matrices (the Lie algebra so(n)) and rotations.

template <int N>
struct SkewMatrix {
    Mat<N> mat;

    SkewMatrix() : mat(Mat<N>::Zero()) {}
    explicit SkewMatrix(const Mat<N>& m) : mat(m) {
        if ((m + m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("SkewMatrix: input not skew-symmetric");
    }

    static constexpr int coeff_count() { return N * (N - 1) / 2; }

    // Strictly-upper entries, row major: (0,1), (0,2), ..., (1,2), ...
    static SkewMatrix from_coeffs(const Eigen::Ref<const VectorXd>& c) {
        Mat<N> m = Mat<N>::Zero();
        int idx = 0;
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j, ++idx) {
                m(i, j) = c[idx];
                m(j, i) = -c[idx];
            }
        SkewMatrix s;
        s.mat = m;
        return s;
    }

    VectorXd to_coeffs() const {
        VectorXd c(coeff_count());
        int idx = 0;
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j, ++idx) c[idx] = mat(i, j);
        return c;
    }
};

template <int N>
struct Rotation {
    Mat<N> mat;

    Rotation() : mat(Mat<N>::Identity()) {}
    explicit Rotation(const Mat<N>& m) : mat(m) { validate(); }

    void validate() const {
        if ((mat.transpose() * mat - Mat<N>::Identity()).cwiseAbs().maxCoeff() > kOrthoTol)
            throw std::invalid_argument("Rotation: matrix not orthogonal");
        if (std::abs(mat.determinant() - 1.0) > kOrthoTol)
            throw std::invalid_argument("Rotation: determinant not +1");
    }
};

// Generic matrix exponential via scaling-and-squaring with a Taylor core.
// Fallback for sizes without a closed form; also the cross-check oracle
// for the closed forms below.
inline MatrixXd matrix_exp_dense(const MatrixXd& A) {
    const double nrm = A.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    MatrixXd B = A;
    if (nrm > 0.5) {
        squarings = std::max(0, static_cast<int>(std::ceil(std::log2(nrm / 0.5))));
        B /= std::pow(2.0, squarings);
    }
    MatrixXd result = MatrixXd::Identity(A.rows(), A.cols());
    MatrixXd term = result;
    for (int k = 1; k <= 18; ++k) {
        term = (term * B) / static_cast<double>(k);
        result += term;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

namespace detail {

inline Mat<2> rot2(double theta) {
    double c = std::cos(theta), s = std::sin(theta);
    Mat<2> r;
    r << c, -s, s, c;
    return r;
}

// Rodrigues form for so(3): axis-angle from the skew matrix.
inline Mat<3> exp_so3(const Mat<3>& v) {
    Vec<3> w(v(2, 1), v(0, 2), v(1, 0));
    double theta = w.norm();
    if (theta < 1e-12) return Mat<3>::Identity() + v;  // first order; v ~ 0
    Mat<3> k = v / theta;
    return Mat<3>::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * (k * k);
}

}  // namespace detail

template <int N>
Rotation<N> rotation_exp(const SkewMatrix<N>& v) {
    static_assert(N == 2 || N == 3, "shipped geometry is n in {2,3}");
    if (!v.mat.allFinite()) throw std::invalid_argument("rotation_exp: non-finite input");
    Rotation<N> r;
    if constexpr (N == 2) {
        r.mat = detail::rot2(v.mat(1, 0));
    } else {
        r.mat = detail::exp_so3(v.mat);
    }
    return r;
}

template <int N>
struct RotationLog {
    SkewMatrix<N> value;
    bool branch_ambiguous = false;  // an angle sits at pi, both branches valid
};

// Principal logarithm: planar angles in (-pi, pi].
template <int N>
RotationLog<N> rotation_log(const Rotation<N>& a) {
    static_assert(N == 2 || N == 3);
    RotationLog<N> out;
    if constexpr (N == 2) {
        double theta = std::atan2(a.mat(1, 0), a.mat(0, 0));
        Mat<2> m;
        m << 0.0, -theta, theta, 0.0;
        out.value.mat = m;
        out.branch_ambiguous = std::abs(std::abs(theta) - M_PI) < 1e-9;
        if (out.branch_ambiguous) {  // pick the +pi branch
            m << 0.0, -M_PI, M_PI, 0.0;
            out.value.mat = m;
        }
    } else {
        double cos_theta = std::clamp((a.mat.trace() - 1.0) / 2.0, -1.0, 1.0);
        double theta = std::acos(cos_theta);
        Vec<3> axis;
        if (theta < 1e-8) {
            // near identity: log(R) ~ (R - R^T)/2
            out.value.mat = (a.mat - a.mat.transpose()) / 2.0;
            return out;
        }
        if (M_PI - theta > 1e-6) {
            Vec<3> r(a.mat(2, 1) - a.mat(1, 2), a.mat(0, 2) - a.mat(2, 0),
                     a.mat(1, 0) - a.mat(0, 1));
            axis = r / (2.0 * std::sin(theta));
        } else {
            // angle at or near pi: axis from the symmetric part, sign free at pi
            Mat<3> b = (a.mat + Mat<3>::Identity()) / 2.0;
            int i;
            b.diagonal().maxCoeff(&i);
            axis = b.col(i) / std::sqrt(b(i, i));
            out.branch_ambiguous = M_PI - theta < 1e-9;
        }
        Mat<3> k;
        k << 0, -axis[2], axis[1], axis[2], 0, -axis[0], -axis[1], axis[0], 0;
        out.value.mat = theta * k;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tangent k-planes.

template <int N>
struct GrassmannPlane {
    TorusPoint<N> base;
    PlaneBasis<N> basis;  // orthonormal columns

    GrassmannPlane() : basis(N, 0) {}
    GrassmannPlane(const TorusPoint<N>& p, const PlaneBasis<N>& b) : base(p), basis(b) {
        validate();
    }

    int dim() const { return static_cast<int>(basis.cols()); }

    void validate() const {
        if (basis.cols() > N) throw std::invalid_argument("GrassmannPlane: k > n");
        if (basis.cols() == 0) return;
        MatrixXd gram = basis.transpose() * basis;
        if ((gram - MatrixXd::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("GrassmannPlane: basis not orthonormal");
    }

    Mat<N> projector() const { return basis * basis.transpose(); }
};

// Gram-Schmidt via Householder QR; returns an orthonormal basis of span(cols).
template <int N>
PlaneBasis<N> orthonormalize(const PlaneBasis<N>& m) {
    if (m.cols() == 0) return m;
    Eigen::HouseholderQR<MatrixXd> qr(m);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(N, m.cols());
    return q;
}

// Frobenius distance between orthogonal projectors; 0 iff equal subspaces.
template <int N>
double subspace_gap(const GrassmannPlane<N>& a, const GrassmannPlane<N>& b) {
    return (a.projector() - b.projector()).norm();
}

// sin of the angle between complementary subspaces at a common base point,
// defined as |det [basis(P) | basis(Q)]|. Vanishes exactly at
// non-transversality, equals 1 for orthogonal complements.
template <int N>
double sin_angle(const GrassmannPlane<N>& p, const GrassmannPlane<N>& q) {
    if (p.dim() + q.dim() != N)
        throw std::invalid_argument("sin_angle: dimensions must be complementary");
    Mat<N> m;
    m.leftCols(p.dim()) = p.basis;
    m.rightCols(q.dim()) = q.basis;
    return std::abs(m.determinant());
}

// Determinant of [-dh * B_V | B_W]; its absolute value is the density factor
// of the intersection constraint and vanishes iff dh(V-plane) + W-plane != R^n.
template <int N>
double transversality_det(const Mat<N>& dh, const PlaneBasis<N>& basis_v,
                          const PlaneBasis<N>& basis_w) {
    if (basis_v.cols() + basis_w.cols() != N)
        throw std::invalid_argument("transversality_det: column counts must sum to n");
    Mat<N> m;
    if (basis_v.cols() > 0) m.leftCols(basis_v.cols()) = -(dh * basis_v);
    if (basis_w.cols() > 0) m.rightCols(basis_w.cols()) = basis_w;
    return m.determinant();
}

// Completes a k-frame to a positively oriented orthonormal basis of R^n.
template <int N>
Mat<N> complete_to_so(const PlaneBasis<N>& frame) {
    Mat<N> full;
    if (frame.cols() == 0) {
        full = Mat<N>::Identity();
    } else {
        Eigen::HouseholderQR<MatrixXd> qr(frame);
        MatrixXd q = qr.householderQ();
        full = q;
        // householderQ may flip the leading columns relative to the input
        // frame; re-install the exact frame and keep the complement.
        full.leftCols(frame.cols()) = frame;
        // re-orthonormalize the complement against the frame
        for (int c = frame.cols(); c < N; ++c) {
            Vec<N> v = full.col(c);
            for (int d = 0; d < c; ++d) v -= full.col(d).dot(v) * full.col(d);
            double nrm = v.norm();
            if (nrm < 1e-8) throw std::runtime_error("complete_to_so: degenerate completion");
            full.col(c) = v / nrm;
        }
    }
    if (full.determinant() < 0) full.col(N - 1) *= -1.0;
    return full;
}

// A rotation carrying span(sigma1) onto span(sigma2). Returns the identity
// when the spans already coincide.
template <int N>
Rotation<N> align_rotation(const GrassmannPlane<N>& sigma1, const GrassmannPlane<N>& sigma2) {
    if (sigma1.dim() != sigma2.dim())
        throw std::invalid_argument("align_rotation: dimensions differ");
    if ((sigma1.projector() - sigma2.projector()).norm() < 1e-12) return Rotation<N>();
    Mat<N> b1 = complete_to_so<N>(sigma1.basis);
    Mat<N> b2 = complete_to_so<N>(sigma2.basis);
    Rotation<N> r;
    r.mat = b2 * b1.transpose();
    return r;
}

}  // namespace kinlab
