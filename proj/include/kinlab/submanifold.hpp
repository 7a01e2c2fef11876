#pragma once

// Discretized curves (polylines) and surfaces (triangle meshes) on the
// torus. Every element is kept shorter than 0.4, safely below the
// injectivity radius 1/2, so each element lifts to the plane unambiguously.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "kinlab/errors.hpp"
#include "kinlab/family.hpp"
#include "kinlab/linalg.hpp"
#include "kinlab/torus.hpp"

namespace kinlab {

constexpr double kMaxElementDiameter = 0.4;

template <int N>
struct GeodesicSegmentSpec {
    TorusPoint<N> start;
    Vec<N> direction;  // need not be unit length
    double length = 0.0;
};

template <int N>
using ParametricCurve = std::function<TorusPoint<N>(double)>;  // t in [0,1]

// Flat rectangular patch spanned by two direction vectors (N = 3 surfaces).
template <int N>
struct PlanePatchSpec {
    TorusPoint<N> origin;
    Vec<N> span_u;
    Vec<N> span_v;
    double len_u = 0.0;
    double len_v = 0.0;
};

template <int N>
struct DiscreteSubmanifold {
    int dim = 1;
    std::vector<TorusPoint<N>> vertices;
    std::vector<std::array<int, 3>> elements;  // segments use slots 0,1
    std::vector<GrassmannPlane<N>> element_tangents;
    double total_volume = 0.0;

    int element_count() const { return static_cast<int>(elements.size()); }
    int corners() const { return dim == 1 ? 2 : 3; }
};

namespace detail {

template <int N>
double element_volume(const DiscreteSubmanifold<N>& m, int e) {
    const auto& el = m.elements[e];
    if (m.dim == 1) return torus_distance(m.vertices[el[0]], m.vertices[el[1]]);
    if constexpr (N == 3) {
        Vec<N> a = torus_diff(m.vertices[el[1]], m.vertices[el[0]]);
        Vec<N> b = torus_diff(m.vertices[el[2]], m.vertices[el[0]]);
        return 0.5 * a.cross(b).norm();
    }
    return 0.0;
}

template <int N>
GrassmannPlane<N> element_plane(const DiscreteSubmanifold<N>& m, int e) {
    const auto& el = m.elements[e];
    GrassmannPlane<N> plane;
    plane.base = m.vertices[el[0]];
    if (m.dim == 1) {
        Vec<N> d = torus_diff(m.vertices[el[1]], m.vertices[el[0]]);
        plane.basis = PlaneBasis<N>(N, 1);
        plane.basis.col(0) = d.normalized();
    } else {
        PlaneBasis<N> span(N, 2);
        span.col(0) = torus_diff(m.vertices[el[1]], m.vertices[el[0]]);
        span.col(1) = torus_diff(m.vertices[el[2]], m.vertices[el[0]]);
        plane.basis = orthonormalize<N>(span);
    }
    return plane;
}

template <int N>
void check_element_sizes(const DiscreteSubmanifold<N>& m, int e) {
    const auto& el = m.elements[e];
    for (int k = 0; k < m.corners(); ++k) {
        int next = (k + 1) % m.corners();
        if (torus_distance(m.vertices[el[k]], m.vertices[el[next]]) > kMaxElementDiameter)
            throw ResolutionTooCoarseError("element edge longer than 0.4; raise the resolution");
    }
}

template <int N>
void finish_mesh(DiscreteSubmanifold<N>& m) {
    m.element_tangents.clear();
    m.element_tangents.reserve(m.elements.size());
    m.total_volume = 0.0;
    for (int e = 0; e < m.element_count(); ++e) {
        check_element_sizes(m, e);
        m.total_volume += element_volume(m, e);
        m.element_tangents.push_back(element_plane(m, e));
    }
}

}  // namespace detail

template <int N>
DiscreteSubmanifold<N> discretize(const GeodesicSegmentSpec<N>& spec, int resolution) {
    if (resolution < 2) throw std::invalid_argument("discretize: resolution must be >= 2");
    if (!(spec.length > 0.0)) throw std::invalid_argument("discretize: length must be positive");
    if (spec.direction.norm() == 0.0)
        throw std::invalid_argument("discretize: direction must be nonzero");
    Vec<N> unit = spec.direction.normalized();
    DiscreteSubmanifold<N> m;
    m.dim = 1;
    for (int i = 0; i <= resolution; ++i) {
        double s = spec.length * i / resolution;
        m.vertices.push_back(translate(spec.start, Vec<N>(s * unit)));
    }
    for (int i = 0; i < resolution; ++i) m.elements.push_back({i, i + 1, -1});
    detail::finish_mesh(m);
    return m;
}

template <int N>
DiscreteSubmanifold<N> discretize(const ParametricCurve<N>& curve, int resolution) {
    if (resolution < 2) throw std::invalid_argument("discretize: resolution must be >= 2");
    DiscreteSubmanifold<N> m;
    m.dim = 1;
    for (int i = 0; i <= resolution; ++i) m.vertices.push_back(curve(double(i) / resolution));
    for (int i = 0; i < resolution; ++i) m.elements.push_back({i, i + 1, -1});
    detail::finish_mesh(m);
    return m;
}

template <int N>
DiscreteSubmanifold<N> discretize(const PlanePatchSpec<N>& spec, int res_u, int res_v) {
    static_assert(N == 3, "surface meshes ship on T^3");
    if (res_u < 2 || res_v < 2)
        throw std::invalid_argument("discretize: surface resolution must be >= 2 per axis");
    Vec<N> du = spec.span_u.normalized() * (spec.len_u / res_u);
    Vec<N> dv = spec.span_v.normalized() * (spec.len_v / res_v);
    DiscreteSubmanifold<N> m;
    m.dim = 2;
    auto vid = [&](int i, int j) { return i * (res_v + 1) + j; };
    for (int i = 0; i <= res_u; ++i)
        for (int j = 0; j <= res_v; ++j)
            m.vertices.push_back(translate(spec.origin, Vec<N>(double(i) * du + double(j) * dv)));
    for (int i = 0; i < res_u; ++i)
        for (int j = 0; j < res_v; ++j) {
            m.elements.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
            m.elements.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    detail::finish_mesh(m);
    return m;
}

// ---------------------------------------------------------------------------
// Image of a mesh under one family member. Vertices map through the family;
// element tangents map through the spatial Jacobian (evaluated at the source
// element's first corner) and are re-orthonormalized; volumes are recomputed
// from the mapped vertices.
//
// Subdivision: an image edge past the 0.4 lifting cap always splits. Below
// the cap, the mapped source midpoint of the longest edge is compared with
// the image chord midpoint, and the element splits while that sagitta
// exceeds sagitta_tol times the edge length. Identity and rigid images have
// zero sagitta and pass through untouched; curved images refine until chord
// volumes are faithful to a fraction ~ (8/3) sagitta_tol^2 per element. The
// default tolerance is counting-grade; pass 0.04 for percent-level volumes.
//
// Family is anything with apply(params, point) and jacobian(params, point).
template <int N, class Family>
DiscreteSubmanifold<N> pushforward(const DiscreteSubmanifold<N>& mesh, const Family& family,
                                   const FamilyParams& params, int max_split_depth = 14,
                                   double sagitta_tol = 0.25) {
    DiscreteSubmanifold<N> out;
    out.dim = mesh.dim;
    const int corners = mesh.corners();
    out.vertices.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) out.vertices.push_back(family.apply(params, v));

    struct Pending {
        std::array<TorusPoint<N>, 3> source;
        std::array<int, 3> image_ids;
        int source_element;
        int depth;
    };
    std::vector<Pending> stack;
    // per output element: source element id and source first corner
    std::vector<std::pair<int, TorusPoint<N>>> provenance;

    for (int e = 0; e < mesh.element_count(); ++e) {
        Pending root;
        root.source_element = e;
        root.depth = 0;
        for (int k = 0; k < corners; ++k) {
            root.source[k] = mesh.vertices[mesh.elements[e][k]];
            root.image_ids[k] = mesh.elements[e][k];
        }
        stack.push_back(root);
        while (!stack.empty()) {
            Pending cur = stack.back();
            stack.pop_back();

            // pick the split edge: the longest source edge
            int split_edge = 0;
            double longest_src = -1.0;
            double longest_img = 0.0;
            for (int k = 0; k < (corners == 2 ? 1 : 3); ++k) {
                int next = (k + 1) % corners;
                double src_len = torus_distance(cur.source[k], cur.source[next]);
                longest_img = std::max(longest_img,
                                       torus_distance(out.vertices[cur.image_ids[k]],
                                                      out.vertices[cur.image_ids[next]]));
                if (src_len > longest_src) {
                    longest_src = src_len;
                    split_edge = k;
                }
            }
            const int a = split_edge, b = (split_edge + 1) % corners;
            const TorusPoint<N>& img_a = out.vertices[cur.image_ids[a]];
            const TorusPoint<N>& img_b = out.vertices[cur.image_ids[b]];
            double edge_len = torus_distance(img_a, img_b);

            bool split = longest_img > kMaxElementDiameter;
            TorusPoint<N> mid_src(
                Vec<N>(cur.source[a].coords + 0.5 * torus_diff(cur.source[b], cur.source[a])));
            TorusPoint<N> mid_img;
            bool have_mid = false;
            if (!split && edge_len > 0.2 * sagitta_tol) {
                mid_img = family.apply(params, mid_src);
                have_mid = true;
                TorusPoint<N> chord_mid(Vec<N>(img_a.coords + 0.5 * torus_diff(img_b, img_a)));
                split = torus_distance(mid_img, chord_mid) > sagitta_tol * edge_len;
            }

            if (!split) {
                out.elements.push_back(mesh.dim == 1
                                           ? std::array<int, 3>{cur.image_ids[0],
                                                                cur.image_ids[1], -1}
                                           : cur.image_ids);
                provenance.emplace_back(cur.source_element, cur.source[0]);
                continue;
            }
            if (cur.depth >= max_split_depth)
                throw ResolutionTooCoarseError(
                    "pushforward: element still overstretched at maximum split depth");
            if (!have_mid) mid_img = family.apply(params, mid_src);
            out.vertices.push_back(mid_img);
            int mid_id = static_cast<int>(out.vertices.size()) - 1;

            if (mesh.dim == 1) {
                stack.push_back({{cur.source[0], mid_src, {}},
                                 {cur.image_ids[0], mid_id, -1},
                                 cur.source_element,
                                 cur.depth + 1});
                stack.push_back({{mid_src, cur.source[1], {}},
                                 {mid_id, cur.image_ids[1], -1},
                                 cur.source_element,
                                 cur.depth + 1});
            } else {
                const int c = (split_edge + 2) % 3;
                std::array<TorusPoint<N>, 3> s1, s2;
                std::array<int, 3> i1, i2;
                s1[a] = cur.source[a]; s1[b] = mid_src; s1[c] = cur.source[c];
                i1[a] = cur.image_ids[a]; i1[b] = mid_id; i1[c] = cur.image_ids[c];
                s2[a] = mid_src; s2[b] = cur.source[b]; s2[c] = cur.source[c];
                i2[a] = mid_id; i2[b] = cur.image_ids[b]; i2[c] = cur.image_ids[c];
                stack.push_back({s1, i1, cur.source_element, cur.depth + 1});
                stack.push_back({s2, i2, cur.source_element, cur.depth + 1});
            }
        }
    }

    out.element_tangents.reserve(out.elements.size());
    out.total_volume = 0.0;
    for (int e = 0; e < out.element_count(); ++e) {
        out.total_volume += detail::element_volume(out, e);
        const auto& [src_el, src_corner] = provenance[e];
        Mat<N> dh = family.jacobian(params, src_corner);
        GrassmannPlane<N> mapped;
        mapped.base = out.vertices[out.elements[e][0]];
        PlaneBasis<N> pushed = dh * mesh.element_tangents[src_el].basis;
        mapped.basis = orthonormalize<N>(pushed);
        out.element_tangents.push_back(mapped);
    }
    return out;
}

}  // namespace kinlab
