#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "lorot/potential.hpp"

namespace lorot {

/// Axis-aligned evaluation region.
struct Box {
    Vec lo;
    Vec hi;

    int dim() const { return static_cast<int>(lo.size()); }
};

/// Default region: bounding box of the mass-carrying source points, shrunk
/// about its center; axes with zero extent (slice supports) get a small slab
/// thickness so midpoint stencils have room.
inline Box default_region(const std::vector<Event>& points, double shrink = 0.5,
                          double min_half_extent = 0.1) {
    if (points.empty()) throw Error(ErrorCode::InvalidArgument, "no points for region");
    const int d = points.front().dim();
    Vec lo = points.front().coords, hi = points.front().coords;
    for (const Event& p : points) {
        lo = lo.cwiseMin(p.coords);
        hi = hi.cwiseMax(p.coords);
    }
    Box box;
    box.lo.resize(d);
    box.hi.resize(d);
    for (int a = 0; a < d; ++a) {
        const double c = 0.5 * (lo[a] + hi[a]);
        const double half = std::max(shrink * 0.5 * (hi[a] - lo[a]), min_half_extent);
        box.lo[a] = c - half;
        box.hi[a] = c + half;
    }
    return box;
}

struct GridSpec {
    int nodes_per_axis = 33;
};

namespace detail {

inline int effective_nodes(const GridSpec& spec, int dim) {
    // Cap the total evaluation count in higher dimensions.
    const double budget = 40000.0;
    int n = spec.nodes_per_axis;
    while (n > 5 && std::pow(static_cast<double>(n), dim) > budget) n = (n + 1) / 2;
    return std::max(n, 3);
}

template <typename F>
void for_each_grid_node(const Box& box, int nodes, F&& f) {
    const int d = box.dim();
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    Vec x(d);
    while (true) {
        for (int a = 0; a < d; ++a) {
            const double s = nodes > 1 ? static_cast<double>(idx[static_cast<std::size_t>(a)]) / (nodes - 1) : 0.5;
            x[a] = box.lo[a] + s * (box.hi[a] - box.lo[a]);
        }
        f(x);
        int a = 0;
        for (; a < d; ++a) {
            if (++idx[static_cast<std::size_t>(a)] < nodes) break;
            idx[static_cast<std::size_t>(a)] = 0;
        }
        if (a == d) break;
    }
}

}  // namespace detail

/// Extrema of the extended potential over the grid; every node must be
/// finite, otherwise the region left the finiteness domain.
inline std::pair<double, double> check_local_boundedness(const PotentialPair& pp,
                                                         const CostMatrix& m, const Box& box,
                                                         const GridSpec& spec = {}) {
    const int nodes = detail::effective_nodes(spec, box.dim());
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    bool bad = false;
    detail::for_each_grid_node(box, nodes, [&](const Vec& x) {
        const ExtReal v = extend_potential(pp, m, Event(x));
        if (!v.is_finite()) {
            bad = true;
            return;
        }
        lo = std::min(lo, v.value());
        hi = std::max(hi, v.value());
    });
    if (bad)
        throw Error(ErrorCode::RegionLeavesDomain, "extended potential infinite on the region");
    return {lo, hi};
}

/// Smallest C such that phi_hat(x+d) + phi_hat(x-d) - 2 phi_hat(x) >= -C|d|^2
/// over all grid nodes and axis/diagonal offsets of one and two steps.
/// Discrete surrogate of local semiconvexity with a linear modulus.
template <typename Phi>
inline double midpoint_semiconvexity_constant(Phi&& phi_hat, const Box& box, int nodes) {
    const int d = box.dim();
    std::vector<Vec> offsets;
    for (int a = 0; a < d; ++a) {
        Vec e = Vec::Zero(d);
        const double h = (box.hi[a] - box.lo[a]) / std::max(nodes - 1, 1);
        e[a] = h;
        offsets.push_back(e);
        offsets.push_back(2.0 * e);
    }
    for (int a = 0; a < d; ++a) {
        for (int b = a + 1; b < d; ++b) {
            const double ha = (box.hi[a] - box.lo[a]) / std::max(nodes - 1, 1);
            const double hb = (box.hi[b] - box.lo[b]) / std::max(nodes - 1, 1);
            for (double sb : {1.0, -1.0}) {
                Vec e = Vec::Zero(d);
                e[a] = ha;
                e[b] = sb * hb;
                offsets.push_back(e);
                offsets.push_back(2.0 * e);
            }
        }
    }
    double C = 0.0;
    detail::for_each_grid_node(box, nodes, [&](const Vec& x) {
        const double f0 = phi_hat(x);
        for (const Vec& delta : offsets) {
            const double defect = phi_hat(x + delta) + phi_hat(x - delta) - 2.0 * f0;
            const double d2 = delta.squaredNorm();
            if (defect < 0.0) C = std::max(C, -defect / d2);
        }
    });
    return C;
}

inline double check_semiconvexity(const PotentialPair& pp, const CostMatrix& m, const Box& box,
                                  const GridSpec& spec = {}) {
    const int nodes = detail::effective_nodes(spec, box.dim());
    auto phi_hat = [&](const Vec& x) {
        const ExtReal v = extend_potential(pp, m, Event(x));
        if (!v.is_finite())
            throw Error(ErrorCode::RegionLeavesDomain, "midpoint stencil left the domain");
        return v.value();
    };
    return midpoint_semiconvexity_constant(phi_hat, box, nodes);
}

/// Minimal time separation over the mass-carrying plan entries. Zero signals
/// a plan forced through the light cone (hypothesis violation, not a bug).
inline double check_timelike_separation(const SolveResult& solved, const SpacetimeModel& model) {
    double delta = std::numeric_limits<double>::infinity();
    for (const PlanEntry& e : solved.coupling.plan) {
        if (e.mass <= 0.0) continue;
        const Event& x = solved.coupling.source.points[static_cast<std::size_t>(e.i)];
        const Event& y = solved.coupling.target.points[static_cast<std::size_t>(e.j)];
        delta = std::min(delta, model.distance(x, y));
    }
    return delta;
}

/// Indices of the near-optimal targets: support targets y with
/// psi(y) - c2(x,y) >= phi_hat(x) - 1 for some grid point x of K.
inline std::vector<int> near_optimal_targets(const PotentialPair& pp, const CostMatrix& m,
                                             const Box& K, const GridSpec& spec = {}) {
    const int nodes = detail::effective_nodes(spec, K.dim());
    std::vector<char> selected(static_cast<std::size_t>(m.cols()), 0);
    detail::for_each_grid_node(K, nodes, [&](const Vec& xc) {
        const Event x(xc);
        const ExtReal fx = extend_potential(pp, m, x);
        if (!fx.is_finite())
            throw Error(ErrorCode::RegionLeavesDomain, "extended potential infinite on K");
        for (int j = 0; j < m.cols(); ++j) {
            const ExtReal term =
                convexify_term(pp.psi[static_cast<std::size_t>(j)],
                               cost_c2(*m.model, x, m.ys[static_cast<std::size_t>(j)]));
            if (term.is_finite() && term.value() >= fx.value() - 1.0)
                selected[static_cast<std::size_t>(j)] = 1;
        }
    });
    std::vector<int> out;
    for (int j = 0; j < m.cols(); ++j)
        if (selected[static_cast<std::size_t>(j)]) out.push_back(j);
    return out;
}

/// h-diameter of the near-optimal target set over K.
inline double check_near_optimal_compactness(const PotentialPair& pp, const CostMatrix& m,
                                             const Box& K, const GridSpec& spec = {}) {
    const std::vector<int> sel = near_optimal_targets(pp, m, K, spec);
    double diam = 0.0;
    for (std::size_t a = 0; a < sel.size(); ++a)
        for (std::size_t b = a + 1; b < sel.size(); ++b)
            diam = std::max(diam, (m.ys[static_cast<std::size_t>(sel[a])].coords -
                                   m.ys[static_cast<std::size_t>(sel[b])].coords)
                                      .norm());
    return diam;
}

struct LightConeGapResult {
    double min_margin = std::numeric_limits<double>::infinity();
    bool all_positive = true;
    std::vector<int> failing_sources;
};

/// Margin between the extended potential and its best competitor among
/// near-cone targets (time separation at most delta_probe). Empty probe sets
/// count as +inf margin.
inline LightConeGapResult check_light_cone_gap(const PotentialPair& pp, const SolveResult& solved,
                                               const CostMatrix& m, double delta_probe) {
    LightConeGapResult res;
    const DiscreteMeasure& mu = solved.coupling.source;
    for (int i = 0; i < m.rows(); ++i) {
        if (mu.weights[static_cast<std::size_t>(i)] <= 0.0) continue;
        const Event& x = m.xs[static_cast<std::size_t>(i)];
        const ExtReal fx = extend_potential(pp, m, x);
        if (!fx.is_finite()) {
            res.all_positive = false;
            res.failing_sources.push_back(i);
            continue;
        }
        ExtReal competitor = ExtReal::minus_inf();
        for (int j = 0; j < m.cols(); ++j) {
            if (m.model->distance(x, m.ys[static_cast<std::size_t>(j)]) > delta_probe) continue;
            const ExtReal term = convexify_term(pp.psi[static_cast<std::size_t>(j)], m.at(i, j));
            if (competitor < term) competitor = term;
        }
        double margin;
        if (competitor.is_minus_inf()) {
            margin = std::numeric_limits<double>::infinity();
        } else if (competitor.is_plus_inf()) {
            margin = -std::numeric_limits<double>::infinity();
        } else {
            margin = fx.value() - competitor.value();
        }
        res.min_margin = std::min(res.min_margin, margin);
        if (!(margin > 0.0)) {
            res.all_positive = false;
            res.failing_sources.push_back(i);
        }
    }
    return res;
}

/// Grid scan of the extended potential over a box, one CSV row per node:
/// the node coordinates followed by phi_hat (inf literals for infinite
/// values). Meant for external plotting.
inline void dump_grid_scan_csv(const PotentialPair& pp, const CostMatrix& m, const Box& box,
                               const GridSpec& spec, std::ostream& os) {
    const int d = box.dim();
    for (int a = 0; a < d; ++a) os << "x" << a << ",";
    os << "phi_hat\n";
    char buf[40];
    auto cell = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    const int nodes = detail::effective_nodes(spec, d);
    detail::for_each_grid_node(box, nodes, [&](const Vec& x) {
        for (int a = 0; a < d; ++a) os << cell(x[a]) << ",";
        const ExtReal v = extend_potential(pp, m, Event(x));
        if (v.is_plus_inf())
            os << "+inf";
        else if (v.is_minus_inf())
            os << "-inf";
        else
            os << cell(v.value());
        os << "\n";
    });
}

/// Everything the regularity suite reports for one instance.
struct RegularityReport {
    Box region;
    int grid_nodes = 0;
    double phi_min = 0.0;
    double phi_max = 0.0;
    double semiconvexity_c = 0.0;
    double semiconvexity_c_half_grid = 0.0;
    double timelike_delta = 0.0;
    double near_optimal_diameter = 0.0;
    double light_cone_min_margin = 0.0;
    bool light_cone_all_positive = true;
    bool supports_disjoint = true;
    bool separation_checked = true;
};

}  // namespace lorot
