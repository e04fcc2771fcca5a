#pragma once

#include <cmath>
#include <vector>

#include "lorot/extended_real.hpp"
#include "lorot/geodesic_flow.hpp"
#include "lorot/spacetime.hpp"

namespace lorot {

/// Relative floor on |v|_g below which the fiber derivative is refused
/// (the formula divides by |v|_g).
inline constexpr double kStrictTimelikeEps = 1e-8;

/// L1(x,v) = d tau(v) - |v|_g on the closed future cone, +inf outside.
inline ExtendedCost lagrangian_l1(const SpacetimeModel& model, const TangentVector& v) {
    const ConeClass c = model.cone_classify(v);
    if (c == ConeClass::Outside) return ExtendedCost::infinity();
    if (c == ConeClass::Zero) return ExtendedCost::finite(0.0);
    const double l1 = model.tau_differential(v.base).apply(v) - model.g_norm(v);
    // Splitting bound keeps this nonnegative; clamp roundoff at the boundary.
    return ExtendedCost::finite(std::max(l1, 0.0));
}

/// L2 = L1^2 on the closed future cone, +inf outside.
inline ExtendedCost lagrangian_l2(const SpacetimeModel& model, const TangentVector& v) {
    const ExtendedCost l1 = lagrangian_l1(model, v);
    if (l1.is_infinite()) return ExtendedCost::infinity();
    return ExtendedCost::finite(l1.value() * l1.value());
}

/// Fiber derivative of L2 at a strictly timelike v:
///   dL2/dv = 2 L1(v) * (d tau(.) + g(v,.) / |v|_g).
inline Covector dl2_dv(const SpacetimeModel& model, const TangentVector& v) {
    if (model.cone_classify(v) != ConeClass::TimelikeFuture)
        throw Error(ErrorCode::NullOrSpacelikeVelocity, "fiber derivative needs strictly timelike v");
    const double vg = model.g_norm(v);
    if (vg < kStrictTimelikeEps * model.h_norm(v))
        throw Error(ErrorCode::NullOrSpacelikeVelocity, "|v|_g too close to the cone boundary");
    const double l1 = model.tau_differential(v.base).apply(v) - vg;
    const Covector dtau = model.tau_differential(v.base);
    const Covector gv = model.metric_covector(v);
    return Covector(v.base, 2.0 * l1 * (dtau.components + gv.components / vg));
}

/// Symmetric finite-difference fiber Hessian of L2 at strictly timelike v.
inline Eigen::MatrixXd fiber_hessian_fd(const SpacetimeModel& model, const TangentVector& v,
                                        double step = 0.0) {
    const int d = model.dimension();
    const double h = step > 0.0 ? step : 1e-5 * (1.0 + model.h_norm(v));
    auto l2 = [&](const Vec& comps) {
        const ExtendedCost c = lagrangian_l2(model, TangentVector(v.base, comps));
        if (c.is_infinite())
            throw Error(ErrorCode::NullOrSpacelikeVelocity, "Hessian stencil left the cone");
        return c.value();
    };
    Eigen::MatrixXd hess(d, d);
    const double f0 = l2(v.components);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            Vec e_i = Vec::Zero(d), e_j = Vec::Zero(d);
            e_i[i] = h;
            e_j[j] = h;
            double val;
            if (i == j) {
                val = (l2(v.components + e_i) - 2.0 * f0 + l2(v.components - e_i)) / (h * h);
            } else {
                val = (l2(v.components + e_i + e_j) - l2(v.components + e_i - e_j) -
                       l2(v.components - e_i + e_j) + l2(v.components - e_i - e_j)) /
                      (4.0 * h * h);
            }
            hess(i, j) = val;
            hess(j, i) = val;
        }
    }
    return hess;
}

struct CurveSample {
    double t = 0.0;
    Event point;
    TangentVector velocity;
};

using SampledCurve = std::vector<CurveSample>;

enum class ActionKind { A1, A2 };

/// Composite trapezoid action of a uniformly sampled curve; +inf as soon as a
/// sampled velocity leaves the closed future cone.
inline ExtendedCost action(const SpacetimeModel& model, const SampledCurve& curve,
                           ActionKind kind) {
    if (curve.size() < 2) return ExtendedCost::finite(0.0);
    const double dt = (curve.back().t - curve.front().t) / static_cast<double>(curve.size() - 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const ExtendedCost li = kind == ActionKind::A1 ? lagrangian_l1(model, curve[i].velocity)
                                                       : lagrangian_l2(model, curve[i].velocity);
        if (li.is_infinite()) return ExtendedCost::infinity();
        const double w = (i == 0 || i + 1 == curve.size()) ? 0.5 : 1.0;
        sum += w * li.value();
    }
    return ExtendedCost::finite(sum * dt);
}

/// Action minimizer between causally related endpoints, parametrized on [0,1]
/// so that L1 along the velocity field is constant.
struct MinimizerCurve {
    Event base;
    TangentVector initial_velocity;
    double duration = 1.0;
    SampledCurve samples;
};

inline constexpr int kDefaultActionNodes = 257;  // 256 trapezoid panels

inline MinimizerCurve minimizer(const SpacetimeModel& model, const Event& x, const Event& y,
                                int nodes = kDefaultActionNodes) {
    const CausalClass cls = model.classify(x, y);
    if (cls != CausalClass::Chronological && cls != CausalClass::NullCausal)
        throw Error(ErrorCode::NotCausallyRelated, "minimizer needs y in the causal future of x");
    if (nodes < 2) throw Error(ErrorCode::InvalidArgument, "need at least two sample nodes");

    MinimizerCurve out;
    out.base = x;
    out.duration = 1.0;
    const TangentVector v0 = model.connecting_velocity(x, y);

    if (model.flat()) {
        // Straight segment: velocity already constant, so L1 is too.
        out.initial_velocity = v0;
        out.samples.reserve(static_cast<std::size_t>(nodes));
        for (int i = 0; i < nodes; ++i) {
            const double s = static_cast<double>(i) / (nodes - 1);
            Event p(x.coords + s * v0.components);
            out.samples.push_back({s, p, TangentVector(p, v0.components)});
        }
        return out;
    }

    // Reparametrize the affine geodesic so the L1 integral grows linearly.
    const auto affine = integrate_geodesic(model, x, v0.components, 1.0);
    const double total = affine.back().action;
    if (total <= 0.0)
        throw Error(ErrorCode::FlowDomainExceeded, "vanishing action along the connecting geodesic");
    out.samples.reserve(static_cast<std::size_t>(nodes));
    for (int i = 0; i < nodes; ++i) {
        const double s = static_cast<double>(i) / (nodes - 1);
        FlowSample fs;
        if (i == 0) {
            fs = affine.front();
        } else if (i + 1 == nodes) {
            fs = affine.back();
        } else {
            fs = flow_to_action(model, x, v0.components, s * total);
        }
        Event p(fs.x);
        const double l1_here = detail::l1_raw(model, p, fs.v);
        if (l1_here <= 0.0)
            throw Error(ErrorCode::FlowDomainExceeded, "orbit touched the cone boundary");
        // Chain rule for the constant-L1 parametrization: ds/du = L1/total.
        out.samples.push_back({s, p, TangentVector(p, fs.v * (total / l1_here))});
    }
    out.initial_velocity = out.samples.front().velocity;
    return out;
}

/// Minimizer action with a grid-doubling consistency check: the trapezoid
/// value on the default grid must agree with the doubled grid to 1e-6
/// (integrands are smooth along timelike minimizers, so disagreement flags a
/// sampling problem rather than a quadrature limit).
inline ExtendedCost refined_action(const SpacetimeModel& model, const Event& x, const Event& y,
                                   ActionKind kind, int nodes = kDefaultActionNodes) {
    const MinimizerCurve coarse = minimizer(model, x, y, nodes);
    const MinimizerCurve fine = minimizer(model, x, y, 2 * (nodes - 1) + 1);
    const ExtendedCost a = action(model, coarse.samples, kind);
    const ExtendedCost b = action(model, fine.samples, kind);
    if (a.is_infinite() || b.is_infinite()) return ExtendedCost::infinity();
    if (std::abs(a.value() - b.value()) > 1e-6 * (1.0 + std::abs(b.value())))
        throw Error(ErrorCode::InvalidArgument, "quadrature failed the grid-doubling check");
    return b;
}

/// Endpoint map of the reparametrized geodesic flow: exp_L(x, v, t) follows
/// the orbit through (x, v) for flow time t. Flat models short-circuit to
/// x + t v; otherwise the geodesic ODE is integrated and the orbit is
/// reparametrized through the cumulative L1 integral.
inline Event exp_l(const SpacetimeModel& model, const Event& x, const TangentVector& v, double t) {
    if (v.base.coords != x.coords)
        throw Error(ErrorCode::InvalidArgument, "exp_l velocity must be based at x");
    const ConeClass cc = model.cone_classify(v);
    if (cc == ConeClass::Outside)
        throw Error(ErrorCode::FlowDomainExceeded, "exp_l needs a future causal direction");
    if (cc == ConeClass::Zero || t == 0.0) return x;
    if (t < 0.0) throw Error(ErrorCode::FlowDomainExceeded, "past flow not modeled");
    if (model.flat()) return Event(x.coords + t * v.components);

    const ExtendedCost l1 = lagrangian_l1(model, v);
    if (!l1.is_finite() || l1.value() <= 0.0)
        throw Error(ErrorCode::FlowDomainExceeded,
                    "ODE backend needs L1(v) > 0 for the reparametrization");
    const FlowSample hit = flow_to_action(model, x, v.components, t * l1.value());
    return Event(hit.x);
}

}  // namespace lorot
