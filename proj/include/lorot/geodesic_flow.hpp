#pragma once

#include <cmath>
#include <vector>

#include "lorot/spacetime.hpp"

namespace lorot {

namespace detail {

/// d tau(v) - |v|_g without cone gating; only evaluated along causal orbits.
inline double l1_raw(const SpacetimeModel& model, const Event& x, const Vec& vcomps) {
    TangentVector v(x, vcomps);
    return model.tau_differential(x).apply(v) - model.g_norm(v);
}

/// Geodesic right-hand side: x' = v, v'^k = -Gamma^k_ij v^i v^j, a' = L1(x,v).
inline void geodesic_rhs(const SpacetimeModel& model, const Vec& state, Vec& deriv,
                         std::vector<Eigen::MatrixXd>& gamma_buf) {
    const int d = model.dimension();
    const Vec x = state.head(d);
    const Vec v = state.segment(d, d);
    deriv.resize(2 * d + 1);
    deriv.head(d) = v;
    Event ev(x);
    model.christoffel(ev, gamma_buf);
    for (int k = 0; k < d; ++k) deriv[d + k] = -v.dot(gamma_buf[static_cast<std::size_t>(k)] * v);
    deriv[2 * d] = l1_raw(model, ev, v);
}

}  // namespace detail

struct FlowOptions {
    double abs_tol = 1e-9;
    int max_steps = 200000;
};

/// State of the geodesic flow at affine parameter u, with the cumulative
/// integral of L1 along the orbit.
struct FlowSample {
    double u = 0.0;
    Vec x;
    Vec v;
    double action = 0.0;
};

namespace detail {

// Cash-Karp 4(5) embedded pair.
inline bool rk45_step(const SpacetimeModel& model, const Vec& y, double h, Vec& y5, double& err,
                      std::vector<Eigen::MatrixXd>& gamma_buf) {
    static const double b21 = 1.0 / 5.0;
    static const double b31 = 3.0 / 40.0, b32 = 9.0 / 40.0;
    static const double b41 = 3.0 / 10.0, b42 = -9.0 / 10.0, b43 = 6.0 / 5.0;
    static const double b51 = -11.0 / 54.0, b52 = 5.0 / 2.0, b53 = -70.0 / 27.0, b54 = 35.0 / 27.0;
    static const double b61 = 1631.0 / 55296.0, b62 = 175.0 / 512.0, b63 = 575.0 / 13824.0,
                        b64 = 44275.0 / 110592.0, b65 = 253.0 / 4096.0;
    static const double c1 = 37.0 / 378.0, c3 = 250.0 / 621.0, c4 = 125.0 / 594.0,
                        c6 = 512.0 / 1771.0;
    static const double d1 = 2825.0 / 27648.0, d3 = 18575.0 / 48384.0, d4 = 13525.0 / 55296.0,
                        d5 = 277.0 / 14336.0, d6 = 1.0 / 4.0;

    Vec k1, k2, k3, k4, k5, k6, tmp;
    geodesic_rhs(model, y, k1, gamma_buf);
    tmp = y + h * b21 * k1;
    geodesic_rhs(model, tmp, k2, gamma_buf);
    tmp = y + h * (b31 * k1 + b32 * k2);
    geodesic_rhs(model, tmp, k3, gamma_buf);
    tmp = y + h * (b41 * k1 + b42 * k2 + b43 * k3);
    geodesic_rhs(model, tmp, k4, gamma_buf);
    tmp = y + h * (b51 * k1 + b52 * k2 + b53 * k3 + b54 * k4);
    geodesic_rhs(model, tmp, k5, gamma_buf);
    tmp = y + h * (b61 * k1 + b62 * k2 + b63 * k3 + b64 * k4 + b65 * k5);
    geodesic_rhs(model, tmp, k6, gamma_buf);

    y5 = y + h * (c1 * k1 + c3 * k3 + c4 * k4 + c6 * k6);
    const Vec y4 = y + h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6);
    err = (y5 - y4).cwiseAbs().maxCoeff();
    return y5.allFinite();
}

/// Classical RK4 over [0, h] in n_sub fixed substeps; used for in-step
/// refinement once the adaptive pass has bracketed a target.
inline Vec rk4_span(const SpacetimeModel& model, const Vec& y0, double h, int n_sub,
                    std::vector<Eigen::MatrixXd>& gamma_buf) {
    Vec y = y0, k1, k2, k3, k4, tmp;
    const double dt = h / n_sub;
    for (int s = 0; s < n_sub; ++s) {
        geodesic_rhs(model, y, k1, gamma_buf);
        tmp = y + 0.5 * dt * k1;
        geodesic_rhs(model, tmp, k2, gamma_buf);
        tmp = y + 0.5 * dt * k2;
        geodesic_rhs(model, tmp, k3, gamma_buf);
        tmp = y + dt * k3;
        geodesic_rhs(model, tmp, k4, gamma_buf);
        y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

inline Vec pack_state(const Event& x, const Vec& v, double action) {
    const auto d = x.coords.size();
    Vec y(2 * d + 1);
    y.head(d) = x.coords;
    y.segment(d, d) = v;
    y[2 * d] = action;
    return y;
}

inline FlowSample unpack_state(double u, const Vec& y) {
    const auto d = (y.size() - 1) / 2;
    FlowSample s;
    s.u = u;
    s.x = y.head(d);
    s.v = y.segment(d, d);
    s.action = y[y.size() - 1];
    return s;
}

}  // namespace detail

/// Integrates the geodesic ODE from (x, v) over the affine interval [0, u_end]
/// and returns the accepted-step states (first at u = 0, last exactly at
/// u_end). Throws FlowDomainExceeded when the step budget runs out.
inline std::vector<FlowSample> integrate_geodesic(const SpacetimeModel& model, const Event& x,
                                                  const Vec& v, double u_end,
                                                  const FlowOptions& opt = {}) {
    std::vector<Eigen::MatrixXd> gamma_buf;
    std::vector<FlowSample> out;
    Vec y = detail::pack_state(x, v, 0.0);
    double u = 0.0;
    out.push_back(detail::unpack_state(u, y));
    if (u_end == 0.0) return out;
    if (u_end < 0.0) throw Error(ErrorCode::FlowDomainExceeded, "past-directed flow not modeled");
    double h = std::min(u_end, 1e-2);
    int steps = 0;
    while (u < u_end) {
        if (++steps > opt.max_steps)
            throw Error(ErrorCode::FlowDomainExceeded, "geodesic step budget exhausted");
        h = std::min(h, u_end - u);
        Vec y_next;
        double err = 0.0;
        if (!detail::rk45_step(model, y, h, y_next, err, gamma_buf))
            throw Error(ErrorCode::FlowDomainExceeded, "geodesic state diverged");
        if (err <= opt.abs_tol || h <= 1e-14 * std::max(1.0, u_end)) {
            u += h;
            y = y_next;
            out.push_back(detail::unpack_state(u, y));
            const double grow = err > 0.0 ? 0.9 * std::pow(opt.abs_tol / err, 0.2) : 5.0;
            h *= std::clamp(grow, 0.2, 5.0);
        } else {
            h *= std::clamp(0.9 * std::pow(opt.abs_tol / err, 0.25), 0.1, 1.0);
        }
    }
    return out;
}

/// Follows the geodesic from (x, v) until the cumulative L1 integral reaches
/// target_action, refining inside the bracketing step. The integral is
/// strictly increasing whenever L1 > 0 along the orbit, so bisection applies.
inline FlowSample flow_to_action(const SpacetimeModel& model, const Event& x, const Vec& v,
                                 double target_action, const FlowOptions& opt = {}) {
    if (target_action <= 0.0) return detail::unpack_state(0.0, detail::pack_state(x, v, 0.0));
    std::vector<Eigen::MatrixXd> gamma_buf;
    Vec y = detail::pack_state(x, v, 0.0);
    double u = 0.0;
    double h = 1e-2;
    int steps = 0;
    const auto d2 = y.size() - 1;
    while (true) {
        if (++steps > opt.max_steps)
            throw Error(ErrorCode::FlowDomainExceeded, "action target beyond flow budget");
        Vec y_next;
        double err = 0.0;
        if (!detail::rk45_step(model, y, h, y_next, err, gamma_buf))
            throw Error(ErrorCode::FlowDomainExceeded, "geodesic state diverged");
        if (err > opt.abs_tol && h > 1e-13) {
            h *= std::clamp(0.9 * std::pow(opt.abs_tol / err, 0.25), 0.1, 1.0);
            continue;
        }
        if (y_next[d2] >= target_action) {
            // Bisect the step length until the in-step RK4 action matches.
            double lo = 0.0, hi = h;
            Vec y_hit = y_next;
            for (int it = 0; it < 80 && (hi - lo) > 1e-16 * h; ++it) {
                const double mid = 0.5 * (lo + hi);
                const Vec ym = detail::rk4_span(model, y, mid, 16, gamma_buf);
                if (ym[d2] >= target_action) {
                    hi = mid;
                    y_hit = ym;
                } else {
                    lo = mid;
                }
            }
            return detail::unpack_state(u + hi, y_hit);
        }
        u += h;
        y = y_next;
        const double grow = err > 0.0 ? 0.9 * std::pow(opt.abs_tol / err, 0.2) : 5.0;
        h *= std::clamp(grow, 0.2, 5.0);
    }
}

/// Minkowski metric routed through the generic ODE machinery (zero
/// Christoffels, flat() == false). Cross-check backend for the analytic path.
class MinkowskiOdeModel : public MinkowskiModel {
public:
    explicit MinkowskiOdeModel(int spatial_dim) : MinkowskiModel(spatial_dim) {}
    bool flat() const override { return false; }
};

}  // namespace lorot
