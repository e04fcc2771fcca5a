#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "lorot/potential.hpp"

namespace lorot {

inline constexpr double kTwistResidualTol = 1e-9;
inline constexpr double kMapResidualTol = 1e-4;
inline constexpr double kSnapTol = 1e-4;
inline constexpr double kTieTol = 1e-8;

/// Richardson-extrapolated central differences of the extended potential.
/// Every stencil value must be finite.
inline Covector numeric_gradient_phi(const PotentialPair& pp, const CostMatrix& m, const Event& x,
                                     double step = 0.0) {
    const int d = m.model->dimension();
    if (x.dim() != d) throw Error(ErrorCode::DimensionMismatch, "event dimension mismatch");
    const double scale = std::max(1.0, x.coords.norm());
    const double h = step > 0.0 ? step : 1e-5 * scale;
    auto phi_hat = [&](const Vec& coords) {
        const ExtReal v = extend_potential(pp, m, Event(coords));
        if (!v.is_finite())
            throw Error(ErrorCode::NonFiniteNeighborhood, "extended potential infinite near x");
        return v.value();
    };
    Vec grad(d);
    for (int a = 0; a < d; ++a) {
        Vec e = Vec::Zero(d);
        e[a] = 1.0;
        const double d_h = (phi_hat(x.coords + h * e) - phi_hat(x.coords - h * e)) / (2.0 * h);
        const double d_h2 = (phi_hat(x.coords + 0.5 * h * e) - phi_hat(x.coords - 0.5 * h * e)) / h;
        grad[a] = (4.0 * d_h2 - d_h) / 3.0;
    }
    return Covector(x, grad);
}

struct TwistInversion {
    TangentVector velocity;
    Event target;
    double residual = 0.0;
    int iterations = 0;
};

namespace detail {

inline Vec dl2_components(const SpacetimeModel& model, const Event& x, const Vec& vcomps) {
    return dl2_dv(model, TangentVector(x, vcomps)).components;
}

inline bool strictly_timelike(const SpacetimeModel& model, const Event& x, const Vec& vcomps) {
    TangentVector v(x, vcomps);
    if (model.cone_classify(v) != ConeClass::TimelikeFuture) return false;
    return model.g_norm(v) >= kStrictTimelikeEps * model.h_norm(v);
}

/// Deterministic seed directions for the Newton start; the fiber derivative
/// is 1-homogeneous, so each direction is radially rescaled onto p first.
inline std::vector<Vec> seed_directions(int d) {
    std::vector<Vec> dirs;
    Vec e0 = Vec::Zero(d);
    e0[0] = 1.0;
    dirs.push_back(e0);
    for (int a = 1; a < d; ++a) {
        for (double s : {0.3, 0.6, 0.9, -0.3, -0.6, -0.9}) {
            Vec v = e0;
            v[a] = s;
            dirs.push_back(v);
        }
    }
    return dirs;
}

}  // namespace detail

/// Solves dL2/dv(x, v) = p for a strictly timelike v and maps it forward:
/// y = exp_L(x, v, 1). Damped Newton with the finite-difference fiber Hessian
/// (positive definite on the open cone, so the iteration is locally
/// well-posed); rejection carries NoTimelikeSolution.
inline TwistInversion invert_twist(const SpacetimeModel& model, const Event& x, const Covector& p,
                                   std::optional<TangentVector> init = std::nullopt) {
    const int d = model.dimension();
    if (p.dim() != d) throw Error(ErrorCode::DimensionMismatch, "covector dimension mismatch");
    const double p_norm = p.components.norm();
    const double tol = kTwistResidualTol * (1.0 + p_norm);

    auto residual_of = [&](const Vec& v) {
        return (detail::dl2_components(model, x, v) - p.components).norm();
    };

    Vec v;
    if (init && detail::strictly_timelike(model, x, init->components)) {
        v = init->components;
    } else {
        double best_res = std::numeric_limits<double>::infinity();
        for (const Vec& dir : detail::seed_directions(d)) {
            if (!detail::strictly_timelike(model, x, dir)) continue;
            const Vec q = detail::dl2_components(model, x, dir);
            const double qq = q.squaredNorm();
            if (qq <= 0.0) continue;
            // dl2_dv(t v) = t dl2_dv(v): pick the scale matching p best.
            const double t = std::max(q.dot(p.components) / qq, 1e-6);
            const Vec cand = t * dir;
            if (!detail::strictly_timelike(model, x, cand)) continue;
            const double r = residual_of(cand);
            if (r < best_res) {
                best_res = r;
                v = cand;
            }
        }
        if (v.size() == 0)
            throw Error(ErrorCode::NoTimelikeSolution, "no timelike Newton seed");
    }

    double res = residual_of(v);
    TwistInversion out;
    const int max_iter = 120;
    int it = 0;
    for (; it < max_iter && res > tol; ++it) {
        const Vec F = detail::dl2_components(model, x, v) - p.components;
        const Eigen::MatrixXd J = fiber_hessian_fd(model, TangentVector(x, v));
        Eigen::LDLT<Eigen::MatrixXd> ldlt(J);
        if (ldlt.info() != Eigen::Success)
            throw Error(ErrorCode::NoTimelikeSolution, "fiber Hessian not factorizable");
        const Vec dv = ldlt.solve(-F);
        double alpha = 1.0;
        bool stepped = false;
        for (int bt = 0; bt < 60; ++bt) {
            const Vec cand = v + alpha * dv;
            if (detail::strictly_timelike(model, x, cand)) {
                const double r = residual_of(cand);
                if (r < res) {
                    v = cand;
                    res = r;
                    stepped = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!stepped) break;  // stagnated
    }
    if (res > tol)
        throw Error(ErrorCode::NoTimelikeSolution,
                    "twist inversion stagnated (p outside the fiber-derivative image?)");
    out.velocity = TangentVector(x, v);
    out.target = exp_l(model, x, out.velocity, 1.0);
    out.residual = res;
    out.iterations = it;
    return out;
}

enum class MapEntryStatus {
    GradientMatched,   // gradient path ran and landed on the argmax target
    GradientSkipped,   // argmax target used; gradient path unavailable (kink)
    Ambiguous,         // argmax tie within the tie tolerance
};

inline const char* to_string(MapEntryStatus s) {
    switch (s) {
        case MapEntryStatus::GradientMatched: return "gradient_matched";
        case MapEntryStatus::GradientSkipped: return "gradient_skipped";
        case MapEntryStatus::Ambiguous:       return "ambiguous";
    }
    return "?";
}

struct MapEntry {
    int source_index = 0;
    int target_index = 0;  // argmax-selected target support index
    Event target;
    TangentVector velocity;  // solved twist-inversion velocity (gradient route)
    Covector gradient;       // numeric gradient of the extended potential
    double residual = -1.0;  // |dc2_dx(x,T(x)) + dphi| / (1+|dphi|); -1 when skipped
    double separation = 0.0;
    MapEntryStatus status = MapEntryStatus::GradientSkipped;
};

struct TransportMap {
    std::vector<MapEntry> entries;
    std::vector<int> ambiguous_sources;
    int gradient_matched = 0;

    bool has_ambiguity() const { return !ambiguous_sources.empty(); }
};

/// Recovers the transport map from the potentials. The argmax oracle
/// argmax_j(psi_j - c2(x, y_j)) selects the target per mass-carrying source
/// point; the gradient route (numeric gradient + twist inversion) must land
/// on the same point and is reported as skipped near kinks where the
/// extended potential is not differentiable.
///
/// The map machinery runs on an anchor-averaged pi-solution over the plan
/// support rather than on pp itself: a single anchored chain solution ties
/// along its longest-path tree, while surviving ties in the averaged dual
/// pin down genuinely non-unique plans (reported as Ambiguous).
inline TransportMap recover_map(const PotentialPair& pp, const SolveResult& solved,
                                const CostMatrix& m, double tie_tol = kTieTol,
                                double snap_tol = kSnapTol) {
    TransportMap tm;
    const DiscreteMeasure& mu = solved.coupling.source;
    const PotentialPair sharp = strengthen_pi_solution(solved.support(), m);
    for (int i = 0; i < m.rows(); ++i) {
        if (mu.weights[static_cast<std::size_t>(i)] <= 0.0) continue;
        const Event& x = m.xs[static_cast<std::size_t>(i)];
        // Argmax oracle with tie detection.
        int best_j = -1;
        ExtReal best = ExtReal::minus_inf();
        ExtReal second = ExtReal::minus_inf();
        for (int j = 0; j < m.cols(); ++j) {
            const ExtReal term = convexify_term(sharp.psi[static_cast<std::size_t>(j)], m.at(i, j));
            if (best < term) {
                second = best;
                best = term;
                best_j = j;
            } else if (second < term) {
                second = term;
            }
        }
        if (best_j < 0 || !best.is_finite())
            throw Error(ErrorCode::NoTimelikeSolution, "argmax oracle found no finite target");
        // The handed-in pi-solution must also be tight at the selected pair
        // (the averaged tight set is contained in each constituent's).
        {
            const ExtReal diff = potential_diff(pp.psi[static_cast<std::size_t>(best_j)],
                                                pp.phi[static_cast<std::size_t>(i)]);
            if (!diff.is_finite() || !m.at(i, best_j).is_finite() ||
                std::abs(diff.value() - m.at(i, best_j).value()) > 1e-6)
                throw Error(ErrorCode::InvalidArgument,
                            "potential pair is not tight at the selected target");
        }
        MapEntry entry;
        entry.source_index = i;
        entry.target_index = best_j;
        entry.target = m.ys[static_cast<std::size_t>(best_j)];
        entry.separation = m.model->distance(x, entry.target);
        const bool tie = second.is_finite() && best.value() - second.value() <= tie_tol;
        if (tie) {
            entry.status = MapEntryStatus::Ambiguous;
            tm.ambiguous_sources.push_back(i);
            tm.entries.push_back(entry);
            continue;
        }
        // Gradient route, warm-started at the argmax connecting velocity.
        entry.status = MapEntryStatus::GradientSkipped;
        if (m.model->classify(x, entry.target) == CausalClass::Chronological) {
            try {
                const Covector grad = numeric_gradient_phi(sharp, m, x);
                const TangentVector warm = m.model->connecting_velocity(x, entry.target);
                const TwistInversion inv = invert_twist(*m.model, x, grad, warm);
                const double dist_to_argmax =
                    (inv.target.coords - entry.target.coords).norm() / (1.0 + entry.target.coords.norm());
                if (dist_to_argmax <= snap_tol) {
                    const Covector dcx = dc2_dx(*m.model, x, entry.target);
                    entry.velocity = inv.velocity;
                    entry.gradient = grad;
                    entry.residual = (dcx.components + grad.components).norm() /
                                     (1.0 + grad.components.norm());
                    entry.status = MapEntryStatus::GradientMatched;
                    ++tm.gradient_matched;
                }
            } catch (const Error&) {
                // kink or cone-boundary start: argmax result stands, path skipped
            }
        }
        tm.entries.push_back(entry);
    }
    return tm;
}

struct MapCouplingReport {
    bool rows_concentrated = true;   // each plan row has a single mass cell
    bool rows_match_map = true;      // that cell is the map target
    bool pushforward_matches = true; // T#mu == nu within tolerance
    std::vector<int> split_rows;
    std::vector<int> mismatched_rows;
    double max_weight_defect = 0.0;

    bool ok() const { return rows_concentrated && rows_match_map && pushforward_matches; }
};

inline MapCouplingReport verify_map_induces_coupling(const TransportMap& tm,
                                                     const SolveResult& solved,
                                                     double tol = 1e-10) {
    MapCouplingReport rep;
    const Coupling& c = solved.coupling;
    std::vector<const MapEntry*> by_source(static_cast<std::size_t>(c.source.size()), nullptr);
    for (const MapEntry& e : tm.entries) by_source[static_cast<std::size_t>(e.source_index)] = &e;

    for (int i = 0; i < c.source.size(); ++i) {
        int nonzero = 0;
        int col = -1;
        for (const PlanEntry& e : c.plan) {
            if (e.i != i || e.mass <= tol) continue;
            ++nonzero;
            col = e.j;
        }
        if (nonzero > 1) {
            rep.rows_concentrated = false;
            rep.split_rows.push_back(i);
            continue;
        }
        const MapEntry* me = by_source[static_cast<std::size_t>(i)];
        if (me && nonzero == 1 && me->target_index != col) {
            rep.rows_match_map = false;
            rep.mismatched_rows.push_back(i);
        }
    }

    if (rep.rows_concentrated && rep.rows_match_map) {
        std::vector<Event> images;
        images.reserve(static_cast<std::size_t>(c.source.size()));
        bool have_all = true;
        for (int i = 0; i < c.source.size(); ++i) {
            const MapEntry* me = by_source[static_cast<std::size_t>(i)];
            if (!me) {
                have_all = false;
                break;
            }
            images.push_back(me->target);
        }
        if (have_all) {
            const DiscreteMeasure push = pushforward(c.source, images);
            // Compare against nu point by point (exact coordinates).
            for (int j = 0; j < c.target.size(); ++j) {
                double got = 0.0;
                for (int k = 0; k < push.size(); ++k)
                    if (push.points[static_cast<std::size_t>(k)] == c.target.points[static_cast<std::size_t>(j)])
                        got = push.weights[static_cast<std::size_t>(k)];
                const double defect = std::abs(got - c.target.weights[static_cast<std::size_t>(j)]);
                rep.max_weight_defect = std::max(rep.max_weight_defect, defect);
                if (defect > tol) rep.pushforward_matches = false;
            }
        } else {
            rep.pushforward_matches = false;
        }
    } else {
        rep.pushforward_matches = false;
    }
    return rep;
}

}  // namespace lorot
