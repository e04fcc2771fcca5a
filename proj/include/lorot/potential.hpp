#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lorot/cost.hpp"
#include "lorot/extended_real.hpp"
#include "lorot/kantorovich.hpp"
#include "lorot/measure.hpp"

namespace lorot {

inline constexpr double kSupportEqTol = 1e-8;

/// psi(y) = inf_x (c2(x,y) + phi(x)), with (+inf) + (-inf) := +inf.
inline std::vector<ExtReal> c2_transform(const std::vector<ExtReal>& phi, const CostMatrix& m) {
    if (static_cast<int>(phi.size()) != m.rows())
        throw Error(ErrorCode::DimensionMismatch, "phi size / matrix rows mismatch");
    std::vector<ExtReal> psi(static_cast<std::size_t>(m.cols()), ExtReal::plus_inf());
    for (int j = 0; j < m.cols(); ++j) {
        ExtReal best = ExtReal::plus_inf();
        for (int i = 0; i < m.rows(); ++i) {
            const ExtReal term = transform_term(m.at(i, j), phi[static_cast<std::size_t>(i)]);
            if (term < best) best = term;
        }
        psi[static_cast<std::size_t>(j)] = best;
    }
    return psi;
}

/// phi(x) = sup_y (psi(y) - c2(x,y)), with (+inf) - (+inf) := -inf.
inline std::vector<ExtReal> c2_convexify(const std::vector<ExtReal>& psi, const CostMatrix& m) {
    if (static_cast<int>(psi.size()) != m.cols())
        throw Error(ErrorCode::DimensionMismatch, "psi size / matrix cols mismatch");
    std::vector<ExtReal> phi(static_cast<std::size_t>(m.rows()), ExtReal::minus_inf());
    for (int i = 0; i < m.rows(); ++i) {
        ExtReal best = ExtReal::minus_inf();
        for (int j = 0; j < m.cols(); ++j) {
            const ExtReal term = convexify_term(psi[static_cast<std::size_t>(j)], m.at(i, j));
            if (best < term) best = term;
        }
        phi[static_cast<std::size_t>(i)] = best;
    }
    return phi;
}

/// Weak dual potentials: phi on the source support, psi = transform(phi) on
/// the target support, anchored so phi(x_anchor) = 0.
struct PotentialPair {
    std::vector<ExtReal> phi;
    std::vector<ExtReal> psi;
    int anchor_i = 0;
    int anchor_j = 0;
    int relaxation_rounds = 0;
    std::vector<std::string> log;
};

namespace detail {

struct ChainPhi {
    std::vector<double> phi;  // unreachable sources carry -inf
    int rounds = 0;
};

/// Longest-path core of the chain construction over the pair graph with edge
/// weight w(p -> q) = c2(x_p, y_p) - c2(x_q, y_p). Monotonicity of the
/// support means no positive cycles, so Bellman relaxation settles within
/// |support| passes; a pass beyond that bound proves a violation.
inline ChainPhi chain_phi(const std::vector<std::pair<int, int>>& support, const CostMatrix& m,
                          int anchor_pos) {
    const int s = static_cast<int>(support.size());
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> dist(static_cast<std::size_t>(s), neg_inf);
    dist[static_cast<std::size_t>(anchor_pos)] = 0.0;
    auto edge_weight = [&](int p, int q) {
        const auto& [ip, jp] = support[static_cast<std::size_t>(p)];
        const int iq = support[static_cast<std::size_t>(q)].first;
        const ExtendedCost& step = m.at(iq, jp);
        if (step.is_infinite()) return neg_inf;
        return m.at(ip, jp).value() - step.value();
    };

    ChainPhi out;
    for (out.rounds = 0; out.rounds < s + 1; ++out.rounds) {
        bool changed = false;
        for (int p = 0; p < s; ++p) {
            if (dist[static_cast<std::size_t>(p)] == neg_inf) continue;
            for (int q = 0; q < s; ++q) {
                if (q == p) continue;
                const double w = edge_weight(p, q);
                if (w == neg_inf) continue;
                const double cand = dist[static_cast<std::size_t>(p)] + w;
                if (cand > dist[static_cast<std::size_t>(q)] + 1e-15) {
                    dist[static_cast<std::size_t>(q)] = cand;
                    changed = true;
                }
            }
        }
        if (!changed) break;
        if (out.rounds == s)
            throw Error(ErrorCode::MonotonicityViolated,
                        "positive chain cycle: support is not c2-monotone");
    }

    // Terminal hop from each reachable pair to each source point.
    out.phi.assign(static_cast<std::size_t>(m.rows()), neg_inf);
    for (int i = 0; i < m.rows(); ++i) {
        double best = neg_inf;
        for (int p = 0; p < s; ++p) {
            if (dist[static_cast<std::size_t>(p)] == neg_inf) continue;
            const auto& [ip, jp] = support[static_cast<std::size_t>(p)];
            const ExtendedCost& hop = m.at(i, jp);
            if (hop.is_infinite()) continue;
            best = std::max(best, dist[static_cast<std::size_t>(p)] + m.at(ip, jp).value() - hop.value());
        }
        out.phi[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

inline int find_anchor(const std::vector<std::pair<int, int>>& support, const CostMatrix& m,
                       std::pair<int, int> anchor) {
    int anchor_pos = -1;
    for (int p = 0; p < static_cast<int>(support.size()); ++p) {
        const auto& [i, j] = support[static_cast<std::size_t>(p)];
        if (!m.at(i, j).is_finite())
            throw Error(ErrorCode::InvalidArgument, "support contains a forbidden arc");
        if (support[static_cast<std::size_t>(p)] == anchor) anchor_pos = p;
    }
    if (anchor_pos < 0)
        throw Error(ErrorCode::AnchorNotInSupport, "anchor pair is not a support pair");
    return anchor_pos;
}

}  // namespace detail

/// Chain construction of a pi-solution over a monotone support:
///   phi(x) = sup over chains (p_0 = anchor, p_1, ..., p_k) in the support of
///            sum_i [ c2(x_i, y_i) - c2(x_{i+1}, y_i) ],  x_{k+1} := x,
/// computed as a single-source longest path; phi(anchor source) = 0.
inline PotentialPair build_pi_solution(const std::vector<std::pair<int, int>>& support,
                                       const CostMatrix& m, std::pair<int, int> anchor) {
    if (support.empty()) throw Error(ErrorCode::InvalidArgument, "empty support");
    const int anchor_pos = detail::find_anchor(support, m, anchor);
    const detail::ChainPhi chain = detail::chain_phi(support, m, anchor_pos);

    PotentialPair out;
    out.relaxation_rounds = chain.rounds;
    out.phi.assign(static_cast<std::size_t>(m.rows()), ExtReal::minus_inf());
    for (int i = 0; i < m.rows(); ++i) {
        const double v = chain.phi[static_cast<std::size_t>(i)];
        if (std::isfinite(v)) out.phi[static_cast<std::size_t>(i)] = ExtReal::finite(v);
    }

    // Anchor normalization: chains ending back at the anchor source are
    // non-positive on monotone supports, so this only strips roundoff.
    const int ai = anchor.first;
    if (out.phi[static_cast<std::size_t>(ai)].is_finite()) {
        const double shift = out.phi[static_cast<std::size_t>(ai)].value();
        for (auto& p : out.phi)
            if (p.is_finite()) p = ExtReal::finite(p.value() - shift);
    }
    out.psi = c2_transform(out.phi, m);
    out.anchor_i = anchor.first;
    out.anchor_j = anchor.second;
    out.log.push_back("pairs=" + std::to_string(support.size()) +
                      " rounds=" + std::to_string(out.relaxation_rounds));
    return out;
}

/// Convex combination of chain solutions over several anchors. Any convex
/// combination of optimal dual pairs is again a pi-solution (still tight on
/// the support), while its off-support tight set is the intersection of the
/// individual ones. Anchored chain solutions are tight along their whole
/// longest-path tree, so averaging strips those accidental ties; ties that
/// survive every anchor signal genuinely non-unique optimal plans.
inline PotentialPair strengthen_pi_solution(const std::vector<std::pair<int, int>>& support,
                                            const CostMatrix& m, int max_anchors = 64) {
    if (support.empty()) throw Error(ErrorCode::InvalidArgument, "empty support");
    for (const auto& [i, j] : support)
        if (!m.at(i, j).is_finite())
            throw Error(ErrorCode::InvalidArgument, "support contains a forbidden arc");

    const int s = static_cast<int>(support.size());
    const int count = std::min(s, max_anchors);
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> sum(static_cast<std::size_t>(m.rows()), 0.0);
    std::vector<char> reachable(static_cast<std::size_t>(m.rows()), 1);
    int used = 0;
    int rounds = 0;
    for (int a = 0; a < count; ++a) {
        const detail::ChainPhi chain = detail::chain_phi(support, m, a);
        rounds = std::max(rounds, chain.rounds);
        // Only average solutions finite on every source the support touches;
        // a disconnected chain graph falls back to the plain anchored build.
        bool finite_on_sources = true;
        for (const auto& [i, j] : support) {
            (void)j;
            if (chain.phi[static_cast<std::size_t>(i)] == neg_inf) finite_on_sources = false;
        }
        if (!finite_on_sources) continue;
        for (int i = 0; i < m.rows(); ++i) {
            if (chain.phi[static_cast<std::size_t>(i)] == neg_inf)
                reachable[static_cast<std::size_t>(i)] = 0;
            else
                sum[static_cast<std::size_t>(i)] += chain.phi[static_cast<std::size_t>(i)];
        }
        ++used;
    }
    if (used == 0) return build_pi_solution(support, m, support.front());

    PotentialPair out;
    out.relaxation_rounds = rounds;
    out.phi.assign(static_cast<std::size_t>(m.rows()), ExtReal::minus_inf());
    for (int i = 0; i < m.rows(); ++i)
        if (reachable[static_cast<std::size_t>(i)])
            out.phi[static_cast<std::size_t>(i)] = ExtReal::finite(sum[static_cast<std::size_t>(i)] / used);
    out.psi = c2_transform(out.phi, m);
    out.anchor_i = support.front().first;
    out.anchor_j = support.front().second;
    out.log.push_back("averaged_anchors=" + std::to_string(used));
    return out;
}

struct PiSolutionReport {
    bool inequality_ok = true;                      // psi - phi <= c2 everywhere
    bool support_equality_ok = true;                // tight on every plan entry
    bool finite_on_support_ok = true;               // finite where mass sits
    std::vector<std::pair<int, int>> inequality_violations;
    std::vector<std::pair<int, int>> equality_violations;
    std::vector<int> nonfinite_phi;
    std::vector<int> nonfinite_psi;
    double max_equality_defect = 0.0;

    bool ok() const { return inequality_ok && support_equality_ok && finite_on_support_ok; }
};

inline PiSolutionReport verify_pi_solution(const PotentialPair& pp, const Coupling& coupling,
                                           const CostMatrix& m, double tol = kSupportEqTol) {
    PiSolutionReport rep;
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            const ExtReal diff = potential_diff(pp.psi[static_cast<std::size_t>(j)],
                                                pp.phi[static_cast<std::size_t>(i)]);
            if (!leq_cost(diff, m.at(i, j), tol)) {
                rep.inequality_ok = false;
                rep.inequality_violations.emplace_back(i, j);
            }
        }
    }
    for (const PlanEntry& e : coupling.plan) {
        if (e.mass <= 0.0) continue;
        const ExtReal& phi = pp.phi[static_cast<std::size_t>(e.i)];
        const ExtReal& psi = pp.psi[static_cast<std::size_t>(e.j)];
        const ExtendedCost& c = m.at(e.i, e.j);
        if (!phi.is_finite() || !psi.is_finite() || c.is_infinite()) {
            rep.support_equality_ok = false;
            rep.equality_violations.emplace_back(e.i, e.j);
            continue;
        }
        const double defect = std::abs(psi.value() - phi.value() - c.value());
        rep.max_equality_defect = std::max(rep.max_equality_defect, defect);
        if (defect > tol) {
            rep.support_equality_ok = false;
            rep.equality_violations.emplace_back(e.i, e.j);
        }
    }
    for (int i = 0; i < coupling.source.size(); ++i)
        if (coupling.source.weights[static_cast<std::size_t>(i)] > 0.0 &&
            !pp.phi[static_cast<std::size_t>(i)].is_finite()) {
            rep.finite_on_support_ok = false;
            rep.nonfinite_phi.push_back(i);
        }
    for (int j = 0; j < coupling.target.size(); ++j)
        if (coupling.target.weights[static_cast<std::size_t>(j)] > 0.0 &&
            !pp.psi[static_cast<std::size_t>(j)].is_finite()) {
            rep.finite_on_support_ok = false;
            rep.nonfinite_psi.push_back(j);
        }
    return rep;
}

/// Dual objective minus primal cost: zero for a pi-solution, negative for
/// merely feasible potential pairs (weak duality).
inline double duality_gap(const PotentialPair& pp, const SolveResult& solved,
                          const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    double dual = 0.0;
    for (int j = 0; j < nu.size(); ++j) {
        const double w = nu.weights[static_cast<std::size_t>(j)];
        if (w <= 0.0) continue;
        const ExtReal& psi = pp.psi[static_cast<std::size_t>(j)];
        if (!psi.is_finite())
            throw Error(ErrorCode::NonIntegrablePotential, "infinite psi carries mass");
        dual += w * psi.value();
    }
    for (int i = 0; i < mu.size(); ++i) {
        const double w = mu.weights[static_cast<std::size_t>(i)];
        if (w <= 0.0) continue;
        const ExtReal& phi = pp.phi[static_cast<std::size_t>(i)];
        if (!phi.is_finite())
            throw Error(ErrorCode::NonIntegrablePotential, "infinite phi carries mass");
        dual -= w * phi.value();
    }
    return dual - solved.total_cost.value();
}

/// Canonical c2-convex extension of the potential off the source support:
/// phi_hat(x) = max_j (psi(y_j) - c2(x, y_j)) under the sup convention.
inline ExtReal extend_potential(const PotentialPair& pp, const CostMatrix& m, const Event& x) {
    ExtReal best = ExtReal::minus_inf();
    for (int j = 0; j < m.cols(); ++j) {
        const ExtendedCost c = cost_c2(*m.model, x, m.ys[static_cast<std::size_t>(j)]);
        const ExtReal term = convexify_term(pp.psi[static_cast<std::size_t>(j)], c);
        if (best < term) best = term;
    }
    return best;
}

}  // namespace lorot
