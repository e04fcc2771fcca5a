#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "lorot/cost.hpp"
#include "lorot/measure.hpp"

namespace lorot {

inline constexpr double kDualityTol = 1e-8;
inline constexpr double kMonotoneTol = 1e-9;

namespace detail {

struct ResEdge {
    int to;
    double cap;
    double cost;
    int rev;  // index of the paired reverse edge in adj[to]
};

struct ResGraph {
    std::vector<std::vector<ResEdge>> adj;

    explicit ResGraph(int n) : adj(static_cast<std::size_t>(n)) {}

    void add_edge(int u, int v, double cap, double cost) {
        adj[static_cast<std::size_t>(u)].push_back(
            {v, cap, cost, static_cast<int>(adj[static_cast<std::size_t>(v)].size())});
        adj[static_cast<std::size_t>(v)].push_back(
            {u, 0.0, -cost, static_cast<int>(adj[static_cast<std::size_t>(u)].size()) - 1});
    }
};

/// Deterministic Bellman-Ford over the residual graph. Fixed scan order and
/// strict-improvement relaxation make predecessors reproducible.
inline bool shortest_path(const ResGraph& g, int s, int t, std::vector<int>& pred_node,
                          std::vector<int>& pred_edge, std::vector<double>& dist) {
    const int n = static_cast<int>(g.adj.size());
    const double inf = std::numeric_limits<double>::infinity();
    dist.assign(static_cast<std::size_t>(n), inf);
    pred_node.assign(static_cast<std::size_t>(n), -1);
    pred_edge.assign(static_cast<std::size_t>(n), -1);
    dist[static_cast<std::size_t>(s)] = 0.0;
    for (int round = 0; round < n; ++round) {
        bool changed = false;
        for (int u = 0; u < n; ++u) {
            const double du = dist[static_cast<std::size_t>(u)];
            if (du == inf) continue;
            const auto& edges = g.adj[static_cast<std::size_t>(u)];
            for (int k = 0; k < static_cast<int>(edges.size()); ++k) {
                const ResEdge& e = edges[static_cast<std::size_t>(k)];
                if (e.cap <= 0.0) continue;
                if (du + e.cost < dist[static_cast<std::size_t>(e.to)] - 1e-15) {
                    dist[static_cast<std::size_t>(e.to)] = du + e.cost;
                    pred_node[static_cast<std::size_t>(e.to)] = u;
                    pred_edge[static_cast<std::size_t>(e.to)] = k;
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    return dist[static_cast<std::size_t>(t)] < inf;
}

/// Max-flow (Edmonds-Karp) used only for the feasibility decision.
inline double max_flow(ResGraph& g, int s, int t) {
    double total = 0.0;
    while (true) {
        std::vector<int> pred_node(g.adj.size(), -1), pred_edge(g.adj.size(), -1);
        std::vector<int> queue{s};
        pred_node[static_cast<std::size_t>(s)] = s;
        for (std::size_t qi = 0; qi < queue.size() && pred_node[static_cast<std::size_t>(t)] < 0; ++qi) {
            const int u = queue[qi];
            const auto& edges = g.adj[static_cast<std::size_t>(u)];
            for (int k = 0; k < static_cast<int>(edges.size()); ++k) {
                const ResEdge& e = edges[static_cast<std::size_t>(k)];
                if (e.cap > 0.0 && pred_node[static_cast<std::size_t>(e.to)] < 0) {
                    pred_node[static_cast<std::size_t>(e.to)] = u;
                    pred_edge[static_cast<std::size_t>(e.to)] = k;
                    queue.push_back(e.to);
                }
            }
        }
        if (pred_node[static_cast<std::size_t>(t)] < 0) return total;
        double push = std::numeric_limits<double>::infinity();
        for (int v = t; v != s; v = pred_node[static_cast<std::size_t>(v)]) {
            const int u = pred_node[static_cast<std::size_t>(v)];
            push = std::min(push, g.adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(pred_edge[static_cast<std::size_t>(v)])].cap);
        }
        for (int v = t; v != s; v = pred_node[static_cast<std::size_t>(v)]) {
            const int u = pred_node[static_cast<std::size_t>(v)];
            ResEdge& e = g.adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(pred_edge[static_cast<std::size_t>(v)])];
            e.cap -= push;
            g.adj[static_cast<std::size_t>(e.to)][static_cast<std::size_t>(e.rev)].cap += push;
        }
        total += push;
    }
}

}  // namespace detail

/// True iff some transportation plan moves all mass across finite-cost arcs
/// (max-flow value 1 on the bipartite admissibility graph).
inline bool check_causally_related(const CostMatrix& m, const DiscreteMeasure& mu,
                                   const DiscreteMeasure& nu) {
    const int rows = m.rows(), cols = m.cols();
    if (rows != mu.size() || cols != nu.size())
        throw Error(ErrorCode::DimensionMismatch, "matrix/measure size mismatch");
    const int S = rows + cols, T = rows + cols + 1;
    detail::ResGraph g(rows + cols + 2);
    for (int i = 0; i < rows; ++i) g.add_edge(S, i, mu.weights[static_cast<std::size_t>(i)], 0.0);
    for (int j = 0; j < cols; ++j) g.add_edge(rows + j, T, nu.weights[static_cast<std::size_t>(j)], 0.0);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            if (m.at(i, j).is_finite()) g.add_edge(i, rows + j, std::numeric_limits<double>::infinity(), 0.0);
    return detail::max_flow(g, S, T) >= 1.0 - 1e-9;
}

struct SolveStats {
    int augmentations = 0;
    int purification_moves = 0;
};

struct SolveResult {
    Coupling coupling;
    ExtendedCost total_cost;
    std::vector<double> dual_u;
    std::vector<double> dual_v;
    SolveStats stats;

    std::vector<std::pair<int, int>> support() const {
        std::vector<std::pair<int, int>> s;
        s.reserve(coupling.plan.size());
        for (const PlanEntry& e : coupling.plan) s.emplace_back(e.i, e.j);
        return s;
    }
};

namespace detail {

/// Removes support cycles by shifting mass around them; at optimality every
/// support cycle has zero alternating cost, so the plan stays optimal and
/// ends on a vertex of the transportation polytope.
inline int purify_plan(std::vector<double>& x, int rows, int cols) {
    int moves = 0;
    auto mass = [&](int i, int j) -> double& {
        return x[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(j)];
    };
    while (true) {
        // Spanning forest over the bipartite support graph; the first
        // non-tree support arc closes a cycle.
        const int V = rows + cols;
        std::vector<int> parent(static_cast<std::size_t>(V), -2);
        std::vector<std::pair<int, int>> cycle_arc{};
        bool found = false;
        for (int root = 0; root < V && !found; ++root) {
            if (parent[static_cast<std::size_t>(root)] != -2) continue;
            std::vector<int> stack{root};
            parent[static_cast<std::size_t>(root)] = -1;
            while (!stack.empty() && !found) {
                const int u = stack.back();
                stack.pop_back();
                if (u < rows) {
                    for (int j = 0; j < cols && !found; ++j) {
                        if (mass(u, j) <= 0.0) continue;
                        const int w = rows + j;
                        if (parent[static_cast<std::size_t>(w)] == -2) {
                            parent[static_cast<std::size_t>(w)] = u;
                            stack.push_back(w);
                        } else if (parent[static_cast<std::size_t>(u)] != w) {
                            cycle_arc = {{u, w}};
                            found = true;
                        }
                    }
                } else {
                    const int j = u - rows;
                    for (int i = 0; i < rows && !found; ++i) {
                        if (mass(i, j) <= 0.0) continue;
                        if (parent[static_cast<std::size_t>(i)] == -2) {
                            parent[static_cast<std::size_t>(i)] = u;
                            stack.push_back(i);
                        } else if (parent[static_cast<std::size_t>(u)] != i) {
                            cycle_arc = {{i, u}};
                            found = true;
                        }
                    }
                }
            }
        }
        if (!found) return moves;

        // Recover the tree paths from both endpoints of the closing arc up to
        // their common ancestor, forming the alternating cycle.
        auto path_to_root = [&](int v) {
            std::vector<int> p{v};
            while (parent[static_cast<std::size_t>(v)] >= 0) {
                v = parent[static_cast<std::size_t>(v)];
                p.push_back(v);
            }
            return p;
        };
        std::vector<int> pa = path_to_root(cycle_arc[0].first);
        std::vector<int> pb = path_to_root(cycle_arc[0].second);
        // Trim to the lowest common ancestor.
        int ia = static_cast<int>(pa.size()) - 1, ib = static_cast<int>(pb.size()) - 1;
        while (ia > 0 && ib > 0 && pa[static_cast<std::size_t>(ia - 1)] == pb[static_cast<std::size_t>(ib - 1)]) {
            --ia;
            --ib;
        }
        std::vector<int> cycle;  // vertices, starting at arc.first, ending before arc.first again
        for (int k = 0; k <= ia; ++k) cycle.push_back(pa[static_cast<std::size_t>(k)]);
        for (int k = ib - 1; k >= 0; --k) cycle.push_back(pb[static_cast<std::size_t>(k)]);

        // Alternate +/- starting with the closing arc as +.
        struct CycArc { int i, j; int sign; };
        std::vector<CycArc> arcs;
        {
            const int u = cycle_arc[0].first, w = cycle_arc[0].second;
            arcs.push_back({u, w - rows, +1});
        }
        int sign = -1;
        for (std::size_t k = 0; k + 1 < cycle.size(); ++k) {
            const int a = cycle[k], b = cycle[k + 1];
            const int i = a < rows ? a : b;
            const int j = a < rows ? b - rows : a - rows;
            arcs.push_back({i, j, sign});
            sign = -sign;
        }
        double theta = std::numeric_limits<double>::infinity();
        for (const CycArc& a : arcs)
            if (a.sign < 0) theta = std::min(theta, mass(a.i, a.j));
        for (const CycArc& a : arcs) mass(a.i, a.j) += a.sign * theta;
        for (const CycArc& a : arcs)
            if (mass(a.i, a.j) < 1e-15) mass(a.i, a.j) = 0.0;
        ++moves;
        if (moves > rows * cols + 8)
            throw Error(ErrorCode::InvalidArgument, "purification failed to terminate");
    }
}

/// Duals from the optimal support: solve u_i + v_j = c_ij on the support
/// forest per component, then fit component offsets so every admissible arc
/// satisfies u_i + v_j <= c_ij.
inline void recover_duals(const std::vector<double>& x, const CostMatrix& m,
                          std::vector<double>& u, std::vector<double>& v) {
    const int rows = m.rows(), cols = m.cols();
    const int V = rows + cols;
    u.assign(static_cast<std::size_t>(rows), 0.0);
    v.assign(static_cast<std::size_t>(cols), 0.0);
    std::vector<int> comp(static_cast<std::size_t>(V), -1);
    auto mass = [&](int i, int j) {
        return x[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(j)];
    };
    int n_comp = 0;
    for (int root = 0; root < V; ++root) {
        if (comp[static_cast<std::size_t>(root)] >= 0) continue;
        const int c = n_comp++;
        std::vector<int> stack{root};
        comp[static_cast<std::size_t>(root)] = c;
        if (root < rows)
            u[static_cast<std::size_t>(root)] = 0.0;
        else
            v[static_cast<std::size_t>(root - rows)] = 0.0;
        while (!stack.empty()) {
            const int a = stack.back();
            stack.pop_back();
            if (a < rows) {
                for (int j = 0; j < cols; ++j) {
                    if (mass(a, j) <= 0.0 || comp[static_cast<std::size_t>(rows + j)] >= 0) continue;
                    comp[static_cast<std::size_t>(rows + j)] = c;
                    v[static_cast<std::size_t>(j)] = m.at(a, j).value() - u[static_cast<std::size_t>(a)];
                    stack.push_back(rows + j);
                }
            } else {
                const int j = a - rows;
                for (int i = 0; i < rows; ++i) {
                    if (mass(i, j) <= 0.0 || comp[static_cast<std::size_t>(i)] >= 0) continue;
                    comp[static_cast<std::size_t>(i)] = c;
                    u[static_cast<std::size_t>(i)] = m.at(i, j).value() - v[static_cast<std::size_t>(j)];
                    stack.push_back(i);
                }
            }
        }
    }
    if (n_comp <= 1) return;

    // Difference constraints theta_A - theta_B <= slack(i,j) for admissible
    // cross-component arcs; shortest paths from a virtual source solve them.
    std::vector<double> theta(static_cast<std::size_t>(n_comp), 0.0);
    struct CEdge { int from, to; double w; };
    std::vector<CEdge> cedges;
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            if (!m.at(i, j).is_finite()) continue;
            const int A = comp[static_cast<std::size_t>(i)];
            const int B = comp[static_cast<std::size_t>(rows + j)];
            if (A == B) continue;
            const double slack = m.at(i, j).value() - u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)];
            cedges.push_back({B, A, slack});
        }
    }
    std::vector<double> dist(static_cast<std::size_t>(n_comp), 0.0);  // virtual source = 0 to all
    for (int round = 0; round < n_comp; ++round) {
        bool changed = false;
        for (const CEdge& e : cedges) {
            if (dist[static_cast<std::size_t>(e.from)] + e.w < dist[static_cast<std::size_t>(e.to)] - 1e-15) {
                dist[static_cast<std::size_t>(e.to)] = dist[static_cast<std::size_t>(e.from)] + e.w;
                changed = true;
            }
        }
        if (!changed) break;
        if (round + 1 == n_comp && changed)
            throw Error(ErrorCode::InvalidArgument, "dual offset constraints infeasible");
    }
    theta = dist;
    for (int i = 0; i < rows; ++i) u[static_cast<std::size_t>(i)] += theta[static_cast<std::size_t>(comp[static_cast<std::size_t>(i)])];
    for (int j = 0; j < cols; ++j) v[static_cast<std::size_t>(j)] -= theta[static_cast<std::size_t>(comp[static_cast<std::size_t>(rows + j)])];
}

}  // namespace detail

/// Exact discrete Kantorovich solve over admissible arcs (forbidden arcs are
/// omitted from the network, never penalized). Deterministic; the returned
/// plan is a vertex of the transportation polytope and the duals satisfy
/// complementary slackness exactly on the support.
inline SolveResult solve_kantorovich(const CostMatrix& m, const DiscreteMeasure& mu,
                                     const DiscreteMeasure& nu) {
    const int rows = m.rows(), cols = m.cols();
    if (rows != mu.size() || cols != nu.size())
        throw Error(ErrorCode::DimensionMismatch, "matrix/measure size mismatch");
    if (!check_causally_related(m, mu, nu))
        throw Error(ErrorCode::NotCausallyRelated, "no feasible plan over finite-cost arcs");

    const int S = rows + cols, T = rows + cols + 1;
    detail::ResGraph g(rows + cols + 2);
    for (int i = 0; i < rows; ++i) g.add_edge(S, i, mu.weights[static_cast<std::size_t>(i)], 0.0);
    for (int j = 0; j < cols; ++j) g.add_edge(rows + j, T, nu.weights[static_cast<std::size_t>(j)], 0.0);
    // Row-major arc ordering keeps path selection reproducible.
    std::vector<std::pair<int, int>> arc_pos(
        static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), {-1, -1});
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            if (!m.at(i, j).is_finite()) continue;
            arc_pos[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(j)] = {
                i, static_cast<int>(g.adj[static_cast<std::size_t>(i)].size())};
            g.add_edge(i, rows + j, std::numeric_limits<double>::infinity(), m.at(i, j).value());
        }
    }

    SolveStats stats;
    std::vector<int> pred_node, pred_edge;
    std::vector<double> dist;
    const int max_augmentations = 64 * (rows + cols) + 4096;
    const int max_hops = rows + cols + 4;
    while (true) {
        if (!detail::shortest_path(g, S, T, pred_node, pred_edge, dist)) break;
        double push = std::numeric_limits<double>::infinity();
        int hops = 0;
        for (int v = T; v != S; v = pred_node[static_cast<std::size_t>(v)]) {
            if (++hops > max_hops)
                throw Error(ErrorCode::InvalidArgument, "cyclic predecessor chain");
            const int u = pred_node[static_cast<std::size_t>(v)];
            push = std::min(push, g.adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(pred_edge[static_cast<std::size_t>(v)])].cap);
        }
        if (!(push > 0.0)) break;
        for (int v = T; v != S; v = pred_node[static_cast<std::size_t>(v)]) {
            const int u = pred_node[static_cast<std::size_t>(v)];
            detail::ResEdge& e = g.adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(pred_edge[static_cast<std::size_t>(v)])];
            e.cap -= push;
            g.adj[static_cast<std::size_t>(e.to)][static_cast<std::size_t>(e.rev)].cap += push;
        }
        if (++stats.augmentations > max_augmentations)
            throw Error(ErrorCode::InvalidArgument, "augmentation budget exhausted");
    }

    // Flow on arc (i,j) equals the residual capacity of its reverse edge.
    std::vector<double> x(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            const auto [node, k] = arc_pos[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(j)];
            if (node < 0) continue;
            const detail::ResEdge& e = g.adj[static_cast<std::size_t>(node)][static_cast<std::size_t>(k)];
            x[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(j)] =
                g.adj[static_cast<std::size_t>(e.to)][static_cast<std::size_t>(e.rev)].cap;
        }
    }
    stats.purification_moves = detail::purify_plan(x, rows, cols);

    SolveResult res;
    res.coupling.source = mu;
    res.coupling.target = nu;
    double total = 0.0;
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            const double mass = x[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(j)];
            if (mass > 0.0) {
                res.coupling.plan.push_back({i, j, mass});
                total += mass * m.at(i, j).value();
            }
        }
    }
    res.total_cost = ExtendedCost::finite(total);
    detail::recover_duals(x, m, res.dual_u, res.dual_v);
    res.stats = stats;
    return res;
}

struct MonotonicityResult {
    bool monotone = true;
    std::vector<int> witness;   // support indices of a violating cycle
    double violation = 0.0;     // lhs - rhs of the violated inequality
    bool exhaustive = true;     // false when the randomized probe was used
};

/// Cyclical-monotonicity test of a support set: for every cycle through
/// distinct support pairs, sum c(x_i, y_i) <= sum c(x_{i+1}, y_i). An +inf on
/// the right-hand side satisfies the inequality. Exhaustive for supports of
/// at most 12 pairs and cycles of length at most 4; larger instances fall
/// back to seeded random sampling (a probe, not a proof).
inline MonotonicityResult check_c2_monotone(const std::vector<std::pair<int, int>>& support,
                                            const CostMatrix& m, int max_cycle_len,
                                            std::uint64_t probe_seed = 0x5EEDED) {
    const int s = static_cast<int>(support.size());
    MonotonicityResult res;
    for (const auto& [i, j] : support)
        if (!m.at(i, j).is_finite())
            throw Error(ErrorCode::InvalidArgument, "support contains a forbidden arc");
    if (s < 2 || max_cycle_len < 2) return res;

    auto cycle_violation = [&](const std::vector<int>& tuple) {
        double lhs = 0.0, rhs = 0.0;
        const std::size_t L = tuple.size();
        for (std::size_t k = 0; k < L; ++k) {
            const auto& [ik, jk] = support[static_cast<std::size_t>(tuple[k])];
            const auto& [inext, jnext] = support[static_cast<std::size_t>(tuple[(k + 1) % L])];
            (void)jnext;
            lhs += m.at(ik, jk).value();
            const ExtendedCost& c = m.at(inext, jk);
            if (c.is_infinite()) return -std::numeric_limits<double>::infinity();
            rhs += c.value();
        }
        return lhs - rhs;
    };

    auto record = [&](const std::vector<int>& tuple, double viol) {
        res.monotone = false;
        res.witness = tuple;
        res.violation = viol;
    };

    const bool exhaustive = s <= 12 && max_cycle_len <= 4;
    res.exhaustive = exhaustive;
    const int L_max = std::min(max_cycle_len, s);
    if (exhaustive) {
        // Canonical rotation: the smallest index leads. Reflections show up as
        // separate tuples, which the one-sided inequality needs anyway.
        std::vector<int> tuple;
        std::vector<char> used(static_cast<std::size_t>(s), 0);
        for (int L = 2; L <= L_max; ++L) {
            for (int lead = 0; lead + L <= s; ++lead) {
                tuple.assign(1, lead);
                used.assign(static_cast<std::size_t>(s), 0);
                used[static_cast<std::size_t>(lead)] = 1;
                auto extend = [&](auto&& self, int depth) -> bool {
                    if (depth == L) {
                        const double viol = cycle_violation(tuple);
                        if (viol > kMonotoneTol) {
                            record(tuple, viol);
                            return true;
                        }
                        return false;
                    }
                    for (int idx = lead + 1; idx < s; ++idx) {
                        if (used[static_cast<std::size_t>(idx)]) continue;
                        used[static_cast<std::size_t>(idx)] = 1;
                        tuple.push_back(idx);
                        if (self(self, depth + 1)) return true;
                        tuple.pop_back();
                        used[static_cast<std::size_t>(idx)] = 0;
                    }
                    return false;
                };
                if (extend(extend, 1)) return res;
            }
        }
        return res;
    }

    std::mt19937_64 rng(probe_seed);
    std::uniform_int_distribution<int> len_pick(2, L_max);
    std::uniform_int_distribution<int> idx_pick(0, s - 1);
    const int samples = 20000;
    std::vector<int> tuple;
    for (int it = 0; it < samples; ++it) {
        const int L = len_pick(rng);
        tuple.clear();
        std::vector<char> used(static_cast<std::size_t>(s), 0);
        while (static_cast<int>(tuple.size()) < L) {
            const int idx = idx_pick(rng);
            if (!used[static_cast<std::size_t>(idx)]) {
                used[static_cast<std::size_t>(idx)] = 1;
                tuple.push_back(idx);
            }
        }
        const double viol = cycle_violation(tuple);
        if (viol > kMonotoneTol) {
            record(tuple, viol);
            return res;
        }
    }
    return res;
}

}  // namespace lorot
