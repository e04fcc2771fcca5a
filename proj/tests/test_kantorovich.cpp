#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include "lorot/kantorovich.hpp"

using namespace lorot;

namespace {

constexpr double kInf = -1.0;  // marker in the entry tables below

/// Synthetic cost matrix for pure LP tests; entries < 0 mean forbidden.
CostMatrix make_matrix(int rows, int cols, const std::vector<double>& vals) {
    CostMatrix m;
    m.model = std::make_shared<MinkowskiModel>(1);
    for (int i = 0; i < rows; ++i) m.xs.push_back(Event{0.0, static_cast<double>(i)});
    for (int j = 0; j < cols; ++j) m.ys.push_back(Event{3.0, static_cast<double>(j)});
    for (double v : vals) {
        if (v < 0.0) {
            m.entries.push_back(ExtendedCost::infinity());
            ++m.infinite_count;
        } else {
            m.entries.push_back(ExtendedCost::finite(v));
        }
    }
    return m;
}

DiscreteMeasure uniform_measure(int count, double t) {
    std::vector<Event> pts;
    std::vector<double> ws;
    for (int i = 0; i < count; ++i) {
        pts.push_back(Event{t, static_cast<double>(i)});
        ws.push_back(1.0 / count);
    }
    return DiscreteMeasure::create(pts, ws);
}

/// Hall-style oracle: a feasible plan over admissible arcs exists iff every
/// source subset's mass fits into the mass of its admissible targets.
bool hall_feasible(const CostMatrix& m, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const int rows = m.rows(), cols = m.cols();
    for (unsigned mask = 1; mask < (1u << rows); ++mask) {
        double supply = 0.0;
        unsigned targets = 0;
        for (int i = 0; i < rows; ++i) {
            if (!(mask & (1u << i))) continue;
            supply += mu.weights[static_cast<std::size_t>(i)];
            for (int j = 0; j < cols; ++j)
                if (m.at(i, j).is_finite()) targets |= (1u << j);
        }
        double capacity = 0.0;
        for (int j = 0; j < cols; ++j)
            if (targets & (1u << j)) capacity += nu.weights[static_cast<std::size_t>(j)];
        if (supply > capacity + 1e-12) return false;
    }
    return true;
}

/// Exhaustive permutation-coupling oracle for uniform equal-size instances.
double brute_force_uniform(const CostMatrix& m) {
    const int n = m.rows();
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            const ExtendedCost& c = m.at(i, perm[static_cast<std::size_t>(i)]);
            if (!c.is_finite())
                ok = false;
            else
                total += (1.0 / n) * c.value();
        }
        if (ok) best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_CASE("feasibility over admissible arcs") {
    const DiscreteMeasure mu = uniform_measure(2, 0.0);
    const DiscreteMeasure nu = uniform_measure(2, 3.0);
    REQUIRE(check_causally_related(make_matrix(2, 2, {1, 2, 3, 4}), mu, nu));
    REQUIRE(!check_causally_related(make_matrix(2, 2, {kInf, kInf, kInf, kInf}), mu, nu));

    // one admissible arc per row forming a perfect fractional matching
    const DiscreteMeasure mu2 =
        DiscreteMeasure::create({Event{0, 0}, Event{0, 1}}, {0.3, 0.7});
    const DiscreteMeasure nu2 =
        DiscreteMeasure::create({Event{3, 0}, Event{3, 1}}, {0.3, 0.7});
    REQUIRE(check_causally_related(make_matrix(2, 2, {1, kInf, kInf, 1}), mu2, nu2));
    // same arcs but mismatched masses: infeasible
    const DiscreteMeasure nu3 =
        DiscreteMeasure::create({Event{3, 0}, Event{3, 1}}, {0.5, 0.5});
    REQUIRE(!check_causally_related(make_matrix(2, 2, {1, kInf, kInf, 1}), mu2, nu3));
}

TEST_CASE("feasibility agrees with the Hall oracle on random masked instances") {
    std::mt19937_64 rng(0xFEED);
    std::uniform_int_distribution<int> size_pick(1, 8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int infeasible_seen = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int rows = size_pick(rng), cols = size_pick(rng);
        std::vector<double> vals;
        for (int k = 0; k < rows * cols; ++k)
            vals.push_back(unit(rng) < 0.45 ? kInf : 1.0 + unit(rng));
        const CostMatrix m = make_matrix(rows, cols, vals);
        // random dyadic weights
        auto dyadic = [&](int count) {
            std::vector<double> w(static_cast<std::size_t>(count), 0.0);
            int total = 1 << 12;
            for (int i = 0; i < count - 1; ++i) {
                std::uniform_int_distribution<int> part(1, std::max(1, total - (count - i - 1) * 1 - 1));
                const int take = std::min(part(rng), total - (count - i - 1));
                w[static_cast<std::size_t>(i)] = static_cast<double>(take) / (1 << 12);
                total -= take;
            }
            w[static_cast<std::size_t>(count - 1)] = static_cast<double>(total) / (1 << 12);
            std::vector<Event> pts;
            for (int i = 0; i < count; ++i) pts.push_back(Event{0.0, static_cast<double>(i)});
            return DiscreteMeasure::create(pts, w);
        };
        const DiscreteMeasure mu = dyadic(rows);
        const DiscreteMeasure nu = dyadic(cols);
        const bool flow = check_causally_related(m, mu, nu);
        const bool hall = hall_feasible(m, mu, nu);
        REQUIRE(flow == hall);
        if (!flow) ++infeasible_seen;
    }
    REQUIRE(infeasible_seen > 20);  // the sweep actually exercises both sides
}

TEST_CASE("solve on singleton and 2x2 instances") {
    const DiscreteMeasure mu1 = DiscreteMeasure::create({Event{0, 0}}, {1.0});
    const DiscreteMeasure nu1 = DiscreteMeasure::create({Event{2, 0}}, {1.0});
    const SolveResult r1 = solve_kantorovich(make_matrix(1, 1, {4.0}), mu1, nu1);
    REQUIRE(r1.coupling.plan.size() == 1);
    REQUIRE(r1.coupling.plan[0].mass == 1.0);
    REQUIRE(r1.total_cost.value() == 4.0);

    const DiscreteMeasure mu = uniform_measure(2, 0.0);
    const DiscreteMeasure nu = uniform_measure(2, 3.0);
    const SolveResult r2 = solve_kantorovich(make_matrix(2, 2, {1, 2, 3, 1}), mu, nu);
    REQUIRE(r2.total_cost.value() == Catch::Approx(1.0));
    REQUIRE(r2.coupling.plan.size() == 2);
    REQUIRE(r2.coupling.plan[0].i == 0);
    REQUIRE(r2.coupling.plan[0].j == 0);
    REQUIRE(r2.coupling.plan[1].i == 1);
    REQUIRE(r2.coupling.plan[1].j == 1);
    REQUIRE(marginals_match(r2.coupling));
}

TEST_CASE("solve refuses infeasible instances") {
    const DiscreteMeasure mu = uniform_measure(2, 0.0);
    const DiscreteMeasure nu = uniform_measure(2, 3.0);
    REQUIRE_THROWS_AS(solve_kantorovich(make_matrix(2, 2, {kInf, kInf, 1, 1}), mu, nu), Error);
    try {
        solve_kantorovich(make_matrix(2, 2, {kInf, kInf, 1, 1}), mu, nu);
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::NotCausallyRelated);
    }
}

TEST_CASE("optimal value matches brute force on uniform instances") {
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + static_cast<int>(unit(rng) * 4.99);  // 2..6
        std::vector<double> vals;
        for (int k = 0; k < n * n; ++k) vals.push_back(100.0 * unit(rng));
        const CostMatrix m = make_matrix(n, n, vals);
        const DiscreteMeasure mu = uniform_measure(n, 0.0);
        const DiscreteMeasure nu = uniform_measure(n, 3.0);
        const SolveResult r = solve_kantorovich(m, mu, nu);
        REQUIRE(r.total_cost.value() == brute_force_uniform(m));
        // vertex plan: at most m + n - 1 support entries
        REQUIRE(static_cast<int>(r.coupling.plan.size()) <= 2 * n - 1);
    }
}

TEST_CASE("duals certify optimality") {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int rows = 2 + static_cast<int>(unit(rng) * 4.0);
        const int cols = 2 + static_cast<int>(unit(rng) * 4.0);
        std::vector<double> vals;
        for (int k = 0; k < rows * cols; ++k)
            vals.push_back(unit(rng) < 0.2 ? kInf : 10.0 * unit(rng));
        // keep one guaranteed arc per row and per column
        for (int i = 0; i < rows; ++i) vals[static_cast<std::size_t>(i * cols + (i % cols))] = 1.0 + unit(rng);
        for (int j = 0; j < cols; ++j) vals[static_cast<std::size_t>((j % rows) * cols + j)] = 1.0 + unit(rng);
        const CostMatrix m = make_matrix(rows, cols, vals);
        const DiscreteMeasure mu = uniform_measure(rows, 0.0);
        const DiscreteMeasure nu = uniform_measure(cols, 3.0);
        if (!check_causally_related(m, mu, nu)) continue;
        const SolveResult r = solve_kantorovich(m, mu, nu);
        // dual feasibility on admissible arcs
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                if (m.at(i, j).is_finite())
                    REQUIRE(r.dual_u[static_cast<std::size_t>(i)] + r.dual_v[static_cast<std::size_t>(j)] <=
                            m.at(i, j).value() + 1e-9);
        // complementary slackness on the support
        for (const PlanEntry& e : r.coupling.plan)
            REQUIRE(r.dual_u[static_cast<std::size_t>(e.i)] + r.dual_v[static_cast<std::size_t>(e.j)] ==
                    Catch::Approx(m.at(e.i, e.j).value()).margin(1e-9));
        // dual objective equals the primal cost
        double dual = 0.0;
        for (int i = 0; i < rows; ++i) dual += r.dual_u[static_cast<std::size_t>(i)] * mu.weights[static_cast<std::size_t>(i)];
        for (int j = 0; j < cols; ++j) dual += r.dual_v[static_cast<std::size_t>(j)] * nu.weights[static_cast<std::size_t>(j)];
        REQUIRE(dual == Catch::Approx(r.total_cost.value()).margin(1e-8));
    }
}

TEST_CASE("solver is deterministic") {
    std::mt19937_64 rng(555);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> vals;
    for (int k = 0; k < 25; ++k) vals.push_back(unit(rng));
    const CostMatrix m = make_matrix(5, 5, vals);
    const DiscreteMeasure mu = uniform_measure(5, 0.0);
    const DiscreteMeasure nu = uniform_measure(5, 3.0);
    const SolveResult a = solve_kantorovich(m, mu, nu);
    const SolveResult b = solve_kantorovich(m, mu, nu);
    REQUIRE(a.coupling.plan.size() == b.coupling.plan.size());
    for (std::size_t k = 0; k < a.coupling.plan.size(); ++k) {
        REQUIRE(a.coupling.plan[k].i == b.coupling.plan[k].i);
        REQUIRE(a.coupling.plan[k].j == b.coupling.plan[k].j);
        REQUIRE(a.coupling.plan[k].mass == b.coupling.plan[k].mass);
    }
    REQUIRE(a.total_cost.value() == b.total_cost.value());
}

TEST_CASE("cyclical monotonicity of optimal supports") {
    const DiscreteMeasure mu = uniform_measure(2, 0.0);
    const DiscreteMeasure nu = uniform_measure(2, 3.0);
    const CostMatrix m = make_matrix(2, 2, {1, 2, 3, 1});
    const SolveResult r = solve_kantorovich(m, mu, nu);
    const MonotonicityResult good = check_c2_monotone(r.support(), m, 2);
    REQUIRE(good.monotone);  // 1 + 1 <= 2 + 3

    // anti-optimal support violates the swap inequality: 2 + 3 > 1 + 1
    const MonotonicityResult bad = check_c2_monotone({{0, 1}, {1, 0}}, m, 2);
    REQUIRE(!bad.monotone);
    REQUIRE(bad.witness.size() == 2);
    REQUIRE(bad.violation == Catch::Approx(3.0));

    // singleton support has no nontrivial cycles
    REQUIRE(check_c2_monotone({{0, 0}}, m, 4).monotone);
}

TEST_CASE("monotonicity with infinite swap costs is vacuous") {
    const CostMatrix m = make_matrix(2, 2, {1, kInf, kInf, 1});
    REQUIRE(check_c2_monotone({{0, 0}, {1, 1}}, m, 2).monotone);
    REQUIRE_THROWS_AS(check_c2_monotone({{0, 1}}, m, 2), Error);
}

TEST_CASE("planted violations are found up to cycle length four") {
    // lhs = 4 * 10; any pairwise swap keeps cost (100), but rotating all four
    // assignments (i -> i+1) costs 4 * 1: only a length-4 cycle catches it.
    std::vector<double> vals(16, 100.0);
    auto at = [&](int i, int j) -> double& { return vals[static_cast<std::size_t>(i * 4 + j)]; };
    for (int i = 0; i < 4; ++i) at(i, i) = 10.0;
    at(1, 0) = 1.0;
    at(2, 1) = 1.0;
    at(3, 2) = 1.0;
    at(0, 3) = 1.0;
    const CostMatrix m = make_matrix(4, 4, vals);
    const std::vector<std::pair<int, int>> support{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
    REQUIRE(check_c2_monotone(support, m, 2).monotone);
    REQUIRE(check_c2_monotone(support, m, 3).monotone);
    const MonotonicityResult r4 = check_c2_monotone(support, m, 4);
    REQUIRE(!r4.monotone);
    REQUIRE(r4.witness.size() == 4);
}

TEST_CASE("tie-heavy instances still solve to vertex optimality") {
    // Small-integer costs create many equal-cost alternatives, stressing the
    // degenerate augmentations and the cycle purification.
    std::mt19937_64 rng(90210);
    std::uniform_int_distribution<int> coin(1, 3);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 3 + trial % 4;  // 3..6
        std::vector<double> vals;
        for (int k = 0; k < n * n; ++k) vals.push_back(static_cast<double>(coin(rng)));
        const CostMatrix m = make_matrix(n, n, vals);
        const DiscreteMeasure mu = uniform_measure(n, 0.0);
        const DiscreteMeasure nu = uniform_measure(n, 3.0);
        const SolveResult r = solve_kantorovich(m, mu, nu);
        REQUIRE(r.total_cost.value() == Catch::Approx(brute_force_uniform(m)).margin(1e-12));
        REQUIRE(static_cast<int>(r.coupling.plan.size()) <= 2 * n - 1);
        REQUIRE(marginals_match(r.coupling));
        // duals stay exact under ties
        double dual = 0.0;
        for (int i = 0; i < n; ++i) dual += r.dual_u[static_cast<std::size_t>(i)] / n;
        for (int j = 0; j < n; ++j) dual += r.dual_v[static_cast<std::size_t>(j)] / n;
        REQUIRE(dual == Catch::Approx(r.total_cost.value()).margin(1e-9));
    }
}

TEST_CASE("random dyadic weights produce vertex plans with tight duals") {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const Instance inst = generate_instance(seed, 1, 9, 7, InstanceProfile::Slices, true);
        const CostMatrix m = assemble_cost_matrix(inst.model, inst.mu.points, inst.nu.points);
        const SolveResult r = solve_kantorovich(m, inst.mu, inst.nu);
        REQUIRE(marginals_match(r.coupling));
        REQUIRE(static_cast<int>(r.coupling.plan.size()) <= 9 + 7 - 1);
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j)
                REQUIRE(r.dual_u[static_cast<std::size_t>(i)] + r.dual_v[static_cast<std::size_t>(j)] <=
                        m.at(i, j).value() + 1e-9);
        double dual = 0.0;
        for (int i = 0; i < m.rows(); ++i)
            dual += r.dual_u[static_cast<std::size_t>(i)] * inst.mu.weights[static_cast<std::size_t>(i)];
        for (int j = 0; j < m.cols(); ++j)
            dual += r.dual_v[static_cast<std::size_t>(j)] * inst.nu.weights[static_cast<std::size_t>(j)];
        REQUIRE(dual == Catch::Approx(r.total_cost.value()).margin(1e-8));
    }
}

TEST_CASE("optimal supports stay monotone on random feasible instances") {
    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 3 + static_cast<int>(unit(rng) * 3.0);
        std::vector<double> vals;
        for (int k = 0; k < n * n; ++k) vals.push_back(10.0 * unit(rng));
        const CostMatrix m = make_matrix(n, n, vals);
        const DiscreteMeasure mu = uniform_measure(n, 0.0);
        const DiscreteMeasure nu = uniform_measure(n, 3.0);
        const SolveResult r = solve_kantorovich(m, mu, nu);
        const int L = std::min<int>(4, static_cast<int>(r.coupling.plan.size()));
        REQUIRE(check_c2_monotone(r.support(), m, L).monotone);
    }
}
