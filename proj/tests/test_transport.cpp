#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "lorot/transport.hpp"

using namespace lorot;

namespace {

TangentVector tv(std::initializer_list<double> base, std::initializer_list<double> comps) {
    return TangentVector(Event(base),
                         Vec(Eigen::Map<const Vec>(comps.begin(), static_cast<Eigen::Index>(comps.size()))));
}

struct Solved {
    Instance inst;
    CostMatrix matrix;
    SolveResult result;
    PotentialPair pp;
};

Solved solve_slices(std::uint64_t seed, int n, int m_mu, int m_nu) {
    Solved s{generate_instance(seed, n, m_mu, m_nu, InstanceProfile::Slices), {}, {}, {}};
    s.matrix = assemble_cost_matrix(s.inst.model, s.inst.mu.points, s.inst.nu.points);
    s.result = solve_kantorovich(s.matrix, s.inst.mu, s.inst.nu);
    const auto support = s.result.support();
    s.pp = build_pi_solution(support, s.matrix, support.front());
    return s;
}

}  // namespace

TEST_CASE("twist inversion closed-form cases") {
    MinkowskiModel m(1);
    const Event x{0, 0};
    const TwistInversion a = invert_twist(m, x, Covector(x, Eigen::Vector2d(4.0, 0.0)));
    REQUIRE((a.velocity.components - Eigen::Vector2d(2.0, 0.0)).norm() <= 1e-8);
    REQUIRE((a.target.coords - Eigen::Vector2d(2.0, 0.0)).norm() <= 1e-8);
    REQUIRE(a.residual <= 1e-9 * 5.0);

    // homogeneity: halving p halves v
    const TwistInversion b = invert_twist(m, x, Covector(x, Eigen::Vector2d(2.0, 0.0)));
    REQUIRE((b.velocity.components - Eigen::Vector2d(1.0, 0.0)).norm() <= 1e-8);
    REQUIRE((b.target.coords - Eigen::Vector2d(1.0, 0.0)).norm() <= 1e-8);

    // p = (0,1) lies in the image: the time component of dL2/dv vanishes
    // exactly at v0/|v|_g = 2, so v* is proportional to (1, sqrt(3)/2)
    const TwistInversion c = invert_twist(m, x, Covector(x, Eigen::Vector2d(0.0, 1.0)));
    const Eigen::Vector2d v_star =
        Eigen::Vector2d(1.0, std::sqrt(3.0) / 2.0) / (3.0 * std::sqrt(3.0));
    REQUIRE((c.velocity.components - v_star).norm() <= 1e-7);

    // past-causal covectors have no preimage in the future cone
    REQUIRE_THROWS_AS(invert_twist(m, x, Covector(x, Eigen::Vector2d(-1.0, 0.0))), Error);
    try {
        invert_twist(m, x, Covector(x, Eigen::Vector2d(-2.0, 1.0)));
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::NoTimelikeSolution);
    }
}

TEST_CASE("twist inversion round trip on sampled strictly timelike velocities") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int n : {1, 2}) {
        MinkowskiModel m(n);
        for (int k = 0; k < 500; ++k) {
            Vec base(n + 1), dir = Vec::Zero(n + 1);
            for (int i = 0; i <= n; ++i) base[i] = gauss(rng);
            for (int i = 1; i <= n; ++i) dir[i] = gauss(rng);
            if (dir.norm() > 0) dir /= dir.norm();
            const double v0 = 0.3 + 4.0 * unit(rng);
            Vec comps = dir * (0.85 * unit(rng) * v0);
            comps[0] = v0;
            const TangentVector v(Event(base), comps);
            const Covector p = dl2_dv(m, v);
            const TwistInversion inv = invert_twist(m, v.base, p);
            REQUIRE((inv.velocity.components - comps).norm() <= 1e-8 * (1.0 + comps.norm()));
        }
    }
}

TEST_CASE("numeric gradient of the single-target extension") {
    // With one target, phi_hat(x) = psi_0 - c2(x, y0), so the gradient is
    // -dc2_dx(x, y0).
    auto model = std::make_shared<MinkowskiModel>(1);
    const Event y0{3, 0};
    const CostMatrix m = assemble_cost_matrix(model, {Event{0, 0}}, {y0});
    PotentialPair pp;
    pp.phi = {ExtReal::finite(0.0)};
    pp.psi = c2_transform(pp.phi, m);
    const Event x{0.0, 0.4};
    const Covector grad = numeric_gradient_phi(pp, m, x);
    const Covector expect = dc2_dx(*model, x, y0);
    REQUIRE((grad.components + expect.components).norm() <= 1e-6 * (1.0 + expect.components.norm()));

    // spacelike-only future among targets: nothing finite near x
    const Event far{3.0, 100.0};
    REQUIRE_THROWS_AS(numeric_gradient_phi(pp, m, far), Error);
    try {
        numeric_gradient_phi(pp, m, far);
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::NonFiniteNeighborhood);
    }
}

TEST_CASE("map recovery on a Dirac pair") {
    auto model = std::make_shared<MinkowskiModel>(1);
    const DiscreteMeasure mu = DiscreteMeasure::create({Event{0, 0}}, {1.0});
    const DiscreteMeasure nu = DiscreteMeasure::create({Event{2, 0}}, {1.0});
    const CostMatrix m = assemble_cost_matrix(model, mu.points, nu.points);
    const SolveResult r = solve_kantorovich(m, mu, nu);
    const PotentialPair pp = build_pi_solution(r.support(), m, r.support().front());
    const TransportMap tm = recover_map(pp, r, m);
    REQUIRE(tm.entries.size() == 1);
    REQUIRE(tm.entries[0].target_index == 0);
    REQUIRE(!tm.has_ambiguity());
    const MapCouplingReport rep = verify_map_induces_coupling(tm, r);
    REQUIRE(rep.ok());
}

TEST_CASE("map recovery agrees with the plan on seeded slices instances") {
    for (std::uint64_t seed : {1ull, 7ull, 23ull}) {
        const Solved s = solve_slices(seed, 1, 12, 12);
        REQUIRE(static_cast<int>(s.result.coupling.plan.size()) == 12);  // permutation plan
        const TransportMap tm = recover_map(s.pp, s.result, s.matrix);
        REQUIRE(!tm.has_ambiguity());
        REQUIRE(tm.entries.size() == 12);
        std::vector<int> plan_col(12, -1);
        for (const PlanEntry& e : s.result.coupling.plan) plan_col[static_cast<std::size_t>(e.i)] = e.j;
        int matched = 0;
        for (const MapEntry& e : tm.entries) {
            REQUIRE(e.target_index == plan_col[static_cast<std::size_t>(e.source_index)]);
            REQUIRE(e.separation > 0.0);
            if (e.status == MapEntryStatus::GradientMatched) {
                REQUIRE(e.residual <= kMapResidualTol);
                // the solved velocity reaches the selected target
                const Event& x = s.matrix.xs[static_cast<std::size_t>(e.source_index)];
                REQUIRE((x.coords + e.velocity.components - e.target.coords).norm() <= 1e-4);
                REQUIRE(e.gradient.components.size() == x.coords.size());
                ++matched;
            }
        }
        // the gradient route should carry nearly every point on a tie-free instance
        REQUIRE(matched >= 11);
        const MapCouplingReport rep = verify_map_induces_coupling(tm, s.result);
        REQUIRE(rep.ok());
        REQUIRE(rep.max_weight_defect <= 1e-10);
    }
}

TEST_CASE("planted cost tie triggers ambiguity") {
    // Square symmetry in 1+2 dimensions: both matchings cost the same.
    auto model = std::make_shared<MinkowskiModel>(2);
    const double s = 0.5;
    const DiscreteMeasure mu =
        DiscreteMeasure::create({Event{0, -s, 0}, Event{0, s, 0}}, {0.5, 0.5});
    const DiscreteMeasure nu =
        DiscreteMeasure::create({Event{3, 0, -s}, Event{3, 0, s}}, {0.5, 0.5});
    const CostMatrix m = assemble_cost_matrix(model, mu.points, nu.points);
    REQUIRE(m.at(0, 0).value() == Catch::Approx(m.at(0, 1).value()).margin(1e-14));
    const SolveResult r = solve_kantorovich(m, mu, nu);
    const PotentialPair pp = build_pi_solution(r.support(), m, r.support().front());
    const TransportMap tm = recover_map(pp, r, m);
    REQUIRE(tm.has_ambiguity());
    REQUIRE(tm.ambiguous_sources.size() == 2);
}

TEST_CASE("split plan rows are reported") {
    // Unequal side weights force a split row in every vertex plan.
    auto model = std::make_shared<MinkowskiModel>(1);
    const DiscreteMeasure mu = DiscreteMeasure::create({Event{0, 0}}, {1.0});
    const DiscreteMeasure nu =
        DiscreteMeasure::create({Event{3, 0.25}, Event{3, -0.25}}, {0.5, 0.5});
    const CostMatrix m = assemble_cost_matrix(model, mu.points, nu.points);
    const SolveResult r = solve_kantorovich(m, mu, nu);
    REQUIRE(r.coupling.plan.size() == 2);
    const PotentialPair pp = build_pi_solution(r.support(), m, r.support().front());
    const TransportMap tm = recover_map(pp, r, m);
    const MapCouplingReport rep = verify_map_induces_coupling(tm, r);
    REQUIRE(!rep.rows_concentrated);
    REQUIRE(!rep.ok());
    REQUIRE(rep.split_rows == std::vector<int>{0});
}

TEST_CASE("recovered separations are positive on disjoint slices supports") {
    const Solved s = solve_slices(31, 2, 8, 8);
    const TransportMap tm = recover_map(s.pp, s.result, s.matrix);
    for (const MapEntry& e : tm.entries) REQUIRE(e.separation > 0.0);
}
