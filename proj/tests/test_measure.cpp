#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "lorot/io.hpp"
#include "lorot/measure.hpp"

using namespace lorot;

TEST_CASE("discrete measure construction merges duplicates") {
    const Event a{0, 0}, b{1, 0};
    const DiscreteMeasure m = DiscreteMeasure::create({a, b, a}, {0.25, 0.5, 0.25});
    REQUIRE(m.size() == 2);
    REQUIRE(m.weights[0] == 0.5);
    REQUIRE(m.weights[1] == 0.5);
    REQUIRE_THROWS_AS(DiscreteMeasure::create({a}, {0.5}), Error);
    REQUIRE_THROWS_AS(DiscreteMeasure::create({a, b}, {1.0, 0.0}), Error);
    const Event nan_pt{std::numeric_limits<double>::quiet_NaN(), 0.0};
    REQUIRE_THROWS_AS(DiscreteMeasure::create({nan_pt}, {1.0}), Error);
}

TEST_CASE("marginals of product and diagonal couplings") {
    const DiscreteMeasure mu = DiscreteMeasure::create({Event{0, 0}, Event{0, 1}}, {0.5, 0.5});
    const DiscreteMeasure nu = DiscreteMeasure::create({Event{3, 0}, Event{3, 1}}, {0.5, 0.5});

    Coupling product{mu, nu, {}};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) product.plan.push_back({i, j, 0.25});
    const auto [pr, pc] = marginals(product);
    REQUIRE(pr == std::vector<double>{0.5, 0.5});
    REQUIRE(pc == std::vector<double>{0.5, 0.5});
    REQUIRE(marginals_match(product));

    const DiscreteMeasure mu2 = DiscreteMeasure::create({Event{0, 0}, Event{0, 1}}, {0.3, 0.7});
    const DiscreteMeasure nu2 = DiscreteMeasure::create({Event{3, 0}, Event{3, 1}}, {0.3, 0.7});
    Coupling diag{mu2, nu2, {{0, 0, 0.3}, {1, 1, 0.7}}};
    const auto [dr, dc] = marginals(diag);
    REQUIRE(dr == std::vector<double>{0.3, 0.7});
    REQUIRE(dc == std::vector<double>{0.3, 0.7});
    REQUIRE(marginals_match(diag));

    Coupling broken{mu2, nu2, {{0, 0, 0.3}, {1, 0, 0.7}}};
    REQUIRE(!marginals_match(broken));
}

TEST_CASE("pushforward") {
    const DiscreteMeasure mu =
        DiscreteMeasure::create({Event{0, 0}, Event{0, 1}}, {0.4, 0.6});
    // identity
    const DiscreteMeasure id = pushforward(mu, mu.points);
    REQUIRE(id.points == mu.points);
    REQUIRE(id.weights == mu.weights);
    // constant map -> Dirac
    const DiscreteMeasure dirac = pushforward(mu, {Event{5, 5}, Event{5, 5}});
    REQUIRE(dirac.size() == 1);
    REQUIRE(dirac.weights[0] == 1.0);
    // two points onto one: weights add exactly
    const DiscreteMeasure merged = pushforward(mu, {Event{2, 2}, Event{2, 2}});
    REQUIRE(merged.size() == 1);
    REQUIRE(merged.weights[0] == 0.4 + 0.6);
    // partial assignment is refused
    REQUIRE_THROWS_AS(pushforward(mu, {Event{2, 2}}), Error);
}

TEST_CASE("slices instances are chronological with disjoint supports") {
    for (std::uint64_t seed : {1ull, 2ull, 17ull}) {
        const Instance inst = generate_instance(seed, 1, 8, 8, InstanceProfile::Slices);
        double min_d = std::numeric_limits<double>::infinity();
        for (const Event& x : inst.mu.points) {
            for (const Event& y : inst.nu.points) {
                REQUIRE(inst.model->classify(x, y) == CausalClass::Chronological);
                min_d = std::min(min_d, inst.model->distance(x, y));
                REQUIRE(!(x == y));
            }
        }
        REQUIRE(min_d > 0.0);
        // T - 0 > 2R makes every pair chronological: worst diametric pair.
        REQUIRE(min_d >= std::sqrt(9.0 - 4.0) - 1e-12);
    }
}

TEST_CASE("infeasible instances admit no causal arc") {
    const Instance inst = generate_instance(3, 2, 5, 6, InstanceProfile::Infeasible);
    for (const Event& x : inst.mu.points)
        for (const Event& y : inst.nu.points)
            REQUIRE(inst.model->classify(x, y) == CausalClass::Unrelated);
}

TEST_CASE("marginal instances force a null pairing") {
    const Instance inst = generate_instance(9, 1, 6, 6, InstanceProfile::Marginal);
    const Event& xs = inst.mu.points[0];
    const Event& ys = inst.nu.points[0];
    REQUIRE(inst.model->classify(xs, ys) == CausalClass::NullCausal);
    REQUIRE(inst.mu.weights[0] == inst.nu.weights[0]);
    // the special pair is isolated: spacelike to the whole bulk
    for (int j = 1; j < inst.nu.size(); ++j)
        REQUIRE(inst.model->classify(xs, inst.nu.points[static_cast<std::size_t>(j)]) ==
                CausalClass::Unrelated);
    for (int i = 1; i < inst.mu.size(); ++i)
        REQUIRE(inst.model->classify(inst.mu.points[static_cast<std::size_t>(i)], ys) ==
                CausalClass::Unrelated);
}

TEST_CASE("generation is deterministic per seed") {
    const Instance a = generate_instance(42, 2, 7, 5, InstanceProfile::Slices, true);
    const Instance b = generate_instance(42, 2, 7, 5, InstanceProfile::Slices, true);
    REQUIRE(a.mu.points == b.mu.points);
    REQUIRE(a.nu.points == b.nu.points);
    REQUIRE(a.mu.weights == b.mu.weights);
    const Instance c = generate_instance(43, 2, 7, 5, InstanceProfile::Slices, true);
    REQUIRE(!(a.mu.points == c.mu.points));
}

TEST_CASE("random dyadic weights sum to one exactly") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Instance inst = generate_instance(seed, 1, 9, 13, InstanceProfile::Slices, true);
        double s = 0.0;
        for (double w : inst.mu.weights) s += w;
        REQUIRE(s == 1.0);  // exact binary arithmetic on dyadic rationals
        s = 0.0;
        for (double w : inst.nu.weights) s += w;
        REQUIRE(s == 1.0);
    }
}

TEST_CASE("instance JSON round trip is bit exact") {
    const Instance inst = generate_instance(11, 2, 5, 4, InstanceProfile::Slices, true);
    std::ostringstream first;
    write_instance_json(inst, first);
    std::istringstream in(first.str());
    const Instance back = read_instance_json(in);
    REQUIRE(back.mu.points == inst.mu.points);
    REQUIRE(back.nu.points == inst.nu.points);
    REQUIRE(back.mu.weights == inst.mu.weights);
    REQUIRE(back.nu.weights == inst.nu.weights);
    REQUIRE(back.seed == inst.seed);
    REQUIRE(back.profile == inst.profile);
    std::ostringstream second;
    write_instance_json(back, second);
    REQUIRE(first.str() == second.str());
}

TEST_CASE("instance JSON rejects malformed input") {
    std::istringstream bad("{\"dimension\": 2, \"tau\": \"t\"}");
    REQUIRE_THROWS_AS(read_instance_json(bad), Error);
    std::istringstream junk("not json");
    REQUIRE_THROWS_AS(read_instance_json(junk), Error);
}
