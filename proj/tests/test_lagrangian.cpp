#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "lorot/lagrangian.hpp"

using namespace lorot;

namespace {

TangentVector tv(std::initializer_list<double> base, std::initializer_list<double> comps) {
    return TangentVector(Event(base),
                         Vec(Eigen::Map<const Vec>(comps.begin(), static_cast<Eigen::Index>(comps.size()))));
}

/// Strictly timelike future sample away from the cone boundary.
TangentVector sample_strict(const SpacetimeModel& m, std::mt19937_64& rng, double max_ratio = 0.9) {
    const int d = m.dimension();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec base(d);
    for (int i = 0; i < d; ++i) base[i] = 3.0 * gauss(rng);
    Vec dir = Vec::Zero(d);
    for (int i = 1; i < d; ++i) dir[i] = gauss(rng);
    if (dir.norm() > 0) dir /= dir.norm();
    const double v0 = 0.2 + 5.0 * unit(rng);
    Vec comps = dir * (max_ratio * unit(rng) * v0);
    comps[0] = v0;
    return TangentVector(Event(base), comps);
}

double l2_value(const SpacetimeModel& m, const TangentVector& v) {
    const ExtendedCost c = lagrangian_l2(m, v);
    REQUIRE(c.is_finite());
    return c.value();
}

}  // namespace

TEST_CASE("Lagrangian values on and off the cone") {
    MinkowskiModel m(1);
    REQUIRE(lagrangian_l1(m, tv({0, 0}, {1, 0})).value() == Catch::Approx(1.0));
    REQUIRE(lagrangian_l1(m, tv({0, 0}, {0, 1})).is_infinite());
    REQUIRE(lagrangian_l1(m, tv({0, 0}, {0, 0})).value() == 0.0);

    REQUIRE(lagrangian_l2(m, tv({0, 0}, {1, 0})).value() == Catch::Approx(1.0));
    REQUIRE(lagrangian_l2(m, tv({0, 0}, {2, 0})).value() == Catch::Approx(4.0));
    REQUIRE(lagrangian_l2(m, tv({0, 0}, {1, 1})).value() == Catch::Approx(4.0));
    // L2 = L1^2 whenever finite
    std::mt19937_64 rng(11);
    for (int k = 0; k < 200; ++k) {
        const TangentVector v = sample_future_causal(m, rng);
        const double l1 = lagrangian_l1(m, v).value();
        REQUIRE(lagrangian_l2(m, v).value() == Catch::Approx(l1 * l1).margin(1e-12));
    }
}

TEST_CASE("fiber derivative closed form and homogeneity") {
    MinkowskiModel m(1);
    const Covector d1 = dl2_dv(m, tv({0, 0}, {1, 0}));
    REQUIRE(d1.components[0] == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(d1.components[1] == Catch::Approx(0.0).margin(1e-12));
    const Covector d2 = dl2_dv(m, tv({0, 0}, {2, 0}));
    REQUIRE(d2.components[0] == Catch::Approx(4.0).margin(1e-12));
    const Covector d3 = dl2_dv(m, tv({0, 0}, {3, 0}));
    REQUIRE(d3.components[0] == Catch::Approx(6.0).margin(1e-12));

    REQUIRE_THROWS_AS(dl2_dv(m, tv({0, 0}, {1, 1})), Error);
    REQUIRE_THROWS_AS(dl2_dv(m, tv({0, 0}, {0, 1})), Error);
    try {
        dl2_dv(m, tv({0, 0}, {0, 1}));
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::NullOrSpacelikeVelocity);
    }
}

TEST_CASE("fiber derivative matches central differences") {
    std::mt19937_64 rng(123);
    for (int n : {1, 3}) {
        MinkowskiModel m(n);
        for (int k = 0; k < 1000 / (n == 1 ? 1 : 1); ++k) {
            const TangentVector v = sample_strict(m, rng);
            const Covector dv = dl2_dv(m, v);
            const double scale = 1.0 + dv.components.norm();
            const double h = 1e-6 * (1.0 + m.h_norm(v));
            for (int a = 0; a < m.dimension(); ++a) {
                Vec e = Vec::Zero(m.dimension());
                e[a] = h;
                const double fd = (l2_value(m, TangentVector(v.base, v.components + e)) -
                                   l2_value(m, TangentVector(v.base, v.components - e))) /
                                  (2.0 * h);
                REQUIRE(std::abs(dv.components[a] - fd) <= 1e-5 * scale);
            }
        }
    }
}

TEST_CASE("fiber Hessian is positive definite at strictly timelike velocities") {
    std::mt19937_64 rng(321);
    MinkowskiModel m(2);
    for (int k = 0; k < 300; ++k) {
        const TangentVector v = sample_strict(m, rng, 0.85);
        const Eigen::MatrixXd H = fiber_hessian_fd(m, v);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        REQUIRE(es.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("action quadrature") {
    MinkowskiModel m(1);
    SampledCurve constant;
    for (int i = 0; i <= 16; ++i) {
        const Event p{0.0, 0.5};
        constant.push_back({i / 16.0, p, tv({0, 0.5}, {0, 0})});
    }
    REQUIRE(action(m, constant, ActionKind::A2).value() == 0.0);

    SampledCurve straight;
    for (int i = 0; i <= 256; ++i) {
        const double s = i / 256.0;
        const Event p{2.0 * s, 0.0};
        straight.push_back({s, p, TangentVector(p, Vec(Eigen::Vector2d(2.0, 0.0)))});
    }
    REQUIRE(action(m, straight, ActionKind::A2).value() == Catch::Approx(4.0).margin(1e-12));
    REQUIRE(action(m, straight, ActionKind::A1).value() == Catch::Approx(2.0).margin(1e-12));

    SampledCurve spacelike;
    for (int i = 0; i <= 8; ++i) {
        const double s = i / 8.0;
        const Event p{0.0, s};
        spacelike.push_back({s, p, TangentVector(p, Vec(Eigen::Vector2d(0.0, 1.0)))});
    }
    REQUIRE(action(m, spacelike, ActionKind::A2).is_infinite());
}

TEST_CASE("minimizer on a chronological pair") {
    MinkowskiModel m(1);
    const Event x{0, 0}, y{2, 1};
    const MinimizerCurve g = minimizer(m, x, y);
    // Straight segment with constant velocity (2,1).
    REQUIRE(g.initial_velocity.components[0] == 2.0);
    REQUIRE(g.initial_velocity.components[1] == 1.0);
    const double c1 = 2.0 * 2.0 - std::sqrt(3.0);  // tau increment minus distance
    for (const CurveSample& s : g.samples) {
        const double l1 = lagrangian_l1(m, s.velocity).value();
        REQUIRE(std::abs(l1 - c1) <= 1e-8);
    }
    // A2 equals the closed-form squared value 19 - 8 sqrt(3); the integrand is
    // constant, so the trapezoid rule is exact.
    const double a2 = action(m, g.samples, ActionKind::A2).value();
    REQUIRE(a2 == Catch::Approx(19.0 - 8.0 * std::sqrt(3.0)).margin(1e-10));
    // Hoelder equality case: A1^2 = A2 * duration.
    const double a1 = action(m, g.samples, ActionKind::A1).value();
    REQUIRE(a1 * a1 == Catch::Approx(a2 * g.duration).margin(1e-8));
}

TEST_CASE("refined action passes the grid-doubling check") {
    MinkowskiModel m(1);
    const ExtendedCost a2 = refined_action(m, Event{0, 0}, Event{2, 1}, ActionKind::A2);
    REQUIRE(a2.value() == Catch::Approx(19.0 - 8.0 * std::sqrt(3.0)).margin(1e-9));
    MinkowskiOdeModel ode(1);
    const ExtendedCost b2 = refined_action(ode, Event{0, 0}, Event{2, 1}, ActionKind::A2, 65);
    REQUIRE(b2.value() == Catch::Approx(a2.value()).margin(1e-6));
}

TEST_CASE("degenerate and invalid minimizer requests") {
    MinkowskiModel m(1);
    REQUIRE_THROWS_AS(minimizer(m, Event{0, 0}, Event{0, 0}), Error);
    REQUIRE_THROWS_AS(minimizer(m, Event{0, 0}, Event{0, 1}), Error);
    try {
        minimizer(m, Event{0, 0}, Event{0, 0});
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::NotCausallyRelated);
    }
}

TEST_CASE("reparametrized exponential map, analytic backend") {
    MinkowskiModel m(1);
    const Event x{0, 0};
    REQUIRE(exp_l(m, x, tv({0, 0}, {0, 0}), 5.0) == x);
    const Event mid = exp_l(m, x, tv({0, 0}, {2, 1}), 0.5);
    REQUIRE(mid.coords[0] == Catch::Approx(1.0));
    REQUIRE(mid.coords[1] == Catch::Approx(0.5));
    // scaling law: exp_L(x, t v, s) = exp_L(x, v, t s)
    const Event a = exp_l(m, x, tv({0, 0}, {4, 2}), 0.5);  // t=2 scaled velocity
    const Event b = exp_l(m, x, tv({0, 0}, {2, 1}), 1.0);
    REQUIRE((a.coords - b.coords).norm() <= 1e-12);
    REQUIRE(b.coords[0] == Catch::Approx(2.0));
}

TEST_CASE("ODE backend agrees with the analytic backend on flat space") {
    MinkowskiModel flat(2);
    MinkowskiOdeModel ode(2);
    std::mt19937_64 rng(2024);
    for (int k = 0; k < 25; ++k) {
        const TangentVector v = sample_strict(ode, rng, 0.8);
        const double t = 0.1 + 2.0 * std::uniform_real_distribution<double>(0, 1)(rng);
        const Event a = exp_l(flat, v.base, v, t);
        const Event b = exp_l(ode, v.base, v, t);
        REQUIRE((a.coords - b.coords).cwiseAbs().maxCoeff() <= 1e-6);
    }
    // Null directions work analytically (tau = 2t keeps L1 positive there)
    // but are rejected by the ODE reparametrization only if L1 vanishes;
    // in this model L1(null v) = 2 v0 > 0, so both backends agree.
    const Event null_a = exp_l(flat, Event{0, 0, 0}, tv({0, 0, 0}, {1, 1, 0}), 2.0);
    const Event null_b = exp_l(ode, Event{0, 0, 0}, tv({0, 0, 0}, {1, 1, 0}), 2.0);
    REQUIRE((null_a.coords - null_b.coords).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("ODE backend minimizer matches the straight segment") {
    MinkowskiOdeModel ode(1);
    MinkowskiModel flat(1);
    const Event x{0, 0}, y{2.0, 0.7};
    const MinimizerCurve g_ode = minimizer(ode, x, y, 65);
    const MinimizerCurve g_flat = minimizer(flat, x, y, 65);
    REQUIRE(g_ode.samples.size() == g_flat.samples.size());
    for (std::size_t i = 0; i < g_ode.samples.size(); ++i) {
        REQUIRE((g_ode.samples[i].point.coords - g_flat.samples[i].point.coords).cwiseAbs().maxCoeff() <=
                1e-6);
        REQUIRE((g_ode.samples[i].velocity.components - g_flat.samples[i].velocity.components)
                    .cwiseAbs()
                    .maxCoeff() <= 1e-5);
    }
    const double a2 = action(ode, g_ode.samples, ActionKind::A2).value();
    const double c2 = std::pow(2.0 * 2.0 - std::sqrt(4.0 - 0.49), 2.0);
    REQUIRE(a2 == Catch::Approx(c2).margin(1e-6));
}

TEST_CASE("exp_l rejects past flow and off-cone directions") {
    MinkowskiModel m(1);
    REQUIRE_THROWS_AS(exp_l(m, Event{0, 0}, tv({0, 0}, {0, 1}), 1.0), Error);
    REQUIRE_THROWS_AS(exp_l(m, Event{0, 0}, tv({0, 0}, {1, 0}), -1.0), Error);
}
