#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lorot/errors.hpp"
#include "lorot/spacetime.hpp"

namespace lorot {

inline constexpr double kWeightSumTol = 1e-12;
inline constexpr double kMarginalTol = 1e-10;

/// Finitely supported probability measure. Construction merges exact
/// duplicate points and validates the weight sum.
struct DiscreteMeasure {
    std::vector<Event> points;
    std::vector<double> weights;

    int size() const { return static_cast<int>(points.size()); }

    static DiscreteMeasure create(std::vector<Event> pts, std::vector<double> wts) {
        if (pts.size() != wts.size() || pts.empty())
            throw Error(ErrorCode::InvalidArgument, "points/weights size mismatch");
        DiscreteMeasure m;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (!pts[k].coords.allFinite())
                throw Error(ErrorCode::InvalidArgument, "support points must have finite coordinates");
            if (!(wts[k] > 0.0))
                throw Error(ErrorCode::InvalidArgument, "weights must be strictly positive");
            bool merged = false;
            for (std::size_t j = 0; j < m.points.size(); ++j) {
                if (m.points[j] == pts[k]) {
                    m.weights[j] += wts[k];
                    merged = true;
                    break;
                }
            }
            if (!merged) {
                m.points.push_back(std::move(pts[k]));
                m.weights.push_back(wts[k]);
            }
        }
        double sum = 0.0;
        for (double w : m.weights) sum += w;
        if (std::abs(sum - 1.0) > kWeightSumTol)
            throw Error(ErrorCode::InvalidArgument, "weights must sum to 1");
        return m;
    }
};

struct PlanEntry {
    int i = 0;
    int j = 0;
    double mass = 0.0;
};

/// Transport plan with prescribed marginals, stored sparsely in row-major
/// order with strictly positive masses.
struct Coupling {
    DiscreteMeasure source;
    DiscreteMeasure target;
    std::vector<PlanEntry> plan;

    double mass_at(int i, int j) const {
        for (const PlanEntry& e : plan)
            if (e.i == i && e.j == j) return e.mass;
        return 0.0;
    }
};

inline std::pair<std::vector<double>, std::vector<double>> marginals(const Coupling& c) {
    std::vector<double> row(static_cast<std::size_t>(c.source.size()), 0.0);
    std::vector<double> col(static_cast<std::size_t>(c.target.size()), 0.0);
    for (const PlanEntry& e : c.plan) {
        row[static_cast<std::size_t>(e.i)] += e.mass;
        col[static_cast<std::size_t>(e.j)] += e.mass;
    }
    return {row, col};
}

inline bool marginals_match(const Coupling& c, double tol = kMarginalTol) {
    const auto [row, col] = marginals(c);
    for (int i = 0; i < c.source.size(); ++i)
        if (std::abs(row[static_cast<std::size_t>(i)] - c.source.weights[static_cast<std::size_t>(i)]) > tol)
            return false;
    for (int j = 0; j < c.target.size(); ++j)
        if (std::abs(col[static_cast<std::size_t>(j)] - c.target.weights[static_cast<std::size_t>(j)]) > tol)
            return false;
    return true;
}

/// Image measure under a point-to-point assignment given per support point.
/// Preimages of a common point merge.
inline DiscreteMeasure pushforward(const DiscreteMeasure& mu, const std::vector<Event>& images) {
    if (images.size() != mu.points.size())
        throw Error(ErrorCode::PartialMap, "assignment must cover every support point");
    return DiscreteMeasure::create(images, mu.weights);
}

enum class InstanceProfile { Slices, Marginal, Infeasible };

inline const char* to_string(InstanceProfile p) {
    switch (p) {
        case InstanceProfile::Slices:      return "slices";
        case InstanceProfile::Marginal:    return "marginal";
        case InstanceProfile::Infeasible:  return "infeasible";
    }
    return "?";
}

inline InstanceProfile profile_from_string(const std::string& s) {
    if (s == "slices") return InstanceProfile::Slices;
    if (s == "marginal") return InstanceProfile::Marginal;
    if (s == "infeasible") return InstanceProfile::Infeasible;
    throw Error(ErrorCode::InvalidArgument, "unknown profile '" + s + "'");
}

struct Instance {
    ModelPtr model;
    DiscreteMeasure mu;
    DiscreteMeasure nu;
    std::uint64_t seed = 0;
    int spatial_dim = 1;
    std::string profile = "slices";
    double slab_time = 3.0;
    double slab_radius = 1.0;
};

namespace detail {

/// Random dyadic weights k_i / 2^20 with sum exactly 1, so marginal sums stay
/// exact in binary floating point.
inline std::vector<double> dyadic_weights(int count, std::mt19937_64& rng) {
    constexpr std::int64_t kDen = 1 << 20;
    std::vector<std::int64_t> num(static_cast<std::size_t>(count), 1);
    std::int64_t left = kDen - count;
    std::uniform_int_distribution<std::int64_t> pick(0, count - 1);
    // Spread the remaining mass in random chunks.
    while (left > 0) {
        std::uniform_int_distribution<std::int64_t> chunk(1, std::max<std::int64_t>(1, left / 3 + 1));
        const std::int64_t c = std::min(left, chunk(rng));
        num[static_cast<std::size_t>(pick(rng))] += c;
        left -= c;
    }
    std::vector<double> w(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        w[static_cast<std::size_t>(i)] = static_cast<double>(num[static_cast<std::size_t>(i)]) / static_cast<double>(kDen);
    return w;
}

/// Uniform point in the spatial ball of radius r (rejection sampling).
inline Vec spatial_ball(int n, double r, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec p(n);
    while (true) {
        for (int i = 0; i < n; ++i) p[i] = u(rng);
        if (p.squaredNorm() < 1.0) return r * p;
    }
}

inline Event slab_point(int n, double t, double radius, std::mt19937_64& rng) {
    Vec coords(n + 1);
    coords[0] = t;
    coords.tail(n) = spatial_ball(n, radius, rng);
    return Event(coords);
}

}  // namespace detail

/// Deterministic per-seed instance generator.
///   slices:     mu on {t=0, |x|<R}, nu on {t=T, |x|<R} with T > 2R, so every
///               pair is chronological and the supports are disjoint.
///   marginal:   slices bulk plus one isolated pair exactly on the light cone
///               (equal weight on both sides); any causal plan must use the
///               null arc, and some pairs are spacelike.
///   infeasible: nu entirely spacelike to mu; no admissible arc at all.
/// Weights are uniform by default (equal-size instances then admit
/// permutation plans); random_weights switches to random dyadic rationals,
/// whose marginal arithmetic is exact in binary floating point.
inline Instance generate_instance(std::uint64_t seed, int spatial_dim, int m_mu, int m_nu,
                                  InstanceProfile profile, bool random_weights = false,
                                  double slab_time = 3.0, double slab_radius = 1.0) {
    if (spatial_dim < 1 || m_mu < 1 || m_nu < 1)
        throw Error(ErrorCode::InvalidArgument, "sizes and dimension must be >= 1");
    if (!(slab_time > 2.0 * slab_radius))
        throw Error(ErrorCode::InvalidArgument, "slab needs T > 2R");
    Instance inst;
    inst.model = std::make_shared<MinkowskiModel>(spatial_dim);
    inst.seed = seed;
    inst.spatial_dim = spatial_dim;
    inst.profile = to_string(profile);
    inst.slab_time = slab_time;
    inst.slab_radius = slab_radius;

    // Independent streams so the profiles share the bulk layout per seed.
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0x51ED2701ULL);

    std::vector<Event> mu_pts, nu_pts;
    const int n = spatial_dim;
    auto weights_for = [&](int count) {
        if (random_weights) return detail::dyadic_weights(count, rng);
        return std::vector<double>(static_cast<std::size_t>(count), 1.0 / count);
    };

    switch (profile) {
        case InstanceProfile::Slices: {
            for (int i = 0; i < m_mu; ++i) mu_pts.push_back(detail::slab_point(n, 0.0, slab_radius, rng));
            for (int j = 0; j < m_nu; ++j) nu_pts.push_back(detail::slab_point(n, slab_time, slab_radius, rng));
            inst.mu = DiscreteMeasure::create(mu_pts, weights_for(m_mu));
            inst.nu = DiscreteMeasure::create(nu_pts, weights_for(m_nu));
            break;
        }
        case InstanceProfile::Marginal: {
            // Far-away pair on the light cone: x* = (0, D, 0, ...),
            // y* = (1, D+1, 0, ...). Spacelike to the entire bulk for D large.
            const double far = 10.0;
            Vec xs = Vec::Zero(n + 1), ys = Vec::Zero(n + 1);
            xs[1] = far;
            ys[0] = 1.0;
            ys[1] = far + 1.0;
            mu_pts.push_back(Event(xs));
            nu_pts.push_back(Event(ys));
            for (int i = 1; i < m_mu; ++i) mu_pts.push_back(detail::slab_point(n, 0.0, slab_radius, rng));
            for (int j = 1; j < m_nu; ++j) nu_pts.push_back(detail::slab_point(n, slab_time, slab_radius, rng));
            // The forced pair needs matching mass on both sides.
            const double kPairWeight = 1.0 / 16.0;
            auto scale_tail = [&](std::vector<double> w) {
                w.insert(w.begin(), kPairWeight);
                for (std::size_t k = 1; k < w.size(); ++k) w[k] *= (1.0 - kPairWeight);
                return w;
            };
            if (m_mu == 1 || m_nu == 1) {
                // Degenerate sizes collapse to the pure forced pair.
                inst.mu = DiscreteMeasure::create({mu_pts[0]}, {1.0});
                inst.nu = DiscreteMeasure::create({nu_pts[0]}, {1.0});
            } else {
                inst.mu = DiscreteMeasure::create(mu_pts, scale_tail(weights_for(m_mu - 1)));
                inst.nu = DiscreteMeasure::create(nu_pts, scale_tail(weights_for(m_nu - 1)));
            }
            break;
        }
        case InstanceProfile::Infeasible: {
            for (int i = 0; i < m_mu; ++i) mu_pts.push_back(detail::slab_point(n, 0.0, slab_radius, rng));
            // Same time slice, spatially displaced: every pair spacelike.
            for (int j = 0; j < m_nu; ++j) {
                Event p = detail::slab_point(n, 0.0, slab_radius, rng);
                p.coords[1] += 8.0 * slab_radius;
                nu_pts.push_back(p);
            }
            inst.mu = DiscreteMeasure::create(mu_pts, weights_for(m_mu));
            inst.nu = DiscreteMeasure::create(nu_pts, weights_for(m_nu));
            break;
        }
    }
    return inst;
}

}  // namespace lorot
