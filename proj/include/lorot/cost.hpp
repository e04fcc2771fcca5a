#pragma once

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <vector>

#include "lorot/extended_real.hpp"
#include "lorot/lagrangian.hpp"
#include "lorot/spacetime.hpp"

namespace lorot {

/// c1(x,y) = tau(y) - tau(x) - d(x,y) on the causal future, +inf otherwise.
inline ExtendedCost cost_c1(const SpacetimeModel& model, const Event& x, const Event& y) {
    const CausalClass cls = model.classify(x, y);
    if (cls == CausalClass::Unrelated) return ExtendedCost::infinity();
    if (cls == CausalClass::Equal) return ExtendedCost::finite(0.0);
    const double c1 = model.tau(y) - model.tau(x) - model.distance(x, y);
    return ExtendedCost::finite(std::max(c1, 0.0));
}

/// c2 = c1^2.
inline ExtendedCost cost_c2(const SpacetimeModel& model, const Event& x, const Event& y) {
    const ExtendedCost c1 = cost_c1(model, x, y);
    if (c1.is_infinite()) return ExtendedCost::infinity();
    return ExtendedCost::finite(c1.value() * c1.value());
}

/// Derivative of c2 in its first argument, defined on chronological pairs:
/// -dL2/dv evaluated at the initial velocity of the action minimizer.
inline Covector dc2_dx(const SpacetimeModel& model, const Event& x, const Event& y) {
    if (model.classify(x, y) != CausalClass::Chronological)
        throw Error(ErrorCode::NotChronological, "dc2_dx needs y in the chronological future of x");
    const MinimizerCurve gamma = minimizer(model, x, y, 2);
    const Covector fiber = dl2_dv(model, gamma.initial_velocity);
    return Covector(x, -fiber.components);
}

/// Dense matrix of pairwise c2 values with provenance for downstream
/// evaluation at off-support events.
struct CostMatrix {
    ModelPtr model;
    std::vector<Event> xs;
    std::vector<Event> ys;
    std::vector<ExtendedCost> entries;  // row-major
    int infinite_count = 0;

    int rows() const { return static_cast<int>(xs.size()); }
    int cols() const { return static_cast<int>(ys.size()); }

    const ExtendedCost& at(int i, int j) const {
        return entries[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols()) +
                       static_cast<std::size_t>(j)];
    }

    bool all_infinite() const { return infinite_count == rows() * cols(); }
};

inline CostMatrix assemble_cost_matrix(ModelPtr model, std::vector<Event> xs,
                                       std::vector<Event> ys) {
    if (!model) throw Error(ErrorCode::InvalidArgument, "null model");
    if (xs.empty() || ys.empty())
        throw Error(ErrorCode::InvalidArgument, "cost matrix needs non-empty point lists");
    CostMatrix m;
    m.model = std::move(model);
    m.xs = std::move(xs);
    m.ys = std::move(ys);
    m.entries.reserve(m.xs.size() * m.ys.size());
    for (const Event& x : m.xs) {
        for (const Event& y : m.ys) {
            ExtendedCost c = cost_c2(*m.model, x, y);
            if (c.is_infinite()) ++m.infinite_count;
            m.entries.push_back(c);
        }
    }
    return m;
}

/// CSV dump; +inf entries are written as the literal "inf".
inline void write_cost_matrix_csv(const CostMatrix& m, std::ostream& os) {
    char buf[64];
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            const ExtendedCost& c = m.at(i, j);
            if (c.is_infinite()) {
                os << "inf";
            } else {
                std::snprintf(buf, sizeof(buf), "%.17g", c.value());
                os << buf;
            }
        }
        os << '\n';
    }
}

}  // namespace lorot
