#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "lorot/errors.hpp"

namespace lorot {

/// Nonnegative cost value that is either finite or +inf. The infinite state is
/// a tag, never a sentinel float, so the sum conventions below stay exact.
class ExtendedCost {
public:
    ExtendedCost() : value_(0.0), infinite_(false) {}

    static ExtendedCost finite(double v) {
        if (!std::isfinite(v) || v < 0.0)
            throw Error(ErrorCode::InvalidArgument, "finite cost must be a nonnegative real");
        ExtendedCost c;
        c.value_ = v;
        return c;
    }

    static ExtendedCost infinity() {
        ExtendedCost c;
        c.infinite_ = true;
        return c;
    }

    bool is_finite() const { return !infinite_; }
    bool is_infinite() const { return infinite_; }

    double value() const {
        if (infinite_) throw Error(ErrorCode::InvalidArgument, "value() on infinite cost");
        return value_;
    }

    /// Finite value, or +inf as a double (display/comparison helper only).
    double as_double() const {
        return infinite_ ? std::numeric_limits<double>::infinity() : value_;
    }

    friend bool operator==(const ExtendedCost& a, const ExtendedCost& b) {
        if (a.infinite_ != b.infinite_) return false;
        return a.infinite_ || a.value_ == b.value_;
    }

private:
    double value_;
    bool infinite_;
};

/// Extended real with tagged +/-inf states.
class ExtReal {
public:
    enum class Tag { Finite, PlusInf, MinusInf };

    ExtReal() : tag_(Tag::Finite), value_(0.0) {}

    static ExtReal finite(double v) {
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "finite() needs a real");
        ExtReal r;
        r.value_ = v;
        return r;
    }
    static ExtReal plus_inf() {
        ExtReal r;
        r.tag_ = Tag::PlusInf;
        return r;
    }
    static ExtReal minus_inf() {
        ExtReal r;
        r.tag_ = Tag::MinusInf;
        return r;
    }
    static ExtReal from_cost(const ExtendedCost& c) {
        return c.is_finite() ? finite(c.value()) : plus_inf();
    }

    Tag tag() const { return tag_; }
    bool is_finite() const { return tag_ == Tag::Finite; }
    bool is_plus_inf() const { return tag_ == Tag::PlusInf; }
    bool is_minus_inf() const { return tag_ == Tag::MinusInf; }

    double value() const {
        if (!is_finite()) throw Error(ErrorCode::InvalidArgument, "value() on infinite ExtReal");
        return value_;
    }

    double as_double() const {
        switch (tag_) {
            case Tag::PlusInf:  return std::numeric_limits<double>::infinity();
            case Tag::MinusInf: return -std::numeric_limits<double>::infinity();
            default:            return value_;
        }
    }

    std::string to_string() const {
        if (is_plus_inf()) return "+inf";
        if (is_minus_inf()) return "-inf";
        return std::to_string(value_);
    }

    friend bool operator==(const ExtReal& a, const ExtReal& b) {
        if (a.tag_ != b.tag_) return false;
        return a.tag_ != Tag::Finite || a.value_ == b.value_;
    }

    /// Total order -inf < finite < +inf.
    friend bool operator<(const ExtReal& a, const ExtReal& b) {
        if (a.tag_ == b.tag_) return a.is_finite() && a.value_ < b.value_;
        if (a.is_minus_inf()) return true;
        if (b.is_minus_inf()) return false;
        return b.is_plus_inf();
    }
    friend bool operator<=(const ExtReal& a, const ExtReal& b) { return !(b < a); }
    friend bool operator>(const ExtReal& a, const ExtReal& b) { return b < a; }
    friend bool operator>=(const ExtReal& a, const ExtReal& b) { return !(a < b); }

private:
    Tag tag_;
    double value_ = 0.0;
};

inline std::ostream& operator<<(std::ostream& os, const ExtReal& r) { return os << r.to_string(); }

// Sum conventions. Each of the three transform directions carries its own rule
// for the otherwise undefined inf-inf combination; mixing them up silently
// breaks the inequality psi(y) - phi(x) <= c2(x,y).

/// c + phi as used inside the infimum of the c2-transform. Rule: an infinite
/// cost dominates, so (+inf) + (-inf) := +inf.
inline ExtReal transform_term(const ExtendedCost& c, const ExtReal& phi) {
    if (c.is_infinite()) return ExtReal::plus_inf();
    if (phi.is_plus_inf()) return ExtReal::plus_inf();
    if (phi.is_minus_inf()) return ExtReal::minus_inf();
    return ExtReal::finite(c.value() + phi.value());
}

/// psi - c as used inside the supremum of the convexification. Rule:
/// (+inf) - (+inf) := -inf, so such terms drop out of the sup.
inline ExtReal convexify_term(const ExtReal& psi, const ExtendedCost& c) {
    if (psi.is_minus_inf()) return ExtReal::minus_inf();
    if (psi.is_plus_inf()) return c.is_infinite() ? ExtReal::minus_inf() : ExtReal::plus_inf();
    if (c.is_infinite()) return ExtReal::minus_inf();
    return ExtReal::finite(psi.value() - c.value());
}

/// psi - phi for the dual feasibility inequality. Rule: when both sides are
/// infinite (any signs) the difference is -inf.
inline ExtReal potential_diff(const ExtReal& psi, const ExtReal& phi) {
    if (!psi.is_finite() && !phi.is_finite()) return ExtReal::minus_inf();
    if (psi.is_minus_inf() || phi.is_plus_inf()) return ExtReal::minus_inf();
    if (psi.is_plus_inf() || phi.is_minus_inf()) return ExtReal::plus_inf();
    return ExtReal::finite(psi.value() - phi.value());
}

/// c - phi. Rule: (+inf) - (+inf) := +inf.
inline ExtReal cost_minus_potential(const ExtendedCost& c, const ExtReal& phi) {
    if (c.is_infinite()) return ExtReal::plus_inf();
    if (phi.is_plus_inf()) return ExtReal::minus_inf();
    if (phi.is_minus_inf()) return ExtReal::plus_inf();
    return ExtReal::finite(c.value() - phi.value());
}

/// diff <= c within slack tol (infinite cost accepts everything).
inline bool leq_cost(const ExtReal& diff, const ExtendedCost& c, double tol) {
    if (c.is_infinite()) return true;
    if (diff.is_minus_inf()) return true;
    if (diff.is_plus_inf()) return false;
    return diff.value() <= c.value() + tol;
}

}  // namespace lorot
