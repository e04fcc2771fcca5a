#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "lorot/errors.hpp"

namespace lorot {

using Vec = Eigen::VectorXd;

/// Point of M = R x R^n in product coordinates; coordinate 0 is the time
/// component (geometric units, c = 1).
struct Event {
    Vec coords;

    Event() = default;
    explicit Event(Vec c) : coords(std::move(c)) {}
    Event(std::initializer_list<double> xs) : coords(Eigen::Map<const Vec>(xs.begin(), static_cast<Eigen::Index>(xs.size()))) {}

    int dim() const { return static_cast<int>(coords.size()); }
    double t() const { return coords[0]; }

    friend bool operator==(const Event& a, const Event& b) {
        return a.coords.size() == b.coords.size() && a.coords == b.coords;
    }
};

struct TangentVector {
    Event base;
    Vec components;

    TangentVector() = default;
    TangentVector(Event b, Vec c) : base(std::move(b)), components(std::move(c)) {}
    int dim() const { return static_cast<int>(components.size()); }
};

/// Dual pairing against tangent components is the coordinate dot product.
struct Covector {
    Event base;
    Vec components;

    Covector() = default;
    Covector(Event b, Vec c) : base(std::move(b)), components(std::move(c)) {}
    int dim() const { return static_cast<int>(components.size()); }

    double apply(const TangentVector& v) const { return components.dot(v.components); }
};

/// Ordered causal relation of an event pair.
enum class CausalClass { Chronological, NullCausal, Equal, Unrelated };

/// Position of a single tangent vector relative to the future cone.
enum class ConeClass { TimelikeFuture, NullFuture, Zero, Outside };

inline const char* to_string(CausalClass c) {
    switch (c) {
        case CausalClass::Chronological: return "Chronological";
        case CausalClass::NullCausal:    return "NullCausal";
        case CausalClass::Equal:         return "Equal";
        case CausalClass::Unrelated:     return "Unrelated";
    }
    return "?";
}

/// Relative tolerance for on-cone classification of Delta0^2 - |spatial|^2;
/// ties resolve to the null side so boundary pairs keep a finite cost.
inline constexpr double kCausalTol = 1e-12;

/// Geometry bundle: metric g, auxiliary Riemannian norm h, time function tau,
/// time separation d, causal classifier and geodesic data. Immutable after
/// construction; all operations are pure and safe to share across threads.
class SpacetimeModel {
public:
    virtual ~SpacetimeModel() = default;

    /// 1 + n.
    virtual int dimension() const = 0;

    virtual double metric_inner(const TangentVector& u, const TangentVector& v) const = 0;
    virtual double tau(const Event& x) const = 0;
    virtual Covector tau_differential(const Event& x) const = 0;
    virtual double distance(const Event& x, const Event& y) const = 0;
    virtual CausalClass classify(const Event& x, const Event& y) const = 0;
    virtual double h_norm(const TangentVector& v) const = 0;

    /// Gamma^k_{ij} stacked per upper index k; zero matrices in flat space.
    virtual void christoffel(const Event& x, std::vector<Eigen::MatrixXd>& out) const = 0;

    /// True when geodesics are straight coordinate lines (skips the ODE path).
    virtual bool flat() const { return false; }

    /// Initial velocity of the affinely parametrized maximizing geodesic
    /// from x reaching y at parameter 1. Curved backends must supply this.
    virtual TangentVector connecting_velocity(const Event& x, const Event& y) const {
        (void)x;
        (void)y;
        throw Error(ErrorCode::UnsupportedModel, "model supplies no connecting geodesic");
    }

    double g_norm(const TangentVector& v) const {
        return std::sqrt(std::abs(metric_inner(v, v)));
    }

    /// g(v, .) as a covector at the base of v.
    Covector metric_covector(const TangentVector& v) const {
        const int d = dimension();
        Vec comps(d);
        for (int i = 0; i < d; ++i) {
            Vec e = Vec::Zero(d);
            e[i] = 1.0;
            comps[i] = metric_inner(v, TangentVector(v.base, e));
        }
        return Covector(v.base, comps);
    }

    ConeClass cone_classify(const TangentVector& v) const {
        check_dim(v.dim());
        const double h2 = h_norm(v) * h_norm(v);
        if (h2 == 0.0) return ConeClass::Zero;
        if (tau_differential(v.base).apply(v) <= 0.0) return ConeClass::Outside;
        const double q = -metric_inner(v, v);  // > 0 timelike
        if (q > kCausalTol * h2) return ConeClass::TimelikeFuture;
        if (q >= -kCausalTol * h2) return ConeClass::NullFuture;
        return ConeClass::Outside;
    }

    /// Closed future cone (includes the zero vector).
    bool future_causal(const TangentVector& v) const {
        return cone_classify(v) != ConeClass::Outside;
    }

protected:
    void check_dim(int d) const {
        if (d != dimension()) throw Error(ErrorCode::DimensionMismatch, "dimension mismatch");
    }
};

using ModelPtr = std::shared_ptr<const SpacetimeModel>;

/// Flat reference backend: signature (-,+,...,+), tau(t,x) = 2t, Euclidean h.
class MinkowskiModel : public SpacetimeModel {
public:
    explicit MinkowskiModel(int spatial_dim) : dim_(spatial_dim + 1) {
        if (spatial_dim < 1) throw Error(ErrorCode::InvalidArgument, "need spatial dim >= 1");
    }

    int dimension() const override { return dim_; }

    double metric_inner(const TangentVector& u, const TangentVector& v) const override {
        check_dim(u.dim());
        check_dim(v.dim());
        if (u.base.coords != v.base.coords)
            throw Error(ErrorCode::InvalidArgument, "metric_inner needs a shared base event");
        double s = -u.components[0] * v.components[0];
        for (int i = 1; i < dim_; ++i) s += u.components[i] * v.components[i];
        return s;
    }

    double tau(const Event& x) const override {
        check_dim(x.dim());
        return 2.0 * x.coords[0];
    }

    Covector tau_differential(const Event& x) const override {
        check_dim(x.dim());
        Vec c = Vec::Zero(dim_);
        c[0] = 2.0;
        return Covector(x, c);
    }

    CausalClass classify(const Event& x, const Event& y) const override {
        check_dim(x.dim());
        check_dim(y.dim());
        const Vec delta = y.coords - x.coords;
        if (delta.isZero(0.0)) return CausalClass::Equal;
        const double dt = delta[0];
        if (dt <= 0.0) return CausalClass::Unrelated;
        const double sp2 = delta.tail(dim_ - 1).squaredNorm();
        const double q = dt * dt - sp2;
        const double scale = dt * dt + sp2;
        if (q > kCausalTol * scale) return CausalClass::Chronological;
        if (q >= -kCausalTol * scale) return CausalClass::NullCausal;
        return CausalClass::Unrelated;
    }

    double distance(const Event& x, const Event& y) const override {
        if (classify(x, y) != CausalClass::Chronological) return 0.0;
        const Vec delta = y.coords - x.coords;
        const double q = delta[0] * delta[0] - delta.tail(dim_ - 1).squaredNorm();
        return std::sqrt(std::max(q, 0.0));
    }

    double h_norm(const TangentVector& v) const override {
        check_dim(v.dim());
        return v.components.norm();
    }

    void christoffel(const Event& x, std::vector<Eigen::MatrixXd>& out) const override {
        check_dim(x.dim());
        out.assign(static_cast<std::size_t>(dim_), Eigen::MatrixXd::Zero(dim_, dim_));
    }

    bool flat() const override { return true; }

    TangentVector connecting_velocity(const Event& x, const Event& y) const override {
        check_dim(x.dim());
        check_dim(y.dim());
        return TangentVector(x, y.coords - x.coords);
    }

private:
    int dim_;
};

/// Draws a random future causal vector at a random base event. r = 1 lands on
/// the cone boundary, so the sample sweep covers null directions too. Vectors
/// a curved model rejects from its cone are resampled.
inline TangentVector sample_future_causal(const SpacetimeModel& model, std::mt19937_64& rng) {
    const int d = model.dimension();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Vec base(d);
        for (int i = 0; i < d; ++i) base[i] = 4.0 * gauss(rng);
        Vec dir = Vec::Zero(d);
        double norm = 0.0;
        do {
            for (int i = 1; i < d; ++i) dir[i] = gauss(rng);
            norm = dir.norm();
        } while (norm == 0.0);
        dir /= norm;
        const double v0 = 0.05 + 10.0 * unit(rng);
        const double r = unit(rng);
        Vec comps = dir * (r * v0);
        comps[0] = v0;
        TangentVector v(Event(base), comps);
        if (model.future_causal(v) && model.h_norm(v) > 0.0) return v;
    }
    throw Error(ErrorCode::UnsupportedModel, "could not sample a future causal vector");
}

/// Sampled validation of the growth bound d tau(v) >= max(2|v|_g, |v|_h) on
/// future causal vectors. Any model plugged into the cost machinery must pass.
inline bool check_splitting_inequality(const SpacetimeModel& model, std::uint64_t seed,
                                       int samples, double tol = 1e-12) {
    std::mt19937_64 rng(seed);
    for (int k = 0; k < samples; ++k) {
        const TangentVector v = sample_future_causal(model, rng);
        const double lhs = model.tau_differential(v.base).apply(v);
        const double rhs = std::max(2.0 * model.g_norm(v), model.h_norm(v));
        if (lhs < rhs - tol) return false;
    }
    return true;
}

}  // namespace lorot
