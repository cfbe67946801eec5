#include "gradstab/objective.hpp"

#include <fmt/format.h>

#include <cmath>

namespace gradstab {

namespace {

struct Branches {
    double c, r, alpha;

    double inner(double v) const { return -0.5 * c * v * v; }
    double inner_d1(double v) const { return -c * v; }
    double inner_d2(double) const { return -c; }

    double outer(double v) const {
        const double s = std::abs(v) - r;
        return -0.5 * c * v * v + alpha * s * s * s * s;
    }
    double outer_d1(double v) const {
        const double s = std::abs(v) - r;
        return -c * v + 4.0 * alpha * s * s * s * (v < 0 ? -1.0 : 1.0);
    }
    double outer_d2(double v) const {
        const double s = std::abs(v) - r;
        return -c + 12.0 * alpha * s * s;
    }
};

template <class Fn>
double bisect(Fn&& fn, double lo, double hi) {
    // fn(lo) < 0 < fn(hi)
    while (true) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) return hi;
        (fn(mid) < 0.0 ? lo : hi) = mid;
    }
}

}  // namespace

ConcaveCapFunction::ConcaveCapFunction(double c, double glue_radius, double alpha, std::string name)
    : SemiconvexFunction(std::move(name), 1), c_(c), radius_(glue_radius), alpha_(alpha) {
    if (!(c > 0.0)) throw DomainError("concave cap: slope c must be positive");
    if (!(glue_radius >= 1.0)) throw DomainError("concave cap: glue radius must be at least 1");
    if (!(alpha > 0.0)) throw DomainError("concave cap: quartic coefficient must be positive");
    c_f_ = c;
    coercive_ = true;

    // F' < 0 at R and F' is convex beyond R, so F has one minimiser v* > R and
    // increases past it.
    const Branches br{c_, radius_, alpha_};
    double hi = radius_ + 1.0;
    while (br.outer_d1(hi) <= 0.0) hi = radius_ + 2.0 * (hi - radius_);
    const double v_star = bisect([&](double v) { return br.outer_d1(v); }, radius_, hi);
    const double f_min = br.outer(v_star);
    lower_bound_ = f_min - 1e-12 * (1.0 + std::abs(f_min));

    const double level = scalar_value(0.0) + 1.0;
    hi = v_star + 1.0;
    while (br.outer(hi) <= level) hi = v_star + 2.0 * (hi - v_star);
    coercivity_radius_ = bisect([&](double v) { return br.outer(v) - level; }, v_star, hi);

    metadata_["c"] = fmt::format("{:.17g}", c_);
    metadata_["glue_radius"] = fmt::format("{:.17g}", radius_);
    metadata_["alpha"] = fmt::format("{:.17g}", alpha_);
    metadata_["coercivity_radius"] = fmt::format("{:.17g}", coercivity_radius_);
}

double ConcaveCapFunction::scalar_value(double v) const {
    const Branches br{c_, radius_, alpha_};
    return std::abs(v) <= radius_ ? br.inner(v) : br.outer(v);
}

double ConcaveCapFunction::scalar_derivative(double v) const {
    const Branches br{c_, radius_, alpha_};
    return std::abs(v) <= radius_ ? br.inner_d1(v) : br.outer_d1(v);
}

double ConcaveCapFunction::scalar_second_derivative(double v) const {
    const Branches br{c_, radius_, alpha_};
    return std::abs(v) <= radius_ ? br.inner_d2(v) : br.outer_d2(v);
}

ConcaveCapFunction::GlueJump ConcaveCapFunction::glue_jump() const {
    const Branches br{c_, radius_, alpha_};
    const double r = radius_;
    return {br.outer(r) - br.inner(r), br.outer_d1(r) - br.inner_d1(r), br.outer_d2(r) - br.inner_d2(r)};
}

double ConcaveCapFunction::value(const Vector& v) const {
    check_dim(v);
    return scalar_value(v[0]);
}

Vector ConcaveCapFunction::gradient(const Vector& v) const {
    check_dim(v);
    return Vector::Constant(1, scalar_derivative(v[0]));
}

Matrix ConcaveCapFunction::hessian(const Vector& v) const {
    check_dim(v);
    return Matrix::Constant(1, 1, scalar_second_derivative(v[0]));
}

BarrierFunction::BarrierFunction(int k, double dt, double glue_radius)
    : ConcaveCapFunction(to_double(barrier_lambda(k)) / dt, glue_radius, to_double(barrier_lambda(k)) / dt,
                         fmt::format("barrier-{}", k)),
      k_(k),
      dt_(dt) {
    if (!(dt > 0.0)) throw DomainError("barrier_function: dt must be positive");
    metadata_["k"] = std::to_string(k);
    metadata_["dt"] = fmt::format("{:.17g}", dt);
    metadata_["lambda_k"] = to_string(barrier_lambda(k));
}

std::shared_ptr<BarrierFunction> barrier_function(int k, double dt, double glue_radius) {
    if (!(dt > 0.0)) throw DomainError("barrier_function: dt must be positive");
    return std::make_shared<BarrierFunction>(k, dt, glue_radius);
}

}  // namespace gradstab
