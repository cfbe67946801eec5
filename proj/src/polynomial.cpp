#include "gradstab/objective.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gradstab {

namespace {

double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

// prod_j v_j^{e_j} with the exponent of coordinate i1 lowered by d1 and of i2 by d2.
double partial_product(const Monomial& m, const Vector& v, int i1, int d1, int i2 = -1, int d2 = 0) {
    double r = 1.0;
    for (std::size_t j = 0; j < m.exponents.size(); ++j) {
        int e = m.exponents[j];
        if (static_cast<int>(j) == i1) e -= d1;
        if (static_cast<int>(j) == i2) e -= d2;
        r *= ipow(v[j], e);
    }
    return r;
}

}  // namespace

PolynomialEnergy::PolynomialEnergy(std::vector<Monomial> terms, int dim, SamplingBox box, std::string name)
    : SemiconvexFunction(std::move(name), dim), terms_(std::move(terms)) {
    validate();
    estimate_on_box(box);
}

PolynomialEnergy::PolynomialEnergy(std::vector<Monomial> terms, int dim, Exact exact, std::string name)
    : SemiconvexFunction(std::move(name), dim), terms_(std::move(terms)) {
    validate();
    c_f_ = exact.semiconvexity;
    lower_bound_ = exact.lower_bound;
    coercive_ = exact.coercive;
}

void PolynomialEnergy::validate() const {
    if (dim_ < 1) throw DomainError("polynomial: dimension must be positive");
    for (const auto& t : terms_) {
        if (static_cast<int>(t.exponents.size()) != dim_)
            throw ShapeError(fmt::format("polynomial: monomial with {} exponents in dimension {}", t.exponents.size(), dim_));
        for (int e : t.exponents)
            if (e < 0) throw DomainError("polynomial: negative exponent");
    }
}

void PolynomialEnergy::estimate_on_box(const SamplingBox& box) {
    if (!(box.hi > box.lo) || box.samples < 2) throw DomainError("polynomial: empty sampling box");
    std::vector<Vector> interior;
    std::vector<Vector> boundary;
    if (dim_ == 1) {
        for (int i = 0; i < box.samples; ++i) {
            Vector v(1);
            v[0] = box.lo + (box.hi - box.lo) * i / (box.samples - 1);
            (i == 0 || i == box.samples - 1 ? boundary : interior).push_back(v);
        }
    } else {
        std::mt19937_64 rng(box.seed);
        std::uniform_real_distribution<double> ud(box.lo, box.hi);
        std::uniform_int_distribution<int> coord(0, dim_ - 1);
        interior.push_back(Vector::Constant(dim_, 0.5 * (box.lo + box.hi)));
        for (int s = 0; s < box.samples; ++s) {
            Vector v(dim_);
            for (int i = 0; i < dim_; ++i) v[i] = ud(rng);
            interior.push_back(v);
            Vector w(dim_);
            for (int i = 0; i < dim_; ++i) w[i] = ud(rng);
            w[coord(rng)] = (s % 2) ? box.hi : box.lo;
            boundary.push_back(w);
        }
        if (dim_ <= 12)
            for (long mask = 0; mask < (1L << dim_); ++mask) {
                Vector v(dim_);
                for (int i = 0; i < dim_; ++i) v[i] = (mask >> i) & 1 ? box.hi : box.lo;
                boundary.push_back(v);
            }
    }

    double min_eig = std::numeric_limits<double>::infinity();
    double min_in = std::numeric_limits<double>::infinity();
    double min_bd = std::numeric_limits<double>::infinity();
    for (const auto& v : interior) {
        min_in = std::min(min_in, value(v));
        min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Matrix>(hessian(v)).eigenvalues().minCoeff());
    }
    for (const auto& v : boundary) {
        min_bd = std::min(min_bd, value(v));
        min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Matrix>(hessian(v)).eigenvalues().minCoeff());
    }
    if (dim_ == 1) {
        // Polish the smallest curvature between neighbouring grid points.
        const double cell = (box.hi - box.lo) / (box.samples - 1);
        double best_v = box.lo;
        for (const auto* set : {&interior, &boundary})
            for (const auto& v : *set)
                if (hessian(v)(0, 0) <= min_eig) best_v = v[0];
        double lo = std::max(box.lo, best_v - cell);
        double hi = std::min(box.hi, best_v + cell);
        auto curv = [&](double x) { return hessian(Vector::Constant(1, x))(0, 0); };
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
            const double x1 = hi - inv_phi * (hi - lo);
            const double x2 = lo + inv_phi * (hi - lo);
            if (curv(x1) < curv(x2))
                hi = x2;
            else
                lo = x1;
        }
        min_eig = std::min(min_eig, curv(0.5 * (lo + hi)));
    }
    if (min_bd < min_in - 1e-9 * (1.0 + std::abs(min_in)))
        throw DomainError(fmt::format(
            "{}: minimum over the box [{}, {}]^{} sits on its boundary ({:.6g} < {:.6g}); F looks unbounded below",
            name_, box.lo, box.hi, dim_, min_bd, min_in));

    c_f_ = std::max(0.0, -min_eig);
    lower_bound_ = std::min(min_in, min_bd);
    coercive_ = min_bd > min_in;
    c_f_provenance_ = fmt::format("sampled Hessian on [{}, {}]^{} ({} points)", box.lo, box.hi, dim_,
                                  interior.size() + boundary.size());
    metadata_["box"] = fmt::format("[{}, {}]^{}", box.lo, box.hi, dim_);
    metadata_["lower_bound_provenance"] = "sampled minimum on the box";
}

double PolynomialEnergy::value(const Vector& v) const {
    check_dim(v);
    double acc = 0.0;
    for (const auto& t : terms_) acc += t.coeff * partial_product(t, v, -1, 0);
    return acc;
}

Vector PolynomialEnergy::gradient(const Vector& v) const {
    check_dim(v);
    Vector g = Vector::Zero(dim_);
    for (const auto& t : terms_)
        for (int i = 0; i < dim_; ++i)
            if (t.exponents[i] > 0) g[i] += t.coeff * t.exponents[i] * partial_product(t, v, i, 1);
    return g;
}

Matrix PolynomialEnergy::hessian(const Vector& v) const {
    check_dim(v);
    Matrix h = Matrix::Zero(dim_, dim_);
    for (const auto& t : terms_)
        for (int i = 0; i < dim_; ++i) {
            const int ei = t.exponents[i];
            if (ei == 0) continue;
            if (ei >= 2) h(i, i) += t.coeff * ei * (ei - 1) * partial_product(t, v, i, 2);
            for (int j = i + 1; j < dim_; ++j) {
                const int ej = t.exponents[j];
                if (ej == 0) continue;
                const double x = t.coeff * ei * ej * partial_product(t, v, i, 1, j, 1);
                h(i, j) += x;
                h(j, i) += x;
            }
        }
    return h;
}

std::shared_ptr<PolynomialEnergy> polynomial(std::vector<Monomial> terms, int dim, SamplingBox box) {
    return std::make_shared<PolynomialEnergy>(std::move(terms), dim, box);
}

std::shared_ptr<PolynomialEnergy> double_well(double scale) {
    if (!(scale > 0.0)) throw DomainError("double_well: scale must be positive");
    // scale/4 (v^4 - 2 v^2 + 1); w'' = scale (3 v^2 - 1) >= -scale
    std::vector<Monomial> terms{{0.25 * scale, {4}}, {-0.5 * scale, {2}}, {0.25 * scale, {0}}};
    return std::make_shared<PolynomialEnergy>(std::move(terms), 1, PolynomialEnergy::Exact{scale, 0.0, true},
                                              "double-well");
}

}  // namespace gradstab
