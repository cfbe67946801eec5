#include "gradstab/quadform.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace gradstab {

std::string to_string(Definiteness d) {
    switch (d) {
    case Definiteness::positive_definite: return "positive definite";
    case Definiteness::positive_semidefinite: return "positive semidefinite";
    case Definiteness::indefinite: return "indefinite";
    }
    return "?";
}

namespace {

std::int64_t binomial(int n, int m) {
    std::int64_t r = 1;
    for (int i = 1; i <= m; ++i) r = r * (n - m + i) / i;
    return r;
}

}  // namespace

std::vector<Rational> gamma_coefficients(int k) {
    if (k < 1 || k > 3) throw UnsupportedOrder(fmt::format("BDF order {} is not supported (expected 1, 2 or 3)", k));
    // d^j U = sum_m (-1)^m C(j-1, m) x_{m+1} in terms of first differences.
    std::vector<Rational> c(k, Rational(0));
    for (int j = 1; j <= k; ++j)
        for (int m = 0; m < j; ++m)
            c[m] += Rational((m % 2 ? -1 : 1) * binomial(j - 1, m), j);
    return c;
}

Matrix gamma_k(int k) {
    const auto c = gamma_coefficients(k);
    Matrix g = Matrix::Zero(k, k);
    g(0, 0) = to_double(c[0]);
    for (int m = 1; m < k; ++m) {
        g(0, m) = 0.5 * to_double(c[m]);
        g(m, 0) = g(0, m);
    }
    return g;
}

ExactForm3 gamma3_exact() {
    const auto c = gamma_coefficients(3);
    ExactForm3 g;
    g.set(0, 0, c[0]);
    g.set(0, 1, c[1] / Rational(2));
    g.set(0, 2, c[2] / Rational(2));
    return g;
}

QuadraticForm2 CholeskyParam::form() const {
    QuadraticForm2 q;
    q.set(0, 0, b * b + c * c);
    q.set(0, 1, a * c);
    q.set(1, 1, a * a);
    return q;
}

CholeskyParam cholesky2(const QuadraticForm2& q) {
    // Factor the swapped form (x2, x1): leading entry is the x2^2 coefficient.
    const double q22 = q.coeff(1, 1);
    if (!(q22 > 0.0))
        throw DefinitenessError(fmt::format("cholesky2: leading minor of order 1 (x2^2 coefficient) is {:.17g} <= 0", q22));
    const double det = q.coeff(0, 0) * q22 - q.coeff(0, 1) * q.coeff(0, 1);
    if (!(det > 0.0))
        throw DefinitenessError(fmt::format("cholesky2: leading minor of order 2 (determinant) is {:.17g} <= 0", det));
    CholeskyParam p;
    p.a = std::sqrt(q22);
    p.c = q.coeff(0, 1) / p.a;
    p.b = std::sqrt(det / q22);
    // Within rounding of the boundary b = a: report it as on the boundary.
    if (std::abs(p.b - p.a) <= 8.0 * std::numeric_limits<double>::epsilon() * p.a) p.b = p.a;
    return p;
}

CholeskyParam classical_witness() {
    const double a = 1.0 / std::sqrt(6.0);
    return {a, std::sqrt(5.0 / 12.0), -1.0 / (6.0 * a)};
}

SquaredCholeskyParam classical_witness_exact() {
    return {Rational(1, 6), Rational(5, 12), Rational(-1)};
}

CholeskyParam optimal_point() {
    const double a = 1.0 / std::sqrt(6.0);
    return {a, a, -7.0 / (4.0 * std::sqrt(6.0))};
}

SquaredCholeskyParam optimal_point_exact() {
    return {Rational(1, 6), Rational(1, 6), Rational(-7, 4)};
}

double f_delta(const CholeskyParam& p) {
    return 7.0 / 6.0 + 2.0 * p.a * p.c + p.c / (3.0 * p.a);
}

double f_eval(const CholeskyParam& p) {
    if (!(p.a > 0.0)) throw DomainError(fmt::format("f_eval: a = {:.17g} must be positive", p.a));
    const double gap = p.b * p.b - p.a * p.a;
    if (gap == 0.0) throw DomainError("f_eval: b == a lies on the boundary of Omega (division by b^2 - a^2)");
    const double delta = f_delta(p);
    return 11.0 / 6.0 - delta * delta / (4.0 * gap) - (p.b * p.b + p.c * p.c + 1.0 / (36.0 * p.a * p.a));
}

Rational f_eval_exact(const SquaredCholeskyParam& p) {
    if (p.a_sq <= Rational(0)) throw DomainError("f_eval_exact: a^2 must be positive");
    const Rational gap = p.b_sq - p.a_sq;
    if (gap == Rational(0)) throw DomainError("f_eval_exact: b == a lies on the boundary of Omega");
    const Rational s = p.c_over_a;
    const Rational delta = Rational(7, 6) + Rational(2) * s * p.a_sq + s / Rational(3);
    return Rational(11, 6) - delta * delta / (Rational(4) * gap) -
           (p.b_sq + s * s * p.a_sq + Rational(1) / (Rational(36) * p.a_sq));
}

double g_eval(double a) {
    if (!(a > 0.0)) throw DomainError(fmt::format("g_eval: a = {:.17g} must be positive", a));
    const double s = 2.0 * a + 1.0 / (3.0 * a);
    return 11.0 / 6.0 - a * a - 49.0 / (36.0 * s * s) - 1.0 / (36.0 * a * a);
}

double g_prime(double a) {
    if (!(a > 0.0)) throw DomainError(fmt::format("g_prime: a = {:.17g} must be positive", a));
    const double a2 = a * a;
    const double a4 = a2 * a2;
    const double den = 18.0 * std::pow(6.0 * a2 + 1.0, 3) * a2 * a;
    return -(6.0 * a2 - 1.0) * (36.0 * a4 + 33.0 * a2 + 1.0) * (36.0 * a4 - 9.0 * a2 + 1.0) / den;
}

double constrained_c(double a) {
    if (!(a > 0.0)) throw DomainError("constrained_c: a must be positive");
    return -7.0 / (6.0 * (2.0 * a + 1.0 / (3.0 * a)));
}

QuadraticForm3 GaussReduction::sum() const {
    QuadraticForm3 r;
    for (const auto& s : squares) r.add_square(s.weight, s.linear);
    return r;
}

QuadraticForm3 r3_of(const CholeskyParam& p) {
    const auto q = p.form();
    return gamma3() - embed_leading(q) + embed_trailing(q);
}

GaussReduction gauss_reduce_r3(const CholeskyParam& p) {
    if (!p.in_omega())
        throw DomainError(fmt::format("gauss_reduce_r3: (a, b) = ({:.17g}, {:.17g}) is outside Omega (need a > 0, b > a)",
                                      p.a, p.b));
    const double gap = p.b * p.b - p.a * p.a;
    const double delta = f_delta(p);
    const double f = f_eval(p);
    GaussReduction g;
    g.squares[0] = {1.0, {1.0 / (6.0 * p.a), p.c, p.a}};
    g.squares[1] = {gap, {-delta / (2.0 * gap), 1.0, 0.0}};
    g.squares[2] = {f, {1.0, 0.0, 0.0}};
    g.beta_term = f;
    return g;
}

namespace {

template <class T>
SymmetricForm<3, T> defect(const SymmetricForm<3, T>& gamma, const SymmetricForm<2, T>& q,
                           const SymmetricForm<3, T>& r, T beta) {
    SymmetricForm<3, T> rhs = embed_leading(q) - embed_trailing(q) + r;
    rhs.set(0, 0, rhs.coeff(0, 0) + beta);
    return gamma - rhs;
}

}  // namespace

QuadraticForm3 identity_defect(const Decomposition& d) {
    return defect(gamma3(), d.q, d.r_tilde, d.beta);
}

ExactForm3 identity_defect(const ExactDecomposition& d) {
    return defect(gamma3_exact(), d.q, d.r_tilde, d.beta);
}

double identity_residual(const Decomposition& d) { return identity_defect(d).max_abs(); }

ExactDecomposition optimal_decomposition_exact() {
    ExactDecomposition d;
    d.q = ExactForm2::square(Rational(1, 6), {Rational(-7, 4), Rational(1)});
    d.q.add_square(Rational(1, 6), {Rational(1), Rational(0)});
    d.r_tilde = ExactForm3::square(Rational(1, 6), {Rational(1), Rational(-7, 4), Rational(1)});
    d.beta = beta3_exact();
    return d;
}

double lift(const Matrix& coeffs, std::span<const Vector> vectors) {
    const auto d = static_cast<std::size_t>(coeffs.rows());
    if (coeffs.cols() != coeffs.rows() || vectors.size() != d)
        throw ShapeError(fmt::format("lift: form of arity {} applied to {} vectors", coeffs.rows(), vectors.size()));
    for (const auto& v : vectors)
        if (v.size() != vectors.front().size()) throw ShapeError("lift: vectors of different lengths");
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        acc += coeffs(i, i) * vectors[i].squaredNorm();
        for (std::size_t j = i + 1; j < d; ++j)
            acc += (coeffs(i, j) + coeffs(j, i)) * vectors[i].dot(vectors[j]);
    }
    return acc;
}

}  // namespace gradstab
