#pragma once

#include "gradstab/errors.hpp"
#include "gradstab/rational.hpp"
#include "gradstab/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gradstab {

enum class Definiteness { positive_definite, positive_semidefinite, indefinite };

std::string to_string(Definiteness d);

/// Symmetric quadratic form q(x) = sum_ij a_ij x_i x_j on R^N.
///
/// Only the upper triangle is stored, so the coefficient matrix is symmetric
/// by construction. T is either double or Rational.
template <int N, class T = double>
class SymmetricForm {
    static_assert(N >= 1);

public:
    static constexpr int size = N;
    static constexpr int stored = N * (N + 1) / 2;

    SymmetricForm() { upper_.fill(T(0)); }

    /// Entry a_ij of the coefficient matrix (i, j zero-based).
    T coeff(int i, int j) const { return upper_[index(i, j)]; }
    void set(int i, int j, T v) { upper_[index(i, j)] = v; }

    /// Adds weight * l l^T, i.e. the form weight * (l . x)^2.
    void add_square(T weight, const std::array<T, N>& l) {
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) upper_[index(i, j)] += weight * l[i] * l[j];
    }

    static SymmetricForm square(T weight, const std::array<T, N>& l) {
        SymmetricForm q;
        q.add_square(weight, l);
        return q;
    }

    T operator()(const std::array<T, N>& x) const {
        T acc(0);
        for (int i = 0; i < N; ++i) {
            acc += coeff(i, i) * x[i] * x[i];
            for (int j = i + 1; j < N; ++j) acc += T(2) * coeff(i, j) * x[i] * x[j];
        }
        return acc;
    }

    SymmetricForm& operator+=(const SymmetricForm& o) {
        for (int s = 0; s < stored; ++s) upper_[s] += o.upper_[s];
        return *this;
    }
    SymmetricForm& operator-=(const SymmetricForm& o) {
        for (int s = 0; s < stored; ++s) upper_[s] -= o.upper_[s];
        return *this;
    }
    SymmetricForm& operator*=(T k) {
        for (auto& v : upper_) v *= k;
        return *this;
    }
    friend SymmetricForm operator+(SymmetricForm a, const SymmetricForm& b) { return a += b; }
    friend SymmetricForm operator-(SymmetricForm a, const SymmetricForm& b) { return a -= b; }
    friend SymmetricForm operator*(T k, SymmetricForm a) { return a *= k; }
    friend bool operator==(const SymmetricForm&, const SymmetricForm&) = default;

    /// Largest absolute coefficient.
    double max_abs() const {
        double m = 0.0;
        for (const auto& v : upper_) m = std::max(m, std::abs(to_double(v)));
        return m;
    }

    Eigen::Matrix<double, N, N> matrix() const {
        Eigen::Matrix<double, N, N> m;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) m(i, j) = to_double(coeff(i, j));
        return m;
    }

    SymmetricForm<N, double> to_double_form() const {
        SymmetricForm<N, double> q;
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) q.set(i, j, to_double(coeff(i, j)));
        return q;
    }

    static SymmetricForm from_matrix(const Eigen::Matrix<double, N, N>& m)
        requires std::is_same_v<T, double>
    {
        SymmetricForm q;
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) q.set(i, j, 0.5 * (m(i, j) + m(j, i)));
        return q;
    }

    /// Leading principal minors det(A[0..i, 0..i]), i = 0..N-1.
    std::array<double, N> leading_minors() const {
        const auto m = matrix();
        std::array<double, N> out{};
        for (int i = 0; i < N; ++i) out[i] = m.topLeftCorner(i + 1, i + 1).determinant();
        return out;
    }

    Eigen::Matrix<double, N, 1> eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(matrix(), Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    double min_eigenvalue() const { return eigenvalues().minCoeff(); }

private:
    static int index(int i, int j) {
        if (i > j) std::swap(i, j);
        // row-major upper triangle
        return i * N - i * (i - 1) / 2 + (j - i);
    }

    std::array<T, stored> upper_;
};

using QuadraticForm2 = SymmetricForm<2>;
using QuadraticForm3 = SymmetricForm<3>;
using ExactForm2 = SymmetricForm<2, Rational>;
using ExactForm3 = SymmetricForm<3, Rational>;

/// Outcome of the two independent definiteness tests.
struct DefinitenessReport {
    Definiteness by_minors;
    Definiteness by_eigenvalues;
    int failing_minor = -1;  // 1-based order of the first non-positive minor, -1 if none
    /// Leading minors only decide definiteness, not semidefiniteness, so the
    /// two tests are compared on the positive-definite verdict alone.
    bool consistent() const {
        return (by_minors == Definiteness::positive_definite) ==
               (by_eigenvalues == Definiteness::positive_definite);
    }
    bool positive_definite() const {
        return by_minors == Definiteness::positive_definite &&
               by_eigenvalues == Definiteness::positive_definite;
    }
};

/// Sylvester test on leading minors and symmetric eigenvalue test, both with
/// absolute tolerance tol.
template <int N, class T>
DefinitenessReport classify(const SymmetricForm<N, T>& q, double tol = 1e-12) {
    DefinitenessReport rep{};
    const auto minors = q.leading_minors();
    rep.by_minors = Definiteness::positive_definite;
    for (int i = 0; i < N; ++i) {
        if (minors[i] <= tol) {
            rep.failing_minor = i + 1;
            rep.by_minors = minors[i] >= -tol ? Definiteness::positive_semidefinite : Definiteness::indefinite;
            break;
        }
    }
    const double lmin = q.min_eigenvalue();
    rep.by_eigenvalues = lmin > tol    ? Definiteness::positive_definite
                         : lmin >= -tol ? Definiteness::positive_semidefinite
                                        : Definiteness::indefinite;
    return rep;
}

/// Embeds q(x1,x2) into R^3 acting on (x1,x2).
template <class T>
SymmetricForm<3, T> embed_leading(const SymmetricForm<2, T>& q) {
    SymmetricForm<3, T> out;
    for (int i = 0; i < 2; ++i)
        for (int j = i; j < 2; ++j) out.set(i, j, q.coeff(i, j));
    return out;
}

/// Embeds q into R^3 acting on the shifted pair (x2,x3).
template <class T>
SymmetricForm<3, T> embed_trailing(const SymmetricForm<2, T>& q) {
    SymmetricForm<3, T> out;
    for (int i = 0; i < 2; ++i)
        for (int j = i; j < 2; ++j) out.set(i + 1, j + 1, q.coeff(i, j));
    return out;
}

// ---------------------------------------------------------------------------
// Pairing forms of the BDFk schemes

/// Coefficients c_1..c_k of gamma_k(x) = x_1 * sum_m c_m x_m, where x_m stands
/// for the backward difference dU^{n+k-m+1}.
std::vector<Rational> gamma_coefficients(int k);

/// Coefficient matrix of gamma_k on R^k (k in {1,2,3}).
Matrix gamma_k(int k);

ExactForm3 gamma3_exact();
inline QuadraticForm3 gamma3() { return gamma3_exact().to_double_form(); }

// ---------------------------------------------------------------------------
// Cholesky parametrisation of forms on R^2

/// q(x1,x2) = a^2 x2^2 + 2ac x2 x1 + (b^2 + c^2) x1^2 with a > 0, b > 0.
struct CholeskyParam {
    double a = 1.0;
    double b = 1.0;
    double c = 0.0;

    bool in_omega() const { return a > 0.0 && b > a; }
    QuadraticForm2 form() const;
};

/// Same parametrisation with exact squared quantities: a^2, b^2 and the ratio c/a.
/// Every term of f and of the Gauss reduction is rational in these.
struct SquaredCholeskyParam {
    Rational a_sq;
    Rational b_sq;
    Rational c_over_a;
};

/// (a, b, c) of a positive definite q. Throws DefinitenessError naming the minor.
CholeskyParam cholesky2(const QuadraticForm2& q);

/// Witness point of the classical decomposition with beta = 5/6.
CholeskyParam classical_witness();
SquaredCholeskyParam classical_witness_exact();
/// Limit point (1/sqrt6, 1/sqrt6, -7/(4 sqrt6)) on the boundary b = a.
CholeskyParam optimal_point();
SquaredCholeskyParam optimal_point_exact();

/// x1^2 coefficient left after the Gauss reduction of r3 for parameters p.
double f_eval(const CholeskyParam& p);
Rational f_eval_exact(const SquaredCholeskyParam& p);

/// delta = 7/6 + 2ac + c/(3a)
double f_delta(const CholeskyParam& p);

/// Boundary reduction of f along b = a with delta = 0.
double g_eval(double a);
double g_prime(double a);
/// c(a) that annihilates delta on the boundary.
double constrained_c(double a);

/// Exact optimal constant 95/96 and friends.
inline Rational beta3_exact() { return Rational(95, 96); }
inline double beta3() { return 95.0 / 96.0; }

/// Default stability constant for a given c_F dt: the midpoint of the
/// admissible range [c_F dt / 2, beta3), kept at least 1e-6 below beta3.
double default_beta(double cf_dt);

// ---------------------------------------------------------------------------
// Gauss reduction of r3 = gamma3 - q(x1,x2) + q(x2,x3)

struct WeightedSquare {
    double weight;
    std::array<double, 3> linear;  // coefficients on (x1, x2, x3)
};

struct GaussReduction {
    std::array<WeightedSquare, 3> squares;  // last one is f(a,b,c) * x1^2
    double beta_term;

    QuadraticForm3 sum() const;
};

/// r3 for the form parametrised by p.
QuadraticForm3 r3_of(const CholeskyParam& p);

GaussReduction gauss_reduce_r3(const CholeskyParam& p);

// ---------------------------------------------------------------------------
// Decompositions gamma3 = q(x1,x2) - q(x2,x3) + r~(x1,x2,x3) + beta x1^2

struct Decomposition {
    QuadraticForm2 q;
    QuadraticForm3 r_tilde;
    double beta = 0.0;
    CholeskyParam param;     // parameters of q
    double segment_t = 0.0;  // position on the continuation segment
};

struct ExactDecomposition {
    ExactForm2 q;
    ExactForm3 r_tilde;
    Rational beta;
};

/// gamma3 - (q - q(shift) + r~ + beta x1^2), coefficient-wise.
QuadraticForm3 identity_defect(const Decomposition& d);
ExactForm3 identity_defect(const ExactDecomposition& d);

/// Largest absolute coefficient of identity_defect.
double identity_residual(const Decomposition& d);

/// The optimal decomposition with beta = 95/96 (r~ only semidefinite).
ExactDecomposition optimal_decomposition_exact();

/// A decomposition certifying beta in [0, 95/96].
///
/// For beta < 95/96 both q and r~ are positive definite; beta == 95/96 returns
/// the closed-form optimal forms. Throws InfeasibleError above 95/96 and
/// DomainError below 0.
Decomposition decompose(double beta);

// ---------------------------------------------------------------------------
// Maximisation of f over Omega = {a > 0, b > a}

struct MaximizeOptions {
    std::uint64_t seed = 20240607;
    int starts = 8;
    int max_iterations = 20000;
    double cross_check_tol = 1e-6;
};

struct MaximizeResult {
    double beta_star = 0.0;
    CholeskyParam argmax;       // b == a: the supremum sits on the boundary
    double cross_check = 0.0;   // best f value found by the unconstrained search
    CholeskyParam cross_check_point;
    std::vector<std::string> trace;
};

/// Numerical certification of sup_Omega f: golden-section on the boundary
/// reduction g, polished on the closed-form g', cross-checked by a multi-start
/// Nelder-Mead on f in the open set. Throws ConvergenceError with the best
/// point so far if the two routes disagree.
MaximizeResult maximize_f(const MaximizeOptions& opts = {});

// ---------------------------------------------------------------------------
// Lift to (R^M)^d

/// sum_ij a_ij <V_i, V_j> for a d x d coefficient matrix.
double lift(const Matrix& coeffs, std::span<const Vector> vectors);

template <int N, class T>
double lift(const SymmetricForm<N, T>& q, std::span<const Vector> vectors) {
    return lift(Matrix(q.matrix()), vectors);
}

}  // namespace gradstab
