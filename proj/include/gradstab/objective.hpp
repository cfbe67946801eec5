#pragma once

#include "gradstab/errors.hpp"
#include "gradstab/rational.hpp"
#include "gradstab/types.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace gradstab {

struct ProxOptions {
    double tol = 1e-14;          // relative size of P + tau grad F(P) - X
    int max_iterations = 200;
    int starts = 8;              // used only when the prox may be set-valued
    std::uint64_t seed = 7;
};

/// Oracle bundle for a semiconvex F : R^M -> R u {+inf}.
///
/// F + (c_F/2)|.|^2 is convex, so W is a subgradient at V iff
/// F(V') >= F(V) + <W, V'-V> - (c_F/2)|V'-V|^2 for every V'.
/// Implementations are immutable after construction.
class SemiconvexFunction {
public:
    virtual ~SemiconvexFunction() = default;

    virtual double value(const Vector& v) const = 0;
    /// Gradient of the smooth part. Built-in energies are C^2 everywhere.
    virtual Vector gradient(const Vector& v) const = 0;
    /// Defaults to central differences of the gradient.
    virtual Matrix hessian(const Vector& v) const;

    /// The subdifferential at v; empty when v is outside dom(dF).
    virtual std::vector<Vector> subgradient(const Vector& v) const;

    /// Minimisers of F(P) + |P - x|^2 / (2 tau). Single-valued when tau c_F < 1.
    virtual std::vector<Vector> prox(double tau, const Vector& x, const ProxOptions& opts = {}) const;
    /// prox for tau c_F < 1; throws DomainError otherwise.
    Vector prox_unique(double tau, const Vector& x, const ProxOptions& opts = {}) const;

    int dim() const { return dim_; }
    double semiconvexity() const { return c_f_; }
    /// How c_F was obtained ("exact", or the sampling box used to estimate it).
    const std::string& semiconvexity_provenance() const { return c_f_provenance_; }
    double lower_bound() const { return lower_bound_; }
    bool coercive() const { return coercive_; }
    const std::string& name() const { return name_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

    /// F(v2) - F(v1) - <W, v2 - v1> + (c_F/2)|v2 - v1|^2, nonnegative for W in dF(v1).
    double subgradient_slack(const Vector& v1, const Vector& w, const Vector& v2) const;

protected:
    SemiconvexFunction(std::string name, int dim) : name_(std::move(name)), dim_(dim) {}

    void check_dim(const Vector& v) const;

    std::string name_;
    int dim_;
    double c_f_ = 0.0;
    std::string c_f_provenance_ = "exact";
    double lower_bound_ = 0.0;
    bool coercive_ = false;
    std::map<std::string, std::string> metadata_;
};

using EnergyPtr = std::shared_ptr<const SemiconvexFunction>;

// ---------------------------------------------------------------------------
// Built-in energies

/// F(V) = 1/2 <AV, V> - <b, V>. Rejects A (and b) that leave F unbounded below.
class QuadraticEnergy final : public SemiconvexFunction {
public:
    QuadraticEnergy(Matrix a, Vector b);

    double value(const Vector& v) const override;
    Vector gradient(const Vector& v) const override;
    Matrix hessian(const Vector& v) const override;
    std::vector<Vector> prox(double tau, const Vector& x, const ProxOptions& opts = {}) const override;

    const Matrix& a() const { return a_; }
    const Vector& b() const { return b_; }

private:
    Matrix a_;
    Vector b_;
};

/// Discrete Allen-Cahn energy on N nodes with free ends:
/// F(U) = sum_i (U_{i+1} - U_i)^2 / (2h) + well_scale * h * sum_i (U_i^2 - 1)^2 / 4.
///
/// The difference part is convex with a zero eigenvalue on constants, so
/// c_F = well_scale * h exactly.
class AllenCahn1D final : public SemiconvexFunction {
public:
    AllenCahn1D(int n, double h, double well_scale);

    double value(const Vector& v) const override;
    Vector gradient(const Vector& v) const override;
    Matrix hessian(const Vector& v) const override;

    double h() const { return h_; }
    double well_scale() const { return well_scale_; }

private:
    double h_;
    double well_scale_;
};

struct Monomial {
    double coeff;
    std::vector<int> exponents;  // one per coordinate
};

struct SamplingBox {
    double lo = -2.0;
    double hi = 2.0;
    int samples = 4000;
    std::uint64_t seed = 11;
};

/// Polynomial energy sum_t coeff_t * prod_i v_i^{e_ti}.
///
/// Without overrides, c_F and inf F are estimated on a sampling box; a box
/// whose minimum sits on its boundary is taken as evidence of unboundedness
/// and the polynomial is rejected.
class PolynomialEnergy final : public SemiconvexFunction {
public:
    struct Exact {
        double semiconvexity;
        double lower_bound;
        bool coercive;
    };

    PolynomialEnergy(std::vector<Monomial> terms, int dim, SamplingBox box = {}, std::string name = "polynomial");
    /// Polynomial with analytically known c_F and inf F.
    PolynomialEnergy(std::vector<Monomial> terms, int dim, Exact exact, std::string name);

    double value(const Vector& v) const override;
    Vector gradient(const Vector& v) const override;
    Matrix hessian(const Vector& v) const override;

    const std::vector<Monomial>& terms() const { return terms_; }

private:
    void validate() const;
    void estimate_on_box(const SamplingBox& box);

    std::vector<Monomial> terms_;
};

/// One-dimensional function with F'(v) = -c v on [-R, R], continued by a
/// quartic branch F(v) = -(c/2) v^2 + alpha (|v| - R)^4 for |v| > R.
///
/// The glue is C^3 (the quartic vanishes to third order at |v| = R), F'' >= -c
/// everywhere, so c_F = c, and F is coercive.
class ConcaveCapFunction : public SemiconvexFunction {
public:
    ConcaveCapFunction(double c, double glue_radius, double alpha, std::string name = "concave-cap");

    double value(const Vector& v) const override;
    Vector gradient(const Vector& v) const override;
    Matrix hessian(const Vector& v) const override;

    double scalar_value(double v) const;
    double scalar_derivative(double v) const;
    double scalar_second_derivative(double v) const;

    double slope() const { return c_; }
    double glue_radius() const { return radius_; }
    double quartic_coefficient() const { return alpha_; }
    /// F(v) > F(0) + 1 whenever |v| >= coercivity_radius().
    double coercivity_radius() const { return coercivity_radius_; }

    /// Values of the inner and outer branches and their first two derivatives at
    /// v = R, for checking the glue.
    struct GlueJump {
        double value;
        double first;
        double second;
    };
    GlueJump glue_jump() const;

private:
    double c_;
    double radius_;
    double alpha_;
    double coercivity_radius_ = 0.0;
};

/// The counter-example energy of order k: c = lambda_k / dt, so that the
/// alternating sequence (-1)^n solves the BDFk scheme with time step dt.
class BarrierFunction final : public ConcaveCapFunction {
public:
    BarrierFunction(int k, double dt, double glue_radius = 1.5);

    int order() const { return k_; }
    double dt() const { return dt_; }

private:
    int k_;
    double dt_;
};

std::shared_ptr<QuadraticEnergy> quadratic(const Matrix& a, const Vector& b);
std::shared_ptr<AllenCahn1D> allen_cahn_1d(int n, double h, double well_scale);
std::shared_ptr<PolynomialEnergy> polynomial(std::vector<Monomial> terms, int dim, SamplingBox box = {});
/// scale * (v^2 - 1)^2 / 4 on R, c_F = scale, inf = 0.
std::shared_ptr<PolynomialEnergy> double_well(double scale = 1.0);
std::shared_ptr<BarrierFunction> barrier_function(int k, double dt, double glue_radius = 1.5);

/// lambda_k: c_F dt at which (-1)^n solves BDFk (2, 4, 20/3).
Rational barrier_lambda(int k);

using ParamMap = std::map<std::string, std::string>;

/// Builds a built-in energy by registry name: "quadratic", "allen-cahn",
/// "double-well", "polynomial", "barrier", "concave-cap".
EnergyPtr make_energy(const std::string& name, const ParamMap& params);

/// Registry names, for help output.
std::vector<std::string> energy_names();

}  // namespace gradstab
