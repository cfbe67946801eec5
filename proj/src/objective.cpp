#include "gradstab/objective.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace gradstab {

void SemiconvexFunction::check_dim(const Vector& v) const {
    if (v.size() != dim_) throw ShapeError(fmt::format("{}: expected a vector of length {}, got {}", name_, dim_, v.size()));
}

Matrix SemiconvexFunction::hessian(const Vector& v) const {
    check_dim(v);
    Matrix h(dim_, dim_);
    Vector x = v;
    for (int j = 0; j < dim_; ++j) {
        const double step = 1e-5 * std::max(1.0, std::abs(v[j]));
        x[j] = v[j] + step;
        const Vector gp = gradient(x);
        x[j] = v[j] - step;
        const Vector gm = gradient(x);
        x[j] = v[j];
        h.col(j) = (gp - gm) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

std::vector<Vector> SemiconvexFunction::subgradient(const Vector& v) const {
    if (!std::isfinite(value(v))) return {};
    return {gradient(v)};
}

double SemiconvexFunction::subgradient_slack(const Vector& v1, const Vector& w, const Vector& v2) const {
    const Vector d = v2 - v1;
    return value(v2) - value(v1) - w.dot(d) + 0.5 * c_f_ * d.squaredNorm();
}

namespace {

struct NewtonOutcome {
    Vector p;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::string log;
};

// Damped Newton on phi(P) = F(P) + |P - X|^2 / (2 tau).
NewtonOutcome prox_newton(const SemiconvexFunction& f, double tau, const Vector& x, Vector p, const ProxOptions& opts) {
    NewtonOutcome out;
    const double scale = 1.0 + x.norm();
    auto phi = [&](const Vector& q) { return f.value(q) + (q - x).squaredNorm() / (2.0 * tau); };
    auto residual_of = [&](const Vector& q) { return (q + tau * f.gradient(q) - x).norm(); };

    std::ostringstream log;
    double phi_p = phi(p);
    double prev_r = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iterations; ++it) {
        const Vector g = f.gradient(p) + (p - x) / tau;
        const double r = tau * g.norm();
        log << fmt::format("it {} residual {:.3e}\n", it, r);
        out.iterations = it;
        // Second test: stalled at the rounding floor.
        if (r <= opts.tol * scale || (r <= 1e3 * opts.tol * scale && r > 0.5 * prev_r)) {
            out.converged = true;
            break;
        }
        prev_r = r;
        Matrix h = f.hessian(p);
        h.diagonal().array() += 1.0 / tau;
        Vector d;
        Eigen::LLT<Matrix> llt(h);
        if (llt.info() == Eigen::Success) {
            d = -llt.solve(g);
        } else {
            // Shift to the nearest positive definite matrix direction.
            Eigen::SelfAdjointEigenSolver<Matrix> es(h);
            const double shift = std::max(0.0, -es.eigenvalues().minCoeff()) + 1.0 / tau;
            h.diagonal().array() += shift;
            d = -h.llt().solve(g);
        }
        const double slope = g.dot(d);
        // Near convergence the decrease of phi falls below its rounding error.
        const double noise = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(phi_p));
        double s = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls, s *= 0.5) {
            const Vector trial = p + s * d;
            const double phi_t = phi(trial);
            if (phi_t <= phi_p + 1e-4 * s * slope + noise) {
                p = trial;
                phi_p = phi_t;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // phi is flat to rounding here; take the step if it shrinks the residual.
            const Vector trial = p + d;
            if (residual_of(trial) < r) {
                p = trial;
                phi_p = phi(p);
            } else {
                out.converged = r <= 1e3 * opts.tol * scale;
                break;
            }
        }
    }
    out.p = p;
    out.residual = residual_of(p);
    if (!out.converged) out.converged = out.residual <= opts.tol * scale;
    out.log = log.str();
    return out;
}

}  // namespace

std::vector<Vector> SemiconvexFunction::prox(double tau, const Vector& x, const ProxOptions& opts) const {
    check_dim(x);
    if (!(tau > 0.0)) throw DomainError("prox: tau must be positive");
    if (tau * c_f_ < 1.0) return {prox_unique(tau, x, opts)};

    // Nonconvex subproblem: collect local minimisers from several starts and
    // keep the global ones.
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    const double spread = std::max(1.0, x.norm());
    std::vector<std::pair<Vector, double>> minima;
    auto phi = [&](const Vector& q) { return value(q) + (q - x).squaredNorm() / (2.0 * tau); };
    for (int s = 0; s <= opts.starts; ++s) {
        Vector start = x;
        if (s > 0)
            for (int i = 0; i < dim_; ++i) start[i] += spread * nd(rng);
        const auto r = prox_newton(*this, tau, x, start, opts);
        if (!r.converged) continue;
        Matrix h = hessian(r.p);
        h.diagonal().array() += 1.0 / tau;
        if (Eigen::SelfAdjointEigenSolver<Matrix>(h).eigenvalues().minCoeff() < -1e-10) continue;
        minima.emplace_back(r.p, phi(r.p));
    }
    if (minima.empty()) throw ConvergenceError(fmt::format("{}: prox found no minimiser (tau = {:.17g})", name_, tau));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : minima) best = std::min(best, m.second);
    std::vector<Vector> out;
    for (const auto& [p, v] : minima) {
        if (v > best + 1e-12 * (1.0 + std::abs(best))) continue;
        const bool dup = std::any_of(out.begin(), out.end(), [&](const Vector& q) { return (q - p).norm() <= 1e-9; });
        if (!dup) out.push_back(p);
    }
    return out;
}

Vector SemiconvexFunction::prox_unique(double tau, const Vector& x, const ProxOptions& opts) const {
    check_dim(x);
    if (!(tau > 0.0)) throw DomainError("prox: tau must be positive");
    if (!(tau * c_f_ < 1.0))
        throw DomainError(fmt::format("{}: prox is single-valued only for tau c_F < 1 (tau c_F = {:.17g})", name_,
                                      tau * c_f_));
    const auto r = prox_newton(*this, tau, x, x, opts);
    if (!r.converged)
        throw ConvergenceError(fmt::format("{}: prox Newton failed, final residual {:.3e} after {} iterations\n{}", name_,
                                           r.residual, r.iterations, r.log));
    return r.p;
}

Rational barrier_lambda(int k) {
    if (k < 1 || k > 3) throw UnsupportedOrder(fmt::format("barrier_lambda: unsupported order {}", k));
    // d^j u = 2^j u for u_n = (-1)^n.
    Rational s(0);
    for (int j = 1; j <= k; ++j) s += Rational(std::int64_t{1} << j, j);
    return s;
}

// ---------------------------------------------------------------------------
// Registry

namespace {

double get_double(const ParamMap& p, const std::string& key, double fallback) {
    const auto it = p.find(key);
    if (it == p.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("parameter '{}' = '{}' is not a number", key, it->second));
    }
}

int get_int(const ParamMap& p, const std::string& key, int fallback) {
    const double v = get_double(p, key, fallback);
    if (v != std::floor(v)) throw ConfigError(fmt::format("parameter '{}' must be an integer", key));
    return static_cast<int>(v);
}

std::vector<double> get_list(const ParamMap& p, const std::string& key) {
    std::vector<double> out;
    const auto it = p.find(key);
    if (it == p.end()) return out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("parameter '{}': '{}' is not a number", key, item));
        }
    }
    return out;
}

// "coef:e1 e2 ...;coef:e1 e2 ..."
std::vector<Monomial> parse_terms(const std::string& text, int dim) {
    std::vector<Monomial> terms;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError(fmt::format("polynomial term '{}' lacks ':'", item));
        Monomial m;
        try {
            m.coeff = std::stod(item.substr(0, colon));
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("polynomial term '{}': bad coefficient", item));
        }
        std::stringstream es(item.substr(colon + 1));
        int e;
        while (es >> e) m.exponents.push_back(e);
        if (static_cast<int>(m.exponents.size()) != dim)
            throw ConfigError(fmt::format("polynomial term '{}' needs {} exponents", item, dim));
        terms.push_back(std::move(m));
    }
    return terms;
}

}  // namespace

std::vector<std::string> energy_names() {
    return {"quadratic", "allen-cahn", "double-well", "polynomial", "barrier", "concave-cap"};
}

EnergyPtr make_energy(const std::string& name, const ParamMap& params) {
    if (name == "quadratic") {
        Matrix a;
        if (auto diag = get_list(params, "diag"); !diag.empty()) {
            a = Eigen::Map<Vector>(diag.data(), static_cast<int>(diag.size())).asDiagonal();
        } else if (auto m = get_list(params, "matrix"); !m.empty()) {
            const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m.size()))));
            if (n * n != static_cast<int>(m.size())) throw ConfigError("quadratic: 'matrix' must have n*n entries");
            a = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(m.data(), n, n);
        } else {
            a = Matrix::Identity(1, 1) * get_double(params, "lambda", 1.0);
        }
        Vector b = Vector::Zero(a.rows());
        if (auto bl = get_list(params, "b"); !bl.empty()) {
            if (static_cast<int>(bl.size()) != a.rows()) throw ConfigError("quadratic: 'b' has the wrong length");
            b = Eigen::Map<Vector>(bl.data(), static_cast<int>(bl.size()));
        }
        try {
            return quadratic(a, b);
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
    }
    if (name == "allen-cahn") {
        const int n = get_int(params, "n", 64);
        return allen_cahn_1d(n, get_double(params, "h", 1.0 / n), get_double(params, "well_scale", 1.0));
    }
    if (name == "double-well") return double_well(get_double(params, "scale", 1.0));
    if (name == "polynomial") {
        SamplingBox box;
        box.lo = get_double(params, "box_lo", box.lo);
        box.hi = get_double(params, "box_hi", box.hi);
        box.samples = get_int(params, "samples", box.samples);
        if (auto c = get_list(params, "coeffs"); !c.empty()) {
            std::vector<Monomial> terms;
            for (std::size_t i = 0; i < c.size(); ++i)
                if (c[i] != 0.0) terms.push_back({c[i], {static_cast<int>(i)}});
            if (terms.empty()) terms.push_back({0.0, {0}});
            return polynomial(terms, 1, box);
        }
        const int dim = get_int(params, "dim", 1);
        const auto it = params.find("terms");
        if (it == params.end()) throw ConfigError("polynomial: need 'coeffs' or 'terms'");
        return polynomial(parse_terms(it->second, dim), dim, box);
    }
    if (name == "barrier")
        return barrier_function(get_int(params, "k", 3), get_double(params, "dt", 1.0),
                                get_double(params, "glue_radius", 1.5));
    if (name == "concave-cap") {
        const double c = get_double(params, "c", 1.0);
        return std::make_shared<ConcaveCapFunction>(c, get_double(params, "glue_radius", 1.5),
                                                    get_double(params, "alpha", c));
    }
    throw ConfigError(fmt::format("unknown energy '{}'", name));
}

}  // namespace gradstab
