#include "oracles.hpp"

#include "gradstab/integrator.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gradstab;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

SchemeConfig config(int k, double dt, int steps = 100) {
    SchemeConfig c;
    c.k = k;
    c.dt = dt;
    c.max_steps = steps;
    c.stop_tol = 0.0;
    return c;
}

}  // namespace

TEST_CASE("scheme constants are exact") {
    CHECK(scheme_constants(1).alpha == Rational(1));
    CHECK(scheme_constants(1).two_beta == Rational(2));
    CHECK(scheme_constants(2).alpha == Rational(3, 2));
    CHECK(scheme_constants(2).two_beta == Rational(2));
    CHECK(scheme_constants(3).alpha == Rational(11, 6));
    CHECK(scheme_constants(3).two_beta == Rational(95, 48));
    CHECK(scheme_constants(3).lambda == Rational(20, 3));
    CHECK_THROWS_AS(scheme_constants(4), UnsupportedOrder);

    const auto c3 = bdf_coefficients(3);
    REQUIRE(c3.size() == 4);
    CHECK(c3[0] == Rational(11, 6));
    CHECK(c3[1] == Rational(-3));
    CHECK(c3[2] == Rational(3, 2));
    CHECK(c3[3] == Rational(-1, 3));
    for (int k = 1; k <= 3; ++k) {
        Rational sum(0);
        for (const auto& c : bdf_coefficients(k)) sum += c;
        CHECK(sum == Rational(0));
    }
}

TEST_CASE("regime classification straddles each threshold") {
    for (int k = 1; k <= 3; ++k) {
        const double alpha = to_double(scheme_constants(k).alpha);
        const double two_beta = to_double(scheme_constants(k).two_beta);
        CHECK(classify_regime(k, 0.0) == Regime::unique);
        CHECK(classify_regime(k, std::nextafter(alpha, 0.0)) == Regime::unique);
        // 11/6 and 95/48 are not doubles; the comparison is against the exact value
        CHECK(classify_regime(k, std::nextafter(alpha, 10.0)) == Regime::multivalued_stable);
        CHECK(classify_regime(k, std::nextafter(two_beta, 0.0)) == Regime::multivalued_stable);
        CHECK(classify_regime(k, std::nextafter(two_beta, 10.0)) == Regime::barrier);
        CHECK(classify_regime(k, to_double(scheme_constants(k).lambda)) == Regime::barrier);

        // through dt with a fixed c_F
        const double cf = 3.0;
        SchemeConfig c = config(k, 0.99 * alpha / cf);
        CHECK(c.regime(cf) == Regime::unique);
        c.dt = 1.01 * alpha / cf;
        CHECK(c.regime(cf) == Regime::multivalued_stable);
        c.dt = 0.99 * two_beta / cf;
        CHECK(c.regime(cf) == Regime::multivalued_stable);
        c.dt = 1.01 * two_beta / cf;
        CHECK(c.regime(cf) == Regime::barrier);
    }
    CHECK(classify_regime(1, 1.0) == Regime::multivalued_stable);
    CHECK(classify_regime(2, 2.0) == Regime::barrier);
    CHECK(to_string(Regime::multivalued_stable) == "multivalued-stable");
}

TEST_CASE("bdf_rhs examples") {
    const Vector u0 = Eigen::Vector2d(1.0, -2.0), u1 = Eigen::Vector2d(0.5, 4.0), u2 = Eigen::Vector2d(-3.0, 0.25);
    const Vector h1[1] = {u0};
    CHECK(bdf_rhs(1, h1) == u0);
    const Vector h2[2] = {u0, u1};
    CHECK((bdf_rhs(2, h2) - (2.0 * u1 - 0.5 * u0)).norm() <= 1e-15);
    const Vector h3[3] = {u0, u1, u2};
    CHECK((bdf_rhs(3, h3) - (3.0 * u2 - 1.5 * u1 + u0 / 3.0)).norm() <= 1e-15);
    const Vector z[3] = {Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)};
    CHECK(bdf_rhs(3, z).norm() == 0.0);
    CHECK_THROWS_AS(bdf_rhs(3, h2), ShapeError);
    CHECK_THROWS_AS(bdf_rhs(4, h3), UnsupportedOrder);
}

TEST_CASE("bdf_rhs agrees with repeated differencing") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (int k = 1; k <= 3; ++k)
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<Vector> seq;
            for (int i = 0; i <= k; ++i) seq.push_back(scalar(nd(rng)));
            const double alpha = to_double(scheme_constants(k).alpha);
            const double lhs = alpha * seq.back()[0] - bdf_rhs(k, std::span<const Vector>(seq.data(), k))[0];
            CHECK(lhs == doctest::Approx(oracle::bdf_lhs(k, seq)[0]).epsilon(1e-12));
        }
}

TEST_CASE("solve_step_unique on quadratics") {
    const double lambda = 2.5;
    const auto f = quadratic(Matrix::Identity(1, 1) * lambda, Vector::Zero(1));
    const auto c = config(1, 0.3);
    const Vector b = scalar(1.7);
    CHECK(solve_step_unique(*f, c, b)[0] == doctest::Approx(1.7 / (1.0 + lambda * 0.3)).epsilon(1e-14));

    // convex: no restriction on dt
    for (double dt : {1e-3, 1.0, 1e3, 1e6}) {
        const auto cfg = config(3, dt);
        const Vector u = solve_step_unique(*f, cfg, b);
        CHECK(step_residual(*f, cfg, b, u) <= cfg.solver_tol);
    }
}

TEST_CASE("solve_step_unique rejects the multivalued regime") {
    const auto f = double_well();
    CHECK_THROWS_AS(solve_step_unique(*f, config(3, 2.0), scalar(0.0)), PreconditionError);
}

TEST_CASE("Allen-Cahn step against a grid-search minimiser") {
    // Constant data decouple the nodes: the difference part vanishes on
    // constants and the unique solution is constant.
    const int n = 8;
    const double h = 0.125, scale = 4.0;
    const auto f = allen_cahn_1d(n, h, scale);
    for (int k = 1; k <= 3; ++k) {
        const double alpha = to_double(scheme_constants(k).alpha);
        const double dt = 0.9 * alpha / (scale * h);
        const auto cfg = config(k, dt);
        for (double bv : {-2.0, -0.3, 0.0, 0.05, 1.0, 3.0}) {
            const Vector u = solve_step_unique(*f, cfg, Vector::Constant(n, bv));
            auto phi = [&](double x) {
                return 0.5 * alpha * x * x - bv * x + dt * scale * h * (x * x - 1.0) * (x * x - 1.0) / 4.0;
            };
            const double x = oracle::grid_argmin(phi, -4.0, 4.0);
            for (int i = 0; i < n; ++i) CHECK(std::abs(u[i] - x) <= 1e-6);
        }
    }
}

TEST_CASE("multivalued solver: degenerate interval on a concave cap") {
    // c dt = alpha_3 and b = 0: the interior equation reads 0 = 0.
    const double dt = 0.5;
    const double c = 11.0 / 6.0 / dt;
    const ConcaveCapFunction f(c, 1.5, c);
    const auto cfg = config(3, dt);
    const auto sols = solve_step_multivalued(f, cfg, scalar(0.0));
    REQUIRE(sols.degenerate());
    const auto [lo, hi] = sols.degenerate_intervals.front();
    CHECK(lo <= -1.0);
    CHECK(hi >= 1.0);
    CHECK(sols.roots.size() >= 3);
    for (const auto& r : sols.roots) CHECK(step_residual(f, cfg, scalar(0.0), r) <= cfg.solver_tol);
}

TEST_CASE("multivalued solver: convex quadratic gives a singleton") {
    const auto f = quadratic(Matrix::Identity(1, 1) * 3.0, Vector::Zero(1));
    for (double dt : {0.01, 1.0, 100.0}) {
        const auto sols = solve_step_multivalued(*f, config(2, dt), scalar(0.8));
        REQUIRE(sols.roots.size() == 1);
        CHECK(sols.roots[0][0] == doctest::Approx(0.8 / (1.5 + 3.0 * dt)).epsilon(1e-12));
    }
}

TEST_CASE("multivalued solver: double-well roots match a dense-grid oracle") {
    const auto f = double_well();
    const double dt = 1.9;  // alpha_3 <= c_F dt < 95/48
    const auto cfg = config(3, dt);
    const double alpha = cfg.alpha_value();
    for (double bv : {0.0, 0.001, -0.002, 0.5}) {
        const auto sols = solve_step_multivalued(*f, cfg, scalar(bv));
        auto r = [&](double u) { return alpha * u + dt * (u * u * u - u) - bv; };
        const auto expected = oracle::grid_roots(r, -10.0, 10.0, 200000);
        REQUIRE(sols.roots.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            CHECK(std::abs(sols.roots[i][0] - expected[i]) <= 1e-9);
            CHECK(step_residual(*f, cfg, scalar(bv), sols.roots[i]) <= cfg.solver_tol);
        }
        if (std::abs(bv) < 0.01) CHECK(sols.roots.size() >= 2);
    }
}

TEST_CASE("multivalued solver matches solve_step_unique in the unique regime") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const std::vector<EnergyPtr> energies = {double_well(), allen_cahn_1d(6, 1.0 / 6.0, 3.0),
                                             barrier_function(3, 1.0), quadratic(Matrix::Identity(3, 3), Vector::Zero(3))};
    for (int trial = 0; trial < 40; ++trial) {
        const auto& f = energies[trial % energies.size()];
        const int k = 1 + trial % 3;
        SchemeConfig cfg = config(k, 0.5);
        if (f->semiconvexity() > 0.0) cfg.dt = 0.8 * cfg.alpha_value() / f->semiconvexity();
        Vector b(f->dim());
        for (int i = 0; i < b.size(); ++i) b[i] = u(rng);
        const auto sols = solve_step_multivalued(*f, cfg, b);
        REQUIRE(sols.roots.size() == 1);
        CHECK((sols.roots[0] - solve_step_unique(*f, cfg, b)).norm() <= 10 * cfg.solver_tol);
    }
}

TEST_CASE("multivalued solver finds several solutions in R^2") {
    // two uncoupled double wells
    const auto f = std::make_shared<PolynomialEnergy>(
        std::vector<Monomial>{{0.25, {4, 0}}, {-0.5, {2, 0}}, {0.25, {0, 4}}, {-0.5, {0, 2}}}, 2,
        PolynomialEnergy::Exact{1.0, -0.5, true}, "double-well-2d");
    const auto cfg = config(3, 1.9);
    const auto sols = solve_step_multivalued(*f, cfg, Vector::Zero(2));
    CHECK(sols.roots.size() >= 2);
    for (const auto& r : sols.roots) CHECK(step_residual(*f, cfg, Vector::Zero(2), r) <= cfg.solver_tol);
    for (std::size_t i = 0; i < sols.roots.size(); ++i)
        for (std::size_t j = i + 1; j < sols.roots.size(); ++j)
            CHECK((sols.roots[i] - sols.roots[j]).norm() > 10 * cfg.solver_tol);
}

TEST_CASE("bootstrap") {
    const double lambda = 1.5, dt = 0.2;
    const auto f = quadratic(Matrix::Identity(1, 1) * lambda, Vector::Zero(1));
    const Vector u0 = scalar(2.0);

    const auto one = bootstrap(*f, config(1, dt), u0, BootstrapMode::ramp_up);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == u0);

    const auto three = bootstrap(*f, config(3, dt), u0, BootstrapMode::ramp_up);
    REQUIRE(three.size() == 3);
    const double u1 = 2.0 / (1.0 + lambda * dt);
    const double u2 = (2.0 * u1 - 0.5 * 2.0) / (1.5 + lambda * dt);
    CHECK(three[1][0] == doctest::Approx(u1).epsilon(1e-14));
    CHECK(three[2][0] == doctest::Approx(u2).epsilon(1e-14));

    const StateList given = {scalar(1.0), scalar(0.5), scalar(0.25)};
    const auto pass = bootstrap(*f, config(3, dt), u0, BootstrapMode::exact_list, given);
    CHECK(pass == given);
    CHECK_THROWS_AS(bootstrap(*f, config(3, dt), u0, BootstrapMode::exact_list, {scalar(1.0)}), ConfigError);
}

TEST_CASE("run on a scalar quadratic follows the linear recursion") {
    const double lambda = 1.0, dt = 0.1;
    const auto f = quadratic(Matrix::Identity(1, 1) * lambda, Vector::Zero(1));
    const auto cfg = config(3, dt, 200);
    const auto init = bootstrap(*f, cfg, scalar(1.0), BootstrapMode::ramp_up);
    const auto t = run(*f, cfg, init);
    REQUIRE(t.size() == 203);

    std::vector<double> u = {init[0][0], init[1][0], init[2][0]};
    for (int s = 0; s < 200; ++s) {
        const std::size_t n = u.size();
        u.push_back((3.0 * u[n - 1] - 1.5 * u[n - 2] + u[n - 3] / 3.0) / (11.0 / 6.0 + lambda * dt));
    }
    for (std::size_t n = 0; n < u.size(); ++n) CHECK(std::abs(t.states[n][0] - u[n]) <= 1e-13);
    for (std::size_t n = 4; n < t.size(); ++n) CHECK(std::abs(t.states[n][0]) <= std::abs(t.states[n - 1][0]));
    CHECK(std::abs(t.states.back()[0]) < 1e-8);
    for (std::size_t n = 3; n < t.size(); ++n) CHECK(t.residuals[n] <= cfg.solver_tol);
}

TEST_CASE("run on a barrier keeps (-1)^n forever") {
    for (int k = 1; k <= 3; ++k) {
        const double dt = 0.2;
        const auto f = barrier_function(k, dt);
        auto cfg = config(k, dt, 300);
        StateList init;
        for (int i = 0; i < k; ++i) init.push_back(scalar(i % 2 == 0 ? -1.0 : 1.0));
        const auto t = run(*f, cfg, init, BranchSelection::index(1));
        for (std::size_t n = 0; n < t.size(); ++n) {
            const double expected = n % 2 == 0 ? -1.0 : 1.0;
            CHECK(std::abs(t.states[n][0] - expected) <= 1e-12);
        }
        for (std::size_t n = 1; n < t.size(); ++n) CHECK(t.diff_norm(n) == doctest::Approx(2.0).epsilon(1e-12));
    }
}

TEST_CASE("accepted steps carry a certified subgradient") {
    const auto f = allen_cahn_1d(16, 1.0 / 16.0, 16.0);
    auto cfg = config(3, 0.9, 100);
    Vector u0(16);
    for (int i = 0; i < 16; ++i) u0[i] = 0.3 * std::cos(3.0 * i / 16.0);
    const auto t = run(*f, cfg, bootstrap(*f, cfg, u0, BootstrapMode::ramp_up));
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ud(-2.0, 2.0);
    for (std::size_t n = 3; n < t.size(); ++n) {
        CHECK(t.residuals[n] <= cfg.solver_tol);
        for (int s = 0; s < 5; ++s) {
            Vector v(16);
            for (int i = 0; i < 16; ++i) v[i] = ud(rng);
            CHECK(f->subgradient_slack(t.states[n], t.w[n], v) >= -1e-10 * (1.0 + std::abs(f->value(v))));
        }
    }
}

TEST_CASE("stop criterion ends the run after a quiet window") {
    const auto f = quadratic(Matrix::Identity(1, 1), Vector::Zero(1));
    auto cfg = config(3, 0.5, 10000);
    cfg.stop_tol = 1e-10;
    const auto t = run(*f, cfg, bootstrap(*f, cfg, scalar(1.0), BootstrapMode::ramp_up));
    CHECK(t.stopped_early);
    CHECK(t.size() < 10003);
    for (std::size_t n = t.size() - 5; n < t.size(); ++n) CHECK(t.diff_norm(n) <= 1e-10);
}

TEST_CASE("zero steps returns the initial states") {
    const auto f = double_well();
    const auto cfg = config(3, 0.5, 0);
    const StateList init = {scalar(0.1), scalar(0.2), scalar(0.3)};
    const auto t = run(*f, cfg, init);
    CHECK(t.states == init);
}

TEST_CASE("runs are bitwise deterministic") {
    const auto f = double_well();
    auto cfg = config(3, 1.9, 100);
    const StateList init = {scalar(0.05), scalar(0.04), scalar(0.03)};
    const auto a = run(*f, cfg, init);
    const auto b = run(*f, cfg, init);
    REQUIRE(a.size() == b.size());
    for (std::size_t n = 0; n < a.size(); ++n) CHECK(a.states[n] == b.states[n]);

    const auto g = allen_cahn_1d(8, 0.125, 16.0);
    auto c2 = config(3, 1.9 / 2.0, 50);
    Vector u0 = Vector::LinSpaced(8, -0.2, 0.3);
    const auto x = run(*g, c2, bootstrap(*g, c2, u0, BootstrapMode::ramp_up));
    const auto y = run(*g, c2, bootstrap(*g, c2, u0, BootstrapMode::ramp_up));
    for (std::size_t n = 0; n < x.size(); ++n) CHECK(x.states[n] == y.states[n]);
}

TEST_CASE("branch selection rules") {
    const auto f = double_well();
    const StateList cands = {scalar(-0.2), scalar(0.0), scalar(0.2)};
    const StateList hist = {scalar(0.1), scalar(0.1), scalar(0.15)};
    CHECK(BranchSelection::nearest_to_previous().select(*f, 1.9, cands, hist) == 2);
    CHECK(BranchSelection::index(1).select(*f, 1.9, cands, hist) == 1);
    CHECK(BranchSelection::index(7).select(*f, 1.9, cands, hist) == 2);
    // F is lowest at +-0.2 and the q term favours the root near the history
    CHECK(BranchSelection::lowest_lyapunov(decompose(0.95).q).select(*f, 1.9, cands, hist) == 2);
}

TEST_CASE("order study on the scalar quadratic") {
    const double lambda = 1.0;
    const auto f = quadratic(Matrix::Identity(1, 1) * lambda, Vector::Zero(1));
    const Reference exact = [&](double t) { return scalar(std::exp(-lambda * t)); };
    const std::vector<double> dts = {0.1, 0.05, 0.025, 0.0125};
    for (int k = 1; k <= 3; ++k) {
        const auto s = order_study(*f, k, scalar(1.0), 1.0, dts, exact);
        REQUIRE(s.slope);
        CHECK(std::abs(*s.slope - k) <= 0.3);
        CHECK(s.monotone);
        for (std::size_t i = 1; i < s.rows.size(); ++i) {
            const double ratio = s.rows[i - 1].error / s.rows[i].error;
            CHECK(ratio == doctest::Approx(std::pow(2.0, k)).epsilon(0.25));
        }
    }

    const Reference zero = [](double) { return scalar(0.0); };
    const auto z = order_study(*f, 3, scalar(0.0), 1.0, dts, zero);
    for (const auto& r : z.rows) CHECK(r.error == 0.0);

    const auto single = order_study(*f, 2, scalar(1.0), 1.0, {0.1}, exact);
    CHECK_FALSE(single.slope);
    CHECK(single.rows.size() == 1);
}

TEST_CASE("order study against a fine-run reference") {
    const auto f = double_well();
    const auto ref = fine_run_reference(*f, scalar(0.5), 1e-4);
    const auto s = order_study(*f, 2, scalar(0.5), 1.0, {0.1, 0.05, 0.025}, ref, false);
    REQUIRE(s.slope);
    CHECK(std::abs(*s.slope - 2.0) <= 0.3);
}

TEST_CASE("loglog_slope") {
    CHECK(*loglog_slope({1.0, 2.0, 4.0}, {1.0, 8.0, 64.0}) == doctest::Approx(3.0));
    CHECK_FALSE(loglog_slope({1.0}, {1.0}));
    CHECK_FALSE(loglog_slope({1.0, 2.0}, {0.0, 0.0}));
}
