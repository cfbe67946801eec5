#include "gradstab/objective.hpp"

#include <fmt/format.h>

#include <cmath>

namespace gradstab {

QuadraticEnergy::QuadraticEnergy(Matrix a, Vector b)
    : SemiconvexFunction("quadratic", static_cast<int>(a.rows())), a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() != a_.cols() || b_.size() != a_.rows()) throw ShapeError("quadratic: A must be square and match b");
    if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + a_.cwiseAbs().maxCoeff()))
        throw DomainError("quadratic: A must be symmetric");
    a_ = 0.5 * (a_ + a_.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> es(a_);
    const Vector lam = es.eigenvalues();
    const double tol = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
    if (lam.minCoeff() < -tol)
        throw DomainError(fmt::format("quadratic: A has eigenvalue {:.17g} < 0, so inf F = -infinity", lam.minCoeff()));

    // inf F = -1/2 b^T A^+ b, finite iff b lies in range(A).
    const Matrix& v = es.eigenvectors();
    const Vector bt = v.transpose() * b_;
    double inf = 0.0;
    for (int i = 0; i < lam.size(); ++i) {
        if (lam[i] > tol) {
            inf -= 0.5 * bt[i] * bt[i] / lam[i];
        } else if (std::abs(bt[i]) > 1e-10 * (1.0 + b_.norm())) {
            throw DomainError("quadratic: b has a component in ker(A), so inf F = -infinity");
        }
    }
    lower_bound_ = inf;
    c_f_ = std::max(0.0, -lam.minCoeff());
    coercive_ = lam.minCoeff() > tol;
    metadata_["min_eigenvalue"] = fmt::format("{:.17g}", lam.minCoeff());
}

double QuadraticEnergy::value(const Vector& v) const {
    check_dim(v);
    return 0.5 * v.dot(a_ * v) - b_.dot(v);
}

Vector QuadraticEnergy::gradient(const Vector& v) const {
    check_dim(v);
    return a_ * v - b_;
}

Matrix QuadraticEnergy::hessian(const Vector&) const { return a_; }

std::vector<Vector> QuadraticEnergy::prox(double tau, const Vector& x, const ProxOptions&) const {
    check_dim(x);
    if (!(tau > 0.0)) throw DomainError("prox: tau must be positive");
    Matrix m = tau * a_;
    m.diagonal().array() += 1.0;
    return {m.llt().solve(x + tau * b_)};
}

std::shared_ptr<QuadraticEnergy> quadratic(const Matrix& a, const Vector& b) {
    return std::make_shared<QuadraticEnergy>(a, b);
}

AllenCahn1D::AllenCahn1D(int n, double h, double well_scale)
    : SemiconvexFunction("allen-cahn", n), h_(h), well_scale_(well_scale) {
    if (n < 2) throw DomainError("allen_cahn_1d: need N >= 2");
    if (!(h > 0.0)) throw DomainError("allen_cahn_1d: need h > 0");
    if (!(well_scale >= 0.0)) throw DomainError("allen_cahn_1d: need well_scale >= 0");
    c_f_ = well_scale * h;
    lower_bound_ = 0.0;
    coercive_ = well_scale > 0.0;
    metadata_["N"] = std::to_string(n);
    metadata_["h"] = fmt::format("{:.17g}", h);
    metadata_["well_scale"] = fmt::format("{:.17g}", well_scale);
}

double AllenCahn1D::value(const Vector& u) const {
    check_dim(u);
    double dir = 0.0;
    for (int i = 0; i + 1 < dim_; ++i) dir += (u[i + 1] - u[i]) * (u[i + 1] - u[i]);
    double well = 0.0;
    for (int i = 0; i < dim_; ++i) well += 0.25 * (u[i] * u[i] - 1.0) * (u[i] * u[i] - 1.0);
    return dir / (2.0 * h_) + well_scale_ * h_ * well;
}

Vector AllenCahn1D::gradient(const Vector& u) const {
    check_dim(u);
    Vector g(dim_);
    for (int i = 0; i < dim_; ++i) {
        double lap = 0.0;
        if (i > 0) lap += u[i] - u[i - 1];
        if (i + 1 < dim_) lap += u[i] - u[i + 1];
        g[i] = lap / h_ + well_scale_ * h_ * (u[i] * u[i] * u[i] - u[i]);
    }
    return g;
}

Matrix AllenCahn1D::hessian(const Vector& u) const {
    check_dim(u);
    Matrix hs = Matrix::Zero(dim_, dim_);
    for (int i = 0; i < dim_; ++i) {
        const double deg = (i > 0 ? 1.0 : 0.0) + (i + 1 < dim_ ? 1.0 : 0.0);
        hs(i, i) = deg / h_ + well_scale_ * h_ * (3.0 * u[i] * u[i] - 1.0);
        if (i + 1 < dim_) {
            hs(i, i + 1) = -1.0 / h_;
            hs(i + 1, i) = -1.0 / h_;
        }
    }
    return hs;
}

std::shared_ptr<AllenCahn1D> allen_cahn_1d(int n, double h, double well_scale) {
    return std::make_shared<AllenCahn1D>(n, h, well_scale);
}

}  // namespace gradstab
