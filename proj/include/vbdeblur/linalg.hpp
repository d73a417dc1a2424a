#pragma once

// Small iterative solvers shared by the x-update, the kernel update and the
// non-blind restoration.

#include <Eigen/Core>

#include <cmath>

namespace vbd::linalg {

using Vec = Eigen::VectorXd;

struct CgReport {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

// Preconditioned conjugate gradients for a symmetric positive definite
// operator given as a callable out = A(in). Jacobi preconditioner `diag`.
// x holds the warm start on entry and the solution on exit.
template <class Apply>
CgReport pcg(const Apply& apply, const Vec& b, const Vec& diag, Vec& x, double tol, int max_iters) {
    CgReport rep;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero();
        rep.converged = true;
        return rep;
    }
    if (x.size() != b.size()) x = Vec::Zero(b.size());
    const Vec inv = diag.cwiseInverse();
    Vec r = b - apply(x);
    Vec z = inv.cwiseProduct(r);
    Vec p = z;
    double rz = r.dot(z);
    rep.relative_residual = r.norm() / bnorm;
    while (rep.relative_residual > tol && rep.iterations < max_iters) {
        const Vec Ap = apply(p);
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0)) break;
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        ++rep.iterations;
        // periodic recomputation keeps the recursive residual honest
        if (rep.iterations % 50 == 0) r = b - apply(x);
        rep.relative_residual = r.norm() / bnorm;
        z = inv.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    if (rep.relative_residual > tol) rep.relative_residual = (b - apply(x)).norm() / bnorm;
    rep.converged = rep.relative_residual <= tol;
    return rep;
}

struct QpReport {
    int iterations = 0;
    double kkt_residual = 0.0;
    bool converged = false;
};

// min_{x >= 0} x^T G x - 2 b^T x for symmetric positive semidefinite G.
// Accelerated projected gradient from the warm start, finished by a
// Lawson-Hanson style active-set pass on the detected support. The KKT
// residual is relative to max |b|.
QpReport nonneg_qp(const Eigen::MatrixXd& G, const Vec& b, Vec& x, double tol, int max_iters);

// max_j |min(x_j, g_j)| / max|b| with g = G x - b.
double nonneg_qp_kkt(const Eigen::MatrixXd& G, const Vec& b, const Vec& x);

}  // namespace vbd::linalg
