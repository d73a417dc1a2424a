#include "vbdeblur/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <vector>

namespace vbd::linalg {

namespace {

double quad(const Eigen::MatrixXd& G, const Vec& b, const Vec& x) {
    return x.dot(G * x) - 2.0 * b.dot(x);
}

double scale_of(const Vec& b) {
    const double s = b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
    return s > 0.0 ? s : 1.0;
}

// Unconstrained minimizer on the support `in`, zero elsewhere.
Vec support_solve(const Eigen::MatrixXd& G, const Vec& b, const std::vector<char>& in) {
    std::vector<Eigen::Index> P;
    for (Eigen::Index j = 0; j < b.size(); ++j)
        if (in[static_cast<std::size_t>(j)]) P.push_back(j);
    const auto np = static_cast<Eigen::Index>(P.size());
    Eigen::MatrixXd Gp(np, np);
    Vec bp(np);
    for (Eigen::Index a = 0; a < np; ++a) {
        bp[a] = b[P[a]];
        for (Eigen::Index c = 0; c < np; ++c) Gp(a, c) = G(P[a], P[c]);
    }
    const Vec sp = Gp.ldlt().solve(bp);
    Vec s = Vec::Zero(b.size());
    for (Eigen::Index a = 0; a < np; ++a) s[P[a]] = sp[a];
    return s;
}

// Lawson-Hanson iterations started from the support of x.
void active_set(const Eigen::MatrixXd& G, const Vec& b, Vec& x, double tol, int max_iters, int& iters) {
    const Eigen::Index l = b.size();
    const auto idx = [](Eigen::Index j) { return static_cast<std::size_t>(j); };
    std::vector<char> in(idx(l), 0), blocked(idx(l), 0);
    for (Eigen::Index j = 0; j < l; ++j) {
        if (x[j] > 0.0)
            in[idx(j)] = 1;
        else
            x[j] = 0.0;
    }
    const double scale = scale_of(b);
    Eigen::Index added = -1;

    while (iters < max_iters) {
        while (iters < max_iters) {
            ++iters;
            const Vec s = support_solve(G, b, in);
            bool feasible = s.allFinite();
            for (Eigen::Index j = 0; j < l && feasible; ++j)
                if (in[idx(j)] && !(s[j] > 0.0)) feasible = false;
            if (feasible) {
                x = s;
                break;
            }
            if (added >= 0 && !(s[added] > 0.0) && x[added] == 0.0) {
                // the new index is rejected at once: undo and exclude it
                in[idx(added)] = 0;
                blocked[idx(added)] = 1;
                break;
            }
            double alpha = 1.0;
            for (Eigen::Index j = 0; j < l; ++j) {
                if (in[idx(j)] && !(s[j] > 0.0)) {
                    const double denom = x[j] - s[j];
                    alpha = std::min(alpha, denom > 0.0 ? x[j] / denom : 0.0);
                }
            }
            for (Eigen::Index j = 0; j < l; ++j) {
                if (!in[idx(j)]) continue;
                double v = x[j] + alpha * (s[j] - x[j]);
                if (!(s[j] > 0.0) && v <= 1e-15 * scale) v = 0.0;
                x[j] = std::max(v, 0.0);
                if (x[j] == 0.0) in[idx(j)] = 0;
            }
        }
        if (added >= 0 && !blocked[idx(added)]) std::fill(blocked.begin(), blocked.end(), 0);
        const Vec w = b - G * x;
        added = -1;
        double wmax = tol * scale;
        for (Eigen::Index j = 0; j < l; ++j) {
            if (!in[idx(j)] && !blocked[idx(j)] && w[j] > wmax) {
                wmax = w[j];
                added = j;
            }
        }
        if (added < 0) return;
        in[idx(added)] = 1;
    }
}

}  // namespace

double nonneg_qp_kkt(const Eigen::MatrixXd& G, const Vec& b, const Vec& x) {
    const Vec g = G * x - b;
    double r = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) r = std::max(r, std::abs(std::min(x[j], g[j])));
    return r / scale_of(b);
}

QpReport nonneg_qp(const Eigen::MatrixXd& G, const Vec& b, Vec& x, double tol, int max_iters) {
    QpReport rep;
    const Eigen::Index l = b.size();
    if (x.size() != l) x = Vec::Zero(l);
    x = x.cwiseMax(0.0);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G, Eigen::EigenvaluesOnly);
    const double L = std::max(eig.eigenvalues().maxCoeff(), 1e-300);

    // accelerated projected gradient with function-value restart
    Vec y = x;
    double t = 1.0;
    double fx = quad(G, b, x);
    const int fista_iters = std::min(max_iters, 500);
    for (int it = 0; it < fista_iters; ++it) {
        ++rep.iterations;
        Vec xn = (y - (G * y - b) / L).cwiseMax(0.0);
        const double fn = quad(G, b, xn);
        if (fn > fx) {
            // restart momentum from the last accepted point
            y = x;
            t = 1.0;
            continue;
        }
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = xn + ((t - 1.0) / tn) * (xn - x);
        x = std::move(xn);
        fx = fn;
        t = tn;
        if (nonneg_qp_kkt(G, b, x) <= tol) {
            rep.kkt_residual = nonneg_qp_kkt(G, b, x);
            rep.converged = true;
            return rep;
        }
    }

    Vec polished = x;
    int iters = rep.iterations;
    active_set(G, b, polished, tol, max_iters, iters);
    rep.iterations = iters;
    if (quad(G, b, polished) <= fx + 1e-12 * (std::abs(fx) + 1.0)) x = polished;
    rep.kkt_residual = nonneg_qp_kkt(G, b, x);
    rep.converged = rep.kkt_residual <= tol;
    return rep;
}

}  // namespace vbd::linalg
