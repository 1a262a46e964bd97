#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "synexp/core/mdp.hpp"
#include "synexp/errors.hpp"

namespace synexp {

/// Exact evaluation of a policy on a TabularMdp. All tables are computed from
/// one linear solve per quantity, not from samples, so downstream bound checks
/// see solver round-off only.
struct ValueReport {
    std::vector<double> v;          // V[s]
    std::vector<double> q;          // Q[s][a], row-major
    std::vector<double> advantage;  // A[s][a] = Q - V
    double j = 0.0;                 // rho0 . V
    std::vector<double> occupancy;  // d[s], normalized discounted visitation

    double q_at(int s, int a, int n_actions) const {
        return q[static_cast<std::size_t>(s) * n_actions + a];
    }
    double adv_at(int s, int a, int n_actions) const {
        return advantage[static_cast<std::size_t>(s) * n_actions + a];
    }
};

namespace detail {

/// Dense solve of A x = b by Gaussian elimination with partial pivoting.
/// A is destroyed. Throws NumericError on a (numerically) singular pivot.
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b, int n) {
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::abs(a[static_cast<std::size_t>(col) * n + col]);
        for (int row = col + 1; row < n; ++row) {
            const double cand = std::abs(a[static_cast<std::size_t>(row) * n + col]);
            if (cand > best) {
                best = cand;
                pivot = row;
            }
        }
        if (!(best > 0.0) || !std::isfinite(best))
            throw NumericError("solve_linear: singular or non-finite pivot");
        if (pivot != col) {
            for (int k = col; k < n; ++k)
                std::swap(a[static_cast<std::size_t>(pivot) * n + k],
                          a[static_cast<std::size_t>(col) * n + k]);
            std::swap(b[pivot], b[col]);
        }
        const double inv = 1.0 / a[static_cast<std::size_t>(col) * n + col];
        for (int row = col + 1; row < n; ++row) {
            const double f = a[static_cast<std::size_t>(row) * n + col] * inv;
            if (f == 0.0) continue;
            for (int k = col; k < n; ++k)
                a[static_cast<std::size_t>(row) * n + k] -= f * a[static_cast<std::size_t>(col) * n + k];
            b[row] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int row = n - 1; row >= 0; --row) {
        double acc = b[row];
        for (int k = row + 1; k < n; ++k) acc -= a[static_cast<std::size_t>(row) * n + k] * x[k];
        x[row] = acc / a[static_cast<std::size_t>(row) * n + row];
    }
    return x;
}

}  // namespace detail

/// Solves V = R_pi + gamma P_pi V exactly, then derives Q, A, J and the
/// normalized discounted occupancy d = (1-gamma) rho0^T (I - gamma P_pi)^-1.
inline ValueReport evaluate_policy(const TabularMdp& mdp, const TabularPolicy& policy) {
    if (mdp.n_states() != policy.n_states() || mdp.n_actions() != policy.n_actions())
        throw DimensionError("evaluate_policy: MDP and policy dimensions disagree");

    const int n = mdp.n_states();
    const int na = mdp.n_actions();
    const double gamma = mdp.gamma();

    // State-to-state kernel and reward under the policy.
    std::vector<double> p_pi(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> r_pi(n, 0.0);
    for (int s = 0; s < n; ++s) {
        const auto pi = policy.probs(s);
        for (int a = 0; a < na; ++a) {
            r_pi[s] += pi[a] * mdp.r(s, a);
            const auto row = mdp.kernel_row(s, a);
            for (int s2 = 0; s2 < n; ++s2)
                p_pi[static_cast<std::size_t>(s) * n + s2] += pi[a] * row[s2];
        }
    }

    // (I - gamma P_pi) V = R_pi
    std::vector<double> a_mat(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a_mat[static_cast<std::size_t>(i) * n + j] =
                (i == j ? 1.0 : 0.0) - gamma * p_pi[static_cast<std::size_t>(i) * n + j];

    ValueReport report;
    report.v = detail::solve_linear(a_mat, r_pi, n);

    // Bellman residual guard; the system is non-singular for gamma < 1 so a
    // large residual means the solver itself misbehaved.
    double residual = 0.0;
    for (int s = 0; s < n; ++s) {
        double rhs = r_pi[s];
        for (int s2 = 0; s2 < n; ++s2) rhs += gamma * p_pi[static_cast<std::size_t>(s) * n + s2] * report.v[s2];
        residual = std::max(residual, std::abs(report.v[s] - rhs));
    }
    if (!(residual <= 1e-10)) throw NumericError("evaluate_policy: Bellman residual exceeds 1e-10");

    report.q.resize(static_cast<std::size_t>(n) * na);
    report.advantage.resize(static_cast<std::size_t>(n) * na);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < na; ++a) {
            double q = mdp.r(s, a);
            const auto row = mdp.kernel_row(s, a);
            for (int s2 = 0; s2 < n; ++s2) q += gamma * row[s2] * report.v[s2];
            report.q[static_cast<std::size_t>(s) * na + a] = q;
            report.advantage[static_cast<std::size_t>(s) * na + a] = q - report.v[s];
        }
    }

    report.j = 0.0;
    for (int s = 0; s < n; ++s) report.j += mdp.rho0()[s] * report.v[s];

    // Occupancy solves the transposed system (I - gamma P_pi^T) d = (1-gamma) rho0.
    std::vector<double> at_mat(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            at_mat[static_cast<std::size_t>(i) * n + j] =
                (i == j ? 1.0 : 0.0) - gamma * p_pi[static_cast<std::size_t>(j) * n + i];
    std::vector<double> rhs(n);
    for (int s = 0; s < n; ++s) rhs[s] = (1.0 - gamma) * mdp.rho0()[s];
    report.occupancy = detail::solve_linear(std::move(at_mat), std::move(rhs), n);

    return report;
}

/// KL divergence between two discrete distributions, natural log.
inline double kl_divergence(std::span<const double> q, std::span<const double> p) {
    double kl = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] > 0.0) kl += q[i] * std::log(q[i] / p[i]);
    }
    return std::max(kl, 0.0);
}

/// Per-state KL radius: sup_s KL(q(.|s) || p(.|s)). This is the trust-region
/// quantity; softmax rows have full support so the value is always finite.
inline double kl_radius(const TabularPolicy& p, const TabularPolicy& q) {
    if (p.n_states() != q.n_states() || p.n_actions() != q.n_actions())
        throw DimensionError("kl_radius: policy dimensions disagree");
    double radius = 0.0;
    for (int s = 0; s < p.n_states(); ++s) {
        radius = std::max(radius, kl_divergence(q.probs(s), p.probs(s)));
    }
    return radius;
}

}  // namespace synexp
