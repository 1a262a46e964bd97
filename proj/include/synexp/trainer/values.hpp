#pragma once

#include <cmath>
#include <vector>

#include "synexp/replay/embed.hpp"
#include "synexp/rollout/rollout.hpp"

namespace synexp {

/// Linear value baseline over hashed state features, fitted by least squares
/// on discounted returns. With few distinct states the hashed features are
/// effectively one-hot, so the fit recovers the tabular per-state means.
class ValueEstimator {
public:
    double predict(const std::string& state) const {
        if (weights_.empty()) return 0.0;
        return dot(weights_, embed_text(state));
    }

    const std::vector<double>& weights() const { return weights_; }
    std::vector<double>& weights() { return weights_; }

    /// Mean-squared-error trace of the last fit, one entry per iteration.
    const std::vector<double>& fit_losses() const { return fit_losses_; }
    std::vector<double>& fit_losses() { return fit_losses_; }

private:
    std::vector<double> weights_;
    std::vector<double> fit_losses_;
};

struct FitConfig {
    int max_iters = kEmbedDim + 32;
    double tol = 1e-12;
    /// For horizon-truncated trajectories, steps with fewer than this many
    /// remaining steps are excluded: their in-trajectory return-to-go is a
    /// truncated (biased-low) estimate of the value. Episodes that ended with
    /// a done flag keep every step, their returns being exact.
    int min_remaining = 0;
};

/// Refit the estimator on the discounted return-to-go of every step in the
/// given trajectories. Conjugate gradient on the normal equations: the
/// training loss is non-increasing per iteration and the minimizer is reached
/// after at most dim steps.
inline void fit_values(ValueEstimator& estimator, const std::vector<Trajectory>& trajectories,
                       double gamma, const FitConfig& cfg = {}) {
    if (trajectories.empty()) throw ConfigError("fit_values: no trajectories");

    const int dim = kEmbedDim;
    // Normal equations accumulated in a streaming pass: A = X'X / n, b = X'y / n.
    std::vector<double> a(static_cast<std::size_t>(dim) * dim, 0.0);
    std::vector<double> b(dim, 0.0);
    double y2 = 0.0;
    std::size_t n = 0;

    std::vector<std::pair<int, double>> nonzero;
    for (const auto& traj : trajectories) {
        const bool truncated = traj.outcome == Outcome::Horizon;
        double g = 0.0;
        std::vector<double> returns(traj.steps.size());
        for (std::size_t i = traj.steps.size(); i-- > 0;) {
            g = traj.steps[i].reward + gamma * g;
            returns[i] = g;
        }
        for (std::size_t i = 0; i < traj.steps.size(); ++i) {
            if (truncated &&
                traj.steps.size() - i < static_cast<std::size_t>(cfg.min_remaining))
                continue;
            const auto x = embed_text(traj.steps[i].state);
            nonzero.clear();
            for (int p = 0; p < dim; ++p)
                if (x[p] != 0.0) nonzero.emplace_back(p, x[p]);
            const double y = returns[i];
            y2 += y * y;
            ++n;
            for (const auto& [p, xp] : nonzero) {
                b[p] += xp * y;
                for (const auto& [q, xq] : nonzero) a[static_cast<std::size_t>(p) * dim + q] += xp * xq;
            }
        }
    }
    if (n == 0) throw ConfigError("fit_values: no usable steps after truncation filtering");
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& v : a) v *= inv_n;
    for (double& v : b) v *= inv_n;
    y2 *= inv_n;

    auto apply_a = [&](const std::vector<double>& v) {
        std::vector<double> out(dim, 0.0);
        for (int p = 0; p < dim; ++p) {
            double acc = 0.0;
            const double* row = a.data() + static_cast<std::size_t>(p) * dim;
            for (int q = 0; q < dim; ++q) acc += row[q] * v[q];
            out[p] = acc;
        }
        return out;
    };
    auto mse = [&](const std::vector<double>& w) {
        const auto aw = apply_a(w);
        double acc = y2;
        for (int p = 0; p < dim; ++p) acc += w[p] * aw[p] - 2.0 * b[p] * w[p];
        return acc;
    };

    std::vector<double> w(dim, 0.0);
    std::vector<double> r = b;  // residual b - A w at w = 0
    std::vector<double> p = r;
    double rs = dot(r, r);

    estimator.fit_losses().clear();
    estimator.fit_losses().push_back(mse(w));
    const int iters = std::min(cfg.max_iters, dim);
    for (int it = 0; it < iters && rs > cfg.tol; ++it) {
        const auto ap = apply_a(p);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) break;
        const double alpha = rs / pap;
        for (int i = 0; i < dim; ++i) {
            w[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        const double loss = mse(w);
        if (loss > estimator.fit_losses().back() + 1e-12) break;  // round-off guard
        estimator.fit_losses().push_back(loss);
        const double rs_next = dot(r, r);
        const double beta = rs_next / rs;
        rs = rs_next;
        for (int i = 0; i < dim; ++i) p[i] = r[i] + beta * p[i];
    }
    estimator.weights() = std::move(w);
}

}  // namespace synexp
