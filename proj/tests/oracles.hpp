#pragma once

// Independent reference implementations used only by tests. Each one computes
// the same quantity as the library through a different route (iteration,
// enumeration, exhaustive scan) so the two can be compared.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "synexp/core/mdp.hpp"
#include "synexp/replay/buffer.hpp"
#include "synexp/rng.hpp"

namespace oracle {

/// Value iteration for a fixed policy, run to sup-norm tolerance.
inline std::vector<double> value_iteration(const synexp::TabularMdp& mdp,
                                           const synexp::TabularPolicy& policy,
                                           double tol = 1e-12, int max_iters = 2000000) {
    const int n = mdp.n_states();
    const int na = mdp.n_actions();
    std::vector<double> v(n, 0.0), next(n, 0.0);
    for (int it = 0; it < max_iters; ++it) {
        double delta = 0.0;
        for (int s = 0; s < n; ++s) {
            const auto pi = policy.probs(s);
            double acc = 0.0;
            for (int a = 0; a < na; ++a) {
                double q = mdp.r(s, a);
                const auto row = mdp.kernel_row(s, a);
                for (int s2 = 0; s2 < n; ++s2) q += mdp.gamma() * row[s2] * v[s2];
                acc += pi[a] * q;
            }
            next[s] = acc;
            delta = std::max(delta, std::abs(next[s] - v[s]));
        }
        v.swap(next);
        if (delta < tol) break;
    }
    return v;
}

/// Monte-Carlo estimate of J with truncated-horizon episodes.
/// Returns (mean, standard error).
inline std::pair<double, double> monte_carlo_return(const synexp::TabularMdp& mdp,
                                                    const synexp::TabularPolicy& policy,
                                                    int episodes, int horizon,
                                                    std::uint64_t seed) {
    double sum = 0.0, sum_sq = 0.0;
    for (int e = 0; e < episodes; ++e) {
        synexp::Rng rng(synexp::stream_seed(seed, "mc-episode", e));
        int s = static_cast<int>(rng.categorical(mdp.rho0()));
        double g = 0.0, discount = 1.0;
        for (int t = 0; t < horizon; ++t) {
            const int a = policy.sample(s, rng);
            g += discount * mdp.r(s, a);
            discount *= mdp.gamma();
            s = static_cast<int>(rng.categorical(mdp.kernel_row(s, a)));
        }
        sum += g;
        sum_sq += g * g;
    }
    const double mean = sum / episodes;
    const double var = std::max(0.0, sum_sq / episodes - mean * mean);
    return {mean, std::sqrt(var / episodes)};
}

/// KL(q || p) by direct summation.
inline double kl_direct(std::span<const double> q, std::span<const double> p) {
    double kl = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) kl += q[i] * std::log(q[i] / p[i]);
    return kl;
}

/// Explicit evaluation of the GAE double sum: A_t = sum_l (gamma*lam)^l delta_{t+l}.
inline std::vector<double> gae_explicit_sum(std::span<const double> rewards,
                                            std::span<const double> values, double gamma,
                                            double lam) {
    const std::size_t n = rewards.size();
    std::vector<double> adv(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double weight = 1.0;
        for (std::size_t l = 0; t + l < n; ++l) {
            const double delta = rewards[t + l] + gamma * values[t + l + 1] - values[t + l];
            adv[t] += weight * delta;
            weight *= gamma * lam;
        }
    }
    return adv;
}

/// Exhaustive top-k scan over every buffer entry, same order contract as the
/// library (descending cosine, ties to earlier insertion).
inline std::vector<synexp::Transition> brute_force_topk(
    const std::vector<synexp::Transition>& entries, const std::string& state,
    const std::string& action, int k) {
    const auto query = synexp::embed_text(synexp::retrieval_key(state, action));
    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> scores(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto emb =
            synexp::embed_text(synexp::retrieval_key(entries[i].state, entries[i].action));
        scores[i] = synexp::cosine(query, emb);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    std::vector<synexp::Transition> out;
    for (std::size_t i = 0; i < order.size() && static_cast<int>(i) < k; ++i)
        out.push_back(entries[order[i]]);
    return out;
}

/// Population variance, direct arithmetic.
inline double variance_direct(std::span<const double> xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(xs.size());
}

}  // namespace oracle
