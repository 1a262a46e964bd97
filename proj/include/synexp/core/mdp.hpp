#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "synexp/errors.hpp"
#include "synexp/rng.hpp"

namespace synexp {

inline constexpr double kDistributionTol = 1e-12;

/// Numerically stable softmax of one logit row.
inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

/// Finite MDP with dense transition kernel. Immutable after construction;
/// the constructor validates every stochasticity and bound invariant.
class TabularMdp {
public:
    TabularMdp(int n_states, int n_actions, std::vector<double> kernel,
               std::vector<double> rewards, double gamma, std::vector<double> rho0,
               double r_max)
        : n_states_(n_states),
          n_actions_(n_actions),
          kernel_(std::move(kernel)),
          rewards_(std::move(rewards)),
          gamma_(gamma),
          rho0_(std::move(rho0)),
          r_max_(r_max) {
        validate();
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    double gamma() const { return gamma_; }
    double r_max() const { return r_max_; }
    const std::vector<double>& rho0() const { return rho0_; }

    double p(int s, int a, int s2) const {
        return kernel_[(static_cast<std::size_t>(s) * n_actions_ + a) * n_states_ + s2];
    }
    double r(int s, int a) const { return rewards_[static_cast<std::size_t>(s) * n_actions_ + a]; }

    std::span<const double> kernel_row(int s, int a) const {
        return {kernel_.data() + (static_cast<std::size_t>(s) * n_actions_ + a) * n_states_,
                static_cast<std::size_t>(n_states_)};
    }
    const std::vector<double>& kernel() const { return kernel_; }
    const std::vector<double>& rewards() const { return rewards_; }

    nlohmann::json to_json() const {
        nlohmann::json k = nlohmann::json::array();
        for (int s = 0; s < n_states_; ++s) {
            nlohmann::json rows = nlohmann::json::array();
            for (int a = 0; a < n_actions_; ++a) {
                auto row = kernel_row(s, a);
                rows.push_back(std::vector<double>(row.begin(), row.end()));
            }
            k.push_back(rows);
        }
        nlohmann::json rw = nlohmann::json::array();
        for (int s = 0; s < n_states_; ++s) {
            std::vector<double> row(rewards_.begin() + static_cast<std::size_t>(s) * n_actions_,
                                    rewards_.begin() + static_cast<std::size_t>(s + 1) * n_actions_);
            rw.push_back(row);
        }
        return {{"n_states", n_states_}, {"n_actions", n_actions_}, {"kernel", k},
                {"rewards", rw},         {"gamma", gamma_},         {"rho0", rho0_},
                {"r_max", r_max_}};
    }

    static TabularMdp from_json(const nlohmann::json& j) {
        const int ns = j.at("n_states").get<int>();
        const int na = j.at("n_actions").get<int>();
        std::vector<double> kernel;
        kernel.reserve(static_cast<std::size_t>(ns) * na * ns);
        for (const auto& per_state : j.at("kernel"))
            for (const auto& row : per_state)
                for (const auto& v : row) kernel.push_back(v.get<double>());
        std::vector<double> rewards;
        rewards.reserve(static_cast<std::size_t>(ns) * na);
        for (const auto& row : j.at("rewards"))
            for (const auto& v : row) rewards.push_back(v.get<double>());
        return TabularMdp(ns, na, std::move(kernel), std::move(rewards),
                          j.at("gamma").get<double>(), j.at("rho0").get<std::vector<double>>(),
                          j.at("r_max").get<double>());
    }

    /// Random instance: kernel rows and rho0 uniform on the simplex, rewards
    /// uniform in [0, r_max].
    static TabularMdp random(int n_states, int n_actions, double gamma, double r_max, Rng& rng) {
        auto simplex_row = [&](std::vector<double>& out, std::size_t offset, int n) {
            double total = 0.0;
            for (int i = 0; i < n; ++i) {
                const double e = -std::log(1.0 - rng.uniform());  // Exp(1), Dirichlet(1,...,1)
                out[offset + i] = e;
                total += e;
            }
            for (int i = 0; i < n; ++i) out[offset + i] /= total;
        };
        std::vector<double> kernel(static_cast<std::size_t>(n_states) * n_actions * n_states);
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a)
                simplex_row(kernel, (static_cast<std::size_t>(s) * n_actions + a) * n_states, n_states);
        std::vector<double> rewards(static_cast<std::size_t>(n_states) * n_actions);
        for (double& v : rewards) v = rng.uniform() * r_max;
        std::vector<double> rho0(n_states);
        simplex_row(rho0, 0, n_states);
        return TabularMdp(n_states, n_actions, std::move(kernel), std::move(rewards), gamma,
                          std::move(rho0), r_max);
    }

private:
    void validate() const {
        if (n_states_ <= 0 || n_actions_ <= 0)
            throw DimensionError("TabularMdp: state and action counts must be positive");
        if (!(gamma_ > 0.0 && gamma_ < 1.0))
            throw ConfigError("TabularMdp: gamma must lie in (0, 1)");
        if (r_max_ < 0.0) throw ConfigError("TabularMdp: r_max must be non-negative");
        if (kernel_.size() != static_cast<std::size_t>(n_states_) * n_actions_ * n_states_)
            throw DimensionError("TabularMdp: kernel size mismatch");
        if (rewards_.size() != static_cast<std::size_t>(n_states_) * n_actions_)
            throw DimensionError("TabularMdp: rewards size mismatch");
        if (rho0_.size() != static_cast<std::size_t>(n_states_))
            throw DimensionError("TabularMdp: rho0 size mismatch");
        for (int s = 0; s < n_states_; ++s) {
            for (int a = 0; a < n_actions_; ++a) {
                double sum = 0.0;
                for (double v : kernel_row(s, a)) {
                    if (v < 0.0) throw ConfigError("TabularMdp: negative kernel entry");
                    sum += v;
                }
                if (std::abs(sum - 1.0) > kDistributionTol)
                    throw ConfigError("TabularMdp: kernel row does not sum to 1");
                const double rv = r(s, a);
                if (rv < 0.0 || rv > r_max_)
                    throw ConfigError("TabularMdp: reward outside [0, r_max]");
            }
        }
        double rho_sum = 0.0;
        for (double v : rho0_) {
            if (v < 0.0) throw ConfigError("TabularMdp: negative rho0 entry");
            rho_sum += v;
        }
        if (std::abs(rho_sum - 1.0) > kDistributionTol)
            throw ConfigError("TabularMdp: rho0 does not sum to 1");
    }

    int n_states_;
    int n_actions_;
    std::vector<double> kernel_;   // [s][a][s'] row-major
    std::vector<double> rewards_;  // [s][a]
    double gamma_;
    std::vector<double> rho0_;
    double r_max_;
};

/// Softmax policy over a finite MDP: logits theta[s][a], action probabilities
/// per-state softmax (always strictly positive, rows sum to 1).
class TabularPolicy {
public:
    TabularPolicy(int n_states, int n_actions, std::vector<double> logits)
        : n_states_(n_states), n_actions_(n_actions), logits_(std::move(logits)) {
        if (logits_.size() != static_cast<std::size_t>(n_states_) * n_actions_)
            throw DimensionError("TabularPolicy: logits size mismatch");
    }

    static TabularPolicy uniform(int n_states, int n_actions) {
        return TabularPolicy(n_states, n_actions,
                             std::vector<double>(static_cast<std::size_t>(n_states) * n_actions, 0.0));
    }

    static TabularPolicy random(int n_states, int n_actions, double scale, Rng& rng) {
        std::vector<double> logits(static_cast<std::size_t>(n_states) * n_actions);
        for (double& v : logits) v = scale * rng.normal();
        return TabularPolicy(n_states, n_actions, std::move(logits));
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }

    double logit(int s, int a) const { return logits_[static_cast<std::size_t>(s) * n_actions_ + a]; }
    double& logit(int s, int a) { return logits_[static_cast<std::size_t>(s) * n_actions_ + a]; }
    std::vector<double>& logits() { return logits_; }
    const std::vector<double>& logits() const { return logits_; }

    std::span<const double> logits_row(int s) const {
        return {logits_.data() + static_cast<std::size_t>(s) * n_actions_,
                static_cast<std::size_t>(n_actions_)};
    }

    std::vector<double> probs(int s) const { return softmax(logits_row(s)); }

    double log_prob(int s, int a) const {
        auto row = logits_row(s);
        double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        return row[a] - mx - std::log(z);
    }

    int sample(int s, Rng& rng) const {
        auto p = probs(s);
        return static_cast<int>(rng.categorical(p));
    }

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (int s = 0; s < n_states_; ++s) {
            auto row = logits_row(s);
            rows.push_back(std::vector<double>(row.begin(), row.end()));
        }
        return {{"n_states", n_states_}, {"n_actions", n_actions_}, {"logits", rows}};
    }

    static TabularPolicy from_json(const nlohmann::json& j) {
        const int ns = j.at("n_states").get<int>();
        const int na = j.at("n_actions").get<int>();
        std::vector<double> logits;
        logits.reserve(static_cast<std::size_t>(ns) * na);
        for (const auto& row : j.at("logits"))
            for (const auto& v : row) logits.push_back(v.get<double>());
        return TabularPolicy(ns, na, std::move(logits));
    }

private:
    int n_states_;
    int n_actions_;
    std::vector<double> logits_;  // [s][a]
};

}  // namespace synexp
