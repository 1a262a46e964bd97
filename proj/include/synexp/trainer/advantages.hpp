#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "synexp/errors.hpp"

namespace synexp {

/// Generalized advantage estimation by the backward recursion
/// A_t = delta_t + gamma*lam*A_{t+1}, delta_t = r_t + gamma*V_{t+1} - V_t.
/// `values` must carry one bootstrap entry past the last reward (zero for
/// terminal states).
inline std::vector<double> gae_advantages(std::span<const double> rewards,
                                          std::span<const double> values, double gamma,
                                          double lam) {
    if (values.size() != rewards.size() + 1)
        throw DimensionError("gae_advantages: values must have length rewards+1");
    std::vector<double> adv(rewards.size(), 0.0);
    double carry = 0.0;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        const double delta = rewards[i] + gamma * values[i + 1] - values[i];
        carry = delta + gamma * lam * carry;
        adv[i] = carry;
    }
    return adv;
}

/// Group-normalized advantages: (r - mean) / std with the population standard
/// deviation. A zero-variance group yields all-zero advantages and therefore
/// contributes no gradient.
inline std::vector<double> grpo_advantages(std::span<const double> group_rewards) {
    const std::size_t n = group_rewards.size();
    if (n < 2) throw DimensionError("grpo_advantages: group size must be at least 2");
    double mean = 0.0;
    for (double r : group_rewards) mean += r;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double r : group_rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(n);
    const double stddev = std::sqrt(var);
    std::vector<double> adv(n, 0.0);
    if (stddev > 0.0) {
        for (std::size_t i = 0; i < n; ++i) adv[i] = (group_rewards[i] - mean) / stddev;
        // normalization identities, checked online
        double m = 0.0, v = 0.0;
        for (double a : adv) m += a;
        m /= static_cast<double>(n);
        for (double a : adv) v += (a - m) * (a - m);
        v /= static_cast<double>(n);
        if (std::abs(m) > 1e-9 || std::abs(std::sqrt(v) - 1.0) > 1e-9)
            throw NumericError("grpo_advantages: normalization identity violated");
    }
    return adv;
}

}  // namespace synexp
