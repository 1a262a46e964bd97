#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "synexp/core/mdp.hpp"
#include "synexp/experience/model.hpp"

namespace synexp {

/// A synthetic MDP built by perturbing a base MDP with a controllable error
/// dial: kernel rows are mixed with the uniform distribution,
/// P_hat = (1-eps_p) P + eps_p U, which keeps rows stochastic and bounds the
/// per-row total variation by eps_p analytically; rewards receive a bounded
/// offset and are clamped back into [0, r_max].
struct TabularPerturbedModel {
    TabularMdp base;
    double eps_p_target = 0.0;
    double eps_r_target = 0.0;
    TabularMdp perturbed;

    static TabularPerturbedModel make(const TabularMdp& base, double eps_p_target,
                                      double eps_r_target, std::uint64_t seed) {
        if (eps_p_target < 0.0 || eps_p_target > 1.0)
            throw ConfigError("TabularPerturbedModel: eps_p_target must lie in [0, 1]");
        if (eps_r_target < 0.0)
            throw ConfigError("TabularPerturbedModel: eps_r_target must be non-negative");
        const int n = base.n_states();
        const int na = base.n_actions();
        const double u = 1.0 / n;

        std::vector<double> kernel(base.kernel());
        for (double& v : kernel) v = (1.0 - eps_p_target) * v + eps_p_target * u;

        Rng rng(stream_seed(seed, "tabular-perturb"));
        std::vector<double> rewards(base.rewards());
        for (int s = 0; s < n; ++s) {
            for (int a = 0; a < na; ++a) {
                double& r = rewards[static_cast<std::size_t>(s) * na + a];
                r = std::clamp(r + eps_r_target * rng.uniform(-1.0, 1.0), 0.0, base.r_max());
            }
        }
        TabularMdp perturbed(n, na, std::move(kernel), std::move(rewards), base.gamma(),
                             base.rho0(), base.r_max());
        return TabularPerturbedModel{base, eps_p_target, eps_r_target, std::move(perturbed)};
    }

    /// Wrap an explicitly supplied synthetic MDP; targets become measurements.
    static TabularPerturbedModel from_mdps(const TabularMdp& base, TabularMdp perturbed);
};

/// Measured one-step model errors:
///   eps_r = sup_{s,a} |R - R_hat|
///   eps_p = sup_{s,a} TV(P(.|s,a), P_hat(.|s,a)) = sup (1/2) sum |P - P_hat|
inline std::pair<double, double> measure_model_error(const TabularMdp& real,
                                                     const TabularPerturbedModel& model) {
    const TabularMdp& synth = model.perturbed;
    if (real.n_states() != synth.n_states() || real.n_actions() != synth.n_actions())
        throw DimensionError("measure_model_error: state/action spaces disagree");
    double eps_r = 0.0;
    double eps_p = 0.0;
    for (int s = 0; s < real.n_states(); ++s) {
        for (int a = 0; a < real.n_actions(); ++a) {
            eps_r = std::max(eps_r, std::abs(real.r(s, a) - synth.r(s, a)));
            const auto pr = real.kernel_row(s, a);
            const auto ps = synth.kernel_row(s, a);
            double tv = 0.0;
            for (int s2 = 0; s2 < real.n_states(); ++s2) tv += std::abs(pr[s2] - ps[s2]);
            eps_p = std::max(eps_p, 0.5 * tv);
        }
    }
    return {eps_r, eps_p};
}

inline TabularPerturbedModel TabularPerturbedModel::from_mdps(const TabularMdp& base,
                                                              TabularMdp perturbed) {
    TabularPerturbedModel model{base, 0.0, 0.0, std::move(perturbed)};
    auto [eps_r, eps_p] = measure_model_error(base, model);
    model.eps_r_target = eps_r;
    model.eps_p_target = eps_p;
    return model;
}

/// ExperienceModel facade over a tabular MDP for sampling-based checks.
/// States render as "s<i>", actions as "a<j>"; episodes never terminate on
/// their own (the rollout horizon ends them). Invalid actions go to the
/// designated failure state with zero reward.
class TabularExperienceModel : public ExperienceModel {
public:
    explicit TabularExperienceModel(TabularMdp mdp) : mdp_(std::move(mdp)) {}

    static constexpr const char* kFailureState = "failure";

    std::string name() const override { return "tabular"; }

    const TabularMdp& mdp() const { return mdp_; }

    std::string reset(const std::string& /*task*/, Rng& rng) const override {
        return state_text(static_cast<int>(rng.categorical(mdp_.rho0())));
    }

    std::vector<std::string> actions(const std::string& state) const override {
        if (parse_state(state) < 0) return {};
        std::vector<std::string> out;
        out.reserve(mdp_.n_actions());
        for (int a = 0; a < mdp_.n_actions(); ++a) out.push_back(action_text(a));
        return out;
    }

    ModelStep step(const ExperienceContext& /*ctx*/, const std::string& state,
                   const std::string& action, Rng& rng) const override {
        const int s = parse_state(state);
        const int a = parse_action(action);
        if (s < 0 || a < 0) {
            return ModelStep{"", kFailureState, 0.0, true};
        }
        const int s2 = static_cast<int>(rng.categorical(mdp_.kernel_row(s, a)));
        return ModelStep{"", state_text(s2), mdp_.r(s, a), false};
    }

    static std::string state_text(int s) { return "s" + std::to_string(s); }
    static std::string action_text(int a) { return "a" + std::to_string(a); }

    int parse_state(const std::string& text) const { return parse_index(text, 's', mdp_.n_states()); }
    int parse_action(const std::string& text) const { return parse_index(text, 'a', mdp_.n_actions()); }

private:
    static int parse_index(const std::string& text, char prefix, int limit) {
        if (text.size() < 2 || text[0] != prefix) return -1;
        int value = 0;
        const auto [ptr, ec] = std::from_chars(text.data() + 1, text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size()) return -1;
        return (value >= 0 && value < limit) ? value : -1;
    }

    TabularMdp mdp_;
};

}  // namespace synexp
