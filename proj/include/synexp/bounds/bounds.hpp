#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "synexp/core/evaluate.hpp"
#include "synexp/core/mdp.hpp"
#include "synexp/experience/tabular.hpp"
#include "synexp/rng.hpp"

namespace synexp {

inline constexpr double kBoundSlack = 1e-9;

/// Simulation-error bound: eps_r/(1-gamma) + 2*gamma*r_max*eps_p/(1-gamma)^2.
/// Monotone in every argument on its domain.
inline double delta_model(double eps_r, double eps_p, double gamma, double r_max) {
    if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("delta_model: gamma must lie in [0, 1)");
    if (eps_r < 0.0 || eps_p < 0.0 || r_max < 0.0)
        throw ConfigError("delta_model: inputs must be non-negative");
    const double one_minus = 1.0 - gamma;
    return eps_r / one_minus + 2.0 * gamma * r_max * eps_p / (one_minus * one_minus);
}

/// Outcome of one bound check, in canonical "lhs <= rhs" form with
/// margin = rhs - lhs. holds means margin >= -1e-9 (numerical slack).
struct BoundReport {
    std::string kind;  // "simulation-lemma" | "policy-improvement"
    // instance descriptor
    int n_states = 0;
    int n_actions = 0;
    double gamma = 0.0;
    std::uint64_t seed = 0;
    // measured quantities
    double eps_r = 0.0;
    double eps_p = 0.0;
    double v_max = 0.0;
    double delta_model = 0.0;
    double delta_kl = 0.0;     // policy-improvement only
    double j_real = 0.0;       // J_M(pi), and J_M(pi') goes in j_real_new
    double j_synth = 0.0;      // J_Mhat(pi)
    double j_real_new = 0.0;   // policy-improvement only
    double surrogate = 0.0;    // policy-improvement only
    double trust_penalty = 0.0;
    // the inequality
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    bool holds = false;
    // improvement-trigger corollary (policy-improvement only)
    bool trigger_fired = false;
    bool trigger_holds = true;

    nlohmann::json to_json() const {
        return {{"kind", kind},
                {"n_states", n_states},
                {"n_actions", n_actions},
                {"gamma", gamma},
                {"seed", seed},
                {"eps_r", eps_r},
                {"eps_p", eps_p},
                {"v_max", v_max},
                {"delta_model", delta_model},
                {"delta_kl", delta_kl},
                {"j_real", j_real},
                {"j_synth", j_synth},
                {"j_real_new", j_real_new},
                {"surrogate", surrogate},
                {"trust_penalty", trust_penalty},
                {"lhs", lhs},
                {"rhs", rhs},
                {"margin", margin},
                {"holds", holds},
                {"trigger_fired", trigger_fired},
                {"trigger_holds", trigger_holds}};
    }

    static BoundReport from_json(const nlohmann::json& j) {
        BoundReport r;
        r.kind = j.at("kind").get<std::string>();
        r.n_states = j.at("n_states").get<int>();
        r.n_actions = j.at("n_actions").get<int>();
        r.gamma = j.at("gamma").get<double>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.eps_r = j.at("eps_r").get<double>();
        r.eps_p = j.at("eps_p").get<double>();
        r.v_max = j.at("v_max").get<double>();
        r.delta_model = j.at("delta_model").get<double>();
        r.delta_kl = j.at("delta_kl").get<double>();
        r.j_real = j.at("j_real").get<double>();
        r.j_synth = j.at("j_synth").get<double>();
        r.j_real_new = j.at("j_real_new").get<double>();
        r.surrogate = j.at("surrogate").get<double>();
        r.trust_penalty = j.at("trust_penalty").get<double>();
        r.lhs = j.at("lhs").get<double>();
        r.rhs = j.at("rhs").get<double>();
        r.margin = j.at("margin").get<double>();
        r.holds = j.at("holds").get<bool>();
        r.trigger_fired = j.at("trigger_fired").get<bool>();
        r.trigger_holds = j.at("trigger_holds").get<bool>();
        return r;
    }
};

/// Checks |J_M(pi) - J_Mhat(pi)| <= delta_model with exact policy evaluation
/// on both MDPs and measured (eps_r, eps_p). A false `holds` on any valid
/// instance indicates a bug somewhere in the numeric stack, not a property of
/// the instance.
inline BoundReport verify_simulation_lemma(const TabularMdp& real,
                                           const TabularPerturbedModel& model,
                                           const TabularPolicy& policy) {
    if (real.n_states() != model.perturbed.n_states() ||
        real.n_actions() != model.perturbed.n_actions())
        throw DimensionError("verify_simulation_lemma: state/action spaces disagree");

    BoundReport report;
    report.kind = "simulation-lemma";
    report.n_states = real.n_states();
    report.n_actions = real.n_actions();
    report.gamma = real.gamma();

    const auto [eps_r, eps_p] = measure_model_error(real, model);
    report.eps_r = eps_r;
    report.eps_p = eps_p;
    report.v_max = real.r_max() / (1.0 - real.gamma());
    report.delta_model = delta_model(eps_r, eps_p, real.gamma(), real.r_max());

    report.j_real = evaluate_policy(real, policy).j;
    report.j_synth = evaluate_policy(model.perturbed, policy).j;

    report.lhs = std::abs(report.j_real - report.j_synth);
    report.rhs = report.delta_model;
    report.margin = report.rhs - report.lhs;
    report.holds = report.margin >= -kBoundSlack;
    return report;
}

/// Checks the policy-improvement guarantee for an update pi -> pi_prime
/// performed against the synthetic MDP:
///   J_M(pi') - J_M(pi) >= surrogate - (4 gamma/(1-gamma)^2) V_max delta - 2 delta_model
/// where surrogate = 1/(1-gamma) E_{s~d^pi_Mhat, a~pi'}[A^pi_Mhat(s,a)] and
/// delta = sup_s KL(pi'(.|s) || pi(.|s)). Also evaluates the corollary: when
/// the surrogate gain exceeds the two penalties, the real improvement must be
/// non-negative.
inline BoundReport verify_policy_improvement(const TabularMdp& real,
                                             const TabularPerturbedModel& model,
                                             const TabularPolicy& pi,
                                             const TabularPolicy& pi_prime) {
    if (real.n_states() != model.perturbed.n_states() ||
        real.n_actions() != model.perturbed.n_actions())
        throw DimensionError("verify_policy_improvement: state/action spaces disagree");
    if (pi.n_states() != real.n_states() || pi_prime.n_states() != real.n_states())
        throw DimensionError("verify_policy_improvement: policy dimensions disagree");

    BoundReport report;
    report.kind = "policy-improvement";
    report.n_states = real.n_states();
    report.n_actions = real.n_actions();
    report.gamma = real.gamma();

    const auto [eps_r, eps_p] = measure_model_error(real, model);
    report.eps_r = eps_r;
    report.eps_p = eps_p;
    report.v_max = real.r_max() / (1.0 - real.gamma());
    report.delta_model = delta_model(eps_r, eps_p, real.gamma(), real.r_max());
    report.delta_kl = kl_radius(pi, pi_prime);

    report.j_real = evaluate_policy(real, pi).j;
    report.j_real_new = evaluate_policy(real, pi_prime).j;

    const auto synth_report = evaluate_policy(model.perturbed, pi);
    report.j_synth = synth_report.j;
    double surrogate = 0.0;
    for (int s = 0; s < real.n_states(); ++s) {
        const auto probs = pi_prime.probs(s);
        double inner = 0.0;
        for (int a = 0; a < real.n_actions(); ++a)
            inner += probs[a] * synth_report.adv_at(s, a, real.n_actions());
        surrogate += synth_report.occupancy[s] * inner;
    }
    surrogate /= (1.0 - real.gamma());
    report.surrogate = surrogate;

    const double gamma = real.gamma();
    report.trust_penalty =
        4.0 * gamma / ((1.0 - gamma) * (1.0 - gamma)) * report.v_max * report.delta_kl;

    report.lhs = surrogate - report.trust_penalty - 2.0 * report.delta_model;
    report.rhs = report.j_real_new - report.j_real;
    report.margin = report.rhs - report.lhs;
    report.holds = report.margin >= -kBoundSlack;

    report.trigger_fired = surrogate > report.trust_penalty + 2.0 * report.delta_model;
    report.trigger_holds = !report.trigger_fired || report.rhs >= -kBoundSlack;
    return report;
}

/// Produce a trust-region neighbor of pi with a prescribed per-state KL
/// radius: fixed Gaussian logit noise, magnitude found by bisection. The
/// returned policy's measured radius is what matters downstream, so hitting
/// the target only approximately is fine.
inline TabularPolicy perturb_policy_to_kl(const TabularPolicy& pi, double target_delta,
                                          std::uint64_t seed) {
    if (target_delta <= 0.0) return pi;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Rng rng(stream_seed(seed, "kl-noise", attempt));
        std::vector<double> noise(pi.logits().size());
        for (double& v : noise) v = rng.normal();

        const auto with_scale = [&](double scale) {
            auto logits = pi.logits();
            for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += scale * noise[i];
            return TabularPolicy(pi.n_states(), pi.n_actions(), std::move(logits));
        };

        double hi = 1.0;
        int expand = 0;
        while (kl_radius(pi, with_scale(hi)) < target_delta && expand < 60) {
            hi *= 2.0;
            ++expand;
        }
        if (expand == 60) continue;  // degenerate noise draw; retry with a new one
        double lo = 0.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (kl_radius(pi, with_scale(mid)) < target_delta)
                lo = mid;
            else
                hi = mid;
        }
        return with_scale(hi);
    }
    throw NumericError("perturb_policy_to_kl: could not reach the target radius");
}

struct SweepConfig {
    int instances = 1000;
    int min_states = 4;
    int max_states = 10;
    int min_actions = 2;
    int max_actions = 4;
    std::vector<double> gammas{0.8, 0.9, 0.95};
    std::vector<double> eps_grid{0.0, 0.01, 0.05, 0.1, 0.2};
    std::vector<double> deltas{0.01, 0.05, 0.1};  // policy-improvement targets
    std::uint64_t seed = 0;
    int workers = 1;
};

struct SweepSummary {
    int instances = 0;
    int violations = 0;
    int trigger_fired = 0;
    int trigger_violations = 0;
    double min_margin = std::numeric_limits<double>::infinity();

    nlohmann::json to_json(const std::string& kind) const {
        return {{"kind", kind},
                {"instances", instances},
                {"violations", violations},
                {"trigger_fired", trigger_fired},
                {"trigger_violations", trigger_violations},
                {"min_margin", min_margin}};
    }
};

namespace detail {

inline std::vector<BoundReport> run_sweep(
    const SweepConfig& cfg, const std::function<BoundReport(std::uint64_t, Rng&)>& one_instance) {
    std::vector<BoundReport> reports(cfg.instances);
    auto worker_fn = [&](int begin, int step) {
        for (int i = begin; i < cfg.instances; i += step) {
            const std::uint64_t inst_seed = stream_seed(cfg.seed, "bounds-instance", i);
            Rng rng(inst_seed);
            reports[i] = one_instance(inst_seed, rng);
        }
    };
    const int workers = std::max(1, cfg.workers);
    if (workers == 1) {
        worker_fn(0, 1);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn, w, workers);
        for (auto& th : pool) th.join();
    }
    return reports;
}

inline SweepSummary summarize(const std::vector<BoundReport>& reports) {
    SweepSummary summary;
    summary.instances = static_cast<int>(reports.size());
    for (const auto& r : reports) {
        if (!r.holds) ++summary.violations;
        if (r.trigger_fired) ++summary.trigger_fired;
        if (!r.trigger_holds) ++summary.trigger_violations;
        summary.min_margin = std::min(summary.min_margin, r.margin);
    }
    return summary;
}

}  // namespace detail

/// Randomized verification sweep for the simulation lemma. Returns every
/// report; the summary is derivable via summarize_sweep.
inline std::vector<BoundReport> lemma_sweep(const SweepConfig& cfg) {
    return detail::run_sweep(cfg, [&](std::uint64_t inst_seed, Rng& rng) {
        const int ns = cfg.min_states + static_cast<int>(rng.uniform_int(cfg.max_states - cfg.min_states + 1));
        const int na =
            cfg.min_actions + static_cast<int>(rng.uniform_int(cfg.max_actions - cfg.min_actions + 1));
        const double gamma = cfg.gammas[rng.uniform_int(cfg.gammas.size())];
        const auto mdp = TabularMdp::random(ns, na, gamma, 1.0, rng);
        const double eps_p = cfg.eps_grid[rng.uniform_int(cfg.eps_grid.size())];
        const double eps_r = cfg.eps_grid[rng.uniform_int(cfg.eps_grid.size())];
        const auto model = TabularPerturbedModel::make(mdp, eps_p, eps_r, rng.next_u64());
        const auto policy = TabularPolicy::random(ns, na, 1.0, rng);
        auto report = verify_simulation_lemma(mdp, model, policy);
        report.seed = inst_seed;
        return report;
    });
}

/// Randomized verification sweep for the policy-improvement guarantee, with
/// trust-region neighbors generated by bisected logit noise.
inline std::vector<BoundReport> improvement_sweep(const SweepConfig& cfg) {
    return detail::run_sweep(cfg, [&](std::uint64_t inst_seed, Rng& rng) {
        const int ns = cfg.min_states + static_cast<int>(rng.uniform_int(cfg.max_states - cfg.min_states + 1));
        const int na =
            cfg.min_actions + static_cast<int>(rng.uniform_int(cfg.max_actions - cfg.min_actions + 1));
        const double gamma = cfg.gammas[rng.uniform_int(cfg.gammas.size())];
        const auto mdp = TabularMdp::random(ns, na, gamma, 1.0, rng);
        const double eps_p = cfg.eps_grid[rng.uniform_int(cfg.eps_grid.size())];
        const double eps_r = cfg.eps_grid[rng.uniform_int(cfg.eps_grid.size())];
        const auto model = TabularPerturbedModel::make(mdp, eps_p, eps_r, rng.next_u64());
        const auto pi = TabularPolicy::random(ns, na, 1.0, rng);
        const double delta = cfg.deltas[rng.uniform_int(cfg.deltas.size())];
        const auto pi_prime = perturb_policy_to_kl(pi, delta, rng.next_u64());
        auto report = verify_policy_improvement(mdp, model, pi, pi_prime);
        report.seed = inst_seed;
        return report;
    });
}

inline SweepSummary summarize_sweep(const std::vector<BoundReport>& reports) {
    return detail::summarize(reports);
}

}  // namespace synexp
