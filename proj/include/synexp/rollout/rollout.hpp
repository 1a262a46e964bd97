#pragma once

#include <atomic>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "synexp/core/mdp.hpp"
#include "synexp/errors.hpp"
#include "synexp/experience/model.hpp"
#include "synexp/replay/buffer.hpp"
#include "synexp/rng.hpp"

namespace synexp {

/// Softmax policy over textual states with lazily discovered rows. A state it
/// has never been updated on behaves as uniform over the admissible actions.
/// Sampling is const (safe for concurrent rollout workers); rows are interned
/// only by the single-threaded update path.
class TextPolicy {
public:
    using Row = std::map<std::string, double>;

    /// Sample an action from the softmax over the admissible set; returns the
    /// action and its log-probability under the current parameters.
    std::pair<std::string, double> sample(const std::string& state,
                                          const std::vector<std::string>& admissible,
                                          Rng& rng) const {
        const auto logits = admissible_logits(state, admissible);
        const auto probs = softmax(logits);
        const auto idx = rng.categorical(probs);
        return {admissible[idx], std::log(probs[idx])};
    }

    /// Highest-probability action; ties resolve to the earliest admissible
    /// entry so evaluation is deterministic.
    std::pair<std::string, double> greedy(const std::string& state,
                                          const std::vector<std::string>& admissible) const {
        const auto logits = admissible_logits(state, admissible);
        const auto probs = softmax(logits);
        std::size_t best = 0;
        for (std::size_t i = 1; i < probs.size(); ++i)
            if (probs[i] > probs[best]) best = i;
        return {admissible[best], std::log(probs[best])};
    }

    double log_prob(const std::string& state, const std::vector<std::string>& admissible,
                    const std::string& action) const {
        const auto logits = admissible_logits(state, admissible);
        const auto probs = softmax(logits);
        for (std::size_t i = 0; i < admissible.size(); ++i)
            if (admissible[i] == action) return std::log(probs[i]);
        throw ConfigError("log_prob: action not admissible: " + action);
    }

    /// Intern a state row (zero logits) if absent. Update-path only.
    void ensure_row(const std::string& state, const std::vector<std::string>& admissible) {
        auto& row = rows_[state];
        for (const auto& action : admissible) row.emplace(action, 0.0);
    }

    bool has_row(const std::string& state) const { return rows_.count(state) > 0; }
    std::size_t n_rows() const { return rows_.size(); }

    std::map<std::string, Row>& rows() { return rows_; }
    const std::map<std::string, Row>& rows() const { return rows_; }

    /// Canonical serialization: rows and actions in sorted order, so the same
    /// parameters always produce the same bytes regardless of discovery order.
    nlohmann::json to_json() const {
        nlohmann::json states = nlohmann::json::array();
        for (const auto& [state, row] : rows_) {
            nlohmann::json actions = nlohmann::json::array();
            for (const auto& [action, logit] : row)
                actions.push_back({{"action", action}, {"logit", logit}});
            states.push_back({{"state", state}, {"actions", actions}});
        }
        return {{"kind", "text-policy"}, {"states", states}};
    }

    static TextPolicy from_json(const nlohmann::json& j) {
        TextPolicy policy;
        for (const auto& entry : j.at("states")) {
            auto& row = policy.rows_[entry.at("state").get<std::string>()];
            for (const auto& a : entry.at("actions"))
                row[a.at("action").get<std::string>()] = a.at("logit").get<double>();
        }
        return policy;
    }

private:
    std::vector<double> admissible_logits(const std::string& state,
                                          const std::vector<std::string>& admissible) const {
        if (admissible.empty()) throw ConfigError("TextPolicy: empty admissible action set");
        std::vector<double> logits(admissible.size(), 0.0);
        const auto it = rows_.find(state);
        if (it != rows_.end()) {
            for (std::size_t i = 0; i < admissible.size(); ++i) {
                const auto a = it->second.find(admissible[i]);
                if (a != it->second.end()) logits[i] = a->second;
            }
        }
        return logits;
    }

    std::map<std::string, Row> rows_;
};

enum class Outcome { Success, Failure, Horizon };

inline const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Success: return "success";
        case Outcome::Failure: return "failure";
        default: return "horizon";
    }
}

inline Outcome outcome_from_name(const std::string& name) {
    if (name == "success") return Outcome::Success;
    if (name == "failure") return Outcome::Failure;
    return Outcome::Horizon;
}

struct TrajStep {
    std::string state;
    std::string action;
    double logp = 0.0;
    std::string reasoning;
    double reward = 0.0;
    bool done = false;

    bool operator==(const TrajStep&) const = default;
};

struct Trajectory {
    std::string task;
    std::vector<TrajStep> steps;
    Outcome outcome = Outcome::Horizon;
    std::uint64_t seed = 0;
    std::string final_state;  // state after the last step; defines the last transition

    bool operator==(const Trajectory&) const = default;

    double total_reward() const {
        double acc = 0.0;
        for (const auto& s : steps) acc += s.reward;
        return acc;
    }

    nlohmann::json to_json() const {
        nlohmann::json steps_json = nlohmann::json::array();
        for (const auto& s : steps)
            steps_json.push_back({{"state", s.state}, {"action", s.action}, {"logp", s.logp},
                                  {"reasoning", s.reasoning}, {"reward", s.reward},
                                  {"done", s.done}});
        return {{"task", task},   {"seed", seed},  {"outcome", outcome_name(outcome)},
                {"final_state", final_state}, {"steps", steps_json}};
    }

    static Trajectory from_json(const nlohmann::json& j) {
        Trajectory t;
        t.task = j.at("task").get<std::string>();
        t.seed = j.at("seed").get<std::uint64_t>();
        t.outcome = outcome_from_name(j.at("outcome").get<std::string>());
        t.final_state = j.value("final_state", std::string{});
        for (const auto& s : j.at("steps")) {
            TrajStep step;
            step.state = s.at("state").get<std::string>();
            step.action = s.at("action").get<std::string>();
            step.logp = s.at("logp").get<double>();
            step.reasoning = s.value("reasoning", std::string{});
            step.reward = s.at("reward").get<double>();
            step.done = s.at("done").get<bool>();
            t.steps.push_back(std::move(step));
        }
        return t;
    }
};

/// A backend failure mid-episode; carries the partial trajectory collected so
/// far for diagnostics.
struct EpisodeError : Error {
    EpisodeError(const std::string& msg, Trajectory partial_)
        : Error(msg), partial(std::move(partial_)) {}
    Trajectory partial;
};

/// A failure inside collect_group; carries the episodes that did complete.
struct GroupError : Error {
    GroupError(const std::string& msg, std::vector<Trajectory> partial_)
        : Error(msg), partial(std::move(partial_)) {}
    std::vector<Trajectory> partial;
};

/// Convert a trajectory's steps into replay transitions. next_state of the
/// last step is the trajectory's final state.
inline std::vector<Transition> trajectory_transitions(const Trajectory& traj) {
    std::vector<Transition> out;
    out.reserve(traj.steps.size());
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        const auto& step = traj.steps[i];
        Transition t;
        t.state = step.state;
        t.action = step.action;
        t.next_state = i + 1 < traj.steps.size() ? traj.steps[i + 1].state : traj.final_state;
        t.reward = step.reward;
        t.reasoning = step.reasoning;
        t.task = traj.task;
        t.traj_id = traj.seed;
        out.push_back(std::move(t));
    }
    return out;
}

inline void append_trajectory(ReplayBuffer& buffer, const Trajectory& traj) {
    for (auto& t : trajectory_transitions(traj)) buffer.append(std::move(t));
}

inline void seed_buffer(ReplayBuffer& buffer, const std::vector<Trajectory>& trajectories) {
    for (const auto& traj : trajectories) append_trajectory(buffer, traj);
}

struct EpisodeOptions {
    bool greedy = false;
    bool append_to_buffer = true;
};

/// One multi-turn episode: the policy picks an action, the top-k similar past
/// transitions are retrieved for the model's context, the experience model
/// produces the next transition. Stops on done or after max_turns (outcome
/// horizon). Every random decision derives from rng_seed, so identical inputs
/// give identical trajectories.
inline Trajectory run_episode(const TextPolicy& policy, const ExperienceModel& model,
                              ReplayBuffer& buffer, const std::string& task, int max_turns,
                              int k, std::uint64_t rng_seed, const EpisodeOptions& opts = {}) {
    if (max_turns < 1) throw ConfigError("run_episode: max_turns must be at least 1");

    Trajectory traj;
    traj.task = task;
    traj.seed = rng_seed;

    Rng reset_rng(stream_seed(rng_seed, "reset"));
    std::string state;
    try {
        state = model.reset(task, reset_rng);
    } catch (const Error& e) {
        throw EpisodeError(std::string("reset failed: ") + e.what(), traj);
    }

    ExperienceContext ctx;
    ctx.task = task;
    bool done = false;
    for (int t = 0; t < max_turns && !done; ++t) {
        const auto admissible = model.actions(state);
        if (admissible.empty()) break;  // terminal page without a done flag

        Rng policy_rng(stream_seed(rng_seed, "policy", t));
        const auto [action, logp] =
            opts.greedy ? policy.greedy(state, admissible) : policy.sample(state, admissible, policy_rng);

        ctx.demos = buffer.retrieve_topk(state, action, k);

        ModelStep out;
        try {
            Rng model_rng(stream_seed(rng_seed, "model", t));
            out = model.step(ctx, state, action, model_rng);
        } catch (const Error& e) {
            traj.final_state = state;
            throw EpisodeError(std::string("step failed: ") + e.what(), traj);
        }

        traj.steps.push_back(TrajStep{state, action, logp, out.reasoning, out.reward, out.done});
        ctx.history.emplace_back(state, action);
        traj.final_state = out.next_state;
        done = out.done;
        state = out.next_state;
    }

    if (done) {
        traj.outcome = (!traj.steps.empty() && traj.steps.back().reward == 1.0) ? Outcome::Success
                                                                                : Outcome::Failure;
    } else {
        traj.outcome = Outcome::Horizon;
    }

    if (opts.append_to_buffer) append_trajectory(buffer, traj);
    return traj;
}

/// n episodes of the same task with seeds base_seed + 0..n-1, optionally run
/// on several workers. Results are ordered by seed offset and buffer appends
/// are deferred until every episode finished, so the output is identical for
/// any worker count.
inline std::vector<Trajectory> collect_group(const TextPolicy& policy, const ExperienceModel& model,
                                             ReplayBuffer& buffer, const std::string& task, int n,
                                             int max_turns, int k, std::uint64_t base_seed,
                                             int workers = 1, bool greedy = false) {
    if (n < 1) throw ConfigError("collect_group: group size must be at least 1");

    std::vector<Trajectory> results(n);
    std::vector<std::exception_ptr> failures(n);
    const EpisodeOptions opts{greedy, /*append_to_buffer=*/false};

    if (workers <= 1) {
        for (int i = 0; i < n; ++i) {
            try {
                results[i] = run_episode(policy, model, buffer, task, max_turns, k, base_seed + i, opts);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<int> next{0};
        auto worker = [&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    results[i] =
                        run_episode(policy, model, buffer, task, max_turns, k, base_seed + i, opts);
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const int n_threads = std::min(workers, n);
        pool.reserve(n_threads);
        for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (int i = 0; i < n; ++i) {
        if (!failures[i]) continue;
        std::vector<Trajectory> partial;
        for (int jj = 0; jj < n; ++jj)
            if (!failures[jj]) partial.push_back(results[jj]);
        try {
            std::rethrow_exception(failures[i]);
        } catch (const Error& e) {
            throw GroupError(std::string("episode ") + std::to_string(i) + " failed: " + e.what(),
                             std::move(partial));
        }
    }

    for (const auto& traj : results) append_trajectory(buffer, traj);
    return results;
}

}  // namespace synexp
