#pragma once

#include <string>
#include <utility>
#include <vector>

#include "synexp/replay/buffer.hpp"
#include "synexp/rng.hpp"

namespace synexp {

/// Conditioning set for one experience-model step: the task instruction, the
/// chronological (state, action) history of the episode so far, and up to k
/// demonstrations retrieved from the replay buffer.
struct ExperienceContext {
    std::string task;
    std::vector<std::pair<std::string, std::string>> history;
    std::vector<Transition> demos;
};

/// One synthesized transition: reasoning trace, next state, reward, done.
/// Text backends follow the outcome scheme (reward in {0,1}, 1 only on the
/// terminal step of a success); the tabular backend reports the perturbed
/// MDP's raw reward since it exists for numeric verification, not training.
struct ModelStep {
    std::string reasoning;
    std::string next_state;
    double reward = 0.0;
    bool done = false;
};

/// Pluggable experience model: given context, state and action it produces
/// the next transition. Implementations must be safe for concurrent step()
/// calls; all randomness comes from the caller-provided stream.
class ExperienceModel {
public:
    virtual ~ExperienceModel() = default;

    virtual std::string name() const = 0;

    /// Initial state for a task. rng covers backends with stochastic starts.
    virtual std::string reset(const std::string& task, Rng& rng) const = 0;

    /// Admissible actions in a state (the model's action vocabulary there).
    virtual std::vector<std::string> actions(const std::string& state) const = 0;

    virtual ModelStep step(const ExperienceContext& ctx, const std::string& state,
                           const std::string& action, Rng& rng) const = 0;
};

}  // namespace synexp
