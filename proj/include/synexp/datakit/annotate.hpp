#pragma once

#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include "synexp/chat_client.hpp"
#include "synexp/datakit/prompts.hpp"
#include "synexp/rollout/rollout.hpp"

namespace synexp {

struct AnnotateConfig {
    int max_attempts = 3;
    int parallelism = 4;
    double temperature = 0.0;
    int max_tokens = 2048;
};

struct AnnotationError {
    std::size_t trajectory_index = 0;
    std::string message;
    std::string payload;
};

struct AnnotationResult {
    std::vector<Trajectory> annotated;        // successfully annotated, input order
    std::vector<AnnotationError> errors;      // skipped trajectories, input order
};

/// Render the annotation request for one trajectory.
inline nlohmann::json annotation_messages(const Trajectory& traj) {
    std::string steps_text;
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        if (i) steps_text += " ";
        steps_text += "Step: " + std::to_string(i) + ", Environment State: " +
                      traj.steps[i].state + ", Action: " + traj.steps[i].action;
    }
    const std::string user = prompts::render_template(
        prompts::kReasoningAnnotationUser,
        {{"instruction", traj.task},
         {"flag", traj.outcome == Outcome::Success ? "True" : "False"},
         {"trajectory_steps", steps_text}});
    return nlohmann::json::array({{{"role", "system"}, {"content", prompts::kReasoningAnnotationSystem}},
                                  {{"role", "user"}, {"content", user}}});
}

/// Validate a reply and copy its transition plans onto the trajectory's
/// reasoning fields. The plans array must contain exactly one entry per step.
inline Trajectory apply_annotation(const Trajectory& traj, const std::string& reply) {
    const auto doc = extract_json_object(reply);
    if (!doc.contains("state_transitions") || !doc["state_transitions"].is_array())
        throw BackendError("annotation reply lacks a state_transitions array",
                           /*retryable=*/true, reply);
    const auto& plans = doc["state_transitions"];
    if (plans.size() != traj.steps.size())
        throw BackendError("annotation plan count " + std::to_string(plans.size()) +
                               " does not match step count " + std::to_string(traj.steps.size()),
                           /*retryable=*/true, reply);
    Trajectory out = traj;
    std::vector<bool> seen(traj.steps.size(), false);
    for (const auto& plan : plans) {
        const auto id = plan.at("step_id").get<long>();
        if (id < 0 || id >= static_cast<long>(traj.steps.size()) || seen[id])
            throw BackendError("annotation step_id out of range or duplicated",
                               /*retryable=*/true, reply);
        seen[id] = true;
        out.steps[id].reasoning = plan.at("transition_plan").get<std::string>();
    }
    return out;
}

/// Annotate a batch of trajectories with reasoning traces from a remote LLM.
/// Requests run with bounded parallelism; each trajectory gets up to
/// max_attempts tries before landing on the error list. The pipeline always
/// continues past failed trajectories.
inline AnnotationResult annotate_reasoning(const std::vector<Trajectory>& trajectories,
                                           ChatClient& client, const AnnotateConfig& cfg = {}) {
    const std::size_t n = trajectories.size();
    std::vector<std::optional<Trajectory>> slots(n);
    std::vector<std::optional<AnnotationError>> errors(n);

    auto process = [&](std::size_t i) {
        const auto messages = annotation_messages(trajectories[i]);
        std::string last_error = "no attempts made";
        std::string last_payload;
        for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
            try {
                const auto reply = client.complete(messages, cfg.temperature, cfg.max_tokens);
                slots[i] = apply_annotation(trajectories[i], reply);
                return;
            } catch (const BackendError& e) {
                last_error = e.what();
                last_payload = e.payload;
                if (!e.retryable) break;
            }
        }
        errors[i] = AnnotationError{i, last_error, last_payload};
    };

    const int workers = std::max(1, std::min<int>(cfg.parallelism, static_cast<int>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) process(i);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) process(i);
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    AnnotationResult result;
    for (std::size_t i = 0; i < n; ++i) {
        if (slots[i]) result.annotated.push_back(std::move(*slots[i]));
        if (errors[i]) result.errors.push_back(std::move(*errors[i]));
    }
    return result;
}

}  // namespace synexp
