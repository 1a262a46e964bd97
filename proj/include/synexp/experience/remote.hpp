#pragma once

#include <memory>
#include <string>
#include <vector>

#include "synexp/chat_client.hpp"
#include "synexp/datakit/prompts.hpp"
#include "synexp/experience/model.hpp"

namespace synexp {

struct RemoteModelConfig {
    int max_attempts = 3;     // retries for malformed replies
    int max_turns = 64;       // backend-side turn budget
    int history_window = 8;   // most recent turns included in the prompt
    double temperature = 0.0;
    int max_tokens = 768;
    std::vector<std::string> action_vocab;  // admissible actions offered to the agent
};

/// Experience model served by a remote LLM behind the chat-completions
/// protocol. Each step sends the task, a truncated interaction history, the
/// retrieved demos and the current state/action; the reply must be a fenced
/// JSON object with reasoning / next_state / reward / done. Malformed replies
/// are retried up to the configured limit and then surfaced with the raw
/// payload attached.
class RemoteExperienceModel : public ExperienceModel {
public:
    RemoteExperienceModel(std::shared_ptr<ChatClient> client, RemoteModelConfig cfg)
        : client_(std::move(client)), cfg_(std::move(cfg)) {
        if (!client_) throw ConfigError("RemoteExperienceModel: null chat client");
        if (cfg_.action_vocab.empty())
            throw ConfigError("RemoteExperienceModel: action_vocab must not be empty");
    }

    std::string name() const override { return "remote"; }

    std::string reset(const std::string& task, Rng& /*rng*/) const override {
        return "task: " + task + " || turn 0: environment ready";
    }

    std::vector<std::string> actions(const std::string& /*state*/) const override {
        return cfg_.action_vocab;
    }

    ModelStep step(const ExperienceContext& ctx, const std::string& state,
                   const std::string& action, Rng& /*rng*/) const override {
        if (static_cast<int>(ctx.history.size()) >= cfg_.max_turns)
            throw HorizonError("remote backend: turn budget " + std::to_string(cfg_.max_turns) +
                               " exceeded");

        const auto messages = render_messages(ctx, state, action);
        std::string last_error = "no attempts made";
        std::string last_payload;
        for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
            try {
                const auto reply = client_->complete(messages, cfg_.temperature, cfg_.max_tokens);
                return parse_step(reply);
            } catch (const BackendError& e) {
                last_error = e.what();
                last_payload = e.payload;
                if (!e.retryable) break;
            }
        }
        throw BackendError("remote backend failed after " + std::to_string(cfg_.max_attempts) +
                               " attempts: " + last_error,
                           /*retryable=*/false, last_payload);
    }

    /// Exposed for tests and goldens.
    nlohmann::json render_messages(const ExperienceContext& ctx, const std::string& state,
                                   const std::string& action) const {
        std::string history;
        const std::size_t keep = static_cast<std::size_t>(cfg_.history_window);
        const std::size_t begin = ctx.history.size() > keep ? ctx.history.size() - keep : 0;
        for (std::size_t i = begin; i < ctx.history.size(); ++i) {
            history += "turn " + std::to_string(i) + " | state: " + ctx.history[i].first +
                       " | action: " + ctx.history[i].second + "\n";
        }
        if (history.empty()) history = "(none)\n";

        std::string demos;
        for (const auto& d : ctx.demos) {
            demos += "state: " + d.state + " | action: " + d.action +
                     " | next state: " + d.next_state + " | reward: " + std::to_string(d.reward) +
                     "\n";
        }
        if (demos.empty()) demos = "(none)\n";

        const auto user = prompts::render_template(
            prompts::kExperienceStepUser,
            {{"task", ctx.task},
             {"history_window", std::to_string(cfg_.history_window)},
             {"history", history},
             {"demos", demos},
             {"state", state},
             {"action", action}});
        return nlohmann::json::array(
            {{{"role", "system"}, {"content", prompts::kExperienceStepSystem}},
             {{"role", "user"}, {"content", user}}});
    }

    static ModelStep parse_step(const std::string& reply) {
        const auto doc = extract_json_object(reply);
        ModelStep step;
        try {
            step.reasoning = doc.at("reasoning").get<std::string>();
            step.next_state = doc.at("next_state").get<std::string>();
            step.reward = doc.at("reward").get<double>();
            step.done = doc.at("done").get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("reply missing required fields: ") + e.what(),
                               /*retryable=*/true, reply);
        }
        if (step.reward != 0.0 && step.reward != 1.0)
            throw BackendError("reward must be 0 or 1 under the outcome scheme",
                               /*retryable=*/true, reply);
        if (step.reward == 1.0 && !step.done)
            throw BackendError("reward 1 is only valid on the terminal step",
                               /*retryable=*/true, reply);
        if (step.next_state.empty())
            throw BackendError("empty next_state", /*retryable=*/true, reply);
        if (step.reasoning.empty())
            throw BackendError("empty reasoning trace", /*retryable=*/true, reply);
        return step;
    }

private:
    std::shared_ptr<ChatClient> client_;
    RemoteModelConfig cfg_;
};

}  // namespace synexp
