#pragma once

#include <memory>
#include <string>
#include <vector>

#include "synexp/chat_client.hpp"
#include "synexp/curriculum/curriculum.hpp"
#include "synexp/datakit/prompts.hpp"

namespace synexp {

struct RemoteGeneratorConfig {
    int max_attempts = 3;
    double temperature = 0.7;
    int max_tokens = 768;
};

/// Task-variation generator backed by a remote LLM. Sends the seed through
/// the variation-generation prompt and parses the numbered VARIATIONS list.
/// Well-formedness of candidates is judged by a caller-supplied predicate
/// (e.g. a task parser for the target environment); with none supplied, any
/// non-empty line passes.
class RemoteTaskGenerator : public TaskGenerator {
public:
    using Validator = std::function<bool(const std::string&)>;

    RemoteTaskGenerator(std::shared_ptr<ChatClient> client, RemoteGeneratorConfig cfg = {},
                        Validator validator = {})
        : client_(std::move(client)), cfg_(cfg), validator_(std::move(validator)) {
        if (!client_) throw ConfigError("RemoteTaskGenerator: null chat client");
    }

    std::vector<std::string> propose(const std::string& seed, int count, Rng& /*rng*/) override {
        const auto user = prompts::render_template(prompts::kVariationGenerationWebUser,
                                                   {{"seed_instructions", seed},
                                                    {"k", std::to_string(count)}});
        const nlohmann::json messages = nlohmann::json::array(
            {{{"role", "system"}, {"content", prompts::kVariationGenerationWebSystem}},
             {{"role", "user"}, {"content", user}}});

        std::string last_error = "no attempts made";
        std::string last_payload;
        for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
            try {
                const auto reply = client_->complete(messages, cfg_.temperature, cfg_.max_tokens);
                auto parsed = parse_variations(reply, count);
                if (!parsed.empty()) return parsed;
                last_error = "reply contained no parseable variations";
                last_payload = reply;
            } catch (const BackendError& e) {
                last_error = e.what();
                last_payload = e.payload;
                if (!e.retryable) break;
            }
        }
        throw BackendError("remote task generator failed after " +
                               std::to_string(cfg_.max_attempts) + " attempts: " + last_error,
                           /*retryable=*/false, last_payload);
    }

    bool well_formed(const std::string& instruction) const override {
        if (instruction.empty()) return false;
        return validator_ ? validator_(instruction) : true;
    }

    /// Lines of the form "  1. some task text" below a VARIATIONS: header.
    static std::vector<std::string> parse_variations(const std::string& reply, int limit) {
        std::vector<std::string> out;
        std::size_t pos = 0;
        bool in_variations = false;
        while (pos < reply.size() && static_cast<int>(out.size()) < limit) {
            auto eol = reply.find('\n', pos);
            if (eol == std::string::npos) eol = reply.size();
            std::string line = reply.substr(pos, eol - pos);
            pos = eol + 1;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            line = line.substr(first);
            if (line.rfind("VARIATIONS", 0) == 0) {
                in_variations = true;
                continue;
            }
            if (line.rfind("SEED", 0) == 0) {
                in_variations = false;
                continue;
            }
            if (!in_variations) continue;
            std::size_t i = 0;
            while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
            if (i == 0 || i >= line.size() || line[i] != '.') continue;
            const auto text_start = line.find_first_not_of(" \t", i + 1);
            if (text_start == std::string::npos) continue;
            std::string text = line.substr(text_start);
            while (!text.empty() && (text.back() == '\r' || text.back() == ' ')) text.pop_back();
            if (!text.empty()) out.push_back(std::move(text));
        }
        return out;
    }

private:
    std::shared_ptr<ChatClient> client_;
    RemoteGeneratorConfig cfg_;
    Validator validator_;
};

}  // namespace synexp
