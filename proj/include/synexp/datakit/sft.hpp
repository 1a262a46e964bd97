#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "synexp/replay/buffer.hpp"
#include "synexp/rollout/rollout.hpp"

namespace synexp {

/// One supervised training example for the experience model: the full
/// conditioning set of a step (state, action, history, retrieved demos, task)
/// with the targets the model must produce (reasoning trace, next state,
/// reward).
struct SftRecord {
    std::string task;
    std::string state;
    std::string action;
    std::vector<std::pair<std::string, std::string>> history;
    std::vector<Transition> demos;
    struct Targets {
        std::string reasoning;
        std::string next_state;
        double reward = 0.0;
        bool operator==(const Targets&) const = default;
    } targets;

    bool operator==(const SftRecord&) const = default;

    nlohmann::json to_json() const {
        nlohmann::json hist = nlohmann::json::array();
        for (const auto& [s, a] : history) hist.push_back({{"state", s}, {"action", a}});
        nlohmann::json demo_rows = nlohmann::json::array();
        for (const auto& d : demos) demo_rows.push_back(d.to_json());
        return {{"task", task},
                {"state", state},
                {"action", action},
                {"history", hist},
                {"demos", demo_rows},
                {"targets",
                 {{"reasoning", targets.reasoning},
                  {"next_state", targets.next_state},
                  {"reward", targets.reward}}}};
    }

    static SftRecord from_json(const nlohmann::json& j) {
        SftRecord r;
        r.task = j.at("task").get<std::string>();
        r.state = j.at("state").get<std::string>();
        r.action = j.at("action").get<std::string>();
        for (const auto& h : j.at("history"))
            r.history.emplace_back(h.at("state").get<std::string>(),
                                   h.at("action").get<std::string>());
        for (const auto& d : j.at("demos")) r.demos.push_back(Transition::from_json(d));
        const auto& t = j.at("targets");
        r.targets.reasoning = t.at("reasoning").get<std::string>();
        r.targets.next_state = t.at("next_state").get<std::string>();
        r.targets.reward = t.at("reward").get<double>();
        return r;
    }
};

/// One record per transition. Demos come from the buffer with the
/// transition's own trajectory excluded, so a record never retrieves itself
/// or its episode siblings as demonstrations.
inline std::vector<SftRecord> build_sft_records(const std::vector<Trajectory>& trajectories,
                                                const ReplayBuffer& buffer, int k) {
    std::vector<SftRecord> records;
    for (const auto& traj : trajectories) {
        const auto transitions = trajectory_transitions(traj);
        std::vector<std::pair<std::string, std::string>> history;
        for (std::size_t i = 0; i < traj.steps.size(); ++i) {
            const auto& step = traj.steps[i];
            SftRecord record;
            record.task = traj.task;
            record.state = step.state;
            record.action = step.action;
            record.history = history;
            record.demos = buffer.retrieve_topk(step.state, step.action, k, traj.seed);
            record.targets.reasoning = step.reasoning;
            record.targets.next_state = transitions[i].next_state;
            record.targets.reward = step.reward;
            records.push_back(std::move(record));
            history.emplace_back(step.state, step.action);
        }
    }
    return records;
}

inline void write_sft_jsonl(const std::filesystem::path& path,
                            const std::vector<SftRecord>& records) {
    std::vector<nlohmann::json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(r.to_json());
    write_jsonl(path, rows);
}

inline std::vector<SftRecord> read_sft_jsonl(const std::filesystem::path& path) {
    std::vector<SftRecord> records;
    for (const auto& row : read_jsonl(path)) records.push_back(SftRecord::from_json(row));
    return records;
}

}  // namespace synexp
