#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "synexp/datakit/annotate.hpp"
#include "synexp/datakit/prompts.hpp"
#include "synexp/datakit/sft.hpp"
#include "synexp/experience/webshop.hpp"
#include "synexp/rollout/rollout.hpp"

using namespace synexp;

namespace {

Trajectory fixed_trajectory(int n_steps, std::uint64_t seed = 11) {
    Trajectory traj;
    traj.task = "buy any red mug";
    traj.seed = seed;
    for (int i = 0; i < n_steps; ++i) {
        TrajStep step;
        step.state = "state number " + std::to_string(i);
        step.action = "action number " + std::to_string(i);
        step.reasoning = "rule=r" + std::to_string(i);
        step.reward = (i + 1 == n_steps) ? 1.0 : 0.0;
        step.done = (i + 1 == n_steps);
        traj.steps.push_back(step);
    }
    traj.final_state = "terminal state";
    traj.outcome = Outcome::Success;
    return traj;
}

/// In-memory ChatClient driven by a response function.
class StubChatClient : public ChatClient {
public:
    using Responder = std::function<std::string(const nlohmann::json&)>;
    explicit StubChatClient(Responder responder) : responder_(std::move(responder)) {}

    std::string complete(const nlohmann::json& messages, double, int) override {
        ++calls;
        return responder_(messages);
    }

    int calls = 0;

private:
    Responder responder_;
};

std::string plans_reply(int n) {
    nlohmann::json plans = nlohmann::json::array();
    for (int i = 0; i < n; ++i)
        plans.push_back({{"step_id", i}, {"transition_plan", "plan for step " + std::to_string(i)}});
    const nlohmann::json doc = {{"task_tutorial", {{"Overall Plan", "x"}}},
                                {"state_transitions", plans}};
    return "```json\n" + doc.dump() + "\n```";
}

}  // namespace

TEST_CASE("one SFT record per transition with growing history") {
    const auto traj = fixed_trajectory(5);
    ReplayBuffer buffer(100);
    const auto records = build_sft_records({traj}, buffer, 3);
    REQUIRE(records.size() == 5);
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(records[i].history.size() == i);
        CHECK(records[i].demos.empty());  // empty buffer
        CHECK(records[i].state == traj.steps[i].state);
        CHECK(records[i].targets.reasoning == traj.steps[i].reasoning);
    }
    CHECK(records.back().targets.next_state == "terminal state");
    CHECK(records.back().targets.reward == 1.0);
    CHECK(records[0].targets.next_state == traj.steps[1].state);
}

TEST_CASE("records never retrieve from their own trajectory") {
    const auto own = fixed_trajectory(4, 77);
    const auto other = fixed_trajectory(4, 78);
    ReplayBuffer buffer(100);
    append_trajectory(buffer, own);
    append_trajectory(buffer, other);

    const auto records = build_sft_records({own}, buffer, 5);
    for (const auto& record : records) {
        CHECK_FALSE(record.demos.empty());  // the sibling trajectory is retrievable
        for (const auto& demo : record.demos) CHECK(demo.traj_id == 78);
    }
}

TEST_CASE("SFT records round-trip through JSONL losslessly") {
    const auto traj = fixed_trajectory(4, 99);
    const auto sibling = fixed_trajectory(3, 100);
    ReplayBuffer buffer(100);
    append_trajectory(buffer, sibling);
    const auto records = build_sft_records({traj}, buffer, 2);

    const auto path = std::filesystem::temp_directory_path() / "synexp_sft_test.jsonl";
    write_sft_jsonl(path, records);
    const auto loaded = read_sft_jsonl(path);
    REQUIRE(loaded.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) CHECK(loaded[i] == records[i]);
    std::filesystem::remove(path);
}

TEST_CASE("annotation attaches one plan per step") {
    StubChatClient client([](const nlohmann::json&) { return plans_reply(3); });
    const auto result = annotate_reasoning({fixed_trajectory(3)}, client, {3, 1, 0.0, 2048});
    REQUIRE(result.annotated.size() == 1);
    CHECK(result.errors.empty());
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(result.annotated[0].steps[i].reasoning == "plan for step " + std::to_string(i));
}

TEST_CASE("plan count mismatch skips the trajectory with a record-level error") {
    StubChatClient client([](const nlohmann::json&) { return plans_reply(2); });
    AnnotateConfig cfg;
    cfg.max_attempts = 2;
    cfg.parallelism = 1;
    const auto result = annotate_reasoning({fixed_trajectory(3)}, client, cfg);
    CHECK(result.annotated.empty());
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].trajectory_index == 0);
    CHECK(result.errors[0].message.find("does not match step count") != std::string::npos);
    CHECK(client.calls == 2);  // retried up to the limit
}

TEST_CASE("pipeline continues past failing trajectories") {
    StubChatClient client([](const nlohmann::json& messages) {
        const auto user = messages.at(1).at("content").get<std::string>();
        // The 3-step trajectory gets a short reply; the 2-step one is correct.
        return user.find("Step: 2") != std::string::npos ? plans_reply(1) : plans_reply(2);
    });
    const std::vector<Trajectory> batch{fixed_trajectory(2, 5), fixed_trajectory(3, 6)};
    const auto result = annotate_reasoning(batch, client, {2, 2, 0.0, 2048});
    REQUIRE(result.annotated.size() == 1);
    CHECK(result.annotated[0].seed == 5);
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].trajectory_index == 1);
}

TEST_CASE("malformed JSON replies are retried then surfaced") {
    StubChatClient client([](const nlohmann::json&) { return "total garbage, no json here"; });
    const auto result = annotate_reasoning({fixed_trajectory(2)}, client, {3, 1, 0.0, 2048});
    CHECK(result.annotated.empty());
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].payload == "total garbage, no json here");
    CHECK(client.calls == 3);
}

TEST_CASE("annotation prompt golden: step markers and context fields") {
    const auto traj = fixed_trajectory(2);
    const auto messages = annotation_messages(traj);
    REQUIRE(messages.size() == 2);
    const auto user = messages.at(1).at("content").get<std::string>();
    CHECK(user.find("Step: 0, Environment State: state number 0, Action: action number 0") !=
          std::string::npos);
    CHECK(user.find("Step: 1, Environment State: state number 1, Action: action number 1") !=
          std::string::npos);
    CHECK(user.find("Task: buy any red mug") != std::string::npos);
    CHECK(user.find("Success: True") != std::string::npos);
    CHECK(user.find("state_transitions") != std::string::npos);
    CHECK(user.find("exactly one transition plan") != std::string::npos);
}

TEST_CASE("render_template substitutes known keys and keeps unknown ones") {
    const auto out = prompts::render_template("a={a} b={b} keep={unknown}",
                                              {{"a", "1"}, {"b", "two"}});
    CHECK(out == "a=1 b=two keep={unknown}");
}

TEST_CASE("prompt text assets match the embedded templates") {
    const std::filesystem::path assets = std::filesystem::path(SYNEXP_SOURCE_DIR) / "assets" / "prompts";
    const std::vector<std::pair<std::string, const char*>> files{
        {"reasoning_annotation_system.txt", prompts::kReasoningAnnotationSystem},
        {"reasoning_annotation_user.txt", prompts::kReasoningAnnotationUser},
        {"variation_selection_webshop_system.txt", prompts::kVariationSelectionWebshopSystem},
        {"variation_selection_webshop_user.txt", prompts::kVariationSelectionWebshopUser},
        {"variation_selection_embodied_system.txt", prompts::kVariationSelectionEmbodiedSystem},
        {"variation_selection_embodied_user.txt", prompts::kVariationSelectionEmbodiedUser},
        {"variation_generation_web_system.txt", prompts::kVariationGenerationWebSystem},
        {"variation_generation_web_user.txt", prompts::kVariationGenerationWebUser},
        {"variation_selection_web_system.txt", prompts::kVariationSelectionWebSystem},
        {"variation_selection_web_user.txt", prompts::kVariationSelectionWebUser},
        {"transition_judge_user.txt", prompts::kTransitionJudgeUser},
        {"experience_step_system.txt", prompts::kExperienceStepSystem},
        {"experience_step_user.txt", prompts::kExperienceStepUser},
    };
    for (const auto& [name, text] : files) {
        std::ifstream in(assets / name);
        INFO("asset " << name);
        REQUIRE(in.good());
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (!content.empty() && content.back() == '\n') content.pop_back();
        CHECK(content == text);
    }
}
