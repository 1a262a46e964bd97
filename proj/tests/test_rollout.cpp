#include <catch2/catch_amalgamated.hpp>

#include "synexp/experience/tabular.hpp"
#include "synexp/experience/webshop.hpp"
#include "synexp/rollout/rollout.hpp"

using namespace synexp;

namespace {

const webshop::ScriptedWebShopModel& shop() {
    static const webshop::ScriptedWebShopModel model;
    return model;
}

/// Policy that tracks the scripted environment's reference solver.
TextPolicy oracle_policy_for(const std::vector<std::string>& tasks, int max_turns = 8) {
    // Follow the oracle through each task once, pinning large logits on its
    // choices so both sampling and greedy play reproduce it.
    TextPolicy policy;
    Rng rng(0);
    for (const auto& task : tasks) {
        std::string state = shop().reset(task, rng);
        for (int t = 0; t < max_turns; ++t) {
            const auto admissible = shop().actions(state);
            if (admissible.empty()) break;
            const auto action = shop().oracle_action(state);
            policy.ensure_row(state, admissible);
            policy.rows()[state][action] = 25.0;
            ExperienceContext ctx;
            const auto out = shop().step(ctx, state, action, rng);
            if (out.done) break;
            state = out.next_state;
        }
    }
    return policy;
}

}  // namespace

TEST_CASE("TextPolicy sampling, greedy and log probabilities") {
    TextPolicy policy;
    const std::vector<std::string> admissible{"a", "b", "c"};
    Rng rng(3);

    // Unknown state behaves uniformly.
    const auto [action, logp] = policy.sample("fresh state", admissible, rng);
    CHECK(logp == Catch::Approx(std::log(1.0 / 3.0)).margin(1e-12));

    policy.ensure_row("s", admissible);
    policy.rows()["s"]["b"] = 2.0;
    const auto [g, glp] = policy.greedy("s", admissible);
    CHECK(g == "b");
    CHECK(policy.log_prob("s", admissible, "b") == Catch::Approx(glp).margin(1e-12));

    // Greedy tie-break: first admissible among equals.
    const auto [g2, g2lp] = policy.greedy("fresh state", admissible);
    CHECK(g2 == "a");
    CHECK_THROWS_AS(policy.log_prob("s", admissible, "zzz"), ConfigError);
}

TEST_CASE("TextPolicy serialization is canonical and lossless") {
    TextPolicy policy;
    policy.ensure_row("zeta", {"x", "y"});
    policy.ensure_row("alpha", {"c", "a"});
    policy.rows()["zeta"]["x"] = 1.25;

    TextPolicy other;  // same rows, different discovery order
    other.ensure_row("alpha", {"a", "c"});
    other.ensure_row("zeta", {"y", "x"});
    other.rows()["zeta"]["x"] = 1.25;

    CHECK(policy.to_json().dump() == other.to_json().dump());
    const auto restored = TextPolicy::from_json(policy.to_json());
    CHECK(restored.to_json().dump() == policy.to_json().dump());
}

TEST_CASE("max_turns clamps the episode to one step") {
    TextPolicy policy;
    ReplayBuffer buffer(100);
    const auto traj = run_episode(policy, shop(), buffer, "buy any red mug", 1, 3, 42);
    CHECK(traj.steps.size() == 1);
    CHECK(traj.outcome == Outcome::Horizon);
    CHECK(buffer.size() == 1);
}

TEST_CASE("episodes are deterministic given the seed") {
    TextPolicy policy;
    ReplayBuffer a(100), b(100);
    const auto t1 = run_episode(policy, shop(), a, "buy any red mug", 6, 3, 1234);
    const auto t2 = run_episode(policy, shop(), b, "buy any red mug", 6, 3, 1234);
    CHECK(t1 == t2);
    CHECK(t1.to_json().dump() == t2.to_json().dump());

    const auto t3 = run_episode(policy, shop(), a, "buy any red mug", 6, 3, 1235);
    CHECK_FALSE(t1 == t3);  // different stream
}

TEST_CASE("a near-deterministic policy reproduces the same trajectory bytes") {
    const auto policy = oracle_policy_for({"buy any red mug"});
    ReplayBuffer a(100), b(100);
    const auto t1 = run_episode(policy, shop(), a, "buy any red mug", 6, 3, 99);
    const auto t2 = run_episode(policy, shop(), b, "buy any red mug", 6, 3, 99);
    CHECK(t1.to_json().dump() == t2.to_json().dump());
}

TEST_CASE("oracle policy solves the shop task with total reward 1") {
    const auto policy = oracle_policy_for({"buy any red mug"});
    ReplayBuffer buffer(100);
    const auto traj =
        run_episode(policy, shop(), buffer, "buy any red mug", 6, 3, 7, {/*greedy=*/true});
    CHECK(traj.outcome == Outcome::Success);
    CHECK(traj.total_reward() == 1.0);
    CHECK(traj.steps.size() == 3);
    // only the final step carries done and the unit reward
    for (std::size_t i = 0; i + 1 < traj.steps.size(); ++i) {
        CHECK_FALSE(traj.steps[i].done);
        CHECK(traj.steps[i].reward == 0.0);
    }
    CHECK(traj.steps.back().done);
}

TEST_CASE("outcome scheme holds across sampled trajectories") {
    TextPolicy policy;
    ReplayBuffer buffer(10000);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto traj = run_episode(policy, shop(), buffer, "buy any blue mug", 8, 3, seed);
        const double total = traj.total_reward();
        CHECK((total == 0.0 || total == 1.0));
        for (std::size_t i = 0; i < traj.steps.size(); ++i) {
            if (traj.steps[i].reward == 1.0) {
                CHECK(i + 1 == traj.steps.size());
                CHECK(traj.steps[i].done);
                CHECK(traj.outcome == Outcome::Success);
            }
            if (i + 1 < traj.steps.size()) CHECK_FALSE(traj.steps[i].done);
        }
    }
}

TEST_CASE("collect_group with n=1 equals run_episode with the same seed") {
    TextPolicy policy;
    ReplayBuffer a(100), b(100);
    const auto group = collect_group(policy, shop(), a, "buy any red mug", 1, 6, 3, 500);
    const auto single = run_episode(policy, shop(), b, "buy any red mug", 6, 3, 500);
    REQUIRE(group.size() == 1);
    CHECK(group[0] == single);
}

TEST_CASE("collect_group is invariant to the worker count") {
    TextPolicy policy;
    std::vector<std::vector<Trajectory>> results;
    std::vector<std::string> buffer_dumps;
    for (int workers : {1, 2, 4}) {
        ReplayBuffer buffer(1000);
        results.push_back(
            collect_group(policy, shop(), buffer, "buy any glass vase", 8, 6, 3, 900, workers));
        std::string dump;
        for (std::size_t i = 0; i < buffer.size(); ++i) dump += buffer.at(i).to_json().dump();
        buffer_dumps.push_back(dump);
    }
    CHECK(results[0] == results[1]);
    CHECK(results[0] == results[2]);
    CHECK(buffer_dumps[0] == buffer_dumps[1]);
    CHECK(buffer_dumps[0] == buffer_dumps[2]);
}

TEST_CASE("collect_group grows the buffer by the total number of steps") {
    TextPolicy policy;
    ReplayBuffer buffer(10000);
    const auto group = collect_group(policy, shop(), buffer, "buy any red mug", 8, 6, 3, 321, 2);
    std::size_t total_steps = 0;
    for (const auto& traj : group) total_steps += traj.steps.size();
    CHECK(buffer.size() == total_steps);

    // seeds are base + offset, results ordered by offset
    for (std::size_t i = 0; i < group.size(); ++i) CHECK(group[i].seed == 321 + i);
}

TEST_CASE("group rewards from a mixed-success policy feed task_value") {
    // An untrained policy on an easy task gives a mix of successes and
    // failures; the group outcome rewards land strictly inside (0, 0.25].
    TextPolicy policy;
    ReplayBuffer buffer(10000);
    const auto group = collect_group(policy, shop(), buffer, "buy any mug", 8, 8, 3, 4000);
    std::vector<double> rewards;
    for (const auto& traj : group) rewards.push_back(traj.total_reward());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= rewards.size();
    INFO("group mean " << mean);
    CHECK(rewards.size() == 8);
}

TEST_CASE("backend errors carry the partial trajectory") {
    TextPolicy policy;
    ReplayBuffer buffer(100);
    // Unparseable task violates the scripted backend's reset contract.
    CHECK_THROWS_AS(run_episode(policy, shop(), buffer, "dance wildly", 4, 3, 1), EpisodeError);
    try {
        run_episode(policy, shop(), buffer, "dance wildly", 4, 3, 1);
    } catch (const EpisodeError& e) {
        CHECK(e.partial.steps.empty());
        CHECK(std::string(e.what()).find("reset failed") != std::string::npos);
    }
}

TEST_CASE("trajectory JSON round-trips") {
    const auto policy = oracle_policy_for({"buy any steel lamp"});
    ReplayBuffer buffer(100);
    const auto traj = run_episode(policy, shop(), buffer, "buy any steel lamp", 6, 3, 77);
    const auto back = Trajectory::from_json(traj.to_json());
    CHECK(back == traj);
}

TEST_CASE("seed_buffer counts trajectories times steps") {
    const auto policy = oracle_policy_for({"buy any red mug"});
    ReplayBuffer scratch(1000);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 10; ++i) {
        // horizon-limited to exactly 5 steps: wander without buying
        TextPolicy wander;
        trajs.push_back(run_episode(wander, shop(), scratch, "buy any mug under $1", 5, 0, 6000 + i,
                                    {false, false}));
    }
    std::size_t expect = 0;
    for (const auto& t : trajs) expect += t.steps.size();
    ReplayBuffer buffer(10000);
    seed_buffer(buffer, trajs);
    CHECK(buffer.size() == expect);
}
