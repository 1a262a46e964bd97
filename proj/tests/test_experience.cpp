#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "synexp/experience/tabular.hpp"
#include "synexp/experience/webshop.hpp"

using namespace synexp;

TEST_CASE("perturbed kernel rows remain valid distributions and TV is bounded") {
    Rng rng(3);
    const auto base = TabularMdp::random(6, 3, 0.9, 1.0, rng);
    for (double eps : {0.0, 0.05, 0.2, 0.6, 1.0}) {
        const auto model = TabularPerturbedModel::make(base, eps, 0.0, 42);
        const auto [eps_r, eps_p] = measure_model_error(base, model);
        CHECK(eps_r == 0.0);
        CHECK(eps_p <= eps + 1e-12);
    }
}

TEST_CASE("measured eps_p is monotone in the target over a grid") {
    Rng rng(5);
    const auto base = TabularMdp::random(5, 2, 0.85, 1.0, rng);
    double prev = -1.0;
    for (double eps : {0.0, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8}) {
        const auto model = TabularPerturbedModel::make(base, eps, 0.0, 7);
        const auto [_, eps_p] = measure_model_error(base, model);
        CHECK(eps_p >= prev - 1e-12);
        prev = eps_p;
    }
}

TEST_CASE("identical MDPs measure (0, 0)") {
    Rng rng(9);
    const auto base = TabularMdp::random(4, 2, 0.9, 1.0, rng);
    const auto model = TabularPerturbedModel::make(base, 0.0, 0.0, 1);
    const auto [eps_r, eps_p] = measure_model_error(base, model);
    CHECK(eps_r == 0.0);
    CHECK(eps_p == 0.0);
}

TEST_CASE("point-mass row mixed with uniform over 4 states gives TV 0.075") {
    // P has a deterministic row; P_hat = 0.9 P + 0.1 U. Expanding the TV sum:
    // the point-mass entry moves by 0.1 (1 - 1/4) and each of the other three
    // entries by 0.1/4, so TV = 0.5 (0.075 + 3 * 0.025) = 0.075.
    std::vector<double> kernel;
    const int n = 4;
    for (int s = 0; s < n; ++s) {
        std::vector<double> row(n, 0.0);
        row[(s + 1) % n] = 1.0;
        kernel.insert(kernel.end(), row.begin(), row.end());
    }
    const TabularMdp base(n, 1, kernel, std::vector<double>(n, 0.5), 0.9,
                          {0.25, 0.25, 0.25, 0.25}, 1.0);
    const auto model = TabularPerturbedModel::make(base, 0.1, 0.0, 1);
    const auto [eps_r, eps_p] = measure_model_error(base, model);
    CHECK(eps_r == 0.0);
    CHECK(eps_p == Catch::Approx(0.1 * (1.0 - 0.25)).margin(1e-12));
}

TEST_CASE("constant reward shift with no clamping measures eps_r exactly") {
    Rng rng(11);
    const auto base = TabularMdp::random(4, 2, 0.9, 1.0, rng);
    // Shift all rewards by +0.05 after rescaling them into [0.1, 0.9] so the
    // clamp never engages.
    std::vector<double> scaled(base.rewards());
    for (double& r : scaled) r = 0.1 + 0.8 * r;
    const TabularMdp real(4, 2, base.kernel(), scaled, base.gamma(), base.rho0(), 1.0);
    std::vector<double> shifted(scaled);
    for (double& r : shifted) r += 0.05;
    const TabularMdp synth(4, 2, base.kernel(), shifted, base.gamma(), base.rho0(), 1.0);
    const auto model = TabularPerturbedModel::from_mdps(real, synth);
    const auto [eps_r, eps_p] = measure_model_error(real, model);
    CHECK(eps_r == Catch::Approx(0.05).margin(1e-12));
    CHECK(eps_p == 0.0);
}

TEST_CASE("generated reward noise respects the target bound and the clamp") {
    Rng rng(13);
    const auto base = TabularMdp::random(6, 3, 0.9, 1.0, rng);
    const auto model = TabularPerturbedModel::make(base, 0.0, 0.3, 99);
    const auto [eps_r, _] = measure_model_error(base, model);
    CHECK(eps_r <= 0.3 + 1e-12);
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 3; ++a) {
            CHECK(model.perturbed.r(s, a) >= 0.0);
            CHECK(model.perturbed.r(s, a) <= base.r_max());
        }
}

TEST_CASE("tabular backend: empirical transition frequencies match the kernel") {
    Rng rng(21);
    const auto base = TabularMdp::random(5, 2, 0.9, 1.0, rng);
    const TabularExperienceModel backend(
        TabularPerturbedModel::make(base, 0.0, 0.0, 1).perturbed);

    const int n_steps = 100000;
    const int s = 2, a = 1;
    std::vector<int> counts(5, 0);
    ExperienceContext ctx;
    for (int i = 0; i < n_steps; ++i) {
        Rng step_rng(stream_seed(777, "chi", i));
        const auto out = backend.step(ctx, TabularExperienceModel::state_text(s),
                                      TabularExperienceModel::action_text(a), step_rng);
        counts[backend.parse_state(out.next_state)]++;
    }
    for (int s2 = 0; s2 < 5; ++s2) {
        const double p = base.p(s, a, s2);
        const double freq = counts[s2] / double(n_steps);
        const double sigma = std::sqrt(p * (1.0 - p) / n_steps);
        INFO("s2 " << s2 << " p " << p << " freq " << freq);
        CHECK(std::abs(freq - p) <= 3.0 * sigma + 1e-9);
    }
}

TEST_CASE("invalid actions transition to the failure state with zero reward") {
    Rng rng(1);
    const auto base = TabularMdp::random(3, 2, 0.9, 1.0, rng);
    const TabularExperienceModel tab(base);
    ExperienceContext ctx;
    Rng step_rng(5);
    const auto out = tab.step(ctx, "s0", "noop-invalid", step_rng);
    CHECK(out.next_state == TabularExperienceModel::kFailureState);
    CHECK(out.reward == 0.0);
    CHECK(out.done);

    const webshop::ScriptedWebShopModel shop;
    const auto home = shop.reset("buy any red mug", step_rng);
    const auto bad = shop.step(ctx, home, "noop-invalid", step_rng);
    CHECK(bad.next_state.find("page: failure") != std::string::npos);
    CHECK(bad.reward == 0.0);
    CHECK(bad.done);
}

TEST_CASE("scripted webshop: clicking the matching item and buying succeeds") {
    const webshop::ScriptedWebShopModel shop;
    Rng rng(2);
    ExperienceContext ctx;
    ctx.task = "buy any red mug";

    const auto home = shop.reset(ctx.task, rng);
    CHECK(home.find("page: home") != std::string::npos);

    const auto s1 = shop.step(ctx, home, "search mug", rng);
    CHECK(s1.next_state.find("page: results mug") != std::string::npos);
    CHECK(s1.reasoning.find("rule=search") == 0);
    CHECK_FALSE(s1.done);

    // item-1 is the red ceramic mug in the standard catalog
    const auto s2 = shop.step(ctx, s1.next_state, "click item-1", rng);
    CHECK(s2.next_state.find("page: item item-1") != std::string::npos);

    const auto s3 = shop.step(ctx, s2.next_state, "buy", rng);
    CHECK(s3.next_state.find("page: purchased") != std::string::npos);
    CHECK(s3.reward == 1.0);
    CHECK(s3.done);
}

TEST_CASE("scripted webshop: buying a mismatching item ends without reward") {
    const webshop::ScriptedWebShopModel shop;
    Rng rng(2);
    ExperienceContext ctx;
    ctx.task = "buy any red mug";
    const auto home = shop.reset(ctx.task, rng);
    const auto s1 = shop.step(ctx, home, "search mug", rng);
    const auto s2 = shop.step(ctx, s1.next_state, "click item-2", rng);  // blue mug
    const auto s3 = shop.step(ctx, s2.next_state, "buy", rng);
    CHECK(s3.reward == 0.0);
    CHECK(s3.done);
    CHECK(s3.reasoning.find("rule=purchase-mismatch") == 0);
}

TEST_CASE("scripted webshop steps are deterministic") {
    const webshop::ScriptedWebShopModel shop;
    ExperienceContext ctx;
    ctx.task = "buy any glass vase";
    for (int i = 0; i < 3; ++i) {
        Rng rng(stream_seed(1, "det", i));
        const auto home = shop.reset(ctx.task, rng);
        const auto s1 = shop.step(ctx, home, "search vase", rng);
        static std::string first;
        if (i == 0)
            first = s1.next_state + "|" + s1.reasoning;
        else
            CHECK(first == s1.next_state + "|" + s1.reasoning);
    }
}

TEST_CASE("task grammar parses and renders consistently") {
    using namespace webshop;
    const auto spec = parse_task("buy any red ceramic mug under $20");
    REQUIRE(spec.has_value());
    CHECK(spec->noun == "mug");
    CHECK(spec->color == "red");
    CHECK(spec->material == "ceramic");
    CHECK(spec->max_price == 20);
    CHECK(render_task(*spec) == "buy any red ceramic mug under $20");

    CHECK(parse_task("buy any mug").has_value());
    CHECK(parse_task("buy any blue vase").has_value());
    CHECK_FALSE(parse_task("sell any mug").has_value());
    CHECK_FALSE(parse_task("buy any").has_value());
    CHECK_FALSE(parse_task("buy any red").has_value());
    CHECK_FALSE(parse_task("buy any mug under twenty").has_value());

    const auto catalog = Catalog::standard();
    CHECK(task_feasible(catalog, *parse_task("buy any red mug")));
    CHECK_FALSE(task_feasible(catalog, *parse_task("buy any green mug")));
    CHECK(valid_instruction(catalog, "buy any steel lamp"));
    CHECK_FALSE(valid_instruction(catalog, "buy any silver vase"));
}

TEST_CASE("admissible action lists are deterministic and page-appropriate") {
    const webshop::ScriptedWebShopModel shop;
    Rng rng(4);
    const auto home = shop.reset("buy any red mug", rng);
    const auto home_actions = shop.actions(home);
    REQUIRE(home_actions.size() == 4);  // four categories in the standard catalog
    CHECK(home_actions[0] == "search mug");

    ExperienceContext ctx;
    const auto results = shop.step(ctx, home, "search mug", rng).next_state;
    const auto result_actions = shop.actions(results);
    REQUIRE(result_actions.size() == 4);  // three mugs plus back
    CHECK(result_actions.back() == "back");

    const auto item = shop.step(ctx, results, "click item-1", rng).next_state;
    CHECK(shop.actions(item) == std::vector<std::string>{"buy", "back"});

    const auto done = shop.step(ctx, item, "buy", rng).next_state;
    CHECK(shop.actions(done).empty());
}

TEST_CASE("oracle action solves feasible tasks in three steps") {
    const webshop::ScriptedWebShopModel shop;
    Rng rng(6);
    ExperienceContext ctx;
    for (const std::string task :
         {"buy any red mug", "buy any glass vase", "buy any leather shoes under $50",
          "buy any steel lamp", "buy any mug under $10"}) {
        ctx.task = task;
        std::string state = shop.reset(task, rng);
        double total = 0.0;
        bool done = false;
        for (int t = 0; t < 6 && !done; ++t) {
            const auto action = shop.oracle_action(state);
            const auto out = shop.step(ctx, state, action, rng);
            total += out.reward;
            done = out.done;
            state = out.next_state;
        }
        INFO("task: " << task);
        CHECK(done);
        CHECK(total == 1.0);
    }
}
