#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "oracles.hpp"
#include "synexp/replay/buffer.hpp"
#include "synexp/replay/embed.hpp"
#include "synexp/rng.hpp"

using namespace synexp;

namespace {

Transition make_transition(const std::string& state, const std::string& action,
                           std::uint64_t traj = 0) {
    Transition t;
    t.state = state;
    t.action = action;
    t.next_state = state + "'";
    t.reward = 0.0;
    t.task = "task";
    t.traj_id = traj;
    return t;
}

std::string random_text(Rng& rng) {
    static const char* words[] = {"buy",  "red",   "blue",  "shoes", "mug",   "page",
                                  "item", "click", "vase",  "green", "black", "search",
                                  "back", "lamp",  "steel", "glass", "home",  "results"};
    std::string out;
    const int n = 2 + static_cast<int>(rng.uniform_int(6));
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += words[rng.uniform_int(std::size(words))];
    }
    return out;
}

}  // namespace

TEST_CASE("embedding degenerate and self-similarity cases") {
    const auto zero = embed_text("");
    for (double v : zero) CHECK(v == 0.0);

    const auto e = embed_text("buy red shoes");
    CHECK(cosine(e, e) == Catch::Approx(1.0).margin(1e-12));

    double norm = 0.0;
    for (double v : e) norm += v * v;
    CHECK(norm == Catch::Approx(1.0).margin(1e-12));

    CHECK(embed_text("Buy RED shoes") == embed_text("buy red shoes"));
}

TEST_CASE("shared tokens score higher than disjoint tokens") {
    const auto a = embed_text("buy red shoes");
    const auto b = embed_text("buy blue shoes");
    const auto c = embed_text("return library book");
    CHECK(cosine(a, b) > cosine(a, c));
}

TEST_CASE("retrieve_topk basics") {
    ReplayBuffer buffer(100);
    CHECK(buffer.retrieve_topk("anything", "noop", 3).empty());

    buffer.append(make_transition("task buy mug page home", "search mug"));
    buffer.append(make_transition("task buy vase page home", "search vase"));
    buffer.append(make_transition("task buy shoes page home", "search shoes"));

    CHECK(buffer.retrieve_topk("task buy mug page home", "search mug", 0).empty());

    const auto hits = buffer.retrieve_topk("task buy mug page home", "search mug", 2);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].action == "search mug");  // exact query ranks first
}

TEST_CASE("exact cosine ties break toward earlier insertion") {
    ReplayBuffer buffer(100);
    buffer.append(make_transition("red mug", "buy", 1));
    buffer.append(make_transition("red mug", "buy", 2));  // identical text, later insert
    buffer.append(make_transition("unrelated totally", "noop", 3));
    const auto hits = buffer.retrieve_topk("red mug", "buy", 2);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].traj_id == 1);
    CHECK(hits[1].traj_id == 2);
}

TEST_CASE("top-k matches the exhaustive scan oracle on 100 random entries") {
    Rng rng(91);
    std::vector<Transition> entries;
    ReplayBuffer buffer(1000);
    for (int i = 0; i < 100; ++i) {
        auto t = make_transition(random_text(rng), random_text(rng), i);
        entries.push_back(t);
        buffer.append(t);
    }
    for (int k : {1, 3, 5, 10}) {
        const std::string qs = random_text(rng), qa = random_text(rng);
        const auto got = buffer.retrieve_topk(qs, qa, k);
        const auto want = oracle::brute_force_topk(entries, qs, qa, k);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
    }
}

TEST_CASE("FIFO eviction keeps the last capacity entries") {
    ReplayBuffer buffer(10);
    for (int i = 0; i < 15; ++i) buffer.append(make_transition("state " + std::to_string(i), "act", i));
    REQUIRE(buffer.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(buffer.at(i).traj_id == i + 5);
}

TEST_CASE("append then retrieve finds the new entry at rank 1") {
    ReplayBuffer buffer(50);
    for (int i = 0; i < 20; ++i) buffer.append(make_transition("filler entry " + std::to_string(i), "x", i));
    buffer.append(make_transition("very specific query text", "very specific action", 99));
    const auto hits = buffer.retrieve_topk("very specific query text", "very specific action", 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].traj_id == 99);
}

TEST_CASE("exclusion filter skips a trajectory's own transitions") {
    ReplayBuffer buffer(50);
    buffer.append(make_transition("alpha beta", "one", 7));
    buffer.append(make_transition("alpha beta", "one", 8));
    const auto hits = buffer.retrieve_topk("alpha beta", "one", 5, 7);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].traj_id == 8);
}

TEST_CASE("JSONL round trip preserves payloads") {
    Rng rng(17);
    ReplayBuffer buffer(100);
    std::vector<Transition> originals;
    for (int i = 0; i < 25; ++i) {
        Transition t;
        t.state = random_text(rng);
        t.action = random_text(rng);
        t.next_state = random_text(rng);
        t.reward = (i % 5 == 0) ? 1.0 : 0.0;
        t.reasoning = "rule=" + random_text(rng);
        t.task = random_text(rng);
        t.traj_id = rng.next_u64();
        originals.push_back(t);
        buffer.append(t);
    }
    const auto path = std::filesystem::temp_directory_path() / "synexp_buffer_test.jsonl";
    buffer.save_jsonl(path);
    const auto loaded = ReplayBuffer::load_jsonl(path, 100);
    REQUIRE(loaded.size() == originals.size());
    for (std::size_t i = 0; i < originals.size(); ++i) CHECK(loaded.at(i) == originals[i]);
    std::filesystem::remove(path);
}

TEST_CASE("retrieval is permutation-stable apart from exact ties") {
    Rng rng(41);
    std::vector<Transition> entries;
    for (int i = 0; i < 30; ++i) entries.push_back(make_transition(random_text(rng), random_text(rng), i));

    ReplayBuffer forward(100), reversed(100);
    for (const auto& t : entries) forward.append(t);
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) reversed.append(*it);

    const std::string qs = "buy red mug", qa = "search mug";
    const auto a = forward.retrieve_topk(qs, qa, 5);
    const auto b = reversed.retrieve_topk(qs, qa, 5);
    const auto query = embed_text(retrieval_key(qs, qa));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double sa = cosine(query, embed_text(retrieval_key(a[i].state, a[i].action)));
        const double sb = cosine(query, embed_text(retrieval_key(b[i].state, b[i].action)));
        CHECK(sa == Catch::Approx(sb).margin(1e-15));  // scores agree; ties may reorder
    }
}
