#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "synexp/errors.hpp"
#include "synexp/jsonl.hpp"
#include "synexp/replay/embed.hpp"

namespace synexp {

/// One stored experience step. traj_id identifies the episode that produced
/// the transition so demo retrieval can exclude a trajectory's own steps.
struct Transition {
    std::string state;
    std::string action;
    std::string next_state;
    double reward = 0.0;
    std::string reasoning;
    std::string task;
    std::uint64_t traj_id = 0;

    bool operator==(const Transition&) const = default;

    nlohmann::json to_json() const {
        return {{"state", state},         {"action", action}, {"next_state", next_state},
                {"reward", reward},       {"reasoning", reasoning}, {"task", task},
                {"traj_id", traj_id}};
    }

    static Transition from_json(const nlohmann::json& j) {
        Transition t;
        t.state = j.at("state").get<std::string>();
        t.action = j.at("action").get<std::string>();
        t.next_state = j.at("next_state").get<std::string>();
        t.reward = j.at("reward").get<double>();
        t.reasoning = j.value("reasoning", std::string{});
        t.task = j.value("task", std::string{});
        t.traj_id = j.value("traj_id", std::uint64_t{0});
        return t;
    }
};

/// Retrieval key: fixed concatenation of the state and action texts.
inline std::string retrieval_key(std::string_view state, std::string_view action) {
    std::string key;
    key.reserve(state.size() + action.size() + 4);
    key.append(state);
    key.append(" // ");
    key.append(action);
    return key;
}

/// Embedding-indexed experience store with FIFO eviction. Single writer, many
/// concurrent readers; a reader never observes a partially inserted entry.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 50000) : capacity_(capacity) {}

    ReplayBuffer(const ReplayBuffer& other) {
        std::shared_lock lock(other.mutex_);
        capacity_ = other.capacity_;
        entries_ = other.entries_;
        next_id_ = other.next_id_;
    }

    ReplayBuffer& operator=(const ReplayBuffer& other) {
        if (this != &other) {
            std::shared_lock other_lock(other.mutex_);
            std::unique_lock my_lock(mutex_);
            capacity_ = other.capacity_;
            entries_ = other.entries_;
            next_id_ = other.next_id_;
        }
        return *this;
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }
    std::size_t capacity() const { return capacity_; }

    void append(Transition t) {
        auto emb = embed_text_sparse(retrieval_key(t.state, t.action));
        std::unique_lock lock(mutex_);
        entries_.push_back(Entry{std::move(t), std::move(emb), next_id_++});
        while (entries_.size() > capacity_) entries_.pop_front();
    }

    /// Stored transition at position i (oldest first). Test/inspection hook.
    Transition at(std::size_t i) const {
        std::shared_lock lock(mutex_);
        return entries_.at(i).transition;
    }

    /// Top-k most similar stored transitions for the (state, action) query,
    /// by cosine over the hashed embedding, descending. Exact ties resolve to
    /// the earlier-inserted entry. Entries whose traj_id equals exclude_traj
    /// are skipped.
    std::vector<Transition> retrieve_topk(std::string_view state, std::string_view action, int k,
                                          std::optional<std::uint64_t> exclude_traj = std::nullopt) const {
        if (k <= 0) return {};
        const auto query = embed_text_sparse(retrieval_key(state, action));

        struct Scored {
            double score;
            std::uint64_t insert_id;
            const Transition* t;
        };
        std::vector<Scored> scored;
        std::shared_lock lock(mutex_);
        scored.reserve(entries_.size());
        for (const auto& e : entries_) {
            if (exclude_traj && e.transition.traj_id == *exclude_traj) continue;
            scored.push_back(Scored{sparse_cosine(query, e.embedding), e.insert_id, &e.transition});
        }
        const std::size_t take = std::min<std::size_t>(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                          [](const Scored& a, const Scored& b) {
                              if (a.score != b.score) return a.score > b.score;
                              return a.insert_id < b.insert_id;
                          });
        std::vector<Transition> out;
        out.reserve(take);
        for (std::size_t i = 0; i < take; ++i) out.push_back(*scored[i].t);
        return out;
    }

    /// JSONL persistence. Embeddings are recomputed on load so the on-disk
    /// format is independent of the embedder.
    void save_jsonl(const std::filesystem::path& path) const {
        std::vector<nlohmann::json> rows;
        {
            std::shared_lock lock(mutex_);
            rows.reserve(entries_.size());
            for (const auto& e : entries_) rows.push_back(e.transition.to_json());
        }
        write_jsonl(path, rows);
    }

    static ReplayBuffer load_jsonl(const std::filesystem::path& path, std::size_t capacity = 50000) {
        ReplayBuffer buffer(capacity);
        for (const auto& row : read_jsonl(path)) buffer.append(Transition::from_json(row));
        return buffer;
    }

private:
    struct Entry {
        Transition transition;
        SparseVec embedding;
        std::uint64_t insert_id;
    };

    std::size_t capacity_;
    std::deque<Entry> entries_;
    std::uint64_t next_id_ = 0;
    mutable std::shared_mutex mutex_;
};

}  // namespace synexp
