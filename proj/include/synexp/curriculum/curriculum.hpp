#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "synexp/errors.hpp"
#include "synexp/experience/webshop.hpp"
#include "synexp/replay/embed.hpp"
#include "synexp/rng.hpp"

namespace synexp {

/// Group reward entropy of a task: population variance of the outcome rewards
/// observed for it. Zero means the group was all-success or all-failure;
/// the maximum 0.25 (for binary rewards) means an even success/failure split.
inline double task_value(std::span<const double> rewards) {
    if (rewards.empty()) throw ConfigError("task_value: undefined for an empty reward list");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    double acc = 0.0;
    for (double r : rewards) acc += (r - mean) * (r - mean);
    return acc / static_cast<double>(rewards.size());
}

struct TaskOrigin {
    enum class Kind { Seed, Generated };
    Kind kind = Kind::Seed;
    std::string parent;  // generating instruction, empty for seeds
    int depth = 0;       // seeds are depth 0

    nlohmann::json to_json() const {
        return {{"kind", kind == Kind::Seed ? "seed" : "generated"},
                {"parent", parent},
                {"depth", depth}};
    }
    static TaskOrigin from_json(const nlohmann::json& j) {
        TaskOrigin o;
        o.kind = j.at("kind").get<std::string>() == "seed" ? Kind::Seed : Kind::Generated;
        o.parent = j.value("parent", std::string{});
        o.depth = j.value("depth", 0);
        return o;
    }
};

/// A task instruction plus the rolling reward statistics that drive the
/// curriculum. `value` caches the variance of `group_rewards`.
struct TaskRecord {
    std::string instruction;
    TaskOrigin origin;
    std::vector<double> group_rewards;
    double value = 0.0;
    long last_eval = -1;  // iteration index of the most recent rollout group

    static constexpr std::size_t kRewardWindow = 64;

    void record_group(std::span<const double> rewards, long iteration) {
        group_rewards.insert(group_rewards.end(), rewards.begin(), rewards.end());
        if (group_rewards.size() > kRewardWindow)
            group_rewards.erase(group_rewards.begin(),
                                group_rewards.end() - static_cast<long>(kRewardWindow));
        value = task_value(group_rewards);
        last_eval = iteration;
    }

    nlohmann::json to_json() const {
        return {{"instruction", instruction}, {"origin", origin.to_json()},
                {"group_rewards", group_rewards}, {"value", value},
                {"last_eval", last_eval}};
    }
    static TaskRecord from_json(const nlohmann::json& j) {
        TaskRecord r;
        r.instruction = j.at("instruction").get<std::string>();
        r.origin = TaskOrigin::from_json(j.at("origin"));
        r.group_rewards = j.value("group_rewards", std::vector<double>{});
        r.value = j.value("value", 0.0);
        r.last_eval = j.value("last_eval", -1L);
        return r;
    }
};

/// Ranks feasible-yet-challenging tasks: strictly positive variance only
/// (all-success and all-failure tasks are never seeds), highest value first,
/// ties to the most recently evaluated record, then lexicographic
/// instruction. Records with fewer than min_rewards observations are not yet
/// eligible. Returns up to m records; empty when nothing qualifies.
inline std::vector<TaskRecord> select_seed_tasks(const std::vector<TaskRecord>& records, int m,
                                                 int min_rewards = 4) {
    if (m < 1) throw ConfigError("select_seed_tasks: m must be at least 1");
    std::vector<const TaskRecord*> eligible;
    for (const auto& r : records) {
        if (r.value > 0.0 && static_cast<int>(r.group_rewards.size()) >= min_rewards)
            eligible.push_back(&r);
    }
    std::sort(eligible.begin(), eligible.end(), [](const TaskRecord* a, const TaskRecord* b) {
        if (a->value != b->value) return a->value > b->value;
        if (a->last_eval != b->last_eval) return a->last_eval > b->last_eval;
        return a->instruction < b->instruction;
    });
    std::vector<TaskRecord> out;
    for (std::size_t i = 0; i < eligible.size() && static_cast<int>(i) < m; ++i)
        out.push_back(*eligible[i]);
    return out;
}

/// Pluggable task-variation generator.
class TaskGenerator {
public:
    virtual ~TaskGenerator() = default;
    /// Candidate variations of a seed instruction. May return duplicates or
    /// junk; callers filter through well_formed().
    virtual std::vector<std::string> propose(const std::string& seed, int count, Rng& rng) = 0;
    /// Well-formedness / feasibility check used to discard malformed output.
    virtual bool well_formed(const std::string& instruction) const = 0;
};

/// Rule-based variation generator for the scripted shop. Mutations keep the
/// purchase action type: swap the target attribute to one of a sibling item,
/// add an attribute constraint, or add a price cap (which hides the deciding
/// attribute on a deeper page and so lengthens the required episode).
class ScriptedTaskGenerator : public TaskGenerator {
public:
    explicit ScriptedTaskGenerator(webshop::Catalog catalog) : catalog_(std::move(catalog)) {}

    std::vector<std::string> propose(const std::string& seed, int count, Rng& rng) override {
        const auto spec = webshop::parse_task(seed);
        std::vector<std::string> out;
        if (!spec) return out;
        int attempts = 0;
        while (static_cast<int>(out.size()) < count && attempts < count * 12) {
            ++attempts;
            auto candidate = mutate(*spec, rng);
            if (!candidate) continue;
            const auto text = webshop::render_task(*candidate);
            if (text == seed) continue;
            if (std::find(out.begin(), out.end(), text) != out.end()) continue;
            out.push_back(text);
        }
        return out;
    }

    bool well_formed(const std::string& instruction) const override {
        return webshop::valid_instruction(catalog_, instruction);
    }

private:
    std::optional<webshop::TaskSpec> mutate(const webshop::TaskSpec& spec, Rng& rng) {
        // Mutate around an item that could satisfy a variation: pick any
        // catalog item with the same noun, or a different noun entirely when
        // swapping the target.
        webshop::TaskSpec next = spec;
        const int kind = static_cast<int>(rng.uniform_int(3));
        if (kind == 0) {
            // Swap target: keep the purchase shape, move to another item.
            const auto& items = catalog_.items;
            const auto& item = items[rng.uniform_int(items.size())];
            next.noun = item.noun;
            next.color = item.color;
            next.material.reset();
            next.max_price.reset();
        } else if (kind == 1) {
            // Add an attribute constraint consistent with some catalog item.
            const auto candidates = matching_items(spec);
            if (candidates.empty()) return std::nullopt;
            const auto* item = candidates[rng.uniform_int(candidates.size())];
            next.color = item->color;
            next.material = item->material;
        } else {
            // Price cap slightly above a matching item keeps the task feasible
            // but forces price inspection on the detail page.
            const auto candidates = matching_items(spec);
            if (candidates.empty()) return std::nullopt;
            const auto* item = candidates[rng.uniform_int(candidates.size())];
            next.max_price = item->price + static_cast<int>(rng.uniform_int(3));
        }
        if (!webshop::task_feasible(catalog_, next)) return std::nullopt;
        return next;
    }

    std::vector<const webshop::Item*> matching_items(const webshop::TaskSpec& spec) const {
        std::vector<const webshop::Item*> out;
        for (const auto& item : catalog_.items)
            if (webshop::item_matches(item, spec)) out.push_back(&item);
        return out;
    }

    webshop::Catalog catalog_;
};

/// Expands seed records into generated TaskRecords. Seeds at or beyond the
/// depth cap are skipped; candidates failing the generator's well-formedness
/// check are discarded.
inline std::vector<TaskRecord> generate_variations(const std::vector<TaskRecord>& seeds,
                                                   TaskGenerator& generator, int per_seed,
                                                   Rng& rng, int depth_cap = 4) {
    if (seeds.empty()) throw ConfigError("generate_variations: no seed tasks supplied");
    std::vector<TaskRecord> out;
    if (per_seed <= 0) return out;
    for (const auto& seed : seeds) {
        if (seed.origin.depth >= depth_cap) continue;
        for (const auto& text : generator.propose(seed.instruction, per_seed, rng)) {
            if (!generator.well_formed(text)) continue;
            TaskRecord record;
            record.instruction = text;
            record.origin = {TaskOrigin::Kind::Generated, seed.instruction, seed.origin.depth + 1};
            out.push_back(std::move(record));
        }
    }
    return out;
}

/// Samples a training batch with the synthetic share capped at
/// ceil(lambda_frac * batch). Within each pool, sampling is uniform and
/// without replacement until the pool is exhausted, then the pool recycles.
inline std::vector<std::string> mix_tasks(const std::vector<std::string>& original,
                                          const std::vector<std::string>& synthetic,
                                          double lambda_frac, int batch, Rng& rng) {
    if (lambda_frac < 0.0 || lambda_frac > 1.0)
        throw ConfigError("mix_tasks: lambda_frac must lie in [0, 1]");
    if (batch < 1) throw ConfigError("mix_tasks: batch must be at least 1");
    if (original.empty() && synthetic.empty())
        throw ConfigError("mix_tasks: both task pools are empty");

    const int cap = static_cast<int>(std::ceil(lambda_frac * batch));
    int n_synth = std::min<int>(cap, static_cast<int>(synthetic.size()));
    int n_orig = batch - n_synth;
    if (original.empty()) n_orig = 0;  // degenerate: whatever the cap allows

    auto draw = [&rng](const std::vector<std::string>& pool, int count) {
        std::vector<std::string> out;
        std::vector<std::size_t> order;
        while (static_cast<int>(out.size()) < count) {
            if (order.empty()) {
                order.resize(pool.size());
                for (std::size_t i = 0; i < pool.size(); ++i) order[i] = i;
                rng.shuffle(std::span<std::size_t>(order));
            }
            out.push_back(pool[order.back()]);
            order.pop_back();
        }
        return out;
    };

    std::vector<std::string> out = draw(original, n_orig);
    const auto synth = draw(synthetic, n_synth);
    out.insert(out.end(), synth.begin(), synth.end());
    return out;
}

/// Fixed-seed Lloyd k-means over instruction embeddings. Used to pool reward
/// groups when the training algorithm has no natural per-task group.
inline std::vector<int> cluster_tasks(const std::vector<std::string>& instructions, int k,
                                      std::uint64_t seed) {
    const int n = static_cast<int>(instructions.size());
    if (n == 0) return {};
    k = std::min(k, n);
    std::vector<std::vector<double>> points;
    points.reserve(n);
    for (const auto& text : instructions) points.push_back(embed_text(text));

    // k-means++ style init on the derived stream
    Rng rng(stream_seed(seed, "kmeans"));
    std::vector<std::vector<double>> centers;
    centers.push_back(points[rng.uniform_int(n)]);
    while (static_cast<int>(centers.size()) < k) {
        std::vector<double> d2(n);
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) {
                double acc = 0.0;
                for (int j = 0; j < kEmbedDim; ++j) {
                    const double diff = points[i][j] - c[j];
                    acc += diff * diff;
                }
                best = std::min(best, acc);
            }
            d2[i] = best;
        }
        double total = 0.0;
        for (double v : d2) total += v;
        if (total <= 0.0) {
            centers.push_back(points[rng.uniform_int(n)]);
        } else {
            centers.push_back(points[rng.categorical(d2)]);
        }
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int c = 0; c < k; ++c) {
                double acc = 0.0;
                for (int j = 0; j < kEmbedDim; ++j) {
                    const double diff = points[i][j] - centers[c][j];
                    acc += diff * diff;
                }
                if (acc < best) {
                    best = acc;
                    arg = c;
                }
            }
            if (assign[i] != arg) {
                assign[i] = arg;
                changed = true;
            }
        }
        if (!changed) break;
        for (int c = 0; c < k; ++c) {
            std::vector<double> mean(kEmbedDim, 0.0);
            int count = 0;
            for (int i = 0; i < n; ++i) {
                if (assign[i] != c) continue;
                for (int j = 0; j < kEmbedDim; ++j) mean[j] += points[i][j];
                ++count;
            }
            if (count > 0) {
                for (double& v : mean) v /= count;
                centers[c] = std::move(mean);
            }
        }
    }
    return assign;
}

/// PPO-mode task valuation: tasks are clustered by instruction embedding and
/// each record's value becomes the variance of the rewards pooled over its
/// cluster.
inline void apply_cluster_values(std::vector<TaskRecord>& records, int k, std::uint64_t seed) {
    std::vector<std::string> instructions;
    instructions.reserve(records.size());
    for (const auto& r : records) instructions.push_back(r.instruction);
    const auto assign = cluster_tasks(instructions, k, seed);
    std::map<int, std::vector<double>> pooled;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& bucket = pooled[assign[i]];
        bucket.insert(bucket.end(), records[i].group_rewards.begin(),
                      records[i].group_rewards.end());
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& bucket = pooled[assign[i]];
        records[i].value = bucket.empty() ? 0.0 : task_value(bucket);
    }
}

}  // namespace synexp
