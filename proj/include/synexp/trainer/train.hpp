#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synexp/chat_client.hpp"
#include "synexp/curriculum/curriculum.hpp"
#include "synexp/curriculum/remote_generator.hpp"
#include "synexp/errors.hpp"
#include "synexp/experience/remote.hpp"
#include "synexp/experience/webshop.hpp"
#include "synexp/jsonl.hpp"
#include "synexp/rollout/rollout.hpp"
#include "synexp/trainer/advantages.hpp"
#include "synexp/trainer/update.hpp"
#include "synexp/trainer/values.hpp"

namespace synexp {

enum class Algorithm { Grpo, GaePpo };

inline const char* algorithm_name(Algorithm a) { return a == Algorithm::Grpo ? "grpo" : "gae-ppo"; }

inline Algorithm algorithm_from_name(const std::string& name) {
    if (name == "grpo") return Algorithm::Grpo;
    if (name == "gae-ppo") return Algorithm::GaePpo;
    throw ConfigError("unknown algorithm: " + name + " (expected grpo or gae-ppo)");
}

/// Default starter tasks for the scripted shop; all feasible in the standard
/// catalog and spanning color, material and price constraints.
inline std::vector<std::string> default_seed_tasks() {
    return {"buy any red mug",        "buy any blue mug",
            "buy any steel mug",      "buy any glass vase",
            "buy any white vase",     "buy any canvas shoes",
            "buy any leather shoes under $50", "buy any silver lamp",
            "buy any lamp under $20", "buy any green vase"};
}

struct TrainConfig {
    std::string backend = "scripted";  // scripted | remote
    std::string catalog = "standard";  // standard | extended (scripted backend)
    Algorithm algorithm = Algorithm::Grpo;
    int iterations = 10;
    int batch_tasks = 10;
    int group_size = 8;
    int max_turns = 8;
    int retrieve_k = 3;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double lr = 0.05;
    double clip_eps = 0.2;
    double kl_penalty = 0.0;
    double trust_radius = 0.05;
    bool curriculum = true;
    double lambda_frac = 0.3;
    int seeds_m = 4;
    int per_seed = 3;
    int depth_cap = 4;
    int min_rewards_for_seed = 4;
    int kmeans_k = 8;
    std::size_t buffer_capacity = 50000;
    bool reward_broadcast = true;  // GRPO advantage on every step vs final step only
    std::uint64_t seed = 0;
    int workers = 2;
    std::string out_dir;
    std::string resume_dir;
    int checkpoint_every = 0;  // 0: final checkpoint only
    std::vector<std::string> tasks;  // empty: default_seed_tasks()
    std::vector<std::string> remote_action_vocab;
    int remote_history_window = 8;

    nlohmann::json to_json() const {
        return {{"backend", backend},
                {"catalog", catalog},
                {"algorithm", algorithm_name(algorithm)},
                {"iterations", iterations},
                {"batch_tasks", batch_tasks},
                {"group_size", group_size},
                {"max_turns", max_turns},
                {"retrieve_k", retrieve_k},
                {"gamma", gamma},
                {"gae_lambda", gae_lambda},
                {"lr", lr},
                {"clip_eps", clip_eps},
                {"kl_penalty", kl_penalty},
                {"trust_radius", trust_radius},
                {"curriculum", curriculum},
                {"lambda_frac", lambda_frac},
                {"seeds_m", seeds_m},
                {"per_seed", per_seed},
                {"depth_cap", depth_cap},
                {"min_rewards_for_seed", min_rewards_for_seed},
                {"kmeans_k", kmeans_k},
                {"buffer_capacity", buffer_capacity},
                {"reward_broadcast", reward_broadcast},
                {"seed", seed},
                {"workers", workers},
                {"out_dir", out_dir},
                {"resume_dir", resume_dir},
                {"checkpoint_every", checkpoint_every},
                {"tasks", tasks},
                {"remote_action_vocab", remote_action_vocab},
                {"remote_history_window", remote_history_window}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        static const std::set<std::string> known{
            "backend",       "catalog",      "algorithm",     "iterations",
            "batch_tasks",   "group_size",   "max_turns",     "retrieve_k",
            "gamma",         "gae_lambda",   "lr",            "clip_eps",
            "kl_penalty",    "trust_radius", "curriculum",    "lambda_frac",
            "seeds_m",       "per_seed",     "depth_cap",     "min_rewards_for_seed",
            "kmeans_k",      "buffer_capacity", "reward_broadcast", "seed",
            "workers",       "out_dir",      "resume_dir",    "checkpoint_every",
            "tasks",         "remote_action_vocab", "remote_history_window"};
        for (const auto& [key, _] : j.items())
            if (!known.count(key)) throw ConfigError("unknown config key: " + key);

        TrainConfig cfg;
        cfg.backend = j.value("backend", cfg.backend);
        cfg.catalog = j.value("catalog", cfg.catalog);
        if (j.contains("algorithm")) cfg.algorithm = algorithm_from_name(j.at("algorithm"));
        cfg.iterations = j.value("iterations", cfg.iterations);
        cfg.batch_tasks = j.value("batch_tasks", cfg.batch_tasks);
        cfg.group_size = j.value("group_size", cfg.group_size);
        cfg.max_turns = j.value("max_turns", cfg.max_turns);
        cfg.retrieve_k = j.value("retrieve_k", cfg.retrieve_k);
        cfg.gamma = j.value("gamma", cfg.gamma);
        cfg.gae_lambda = j.value("gae_lambda", cfg.gae_lambda);
        cfg.lr = j.value("lr", cfg.lr);
        cfg.clip_eps = j.value("clip_eps", cfg.clip_eps);
        cfg.kl_penalty = j.value("kl_penalty", cfg.kl_penalty);
        cfg.trust_radius = j.value("trust_radius", cfg.trust_radius);
        cfg.curriculum = j.value("curriculum", cfg.curriculum);
        cfg.lambda_frac = j.value("lambda_frac", cfg.lambda_frac);
        cfg.seeds_m = j.value("seeds_m", cfg.seeds_m);
        cfg.per_seed = j.value("per_seed", cfg.per_seed);
        cfg.depth_cap = j.value("depth_cap", cfg.depth_cap);
        cfg.min_rewards_for_seed = j.value("min_rewards_for_seed", cfg.min_rewards_for_seed);
        cfg.kmeans_k = j.value("kmeans_k", cfg.kmeans_k);
        cfg.buffer_capacity = j.value("buffer_capacity", cfg.buffer_capacity);
        cfg.reward_broadcast = j.value("reward_broadcast", cfg.reward_broadcast);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.workers = j.value("workers", cfg.workers);
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
        cfg.resume_dir = j.value("resume_dir", cfg.resume_dir);
        cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
        cfg.tasks = j.value("tasks", cfg.tasks);
        cfg.remote_action_vocab = j.value("remote_action_vocab", cfg.remote_action_vocab);
        cfg.remote_history_window = j.value("remote_history_window", cfg.remote_history_window);
        cfg.validate();
        return cfg;
    }

    void validate() const {
        if (backend != "scripted" && backend != "remote")
            throw ConfigError("backend must be scripted or remote");
        if (catalog != "standard" && catalog != "extended")
            throw ConfigError("catalog must be standard or extended");
        if (iterations < 0) throw ConfigError("iterations must be non-negative");
        if (batch_tasks < 1) throw ConfigError("batch_tasks must be positive");
        if (group_size < 2) throw ConfigError("group_size must be at least 2");
        if (max_turns < 1) throw ConfigError("max_turns must be positive");
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
        if (lambda_frac < 0.0 || lambda_frac > 1.0)
            throw ConfigError("lambda_frac must lie in [0, 1]");
        if (workers < 1) throw ConfigError("workers must be positive");
    }
};

struct IterationMetrics {
    long iter = 0;
    double success_rate = 0.0;
    double mean_return = 0.0;
    double kl = 0.0;
    double clip_frac = 0.0;
    long n_tasks = 0;
    long n_synthetic = 0;

    nlohmann::json to_json() const {
        return {{"iter", iter},           {"success_rate", success_rate},
                {"mean_return", mean_return}, {"kl", kl},
                {"clip_frac", clip_frac}, {"n_tasks", n_tasks},
                {"n_synthetic", n_synthetic}};
    }
};

struct RunReport {
    std::vector<IterationMetrics> metrics;
    nlohmann::json resolved_config;
    TextPolicy policy;
    std::vector<TaskRecord> tasks;
    long final_iter = 0;

    double final_success_rate() const {
        return metrics.empty() ? 0.0 : metrics.back().success_rate;
    }
};

inline std::unique_ptr<ExperienceModel> make_backend(const TrainConfig& cfg) {
    if (cfg.backend == "scripted") {
        const auto catalog = cfg.catalog == "extended" ? webshop::Catalog::extended()
                                                       : webshop::Catalog::standard();
        return std::make_unique<webshop::ScriptedWebShopModel>(catalog);
    }
    RemoteModelConfig remote;
    remote.action_vocab = cfg.remote_action_vocab;
    remote.history_window = cfg.remote_history_window;
    remote.max_turns = cfg.max_turns * 4;
    auto client = std::make_shared<HttpChatClient>(RemoteEndpoint::from_env());
    return std::make_unique<RemoteExperienceModel>(std::move(client), std::move(remote));
}

inline std::unique_ptr<TaskGenerator> make_task_generator(const TrainConfig& cfg) {
    if (cfg.backend == "scripted") {
        const auto catalog = cfg.catalog == "extended" ? webshop::Catalog::extended()
                                                       : webshop::Catalog::standard();
        return std::make_unique<ScriptedTaskGenerator>(catalog);
    }
    auto client = std::make_shared<HttpChatClient>(RemoteEndpoint::from_env());
    return std::make_unique<RemoteTaskGenerator>(std::move(client));
}

namespace detail {

struct TaskPool {
    std::vector<TaskRecord> records;
    std::map<std::string, std::size_t> index;

    void add(TaskRecord record) {
        if (index.count(record.instruction)) return;
        index[record.instruction] = records.size();
        records.push_back(std::move(record));
    }

    TaskRecord& by_instruction(const std::string& instruction) {
        return records[index.at(instruction)];
    }

    std::vector<std::string> instructions(TaskOrigin::Kind kind) const {
        std::vector<std::string> out;
        for (const auto& r : records)
            if (r.origin.kind == kind) out.push_back(r.instruction);
        return out;
    }

    long n_synthetic() const {
        long n = 0;
        for (const auto& r : records)
            if (r.origin.kind == TaskOrigin::Kind::Generated) ++n;
        return n;
    }
};

inline void save_checkpoint(const std::filesystem::path& dir, const TextPolicy& policy,
                            const ReplayBuffer& buffer, const TaskPool& pool, long iter,
                            const TrainConfig& cfg) {
    std::filesystem::create_directories(dir);
    write_json_file(dir / "policy.json", policy.to_json());
    buffer.save_jsonl(dir / "buffer.jsonl");
    std::vector<nlohmann::json> task_rows;
    for (const auto& r : pool.records) task_rows.push_back(r.to_json());
    write_jsonl(dir / "tasks.jsonl", task_rows);
    write_json_file(dir / "state.json",
                    {{"iter", iter},
                     {"seed", cfg.seed},
                     {"algorithm", algorithm_name(cfg.algorithm)}});
}

struct Checkpoint {
    TextPolicy policy;
    ReplayBuffer buffer;
    TaskPool pool;
    long iter = 0;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& dir, std::size_t buffer_capacity) {
    if (!std::filesystem::exists(dir / "state.json"))
        throw ConfigError("no checkpoint at " + dir.string());
    Checkpoint ckpt{TextPolicy{}, ReplayBuffer(buffer_capacity), TaskPool{}, 0};
    ckpt.policy = TextPolicy::from_json(read_json_file(dir / "policy.json"));
    ckpt.buffer = ReplayBuffer::load_jsonl(dir / "buffer.jsonl", buffer_capacity);
    for (const auto& row : read_jsonl(dir / "tasks.jsonl")) ckpt.pool.add(TaskRecord::from_json(row));
    ckpt.iter = read_json_file(dir / "state.json").at("iter").get<long>();
    return ckpt;
}

}  // namespace detail

/// The outer training loop: sample a task batch (curriculum-mixed), collect
/// rollout groups against the experience model, compute advantages (GRPO or
/// GAE), apply one clipped-surrogate update, refresh task statistics, expand
/// the task pool with variations of high-entropy tasks, and log metrics.
/// Fully deterministic for a fixed config: every random stream derives from
/// (config seed, stream name, iteration, indices), so a resumed run replays
/// the remaining iterations bit-exactly.
inline RunReport train(const TrainConfig& cfg) {
    cfg.validate();
    const auto model = make_backend(cfg);
    const auto generator = make_task_generator(cfg);

    TextPolicy policy;
    ReplayBuffer buffer(cfg.buffer_capacity);
    detail::TaskPool pool;
    long start_iter = 0;
    const bool resumed = !cfg.resume_dir.empty();

    if (resumed) {
        auto ckpt = detail::load_checkpoint(cfg.resume_dir, cfg.buffer_capacity);
        policy = std::move(ckpt.policy);
        buffer = std::move(ckpt.buffer);
        pool = std::move(ckpt.pool);
        start_iter = ckpt.iter;
    } else {
        auto initial = cfg.tasks.empty() ? default_seed_tasks() : cfg.tasks;
        for (auto& instruction : initial) {
            TaskRecord record;
            record.instruction = std::move(instruction);
            pool.add(std::move(record));
        }
    }
    if (pool.records.empty()) throw ConfigError("train: task pool is empty");

    // artifact sinks
    std::optional<std::ofstream> metrics_out, traj_out;
    std::filesystem::path out_dir;
    if (!cfg.out_dir.empty()) {
        out_dir = cfg.out_dir;
        std::filesystem::create_directories(out_dir);
        metrics_out.emplace(out_dir / "metrics.jsonl", std::ios::trunc);
        traj_out.emplace(out_dir / "trajectories.jsonl", std::ios::trunc);
    }

    RunReport report;
    report.resolved_config = cfg.to_json();

    const auto originals = pool.instructions(TaskOrigin::Kind::Seed);
    auto evaluate = [&](long iter) {
        int successes = 0;
        double total_return = 0.0;
        for (std::size_t ti = 0; ti < originals.size(); ++ti) {
            const auto traj =
                run_episode(policy, *model, buffer, originals[ti], cfg.max_turns, cfg.retrieve_k,
                            stream_seed(cfg.seed, "eval", iter, ti),
                            {/*greedy=*/true, /*append_to_buffer=*/false});
            successes += traj.outcome == Outcome::Success;
            total_return += traj.total_reward();
        }
        return std::pair<double, double>{successes / double(originals.size()),
                                         total_return / double(originals.size())};
    };

    auto emit = [&](const IterationMetrics& m) {
        report.metrics.push_back(m);
        if (metrics_out) *metrics_out << m.to_json().dump() << '\n';
    };

    if (!resumed) {
        const auto [rate, ret] = evaluate(start_iter);
        IterationMetrics m;
        m.iter = start_iter;
        m.success_rate = rate;
        m.mean_return = ret;
        m.n_tasks = static_cast<long>(pool.records.size());
        m.n_synthetic = pool.n_synthetic();
        emit(m);
    }

    ValueEstimator estimator;
    for (long iter = start_iter + 1; iter <= cfg.iterations; ++iter) {
        // 1. assemble the task batch with the synthetic share capped by lambda
        Rng mix_rng(stream_seed(cfg.seed, "curriculum", iter));
        const auto synth = pool.instructions(TaskOrigin::Kind::Generated);
        const double lambda = cfg.curriculum ? cfg.lambda_frac : 0.0;
        const auto batch = mix_tasks(originals, synth, lambda, cfg.batch_tasks, mix_rng);

        // 2. rollout groups per task
        std::vector<std::vector<Trajectory>> groups;
        groups.reserve(batch.size());
        for (std::size_t ti = 0; ti < batch.size(); ++ti) {
            groups.push_back(collect_group(policy, *model, buffer, batch[ti], cfg.group_size,
                                           cfg.max_turns, cfg.retrieve_k,
                                           stream_seed(cfg.seed, "rollout", iter, ti),
                                           cfg.workers));
        }

        // 3. task statistics
        for (std::size_t ti = 0; ti < batch.size(); ++ti) {
            std::vector<double> rewards;
            for (const auto& traj : groups[ti]) rewards.push_back(traj.total_reward());
            pool.by_instruction(batch[ti]).record_group(rewards, iter);
        }
        if (cfg.algorithm == Algorithm::GaePpo)
            apply_cluster_values(pool.records, cfg.kmeans_k, stream_seed(cfg.seed, "cluster", iter));

        // 4. advantages
        std::vector<Trajectory> flat;
        std::vector<std::vector<double>> advantages;
        double return_sum = 0.0;
        std::size_t n_trajs = 0;
        if (cfg.algorithm == Algorithm::Grpo) {
            for (const auto& group : groups) {
                std::vector<double> rewards;
                for (const auto& traj : group) rewards.push_back(traj.total_reward());
                const auto group_adv = grpo_advantages(rewards);
                for (std::size_t gi = 0; gi < group.size(); ++gi) {
                    const auto& traj = group[gi];
                    std::vector<double> adv(traj.steps.size(), 0.0);
                    if (cfg.reward_broadcast) {
                        std::fill(adv.begin(), adv.end(), group_adv[gi]);
                    } else if (!adv.empty()) {
                        adv.back() = group_adv[gi];
                    }
                    flat.push_back(traj);
                    advantages.push_back(std::move(adv));
                    return_sum += traj.total_reward();
                    ++n_trajs;
                }
            }
        } else {
            for (const auto& group : groups)
                for (const auto& traj : group) {
                    flat.push_back(traj);
                    return_sum += traj.total_reward();
                    ++n_trajs;
                }
            fit_values(estimator, flat, cfg.gamma);
            for (const auto& traj : flat) {
                std::vector<double> rewards, values;
                for (const auto& step : traj.steps) {
                    rewards.push_back(step.reward);
                    values.push_back(estimator.predict(step.state));
                }
                const bool terminal = !traj.steps.empty() && traj.steps.back().done;
                values.push_back(terminal ? 0.0 : estimator.predict(traj.final_state));
                advantages.push_back(gae_advantages(rewards, values, cfg.gamma, cfg.gae_lambda));
            }
        }

        // 5. one clipped-surrogate step
        const auto update = policy_update(policy, *model, flat, advantages,
                                          {cfg.lr, cfg.clip_eps, cfg.kl_penalty, cfg.trust_radius});

        // 6. curriculum expansion
        if (cfg.curriculum) {
            const auto seeds =
                select_seed_tasks(pool.records, cfg.seeds_m, cfg.min_rewards_for_seed);
            if (!seeds.empty()) {
                Rng gen_rng(stream_seed(cfg.seed, "taskgen", iter));
                for (auto& record :
                     generate_variations(seeds, *generator, cfg.per_seed, gen_rng, cfg.depth_cap))
                    pool.add(std::move(record));
            }
        }

        // 7. evaluation + metrics
        const auto [rate, _] = evaluate(iter);
        IterationMetrics m;
        m.iter = iter;
        m.success_rate = rate;
        m.mean_return = n_trajs ? return_sum / double(n_trajs) : 0.0;
        m.kl = update.kl;
        m.clip_frac = update.clip_frac;
        m.n_tasks = static_cast<long>(pool.records.size());
        m.n_synthetic = pool.n_synthetic();
        emit(m);

        if (traj_out) {
            for (const auto& traj : flat) {
                auto row = traj.to_json();
                row["iter"] = iter;
                *traj_out << row.dump() << '\n';
            }
        }
        if (!out_dir.empty() && cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "iter_%04ld", iter);
            detail::save_checkpoint(out_dir / "checkpoints" / name, policy, buffer, pool, iter, cfg);
        }
        report.final_iter = iter;
    }

    if (!out_dir.empty()) {
        detail::save_checkpoint(out_dir / "checkpoints" / "final", policy, buffer, pool,
                                std::max(start_iter, static_cast<long>(cfg.iterations)), cfg);
    }

    report.policy = std::move(policy);
    report.tasks = pool.records;
    return report;
}

}  // namespace synexp
