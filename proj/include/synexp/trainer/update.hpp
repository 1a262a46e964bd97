#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "synexp/core/evaluate.hpp"
#include "synexp/core/mdp.hpp"
#include "synexp/errors.hpp"
#include "synexp/experience/model.hpp"
#include "synexp/rollout/rollout.hpp"

namespace synexp {

/// Ragged logit table: one row per state, one column per admissible action.
/// Both TabularPolicy and TextPolicy reduce to this representation for the
/// clipped-surrogate update, so one implementation (and one gradient check)
/// covers both.
struct PolicyTable {
    std::vector<std::vector<double>> logits;

    static PolicyTable from_tabular(const TabularPolicy& policy) {
        PolicyTable table;
        table.logits.reserve(policy.n_states());
        for (int s = 0; s < policy.n_states(); ++s) {
            auto row = policy.logits_row(s);
            table.logits.emplace_back(row.begin(), row.end());
        }
        return table;
    }
};

/// One experience step flattened for the update: which table cell was acted
/// on, the sampling-time log-probability, and the advantage.
struct UpdateStep {
    int row = 0;
    int col = 0;
    double old_logp = 0.0;
    double advantage = 0.0;
};

struct UpdateOptions {
    double lr = 0.05;
    double clip_eps = 0.2;
    double kl_penalty = 0.0;
    double trust_radius = 0.05;
};

struct UpdateMetrics {
    double mean_ratio = 1.0;
    double clip_frac = 0.0;
    double kl = 0.0;  // measured per-state KL radius of the (attempted) update
    bool rejected = false;
    double objective = 0.0;  // surrogate value at the new parameters
};

namespace detail {

inline std::vector<int> batch_rows(std::span<const UpdateStep> steps) {
    std::set<int> rows;
    for (const auto& s : steps) rows.insert(s.row);
    return {rows.begin(), rows.end()};
}

}  // namespace detail

/// Clipped surrogate objective (to be maximized):
///   L = mean_i min(r_i A_i, clip(r_i, 1-eps, 1+eps) A_i)
///       - kl_penalty * mean_{rows in batch} KL(new(row) || old(row))
/// where r_i = exp(logpi_new - logpi_old) at step i.
inline double surrogate_objective(const PolicyTable& table, std::span<const UpdateStep> steps,
                                  const PolicyTable& old_table, double clip_eps,
                                  double kl_penalty) {
    if (steps.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : steps) {
        const auto probs = softmax(table.logits[s.row]);
        const double ratio = std::exp(std::log(probs[s.col]) - s.old_logp);
        const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
        acc += std::min(ratio * s.advantage, clipped * s.advantage);
    }
    double obj = acc / static_cast<double>(steps.size());
    if (kl_penalty != 0.0) {
        const auto rows = detail::batch_rows(steps);
        double kl_acc = 0.0;
        for (int row : rows)
            kl_acc += kl_divergence(softmax(table.logits[row]), softmax(old_table.logits[row]));
        obj -= kl_penalty * kl_acc / static_cast<double>(rows.size());
    }
    return obj;
}

/// Analytic gradient of surrogate_objective with respect to every logit.
/// Throws NumericError naming the first step whose contribution is not
/// finite.
inline std::vector<std::vector<double>> surrogate_gradient(const PolicyTable& table,
                                                           std::span<const UpdateStep> steps,
                                                           const PolicyTable& old_table,
                                                           double clip_eps, double kl_penalty) {
    std::vector<std::vector<double>> grad(table.logits.size());
    for (std::size_t r = 0; r < table.logits.size(); ++r)
        grad[r].assign(table.logits[r].size(), 0.0);
    if (steps.empty()) return grad;

    const double inv_n = 1.0 / static_cast<double>(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        const auto probs = softmax(table.logits[s.row]);
        const double ratio = std::exp(std::log(probs[s.col]) - s.old_logp);
        const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
        // min picks the unclipped branch unless the clipped value is strictly
        // smaller; the clipped branch is locally constant in theta whenever
        // the clamp is active.
        const bool unclipped_active = ratio * s.advantage <= clipped * s.advantage;
        if (!unclipped_active) continue;
        const double scale = inv_n * ratio * s.advantage;
        if (!std::isfinite(scale))
            throw NumericError("surrogate_gradient: non-finite contribution at step " +
                               std::to_string(i));
        auto& row = grad[s.row];
        for (std::size_t b = 0; b < row.size(); ++b)
            row[b] += scale * ((static_cast<int>(b) == s.col ? 1.0 : 0.0) - probs[b]);
    }

    if (kl_penalty != 0.0) {
        const auto rows = detail::batch_rows(steps);
        const double w = kl_penalty / static_cast<double>(rows.size());
        for (int r : rows) {
            const auto p = softmax(table.logits[r]);
            const auto q = softmax(old_table.logits[r]);
            double kl = 0.0;
            for (std::size_t b = 0; b < p.size(); ++b) kl += p[b] * std::log(p[b] / q[b]);
            for (std::size_t b = 0; b < p.size(); ++b)
                grad[r][b] -= w * p[b] * (std::log(p[b] / q[b]) - kl);
        }
    }
    return grad;
}

/// Per-state KL radius between two logit tables of identical shape.
inline double table_kl_radius(const PolicyTable& old_table, const PolicyTable& new_table) {
    double radius = 0.0;
    for (std::size_t r = 0; r < old_table.logits.size(); ++r) {
        radius = std::max(radius, kl_divergence(softmax(new_table.logits[r]),
                                                softmax(old_table.logits[r])));
    }
    return radius;
}

/// One epoch of clipped-surrogate ascent: a single full-batch analytic
/// gradient step on the logits. The update is rejected (table restored) when
/// the measured per-state KL radius exceeds the trust region; the measured
/// radius is still reported.
inline UpdateMetrics apply_policy_update(PolicyTable& table, std::span<const UpdateStep> steps,
                                         const UpdateOptions& opts) {
    UpdateMetrics metrics;
    if (steps.empty()) return metrics;

    const PolicyTable old_table = table;
    const auto grad = surrogate_gradient(table, steps, old_table, opts.clip_eps, opts.kl_penalty);
    for (std::size_t r = 0; r < table.logits.size(); ++r)
        for (std::size_t b = 0; b < table.logits[r].size(); ++b)
            table.logits[r][b] += opts.lr * grad[r][b];

    double ratio_sum = 0.0;
    int clipped_count = 0;
    for (const auto& s : steps) {
        const auto probs = softmax(table.logits[s.row]);
        const double ratio = std::exp(std::log(probs[s.col]) - s.old_logp);
        ratio_sum += ratio;
        if (ratio < 1.0 - opts.clip_eps || ratio > 1.0 + opts.clip_eps) ++clipped_count;
    }
    metrics.mean_ratio = ratio_sum / static_cast<double>(steps.size());
    metrics.clip_frac = static_cast<double>(clipped_count) / static_cast<double>(steps.size());
    metrics.kl = table_kl_radius(old_table, table);
    metrics.objective = surrogate_objective(table, steps, old_table, opts.clip_eps, opts.kl_penalty);

    if (metrics.kl > opts.trust_radius) {
        table = old_table;
        metrics.rejected = true;
    }
    return metrics;
}

/// Canonical table view of a TextPolicy: rows ordered by state key, columns
/// by action key. The ordering depends only on the parameters, never on
/// discovery order, which keeps updates and checkpoints reproducible.
struct TextPolicyView {
    PolicyTable table;
    std::map<std::string, int> row_of;
    std::vector<std::map<std::string, int>> col_of;
};

inline TextPolicyView make_view(const TextPolicy& policy) {
    TextPolicyView view;
    int r = 0;
    for (const auto& [state, row] : policy.rows()) {
        view.row_of[state] = r;
        std::map<std::string, int> cols;
        std::vector<double> logits;
        int c = 0;
        for (const auto& [action, logit] : row) {
            cols[action] = c++;
            logits.push_back(logit);
        }
        view.col_of.push_back(std::move(cols));
        view.table.logits.push_back(std::move(logits));
        ++r;
    }
    return view;
}

inline void load_view(TextPolicy& policy, const TextPolicyView& view) {
    for (const auto& [state, r] : view.row_of) {
        auto& row = policy.rows()[state];
        for (const auto& [action, c] : view.col_of[r]) row[action] = view.table.logits[r][c];
    }
}

/// Full text-policy update from trajectories: interns every visited state
/// (admissible sets come from the model, which is deterministic in the state
/// text), flattens steps against the canonical view and applies the
/// clipped-surrogate step. advantages[t][i] aligns with trajectories[t].steps[i].
inline UpdateMetrics policy_update(TextPolicy& policy, const ExperienceModel& model,
                                   const std::vector<Trajectory>& trajectories,
                                   const std::vector<std::vector<double>>& advantages,
                                   const UpdateOptions& opts) {
    if (trajectories.size() != advantages.size())
        throw DimensionError("policy_update: advantages must align with trajectories");
    for (std::size_t t = 0; t < trajectories.size(); ++t)
        if (trajectories[t].steps.size() != advantages[t].size())
            throw DimensionError("policy_update: advantage row " + std::to_string(t) +
                                 " does not match the trajectory length");

    for (const auto& traj : trajectories)
        for (const auto& step : traj.steps) policy.ensure_row(step.state, model.actions(step.state));

    auto view = make_view(policy);
    std::vector<UpdateStep> steps;
    for (std::size_t t = 0; t < trajectories.size(); ++t) {
        for (std::size_t i = 0; i < trajectories[t].steps.size(); ++i) {
            const auto& step = trajectories[t].steps[i];
            const int row = view.row_of.at(step.state);
            steps.push_back(UpdateStep{row, view.col_of[row].at(step.action), step.logp,
                                       advantages[t][i]});
        }
    }

    const auto metrics = apply_policy_update(view.table, steps, opts);
    load_view(policy, view);
    return metrics;
}

}  // namespace synexp
