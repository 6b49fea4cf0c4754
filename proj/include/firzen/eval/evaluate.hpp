#pragma once

#include <set>
#include <string>
#include <vector>

#include "firzen/data/splits.hpp"
#include "firzen/eval/metrics.hpp"
#include "firzen/model/forward.hpp"

namespace firzen {

struct InferenceOutputs {
    Mat breve_user;  // n_users x d
    Mat breve_item;  // n_items x d
};

// One gradient-free forward pass over a frozen bundle.
inline InferenceOutputs run_inference(const FrozenGraphBundle& bundle, const GraphOps& ops,
                                      ModelParams& params, const TrainingConfig& cfg) {
    ad::Tape tape;
    Rng unused(0);  // eval mode draws nothing
    auto fr = model_forward(tape, ops, bundle, params, cfg, false, unused,
                            [](const std::string&) { return false; });
    return {tape.val(fr.breve_user), tape.val(fr.breve_item)};
}

// ground truth per user restricted to a candidate pool
inline std::vector<std::set<std::size_t>> ground_truth_in_pool(
    const std::vector<Interaction>& edges, std::size_t user_count,
    const std::vector<std::size_t>& pool) {
    std::set<std::size_t> pool_set(pool.begin(), pool.end());
    std::vector<std::set<std::size_t>> gt(user_count);
    for (const auto& x : edges)
        if (pool_set.count(x.item)) gt[x.user].insert(x.item);
    return gt;
}

// All-ranking evaluation of one setting: every user with ground truth scores
// the whole candidate pool (optionally minus their excluded items) with
// inner products, ranks descending with index tie-breaks, and contributes to
// the averaged top-K metrics.
inline MetricsReport evaluate_setting(const InferenceOutputs& inf,
                                      const std::vector<std::size_t>& pool,
                                      const std::vector<std::set<std::size_t>>& ground_truth,
                                      const std::vector<std::set<std::size_t>>* excluded_per_user,
                                      std::size_t k, const std::string& setting) {
    std::size_t n_users = inf.breve_user.rows();
    std::vector<std::vector<std::size_t>> rankings(n_users);
    std::vector<double> scores(inf.breve_item.rows());
    for (std::size_t u = 0; u < n_users; ++u) {
        if (ground_truth[u].empty()) continue;  // skipped, counted by metrics_at_k
        std::vector<std::size_t> candidates;
        for (std::size_t i : pool)
            if (!excluded_per_user || !(*excluded_per_user)[u].count(i)) candidates.push_back(i);
        for (std::size_t i : candidates)
            scores[i] = dot_rows(inf.breve_user, u, inf.breve_item, i);
        rankings[u] = rank_candidates(scores, candidates);
    }
    return metrics_at_k(rankings, ground_truth, k, setting);
}

inline std::vector<std::set<std::size_t>> train_items_per_user(
    const std::vector<Interaction>& train, std::size_t user_count) {
    std::vector<std::set<std::size_t>> out(user_count);
    for (const auto& x : train) out[x.user].insert(x.item);
    return out;
}

// Warm setting: candidates are warm items minus the user's training items.
inline MetricsReport evaluate_warm(const InferenceOutputs& inf, const SplitSpec& split,
                                   const std::vector<Interaction>& gt_edges, std::size_t k,
                                   const std::string& setting = "warm") {
    std::size_t n_users = inf.breve_user.rows();
    auto gt = ground_truth_in_pool(gt_edges, n_users, split.warm_items);
    auto excluded = train_items_per_user(split.train, n_users);
    return evaluate_setting(inf, split.warm_items, gt, &excluded, k, setting);
}

// Strict cold setting: candidates are the cold test (or validation) items.
inline MetricsReport evaluate_cold(const InferenceOutputs& inf,
                                   const std::vector<std::size_t>& cold_pool,
                                   const std::vector<Interaction>& all_edges, std::size_t k,
                                   const std::string& setting = "cold") {
    auto gt = ground_truth_in_pool(all_edges, inf.breve_user.rows(), cold_pool);
    return evaluate_setting(inf, cold_pool, gt, nullptr, k, setting);
}

// Normal cold setting: the known half of each cold item's interactions has
// been added to the forward graphs already; ground truth is the unknown half
// and per-user known edges are excluded from the candidate list.
inline MetricsReport evaluate_normal_cold(const InferenceOutputs& inf, const SplitSpec& split,
                                          const std::vector<std::size_t>& cold_pool,
                                          std::size_t k) {
    std::size_t n_users = inf.breve_user.rows();
    auto gt = ground_truth_in_pool(split.unknown_cold, n_users, cold_pool);
    auto excluded = train_items_per_user(split.known_cold, n_users);
    return evaluate_setting(inf, cold_pool, gt, &excluded, k, "normal_cold");
}

}  // namespace firzen
