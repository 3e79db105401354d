#pragma once

#include <string>
#include <vector>

#include "swgcn/data.hpp"
#include "swgcn/model.hpp"

namespace swgcn {

struct EvalConfig {
    std::vector<int> k_list{10, 20, 50, 100, 200};
    bool mask_train = true;
    int num_threads = 1;
};

struct EvalReport {
    std::vector<int> k_list;
    std::vector<double> hr;
    std::vector<double> ndcg;
    int num_eval_users = 0;
    std::string variant;

    double hr_at(int k) const;
    double ndcg_at(int k) const;
};

// Scores every item for the user, drops masked items, and returns the top
// k_max item indices in descending score order (ties broken by ascending
// item index).
std::vector<int> rank_and_score(const FusedEmbeddings& fused, int user, int k_max,
                                const std::vector<int>& mask);

double hr_at_k(const std::vector<int>& ranked, int truth_item, int k);
double ndcg_at_k(const std::vector<int>& ranked, int truth_item, int k);

// Full-ranking evaluation over the split's eval users against the given
// per-user truth items (-1 entries are skipped). Parallel across users; the
// aggregation order is fixed so results do not depend on the thread count.
EvalReport evaluate_fused(const FusedEmbeddings& fused, const SplitDataset& split,
                          const std::vector<int>& truth_items, const EvalConfig& config);

// Eval-mode forward, then full ranking against the test items (or validation
// items when use_val is set).
EvalReport evaluate(const ModelParams& params, const SplitDataset& split,
                    const ForwardOptions& options, const EvalConfig& config,
                    bool use_val = false);

// One Venn cell of a user's interacted items: the set of behaviors the items
// share, the number of such items, and the mean interaction weight over all
// of their edges.
struct SynergyCell {
    int user = 0;
    unsigned behavior_mask = 0;
    int item_count = 0;
    double mean_weight = 0.0;
};

std::vector<SynergyCell> synergy_report(const ModelParams& params,
                                        const InteractionDataset& dataset,
                                        const std::vector<int>& users);

std::string behavior_mask_label(unsigned mask, const std::vector<std::string>& behavior_vocab);

int resolve_thread_count(int requested);

} // namespace swgcn
