#include "swgcn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <thread>
#include <unordered_map>

#include "swgcn/error.hpp"
#include "swgcn/graph.hpp"

namespace swgcn {

int resolve_thread_count(int requested) {
    int cap = 0;
    if (const char* env = std::getenv("SWGCN_THREADS")) cap = std::atoi(env);
    if (cap <= 0) cap = static_cast<int>(std::thread::hardware_concurrency());
    if (cap <= 0) cap = 1;
    if (requested <= 0) return cap;
    return std::min(requested, cap);
}

double EvalReport::hr_at(int k) const {
    for (std::size_t i = 0; i < k_list.size(); ++i)
        if (k_list[i] == k) return hr[i];
    throw Error("lookup", "K=" + std::to_string(k) + " not in report");
}

double EvalReport::ndcg_at(int k) const {
    for (std::size_t i = 0; i < k_list.size(); ++i)
        if (k_list[i] == k) return ndcg[i];
    throw Error("lookup", "K=" + std::to_string(k) + " not in report");
}

std::vector<int> rank_and_score(const FusedEmbeddings& fused, int user, int k_max,
                                const std::vector<int>& mask) {
    const int num_items = fused.num_items();
    if (user < 0 || user >= fused.num_users)
        throw Error("bounds", "user index " + std::to_string(user) + " out of range");

    std::vector<char> excluded(num_items, 0);
    for (int item : mask) {
        if (item >= 0 && item < num_items) excluded[item] = 1;
    }

    auto user_row = fused.user(user);
    std::vector<std::pair<double, int>> scored;
    scored.reserve(num_items);
    for (int i = 0; i < num_items; ++i) {
        if (excluded[i]) continue;
        scored.emplace_back(dot(user_row, fused.item(i)), i);
    }

    const std::size_t top = std::min<std::size_t>(k_max, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + top, scored.end(),
                      [](const auto& a, const auto& b) {
                          return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });
    std::vector<int> ranked(top);
    for (std::size_t i = 0; i < top; ++i) ranked[i] = scored[i].second;
    return ranked;
}

double hr_at_k(const std::vector<int>& ranked, int truth_item, int k) {
    if (k < 1) throw Error("config", "K must be >= 1");
    const int limit = std::min<int>(k, static_cast<int>(ranked.size()));
    for (int i = 0; i < limit; ++i)
        if (ranked[i] == truth_item) return 1.0;
    return 0.0;
}

double ndcg_at_k(const std::vector<int>& ranked, int truth_item, int k) {
    if (k < 1) throw Error("config", "K must be >= 1");
    const int limit = std::min<int>(k, static_cast<int>(ranked.size()));
    for (int i = 0; i < limit; ++i)
        if (ranked[i] == truth_item) return 1.0 / std::log2(static_cast<double>(i + 2));
    return 0.0;
}

EvalReport evaluate_fused(const FusedEmbeddings& fused, const SplitDataset& split,
                          const std::vector<int>& truth_items, const EvalConfig& config) {
    std::vector<int> users;
    for (int u : split.eval_users)
        if (u < static_cast<int>(truth_items.size()) && truth_items[u] >= 0) users.push_back(u);
    if (users.empty()) throw Error("eval", "no users to evaluate");

    int k_max = 1;
    for (int k : config.k_list) {
        if (k < 1) throw Error("config", "K must be >= 1");
        k_max = std::max(k_max, k);
    }

    std::vector<std::vector<int>> train_positives;
    if (config.mask_train) {
        train_positives.resize(split.train.num_users);
        for (const Edge& e : split.train.edges[split.train.target_behavior()])
            train_positives[e.user].push_back(e.item);
    }
    static const std::vector<int> kNoMask;

    // Per-user metrics land in preallocated slots; the reduction below runs
    // in user order so thread count never changes the result.
    const std::size_t num_k = config.k_list.size();
    std::vector<double> per_user(users.size() * num_k * 2, 0.0);
    auto score_user = [&](std::size_t idx) {
        const int u = users[idx];
        const auto& mask = config.mask_train ? train_positives[u] : kNoMask;
        const auto ranked = rank_and_score(fused, u, k_max, mask);
        for (std::size_t ki = 0; ki < num_k; ++ki) {
            per_user[(idx * num_k + ki) * 2] = hr_at_k(ranked, truth_items[u], config.k_list[ki]);
            per_user[(idx * num_k + ki) * 2 + 1] =
                ndcg_at_k(ranked, truth_items[u], config.k_list[ki]);
        }
    };

    const int threads = std::max(1, std::min<int>(config.num_threads,
                                                  static_cast<int>(users.size())));
    if (threads <= 1) {
        for (std::size_t idx = 0; idx < users.size(); ++idx) score_user(idx);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t idx = t; idx < users.size(); idx += threads) score_user(idx);
            });
        for (auto& th : pool) th.join();
    }

    EvalReport report;
    report.k_list = config.k_list;
    report.hr.assign(num_k, 0.0);
    report.ndcg.assign(num_k, 0.0);
    report.num_eval_users = static_cast<int>(users.size());
    for (std::size_t idx = 0; idx < users.size(); ++idx)
        for (std::size_t ki = 0; ki < num_k; ++ki) {
            report.hr[ki] += per_user[(idx * num_k + ki) * 2];
            report.ndcg[ki] += per_user[(idx * num_k + ki) * 2 + 1];
        }
    for (std::size_t ki = 0; ki < num_k; ++ki) {
        report.hr[ki] /= users.size();
        report.ndcg[ki] /= users.size();
    }
    return report;
}

EvalReport evaluate(const ModelParams& params, const SplitDataset& split,
                    const ForwardOptions& options, const EvalConfig& config, bool use_val) {
    auto graphs = build_behavior_graphs(split.train);
    ForwardOptions eval_options = options;
    eval_options.training = false;
    const auto result = forward(params, graphs, eval_options);
    EvalReport report = evaluate_fused(result.fused, split,
                                       use_val ? split.val_item : split.test_item, config);
    report.variant = to_string(options.variant);
    return report;
}

std::vector<SynergyCell> synergy_report(const ModelParams& params,
                                        const InteractionDataset& dataset,
                                        const std::vector<int>& users) {
    for (int u : users)
        if (u < 0 || u >= dataset.num_users)
            throw Error("lookup", "unknown user " + std::to_string(u));
    if (dataset.num_behaviors > 31) throw Error("config", "too many behaviors for cell masks");

    const auto graphs = build_behavior_graphs(dataset);
    std::vector<EdgeWeightMap> tpw(dataset.num_behaviors);
    for (int r = 0; r < dataset.num_behaviors; ++r)
        tpw[r] = target_preference_weights(params.embeddings[r], params.weigher[r], graphs[r]);

    std::vector<SynergyCell> cells;
    for (int u : users) {
        // item -> (behavior bitmask, sum of edge weights, edge count)
        std::vector<std::pair<int, std::pair<double, int>>> per_item;  // keyed by item via map below
        std::unordered_map<int, std::size_t> item_slot;
        auto slot = [&](int item) {
            auto it = item_slot.find(item);
            if (it != item_slot.end()) return it->second;
            item_slot.emplace(item, per_item.size());
            per_item.push_back({0, {0.0, 0}});
            return per_item.size() - 1;
        };
        std::vector<int> order;  // first-seen items, for deterministic traversal
        for (int r = 0; r < dataset.num_behaviors; ++r) {
            const auto& g = graphs[r];
            for (int e = g.user_offsets[u]; e < g.user_offsets[u + 1]; ++e) {
                const int item = g.edge_item[e];
                if (!item_slot.count(item)) order.push_back(item);
                auto& entry = per_item[slot(item)];
                entry.first |= 1 << r;
                entry.second.first += tpw[r][e];
                entry.second.second += 1;
            }
        }

        // Aggregate disjoint cells over the user's items.
        std::map<unsigned, std::pair<double, std::pair<int, int>>> cell_acc;  // mask -> (wsum, (items, edges))
        for (int item : order) {
            const auto& entry = per_item[item_slot[item]];
            auto& acc = cell_acc[static_cast<unsigned>(entry.first)];
            acc.first += entry.second.first;
            acc.second.first += 1;
            acc.second.second += entry.second.second;
        }
        for (const auto& [mask, acc] : cell_acc) {
            SynergyCell cell;
            cell.user = u;
            cell.behavior_mask = mask;
            cell.item_count = acc.second.first;
            cell.mean_weight = acc.second.second > 0 ? acc.first / acc.second.second : 0.0;
            cells.push_back(cell);
        }
    }
    return cells;
}

std::string behavior_mask_label(unsigned mask, const std::vector<std::string>& behavior_vocab) {
    std::string label;
    for (std::size_t r = 0; r < behavior_vocab.size(); ++r) {
        if (!(mask & (1u << r))) continue;
        if (!label.empty()) label += '+';
        label += behavior_vocab[r];
    }
    return label.empty() ? "none" : label;
}

} // namespace swgcn
