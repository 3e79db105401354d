#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "swgcn/matrix.hpp"

namespace swgcn {

// One raw interaction line. Behaviors are 0-based indices into an ordered
// vocabulary whose last entry is the target behavior.
struct InteractionRecord {
    std::string user;
    std::string item;
    int behavior = 0;
    std::int64_t timestamp = 0;

    bool operator==(const InteractionRecord&) const = default;
};

struct Edge {
    int user = 0;
    int item = 0;
    std::int64_t timestamp = 0;

    bool operator==(const Edge&) const = default;
};

// Reindexed multi-behavior dataset: one sparse binary matrix per behavior,
// stored as row-major sorted edge lists with per-edge timestamps.
struct InteractionDataset {
    int num_users = 0;
    int num_items = 0;
    int num_behaviors = 0;
    std::vector<std::vector<Edge>> edges;   // [behavior][edge], sorted by (user, item)
    std::vector<std::string> user_ids;      // dense index -> external id
    std::vector<std::string> item_ids;
    std::unordered_map<std::string, int> user_index;
    std::unordered_map<std::string, int> item_index;

    int target_behavior() const { return num_behaviors - 1; }
    std::size_t total_edges() const {
        std::size_t n = 0;
        for (const auto& e : edges) n += e.size();
        return n;
    }
};

// Leave-one-out temporal split. val_item/test_item hold -1 for users outside
// the evaluation set; eval_users is sorted ascending.
struct SplitDataset {
    InteractionDataset train;
    std::vector<int> val_item;
    std::vector<int> test_item;
    std::vector<int> eval_users;
};

struct SyntheticConfig {
    int num_users = 0;
    int num_items = 0;
    int num_behaviors = 0;
    int latent_dim = 8;
    std::vector<long long> interactions_per_behavior;
    double synergy_strength = 0.9;
    std::uint64_t seed = 1;
};

struct SyntheticData {
    std::vector<InteractionRecord> records;
    Matrix affinity;   // num_users x num_items ground-truth preference in (0, 1)
};

struct ColumnSchema {
    char delimiter = '\t';
};

std::vector<InteractionRecord> load_interactions(const std::string& path,
                                                 const std::vector<std::string>& behavior_vocab,
                                                 const ColumnSchema& schema = {});

std::vector<InteractionRecord> parse_interactions(const std::string& text,
                                                  const std::vector<std::string>& behavior_vocab,
                                                  const ColumnSchema& schema = {});

// Dedup to earliest timestamp, drop users/items below the target-count
// threshold (iterated to a fixed point), reindex survivors densely from 0.
InteractionDataset preprocess(const std::vector<InteractionRecord>& records,
                              int num_behaviors,
                              int min_target_count,
                              bool dedup = true,
                              bool filter_items = true);

// Per user with >= 3 target interactions: latest -> test, second latest ->
// val, remainder (and all auxiliary edges) -> train.
SplitDataset temporal_split(const InteractionDataset& dataset);

SyntheticData generate_synthetic(const SyntheticConfig& config);

// Persistence: tab-separated interaction lines plus JSON manifest and id-map
// sidecars, so a split round-trips with identical dense indices.
void save_split(const std::string& dir, const SplitDataset& split,
                const std::vector<std::string>& behavior_vocab);
SplitDataset load_split(const std::string& dir, std::vector<std::string>* behavior_vocab_out = nullptr);

void save_records(const std::string& path, const std::vector<InteractionRecord>& records,
                  const std::vector<std::string>& behavior_vocab);
void save_affinity(const std::string& path, const Matrix& affinity);
Matrix load_affinity(const std::string& path);

} // namespace swgcn
