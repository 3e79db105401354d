#pragma once

#include <string>
#include <vector>

#include "swgcn/training.hpp"

namespace swgcn {

// Everything a run needs: training hyperparameters plus dataset wiring.
// Serialized as flat "key = value" lines; CLI flags override file values.
struct RunConfig {
    TrainConfig train;
    std::vector<std::string> behaviors{"view", "cart", "buy"};  // ordered, last = target
    std::string dataset;
    std::string out_dir = "run";
    std::vector<int> k_list{10, 20, 50, 100, 200};
    int min_target_count = 0;
    bool dedup = true;
    bool filter_items = true;

    // synthetic generation
    int synth_users = 500;
    int synth_items = 300;
    int synth_latent_dim = 8;
    std::vector<long long> synth_interactions{8000, 5000, 2500};
    double synth_synergy = 0.9;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& config);

void apply_key_value(RunConfig& config, const std::string& key, const std::string& value);

} // namespace swgcn
