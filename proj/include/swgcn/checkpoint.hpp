#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "swgcn/model.hpp"

namespace swgcn {

inline constexpr const char* kVersion = "0.1.0";

struct Checkpoint {
    ModelParams params;
    nlohmann::json hyper;
    std::uint64_t seed = 0;
};

// Binary container: magic + JSON header (hyperparameters, seed, tensor
// directory) + raw little-endian doubles. Values round-trip bit exact.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const nlohmann::json& hyper, std::uint64_t seed);

Checkpoint load_checkpoint(const std::string& path);

} // namespace swgcn
