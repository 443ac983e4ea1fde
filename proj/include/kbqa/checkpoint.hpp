#pragma once

#include <string>
#include <vector>

#include "kbqa/params.hpp"

namespace kbqa {

// Versioned binary container for a trained network: kind tag, config
// snapshot, vocabularies and named parameter tensors (shapes + raw 64-bit
// little-endian values). Loading rejects any version mismatch.
struct Checkpoint {
    std::string kind;            // network kind tag
    std::string config_snapshot; // canonical config text
    std::vector<std::string> vocab;     // word id -> token (id 0 is the unknown token)
    std::vector<std::string> relations; // relation id -> name, KB order
    std::vector<std::string> param_names;
    std::vector<ad::Tensor> param_values;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace kbqa
