#pragma once

// Checkpoint layout (a directory):
//   manifest.json  {"format":"dygenc-checkpoint","version":1,"dtype":"f64"|"f32",
//                   "tensors":[{"name","group","shape","offset","count"}...],
//                   "meta":{...free-form...}}
//   tensors.bin    every tensor's elements back to back, little-endian,
//                  in manifest order; offset/count are in elements.

#include <filesystem>
#include <string>
#include <vector>

#include "dygenc/json.hpp"
#include "dygenc/nn.hpp"

namespace dygenc {

struct TensorRecord {
    std::string name;
    ParamGroup group;
    Tensor value;
};

struct Checkpoint {
    std::vector<TensorRecord> tensors;
    nlohmann::ordered_json meta;

    const TensorRecord* find(const std::string& name) const;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

Checkpoint snapshot(const ParameterSet& params, nlohmann::ordered_json meta = nlohmann::ordered_json::object());
// Copies values for every parameter present in the checkpoint; shape mismatches
// throw. Parameters absent from the checkpoint keep their values.
void restore(ParameterSet& params, const Checkpoint& ckpt);

} // namespace dygenc
