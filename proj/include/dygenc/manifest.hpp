#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dygenc/json.hpp"

namespace dygenc {

// SHA-1 over "blob <size>\0" followed by the bytes, as git hashes file contents.
std::string git_blob_hash(const std::string& bytes);
std::string git_blob_hash_file(const std::filesystem::path& path);

// Record of one CLI run. Holds no timestamps so identical runs produce
// identical manifests.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::uint64_t seed = 0;
    std::string corpus;
    std::string corpus_hash;
    std::string checkpoint;
    std::vector<std::string> metrics;    // CSV paths
    std::vector<std::string> artifacts;  // every file or directory written

    nlohmann::ordered_json to_json() const;
    void write(const std::filesystem::path& path) const;
};

} // namespace dygenc
