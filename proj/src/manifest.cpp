#include "dygenc/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>

#include "dygenc/config.hpp"
#include "dygenc/errors.hpp"

namespace dygenc {

std::string git_blob_hash(const std::string& bytes) {
    const std::string data = "blob " + std::to_string(bytes.size()) + '\0' + bytes;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1) throw Error("SHA-1 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

std::string git_blob_hash_file(const std::filesystem::path& path) { return git_blob_hash(read_text_file(path.string())); }

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["corpus"] = corpus;
    j["corpus_hash"] = corpus_hash;
    j["checkpoint"] = checkpoint;
    j["metrics"] = metrics;
    j["artifacts"] = artifacts;
    return j;
}

void RunManifest::write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write manifest '" + path.string() + "'");
    out << to_json().dump(2) << '\n';
}

} // namespace dygenc
