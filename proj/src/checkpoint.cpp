#include "dygenc/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "dygenc/errors.hpp"

namespace dygenc {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {
constexpr const char* kDtype = sizeof(real) == 8 ? "f64" : "f32";
}

const TensorRecord* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["format"] = "dygenc-checkpoint";
    manifest["version"] = kCheckpointVersion;
    manifest["dtype"] = kDtype;
    auto& list = manifest["tensors"] = nlohmann::ordered_json::array();
    std::size_t offset = 0;
    std::ofstream bin(dir / "tensors.bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw Error("cannot write " + (dir / "tensors.bin").string());
    for (const auto& t : ckpt.tensors) {
        list.push_back({{"name", t.name},
                        {"group", to_string(t.group)},
                        {"shape", t.value.shape()},
                        {"offset", offset},
                        {"count", t.value.size()}});
        bin.write(reinterpret_cast<const char*>(t.value.data()), std::streamsize(t.value.size() * sizeof(real)));
        offset += t.value.size();
    }
    manifest["meta"] = ckpt.meta;
    std::ofstream man(dir / "manifest.json", std::ios::trunc);
    if (!man) throw Error("cannot write " + (dir / "manifest.json").string());
    man << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream man(dir / "manifest.json");
    if (!man) throw Error("cannot read checkpoint manifest in " + dir.string());
    nlohmann::ordered_json manifest;
    try {
        man >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed checkpoint manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "dygenc-checkpoint") throw Error("not a dygenc checkpoint: " + dir.string());
    if (manifest.value("version", 0) != kCheckpointVersion) throw Error("unsupported checkpoint version");
    if (manifest.value("dtype", "") != kDtype)
        throw Error("checkpoint dtype " + manifest.value("dtype", std::string("?")) + " does not match build dtype " + kDtype);
    std::ifstream bin(dir / "tensors.bin", std::ios::binary);
    if (!bin) throw Error("cannot read tensors.bin in " + dir.string());
    Checkpoint ckpt;
    for (const auto& rec : manifest["tensors"]) {
        Tensor t(rec["shape"].get<std::vector<std::size_t>>());
        if (t.size() != rec["count"].get<std::size_t>()) throw Error("checkpoint tensor count mismatch");
        bin.seekg(std::streamoff(rec["offset"].get<std::size_t>() * sizeof(real)));
        bin.read(reinterpret_cast<char*>(t.data()), std::streamsize(t.size() * sizeof(real)));
        if (!bin) throw Error("truncated tensors.bin");
        ckpt.tensors.push_back({rec["name"].get<std::string>(), param_group_from_string(rec["group"]), std::move(t)});
    }
    ckpt.meta = manifest.value("meta", nlohmann::ordered_json::object());
    return ckpt;
}

Checkpoint snapshot(const ParameterSet& params, nlohmann::ordered_json meta) {
    Checkpoint c;
    for (const auto& p : params.all()) c.tensors.push_back({p.name, p.group, p.var.value()});
    c.meta = std::move(meta);
    return c;
}

void restore(ParameterSet& params, const Checkpoint& ckpt) {
    for (const auto& rec : ckpt.tensors) {
        Parameter* p = params.find(rec.name);
        if (!p) continue;
        if (!p->var.value().same_shape(rec.value))
            throw ShapeError("checkpoint tensor '" + rec.name + "' has shape " + shape_str(rec.value.shape()) +
                             ", model expects " + shape_str(p->var.value().shape()));
        p->var.mutable_value() = rec.value;
    }
}

} // namespace dygenc
