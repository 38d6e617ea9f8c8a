#include "ssn/checkpoint.hpp"

#include "ssn/errors.hpp"
#include "ssn/text.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace ssn {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "params.bin is written in host byte order");

void save_checkpoint(const std::string& dir, const CheckpointInfo& info, const std::vector<ConstTensorView>& tensors) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory '" + dir + "': " + ec.message());

    std::string payload;
    ordered_json table = ordered_json::array();
    for (const auto& t : tensors) {
        table.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"offset", payload.size() / 8}});
        payload.append(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(double));
    }

    ordered_json manifest;
    manifest["format"] = kCheckpointFormat;
    manifest["kind"] = info.kind;
    manifest["config_hash"] = info.config_hash;
    manifest["tensors"] = std::move(table);
    manifest["values"] = payload.size() / 8;
    manifest["checksum"] = hex64(fnv1a64(payload));
    manifest["metadata"] = info.metadata;

    // Payload first so a manifest never points at a missing file.
    const auto bin = (fs::path(dir) / "params.bin").string();
    {
        std::ofstream out(bin, std::ios::binary | std::ios::trunc);
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw IoError("cannot write '" + bin + "'");
    }
    const auto man = (fs::path(dir) / "manifest.json").string();
    std::ofstream out(man, std::ios::trunc);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("cannot write '" + man + "'");
}

ordered_json read_manifest(const std::string& dir) {
    const auto man = (fs::path(dir) / "manifest.json").string();
    std::ifstream in(man);
    if (!in) throw IoError("cannot open checkpoint manifest '" + man + "'");
    auto manifest = ordered_json::parse(in, nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object()) throw DataError("'" + man + "' is not valid JSON");
    for (const char* key : {"format", "kind", "config_hash", "tensors", "values", "checksum"})
        if (!manifest.contains(key)) throw DataError("'" + man + "' lacks '" + key + "'");
    if (manifest["format"] != kCheckpointFormat)
        throw DataError("'" + man + "' has unsupported format " + manifest["format"].dump());
    return manifest;
}

ordered_json load_checkpoint(const std::string& dir, const CheckpointInfo& expected,
                             const std::vector<TensorView>& tensors) {
    auto manifest = read_manifest(dir);
    if (manifest["kind"] != expected.kind)
        throw ConfigError("checkpoint '" + dir + "' holds a " + manifest["kind"].get<std::string>() + ", expected a " +
                          expected.kind);
    if (manifest["config_hash"] != expected.config_hash)
        throw ConfigError("checkpoint '" + dir + "' was trained with a different model configuration (hash " +
                          manifest["config_hash"].get<std::string>() + ", current " + expected.config_hash + ")");

    const auto& table = manifest["tensors"];
    if (!table.is_array() || table.size() != tensors.size())
        throw DataError("checkpoint '" + dir + "' tensor table does not match the model");

    const auto bin = (fs::path(dir) / "params.bin").string();
    std::ifstream in(bin, std::ios::binary);
    if (!in) throw IoError("cannot open '" + bin + "'");
    const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (payload.size() != manifest["values"].get<std::size_t>() * 8 ||
        hex64(fnv1a64(payload)) != manifest["checksum"].get<std::string>())
        throw DataError("checkpoint payload '" + bin + "' is truncated or corrupt");

    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& t = tensors[i];
        const auto& e = table[i];
        if (e.value("name", "") != t.name || e.value("rows", 0ul) != t.rows || e.value("cols", 0ul) != t.cols)
            throw DataError("checkpoint tensor " + std::to_string(i) + " (" + e.value("name", "?") +
                            ") does not match model tensor " + t.name + " " + std::to_string(t.rows) + "x" +
                            std::to_string(t.cols));
        const std::size_t offset = e.value("offset", 0ul);
        if ((offset + t.values.size()) * 8 > payload.size())
            throw DataError("checkpoint tensor " + t.name + " lies outside the payload");
        std::memcpy(t.values.data(), payload.data() + offset * 8, t.values.size() * sizeof(double));
    }
    return manifest;
}

}  // namespace ssn
