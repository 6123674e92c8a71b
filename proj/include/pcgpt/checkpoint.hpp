#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcgpt/common.hpp"
#include "pcgpt/tensor.hpp"

// Checkpoint format: the magic string "PCGPT1", a little-endian uint64 header
// length, a JSON header (model config plus a parameter manifest with shapes
// and byte offsets), then raw little-endian float32 blocks in manifest order.

namespace pcgpt::num {

inline constexpr char kCheckpointMagic[6] = {'P', 'C', 'G', 'P', 'T', '1'};

struct CheckpointParam {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

struct Checkpoint {
    nlohmann::json model_config;
    std::vector<CheckpointParam> params;

    const CheckpointParam& find(const std::string& name) const {
        for (const auto& p : params)
            if (p.name == name) return p;
        throw DimensionError("checkpoint: missing parameter " + name);
    }
};

template <class S>
void save_checkpoint(const std::string& path, const nlohmann::json& model_config,
                     const std::vector<std::pair<std::string, Tensor<S>>>& params) {
    nlohmann::json manifest = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& [name, tensor] : params) {
        manifest.push_back({{"name", name},
                            {"shape", tensor.shape()},
                            {"offset", offset},
                            {"count", tensor.numel()}});
        offset += static_cast<uint64_t>(tensor.numel()) * sizeof(float);
    }
    const nlohmann::json header = {{"model", model_config}, {"params", manifest}};
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    uint64_t header_len = header_text.size();
    char len_bytes[8];
    for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<char>((header_len >> (8 * i)) & 0xff);
    out.write(len_bytes, 8);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& [name, tensor] : params) {
        (void)name;
        for (S v : tensor.value()) {
            const float f = static_cast<float>(v);
            uint32_t bits;
            std::memcpy(&bits, &f, sizeof(bits));
            char b[4];
            for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
            out.write(b, 4);
        }
    }
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kCheckpointMagic, 6) != 0)
        throw IoError("load_checkpoint: bad magic in " + path);
    char len_bytes[8];
    in.read(len_bytes, 8);
    if (!in) throw IoError("load_checkpoint: truncated header length in " + path);
    uint64_t header_len = 0;
    for (int i = 0; i < 8; ++i)
        header_len |= static_cast<uint64_t>(static_cast<unsigned char>(len_bytes[i])) << (8 * i);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw IoError("load_checkpoint: truncated header in " + path);

    Checkpoint ckpt;
    const nlohmann::json header = nlohmann::json::parse(header_text);
    ckpt.model_config = header.at("model");
    for (const auto& entry : header.at("params")) {
        CheckpointParam p;
        p.name = entry.at("name").get<std::string>();
        p.shape = entry.at("shape").get<std::vector<int>>();
        const int64_t count = entry.at("count").get<int64_t>();
        if (count != shape_numel(p.shape))
            throw IoError("load_checkpoint: manifest count mismatch for " + p.name);
        p.data.resize(static_cast<size_t>(count));
        for (int64_t i = 0; i < count; ++i) {
            char b[4];
            in.read(b, 4);
            if (!in) throw IoError("load_checkpoint: truncated data for " + p.name);
            uint32_t bits = 0;
            for (int k = 0; k < 4; ++k)
                bits |= static_cast<uint32_t>(static_cast<unsigned char>(b[k])) << (8 * k);
            float f;
            std::memcpy(&f, &bits, sizeof(f));
            p.data[static_cast<size_t>(i)] = f;
        }
        ckpt.params.push_back(std::move(p));
    }
    return ckpt;
}

inline nlohmann::json checkpoint_header_json(const std::string& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    nlohmann::json manifest = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& p : ckpt.params) {
        manifest.push_back({{"name", p.name},
                            {"shape", p.shape},
                            {"offset", offset},
                            {"count", p.data.size()}});
        offset += p.data.size() * sizeof(float);
    }
    return {{"model", ckpt.model_config}, {"params", manifest}};
}

}  // namespace pcgpt::num
