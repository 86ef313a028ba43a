#include "camnet/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <vector>

#include "camnet/config.hpp"
#include "camnet/image_io.hpp"

namespace camnet {

namespace {

const char kMagic[4] = {'C', 'A', 'M', 'N'};

void put_u32le(std::ofstream& f, uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                    static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32le(std::ifstream& f, const std::string& what) {
    uint8_t b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f.good()) throw IoError("load_checkpoint: truncated " + what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

std::vector<ParamSlot> sorted_slots(CascadeWeights& weights) {
    std::vector<ParamSlot> slots = weights.slots();
    std::sort(slots.begin(), slots.end(),
              [](const ParamSlot& a, const ParamSlot& b) { return a.name < b.name; });
    return slots;
}

}  // namespace

void save_checkpoint(const std::string& path, CascadeWeights& weights, uint64_t seed, int step) {
    std::ofstream f(path, std::ios::binary);
    if (!f.good()) throw IoError("save_checkpoint: cannot open " + path);
    f.write(kMagic, 4);
    put_u32le(f, kCheckpointVersion);
    nlohmann::json header{{"cascade", cascade_to_json(weights.cfg)},
                          {"seed", seed},
                          {"step", step}};
    std::string hs = header.dump();
    put_u32le(f, static_cast<uint32_t>(hs.size()));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    static_assert(sizeof(float) == 4);
    for (const ParamSlot& s : sorted_slots(weights))
        f.write(reinterpret_cast<const char*>(s.value->data.data()),
                static_cast<std::streamsize>(s.value->data.size() * 4));
    if (!f.good()) throw IoError("save_checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f.good()) throw IoError("load_checkpoint: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f.good() || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("load_checkpoint: " + path + " is not a checkpoint file");
    uint32_t version = get_u32le(f, "version");
    if (version != kCheckpointVersion)
        throw IoError("load_checkpoint: version mismatch in " + path + ": file has " +
                      std::to_string(version) + ", expected " +
                      std::to_string(kCheckpointVersion));
    uint32_t hlen = get_u32le(f, "header length");
    std::string hs(hlen, '\0');
    f.read(hs.data(), hlen);
    if (!f.good()) throw IoError("load_checkpoint: truncated header in " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_checkpoint: malformed header in " + path + ": " + e.what());
    }
    Checkpoint ckpt;
    try {
        CascadeConfig cfg = cascade_from_json(header.at("cascade"));
        ckpt.seed = header.at("seed").get<uint64_t>();
        ckpt.step = header.at("step").get<int>();
        ckpt.weights = init_weights(cfg, /*seed=*/0);
    } catch (const std::exception& e) {
        throw IoError("load_checkpoint: bad header in " + path + ": " + e.what());
    }
    for (const ParamSlot& s : sorted_slots(ckpt.weights)) {
        f.read(reinterpret_cast<char*>(s.value->data.data()),
               static_cast<std::streamsize>(s.value->data.size() * 4));
        if (!f.good())
            throw IoError("load_checkpoint: truncated parameter data in " + path + " at slot " +
                          s.name);
    }
    // refresh weight-normalized effective values from the restored (v, g)
    for (Param* p : ckpt.weights.params()) p->refresh();
    char extra;
    if (f.read(&extra, 1))
        throw IoError("load_checkpoint: trailing bytes in " + path);
    return ckpt;
}

}  // namespace camnet
