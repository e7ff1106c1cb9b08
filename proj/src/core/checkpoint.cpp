#include "sfda/core/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "sfda/core/errors.hpp"

namespace sfda {

namespace {
constexpr char kMagic[8] = {'S', 'F', 'D', 'A', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (i * 8));
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (i * 8);
    return v;
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for write: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::string meta = ckpt.meta.dump();
    write_u64(out, meta.size());
    out.write(meta.data(), meta.size());
    write_u64(out, ckpt.tensors.size());
    for (const auto& [name, data] : ckpt.tensors) {
        write_u64(out, name.size());
        out.write(name.data(), name.size());
        write_u64(out, data.size());
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(float)));
    }
    if (!out) throw ConfigError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DependencyError("checkpoint not found: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw ConfigError("not a checkpoint file: " + path.string());
    Checkpoint ckpt;
    uint64_t metalen = read_u64(in);
    std::string meta(metalen, '\0');
    in.read(meta.data(), static_cast<std::streamsize>(metalen));
    ckpt.meta = nlohmann::json::parse(meta);
    uint64_t count = read_u64(in);
    ckpt.tensors.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        uint64_t namelen = read_u64(in);
        std::string name(namelen, '\0');
        in.read(name.data(), static_cast<std::streamsize>(namelen));
        uint64_t n = read_u64(in);
        std::vector<float> data(n);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        ckpt.tensors.emplace_back(std::move(name), std::move(data));
    }
    if (!in) throw ConfigError("truncated checkpoint: " + path.string());
    return ckpt;
}

}  // namespace sfda
