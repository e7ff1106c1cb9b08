#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sfda {

// Versioned binary container: JSON metadata plus named float32 arrays,
// round-trips bit-exactly. Both model kinds (segmentation net, denoising
// autoencoder) share this format and are told apart by meta["model_kind"].
struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, std::vector<float>>> tensors;

    const std::vector<float>* find(const std::string& name) const {
        for (const auto& [n, v] : tensors)
            if (n == name) return &v;
        return nullptr;
    }
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sfda
