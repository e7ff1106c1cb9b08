#pragma once

#include <cstdint>
#include <string>

namespace sfda {

// SHA-256 of a byte string, lowercase hex. Used to fingerprint configs and
// bind checkpoints to the run that produced them.
std::string sha256_hex(const std::string& bytes);

}  // namespace sfda
