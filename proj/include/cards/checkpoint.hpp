#pragma once

#include <string>

#include "cards/net.hpp"

namespace cards::nn {

// Versioned binary container for a network: magic "CNET", format version,
// then per-layer records (kind, precision, shapes, raw float32 payloads,
// packed mask bits, optional scores).  Round-trips are bit-exact.

inline constexpr std::uint32_t kCheckpointMagic = 0x54454e43u;  // "CNET"
inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace cards::nn
