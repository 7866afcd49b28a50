#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trimodal/gaussian.hpp"

namespace trimodal {

struct ShardObject {
    std::string id;
    GaussianCloud cloud;
    bool operator==(const ShardObject&) const = default;
};

// Canonical activated-Gaussian shard. Little-endian: "TIGS", u32 version,
// u64 object count, then per object u16 id length, id bytes, u64 Gaussian
// count and 14 f64 per Gaussian (position xyz, opacity, color rgb,
// scale xyz, rotation wxyz). Doubles keep activated values bit-exact.
inline constexpr std::uint32_t kShardVersion = 1;

std::vector<std::uint8_t> serialize_shard(const std::vector<ShardObject>& objects);
std::vector<ShardObject> deserialize_shard(std::span<const std::uint8_t> bytes);
void save_shard(const std::vector<ShardObject>& objects, const std::filesystem::path& path);
std::vector<ShardObject> load_shard(const std::filesystem::path& path);

}  // namespace trimodal
