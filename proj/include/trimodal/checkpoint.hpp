#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trimodal/optim.hpp"
#include "trimodal/tensor.hpp"

namespace trimodal {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string config_text;  // config_to_text snapshot
    std::uint64_t step = 0;
    ParamSet params;
    AdamState adam;
};

// "TIGC", u32 version, u32 config length + text, u64 step, u64 Adam step,
// u32 tensor count, then per tensor u16 name, u32 rank, u64 extents, f64
// values; u32 moment count, then per entry u16 name, u64 length, f64 m, f64 v.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace trimodal
