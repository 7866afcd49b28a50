#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trimodal/gaussian.hpp"

namespace trimodal {

// Parses a binary-little-endian PLY holding a 3DGS export. Requires vertex
// properties x y z opacity f_dc_0..2 scale_0..2 rot_0..3 (any scalar type);
// other vertex properties are skipped. Higher-order SH coefficients (f_rest_*)
// are ignored and reported once through `warnings` when given.
std::vector<RawGaussianRecord> parse_ply(std::span<const std::uint8_t> bytes,
                                         std::vector<std::string>* warnings = nullptr);

std::vector<RawGaussianRecord> read_ply(const std::filesystem::path& path,
                                        std::vector<std::string>* warnings = nullptr);

// Writes the minimal float32 layout that parse_ply accepts. Mainly for fixtures.
std::vector<std::uint8_t> write_ply(const std::vector<RawGaussianRecord>& records);

}  // namespace trimodal
