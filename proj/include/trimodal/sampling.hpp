#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "trimodal/gaussian.hpp"

namespace trimodal {

// Greedy farthest point sampling. The first pick is the point farthest from
// the centroid, each later pick maximizes the squared distance to the chosen
// set, and ties always go to the lowest index. The result is sorted
// ascending. When m > n every index is taken and the list is filled by
// cycling (index k mod n), so small clouds still produce m entries.
// `seed` is accepted for interface stability; the procedure is deterministic.
std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> positions, std::size_t m,
                                               std::uint64_t seed = 0);

// Local patches over a sampled subset of a cloud.
struct PatchSet {
    std::vector<std::size_t> subset;     // cloud indices of the sampled Gaussians
    std::size_t patch_count = 0;         // P
    std::size_t patch_size = 0;          // K
    std::vector<std::size_t> centers;    // P indices into `subset`
    std::vector<std::size_t> members;    // P*K indices into `subset`, row-major by patch
    std::vector<Vec3> relative;          // P*K member positions minus their center

    std::size_t member(std::size_t p, std::size_t k) const { return members[p * patch_size + k]; }
};

// Patch centers come from a second FPS over the subset. Each patch holds its
// center first, then the K-1 nearest other subset entries by Euclidean
// distance (ties to the lowest subset index).
PatchSet knn_group(const GaussianCloud& cloud, std::span<const std::size_t> sampled_indices,
                   std::size_t patch_count, std::size_t patch_size, std::uint64_t seed = 0);

// normalize -> FPS(sample_count) -> knn_group in one call.
struct PreparedCloud {
    GaussianCloud cloud;  // normalized
    PatchSet patches;
};
PreparedCloud prepare_cloud(const GaussianCloud& raw, std::size_t sample_count, std::size_t patch_count,
                            std::size_t patch_size, std::uint64_t seed = 0);

}  // namespace trimodal
