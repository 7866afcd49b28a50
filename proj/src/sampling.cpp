#include "trimodal/sampling.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "trimodal/errors.hpp"

namespace trimodal {

namespace {

double dist2(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

}  // namespace

std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> positions, std::size_t m,
                                               std::uint64_t /*seed*/) {
    if (m == 0) throw ContractError("farthest_point_sample: m must be at least 1");
    const std::size_t n = positions.size();
    if (n == 0) throw ContractError("farthest_point_sample: empty point set");
    std::vector<std::size_t> out;
    out.reserve(m);
    if (m >= n) {
        for (std::size_t k = 0; k < m; ++k) out.push_back(k % n);
        std::sort(out.begin(), out.end());
        return out;
    }

    Vec3 c{};
    for (const auto& p : positions)
        for (int k = 0; k < 3; ++k) c[k] += p[k];
    for (auto& v : c) v /= static_cast<double>(n);

    std::size_t first = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = dist2(positions[i], c);
        if (d > best) {
            best = d;
            first = i;
        }
    }
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
    std::vector<char> taken(n, 0);
    std::size_t cur = first;
    for (std::size_t s = 0; s < m; ++s) {
        out.push_back(cur);
        taken[cur] = 1;
        if (s + 1 == m) break;
        std::size_t next = n;
        double far = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            min_d[i] = std::min(min_d[i], dist2(positions[i], positions[cur]));
            if (!taken[i] && min_d[i] > far) {
                far = min_d[i];
                next = i;
            }
        }
        cur = next;
    }
    std::sort(out.begin(), out.end());
    return out;
}

PatchSet knn_group(const GaussianCloud& cloud, std::span<const std::size_t> sampled_indices,
                   std::size_t patch_count, std::size_t patch_size, std::uint64_t seed) {
    const std::size_t m = sampled_indices.size();
    if (patch_count == 0 || patch_size == 0) throw ContractError("knn_group: P and K must be positive");
    if (patch_count > m || patch_size > m) {
        throw ContractError("knn_group: P=" + std::to_string(patch_count) + ", K=" + std::to_string(patch_size) +
                            " exceed the sampled subset size " + std::to_string(m));
    }
    PatchSet ps;
    ps.subset.assign(sampled_indices.begin(), sampled_indices.end());
    ps.patch_count = patch_count;
    ps.patch_size = patch_size;
    std::vector<Vec3> pts(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (sampled_indices[i] >= cloud.size()) throw ContractError("knn_group: sampled index out of range");
        pts[i] = cloud.gaussians[sampled_indices[i]].position;
    }
    ps.centers = farthest_point_sample(pts, patch_count, seed);

    std::vector<std::pair<double, std::size_t>> order(m);
    for (std::size_t c : ps.centers) {
        for (std::size_t i = 0; i < m; ++i) order[i] = {dist2(pts[i], pts[c]), i};
        // center first regardless of duplicates at distance zero
        order[c].first = -1.0;
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(patch_size), order.end());
        for (std::size_t k = 0; k < patch_size; ++k) {
            const std::size_t idx = order[k].second;
            ps.members.push_back(idx);
            ps.relative.push_back({pts[idx][0] - pts[c][0], pts[idx][1] - pts[c][1], pts[idx][2] - pts[c][2]});
        }
    }
    return ps;
}

PreparedCloud prepare_cloud(const GaussianCloud& raw, std::size_t sample_count, std::size_t patch_count,
                            std::size_t patch_size, std::uint64_t seed) {
    PreparedCloud out;
    out.cloud = normalize_cloud(raw);
    const auto positions = out.cloud.positions();
    const auto sampled = farthest_point_sample(positions, sample_count, seed);
    out.patches = knn_group(out.cloud, sampled, patch_count, patch_size, seed);
    return out;
}

}  // namespace trimodal
