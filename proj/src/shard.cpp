#include "trimodal/shard.hpp"

#include <algorithm>

#include "binio.hpp"

namespace trimodal {

namespace {
constexpr char kMagic[4] = {'T', 'I', 'G', 'S'};
}

std::vector<std::uint8_t> serialize_shard(const std::vector<ShardObject>& objects) {
    detail::ByteWriter w;
    w.bytes(kMagic, 4);
    w.put<std::uint32_t>(kShardVersion);
    w.put<std::uint64_t>(objects.size());
    for (const auto& obj : objects) {
        w.str16(obj.id);
        w.put<std::uint64_t>(obj.cloud.size());
        for (const auto& g : obj.cloud.gaussians) {
            for (double v : g.position) w.put(v);
            w.put(g.opacity);
            for (double v : g.color) w.put(v);
            for (double v : g.scale) w.put(v);
            for (double v : g.rotation) w.put(v);
        }
    }
    return std::move(w.buffer());
}

std::vector<ShardObject> deserialize_shard(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes, "shard");
    char magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("shard: bad magic, expected 'TIGS'");
    const auto version = r.get<std::uint32_t>();
    if (version != kShardVersion) {
        throw FormatError("shard: unsupported version " + std::to_string(version) + " (supported: " +
                          std::to_string(kShardVersion) + ")");
    }
    const auto count = r.get<std::uint64_t>();
    std::vector<ShardObject> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        ShardObject obj;
        obj.id = r.str16();
        const auto n = r.get<std::uint64_t>();
        r.need(static_cast<std::size_t>(n) * 14 * sizeof(double));
        obj.cloud.gaussians.resize(n);
        for (auto& g : obj.cloud.gaussians) {
            for (double& v : g.position) v = r.get<double>();
            g.opacity = r.get<double>();
            for (double& v : g.color) v = r.get<double>();
            for (double& v : g.scale) v = r.get<double>();
            for (double& v : g.rotation) v = r.get<double>();
        }
        out.push_back(std::move(obj));
    }
    if (!r.done()) throw FormatError("shard: trailing bytes at offset " + std::to_string(r.offset()));
    return out;
}

void save_shard(const std::vector<ShardObject>& objects, const std::filesystem::path& path) {
    detail::write_file(path, serialize_shard(objects));
}

std::vector<ShardObject> load_shard(const std::filesystem::path& path) {
    return deserialize_shard(detail::read_file(path));
}

}  // namespace trimodal
