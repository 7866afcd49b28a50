#include "trimodal/checkpoint.hpp"

#include "binio.hpp"
#include "trimodal/errors.hpp"

namespace trimodal {

namespace {
constexpr char kMagic[4] = {'T', 'I', 'G', 'C'};
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    detail::ByteWriter w;
    w.bytes(kMagic, 4);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.str32(ckpt.config_text);
    w.put<std::uint64_t>(ckpt.step);
    w.put<std::uint64_t>(ckpt.adam.step);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& [name, t] : ckpt.params) {
        w.str16(name);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t e : t.shape) w.put<std::uint64_t>(e);
        w.bytes(t.values.data(), t.values.size() * sizeof(double));
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.adam.moments.size()));
    for (const auto& [name, mom] : ckpt.adam.moments) {
        if (mom.m.size() != mom.v.size()) throw ContractError("checkpoint: moment sizes differ for " + name);
        w.str16(name);
        w.put<std::uint64_t>(mom.m.size());
        w.bytes(mom.m.data(), mom.m.size() * sizeof(double));
        w.bytes(mom.v.data(), mom.v.size() * sizeof(double));
    }
    return std::move(w.buffer());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes, "checkpoint");
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint c;
    c.config_text = r.str32();
    c.step = r.get<std::uint64_t>();
    c.adam.step = r.get<std::uint64_t>();
    const auto n_params = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::string name = r.str16();
        const auto rank = r.get<std::uint32_t>();
        if (rank == 0 || rank > 8) throw FormatError("checkpoint: tensor " + name + " has rank " + std::to_string(rank));
        Shape shape(rank);
        for (auto& e : shape) e = r.get<std::uint64_t>();
        const std::size_t n = shape_numel(shape);
        r.need(n * sizeof(double));
        std::vector<double> values(n);
        r.bytes(values.data(), n * sizeof(double));
        c.params.add(name, Tensor(shape, std::move(values)));
    }
    const auto n_moments = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_moments; ++i) {
        const std::string name = r.str16();
        const auto n = r.get<std::uint64_t>();
        r.need(2 * n * sizeof(double));
        AdamMoments mom;
        mom.m.resize(n);
        mom.v.resize(n);
        r.bytes(mom.m.data(), n * sizeof(double));
        r.bytes(mom.v.data(), n * sizeof(double));
        c.adam.moments.emplace(name, std::move(mom));
    }
    if (!r.done()) throw FormatError("checkpoint: trailing bytes at offset " + std::to_string(r.offset()));
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    detail::write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(detail::read_file(path));
}

}  // namespace trimodal
