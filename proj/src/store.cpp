#include "trimodal/store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "binio.hpp"
#include "trimodal/errors.hpp"

namespace trimodal {

namespace {

constexpr char kMagic[4] = {'T', 'I', 'G', 'E'};

std::uint32_t angle_bits(std::optional<float> angle) {
    if (!angle || std::isnan(*angle)) return 0x7FC00000u;
    return std::bit_cast<std::uint32_t>(*angle);
}

}  // namespace

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::text: return "text";
        case Modality::image: return "image";
        case Modality::view: return "view";
        case Modality::g3d_image_space: return "g3d_image_space";
        case Modality::g3d_text_space: return "g3d_text_space";
        case Modality::teacher: return "teacher";
    }
    return "unknown";
}

std::optional<Modality> parse_modality(const std::string& name) {
    for (std::uint8_t i = 0; i <= 5; ++i) {
        const auto m = static_cast<Modality>(i);
        if (name == modality_name(m)) return m;
    }
    return std::nullopt;
}

bool EmbeddingRecord::operator==(const EmbeddingRecord& other) const {
    return id == other.id && modality == other.modality && angle_bits(angle) == angle_bits(other.angle) &&
           values == other.values;
}

EmbeddingStore::Key EmbeddingStore::key_of(const std::string& id, Modality m, std::optional<float> angle) {
    return {id, static_cast<std::uint8_t>(m), angle_bits(angle)};
}

void EmbeddingStore::add(EmbeddingRecord record) {
    if (record.values.size() != dim_) {
        throw DimensionError("store: record '" + record.id + "' has width " + std::to_string(record.values.size()) +
                             ", store width is " + std::to_string(dim_));
    }
    if (record.angle && std::isnan(*record.angle)) record.angle.reset();
    for (auto& v : record.values) {
        if (!std::isfinite(v)) throw ContractError("store: record '" + record.id + "' has a non-finite value");
        v = static_cast<double>(static_cast<float>(v));
    }
    auto key = key_of(record.id, record.modality, record.angle);
    if (!keys_.insert(key).second) {
        throw ContractError("store: duplicate record (" + record.id + ", " + modality_name(record.modality) + ")");
    }
    records_.push_back(std::move(record));
}

void EmbeddingStore::add(const std::string& id, Modality m, std::span<const double> values,
                         std::optional<float> angle) {
    add(EmbeddingRecord{id, m, angle, std::vector<double>(values.begin(), values.end())});
}

const EmbeddingRecord* EmbeddingStore::find(const std::string& id, Modality m, std::optional<float> angle) const {
    if (!keys_.count(key_of(id, m, angle))) return nullptr;
    const auto bits = angle_bits(angle);
    for (const auto& r : records_) {
        if (r.id == id && r.modality == m && angle_bits(r.angle) == bits) return &r;
    }
    return nullptr;
}

std::vector<const EmbeddingRecord*> EmbeddingStore::filter(Modality m) const {
    std::vector<const EmbeddingRecord*> out;
    for (const auto& r : records_) {
        if (r.modality == m) out.push_back(&r);
    }
    return out;
}

std::vector<const EmbeddingRecord*> EmbeddingStore::find_all(const std::string& id, Modality m) const {
    std::vector<const EmbeddingRecord*> out;
    for (const auto& r : records_) {
        if (r.id == id && r.modality == m) out.push_back(&r);
    }
    return out;
}

std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store) {
    detail::ByteWriter w;
    w.bytes(kMagic, 4);
    w.put<std::uint32_t>(EmbeddingStore::kVersion);
    w.put<std::uint32_t>(store.dim());
    w.put<std::uint64_t>(store.size());
    for (const auto& r : store.records()) {
        w.str16(r.id);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(r.modality));
        w.put<std::uint32_t>(angle_bits(r.angle));
        for (double v : r.values) w.put<float>(static_cast<float>(v));
    }
    return std::move(w.buffer());
}

EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes, std::optional<std::uint32_t> expected_dim) {
    detail::ByteReader r(bytes, "embedding store");
    char magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("embedding store: bad magic, expected 'TIGE'");
    const auto version = r.get<std::uint32_t>();
    if (version > EmbeddingStore::kVersion) {
        throw FormatError("embedding store: version " + std::to_string(version) + " is newer than supported version " +
                          std::to_string(EmbeddingStore::kVersion));
    }
    if (version < EmbeddingStore::kVersion) {
        throw FormatError("embedding store: version " + std::to_string(version) + " is not supported");
    }
    const auto dim = r.get<std::uint32_t>();
    if (expected_dim && dim != *expected_dim) {
        throw FormatError("embedding store: width " + std::to_string(dim) + " does not match expected " +
                          std::to_string(*expected_dim));
    }
    const auto count = r.get<std::uint64_t>();
    EmbeddingStore store(dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        EmbeddingRecord rec;
        rec.id = r.str16();
        const auto tag = r.get<std::uint8_t>();
        if (tag > 5) {
            throw FormatError("embedding store: unknown modality tag " + std::to_string(tag) + " at byte offset " +
                              std::to_string(r.offset() - 1));
        }
        rec.modality = static_cast<Modality>(tag);
        const float angle = std::bit_cast<float>(r.get<std::uint32_t>());
        if (!std::isnan(angle)) rec.angle = angle;
        r.need(static_cast<std::size_t>(dim) * 4);
        rec.values.resize(dim);
        for (auto& v : rec.values) v = r.get<float>();
        try {
            store.add(std::move(rec));
        } catch (const ContractError& e) {
            throw FormatError(std::string("embedding store: ") + e.what());
        }
    }
    if (!r.done()) throw FormatError("embedding store: trailing bytes at offset " + std::to_string(r.offset()));
    return store;
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
    detail::write_file(path, serialize_store(store));
}

EmbeddingStore load_store(const std::filesystem::path& path, std::optional<std::uint32_t> expected_dim) {
    return deserialize_store(detail::read_file(path), expected_dim);
}

std::vector<Hit> cosine_index_topk(const EmbeddingStore& store, std::span<const double> query, std::size_t k,
                                   std::optional<Modality> filter) {
    if (query.size() != store.dim()) {
        throw DimensionError("cosine_index_topk: query width " + std::to_string(query.size()) +
                             " does not match store width " + std::to_string(store.dim()));
    }
    double qn = 0.0;
    for (double v : query) qn += v * v;
    qn = std::sqrt(qn);
    if (qn < 1e-12) throw DegenerateInputError("cosine_index_topk: zero query vector");

    std::vector<Hit> hits;
    const auto& recs = store.records();
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (filter && recs[i].modality != *filter) continue;
        double dot = 0.0, rn = 0.0;
        for (std::size_t j = 0; j < query.size(); ++j) {
            dot += query[j] * recs[i].values[j];
            rn += recs[i].values[j] * recs[i].values[j];
        }
        rn = std::sqrt(rn);
        hits.push_back({recs[i].id, rn > 0.0 ? dot / (qn * rn) : 0.0, i});
    }
    if (hits.empty()) throw ContractError("cosine_index_topk: no records match the modality filter");
    auto better = [](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.id != b.id) return a.id < b.id;
        return a.index < b.index;
    };
    k = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), better);
    hits.resize(k);
    return hits;
}

}  // namespace trimodal
