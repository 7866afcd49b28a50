#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace trimodal {

enum class Modality : std::uint8_t {
    text = 0,
    image = 1,
    view = 2,
    g3d_image_space = 3,
    g3d_text_space = 4,
    teacher = 5,
};

const char* modality_name(Modality m);
std::optional<Modality> parse_modality(const std::string& name);

// One stored vector. Values are kept as doubles in memory but are always
// exactly representable as float32, the on-disk precision.
struct EmbeddingRecord {
    std::string id;
    Modality modality = Modality::text;
    std::optional<float> angle;  // view azimuth in degrees, or row index for teacher features
    std::vector<double> values;

    bool operator==(const EmbeddingRecord& other) const;
};

// Ordered collection of same-width embeddings, unique by (id, modality, angle).
class EmbeddingStore {
public:
    static constexpr std::uint32_t kVersion = 1;

    explicit EmbeddingStore(std::uint32_t dim = 0) : dim_(dim) {}

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const std::vector<EmbeddingRecord>& records() const { return records_; }

    // Rounds values to float32. Throws DimensionError on width mismatch and
    // ContractError on a duplicate key.
    void add(EmbeddingRecord record);
    void add(const std::string& id, Modality m, std::span<const double> values,
             std::optional<float> angle = std::nullopt);

    const EmbeddingRecord* find(const std::string& id, Modality m, std::optional<float> angle = std::nullopt) const;
    std::vector<const EmbeddingRecord*> filter(Modality m) const;
    // Every record with this id and modality, in insertion order.
    std::vector<const EmbeddingRecord*> find_all(const std::string& id, Modality m) const;

    bool operator==(const EmbeddingStore& other) const { return dim_ == other.dim_ && records_ == other.records_; }

private:
    using Key = std::tuple<std::string, std::uint8_t, std::uint32_t>;
    static Key key_of(const std::string& id, Modality m, std::optional<float> angle);

    std::uint32_t dim_;
    std::vector<EmbeddingRecord> records_;
    std::set<Key> keys_;
};

// Byte layout (little-endian): "TIGE", u32 version, u32 d, u64 count, then per
// record u16 id length, id bytes, u8 modality, f32 angle (NaN when absent),
// d x f32 values.
std::vector<std::uint8_t> serialize_store(const EmbeddingStore& store);
EmbeddingStore deserialize_store(std::span<const std::uint8_t> bytes,
                                 std::optional<std::uint32_t> expected_dim = std::nullopt);
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore load_store(const std::filesystem::path& path, std::optional<std::uint32_t> expected_dim = std::nullopt);

struct Hit {
    std::string id;
    double score = 0.0;
    std::size_t index = 0;  // position in the store
};

// Exact top-k by cosine similarity (dot product of unit-normalized vectors),
// ties broken by id then insertion order. Throws ContractError when the
// filtered set is empty and DimensionError on a width mismatch.
std::vector<Hit> cosine_index_topk(const EmbeddingStore& store, std::span<const double> query, std::size_t k,
                                   std::optional<Modality> filter = std::nullopt);

}  // namespace trimodal
