#include "trimodal/ply.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>

#include "trimodal/errors.hpp"

namespace trimodal {

namespace {

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<ScalarType> scalar_type(const std::string& s) {
    static const std::map<std::string, ScalarType> table = {
        {"char", ScalarType::i8},    {"int8", ScalarType::i8},     {"uchar", ScalarType::u8},
        {"uint8", ScalarType::u8},   {"short", ScalarType::i16},   {"int16", ScalarType::i16},
        {"ushort", ScalarType::u16}, {"uint16", ScalarType::u16},  {"int", ScalarType::i32},
        {"int32", ScalarType::i32},  {"uint", ScalarType::u32},    {"uint32", ScalarType::u32},
        {"float", ScalarType::f32},  {"float32", ScalarType::f32}, {"double", ScalarType::f64},
        {"float64", ScalarType::f64}};
    auto it = table.find(s);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

std::size_t type_size(ScalarType t) {
    switch (t) {
        case ScalarType::i8:
        case ScalarType::u8: return 1;
        case ScalarType::i16:
        case ScalarType::u16: return 2;
        case ScalarType::i32:
        case ScalarType::u32:
        case ScalarType::f32: return 4;
        case ScalarType::f64: return 8;
    }
    return 0;
}

template <class T>
T load_le(const std::uint8_t* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));  // host is little-endian (checked in CMake)
    return v;
}

double read_scalar(ScalarType t, const std::uint8_t* p) {
    switch (t) {
        case ScalarType::i8: return load_le<std::int8_t>(p);
        case ScalarType::u8: return load_le<std::uint8_t>(p);
        case ScalarType::i16: return load_le<std::int16_t>(p);
        case ScalarType::u16: return load_le<std::uint16_t>(p);
        case ScalarType::i32: return load_le<std::int32_t>(p);
        case ScalarType::u32: return load_le<std::uint32_t>(p);
        case ScalarType::f32: return load_le<float>(p);
        case ScalarType::f64: return load_le<double>(p);
    }
    return 0.0;
}

struct Property {
    std::string name;
    ScalarType type;
    std::size_t offset;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> props;
    std::size_t stride = 0;
};

constexpr std::array<const char*, 14> kRequired = {
    "x", "y", "z", "opacity", "f_dc_0", "f_dc_1", "f_dc_2",
    "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};

}  // namespace

std::vector<RawGaussianRecord> parse_ply(std::span<const std::uint8_t> bytes,
                                         std::vector<std::string>* warnings) {
    // Header is ASCII lines terminated by "end_header\n".
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const std::size_t start = pos;
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        if (pos >= bytes.size()) throw FormatError("ply: header not terminated by end_header");
        std::string line(reinterpret_cast<const char*>(bytes.data()) + start, pos - start);
        ++pos;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };

    if (next_line() != "ply") throw FormatError("ply: missing 'ply' magic line");
    std::vector<Element> elements;
    bool format_seen = false;
    for (;;) {
        const std::string line = next_line();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "end_header") break;
        if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian") {
                throw FormatError("ply: unsupported format '" + fmt + "', expected binary_little_endian");
            }
            format_seen = true;
        } else if (kw == "element") {
            Element e;
            ls >> e.name >> e.count;
            if (!ls) throw FormatError("ply: malformed element line '" + line + "'");
            elements.push_back(std::move(e));
        } else if (kw == "property") {
            if (elements.empty()) throw FormatError("ply: property before any element");
            std::string type, name;
            ls >> type;
            if (type == "list") {
                throw FormatError("ply: list property in element '" + elements.back().name + "' is not supported");
            }
            ls >> name;
            auto st = scalar_type(type);
            if (!st) throw FormatError("ply: unknown property type '" + type + "'");
            auto& e = elements.back();
            e.props.push_back({name, *st, e.stride});
            e.stride += type_size(*st);
        } else {
            throw FormatError("ply: unexpected header keyword '" + kw + "'");
        }
    }
    if (!format_seen) throw FormatError("ply: missing format line");

    std::size_t offset = pos;
    for (const auto& e : elements) {
        if (e.name != "vertex") {
            offset += e.count * e.stride;
            continue;
        }
        std::array<const Property*, kRequired.size()> req{};
        for (std::size_t r = 0; r < kRequired.size(); ++r) {
            for (const auto& p : e.props) {
                if (p.name == kRequired[r]) req[r] = &p;
            }
            if (!req[r]) throw FormatError(std::string("ply: missing required vertex property '") + kRequired[r] + "'");
        }
        if (warnings) {
            for (const auto& p : e.props) {
                if (p.name.rfind("f_rest_", 0) == 0) {
                    warnings->push_back("ply: higher-order SH coefficients (f_rest_*) ignored, only DC color is used");
                    break;
                }
            }
        }
        const std::size_t need = e.count * e.stride;
        if (offset + need > bytes.size()) {
            const std::size_t bad_vertex = (bytes.size() - std::min(bytes.size(), offset)) / e.stride;
            throw FormatError("ply: truncated vertex payload at byte offset " +
                              std::to_string(offset + bad_vertex * e.stride) + " (vertex " +
                              std::to_string(bad_vertex) + " of " + std::to_string(e.count) + ")");
        }
        std::vector<RawGaussianRecord> out(e.count);
        for (std::size_t v = 0; v < e.count; ++v) {
            const std::uint8_t* base = bytes.data() + offset + v * e.stride;
            auto get = [&](std::size_t r) {
                const double x = read_scalar(req[r]->type, base + req[r]->offset);
                if (!std::isfinite(x)) {
                    throw FormatError("ply: non-finite '" + std::string(kRequired[r]) + "' in vertex " + std::to_string(v));
                }
                return x;
            };
            auto& rec = out[v];
            rec.position = {get(0), get(1), get(2)};
            rec.opacity_logit = get(3);
            rec.sh_dc = {get(4), get(5), get(6)};
            rec.log_scale = {get(7), get(8), get(9)};
            rec.rotation = {get(10), get(11), get(12), get(13)};
        }
        return out;
    }
    throw FormatError("ply: no vertex element");
}

std::vector<RawGaussianRecord> read_ply(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LookupError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_ply(bytes, warnings);
}

std::vector<std::uint8_t> write_ply(const std::vector<RawGaussianRecord>& records) {
    std::ostringstream hs;
    hs << "ply\nformat binary_little_endian 1.0\nelement vertex " << records.size() << "\n";
    for (const char* name : kRequired) hs << "property float " << name << "\n";
    hs << "end_header\n";
    const std::string header = hs.str();
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + records.size() * kRequired.size() * 4);
    auto put = [&](double v) {
        const float f = static_cast<float>(v);
        std::uint8_t b[4];
        std::memcpy(b, &f, 4);
        out.insert(out.end(), b, b + 4);
    };
    for (const auto& r : records) {
        for (double v : r.position) put(v);
        put(r.opacity_logit);
        for (double v : r.sh_dc) put(v);
        for (double v : r.log_scale) put(v);
        for (double v : r.rotation) put(v);
    }
    return out;
}

}  // namespace trimodal
