#pragma once

// Little-endian byte buffers shared by the store, shard and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "trimodal/errors.hpp"

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

namespace trimodal::detail {

class ByteWriter {
public:
    template <class T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    void str16(const std::string& s) {
        if (s.size() > 0xFFFF) throw ContractError("string longer than 65535 bytes: '" + s.substr(0, 32) + "...'");
        put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void str32(const std::string& s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> data, std::string what) : data_(data), what_(std::move(what)) {}

    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void bytes(void* out, std::size_t n) {
        need(n);
        std::memcpy(out, data_.data() + pos_, n);
        pos_ += n;
    }
    std::string str16() {
        const auto n = get<std::uint16_t>();
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::string str32() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::size_t offset() const { return pos_; }
    bool done() const { return pos_ == data_.size(); }
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) {
            throw FormatError(what_ + ": truncated at byte offset " + std::to_string(pos_) + " (need " +
                              std::to_string(n) + " more bytes, " + std::to_string(data_.size() - pos_) +
                              " available)");
        }
    }

private:
    std::span<const std::uint8_t> data_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace trimodal::detail
