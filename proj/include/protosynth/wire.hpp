#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "protosynth/errors.hpp"

namespace protosynth::wire {

enum class WireType : std::uint8_t {
    varint = 0,
    fixed64 = 1,
    length_delimited = 2,
    start_group = 3,
    end_group = 4,
    fixed32 = 5,
};

inline std::uint64_t zigzag_encode(std::int64_t v) {
    return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

inline std::int64_t zigzag_decode(std::uint64_t v) {
    return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1);
}

inline std::size_t varint_size(std::uint64_t v) {
    std::size_t n = 1;
    while (v >= 0x80) {
        v >>= 7;
        ++n;
    }
    return n;
}

class Writer {
public:
    explicit Writer(std::string& out) : out_(out) {}

    void varint(std::uint64_t v) {
        while (v >= 0x80) {
            out_.push_back(static_cast<char>((v & 0x7f) | 0x80));
            v >>= 7;
        }
        out_.push_back(static_cast<char>(v));
    }

    void tag(std::uint32_t field_number, WireType type) {
        varint((static_cast<std::uint64_t>(field_number) << 3) | static_cast<std::uint64_t>(type));
    }

    void fixed32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }

    void fixed64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }

    void bytes(std::string_view s) {
        varint(s.size());
        out_.append(s);
    }

    std::string& buffer() { return out_; }

private:
    std::string& out_;
};

// Cursor over a byte range that reports absolute offsets in errors. base is the
// offset of data[0] within the outermost buffer.
class Reader {
public:
    explicit Reader(std::string_view data, std::size_t base = 0) : data_(data), base_(base) {}

    bool done() const { return pos_ >= data_.size(); }
    std::size_t offset() const { return base_ + pos_; }

    std::uint64_t varint() {
        std::uint64_t result = 0;
        const std::size_t start = offset();
        for (int shift = 0; shift < 64; shift += 7) {
            if (pos_ >= data_.size()) throw ParseError("truncated varint", start);
            const auto byte = static_cast<std::uint8_t>(data_[pos_++]);
            result |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
            if ((byte & 0x80) == 0) return result;
        }
        throw ParseError("varint longer than 10 bytes", start);
    }

    std::uint32_t fixed32() {
        need(4, "truncated fixed32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t fixed64() {
        need(8, "truncated fixed64");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    // Returns a sub-reader over the next length-delimited payload.
    Reader sub() {
        const std::size_t start = offset();
        const std::uint64_t len = varint();
        if (len > data_.size() - pos_) throw ParseError("length-delimited field overruns buffer", start);
        Reader r(data_.substr(pos_, len), base_ + pos_);
        pos_ += len;
        return r;
    }

    std::string_view bytes() {
        Reader r = sub();
        return r.data_;
    }

    struct Tag {
        std::uint32_t field_number;
        WireType type;
        std::size_t offset;
    };

    Tag tag() {
        const std::size_t start = offset();
        const std::uint64_t raw = varint();
        const auto number = raw >> 3;
        const auto type = static_cast<std::uint8_t>(raw & 7);
        if (number == 0 || number > 536870911) throw ParseError("invalid field number", start);
        if (type > 5) throw ParseError("invalid wire type " + std::to_string(type), start);
        return {static_cast<std::uint32_t>(number), static_cast<WireType>(type), start};
    }

    void skip(const Tag& t) {
        switch (t.type) {
            case WireType::varint: varint(); break;
            case WireType::fixed64: need(8, "truncated fixed64"); pos_ += 8; break;
            case WireType::length_delimited: sub(); break;
            case WireType::fixed32: need(4, "truncated fixed32"); pos_ += 4; break;
            case WireType::start_group: skip_group(t.field_number); break;
            case WireType::end_group: throw ParseError("unexpected end-group", t.offset);
        }
    }

private:
    void need(std::size_t n, const char* what) const {
        if (data_.size() - pos_ < n) throw ParseError(what, offset());
    }

    void skip_group(std::uint32_t number) {
        while (true) {
            if (done()) throw ParseError("unterminated group", offset());
            const Tag t = tag();
            if (t.type == WireType::end_group) {
                if (t.field_number != number) throw ParseError("mismatched end-group", t.offset);
                return;
            }
            skip(t);
        }
    }

    std::string_view data_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

inline std::uint32_t float_bits(float f) { return std::bit_cast<std::uint32_t>(f); }
inline std::uint64_t double_bits(double d) { return std::bit_cast<std::uint64_t>(d); }
inline float bits_float(std::uint32_t v) { return std::bit_cast<float>(v); }
inline double bits_double(std::uint64_t v) { return std::bit_cast<double>(v); }

}  // namespace protosynth::wire
