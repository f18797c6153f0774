#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "protosynth/errors.hpp"
#include "protosynth/schema.hpp"

namespace protosynth {

struct Message;
using MessagePtr = std::shared_ptr<const Message>;

struct EnumValue {
    std::int32_t number = 0;
    bool operator==(const EnumValue&) const = default;
};

// Signed integer kinds hold int64, unsigned kinds uint64, float/double hold
// double, string/bytes hold raw bytes.
using Value = std::variant<bool, std::int64_t, std::uint64_t, double, std::string, EnumValue, MessagePtr>;

// A dynamic message instance. fields[i] holds the values of type->fields[i];
// singular fields hold at most one value, an empty vector means unset.
struct Message {
    const MessageInfo* type = nullptr;
    std::vector<std::vector<Value>> fields;

    explicit Message(const MessageInfo& t) : type(&t), fields(t.fields.size()) {}

    bool has(std::size_t i) const { return !fields[i].empty(); }
    const std::vector<Value>& values(std::string_view name) const {
        const auto* f = type->find_field(name);
        if (!f) throw LookupError("no field '" + std::string(name) + "' in " + type->full_name);
        return fields[f->index];
    }
};

// Structural equality, following message pointers.
inline bool equal(const Message& a, const Message& b);

inline bool equal(const Value& a, const Value& b) {
    if (a.index() != b.index()) return false;
    if (const auto* ma = std::get_if<MessagePtr>(&a)) {
        const auto& mb = std::get<MessagePtr>(b);
        if (ma->get() == mb.get()) return true;
        return *ma && mb && equal(**ma, *mb);
    }
    if (const auto* da = std::get_if<double>(&a)) {
        const double db = std::get<double>(b);
        return (*da == db) || (std::isnan(*da) && std::isnan(db));
    }
    return a == b;
}

inline bool equal(const Message& a, const Message& b) {
    if (a.type != b.type || a.fields.size() != b.fields.size()) return false;
    for (std::size_t i = 0; i < a.fields.size(); ++i) {
        if (a.fields[i].size() != b.fields[i].size()) return false;
        for (std::size_t j = 0; j < a.fields[i].size(); ++j)
            if (!equal(a.fields[i][j], b.fields[i][j])) return false;
    }
    return true;
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string base64_encode(std::string_view in) {
    static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < in.size(); i += 3) {
        const std::uint32_t n = (static_cast<std::uint8_t>(in[i]) << 16) |
                                (static_cast<std::uint8_t>(in[i + 1]) << 8) |
                                static_cast<std::uint8_t>(in[i + 2]);
        out += table[(n >> 18) & 63];
        out += table[(n >> 12) & 63];
        out += table[(n >> 6) & 63];
        out += table[n & 63];
    }
    if (i + 1 == in.size()) {
        const std::uint32_t n = static_cast<std::uint8_t>(in[i]) << 16;
        out += table[(n >> 18) & 63];
        out += table[(n >> 12) & 63];
        out += "==";
    } else if (i + 2 == in.size()) {
        const std::uint32_t n = (static_cast<std::uint8_t>(in[i]) << 16) | (static_cast<std::uint8_t>(in[i + 1]) << 8);
        out += table[(n >> 18) & 63];
        out += table[(n >> 12) & 63];
        out += table[(n >> 6) & 63];
        out += '=';
    }
    return out;
}

inline std::string base64_decode(std::string_view in) {
    auto decode_char = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+' || c == '-') return 62;
        if (c == '/' || c == '_') return 63;
        return -1;
    };
    std::string out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : in) {
        if (c == '=') break;
        const int d = decode_char(c);
        if (d < 0) throw ValidationError("invalid base64");
        acc = (acc << 6) | static_cast<std::uint32_t>(d);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

// Canonical text key of a scalar value, used for frequency tables and rules.
// Enums key by value name, bytes by base64, floats by shortest round-trip.
inline std::string scalar_key(const FieldInfo& f, const Value& v) {
    switch (f.kind) {
        case FieldKind::bool_: return std::get<bool>(v) ? "true" : "false";
        case FieldKind::string: return std::get<std::string>(v);
        case FieldKind::bytes: return base64_encode(std::get<std::string>(v));
        case FieldKind::enum_: {
            const auto n = std::get<EnumValue>(v).number;
            if (f.enum_type)
                if (const auto* name = f.enum_type->name_of(n)) return *name;
            return std::to_string(n);
        }
        case FieldKind::double_:
        case FieldKind::float_: return format_double(std::get<double>(v));
        case FieldKind::message: return "<message>";
        default:
            if (is_signed_integer(f.kind)) return std::to_string(std::get<std::int64_t>(v));
            return std::to_string(std::get<std::uint64_t>(v));
    }
}

template <class T>
inline bool parse_number(std::string_view s, T& out) {
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::optional<double> parse_double_key(std::string_view s) {
    if (s == "NaN") return std::nan("");
    if (s == "Infinity") return HUGE_VAL;
    if (s == "-Infinity") return -HUGE_VAL;
    double d;
    if (parse_number(s, d)) return d;
    return std::nullopt;
}

// Inverse of scalar_key. Returns nullopt when the key does not type-check.
inline std::optional<Value> parse_scalar_key(const FieldInfo& f, std::string_view key) {
    switch (f.kind) {
        case FieldKind::bool_:
            if (key == "true") return Value{true};
            if (key == "false") return Value{false};
            return std::nullopt;
        case FieldKind::string: return Value{std::string(key)};
        case FieldKind::bytes:
            try {
                return Value{base64_decode(key)};
            } catch (const ValidationError&) {
                return std::nullopt;
            }
        case FieldKind::enum_: {
            if (f.enum_type)
                if (auto n = f.enum_type->number_of(key)) return Value{EnumValue{*n}};
            std::int32_t n;
            if (parse_number(key, n)) return Value{EnumValue{n}};
            return std::nullopt;
        }
        case FieldKind::double_:
        case FieldKind::float_: {
            auto d = parse_double_key(key);
            if (!d) return std::nullopt;
            if (f.kind == FieldKind::float_) return Value{static_cast<double>(static_cast<float>(*d))};
            return Value{*d};
        }
        case FieldKind::message: return std::nullopt;
        default:
            if (is_signed_integer(f.kind)) {
                std::int64_t n;
                if (!parse_number(key, n)) return std::nullopt;
                if (is_32bit(f.kind) && (n < INT32_MIN || n > INT32_MAX)) return std::nullopt;
                return Value{n};
            } else {
                std::uint64_t n;
                if (!parse_number(key, n)) return std::nullopt;
                if (is_32bit(f.kind) && n > UINT32_MAX) return std::nullopt;
                return Value{n};
            }
    }
}

// Numeric view of a scalar; nullopt for non-numeric kinds.
inline std::optional<double> numeric_value(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* u = std::get_if<std::uint64_t>(&v)) return static_cast<double>(*u);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return std::nullopt;
}

// Converts a real number into a value of an integer or floating kind, rounding
// and clipping to the kind's range.
inline Value numeric_to_value(FieldKind kind, double x) {
    if (is_floating(kind)) {
        if (kind == FieldKind::float_) return Value{static_cast<double>(static_cast<float>(x))};
        return Value{x};
    }
    auto [lo, hi] = integer_bounds(kind);
    double r = std::nearbyint(x);
    if (!(r >= lo)) r = lo;
    if (r >= hi) {
        if (is_unsigned_integer(kind)) return Value{is_32bit(kind) ? std::uint64_t{UINT32_MAX} : UINT64_MAX};
        return Value{is_32bit(kind) ? std::int64_t{INT32_MAX} : INT64_MAX};
    }
    if (is_unsigned_integer(kind)) return Value{static_cast<std::uint64_t>(r)};
    return Value{static_cast<std::int64_t>(r)};
}

inline bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xe0) == 0xc0) {
            len = 2;
            cp = c & 0x1f;
        } else if ((c & 0xf0) == 0xe0) {
            len = 3;
            cp = c & 0x0f;
        } else if ((c & 0xf8) == 0xf0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xc0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3f);
        }
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff))
            return false;
        i += len;
    }
    return true;
}

}  // namespace protosynth
