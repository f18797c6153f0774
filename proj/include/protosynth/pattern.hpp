#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "protosynth/errors.hpp"
#include "protosynth/random.hpp"

namespace protosynth {

enum class PatternId : std::uint8_t { uuid, iso8601, email, numeric_string, hex, generic };

inline constexpr std::array<PatternId, 5> detector_order{PatternId::uuid, PatternId::iso8601, PatternId::email,
                                                         PatternId::numeric_string, PatternId::hex};

inline constexpr double pattern_match_threshold = 0.95;

inline std::string_view to_string(PatternId p) {
    switch (p) {
        case PatternId::uuid: return "uuid";
        case PatternId::iso8601: return "iso8601";
        case PatternId::email: return "email";
        case PatternId::numeric_string: return "numeric-string";
        case PatternId::hex: return "hex";
        case PatternId::generic: return "generic";
    }
    return "generic";
}

inline PatternId pattern_from_string(std::string_view s) {
    for (auto p : {PatternId::uuid, PatternId::iso8601, PatternId::email, PatternId::numeric_string, PatternId::hex,
                   PatternId::generic})
        if (to_string(p) == s) return p;
    throw ValidationError("unknown pattern id: " + std::string(s));
}

enum class CharClass : std::uint8_t { lower, upper, digit, space, punct, other };

inline constexpr std::array<CharClass, 6> all_char_classes{CharClass::lower, CharClass::upper, CharClass::digit,
                                                           CharClass::space, CharClass::punct, CharClass::other};

inline std::string_view to_string(CharClass c) {
    switch (c) {
        case CharClass::lower: return "lower";
        case CharClass::upper: return "upper";
        case CharClass::digit: return "digit";
        case CharClass::space: return "space";
        case CharClass::punct: return "punct";
        case CharClass::other: return "other";
    }
    return "other";
}

inline CharClass classify(char ch) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80) return CharClass::other;
    if (std::islower(c)) return CharClass::lower;
    if (std::isupper(c)) return CharClass::upper;
    if (std::isdigit(c)) return CharClass::digit;
    if (std::isspace(c)) return CharClass::space;
    if (std::ispunct(c)) return CharClass::punct;
    return CharClass::other;
}

// ---------------------------------------------------------------------------
// Detectors

namespace detail {

inline bool all_of(std::string_view s, int (*pred)(int)) {
    for (char c : s)
        if (!pred(static_cast<unsigned char>(c))) return false;
    return true;
}

inline bool digits(std::string_view s, std::size_t pos, std::size_t n) {
    if (pos + n > s.size()) return false;
    return all_of(s.substr(pos, n), [](int c) { return std::isdigit(c); });
}

}  // namespace detail

inline bool matches_uuid(std::string_view s) {
    if (s.size() != 36) return false;
    for (std::size_t i = 0; i < 36; ++i) {
        if (i == 8 || i == 13 || i == 18 || i == 23) {
            if (s[i] != '-') return false;
        } else if (!std::isxdigit(static_cast<unsigned char>(s[i]))) {
            return false;
        }
    }
    return true;
}

// YYYY-MM-DD with optional THH:MM[:SS[.fff]] and optional Z or +HH:MM offset.
inline bool matches_iso8601(std::string_view s) {
    using detail::digits;
    if (!digits(s, 0, 4) || s.size() < 10 || s[4] != '-' || !digits(s, 5, 2) || s[7] != '-' || !digits(s, 8, 2))
        return false;
    const int month = (s[5] - '0') * 10 + (s[6] - '0');
    const int day = (s[8] - '0') * 10 + (s[9] - '0');
    if (month < 1 || month > 12 || day < 1 || day > 31) return false;
    std::size_t i = 10;
    if (i == s.size()) return true;
    if (s[i] != 'T' || !digits(s, i + 1, 2) || i + 3 >= s.size() || s[i + 3] != ':' || !digits(s, i + 4, 2))
        return false;
    i += 6;
    if (i < s.size() && s[i] == ':') {
        if (!digits(s, i + 1, 2)) return false;
        i += 3;
        if (i < s.size() && s[i] == '.') {
            std::size_t j = i + 1;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            if (j == i + 1) return false;
            i = j;
        }
    }
    if (i == s.size()) return true;
    if (s[i] == 'Z') return i + 1 == s.size();
    if (s[i] == '+' || s[i] == '-')
        return (s.size() == i + 6 && digits(s, i + 1, 2) && s[i + 3] == ':' && digits(s, i + 4, 2)) ||
               (s.size() == i + 5 && digits(s, i + 1, 4));
    return false;
}

inline bool matches_email(std::string_view s) {
    const auto at = s.find('@');
    if (at == std::string_view::npos || at == 0 || s.find('@', at + 1) != std::string_view::npos) return false;
    for (char c : s.substr(0, at)) {
        const auto u = static_cast<unsigned char>(c);
        if (!std::isalnum(u) && c != '.' && c != '_' && c != '%' && c != '+' && c != '-') return false;
    }
    const auto domain = s.substr(at + 1);
    const auto last_dot = domain.rfind('.');
    if (last_dot == std::string_view::npos || last_dot == 0) return false;
    const auto tld = domain.substr(last_dot + 1);
    if (tld.size() < 2 || !detail::all_of(tld, [](int c) { return std::isalpha(c); })) return false;
    std::size_t label = 0;
    for (char c : domain) {
        if (c == '.') {
            if (label == 0) return false;
            label = 0;
        } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '-') {
            ++label;
        } else {
            return false;
        }
    }
    return true;
}

inline bool matches_numeric_string(std::string_view s) {
    return !s.empty() && detail::all_of(s, [](int c) { return std::isdigit(c); });
}

inline bool matches_hex(std::string_view s) {
    return !s.empty() && detail::all_of(s, [](int c) { return std::isxdigit(c); });
}

inline bool matches(PatternId p, std::string_view s) {
    switch (p) {
        case PatternId::uuid: return matches_uuid(s);
        case PatternId::iso8601: return matches_iso8601(s);
        case PatternId::email: return matches_email(s);
        case PatternId::numeric_string: return matches_numeric_string(s);
        case PatternId::hex: return matches_hex(s);
        case PatternId::generic: return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Spec + detection

struct PatternSpec {
    PatternId id = PatternId::generic;
    std::map<std::size_t, std::uint64_t> lengths;
    std::map<CharClass, std::uint64_t> char_classes;

    bool operator==(const PatternSpec&) const = default;
};

class PatternAccumulator {
public:
    void add(std::string_view s) {
        ++total_;
        ++lengths_[s.size()];
        for (char c : s) ++classes_[classify(c)];
        for (std::size_t i = 0; i < detector_order.size(); ++i)
            if (matches(detector_order[i], s)) ++hits_[i];
    }

    void merge(const PatternAccumulator& o) {
        total_ += o.total_;
        for (const auto& [k, v] : o.lengths_) lengths_[k] += v;
        for (const auto& [k, v] : o.classes_) classes_[k] += v;
        for (std::size_t i = 0; i < hits_.size(); ++i) hits_[i] += o.hits_[i];
    }

    std::uint64_t total() const { return total_; }

    // First detector in fixed order matching at least 95% of samples wins.
    PatternSpec finalize() const {
        PatternSpec spec;
        spec.lengths = lengths_;
        spec.char_classes = classes_;
        if (total_ == 0) return spec;
        for (std::size_t i = 0; i < detector_order.size(); ++i) {
            if (static_cast<double>(hits_[i]) >= pattern_match_threshold * static_cast<double>(total_)) {
                spec.id = detector_order[i];
                break;
            }
        }
        return spec;
    }

private:
    std::uint64_t total_ = 0;
    std::map<std::size_t, std::uint64_t> lengths_;
    std::map<CharClass, std::uint64_t> classes_;
    std::array<std::uint64_t, detector_order.size()> hits_{};
};

inline PatternSpec detect_pattern(std::span<const std::string> samples) {
    if (samples.empty()) throw ValidationError("detect_pattern: empty sample list");
    PatternAccumulator acc;
    for (const auto& s : samples) acc.add(s);
    return acc.finalize();
}

// ---------------------------------------------------------------------------
// Generation

namespace detail {

template <class Map>
inline typename Map::key_type sample_histogram(const Map& hist, Rng& rng) {
    std::uint64_t total = 0;
    for (const auto& [_, c] : hist) total += c;
    std::uint64_t pick = rng.below(total);
    for (const auto& [k, c] : hist) {
        if (pick < c) return k;
        pick -= c;
    }
    return hist.rbegin()->first;
}

inline constexpr std::string_view lower_chars = "abcdefghijklmnopqrstuvwxyz";
inline constexpr std::string_view upper_chars = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
inline constexpr std::string_view digit_chars = "0123456789";
inline constexpr std::string_view hex_chars = "0123456789abcdef";
inline constexpr std::string_view punct_chars = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

inline char pick(std::string_view set, Rng& rng) { return set[rng.below(set.size())]; }

inline void append_random(std::string& out, std::string_view set, std::size_t n, Rng& rng) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(pick(set, rng));
}

// Days since 1970-01-01 to civil date.
inline void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2 ? 1 : 0));
}

}  // namespace detail

// Emits a string conforming to the pattern. Variable-length patterns draw their
// length from the observed length histogram when one is present.
inline std::string generate_pattern(const PatternSpec& spec, Rng& rng) {
    using namespace detail;
    auto length = [&](std::size_t fallback) {
        return spec.lengths.empty() ? fallback : sample_histogram(spec.lengths, rng);
    };
    std::string out;
    switch (spec.id) {
        case PatternId::uuid: {
            for (int i = 0; i < 32; ++i) {
                if (i == 8 || i == 12 || i == 16 || i == 20) out.push_back('-');
                if (i == 12)
                    out.push_back('4');
                else if (i == 16)
                    out.push_back("89ab"[rng.below(4)]);
                else
                    out.push_back(pick(hex_chars, rng));
            }
            return out;
        }
        case PatternId::iso8601: {
            // 2020-01-01T00:00:00Z .. 2025-12-31T23:59:59Z
            const std::int64_t start = 18262LL * 86400, end = 20454LL * 86400;
            const std::int64_t t = rng.between(start, end - 1);
            int y;
            unsigned mo, d;
            civil_from_days(t / 86400, y, mo, d);
            const auto sod = t % 86400;
            char buf[32];
            std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", y, mo, d,
                          static_cast<long long>(sod / 3600), static_cast<long long>(sod / 60 % 60),
                          static_cast<long long>(sod % 60));
            return buf;
        }
        case PatternId::email: {
            static constexpr std::array<std::string_view, 3> domains{"example.com", "mail.test", "corp.example.org"};
            const auto domain = domains[rng.below(domains.size())];
            const std::size_t total = length(16);
            const std::size_t local = total > domain.size() + 1 ? total - domain.size() - 1 : 1;
            append_random(out, lower_chars, 1, rng);
            append_random(out, "abcdefghijklmnopqrstuvwxyz0123456789", local - 1, rng);
            out.push_back('@');
            out.append(domain);
            return out;
        }
        case PatternId::numeric_string: {
            append_random(out, digit_chars, std::max<std::size_t>(1, length(6)), rng);
            return out;
        }
        case PatternId::hex: {
            append_random(out, hex_chars, std::max<std::size_t>(1, length(16)), rng);
            return out;
        }
        case PatternId::generic: {
            const std::size_t n = length(12);
            if (spec.char_classes.empty()) {
                append_random(out, lower_chars, n, rng);
                return out;
            }
            for (std::size_t i = 0; i < n; ++i) {
                switch (sample_histogram(spec.char_classes, rng)) {
                    case CharClass::lower: out.push_back(pick(lower_chars, rng)); break;
                    case CharClass::upper: out.push_back(pick(upper_chars, rng)); break;
                    case CharClass::digit: out.push_back(pick(digit_chars, rng)); break;
                    case CharClass::space: out.push_back(' '); break;
                    case CharClass::punct: out.push_back(pick(punct_chars, rng)); break;
                    // Stay valid UTF-8: non-ASCII bytes become a two-byte code point.
                    case CharClass::other: out.append("\xc3\xa9"); break;
                }
            }
            return out;
        }
    }
    return out;
}

}  // namespace protosynth
