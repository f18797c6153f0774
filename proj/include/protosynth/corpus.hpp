#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "protosynth/codec.hpp"
#include "protosynth/errors.hpp"
#include "protosynth/message.hpp"
#include "protosynth/schema.hpp"

namespace protosynth {

enum class CorpusFormat : std::uint8_t { ndjson, binary };

inline CorpusFormat corpus_format_from_string(std::string_view s) {
    if (s == "ndjson") return CorpusFormat::ndjson;
    if (s == "binary") return CorpusFormat::binary;
    throw ConfigError("unknown corpus format: " + std::string(s));
}

inline constexpr double default_malformed_threshold = 0.5;
inline constexpr std::uint64_t max_record_bytes = std::uint64_t{1} << 30;

struct Record {
    const MessageInfo* type = nullptr;
    MessagePtr message;
};

struct PassCounts {
    std::uint64_t records = 0;
    std::uint64_t skipped = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path.string());
    return std::move(ss).str();
}

inline std::string sidecar_path(const std::filesystem::path& corpus) { return corpus.string() + ".type"; }

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Parses one NDJSON envelope line; nullopt when malformed.
inline std::optional<Record> parse_ndjson_record(std::string_view line, const SchemaGraph& schema) {
    auto j = nlohmann::ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    auto t = j.find("type");
    auto p = j.find("payload");
    if (t == j.end() || p == j.end() || !t->is_string() || !p->is_object()) return std::nullopt;
    const MessageInfo* type = schema.find_message(t->get<std::string>());
    if (!type) return std::nullopt;
    try {
        return Record{type, protosynth::from_json(*type, *p)};
    } catch (const Error&) {
        return std::nullopt;
    }
}

// Reads a varint from a stream. nullopt at clean EOF; throws ParseError on a
// truncated or oversized varint.
inline std::optional<std::uint64_t> read_stream_varint(std::istream& in, std::uint64_t offset) {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) {
            if (shift == 0) return std::nullopt;
            throw ParseError("truncated length prefix", offset);
        }
        v |= static_cast<std::uint64_t>(c & 0x7f) << shift;
        if (!(c & 0x80)) return v;
    }
    throw ParseError("length prefix too long", offset);
}

}  // namespace detail

// A replayable stream of records. Each pass re-reads the source, so memory
// stays independent of corpus size. Malformed records are skipped and counted;
// a pass whose malformed fraction exceeds the threshold throws
// CorpusQualityError after the pass.
class LogCorpus {
public:
    using Visitor = std::function<void(const Record&)>;

    static LogCorpus open(const std::filesystem::path& path, CorpusFormat format, const SchemaGraph& schema,
                          double malformed_threshold = default_malformed_threshold) {
        LogCorpus c;
        c.schema_ = &schema;
        c.format_ = format;
        c.path_ = path;
        c.threshold_ = malformed_threshold;
        std::error_code ec;
        if (!std::filesystem::is_regular_file(path, ec)) throw IoError("cannot read corpus " + path.string());
        std::ifstream probe(path, std::ios::binary);
        if (!probe) throw IoError("cannot read corpus " + path.string());
        if (format == CorpusFormat::binary) {
            const auto side = sidecar_path(path);
            std::ifstream s(side);
            if (!s) throw IoError("binary corpus needs a type sidecar: " + side);
            std::string text((std::istreambuf_iterator<char>(s)), std::istreambuf_iterator<char>());
            const std::string name = detail::trim(text);
            c.binary_type_ = schema.find_message(name);
            if (!c.binary_type_) throw LookupError("sidecar names unknown message type: " + name);
        }
        return c;
    }

    static LogCorpus from_records(std::vector<Record> records) {
        LogCorpus c;
        c.records_ = std::make_shared<const std::vector<Record>>(std::move(records));
        return c;
    }

    CorpusFormat format() const { return format_; }

    PassCounts for_each(const Visitor& visit) const {
        PassCounts n;
        if (records_) {
            for (const auto& r : *records_) visit(r);
            n.records = records_->size();
        } else if (format_ == CorpusFormat::ndjson) {
            n = scan_ndjson(visit);
        } else {
            n = scan_binary(visit);
        }
        const auto total = n.records + n.skipped;
        if (total > 0 && static_cast<double>(n.skipped) > threshold_ * static_cast<double>(total))
            throw CorpusQualityError(n.skipped, total);
        last_ = n;
        return n;
    }

    std::vector<Record> materialize() const {
        std::vector<Record> out;
        for_each([&](const Record& r) { out.push_back(r); });
        return out;
    }

    // Counts from the most recent completed pass.
    std::uint64_t record_count() const { return last_.records; }
    std::uint64_t skipped_count() const { return last_.skipped; }

private:
    PassCounts scan_ndjson(const Visitor& visit) const {
        std::ifstream in(path_, std::ios::binary);
        if (!in) throw IoError("cannot read corpus " + path_.string());
        PassCounts n;
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            if (auto r = detail::parse_ndjson_record(line, *schema_)) {
                ++n.records;
                visit(*r);
            } else {
                ++n.skipped;
            }
        }
        if (in.bad()) throw IoError("read failed: " + path_.string());
        return n;
    }

    PassCounts scan_binary(const Visitor& visit) const {
        std::ifstream in(path_, std::ios::binary);
        if (!in) throw IoError("cannot read corpus " + path_.string());
        PassCounts n;
        std::string buf;
        std::uint64_t offset = 0;
        while (true) {
            std::optional<std::uint64_t> len;
            try {
                len = detail::read_stream_varint(in, offset);
            } catch (const ParseError&) {
                ++n.skipped;
                break;
            }
            if (!len) break;
            if (*len > max_record_bytes) {
                ++n.skipped;  // corrupt length prefix; the rest cannot be framed
                break;
            }
            offset += wire::varint_size(*len);
            buf.resize(*len);
            in.read(buf.data(), static_cast<std::streamsize>(*len));
            if (static_cast<std::uint64_t>(in.gcount()) != *len) {
                ++n.skipped;  // truncated tail
                break;
            }
            MessagePtr m;
            try {
                m = decode(*binary_type_, buf);
            } catch (const Error&) {
            }
            offset += *len;
            if (m) {
                ++n.records;
                visit(Record{binary_type_, std::move(m)});
            } else {
                ++n.skipped;
            }
        }
        if (in.bad()) throw IoError("read failed: " + path_.string());
        return n;
    }

    const SchemaGraph* schema_ = nullptr;
    CorpusFormat format_ = CorpusFormat::ndjson;
    std::filesystem::path path_;
    const MessageInfo* binary_type_ = nullptr;
    double threshold_ = default_malformed_threshold;
    std::shared_ptr<const std::vector<Record>> records_;
    mutable PassCounts last_;
};

inline LogCorpus ingest_corpus(const std::filesystem::path& path, CorpusFormat format, const SchemaGraph& schema,
                               double malformed_threshold = default_malformed_threshold) {
    return LogCorpus::open(path, format, schema, malformed_threshold);
}

// One NDJSON corpus line for a record.
inline std::string ndjson_record_line(const Message& m) {
    nlohmann::ordered_json j;
    j["type"] = m.type->full_name;
    j["payload"] = to_json(m);
    return j.dump() + "\n";
}

}  // namespace protosynth
