#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "protosynth/codec.hpp"
#include "protosynth/errors.hpp"
#include "protosynth/message.hpp"

namespace protosynth {

enum class OutputFormat : std::uint8_t { pb, json, ndjson };

inline OutputFormat output_format_from_string(std::string_view s) {
    if (s == "pb") return OutputFormat::pb;
    if (s == "json") return OutputFormat::json;
    if (s == "ndjson") return OutputFormat::ndjson;
    throw ConfigError("unknown output format: " + std::string(s));
}

inline constexpr std::uint64_t json_array_limit = 100000;

class RecordSink {
public:
    virtual ~RecordSink() = default;
    virtual void write(const MessagePtr& m) = 0;
    virtual void finish() {}
};

namespace detail {

inline void check_stream(std::ostream& os) {
    if (!os) throw IoError("write to output failed");
}

}  // namespace detail

// [varint length][bytes] records.
class DelimitedSink : public RecordSink {
public:
    explicit DelimitedSink(std::ostream& os) : os_(os) {}
    void write(const MessagePtr& m) override {
        buf_.clear();
        encode_delimited(*m, buf_);
        os_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        detail::check_stream(os_);
    }
    void finish() override {
        os_.flush();
        detail::check_stream(os_);
    }

private:
    std::ostream& os_;
    std::string buf_;
};

// One canonical JSON object per line.
class NdjsonSink : public RecordSink {
public:
    explicit NdjsonSink(std::ostream& os) : os_(os) {}
    void write(const MessagePtr& m) override {
        os_ << to_json(*m).dump() << '\n';
        detail::check_stream(os_);
    }
    void finish() override {
        os_.flush();
        detail::check_stream(os_);
    }

private:
    std::ostream& os_;
};

class JsonArraySink : public RecordSink {
public:
    explicit JsonArraySink(std::ostream& os) : os_(os) {}
    void write(const MessagePtr& m) override {
        if (++count_ > json_array_limit)
            throw ConfigError("json array output is limited to " + std::to_string(json_array_limit) + " records");
        os_ << (count_ == 1 ? "[\n" : ",\n") << to_json(*m).dump();
        detail::check_stream(os_);
    }
    void finish() override {
        os_ << (count_ == 0 ? "[]\n" : "\n]\n");
        os_.flush();
        detail::check_stream(os_);
    }

private:
    std::ostream& os_;
    std::uint64_t count_ = 0;
};

class CollectingSink : public RecordSink {
public:
    void write(const MessagePtr& m) override { records.push_back(m); }
    std::vector<MessagePtr> records;
};

// Serializes into a reused buffer and keeps only the byte count.
class CountingSink : public RecordSink {
public:
    void write(const MessagePtr& m) override {
        buf_.clear();
        encode_delimited(*m, buf_);
        bytes += buf_.size();
        ++records;
    }
    std::uint64_t bytes = 0;
    std::uint64_t records = 0;

private:
    std::string buf_;
};

inline std::unique_ptr<RecordSink> make_sink(OutputFormat format, std::ostream& os, std::uint64_t expected_count) {
    switch (format) {
        case OutputFormat::pb: return std::make_unique<DelimitedSink>(os);
        case OutputFormat::ndjson: return std::make_unique<NdjsonSink>(os);
        case OutputFormat::json:
            if (expected_count > json_array_limit)
                throw ConfigError("json array output is limited to " + std::to_string(json_array_limit) +
                                  " records; use ndjson or pb");
            return std::make_unique<JsonArraySink>(os);
    }
    throw ConfigError("unknown output format");
}

}  // namespace protosynth
