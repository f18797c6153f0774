#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "protosynth/codec.hpp"
#include "protosynth/corpus.hpp"
#include "protosynth/errors.hpp"
#include "protosynth/message.hpp"
#include "protosynth/schema.hpp"
#include "protosynth/sink.hpp"
#include "protosynth/wire.hpp"

namespace protosynth {

// Reads a generated dataset back. `type` may be null for pb output that has
// a .type sidecar. A record that does not parse is a ValidationError naming
// its position.
inline std::vector<MessagePtr> load_dataset(const std::filesystem::path& path, OutputFormat format,
                                            const SchemaGraph& schema, const MessageInfo* type) {
    const std::string text = read_file(path);
    if (!type && format == OutputFormat::pb) {
        std::error_code ec;
        if (std::filesystem::exists(sidecar_path(path), ec))
            type = &schema.message(detail::trim(read_file(sidecar_path(path))));
    }
    if (!type) throw ConfigError("dataset type unknown; pass --type");
    std::vector<MessagePtr> out;
    switch (format) {
        case OutputFormat::pb: {
            wire::Reader r(text);
            while (!r.done()) {
                const auto at = r.offset();
                try {
                    out.push_back(decode(*type, r.bytes()));
                } catch (const ParseError& e) {
                    throw ValidationError("record " + std::to_string(out.size()) + " at byte " +
                                          std::to_string(at) + ": " + e.what());
                }
            }
            break;
        }
        case OutputFormat::ndjson: {
            std::size_t line_no = 0, begin = 0;
            while (begin < text.size()) {
                auto end = text.find('\n', begin);
                if (end == std::string::npos) end = text.size();
                const std::string_view line(text.data() + begin, end - begin);
                begin = end + 1;
                ++line_no;
                if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
                auto j = nlohmann::ordered_json::parse(line, nullptr, false);
                try {
                    if (j.is_discarded()) throw ValidationError("not JSON");
                    out.push_back(protosynth::from_json(*type, j));
                } catch (const Error& e) {
                    throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
                }
            }
            break;
        }
        case OutputFormat::json: {
            auto j = nlohmann::ordered_json::parse(text, nullptr, false);
            if (j.is_discarded() || !j.is_array()) throw ValidationError("json dataset must be an array");
            for (std::size_t i = 0; i < j.size(); ++i) {
                try {
                    out.push_back(protosynth::from_json(*type, j[i]));
                } catch (const Error& e) {
                    throw ValidationError("element " + std::to_string(i) + ": " + e.what());
                }
            }
            break;
        }
    }
    return out;
}

}  // namespace protosynth
