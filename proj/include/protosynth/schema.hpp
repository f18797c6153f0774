#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "protosynth/errors.hpp"
#include "protosynth/graph.hpp"
#include "protosynth/wire.hpp"

namespace protosynth {

enum class FieldKind : std::uint8_t {
    double_,
    float_,
    int32,
    int64,
    uint32,
    uint64,
    sint32,
    sint64,
    fixed32,
    fixed64,
    sfixed32,
    sfixed64,
    bool_,
    string,
    bytes,
    enum_,
    message,
};

enum class Cardinality : std::uint8_t { singular, optional, repeated };

inline std::string_view to_string(FieldKind k) {
    switch (k) {
        case FieldKind::double_: return "double";
        case FieldKind::float_: return "float";
        case FieldKind::int32: return "int32";
        case FieldKind::int64: return "int64";
        case FieldKind::uint32: return "uint32";
        case FieldKind::uint64: return "uint64";
        case FieldKind::sint32: return "sint32";
        case FieldKind::sint64: return "sint64";
        case FieldKind::fixed32: return "fixed32";
        case FieldKind::fixed64: return "fixed64";
        case FieldKind::sfixed32: return "sfixed32";
        case FieldKind::sfixed64: return "sfixed64";
        case FieldKind::bool_: return "bool";
        case FieldKind::string: return "string";
        case FieldKind::bytes: return "bytes";
        case FieldKind::enum_: return "enum";
        case FieldKind::message: return "message";
    }
    return "?";
}

inline std::string_view to_string(Cardinality c) {
    switch (c) {
        case Cardinality::singular: return "singular";
        case Cardinality::optional: return "optional";
        case Cardinality::repeated: return "repeated";
    }
    return "?";
}

inline bool is_signed_integer(FieldKind k) {
    return k == FieldKind::int32 || k == FieldKind::int64 || k == FieldKind::sint32 ||
           k == FieldKind::sint64 || k == FieldKind::sfixed32 || k == FieldKind::sfixed64;
}

inline bool is_unsigned_integer(FieldKind k) {
    return k == FieldKind::uint32 || k == FieldKind::uint64 || k == FieldKind::fixed32 ||
           k == FieldKind::fixed64;
}

inline bool is_integer(FieldKind k) { return is_signed_integer(k) || is_unsigned_integer(k); }
inline bool is_floating(FieldKind k) { return k == FieldKind::double_ || k == FieldKind::float_; }
inline bool is_numeric(FieldKind k) { return is_integer(k) || is_floating(k); }

inline bool is_32bit(FieldKind k) {
    return k == FieldKind::int32 || k == FieldKind::uint32 || k == FieldKind::sint32 ||
           k == FieldKind::fixed32 || k == FieldKind::sfixed32;
}

// Numeric limits of an integer kind, as doubles for clipping.
inline std::pair<double, double> integer_bounds(FieldKind k) {
    if (is_unsigned_integer(k))
        return {0.0, is_32bit(k) ? 4294967295.0 : 18446744073709551615.0};
    return is_32bit(k) ? std::pair{-2147483648.0, 2147483647.0}
                       : std::pair{-9223372036854775808.0, 9223372036854775807.0};
}

struct MessageInfo;
struct EnumInfo;

struct FieldInfo {
    std::string name;
    std::string json_name;
    std::uint32_t number = 0;
    FieldKind kind = FieldKind::int32;
    Cardinality cardinality = Cardinality::singular;
    std::optional<std::string> type_name;  // fully qualified, no leading dot
    std::optional<std::size_t> oneof_index;
    std::optional<std::string> depends_on;  // custom field option annotation
    std::size_t index = 0;                  // position within the message

    const MessageInfo* message_type = nullptr;
    const EnumInfo* enum_type = nullptr;

    bool is_repeated() const { return cardinality == Cardinality::repeated; }
    bool is_message() const { return kind == FieldKind::message; }
    bool is_map() const;
    // Singular message fields and optional fields track presence.
    bool has_presence() const {
        return cardinality == Cardinality::optional ||
               (cardinality == Cardinality::singular && kind == FieldKind::message) ||
               oneof_index.has_value();
    }
};

struct EnumInfo {
    std::string full_name;
    std::vector<std::pair<std::string, std::int32_t>> values;

    const std::string* name_of(std::int32_t number) const {
        for (const auto& [n, v] : values)
            if (v == number) return &n;
        return nullptr;
    }
    std::optional<std::int32_t> number_of(std::string_view name) const {
        for (const auto& [n, v] : values)
            if (n == name) return v;
        return std::nullopt;
    }
};

struct OneofInfo {
    std::string name;
    std::vector<std::size_t> members;  // field indices
};

struct MessageInfo {
    std::string full_name;
    std::string name;
    std::vector<FieldInfo> fields;
    std::vector<OneofInfo> oneofs;
    bool map_entry = false;

    const FieldInfo* find_field(std::string_view field_name) const {
        for (const auto& f : fields)
            if (f.name == field_name || f.json_name == field_name) return &f;
        return nullptr;
    }
    const FieldInfo* find_number(std::uint32_t number) const {
        for (const auto& f : fields)
            if (f.number == number) return &f;
        return nullptr;
    }
    // Map entry key/value.
    const FieldInfo& key_field() const { return fields.at(0); }
    const FieldInfo& value_field() const { return fields.at(1); }
};

inline bool FieldInfo::is_map() const {
    return is_repeated() && message_type != nullptr && message_type->map_entry;
}

// Parsed schema. Element addresses are stable for the graph's lifetime, so
// the graph is move-only.
class SchemaGraph {
public:
    SchemaGraph() = default;
    SchemaGraph(const SchemaGraph&) = delete;
    SchemaGraph& operator=(const SchemaGraph&) = delete;
    SchemaGraph(SchemaGraph&&) = default;
    SchemaGraph& operator=(SchemaGraph&&) = default;

    std::map<std::string, MessageInfo, std::less<>> messages;
    std::map<std::string, EnumInfo, std::less<>> enums;
    std::map<std::string, std::set<std::string>, std::less<>> edges;
    std::vector<std::vector<std::string>> cyclic_groups;

    const MessageInfo* find_message(std::string_view name) const {
        auto it = messages.find(strip_dot(name));
        return it == messages.end() ? nullptr : &it->second;
    }
    const MessageInfo& message(std::string_view name) const {
        if (const auto* m = find_message(name)) return *m;
        throw LookupError("unknown message type: " + std::string(name));
    }
    const EnumInfo* find_enum(std::string_view name) const {
        auto it = enums.find(strip_dot(name));
        return it == enums.end() ? nullptr : &it->second;
    }
    std::size_t field_count() const {
        std::size_t n = 0;
        for (const auto& [_, m] : messages) n += m.fields.size();
        return n;
    }
    bool in_cyclic_group(std::string_view name) const {
        for (const auto& g : cyclic_groups)
            if (std::find(g.begin(), g.end(), name) != g.end()) return true;
        return false;
    }

private:
    static std::string_view strip_dot(std::string_view n) {
        return (!n.empty() && n.front() == '.') ? n.substr(1) : n;
    }
};

namespace detail {

struct RawField {
    std::string name;
    std::string json_name;
    std::int64_t number = 0;
    int label = 1;
    int type = 0;
    std::string type_name;
    std::optional<std::int64_t> oneof_index;
    bool proto3_optional = false;
    std::optional<std::string> depends_on;
    std::size_t offset = 0;
};

struct RawEnum {
    std::string name;
    std::vector<std::pair<std::string, std::int32_t>> values;
};

struct RawMessage {
    std::string name;
    std::vector<RawField> fields;
    std::vector<RawMessage> nested;
    std::vector<RawEnum> enums;
    std::vector<std::string> oneofs;
    bool map_entry = false;
    std::size_t offset = 0;
};

struct RawFile {
    std::string name;
    std::string package;
    std::string syntax;
    std::vector<RawMessage> messages;
    std::vector<RawEnum> enums;
};

// Custom FieldOptions extension carrying a dependency annotation.
inline constexpr std::uint32_t depends_on_option = 50001;

inline std::string read_string(wire::Reader& r, const wire::Reader::Tag& t) {
    if (t.type != wire::WireType::length_delimited)
        throw ParseError("expected length-delimited field", t.offset);
    return std::string(r.bytes());
}

inline std::uint64_t read_varint(wire::Reader& r, const wire::Reader::Tag& t) {
    if (t.type != wire::WireType::varint) throw ParseError("expected varint field", t.offset);
    return r.varint();
}

inline wire::Reader read_sub(wire::Reader& r, const wire::Reader::Tag& t) {
    if (t.type != wire::WireType::length_delimited)
        throw ParseError("expected length-delimited field", t.offset);
    return r.sub();
}

inline RawEnum parse_enum(wire::Reader r) {
    RawEnum e;
    while (!r.done()) {
        const auto t = r.tag();
        if (t.field_number == 1) {
            e.name = read_string(r, t);
        } else if (t.field_number == 2) {
            auto vr = read_sub(r, t);
            std::string name;
            std::int32_t number = 0;
            while (!vr.done()) {
                const auto vt = vr.tag();
                if (vt.field_number == 1)
                    name = read_string(vr, vt);
                else if (vt.field_number == 2)
                    number = static_cast<std::int32_t>(read_varint(vr, vt));
                else
                    vr.skip(vt);
            }
            e.values.emplace_back(std::move(name), number);
        } else {
            r.skip(t);
        }
    }
    return e;
}

inline void parse_field_options(wire::Reader r, RawField& f) {
    while (!r.done()) {
        const auto t = r.tag();
        if (t.field_number == depends_on_option && t.type == wire::WireType::length_delimited)
            f.depends_on = std::string(r.bytes());
        else
            r.skip(t);
    }
}

inline RawField parse_field(wire::Reader r) {
    RawField f;
    f.offset = r.offset();
    while (!r.done()) {
        const auto t = r.tag();
        switch (t.field_number) {
            case 1: f.name = read_string(r, t); break;
            case 3: f.number = static_cast<std::int32_t>(read_varint(r, t)); break;
            case 4: f.label = static_cast<int>(read_varint(r, t)); break;
            case 5: f.type = static_cast<int>(read_varint(r, t)); break;
            case 6: f.type_name = read_string(r, t); break;
            case 8: parse_field_options(read_sub(r, t), f); break;
            case 9: f.oneof_index = static_cast<std::int64_t>(read_varint(r, t)); break;
            case 10: f.json_name = read_string(r, t); break;
            case 17: f.proto3_optional = read_varint(r, t) != 0; break;
            default: r.skip(t);
        }
    }
    return f;
}

inline RawMessage parse_message(wire::Reader r) {
    RawMessage m;
    m.offset = r.offset();
    while (!r.done()) {
        const auto t = r.tag();
        switch (t.field_number) {
            case 1: m.name = read_string(r, t); break;
            case 2: m.fields.push_back(parse_field(read_sub(r, t))); break;
            case 3: m.nested.push_back(parse_message(read_sub(r, t))); break;
            case 4: m.enums.push_back(parse_enum(read_sub(r, t))); break;
            case 7: {
                auto opts = read_sub(r, t);
                while (!opts.done()) {
                    const auto ot = opts.tag();
                    if (ot.field_number == 7)
                        m.map_entry = read_varint(opts, ot) != 0;
                    else
                        opts.skip(ot);
                }
                break;
            }
            case 8: {
                auto od = read_sub(r, t);
                std::string name;
                while (!od.done()) {
                    const auto ot = od.tag();
                    if (ot.field_number == 1)
                        name = read_string(od, ot);
                    else
                        od.skip(ot);
                }
                m.oneofs.push_back(std::move(name));
                break;
            }
            default: r.skip(t);
        }
    }
    return m;
}

inline RawFile parse_file(wire::Reader r) {
    RawFile f;
    while (!r.done()) {
        const auto t = r.tag();
        switch (t.field_number) {
            case 1: f.name = read_string(r, t); break;
            case 2: f.package = read_string(r, t); break;
            case 4: f.messages.push_back(parse_message(read_sub(r, t))); break;
            case 5: f.enums.push_back(parse_enum(read_sub(r, t))); break;
            case 12: f.syntax = read_string(r, t); break;
            default: r.skip(t);
        }
    }
    return f;
}

inline std::string default_json_name(std::string_view name) {
    std::string out;
    bool upper = false;
    for (char c : name) {
        if (c == '_') {
            upper = true;
        } else if (upper) {
            out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
            upper = false;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

inline std::optional<FieldKind> kind_from_descriptor(int type) {
    switch (type) {
        case 1: return FieldKind::double_;
        case 2: return FieldKind::float_;
        case 3: return FieldKind::int64;
        case 4: return FieldKind::uint64;
        case 5: return FieldKind::int32;
        case 6: return FieldKind::fixed64;
        case 7: return FieldKind::fixed32;
        case 8: return FieldKind::bool_;
        case 9: return FieldKind::string;
        case 11: return FieldKind::message;
        case 12: return FieldKind::bytes;
        case 13: return FieldKind::uint32;
        case 14: return FieldKind::enum_;
        case 15: return FieldKind::sfixed32;
        case 16: return FieldKind::sfixed64;
        case 17: return FieldKind::sint32;
        case 18: return FieldKind::sint64;
        default: return std::nullopt;
    }
}

struct PendingField {
    std::string message;
    std::size_t field;
    std::string scope;
    std::string type_name;
    std::size_t offset;
    bool kind_known;
};

inline void register_message(SchemaGraph& g, const RawMessage& raw, const std::string& scope,
                             bool proto3, std::vector<PendingField>& pending) {
    const std::string full = scope.empty() ? raw.name : scope + "." + raw.name;
    if (raw.name.empty()) throw ParseError("message without a name", raw.offset);

    MessageInfo info;
    info.full_name = full;
    info.name = raw.name;
    info.map_entry = raw.map_entry;

    std::vector<bool> synthetic(raw.oneofs.size(), false);
    for (const auto& rf : raw.fields)
        if (rf.proto3_optional && rf.oneof_index && *rf.oneof_index >= 0 &&
            static_cast<std::size_t>(*rf.oneof_index) < synthetic.size())
            synthetic[static_cast<std::size_t>(*rf.oneof_index)] = true;
    std::vector<std::optional<std::size_t>> oneof_remap(raw.oneofs.size());
    for (std::size_t i = 0; i < raw.oneofs.size(); ++i) {
        if (synthetic[i]) continue;
        oneof_remap[i] = info.oneofs.size();
        info.oneofs.push_back({raw.oneofs[i], {}});
    }

    std::set<std::int64_t> numbers;
    for (const auto& rf : raw.fields) {
        if (rf.number < 1) throw ParseError("field '" + rf.name + "' has invalid number", rf.offset);
        if (!numbers.insert(rf.number).second)
            throw ParseError("duplicate field number " + std::to_string(rf.number) + " in " + full,
                             rf.offset);
        if (rf.type == 10) throw ParseError("group fields are not supported", rf.offset);

        FieldInfo fi;
        fi.name = rf.name;
        fi.json_name = rf.json_name.empty() ? default_json_name(rf.name) : rf.json_name;
        fi.number = static_cast<std::uint32_t>(rf.number);
        fi.index = info.fields.size();
        fi.depends_on = rf.depends_on;

        bool kind_known = rf.type != 0;
        if (kind_known) {
            auto k = kind_from_descriptor(rf.type);
            if (!k) throw ParseError("unknown field type " + std::to_string(rf.type), rf.offset);
            fi.kind = *k;
        }
        const bool needs_type = !kind_known || fi.kind == FieldKind::message || fi.kind == FieldKind::enum_;
        if (needs_type && rf.type_name.empty())
            throw ParseError("field '" + rf.name + "' lacks a type name", rf.offset);

        if (rf.label == 3) {
            fi.cardinality = Cardinality::repeated;
        } else if (rf.label == 2) {
            fi.cardinality = Cardinality::singular;
        } else if (rf.proto3_optional || !proto3) {
            fi.cardinality = Cardinality::optional;
        } else {
            fi.cardinality = Cardinality::singular;
        }
        if (rf.oneof_index && !rf.proto3_optional) {
            const auto oi = static_cast<std::size_t>(*rf.oneof_index);
            if (oi >= oneof_remap.size() || !oneof_remap[oi])
                throw ParseError("oneof index out of range", rf.offset);
            fi.oneof_index = *oneof_remap[oi];
            info.oneofs[*fi.oneof_index].members.push_back(fi.index);
            fi.cardinality = Cardinality::optional;
        }
        if (needs_type)
            pending.push_back({full, fi.index, full, rf.type_name, rf.offset, kind_known});
        info.fields.push_back(std::move(fi));
    }

    g.messages.emplace(full, std::move(info));
    for (const auto& e : raw.enums) g.enums.emplace(full + "." + e.name, EnumInfo{full + "." + e.name, e.values});
    for (const auto& n : raw.nested) register_message(g, n, full, proto3, pending);
}

// Resolves a (possibly relative) type name from within `scope`, innermost first.
inline std::optional<std::string> resolve_name(const SchemaGraph& g, std::string_view type_name,
                                               std::string scope) {
    auto exists = [&](const std::string& n) {
        return g.messages.count(n) > 0 || g.enums.count(n) > 0;
    };
    if (!type_name.empty() && type_name.front() == '.') {
        std::string n(type_name.substr(1));
        return exists(n) ? std::optional(n) : std::nullopt;
    }
    while (true) {
        std::string candidate = scope.empty() ? std::string(type_name) : scope + "." + std::string(type_name);
        if (exists(candidate)) return candidate;
        if (scope.empty()) return std::nullopt;
        const auto dot = scope.rfind('.');
        scope = dot == std::string::npos ? std::string() : scope.substr(0, dot);
    }
}

}  // namespace detail

// Parses a serialized FileDescriptorSet into a resolved schema graph.
inline SchemaGraph load_descriptor_set(std::string_view bytes) {
    wire::Reader r(bytes);
    std::vector<detail::RawFile> files;
    std::set<std::string> seen;
    while (!r.done()) {
        const auto t = r.tag();
        if (t.field_number != 1) {
            r.skip(t);
            continue;
        }
        auto file = detail::parse_file(detail::read_sub(r, t));
        if (!file.name.empty() && !seen.insert(file.name).second) continue;
        files.push_back(std::move(file));
    }

    SchemaGraph g;
    std::vector<detail::PendingField> pending;
    for (const auto& f : files) {
        const bool proto3 = f.syntax == "proto3";
        for (const auto& e : f.enums) {
            const std::string full = f.package.empty() ? e.name : f.package + "." + e.name;
            g.enums.emplace(full, EnumInfo{full, e.values});
        }
        for (const auto& m : f.messages) detail::register_message(g, m, f.package, proto3, pending);
    }

    for (const auto& p : pending) {
        auto resolved = detail::resolve_name(g, p.type_name, p.scope);
        if (!resolved) {
            const auto& tn = p.type_name;
            throw ResolutionError(!tn.empty() && tn.front() == '.' ? tn.substr(1) : tn);
        }
        auto& field = g.messages.find(p.message)->second.fields[p.field];
        field.type_name = *resolved;
        const bool is_msg = g.messages.count(*resolved) > 0;
        if (!p.kind_known) {
            field.kind = is_msg ? FieldKind::message : FieldKind::enum_;
        } else if ((field.kind == FieldKind::message) != is_msg) {
            throw ParseError("type kind mismatch for '" + field.name + "'", p.offset);
        }
    }
    for (auto& [name, m] : g.messages) {
        for (auto& f : m.fields) {
            if (f.kind == FieldKind::message) {
                f.message_type = &g.messages.find(*f.type_name)->second;
                g.edges[name].insert(*f.type_name);
            } else if (f.kind == FieldKind::enum_) {
                f.enum_type = &g.enums.find(*f.type_name)->second;
            }
        }
    }

    std::vector<std::string> names;
    std::map<std::string, std::size_t, std::less<>> idx;
    for (const auto& [name, _] : g.messages) {
        idx[name] = names.size();
        names.push_back(name);
    }
    graph::Adjacency adj(names.size());
    for (const auto& [from, tos] : g.edges)
        for (const auto& to : tos) adj[idx[from]].push_back(idx[to]);
    for (const auto& comp : graph::cyclic_components(adj)) {
        std::vector<std::string> group;
        for (auto i : comp) group.push_back(names[i]);
        g.cyclic_groups.push_back(std::move(group));
    }
    std::sort(g.cyclic_groups.begin(), g.cyclic_groups.end());
    return g;
}

// ---------------------------------------------------------------------------
// Field paths

enum class SegmentMarker : std::uint8_t { none, repeated, map_key, map_value };

struct PathSegment {
    std::string name;
    SegmentMarker marker = SegmentMarker::none;

    bool operator==(const PathSegment&) const = default;

    std::string str() const {
        switch (marker) {
            case SegmentMarker::none: return name;
            case SegmentMarker::repeated: return name + "[]";
            case SegmentMarker::map_key: return name + "{}key";
            case SegmentMarker::map_value: return name + "{}value";
        }
        return name;
    }
};

struct FieldPath {
    std::vector<PathSegment> segments;

    bool operator==(const FieldPath&) const = default;

    std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (i) out.push_back('.');
            out += segments[i].str();
        }
        return out;
    }

    static FieldPath parse(std::string_view text) {
        FieldPath p;
        if (text.empty()) return p;
        std::size_t start = 0;
        while (true) {
            const auto dot = text.find('.', start);
            std::string_view seg = text.substr(start, dot == std::string_view::npos ? dot : dot - start);
            PathSegment s;
            if (seg.ends_with("[]")) {
                s.name = std::string(seg.substr(0, seg.size() - 2));
                s.marker = SegmentMarker::repeated;
            } else if (seg.ends_with("{}key")) {
                s.name = std::string(seg.substr(0, seg.size() - 5));
                s.marker = SegmentMarker::map_key;
            } else if (seg.ends_with("{}value")) {
                s.name = std::string(seg.substr(0, seg.size() - 7));
                s.marker = SegmentMarker::map_value;
            } else {
                s.name = std::string(seg);
            }
            if (s.name.empty()) throw ValidationError("malformed field path: " + std::string(text));
            p.segments.push_back(std::move(s));
            if (dot == std::string_view::npos) break;
            start = dot + 1;
        }
        return p;
    }
};

inline std::string join_path(std::string_view prefix, std::string_view segment) {
    if (prefix.empty()) return std::string(segment);
    std::string out;
    out.reserve(prefix.size() + 1 + segment.size());
    out.append(prefix).push_back('.');
    out.append(segment);
    return out;
}

inline std::size_t path_depth(std::string_view path) {
    if (path.empty()) return 0;
    return 1 + static_cast<std::size_t>(std::count(path.begin(), path.end(), '.'));
}

// Segment text for a field reached directly (map fields use key/value segments).
inline std::string field_segment(const FieldInfo& f) {
    return f.is_repeated() && !f.is_map() ? f.name + "[]" : f.name;
}
inline std::string map_key_segment(const FieldInfo& f) { return f.name + "{}key"; }
inline std::string map_value_segment(const FieldInfo& f) { return f.name + "{}value"; }

enum class PathRole : std::uint8_t { field, map_key, map_value };

struct PathEntry {
    std::string path;
    const MessageInfo* owner = nullptr;
    const FieldInfo* field = nullptr;
    PathRole role = PathRole::field;

    // The scalar field describing this path's values (the map key/value field
    // for map roles).
    const FieldInfo& value_field() const {
        if (role == PathRole::map_key) return field->message_type->key_field();
        if (role == PathRole::map_value) return field->message_type->value_field();
        return *field;
    }
};

// Branch of message types under expansion. A message type that re-enters the
// branch is folded onto its outermost occurrence's prefix, so recursive data
// maps onto the finite path set that field_paths enumerates.
class PathBranch {
public:
    std::string enter(const MessageInfo* type, std::string prefix) {
        for (const auto& [t, p] : frames_)
            if (t == type) {
                prefix = p;
                break;
            }
        frames_.emplace_back(type, prefix);
        return prefix;
    }
    void leave() { frames_.pop_back(); }
    bool contains(const MessageInfo* type) const {
        for (const auto& f : frames_)
            if (f.first == type) return true;
        return false;
    }
    std::size_t size() const { return frames_.size(); }

private:
    std::vector<std::pair<const MessageInfo*, std::string>> frames_;
};

namespace detail {

inline void walk_paths(const MessageInfo& m, const std::string& prefix, std::size_t max_depth,
                       std::vector<const MessageInfo*>& branch, std::vector<PathEntry>& out) {
    const std::size_t depth = path_depth(prefix) + 1;
    if (depth > max_depth) return;
    for (const auto& f : m.fields) {
        if (f.is_map()) {
            out.push_back({join_path(prefix, map_key_segment(f)), &m, &f, PathRole::map_key});
            std::string value_path = join_path(prefix, map_value_segment(f));
            out.push_back({value_path, &m, &f, PathRole::map_value});
            const auto* vt = f.message_type->value_field().message_type;
            if (vt && std::find(branch.begin(), branch.end(), vt) == branch.end()) {
                branch.push_back(vt);
                walk_paths(*vt, value_path, max_depth, branch, out);
                branch.pop_back();
            }
            continue;
        }
        std::string path = join_path(prefix, field_segment(f));
        out.push_back({path, &m, &f, PathRole::field});
        if (f.message_type && std::find(branch.begin(), branch.end(), f.message_type) == branch.end()) {
            branch.push_back(f.message_type);
            walk_paths(*f.message_type, path, max_depth, branch, out);
            branch.pop_back();
        }
    }
}

}  // namespace detail

// Depth-first enumeration with owner metadata. A field whose message type is
// already on the expansion branch is emitted but not expanded.
inline std::vector<PathEntry> enumerate_paths(const SchemaGraph& schema, std::string_view root,
                                              std::size_t max_depth) {
    const MessageInfo& m = schema.message(root);
    std::vector<PathEntry> out;
    std::vector<const MessageInfo*> branch{&m};
    detail::walk_paths(m, "", max_depth, branch, out);
    return out;
}

inline std::vector<FieldPath> field_paths(const SchemaGraph& schema, std::string_view root,
                                          std::size_t max_depth) {
    std::vector<FieldPath> out;
    for (const auto& e : enumerate_paths(schema, root, max_depth)) out.push_back(FieldPath::parse(e.path));
    return out;
}

// Resolves a concrete (unfolded) path against the schema by walking segments.
// Returns the field reached and its role, or nullopt.
inline std::optional<PathEntry> resolve_path(const SchemaGraph& schema, std::string_view root,
                                             const FieldPath& path) {
    const MessageInfo* m = &schema.message(root);
    PathEntry entry;
    for (std::size_t i = 0; i < path.segments.size(); ++i) {
        if (m == nullptr) return std::nullopt;
        const auto& seg = path.segments[i];
        const FieldInfo* f = m->find_field(seg.name);
        if (!f) return std::nullopt;
        entry.owner = m;
        entry.field = f;
        switch (seg.marker) {
            case SegmentMarker::none:
                if (f->is_repeated()) return std::nullopt;
                entry.role = PathRole::field;
                m = f->message_type;
                break;
            case SegmentMarker::repeated:
                if (!f->is_repeated() || f->is_map()) return std::nullopt;
                entry.role = PathRole::field;
                m = f->message_type;
                break;
            case SegmentMarker::map_key:
                if (!f->is_map()) return std::nullopt;
                entry.role = PathRole::map_key;
                m = nullptr;
                break;
            case SegmentMarker::map_value:
                if (!f->is_map()) return std::nullopt;
                entry.role = PathRole::map_value;
                m = f->message_type->value_field().message_type;
                break;
        }
    }
    if (entry.field == nullptr) return std::nullopt;
    entry.path = path.str();
    return entry;
}

// ---------------------------------------------------------------------------
// Diagnostics

// Longest chain of message references, counting each cyclic group as one level.
inline std::size_t max_nesting_depth(const SchemaGraph& g) {
    std::vector<std::string> names;
    std::map<std::string, std::size_t, std::less<>> idx;
    for (const auto& [name, _] : g.messages) {
        idx[name] = names.size();
        names.push_back(name);
    }
    graph::Adjacency adj(names.size());
    for (const auto& [from, tos] : g.edges)
        for (const auto& to : tos) adj[idx[from]].push_back(idx[to]);
    const auto comps = graph::strongly_connected_components(adj);
    std::vector<std::size_t> comp_of(names.size());
    for (std::size_t c = 0; c < comps.size(); ++c)
        for (auto v : comps[c]) comp_of[v] = c;
    // Tarjan emits sinks first, so successors are already final.
    std::vector<std::size_t> depth(comps.size(), 1);
    std::size_t best = 0;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        for (auto v : comps[c])
            for (auto w : adj[v])
                if (comp_of[w] != c) depth[c] = std::max(depth[c], depth[comp_of[w]] + 1);
        best = std::max(best, depth[c]);
    }
    return best;
}

inline std::string schema_fingerprint(const SchemaGraph& g) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    };
    for (const auto& [name, m] : g.messages) {
        mix(name);
        for (const auto& f : m.fields) {
            mix(f.name);
            mix(std::to_string(f.number));
            mix(to_string(f.kind));
            mix(to_string(f.cardinality));
            mix(f.type_name.value_or(""));
        }
    }
    for (const auto& [name, e] : g.enums) {
        mix(name);
        for (const auto& [vn, vv] : e.values) {
            mix(vn);
            mix(std::to_string(vv));
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline nlohmann::json schema_report(const SchemaGraph& g) {
    nlohmann::json j;
    j["version"] = "schema-report/v1";
    j["messages"] = g.messages.size();
    j["enums"] = g.enums.size();
    j["fields"] = g.field_count();
    j["max_nesting_depth"] = max_nesting_depth(g);
    j["cyclic_groups"] = g.cyclic_groups;
    j["fingerprint"] = schema_fingerprint(g);
    return j;
}

}  // namespace protosynth
