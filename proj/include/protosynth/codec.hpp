#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include <json.hpp>

#include "protosynth/message.hpp"
#include "protosynth/wire.hpp"

namespace protosynth {

// ---------------------------------------------------------------------------
// Binary wire format

namespace detail {

inline bool packable(FieldKind k) {
    return k != FieldKind::string && k != FieldKind::bytes && k != FieldKind::message;
}

inline void encode_scalar_payload(wire::Writer& w, FieldKind kind, const Value& v) {
    switch (kind) {
        case FieldKind::double_: w.fixed64(wire::double_bits(std::get<double>(v))); break;
        case FieldKind::float_: w.fixed32(wire::float_bits(static_cast<float>(std::get<double>(v)))); break;
        case FieldKind::int32:
        case FieldKind::int64: w.varint(static_cast<std::uint64_t>(std::get<std::int64_t>(v))); break;
        case FieldKind::uint32:
        case FieldKind::uint64: w.varint(std::get<std::uint64_t>(v)); break;
        case FieldKind::sint32:
        case FieldKind::sint64: w.varint(wire::zigzag_encode(std::get<std::int64_t>(v))); break;
        case FieldKind::fixed32: w.fixed32(static_cast<std::uint32_t>(std::get<std::uint64_t>(v))); break;
        case FieldKind::fixed64: w.fixed64(std::get<std::uint64_t>(v)); break;
        case FieldKind::sfixed32:
            w.fixed32(static_cast<std::uint32_t>(static_cast<std::int32_t>(std::get<std::int64_t>(v))));
            break;
        case FieldKind::sfixed64: w.fixed64(static_cast<std::uint64_t>(std::get<std::int64_t>(v))); break;
        case FieldKind::bool_: w.varint(std::get<bool>(v) ? 1 : 0); break;
        case FieldKind::enum_:
            w.varint(static_cast<std::uint64_t>(static_cast<std::int64_t>(std::get<EnumValue>(v).number)));
            break;
        default: break;
    }
}

inline wire::WireType scalar_wire_type(FieldKind kind) {
    switch (kind) {
        case FieldKind::double_:
        case FieldKind::fixed64:
        case FieldKind::sfixed64: return wire::WireType::fixed64;
        case FieldKind::float_:
        case FieldKind::fixed32:
        case FieldKind::sfixed32: return wire::WireType::fixed32;
        case FieldKind::string:
        case FieldKind::bytes:
        case FieldKind::message: return wire::WireType::length_delimited;
        default: return wire::WireType::varint;
    }
}

inline void encode_into(const Message& m, std::string& out);

inline void encode_value(wire::Writer& w, const FieldInfo& f, const Value& v) {
    if (f.kind == FieldKind::message) {
        w.tag(f.number, wire::WireType::length_delimited);
        std::string nested;
        encode_into(*std::get<MessagePtr>(v), nested);
        w.bytes(nested);
    } else if (f.kind == FieldKind::string || f.kind == FieldKind::bytes) {
        w.tag(f.number, wire::WireType::length_delimited);
        w.bytes(std::get<std::string>(v));
    } else {
        w.tag(f.number, scalar_wire_type(f.kind));
        encode_scalar_payload(w, f.kind, v);
    }
}

inline void encode_into(const Message& m, std::string& out) {
    wire::Writer w(out);
    for (const auto& f : m.type->fields) {
        const auto& vals = m.fields[f.index];
        if (vals.empty()) continue;
        if (f.is_repeated() && packable(f.kind)) {
            std::string packed;
            wire::Writer pw(packed);
            for (const auto& v : vals) encode_scalar_payload(pw, f.kind, v);
            w.tag(f.number, wire::WireType::length_delimited);
            w.bytes(packed);
        } else {
            for (const auto& v : vals) encode_value(w, f, v);
        }
    }
}

inline Value decode_scalar(wire::Reader& r, FieldKind kind) {
    switch (kind) {
        case FieldKind::double_: return wire::bits_double(r.fixed64());
        case FieldKind::float_: return static_cast<double>(wire::bits_float(r.fixed32()));
        case FieldKind::int32: return static_cast<std::int64_t>(static_cast<std::int32_t>(r.varint()));
        case FieldKind::int64: return static_cast<std::int64_t>(r.varint());
        case FieldKind::uint32: return static_cast<std::uint64_t>(static_cast<std::uint32_t>(r.varint()));
        case FieldKind::uint64: return r.varint();
        case FieldKind::sint32:
            return static_cast<std::int64_t>(static_cast<std::int32_t>(wire::zigzag_decode(r.varint())));
        case FieldKind::sint64: return wire::zigzag_decode(r.varint());
        case FieldKind::fixed32: return static_cast<std::uint64_t>(r.fixed32());
        case FieldKind::fixed64: return r.fixed64();
        case FieldKind::sfixed32: return static_cast<std::int64_t>(static_cast<std::int32_t>(r.fixed32()));
        case FieldKind::sfixed64: return static_cast<std::int64_t>(r.fixed64());
        case FieldKind::bool_: return r.varint() != 0;
        case FieldKind::enum_: return EnumValue{static_cast<std::int32_t>(r.varint())};
        default: return false;
    }
}

inline MessagePtr decode_message(const MessageInfo& type, wire::Reader r, std::size_t depth);

inline void decode_field(Message& m, const FieldInfo& f, wire::Reader& r, const wire::Reader::Tag& t,
                         std::size_t depth) {
    auto& slot = m.fields[f.index];
    auto store = [&](Value v) {
        if (f.is_repeated())
            slot.push_back(std::move(v));
        else if (slot.empty())
            slot.push_back(std::move(v));
        else
            slot[0] = std::move(v);  // last one wins
    };
    if (f.kind == FieldKind::message) {
        if (t.type != wire::WireType::length_delimited) throw ParseError("wire type mismatch for " + f.name, t.offset);
        store(decode_message(*f.message_type, r.sub(), depth + 1));
        return;
    }
    if (f.kind == FieldKind::string || f.kind == FieldKind::bytes) {
        if (t.type != wire::WireType::length_delimited) throw ParseError("wire type mismatch for " + f.name, t.offset);
        store(std::string(r.bytes()));
        return;
    }
    if (t.type == wire::WireType::length_delimited && f.is_repeated()) {
        auto pr = r.sub();
        while (!pr.done()) store(decode_scalar(pr, f.kind));
        return;
    }
    if (t.type != scalar_wire_type(f.kind)) throw ParseError("wire type mismatch for " + f.name, t.offset);
    store(decode_scalar(r, f.kind));
}

inline MessagePtr decode_message(const MessageInfo& type, wire::Reader r, std::size_t depth) {
    if (depth > 100) throw ParseError("message nesting exceeds 100", r.offset());
    auto m = std::make_shared<Message>(type);
    while (!r.done()) {
        const auto t = r.tag();
        const FieldInfo* f = type.find_number(t.field_number);
        if (!f) {
            r.skip(t);
            continue;
        }
        decode_field(*m, *f, r, t, depth);
    }
    return m;
}

}  // namespace detail

inline std::string encode(const Message& m) {
    std::string out;
    detail::encode_into(m, out);
    return out;
}

inline MessagePtr decode(const MessageInfo& type, std::string_view bytes) {
    return detail::decode_message(type, wire::Reader(bytes), 0);
}

// Appends [varint length][message bytes].
inline void encode_delimited(const Message& m, std::string& out) {
    std::string body = encode(m);
    wire::Writer w(out);
    w.varint(body.size());
    out += body;
}

// ---------------------------------------------------------------------------
// Canonical protobuf JSON

namespace detail {

inline nlohmann::ordered_json scalar_to_json(const FieldInfo& f, const Value& v);
inline nlohmann::ordered_json message_to_json(const Message& m);

inline nlohmann::ordered_json scalar_to_json(const FieldInfo& f, const Value& v) {
    switch (f.kind) {
        case FieldKind::message: return message_to_json(*std::get<MessagePtr>(v));
        case FieldKind::bool_: return std::get<bool>(v);
        case FieldKind::string: return std::get<std::string>(v);
        case FieldKind::bytes: return base64_encode(std::get<std::string>(v));
        case FieldKind::enum_: {
            const auto n = std::get<EnumValue>(v).number;
            if (f.enum_type)
                if (const auto* name = f.enum_type->name_of(n)) return *name;
            return n;
        }
        case FieldKind::double_:
        case FieldKind::float_: {
            const double d = std::get<double>(v);
            if (!std::isfinite(d)) return format_double(d);
            return d;
        }
        case FieldKind::int64:
        case FieldKind::sint64:
        case FieldKind::sfixed64: return std::to_string(std::get<std::int64_t>(v));
        case FieldKind::uint64:
        case FieldKind::fixed64: return std::to_string(std::get<std::uint64_t>(v));
        default:
            if (is_signed_integer(f.kind)) return std::get<std::int64_t>(v);
            return std::get<std::uint64_t>(v);
    }
}

inline std::string map_key_to_json(const FieldInfo& key_field, const Value& v) {
    return scalar_key(key_field, v);
}

inline nlohmann::ordered_json message_to_json(const Message& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& f : m.type->fields) {
        const auto& vals = m.fields[f.index];
        if (vals.empty()) continue;
        if (f.is_map()) {
            nlohmann::ordered_json obj = nlohmann::ordered_json::object();
            const auto& kf = f.message_type->key_field();
            const auto& vf = f.message_type->value_field();
            for (const auto& entry : vals) {
                const auto& e = *std::get<MessagePtr>(entry);
                if (e.fields[0].empty()) continue;
                const std::string key = map_key_to_json(kf, e.fields[0][0]);
                if (e.fields[1].empty())
                    obj[key] = nullptr;
                else
                    obj[key] = scalar_to_json(vf, e.fields[1][0]);
            }
            j[f.json_name] = std::move(obj);
        } else if (f.is_repeated()) {
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (const auto& v : vals) arr.push_back(scalar_to_json(f, v));
            j[f.json_name] = std::move(arr);
        } else {
            j[f.json_name] = scalar_to_json(f, vals[0]);
        }
    }
    return j;
}

template <class Json>
inline MessagePtr message_from_json(const MessageInfo& type, const Json& j, std::size_t depth);

template <class Json>
inline Value scalar_from_json(const FieldInfo& f, const Json& j, std::size_t depth) {
    auto fail = [&]() -> Value { throw ValidationError("bad JSON value for field '" + f.name + "'"); };
    switch (f.kind) {
        case FieldKind::message:
            if (!j.is_object()) return fail();
            return message_from_json(*f.message_type, j, depth + 1);
        case FieldKind::bool_:
            if (!j.is_boolean()) return fail();
            return j.template get<bool>();
        case FieldKind::string:
            if (!j.is_string()) return fail();
            return j.template get<std::string>();
        case FieldKind::bytes:
            if (!j.is_string()) return fail();
            return base64_decode(j.template get<std::string>());
        case FieldKind::enum_:
            if (j.is_string()) {
                if (auto n = f.enum_type->number_of(j.template get<std::string>())) return EnumValue{*n};
                return fail();
            }
            if (j.is_number_integer()) return EnumValue{j.template get<std::int32_t>()};
            return fail();
        case FieldKind::double_:
        case FieldKind::float_: {
            double d;
            if (j.is_number()) {
                d = j.template get<double>();
            } else if (j.is_string()) {
                auto p = parse_double_key(j.template get<std::string>());
                if (!p) return fail();
                d = *p;
            } else {
                return fail();
            }
            if (f.kind == FieldKind::float_) d = static_cast<double>(static_cast<float>(d));
            return d;
        }
        default: {
            std::string text;
            if (j.is_number_integer() || j.is_number_unsigned()) {
                text = j.dump();
            } else if (j.is_number_float()) {
                const double d = j.template get<double>();
                if (d != std::floor(d)) return fail();
                text = format_double(d);
            } else if (j.is_string()) {
                text = j.template get<std::string>();
            } else {
                return fail();
            }
            auto v = parse_scalar_key(f, text);
            if (!v) return fail();
            return *v;
        }
    }
}

template <class Json>
inline MessagePtr message_from_json(const MessageInfo& type, const Json& j, std::size_t depth) {
    if (depth > 100) throw ValidationError("JSON nesting exceeds 100");
    if (!j.is_object()) throw ValidationError("expected JSON object for " + type.full_name);
    auto m = std::make_shared<Message>(type);
    for (auto it = j.begin(); it != j.end(); ++it) {
        const FieldInfo* f = type.find_field(it.key());
        if (!f) throw ValidationError("unknown field '" + it.key() + "' in " + type.full_name);
        const auto& val = it.value();
        if (val.is_null()) continue;
        auto& slot = m->fields[f->index];
        if (f->is_map()) {
            if (!val.is_object()) throw ValidationError("expected object for map field '" + f->name + "'");
            const auto& entry_type = *f->message_type;
            for (auto e = val.begin(); e != val.end(); ++e) {
                auto entry = std::make_shared<Message>(entry_type);
                auto key = parse_scalar_key(entry_type.key_field(), e.key());
                if (!key) throw ValidationError("bad map key for '" + f->name + "'");
                entry->fields[0].push_back(std::move(*key));
                if (!e.value().is_null())
                    entry->fields[1].push_back(scalar_from_json(entry_type.value_field(), e.value(), depth));
                slot.push_back(MessagePtr(std::move(entry)));
            }
        } else if (f->is_repeated()) {
            if (!val.is_array()) throw ValidationError("expected array for repeated field '" + f->name + "'");
            for (const auto& item : val) slot.push_back(scalar_from_json(*f, item, depth));
        } else {
            slot.push_back(scalar_from_json(*f, val, depth));
        }
    }
    return m;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const Message& m) { return detail::message_to_json(m); }

template <class Json>
inline MessagePtr from_json(const MessageInfo& type, const Json& j) {
    return detail::message_from_json(type, j, 0);
}

}  // namespace protosynth
