#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "protosynth/codec.hpp"
#include "protosynth/domain.hpp"
#include "protosynth/engine.hpp"
#include "protosynth/errors.hpp"
#include "protosynth/message.hpp"
#include "protosynth/random.hpp"
#include "protosynth/schema.hpp"

namespace protosynth {

// Random baseline: default generators only, minimal cycle handling. The
// engine is built without a domain model.
inline Engine random_engine(const SchemaGraph& schema, std::uint64_t seed, std::size_t max_depth = 16) {
    GenerationConfig cfg;
    cfg.seed = seed;
    cfg.max_depth = max_depth;
    cfg.cycle_strategy = CycleStrategy::minimal;
    return Engine(schema, nullptr, cfg);
}

inline MessagePtr random_generate(std::string_view type, const SchemaGraph& schema, std::uint64_t seed,
                                  std::uint64_t index = 0) {
    return random_engine(schema, seed).generate(type, index);
}

// ---------------------------------------------------------------------------
// Templates (template/v1)
//
//   {"version": "template/v1", "message": "pkg.Msg",
//    "fixed": {...canonical JSON of the message...},
//    "slots": {"tier": {"choice": [1, 2, 3]},
//              "address.lat": {"range": [-90, 90]},
//              "visits": {"counter": 100}}}
//
// Slot paths use singular segments only.

inline constexpr std::string_view template_version = "template/v1";

struct ChoiceSlot {
    std::vector<Value> values;
};
struct RangeSlot {
    double lo = 0, hi = 0;
};
struct CounterSlot {
    double base = 0;
};

struct TemplateSlot {
    std::vector<const FieldInfo*> chain;  // fields along the path
    std::variant<ChoiceSlot, RangeSlot, CounterSlot> spec;
};

struct Template {
    const MessageInfo* type = nullptr;
    MessagePtr fixed;
    std::map<std::string, TemplateSlot> slots;
};

namespace detail {

inline Value slot_value(const FieldInfo& f, const nlohmann::json& v) {
    const std::string key = v.is_string() ? v.get<std::string>() : v.dump();
    auto parsed = parse_scalar_key(f, key);
    if (!parsed) throw ValidationError("template: value " + v.dump() + " does not fit field " + f.name);
    return *parsed;
}

inline MessagePtr set_path(const MessagePtr& m, const MessageInfo& type, const std::vector<const FieldInfo*>& chain,
                           std::size_t i, Value v) {
    auto copy = m ? std::make_shared<Message>(*m) : std::make_shared<Message>(type);
    const FieldInfo& f = *chain[i];
    auto& slot = copy->fields[f.index];
    if (i + 1 == chain.size()) {
        slot.assign(1, std::move(v));
    } else {
        MessagePtr child = slot.empty() ? nullptr : std::get<MessagePtr>(slot.front());
        slot.assign(1, Value{set_path(child, *f.message_type, chain, i + 1, std::move(v))});
    }
    return copy;
}

}  // namespace detail

inline Template load_template(std::string_view text, const SchemaGraph& schema) {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("version", "") != template_version)
        throw ValidationError("not a template/v1 document");
    Template t;
    const MessageInfo* type = schema.find_message(j.value("message", std::string{}));
    if (!type) throw ValidationError("template: unknown message '" + j.value("message", std::string{}) + "'");
    t.type = type;
    t.fixed = protosynth::from_json(*type, j.contains("fixed") ? j.at("fixed") : nlohmann::json::object());
    if (!j.contains("slots")) return t;
    const auto& slots = j.at("slots");
    if (!slots.is_object()) throw ValidationError("template: slots must be an object");
    for (auto it = slots.begin(); it != slots.end(); ++it) {
        const FieldPath path = FieldPath::parse(it.key());
        TemplateSlot slot;
        const MessageInfo* m = type;
        for (std::size_t i = 0; i < path.segments.size(); ++i) {
            const auto& seg = path.segments[i];
            const FieldInfo* f = m ? m->find_field(seg.name) : nullptr;
            if (!f || seg.marker != SegmentMarker::none || f->is_repeated())
                throw ValidationError("template: slot path " + it.key() + " does not name a singular field");
            if (i + 1 < path.segments.size() && !f->is_message())
                throw ValidationError("template: slot path " + it.key() + " passes through a scalar");
            slot.chain.push_back(f);
            m = f->message_type;
        }
        const FieldInfo& leaf = *slot.chain.back();
        if (leaf.is_message()) throw ValidationError("template: slot " + it.key() + " targets a message field");
        const auto& spec = it.value();
        if (!spec.is_object() || spec.size() != 1)
            throw ValidationError("template: slot " + it.key() + " needs exactly one of choice/range/counter");
        if (spec.contains("choice")) {
            ChoiceSlot c;
            for (const auto& v : spec.at("choice")) c.values.push_back(detail::slot_value(leaf, v));
            if (c.values.empty()) throw ValidationError("template: empty choice for " + it.key());
            slot.spec = std::move(c);
        } else if (spec.contains("range")) {
            if (!is_numeric(leaf.kind)) throw ValidationError("template: range slot on non-numeric " + it.key());
            const auto& r = spec.at("range");
            if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number() ||
                r[0].get<double>() > r[1].get<double>())
                throw ValidationError("template: range for " + it.key() + " must be [lo, hi]");
            slot.spec = RangeSlot{r[0].get<double>(), r[1].get<double>()};
        } else if (spec.contains("counter")) {
            if (!is_numeric(leaf.kind)) throw ValidationError("template: counter slot on non-numeric " + it.key());
            if (!spec.at("counter").is_number()) throw ValidationError("template: counter base must be a number");
            slot.spec = CounterSlot{spec.at("counter").get<double>()};
        } else {
            throw ValidationError("template: slot " + it.key() + " needs exactly one of choice/range/counter");
        }
        t.slots.emplace(it.key(), std::move(slot));
    }
    return t;
}

inline MessagePtr template_generate(const Template& t, std::uint64_t index, std::uint64_t seed) {
    Rng rng(instance_seed(seed, index));
    MessagePtr out = t.fixed;
    for (const auto& [path, slot] : t.slots) {
        const FieldInfo& leaf = *slot.chain.back();
        Value v;
        if (const auto* c = std::get_if<ChoiceSlot>(&slot.spec)) {
            v = c->values[rng.below(c->values.size())];
        } else if (const auto* r = std::get_if<RangeSlot>(&slot.spec)) {
            if (is_integer(leaf.kind)) {
                const auto lo = static_cast<std::int64_t>(std::ceil(r->lo));
                const auto hi = std::max(lo, static_cast<std::int64_t>(std::floor(r->hi)));
                v = numeric_to_value(leaf.kind, static_cast<double>(rng.between(lo, hi)));
            } else {
                v = numeric_to_value(leaf.kind, rng.uniform(r->lo, r->hi));
            }
        } else {
            v = numeric_to_value(leaf.kind, std::get<CounterSlot>(slot.spec).base + static_cast<double>(index));
        }
        out = detail::set_path(out, *t.type, slot.chain, 0, std::move(v));
    }
    return out;
}

namespace detail {

inline void derive_fields(const MessageInfo& m, const std::string& prefix, const DomainModel& domain,
                          const std::string& root, std::size_t depth, nlohmann::json& fixed, nlohmann::json& slots) {
    if (depth > 8) return;
    for (const auto& f : m.fields) {
        if (f.is_repeated() || f.oneof_index) continue;
        const std::string path = join_path(prefix, f.name);
        const FieldProfile* p = domain.find(root, path);
        if (!p || p->stats.present_count == 0) continue;
        if (f.is_message()) {
            if (f.message_type == &m) continue;
            nlohmann::json child = nlohmann::json::object();
            derive_fields(*f.message_type, path, domain, root, depth + 1, child, slots);
            if (!child.empty()) fixed[f.json_name] = std::move(child);
            continue;
        }
        const auto& st = p->stats;
        if (st.frequencies.empty()) continue;
        // The most frequent value is the fixed default; variation comes from a
        // range over numerics or a choice among the ten most frequent values.
        if (auto v = parse_scalar_key(f, st.frequencies.front().first)) {
            Message holder(m);
            holder.fields[f.index].push_back(*v);
            auto j = to_json(holder);
            if (!j.empty()) fixed[f.json_name] = j.begin().value();
        }
        if (is_numeric(f.kind) && st.numeric && !st.categorical_like()) {
            slots[path] = {{"range", {st.numeric->min, st.numeric->max}}};
        } else if (st.frequencies.size() > 1) {
            nlohmann::json choice = nlohmann::json::array();
            for (std::size_t i = 0; i < std::min<std::size_t>(10, st.frequencies.size()); ++i)
                choice.push_back(st.frequencies[i].first);
            slots[path] = {{"choice", choice}};
        }
    }
}

}  // namespace detail

// A template built from a domain model: top-value defaults for singular
// fields (recursing into singular messages), plus range and choice slots.
inline std::string derive_template(const SchemaGraph& schema, const DomainModel& domain, std::string_view type) {
    const MessageInfo& m = schema.message(type);
    nlohmann::json fixed = nlohmann::json::object(), slots = nlohmann::json::object();
    detail::derive_fields(m, "", domain, m.full_name, 0, fixed, slots);
    nlohmann::json doc;
    doc["version"] = template_version;
    doc["message"] = m.full_name;
    doc["fixed"] = fixed;
    doc["slots"] = slots;
    return doc.dump(1) + "\n";
}

}  // namespace protosynth
