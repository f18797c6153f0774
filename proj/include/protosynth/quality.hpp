#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "protosynth/codec.hpp"
#include "protosynth/corpus.hpp"
#include "protosynth/errors.hpp"
#include "protosynth/message.hpp"
#include "protosynth/pattern.hpp"
#include "protosynth/schema.hpp"
#include "protosynth/walk.hpp"

namespace protosynth {

// ---------------------------------------------------------------------------
// Distribution tests

struct KsResult {
    double d = 0;
    double p = 1;
};

// Kolmogorov distribution survival function Q(lambda) = P(K > lambda).
inline double kolmogorov_q(double lambda) {
    if (lambda <= 0) return 1.0;
    if (lambda < 1.18) {
        // Theta-function form converges fast for small lambda.
        const double y = -std::numbers::pi * std::numbers::pi / (8 * lambda * lambda);
        double s = 0;
        for (int k = 1; k <= 50; k += 2) s += std::exp(y * k * k);
        return std::clamp(1.0 - std::sqrt(2 * std::numbers::pi) / lambda * s, 0.0, 1.0);
    }
    double s = 0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2 * s, 0.0, 1.0);
}

// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at effective
// size nm/(n+m).
inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ValidationError("ks_two_sample: empty sample");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    KsResult r;
    r.d = d;
    r.p = kolmogorov_q(std::sqrt(n * m / (n + m)) * d);
    return r;
}

template <class Map>
inline double shannon_entropy(const Map& freqs) {
    std::uint64_t total = 0;
    for (const auto& [_, c] : freqs) total += c;
    if (total == 0) throw ValidationError("shannon_entropy: empty distribution");
    double h = 0;
    for (const auto& [_, c] : freqs) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

template <class MapA, class MapB>
inline double total_variation(const MapA& a, const MapB& b) {
    double na = 0, nb = 0;
    for (const auto& [_, c] : a) na += static_cast<double>(c);
    for (const auto& [_, c] : b) nb += static_cast<double>(c);
    if (na == 0 || nb == 0) return 1.0;
    double sum = 0;
    for (const auto& [k, c] : a) {
        auto it = b.find(k);
        const double q = it == b.end() ? 0.0 : static_cast<double>(it->second) / nb;
        sum += std::abs(static_cast<double>(c) / na - q);
    }
    for (const auto& [k, c] : b)
        if (!a.contains(k)) sum += static_cast<double>(c) / nb;
    return sum / 2;
}

inline constexpr double weight_struct = 0.3, weight_stat = 0.4, weight_sem = 0.2, weight_div = 0.1;

inline double quality_score(double q_struct, double q_stat, double q_sem, double q_div) {
    for (double q : {q_struct, q_stat, q_sem, q_div})
        if (!(q >= 0 && q <= 1)) throw ValidationError("quality component out of [0, 1]: " + format_double(q));
    return weight_struct * q_struct + weight_stat * q_stat + weight_sem * q_sem + weight_div * q_div;
}

// ---------------------------------------------------------------------------
// Structural validity

namespace detail {

inline bool values_valid(const Message& m) {
    for (const auto& f : m.type->fields) {
        for (const auto& v : m.fields[f.index]) {
            if (f.kind == FieldKind::enum_) {
                const auto n = std::get<EnumValue>(v).number;
                if (!f.enum_type || !f.enum_type->name_of(n)) return false;
            } else if (f.kind == FieldKind::string) {
                if (!valid_utf8(std::get<std::string>(v))) return false;
            } else if (f.kind == FieldKind::message) {
                const auto& child = std::get<MessagePtr>(v);
                if (!child || child->type != f.message_type || !values_valid(*child)) return false;
            }
        }
        if (!f.is_repeated() && m.fields[f.index].size() > 1) return false;
    }
    return true;
}

}  // namespace detail

// Serializes and re-parses under the schema's definition of the type.
inline bool instance_valid(const Message& m, const SchemaGraph& schema) {
    const MessageInfo* type = schema.find_message(m.type->full_name);
    if (type != m.type || !detail::values_valid(m)) return false;
    try {
        auto back = decode(*type, encode(m));
        return equal(*back, m);
    } catch (const Error&) {
        return false;
    }
}

inline double validate_structure(std::span<const MessagePtr> instances, const SchemaGraph& schema) {
    if (instances.empty()) throw ValidationError("empty dataset");
    std::size_t ok = 0;
    for (const auto& m : instances) ok += m && instance_valid(*m, schema);
    return static_cast<double>(ok) / static_cast<double>(instances.size());
}

// ---------------------------------------------------------------------------
// Business rules (rules/v1)
//
//   {"version": "rules/v1", "message": "pkg.Msg", "rules": [
//     {"id": "age", "kind": "in_range", "target": "age", "lo": 0, "hi": 120},
//     {"id": "tier", "kind": "one_of", "target": "tier", "values": ["1", "2"]},
//     {"id": "mail", "kind": "matches", "target": "email", "pattern": "email"},
//     {"id": "id", "kind": "non_null", "target": "id"},
//     {"id": "vip", "kind": "implies", "if": {"path": "user_type", "value": "premium"},
//      "then": {"kind": "in_range", "target": "credit_limit", "lo": 1000}}]}

inline constexpr std::string_view rules_version = "rules/v1";

enum class RuleKind : std::uint8_t { non_null, in_range, one_of, matches, implies };

struct Rule {
    std::string id;
    RuleKind kind = RuleKind::non_null;
    FieldPath target;
    const FieldInfo* field = nullptr;  // value field at target
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    std::vector<std::string> values;
    PatternId pattern = PatternId::generic;
    // implies
    FieldPath if_path;
    const FieldInfo* if_field = nullptr;
    std::string if_value;
    std::shared_ptr<const Rule> then;
};

struct RuleSet {
    std::string message;
    std::vector<Rule> rules;
};

namespace detail {

inline const FieldInfo* resolve_rule_path(const SchemaGraph& schema, const std::string& root, const std::string& text) {
    FieldPath p;
    try {
        p = FieldPath::parse(text);
    } catch (const ValidationError&) {
        throw ConfigError("rules: malformed path " + text);
    }
    auto e = resolve_path(schema, root, p);
    if (!e) throw ConfigError("rules: path " + text + " does not resolve in " + root);
    return &e->value_field();
}

inline Rule parse_rule(const nlohmann::json& j, const SchemaGraph& schema, const std::string& root, bool nested) {
    if (!j.is_object()) throw ConfigError("rules: each rule must be an object");
    Rule r;
    r.id = j.value("id", std::string{});
    const std::string kind = j.value("kind", std::string{});
    try {
        if (kind == "implies") {
            if (nested) throw ConfigError("rules: implies cannot nest");
            r.kind = RuleKind::implies;
            const auto& cond = j.at("if");
            const std::string path = cond.at("path").get<std::string>();
            r.if_field = resolve_rule_path(schema, root, path);
            r.if_path = FieldPath::parse(path);
            const auto& v = cond.at("value");
            r.if_value = v.is_string() ? v.get<std::string>() : v.dump();
            r.then = std::make_shared<Rule>(parse_rule(j.at("then"), schema, root, true));
            return r;
        }
        const std::string target = j.at("target").get<std::string>();
        r.field = resolve_rule_path(schema, root, target);
        r.target = FieldPath::parse(target);
        if (kind == "non_null") {
            r.kind = RuleKind::non_null;
        } else if (kind == "in_range") {
            r.kind = RuleKind::in_range;
            if (j.contains("lo") && !j.at("lo").is_null()) r.lo = j.at("lo").get<double>();
            if (j.contains("hi") && !j.at("hi").is_null()) r.hi = j.at("hi").get<double>();
        } else if (kind == "one_of") {
            r.kind = RuleKind::one_of;
            for (const auto& v : j.at("values")) r.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        } else if (kind == "matches") {
            r.kind = RuleKind::matches;
            try {
                r.pattern = pattern_from_string(j.at("pattern").get<std::string>());
            } catch (const Error& e) {
                throw ConfigError(std::string("rules: ") + e.what());
            }
        } else {
            throw ConfigError("rules: unknown rule kind '" + kind + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("rules: malformed rule: ") + e.what());
    }
    return r;
}

}  // namespace detail

inline RuleSet load_rules(std::string_view text, const SchemaGraph& schema) {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("version", "") != rules_version)
        throw ConfigError("not a rules/v1 document");
    RuleSet rs;
    rs.message = j.value("message", std::string{});
    if (!schema.find_message(rs.message)) throw ConfigError("rules: unknown message '" + rs.message + "'");
    rs.message = schema.find_message(rs.message)->full_name;
    if (j.contains("rules")) {
        if (!j.at("rules").is_array()) throw ConfigError("rules: 'rules' must be an array");
        for (const auto& r : j.at("rules")) rs.rules.push_back(detail::parse_rule(r, schema, rs.message, false));
    }
    for (std::size_t i = 0; i < rs.rules.size(); ++i)
        if (rs.rules[i].id.empty()) rs.rules[i].id = "rule" + std::to_string(i + 1);
    return rs;
}

namespace detail {

struct Slots {
    std::vector<const Value*> values;
    std::size_t missing = 0;
};

// Values reached by following a concrete path, fanning out over repeated and
// map segments. Unset singular fields (or empty repeated targets) count as
// missing slots.
inline void collect_slots(const Message& m, const FieldPath& path, std::size_t seg, Slots& out) {
    const auto& s = path.segments[seg];
    const FieldInfo* f = m.type->find_field(s.name);
    if (!f) {
        ++out.missing;
        return;
    }
    const auto& vals = m.fields[f->index];
    const bool last = seg + 1 == path.segments.size();
    if (vals.empty()) {
        ++out.missing;
        return;
    }
    for (const auto& v : vals) {
        const Value* x = &v;
        if (s.marker == SegmentMarker::map_key || s.marker == SegmentMarker::map_value) {
            const auto& entry = *std::get<MessagePtr>(v);
            const auto& ev = entry.fields[s.marker == SegmentMarker::map_key ? 0 : 1];
            if (ev.empty()) {
                ++out.missing;
                continue;
            }
            x = &ev.front();
        }
        if (last)
            out.values.push_back(x);
        else
            collect_slots(*std::get<MessagePtr>(*x), path, seg + 1, out);
    }
}

inline bool rule_holds(const Rule& r, const Message& m) {
    if (r.kind == RuleKind::implies) {
        Slots cond;
        collect_slots(m, r.if_path, 0, cond);
        bool triggered = false;
        for (const auto* v : cond.values)
            if (scalar_key(*r.if_field, *v) == r.if_value) triggered = true;
        return !triggered || rule_holds(*r.then, m);
    }
    Slots s;
    collect_slots(m, r.target, 0, s);
    switch (r.kind) {
        case RuleKind::non_null: return s.missing == 0;
        case RuleKind::in_range:
            for (const auto* v : s.values) {
                auto x = numeric_value(*v);
                if (!x || !(*x >= r.lo && *x <= r.hi)) return false;
            }
            return true;
        case RuleKind::one_of:
            for (const auto* v : s.values)
                if (std::find(r.values.begin(), r.values.end(), scalar_key(*r.field, *v)) == r.values.end())
                    return false;
            return true;
        case RuleKind::matches:
            for (const auto* v : s.values) {
                const auto* str = std::get_if<std::string>(v);
                if (!str || !matches(r.pattern, *str)) return false;
            }
            return true;
        case RuleKind::implies: break;
    }
    return true;
}

}  // namespace detail

struct RuleOutcome {
    std::string id;
    std::uint64_t failures = 0;
};

struct RulesResult {
    double q_sem = 1.0;
    std::vector<RuleOutcome> rules;
};

inline RulesResult evaluate_rules(std::span<const MessagePtr> instances, const RuleSet& rules) {
    if (instances.empty()) throw ValidationError("empty dataset");
    RulesResult res;
    for (const auto& r : rules.rules) res.rules.push_back({r.id, 0});
    std::size_t ok = 0;
    for (const auto& m : instances) {
        bool all = true;
        if (!rules.message.empty() && m->type->full_name != rules.message) {
            all = rules.rules.empty();
        } else {
            for (std::size_t i = 0; i < rules.rules.size(); ++i)
                if (!detail::rule_holds(rules.rules[i], *m)) {
                    ++res.rules[i].failures;
                    all = false;
                }
        }
        ok += all;
    }
    res.q_sem = static_cast<double>(ok) / static_cast<double>(instances.size());
    return res;
}

// ---------------------------------------------------------------------------
// Assessment

struct FieldResult {
    std::string path;
    FieldKind kind = FieldKind::int32;
    std::string test;  // "ks", "tv", or "ks+tv"
    std::optional<double> ks_d;
    std::optional<double> ks_p;
    std::optional<double> tv;
    double entropy_ratio = 0;
    bool pass = false;
};

struct QualityReport {
    std::string message;
    std::uint64_t instances = 0;
    std::uint64_t reference_records = 0;
    double q_struct = 0, q_stat = 0, q_sem = 0, q_div = 0, q_total = 0;
    std::vector<FieldResult> fields;
    std::vector<RuleOutcome> rules;
};

struct AssessOptions {
    double alpha = 0.05;
    double tv_threshold = 0.1;
    std::size_t max_depth = 64;
};

namespace detail {

struct PathValues {
    FieldKind kind = FieldKind::int32;
    std::vector<double> numbers;  // numeric values, or lengths for strings/bytes
    std::unordered_map<std::string, std::uint64_t> keys;
    std::uint64_t present = 0;
};

struct ValueCollector {
    std::map<std::string, PathValues> paths;

    void node(const std::string&, const Message&) {}
    void value(const ValueEvent& e) {
        if (e.field.is_message()) return;
        auto& pv = paths[e.path];
        pv.kind = e.field.kind;
        ++pv.present;
        if (is_numeric(e.field.kind))
            pv.numbers.push_back(*numeric_value(e.value));
        else if (e.field.kind == FieldKind::string || e.field.kind == FieldKind::bytes)
            pv.numbers.push_back(static_cast<double>(std::get<std::string>(e.value).size()));
        ++pv.keys[scalar_key(e.field, e.value)];
    }
    void missing(const std::string&, const FieldInfo&, bool) {}
    void size(const std::string&, const FieldInfo&, std::size_t) {}
};

}  // namespace detail

inline QualityReport assess(std::span<const MessagePtr> generated, const LogCorpus& reference,
                            const SchemaGraph& schema, const RuleSet* rules = nullptr,
                            const AssessOptions& opt = {}) {
    if (generated.empty()) throw ValidationError("empty dataset");
    const MessageInfo* type = generated.front()->type;
    QualityReport rep;
    rep.message = type->full_name;
    rep.instances = generated.size();

    detail::ValueCollector gen, ref;
    for (const auto& m : generated) walk_instance(*m, opt.max_depth, gen);
    reference.for_each([&](const Record& r) {
        if (r.type->full_name != type->full_name) return;
        ++rep.reference_records;
        walk_instance(*r.message, opt.max_depth, ref);
    });
    if (rep.reference_records == 0) throw ValidationError("reference corpus has no " + type->full_name + " records");

    rep.q_struct = validate_structure(generated, schema);
    if (rules) {
        auto rr = evaluate_rules(generated, *rules);
        rep.q_sem = rr.q_sem;
        rep.rules = std::move(rr.rules);
    } else {
        rep.q_sem = 1.0;
    }

    static const detail::PathValues empty;
    std::size_t passed = 0;
    double div = 0;
    for (const auto& [path, rv] : ref.paths) {
        if (rv.present == 0) continue;
        const auto git = gen.paths.find(path);
        const auto& gv = git == gen.paths.end() ? empty : git->second;
        FieldResult fr;
        fr.path = path;
        fr.kind = rv.kind;
        const bool lengths = rv.kind == FieldKind::string || rv.kind == FieldKind::bytes;
        const bool categorical_ref = rv.keys.size() * 2 <= rv.present;
        bool ok = true;
        if (is_numeric(rv.kind) || lengths) {
            fr.test = "ks";
            if (gv.numbers.empty()) {
                fr.ks_d = 1.0;
                fr.ks_p = 0.0;
                ok = false;
            } else {
                auto ks = ks_two_sample(gv.numbers, rv.numbers);
                fr.ks_d = ks.d;
                fr.ks_p = ks.p;
                ok = ks.p > opt.alpha;
            }
        }
        if (!is_numeric(rv.kind) && (!lengths || categorical_ref)) {
            fr.test = fr.test.empty() ? "tv" : "ks+tv";
            fr.tv = gv.present == 0 ? 1.0 : total_variation(gv.keys, rv.keys);
            ok = ok && *fr.tv < opt.tv_threshold;
        }
        fr.pass = ok;
        passed += ok;
        if (rv.keys.size() <= 1) {
            fr.entropy_ratio = 1.0;
        } else {
            const double h = gv.present == 0 ? 0.0 : shannon_entropy(gv.keys);
            fr.entropy_ratio = std::clamp(h / std::log2(static_cast<double>(rv.keys.size())), 0.0, 1.0);
        }
        div += fr.entropy_ratio;
        rep.fields.push_back(std::move(fr));
    }
    if (rep.fields.empty()) throw ValidationError("no comparable field paths between dataset and reference");
    rep.q_stat = static_cast<double>(passed) / static_cast<double>(rep.fields.size());
    rep.q_div = div / static_cast<double>(rep.fields.size());
    rep.q_total = quality_score(rep.q_struct, rep.q_stat, rep.q_sem, rep.q_div);
    return rep;
}

inline nlohmann::json report_to_json(const QualityReport& r) {
    nlohmann::json j;
    j["version"] = "quality-report/v1";
    j["message"] = r.message;
    j["instances"] = r.instances;
    j["reference_records"] = r.reference_records;
    j["q_struct"] = r.q_struct;
    j["q_stat"] = r.q_stat;
    j["q_sem"] = r.q_sem;
    j["q_div"] = r.q_div;
    j["q_total"] = r.q_total;
    auto& fields = j["fields"] = nlohmann::json::array();
    for (const auto& f : r.fields) {
        nlohmann::json fj{{"path", f.path},
                          {"kind", to_string(f.kind)},
                          {"test", f.test},
                          {"entropy_ratio", f.entropy_ratio},
                          {"pass", f.pass}};
        if (f.ks_d) fj["ks_d"] = *f.ks_d;
        if (f.ks_p) fj["ks_p"] = *f.ks_p;
        if (f.tv) fj["tv"] = *f.tv;
        fields.push_back(std::move(fj));
    }
    auto& rules = j["rules"] = nlohmann::json::array();
    for (const auto& o : r.rules) rules.push_back({{"id", o.id}, {"failures", o.failures}});
    return j;
}

namespace detail {
inline std::string fixed(double v, int prec = 4) {
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(prec);
    ss << v;
    return ss.str();
}
}  // namespace detail

// Human-readable summary. scale = 10 shows scores on a 0-10 scale.
inline std::string report_table(const QualityReport& r, double scale = 1.0) {
    std::ostringstream out;
    out << "message   " << r.message << "  (" << r.instances << " instances, " << r.reference_records
        << " reference records)\n";
    out << "q_struct  " << detail::fixed(r.q_struct * scale) << "\n"
        << "q_stat    " << detail::fixed(r.q_stat * scale) << "\n"
        << "q_sem     " << detail::fixed(r.q_sem * scale) << "\n"
        << "q_div     " << detail::fixed(r.q_div * scale) << "\n"
        << "Q         " << detail::fixed(r.q_total * scale) << "\n\n";
    std::size_t w = 4;
    for (const auto& f : r.fields) w = std::max(w, f.path.size());
    auto pad = [](std::string s, std::size_t n) {
        s.resize(std::max(s.size(), n), ' ');
        return s;
    };
    out << pad("path", w) << "  " << pad("test", 6) << "  " << pad("D", 8) << "  " << pad("p", 8) << "  "
        << pad("tv", 8) << "  " << pad("H-ratio", 8) << "  pass\n";
    for (const auto& f : r.fields) {
        out << pad(f.path, w) << "  " << pad(f.test, 6) << "  " << pad(f.ks_d ? detail::fixed(*f.ks_d) : "-", 8)
            << "  " << pad(f.ks_p ? detail::fixed(*f.ks_p) : "-", 8) << "  "
            << pad(f.tv ? detail::fixed(*f.tv) : "-", 8) << "  " << pad(detail::fixed(f.entropy_ratio), 8) << "  "
            << (f.pass ? "yes" : "no") << "\n";
    }
    if (!r.rules.empty()) {
        out << "\nrule failures\n";
        for (const auto& o : r.rules) out << "  " << o.id << ": " << o.failures << "\n";
    }
    return out.str();
}

}  // namespace protosynth
