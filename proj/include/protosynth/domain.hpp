#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "protosynth/errors.hpp"
#include "protosynth/pattern.hpp"
#include "protosynth/schema.hpp"
#include "protosynth/stats.hpp"

namespace protosynth {

inline constexpr double default_correlation_threshold = 0.7;

enum class EdgeProvenance : std::uint8_t { semantic, correlation, annotation };

inline std::string_view to_string(EdgeProvenance p) {
    switch (p) {
        case EdgeProvenance::semantic: return "semantic";
        case EdgeProvenance::correlation: return "correlation";
        case EdgeProvenance::annotation: return "annotation";
    }
    return "?";
}

inline EdgeProvenance provenance_from_string(std::string_view s) {
    if (s == "semantic") return EdgeProvenance::semantic;
    if (s == "correlation") return EdgeProvenance::correlation;
    if (s == "annotation") return EdgeProvenance::annotation;
    throw ValidationError("unknown provenance: " + std::string(s));
}

struct Dependency {
    std::string path;
    double r = 0;
    EdgeProvenance provenance = EdgeProvenance::correlation;

    bool operator==(const Dependency&) const = default;
};

struct ConstraintSet {
    std::optional<std::pair<double, double>> range;
    double null_probability = 0;
    std::vector<Dependency> dependencies;

    bool operator==(const ConstraintSet&) const = default;
};

inline ConstraintSet infer_constraints(const FieldStats& stats, const std::vector<std::pair<std::string, double>>& correlations,
                                       double threshold = default_correlation_threshold) {
    ConstraintSet c;
    if (stats.numeric) c.range = std::pair{stats.numeric->min, stats.numeric->max};
    c.null_probability =
        stats.count == 0 ? 0.0 : 1.0 - static_cast<double>(stats.present_count) / static_cast<double>(stats.count);
    for (const auto& [path, r] : correlations)
        if (std::abs(r) > threshold) c.dependencies.push_back({path, r, EdgeProvenance::correlation});
    return c;
}

struct FieldProfile {
    FieldKind kind = FieldKind::int32;
    FieldStats stats;
    std::optional<PatternSpec> pattern;
    ConstraintSet constraints;
    std::optional<FieldStats> sizes;  // element counts per parent, repeated/map paths only

    bool operator==(const FieldProfile&) const = default;
};

// P(dependent | controlling) for two sibling fields, keyed by scalar keys.
struct ConditionalDistribution {
    std::string controlling;  // field paths relative to the root
    std::string dependent;
    std::map<std::string, std::map<std::string, std::uint64_t>> rows;
    std::vector<std::pair<std::string, std::uint64_t>> marginal;
    std::uint64_t copresent = 0;
    bool skipped = false;  // controlling cardinality exceeded the limit

    bool operator==(const ConditionalDistribution&) const = default;

    std::uint64_t row_total(const std::string& key) const {
        std::uint64_t n = 0;
        if (auto it = rows.find(key); it != rows.end())
            for (const auto& [_, c] : it->second) n += c;
        return n;
    }
};

struct RootModel {
    std::uint64_t records = 0;
    std::map<std::string, FieldProfile> profiles;
    std::vector<ConditionalDistribution> conditionals;

    bool operator==(const RootModel&) const = default;
};

struct DomainProvenance {
    std::uint64_t record_count = 0;
    std::uint64_t skipped_count = 0;
    std::string analyzed_at;
    std::string schema_fingerprint;

    bool operator==(const DomainProvenance&) const = default;
};

struct DomainModel {
    std::map<std::string, RootModel> roots;
    DomainProvenance provenance;

    bool operator==(const DomainModel&) const = default;

    const FieldProfile* find(std::string_view root, std::string_view path) const {
        auto r = roots.find(std::string(root));
        if (r == roots.end()) return nullptr;
        auto p = r->second.profiles.find(std::string(path));
        return p == r->second.profiles.end() ? nullptr : &p->second;
    }

    const ConditionalDistribution* conditional(std::string_view root, std::string_view controlling,
                                               std::string_view dependent) const {
        auto r = roots.find(std::string(root));
        if (r == roots.end()) return nullptr;
        for (const auto& c : r->second.conditionals)
            if (c.controlling == controlling && c.dependent == dependent) return &c;
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// Persistence: one JSON document tagged domain-model/v1. Keys are sorted by
// nlohmann::json, doubles print in shortest round-trip form, so
// save(load(save(m))) is byte-identical to save(m).

inline constexpr std::string_view domain_model_version = "domain-model/v1";

namespace detail {

using json = nlohmann::json;

inline json freq_to_json(const std::vector<std::pair<std::string, std::uint64_t>>& f) {
    json a = json::array();
    for (const auto& [k, c] : f) a.push_back(json::array({k, c}));
    return a;
}

inline std::vector<std::pair<std::string, std::uint64_t>> freq_from_json(const json& a) {
    std::vector<std::pair<std::string, std::uint64_t>> f;
    for (const auto& e : a) f.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::uint64_t>());
    return f;
}

// Non-finite doubles are stored as strings.
inline json real_to_json(double d) {
    if (std::isfinite(d)) return d;
    return format_double(d);
}

inline double real_from_json(const json& j) {
    if (j.is_string()) {
        auto d = parse_double_key(j.get<std::string>());
        if (!d) throw ValidationError("bad real: " + j.dump());
        return *d;
    }
    return j.get<double>();
}

inline json stats_to_json(const FieldStats& s) {
    json j;
    j["count"] = s.count;
    j["present_count"] = s.present_count;
    j["distinct"] = s.distinct;
    j["overflow"] = s.overflow;
    j["frequencies"] = freq_to_json(s.frequencies);
    if (s.numeric) {
        const auto& n = *s.numeric;
        json nj;
        nj["mean"] = real_to_json(n.mean);
        nj["variance"] = real_to_json(n.variance);
        nj["min"] = real_to_json(n.min);
        nj["max"] = real_to_json(n.max);
        json p = json::object();
        for (const auto& [k, v] : n.percentiles) p[std::to_string(k)] = real_to_json(v);
        nj["percentiles"] = p;
        json q = json::array();
        for (double v : n.quantiles) q.push_back(real_to_json(v));
        nj["quantiles"] = q;
        j["numeric"] = nj;
    }
    return j;
}

inline FieldStats stats_from_json(const json& j) {
    FieldStats s;
    s.count = j.at("count").get<std::uint64_t>();
    s.present_count = j.at("present_count").get<std::uint64_t>();
    s.distinct = j.at("distinct").get<std::uint64_t>();
    s.overflow = j.at("overflow").get<std::uint64_t>();
    s.frequencies = freq_from_json(j.at("frequencies"));
    if (j.contains("numeric")) {
        const auto& nj = j.at("numeric");
        NumericSummary n;
        n.mean = real_from_json(nj.at("mean"));
        n.variance = real_from_json(nj.at("variance"));
        n.min = real_from_json(nj.at("min"));
        n.max = real_from_json(nj.at("max"));
        for (auto it = nj.at("percentiles").begin(); it != nj.at("percentiles").end(); ++it)
            n.percentiles[std::stoi(it.key())] = real_from_json(it.value());
        for (const auto& v : nj.at("quantiles")) n.quantiles.push_back(real_from_json(v));
        s.numeric = std::move(n);
    }
    return s;
}

inline json pattern_to_json(const PatternSpec& p) {
    json j;
    j["id"] = to_string(p.id);
    json lengths = json::object();
    for (const auto& [len, c] : p.lengths) lengths[std::to_string(len)] = c;
    j["lengths"] = lengths;
    json classes = json::object();
    for (const auto& [cls, c] : p.char_classes) classes[std::string(to_string(cls))] = c;
    j["char_classes"] = classes;
    return j;
}

inline PatternSpec pattern_from_json(const json& j) {
    PatternSpec p;
    p.id = pattern_from_string(j.at("id").get<std::string>());
    for (auto it = j.at("lengths").begin(); it != j.at("lengths").end(); ++it)
        p.lengths[static_cast<std::size_t>(std::stoull(it.key()))] = it.value().get<std::uint64_t>();
    for (auto it = j.at("char_classes").begin(); it != j.at("char_classes").end(); ++it) {
        bool found = false;
        for (auto cls : all_char_classes)
            if (to_string(cls) == it.key()) {
                p.char_classes[cls] = it.value().get<std::uint64_t>();
                found = true;
            }
        if (!found) throw ValidationError("unknown char class: " + it.key());
    }
    return p;
}

inline FieldKind kind_from_string(std::string_view s) {
    for (int k = 0; k <= static_cast<int>(FieldKind::message); ++k)
        if (to_string(static_cast<FieldKind>(k)) == s) return static_cast<FieldKind>(k);
    throw ValidationError("unknown field kind: " + std::string(s));
}

}  // namespace detail

inline nlohmann::json domain_to_json(const DomainModel& m) {
    using detail::json;
    json j;
    j["version"] = domain_model_version;
    j["provenance"] = {{"record_count", m.provenance.record_count},
                       {"skipped_count", m.provenance.skipped_count},
                       {"analyzed_at", m.provenance.analyzed_at},
                       {"schema_fingerprint", m.provenance.schema_fingerprint}};
    json roots = json::object();
    for (const auto& [root, rm] : m.roots) {
        json rj;
        rj["records"] = rm.records;
        json profiles = json::object();
        for (const auto& [path, p] : rm.profiles) {
            json pj;
            pj["kind"] = to_string(p.kind);
            pj["stats"] = detail::stats_to_json(p.stats);
            if (p.pattern) pj["pattern"] = detail::pattern_to_json(*p.pattern);
            if (p.sizes) pj["sizes"] = detail::stats_to_json(*p.sizes);
            json cj;
            if (p.constraints.range)
                cj["range"] = json::array({detail::real_to_json(p.constraints.range->first),
                                           detail::real_to_json(p.constraints.range->second)});
            cj["null_probability"] = p.constraints.null_probability;
            json deps = json::array();
            for (const auto& d : p.constraints.dependencies)
                deps.push_back({{"path", d.path}, {"r", d.r}, {"provenance", to_string(d.provenance)}});
            cj["dependencies"] = deps;
            pj["constraints"] = cj;
            profiles[path] = pj;
        }
        rj["profiles"] = profiles;
        json conds = json::array();
        for (const auto& c : rm.conditionals) {
            json cj;
            cj["controlling"] = c.controlling;
            cj["dependent"] = c.dependent;
            cj["copresent"] = c.copresent;
            cj["skipped"] = c.skipped;
            cj["marginal"] = detail::freq_to_json(c.marginal);
            json rows = json::object();
            for (const auto& [k, row] : c.rows) rows[k] = row;
            cj["rows"] = rows;
            conds.push_back(cj);
        }
        rj["conditionals"] = conds;
        roots[root] = rj;
    }
    j["roots"] = roots;
    return j;
}

inline DomainModel domain_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("version", "") != domain_model_version)
        throw ValidationError("not a domain-model/v1 document");
    DomainModel m;
    try {
        const auto& pv = j.at("provenance");
        m.provenance.record_count = pv.at("record_count").get<std::uint64_t>();
        m.provenance.skipped_count = pv.at("skipped_count").get<std::uint64_t>();
        m.provenance.analyzed_at = pv.at("analyzed_at").get<std::string>();
        m.provenance.schema_fingerprint = pv.at("schema_fingerprint").get<std::string>();
        for (auto r = j.at("roots").begin(); r != j.at("roots").end(); ++r) {
            RootModel rm;
            rm.records = r.value().at("records").get<std::uint64_t>();
            for (auto p = r.value().at("profiles").begin(); p != r.value().at("profiles").end(); ++p) {
                const auto& pj = p.value();
                FieldProfile fp;
                fp.kind = detail::kind_from_string(pj.at("kind").get<std::string>());
                fp.stats = detail::stats_from_json(pj.at("stats"));
                if (pj.contains("pattern")) fp.pattern = detail::pattern_from_json(pj.at("pattern"));
                if (pj.contains("sizes")) fp.sizes = detail::stats_from_json(pj.at("sizes"));
                const auto& cj = pj.at("constraints");
                if (cj.contains("range"))
                    fp.constraints.range = std::pair{detail::real_from_json(cj.at("range").at(0)),
                                                     detail::real_from_json(cj.at("range").at(1))};
                fp.constraints.null_probability = cj.at("null_probability").get<double>();
                for (const auto& d : cj.at("dependencies"))
                    fp.constraints.dependencies.push_back({d.at("path").get<std::string>(), d.at("r").get<double>(),
                                                           provenance_from_string(d.at("provenance").get<std::string>())});
                rm.profiles.emplace(p.key(), std::move(fp));
            }
            for (const auto& cj : r.value().at("conditionals")) {
                ConditionalDistribution c;
                c.controlling = cj.at("controlling").get<std::string>();
                c.dependent = cj.at("dependent").get<std::string>();
                c.copresent = cj.at("copresent").get<std::uint64_t>();
                c.skipped = cj.at("skipped").get<bool>();
                c.marginal = detail::freq_from_json(cj.at("marginal"));
                for (auto row = cj.at("rows").begin(); row != cj.at("rows").end(); ++row)
                    c.rows[row.key()] = row.value().get<std::map<std::string, std::uint64_t>>();
                rm.conditionals.push_back(std::move(c));
            }
            m.roots.emplace(r.key(), std::move(rm));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed domain model: ") + e.what());
    }
    return m;
}

inline std::string save_domain_model(const DomainModel& m) { return domain_to_json(m).dump(1) + "\n"; }

inline DomainModel load_domain_model(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("domain model is not valid JSON: ") + e.what());
    }
    return domain_from_json(j);
}

}  // namespace protosynth
