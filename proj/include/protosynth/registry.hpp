#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "protosynth/domain.hpp"
#include "protosynth/errors.hpp"
#include "protosynth/pattern.hpp"
#include "protosynth/schema.hpp"

namespace protosynth {

enum class Strategy : std::uint8_t { empirical, pattern, range, enum_weighted, default_ };

inline std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::empirical: return "empirical";
        case Strategy::pattern: return "pattern";
        case Strategy::range: return "range";
        case Strategy::enum_weighted: return "enum-weighted";
        case Strategy::default_: return "default";
    }
    return "?";
}

// Below this many observations a numeric profile only supports a range.
inline constexpr std::uint64_t min_empirical_observations = 10;

struct GeneratorDescriptor {
    Strategy strategy = Strategy::default_;
    std::optional<PatternId> pattern;
    bool categorical = false;  // empirical: resample the frequency table
    // Profile reference; empty when the strategy is default.
    std::string profile_root;
    std::string profile_path;

    bool operator==(const GeneratorDescriptor&) const = default;
};

// Strategy for values described by `value_field` given an optional profile.
inline GeneratorDescriptor select_strategy(const FieldInfo& value_field, const FieldProfile* profile) {
    GeneratorDescriptor d;
    if (!profile || value_field.is_message() || profile->stats.present_count == 0) return d;
    const auto& s = profile->stats;
    const FieldKind k = value_field.kind;
    if (k == FieldKind::enum_) {
        d.strategy = Strategy::enum_weighted;
        d.categorical = true;
    } else if (k == FieldKind::bool_) {
        d.strategy = Strategy::empirical;
        d.categorical = true;
    } else if (is_numeric(k)) {
        if (!s.numeric) return d;
        if (s.present_count < min_empirical_observations) {
            d.strategy = Strategy::range;
        } else {
            d.strategy = Strategy::empirical;
            d.categorical = s.categorical_like();
        }
    } else if (k == FieldKind::string) {
        if (s.categorical_like()) {
            d.strategy = Strategy::empirical;
            d.categorical = true;
        } else if (profile->pattern) {
            d.strategy = Strategy::pattern;
            d.pattern = profile->pattern->id;
        }
    } else if (k == FieldKind::bytes) {
        if (s.categorical_like()) {
            d.strategy = Strategy::empirical;
            d.categorical = true;
        }
    }
    return d;
}

struct GeneratorRegistry {
    std::map<std::pair<std::string, std::string>, GeneratorDescriptor> entries;

    const GeneratorDescriptor& at(std::string_view message, std::string_view field) const {
        auto it = entries.find({std::string(message), std::string(field)});
        if (it == entries.end())
            throw LookupError("no registry entry for " + std::string(message) + "." + std::string(field));
        return it->second;
    }
    std::size_t size() const { return entries.size(); }
};

// One entry per field of every message. When several profiled paths reach the
// same field, the most observed profile wins (ties: smallest root, then path).
inline GeneratorRegistry enhance(const SchemaGraph& schema, const DomainModel* domain = nullptr) {
    GeneratorRegistry reg;
    std::map<std::pair<const MessageInfo*, const FieldInfo*>, std::tuple<std::uint64_t, std::string, std::string>> best;
    if (domain) {
        for (const auto& [root, rm] : domain->roots) {
            if (!schema.find_message(root)) continue;
            for (const auto& [path, profile] : rm.profiles) {
                FieldPath fp;
                try {
                    fp = FieldPath::parse(path);
                } catch (const ValidationError&) {
                    continue;
                }
                auto e = resolve_path(schema, root, fp);
                if (!e || e->role == PathRole::map_key) continue;
                const auto key = std::pair{e->owner, e->field};
                const auto n = profile.stats.present_count;
                auto it = best.find(key);
                if (it == best.end() || n > std::get<0>(it->second) ||
                    (n == std::get<0>(it->second) &&
                     std::tie(root, path) < std::tie(std::get<1>(it->second), std::get<2>(it->second))))
                    best[key] = {n, root, path};
            }
        }
    }
    for (const auto& [name, m] : schema.messages) {
        for (const auto& f : m.fields) {
            GeneratorDescriptor d;
            if (auto it = best.find({&m, &f}); it != best.end()) {
                const auto& [_, root, path] = it->second;
                const FieldInfo& vf = f.is_map() ? f.message_type->value_field() : f;
                d = select_strategy(vf, domain->find(root, path));
                if (d.strategy != Strategy::default_) {
                    d.profile_root = root;
                    d.profile_path = path;
                }
            }
            reg.entries.emplace(std::pair{name, f.name}, std::move(d));
        }
    }
    return reg;
}

}  // namespace protosynth
