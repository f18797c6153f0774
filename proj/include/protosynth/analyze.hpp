#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "protosynth/corpus.hpp"
#include "protosynth/dependency.hpp"
#include "protosynth/domain.hpp"
#include "protosynth/pattern.hpp"
#include "protosynth/random.hpp"
#include "protosynth/schema.hpp"
#include "protosynth/stats.hpp"
#include "protosynth/walk.hpp"

namespace protosynth {

struct AnalyzeOptions {
    std::size_t max_depth = 64;
    std::size_t top_k = default_top_k;
    double correlation_threshold = default_correlation_threshold;
    std::size_t reservoir_size = 100000;
    std::uint64_t reservoir_seed = 0x5eed;
    std::size_t conditional_limit = conditional_cardinality_limit;
    const Annotations* annotations = nullptr;
    unsigned workers = 1;
    std::size_t chunk_records = 4096;
    // Recorded in provenance; current UTC time when empty.
    std::string analyzed_at;
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace detail {

struct PathAcc {
    FieldKind kind = FieldKind::int32;
    StatsAccumulator stats;
    std::optional<PatternAccumulator> pattern;
    std::optional<StatsAccumulator> sizes;

    void merge(const PathAcc& o) {
        stats.merge(o.stats);
        if (o.pattern) {
            if (!pattern) pattern.emplace();
            pattern->merge(*o.pattern);
        }
        if (o.sizes) {
            if (!sizes) sizes.emplace();
            sizes->merge(*o.sizes);
        }
    }
};

using CorrelationRow = std::vector<std::pair<std::string, double>>;

struct RootAcc {
    std::uint64_t records = 0;
    std::unordered_map<std::string, PathAcc> paths;
    std::map<std::string, const MessageInfo*> nodes;  // prefix -> type
};

// Per-shard state of the statistics pass.
struct ProfilePass {
    std::size_t max_depth = 64;
    std::map<std::string, RootAcc> roots;

    RootAcc* cur = nullptr;
    CorrelationRow* row = nullptr;

    void add(const Record& rec, CorrelationRow* correlation_row) {
        cur = &roots[rec.type->full_name];
        ++cur->records;
        row = correlation_row;
        walk_instance(*rec.message, max_depth, *this);
        cur = nullptr;
        row = nullptr;
    }

    PathAcc& acc(const std::string& path, const FieldInfo& f) {
        auto [it, inserted] = cur->paths.try_emplace(path);
        if (inserted) it->second.kind = f.kind;
        return it->second;
    }

    void node(const std::string& prefix, const Message& m) { cur->nodes.emplace(prefix, m.type); }

    void value(const ValueEvent& e) {
        auto& a = acc(e.path, e.field);
        if (e.field.is_message()) {
            a.stats.add_present();
            return;
        }
        std::string key = scalar_key(e.field, e.value);
        if (is_numeric(e.field.kind)) {
            const double x = *numeric_value(e.value);
            a.stats.add(x, key);
            if (row && !e.in_container && !e.field.is_repeated()) row->emplace_back(e.path, x);
            return;
        }
        if (e.field.kind == FieldKind::string) {
            if (!a.pattern) a.pattern.emplace();
            a.pattern->add(key);
        }
        a.stats.add(key);
    }

    void missing(const std::string& path, const FieldInfo& f, bool) { acc(path, f).stats.add_missing(); }

    void size(const std::string& path, const FieldInfo& f, std::size_t n) {
        auto& a = acc(path, f);
        if (!a.sizes) a.sizes.emplace();
        a.sizes->add(static_cast<double>(n), std::to_string(n));
    }

    void merge(ProfilePass&& o) {
        for (auto& [root, ra] : o.roots) {
            auto& r = roots[root];
            r.records += ra.records;
            for (auto& [path, pa] : ra.paths) {
                auto [it, inserted] = r.paths.try_emplace(path);
                if (inserted)
                    it->second = std::move(pa);
                else
                    it->second.merge(pa);
            }
            r.nodes.merge(ra.nodes);
        }
    }
};

struct ReservoirEntry {
    std::string root;
    CorrelationRow row;
};

// Correlations between sibling singular numeric paths over the reservoir.
// Returns root -> path -> [(other path, r)].
inline std::map<std::string, std::map<std::string, std::vector<std::pair<std::string, double>>>> correlate(
    const std::vector<ReservoirEntry>& reservoir) {
    std::map<std::string, std::vector<const CorrelationRow*>> by_root;
    for (const auto& e : reservoir) by_root[e.root].push_back(&e.row);

    std::map<std::string, std::map<std::string, std::vector<std::pair<std::string, double>>>> out;
    for (const auto& [root, rows] : by_root) {
        std::map<std::string, std::set<std::string>> siblings;  // prefix -> paths
        for (const auto* r : rows)
            for (const auto& [p, _] : *r) siblings[parent_prefix(p)].insert(p);
        for (const auto& [prefix, paths] : siblings) {
            const std::vector<std::string> ps(paths.begin(), paths.end());
            for (std::size_t i = 0; i < ps.size(); ++i)
                for (std::size_t j = i + 1; j < ps.size(); ++j) {
                    std::vector<double> x, y;
                    for (const auto* r : rows) {
                        std::optional<double> a, b;
                        for (const auto& [p, v] : *r) {
                            if (p == ps[i]) a = v;
                            else if (p == ps[j]) b = v;
                        }
                        if (a && b) {
                            x.push_back(*a);
                            y.push_back(*b);
                        }
                    }
                    if (x.size() < 2) continue;
                    auto r = pearson(x, y);
                    if (!r) continue;
                    out[root][ps[i]].emplace_back(ps[j], *r);
                    out[root][ps[j]].emplace_back(ps[i], *r);
                }
        }
    }
    return out;
}

}  // namespace detail

// Profiles every observed field path of every root type in the corpus. The
// first pass collects statistics, patterns and a reservoir sample for
// correlations; a second pass builds conditional tables for dependency edges
// whose controller is categorical or integral.
inline DomainModel analyze(const LogCorpus& corpus, const SchemaGraph& schema, const AnalyzeOptions& opt = {}) {
    using namespace detail;
    ProfilePass total;
    total.max_depth = opt.max_depth;
    std::vector<ReservoirEntry> reservoir;
    Rng reservoir_rng(opt.reservoir_seed);
    std::uint64_t seen = 0;

    const unsigned workers = std::max(1u, opt.workers);
    std::vector<Record> chunk;
    auto flush = [&] {
        if (chunk.empty()) return;
        // Reservoir slots are decided serially by global record index so the
        // sample does not depend on the worker count.
        std::vector<std::optional<std::size_t>> slot(chunk.size());
        for (std::size_t i = 0; i < chunk.size(); ++i, ++seen) {
            if (opt.reservoir_size == 0) break;
            if (seen < opt.reservoir_size) {
                slot[i] = static_cast<std::size_t>(seen);
            } else {
                const auto k = reservoir_rng.below(seen + 1);
                if (k < opt.reservoir_size) slot[i] = static_cast<std::size_t>(k);
            }
        }
        std::vector<CorrelationRow> rows(chunk.size());
        const std::size_t shards = std::min<std::size_t>(workers, chunk.size());
        std::vector<ProfilePass> parts(shards);
        auto run = [&](std::size_t s) {
            parts[s].max_depth = opt.max_depth;
            const std::size_t lo = chunk.size() * s / shards, hi = chunk.size() * (s + 1) / shards;
            for (std::size_t i = lo; i < hi; ++i) parts[s].add(chunk[i], slot[i] ? &rows[i] : nullptr);
        };
        if (shards == 1) {
            run(0);
        } else {
            std::vector<std::thread> threads;
            for (std::size_t s = 0; s < shards; ++s) threads.emplace_back(run, s);
            for (auto& t : threads) t.join();
        }
        for (auto& p : parts) total.merge(std::move(p));
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            if (!slot[i]) continue;
            ReservoirEntry e{chunk[i].type->full_name, std::move(rows[i])};
            if (*slot[i] < reservoir.size())
                reservoir[*slot[i]] = std::move(e);
            else
                reservoir.push_back(std::move(e));
        }
        chunk.clear();
    };
    const auto counts = corpus.for_each([&](const Record& r) {
        chunk.push_back(r);
        if (chunk.size() >= opt.chunk_records) flush();
    });
    flush();

    DomainModel model;
    model.provenance.record_count = counts.records;
    model.provenance.skipped_count = counts.skipped;
    model.provenance.analyzed_at = opt.analyzed_at.empty() ? utc_timestamp() : opt.analyzed_at;
    model.provenance.schema_fingerprint = schema_fingerprint(schema);

    const auto correlations = correlate(reservoir);
    for (const auto& [root, ra] : total.roots) {
        RootModel& rm = model.roots[root];
        rm.records = ra.records;
        const auto rc = correlations.find(root);
        for (const auto& [path, pa] : ra.paths) {
            FieldProfile p;
            p.kind = pa.kind;
            p.stats = pa.stats.finalize(opt.top_k);
            if (pa.pattern && pa.pattern->total() > 0) p.pattern = pa.pattern->finalize();
            if (pa.sizes) p.sizes = pa.sizes->finalize(opt.top_k);
            static const std::vector<std::pair<std::string, double>> none;
            const std::vector<std::pair<std::string, double>>* corr = &none;
            if (rc != correlations.end())
                if (auto it = rc->second.find(path); it != rc->second.end()) corr = &it->second;
            p.constraints = infer_constraints(p.stats, *corr, opt.correlation_threshold);
            rm.profiles.emplace(path, std::move(p));
        }
    }

    // Annotation edges are recorded on the dependent's profile so generation
    // can order fields without the annotations file.
    std::vector<ConditionalRequest> requests;
    std::map<const MessageInfo*, DependencyGraph> graphs;
    for (const auto& [root, ra] : total.roots) {
        auto& rm = model.roots[root];
        for (const auto& [prefix, type] : ra.nodes) {
            auto git = graphs.find(type);
            if (git == graphs.end()) {
                auto g = build_dependency_graph(type->full_name, schema, &model, opt.annotations);
                break_cycles(g);
                git = graphs.emplace(type, std::move(g)).first;
            }
            for (const auto& e : git->second.edges) {
                const FieldInfo* c = type->find_field(e.from);
                const FieldInfo* d = type->find_field(e.to);
                if (e.provenance == EdgeProvenance::annotation) {
                    if (auto it = rm.profiles.find(join_path(prefix, field_segment(*d))); it != rm.profiles.end()) {
                        Dependency dep{join_path(prefix, field_segment(*c)), 1.0, EdgeProvenance::annotation};
                        auto& deps = it->second.constraints.dependencies;
                        if (std::find(deps.begin(), deps.end(), dep) == deps.end()) deps.push_back(dep);
                    }
                }
                if (c->is_repeated() || d->is_repeated() || d->is_message() || !can_control(c->kind)) continue;
                if (!rm.profiles.contains(join_path(prefix, c->name)) || !rm.profiles.contains(join_path(prefix, d->name)))
                    continue;
                requests.push_back({root, prefix, type, c, d});
            }
        }
    }
    if (!requests.empty()) {
        std::vector<std::string> owners;
        for (const auto& r : requests) owners.push_back(r.root);
        ConditionalBuilder builder(std::move(requests), opt.max_depth, opt.conditional_limit);
        corpus.for_each([&](const Record& r) { builder.add(r); });
        auto tables = builder.finish();
        for (std::size_t i = 0; i < tables.size(); ++i)
            model.roots[owners[i]].conditionals.push_back(std::move(tables[i]));
    }
    return model;
}

}  // namespace protosynth
