#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "protosynth/corpus.hpp"
#include "protosynth/domain.hpp"
#include "protosynth/errors.hpp"
#include "protosynth/graph.hpp"
#include "protosynth/schema.hpp"
#include "protosynth/walk.hpp"

namespace protosynth {

inline constexpr std::size_t conditional_cardinality_limit = 10000;

// ---------------------------------------------------------------------------
// Annotations sidecar (annotations/v1):
//   {"version": "annotations/v1",
//    "depends_on": {"pkg.Msg.field": "other_field" | ["a", "b"]}}

inline constexpr std::string_view annotations_version = "annotations/v1";

struct Annotations {
    // message full name -> (dependent field, controlling field)
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> edges;
};

inline Annotations load_annotations(std::string_view text, const SchemaGraph& schema) {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("version", "") != annotations_version)
        throw ValidationError("not an annotations/v1 document");
    Annotations a;
    auto deps = j.find("depends_on");
    if (deps == j.end()) return a;
    if (!deps->is_object()) throw ValidationError("annotations: depends_on must be an object");
    for (auto it = deps->begin(); it != deps->end(); ++it) {
        const std::string& key = it.key();
        const auto dot = key.rfind('.');
        if (dot == std::string::npos) throw ValidationError("annotations: expected pkg.Msg.field, got " + key);
        const std::string msg = key.substr(0, dot), field = key.substr(dot + 1);
        const MessageInfo* m = schema.find_message(msg);
        if (!m) throw ValidationError("annotations: unknown message " + msg);
        if (!m->find_field(field)) throw ValidationError("annotations: unknown field " + key);
        std::vector<std::string> targets;
        if (it.value().is_string())
            targets.push_back(it.value().get<std::string>());
        else if (it.value().is_array())
            for (const auto& t : it.value()) targets.push_back(t.get<std::string>());
        else
            throw ValidationError("annotations: value for " + key + " must be a string or array");
        for (const auto& t : targets) {
            if (!m->find_field(t)) throw ValidationError("annotations: unknown field " + msg + "." + t);
            a.edges[m->full_name].emplace_back(m->find_field(field)->name, m->find_field(t)->name);
        }
    }
    return a;
}

// ---------------------------------------------------------------------------
// Graph

struct DependencyEdge {
    std::string from;  // dependency
    std::string to;    // dependent
    EdgeProvenance provenance = EdgeProvenance::semantic;
    double weight = 1.0;

    bool operator==(const DependencyEdge&) const = default;
};

struct DependencyGraph {
    std::string message;
    std::vector<std::string> nodes;  // declaration order
    std::vector<DependencyEdge> edges;
    std::vector<DependencyEdge> removed;  // dropped by cycle breaking

    bool has_edge(std::string_view from, std::string_view to) const {
        for (const auto& e : edges)
            if (e.from == from && e.to == to) return true;
        return false;
    }

    std::size_t index_of(std::string_view node) const {
        auto it = std::find(nodes.begin(), nodes.end(), node);
        return it == nodes.end() ? nodes.size() : static_cast<std::size_t>(it - nodes.begin());
    }
};

// Splits identifiers on underscores and camel-case transitions, lowercased.
inline std::set<std::string> name_tokens(std::string_view name) {
    std::set<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.insert(cur);
        cur.clear();
    };
    for (std::size_t i = 0; i < name.size(); ++i) {
        const char c = name[i];
        if (c == '_' || c == '-' || c == '.') {
            flush();
            continue;
        }
        if (std::isupper(static_cast<unsigned char>(c)) && i > 0 &&
            (std::islower(static_cast<unsigned char>(name[i - 1])) ||
             std::isdigit(static_cast<unsigned char>(name[i - 1])) ||
             (i + 1 < name.size() && std::islower(static_cast<unsigned char>(name[i + 1])) &&
              std::isupper(static_cast<unsigned char>(name[i - 1])))))
            flush();
        cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    flush();
    return out;
}

namespace detail {

inline bool semantic_match(const std::set<std::string>& x, const std::set<std::string>& y) {
    if (x.empty() || x.contains("id")) return false;
    auto expected = x;
    expected.insert("id");
    return expected == y;
}

inline void add_edge(std::vector<DependencyEdge>& edges, DependencyEdge e) {
    if (e.from == e.to) return;
    for (auto& existing : edges) {
        if (existing.from == e.from && existing.to == e.to) {
            if (e.weight > existing.weight ||
                (e.weight == existing.weight && e.provenance > existing.provenance))
                existing = e;
            return;
        }
    }
    edges.push_back(std::move(e));
}

inline std::string parent_prefix(std::string_view path) {
    const auto dot = path.rfind('.');
    return dot == std::string_view::npos ? std::string{} : std::string(path.substr(0, dot));
}

inline std::string last_segment(std::string_view path) {
    const auto dot = path.rfind('.');
    return std::string(dot == std::string_view::npos ? path : path.substr(dot + 1));
}

// Message type whose fields live directly under `prefix` in `root`.
inline const MessageInfo* prefix_type(const SchemaGraph& schema, std::string_view root, std::string_view prefix) {
    const MessageInfo* r = schema.find_message(root);
    if (!r) return nullptr;
    if (prefix.empty()) return r;
    FieldPath fp;
    try {
        fp = FieldPath::parse(prefix);
    } catch (const ValidationError&) {
        return nullptr;
    }
    auto e = resolve_path(schema, root, fp);
    if (!e) return nullptr;
    if (e->role == PathRole::map_value) return e->field->message_type->value_field().message_type;
    if (e->role == PathRole::map_key) return nullptr;
    return e->field->message_type;
}

}  // namespace detail

// Edges from semantic names, profiled correlations and annotations. Cycles are
// kept; see break_cycles.
inline DependencyGraph build_dependency_graph(std::string_view message, const SchemaGraph& schema,
                                              const DomainModel* domain = nullptr,
                                              const Annotations* annotations = nullptr) {
    const MessageInfo& m = schema.message(message);
    DependencyGraph g;
    g.message = m.full_name;
    for (const auto& f : m.fields) g.nodes.push_back(f.name);

    // Semantic: X -> Y when tokens(Y) == tokens(X) + {id}, X being the field
    // name or the name of the message X refers to.
    std::vector<std::set<std::string>> tokens;
    for (const auto& f : m.fields) tokens.push_back(name_tokens(f.name));
    for (const auto& x : m.fields) {
        std::optional<std::set<std::string>> type_tokens;
        if (x.message_type) type_tokens = name_tokens(x.message_type->name);
        for (const auto& y : m.fields) {
            if (&x == &y) continue;
            if (detail::semantic_match(tokens[x.index], tokens[y.index]) ||
                (type_tokens && detail::semantic_match(*type_tokens, tokens[y.index])))
                detail::add_edge(g.edges, {x.name, y.name, EdgeProvenance::semantic, 1.0});
        }
    }

    // Profiled dependencies at every prefix where this type occurs.
    if (domain) {
        for (const auto& [root, rm] : domain->roots) {
            std::map<std::string, bool> prefix_is_m;
            for (const auto& [path, profile] : rm.profiles) {
                if (profile.constraints.dependencies.empty()) continue;
                const std::string prefix = detail::parent_prefix(path);
                auto [it, inserted] = prefix_is_m.try_emplace(prefix, false);
                if (inserted) it->second = detail::prefix_type(schema, root, prefix) == &m;
                if (!it->second) continue;
                const FieldInfo* y = m.find_field(detail::last_segment(path));
                if (!y) continue;
                for (const auto& d : profile.constraints.dependencies) {
                    if (detail::parent_prefix(d.path) != prefix) continue;
                    const FieldInfo* x = m.find_field(detail::last_segment(d.path));
                    if (!x || x == y) continue;
                    if (d.provenance == EdgeProvenance::correlation) {
                        const auto* a = x->index < y->index ? x : y;
                        const auto* b = x->index < y->index ? y : x;
                        detail::add_edge(g.edges, {a->name, b->name, EdgeProvenance::correlation, std::abs(d.r)});
                    } else {
                        detail::add_edge(g.edges, {x->name, y->name, d.provenance, 1.0});
                    }
                }
            }
        }
    }

    for (const auto& f : m.fields)
        if (f.depends_on)
            if (const auto* x = m.find_field(*f.depends_on))
                detail::add_edge(g.edges, {x->name, f.name, EdgeProvenance::annotation, 1.0});
    if (annotations) {
        if (auto it = annotations->edges.find(m.full_name); it != annotations->edges.end())
            for (const auto& [dependent, controlling] : it->second)
                detail::add_edge(g.edges, {controlling, dependent, EdgeProvenance::annotation, 1.0});
    }

    std::sort(g.edges.begin(), g.edges.end(), [&](const auto& a, const auto& b) {
        const auto ka = std::pair{g.index_of(a.from), g.index_of(a.to)};
        const auto kb = std::pair{g.index_of(b.from), g.index_of(b.to)};
        return ka < kb;
    });
    return g;
}

namespace detail {

// Edge indices of one cycle, found by DFS from the lowest-index node of the
// first cyclic component. Empty when acyclic.
inline std::vector<std::size_t> find_cycle(const DependencyGraph& g) {
    const std::size_t n = g.nodes.size();
    graph::Adjacency adj(n);
    for (const auto& e : g.edges) adj[g.index_of(e.from)].push_back(g.index_of(e.to));
    for (auto& a : adj) std::sort(a.begin(), a.end());
    auto comps = graph::cyclic_components(adj);
    if (comps.empty()) return {};
    std::sort(comps.begin(), comps.end());
    const auto& comp = comps.front();
    std::vector<bool> in_comp(n, false);
    for (auto v : comp) in_comp[v] = true;

    const std::size_t start = comp.front();
    std::vector<std::size_t> parent(n, n);
    std::vector<int> state(n, 0);
    std::vector<std::pair<std::size_t, std::size_t>> stack{{start, 0}};
    state[start] = 1;
    while (!stack.empty()) {
        auto& [v, i] = stack.back();
        if (i == adj[v].size()) {
            state[v] = 2;
            stack.pop_back();
            continue;
        }
        const std::size_t w = adj[v][i++];
        if (!in_comp[w]) continue;
        if (w == start) {
            std::vector<std::size_t> nodes{v};
            for (std::size_t u = v; u != start; u = parent[u]) nodes.push_back(parent[u]);
            std::reverse(nodes.begin(), nodes.end());  // start ... v
            std::vector<std::size_t> cycle;
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                const auto from = nodes[k];
                const auto to = k + 1 < nodes.size() ? nodes[k + 1] : start;
                for (std::size_t e = 0; e < g.edges.size(); ++e)
                    if (g.index_of(g.edges[e].from) == from && g.index_of(g.edges[e].to) == to) cycle.push_back(e);
            }
            return cycle;
        }
        if (state[w] == 0) {
            state[w] = 1;
            parent[w] = v;
            stack.emplace_back(w, 0);
        }
    }
    return {};
}

}  // namespace detail

// Repeatedly removes the minimum-weight edge of a remaining cycle. Ties go to
// the edge whose source was declared last.
inline void break_cycles(DependencyGraph& g) {
    while (true) {
        const auto cycle = detail::find_cycle(g);
        if (cycle.empty()) return;
        std::size_t worst = cycle.front();
        for (auto e : cycle) {
            const auto& a = g.edges[e];
            const auto& b = g.edges[worst];
            if (a.weight < b.weight ||
                (a.weight == b.weight && g.index_of(a.from) > g.index_of(b.from)))
                worst = e;
        }
        g.removed.push_back(g.edges[worst]);
        g.edges.erase(g.edges.begin() + static_cast<std::ptrdiff_t>(worst));
    }
}

// Kahn's algorithm; among ready fields the earliest declared goes first.
inline std::vector<std::string> topo_order(const DependencyGraph& graph, const std::vector<std::string>& declaration_order) {
    DependencyGraph g = graph;
    break_cycles(g);
    std::map<std::string, std::size_t, std::less<>> pos;
    for (std::size_t i = 0; i < declaration_order.size(); ++i) pos.emplace(declaration_order[i], i);
    const std::size_t n = declaration_order.size();
    std::vector<std::vector<std::size_t>> out(n);
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& e : g.edges) {
        auto a = pos.find(e.from), b = pos.find(e.to);
        if (a == pos.end() || b == pos.end()) continue;
        out[a->second].push_back(b->second);
        ++indegree[b->second];
    }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push(i);
    std::vector<std::string> order;
    order.reserve(n);
    while (!ready.empty()) {
        const auto v = ready.top();
        ready.pop();
        order.push_back(declaration_order[v]);
        for (auto w : out[v])
            if (--indegree[w] == 0) ready.push(w);
    }
    return order;
}

// ---------------------------------------------------------------------------
// Conditional tables

inline bool can_control(FieldKind k) {
    return k == FieldKind::string || k == FieldKind::enum_ || k == FieldKind::bool_ || is_integer(k);
}

struct ConditionalRequest {
    std::string root;
    std::string prefix;
    const MessageInfo* owner = nullptr;
    const FieldInfo* controlling = nullptr;
    const FieldInfo* dependent = nullptr;
};

// Accumulates several conditional tables in one corpus pass.
class ConditionalBuilder {
public:
    ConditionalBuilder(std::vector<ConditionalRequest> requests, std::size_t max_depth,
                       std::size_t cardinality_limit = conditional_cardinality_limit)
        : requests_(std::move(requests)), max_depth_(max_depth), limit_(cardinality_limit),
          tables_(requests_.size()), marginals_(requests_.size()) {
        for (std::size_t i = 0; i < requests_.size(); ++i) {
            const auto& r = requests_[i];
            tables_[i].controlling = join_path(r.prefix, r.controlling->name);
            tables_[i].dependent = join_path(r.prefix, r.dependent->name);
            by_node_[{r.root, r.prefix}].push_back(i);
        }
    }

    void add(const Record& rec) {
        root_ = &rec.type->full_name;
        walk_instance(*rec.message, max_depth_, *this);
    }

    std::vector<ConditionalDistribution> finish() {
        for (std::size_t i = 0; i < tables_.size(); ++i) {
            auto& t = tables_[i];
            std::vector<std::pair<std::string, std::uint64_t>> m(marginals_[i].begin(), marginals_[i].end());
            std::sort(m.begin(), m.end(), [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second > b.second : a.first < b.first;
            });
            if (m.size() > default_top_k) m.resize(default_top_k);
            t.marginal = std::move(m);
        }
        return std::move(tables_);
    }

    // Walker callbacks.
    void node(const std::string& prefix, const Message& m) {
        auto it = by_node_.find({*root_, prefix});
        if (it == by_node_.end()) return;
        for (auto i : it->second) {
            const auto& r = requests_[i];
            if (m.type != r.owner) continue;
            const auto& dv = m.fields[r.dependent->index];
            if (dv.empty()) continue;
            const std::string dk = scalar_key(*r.dependent, dv.front());
            ++marginals_[i][dk];
            const auto& cv = m.fields[r.controlling->index];
            if (cv.empty()) continue;
            auto& t = tables_[i];
            ++t.copresent;
            if (t.skipped) continue;
            t.rows[scalar_key(*r.controlling, cv.front())][dk] += 1;
            if (t.rows.size() > limit_) {
                t.skipped = true;
                t.rows.clear();
            }
        }
    }
    void value(const ValueEvent&) {}
    void missing(const std::string&, const FieldInfo&, bool) {}
    void size(const std::string&, const FieldInfo&, std::size_t) {}

private:
    std::vector<ConditionalRequest> requests_;
    std::size_t max_depth_;
    std::size_t limit_;
    std::vector<ConditionalDistribution> tables_;
    std::vector<std::map<std::string, std::uint64_t>> marginals_;
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> by_node_;
    const std::string* root_ = nullptr;
};

// P(dependent | controlling) for two sibling paths of `root`.
inline ConditionalDistribution conditional_table(const LogCorpus& corpus, const SchemaGraph& schema, std::string_view root,
                                                 std::string_view controlling, std::string_view dependent,
                                                 std::size_t max_depth = 64) {
    const std::string prefix = detail::parent_prefix(controlling);
    if (detail::parent_prefix(dependent) != prefix)
        throw ValidationError("conditional_table: paths must be siblings");
    const MessageInfo* owner = detail::prefix_type(schema, root, prefix);
    if (!owner) throw LookupError("conditional_table: cannot resolve " + std::string(controlling));
    const FieldInfo* c = owner->find_field(detail::last_segment(controlling));
    const FieldInfo* d = owner->find_field(detail::last_segment(dependent));
    if (!c || !d) throw LookupError("conditional_table: unknown field path");
    if (c->is_repeated() || d->is_repeated() || d->is_message())
        throw ValidationError("conditional_table: fields must be singular scalars");
    if (!can_control(c->kind))
        throw ValidationError("conditional_table: controlling kind " + std::string(to_string(c->kind)) +
                              " not supported");
    ConditionalBuilder b({{std::string(root), prefix, owner, c, d}}, max_depth);
    corpus.for_each([&](const Record& r) {
        if (r.type->full_name == root) b.add(r);
    });
    return std::move(b.finish().front());
}

}  // namespace protosynth
