#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "protosynth/dependency.hpp"
#include "protosynth/domain.hpp"
#include "protosynth/errors.hpp"
#include "protosynth/message.hpp"
#include "protosynth/pattern.hpp"
#include "protosynth/random.hpp"
#include "protosynth/registry.hpp"
#include "protosynth/schema.hpp"
#include "protosynth/sink.hpp"

namespace protosynth {

enum class CycleStrategy : std::uint8_t { reuse, minimal, probabilistic };

inline std::string_view to_string(CycleStrategy s) {
    switch (s) {
        case CycleStrategy::reuse: return "reuse";
        case CycleStrategy::minimal: return "minimal";
        case CycleStrategy::probabilistic: return "probabilistic";
    }
    return "?";
}

inline CycleStrategy cycle_strategy_from_string(std::string_view s) {
    if (s == "reuse") return CycleStrategy::reuse;
    if (s == "minimal") return CycleStrategy::minimal;
    if (s == "probabilistic") return CycleStrategy::probabilistic;
    throw ConfigError("unknown cycle strategy: " + std::string(s));
}

struct RepeatedSizeSpec {
    double mean = 3.0;             // geometric
    std::uint64_t cap = 100;
    bool use_empirical = true;     // observed sizes when the domain has them
};

struct GenerationConfig {
    std::size_t max_depth = 16;
    CycleStrategy cycle_strategy = CycleStrategy::minimal;
    double lambda = 0.5;
    std::optional<double> null_probability_override;
    RepeatedSizeSpec repeated_size;
    std::uint64_t seed = 0;
    std::size_t batch_size = 1000;
    // Same-type re-entries tolerated before a cycle is declared.
    std::size_t recursion_allowance = 0;
    unsigned workers = 1;
    bool template_cache = true;

    void validate() const {
        if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
        if (!(lambda > 0) || !std::isfinite(lambda)) throw ConfigError("lambda must be > 0");
        if (null_probability_override && !(*null_probability_override >= 0 && *null_probability_override <= 1))
            throw ConfigError("null probability must be in [0, 1]");
        if (!(repeated_size.mean >= 0)) throw ConfigError("repeated size mean must be >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (workers < 1) throw ConfigError("workers must be >= 1");
    }
};

// Instrumentation hooks; all no-ops by default.
class GenerationObserver {
public:
    virtual ~GenerationObserver() = default;
    virtual void on_cycle(const MessageInfo&, std::size_t /*depth*/, CycleStrategy, bool /*terminated*/) {}
    // Called after a field has been decided (set or left unset).
    virtual void on_field(const MessageInfo&, const FieldInfo&, std::size_t /*depth*/) {}
};

// ---------------------------------------------------------------------------
// Value samplers

class ValueSampler {
public:
    enum class Mode : std::uint8_t { fallback, categorical, quantile, range, pattern };

    ValueSampler() = default;

    // Default generator for the field's kind.
    static ValueSampler fallback(const FieldInfo& f) {
        ValueSampler s;
        s.field_ = &f;
        return s;
    }

    static std::optional<ValueSampler> categorical(const FieldInfo& f,
                                                   const std::vector<std::pair<std::string, std::uint64_t>>& freq) {
        ValueSampler s;
        s.field_ = &f;
        s.mode_ = Mode::categorical;
        std::uint64_t total = 0;
        for (const auto& [k, c] : freq) {
            if (c == 0) continue;
            auto v = parse_scalar_key(f, k);
            if (!v) continue;
            total += c;
            s.values_.push_back(std::move(*v));
            s.cumulative_.push_back(total);
        }
        if (s.values_.empty()) return std::nullopt;
        return s;
    }

    static std::optional<ValueSampler> categorical(const FieldInfo& f, const std::map<std::string, std::uint64_t>& row) {
        return categorical(f, std::vector<std::pair<std::string, std::uint64_t>>(row.begin(), row.end()));
    }

    // Sampler for values described by stats, following the descriptor.
    static ValueSampler make(const FieldInfo& f, const GeneratorDescriptor& d, const FieldProfile* profile) {
        if (!profile || d.strategy == Strategy::default_) return fallback(f);
        const auto& st = profile->stats;
        switch (d.strategy) {
            case Strategy::empirical:
            case Strategy::enum_weighted:
                if (d.categorical || !st.numeric) {
                    if (auto s = categorical(f, st.frequencies)) return *s;
                    return fallback(f);
                }
                return numeric(f, st, false);
            case Strategy::range:
                if (st.numeric) return numeric(f, st, true);
                return fallback(f);
            case Strategy::pattern:
                if (profile->pattern && f.kind == FieldKind::string) {
                    ValueSampler s;
                    s.field_ = &f;
                    s.mode_ = Mode::pattern;
                    s.pattern_ = &*profile->pattern;
                    return s;
                }
                return fallback(f);
            case Strategy::default_: break;
        }
        return fallback(f);
    }

    // Quantile-grid sampler (or uniform range) over numeric stats.
    static ValueSampler numeric(const FieldInfo& f, const FieldStats& st, bool range) {
        ValueSampler s;
        s.field_ = &f;
        s.lo_ = st.numeric->min;
        s.hi_ = st.numeric->max;
        if (!range && st.numeric->quantiles.size() >= 2) {
            s.mode_ = Mode::quantile;
            s.quantiles_ = &st.numeric->quantiles;
        } else {
            s.mode_ = Mode::range;
        }
        return s;
    }

    Mode mode() const { return mode_; }
    const FieldInfo& field() const { return *field_; }

    Value sample(Rng& rng) const {
        switch (mode_) {
            case Mode::categorical: {
                const auto u = rng.below(cumulative_.back());
                const auto i = static_cast<std::size_t>(
                    std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
                return values_[i];
            }
            case Mode::quantile: {
                const auto& q = *quantiles_;
                const double pos = rng.uniform() * static_cast<double>(q.size() - 1);
                const auto i = static_cast<std::size_t>(pos);
                const double t = pos - static_cast<double>(i);
                double x = i + 1 < q.size() ? q[i] + t * (q[i + 1] - q[i]) : q[i];
                return numeric_to_value(field_->kind, std::clamp(x, lo_, hi_));
            }
            case Mode::range: {
                if (is_integer(field_->kind)) {
                    double a = std::ceil(lo_), b = std::floor(hi_);
                    if (a > b) a = b = std::nearbyint(lo_);
                    if (is_unsigned_integer(field_->kind) && a >= 9.2e18)
                        return numeric_to_value(field_->kind, a);
                    const auto lo = static_cast<std::int64_t>(std::max(a, -9.2e18));
                    const auto hi = static_cast<std::int64_t>(std::min(b, 9.2e18));
                    return numeric_to_value(field_->kind, static_cast<double>(rng.between(lo, hi)));
                }
                return numeric_to_value(field_->kind, lo_ == hi_ ? lo_ : rng.uniform(lo_, hi_));
            }
            case Mode::pattern: return Value{generate_pattern(*pattern_, rng)};
            case Mode::fallback: return default_value(*field_, rng);
        }
        return default_value(*field_, rng);
    }

    // Defaults: numbers uniform in [0, 1000], fair coin, 8-16 lowercase
    // alphanumerics, 0-32 random bytes, uniform declared enum value.
    static Value default_value(const FieldInfo& f, Rng& rng) {
        switch (f.kind) {
            case FieldKind::bool_: return Value{(rng.next() & 1) != 0};
            case FieldKind::string: {
                static constexpr std::string_view alnum = "abcdefghijklmnopqrstuvwxyz0123456789";
                const auto n = static_cast<std::size_t>(rng.between(8, 16));
                std::string s;
                s.reserve(n);
                for (std::size_t i = 0; i < n; ++i) s.push_back(alnum[rng.below(alnum.size())]);
                return Value{std::move(s)};
            }
            case FieldKind::bytes: {
                const auto n = static_cast<std::size_t>(rng.between(0, 32));
                std::string s(n, '\0');
                for (auto& c : s) c = static_cast<char>(rng.below(256));
                return Value{std::move(s)};
            }
            case FieldKind::enum_: {
                if (!f.enum_type || f.enum_type->values.empty()) return Value{EnumValue{0}};
                const auto& vs = f.enum_type->values;
                return Value{EnumValue{vs[rng.below(vs.size())].second}};
            }
            case FieldKind::message: throw ValidationError("no scalar default for message field " + f.name);
            default:
                if (is_integer(f.kind)) return numeric_to_value(f.kind, static_cast<double>(rng.between(0, 1000)));
                return numeric_to_value(f.kind, rng.uniform(0.0, 1000.0));
        }
    }

private:
    const FieldInfo* field_ = nullptr;
    Mode mode_ = Mode::fallback;
    std::vector<Value> values_;
    std::vector<std::uint64_t> cumulative_;
    const std::vector<double>* quantiles_ = nullptr;
    double lo_ = 0, hi_ = 0;
    const PatternSpec* pattern_ = nullptr;
};

namespace detail {
inline const FieldInfo& size_field() {
    static const FieldInfo f = [] {
        FieldInfo x;
        x.name = "size";
        x.kind = FieldKind::uint64;
        return x;
    }();
    return f;
}
}  // namespace detail

class SizeSampler {
public:
    SizeSampler() = default;
    SizeSampler(const RepeatedSizeSpec& spec, const FieldStats* observed) : mean_(spec.mean), cap_(spec.cap) {
        if (spec.use_empirical && observed && observed->present_count > 0) {
            if (observed->frequencies_complete())
                empirical_ = ValueSampler::categorical(detail::size_field(), observed->frequencies);
            else if (observed->numeric)
                empirical_ = ValueSampler::numeric(detail::size_field(), *observed, false);
        }
    }

    std::uint64_t sample(Rng& rng) const {
        if (empirical_) return std::get<std::uint64_t>(empirical_->sample(rng));
        return std::min(rng.geometric(mean_), cap_);
    }

private:
    double mean_ = 3.0;
    std::uint64_t cap_ = 100;
    std::optional<ValueSampler> empirical_;
};

// Standalone field generation: returns nullopt when a presence-tracking field
// is left unset by its null probability.
inline std::optional<Value> generate_field_value(const FieldInfo& f, const FieldProfile* profile, Rng& rng,
                                                 std::optional<double> null_probability_override = std::nullopt) {
    if (f.is_message()) throw ValidationError("generate_field_value: " + f.name + " is message-typed");
    const double p = null_probability_override ? *null_probability_override
                     : profile                 ? profile->constraints.null_probability
                                               : 0.0;
    if (f.has_presence() && !f.oneof_index && p > 0 && (p >= 1 || rng.bernoulli(p))) return std::nullopt;
    return ValueSampler::make(f, select_strategy(f, profile), profile).sample(rng);
}

// ---------------------------------------------------------------------------
// Plans: generator selection per (root, folded prefix, message type). They
// hold no sampled values, so caching them cannot change output.

struct ConditionalSampler {
    const FieldInfo* controller = nullptr;
    std::unordered_map<std::string, ValueSampler> rows;
};

struct FieldPlan {
    const FieldInfo* field = nullptr;
    std::string path;      // value path (map: field{}value)
    std::string key_path;  // maps only
    GeneratorDescriptor descriptor;
    ValueSampler value;
    std::optional<ValueSampler> key;
    double null_probability = 0;
    SizeSampler sizes;
    const MessageInfo* child = nullptr;  // message type of the values
    std::vector<ConditionalSampler> conditionals;
};

struct Plan {
    const MessageInfo* type = nullptr;
    std::vector<FieldPlan> fields;                     // generation order
    std::vector<std::vector<std::uint64_t>> oneof_weights;  // per oneof, per member
};

class PlanCache {
public:
    std::unordered_map<std::string, std::shared_ptr<const Plan>> plans;
};

struct GenerationContext {
    struct Frame {
        const MessageInfo* type;
        std::size_t depth;
        std::string prefix;
    };
    std::vector<Frame> stack;
    Rng rng;
    std::unordered_map<const MessageInfo*, MessagePtr> reuse_cache;
    std::string root;
    PlanCache* plans = nullptr;
    GenerationObserver* observer = nullptr;
};

// Literal cycle test: M occurs on the stack at a depth below max_depth (more
// than `allowance` times).
inline bool has_cycle(const MessageInfo& m, const GenerationContext& ctx, std::size_t max_depth,
                      std::size_t allowance = 0) {
    std::size_t n = 0;
    for (const auto& f : ctx.stack)
        if (f.type == &m && f.depth < max_depth) ++n;
    return n > allowance;
}

inline double termination_probability(double lambda, std::size_t depth) {
    if (!(lambda > 0)) throw ValidationError("termination_probability: lambda must be > 0");
    return -std::expm1(-lambda * static_cast<double>(depth));
}

class Engine {
public:
    Engine(const SchemaGraph& schema, const DomainModel* domain, GenerationConfig config,
           const Annotations* annotations = nullptr)
        : schema_(schema), domain_(domain), config_(std::move(config)), registry_(enhance(schema, domain)) {
        config_.validate();
        for (const auto& [name, m] : schema.messages) {
            auto g = build_dependency_graph(name, schema, domain, annotations);
            break_cycles(g);
            std::vector<std::size_t> order;
            for (const auto& f : topo_order(g, g.nodes)) order.push_back(m.find_field(f)->index);
            orders_.emplace(&m, std::move(order));
            graphs_.emplace(&m, std::move(g));
        }
    }

    const GenerationConfig& config() const { return config_; }
    const GeneratorRegistry& registry() const { return registry_; }
    const SchemaGraph& schema() const { return schema_; }
    const DependencyGraph& dependency_graph(const MessageInfo& m) const { return graphs_.at(&m); }
    const std::vector<std::size_t>& field_order(const MessageInfo& m) const { return orders_.at(&m); }

    void set_observer(GenerationObserver* o) { observer_ = o; }

    GenerationContext make_context(std::uint64_t instance_index, PlanCache* cache = nullptr) const {
        GenerationContext ctx;
        ctx.rng = Rng(instance_seed(config_.seed, instance_index));
        ctx.plans = cache;
        ctx.observer = observer_;
        return ctx;
    }

    // Top-level generation with a fresh stack.
    MessagePtr generate(const MessageInfo& m, GenerationContext& ctx) const {
        if (ctx.stack.empty()) {
            ctx.root = m.full_name;
            ctx.reuse_cache.clear();
            return build(m, "", ctx, false);
        }
        return expand(m, fold(m, m.full_name, ctx), ctx);
    }

    MessagePtr generate(std::string_view type, std::uint64_t instance_index = 0) const {
        const MessageInfo& m = schema_.message(type);
        PlanCache cache;
        auto ctx = make_context(instance_index, &cache);
        return generate(m, ctx);
    }

    // Applies the configured strategy when M re-enters the stack.
    MessagePtr handle_cycle(const MessageInfo& m, const std::string& prefix, GenerationContext& ctx) const {
        const std::size_t d = ctx.stack.size();
        switch (config_.cycle_strategy) {
            case CycleStrategy::reuse:
                if (auto it = ctx.reuse_cache.find(&m); it != ctx.reuse_cache.end()) {
                    if (ctx.observer) ctx.observer->on_cycle(m, d, CycleStrategy::reuse, true);
                    return it->second;
                }
                if (ctx.observer) ctx.observer->on_cycle(m, d, CycleStrategy::reuse, true);
                return build(m, prefix, ctx, true);
            case CycleStrategy::minimal:
                if (ctx.observer) ctx.observer->on_cycle(m, d, CycleStrategy::minimal, true);
                return build(m, prefix, ctx, true);
            case CycleStrategy::probabilistic: {
                const bool stop = ctx.rng.bernoulli(termination_probability(config_.lambda, d));
                if (ctx.observer) ctx.observer->on_cycle(m, d, CycleStrategy::probabilistic, stop);
                return build(m, prefix, ctx, stop);
            }
        }
        return build(m, prefix, ctx, true);
    }

    // Instance with message-typed fields unset.
    MessagePtr minimal(const MessageInfo& m, const std::string& prefix, GenerationContext& ctx) const {
        return build(m, prefix, ctx, true);
    }

    void generate_batch(const MessageInfo& m, std::uint64_t count, RecordSink& sink,
                        std::uint64_t first_index = 0) const {
        if (config_.workers <= 1 || count <= config_.batch_size) {
            PlanCache cache;
            for (std::uint64_t i = 0; i < count; ++i) {
                auto ctx = make_context(first_index + i, &cache);
                sink.write(generate(m, ctx));
            }
            sink.finish();
            return;
        }
        generate_parallel(m, count, sink, first_index);
    }

    void generate_batch(std::string_view type, std::uint64_t count, RecordSink& sink) const {
        generate_batch(schema_.message(type), count, sink);
    }

    std::shared_ptr<const Plan> plan_for(const MessageInfo& m, const std::string& prefix, GenerationContext& ctx) const {
        if (!config_.template_cache || !ctx.plans) return build_plan(m, prefix, ctx.root);
        std::string key;
        key.reserve(ctx.root.size() + prefix.size() + m.full_name.size() + 2);
        key.append(ctx.root).push_back('\n');
        key.append(prefix).push_back('\n');
        key.append(m.full_name);
        auto& slot = ctx.plans->plans[key];
        if (!slot) slot = build_plan(m, prefix, ctx.root);
        return slot;
    }

private:
    const FieldProfile* profile_at(const std::string& root, const std::string& path) const {
        return domain_ ? domain_->find(root, path) : nullptr;
    }

    std::shared_ptr<const Plan> build_plan(const MessageInfo& m, const std::string& prefix,
                                           const std::string& root) const {
        auto plan = std::make_shared<Plan>();
        plan->type = &m;
        const auto& graph = graphs_.at(&m);
        for (auto idx : orders_.at(&m)) {
            const FieldInfo& f = m.fields[idx];
            FieldPlan fp;
            fp.field = &f;
            const FieldInfo& vf = f.is_map() ? f.message_type->value_field() : f;
            fp.path = join_path(prefix, f.is_map() ? map_value_segment(f) : field_segment(f));
            fp.child = vf.message_type;

            const FieldProfile* profile = profile_at(root, fp.path);
            if (profile) {
                fp.descriptor = select_strategy(vf, profile);
            } else {
                fp.descriptor = registry_.at(m.full_name, f.name);
                if (fp.descriptor.strategy != Strategy::default_)
                    profile = profile_at(fp.descriptor.profile_root, fp.descriptor.profile_path);
            }
            if (!vf.is_message()) fp.value = ValueSampler::make(vf, fp.descriptor, profile);
            fp.null_probability = config_.null_probability_override
                                      ? *config_.null_probability_override
                                      : (profile ? profile->constraints.null_probability : 0.0);

            const FieldStats* sizes = nullptr;
            if (f.is_map()) {
                fp.key_path = join_path(prefix, map_key_segment(f));
                const FieldInfo& kf = f.message_type->key_field();
                const FieldProfile* kp = profile_at(root, fp.key_path);
                fp.key = ValueSampler::make(kf, select_strategy(kf, kp), kp);
                if (kp && kp->sizes) sizes = &*kp->sizes;
            } else if (f.is_repeated()) {
                if (const auto* p = profile_at(root, fp.path); p && p->sizes) sizes = &*p->sizes;
            }
            if (f.is_repeated()) fp.sizes = SizeSampler(config_.repeated_size, sizes);

            if (domain_ && !f.is_repeated() && !f.is_message()) {
                std::vector<const DependencyEdge*> incoming;
                for (const auto& e : graph.edges)
                    if (e.to == f.name) incoming.push_back(&e);
                std::stable_sort(incoming.begin(), incoming.end(),
                                 [](const auto* a, const auto* b) { return a->weight > b->weight; });
                for (const auto* e : incoming) {
                    const auto* t = domain_->conditional(root, join_path(prefix, e->from), fp.path);
                    if (!t || t->skipped || t->rows.empty()) continue;
                    ConditionalSampler cs;
                    cs.controller = m.find_field(e->from);
                    for (const auto& [key, row] : t->rows)
                        if (auto s = ValueSampler::categorical(f, row)) cs.rows.emplace(key, std::move(*s));
                    if (!cs.rows.empty()) fp.conditionals.push_back(std::move(cs));
                }
            }
            plan->fields.push_back(std::move(fp));
        }
        for (const auto& o : m.oneofs) {
            std::vector<std::uint64_t> w;
            for (auto idx : o.members) {
                const FieldInfo& f = m.fields[idx];
                const auto* p = profile_at(root, join_path(prefix, field_segment(f)));
                w.push_back(p ? p->stats.present_count : 0);
            }
            plan->oneof_weights.push_back(std::move(w));
        }
        return plan;
    }

    // Prefix under which M's fields are profiled: the prefix of M's outermost
    // frame when M is already on the stack, else `path`.
    static std::string fold(const MessageInfo& m, const std::string& path, const GenerationContext& ctx) {
        for (const auto& f : ctx.stack)
            if (f.type == &m) return f.prefix;
        return path;
    }

    MessagePtr expand(const MessageInfo& m, const std::string& prefix, GenerationContext& ctx) const {
        if (has_cycle(m, ctx, config_.max_depth, config_.recursion_allowance)) return handle_cycle(m, prefix, ctx);
        return build(m, prefix, ctx, false);
    }

    // Child instance for a message-typed value, or null when the child's
    // depth would reach max_depth.
    MessagePtr child(const FieldPlan& fp, GenerationContext& ctx) const {
        if (ctx.stack.size() >= config_.max_depth) return nullptr;
        return expand(*fp.child, fold(*fp.child, fp.path, ctx), ctx);
    }

    Value scalar(const FieldPlan& fp, const Message& local, GenerationContext& ctx) const {
        for (const auto& c : fp.conditionals) {
            const auto& cv = local.fields[c.controller->index];
            if (cv.empty()) continue;
            if (auto it = c.rows.find(scalar_key(*c.controller, cv.front())); it != c.rows.end())
                return it->second.sample(ctx.rng);
        }
        return fp.value.sample(ctx.rng);
    }

    MessagePtr build(const MessageInfo& m, const std::string& prefix, GenerationContext& ctx, bool minimal) const {
        const std::size_t depth = ctx.stack.size();
        ctx.stack.push_back({&m, depth, prefix});
        const auto plan = plan_for(m, prefix, ctx);
        auto msg = std::make_shared<Message>(m);

        std::vector<std::size_t> chosen;
        chosen.reserve(m.oneofs.size());
        for (std::size_t o = 0; o < m.oneofs.size(); ++o) {
            const auto& members = m.oneofs[o].members;
            const auto& w = plan->oneof_weights[o];
            std::uint64_t total = 0;
            for (auto x : w) total += x;
            std::size_t pick;
            if (total == 0) {
                pick = static_cast<std::size_t>(ctx.rng.below(members.size()));
            } else {
                auto u = ctx.rng.below(total);
                pick = 0;
                while (u >= w[pick]) u -= w[pick++];
            }
            chosen.push_back(members[pick]);
        }

        for (const auto& fp : plan->fields) {
            const FieldInfo& f = *fp.field;
            auto& out = msg->fields[f.index];
            const bool message_values = fp.child != nullptr;
            if (f.oneof_index && chosen[*f.oneof_index] != f.index) {
            } else if (minimal && message_values) {
            } else if (f.is_map()) {
                const auto n = fp.sizes.sample(ctx.rng);
                std::unordered_set<std::string> keys;
                const FieldInfo& kf = f.message_type->key_field();
                for (std::uint64_t attempts = 0; out.size() < n && attempts < 8 * n + 8; ++attempts) {
                    Value k = fp.key->sample(ctx.rng);
                    if (!keys.insert(scalar_key(kf, k)).second) continue;
                    Value v;
                    if (message_values) {
                        auto c = child(fp, ctx);
                        if (!c) break;
                        v = std::move(c);
                    } else {
                        v = fp.value.sample(ctx.rng);
                    }
                    auto entry = std::make_shared<Message>(*f.message_type);
                    entry->fields[0].push_back(std::move(k));
                    entry->fields[1].push_back(std::move(v));
                    out.push_back(MessagePtr(std::move(entry)));
                }
            } else if (f.is_repeated()) {
                const auto n = fp.sizes.sample(ctx.rng);
                out.reserve(n);
                for (std::uint64_t i = 0; i < n; ++i) {
                    if (message_values) {
                        auto c = child(fp, ctx);
                        if (!c) break;
                        out.push_back(std::move(c));
                    } else {
                        out.push_back(fp.value.sample(ctx.rng));
                    }
                }
            } else {
                const double p = fp.null_probability;
                const bool nullable = f.has_presence() && !f.oneof_index;
                if (nullable && p > 0 && (p >= 1 || ctx.rng.bernoulli(p))) {
                } else if (message_values) {
                    if (auto c = child(fp, ctx)) out.push_back(std::move(c));
                } else {
                    out.push_back(scalar(fp, *msg, ctx));
                }
            }
            if (ctx.observer) ctx.observer->on_field(m, f, depth);
        }
        ctx.stack.pop_back();
        MessagePtr result = std::move(msg);
        ctx.reuse_cache[&m] = result;
        return result;
    }

    void generate_parallel(const MessageInfo& m, std::uint64_t count, RecordSink& sink,
                           std::uint64_t first_index) const {
        const std::uint64_t bs = config_.batch_size;
        const std::uint64_t batches = (count + bs - 1) / bs;
        const std::uint64_t window = 2ull * config_.workers;
        std::mutex mu;
        std::condition_variable cv;
        std::map<std::uint64_t, std::vector<MessagePtr>> done;
        std::uint64_t next_batch = 0, next_write = 0;
        bool stop = false;
        std::exception_ptr error;

        auto work = [&] {
            PlanCache cache;
            while (true) {
                std::uint64_t b;
                {
                    std::unique_lock lock(mu);
                    cv.wait(lock, [&] { return stop || next_batch >= batches || next_batch < next_write + window; });
                    if (stop || next_batch >= batches) return;
                    b = next_batch++;
                }
                try {
                    std::vector<MessagePtr> out;
                    const std::uint64_t lo = b * bs, hi = std::min(count, lo + bs);
                    out.reserve(hi - lo);
                    for (std::uint64_t i = lo; i < hi; ++i) {
                        auto ctx = make_context(first_index + i, &cache);
                        out.push_back(generate(m, ctx));
                    }
                    std::lock_guard lock(mu);
                    done.emplace(b, std::move(out));
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!error) error = std::current_exception();
                    stop = true;
                }
                cv.notify_all();
            }
        };

        std::vector<std::thread> threads;
        for (unsigned w = 0; w < config_.workers; ++w) threads.emplace_back(work);
        std::exception_ptr write_error;
        try {
            while (next_write < batches) {
                std::vector<MessagePtr> batch;
                {
                    std::unique_lock lock(mu);
                    cv.wait(lock, [&] { return error || done.contains(next_write); });
                    if (!done.contains(next_write)) break;
                    batch = std::move(done[next_write]);
                    done.erase(next_write);
                }
                for (const auto& r : batch) sink.write(r);
                {
                    std::lock_guard lock(mu);
                    ++next_write;
                }
                cv.notify_all();
            }
            if (!error) sink.finish();
        } catch (...) {
            write_error = std::current_exception();
        }
        {
            std::lock_guard lock(mu);
            stop = true;
        }
        cv.notify_all();
        for (auto& t : threads) t.join();
        if (write_error) std::rethrow_exception(write_error);
        if (error) std::rethrow_exception(error);
    }

    const SchemaGraph& schema_;
    const DomainModel* domain_;
    GenerationConfig config_;
    GeneratorRegistry registry_;
    std::unordered_map<const MessageInfo*, DependencyGraph> graphs_;
    std::unordered_map<const MessageInfo*, std::vector<std::size_t>> orders_;
    GenerationObserver* observer_ = nullptr;
};

}  // namespace protosynth
