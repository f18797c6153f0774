#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "protosynth/analyze.hpp"
#include "protosynth/codec.hpp"
#include "protosynth/engine.hpp"
#include "protosynth/sink.hpp"
#include "support.hpp"

using namespace protosynth;

namespace {

std::vector<Record> as_records(const std::vector<MessagePtr>& ms) {
    std::vector<Record> out;
    for (const auto& m : ms) out.push_back({m->type, m});
    return out;
}

DomainModel model_of(const std::vector<MessagePtr>& ms, const SchemaGraph& s) {
    AnalyzeOptions o;
    o.analyzed_at = "2024-01-01T00:00:00Z";
    return analyze(LogCorpus::from_records(as_records(ms)), s, o);
}

std::size_t node_depth(const Message& m) {
    std::size_t d = 1;
    const Message* cur = &m;
    while (!cur->values("next").empty()) {
        cur = std::get<MessagePtr>(cur->values("next").front()).get();
        ++d;
    }
    return d;
}

// Depth of the deepest message in an instance (root = 1). Map entries are
// transparent.
std::size_t message_depth(const Message& m) {
    std::size_t best = 0;
    for (const auto& vs : m.fields)
        for (const auto& v : vs)
            if (const auto* c = std::get_if<MessagePtr>(&v)) best = std::max(best, message_depth(**c));
    return m.type->map_entry ? best : best + 1;
}

std::vector<std::string> batch_bytes(const Engine& e, std::string_view type, std::uint64_t n) {
    CollectingSink sink;
    e.generate_batch(type, n, sink);
    std::vector<std::string> out;
    for (const auto& m : sink.records) out.push_back(encode(*m));
    return out;
}

struct CycleLog : GenerationObserver {
    std::vector<std::pair<std::size_t, bool>> events;
    void on_cycle(const MessageInfo&, std::size_t depth, CycleStrategy, bool stop) override {
        events.emplace_back(depth, stop);
    }
};

struct FieldLog : GenerationObserver {
    std::vector<std::string> fields;
    void on_field(const MessageInfo&, const FieldInfo& f, std::size_t depth) override {
        if (depth == 0) fields.push_back(f.name);
    }
};

}  // namespace

TEST(TerminationProbability, Values) {
    EXPECT_DOUBLE_EQ(termination_probability(0.5, 0), 0.0);
    EXPECT_NEAR(termination_probability(0.5, 1), 1 - std::exp(-0.5), 1e-15);
    EXPECT_NEAR(termination_probability(1.0, 3), 1 - std::exp(-3.0), 1e-15);
    EXPECT_THROW(termination_probability(0, 1), ValidationError);
    double prev = 0;
    for (std::size_t d = 1; d < 50; ++d) {
        const double p = termination_probability(0.3, d);
        EXPECT_GT(p, prev);
        EXPECT_LE(p, 1.0);
        prev = p;
    }
}

TEST(HasCycle, CountsFramesOfTheSameType) {
    const auto& s = fixtures::schema("demo");
    const auto& node = s.message("demo.Node");
    const auto& pair = s.message("demo.Pair");
    GenerationContext ctx;
    EXPECT_FALSE(has_cycle(node, ctx, 16));
    ctx.stack.push_back({&pair, 0, ""});
    EXPECT_FALSE(has_cycle(node, ctx, 16));
    ctx.stack.push_back({&node, 1, "x"});
    EXPECT_TRUE(has_cycle(node, ctx, 16));
    EXPECT_FALSE(has_cycle(node, ctx, 16, 1));
    EXPECT_FALSE(has_cycle(node, ctx, 1));  // frame at depth 1 is not below max_depth 1
    ctx.stack.push_back({&node, 2, "x.next"});
    EXPECT_TRUE(has_cycle(node, ctx, 16, 1));
}

TEST(Config, Validation) {
    const auto& s = fixtures::schema("demo");
    auto bad = [&](auto mutate) {
        GenerationConfig c;
        mutate(c);
        EXPECT_THROW(Engine(s, nullptr, c), ConfigError);
    };
    bad([](GenerationConfig& c) { c.max_depth = 0; });
    bad([](GenerationConfig& c) { c.lambda = 0; });
    bad([](GenerationConfig& c) { c.lambda = -1; });
    bad([](GenerationConfig& c) { c.null_probability_override = 1.5; });
    bad([](GenerationConfig& c) { c.workers = 0; });
    bad([](GenerationConfig& c) { c.batch_size = 0; });
}

TEST(Generate, DefaultsWithoutDomain) {
    const auto& s = fixtures::schema("ping");
    Engine e(s, nullptr, GenerationConfig{});
    CollectingSink sink;
    e.generate_batch("demo.Ping", 2000, sink);
    ASSERT_EQ(sink.records.size(), 2000u);
    std::int64_t lo = 1000, hi = 0;
    for (const auto& m : sink.records) {
        const auto v = std::get<std::int64_t>(m->values("seq").front());
        ASSERT_GE(v, 0);
        ASSERT_LE(v, 1000);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_LT(lo, 20);
    EXPECT_GT(hi, 980);
}

TEST(Generate, UnknownTypeIsLookupError) {
    Engine e(fixtures::schema("ping"), nullptr, GenerationConfig{});
    EXPECT_THROW(e.generate("demo.Missing"), LookupError);
}

TEST(Generate, MixedInstancesAreWellFormed) {
    const auto& s = fixtures::schema("demo");
    GenerationConfig c;
    c.seed = 3;
    Engine e(s, nullptr, c);
    CollectingSink sink;
    e.generate_batch("demo.Mixed", 500, sink);
    for (const auto& m : sink.records) {
        ASSERT_EQ(m->values("name").size() + m->values("code").size(), 1u);  // oneof: exactly one member
        const auto& color = m->values("color");
        ASSERT_EQ(color.size(), 1u);
        const auto cv = std::get<EnumValue>(color.front()).number;
        ASSERT_TRUE(cv >= 0 && cv <= 3);
        std::set<std::string> keys;
        for (const auto& entry : m->values("counts"))
            ASSERT_TRUE(keys.insert(std::get<std::string>(std::get<MessagePtr>(entry)->fields[0].front())).second);
        ASSERT_LE(m->values("blob").size(), 1u);
    }
}

TEST(Generate, MinimalStrategyStopsAtFirstReentry) {
    const auto& s = fixtures::schema("demo");
    GenerationConfig c;
    c.cycle_strategy = CycleStrategy::minimal;
    Engine e(s, nullptr, c);
    for (std::uint64_t i = 0; i < 50; ++i) EXPECT_EQ(node_depth(*e.generate("demo.Node", i)), 2u);
    c.recursion_allowance = 3;
    Engine deeper(s, nullptr, c);
    for (std::uint64_t i = 0; i < 50; ++i) EXPECT_EQ(node_depth(*deeper.generate("demo.Node", i)), 5u);
}

TEST(Generate, DepthNeverExceedsMaxDepth) {
    std::mt19937_64 g(31);
    for (int trial = 0; trial < 60; ++trial) {
        GenerationConfig c;
        c.max_depth = 1 + g() % 12;
        c.cycle_strategy = static_cast<CycleStrategy>(g() % 3);
        c.recursion_allowance = g() % 20;
        c.lambda = 0.05;
        c.seed = g();
        Engine e(fixtures::schema("deep"), nullptr, c);
        for (std::uint64_t i = 0; i < 20; ++i) {
            const auto m = e.generate("deep.Level0", i);
            ASSERT_LE(message_depth(*m), c.max_depth) << "max_depth " << c.max_depth;
        }
        Engine n(fixtures::schema("demo"), nullptr, c);
        for (std::uint64_t i = 0; i < 20; ++i) ASSERT_LE(node_depth(*n.generate("demo.Node", i)), c.max_depth);
    }
}

TEST(Generate, ProbabilisticChainLengthFollowsLambda) {
    // Every re-entry defers to the strategy, so a Node chain continues at
    // stack depth d with probability exp(-lambda d).
    const auto& s = fixtures::schema("demo");
    GenerationConfig c;
    c.cycle_strategy = CycleStrategy::probabilistic;
    c.lambda = 0.5;
    c.max_depth = 64;
    Engine e(s, nullptr, c);
    const int n = 20000;
    int two = 0;
    for (int i = 0; i < n; ++i) two += node_depth(*e.generate("demo.Node", static_cast<std::uint64_t>(i))) == 2;
    // depth 2 means the first re-entry (stack depth 1) terminated
    const double p = termination_probability(0.5, 1);
    EXPECT_NEAR(two / static_cast<double>(n), p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(HandleCycle, ProbabilisticFrequencyPerDepth) {
    const auto& s = fixtures::schema("demo");
    const auto& node = s.message("demo.Node");
    for (double lambda : {0.1, 0.5, 1.0}) {
        GenerationConfig c;
        c.cycle_strategy = CycleStrategy::probabilistic;
        c.lambda = lambda;
        Engine e(s, nullptr, c);
        CycleLog log;
        e.set_observer(&log);
        for (std::size_t d = 1; d <= 5; ++d) {
            const int trials = 10000;
            int stops = 0;
            for (int t = 0; t < trials; ++t) {
                auto ctx = e.make_context(static_cast<std::uint64_t>(t) * 7 + d);
                ctx.root = "demo.Node";
                for (std::size_t k = 0; k < d; ++k) ctx.stack.push_back({&node, k, ""});
                log.events.clear();
                e.handle_cycle(node, "", ctx);
                ASSERT_FALSE(log.events.empty());
                ASSERT_EQ(log.events.front().first, d);
                stops += log.events.front().second;
            }
            const double p = termination_probability(lambda, d);
            EXPECT_NEAR(stops / static_cast<double>(trials), p, 3 * std::sqrt(p * (1 - p) / trials))
                << "lambda " << lambda << " depth " << d;
        }
    }
}

TEST(HandleCycle, ReuseReturnsACompletedInstance) {
    const auto& s = fixtures::schema("demo");
    GenerationConfig c;
    c.cycle_strategy = CycleStrategy::reuse;
    Engine e(s, nullptr, c);
    for (std::uint64_t i = 0; i < 100; ++i) {
        const auto m = e.generate("demo.A", i);
        // A -> B -> C -> A(re-entry); the inner A has no completed A to reuse yet, so it is minimal.
        const auto b = std::get<MessagePtr>(m->values("b").front());
        const auto cc = std::get<MessagePtr>(b->values("c").front());
        const auto inner = std::get<MessagePtr>(cc->values("a").front());
        EXPECT_TRUE(inner->values("b").empty());
        EXPECT_NO_THROW(encode(*m));
    }
}

TEST(Generate, NullProbabilityOverride) {
    const auto& s = fixtures::schema("demo");
    GenerationConfig c;
    c.null_probability_override = 1.0;
    Engine e(s, nullptr, c);
    CollectingSink sink;
    e.generate_batch("demo.Mixed", 200, sink);
    for (const auto& m : sink.records) {
        EXPECT_TRUE(m->values("note").empty());
        EXPECT_EQ(m->values("ratio").size(), 1u);  // no presence tracking: always set
    }
}

TEST(Generate, NullProbabilityFromDomain) {
    const auto& s = fixtures::schema("demo");
    std::vector<MessagePtr> corpus;
    for (int i = 0; i < 1000; ++i) {
        auto m = fixtures::make(s, "demo.Mixed");
        if (i % 5 != 0) fixtures::set(*m, "note", std::string("n"));
        corpus.push_back(m);
    }
    const auto model = model_of(corpus, s);
    Engine e(s, &model, GenerationConfig{});
    CollectingSink sink;
    e.generate_batch("demo.Mixed", 10000, sink);
    int missing = 0;
    for (const auto& m : sink.records) missing += m->values("note").empty();
    EXPECT_NEAR(missing / 10000.0, 0.2, 3 * std::sqrt(0.2 * 0.8 / 10000));
}

TEST(Generate, EnumFrequenciesFollowTheDomain) {
    const auto& s = fixtures::schema("demo");
    std::vector<MessagePtr> corpus;
    for (int i = 0; i < 1000; ++i) {
        auto m = fixtures::make(s, "demo.Mixed");
        fixtures::set(*m, "color", EnumValue{i % 10 == 0 ? 2 : 1});
        corpus.push_back(m);
    }
    const auto model = model_of(corpus, s);
    Engine e(s, &model, GenerationConfig{});
    CollectingSink sink;
    const int n = 10000;
    e.generate_batch("demo.Mixed", n, sink);
    int red = 0;
    for (const auto& m : sink.records) {
        const auto v = std::get<EnumValue>(m->values("color").front()).number;
        ASSERT_TRUE(v == 1 || v == 2);
        red += v == 1;
    }
    EXPECT_NEAR(red / static_cast<double>(n), 0.9, 3 * std::sqrt(0.9 * 0.1 / n));
}

TEST(Generate, PatternFieldsMatchTheirPattern) {
    const auto& s = fixtures::schema("synth");
    const auto model = model_of(fixtures::account_corpus(s, 2000, 1), s);
    Engine e(s, &model, GenerationConfig{});
    CollectingSink sink;
    e.generate_batch("synth.Account", 1000, sink);
    for (const auto& m : sink.records) {
        ASSERT_TRUE(matches_uuid(std::get<std::string>(m->values("account_id").front())));
        ASSERT_TRUE(matches_email(std::get<std::string>(m->values("email").front())));
    }
}

TEST(Generate, ConditionalTablesDriveDependents) {
    const auto& s = fixtures::schema("synth");
    const auto model = model_of(fixtures::account_corpus(s, 5000, 2), s);
    Engine e(s, &model, GenerationConfig{});
    CollectingSink sink;
    e.generate_batch("synth.Account", 5000, sink);
    int premium = 0;
    for (const auto& m : sink.records) {
        const auto type = std::get<std::string>(m->values("user_type").front());
        const auto limit = std::get<std::int64_t>(m->values("credit_limit").front());
        if (type == "premium") {
            ++premium;
            ASSERT_GE(limit, fixtures::premium_lo);
            ASSERT_LE(limit, fixtures::premium_hi);
        } else {
            ASSERT_GE(limit, fixtures::basic_lo);
            ASSERT_LE(limit, fixtures::basic_hi);
        }
    }
    EXPECT_NEAR(premium / 5000.0, 0.3, 0.03);
}

TEST(Generate, DependenciesAreGeneratedFirst) {
    const auto& s = fixtures::schema("demo");
    const auto a = load_annotations(R"({"version":"annotations/v1","depends_on":{"demo.Pair.a":"b"}})", s);
    Engine e(s, nullptr, GenerationConfig{}, &a);
    FieldLog log;
    e.set_observer(&log);
    e.generate("demo.Pair");
    EXPECT_EQ(log.fields, (std::vector<std::string>{"b", "a"}));
    Engine plain(s, nullptr, GenerationConfig{});
    plain.set_observer(&log);
    log.fields.clear();
    plain.generate("demo.Pair");
    EXPECT_EQ(log.fields, (std::vector<std::string>{"a", "b"}));
}

TEST(Determinism, SameSeedSameBytes) {
    const auto& s = fixtures::schema("deep");
    GenerationConfig c;
    c.seed = 99;
    c.cycle_strategy = CycleStrategy::probabilistic;
    const auto a = batch_bytes(Engine(s, nullptr, c), "deep.Level0", 200);
    const auto b = batch_bytes(Engine(s, nullptr, c), "deep.Level0", 200);
    EXPECT_EQ(a, b);
    c.seed = 100;
    EXPECT_NE(batch_bytes(Engine(s, nullptr, c), "deep.Level0", 200), a);
}

TEST(Determinism, InstanceDependsOnlyOnItsIndex) {
    const auto& s = fixtures::schema("deep");
    GenerationConfig c;
    c.seed = 5;
    Engine e(s, nullptr, c);
    const auto all = batch_bytes(e, "deep.Level0", 50);
    for (std::uint64_t i = 0; i < 50; i += 7) EXPECT_EQ(encode(*e.generate("deep.Level0", i)), all[i]);
}

TEST(Determinism, WorkerCountDoesNotChangeOutput) {
    const auto& s = fixtures::schema("synth");
    const auto model = model_of(fixtures::account_corpus(s, 1000, 3), s);
    GenerationConfig c;
    c.seed = 17;
    c.batch_size = 64;
    const auto one = batch_bytes(Engine(s, &model, c), "synth.Account", 1000);
    c.workers = 4;
    EXPECT_EQ(batch_bytes(Engine(s, &model, c), "synth.Account", 1000), one);
}

TEST(Determinism, PlanCacheIsTransparent) {
    const auto& s = fixtures::schema("deep");
    GenerationConfig c;
    c.seed = 8;
    c.cycle_strategy = CycleStrategy::probabilistic;
    const auto cached = batch_bytes(Engine(s, nullptr, c), "deep.Level0", 300);
    c.template_cache = false;
    EXPECT_EQ(batch_bytes(Engine(s, nullptr, c), "deep.Level0", 300), cached);
}

TEST(RepeatedSizes, GeometricDefaultWithCap) {
    const auto& s = fixtures::schema("demo");
    GenerationConfig c;
    c.repeated_size.mean = 3;
    Engine e(s, nullptr, c);
    CollectingSink sink;
    const int n = 20000;
    e.generate_batch("demo.Order", n, sink);
    double sum = 0;
    for (const auto& m : sink.records) sum += static_cast<double>(m->values("items").size());
    EXPECT_NEAR(sum / n, 3.0, 3 * std::sqrt(12.0 / n));

    c.repeated_size.cap = 2;
    Engine capped(s, nullptr, c);
    for (std::uint64_t i = 0; i < 500; ++i) ASSERT_LE(capped.generate("demo.Order", i)->values("items").size(), 2u);
}

TEST(GenerateFieldValue, Standalone) {
    const auto& s = fixtures::schema("demo");
    const auto& mixed = s.message("demo.Mixed");
    Rng rng(1);
    EXPECT_THROW(generate_field_value(*mixed.find_field("items_by_id"), nullptr, rng), ValidationError);
    EXPECT_FALSE(generate_field_value(*mixed.find_field("note"), nullptr, rng, 1.0));
    const auto v = generate_field_value(*mixed.find_field("ratio"), nullptr, rng, 1.0);
    ASSERT_TRUE(v);
    EXPECT_GE(std::get<double>(*v), 0);
}
