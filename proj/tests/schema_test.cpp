#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <google/protobuf/descriptor.h>
#include <google/protobuf/descriptor.pb.h>
#include <gtest/gtest.h>

#include "protosynth/analyze.hpp"
#include "protosynth/graph.hpp"
#include "protosynth/registry.hpp"
#include "protosynth/schema.hpp"
#include "support.hpp"

using namespace protosynth;
namespace gp = google::protobuf;

namespace {

std::vector<std::string> path_strings(const SchemaGraph& s, std::string_view root, std::size_t depth) {
    std::vector<std::string> out;
    for (const auto& p : field_paths(s, root, depth)) out.push_back(p.str());
    return out;
}

std::set<std::set<std::string>> groups(const SchemaGraph& s) {
    std::set<std::set<std::string>> out;
    for (const auto& g : s.cyclic_groups) out.insert(std::set<std::string>(g.begin(), g.end()));
    return out;
}

// Random schema: message Mi gets a field of type Mj for every edge i -> j.
std::string random_schema_bytes(std::size_t n, double p, std::mt19937_64& g, graph::Adjacency& adj) {
    gp::FileDescriptorSet set;
    auto* file = set.add_file();
    file->set_name("rand.proto");
    file->set_package("rnd");
    file->set_syntax("proto3");
    adj.assign(n, {});
    std::bernoulli_distribution edge(p);
    for (std::size_t i = 0; i < n; ++i) {
        auto* m = file->add_message_type();
        m->set_name("M" + std::to_string(i));
        int number = 1;
        auto* v = m->add_field();
        v->set_name("v");
        v->set_number(number++);
        v->set_label(gp::FieldDescriptorProto::LABEL_OPTIONAL);
        v->set_type(gp::FieldDescriptorProto::TYPE_INT32);
        for (std::size_t j = 0; j < n; ++j) {
            if (!edge(g)) continue;
            adj[i].push_back(j);
            auto* f = m->add_field();
            f->set_name("to" + std::to_string(j));
            f->set_number(number++);
            f->set_label(gp::FieldDescriptorProto::LABEL_OPTIONAL);
            f->set_type(gp::FieldDescriptorProto::TYPE_MESSAGE);
            f->set_type_name(".rnd.M" + std::to_string(j));
        }
    }
    return set.SerializeAsString();
}

// Brute force: v and w share a component iff each reaches the other; a
// component is cyclic if it has several members or a self-loop.
std::set<std::set<std::string>> brute_force_groups(const graph::Adjacency& adj) {
    const std::size_t n = adj.size();
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<std::size_t> stack{s};
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            for (auto w : adj[v])
                if (!reach[s][w]) {
                    reach[s][w] = true;
                    stack.push_back(w);
                }
        }
    }
    std::set<std::set<std::string>> out;
    for (std::size_t v = 0; v < n; ++v) {
        if (!reach[v][v]) continue;  // not on any cycle
        std::set<std::string> comp;
        for (std::size_t w = 0; w < n; ++w)
            if (reach[v][w] && reach[w][v]) comp.insert("rnd.M" + std::to_string(w));
        out.insert(comp);
    }
    return out;
}

}  // namespace

TEST(LoadDescriptorSet, PingHasOneMessageOneFieldNoEdges) {
    const auto& s = fixtures::schema("ping");
    EXPECT_EQ(s.messages.size(), 1u);
    EXPECT_EQ(s.field_count(), 1u);
    EXPECT_TRUE(s.edges.empty());
    EXPECT_TRUE(s.cyclic_groups.empty());
    const auto& f = s.message("demo.Ping").fields.at(0);
    EXPECT_EQ(f.name, "seq");
    EXPECT_EQ(f.number, 1u);
    EXPECT_EQ(f.kind, FieldKind::int32);
}

TEST(LoadDescriptorSet, SelfLoopIsACyclicGroup) {
    const auto g = groups(fixtures::schema("demo"));
    EXPECT_TRUE(g.count({"demo.Node"}));
}

TEST(LoadDescriptorSet, RingIsOneCyclicGroup) {
    const auto g = groups(fixtures::schema("demo"));
    EXPECT_TRUE(g.count({"demo.A", "demo.B", "demo.C"}));
    EXPECT_EQ(g.size(), 2u);
}

TEST(LoadDescriptorSet, TruncatedInputReportsByteOffset) {
    const std::string bytes = read_file(fixtures::desc_path("demo"));
    const std::string cut = bytes.substr(0, bytes.size() / 2);
    try {
        load_descriptor_set(cut);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_LE(e.offset(), cut.size());
        EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
    }
}

TEST(LoadDescriptorSet, GarbageTagIsAParseErrorAtOffsetZero) {
    try {
        load_descriptor_set(std::string("\x07", 1));  // field 0 is invalid
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
}

TEST(LoadDescriptorSet, UnresolvedTypeNamesTheMissingType) {
    gp::FileDescriptorSet set;
    auto* file = set.add_file();
    file->set_name("x.proto");
    file->set_package("x");
    file->set_syntax("proto3");
    auto* m = file->add_message_type();
    m->set_name("Holder");
    auto* f = m->add_field();
    f->set_name("thing");
    f->set_number(1);
    f->set_label(gp::FieldDescriptorProto::LABEL_OPTIONAL);
    f->set_type(gp::FieldDescriptorProto::TYPE_MESSAGE);
    f->set_type_name(".x.Missing");
    try {
        load_descriptor_set(set.SerializeAsString());
        FAIL() << "expected ResolutionError";
    } catch (const ResolutionError& e) {
        EXPECT_EQ(e.missing_type(), "x.Missing");
    }
}

// libprotobuf's own pool is the oracle for names, numbers, kinds and labels.
TEST(LoadDescriptorSet, AgreesWithLibprotobufPool) {
    for (const char* name : {"ping", "demo", "synth", "deep"}) {
        gp::FileDescriptorSet set;
        ASSERT_TRUE(set.ParseFromString(read_file(fixtures::desc_path(name))));
        gp::DescriptorPool pool;
        for (const auto& file : set.file()) ASSERT_NE(pool.BuildFile(file), nullptr);
        const auto& s = fixtures::schema(name);
        std::size_t seen = 0;
        for (const auto& [full, m] : s.messages) {
            const auto* d = pool.FindMessageTypeByName(full);
            ASSERT_NE(d, nullptr) << full;
            ++seen;
            ASSERT_EQ(static_cast<int>(m.fields.size()), d->field_count()) << full;
            EXPECT_EQ(m.map_entry, d->options().map_entry());
            for (int i = 0; i < d->field_count(); ++i) {
                const auto* fd = d->field(i);
                const auto* f = m.find_field(fd->name());
                ASSERT_NE(f, nullptr) << full << "." << fd->name();
                EXPECT_EQ(f->number, static_cast<std::uint32_t>(fd->number()));
                EXPECT_EQ(f->is_repeated(), fd->is_repeated());
                EXPECT_EQ(f->is_map(), fd->is_map());
                EXPECT_EQ(f->json_name, fd->json_name());
                EXPECT_EQ(f->is_message(), fd->cpp_type() == gp::FieldDescriptor::CPPTYPE_MESSAGE);
                if (f->is_message()) {
                    EXPECT_EQ(f->message_type->full_name, fd->message_type()->full_name());
                }
                if (f->enum_type) {
                    EXPECT_EQ(f->enum_type->full_name, fd->enum_type()->full_name());
                }
                EXPECT_EQ(f->oneof_index.has_value(), fd->real_containing_oneof() != nullptr);
            }
        }
        EXPECT_GT(seen, 0u);
    }
}

TEST(LoadDescriptorSet, CyclicGroupsMatchBruteForceOnRandomSchemas) {
    std::mt19937_64 g(42);
    std::uniform_int_distribution<std::size_t> size(1, 20);
    std::uniform_real_distribution<double> density(0.02, 0.25);
    for (int trial = 0; trial < 300; ++trial) {
        graph::Adjacency adj;
        const auto bytes = random_schema_bytes(size(g), density(g), g, adj);
        const auto s = load_descriptor_set(bytes);
        EXPECT_EQ(groups(s), brute_force_groups(adj)) << "trial " << trial;
    }
}

TEST(LoadDescriptorSet, TarjanMatchesBruteForceOnRandomDigraphs) {
    std::mt19937_64 g(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + g() % 20;
        graph::Adjacency adj(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (g() % 8 == 0) adj[i].push_back(j);
        std::set<std::set<std::string>> got;
        for (const auto& c : graph::cyclic_components(adj)) {
            std::set<std::string> names;
            for (auto v : c) names.insert("rnd.M" + std::to_string(v));
            got.insert(names);
        }
        ASSERT_EQ(got, brute_force_groups(adj)) << "trial " << trial;
    }
}

TEST(LoadDescriptorSet, DeepSchemaShape) {
    const auto& s = fixtures::schema("deep");
    EXPECT_GE(s.messages.size(), 30u);
    EXPECT_GE(s.cyclic_groups.size(), 2u);
    EXPECT_GE(max_nesting_depth(s), 12u);
}

TEST(LoadDescriptorSet, FingerprintIsStableAcrossLoads) {
    const auto a = load_descriptor_set(read_file(fixtures::desc_path("demo")));
    const auto b = load_descriptor_set(read_file(fixtures::desc_path("demo")));
    EXPECT_EQ(schema_fingerprint(a), schema_fingerprint(b));
    EXPECT_NE(schema_fingerprint(a), schema_fingerprint(fixtures::schema("ping")));
}

TEST(FieldPaths, Ping) { EXPECT_EQ(path_strings(fixtures::schema("ping"), "demo.Ping", 16), std::vector<std::string>{"seq"}); }

TEST(FieldPaths, OrderItems) {
    EXPECT_EQ(path_strings(fixtures::schema("demo"), "demo.Order", 16),
              (std::vector<std::string>{"items[]", "items[].qty"}));
}

TEST(FieldPaths, SelfRecursionIsEmittedOnceAndBounded) {
    const auto paths = field_paths(fixtures::schema("demo"), "demo.Node", 3);
    for (const auto& p : paths) EXPECT_LE(p.segments.size(), 3u) << p.str();
    const auto strs = path_strings(fixtures::schema("demo"), "demo.Node", 3);
    EXPECT_EQ(std::count(strs.begin(), strs.end(), "next.next.next"), 0);
    EXPECT_EQ(strs, (std::vector<std::string>{"next", "v"}));
}

TEST(FieldPaths, DepthLimitTruncates) {
    const auto& s = fixtures::schema("deep");
    for (std::size_t d = 1; d <= 14; ++d)
        for (const auto& p : field_paths(s, "deep.Level0", d)) ASSERT_LE(p.segments.size(), d) << p.str();
    const auto one = path_strings(s, "deep.Level0", 1);
    EXPECT_TRUE(std::find(one.begin(), one.end(), "count") != one.end());
    EXPECT_TRUE(std::find(one.begin(), one.end(), "next.count") == one.end());
}

TEST(FieldPaths, MapsUseKeyAndValueSegments) {
    const auto strs = path_strings(fixtures::schema("demo"), "demo.Mixed", 16);
    for (const char* p : {"counts{}key", "counts{}value", "items_by_id{}key", "items_by_id{}value",
                          "items_by_id{}value.qty", "tags[]", "name", "code"})
        EXPECT_TRUE(std::find(strs.begin(), strs.end(), p) != strs.end()) << p;
}

TEST(FieldPaths, UnknownRootIsLookupError) {
    EXPECT_THROW(field_paths(fixtures::schema("ping"), "demo.Nope", 4), LookupError);
}

TEST(FieldPath, TextRoundTrip) {
    for (const char* text : {"order.items[].price", "counts{}key", "m{}value.x[]", "a"}) {
        EXPECT_EQ(FieldPath::parse(text).str(), text);
    }
    const auto p = FieldPath::parse("order.items[].price");
    ASSERT_EQ(p.segments.size(), 3u);
    EXPECT_EQ(p.segments[1].marker, SegmentMarker::repeated);
}

TEST(Enhance, NoDomainMeansDefaultsEverywhere) {
    const auto& s = fixtures::schema("deep");
    const auto reg = enhance(s, nullptr);
    EXPECT_EQ(reg.size(), s.field_count());
    for (const auto& [key, d] : reg.entries) EXPECT_EQ(d.strategy, Strategy::default_) << key.first << "." << key.second;
}

TEST(Enhance, NumericProfileIsEmpiricalAndUuidIsPattern) {
    const auto& s = fixtures::schema("demo");
    std::vector<Record> recs;
    std::mt19937_64 g(3);
    for (int i = 0; i < 200; ++i) {
        auto p = fixtures::make(s, "demo.Purchase");
        fixtures::set(*p, "customer_id", fixtures::uuid4(g));
        fixtures::set(*p, "total", static_cast<double>(g() % 100000) / 100.0);
        recs.push_back({&s.message("demo.Purchase"), p});
    }
    const auto model = analyze(LogCorpus::from_records(recs), s);
    const auto reg = enhance(s, &model);
    EXPECT_EQ(reg.size(), s.field_count());
    EXPECT_EQ(reg.at("demo.Purchase", "total").strategy, Strategy::empirical);
    const auto& id = reg.at("demo.Purchase", "customer_id");
    EXPECT_EQ(id.strategy, Strategy::pattern);
    ASSERT_TRUE(id.pattern.has_value());
    EXPECT_EQ(*id.pattern, PatternId::uuid);
    EXPECT_EQ(reg.at("demo.Node", "v").strategy, Strategy::default_);
}

TEST(SchemaReport, SummarizesCounts) {
    const auto j = schema_report(fixtures::schema("demo"));
    EXPECT_EQ(j.at("version"), "schema-report/v1");
    EXPECT_EQ(j.at("messages").get<std::size_t>(), fixtures::schema("demo").messages.size());
    EXPECT_EQ(j.at("cyclic_groups").size(), 2u);
}
