#include <memory>
#include <sstream>
#include <string>

#include <google/protobuf/descriptor.h>
#include <google/protobuf/descriptor.pb.h>
#include <google/protobuf/dynamic_message.h>
#include <google/protobuf/util/delimited_message_util.h>
#include <google/protobuf/util/json_util.h>
#include <google/protobuf/util/message_differencer.h>
#include <gtest/gtest.h>

#include "protosynth/codec.hpp"
#include "protosynth/engine.hpp"
#include "protosynth/sink.hpp"
#include "support.hpp"

using namespace protosynth;
namespace gp = google::protobuf;

namespace {

class Oracle {
public:
    explicit Oracle(const std::string& name) {
        gp::FileDescriptorSet set;
        set.ParseFromString(read_file(fixtures::desc_path(name)));
        for (const auto& f : set.file()) pool_.BuildFile(f);
    }
    std::unique_ptr<gp::Message> make(const std::string& type) {
        const auto* d = pool_.FindMessageTypeByName(type);
        return std::unique_ptr<gp::Message>(factory_.GetPrototype(d)->New());
    }

private:
    gp::DescriptorPool pool_;
    gp::DynamicMessageFactory factory_{&pool_};
};

struct Case {
    const char* schema;
    const char* type;
    CycleStrategy strategy;
};

}  // namespace

class RoundTrip : public ::testing::TestWithParam<Case> {};

// Our bytes parse under libprotobuf; libprotobuf's re-serialization decodes
// under our codec to the same message.
TEST_P(RoundTrip, BinaryAgreesWithLibprotobuf) {
    const auto c = GetParam();
    const auto& s = fixtures::schema(c.schema);
    Oracle oracle(c.schema);
    GenerationConfig cfg;
    cfg.cycle_strategy = c.strategy;
    cfg.seed = 11;
    Engine engine(s, nullptr, cfg);
    CollectingSink sink;
    engine.generate_batch(c.type, 300, sink);
    for (const auto& m : sink.records) {
        const std::string ours = encode(*m);
        auto back = decode(*m->type, ours);
        ASSERT_TRUE(equal(*m, *back));

        auto theirs = oracle.make(c.type);
        ASSERT_TRUE(theirs->ParseFromString(ours));
        const std::string reserialized = theirs->SerializeAsString();
        auto again = decode(*m->type, reserialized);
        auto check = oracle.make(c.type);
        ASSERT_TRUE(check->ParseFromString(encode(*again)));
        ASSERT_TRUE(gp::util::MessageDifferencer::Equals(*theirs, *check));
    }
}

// Our canonical JSON is accepted by libprotobuf's JSON parser and means the
// same message as our binary form.
TEST_P(RoundTrip, JsonAgreesWithLibprotobuf) {
    const auto c = GetParam();
    const auto& s = fixtures::schema(c.schema);
    Oracle oracle(c.schema);
    GenerationConfig cfg;
    cfg.cycle_strategy = c.strategy;
    cfg.seed = 12;
    Engine engine(s, nullptr, cfg);
    CollectingSink sink;
    engine.generate_batch(c.type, 200, sink);
    for (const auto& m : sink.records) {
        auto from_binary = oracle.make(c.type);
        ASSERT_TRUE(from_binary->ParseFromString(encode(*m)));
        auto from_json = oracle.make(c.type);
        const auto text = to_json(*m).dump();
        ASSERT_TRUE(gp::util::JsonStringToMessage(text, from_json.get()).ok()) << text;
        ASSERT_TRUE(gp::util::MessageDifferencer::Equals(*from_binary, *from_json)) << text;

        auto back = protosynth::from_json(*m->type, nlohmann::ordered_json::parse(text));
        ASSERT_TRUE(equal(*m, *back)) << text;

        std::string theirs;
        ASSERT_TRUE(gp::util::MessageToJsonString(*from_binary, &theirs).ok());
        auto parsed = protosynth::from_json(*m->type, nlohmann::json::parse(theirs));
        auto check = oracle.make(c.type);
        ASSERT_TRUE(check->ParseFromString(encode(*parsed)));
        ASSERT_TRUE(gp::util::MessageDifferencer::Equals(*from_binary, *check)) << theirs;
    }
}

INSTANTIATE_TEST_SUITE_P(Schemas, RoundTrip,
                         ::testing::Values(Case{"demo", "demo.Mixed", CycleStrategy::minimal},
                                           Case{"demo", "demo.Node", CycleStrategy::probabilistic},
                                           Case{"demo", "demo.A", CycleStrategy::reuse},
                                           Case{"synth", "synth.Account", CycleStrategy::minimal},
                                           Case{"deep", "deep.Level0", CycleStrategy::minimal},
                                           Case{"deep", "deep.Level0", CycleStrategy::probabilistic}));

TEST(Delimited, MatchesLibprotobufWriter) {
    const auto& s = fixtures::schema("demo");
    Oracle oracle("demo");
    Engine engine(s, nullptr, GenerationConfig{});
    CollectingSink sink;
    engine.generate_batch("demo.Mixed", 50, sink);
    std::string ours;
    for (const auto& m : sink.records) {
        encode_delimited(*m, ours);
        auto msg = oracle.make("demo.Mixed");
        msg->ParseFromString(encode(*m));
        // Compare framing on libprotobuf's own bytes so field order cannot matter.
        std::string framed;
        encode_delimited(*decode(*m->type, msg->SerializeAsString()), framed);
        std::ostringstream one;
        gp::util::SerializeDelimitedToOstream(*msg, &one);
        EXPECT_EQ(framed.size(), one.str().size());
    }
    EXPECT_FALSE(ours.empty());
}

TEST(Decode, TruncatedPayloadIsParseErrorWithOffset) {
    const auto& s = fixtures::schema("ping");
    const auto& ping = s.message("demo.Ping");
    try {
        decode(ping, std::string("\x08", 1));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 1u);
    }
}

TEST(Decode, UnknownFieldsAreSkipped) {
    const auto& ping = fixtures::schema("ping").message("demo.Ping");
    // field 2 varint 5, then seq = 3
    auto m = decode(ping, std::string("\x10\x05\x08\x03", 4));
    ASSERT_EQ(m->values("seq").size(), 1u);
    EXPECT_EQ(std::get<std::int64_t>(m->values("seq").front()), 3);
}

TEST(Decode, NegativeInt32UsesTenByteVarint) {
    const auto& s = fixtures::schema("ping");
    auto m = fixtures::make(s, "demo.Ping");
    fixtures::set(*m, "seq", std::int64_t{-1});
    const auto bytes = encode(*m);
    EXPECT_EQ(bytes.size(), 11u);
    EXPECT_EQ(std::get<std::int64_t>(decode(*m->type, bytes)->values("seq").front()), -1);
}

TEST(Json, ExplicitDefaultsAreEmitted) {
    const auto& s = fixtures::schema("ping");
    auto m = fixtures::make(s, "demo.Ping");
    fixtures::set(*m, "seq", std::int64_t{0});
    EXPECT_EQ(to_json(*m).dump(), R"({"seq":0})");
}

TEST(Json, WrongTypeIsRejected) {
    const auto& ping = fixtures::schema("ping").message("demo.Ping");
    EXPECT_THROW(protosynth::from_json(ping, nlohmann::json::parse(R"({"seq":"abc"})")), Error);
    EXPECT_THROW(protosynth::from_json(ping, nlohmann::json::parse(R"({"nope":1})")), Error);
}
