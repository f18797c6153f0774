#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "protosynth/corpus.hpp"
#include "protosynth/message.hpp"
#include "protosynth/schema.hpp"

namespace fixtures {

using namespace protosynth;

inline std::string desc_path(const std::string& name) { return std::string(PROTOSYNTH_DESC_DIR) + "/" + name + ".desc"; }

inline const SchemaGraph& schema(const std::string& name) {
    static std::map<std::string, std::unique_ptr<SchemaGraph>> cache;
    auto& slot = cache[name];
    if (!slot) slot = std::make_unique<SchemaGraph>(load_descriptor_set(read_file(desc_path(name))));
    return *slot;
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("protosynth-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline void write_ndjson(const std::filesystem::path& p, std::span<const MessagePtr> records) {
    std::ofstream out(p, std::ios::binary);
    for (const auto& m : records) out << ndjson_record_line(*m);
}

// Mutable construction helpers.
inline std::shared_ptr<Message> make(const SchemaGraph& s, std::string_view type) {
    return std::make_shared<Message>(s.message(type));
}

inline void set(Message& m, std::string_view field, Value v) {
    const auto* f = m.type->find_field(field);
    if (!f) throw LookupError("no field " + std::string(field));
    m.fields[f->index].assign(1, std::move(v));
}

inline void add(Message& m, std::string_view field, Value v) {
    const auto* f = m.type->find_field(field);
    if (!f) throw LookupError("no field " + std::string(field));
    m.fields[f->index].push_back(std::move(v));
}

inline const Value* get(const Message& m, std::string_view field) {
    const auto& v = m.values(field);
    return v.empty() ? nullptr : &v.front();
}

inline std::string uuid4(std::mt19937_64& g) {
    static constexpr char hex[] = "0123456789abcdef";
    std::string s;
    for (int i = 0; i < 32; ++i) {
        if (i == 8 || i == 12 || i == 16 || i == 20) s.push_back('-');
        if (i == 12)
            s.push_back('4');
        else if (i == 16)
            s.push_back("89ab"[g() % 4]);
        else
            s.push_back(hex[g() % 16]);
    }
    return s;
}

// synth.Account records drawn from fixed distributions. credit_limit depends
// on user_type with disjoint supports: basic in [500, 999], premium in
// [5000, 20000]. score = 1000 * tier + N(0, 100).
inline constexpr std::int64_t basic_lo = 500, basic_hi = 999, premium_lo = 5000, premium_hi = 20000;

inline std::vector<MessagePtr> account_corpus(const SchemaGraph& s, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::bernoulli_distribution premium(0.3), has_nick(0.4);
    std::uniform_int_distribution<std::int64_t> basic_limit(basic_lo, basic_hi), premium_limit(premium_lo, premium_hi);
    std::normal_distribution<double> age(40, 12), noise(0, 100);
    std::lognormal_distribution<double> balance(7, 1);
    std::exponential_distribution<double> amount(1.0 / 50);
    std::uniform_int_distribution<int> user_no(0, 99999), tier(1, 3), zip(10000, 99999);
    std::discrete_distribution<int> status({0, 80, 15, 5}), currency({60, 30, 10}), txn_count({30, 30, 20, 10, 6, 4}),
        city({10, 9, 8, 7, 6, 5, 5, 4, 4, 3, 3, 3, 2, 2, 2, 1, 1, 1, 1, 1});
    static const char* currencies[] = {"USD", "EUR", "GBP"};
    static const char* nicks[] = {"ace", "bo", "cat", "dee", "eli", "fox", "gus", "hal"};

    std::vector<MessagePtr> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto m = make(s, "synth.Account");
        set(*m, "account_id", uuid4(g));
        const bool prem = premium(g);
        set(*m, "user_type", std::string(prem ? "premium" : "basic"));
        set(*m, "credit_limit", prem ? premium_limit(g) : basic_limit(g));
        set(*m, "age", static_cast<std::int64_t>(std::clamp(std::lround(age(g)), 18L, 90L)));
        set(*m, "balance", std::round(balance(g) * 100) / 100);
        set(*m, "email", "user" + std::to_string(user_no(g)) + "@example.com");
        set(*m, "status", EnumValue{status(g)});
        if (has_nick(g)) set(*m, "nickname", std::string(nicks[g() % 8]));
        const int txns = txn_count(g);
        for (int t = 0; t < txns; ++t) {
            auto x = make(s, "synth.Txn");
            set(*x, "amount", std::round(amount(g) * 100) / 100);
            set(*x, "currency", std::string(currencies[currency(g)]));
            add(*m, "txns", MessagePtr(x));
        }
        auto addr = make(s, "synth.Address");
        set(*addr, "city", "city" + std::to_string(city(g)));
        set(*addr, "zip", std::to_string(zip(g)));
        set(*m, "address", MessagePtr(addr));
        const int t = tier(g);
        set(*m, "tier", static_cast<std::int64_t>(t));
        set(*m, "score", static_cast<std::int64_t>(std::lround(1000.0 * t + noise(g))));
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace fixtures
