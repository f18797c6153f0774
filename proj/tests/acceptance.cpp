// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fails.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <malloc.h>
#include <numeric>

#include "protosynth/analyze.hpp"
#include "protosynth/baselines.hpp"
#include "protosynth/codec.hpp"
#include "protosynth/dependency.hpp"
#include "protosynth/engine.hpp"
#include "protosynth/quality.hpp"
#include "protosynth/sink.hpp"
#include "protosynth/stats.hpp"
#include "support.hpp"

using namespace protosynth;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Current resident set in KiB.
long rss_kib() {
    std::ifstream f("/proc/self/status");
    for (std::string line; std::getline(f, line);)
        if (line.rfind("VmRSS:", 0) == 0) return std::stol(line.substr(6));
    return -1;
}

struct Outcome {
    bool pass;
    std::string detail;
};

struct CountingSink : RecordSink {
    std::uint64_t records = 0, bytes = 0;
    long max_rss = 0;
    std::string buf;
    void write(const MessagePtr& m) override {
        buf.clear();
        encode_delimited(*m, buf);
        bytes += buf.size();
        if (++records % 1000 == 0) max_rss = std::max(max_rss, rss_kib());
    }
};

struct StreamSink : RecordSink {
    std::string bytes;
    void write(const MessagePtr& m) override { encode_delimited(*m, bytes); }
};

struct CycleLog : GenerationObserver {
    std::optional<std::pair<std::size_t, bool>> first;
    void on_cycle(const MessageInfo&, std::size_t depth, CycleStrategy, bool stop) override {
        if (!first) first = {depth, stop};
    }
};

std::vector<Record> as_records(const std::vector<MessagePtr>& ms) {
    std::vector<Record> out;
    out.reserve(ms.size());
    for (const auto& m : ms) out.push_back({m->type, m});
    return out;
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

constexpr CycleStrategy strategies[] = {CycleStrategy::reuse, CycleStrategy::minimal, CycleStrategy::probabilistic};

Outcome structural_validity() {
    const auto& s = fixtures::schema("deep");
    const auto t0 = Clock::now();
    const bool shape = s.messages.size() >= 30 && s.cyclic_groups.size() >= 2 && max_nesting_depth(s) >= 12;
    const auto& root = s.message("deep.Level0");
    std::uint64_t ok = 0, total = 0;
    for (auto strategy : strategies) {
        GenerationConfig c;
        c.seed = 1;
        c.cycle_strategy = strategy;
        CollectingSink sink;
        Engine(s, nullptr, c).generate_batch(root, 10000, sink);
        for (const auto& m : sink.records) {
            ++total;
            const auto bytes = encode(*m);
            try {
                const auto back = decode(root, bytes);
                ok += equal(*back, *m) && encode(*back) == bytes;
            } catch (const Error&) {
            }
        }
    }
    const double t = seconds_since(t0);
    return {shape && ok == total && total == 30000 && t < 60,
            fmt("%zu types, %zu cyclic groups, nesting %zu; %llu/%llu round-trips in %.1fs", s.messages.size(),
                s.cyclic_groups.size(), max_nesting_depth(s), static_cast<unsigned long long>(ok),
                static_cast<unsigned long long>(total), t)};
}

Outcome throughput() {
    const auto& s = fixtures::schema("deep");
    GenerationConfig c;
    c.seed = 2;
    const Engine e(s, nullptr, c);
    CountingSink warm;
    e.generate_batch("deep.Level0", 1000, warm);

    CountingSink small;
    auto t0 = Clock::now();
    e.generate_batch("deep.Level0", 1000, small);
    const double t1k = seconds_since(t0);

    malloc_trim(0);  // return earlier criteria's freed heap so the baseline is honest
    const long before = rss_kib();
    CountingSink big;
    t0 = Clock::now();
    e.generate_batch("deep.Level0", 100000, big);
    const double t100k = seconds_since(t0);
    const long growth = big.max_rss - before;
    return {t1k < 2 && t100k < 60 && big.records == 100000 && before > 0 && growth < 64 * 1024,
            fmt("1k in %.3fs; 100k in %.1fs (%.1f MB written), max RSS growth %ld KiB", t1k, t100k,
                big.bytes / 1e6, growth)};
}

// Shared by the fidelity, ordering and constraint criteria.
struct AccountRun {
    std::vector<MessagePtr> reference_records;
    std::optional<LogCorpus> reference;
    std::optional<DomainModel> model;
    std::vector<MessagePtr> generated;
    QualityReport report;
    double seconds = 0;
};

AccountRun& account_run() {
    static AccountRun r = [] {
        AccountRun r;
        const auto& s = fixtures::schema("synth");
        const auto t0 = Clock::now();
        r.reference_records = fixtures::account_corpus(s, 50000, 2026);
        r.reference = LogCorpus::from_records(as_records(r.reference_records));
        AnalyzeOptions ao;
        ao.analyzed_at = "acceptance";
        r.model = analyze(*r.reference, s, ao);
        GenerationConfig c;
        c.seed = 3;
        CollectingSink sink;
        Engine(s, &*r.model, c).generate_batch("synth.Account", 50000, sink);
        r.generated = std::move(sink.records);
        r.report = assess(r.generated, *r.reference, s);
        r.seconds = seconds_since(t0);
        return r;
    }();
    return r;
}

Outcome statistical_fidelity() {
    const auto& r = account_run();
    std::size_t passing = 0;
    for (const auto& f : r.report.fields) passing += f.pass;
    return {r.report.q_stat >= 0.80 && r.seconds < 300,
            fmt("q_stat %.3f (%zu/%zu fields) in %.1fs", r.report.q_stat, passing, r.report.fields.size(), r.seconds)};
}

Outcome quality_ordering() {
    const auto& s = fixtures::schema("synth");
    auto& r = account_run();
    const auto tpl = load_template(derive_template(s, *r.model, "synth.Account"), s);
    std::vector<MessagePtr> from_template;
    for (std::uint64_t i = 0; i < 50000; ++i) from_template.push_back(template_generate(tpl, i, 4));
    CollectingSink random;
    random_engine(s, 5).generate_batch("synth.Account", 50000, random);
    const double qs = r.report.q_total;
    const double qt = assess(from_template, *r.reference, s).q_total;
    const double qr = assess(random.records, *r.reference, s).q_total;
    return {qs > qt && qt > qr, fmt("Q statistical %.3f > template %.3f > random %.3f", qs, qt, qr)};
}

Outcome termination_law() {
    const auto& s = fixtures::schema("demo");
    const auto& node = s.message("demo.Node");
    int cells = 0, good = 0;
    double worst = 0;
    for (double lambda : {0.1, 0.5, 1.0}) {
        GenerationConfig c;
        c.cycle_strategy = CycleStrategy::probabilistic;
        c.lambda = lambda;
        c.seed = 6;
        Engine e(s, nullptr, c);
        CycleLog log;
        e.set_observer(&log);
        for (std::size_t d = 1; d <= 5; ++d) {
            const int trials = 10000;
            int stops = 0, seen = 0;
            for (int t = 0; t < trials; ++t) {
                auto ctx = e.make_context(static_cast<std::uint64_t>(t) * 8 + d);
                ctx.root = node.full_name;
                for (std::size_t k = 0; k < d; ++k) ctx.stack.push_back({&node, k, ""});
                log.first.reset();
                e.handle_cycle(node, "", ctx);
                if (log.first && log.first->first == d) {
                    ++seen;
                    stops += log.first->second;
                }
            }
            const double p = termination_probability(lambda, d);
            const double se = std::sqrt(p * (1 - p) / trials);
            const double z = std::abs(stops / static_cast<double>(trials) - p) / se;
            worst = std::max(worst, z);
            ++cells;
            good += seen == trials && z <= 3;
        }
    }
    return {good == cells, fmt("%d/%d (lambda, depth) cells within 3 SE; worst |z| = %.2f", good, cells, worst)};
}

std::string stream_bytes(const Engine& e, std::string_view type, std::uint64_t n) {
    StreamSink sink;
    e.generate_batch(type, n, sink);
    return sink.bytes;
}

Outcome determinism() {
    int cases = 0, equal = 0;
    const auto check = [&](const SchemaGraph& s, const DomainModel* model, std::string_view type, GenerationConfig c,
                           std::uint64_t n) {
        c.workers = 1;
        const auto a = stream_bytes(Engine(s, model, c), type, n);
        const auto b = stream_bytes(Engine(s, model, c), type, n);
        c.workers = 4;
        const auto d = stream_bytes(Engine(s, model, c), type, n);
        ++cases;
        equal += !a.empty() && a == b && a == d;
    };
    for (auto strategy : strategies) {
        GenerationConfig c;
        c.seed = 7;
        c.cycle_strategy = strategy;
        c.batch_size = 128;
        check(fixtures::schema("deep"), nullptr, "deep.Level0", c, 3000);
    }
    GenerationConfig c;
    c.seed = 8;
    c.batch_size = 256;
    check(fixtures::schema("synth"), &*account_run().model, "synth.Account", c, 5000);
    return {equal == cases, fmt("%d/%d configurations byte-identical across runs and workers {1, 4}", equal, cases)};
}

DependencyGraph random_dag(std::mt19937_64& rng, std::size_t n) {
    DependencyGraph g;
    for (std::size_t i = 0; i < n; ++i) g.nodes.push_back("f" + std::to_string(i));
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    std::shuffle(rank.begin(), rank.end(), rng);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (rank[a] < rank[b] && rng() % 3 == 0)
                g.edges.push_back({g.nodes[a], g.nodes[b], EdgeProvenance::correlation, 1.0});
    return g;
}

// Walks permutations in lexicographic order, pruning prefixes that place a
// node before one of its predecessors; the first complete one is the answer.
std::vector<std::string> first_valid_permutation(const DependencyGraph& g) {
    const std::size_t n = g.nodes.size();
    std::vector<std::vector<std::size_t>> preds(n);
    for (const auto& e : g.edges) preds[g.index_of(e.to)].push_back(g.index_of(e.from));
    std::vector<bool> placed(n);
    std::vector<std::size_t> prefix;
    std::function<bool()> walk = [&] {
        if (prefix.size() == n) return true;
        for (std::size_t v = 0; v < n; ++v) {
            if (placed[v]) continue;
            if (!std::all_of(preds[v].begin(), preds[v].end(), [&](std::size_t p) { return placed[p]; })) continue;
            placed[v] = true;
            prefix.push_back(v);
            if (walk()) return true;
            prefix.pop_back();
            placed[v] = false;
        }
        return false;
    };
    walk();
    std::vector<std::string> out;
    for (auto v : prefix) out.push_back(g.nodes[v]);
    return out;
}

double naive_percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    for (std::size_t k = 1; k <= v.size(); ++k)
        if (static_cast<double>(k) >= q * static_cast<double>(v.size()) - 1e-9) return v[k - 1];
    return v.back();
}

Outcome oracle_suites() {
    std::mt19937_64 rng(9);
    int topo_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto g = random_dag(rng, 1 + rng() % 12);
        topo_bad += topo_order(g, g.nodes) != first_valid_permutation(g);
    }

    int fixture_bad = 0;
    const auto expect = [&](double got, double want, double tol) { fixture_bad += !(std::abs(got - want) <= tol); };
    const std::vector<double> a{1, 2, 3, 4}, b{3, 4, 5, 6}, zeros(20, 0.0), ones(30, 1.0);
    expect(ks_two_sample(a, a).d, 0, 0);
    expect(ks_two_sample(a, a).p, 1, 1e-9);
    expect(ks_two_sample(zeros, ones).d, 1, 0);
    expect(ks_two_sample(a, b).d, 0.5, 1e-12);
    expect(ks_two_sample(a, b).p, ks_two_sample(b, a).p, 0);
    expect(shannon_entropy(std::map<std::string, int>{{"x", 9}}), 0, 0);
    expect(shannon_entropy(std::map<std::string, int>{{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}}), 2.0, 1e-12);
    expect(shannon_entropy(std::map<std::string, int>{{"a", 2}, {"b", 1}, {"c", 1}}), 1.5, 1e-12);

    int stats_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng() % 50;
        std::vector<double> v(n);
        std::normal_distribution<double> nd(0, 50);
        for (auto& x : v) x = trial % 2 ? nd(rng) : static_cast<double>(rng() % 20);
        const auto st = compute_stats(v);
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double ss = 0;
        for (double x : v) ss += (x - mean) * (x - mean);
        bool ok = st.count == n && st.numeric && std::abs(st.numeric->mean - mean) <= 1e-9 * (1 + std::abs(mean)) &&
                  std::abs(st.numeric->variance - (n > 1 ? ss / (n - 1) : 0.0)) <= 1e-7 * (1 + ss) &&
                  st.numeric->min == *std::min_element(v.begin(), v.end()) &&
                  st.numeric->max == *std::max_element(v.begin(), v.end());
        if (ok)
            for (const auto& [p, x] : st.numeric->percentiles) ok = ok && x == naive_percentile(v, p / 100.0);
        stats_bad += !ok;
    }
    return {topo_bad == 0 && fixture_bad == 0 && stats_bad == 0,
            fmt("topo_order %d/1000 mismatches; KS/entropy fixtures %d failures; compute_stats %d/1000 mismatches",
                topo_bad, fixture_bad, stats_bad)};
}

Outcome constraint_propagation() {
    const auto& r = account_run();
    std::size_t ok = 0, premium = 0;
    for (const auto& m : r.generated) {
        const auto type = std::get<std::string>(m->values("user_type").front());
        const auto limit = std::get<std::int64_t>(m->values("credit_limit").front());
        const bool prem = type == "premium";
        premium += prem;
        ok += prem ? limit >= fixtures::premium_lo && limit <= fixtures::premium_hi
                   : type == "basic" && limit >= fixtures::basic_lo && limit <= fixtures::basic_hi;
    }
    return {ok == r.generated.size() && premium > 0 && premium < r.generated.size(),
            fmt("%zu/%zu instances inside the conditional support (%zu premium)", ok, r.generated.size(), premium)};
}

}  // namespace

int main() {
    const std::pair<const char*, Outcome (*)()> criteria[] = {
        {"structural validity", structural_validity}, {"throughput", throughput},
        {"statistical fidelity", statistical_fidelity}, {"quality ordering", quality_ordering},
        {"termination law", termination_law},         {"determinism", determinism},
        {"oracle suites", oracle_suites},             {"constraint propagation", constraint_propagation},
    };
    int failed = 0;
    int i = 0;
    for (const auto& [name, fn] : criteria) {
        ++i;
        Outcome o{false, ""};
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.detail = std::string("threw: ") + e.what();
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << i << " " << name << ": " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
