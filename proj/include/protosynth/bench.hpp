#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "protosynth/baselines.hpp"
#include "protosynth/corpus.hpp"
#include "protosynth/domain.hpp"
#include "protosynth/engine.hpp"
#include "protosynth/errors.hpp"
#include "protosynth/quality.hpp"
#include "protosynth/random.hpp"
#include "protosynth/sink.hpp"

namespace protosynth {

enum class BenchStrategy : std::uint8_t { statistical, template_, random };

inline std::string_view to_string(BenchStrategy s) {
    switch (s) {
        case BenchStrategy::statistical: return "statistical";
        case BenchStrategy::template_: return "template";
        case BenchStrategy::random: return "random";
    }
    return "?";
}

inline BenchStrategy bench_strategy_from_string(std::string_view s) {
    if (s == "statistical") return BenchStrategy::statistical;
    if (s == "template") return BenchStrategy::template_;
    if (s == "random") return BenchStrategy::random;
    throw ConfigError("unknown strategy: " + std::string(s));
}

struct MeanCi {
    double mean = 0;
    double half_width = 0;  // 95% two-sided, Student t
};

inline MeanCi mean_ci95(const std::vector<double>& xs) {
    MeanCi r;
    if (xs.empty()) return r;
    double sum = 0;
    for (double x : xs) sum += x;
    r.mean = sum / static_cast<double>(xs.size());
    if (xs.size() < 2) return r;
    double ss = 0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    const double n = static_cast<double>(xs.size());
    const double sd = std::sqrt(ss / (n - 1));
    boost::math::students_t dist(n - 1);
    r.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(n);
    return r;
}

struct BenchRow {
    BenchStrategy strategy = BenchStrategy::random;
    std::uint64_t size = 0;
    std::size_t runs = 0;
    MeanCi seconds;
    std::uint64_t bytes = 0;  // serialized size of the first run
};

struct BenchQuality {
    BenchStrategy strategy = BenchStrategy::random;
    QualityReport report;
};

struct BenchReport {
    std::string message;
    std::vector<BenchRow> rows;
    std::vector<BenchQuality> quality;  // empty without a reference corpus
};

struct BenchOptions {
    std::vector<std::uint64_t> sizes{100, 1000};
    std::vector<BenchStrategy> strategies{BenchStrategy::statistical, BenchStrategy::template_,
                                          BenchStrategy::random};
    std::size_t runs = 10;
    std::uint64_t seed = 0;
    // Instances generated for the quality run; 0 means the largest size.
    std::uint64_t quality_count = 0;
    GenerationConfig generation;
    AssessOptions assess;
};

struct BenchInputs {
    const SchemaGraph* schema = nullptr;
    std::string message;
    const DomainModel* domain = nullptr;
    const LogCorpus* reference = nullptr;
    const RuleSet* rules = nullptr;
    const Template* tpl = nullptr;  // derived from the domain model when absent
    const Annotations* annotations = nullptr;
};

namespace detail {

// Produces `count` instances of one strategy with one seed into a sink.
class StrategyRunner {
public:
    StrategyRunner(const BenchInputs& in, BenchStrategy s, const GenerationConfig& base) : in_(in), strategy_(s) {
        const MessageInfo& m = in.schema->message(in.message);
        type_ = &m;
        if (s == BenchStrategy::template_) {
            if (in.tpl) {
                tpl_ = *in.tpl;
            } else {
                if (!in.domain) throw ConfigError("template strategy needs a template or a domain model");
                tpl_ = load_template(derive_template(*in.schema, *in.domain, m.full_name), *in.schema);
            }
            if (tpl_->type != &m) throw ConfigError("template message does not match " + m.full_name);
        }
        if (s == BenchStrategy::statistical && !in.domain)
            throw ConfigError("statistical strategy needs a domain model");
        config_ = base;
    }

    void run(std::uint64_t count, std::uint64_t seed, RecordSink& sink) const {
        switch (strategy_) {
            case BenchStrategy::template_:
                for (std::uint64_t i = 0; i < count; ++i) sink.write(template_generate(*tpl_, i, seed));
                sink.finish();
                return;
            case BenchStrategy::random: {
                GenerationConfig cfg;
                cfg.seed = seed;
                cfg.max_depth = config_.max_depth;
                cfg.cycle_strategy = CycleStrategy::minimal;
                Engine(*in_.schema, nullptr, cfg).generate_batch(*type_, count, sink);
                return;
            }
            case BenchStrategy::statistical: {
                GenerationConfig cfg = config_;
                cfg.seed = seed;
                Engine(*in_.schema, in_.domain, cfg, in_.annotations).generate_batch(*type_, count, sink);
                return;
            }
        }
    }

private:
    const BenchInputs& in_;
    BenchStrategy strategy_;
    const MessageInfo* type_ = nullptr;
    std::optional<Template> tpl_;
    GenerationConfig config_;
};

}  // namespace detail

// Timed runs are serial. Run r of every (strategy, size) uses seed
// splitmix64(seed + r), so datasets are reproducible while timings are not.
inline BenchReport run_benchmark(const BenchInputs& in, const BenchOptions& opt) {
    if (opt.strategies.empty()) throw ConfigError("bench: no strategies");
    if (opt.sizes.empty()) throw ConfigError("bench: no sizes");
    if (opt.runs < 10) throw ConfigError("bench: at least 10 runs are required");
    opt.generation.validate();
    BenchReport report;
    report.message = in.schema->message(in.message).full_name;
    std::uint64_t largest = 0;
    for (auto s : opt.sizes) largest = std::max(largest, s);

    for (auto strategy : opt.strategies) {
        detail::StrategyRunner runner(in, strategy, opt.generation);
        for (auto size : opt.sizes) {
            BenchRow row;
            row.strategy = strategy;
            row.size = size;
            row.runs = opt.runs;
            std::vector<double> secs;
            for (std::size_t r = 0; r < opt.runs; ++r) {
                CountingSink sink;
                const auto t0 = std::chrono::steady_clock::now();
                runner.run(size, splitmix64(opt.seed + r), sink);
                const auto t1 = std::chrono::steady_clock::now();
                secs.push_back(std::chrono::duration<double>(t1 - t0).count());
                if (r == 0) row.bytes = sink.bytes;
            }
            row.seconds = mean_ci95(secs);
            report.rows.push_back(row);
        }
        if (in.reference) {
            CollectingSink sink;
            runner.run(opt.quality_count ? opt.quality_count : largest, splitmix64(opt.seed), sink);
            report.quality.push_back({strategy, assess(sink.records, *in.reference, *in.schema, in.rules, opt.assess)});
        }
    }
    return report;
}

inline nlohmann::json bench_to_json(const BenchReport& r) {
    nlohmann::json j;
    j["version"] = "bench-report/v1";
    j["message"] = r.message;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows) {
        j["rows"].push_back({{"strategy", to_string(row.strategy)},
                             {"size", row.size},
                             {"runs", row.runs},
                             {"mean_seconds", row.seconds.mean},
                             {"ci95_seconds", row.seconds.half_width},
                             {"bytes", row.bytes}});
    }
    j["quality"] = nlohmann::json::array();
    for (const auto& q : r.quality) {
        j["quality"].push_back({{"strategy", to_string(q.strategy)},
                                {"instances", q.report.instances},
                                {"q_struct", q.report.q_struct},
                                {"q_stat", q.report.q_stat},
                                {"q_sem", q.report.q_sem},
                                {"q_div", q.report.q_div},
                                {"q_total", q.report.q_total}});
    }
    return j;
}

inline std::string bench_table(const BenchReport& r) {
    std::ostringstream out;
    out << "message " << r.message << "\n\n";
    out << std::left << std::setw(12) << "strategy" << std::right << std::setw(10) << "size" << std::setw(6)
        << "runs" << std::setw(14) << "mean ms" << std::setw(14) << "ci95 ms" << std::setw(14) << "bytes" << '\n';
    out << std::fixed;
    for (const auto& row : r.rows) {
        out << std::left << std::setw(12) << to_string(row.strategy) << std::right << std::setw(10) << row.size
            << std::setw(6) << row.runs << std::setprecision(3) << std::setw(14) << row.seconds.mean * 1e3
            << std::setw(14) << row.seconds.half_width * 1e3 << std::setw(14) << row.bytes << '\n';
    }
    if (!r.quality.empty()) {
        out << '\n'
            << std::left << std::setw(12) << "strategy" << std::right << std::setw(10) << "q_struct" << std::setw(10)
            << "q_stat" << std::setw(10) << "q_sem" << std::setw(10) << "q_div" << std::setw(10) << "Q" << '\n';
        for (const auto& q : r.quality) {
            out << std::left << std::setw(12) << to_string(q.strategy) << std::right << std::setprecision(4)
                << std::setw(10) << q.report.q_struct << std::setw(10) << q.report.q_stat << std::setw(10)
                << q.report.q_sem << std::setw(10) << q.report.q_div << std::setw(10) << q.report.q_total << '\n';
        }
    }
    return out.str();
}

}  // namespace protosynth
