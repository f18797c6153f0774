#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <system_error>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "protosynth/analyze.hpp"
#include "protosynth/baselines.hpp"
#include "protosynth/bench.hpp"
#include "protosynth/corpus.hpp"
#include "protosynth/dataset.hpp"
#include "protosynth/dependency.hpp"
#include "protosynth/domain.hpp"
#include "protosynth/engine.hpp"
#include "protosynth/errors.hpp"
#include "protosynth/quality.hpp"
#include "protosynth/schema.hpp"
#include "protosynth/sink.hpp"

namespace protosynth::cli {

inline constexpr std::string_view config_version = "config/v1";

// Every setting any subcommand understands. Flags are bound directly; config
// file values fill in whatever the command line left unset.
struct RunConfig {
    std::string descriptor;
    std::string logs;
    std::string log_format = "ndjson";
    std::string domain;
    std::string type;
    std::uint64_t count = 100;
    std::uint64_t seed = 0;
    std::size_t max_depth = 16;
    std::size_t analyze_depth = 64;
    std::string cycle_strategy = "minimal";
    double lambda = 0.5;
    std::string format = "ndjson";
    std::string out = "-";
    std::string rules;
    std::string reference;
    std::vector<std::uint64_t> sizes{100, 1000};
    std::vector<std::string> strategies{"statistical", "template", "random"};
    std::size_t runs = 10;
    unsigned workers = 1;
    std::string config;
    std::string annotations;
    std::string template_path;
    std::string dataset;
    double malformed_threshold = default_malformed_threshold;
    double alpha = 0.05;
};

// Writes to a sibling temp file and renames it over the target on commit;
// an uncommitted file is removed. "-" writes to the given stream.
class OutputFile {
public:
    OutputFile(const std::string& path, std::ostream& fallback) : path_(path) {
        if (path == "-") {
            os_ = &fallback;
            return;
        }
        tmp_ = path + ".tmp";
        file_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!file_) throw IoError("cannot write " + tmp_);
        os_ = &file_;
    }
    OutputFile(const OutputFile&) = delete;
    OutputFile& operator=(const OutputFile&) = delete;
    ~OutputFile() {
        if (!committed_ && !tmp_.empty()) {
            file_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

    std::ostream& stream() { return *os_; }

    void commit() {
        os_->flush();
        if (!*os_) throw IoError("write failed: " + path_);
        if (tmp_.empty()) return;
        file_.close();
        if (file_.fail()) throw IoError("write failed: " + path_);
        std::error_code ec;
        std::filesystem::rename(tmp_, path_, ec);
        if (ec) throw IoError("cannot rename " + tmp_ + " to " + path_ + ": " + ec.message());
        committed_ = true;
    }

private:
    std::string path_;
    std::string tmp_;
    std::ofstream file_;
    std::ostream* os_ = nullptr;
    bool committed_ = false;
};

inline void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
    OutputFile f(path, fallback);
    f.stream() << text;
    f.commit();
}

namespace detail {

inline void require(const std::string& value, std::string_view flag) {
    if (value.empty()) throw ConfigError("missing required option " + std::string(flag));
}

inline SchemaGraph load_schema(const RunConfig& c) {
    require(c.descriptor, "--descriptor");
    return load_descriptor_set(read_file(c.descriptor));
}

inline std::optional<Annotations> load_annotations_file(const RunConfig& c, const SchemaGraph& schema) {
    if (c.annotations.empty()) return std::nullopt;
    return load_annotations(read_file(c.annotations), schema);
}

inline std::optional<RuleSet> load_rules_file(const RunConfig& c, const SchemaGraph& schema) {
    if (c.rules.empty()) return std::nullopt;
    return load_rules(read_file(c.rules), schema);
}

inline GenerationConfig generation_config(const RunConfig& c) {
    GenerationConfig g;
    g.seed = c.seed;
    g.max_depth = c.max_depth;
    g.cycle_strategy = cycle_strategy_from_string(c.cycle_strategy);
    g.lambda = c.lambda;
    g.workers = c.workers;
    g.validate();
    return g;
}

// Applies config-file values to options the command line left unset.
inline void apply_config(CLI::App& sub, RunConfig& c, const std::set<std::string>& known) {
    if (c.config.empty()) return;
    auto j = nlohmann::json::parse(read_file(c.config), nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("version", "") != config_version)
        throw ConfigError("not a config/v1 document: " + c.config);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "version") continue;
        if (it.key() == "config" || !known.count(it.key()))
            throw ConfigError("unknown config key '" + it.key() + "'");
        CLI::Option* opt = sub.get_option_no_throw("--" + it.key());
        if (!opt || opt->count() > 0) continue;  // other subcommand, or the flag wins
        std::vector<std::string> values;
        const auto add = [&](const nlohmann::json& v) {
            if (v.is_string())
                values.push_back(v.get<std::string>());
            else if (v.is_number() || v.is_boolean())
                values.push_back(v.dump());
            else
                throw ConfigError("config key '" + it.key() + "' has an unsupported value");
        };
        if (it.value().is_array())
            for (const auto& v : it.value()) add(v);
        else
            add(it.value());
        try {
            for (auto& v : values) opt->add_result(v);
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw ConfigError("config key '" + it.key() + "': " + e.what());
        }
    }
}

inline int cmd_schema(const RunConfig& c, std::ostream& out) {
    const auto schema = load_schema(c);
    write_text(c.out, schema_report(schema).dump(1) + "\n", out);
    return 0;
}

inline int cmd_analyze(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const auto schema = load_schema(c);
    require(c.logs, "--logs");
    const auto annotations = load_annotations_file(c, schema);
    const auto corpus =
        LogCorpus::open(c.logs, corpus_format_from_string(c.log_format), schema, c.malformed_threshold);
    AnalyzeOptions opt;
    opt.max_depth = c.analyze_depth;
    opt.workers = c.workers;
    opt.annotations = annotations ? &*annotations : nullptr;
    const auto model = analyze(corpus, schema, opt);
    write_text(c.out, save_domain_model(model), out);
    err << "analyzed " << model.provenance.record_count << " records (" << model.provenance.skipped_count
        << " skipped), " << model.roots.size() << " root type(s)\n";
    return 0;
}

inline int cmd_generate(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const auto schema = load_schema(c);
    require(c.type, "--type");
    const MessageInfo& type = schema.message(c.type);
    const auto config = generation_config(c);
    const auto format = output_format_from_string(c.format);
    const auto annotations = load_annotations_file(c, schema);
    std::optional<DomainModel> domain;
    if (!c.domain.empty()) domain = load_domain_model(read_file(c.domain));
    const Engine engine(schema, domain ? &*domain : nullptr, config, annotations ? &*annotations : nullptr);

    OutputFile file(c.out, out);
    auto sink = make_sink(format, file.stream(), c.count);
    engine.generate_batch(type, c.count, *sink);
    file.commit();
    if (format == OutputFormat::pb && c.out != "-") write_text(sidecar_path(c.out), type.full_name + "\n", out);
    err << "generated " << c.count << " " << type.full_name << " instance(s)\n";
    return 0;
}

inline int cmd_validate(const RunConfig& c, std::ostream& out) {
    const auto schema = load_schema(c);
    require(c.dataset, "--dataset");
    require(c.reference, "--reference");
    const MessageInfo* type = c.type.empty() ? nullptr : &schema.message(c.type);
    const auto data = load_dataset(c.dataset, output_format_from_string(c.format), schema, type);
    const auto reference =
        LogCorpus::open(c.reference, corpus_format_from_string(c.log_format), schema, c.malformed_threshold);
    const auto rules = load_rules_file(c, schema);
    AssessOptions opt;
    opt.alpha = c.alpha;
    const auto report = assess(data, reference, schema, rules ? &*rules : nullptr, opt);
    if (c.out != "-") write_text(c.out, report_to_json(report).dump(1) + "\n", out);
    out << report_table(report);
    return 0;
}

inline int cmd_bench(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const auto schema = load_schema(c);
    require(c.type, "--type");
    const auto annotations = load_annotations_file(c, schema);
    const auto rules = load_rules_file(c, schema);
    const std::string ref_path = c.reference.empty() ? c.logs : c.reference;
    std::optional<LogCorpus> reference;
    if (!ref_path.empty())
        reference = LogCorpus::open(ref_path, corpus_format_from_string(c.log_format), schema, c.malformed_threshold);

    std::optional<DomainModel> domain;
    if (!c.domain.empty()) {
        domain = load_domain_model(read_file(c.domain));
    } else if (!c.logs.empty()) {
        AnalyzeOptions aopt;
        aopt.max_depth = c.analyze_depth;
        aopt.workers = c.workers;
        aopt.annotations = annotations ? &*annotations : nullptr;
        domain = analyze(*reference, schema, aopt);
        err << "analyzed " << domain->provenance.record_count << " records\n";
    }
    std::optional<Template> tpl;
    if (!c.template_path.empty()) tpl = load_template(read_file(c.template_path), schema);

    BenchOptions opt;
    opt.sizes = c.sizes;
    opt.runs = c.runs;
    opt.seed = c.seed;
    opt.generation = generation_config(c);
    opt.strategies.clear();
    for (const auto& s : c.strategies) opt.strategies.push_back(bench_strategy_from_string(s));

    BenchInputs in;
    in.schema = &schema;
    in.message = c.type;
    in.domain = domain ? &*domain : nullptr;
    in.reference = reference ? &*reference : nullptr;
    in.rules = rules ? &*rules : nullptr;
    in.tpl = tpl ? &*tpl : nullptr;
    in.annotations = annotations ? &*annotations : nullptr;
    const auto report = run_benchmark(in, opt);
    if (c.out != "-") write_text(c.out, bench_to_json(report).dump(1) + "\n", out);
    out << bench_table(report);
    return 0;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunConfig c;
    CLI::App app{"Schema-driven protobuf test data generator", "protosynth"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    const auto descriptor = [&](CLI::App* s) {
        s->add_option("--descriptor", c.descriptor, "FileDescriptorSet (protoc --descriptor_set_out --include_imports)");
    };
    const auto config = [&](CLI::App* s) { s->add_option("--config", c.config, "config/v1 JSON file; flags win"); };
    const auto log_format = [&](CLI::App* s) {
        s->add_option("--log-format", c.log_format, "corpus format")->check(CLI::IsMember({"ndjson", "binary"}));
        s->add_option("--malformed-threshold", c.malformed_threshold, "max fraction of malformed records")
            ->check(CLI::Range(0.0, 1.0));
    };
    const auto gen = [&](CLI::App* s) {
        s->add_option("--seed", c.seed, "base seed");
        s->add_option("--max-depth", c.max_depth, "generation depth limit")->check(CLI::PositiveNumber);
        s->add_option("--cycle-strategy", c.cycle_strategy, "recursion handling")
            ->check(CLI::IsMember({"reuse", "minimal", "probabilistic"}));
        s->add_option("--lambda", c.lambda, "termination rate for the probabilistic strategy");
        s->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    };

    auto* schema_cmd = app.add_subcommand("schema", "Print a summary of a descriptor set");
    descriptor(schema_cmd);
    schema_cmd->add_option("--out", c.out, "report file, - for stdout");
    config(schema_cmd);

    auto* analyze_cmd = app.add_subcommand("analyze", "Profile a log corpus into a domain model");
    descriptor(analyze_cmd);
    analyze_cmd->add_option("--logs", c.logs, "log corpus");
    log_format(analyze_cmd);
    analyze_cmd->add_option("--annotations", c.annotations, "annotations/v1 dependency file");
    analyze_cmd->add_option("--max-depth", c.analyze_depth, "profiling depth limit")->check(CLI::PositiveNumber);
    analyze_cmd->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    analyze_cmd->add_option("--out", c.out, "domain model file, - for stdout");
    config(analyze_cmd);

    auto* generate_cmd = app.add_subcommand("generate", "Generate a dataset");
    descriptor(generate_cmd);
    generate_cmd->add_option("--domain", c.domain, "domain model from analyze");
    generate_cmd->add_option("--annotations", c.annotations, "annotations/v1 dependency file");
    generate_cmd->add_option("--type", c.type, "fully qualified message type");
    generate_cmd->add_option("--count", c.count, "instances to generate");
    gen(generate_cmd);
    generate_cmd->add_option("--format", c.format, "output format")->check(CLI::IsMember({"pb", "json", "ndjson"}));
    generate_cmd->add_option("--out", c.out, "output file, - for stdout");
    config(generate_cmd);

    auto* validate_cmd = app.add_subcommand("validate", "Score a dataset against a reference corpus");
    descriptor(validate_cmd);
    validate_cmd->add_option("--dataset", c.dataset, "generated dataset");
    validate_cmd->add_option("--format", c.format, "dataset format")->check(CLI::IsMember({"pb", "json", "ndjson"}));
    validate_cmd->add_option("--type", c.type, "dataset message type (optional for pb with a .type sidecar)");
    validate_cmd->add_option("--reference", c.reference, "reference log corpus");
    log_format(validate_cmd);
    validate_cmd->add_option("--rules", c.rules, "rules/v1 file");
    validate_cmd->add_option("--alpha", c.alpha, "KS significance level")->check(CLI::Range(0.0, 1.0));
    validate_cmd->add_option("--out", c.out, "quality report JSON file; the table always goes to stdout");
    config(validate_cmd);

    auto* bench_cmd = app.add_subcommand("bench", "Compare generation strategies");
    descriptor(bench_cmd);
    bench_cmd->add_option("--logs", c.logs, "log corpus to analyze when --domain is absent");
    bench_cmd->add_option("--domain", c.domain, "domain model from analyze");
    bench_cmd->add_option("--reference", c.reference, "reference corpus for scoring (defaults to --logs)");
    log_format(bench_cmd);
    bench_cmd->add_option("--annotations", c.annotations, "annotations/v1 dependency file");
    bench_cmd->add_option("--type", c.type, "fully qualified message type");
    bench_cmd->add_option("--rules", c.rules, "rules/v1 file");
    bench_cmd->add_option("--template", c.template_path, "template/v1 file (derived from the domain model if absent)");
    bench_cmd->add_option("--sizes", c.sizes, "dataset sizes")->delimiter(',');
    bench_cmd->add_option("--strategies", c.strategies, "strategies to run")
        ->delimiter(',')
        ->check(CLI::IsMember({"statistical", "template", "random"}));
    bench_cmd->add_option("--runs", c.runs, "timed runs per size")->check(CLI::Range(10, 1000000));
    gen(bench_cmd);
    bench_cmd->add_option("--out", c.out, "bench report JSON file; the table always goes to stdout");
    config(bench_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    }

    std::set<std::string> known;
    for (const auto* s : app.get_subcommands({}))
        for (const auto* o : s->get_options())
            for (const auto& n : o->get_lnames()) known.insert(n);

    try {
        CLI::App* sub = app.get_subcommands().front();
        detail::apply_config(*sub, c, known);
        if (sub == schema_cmd) return detail::cmd_schema(c, out);
        if (sub == analyze_cmd) return detail::cmd_analyze(c, out, err);
        if (sub == generate_cmd) return detail::cmd_generate(c, out, err);
        if (sub == validate_cmd) return detail::cmd_validate(c, out);
        return detail::cmd_bench(c, out, err);
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<const char*> argv{"protosynth"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace protosynth::cli
