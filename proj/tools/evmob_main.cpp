// evmob: event-conditioned daily mobility generation and evaluation.
//
// Subcommands:
//   ingest    records -> anonymized records + dataset stats
//   schema    raw event narrative -> cached structured event context
//   generate  user histories + event context -> generated user-day outcomes
//   evaluate  generated outcomes vs. ground truth -> metric report
//   report    merge several metric reports into one comparison document

#include "evmob/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace evmob;

struct CommonFlags {
    std::string config_path;
    std::string provider = "http";
    std::string script_path;
    std::vector<std::string> ablate;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_iterations;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_provider) {
    cmd->add_option("--config", flags.config_path, "JSON config file")->required();
    cmd->add_option("--seed", flags.seed, "override the config seed");
    if (with_provider) {
        cmd->add_option("--provider", flags.provider, "backend: http or scripted")
            ->check(CLI::IsMember({"http", "scripted"}));
        cmd->add_option("--script", flags.script_path,
                        "response script file for the scripted backend");
        cmd->add_option("--ablate", flags.ablate,
                        "disable parts of the loop: ia, ea, schema (repeatable or "
                        "comma-separated)")
            ->delimiter(',');
        cmd->add_option("-K,--max-iterations", flags.max_iterations,
                        "override loop.max_iterations");
    }
}

cli::RunConfig resolve_config(const CommonFlags& flags) {
    cli::RunConfig config = cli::load_config(flags.config_path);
    if (flags.seed) {
        config.seed = *flags.seed;
        config.provider.jitter_seed = *flags.seed;
    }
    if (flags.max_iterations) config.loop.max_iterations = *flags.max_iterations;
    for (const std::string& what : flags.ablate) {
        if (what == "ia")
            config.loop.ablate_internal = true;
        else if (what == "ea")
            config.loop.ablate_external = true;
        else if (what == "schema")
            config.loop.ablate_event_schema = true;
        else
            throw ConfigError("unknown --ablate value: " + what +
                              " (expected ia, ea or schema)");
    }
    if (config.loop.max_iterations < 1) throw ConfigError("max iterations must be >= 1");
    return config;
}

cli::ProviderKind provider_kind(const CommonFlags& flags) {
    return flags.provider == "scripted" ? cli::ProviderKind::scripted
                                        : cli::ProviderKind::http;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-conditioned mobility generation pipeline"};
    app.require_subcommand(1);

    CommonFlags ingest_flags;
    std::string ingest_in, ingest_out, ingest_stats;
    CLI::App* ingest = app.add_subcommand("ingest", "parse and anonymize check-in records");
    add_common(ingest, ingest_flags, /*with_provider=*/false);
    ingest->add_option("--in", ingest_in, "records JSONL")->required();
    ingest->add_option("--out", ingest_out, "anonymized records JSONL")->required();
    ingest->add_option("--stats", ingest_stats, "stats JSON (default <out>.stats.json)");

    CommonFlags schema_flags;
    std::string schema_event, schema_out;
    CLI::App* schema = app.add_subcommand("schema", "build the structured event context");
    add_common(schema, schema_flags, /*with_provider=*/true);
    schema->add_option("--event", schema_event, "raw event narrative text file")->required();
    schema->add_option("--out", schema_out,
                       "event context JSON (default: <cache_dir>/<event>_context.json)");

    CommonFlags generate_flags;
    std::string generate_users, generate_context, generate_out;
    CLI::App* generate = app.add_subcommand("generate", "generate event-day trajectories");
    add_common(generate, generate_flags, /*with_provider=*/true);
    generate->add_option("--users", generate_users, "pre-event records JSONL")->required();
    generate->add_option("--context", generate_context,
                         "event context JSON from `schema` (default: the cached one)");
    generate->add_option("--out", generate_out, "outcomes JSONL")->required();

    CommonFlags evaluate_flags;
    std::string evaluate_generated, evaluate_truth, evaluate_out;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score generated against truth");
    add_common(evaluate, evaluate_flags, /*with_provider=*/false);
    evaluate->add_option("--generated", evaluate_generated, "outcomes JSONL")->required();
    evaluate->add_option("--truth", evaluate_truth, "ground-truth records JSONL")->required();
    evaluate->add_option("--out", evaluate_out, "metric report JSON")->required();

    std::vector<std::string> report_inputs;
    std::string report_out;
    CLI::App* report = app.add_subcommand("report", "merge metric reports");
    report->add_option("--in", report_inputs, "report JSON files")->required()->expected(-1);
    report->add_option("--out", report_out, "merged report JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            auto config = resolve_config(ingest_flags);
            return cli::run_ingest(config, {ingest_in, ingest_out, ingest_stats}, std::cerr);
        }
        if (*schema) {
            auto config = resolve_config(schema_flags);
            cli::SchemaOptions options{schema_event, schema_out,
                                       provider_kind(schema_flags),
                                       schema_flags.script_path};
            return cli::run_schema(config, options, std::cerr);
        }
        if (*generate) {
            auto config = resolve_config(generate_flags);
            cli::GenerateOptions options{generate_users, generate_context, generate_out,
                                         provider_kind(generate_flags),
                                         generate_flags.script_path};
            return cli::run_generate(config, options, std::cerr);
        }
        if (*evaluate) {
            auto config = resolve_config(evaluate_flags);
            return cli::run_evaluate(
                config, {evaluate_generated, evaluate_truth, evaluate_out}, std::cerr);
        }
        if (*report) {
            cli::ReportOptions options;
            for (const std::string& path : report_inputs) options.inputs.emplace_back(path);
            options.output = report_out;
            return cli::run_report(options, std::cerr);
        }
    } catch (const std::exception& ex) {
        std::cerr << nlohmann::json{{"error", ex.what()}}.dump() << "\n";
        return 1;
    }
    return 1;
}
