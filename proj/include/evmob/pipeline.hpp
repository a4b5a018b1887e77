#pragma once

#include "evmob/alignment.hpp"
#include "evmob/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace evmob::cli {

/// Write content to path atomically (temp file in the same directory, then
/// rename), so re-runs never leave partial artifacts.
void write_atomic(const std::filesystem::path& path, const std::string& content);

enum class ProviderKind { http, scripted };

std::unique_ptr<llm::Provider> make_provider(ProviderKind kind, const RunConfig& config,
                                             const std::filesystem::path& script_path);

nlohmann::json outcome_to_json(const align::GenerationOutcome& outcome);

/// Parsed back from the outcomes JSONL for evaluation.
std::vector<Trajectory> read_outcome_trajectories(const std::filesystem::path& path);

/// Group raw records into per-user-day trajectories, keeping only days
/// inside [event_start, event_end] when a window is given.
std::vector<Trajectory> trajectories_from_records(std::span<const CheckIn> records,
                                                  const std::optional<ingest::EventWindow>& window);

/// Where `schema` caches the constructed context (and `generate` looks for
/// it) when no explicit path is given: <cache_dir>/<event name>_context.json.
std::filesystem::path default_context_path(const RunConfig& config);

struct IngestOptions {
    std::filesystem::path input;
    std::filesystem::path output;
    std::filesystem::path stats_output; // empty: <output>.stats.json
};
int run_ingest(const RunConfig& config, const IngestOptions& options, std::ostream& err);

struct SchemaOptions {
    std::filesystem::path event_text_path;
    std::filesystem::path output;
    ProviderKind provider = ProviderKind::http;
    std::filesystem::path script_path;
};
int run_schema(const RunConfig& config, const SchemaOptions& options, std::ostream& err);

struct GenerateOptions {
    std::filesystem::path users_path;   // pre-event records JSONL
    std::filesystem::path context_path; // cached event context (or raw passthrough)
    std::filesystem::path output;       // outcomes JSONL
    ProviderKind provider = ProviderKind::http;
    std::filesystem::path script_path;
};
int run_generate(const RunConfig& config, const GenerateOptions& options, std::ostream& err);

struct EvaluateOptions {
    std::filesystem::path generated_path; // outcomes JSONL
    std::filesystem::path truth_path;     // records JSONL
    std::filesystem::path output;         // report JSON
};
int run_evaluate(const RunConfig& config, const EvaluateOptions& options, std::ostream& err);

struct ReportOptions {
    std::vector<std::filesystem::path> inputs;
    std::filesystem::path output;
};
int run_report(const ReportOptions& options, std::ostream& err);

} // namespace evmob::cli
