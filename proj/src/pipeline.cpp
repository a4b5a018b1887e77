#include "evmob/pipeline.hpp"

#include "evmob/errors.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace evmob::cli {

using nlohmann::json;

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    auto parent = path.parent_path();
    if (parent.empty()) parent = ".";
    std::filesystem::create_directories(parent);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) throw IoError("cannot write to " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::unique_ptr<llm::Provider> make_provider(ProviderKind kind, const RunConfig& config,
                                             const std::filesystem::path& script_path) {
    if (kind == ProviderKind::scripted) {
        if (script_path.empty())
            throw ConfigError("scripted provider requires --script PATH");
        return llm::ScriptedProvider::from_file(script_path);
    }
    return std::make_unique<llm::HttpProvider>(config.provider);
}

json outcome_to_json(const align::GenerationOutcome& outcome) {
    json steps = json::array();
    for (const Step& step : outcome.trajectory.steps)
        steps.push_back({{"time", format_hhmm(step.time)},
                         {"lat", step.point.lat},
                         {"lon", step.point.lon},
                         {"category", step.category},
                         {"subcategory", step.subcategory}});
    json trail = json::array();
    for (const align::AuditVerdict& verdict : outcome.audit_trail)
        trail.push_back({{"internal_ok", verdict.internal_ok},
                         {"external_ok", verdict.external_ok},
                         {"internal_rationale", verdict.internal_rationale},
                         {"external_rationale", verdict.external_rationale}});
    return json{{"user_id", outcome.trajectory.user_id},
                {"date", format_date(outcome.trajectory.date)},
                {"accepted", outcome.accepted},
                {"iterations_used", outcome.iterations_used},
                {"unmet_constraints", outcome.unmet_constraints},
                {"steps", steps},
                {"audit_trail", trail}};
}

std::vector<Trajectory> read_outcome_trajectories(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read outcomes file: " + path.string());
    std::vector<Trajectory> trajs;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        json doc = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded() || !doc.is_object())
            throw IoError("outcomes line " + std::to_string(line_number) +
                          " is not a JSON object");
        try {
            Trajectory traj;
            traj.user_id = doc.at("user_id").get<std::string>();
            auto date = parse_date(doc.at("date").get<std::string>());
            if (!date) throw IoError("bad date");
            traj.date = *date;
            for (const auto& entry : doc.at("steps")) {
                Step step;
                auto hm = parse_hhmm(entry.at("time").get<std::string>());
                if (!hm) throw IoError("bad step time");
                step.time = start_of_day(traj.date) + *hm;
                step.point = {entry.at("lat").get<double>(), entry.at("lon").get<double>()};
                step.category = entry.at("category").get<std::string>();
                step.subcategory = entry.at("subcategory").get<std::string>();
                traj.steps.push_back(std::move(step));
            }
            trajs.push_back(std::move(traj));
        } catch (const std::exception& ex) {
            throw IoError("outcomes line " + std::to_string(line_number) + ": " + ex.what());
        }
    }
    return trajs;
}

std::vector<Trajectory> trajectories_from_records(
    std::span<const CheckIn> records, const std::optional<ingest::EventWindow>& window) {
    std::map<std::pair<std::string, LocalDays>, std::vector<Step>> days;
    for (const CheckIn& record : records) {
        if (window) {
            // Event days are whole calendar days (the window "start ~ end"
            // names days, not instants).
            const LocalDays day = date_of(record.timestamp);
            if (day < date_of(window->event_start) || day > date_of(window->event_end))
                continue;
        }
        days[{record.user_id, date_of(record.timestamp)}].push_back(
            Step{record.timestamp, record.point, record.category, record.subcategory,
                 record.poi_id});
    }
    std::vector<Trajectory> trajs;
    trajs.reserve(days.size());
    for (auto& [key, steps] : days) {
        std::stable_sort(steps.begin(), steps.end(),
                         [](const Step& a, const Step& b) { return a.time < b.time; });
        trajs.push_back(Trajectory{key.first, key.second, std::move(steps)});
    }
    return trajs;
}

namespace {

std::vector<CheckIn> read_records_file(const std::filesystem::path& path,
                                       const RunConfig& config, std::ostream& err) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read records file: " + path.string());
    ingest::ParseReport report;
    ingest::RecordFormat format{config.data.tz_offset};
    auto records = ingest::parse_records(in, format, &report);
    for (const auto& skip : report.skipped)
        err << "skipped line " << skip.line_number << ": " << skip.reason << "\n";
    return records;
}

std::string stats_to_json(const ingest::DatasetStats& stats) {
    json doc{{"checkins", stats.checkin_count},
             {"pois", stats.unique_poi_count},
             {"subcategories", stats.unique_subcategory_count},
             {"users", stats.user_count}};
    return doc.dump(2) + "\n";
}

} // namespace

int run_ingest(const RunConfig& config, const IngestOptions& options, std::ostream& err) {
    auto records = read_records_file(options.input, config, err);
    if (config.data.bbox) records = ingest::filter_bbox(std::move(records), *config.data.bbox);
    records = ingest::anonymize_records(std::move(records),
                                        ingest::AnonymizeOptions{config.anonymize_salt()});

    std::ostringstream body;
    for (const CheckIn& record : records)
        body << ingest::serialize_record(record, config.data.tz_offset) << "\n";
    write_atomic(options.output, body.str());

    auto stats_path = options.stats_output.empty()
                          ? std::filesystem::path(options.output.string() + ".stats.json")
                          : options.stats_output;
    write_atomic(stats_path, stats_to_json(ingest::dataset_statistics(records)));
    err << "ingested " << records.size() << " records\n";
    return 0;
}

std::filesystem::path default_context_path(const RunConfig& config) {
    const std::string name =
        config.event && !config.event->name.empty() ? config.event->name : "event";
    return config.paths.cache_dir / (name + "_context.json");
}

int run_schema(const RunConfig& config, const SchemaOptions& options, std::ostream& err) {
    std::ifstream in(options.event_text_path, std::ios::binary);
    if (!in) throw IoError("cannot read event text: " + options.event_text_path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string raw_text = buf.str();
    if (raw_text.empty()) throw IoError("event text file is empty");

    event::EventInput input = [&] {
        if (config.loop.ablate_event_schema) {
            err << "event-schema ablation: passing raw narrative through\n";
            return event::EventInput::raw(raw_text);
        }
        auto templates = prompts::TemplateSet::load(config.paths.templates_dir);
        auto provider = make_provider(options.provider, config, options.script_path);
        return event::EventInput::structured(
            event::construct_event_context(raw_text, *provider, templates));
    }();
    const auto out_path =
        options.output.empty() ? default_context_path(config) : options.output;
    input.save(out_path);
    err << "event context written to " << out_path.string() << "\n";
    return 0;
}

namespace {

struct UserDayResult {
    std::string user_id;
    LocalDays date{};
    std::optional<align::GenerationOutcome> outcome;
    std::string error;
};

std::vector<LocalDays> event_days(const ingest::EventWindow& window) {
    std::vector<LocalDays> days;
    for (LocalDays d = date_of(window.event_start); d <= date_of(window.event_end);
         d += std::chrono::days{1})
        days.push_back(d);
    return days;
}

void print_ledger(const llm::CallLedger& ledger, std::ostream& err) {
    err << "provider calls by tag:\n";
    for (const auto& [tag, totals] : ledger.snapshot())
        err << "  " << tag << ": calls=" << totals.calls
            << " input_tokens=" << totals.input_tokens
            << " output_tokens=" << totals.output_tokens << "\n";
    auto all = ledger.totals();
    err << "  total: calls=" << all.calls << " tokens="
        << all.input_tokens + all.output_tokens << " wall_ms="
        << ledger.total_wall_time().count() / 1000 << "\n";
}

} // namespace

int run_generate(const RunConfig& config, const GenerateOptions& options, std::ostream& err) {
    if (!config.event)
        throw ConfigError("generate requires an event window in the config");
    auto records = read_records_file(options.users_path, config, err);
    if (records.empty())
        throw ConfigError("users file contains no usable records: " +
                          options.users_path.string());
    event::EventInput context = event::EventInput::load(
        options.context_path.empty() ? default_context_path(config)
                                     : options.context_path);
    if (config.loop.ablate_event_schema && context.is_structured())
        throw ConfigError("event-schema ablation is set but the context file is structured; "
                          "rebuild it with the ablation enabled");

    auto templates = prompts::TemplateSet::load(config.paths.templates_dir);
    auto provider = make_provider(options.provider, config, options.script_path);
    gist::GistEngine gists(*provider, templates);

    // Group records per user, preserving input order within a user.
    std::map<std::string, std::vector<CheckIn>> by_user;
    for (CheckIn& record : records) by_user[record.user_id].push_back(std::move(record));
    if (config.data.min_checkins_per_user) {
        std::erase_if(by_user, [&](const auto& entry) {
            return entry.second.size() <
                   static_cast<std::size_t>(*config.data.min_checkins_per_user);
        });
    }

    std::vector<std::pair<std::string, UserHistory>> users;
    users.reserve(by_user.size());
    const auto short_window =
        std::chrono::minutes{std::chrono::days{config.data.short_window_days}};
    for (auto& [user_id, user_records] : by_user) {
        ingest::PartitionReport report;
        UserHistory history = ingest::partition_history(
            user_records, config.event->event_start, short_window, &report);
        history.user_id = user_id;
        for (const auto& rejected : report.rejected)
            err << "user " << user_id << ": dropped record " << rejected.record_index << " ("
                << rejected.reason << ")\n";
        users.emplace_back(user_id, std::move(history));
    }

    const std::vector<LocalDays> days = event_days(*config.event);
    std::vector<std::vector<UserDayResult>> results(users.size());

    // Users are processed concurrently; one user's days stay sequential so
    // the pattern-gist cache sees at most one extraction per user. The
    // scripted backend runs single-threaded to keep script consumption
    // order, and therefore the output, reproducible.
    int workers = options.provider == ProviderKind::scripted
                      ? 1
                      : std::max(1, config.provider.max_in_flight);
    workers = std::min<int>(workers, static_cast<int>(users.size() == 0 ? 1 : users.size()));

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < users.size(); i = next.fetch_add(1)) {
            const auto& [user_id, history] = users[i];
            for (LocalDays day : days) {
                UserDayResult result;
                result.user_id = user_id;
                result.date = day;
                try {
                    if (history.empty())
                        throw ContractError("user has no usable pre-event history");
                    align::AlignmentLoop loop(*provider, templates, gists, config.loop);
                    result.outcome = loop.run(history, context, day);
                } catch (const std::exception& ex) {
                    result.error = ex.what();
                }
                results[i].push_back(std::move(result));
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }

    std::ostringstream body;
    std::size_t failures = 0, successes = 0;
    for (const auto& per_user : results) {
        for (const UserDayResult& result : per_user) {
            if (result.outcome) {
                body << outcome_to_json(*result.outcome).dump() << "\n";
                ++successes;
            } else {
                json failure{{"user_id", result.user_id},
                             {"date", format_date(result.date)},
                             {"error", result.error}};
                err << "failed user-day " << failure.dump() << "\n";
                ++failures;
            }
        }
    }
    write_atomic(options.output, body.str());
    print_ledger(provider->ledger(), err);
    err << "generated " << successes << " user-days, " << failures << " failed\n";
    return successes == 0 && failures > 0 ? 1 : 0;
}

namespace {

ingest::BoundingBox default_bbox(std::span<const Trajectory> a,
                                 std::span<const Trajectory> b) {
    ingest::BoundingBox box{90.0, -90.0, 180.0, -180.0};
    auto widen = [&](std::span<const Trajectory> trajs) {
        for (const Trajectory& traj : trajs)
            for (const Step& step : traj.steps) {
                box.lat_min = std::min(box.lat_min, step.point.lat);
                box.lat_max = std::max(box.lat_max, step.point.lat);
                box.lon_min = std::min(box.lon_min, step.point.lon);
                box.lon_max = std::max(box.lon_max, step.point.lon);
            }
    };
    widen(a);
    widen(b);
    if (box.lat_min > box.lat_max) throw ContractError("no points to derive a bbox from");
    // Pad a degenerate box so a single-point dataset still grids cleanly.
    if (box.lat_min == box.lat_max) {
        box.lat_min -= 0.005;
        box.lat_max += 0.005;
    }
    if (box.lon_min == box.lon_max) {
        box.lon_min -= 0.005;
        box.lon_max += 0.005;
    }
    return box;
}

json stats_block(const metrics::MobilityStats& stats) {
    return json{{"mean_daily_checkins", stats.mean_daily_checkins},
                {"mean_radius_of_gyration_km", stats.mean_radius_of_gyration_km},
                {"mean_total_travel_distance_km", stats.mean_total_travel_distance_km},
                {"mean_daily_activity_duration_hours",
                 stats.mean_daily_activity_duration_hours}};
}

} // namespace

int run_evaluate(const RunConfig& config, const EvaluateOptions& options, std::ostream& err) {
    std::vector<Trajectory> generated = read_outcome_trajectories(options.generated_path);
    auto truth_records = read_records_file(options.truth_path, config, err);
    std::vector<Trajectory> truth = trajectories_from_records(truth_records, config.event);
    if (generated.empty() || truth.empty())
        throw ContractError("evaluate needs non-empty generated and truth sets");

    const ingest::BoundingBox box =
        config.data.bbox ? *config.data.bbox : default_bbox(generated, truth);
    const metrics::GridSpec grid = config.grid_spec(box);

    metrics::MetricReport report = metrics::compare(generated, truth, grid,
                                                    config.data.cd_granularity,
                                                    config.data.sd_metric);
    metrics::TripRule rule{config.data.trip_use_poi, config.data.trip_use_grid, grid};
    metrics::ActiveUserScores active = metrics::evaluate_active_users(generated, truth, rule);

    json doc{{"jsd",
              {{"si", report.jsd_si},
               {"sd", report.jsd_sd},
               {"cd", report.jsd_cd},
               {"sgd", report.jsd_sgd}}},
             {"stats",
              {{"generated", stats_block(report.stats_generated)},
               {"truth", stats_block(report.stats_truth)}}},
             {"active_users",
              {{"precision", active.precision},
               {"recall", active.recall},
               {"f1", active.f1},
               {"tp", active.tp},
               {"fp", active.fp},
               {"fn", active.fn},
               {"tn", active.tn}}},
             {"dropped_out_of_bbox", report.dropped_out_of_bbox}};
    write_atomic(options.output, doc.dump(2) + "\n");
    err << "report written to " << options.output.string() << "\n";
    return 0;
}

int run_report(const ReportOptions& options, std::ostream& err) {
    std::vector<std::pair<std::string, json>> runs;
    for (const auto& path : options.inputs) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read report: " + path.string());
        json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded())
            throw IoError("report is not valid JSON: " + path.string());
        runs.emplace_back(path.stem().string(), std::move(doc));
    }
    std::sort(runs.begin(), runs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    json merged = json::array();
    for (auto& [label, doc] : runs) {
        doc["label"] = label;
        merged.push_back(std::move(doc));
    }
    write_atomic(options.output, json{{"runs", merged}}.dump(2) + "\n");
    err << "merged " << runs.size() << " reports\n";
    return 0;
}

} // namespace evmob::cli
