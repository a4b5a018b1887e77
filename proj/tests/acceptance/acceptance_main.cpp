// Acceptance suite: runs every release criterion and prints one line per
// criterion. Exits nonzero when any criterion fails.

#include "evmob/alignment.hpp"
#include "evmob/http_provider.hpp"
#include "evmob/ingest.hpp"
#include "evmob/metrics.hpp"
#include "evmob/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

using namespace evmob;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Harness

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define REQUIRE_C(cond, msg)                                                         \
    do {                                                                             \
        if (!(cond)) throw Failure(std::string(msg) + " [" #cond "]");               \
    } while (0)

std::filesystem::path work_dir() {
    static std::filesystem::path dir = [] {
        auto d = std::filesystem::temp_directory_path() /
                 ("evmob_acceptance_" + std::to_string(::getpid()));
        std::filesystem::remove_all(d);
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out << content;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::string& args) {
    const std::string log = (work_dir() / "cli.log").string();
    const std::string command =
        std::string(EVMOB_CLI_PATH) + " " + args + " >>" + log + " 2>&1";
    return std::system(command.c_str());
}

// ---------------------------------------------------------------------------
// Independent oracles (same definitions, different algebraic routes).

long double oracle_distance_km(const GeoPoint& a, const GeoPoint& b) {
    const long double rad = std::numbers::pi_v<long double> / 180.0L;
    const long double p1 = a.lat * rad, p2 = b.lat * rad;
    const long double dl = (b.lon - a.lon) * rad;
    const long double num = std::sqrt(
        std::pow(std::cos(p2) * std::sin(dl), 2.0L) +
        std::pow(std::cos(p1) * std::sin(p2) - std::sin(p1) * std::cos(p2) * std::cos(dl),
                 2.0L));
    const long double den =
        std::sin(p1) * std::sin(p2) + std::cos(p1) * std::cos(p2) * std::cos(dl);
    return 6371.0088L * std::atan2(num, den);
}

long double oracle_jsd(const std::vector<double>& p, const std::vector<double>& q) {
    auto entropy = [](const std::vector<long double>& x) {
        long double h = 0.0L;
        for (long double v : x)
            if (v > 0.0L) h -= v * std::log2(v);
        return h;
    };
    std::vector<long double> pl(p.begin(), p.end()), ql(q.begin(), q.end()), m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5L * (pl[i] + ql[i]);
    return entropy(m) - 0.5L * (entropy(pl) + entropy(ql));
}

// ---------------------------------------------------------------------------
// Scripted-response building blocks.

const char* kPattern =
    R"({"core_behavior":"commute","points_of_inertia":["home"],"points_of_fracture":["rail"]})";
const char* kEventG =
    R"({"primary_intent":"stay home","behavioral_implications":["avoid crowds"],"risk_reward_calculus":"risk wins"})";
const char* kAction =
    R"({"primary_intent":"short errand","habit_adherence":{"level":"medium","rationale":"r"},"event_compliance":{"level":"high","rationale":"r"}})";
const char* kAccept =
    R"({"internal_ok":true,"external_ok":true,"internal_rationale":"","external_rationale":""})";
const char* kReject =
    R"({"internal_ok":false,"external_ok":true,"internal_rationale":"breaks the routine","external_rationale":""})";
const char* kStayHome = R"({"justification":"stay at home","steps":[]})";

std::string plan_for_user(int i) {
    if (i % 5 == 0) return kStayHome;
    json steps = json::array();
    const char* cats[] = {"Retail", "Dining & Drinking", "Travel & Transport",
                          "Arts & Entertainment"};
    const char* subs[] = {"Supermarket", "Ramen Restaurant", "Rail Station", "Theater"};
    const int n = 2 + i % 3;
    for (int s = 0; s < n; ++s) {
        char hhmm[8];
        std::snprintf(hhmm, sizeof(hhmm), "%02d:%02d", 8 + s * 2 + i % 3, (i * 7) % 60);
        const auto idx = static_cast<std::size_t>((i + s) % 4);
        steps.push_back({{"time", hhmm},
                         {"lat", 35.3 + (i % 10) * 0.08 + s * 0.01},
                         {"lon", 139.1 + (i % 7) * 0.12 + s * 0.01},
                         {"category", cats[idx]},
                         {"subcategory", subs[idx]}});
    }
    return json{{"justification", "planned day " + std::to_string(i)}, {"steps", steps}}
        .dump();
}

std::string user_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "user%02d", i);
    return buf;
}

std::string record_line(const std::string& user, const std::string& poi, double lat,
                        double lon, const std::string& stamp, const std::string& sub,
                        const std::string& cat) {
    return json{{"user_id", user}, {"lat", lat},      {"lon", lon},
                {"poi_id", poi},   {"subcategory", sub}, {"category", cat},
                {"timestamp", stamp}}
               .dump() +
           "\n";
}

constexpr int kUsers = 20;

std::string users_fixture(int users = kUsers) {
    std::string text;
    const char* subs[] = {"Supermarket", "Office", "Rail Station", "Coffee Shop"};
    const char* cats[] = {"Retail", "Business & Professional", "Travel & Transport",
                          "Dining & Drinking"};
    for (int i = 0; i < users; ++i) {
        for (int day = 0; day < 4; ++day) {
            for (int visit = 0; visit < 2; ++visit) {
                char stamp[48];
                std::snprintf(stamp, sizeof(stamp), "2020-03-%02dT%02d:%02d:00+09:00",
                              20 + day * 3 + (i % 3), 8 + visit * 9, (i * 11) % 60);
                const auto idx = static_cast<std::size_t>((i + day + visit) % 4);
                text += record_line(user_name(i), "hpoi" + std::to_string(i * 10 + visit),
                                    35.3 + (i % 10) * 0.08, 139.1 + (i % 7) * 0.12, stamp,
                                    subs[idx], cats[idx]);
            }
        }
    }
    return text;
}

std::string truth_fixture() {
    std::string text;
    const char* subs[] = {"Supermarket", "Ramen Restaurant", "Rail Station", "Theater"};
    const char* cats[] = {"Retail", "Dining & Drinking", "Travel & Transport",
                          "Arts & Entertainment"};
    for (int i = 0; i < kUsers; ++i) {
        if (i % 4 == 0) continue; // stayed fully offline that day
        const int visits = 1 + i % 3;
        for (int v = 0; v < visits; ++v) {
            char stamp[48];
            std::snprintf(stamp, sizeof(stamp), "2020-04-07T%02d:%02d:00+09:00",
                          9 + v * 3 + i % 2, (i * 13 + v * 17) % 60);
            const auto idx = static_cast<std::size_t>((i + v) % 4);
            // i % 4 == 1 users revisit one poi at one spot: present but not active.
            const std::string poi =
                i % 4 == 1 ? "tsame" + std::to_string(i)
                           : "tpoi" + std::to_string(i * 10 + v);
            const double lat = i % 4 == 1 ? 35.3 + (i % 10) * 0.08
                                          : 35.3 + (i % 10) * 0.08 + v * 0.02;
            const double lon = i % 4 == 1 ? 139.1 + (i % 7) * 0.12
                                          : 139.1 + (i % 7) * 0.12 + v * 0.03;
            text += record_line(user_name(i), poi, lat, lon, stamp, subs[idx], cats[idx]);
        }
    }
    return text;
}

std::string accept_all_script(int users, const std::string& capture_path = "") {
    json queues;
    json generate = json::array(), pattern = json::array(), action = json::array(),
         audit = json::array();
    for (int i = 0; i < users; ++i) {
        generate.push_back(plan_for_user(i));
        pattern.push_back(kPattern);
        action.push_back(kAction);
        audit.push_back(kAccept);
    }
    queues["generate"] = generate;
    queues["pattern_gist"] = pattern;
    queues["action_gist"] = action;
    queues["audit"] = audit;
    queues["event_gist"] = json::array({kEventG});
    json doc{{"queues", queues}};
    if (!capture_path.empty()) doc["capture_path"] = capture_path;
    return doc.dump();
}

std::string config_fixture() {
    return json{
        {"seed", 11},
        {"provider", {{"base_url", "http://127.0.0.1:1"}, {"model", "m"}}},
        {"loop", {{"max_iterations", 3}}},
        {"data",
         {{"timezone", "+09:00"},
          {"short_window_days", 7},
          {"bbox",
           {{"lat_min", 35.0}, {"lat_max", 36.4}, {"lon_min", 138.9}, {"lon_max", 140.4}}}}},
        {"paths", {{"templates_dir", std::string(EVMOB_SOURCE_DIR) + "/templates"},
                   {"cache_dir", (work_dir() / "cache").string()}}},
        {"event",
         {{"name", "synthetic"}, {"event_start", "2020-04-07"}, {"event_end", "2020-04-07"}}},
    }
        .dump(2);
}

// Outcomes JSONL mirroring a set of truth records (for self-comparison runs).
std::string outcomes_from_records(const std::string& records_text, bool relabel) {
    std::istringstream in(records_text);
    ingest::RecordFormat format{std::chrono::minutes{540}};
    auto records = ingest::parse_records(in, format);
    auto trajs = cli::trajectories_from_records(records, std::nullopt);
    std::string out;
    for (const auto& traj : trajs) {
        json steps = json::array();
        for (const auto& step : traj.steps)
            steps.push_back({{"time", format_hhmm(step.time)},
                             {"lat", step.point.lat},
                             {"lon", step.point.lon},
                             {"category", step.category + (relabel ? " alt" : "")},
                             {"subcategory", step.subcategory + (relabel ? " alt" : "")}});
        out += json{{"user_id", traj.user_id},
                    {"date", format_date(traj.date)},
                    {"accepted", true},
                    {"iterations_used", 1},
                    {"unmet_constraints", json::array()},
                    {"steps", steps},
                    {"audit_trail", json::array()}}
                   .dump() +
               "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Criteria

void criterion_jsd_oracle() {
    using namespace metrics;
    const auto start = std::chrono::steady_clock::now();
    std::mt19937 rng(101);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 8 + static_cast<std::size_t>(trial) % 48;
        Distribution p, q;
        double sp = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p.labels.push_back("b" + std::to_string(i));
            p.mass.push_back(unit(rng));
            q.mass.push_back(unit(rng));
            sp += p.mass.back();
            sq += q.mass.back();
        }
        q.labels = p.labels;
        for (auto& m : p.mass) m /= sp;
        for (auto& m : q.mass) m /= sq;
        const double got = jsd(p, q);
        const double want = static_cast<double>(oracle_jsd(p.mass, q.mass));
        REQUIRE_C(std::abs(got - want) < 1e-12, "jsd deviates from the reference");
    }
    Distribution a{{"x", "y"}, {1.0, 0.0}}, b{{"x", "y"}, {0.0, 1.0}};
    REQUIRE_C(jsd(a, b) == 1.0, "jsd of disjoint unit masses must be exactly 1.0");
    Distribution u{{"x", "y", "z"}, {0.2, 0.5, 0.3}};
    REQUIRE_C(jsd(u, u) < 1e-12, "jsd(p,p) must vanish");
    const auto elapsed = std::chrono::steady_clock::now() - start;
    REQUIRE_C(elapsed < std::chrono::seconds(1), "jsd oracle run exceeded 1 s");
}

void criterion_haversine() {
    using metrics::haversine_km;
    std::mt19937 rng(103);
    std::uniform_real_distribution<double> lat(-90.0, 90.0), lon(-180.0, 180.0);
    for (int i = 0; i < 1000; ++i) {
        GeoPoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)};
        const double got = haversine_km(a, b);
        const double want = static_cast<double>(oracle_distance_km(a, b));
        REQUIRE_C(std::abs(got - want) < 1e-9, "haversine deviates from the oracle");
    }
    const double half = haversine_km({0.0, 0.0}, {0.0, 180.0});
    REQUIRE_C(std::abs(half - std::numbers::pi * 6371.0088) < 1e-6,
              "half-circumference distance off");
}

void criterion_sgd_retention() {
    using namespace metrics;
    GridSpec grid{10, 35.0, 36.0, 139.0, 140.0};
    std::mt19937 rng(107);
    std::uniform_real_distribution<double> lat(34.9, 36.1), lon(138.9, 140.1);
    std::vector<Step> steps;
    for (int i = 0; i < 10000; ++i)
        steps.push_back(Step{LocalSeconds{*parse_date("2020-04-07")} + std::chrono::hours{9},
                             GeoPoint{lat(rng), lon(rng)}, "c", "s", ""});
    std::vector<Trajectory> trajs{Trajectory{"u", *parse_date("2020-04-07"), steps}};
    auto cells = grid_cell_counts(trajs, grid);

    const double dlat = (grid.lat_max - grid.lat_min) / grid.s;
    const double dlon = (grid.lon_max - grid.lon_min) / grid.s;
    std::uint64_t inside = 0;
    for (int r = 0; r < grid.s; ++r)
        for (int c = 0; c < grid.s; ++c) {
            std::uint64_t tally = 0;
            for (const Step& s : steps) {
                const double la = s.point.lat, lo = s.point.lon;
                const bool lat_in =
                    la >= grid.lat_min + r * dlat &&
                    (la < grid.lat_min + (r + 1) * dlat ||
                     (r == grid.s - 1 && la <= grid.lat_max));
                const bool lon_in =
                    lo >= grid.lon_min + c * dlon &&
                    (lo < grid.lon_min + (c + 1) * dlon ||
                     (c == grid.s - 1 && lo <= grid.lon_max));
                if (lat_in && lon_in) ++tally;
            }
            REQUIRE_C(cells.counts[static_cast<std::size_t>(r * grid.s + c)] == tally,
                      "grid cell count deviates from the brute-force tally");
            inside += tally;
        }
    REQUIRE_C(inside + cells.dropped == steps.size(), "dropped count inconsistent");
    REQUIRE_C(retained_cells(cells, 10).size() == 25,
              "S=10 must retain exactly 25 cells");
}

struct LoopHarness {
    llm::ScriptedProvider provider;
    gist::GistEngine gists;
    align::AlignmentLoop loop;
    LoopHarness(std::map<std::string, std::deque<std::string>> queues,
                align::LoopConfig config, const prompts::TemplateSet& templates)
        : provider(std::move(queues)), gists(provider, templates),
          loop(provider, templates, gists, config) {}
};

UserHistory loop_history() {
    UserHistory history;
    history.user_id = "u1";
    history.event_start = LocalSeconds{*parse_date("2020-04-07")};
    history.short_window = std::chrono::minutes{std::chrono::days{7}};
    Trajectory day{"u1", *parse_date("2020-04-01"),
                   {Step{LocalSeconds{*parse_date("2020-04-01")} + std::chrono::hours{9},
                         GeoPoint{35.65, 139.54}, "Retail", "Supermarket", "p1"}}};
    history.short_term.push_back(day);
    return history;
}

void criterion_algorithm_traces() {
    const auto start = std::chrono::steady_clock::now();
    auto templates = prompts::TemplateSet::load(std::string(EVMOB_SOURCE_DIR) + "/templates");
    const auto day = *parse_date("2020-04-07");

    { // accept at iteration 1
        LoopHarness h({{"pattern_gist", {kPattern}},
                       {"event_gist", {kEventG}},
                       {"generate", {plan_for_user(1)}},
                       {"action_gist", {kAction}},
                       {"audit", {kAccept}}},
                      align::LoopConfig{}, templates);
        auto outcome = h.loop.run(loop_history(), event::EventInput::raw("event"), day);
        REQUIRE_C(outcome.accepted && outcome.iterations_used == 1, "accept-at-1 shape");
        REQUIRE_C(h.provider.ledger().calls("generate") == 1, "accept-at-1 generate calls");
        REQUIRE_C(h.provider.ledger().calls("action_gist") == 1,
                  "accept-at-1 action-gist calls");
        REQUIRE_C(h.provider.ledger().calls("audit") == 1, "accept-at-1 audit calls");
    }
    { // reject always, K = 3
        align::LoopConfig config;
        config.max_iterations = 3;
        LoopHarness h({{"pattern_gist", {kPattern}},
                       {"event_gist", {kEventG}},
                       {"generate", {plan_for_user(1)}},
                       {"regenerate", {plan_for_user(2), plan_for_user(3)}},
                       {"action_gist", {kAction, kAction, kAction}},
                       {"audit", {kReject, kReject, kReject}}},
                      config, templates);
        auto outcome = h.loop.run(loop_history(), event::EventInput::raw("event"), day);
        REQUIRE_C(!outcome.accepted, "reject-always must end unaccepted");
        REQUIRE_C(outcome.iterations_used == 3, "reject-always iterations");
        REQUIRE_C(!outcome.unmet_constraints.empty(), "reject-always unmet constraints");
        REQUIRE_C(h.provider.ledger().calls("generate") +
                          h.provider.ledger().calls("regenerate") ==
                      3,
                  "reject-always generation calls");
        REQUIRE_C(h.provider.ledger().calls("action_gist") == 3,
                  "reject-always action-gist calls");
        REQUIRE_C(h.provider.ledger().calls("audit") == 3, "reject-always audit calls");
    }
    { // reject once then accept
        align::LoopConfig config;
        config.max_iterations = 3;
        LoopHarness h({{"pattern_gist", {kPattern}},
                       {"event_gist", {kEventG}},
                       {"generate", {kStayHome}},
                       {"regenerate", {plan_for_user(2)}},
                       {"action_gist", {kAction, kAction}},
                       {"audit", {kReject, kAccept}}},
                      config, templates);
        auto outcome = h.loop.run(loop_history(), event::EventInput::raw("event"), day);
        REQUIRE_C(outcome.accepted && outcome.iterations_used == 2, "reject-once shape");
        REQUIRE_C(h.provider.ledger().calls("generate") == 1 &&
                      h.provider.ledger().calls("regenerate") == 1,
                  "reject-once must use exactly 2 generation calls");
    }
    const auto elapsed = std::chrono::steady_clock::now() - start;
    REQUIRE_C(elapsed < std::chrono::seconds(1), "trace runs exceeded 1 s");
}

void criterion_call_budget() {
    auto templates = prompts::TemplateSet::load(std::string(EVMOB_SOURCE_DIR) + "/templates");
    const auto day = *parse_date("2020-04-07");
    for (int k = 1; k <= 5; ++k) {
        align::LoopConfig config;
        config.max_iterations = k;
        std::map<std::string, std::deque<std::string>> queues{
            {"pattern_gist", {kPattern}},
            {"event_gist", {kEventG}},
            {"generate", {kStayHome}},
            {"regenerate",
             std::deque<std::string>(static_cast<std::size_t>(k), plan_for_user(2))},
            {"action_gist", std::deque<std::string>(static_cast<std::size_t>(k), kAction)},
            {"audit", std::deque<std::string>(static_cast<std::size_t>(k), kReject)}};
        LoopHarness h(std::move(queues), config, templates);
        h.loop.run(loop_history(), event::EventInput::raw("event"), day);
        REQUIRE_C(h.provider.ledger().totals().calls <=
                      static_cast<std::uint64_t>(3 * k + 2),
                  "user-day call budget exceeded for K=" + std::to_string(k));
    }
}

void criterion_ablation_semantics() {
    const auto dir = work_dir();
    write_file(dir / "config.json", config_fixture());
    write_file(dir / "users.jsonl", users_fixture());
    write_file(dir / "raw_event.txt", "heavy typhoon approaching the bay area tonight");

    { // --ablate ia,ea: single-pass acceptance through the real CLI
        json queues;
        json generate = json::array();
        for (int i = 0; i < kUsers; ++i) generate.push_back(plan_for_user(i));
        queues["generate"] = generate;
        write_file(dir / "script_single.json", json{{"queues", queues}}.dump());
        event::EventInput::raw("heavy typhoon approaching").save(dir / "ctx_raw.json");
        REQUIRE_C(run_cli("generate --config " + (dir / "config.json").string() +
                          " --users " + (dir / "users.jsonl").string() + " --context " +
                          (dir / "ctx_raw.json").string() + " --out " +
                          (dir / "single.jsonl").string() +
                          " --provider scripted --script " +
                          (dir / "script_single.json").string() +
                          " --ablate ia,ea --ablate schema") == 0,
                  "single-pass generate run failed");
        std::istringstream lines(read_file(dir / "single.jsonl"));
        std::string line;
        int count = 0;
        while (std::getline(lines, line)) {
            auto doc = json::parse(line);
            REQUIRE_C(doc["accepted"] == true, "ablated run must accept at iteration 1");
            REQUIRE_C(doc["iterations_used"] == 1, "ablated run must be single-pass");
            ++count;
        }
        REQUIRE_C(count == kUsers, "single-pass run must cover every user");
    }

    { // --ablate schema: captured prompts carry the raw narrative, no aspects
        REQUIRE_C(run_cli("schema --config " + (dir / "config.json").string() +
                          " --event " + (dir / "raw_event.txt").string() + " --out " +
                          (dir / "ctx_passthrough.json").string() + " --ablate schema") == 0,
                  "schema --ablate schema failed");
        const std::string capture = (dir / "capture.jsonl").string();
        write_file(dir / "script_capture.json", accept_all_script(3, capture));
        write_file(dir / "users3.jsonl", users_fixture(3));
        REQUIRE_C(run_cli("generate --config " + (dir / "config.json").string() +
                          " --users " + (dir / "users3.jsonl").string() + " --context " +
                          (dir / "ctx_passthrough.json").string() + " --out " +
                          (dir / "gen3.jsonl").string() +
                          " --provider scripted --script " +
                          (dir / "script_capture.json").string() + " --ablate schema") == 0,
                  "schema-ablated generate failed");
        const std::string captured = read_file(capture);
        REQUIRE_C(!captured.empty(), "no prompts captured");
        REQUIRE_C(captured.find("heavy typhoon approaching the bay area") !=
                      std::string::npos,
                  "captured prompts lack the raw event text");
        REQUIRE_C(captured.find("event_profile") == std::string::npos,
                  "captured prompts must not contain the four-aspect schema");
    }
}

void criterion_end_to_end_determinism() {
    const auto dir = work_dir();
    write_file(dir / "config.json", config_fixture());
    write_file(dir / "users.jsonl", users_fixture());
    write_file(dir / "truth.jsonl", truth_fixture());
    write_file(dir / "script.json", accept_all_script(kUsers));
    write_file(dir / "raw_event.txt", "synthetic event narrative for the smoke city");
    const char* ctx_json =
        R"({"event_profile":{"type":"drill","name":"synthetic","time":"2020-04-07","regions":"smoke city"},)"
        R"("intensity_and_scale":{"level":"moderate"},)"
        R"("infrastructure_and_service_impact":{"rail":"reduced"},)"
        R"("official_directives":[{"directive":"limit outings","applicable_population":"all","geographic_scope":"city"}]})";
    write_file(dir / "schema_script.json", json::array({ctx_json}).dump());

    auto one_round = [&](const std::string& tag) {
        REQUIRE_C(run_cli("schema --config " + (dir / "config.json").string() +
                          " --event " + (dir / "raw_event.txt").string() + " --out " +
                          (dir / ("ctx_" + tag + ".json")).string() +
                          " --provider scripted --script " +
                          (dir / "schema_script.json").string()) == 0,
                  "schema run " + tag + " failed");
        REQUIRE_C(run_cli("generate --config " + (dir / "config.json").string() +
                          " --users " + (dir / "users.jsonl").string() + " --context " +
                          (dir / ("ctx_" + tag + ".json")).string() + " --out " +
                          (dir / ("gen_" + tag + ".jsonl")).string() +
                          " --provider scripted --script " +
                          (dir / "script.json").string()) == 0,
                  "generate run " + tag + " failed");
        REQUIRE_C(run_cli("evaluate --config " + (dir / "config.json").string() +
                          " --generated " + (dir / ("gen_" + tag + ".jsonl")).string() +
                          " --truth " + (dir / "truth.jsonl").string() + " --out " +
                          (dir / ("report_" + tag + ".json")).string()) == 0,
                  "evaluate run " + tag + " failed");
    };
    one_round("a");
    one_round("b");
    REQUIRE_C(read_file(dir / "ctx_a.json") == read_file(dir / "ctx_b.json"),
              "event context differs between identical runs");
    REQUIRE_C(read_file(dir / "gen_a.jsonl") == read_file(dir / "gen_b.jsonl"),
              "outcome JSONL differs between identical runs");
    REQUIRE_C(read_file(dir / "report_a.json") == read_file(dir / "report_b.json"),
              "metric report differs between identical runs");
    const std::string gen = read_file(dir / "gen_a.jsonl");
    REQUIRE_C(!gen.empty(), "generate produced no outcomes");
    auto report = json::parse(read_file(dir / "report_a.json"));
    for (const char* key : {"si", "sd", "cd", "sgd"}) {
        const double value = report["jsd"][key].get<double>();
        REQUIRE_C(value >= 0.0 && value <= 1.0, "jsd out of [0,1] in the e2e report");
    }

    // Merge both run reports through the report subcommand.
    REQUIRE_C(run_cli("report --in " + (dir / "report_a.json").string() + " " +
                      (dir / "report_b.json").string() + " --out " +
                      (dir / "merged.json").string()) == 0,
              "report merge failed");
    auto merged = json::parse(read_file(dir / "merged.json"));
    REQUIRE_C(merged["runs"].size() == 2, "merged report must list both runs");
    REQUIRE_C(merged["runs"][0]["label"] == "report_a", "merged report label order");
}

void criterion_dataset_statistics() {
    const auto dir = work_dir();
    write_file(dir / "config.json", config_fixture());
    const auto fixture =
        std::filesystem::path(EVMOB_SOURCE_DIR) / "tests/fixtures/records_50.jsonl";
    REQUIRE_C(run_cli("ingest --config " + (dir / "config.json").string() + " --in " +
                      fixture.string() + " --out " + (dir / "anon.jsonl").string() +
                      " --stats " + (dir / "stats.json").string()) == 0,
              "ingest run failed");
    auto stats = json::parse(read_file(dir / "stats.json"));
    REQUIRE_C(stats["checkins"] == 50, "check-in count mismatch");
    REQUIRE_C(stats["pois"] == 40, "poi count mismatch");
    REQUIRE_C(stats["subcategories"] == 12, "subcategory count mismatch");
    REQUIRE_C(stats["users"] == 5, "user count mismatch");
}

void criterion_self_comparison() {
    const auto dir = work_dir();
    write_file(dir / "config.json", config_fixture());
    const std::string truth = truth_fixture();
    write_file(dir / "truth.jsonl", truth);
    write_file(dir / "self.jsonl", outcomes_from_records(truth, /*relabel=*/false));
    write_file(dir / "relabel.jsonl", outcomes_from_records(truth, /*relabel=*/true));

    REQUIRE_C(run_cli("evaluate --config " + (dir / "config.json").string() +
                      " --generated " + (dir / "self.jsonl").string() + " --truth " +
                      (dir / "truth.jsonl").string() + " --out " +
                      (dir / "self_report.json").string()) == 0,
              "self evaluate failed");
    auto self_report = json::parse(read_file(dir / "self_report.json"));
    for (const char* key : {"si", "sd", "cd", "sgd"})
        REQUIRE_C(self_report["jsd"][key].get<double>() < 1e-12,
                  std::string("self comparison must zero jsd_") + key);

    REQUIRE_C(run_cli("evaluate --config " + (dir / "config.json").string() +
                      " --generated " + (dir / "relabel.jsonl").string() + " --truth " +
                      (dir / "truth.jsonl").string() + " --out " +
                      (dir / "relabel_report.json").string()) == 0,
              "relabel evaluate failed");
    auto relabel_report = json::parse(read_file(dir / "relabel_report.json"));
    REQUIRE_C(relabel_report["jsd"]["cd"].get<double>() > 0.0,
              "relabelled categories must move jsd_cd");
    for (const char* key : {"si", "sd", "sgd"})
        REQUIRE_C(relabel_report["jsd"][key].get<double>() < 1e-12,
                  std::string("relabelling must not move jsd_") + key);
}

void criterion_active_users() {
    using namespace metrics;
    const TripRule rule{true, true, GridSpec{10, 35.0, 36.0, 139.0, 140.0}};
    auto active_day = [](const std::string& u) {
        return Trajectory{u, *parse_date("2019-10-12"),
                          {Step{LocalSeconds{*parse_date("2019-10-12")} +
                                    std::chrono::hours{9},
                                GeoPoint{35.2, 139.3}, "c", "s", "pa"},
                           Step{LocalSeconds{*parse_date("2019-10-12")} +
                                    std::chrono::hours{10},
                                GeoPoint{35.8, 139.9}, "c", "s", "pb"}}};
    };
    auto idle_day = [](const std::string& u) {
        return Trajectory{u, *parse_date("2019-10-12"),
                          {Step{LocalSeconds{*parse_date("2019-10-12")} +
                                    std::chrono::hours{9},
                                GeoPoint{35.2, 139.3}, "c", "s", "px"},
                           Step{LocalSeconds{*parse_date("2019-10-12")} +
                                    std::chrono::hours{10},
                                GeoPoint{35.2, 139.3}, "c", "s", "px"}}};
    };
    std::vector<Trajectory> generated, truth;
    for (const std::string u : {"u1", "u2", "u3", "u4"}) generated.push_back(active_day(u));
    for (const std::string u : {"u5", "u6", "u7", "u8"}) generated.push_back(idle_day(u));
    for (const std::string u : {"u1", "u2", "u3", "u5", "u6"}) truth.push_back(active_day(u));
    for (const std::string u : {"u4", "u7", "u8"}) truth.push_back(idle_day(u));
    auto scores = evaluate_active_users(generated, truth, rule);
    REQUIRE_C(scores.tp == 3 && scores.fp == 1 && scores.fn == 2 && scores.tn == 2,
              "confusion counts mismatch");
    REQUIRE_C(std::abs(scores.precision - 0.75) < 1e-9, "precision mismatch");
    REQUIRE_C(std::abs(scores.recall - 0.6) < 1e-9, "recall mismatch");
    REQUIRE_C(std::abs(scores.f1 - 2.0 * 0.75 * 0.6 / 1.35) < 1e-9, "f1 mismatch");
}

void criterion_performance_floor() {
    using namespace metrics;
    std::mt19937 rng(113);
    std::uniform_real_distribution<double> lat(35.0, 36.0), lon(139.0, 140.0);
    std::uniform_int_distribution<int> step_gap(5, 90);
    const char* cats[] = {"Retail", "Dining & Drinking", "Travel & Transport",
                          "Arts & Entertainment", "Business & Professional"};
    std::vector<Trajectory> trajs;
    std::size_t checkins = 0;
    int user = 0;
    while (checkins < 100000) {
        int minute = 6 * 60;
        std::vector<Step> steps;
        for (int s = 0; s < 10 && minute < 1380; ++s) {
            minute += step_gap(rng);
            const auto idx = static_cast<std::size_t>(s % 5);
            steps.push_back(Step{LocalSeconds{*parse_date("2020-04-07")} +
                                     std::chrono::minutes{minute},
                                 GeoPoint{lat(rng), lon(rng)}, cats[idx],
                                 std::string(cats[idx]) + " sub", "p"});
        }
        checkins += steps.size();
        trajs.push_back(Trajectory{"u" + std::to_string(user++), *parse_date("2020-04-07"),
                                   std::move(steps)});
    }
    GridSpec grid{10, 35.0, 36.0, 139.0, 140.0};
    const auto start = std::chrono::steady_clock::now();
    auto report = compare(trajs, trajs, grid, Granularity::subcategory);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    REQUIRE_C(report.jsd_si < 1e-12, "self comparison must be zero");
    REQUIRE_C(elapsed < std::chrono::seconds(5),
              "full metric suite over 100k check-ins exceeded 5 s");
}

bool criterion_live_smoke(std::string& note) {
    const char* key = std::getenv("ELLMOB_API_KEY");
    const char* base = std::getenv("ELLMOB_SMOKE_BASE_URL");
    if (key == nullptr || base == nullptr) {
        note = "skipped: set ELLMOB_API_KEY and ELLMOB_SMOKE_BASE_URL to enable";
        return true;
    }
    const char* model_env = std::getenv("ELLMOB_SMOKE_MODEL");
    const auto dir = work_dir() / "smoke";
    std::filesystem::create_directories(dir);
    auto config_doc = json::parse(config_fixture());
    config_doc["provider"]["base_url"] = base;
    config_doc["provider"]["model"] = model_env ? model_env : "gpt-4o-mini";
    config_doc["paths"]["cache_dir"] = (dir / "cache").string();
    write_file(dir / "config.json", config_doc.dump(2));
    write_file(dir / "users.jsonl", users_fixture(3));
    write_file(dir / "truth.jsonl", truth_fixture());
    write_file(dir / "raw_event.txt",
               "A powerful typhoon will cross the metropolitan area tonight; rail "
               "operators announced afternoon suspensions and authorities asked "
               "residents to avoid non-essential travel.");

    REQUIRE_C(run_cli("schema --config " + (dir / "config.json").string() + " --event " +
                      (dir / "raw_event.txt").string() + " --out " +
                      (dir / "ctx.json").string()) == 0,
              "live schema construction failed");
    REQUIRE_C(run_cli("generate --config " + (dir / "config.json").string() + " --users " +
                      (dir / "users.jsonl").string() + " --context " +
                      (dir / "ctx.json").string() + " --out " + (dir / "gen.jsonl").string()) ==
                  0,
              "live generate failed");
    REQUIRE_C(run_cli("evaluate --config " + (dir / "config.json").string() +
                      " --generated " + (dir / "gen.jsonl").string() + " --truth " +
                      (dir / "truth.jsonl").string() + " --out " +
                      (dir / "report.json").string()) == 0,
              "live evaluate failed");
    auto report = json::parse(read_file(dir / "report.json"));
    for (const char* k : {"si", "sd", "cd", "sgd"}) {
        const double v = report["jsd"][k].get<double>();
        REQUIRE_C(v >= 0.0 && v <= 1.0, "live jsd out of [0,1]");
    }
    note = "ran against " + std::string(base);
    return true;
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<void()> run;
    };
    const std::vector<Criterion> criteria{
        {"metric oracle equivalence (jsd)", criterion_jsd_oracle},
        {"haversine oracle agreement", criterion_haversine},
        {"sgd retention and grid tally", criterion_sgd_retention},
        {"alignment loop traces", criterion_algorithm_traces},
        {"per-user-day call budget", criterion_call_budget},
        {"ablation semantics", criterion_ablation_semantics},
        {"end-to-end determinism", criterion_end_to_end_determinism},
        {"dataset statistics fixture", criterion_dataset_statistics},
        {"self-comparison sanity", criterion_self_comparison},
        {"active-user scoring", criterion_active_users},
        {"performance floor (100k check-ins)", criterion_performance_floor},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        const auto start = std::chrono::steady_clock::now();
        try {
            criterion.run();
            const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - start)
                                .count();
            std::printf("[PASS] %s (%lld ms)\n", criterion.name,
                        static_cast<long long>(ms));
        } catch (const std::exception& ex) {
            ++failures;
            std::printf("[FAIL] %s: %s\n", criterion.name, ex.what());
        }
    }

    // Optional credentialed smoke run.
    try {
        std::string note;
        criterion_live_smoke(note);
        std::printf("[%s] live smoke: %s\n",
                    note.rfind("skipped", 0) == 0 ? "SKIP" : "PASS", note.c_str());
    } catch (const std::exception& ex) {
        ++failures;
        std::printf("[FAIL] live smoke: %s\n", ex.what());
    }

    std::filesystem::remove_all(work_dir());
    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
