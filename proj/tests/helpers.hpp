#pragma once

#include "evmob/model.hpp"
#include "evmob/templates.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

namespace evmob::test {

inline std::filesystem::path source_dir() { return EVMOB_SOURCE_DIR; }

inline const prompts::TemplateSet& templates() {
    static prompts::TemplateSet set = prompts::TemplateSet::load(source_dir() / "templates");
    return set;
}

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() /
               ("evmob_test_" + name + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::filesystem::path file(const std::string& name) const { return path / name; }
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline LocalSeconds at(int year, unsigned month, unsigned day, int hour, int minute,
                       int second = 0) {
    using namespace std::chrono;
    return LocalSeconds{local_days{year_month_day{std::chrono::year{year},
                                                  std::chrono::month{month},
                                                  std::chrono::day{day}}}} +
           hours{hour} + minutes{minute} + seconds{second};
}

inline Step step_at(LocalSeconds time, double lat, double lon,
                    const std::string& category = "Retail",
                    const std::string& subcategory = "Convenience Store",
                    const std::string& poi = "") {
    return Step{time, GeoPoint{lat, lon}, category, subcategory, poi};
}

inline Trajectory day_traj(const std::string& user, LocalDays date,
                           std::vector<Step> steps) {
    return Trajectory{user, date, std::move(steps)};
}

} // namespace evmob::test
