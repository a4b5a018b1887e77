#include "evmob/templates.hpp"

#include "evmob/errors.hpp"

#include <fstream>
#include <sstream>

namespace evmob::prompts {

std::string render(std::string_view tpl, const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(tpl.size());
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        std::size_t open = tpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tpl.substr(pos));
            break;
        }
        std::size_t close = tpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(tpl.substr(pos));
            break;
        }
        out.append(tpl.substr(pos, open - pos));
        std::string key{tpl.substr(open + 2, close - open - 2)};
        auto it = slots.find(key);
        if (it != slots.end())
            out.append(it->second);
        else
            out.append(tpl.substr(open, close + 2 - open));
        pos = close + 2;
    }
    return out;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read template file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    TemplateSet set;
    set.event_schema = read_file(dir / "event_schema.txt");
    set.initial_generation = read_file(dir / "initial_generation.txt");
    set.regeneration = read_file(dir / "regeneration.txt");
    set.pattern_gist = read_file(dir / "pattern_gist.txt");
    set.event_gist = read_file(dir / "event_gist.txt");
    set.action_gist = read_file(dir / "action_gist.txt");
    set.conflict_audit = read_file(dir / "conflict_audit.txt");
    return set;
}

} // namespace evmob::prompts
