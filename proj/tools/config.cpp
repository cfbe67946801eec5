#include "config.hpp"

#include "gradstab/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <fmt/format.h>

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gradstab::cli {

namespace pt = boost::property_tree;

namespace {

pt::path key_path(const std::string& section, const std::string& key) {
    return pt::path(section + '\x1f' + key, '\x1f');
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig c;
    std::istringstream in(text);
    try {
        pt::read_ini(in, c.tree_);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
    }
    for (const auto& [name, sec] : c.tree_)
        if (sec.empty() && !sec.data().empty())
            throw ConfigError(fmt::format("config key '{}' is outside any [section]", name));
    return c;
}

std::string ExperimentConfig::to_ini() const {
    std::ostringstream out;
    pt::write_ini(out, tree_);
    return out.str();
}

void ExperimentConfig::assign(const std::string& dotted) {
    const auto eq = dotted.find('=');
    const auto dot = dotted.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq || dot == 0 || dot + 1 == eq)
        throw ConfigError(fmt::format("override '{}' is not of the form section.key=value", dotted));
    set(dotted.substr(0, dot), dotted.substr(dot + 1, eq - dot - 1), dotted.substr(eq + 1));
}

void ExperimentConfig::set(const std::string& section, const std::string& key, const std::string& value) {
    tree_.put(key_path(section, key), value);
}

bool ExperimentConfig::has(const std::string& section, const std::string& key) const {
    return static_cast<bool>(tree_.get_optional<std::string>(key_path(section, key)));
}

std::string ExperimentConfig::get(const std::string& section, const std::string& key, const std::string& fallback) {
    if (auto v = tree_.get_optional<std::string>(key_path(section, key))) return *v;
    set(section, key, fallback);
    return fallback;
}

double ExperimentConfig::get_double(const std::string& section, const std::string& key, double fallback) {
    if (!has(section, key)) {
        set(section, key, fmt::format("{}", fallback));  // shortest round-trip form
        return fallback;
    }
    const std::string s = get(section, key, "");
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("[{}] {} = '{}' is not a number", section, key, s));
    }
}

int ExperimentConfig::get_int(const std::string& section, const std::string& key, int fallback) {
    const double v = get_double(section, key, fallback);
    if (v != std::floor(v) || std::abs(v) > 2e9)
        throw ConfigError(fmt::format("[{}] {} must be an integer", section, key));
    return static_cast<int>(v);
}

bool ExperimentConfig::get_bool(const std::string& section, const std::string& key, bool fallback) {
    const std::string s = get(section, key, fallback ? "true" : "false");
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(fmt::format("[{}] {} = '{}' is not a boolean", section, key, s));
}

std::vector<double> ExperimentConfig::get_list(const std::string& section, const std::string& key) {
    std::vector<double> out;
    if (!has(section, key)) return out;
    std::stringstream ss(get(section, key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("[{}] {}: '{}' is not a number", section, key, item));
        }
    }
    return out;
}

ParamMap ExperimentConfig::section(const std::string& name) const {
    ParamMap out;
    if (auto sec = tree_.get_child_optional(pt::path(name, '\x1f')))
        for (const auto& [k, v] : *sec) out[k] = v.data();
    return out;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, sec] : tree_) {
        nlohmann::json s = nlohmann::json::object();
        for (const auto& [k, v] : sec) s[k] = v.data();
        j[name] = s;
    }
    return j;
}

}  // namespace gradstab::cli
