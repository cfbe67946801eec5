#pragma once

#include "gradstab/objective.hpp"

#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace gradstab::cli {

/// INI-style experiment configuration: [section] blocks of key = value lines.
///
/// Getters take a default and write it back, so after a command has run the
/// tree holds the resolved configuration that gets embedded in its outputs.
class ExperimentConfig {
public:
    ExperimentConfig() = default;

    static ExperimentConfig load(const std::filesystem::path& path);
    static ExperimentConfig parse(const std::string& text);
    std::string to_ini() const;

    /// "section.key=value".
    void assign(const std::string& dotted);
    void set(const std::string& section, const std::string& key, const std::string& value);
    bool has(const std::string& section, const std::string& key) const;

    std::string get(const std::string& section, const std::string& key, const std::string& fallback);
    double get_double(const std::string& section, const std::string& key, double fallback);
    int get_int(const std::string& section, const std::string& key, int fallback);
    bool get_bool(const std::string& section, const std::string& key, bool fallback);
    /// Comma-separated numbers; empty when the key is absent.
    std::vector<double> get_list(const std::string& section, const std::string& key);

    /// Every key of a section, as strings.
    ParamMap section(const std::string& name) const;

    nlohmann::json to_json() const;

    friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return a.tree_ == b.tree_; }

private:
    boost::property_tree::ptree tree_;
};

}  // namespace gradstab::cli
