#pragma once

#include "config.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace gradstab::cli {

enum ExitCode : int { ok = 0, config_error = 2, numerical_failure = 3, infeasible = 4 };

enum class Format { csv, json };

struct Context {
    ExperimentConfig config;
    /// Output directory; nothing is written when unset.
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    Format format = Format::csv;
    std::ostream* out = nullptr;
};

int cmd_certify_beta3(Context& ctx);
/// beta as a decimal or a fraction "p/q"; falls back to [decompose] beta.
int cmd_decompose(Context& ctx, const std::optional<std::string>& beta);
int cmd_run(Context& ctx);
int cmd_counterexample(Context& ctx, std::optional<int> k);
int cmd_order_study(Context& ctx);
int cmd_multivalued_demo(Context& ctx);

/// Runs body and maps exceptions to exit codes, reporting them on err.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace gradstab::cli
