#include "commands.hpp"
#include "config.hpp"

#include <doctest.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace gradstab;
using namespace gradstab::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("gradstab_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

template <class Body>
Outcome invoke(Context ctx, Body body) {
    std::ostringstream out, err;
    ctx.out = &out;
    const int code = guarded([&] { return body(ctx); }, err);
    return {code, out.str(), err.str()};
}

int run_tool(const std::string& args) {
    const std::string cmd = std::string(GRADSTAB_TOOL) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmallRun = R"([energy]
name = allen-cahn
n = 16
h = 0.0625
well_scale = 16
[scheme]
k = 3
dt = 1.5
steps = 200
stop_tol = 0
[init]
bootstrap = ramp-up
u0 = 0.1
cosine_amplitude = 0.2
)";

}  // namespace

TEST_CASE("config round-trips through the file format") {
    auto c = ExperimentConfig::parse(kSmallRun);
    CHECK(c.get("energy", "name", "") == "allen-cahn");
    CHECK(c.get_double("scheme", "dt", 0.0) == 1.5);
    CHECK(c.get_int("scheme", "steps", 0) == 200);
    CHECK(c.get_double("audit", "beta", 0.875) == 0.875);  // default written back
    CHECK(c.has("audit", "beta"));
    c.assign("scheme.solver_tol=1e-11");
    CHECK(c.get_double("scheme", "solver_tol", 0.0) == 1e-11);

    const auto again = ExperimentConfig::parse(c.to_ini());
    CHECK(again == c);
    CHECK(again.to_ini() == c.to_ini());
    CHECK(again.to_json() == c.to_json());
}

TEST_CASE("config rejects malformed input") {
    CHECK_THROWS_AS(ExperimentConfig::parse("[scheme\nk = 3\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::parse("k = 3\n"), ConfigError);
    auto c = ExperimentConfig::parse("[scheme]\ndt = fast\nflag = maybe\nlist = 1,x\n");
    CHECK_THROWS_AS(c.get_double("scheme", "dt", 0.1), ConfigError);
    CHECK_THROWS_AS(c.get_bool("scheme", "flag", false), ConfigError);
    CHECK_THROWS_AS(c.get_list("scheme", "list"), ConfigError);
    CHECK_THROWS_AS(c.assign("nodot=1"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("certify-beta3 succeeds") {
    const auto r = invoke({}, cmd_certify_beta3);
    CHECK(r.code == ExitCode::ok);
    CHECK(r.out.find("95/96") != std::string::npos);
    CHECK(r.out.find("certified") != std::string::npos);
}

TEST_CASE("decompose exit codes") {
    auto dec = [](std::string beta) {
        return invoke({}, [beta](Context& c) { return cmd_decompose(c, beta); });
    };
    CHECK(dec("5/6").code == ExitCode::ok);
    CHECK(dec("0").code == ExitCode::ok);
    CHECK(dec("95/96").code == ExitCode::ok);
    const auto bad = dec("0.99");
    CHECK(bad.code == ExitCode::infeasible);
    CHECK(bad.err.find("95/96") != std::string::npos);
    CHECK(dec("97/96").code == ExitCode::infeasible);
    CHECK(dec("-0.5").code == ExitCode::config_error);
    CHECK(dec("abc").code == ExitCode::config_error);
}

TEST_CASE("run reports the regime and writes data") {
    Context ctx;
    ctx.config = ExperimentConfig::parse(kSmallRun);
    ctx.out_dir = scratch("run");
    const auto r = invoke(ctx, cmd_run);
    CHECK(r.code == ExitCode::ok);
    CHECK(r.out.find("regime: unique") != std::string::npos);
    CHECK(fs::exists(*ctx.out_dir / "trajectory.csv"));
    CHECK(fs::exists(*ctx.out_dir / "audit.csv"));
    const auto summary = nlohmann::json::parse(slurp(*ctx.out_dir / "audit.summary.json"));
    CHECK(summary["config"]["scheme"]["dt"] == "1.5");
    CHECK(summary["descent_ok"] == true);

    ctx.format = Format::json;
    ctx.out_dir = scratch("run_json");
    CHECK(invoke(ctx, cmd_run).code == ExitCode::ok);
    const auto traj = nlohmann::json::parse(slurp(*ctx.out_dir / "trajectory.json"));
    CHECK(traj["states"].size() == 203);
}

TEST_CASE("run on a barrier energy prints the barrier regime") {
    Context ctx;
    ctx.config = ExperimentConfig::parse("[energy]\nname = barrier\nk = 3\ndt = 0.5\n[scheme]\nk = 3\ndt = 0.5\nsteps = 20\n"
                                         "selection = index:1\n[init]\nbootstrap = exact-list\nstates = -1;1;-1\n");
    const auto r = invoke(ctx, cmd_run);
    CHECK(r.code == ExitCode::ok);
    CHECK(r.out.find("regime: barrier") != std::string::npos);
    CHECK(r.out.find("not certifiable") != std::string::npos);
}

TEST_CASE("zero-step run emits only the initial states") {
    Context ctx;
    ctx.config = ExperimentConfig::parse(kSmallRun);
    ctx.config.assign("scheme.steps=0");
    ctx.out_dir = scratch("zero");
    CHECK(invoke(ctx, cmd_run).code == ExitCode::ok);
    std::istringstream csv(slurp(*ctx.out_dir / "trajectory.csv"));
    std::string line;
    int lines = 0;
    while (std::getline(csv, line)) ++lines;
    CHECK(lines == 1 + 3);  // header plus the k initial states
}

TEST_CASE("config errors map to exit code 2") {
    Context ctx;
    ctx.config = ExperimentConfig::parse("[energy]\nname = nonexistent\n");
    CHECK(invoke(ctx, cmd_run).code == ExitCode::config_error);
    ctx.config = ExperimentConfig::parse("[scheme]\nk = 5\n");
    CHECK(invoke(ctx, cmd_run).code == ExitCode::config_error);
    ctx.config = ExperimentConfig::parse("[scheme]\ndt = -1\n");
    CHECK(invoke(ctx, cmd_run).code == ExitCode::config_error);
    ctx.config = ExperimentConfig::parse("[init]\nbootstrap = exact-list\n");
    CHECK(invoke(ctx, cmd_run).code == ExitCode::config_error);
    CHECK(invoke({}, [](Context& c) { return cmd_counterexample(c, 4); }).code == ExitCode::config_error);
    ctx.config = ExperimentConfig::parse("[study]\ndts = 0.1\nhorizon = 0.05\n");
    CHECK(invoke(ctx, cmd_order_study).code == ExitCode::config_error);
}

TEST_CASE("counterexample reports lambda_k") {
    for (int k = 1; k <= 3; ++k) {
        Context ctx;
        ctx.config = ExperimentConfig::parse("[counterexample]\nsteps = 200\n");
        const auto r = invoke(ctx, [k](Context& c) { return cmd_counterexample(c, k); });
        CHECK(r.code == ExitCode::ok);
        const char* lambda[] = {"2", "4", "20/3"};
        CHECK(r.out.find(fmt::format("lambda_{} = {}", k, lambda[k - 1])) != std::string::npos);
    }
}

TEST_CASE("order-study reports slopes and handles a single dt") {
    Context ctx;
    ctx.config = ExperimentConfig::parse("[energy]\nname = quadratic\nlambda = 1\n[scheme]\nk = 3\n"
                                         "[study]\ndts = 0.1,0.05,0.025,0.0125\nhorizon = 1\n");
    const auto r = invoke(ctx, cmd_order_study);
    CHECK(r.code == ExitCode::ok);
    CHECK(r.out.find("slope") != std::string::npos);

    ctx.config = ExperimentConfig::parse("[energy]\nname = quadratic\n[study]\ndts = 0.1\nhorizon = 1\n");
    const auto single = invoke(ctx, cmd_order_study);
    CHECK(single.code == ExitCode::ok);
    CHECK(single.out.find("undefined") != std::string::npos);
}

TEST_CASE("multivalued demo finds branches, and singletons in the unique regime") {
    Context ctx;
    ctx.config = ExperimentConfig::parse("[scheme]\nsteps = 60\n");
    ctx.out_dir = scratch("multi");
    const auto r = invoke(ctx, cmd_multivalued_demo);
    CHECK(r.code == ExitCode::ok);
    const auto j = nlohmann::json::parse(slurp(*ctx.out_dir / "multivalued.json"));
    REQUIRE(j.contains("branches"));
    CHECK(j["branches"].size() >= 2);
    for (const auto& b : j["branches"]) CHECK(b["descent_ok"] == true);

    Context uniq;
    uniq.config = ExperimentConfig::parse("[scheme]\ndt = 1.0\nsteps = 30\n");
    uniq.out_dir = scratch("multi_unique");
    CHECK(invoke(uniq, cmd_multivalued_demo).code == ExitCode::ok);
    const auto ju = nlohmann::json::parse(slurp(*uniq.out_dir / "multivalued.json"));
    CHECK_FALSE(ju.contains("branches"));
}

TEST_CASE("the tool binary: exit codes and byte-identical reruns") {
    CHECK(run_tool("certify-beta3") == 0);
    CHECK(run_tool("decompose --beta 0.99") == 4);
    CHECK(run_tool("decompose --beta 5/6") == 0);
    CHECK(run_tool("--config /nonexistent.ini run") == 2);
    CHECK(run_tool("counterexample --k 7") == 2);
    CHECK(run_tool("--set broken run") == 2);
    CHECK(run_tool("") == 2);

    const auto a = scratch("rerun_a"), b = scratch("rerun_b");
    const std::string cfg = (scratch("rerun_cfg") / "run.ini").string();
    std::ofstream(cfg) << kSmallRun;
    for (const auto& dir : {a, b}) {
        CHECK(run_tool(fmt::format("--config {} --seed 5 --out {} run", cfg, dir.string())) == 0);
        CHECK(run_tool(fmt::format("--seed 5 --out {} --set scheme.steps=40 multivalued-demo", dir.string())) == 0);
        CHECK(run_tool(fmt::format("--out {} --format json counterexample --k 2", dir.string())) == 0);
    }
    int files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        ++files;
        CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    }
    CHECK(files >= 5);
}
