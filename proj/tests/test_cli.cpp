#include "doctest.h"

#include "bsdelab/experiment.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace bsdelab;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const std::string& env = {})
{
    const std::string cmd = env + (env.empty() ? "" : " ") + BSDELAB_CLI_PATH + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& f)
{
    std::ifstream is(f, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const auto d = fs::temp_directory_path() / ("bsdelab-cli-" + name);
    fs::remove_all(d);
    return d;
}

} // namespace

TEST_CASE("exit codes")
{
    const auto out = scratch("codes");
    CHECK(run("--scenario unknown --seed 1 --out " + out.string()) == 2);
    CHECK(run("--scenario ex3.1-strict --out " + out.string()) == 2);
    CHECK(run("--scenario ex3.1-strict --seed 1 --steps 7 --out " + out.string()) == 2);
    CHECK(run("--scenario ex3.1-strict --seed 1 --backend nope --out " + out.string()) == 2);
    CHECK(run("--scenario ex3.1-strict --seed 1 --out " + out.string()) == 0);
    CHECK(fs::exists(out / "ex3.1-strict.json"));
    CHECK(run("--scenario cole-hopf --seed 1 --out " + out.string()) == 0);
    // an absurdly tight tolerance must surface as an assertion failure
    CHECK(run("--scenario zero-generator --seed 1 --paths 20000 --tolerance-scale 1e-6 --out " + out.string()) == 1);
    fs::remove_all(out);
}

TEST_CASE("identical config and seed give identical reports")
{
    const auto a = scratch("repro-a"), b = scratch("repro-b");
    REQUIRE(run("--scenario zero-generator --seed 3 --paths 20000 --out " + a.string()) == 0);
    REQUIRE(run("--scenario zero-generator --seed 3 --paths 20000 --out " + b.string()) == 0);
    CHECK(slurp(a / "zero-generator.json") == slurp(b / "zero-generator.json"));
    CHECK(slurp(a / "zero-generator-grid.csv") == slurp(b / "zero-generator-grid.csv"));
    REQUIRE(run("--scenario zero-generator --seed 3 --paths 20000 --workers 4 --out " + b.string()) == 0);
    CHECK(slurp(a / "zero-generator.json") == slurp(b / "zero-generator.json"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("environment seed overrides the flag")
{
    const auto a = scratch("env-a"), b = scratch("env-b");
    REQUIRE(run("--scenario zero-generator --seed 5 --paths 20000 --out " + a.string()) == 0);
    REQUIRE(run("--scenario zero-generator --seed 99 --paths 20000 --out " + b.string(), "BSDELAB_SEED=5") == 0);
    CHECK(slurp(a / "zero-generator.json") == slurp(b / "zero-generator.json"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("config file and generic solve")
{
    const auto d = scratch("config");
    fs::create_directories(d);
    {
        std::ofstream f(d / "run.cfg");
        f << "# generic solve\nscenario = solve\nseed = 2\nsteps = 100\ngenerator = abs-z\ngenerator.gamma = 1\n"
             "terminal = brownian\nout = "
          << (d / "o").string() << "\n";
    }
    CHECK(run("--config " + (d / "run.cfg").string()) == 0);
    const auto j = Json::parse(slurp(d / "o" / "solve.json"));
    CHECK(std::abs(j["margins"]["y0"].get<double>() - 1) <= 2e-2);
    {
        std::ofstream f(d / "bad.cfg");
        f << "scenario = solve\nseed = 2\nwidgets = 4\n";
    }
    CHECK(run("--config " + (d / "bad.cfg").string()) == 2);
    fs::remove_all(d);
}

TEST_CASE("config validation messages name the field")
{
    ExperimentConfig c;
    c.scenario = "cole-hopf";
    try {
        c.validate();
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("seed") != std::string::npos);
    }
    c.seed = 1;
    c.tolerance_scale = -1;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("tolerance_scale"), ValidationError);
    CHECK_THROWS_WITH_AS(c.set("steps", "abc"), doctest::Contains("steps"), ValidationError);
    c.tolerance_scale = 1;
    c.scenario = "solve";
    c.generator = "nope";
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("generator"), ValidationError);
}

TEST_CASE("open problems are observational")
{
    const auto out = scratch("open");
    for (const char* s : {"open-5.1", "open-5.3"}) {
        CAPTURE(s);
        CHECK(run(std::string("--scenario ") + s + " --seed 1 --paths 4000 --out " + out.string()) == 0);
        const auto j = Json::parse(slurp(out / (std::string(s) + ".json")));
        CHECK(j["tag"] == "exploratory - no theoretical claim");
        CHECK(j["assertions"].empty());
    }
    CHECK(fs::exists(out / "open-5.1-trend.csv"));
    fs::remove_all(out);
}

TEST_CASE("terminal catalog")
{
    for (const auto& t : terminal_tags()) CHECK_NOTHROW(make_terminal(t)(0.3));
    CHECK(make_terminal("clip", {{"c", 1.0}})(5) == 1.0);
    CHECK(make_terminal("constant", {{"value", 2.0}})(5) == 2.0);
    CHECK_THROWS_AS(make_terminal("brownian", {{"c", 1.0}}), ValidationError);
    CHECK_THROWS_AS(make_terminal("zzz"), ValidationError);
}
