#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "clv/cli.hpp"
#include "clv/config.hpp"

using namespace clv;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "clverify");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("clv_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path write_config(const std::filesystem::path& dir, const std::string& name,
                                   std::size_t total) {
  const auto path = dir / (name + ".cfg");
  std::ofstream(path) << R"({
  // tiny run
  "name": ")" << name << R"(",
  "system": "vdp",
  "formula": "vdp_roa",
  "grid": { "min": [-3, -3], "max": [3, 3], "count": [9, 9] },
  "sampler": { "mode": "batch", "batch_size": 5, "total": )"
                      << total << R"(, "initial": 10 },
  "replicates": 2,
  "estimators": { "kfold": true, "k": 3, "validation": true },
  "output": ")" << (dir / name).string() << R"(",
  "cache_dir": ")" << (dir / "cache").string() << R"("
})";
  return path;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("label prints the verdict") {
    auto r = cli({"label", "vdp", "vdp_roa", "0", "0"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.rfind("+1 safe", 0) == 0);
    r = cli({"label", "vdp", "vdp_roa", "3", "3"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.rfind("-1 unsafe (diverged)", 0) == 0);
    r = cli({"--quiet", "label", "clmrac", "phi_bound", "0", "0"});
    CHECK(r.code == kExitOk);
    CHECK(r.out == "+1\n");
    r = cli({"label", "vdp", "vdp_roa", "0"});
    CHECK(r.code == kExitRuntime);
    r = cli({"label", "nosuch", "vdp_roa", "0", "0"});
    CHECK(r.code == kExitRuntime);
  }

  TEST_CASE("config errors exit with code 2") {
    const auto dir = scratch_dir("cfg");
    std::ofstream(dir / "missing.cfg") << R"({ "formula": "vdp_roa", "grid": { "min": [0], "max": [1], "count": [2] } })";
    auto r = cli({"run", (dir / "missing.cfg").string()});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("system") != std::string::npos);

    std::ofstream(dir / "syntax.cfg") << "{\n  \"system\": \"vdp\",\n  \"formula\": \n}\n";
    r = cli({"run", (dir / "syntax.cfg").string()});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("line") != std::string::npos);

    r = cli({"run"});
    CHECK(r.code == kExitConfig);
    r = cli({"bogus"});
    CHECK(r.code == kExitConfig);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("runs are reproducible and comparable") {
    const auto dir = scratch_dir("run");
    const auto cfg = write_config(dir, "tiny", 30);
    auto r = cli({"--quiet", "run", cfg.string()});
    REQUIRE(r.code == kExitOk);
    const std::string first = slurp(dir / "tiny" / "results.csv");
    CHECK(first.rfind("# clverify results v1", 0) == 0);
    for (const char* f : {"replicates.csv", "timing.json", "model.txt", "run.json"}) {
      CHECK(std::filesystem::exists(dir / "tiny" / f));
    }
    r = cli({"--quiet", "--jobs", "2", "run", cfg.string()});
    REQUIRE(r.code == kExitOk);
    CHECK(slurp(dir / "tiny" / "results.csv") == first);
    CHECK(slurp(dir / "tiny" / "replicates.csv").size() > 0);

    r = cli({"--quiet", "--seed", "5", "--out", (dir / "tiny5").string(), "run", cfg.string()});
    REQUIRE(r.code == kExitOk);

    const auto merged = dir / "merged.csv";
    r = cli({"--out", merged.string(), "compare", (dir / "tiny").string(), (dir / "tiny5").string(),
             "--svg", (dir / "chart.svg").string()});
    CHECK(r.code == kExitOk);
    const std::string table = slurp(merged);
    CHECK(table.find("family,iteration,n_labeled,mean_error,sigma") != std::string::npos);
    CHECK(slurp(dir / "chart.svg").find("<svg") != std::string::npos);

    r = cli({"compare", (dir / "tiny").string()});
    CHECK(r.code == kExitRuntime);

    const auto longer = write_config(dir, "longer", 40);
    REQUIRE(cli({"--quiet", "run", longer.string()}).code == kExitOk);
    r = cli({"compare", (dir / "tiny").string(), (dir / "longer").string()});
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("tiny=5") != std::string::npos);
    CHECK(r.err.find("longer=7") != std::string::npos);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("shipped configs parse") {
    const std::filesystem::path root = CLV_SOURCE_DIR;
    const ExperimentConfig vdp = load_config(root / "configs" / "vdp_active.cfg");
    CHECK(vdp.iterations() == 20);
    CHECK(vdp.grid.total() == 16000);
    for (const auto& entry : std::filesystem::directory_iterator(root / "configs")) {
      CAPTURE(entry.path().string());
      CHECK_NOTHROW(load_config(entry.path()).validate());
    }
  }
}
