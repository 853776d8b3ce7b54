#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("tarsp_cli_" + std::to_string(std::rand()) + "_" +
                                       std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + TARSP_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

long lines(const std::string& path) {
  const std::string s = slurp(path);
  return static_cast<long>(std::count(s.begin(), s.end(), '\n'));
}

const char* kSmallDesign =
    R"({"item": "b", "rows": 8, "cols": 8, "seed": 3,
        "missing": {"total_missing": 10, "block_rows": 2, "block_cols": 2}})";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("simulate, fit and predict") {
    Workspace w;
    spit(w / "design.json", kSmallDesign);
    REQUIRE(run("simulate --design " + w / "design.json" + " --out " + w / "sim") == 0);
    for (const char* f : {"dataset.csv", "truth.csv", "mask.csv", "adjacency.txt", "coords.csv", "design.json"}) {
      CHECK(fs::exists(w.dir / "sim" / f));
    }
    CHECK(lines(w / "sim/dataset.csv") == 65);

    const std::string data = " --data " + w / "sim/dataset.csv" + " --adjacency " + w / "sim/adjacency.txt";
    REQUIRE(run("fit" + data + " --grid 1 --draws 1 --out " + w / "one") == 0);
    CHECK(lines(w / "one/posterior.csv") == 2);

    REQUIRE(run("fit" + data + " --grid 0.1:10:0.1 --draws 200 --seed 5 --out " + w / "fit") == 0);
    const auto summary = nlohmann::json::parse(slurp(w / "fit/summary.json"));
    CHECK(summary["grid_mass"].size() == 100);
    CHECK(lines(w / "fit/posterior.csv") == 201);
    CHECK(fs::exists(w.dir / "fit" / "fit.json"));
    CHECK(fs::exists(w.dir / "fit" / "run_log.json"));

    REQUIRE(run("predict --fit " + w / "fit" + " --truth " + w / "sim/truth.csv" + " --samples --out " + w / "pred") ==
            0);
    CHECK(lines(w / "pred/predictions.csv") == 11);
    CHECK(lines(w / "pred/samples.csv") == 201);
    const auto scores = nlohmann::json::parse(slurp(w / "pred/scores.json"));
    CHECK(scores.contains("scores"));
    CHECK(scores["scores"]["rmse"].get<double>() > 0.0);

    // Same inputs, same bytes.
    REQUIRE(run("fit" + data + " --grid 0.1:10:0.1 --draws 200 --seed 5 --out " + w / "fit2") == 0);
    CHECK(slurp(w / "fit/posterior.csv") == slurp(w / "fit2/posterior.csv"));
    REQUIRE(run("predict --fit " + w / "fit2" + " --truth " + w / "sim/truth.csv" + " --samples --out " + w / "pred2") ==
            0);
    CHECK(slurp(w / "pred/samples.csv") == slurp(w / "pred2/samples.csv"));
    CHECK(slurp(w / "pred/predictions.csv") == slurp(w / "pred2/predictions.csv"));

    // Prediction without truth still succeeds.
    CHECK(run("predict --fit " + w / "fit" + " --out " + w / "pred3") == 0);
    CHECK(fs::exists(w.dir / "pred3" / "predictions.csv"));
  }

  TEST_CASE("other families through the command line") {
    Workspace w;
    spit(w / "design.json", kSmallDesign);
    REQUIRE(run("simulate --design " + w / "design.json" + " --out " + w / "sim") == 0);
    const std::string data = " --data " + w / "sim/dataset.csv" + " --adjacency " + w / "sim/adjacency.txt";
    CHECK(run("fit" + data + " --family car --rho-grid=-0.5,0,0.5 --draws 50 --out " + w / "car") == 0);
    CHECK(run("fit" + data + " --family tar-s --grid 0.5,1 --draws 50 --out " + w / "tars") == 0);
    CHECK(run("fit --data " + w / "sim/dataset.csv" + " --coords " + w / "sim/coords.csv" +
              " --family nngp-tar --neighbors 4 --grid 1 --draws 50 --out " + w / "nngp") == 0);
    CHECK(run("predict --fit " + w / "nngp" + " --out " + w / "nngp_pred") == 0);
  }

  TEST_CASE("error exit codes") {
    Workspace w;
    spit(w / "bad.json", "{\"rows\": ");
    CHECK(run("simulate --design " + w / "bad.json" + " --out " + w / "x") == 2);
    spit(w / "design.json", kSmallDesign);
    REQUIRE(run("simulate --design " + w / "design.json" + " --out " + w / "sim") == 0);
    const std::string data = " --data " + w / "sim/dataset.csv" + " --adjacency " + w / "sim/adjacency.txt";
    CHECK(run("fit" + data + " --family tar-q --out " + w / "f") == 2);
    CHECK(run("predict --fit " + w / "nowhere" + " --out " + w / "p") == 2);
    CHECK(run("no-such-command") == 2);
    CHECK(run("--help") == 0);

    // Duplicate covariate column: rank-deficient design.
    std::ifstream is(w / "sim/dataset.csv");
    std::ofstream os(w / "dup.csv");
    std::string line;
    std::getline(is, line);
    os << line << ",x1b\n";
    while (std::getline(is, line)) {
      os << line << "," << line.substr(line.rfind(',') + 1) << "\n";
    }
    os.close();
    CHECK(run("fit --data " + w / "dup.csv" + " --adjacency " + w / "sim/adjacency.txt" + " --grid 1 --out " +
              w / "dup") == 3);
  }

  TEST_CASE("motivate and compare") {
    Workspace w;
    REQUIRE(run("motivate --side 10 --replicates 120 --burn-in 20 --thin 2 --out " + w / "mot") == 0);
    CHECK(lines(w / "mot/correlation.csv") == 100);
    const std::string first = slurp(w / "mot/correlation.csv").substr(0, slurp(w / "mot/correlation.csv").find('\n'));
    CHECK(std::count(first.begin(), first.end(), ',') == 99);

    spit(w / "design.json", kSmallDesign);
    REQUIRE(run("compare --design " + w / "design.json" + " --families tar-c,car --rho-grid=-0.5,0,0.5" +
                " --replicates 1 --draws 50 --out " + w / "cmp") == 0);
    CHECK(lines(w / "cmp/replicates.csv") == 3);
    CHECK(fs::exists(w.dir / "cmp" / "metrics_long.csv"));
    CHECK(fs::exists(w.dir / "cmp" / "medians.json"));
  }
}
