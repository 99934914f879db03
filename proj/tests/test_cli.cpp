#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "pbdn/dataset.hpp"
#include "pbdn/serialize.hpp"

using namespace pbdn;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class TempDir {
 public:
  TempDir() : path_(std::filesystem::temp_directory_path() / "pbdn_cli_test") {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string field;
  while (std::getline(s, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(invoke({}).code == cli::kExitUsage);
  CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
  CHECK(invoke({"train", "--data", "x.csv"}).code == cli::kExitUsage);
  CHECK(invoke({"train", "--data", "x.csv", "--out", "m.json", "--inference", "vb"}).code ==
        cli::kExitUsage);
  CHECK(invoke({"train", "--data", "x.csv", "--out", "m.json", "--kmax", "-3"}).code == cli::kExitUsage);
  CHECK(invoke({"synth", "--kind", "moons"}).code == cli::kExitUsage);
  const Run help = invoke({"--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("train") != std::string::npos);
}

TEST_CASE("runtime failures exit with code 1") {
  TempDir dir;
  const Run r = invoke({"train", "--data", dir / "missing.csv", "--out", dir / "m.json"});
  CHECK(r.code == cli::kExitFailure);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(invoke({"eval", "--model", dir / "missing.json", "--data", dir / "missing.csv"}).code ==
        cli::kExitFailure);
}

TEST_CASE("synth, train, eval, inspect and contour") {
  TempDir dir;
  REQUIRE(invoke({"synth", "--kind", "blobs", "--n-per-class", "60", "--separation", "5", "--seed", "3",
                  "--out", dir / "blobs.csv"})
              .code == cli::kExitOk);
  const Dataset blobs = load_dense(dir / "blobs.csv");
  CHECK(blobs.size() == 120);

  const Run train = invoke({"train", "--data", dir / "blobs.csv", "--inference", "sgd", "--batches", "300",
                            "--max-layers", "1", "--seed", "5", "--out", dir / "m.json", "--report",
                            dir / "train.json"});
  REQUIRE(train.code == cli::kExitOk);
  CHECK(train.out.find("criterion trace:") != std::string::npos);
  const PbdnStack stack = load_stack(dir / "m.json");
  CHECK(stack.selected_depth == 1);
  CHECK(stack.standardization.has_value());
  const auto report = nlohmann::json::parse(slurp(dir / "train.json"));
  CHECK(report.at("depth") == 1);
  CHECK(report.at("error_rate").get<double>() <= 0.05);

  const Run eval = invoke({"eval", "--model", dir / "m.json", "--data", dir / "blobs.csv", "--report",
                           dir / "eval.json"});
  REQUIRE(eval.code == cli::kExitOk);
  const auto ev = nlohmann::json::parse(slurp(dir / "eval.json"));
  CHECK(ev.at("error_rate") == report.at("error_rate"));
  CHECK(ev.at("layer_widths") == report.at("layer_widths"));

  const Run inspect = invoke({"inspect", "--model", dir / "m.json", "--data", dir / "blobs.csv"});
  REQUIRE(inspect.code == cli::kExitOk);
  CHECK(inspect.out.find("layer widths: 2 " + std::to_string(stack.layer_widths[1])) != std::string::npos);
  CHECK(inspect.out.find("subtypes (pos):") != std::string::npos);

  const Run contour = invoke({"contour", "--model", dir / "m.json", "--grid-n", "5", "--bounds",
                              "-2,3,-1,4"});
  REQUIRE(contour.code == cli::kExitOk);
  std::stringstream lines(contour.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "x1,x2,prob_one_pos,prob_one_neg,pair_prob,violated_count_pos,violated_count_neg");
  std::size_t rows = 0;
  bool saw_low = false;
  bool saw_high = false;
  while (std::getline(lines, line)) {
    const auto f = split_line(line);
    REQUIRE(f.size() == 7);
    const double pp = std::stod(f[2]);
    const double pn = std::stod(f[3]);
    CHECK(std::stod(f[4]) == doctest::Approx(0.5 * (pp + 1.0 - pn)).epsilon(1e-15));
    const int vp = std::stoi(f[5]);
    const int vn = std::stoi(f[6]);
    CHECK(vp >= 0);
    CHECK(vn >= 0);
    CHECK(std::size_t(vp) <= stack.pairs[0].model_pos.size());
    CHECK(std::size_t(vn) <= stack.pairs[0].model_neg.size());
    saw_low = saw_low || (f[0] == "-2" && f[1] == "-1");
    saw_high = saw_high || (f[0] == "3" && f[1] == "4");
    ++rows;
  }
  CHECK(rows == 25);
  CHECK(saw_low);
  CHECK(saw_high);

  std::ofstream(dir / "three.csv") << "0,1,2,3\n1,2,3,4\n";
  CHECK(invoke({"eval", "--model", dir / "m.json", "--data", dir / "three.csv"}).code == cli::kExitFailure);
}

TEST_CASE("contour rejects models that are not two-dimensional") {
  TempDir dir;
  std::ofstream(dir / "three.csv") << "0,1,2,3\n1,2,3,4\n0,0,1,0\n1,5,5,5\n";
  REQUIRE(invoke({"train", "--data", dir / "three.csv", "--batches", "50", "--max-layers", "1",
                  "--out", dir / "m3.json"})
              .code == cli::kExitOk);
  CHECK(invoke({"contour", "--model", dir / "m3.json"}).code == cli::kExitFailure);
}

TEST_CASE("identical flags and seed give a byte-identical model file") {
  TempDir dir;
  REQUIRE(invoke({"synth", "--n-per-class", "80", "--seed", "2", "--out", dir / "s.csv"}).code ==
          cli::kExitOk);
  for (const char* inference : {"sgd", "gibbs"}) {
    const std::vector<std::string> base{"train", "--data", dir / "s.csv", "--inference", inference,
                                        "--batches", "200", "--iters", "40", "--max-layers", "2",
                                        "--seed", "11", "--out"};
    auto a = base;
    a.push_back(dir / "a.json");
    auto b = base;
    b.push_back(dir / "b.json");
    REQUIRE(invoke(a).code == cli::kExitOk);
    REQUIRE(invoke(b).code == cli::kExitOk);
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  }
}

TEST_CASE("max-layers 1 gives depth 1") {
  TempDir dir;
  REQUIRE(invoke({"synth", "--n-per-class", "50", "--seed", "4", "--out", dir / "s.csv"}).code ==
          cli::kExitOk);
  REQUIRE(invoke({"train", "--data", dir / "s.csv", "--batches", "100", "--max-layers", "1", "--out",
                  dir / "m.json"})
              .code == cli::kExitOk);
  CHECK(load_stack(dir / "m.json").selected_depth == 1);
}

TEST_CASE("logistic baseline") {
  TempDir dir;
  REQUIRE(invoke({"synth", "--kind", "blobs", "--n-per-class", "100", "--separation", "6", "--seed", "5",
                  "--out", dir / "blobs.csv"})
              .code == cli::kExitOk);
  REQUIRE(invoke({"baseline", "--data", dir / "blobs.csv", "--report", dir / "b.json"}).code ==
          cli::kExitOk);
  const auto b = nlohmann::json::parse(slurp(dir / "b.json"));
  CHECK(b.at("error_rate").get<double>() <= 0.05);
  CHECK(b.at("complexity") == 1.0);

  REQUIRE(invoke({"synth", "--n-per-class", "200", "--seed", "6", "--out", dir / "s.csv"}).code ==
          cli::kExitOk);
  REQUIRE(invoke({"baseline", "--data", dir / "s.csv", "--report", dir / "s.json"}).code == cli::kExitOk);
  const auto s = nlohmann::json::parse(slurp(dir / "s.json"));
  CHECK(std::abs(s.at("error_rate").get<double>() - 0.5) <= 0.1);
}
