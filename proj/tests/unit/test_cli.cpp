#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hetree/cli.hpp"
#include "hetree/dataset.hpp"
#include "hetree/serialize.hpp"
#include "fixtures.hpp"

using namespace hetree;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / fs::path("hetree-cli-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

int run(std::vector<std::string> args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (out_text) *out_text = out.str();
  return code;
}

}  // namespace

TEST_CASE("cli quantize") {
  TempDir dir;
  write(dir.file("toy.csv"), "f0,f1,label\n0,-1,1\n5,0,0\n15,1,1\n");
  CHECK(run({"quantize", dir.file("toy.csv"), "--label", "label", "--bits", "4", "--out", dir.file("q.csv")}) == 0);
  const std::string first = slurp(dir.file("q.csv"));
  CHECK(first == "f0,f1,label\n0,0,1\n5,8,0\n15,15,1\n");
  const auto params = nlohmann::json::parse(slurp(dir.file("q.params.json")));
  CHECK(params[0]["scale"] == 1.0);
  CHECK(params[1]["zero_point"] == 8);
  CHECK(run({"quantize", dir.file("toy.csv"), "--label", "label", "--bits", "4", "--out", dir.file("q.csv")}) == 0);
  CHECK(slurp(dir.file("q.csv")) == first);

  CHECK(run({"quantize", dir.file("toy.csv"), "--bits", "4", "--out", dir.file("q.csv")}) == cli::kUsage);
  CHECK(run({"quantize", dir.file("toy.csv"), "--label", "nope", "--out", dir.file("q.csv")}) == cli::kDataError);
  write(dir.file("bad.csv"), "f0,label\nabc,1\n");
  CHECK(run({"quantize", dir.file("bad.csv"), "--label", "label", "--out", dir.file("q.csv")}) == cli::kDataError);
  CHECK(run({"frobnicate"}) == cli::kUsage);
  CHECK(run({"infer", dir.file("missing.json"), dir.file("toy.csv")}) == cli::kDataError);
}

TEST_CASE("cli infer on the stump") {
  TempDir dir;
  write(dir.file("stump.json"), ensemble_to_json(testing::stump()).dump());
  write(dir.file("x.csv"), "x1,x2\n0,2\n0,5\n");
  std::string out;
  CHECK(run({"infer", dir.file("stump.json"), dir.file("x.csv"), "--quantized", "--trace", dir.file("t.json")}, &out) == 0);
  const Table t = [&] {
    std::istringstream in(out);
    return parse_csv(in, "");
  }();
  REQUIRE(t.X.rows() == 2);
  CHECK(t.X(0, 1) == 1);
  CHECK(t.X(1, 1) == 0);
  const auto trace = nlohmann::json::parse(slurp(dir.file("t.json")));
  for (const auto& row : trace) {
    for (const auto& s : row["S"]) {
      int sum = 0;
      for (const auto& v : s) sum += v.get<int>();
      CHECK(sum == 1);
    }
  }

  write(dir.file("empty.csv"), "");
  CHECK(run({"infer", dir.file("stump.json"), dir.file("empty.csv"), "--quantized"}, &out) == 0);
  CHECK(out == "row,class,score_0,score_1\n");

  write(dir.file("wide.csv"), "a,b,c\n0,0,0\n");
  CHECK(run({"infer", dir.file("stump.json"), dir.file("wide.csv"), "--quantized"}) == cli::kDataError);
  write(dir.file("range.csv"), "a,b\n0,9\n");
  CHECK(run({"infer", dir.file("stump.json"), dir.file("range.csv"), "--quantized"}) == cli::kDataError);
  // Without --quantized the model must carry feature quantizers.
  CHECK(run({"infer", dir.file("stump.json"), dir.file("x.csv")}) == cli::kDataError);
  CHECK(run({"infer", dir.file("stump.json"), dir.file("x.csv"), "--quantized", "--p-error", "2"}) == cli::kUsage);

  auto broken = ensemble_to_json(testing::stump());
  broken["trees"][0]["nodes"][0]["feature"] = 5;
  write(dir.file("broken.json"), broken.dump());
  CHECK(run({"compile", dir.file("broken.json")}) == cli::kDataError);
}

TEST_CASE("cli train, compile, analyze and infer round trip") {
  TempDir dir;
  std::string csv = "a,b,y\n";
  for (int i = 0; i < 60; ++i) csv += std::to_string(i % 10) + "," + std::to_string((i * 7) % 13) + "," + (i % 10 > 4 ? "1" : "0") + "\n";
  write(dir.file("d.csv"), csv);
  CHECK(run({"train", dir.file("d.csv"), "--label", "y", "--bits", "4", "--model", "rf", "--n-estimators", "5",
             "--seed", "3", "--out", dir.file("m.json")}) == 0);
  CHECK(run({"compile", dir.file("m.json"), "--out", dir.file("b.json")}) == 0);
  const auto bundle = nlohmann::json::parse(slurp(dir.file("b.json")));
  CHECK(bundle["shapes"]["n_trees"] == 5);
  std::string table;
  CHECK(run({"analyze", dir.file("m.json"), "--out", dir.file("r.json")}, &table) == 0);
  CHECK(table.find("global max bits: 5") != table.npos);
  CHECK(nlohmann::json::parse(slurp(dir.file("r.json")))["global_max_bits"] == 5);
  std::string preds;
  CHECK(run({"infer", dir.file("m.json"), dir.file("d.csv"), "--label", "y"}, &preds) == 0);
  std::istringstream in(preds);
  const Table p = parse_csv(in, "");
  REQUIRE(p.X.rows() == 60);
  int hit = 0;
  for (int i = 0; i < 60; ++i) hit += static_cast<int>(p.X(static_cast<std::size_t>(i), 1)) == (i % 10 > 4);
  CHECK(hit >= 55);
  CHECK(run({"train", dir.file("d.csv"), "--label", "y", "--model", "dt", "--n-estimators", "3"}) == cli::kUsage);
}

TEST_CASE("cli sweep reports append under one header") {
  TempDir dir;
  std::string csv = "a,b,y\n";
  for (int i = 0; i < 80; ++i) csv += std::to_string(i % 10) + "," + std::to_string((i * 3) % 7) + "," + (i % 10 > 4 ? "1" : "0") + "\n";
  write(dir.file("d.csv"), csv);
  const std::vector<std::string> args{"sweep-bits", dir.file("d.csv"), "--label", "y", "--bits", "2,4",
                                      "--folds", "2", "--repeats", "1", "--out", dir.file("s.csv"), "--append"};
  CHECK(run(args) == 0);
  CHECK(run(args) == 0);
  const std::string text = slurp(dir.file("s.csv"));
  std::size_t headers = 0, lines = 0;
  for (std::size_t at = 0; (at = text.find("schema_version", at)) != text.npos; ++at) ++headers;
  for (char c : text) lines += c == '\n';
  CHECK(headers == 1);
  CHECK(lines == 5);
  CHECK(run({"sweep-bits", dir.file("d.csv"), "--label", "y", "--folds", "1"}) == cli::kUsage);
  write(dir.file("other.csv"), "something,else\n1,2\n");
  CHECK(run({"sweep-perror", dir.file("d.csv"), "--label", "y", "--folds", "2", "--repeats", "1", "--noise-seeds",
             "1", "--out", dir.file("other.csv"), "--append"}) == cli::kDataError);
}
