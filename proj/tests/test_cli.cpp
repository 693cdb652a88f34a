#include "amnesia/cli.hpp"
#include "amnesia/matrix_io.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstdlib>
#include <sstream>

using namespace amnesia;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string write_planted(const fs::path& dir, int rows, int cols) {
  Rng rng(1);
  const auto m = AssociationMatrix::from_values(amnesia::testing::planted(rows, cols, 2, 0.05, rng));
  const auto path = dir / "z.csv";
  save_matrix(m, path, MatrixFormat::Csv);
  return path.string();
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"fit", "--out", "x"}).code == cli::kExitUsage);
  CHECK(run({"fit", "--matrix", "z.csv", "--out", "x", "--bogus", "1"}).code == cli::kExitUsage);
  const auto help = run({"--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("replay") != std::string::npos);
}

TEST_CASE("fit writes the sweep, model and config echo, and reruns identically") {
  const auto dir = amnesia::testing::temp_dir("cli_fit");
  const auto matrix = write_planted(dir, 8, 30);
  const auto out = (dir / "run").string();
  const auto r = run({"fit", "--matrix", matrix, "--ranks", "1,2,3,5", "--components", "1", "--heatmap", "--out", out});
  REQUIRE(r.code == cli::kExitOk);
  const std::string sweep = read_file(fs::path(out) / "sweep.csv");
  CHECK(sweep.rfind("rank,r2,f1,frobenius_error,epochs_run\n1,", 0) == 0);
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 5);
  CHECK(fs::exists(fs::path(out) / "model_r5.fmx"));
  CHECK(fs::exists(fs::path(out) / "model_r5.json"));
  CHECK(fs::exists(fs::path(out) / "component_1.csv"));
  CHECK(fs::exists(fs::path(out) / "z.pgm"));
  const std::string echo = read_file(fs::path(out) / "config.ini");
  CHECK(echo.find("ranks") != std::string::npos);
  CHECK(echo.find("seed") != std::string::npos);

  const auto rerun = run({"--config", (fs::path(out) / "config.ini").string()});
  REQUIRE(rerun.code == cli::kExitOk);
  CHECK(read_file(fs::path(out) / "sweep.csv") == sweep);
  CHECK(read_file(fs::path(out) / "config.ini") == echo);
}

TEST_CASE("unknown config keys are rejected") {
  const auto dir = amnesia::testing::temp_dir("cli_config");
  write_file(dir / "bad.ini", "[fit]\nmatrix=z.csv\nout=o\nwibble=3\n");
  CHECK(run({"--config", (dir / "bad.ini").string(), "fit"}).code == cli::kExitUsage);
}

TEST_CASE("runtime failures exit with 1") {
  const auto dir = amnesia::testing::temp_dir("cli_fail");
  const auto r = run({"fit", "--matrix", (dir / "missing.csv").string(), "--out", (dir / "o").string()});
  CHECK(r.code == cli::kExitFailure);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("predict, eval and stats") {
  const auto dir = amnesia::testing::temp_dir("cli_misc");
  const auto matrix = write_planted(dir, 12, 40);
  write_file(dir / "seed.csv", "example_id,value\nex_0,0.5\nex_3,-0.2\nex_7,0.1\n");
  const auto p = run({"predict", "--matrix", matrix, "--seed-file", (dir / "seed.csv").string(), "--method", "knn",
                      "--out", (dir / "pred").string()});
  REQUIRE(p.code == cli::kExitOk);
  const std::string pred = read_file(dir / "pred" / "prediction.csv");
  CHECK(pred.find("ex_3,-0.2\n") != std::string::npos);

  ::setenv("AMNESIA_SEED", "31337", 1);
  const auto e = run({"eval", "--matrix", matrix, "--train-tasks", "task_0,task_1,task_2,task_3,task_4,task_5,task_6,task_7",
                      "--test-tasks", "task_8,task_9,task_10,task_11", "--seed-size", "10", "--methods", "additive,knn,mf",
                      "--out", (dir / "eval").string()});
  ::unsetenv("AMNESIA_SEED");
  REQUIRE(e.code == cli::kExitOk);
  CHECK(fs::exists(dir / "eval" / "eval_mf.json"));
  CHECK(read_file(dir / "eval" / "summary.csv").find("mf,rmse,in-domain,10,10,") != std::string::npos);
  CHECK(read_file(dir / "eval" / "config.ini").find("31337") != std::string::npos);
  CHECK(read_file(dir / "eval" / "eval_knn.json").find("\"master_seed\": 31337") != std::string::npos);

  write_file(dir / "x.csv", "value\n1\n2\n3\n4\n");
  write_file(dir / "y.csv", "1\n3\n2\n4\n");
  const auto s = run({"stats", "--x", (dir / "x.csv").string(), "--y", (dir / "y.csv").string(), "--ttest-a",
                      (dir / "x.csv").string(), "--ttest-b", (dir / "y.csv").string(), "--matrix", matrix, "--out",
                      (dir / "stats").string()});
  REQUIRE(s.code == cli::kExitOk);
  CHECK(s.out.find("spearman,0.8\n") != std::string::npos);
  CHECK(s.out.find("avg_row_correlation_pearson,") != std::string::npos);
  CHECK(run({"stats", "--out", (dir / "stats2").string()}).code == cli::kExitUsage);
}

TEST_CASE("synth and replay on a tiny oracle") {
  const auto dir = amnesia::testing::temp_dir("cli_oracle");
  const std::vector<std::string> tiny{"--task-size", "20", "--width", "8", "--depth", "2", "--pretrain-epochs", "1",
                                      "--overlap-angles", "5,25,45", "--disjoint-angles", "-5,-25,-45"};
  std::vector<std::string> synth{"synth", "--ranks", "1,2", "--out", (dir / "synth").string()};
  synth.insert(synth.end(), tiny.begin(), tiny.end());
  REQUIRE(run(synth).code == cli::kExitOk);
  const auto z = load_matrix(dir / "synth" / "z_overlap.csv", MatrixFormat::Csv);
  CHECK(z.rows() == 3);
  CHECK(z.cols() == 200);
  CHECK(fs::exists(dir / "synth" / "z_disjoint.csv"));
  CHECK(read_file(dir / "synth" / "r2_sweep.csv").find("disjoint,2,") != std::string::npos);

  std::vector<std::string> replay{"replay", "--tasks", "2", "--held-out", "50", "--seed-size", "10", "--interval", "1",
                                  "--strategies", "random,gt,mf-offline", "--mf-rank", "2",
                                  "--out", (dir / "replay").string()};
  replay.insert(replay.end(), tiny.begin(), tiny.end());
  const auto r = run(replay);
  REQUIRE(r.code == cli::kExitOk);
  const std::string summary = read_file(dir / "replay" / "summary.csv");
  CHECK(summary.find("ground-truth,") != std::string::npos);
  CHECK(fs::exists(dir / "replay" / "traces" / "random_task1.csv"));
  CHECK(fs::exists(dir / "replay" / "tasks.csv"));
}
