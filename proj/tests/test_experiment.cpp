#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "adfs/experiment.hpp"

using namespace adfs;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("adfs_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig minimal_config() {
  std::istringstream in(
      "# smallest useful scenario\n"
      "grid = 1x2\n"
      "m = 2\n"
      "d = 2\n"
      "T = 100\n"
      "tau = 2\n");
  return parse_config(in);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ADFS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("minimal run writes one row per iteration") {
  const fs::path dir = fresh_dir("minimal");
  ExperimentConfig cfg = minimal_config();
  cfg.out = dir.string();
  cfg.validate();
  const ExperimentResult r = run_experiment(cfg);
  REQUIRE(r.runs.size() == 1);
  const std::string csv = slurp(dir / "adfs_seed0.csv");
  std::istringstream lines(csv);
  std::string first;
  std::getline(lines, first);
  CHECK(first == "iteration,idealized_time,primal_subopt");
  std::size_t count = 1;
  for (std::string line; std::getline(lines, line);) ++count;
  CHECK(count == 102);
  CHECK(fs::exists(dir / "summary.txt"));
  CHECK(slurp(dir / "summary.txt").find("adfs.seed0.iterations = 100") != std::string::npos);
}

TEST_CASE("reruns are byte-identical") {
  const fs::path a = fresh_dir("rerun_a");
  const fs::path b = fresh_dir("rerun_b");
  ExperimentConfig cfg = minimal_config();
  set_config_value(cfg, "algorithms", "adfs,point_saga,agd,ns_adfs");
  set_config_value(cfg, "seeds", "1,2");
  set_config_value(cfg, "delay", "exponential");
  cfg.out = a.string();
  run_experiment(cfg);
  cfg.out = b.string();
  run_experiment(cfg);
  for (const auto& entry : fs::directory_iterator(a))
    CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
  CHECK(fs::exists(a / "ns_adfs_seed2.csv"));
}

TEST_CASE("trace CSV is lossless and well formed") {
  ExperimentConfig cfg = minimal_config();
  set_config_value(cfg, "algorithms", "adfs,point_saga");
  set_config_value(cfg, "delay", "exponential");
  const ExperimentResult r = run_experiment(cfg);
  for (const RunRecord& rec : r.runs) {
    std::stringstream io;
    write_trace_csv(io, rec.trace);
    const std::vector<TracePoint> back = read_trace_csv(io);
    REQUIRE(back.size() == rec.trace.size());
    for (std::size_t k = 0; k < back.size(); ++k) {
      CHECK(back[k].iteration == rec.trace[k].iteration);
      CHECK(back[k].idealized_time == rec.trace[k].idealized_time);
      CHECK(back[k].primal_subopt == rec.trace[k].primal_subopt);
      CHECK(back[k].primal_subopt >= 0.0);
      if (k > 0) CHECK(back[k].idealized_time >= back[k - 1].idealized_time);
    }
  }
}

TEST_CASE("crossing times interpolate between checkpoints") {
  const std::vector<TracePoint> t = {{0, 0.0, 1.0}, {1, 10.0, 1e-1}, {2, 20.0, 1e-3}};
  CHECK(crossing_time(t, 1e-2) == doctest::Approx(10.0 + 10.0 * (0.1 - 0.01) / (0.1 - 0.001)));
  CHECK(crossing_time(t, 1.0) == 0.0);
  CHECK(std::isnan(crossing_time(t, 1e-6)));
}

TEST_CASE("config errors name the field") {
  ExperimentConfig cfg;
  auto field_of = [&](const std::string& key, const std::string& value) {
    try {
      set_config_value(cfg, key, value);
      cfg.validate();
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  CHECK(field_of("tau", "-1") == "tau");
  cfg = ExperimentConfig{};
  CHECK(field_of("grid", "3by3") == "grid");
  CHECK(field_of("m", "3") == "m");
  cfg = ExperimentConfig{};
  CHECK(field_of("delay", "gamma") == "delay");
  CHECK(field_of("frobnicate", "1") == "frobnicate");
  CHECK(field_of("algorithms", "sgd") == "algorithms");
  CHECK(field_of("agd.step", "0") == "agd.step");
  CHECK(field_of("sigma", "abc") == "sigma");
  std::istringstream bad("grid = 2x2\nnot a pair\n");
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("dump_parameters") {
  ExperimentConfig cfg;
  set_config_value(cfg, "grid", "1x1");
  set_config_value(cfg, "m", "4");
  const std::string text = dump_parameters(cfg);
  CHECK(text.find("p_comm = 0\n") != std::string::npos);
  CHECK(text.find("kappa_s = ") != std::string::npos);
  CHECK(text.find("n = 1\n") != std::string::npos);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = fresh_dir("cli");
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "grid = 1x2\nm = 2\nd = 2\nT = 50\n";
  }
  const std::string base = "--config " + (dir / "run.cfg").string();
  CHECK(run_cli(base + " --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "adfs_seed0.csv"));
  CHECK(run_cli(base + " --set tau=5 --set T=20 --algo point_saga --seed-list 1,2") == 0);
  CHECK(run_cli(base + " dump-parameters") == 0);
  CHECK(run_cli(base + " --set tau=-1") == 2);
  CHECK(run_cli(base + " --set nonsense=1") == 2);
  CHECK(run_cli("--config " + (dir / "missing.cfg").string()) == 2);
  CHECK(run_cli("--no-such-flag") == 2);
  CHECK(run_cli(base + " --algo agd --set agd.step=100 --set checkpoint_every=1") == 3);
}
