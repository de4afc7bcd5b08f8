#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ilb/bounds.hpp"
#include "ilb/harness.hpp"

using namespace ilb;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ilb_test_" + std::to_string(std::rand()) + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

ExperimentConfig small_racer_config(const std::string& out) {
  std::istringstream text(R"(
algorithm = dagger
env = racer
learner = ridge
lambda = 1e-3
loss = squared
schedule = indicator
N = 2
m = 2
T = 50
eval_m = 1
seed = 11
racer.raster_w = 5
racer.raster_h = 5
racer.steps_per_lap = 50
)");
  ExperimentConfig cfg = ExperimentConfig::parse(text);
  cfg.out_dir = out;
  return cfg;
}

}  // namespace

TEST_CASE("config parsing: defaults, round-trip, and unknown fields") {
  SUBCASE("defaults") {
    std::istringstream empty("");
    const ExperimentConfig cfg = ExperimentConfig::parse(empty);
    CHECK(cfg.algorithm == "dagger");
    CHECK(cfg.env == "racer");
    CHECK(cfg.iterations == 20);
    CHECK(cfg.trajectories == 0);  // 0 = auto data volume per environment
    CHECK(cfg.seed == 1);
  }
  SUBCASE("comments and values") {
    std::istringstream text("algorithm = smile  # mixing\nalpha = 0.1\nN = 7\n");
    const ExperimentConfig cfg = ExperimentConfig::parse(text);
    CHECK(cfg.algorithm == "smile");
    CHECK(cfg.alpha == doctest::Approx(0.1));
    CHECK(cfg.iterations == 7);
  }
  SUBCASE("unknown field is named in the error") {
    std::istringstream text("algorthm = dagger\n");
    try {
      ExperimentConfig::parse(text);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("algorthm") != std::string::npos);
    }
  }
  SUBCASE("invalid enum values are rejected") {
    std::istringstream text("algorithm = dragger\n");
    CHECK_THROWS_AS(ExperimentConfig::parse(text), ConfigError);
    std::istringstream text2("env = mars\n");
    CHECK_THROWS_AS(ExperimentConfig::parse(text2), ConfigError);
  }
  SUBCASE("serialize/parse round-trip") {
    std::istringstream text("algorithm = supervised\nenv = seqlabel\nseqlabel.noise = 0.25\n");
    const ExperimentConfig cfg = ExperimentConfig::parse(text);
    std::stringstream buf;
    cfg.serialize(buf);
    const ExperimentConfig back = ExperimentConfig::parse(buf);
    CHECK(back.algorithm == "supervised");
    CHECK(back.env == "seqlabel");
    CHECK(back.env_param("seqlabel.noise", 0.0) == doctest::Approx(0.25));
  }
}

TEST_CASE("run_experiment reproduces metrics.csv byte-for-byte from the same config") {
  TempDir tmp;
  ExperimentConfig cfg = small_racer_config(tmp.sub("a"));
  run_experiment(cfg);
  cfg.out_dir = tmp.sub("b");
  run_experiment(cfg);
  CHECK(read_file(tmp.sub("a") + "/metrics.csv") == read_file(tmp.sub("b") + "/metrics.csv"));
  CHECK(read_file(tmp.sub("a") + "/dataset") == read_file(tmp.sub("b") + "/dataset"));

  // artifacts exist and the dataset reflects the dataset-growth law
  const AggregateDataset ds = AggregateDataset::load_file(tmp.sub("a") + "/dataset");
  CHECK(ds.size() == 2u * 2u * 50u);
  CHECK(fs::exists(tmp.sub("a") + "/config.snapshot"));
  CHECK(fs::exists(tmp.sub("a") + "/model_1"));
  CHECK(fs::exists(tmp.sub("a") + "/model_2"));

  // metrics schema is stable
  std::ifstream m(tmp.sub("a") + "/metrics.csv");
  std::string header;
  std::getline(m, header);
  CHECK(header == "iteration,dataset_size,train_loss,val_loss,env_metric,beta_i");
}

TEST_CASE("supervised on noiseless synthetic glyphs reaches accuracy 1.0 on its words") {
  TempDir tmp;
  std::istringstream text(R"(
algorithm = supervised
env = seqlabel
learner = allpairs
lambda = 1e-4
epochs = 25
loss = zero_one
N = 2
m = 40
eval_m = 2
seed = 5
seqlabel.alphabet = 8
seqlabel.noise = 0
seqlabel.words = 40
seqlabel.test_fold = -1
)");
  ExperimentConfig cfg = ExperimentConfig::parse(text);
  cfg.out_dir = tmp.sub("run");
  const RunArtifacts art = run_experiment(cfg);
  CHECK(art.record.metrics.back().env_metric == doctest::Approx(1.0));
}

TEST_CASE("schedule sweep expands into one run directory per variant") {
  TempDir tmp;
  ExperimentConfig cfg = small_racer_config(tmp.sub("sweep"));
  cfg.sweep_schedules = {"indicator", "geometric:0.5", "geometric:0.9"};
  run_experiment(cfg);
  CHECK(fs::exists(tmp.sub("sweep") + "/indicator/metrics.csv"));
  CHECK(fs::exists(tmp.sub("sweep") + "/geometric_0.5/metrics.csv"));
  CHECK(fs::exists(tmp.sub("sweep") + "/geometric_0.9/metrics.csv"));
}

TEST_CASE("learning curves") {
  TempDir tmp;
  ExperimentConfig cfg = small_racer_config(tmp.sub("r1"));
  cfg.iterations = 5;
  run_experiment(cfg);

  SUBCASE("a single run gives point intervals") {
    const auto pts = learning_curve_points({tmp.sub("r1")});
    REQUIRE(!pts.empty());
    for (const auto& p : pts) {
      CHECK(p.ci_low == doctest::Approx(p.mean));
      CHECK(p.ci_high == doctest::Approx(p.mean));
    }
  }

  SUBCASE("two identical runs give a zero-width interval") {
    cfg.out_dir = tmp.sub("r2");
    run_experiment(cfg);
    const auto pts = learning_curve_points({tmp.sub("r1"), tmp.sub("r2")});
    REQUIRE(!pts.empty());
    for (const auto& p : pts) {
      CHECK(p.ci_high - p.ci_low == doctest::Approx(0.0));
    }
  }

  SUBCASE("csv schema") {
    std::stringstream out;
    emit_learning_curve({tmp.sub("r1")}, out);
    std::string header;
    std::getline(out, header);
    CHECK(header == "method,cumulative_data,metric_mean,ci95_low,ci95_high");
  }

  SUBCASE("mixing environments across runs is an error") {
    std::istringstream text("env = tabular\ntabular.kind = kaariainen\nlearner = ridge\n"
                            "loss = squared\nN = 5\nm = 2\nT = 6\neval_m = 1\n");
    ExperimentConfig other = ExperimentConfig::parse(text);
    other.out_dir = tmp.sub("tab");
    run_experiment(other);
    CHECK_THROWS_AS(learning_curve_points({tmp.sub("r1"), tmp.sub("tab")}), SchemaError);
  }
}

TEST_CASE("verify_bounds: suite shapes and outcomes") {
  SUBCASE("lemma_tv has 3 instances x 101 betas, all passing") {
    const BoundReport rep = verify_bounds("lemma_tv");
    CHECK(rep.rows.size() == 303);
    CHECK(rep.all_pass());
  }
  SUBCASE("dagger_regret passes with nonnegative regret rows") {
    const BoundReport rep = verify_bounds("dagger_regret");
    CHECK(rep.all_pass());
    bool has_regret_row = false;
    for (const auto& r : rep.rows) {
      if (r.theorem == "ftl_nonneg_regret") has_regret_row = true;
    }
    CHECK(has_regret_row);
  }
  SUBCASE("unknown suite is rejected") {
    CHECK_THROWS_AS(verify_bounds("nope"), ConfigError);
  }
  SUBCASE("report csv schema") {
    const BoundReport rep = verify_bounds("compounding");
    std::stringstream out;
    rep.to_csv(out);
    std::string header;
    std::getline(out, header);
    CHECK(header == "instance,theorem,lhs,rhs,slack,pass,wall_s");
    CHECK(rep.all_pass());
  }
}

TEST_CASE("a corrupted tabular instance is rejected at load, not silently checked") {
  TempDir tmp;
  const std::string path = tmp.sub("bad.mdp");
  {
    RngStream rng(3);
    ChainInstance inst = build_kaariainen_chain(4, 0.2);
    inst.mdp.c(0, 1) = 1.5;  // out of range
    std::ofstream out(path);
    inst.mdp.save(out);
  }
  std::istringstream text("env = tabular\ntabular.kind = file\ntabular.file = " + path + "\n");
  ExperimentConfig cfg = ExperimentConfig::parse(text);
  int horizon = 0;
  CHECK_THROWS_AS(make_env_model(cfg, horizon), IoError);
}

TEST_CASE("exact-loss aggregation: theorem quantities behave across schedules") {
  const GapFamilyInstance g = build_gap_family_instance(10, 0.05);
  for (const BetaSchedule& sched :
       {BetaSchedule::indicator(), BetaSchedule::geometric(0.5)}) {
    const ExactDaggerResult res =
        exact_dagger_squared(g.mdp, g.expert, g.feature_group, g.n_groups, 32, sched);
    CHECK(res.gamma >= -1e-12);
    CHECK(res.lhs <= res.rhs + 1e-9);
    CHECK(res.eps_hat >= 0.0);
    // indicator: beta exceeds 1/T only at the first iteration
    if (sched.kind == BetaSchedule::Kind::indicator) CHECK(res.n_beta == 1);
  }
}

TEST_CASE("cli binary: exit codes and dataset inspect") {
  const char* bin = std::getenv("ILB_BIN");
  if (!bin) {
    MESSAGE("ILB_BIN not set; skipping the binary-level checks");
    return;
  }
  TempDir tmp;
  const std::string null_redirect = " > " + tmp.sub("out.txt") + " 2>&1";
  // usage error -> 1
  int rc = std::system((std::string(bin) + " run" + null_redirect).c_str());
  CHECK(WEXITSTATUS(rc) == 1);
  // passing suite -> 0
  rc = std::system((std::string(bin) + " verify --suite compounding" + null_redirect).c_str());
  CHECK(WEXITSTATUS(rc) == 0);
  // missing file -> runtime failure 2
  rc = std::system((std::string(bin) + " dataset inspect /nonexistent" + null_redirect).c_str());
  CHECK(WEXITSTATUS(rc) == 2);
  // run + inspect round trip
  {
    std::ofstream cfg(tmp.sub("cfg"));
    cfg << "algorithm = dagger\nenv = tabular\ntabular.kind = gap_family\nlearner = allpairs\n"
        << "loss = zero_one\nN = 2\nm = 2\nT = 6\neval_m = 1\nout = " << tmp.sub("run") << "\n";
  }
  rc = std::system((std::string(bin) + " run --config " + tmp.sub("cfg") + null_redirect).c_str());
  CHECK(WEXITSTATUS(rc) == 0);
  rc = std::system(
      (std::string(bin) + " dataset inspect " + tmp.sub("run") + "/dataset" + null_redirect)
          .c_str());
  CHECK(WEXITSTATUS(rc) == 0);
}
