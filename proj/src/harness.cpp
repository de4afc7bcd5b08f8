#include "ilb/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ilb/envs/platformer.hpp"
#include "ilb/envs/racer.hpp"
#include "ilb/envs/seqlabel.hpp"
#include "ilb/tabular.hpp"

namespace fs = std::filesystem;

namespace ilb {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::vector<std::string> kAlgorithms = {"dagger", "smile", "searn_greedy", "forward",
                                              "supervised"};
const std::vector<std::string> kEnvs = {"racer", "platformer", "seqlabel", "tabular"};
const std::vector<std::string> kLearners = {"ridge", "svm_bits", "allpairs"};

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "algorithm") cfg.algorithm = value;
    else if (key == "env") cfg.env = value;
    else if (key == "learner") cfg.learner = value;
    else if (key == "lambda") cfg.lambda = std::atof(value.c_str());
    else if (key == "epochs") cfg.epochs = std::atoi(value.c_str());
    else if (key == "loss") cfg.loss = value;
    else if (key == "schedule") cfg.schedule = value;
    else if (key == "alpha") cfg.alpha = std::atof(value.c_str());
    else if (key == "N") cfg.iterations = std::atoi(value.c_str());
    else if (key == "m") cfg.trajectories = std::atoi(value.c_str());
    else if (key == "T") cfg.horizon = std::atoi(value.c_str());
    else if (key == "m_val") cfg.m_val = std::atoi(value.c_str());
    else if (key == "eval_m") cfg.eval_m = std::atoi(value.c_str());
    else if (key == "seed") cfg.seed = std::strtoull(value.c_str(), nullptr, 10);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "sweep.schedules") {
      cfg.sweep_schedules.clear();
      std::istringstream vs(value);
      std::string item;
      while (std::getline(vs, item, ',')) {
        item = trim(item);
        if (!item.empty()) cfg.sweep_schedules.push_back(item);
      }
    } else if (const auto dot = key.find('.'); dot != std::string::npos) {
      const std::string prefix = key.substr(0, dot);
      if (std::find(kEnvs.begin(), kEnvs.end(), prefix) == kEnvs.end())
        throw ConfigError("unknown config field: " + key);
      cfg.env_params[key] = value;
    } else {
      throw ConfigError("unknown config field: " + key);
    }
  }
  // validation with the offending field named
  if (std::find(kAlgorithms.begin(), kAlgorithms.end(), cfg.algorithm) == kAlgorithms.end())
    throw ConfigError("invalid config field algorithm: " + cfg.algorithm);
  if (std::find(kEnvs.begin(), kEnvs.end(), cfg.env) == kEnvs.end())
    throw ConfigError("invalid config field env: " + cfg.env);
  if (std::find(kLearners.begin(), kLearners.end(), cfg.learner) == kLearners.end())
    throw ConfigError("invalid config field learner: " + cfg.learner);
  SurrogateLoss::parse(cfg.loss);
  BetaSchedule::parse(cfg.schedule);
  if (cfg.iterations < 1) throw ConfigError("invalid config field N: must be positive");
  if (cfg.trajectories < 0) throw ConfigError("invalid config field m: must be nonnegative");
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return parse(in);
}

void ExperimentConfig::serialize(std::ostream& out) const {
  out << "algorithm = " << algorithm << "\n";
  out << "env = " << env << "\n";
  out << "learner = " << learner << "\n";
  out << "lambda = " << fmt_double(lambda) << "\n";
  out << "epochs = " << epochs << "\n";
  out << "loss = " << loss << "\n";
  out << "schedule = " << schedule << "\n";
  out << "alpha = " << fmt_double(alpha) << "\n";
  out << "N = " << iterations << "\n";
  out << "m = " << trajectories << "\n";
  out << "T = " << horizon << "\n";
  out << "m_val = " << m_val << "\n";
  out << "eval_m = " << eval_m << "\n";
  out << "seed = " << seed << "\n";
  for (const auto& [k, v] : env_params) out << k << " = " << v << "\n";
  if (!sweep_schedules.empty()) {
    out << "sweep.schedules = ";
    for (std::size_t i = 0; i < sweep_schedules.size(); ++i) {
      if (i) out << ",";
      out << sweep_schedules[i];
    }
    out << "\n";
  }
}

double ExperimentConfig::env_param(const std::string& key, double fallback) const {
  const auto it = env_params.find(key);
  return it == env_params.end() ? fallback : std::atof(it->second.c_str());
}

std::string ExperimentConfig::env_param_str(const std::string& key,
                                            const std::string& fallback) const {
  const auto it = env_params.find(key);
  return it == env_params.end() ? fallback : it->second;
}

// ---------------------------------------------------------------------------
// Environment factory
// ---------------------------------------------------------------------------

std::unique_ptr<EnvModel> make_env_model(const ExperimentConfig& cfg, int& horizon_out) {
  horizon_out = cfg.horizon;
  if (cfg.env == "racer") {
    RacerConfig rc;
    rc.raster_w = static_cast<int>(cfg.env_param("racer.raster_w", rc.raster_w));
    rc.raster_h = static_cast<int>(cfg.env_param("racer.raster_h", rc.raster_h));
    rc.steps_per_lap = static_cast<int>(cfg.env_param("racer.steps_per_lap", rc.steps_per_lap));
    rc.max_turn = cfg.env_param("racer.max_turn", rc.max_turn);
    rc.heading_noise = cfg.env_param("racer.heading_noise", rc.heading_noise);
    rc.lookahead = cfg.env_param("racer.lookahead", rc.lookahead);
    const std::string track_file = cfg.env_param_str("racer.track_file", "");
    if (!track_file.empty()) {
      rc.track = Track::load_file(track_file);
    } else {
      rc.track = Track::wavy_loop(cfg.env_param("racer.track_radius", 25.0),
                                  cfg.env_param("racer.track_wobble", 0.25),
                                  static_cast<int>(cfg.env_param("racer.track_lobes", 4)),
                                  cfg.env_param("racer.track_width", 3.0),
                                  static_cast<int>(cfg.env_param("racer.track_vertices", 128)));
    }
    if (horizon_out <= 0) horizon_out = rc.steps_per_lap;
    return std::make_unique<RacerModel>(rc);
  }
  if (cfg.env == "platformer") {
    PlatformerConfig pc;
    pc.stage_length = static_cast<int>(cfg.env_param("platformer.stage_length", pc.stage_length));
    pc.difficulty = static_cast<int>(cfg.env_param("platformer.difficulty", pc.difficulty));
    pc.slip_prob = cfg.env_param("platformer.slip_prob", pc.slip_prob);
    const int n_stages = static_cast<int>(cfg.env_param("platformer.stages", 8));
    pc.stage_seeds.clear();
    for (int i = 0; i < n_stages; ++i) pc.stage_seeds.push_back(i);
    if (horizon_out <= 0) horizon_out = 500;
    return std::make_unique<PlatformerModel>(pc);
  }
  if (cfg.env == "seqlabel") {
    SeqLabelConfig sc;
    sc.alphabet = static_cast<int>(cfg.env_param("seqlabel.alphabet", 12));
    sc.prev_letter_feature = cfg.env_param("seqlabel.prev_feature", 1.0) != 0.0;
    OcrCorpus corpus;
    std::string source = cfg.env_param_str("seqlabel.corpus", "synth");
    if (source == "ocr") {
      const char* env_path = std::getenv("ILB_OCR_PATH");
      const std::string path = cfg.env_param_str("seqlabel.corpus_path", env_path ? env_path : "");
      if (path.empty())
        throw ConfigError("seqlabel.corpus = ocr needs ILB_OCR_PATH or seqlabel.corpus_path");
      corpus = load_ocr_file(path);
      sc.alphabet = 26;
    } else {
      corpus = synth_glyphs(static_cast<int>(cfg.env_param("seqlabel.words", 600)), sc.alphabet,
                            cfg.env_param("seqlabel.noise", 0.3),
                            static_cast<std::uint64_t>(cfg.env_param("seqlabel.corpus_seed", 1000)),
                            cfg.env_param("seqlabel.bigram", 0.85),
                            static_cast<int>(cfg.env_param("seqlabel.min_len", 8)),
                            static_cast<int>(cfg.env_param("seqlabel.max_len", 14)));
    }
    auto model = std::make_unique<SeqLabelModel>(
        std::move(corpus), sc, static_cast<int>(cfg.env_param("seqlabel.test_fold", 0)));
    if (horizon_out <= 0) horizon_out = model->max_word_length();
    return model;
  }
  if (cfg.env == "tabular") {
    const std::string kind = cfg.env_param_str("tabular.kind", "gap_family");
    const int T = static_cast<int>(cfg.env_param("tabular.T", 10));
    const double eps = cfg.env_param("tabular.eps", 0.05);
    if (horizon_out <= 0) horizon_out = T;
    if (kind == "kaariainen") {
      ChainInstance c = build_kaariainen_chain(T, eps);
      return std::make_unique<TabularEnvModel>(std::move(c.mdp), std::move(c.expert), "chain");
    }
    if (kind == "gap") {
      GapInstance g = build_quadratic_gap_example(T, eps);
      return std::make_unique<TabularEnvModel>(std::move(g.mdp), std::move(g.expert), "gap");
    }
    if (kind == "gap_family") {
      GapFamilyInstance g = build_gap_family_instance(T, eps);
      return std::make_unique<TabularEnvModel>(std::move(g.mdp), std::move(g.expert),
                                               "gap_family", g.feature_group, g.n_groups);
    }
    if (kind == "file") {
      const std::string path = cfg.env_param_str("tabular.file", "");
      TabularMDP mdp = TabularMDP::load_file(path);
      if (horizon_out <= 0) horizon_out = mdp.horizon;
      // file instances take the first action everywhere as the expert
      TabularPolicy expert =
          TabularPolicy::deterministic(std::vector<int>(mdp.n_states, 0), mdp.n_actions);
      return std::make_unique<TabularEnvModel>(std::move(mdp), std::move(expert), "tabular_file");
    }
    throw ConfigError("invalid config field tabular.kind: " + kind);
  }
  throw ConfigError("invalid config field env: " + cfg.env);
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

namespace {

void write_metrics_csv(const std::string& path, const RunRecord& rec) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "iteration,dataset_size,train_loss,val_loss,env_metric,beta_i\n";
  for (const auto& im : rec.metrics) {
    out << im.iteration << ',' << im.dataset_size << ',' << fmt_double(im.train_loss) << ','
        << fmt_double(im.val_loss) << ',' << fmt_double(im.env_metric) << ','
        << fmt_double(im.beta) << '\n';
  }
}

// m = 0 requests the per-iteration data volume of the original experiment
// grids: ~1000 racer points, ~5000 platformer points, ~1000 characters.
int default_trajectories(const std::string& env, int horizon) {
  if (env == "racer") return std::max(1, (1000 + horizon - 1) / std::max(1, horizon));
  if (env == "platformer") return 17;
  if (env == "seqlabel") return 90;
  return 10;
}

RunArtifacts run_single(const ExperimentConfig& rawcfg) {
  ExperimentConfig cfg = rawcfg;
  int horizon = 0;
  std::unique_ptr<EnvModel> model = make_env_model(cfg, horizon);
  if (cfg.trajectories == 0) cfg.trajectories = default_trajectories(cfg.env, horizon);
  const SurrogateLoss loss = SurrogateLoss::parse(cfg.loss);
  const LearnerConfig learner = LearnerConfig::parse(cfg.learner, cfg.lambda, cfg.epochs);
  RunOptions options;
  options.eval_episodes = cfg.eval_m;

  // the snapshot goes out first so a mid-run failure still leaves a record
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream snap(cfg.out_dir + "/config.snapshot");
    if (!snap) throw IoError("cannot write " + cfg.out_dir + "/config.snapshot");
    ExperimentConfig resolved = cfg;
    resolved.horizon = horizon;
    resolved.sweep_schedules.clear();
    resolved.serialize(snap);
  }

  RunArtifacts art;
  art.out_dir = cfg.out_dir;
  RunRecord& rec = art.record;
  try {
    if (cfg.algorithm == "dagger") {
      rec = dagger_run(*model, learner, cfg.iterations, cfg.trajectories, horizon,
                       BetaSchedule::parse(cfg.schedule), loss, cfg.seed, options);
    } else if (cfg.algorithm == "smile") {
      rec = smile_run(*model, learner, cfg.iterations, cfg.trajectories, horizon, cfg.alpha, loss,
                      cfg.seed, options);
    } else if (cfg.algorithm == "searn_greedy") {
      rec = searn_greedy_run(*model, learner, cfg.iterations, cfg.trajectories, horizon,
                             cfg.alpha, loss, cfg.seed, options);
    } else if (cfg.algorithm == "supervised") {
      rec = supervised_run(*model, learner, cfg.iterations, cfg.trajectories, horizon, loss,
                           cfg.seed, options);
    } else if (cfg.algorithm == "forward") {
      PolicyPtr fwd = forward_train(*model, learner, horizon, cfg.trajectories, loss, cfg.seed);
      rec.algorithm = "forward";
      rec.initial_policy = fwd;
      rec.trained.push_back(fwd);
      const EvalResult ev =
          evaluate_policy(*model, fwd, loss, cfg.eval_m, horizon, mix64(cfg.seed ^ 0xfe));
      IterationMetrics im;
      im.iteration = 1;
      im.dataset_size = static_cast<std::int64_t>(cfg.trajectories) * horizon;
      im.val_loss = ev.mean_loss;
      im.env_metric = ev.env_metric;
      im.beta = 0.0;
      rec.metrics.push_back(im);
    } else {
      throw ConfigError("invalid config field algorithm: " + cfg.algorithm);
    }
  } catch (const std::exception& e) {
    // leave what exists on disk plus the reason the run stopped
    std::ofstream log(cfg.out_dir + "/failure.log");
    log << e.what() << "\n";
    throw;
  }

  write_metrics_csv(cfg.out_dir + "/metrics.csv", rec);
  for (int i = 0; i < rec.n_iterations(); ++i) {
    save_model_file(cfg.out_dir + "/model_" + std::to_string(i + 1), rec.trained[i]);
  }
  {
    AggregateDataset all(model->learner_dim(), model->schema().action);
    for (const auto& d : rec.iteration_datasets) all.extend(d);
    all.save_file(cfg.out_dir + "/dataset");
  }

  // validation selection for the summary line
  int best = rec.n_iterations();
  if (rec.n_iterations() > 1 && cfg.algorithm != "forward") {
    select_best_on_validation(rec, *model, loss, cfg.m_val, horizon, mix64(cfg.seed ^ 0x5e1),
                              &best);
  }
  art.selected_iteration = best;
  std::ostringstream sum;
  sum << cfg.algorithm << " on " << cfg.env << ": N=" << rec.n_iterations()
      << " selected=" << best << " final_" << model->metric_name() << "="
      << fmt_double(rec.metrics.empty() ? 0.0 : rec.metrics.back().env_metric);
  art.summary = sum.str();
  return art;
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  if (cfg.sweep_schedules.empty()) return run_single(cfg);
  RunArtifacts last;
  for (const std::string& sched : cfg.sweep_schedules) {
    ExperimentConfig variant = cfg;
    variant.schedule = sched;
    variant.sweep_schedules.clear();
    std::string tag = sched;
    std::replace(tag.begin(), tag.end(), ':', '_');
    variant.out_dir = cfg.out_dir + "/" + tag;
    last = run_single(variant);
  }
  last.out_dir = cfg.out_dir;
  last.summary = "sweep over " + std::to_string(cfg.sweep_schedules.size()) + " schedules";
  return last;
}

// ---------------------------------------------------------------------------
// Learning curves
// ---------------------------------------------------------------------------

double student_t_95(int df) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                 2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                 2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                 2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (df < 1) throw ConfigError("degrees of freedom must be positive");
  if (df <= 30) return table[df - 1];
  return 1.96;
}

std::vector<CurvePoint> learning_curve_points(const std::vector<std::string>& run_dirs) {
  if (run_dirs.empty()) throw ConfigError("need at least one run directory");
  struct RunData {
    std::string method;
    std::string env;
    std::map<int, std::pair<double, double>> by_iter;  // iteration -> (data, metric)
  };
  std::vector<RunData> runs;
  for (const std::string& dir : run_dirs) {
    RunData rd;
    const ExperimentConfig cfg = ExperimentConfig::parse_file(dir + "/config.snapshot");
    rd.method = cfg.algorithm;
    if (cfg.algorithm == "dagger") rd.method += "_" + cfg.schedule;
    if (cfg.algorithm == "smile" || cfg.algorithm == "searn_greedy")
      rd.method += "_a" + fmt_double(cfg.alpha).substr(0, 4);
    rd.env = cfg.env;
    std::ifstream in(dir + "/metrics.csv");
    if (!in) throw IoError("cannot read " + dir + "/metrics.csv");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(ls, field, ',')) fields.push_back(field);
      if (fields.size() != 6) throw IoError("bad metrics row in " + dir);
      rd.by_iter[std::atoi(fields[0].c_str())] = {std::atof(fields[1].c_str()),
                                                  std::atof(fields[4].c_str())};
    }
    runs.push_back(std::move(rd));
  }
  for (const auto& rd : runs) {
    if (rd.env != runs.front().env)
      throw SchemaError("learning curve runs mix environments: " + rd.env + " vs " +
                        runs.front().env);
  }

  // checkpoints mirror the reporting grid {1, 5, 10, 15, 20}
  const std::vector<int> checkpoints = {1, 5, 10, 15, 20};
  std::map<std::string, std::vector<const RunData*>> by_method;
  for (const auto& rd : runs) by_method[rd.method].push_back(&rd);

  std::vector<CurvePoint> points;
  for (const auto& [method, group] : by_method) {
    for (int ck : checkpoints) {
      std::vector<double> metrics, datas;
      for (const RunData* rd : group) {
        const auto it = rd->by_iter.find(ck);
        if (it == rd->by_iter.end()) continue;
        datas.push_back(it->second.first);
        metrics.push_back(it->second.second);
      }
      if (metrics.empty()) continue;
      const int n = static_cast<int>(metrics.size());
      double mean = 0.0, data_mean = 0.0;
      for (int i = 0; i < n; ++i) {
        mean += metrics[i] / n;
        data_mean += datas[i] / n;
      }
      CurvePoint pt;
      pt.method = method;
      pt.cumulative_data = data_mean;
      pt.mean = mean;
      if (n >= 2) {
        double var = 0.0;
        for (double v : metrics) var += (v - mean) * (v - mean) / (n - 1);
        const double half = student_t_95(n - 1) * std::sqrt(var / n);
        pt.ci_low = mean - half;
        pt.ci_high = mean + half;
      } else {
        pt.ci_low = pt.ci_high = mean;
      }
      points.push_back(pt);
    }
  }
  return points;
}

void emit_learning_curve(const std::vector<std::string>& run_dirs, std::ostream& out) {
  const std::vector<CurvePoint> points = learning_curve_points(run_dirs);
  out << "method,cumulative_data,metric_mean,ci95_low,ci95_high\n";
  for (const auto& pt : points) {
    out << pt.method << ',' << fmt_double(pt.cumulative_data) << ',' << fmt_double(pt.mean) << ','
        << fmt_double(pt.ci_low) << ',' << fmt_double(pt.ci_high) << '\n';
  }
}

}  // namespace ilb
