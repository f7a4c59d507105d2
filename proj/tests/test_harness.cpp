#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"
#include "sharpopt/sharpopt.hpp"

using namespace sharpopt;

namespace {

std::string tmp_path(const std::string& name) { return std::string(SHARPOPT_TEST_TMP) + "/" + name; }

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs the CLI with stdout to `out_file` and stderr discarded; returns the exit code.
int cli(const std::string& args, const std::string& out_file = "/dev/null") {
  const std::string cmd = std::string("\"") + SHARPOPT_CLI + "\" " + args + " > \"" + out_file + "\" 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

const char* kQuadraticDoc = R"([objective]
kind = quadratic
curvature = 1.0, 2.0
center = 1.0, -1.0

[optimizer]
mode = sam
base = sgd
lr = 0.1
rho = 0.05

[run]
steps = 10
init = 0, 0
)";

}  // namespace

TEST(Config, ToyDefaults) {
  const RunConfig c = parse_config("[objective]\nkind = toy\n");
  EXPECT_EQ(c.objective.kind, ObjectiveKind::Toy);
  EXPECT_EQ(c.base.kind, BaseKind::SGDM);
  EXPECT_EQ(c.base.momentum_coeff, 0.9);
  EXPECT_EQ(c.sam.mode, SamMode::WsamDecoupled);
  EXPECT_EQ(c.sam.gamma, 0.5);
  EXPECT_EQ(c.sam.rho, 2.0);
  EXPECT_EQ(c.sam.alpha_schedule.base(), 5.0);
  EXPECT_EQ(c.steps, 150u);
  EXPECT_EQ(*c.init, (std::vector<double>{-6.0, 10.0}));
  EXPECT_EQ(c.format, OutputFormat::Csv);
}

TEST(Config, AllKeys) {
  const RunConfig c = parse_config(R"([objective]
kind = logistic
samples = 30
features = 4
label_noise = 0.1
data_seed = 3
[optimizer]
mode = coupled
base = adam
beta1 = 0.8
beta2 = 0.99
adam_eps = 1e-6
lr = 0.01
lr_schedule = inverse-sqrt
rho = 0.1
rho_schedule = inverse-sqrt
gamma = 0.7
sam_eps = 1e-10
adaptive = true
clip_norm = 5
[run]
steps = 20
seed = 4
init = random
init_scale = 0.5
batch_size = 8
record_every = 2
snapshots = never
format = jsonl
)");
  EXPECT_EQ(c.objective.kind, ObjectiveKind::Logistic);
  EXPECT_EQ(c.objective.samples, 30u);
  EXPECT_EQ(c.sam.mode, SamMode::WsamCoupled);
  EXPECT_EQ(c.base.kind, BaseKind::Adam);
  EXPECT_EQ(c.base.beta1, 0.8);
  EXPECT_EQ(c.sam.alpha_schedule.kind(), Schedule::Kind::InverseSqrt);
  EXPECT_EQ(c.sam.rho_decay, Schedule::Kind::InverseSqrt);
  EXPECT_TRUE(c.sam.adaptive);
  EXPECT_EQ(*c.sam.clip_norm, 5.0);
  EXPECT_TRUE(c.init_random);
  EXPECT_EQ(c.batch_size, 8u);
  EXPECT_EQ(c.record_every, 2u);
  EXPECT_EQ(c.snapshots, SnapshotPolicy::Never);
  EXPECT_EQ(c.format, OutputFormat::Jsonl);
}

TEST(Config, GammaOneNamesField) {
  try {
    parse_config("[objective]\nkind = toy\n[optimizer]\ngamma = 1.0\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "optimizer.gamma");
    EXPECT_NE(std::string(e.what()).find("gamma must be in [0,1)"), std::string::npos);
  }
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config("[optimizer]\nlr = 0.1\n"), ParseError);
  EXPECT_THROW(parse_config("[objective]\nkind = toy\n[optimizer]\nlearning_rate = 0.1\n"), ConfigError);
  EXPECT_THROW(parse_config("[objective]\nkind = toy\n[extra]\nx = 1\n"), ParseError);
  EXPECT_THROW(parse_config("[objective]\nkind = banana\n"), ConfigError);
  EXPECT_THROW(parse_config("[objective]\nkind = toy\n[optimizer]\nlr = fast\n"), ConfigError);
  EXPECT_THROW(parse_config("[objective]\nkind = toy\n[run]\nsteps = -3\n"), ConfigError);
  EXPECT_THROW(parse_config("[objective]\nkind = toy\n[run]\nsteps = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("[objective]\nkind = quadratic\ncurvature = 1, -1\n"), ConfigError);
  EXPECT_THROW(parse_config("[objective]\nkind = quadform\nmatrix = 1, 2; 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[objective]\nkind = toy\n[optimizer]\nrho = -1\n"), ConfigError);
  try {
    parse_config("[objective]\nkind = toy\n[objective]\nkind = toy\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Config, SweepGrid) {
  const SweepGrid g = parse_sweep("[objective]\nkind = toy\n[sweep]\ngamma = 0.5, 0.9\nrho = 1, 2\nseed = 1, 2, 3\n");
  EXPECT_EQ(g.size(), 12u);
  EXPECT_THROW(parse_sweep("[objective]\nkind = toy\n[sweep]\ngamma = 0.5, 1.0\n"), ConfigError);
  EXPECT_THROW(parse_sweep("[objective]\nkind = toy\n[sweep]\ngamma = 0.1, 0.2, 0.3\ncap = 2\n"), ConfigError);
  EXPECT_THROW(parse_sweep("[objective]\nkind = toy\n[sweep]\nseed = 1.5\n"), ConfigError);
}

TEST(Run, RecordCountAndPurity) {
  RunConfig c = parse_config(kQuadraticDoc);
  c.steps = 10;
  c.record_every = 3;
  const Trajectory traj = run(c);
  ASSERT_EQ(traj.records.size(), 4u);  // t = 1, 4, 7, 10
  EXPECT_EQ(traj.records.back().t, 10u);
  ASSERT_TRUE(traj.records.front().w);
  EXPECT_EQ(*traj.records.front().w, (ParamVector{0.0, 0.0}));
  const Trajectory again = run(c);
  EXPECT_EQ(*again.final_w, *traj.final_w);
}

TEST(Run, SeedControlsRandomInitAndBatches) {
  RunConfig c = parse_config(
      "[objective]\nkind = logistic\nsamples = 40\nfeatures = 3\n[optimizer]\nbase = sgd\nlr = 0.1\n"
      "[run]\nsteps = 20\ninit = random\nbatch_size = 5\n");
  c.seed = 1;
  const auto a = *run(c).final_w;
  const auto b = *run(c).final_w;
  c.seed = 2;
  const auto d = *run(c).final_w;
  EXPECT_EQ(a, b);
  EXPECT_NE(a, d);
}

TEST(Run, GradNormIsFullBatch) {
  RunConfig c = parse_config(
      "[objective]\nkind = quadratic\ncurvature = 1\ncenters = 20\n[optimizer]\nbase = sgd\nlr = 0.1\n"
      "[run]\nsteps = 5\ninit = 2\nbatch_size = 1\n");
  const auto obj = build_objective(c.objective);
  const Trajectory traj = run(c, *obj);
  for (const auto& r : traj.records) {
    EXPECT_NEAR(r.grad_norm, l2_norm(obj->grad(*r.w)), 1e-15);
  }
}

TEST(Run, BlowUpReportsStep) {
  RunConfig c = parse_config(
      "[objective]\nkind = quadratic\ncurvature = 10\n[optimizer]\nmode = vanilla\nbase = sgd\nlr = 1\n"
      "[run]\nsteps = 2000\ninit = 1\n");
  try {
    run(c);
    FAIL() << "expected RunFailure";
  } catch (const RunFailure& e) {
    EXPECT_GT(e.step(), 1u);
    EXPECT_LT(e.step(), 2000u);
    EXPECT_FALSE(e.partial().records.empty());
    EXPECT_TRUE(std::isfinite(e.partial().records.back().loss));
  }
}

TEST(Sweep, OrderFailuresAndSingleCell) {
  SweepGrid g = parse_sweep(
      "[objective]\nkind = quadratic\ncurvature = 10\n[optimizer]\nmode = sam\nbase = sgd\n"
      "[run]\nsteps = 300\ninit = 1\n[sweep]\nalpha = 0.01, 1.0\nseed = 5, 6\n");
  const auto rows = sweep(g, 2);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].alpha, 0.01);
  EXPECT_EQ(rows[0].seed, 5u);
  EXPECT_EQ(rows[1].seed, 6u);
  EXPECT_EQ(rows[2].alpha, 1.0);
  EXPECT_TRUE(rows[0].ok);
  EXPECT_TRUE(rows[1].ok);
  EXPECT_FALSE(rows[2].ok);
  EXPECT_FALSE(rows[3].ok);
  EXPECT_FALSE(rows[2].message.empty());

  SweepGrid single = parse_sweep("[objective]\nkind = toy\n[run]\nsteps = 20\n");
  ASSERT_EQ(sweep(single).size(), 1u);
}

TEST(Sweep, ParallelMatchesSerial) {
  SweepGrid g = parse_sweep("[objective]\nkind = toy\n[sweep]\ngamma = 0.5, 0.7, 0.9\nrho = 1, 2\n");
  const auto serial = sweep(g, 1);
  const auto parallel = sweep(g, 4);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].final_loss, parallel[i].final_loss);
    EXPECT_EQ(serial[i].minimum, parallel[i].minimum);
  }
}

TEST(Sweep, CoupledGammaFlipsMinimum) {
  SweepGrid g = parse_sweep("[objective]\nkind = toy\n[optimizer]\nmode = coupled\n[sweep]\ngamma = 0.6, 0.95\neig = true\n");
  const auto rows = sweep(g);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].minimum, MinimumKind::Sharp);
  EXPECT_EQ(rows[1].minimum, MinimumKind::Flat);
  EXPECT_GT(*rows[0].lambda_max, *rows[1].lambda_max);
}

TEST(Emit, OneStepToyRun) {
  RunConfig c = toy_recipe(SamMode::WsamDecoupled, 0.5);
  c.steps = 1;
  const Trajectory traj = run(c);
  std::ostringstream csv, jsonl;
  const std::size_t bytes = write_csv(traj, csv);
  EXPECT_EQ(bytes, csv.str().size());
  EXPECT_EQ(count_lines(csv.str()), 2u);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "step,loss,grad_norm,sharpness,w_0,w_1");
  write_jsonl(traj, jsonl);
  EXPECT_EQ(count_lines(jsonl.str()), 1u);
}

TEST(Emit, CsvRoundTripIsExact) {
  const Trajectory traj = run(toy_recipe(SamMode::SAM, 0.5));
  std::stringstream ss;
  write_csv(traj, ss);
  const Trajectory back = read_csv(ss);
  ASSERT_EQ(back.records.size(), traj.records.size());
  for (std::size_t i = 0; i < traj.records.size(); ++i) {
    EXPECT_EQ(back.records[i].t, traj.records[i].t);
    EXPECT_EQ(back.records[i].loss, traj.records[i].loss);
    EXPECT_EQ(back.records[i].grad_norm, traj.records[i].grad_norm);
    EXPECT_EQ(back.records[i].sharpness, traj.records[i].sharpness);
    EXPECT_EQ(back.records[i].w, traj.records[i].w);
  }
}

TEST(Emit, JsonlParses) {
  RunConfig c = parse_config(kQuadraticDoc);
  c.sam.mode = SamMode::Vanilla;
  const Trajectory traj = run(c);
  std::stringstream ss;
  write_jsonl(traj, ss);
  std::string line;
  std::size_t k = 0;
  while (std::getline(ss, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["step"].get<std::uint64_t>(), traj.records[k].t);
    EXPECT_EQ(j["loss"].get<double>(), traj.records[k].loss);
    EXPECT_TRUE(j["sharpness"].is_null());
    EXPECT_EQ(j["w_1"].get<double>(), (*traj.records[k].w)[1]);
    ++k;
  }
  EXPECT_EQ(k, traj.records.size());
}

TEST(Cli, RunWritesConfiguredOutput) {
  const std::string cfg = tmp_path("harness_quad.ini");
  write_file(cfg, kQuadraticDoc);
  const std::string out = tmp_path("harness_quad.csv");
  EXPECT_EQ(cli("run --config \"" + cfg + "\" --out \"" + out + "\""), 0);
  EXPECT_EQ(count_lines(read_file(out)), 11u);
  EXPECT_EQ(cli("run --config \"" + cfg + "\" --format jsonl", out), 0);
  EXPECT_EQ(count_lines(read_file(out)), 10u);
}

TEST(Cli, ExitCodes) {
  const std::string bad = tmp_path("harness_bad.ini");
  write_file(bad, "[objective]\nkind = toy\n[optimizer]\ngamma = 1.0\n");
  EXPECT_EQ(cli("run --config \"" + bad + "\""), 1);
  EXPECT_EQ(cli("run --config \"" + tmp_path("does_not_exist.ini") + "\""), 3);
  const std::string blow = tmp_path("harness_blow.ini");
  write_file(blow, "[objective]\nkind = quadratic\ncurvature = 10\n[optimizer]\nmode = vanilla\nbase = sgd\nlr = 1\n"
                   "[run]\nsteps = 2000\ninit = 1\n");
  EXPECT_EQ(cli("run --config \"" + blow + "\""), 2);
  EXPECT_EQ(cli("toy --gamma 1.5"), 1);
  EXPECT_EQ(cli("toy"), 1);
  EXPECT_EQ(cli("nonsense"), 1);
  EXPECT_EQ(cli("--help"), 0);
}

TEST(Cli, ToyIsByteIdentical) {
  const std::string a = tmp_path("harness_toy_a.csv"), b = tmp_path("harness_toy_b.csv");
  ASSERT_EQ(cli("toy --gamma 0.95", a), 0);
  ASSERT_EQ(cli("toy --gamma 0.95", b), 0);
  EXPECT_EQ(read_file(a), read_file(b));
  EXPECT_EQ(count_lines(read_file(a)), 151u);
}

TEST(Cli, EigAndSweep) {
  const std::string cfg = tmp_path("harness_eig.ini");
  write_file(cfg, "[objective]\nkind = quadform\nmatrix = 2, 1; 1, 2\n[run]\nsteps = 1\n"
                  "[sweep]\nrho = 0.01, 0.02\n");
  const std::string out = tmp_path("harness_eig.json");
  ASSERT_EQ(cli("eig --config \"" + cfg + "\" --at init", out), 0);
  const auto j = nlohmann::json::parse(read_file(out));
  EXPECT_NEAR(j["lambda_max"].get<double>(), 3.0, 3e-3);
  ASSERT_EQ(cli("sweep --config \"" + cfg + "\"", out), 0);
  EXPECT_EQ(count_lines(read_file(out)), 3u);
}
