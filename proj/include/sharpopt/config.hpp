// Run and sweep configuration: a sectioned key/value (INI) document.
//
//   [objective]   kind = toy | quadratic | quadform | logistic, plus kind keys
//   [optimizer]   mode, base, lr, rho, gamma, schedules, base coefficients
//   [run]         steps, seed, init, batch_size, record_every, snapshots, out
//   [sweep]       gamma / rho / alpha / seed lists, cap, eig
//
// Unknown sections and keys are rejected.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sharpopt/base_optimizers.hpp"
#include "sharpopt/core.hpp"
#include "sharpopt/sam_family.hpp"

namespace sharpopt {

/// Malformed document. Carries the 1-based line when known (0 otherwise).
class ParseError : public UsageError {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : UsageError(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed document with an invalid value; names the offending field.
class ConfigError : public UsageError {
 public:
  ConfigError(const std::string& field, const std::string& constraint)
      : UsageError(field + ": " + constraint), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class ObjectiveKind { Toy, Quadratic, QuadForm, Logistic };

inline std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::Toy: return "toy";
    case ObjectiveKind::Quadratic: return "quadratic";
    case ObjectiveKind::QuadForm: return "quadform";
    case ObjectiveKind::Logistic: return "logistic";
  }
  return "?";
}

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::Toy;
  // quadratic
  std::vector<double> curvature{1.0};
  std::vector<double> center;  // empty: zeros
  std::size_t centers = 1;     // >1 draws that many noisy centers
  double center_scale = 1.0;
  // quadform, rows separated by ';'
  std::size_t matrix_dim = 0;
  std::vector<double> matrix;
  // logistic
  std::string data_path;  // empty: synthetic
  std::size_t samples = 200;
  std::size_t features = 5;
  double label_noise = 0.0;
  std::uint64_t data_seed = 0;
};

enum class SnapshotPolicy { Auto, Always, Never };
enum class OutputFormat { Csv, Jsonl };

inline constexpr std::size_t kAutoSnapshotMaxDim = 16;

struct RunConfig {
  ObjectiveSpec objective;
  BaseOptConfig base;
  SamConfig sam;
  std::uint64_t steps = 100;
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> init;  // unset: zeros, or seeded random if init_random
  bool init_random = false;
  double init_scale = 1.0;
  std::size_t batch_size = 0;  // 0: full batch
  std::uint64_t record_every = 1;
  SnapshotPolicy snapshots = SnapshotPolicy::Auto;
  std::string out;  // empty: stdout
  OutputFormat format = OutputFormat::Csv;
};

struct SweepGrid {
  RunConfig base;
  std::vector<double> gammas;
  std::vector<double> rhos;
  std::vector<double> alphas;
  std::vector<std::uint64_t> seeds;
  std::size_t cap = 10000;
  bool eig = false;

  std::size_t size() const {
    auto dim = [](std::size_t k) { return k == 0 ? std::size_t{1} : k; };
    return dim(gammas.size()) * dim(rhos.size()) * dim(alphas.size()) * dim(seeds.size());
  }
};

/// The toy-landscape recipe: SGDM(0.9), lr 5, rho 2, 150 steps from (-6, 10).
inline RunConfig toy_recipe(SamMode mode, double gamma) {
  RunConfig cfg;
  cfg.objective.kind = ObjectiveKind::Toy;
  cfg.base = BaseOptConfig::sgdm(0.9);
  cfg.sam.mode = mode;
  cfg.sam.gamma = gamma;
  cfg.sam.rho = 2.0;
  cfg.sam.alpha_schedule = Schedule::constant(5.0);
  cfg.steps = 150;
  cfg.init = std::vector<double>{-6.0, 10.0};
  return cfg;
}

namespace config_detail {

namespace pt = boost::property_tree;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool present() const { return tree_ != nullptr; }

  void allow(std::initializer_list<const char*> keys) const {
    if (!tree_) return;
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [key, node] : *tree_) {
      if (!ok.count(key)) throw ConfigError(name_ + "." + key, "unknown key");
    }
  }

  std::optional<std::string> raw(const char* key) const {
    if (!tree_) return std::nullopt;
    auto child = tree_->get_child_optional(key);
    if (!child) return std::nullopt;
    return trim(child->data());
  }

  std::string field(const char* key) const { return name_ + "." + key; }

  double real(const char* key, double fallback) const {
    auto v = raw(key);
    return v ? to_real(*v, field(key)) : fallback;
  }

  std::uint64_t uint(const char* key, std::uint64_t fallback) const {
    auto v = raw(key);
    return v ? to_uint(*v, field(key)) : fallback;
  }

  bool boolean(const char* key, bool fallback) const {
    auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(field(key), "expected true or false");
  }

  std::string text(const char* key, const std::string& fallback) const {
    auto v = raw(key);
    return v ? *v : fallback;
  }

  std::vector<double> reals(const char* key) const {
    auto v = raw(key);
    if (!v) return {};
    return to_reals(*v, field(key), ',');
  }

  static double to_real(const std::string& s, const std::string& field) {
    try {
      std::size_t used = 0;
      const double x = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return x;
    } catch (const std::exception&) {
      throw ConfigError(field, "expected a real number, got '" + s + "'");
    }
  }

  static std::uint64_t to_uint(const std::string& s, const std::string& field) {
    try {
      if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
      std::size_t used = 0;
      const auto x = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return x;
    } catch (const std::exception&) {
      throw ConfigError(field, "expected a nonnegative integer, got '" + s + "'");
    }
  }

  static std::vector<double> to_reals(const std::string& s, const std::string& field, char sep) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(to_real(trim(item), field));
    if (out.empty()) throw ConfigError(field, "expected a nonempty list");
    return out;
  }

 private:
  std::string name_;
  const pt::ptree* tree_;
};

inline Schedule::Kind schedule_kind(const std::string& s, const std::string& field) {
  if (s == "constant") return Schedule::Kind::Constant;
  if (s == "inverse-sqrt") return Schedule::Kind::InverseSqrt;
  throw ConfigError(field, "expected constant or inverse-sqrt");
}

struct Document {
  pt::ptree tree;

  Section section(const char* name) const {
    auto child = tree.get_child_optional(name);
    return Section(name, child ? &*child : nullptr);
  }
};

inline Document read_document(const std::string& text) {
  Document doc;
  std::istringstream in(text);
  try {
    pt::read_ini(in, doc.tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  static const std::set<std::string> known{"objective", "optimizer", "run", "sweep"};
  for (const auto& [name, node] : doc.tree) {
    if (node.empty() && !node.data().empty()) {
      throw ParseError("key '" + name + "' outside of any section", 0);
    }
    if (!known.count(name)) throw ParseError("unknown section [" + name + "]", 0);
  }
  return doc;
}

inline SamMode parse_mode(const std::string& s, const std::string& field) {
  if (s == "vanilla") return SamMode::Vanilla;
  if (s == "sam") return SamMode::SAM;
  if (s == "wsam" || s == "wsam-decoupled") return SamMode::WsamDecoupled;
  if (s == "coupled" || s == "wsam-coupled") return SamMode::WsamCoupled;
  throw ConfigError(field, "expected vanilla, sam, wsam or coupled");
}

inline BaseKind parse_base(const std::string& s, const std::string& field) {
  if (s == "sgd") return BaseKind::SGD;
  if (s == "sgdm") return BaseKind::SGDM;
  if (s == "adam") return BaseKind::Adam;
  throw ConfigError(field, "expected sgd, sgdm or adam");
}

template <typename F>
void rethrow_as(const std::string& field, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const UsageError& e) {
    throw ConfigError(field, e.what());
  }
}

inline RunConfig build_run_config(const Document& doc) {
  const Section obj = doc.section("objective");
  if (!obj.present()) throw ParseError("missing [objective] section", 0);
  obj.allow({"kind", "curvature", "center", "centers", "center_scale", "matrix", "data",
             "samples", "features", "label_noise", "data_seed"});

  RunConfig cfg;
  const std::string kind = obj.text("kind", "");
  if (kind.empty()) throw ConfigError("objective.kind", "required");
  ObjectiveSpec& os = cfg.objective;
  if (kind == "toy") {
    os.kind = ObjectiveKind::Toy;
  } else if (kind == "quadratic") {
    os.kind = ObjectiveKind::Quadratic;
  } else if (kind == "quadform") {
    os.kind = ObjectiveKind::QuadForm;
  } else if (kind == "logistic") {
    os.kind = ObjectiveKind::Logistic;
  } else {
    throw ConfigError("objective.kind", "expected toy, quadratic, quadform or logistic");
  }

  if (auto c = obj.reals("curvature"); !c.empty()) os.curvature = c;
  os.center = obj.reals("center");
  os.centers = obj.uint("centers", 1);
  os.center_scale = obj.real("center_scale", 1.0);
  if (auto m = obj.raw("matrix")) {
    std::stringstream rows(*m);
    std::string row;
    std::size_t n_rows = 0;
    while (std::getline(rows, row, ';')) {
      auto vals = Section::to_reals(trim(row), "objective.matrix", ',');
      if (os.matrix_dim == 0) os.matrix_dim = vals.size();
      if (vals.size() != os.matrix_dim) throw ConfigError("objective.matrix", "rows differ in length");
      os.matrix.insert(os.matrix.end(), vals.begin(), vals.end());
      ++n_rows;
    }
    if (n_rows != os.matrix_dim) throw ConfigError("objective.matrix", "matrix must be square");
  }
  os.data_path = obj.text("data", "");
  os.samples = obj.uint("samples", 200);
  os.features = obj.uint("features", 5);
  os.label_noise = obj.real("label_noise", 0.0);
  os.data_seed = obj.uint("data_seed", 0);

  if (os.kind == ObjectiveKind::Quadratic) {
    for (double a : os.curvature) {
      if (!(a > 0.0)) throw ConfigError("objective.curvature", "entries must be > 0");
    }
    if (!os.center.empty() && os.center.size() != os.curvature.size()) {
      throw ConfigError("objective.center", "dimension must match curvature");
    }
    if (os.centers == 0) throw ConfigError("objective.centers", "must be >= 1");
    if (!(os.center_scale >= 0.0)) throw ConfigError("objective.center_scale", "must be >= 0");
  }
  if (os.kind == ObjectiveKind::QuadForm && os.matrix.empty()) {
    throw ConfigError("objective.matrix", "required for quadform");
  }
  if (os.kind == ObjectiveKind::Logistic) {
    if (!(os.label_noise >= 0.0 && os.label_noise < 1.0)) {
      throw ConfigError("objective.label_noise", "must be in [0,1)");
    }
    if (os.data_path.empty() && (os.samples == 0 || os.features == 0)) {
      throw ConfigError("objective.samples", "samples and features must be >= 1");
    }
  }

  // Toy objective defaults follow the 2-D recipe.
  const bool toy = os.kind == ObjectiveKind::Toy;
  if (toy) {
    const RunConfig recipe = toy_recipe(SamMode::WsamDecoupled, 0.5);
    cfg.base = recipe.base;
    cfg.sam = recipe.sam;
    cfg.steps = recipe.steps;
    cfg.init = recipe.init;
  }

  const Section opt = doc.section("optimizer");
  opt.allow({"mode", "base", "momentum", "beta1", "beta2", "adam_eps", "lr", "lr_schedule", "rho",
             "rho_schedule", "gamma", "sam_eps", "adaptive", "clip_norm"});
  cfg.sam.mode = parse_mode(opt.text("mode", to_string(cfg.sam.mode)), opt.field("mode"));
  cfg.base.kind = parse_base(opt.text("base", to_string(cfg.base.kind)), opt.field("base"));
  cfg.base.momentum_coeff = opt.real("momentum", cfg.base.momentum_coeff);
  cfg.base.beta1 = opt.real("beta1", cfg.base.beta1);
  cfg.base.beta2 = opt.real("beta2", cfg.base.beta2);
  cfg.base.eps_adam = opt.real("adam_eps", cfg.base.eps_adam);
  {
    const double lr = opt.real("lr", cfg.sam.alpha_schedule.base());
    const auto kind = schedule_kind(opt.text("lr_schedule", "constant"), opt.field("lr_schedule"));
    rethrow_as(opt.field("lr"), [&] { cfg.sam.alpha_schedule = Schedule(kind, lr); });
  }
  cfg.sam.rho = opt.real("rho", cfg.sam.rho);
  cfg.sam.rho_decay = schedule_kind(opt.text("rho_schedule", "constant"), opt.field("rho_schedule"));
  cfg.sam.gamma = opt.real("gamma", cfg.sam.gamma);
  cfg.sam.sam_eps = opt.real("sam_eps", cfg.sam.sam_eps);
  cfg.sam.adaptive = opt.boolean("adaptive", cfg.sam.adaptive);
  if (opt.raw("clip_norm")) cfg.sam.clip_norm = opt.real("clip_norm", 0.0);

  auto field_of = [&](const std::string& msg) -> std::string {
    for (const char* k : {"gamma", "rho", "sam_eps", "clip_norm", "momentum", "beta1", "beta2"}) {
      if (msg.rfind(k, 0) == 0) return opt.field(k);
    }
    if (msg.rfind("adam_eps", 0) == 0) return opt.field("adam_eps");
    return "optimizer";
  };
  try {
    cfg.sam.validate();
    cfg.base.validate();
  } catch (const UsageError& e) {
    throw ConfigError(field_of(e.what()), e.what());
  }

  const Section run = doc.section("run");
  run.allow({"steps", "seed", "init", "init_scale", "batch_size", "record_every", "snapshots",
             "out", "format"});
  cfg.steps = run.uint("steps", cfg.steps);
  if (cfg.steps < 1) throw ConfigError("run.steps", "must be >= 1");
  cfg.seed = run.uint("seed", cfg.seed);
  if (auto init = run.raw("init")) {
    if (*init == "random") {
      cfg.init.reset();
      cfg.init_random = true;
    } else if (*init == "zeros") {
      cfg.init.reset();
      cfg.init_random = false;
    } else {
      cfg.init = Section::to_reals(*init, "run.init", ',');
    }
  }
  cfg.init_scale = run.real("init_scale", cfg.init_scale);
  if (!(cfg.init_scale > 0.0)) throw ConfigError("run.init_scale", "must be > 0");
  cfg.batch_size = run.uint("batch_size", 0);
  cfg.record_every = run.uint("record_every", 1);
  if (cfg.record_every < 1) throw ConfigError("run.record_every", "must be >= 1");
  const std::string snaps = run.text("snapshots", "auto");
  if (snaps == "auto") {
    cfg.snapshots = SnapshotPolicy::Auto;
  } else if (snaps == "always") {
    cfg.snapshots = SnapshotPolicy::Always;
  } else if (snaps == "never") {
    cfg.snapshots = SnapshotPolicy::Never;
  } else {
    throw ConfigError("run.snapshots", "expected auto, always or never");
  }
  cfg.out = run.text("out", "");
  const std::string fmt = run.text("format", "csv");
  if (fmt == "csv") {
    cfg.format = OutputFormat::Csv;
  } else if (fmt == "jsonl") {
    cfg.format = OutputFormat::Jsonl;
  } else {
    throw ConfigError("run.format", "expected csv or jsonl");
  }
  return cfg;
}

inline SweepGrid build_sweep_grid(const Document& doc) {
  SweepGrid grid;
  grid.base = build_run_config(doc);
  const Section sw = doc.section("sweep");
  sw.allow({"gamma", "rho", "alpha", "seed", "cap", "eig"});
  grid.gammas = sw.reals("gamma");
  grid.rhos = sw.reals("rho");
  grid.alphas = sw.reals("alpha");
  for (double s : sw.reals("seed")) {
    if (!(s >= 0.0) || s != static_cast<double>(static_cast<std::uint64_t>(s))) {
      throw ConfigError("sweep.seed", "seeds must be nonnegative integers");
    }
    grid.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  grid.cap = sw.uint("cap", 10000);
  grid.eig = sw.boolean("eig", false);
  for (double g : grid.gammas) {
    if (!(g >= 0.0 && g < 1.0)) throw ConfigError("sweep.gamma", "gamma must be in [0,1)");
  }
  for (double r : grid.rhos) {
    if (!(r >= 0.0)) throw ConfigError("sweep.rho", "rho must be >= 0");
  }
  for (double a : grid.alphas) {
    if (!(a > 0.0)) throw ConfigError("sweep.alpha", "alpha must be > 0");
  }
  if (grid.size() > grid.cap) {
    throw ConfigError("sweep", "grid has " + std::to_string(grid.size()) + " cells, cap is " +
                                   std::to_string(grid.cap));
  }
  return grid;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace config_detail

/// Parses and validates a run document. A [sweep] section is checked for
/// unknown keys but otherwise ignored.
inline RunConfig parse_config(const std::string& text) {
  const auto doc = config_detail::read_document(text);
  config_detail::Section("sweep", doc.tree.get_child_optional("sweep").get_ptr())
      .allow({"gamma", "rho", "alpha", "seed", "cap", "eig"});
  return config_detail::build_run_config(doc);
}

inline SweepGrid parse_sweep(const std::string& text) {
  return config_detail::build_sweep_grid(config_detail::read_document(text));
}

inline RunConfig parse_config_file(const std::string& path) {
  return parse_config(config_detail::read_text_file(path));
}

inline SweepGrid parse_sweep_file(const std::string& path) {
  return parse_sweep(config_detail::read_text_file(path));
}

}  // namespace sharpopt
