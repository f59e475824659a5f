#include "hmfront/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "hmfront/adaptive_epsilon.hpp"
#include "hmfront/error.hpp"
#include "hmfront/moments.hpp"
#include "hmfront/parallel.hpp"
#include "hmfront/pareto_tracer.hpp"
#include "hmfront/quality.hpp"
#include "hmfront/random.hpp"
#include "hmfront/scalarization.hpp"
#include "hmfront/synthetic.hpp"

namespace hmfront {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

enum class Kind { integer, number, boolean, int_pair, number_list };
using Schema = std::vector<std::pair<std::string, Kind>>;

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::integer:
      return "an integer";
    case Kind::number:
      return "a number";
    case Kind::boolean:
      return "a boolean";
    case Kind::int_pair:
      return "a pair of integers";
    case Kind::number_list:
      return "a nonempty list of numbers";
  }
  return "a value";
}

bool matches(const nlohmann::json& v, Kind k) {
  switch (k) {
    case Kind::integer:
      return v.is_number_integer();
    case Kind::number:
      return v.is_number();
    case Kind::boolean:
      return v.is_boolean();
    case Kind::int_pair:
      return v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer();
    case Kind::number_list:
      if (!v.is_array() || v.empty()) return false;
      return std::all_of(v.begin(), v.end(), [](const nlohmann::json& e) { return e.is_number(); });
  }
  return false;
}

const std::map<std::string, Schema>& schemas() {
  static const std::map<std::string, Schema> s{
      {"epsilon",
       {{"counts", Kind::int_pair},
        {"minimized", Kind::integer},
        {"rounds", Kind::integer},
        {"alpha", Kind::number},
        {"k", Kind::integer}}},
      {"tracer",
       {{"tau", Kind::number},
        {"n_starts", Kind::integer},
        {"max_points", Kind::integer},
        {"corrector_tol", Kind::number}}},
      {"nbi", {{"divisions", Kind::integer}}},
      {"sf", {{"divisions", Kind::integer}}},
      {"msf", {{"divisions", Kind::integer}}},
      {"sp", {{"divisions", Kind::integer}, {"modified", Kind::boolean}}},
      {"pgp", {{"alpha", Kind::number_list}, {"beta", Kind::number_list}}},
      {"utility", {{"lambdas", Kind::number_list}, {"starts", Kind::integer}}},
      {"utility_iterative",
       {{"lambdas", Kind::number_list}, {"max_repeats", Kind::integer}, {"fixed_point_tol", Kind::number}}},
      {"verify", {{"samples", Kind::integer}, {"grid", Kind::int_pair}}},
      {"quality", {{"reference_counts", Kind::int_pair}, {"reference_points", Kind::integer}}},
      {"moments", {}},
  };
  return s;
}

void validate_params(const nlohmann::json& params, const std::string& owner) {
  if (!params.is_object()) throw ParameterError("params must be a JSON object");
  const Schema& schema = schemas().at(owner);
  for (const auto& [key, value] : params.items()) {
    auto it = std::find_if(schema.begin(), schema.end(), [&](const auto& e) { return e.first == key; });
    if (it == schema.end()) {
      std::string allowed;
      for (const auto& e : schema) allowed += (allowed.empty() ? "" : ", ") + e.first;
      throw ParameterError("unknown parameter '" + key + "' for " + owner +
                           (allowed.empty() ? " (it takes none)" : " (allowed: " + allowed + ")"));
    }
    if (!matches(value, it->second))
      throw ParameterError("parameter '" + key + "' for " + owner + " must be " + kind_name(it->second));
  }
}

// Typed lookups with defaults; the effective value is recorded in `used`.
class Params {
 public:
  explicit Params(const nlohmann::json& p) : p_(p) {}

  int integer(const std::string& key, int fallback, int min_value) {
    const int v = p_.contains(key) ? p_[key].get<int>() : fallback;
    if (v < min_value)
      throw ParameterError("parameter '" + key + "' must be at least " + std::to_string(min_value));
    used_[key] = v;
    return v;
  }
  double number(const std::string& key, double fallback) {
    const double v = p_.contains(key) ? p_[key].get<double>() : fallback;
    if (!std::isfinite(v)) throw ParameterError("parameter '" + key + "' must be finite");
    used_[key] = v;
    return v;
  }
  bool boolean(const std::string& key, bool fallback) {
    const bool v = p_.contains(key) ? p_[key].get<bool>() : fallback;
    used_[key] = v;
    return v;
  }
  std::array<int, 2> pair(const std::string& key, std::array<int, 2> fallback) {
    std::array<int, 2> v = fallback;
    if (p_.contains(key)) v = {p_[key][0].get<int>(), p_[key][1].get<int>()};
    if (v[0] < 1 || v[1] < 1) throw ParameterError("parameter '" + key + "' entries must be at least 1");
    used_[key] = {v[0], v[1]};
    return v;
  }
  std::vector<double> list(const std::string& key, std::vector<double> fallback) {
    std::vector<double> v = fallback;
    if (p_.contains(key)) v = p_[key].get<std::vector<double>>();
    for (double x : v)
      if (!std::isfinite(x)) throw ParameterError("parameter '" + key + "' entries must be finite");
    used_[key] = v;
    return v;
  }
  const json& used() const { return used_; }

 private:
  const nlohmann::json& p_;
  json used_ = json::object();
};

std::vector<Objective> parse_objectives(const std::vector<std::string>& names) {
  std::vector<Objective> out;
  for (const auto& name : names) {
    const Objective o = parse_objective(name);
    if (std::find(out.begin(), out.end(), o) != out.end())
      throw ParameterError("objective '" + name + "' is listed twice");
    out.push_back(o);
  }
  if (out.size() < 2) throw ParameterError("at least two objectives are required");
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(s);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

SyntheticSpec parse_synthetic(const std::vector<std::string>& v) {
  if (v.size() != 4) throw ParameterError("--synthetic takes n T seed level");
  SyntheticSpec s;
  try {
    std::size_t used = 0;
    s.assets = std::stoi(v[0], &used);
    if (used != v[0].size()) throw std::invalid_argument(v[0]);
    s.periods = std::stoi(v[1], &used);
    if (used != v[1].size()) throw std::invalid_argument(v[1]);
    s.seed = std::stoull(v[2], &used);
    if (used != v[2].size()) throw std::invalid_argument(v[2]);
    s.level = std::stod(v[3], &used);
    if (used != v[3].size()) throw std::invalid_argument(v[3]);
  } catch (const std::logic_error&) {
    throw ParameterError("--synthetic: expected integers n, T, seed and a number level");
  }
  return s;
}

void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("config: " + path + ": " + e.what());
  }
  if (!j.is_object()) throw DataError("config: the document must be a JSON object");
  static const std::vector<std::string> keys{"input", "synthetic", "method", "params", "objectives",
                                             "seed",  "workers",   "out",    "gnuplot", "full_tensors",
                                             "front", "reference"};
  for (const auto& [key, value] : j.items())
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ParameterError("config: unknown field '" + key + "'");
  try {
    if (j.contains("input")) c.input_path = j["input"].get<std::string>();
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      SyntheticSpec spec;
      if (s.is_array()) {
        if (s.size() != 4) throw ParameterError("config: synthetic takes [n, T, seed, level]");
        spec = {s[0].get<int>(), s[1].get<int>(), s[2].get<std::uint64_t>(), s[3].get<double>()};
      } else {
        for (const auto& [key, value] : s.items())
          if (key != "assets" && key != "periods" && key != "seed" && key != "level")
            throw ParameterError("config: unknown synthetic field '" + key + "'");
        spec.assets = s.value("assets", spec.assets);
        spec.periods = s.value("periods", spec.periods);
        spec.seed = s.value("seed", spec.seed);
        spec.level = s.value("level", spec.level);
      }
      c.synthetic = spec;
    }
    if (j.contains("method")) c.method = j["method"].get<std::string>();
    if (j.contains("params")) c.method_params = j["params"];
    if (j.contains("objectives")) c.objectives = parse_objectives(j["objectives"].get<std::vector<std::string>>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j["workers"].get<int>();
    if (j.contains("out")) c.output_dir = j["out"].get<std::string>();
    if (j.contains("gnuplot")) c.gnuplot = j["gnuplot"].get<bool>();
    if (j.contains("full_tensors")) c.full_tensors = j["full_tensors"].get<bool>();
    if (j.contains("front")) c.front_path = j["front"].get<std::string>();
    if (j.contains("reference")) c.reference_path = j["reference"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Instances and output helpers

struct Instance {
  ReturnsMatrixd returns;
  json description;
};

Instance load_instance(const RunConfig& c) {
  if (c.synthetic && !c.input_path.empty()) throw ParameterError("--input and --synthetic are mutually exclusive");
  if (c.synthetic) {
    const SyntheticSpec& s = *c.synthetic;
    Instance inst{synthetic_returns(s.assets, s.periods, s.seed, s.level), json::object()};
    inst.description["source"] = "synthetic";
    inst.description["synthetic"] = {{"assets", s.assets}, {"periods", s.periods}, {"seed", s.seed}, {"level", s.level}};
    inst.description["assets"] = inst.returns.assets();
    inst.description["periods"] = inst.returns.periods();
    return inst;
  }
  if (c.input_path.empty()) throw ParameterError("an instance is required: pass --input or --synthetic");
  Instance inst{read_returns_csv(c.input_path), json::object()};
  inst.description["source"] = c.input_path;
  inst.description["assets"] = inst.returns.assets();
  inst.description["periods"] = inst.returns.periods();
  return inst;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> to_vector(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_vector(m.row(i).transpose()));
  return rows;
}

json objective_names(const std::vector<Objective>& objectives) {
  json names = json::array();
  for (Objective o : objectives) names.push_back(to_string(o));
  return names;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path prepare_output(const RunConfig& c) {
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + c.output_dir + "': " + ec.message());
  return dir;
}

ScalarizationOptions solver_options(const RunConfig& c) {
  ScalarizationOptions o;
  o.workers = 1;
  (void)c;
  return o;
}

// ---------------------------------------------------------------------------
// moments

json tensor_summary(const MatrixXd& t, Eigen::Index n, int order) {
  Eigen::Index rmin = 0, cmin = 0, rmax = 0, cmax = 0;
  const double lo = t.minCoeff(&rmin, &cmin);
  const double hi = t.maxCoeff(&rmax, &cmax);
  auto index = [&](Eigen::Index r, Eigen::Index col) {
    std::vector<Eigen::Index> idx{r};
    std::vector<Eigen::Index> rest;
    for (int k = 1; k < order; ++k) {
      rest.push_back(col % n);
      col /= n;
    }
    idx.insert(idx.end(), rest.rbegin(), rest.rend());
    return idx;
  };
  return {{"frobenius_norm", t.norm()},
          {"min", {{"value", lo}, {"index", index(rmin, cmin)}}},
          {"max", {{"value", hi}, {"index", index(rmax, cmax)}}}};
}

int cmd_moments(const RunConfig& c, std::ostream& out) {
  validate_params(c.method_params.is_null() ? nlohmann::json::object() : c.method_params, "moments");
  const Instance inst = load_instance(c);
  const MomentSetd m = compute_moments(inst.returns);
  const Eigen::Index n = m.assets();
  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "moments";
  j["instance"] = inst.description;
  j["n"] = n;
  j["T"] = m.periods();
  j["mu"] = to_vector(m.mu());
  j["sigma"] = matrix_json(m.sigma());
  json zero = json::array();
  for (Eigen::Index i = 0; i < n; ++i)
    if (m.sigma()(i, i) == 0.0) zero.push_back(inst.returns.assets()[std::size_t(i)]);
  j["zero_variance_assets"] = zero;
  j["coskewness"] = tensor_summary(m.m3(), n, 3);
  j["cokurtosis"] = tensor_summary(m.m4(), n, 4);
  if (c.full_tensors) {
    j["coskewness"]["matrix"] = matrix_json(m.m3());
    j["cokurtosis"]["matrix"] = matrix_json(m.m4());
  }
  const fs::path dir = prepare_output(c);
  write_json(dir / "moments.json", j);
  out << "wrote " << (dir / "moments.json").string() << "\n";
  return int(ExitCode::ok);
}

// ---------------------------------------------------------------------------
// front

struct FrontRow {
  VectorXd weights;
  std::vector<double> params;
  std::vector<double> multipliers;
};

struct FrontOutput {
  std::vector<std::string> param_names;
  std::vector<std::string> multiplier_names;
  std::vector<FrontRow> rows;
  json failures = json::array();
  json summary = json::object();
  std::vector<std::string> warnings;
};

std::string status_name(const ScalarizationResult& r) { return to_string(r.solution.status); }

// All beta >= 0 with sum 1 on the lattice of spacing 1/divisions.
std::vector<VectorXd> beta_lattice(int m, int divisions) {
  std::vector<VectorXd> out;
  std::vector<int> parts(std::size_t(m), 0);
  std::function<void(int, int)> fill = [&](int pos, int left) {
    if (pos == m - 1) {
      parts[std::size_t(pos)] = left;
      VectorXd b(m);
      for (int i = 0; i < m; ++i) b(i) = double(parts[std::size_t(i)]) / divisions;
      out.push_back(b);
      return;
    }
    for (int k = left; k >= 0; --k) {
      parts[std::size_t(pos)] = k;
      fill(pos + 1, left - k);
    }
  };
  fill(0, divisions);
  return out;
}

FrontOutput front_epsilon(const RunConfig& c, const PortfolioMop& mop, Params& p) {
  if (mop.objective_count() != 3) throw ParameterError("epsilon: exactly three objectives are required");
  AdaptiveConfig cfg;
  cfg.counts = p.pair("counts", {50, 50});
  cfg.minimized = p.integer("minimized", 2, 0);
  if (cfg.minimized > 2) throw ParameterError("parameter 'minimized' must be 0, 1 or 2");
  cfg.rounds = p.integer("rounds", 5, 0);
  cfg.alpha = p.number("alpha", 0.0);
  if (cfg.alpha < 0.0) throw ParameterError("parameter 'alpha' must be nonnegative");
  cfg.k = p.integer("k", 1, 1);
  ScalarizationOptions opt = solver_options(c);
  opt.workers = c.workers;
  const AdaptiveRun run = run_adaptive(mop, cfg, opt);

  FrontOutput f;
  const auto& objs = mop.objectives();
  for (int d = 0; d < 2; ++d) f.param_names.push_back("eps_" + to_string(objs[std::size_t(run.grid.bounded[std::size_t(d)])]));
  for (int d = 0; d < 2; ++d) f.multiplier_names.push_back("mu_" + to_string(objs[std::size_t(run.grid.bounded[std::size_t(d)])]));

  const MatrixXd images = run.archive.images();
  const std::vector<Eigen::Index> keep = images.rows() ? nondominated_indices(images) : std::vector<Eigen::Index>{};
  for (Eigen::Index i : keep) {
    const ArchiveEntry& e = run.archive.entries()[std::size_t(i)];
    f.rows.push_back({e.weights, {e.eps(0), e.eps(1)}, {e.multipliers(0), e.multipliers(1)}});
  }

  auto failures = [&](const std::vector<CellOutcome>& cells, const std::string& stage) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i].status == CellStatus::failed)
        f.failures.push_back({{"stage", stage},
                              {"index", i},
                              {"eps", to_vector(cells[i].eps)},
                              {"status", to_string(cells[i].status)},
                              {"iterations", cells[i].iterations}});
  };
  failures(run.initial.cells, "grid");
  std::size_t attempted = run.initial.cells.size();
  int refined_converged = 0, refined_infeasible = 0;
  for (std::size_t r = 0; r < run.refinements.size(); ++r) {
    failures(run.refinements[r].cells, "refinement " + std::to_string(r));
    attempted += run.refinements[r].cells.size();
    for (const auto& cell : run.refinements[r].cells) {
      refined_converged += cell.status == CellStatus::converged;
      refined_infeasible += cell.status == CellStatus::infeasible;
    }
    if (!run.refinements[r].warning.empty()) f.warnings.push_back(run.refinements[r].warning);
  }
  f.summary = {{"grid_cells", run.initial.cells.size()},
               {"grid_converged", run.initial.converged},
               {"grid_infeasible", run.initial.infeasible},
               {"grid_failed", run.initial.failed},
               {"refinement_rounds", run.refinements.size()},
               {"refinement_converged", refined_converged},
               {"refinement_infeasible", refined_infeasible},
               {"cells_attempted", attempted},
               {"archive_size", run.archive.size()},
               {"dominated_removed", run.archive.size() - keep.size()},
               {"eps_min", to_vector(run.grid.eps_min)},
               {"eps_max", to_vector(run.grid.eps_max)}};
  return f;
}

FrontOutput front_tracer(const RunConfig& c, const PortfolioMop& mop, Params& p) {
  TracerConfig cfg;
  cfg.tau = p.number("tau", 0.0);
  if (cfg.tau < 0.0) throw ParameterError("parameter 'tau' must be nonnegative");
  cfg.n_starts = p.integer("n_starts", 4, 1);
  cfg.max_points = p.integer("max_points", 2000, 1);
  cfg.corrector_tol = p.number("corrector_tol", 1e-9);
  if (!(cfg.corrector_tol > 0.0)) throw ParameterError("parameter 'corrector_tol' must be positive");
  cfg.seed = c.seed;
  cfg.workers = c.workers;
  const FrontApproximation fr = trace(mop, cfg);

  FrontOutput f;
  f.param_names = {"index", "parent", "criticality", "kkt_residual"};
  for (Objective o : mop.objectives()) f.multiplier_names.push_back("alpha_" + to_string(o));
  for (std::size_t i = 0; i < fr.points.size(); ++i) {
    const KktPoint& k = fr.points[i].point;
    f.rows.push_back({k.x, {double(i), double(fr.points[i].parent), k.criticality, k.kkt_residual}, to_vector(k.alpha)});
  }
  f.summary = {{"tau", fr.tau},
               {"points", fr.points.size()},
               {"seeds_converged", fr.seeds_converged},
               {"predictions", fr.predictions},
               {"clipped", fr.clipped},
               {"rejected", fr.rejected},
               {"duplicates", fr.duplicates}};
  return f;
}

FrontOutput front_ray_method(const RunConfig& c, const PortfolioMop& mop, Params& p, const std::string& method) {
  const int m = mop.objective_count();
  const int divisions = p.integer("divisions", 10, 1);
  const bool modified = method == "sp" ? p.boolean("modified", false) : false;
  ScalarizationOptions opt = solver_options(c);
  const Anchors an = compute_anchors(mop, opt, 3, c.seed);
  for (Eigen::Index j = 0; j < an.weights.cols(); ++j) opt.starts.push_back(an.weights.col(j));
  const std::vector<VectorXd> betas = beta_lattice(m, divisions);
  // SF needs a nonnegative direction: the objective ranges across the anchors.
  VectorXd range(m);
  for (int i = 0; i < m; ++i) range(i) = an.phi.row(i).maxCoeff() > 0.0 ? an.phi.row(i).maxCoeff() : 1.0;

  std::vector<ScalarizationResult> results(betas.size());
  parallel_for(betas.size(), c.workers, [&](std::size_t i) {
    const NbiParams nbi = nbi_params(an, betas[i]);
    if (method == "nbi") results[i] = solve_nbi(mop, nbi, opt);
    else if (method == "msf") results[i] = solve_msf(mop, map_nbi_to_msf(nbi), opt);
    else if (method == "sf") results[i] = solve_sf(mop, SfParams::from_objectives(an.ideal + an.phi * betas[i], range), opt);
    else results[i] = solve_sp(mop, map_nbi_to_sp(nbi), modified, opt);
  });

  FrontOutput f;
  for (int i = 0; i < m; ++i) f.param_names.push_back("beta_" + to_string(mop.objectives()[std::size_t(i)]));
  f.param_names.push_back(method == "nbi" ? "s" : (method == "sp" ? "t" : "delta"));
  for (Objective o : mop.objectives()) f.multiplier_names.push_back("lambda_" + to_string(o));
  int converged = 0, infeasible = 0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const ScalarizationResult& r = results[i];
    if (r.converged()) {
      ++converged;
      std::vector<double> params = to_vector(betas[i]);
      params.push_back(r.aux);
      f.rows.push_back({r.weights, params, to_vector(r.multipliers)});
    } else if (r.solution.status == SolveStatus::infeasible) {
      ++infeasible;
    } else {
      f.failures.push_back({{"index", i}, {"beta", to_vector(betas[i])}, {"status", status_name(r)}, {"message", r.message}});
    }
  }
  f.summary = {{"subproblems", betas.size()},
               {"converged", converged},
               {"infeasible", infeasible},
               {"failed", f.failures.size()},
               {"ideal", to_vector(an.ideal)},
               {"nbar", to_vector(an.nbar)}};
  return f;
}

// The goal program pins variance to 1. Returns are rescaled when that level
// is not attainable, so that the minimum-variance portfolio has variance <= 1
// and the largest attainable variance is >= 1.
struct GoalInstance {
  double factor = 1.0;
  double min_variance = 0.0;
  double max_variance = 0.0;
  std::optional<std::string> warning;
};

GoalInstance goal_instance(const MomentSetd& m, const ScalarizationOptions& opt, std::uint64_t seed) {
  GoalInstance g;
  const PortfolioMop mv(m, {Objective::mean, Objective::variance});
  g.min_variance = compute_anchors(mv, opt, 3, seed).ideal(1);
  g.max_variance = m.sigma().diagonal().maxCoeff();
  if (g.min_variance <= 1.0 && g.max_variance >= 1.0) return g;
  if (!(g.min_variance > 0.0) || !(g.max_variance > 0.0))
    throw ParameterError("goal program: the instance has no portfolio with positive variance");
  g.factor = std::pow(g.min_variance * g.max_variance, -0.25);
  std::ostringstream msg;
  msg << "goal program: returns rescaled by " << format_number(g.factor)
      << " so that variance = 1 is attainable (minimum-variance portfolio variance "
      << format_number(g.min_variance * g.factor * g.factor)
      << "); the variance constraint is an artifact of the normalization";
  g.warning = msg.str();
  return g;
}

FrontOutput front_pgp(const RunConfig& c, const MomentSetd& moments, const PortfolioMop& mop, Params& p) {
  const std::vector<double> alphas = p.list("alpha", {1.0, 2.0, 3.0});
  const std::vector<double> betas = p.list("beta", {1.0, 2.0, 3.0});
  for (double v : alphas)
    if (!(v > 0.0)) throw ParameterError("parameter 'alpha' entries must be positive");
  for (double v : betas)
    if (!(v > 0.0)) throw ParameterError("parameter 'beta' entries must be positive");
  ScalarizationOptions opt = solver_options(c);
  const GoalInstance gi = goal_instance(moments, opt, c.seed);
  const PortfolioMop scaled(moments.scaled(gi.factor), mop.objectives(), mop.short_bound());
  const PgpBounds bounds = pgp_bounds(scaled, opt);

  std::vector<std::pair<double, double>> grid;
  for (double a : alphas)
    for (double b : betas) grid.emplace_back(a, b);
  std::vector<ScalarizationResult> results(grid.size());
  parallel_for(grid.size(), c.workers, [&](std::size_t i) {
    PgpParams pp;
    pp.alpha = grid[i].first;
    pp.beta = grid[i].second;
    pp.z1_star = bounds.z1_star;
    pp.z3_star = bounds.z3_star;
    ScalarizationOptions local = opt;
    local.starts = {bounds.z1_weights, bounds.z3_weights};
    results[i] = solve_pgp(scaled, pp, local);
  });

  FrontOutput f;
  f.param_names = {"alpha", "beta", "goal", "d1", "d3"};
  f.multiplier_names = {"mu_mean", "mu_variance", "mu_skewness"};
  if (gi.warning) f.warnings.push_back(*gi.warning);
  const Eigen::Index n = mop.assets();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ScalarizationResult& r = results[i];
    if (r.converged()) {
      f.rows.push_back({r.weights,
                        {grid[i].first, grid[i].second, r.aux, r.solution.x(n), r.solution.x(n + 1)},
                        to_vector(r.multipliers)});
    } else {
      f.failures.push_back({{"index", i},
                            {"alpha", grid[i].first},
                            {"beta", grid[i].second},
                            {"status", status_name(r)},
                            {"message", r.message}});
    }
  }
  f.summary = {{"subproblems", grid.size()},
               {"converged", f.rows.size()},
               {"failed", f.failures.size()},
               {"scale_factor", gi.factor},
               {"z1_star", bounds.z1_star},
               {"z3_star", bounds.z3_star}};
  return f;
}

FrontOutput front_utility(const RunConfig& c, const PortfolioMop& mop, Params& p, bool iterative) {
  const std::vector<double> lambdas = p.list("lambdas", default_lambda_schedule());
  for (double v : lambdas)
    if (!(v > 0.0)) throw ParameterError("parameter 'lambdas' entries must be positive");
  UtilityOptions uo;
  uo.seed = c.seed;
  uo.workers = c.workers;
  FrontOutput f;
  if (iterative) {
    uo.max_repeats = p.integer("max_repeats", uo.max_repeats, 1);
    uo.fixed_point_tol = p.number("fixed_point_tol", uo.fixed_point_tol);
    if (!(uo.fixed_point_tol > 0.0)) throw ParameterError("parameter 'fixed_point_tol' must be positive");
    f.param_names = {"lambda", "utility", "frozen_skewness", "frozen_kurtosis", "repeats", "fixed_point_residual"};
    int unconverged = 0;
    for (const UtilityStep& s : iterative_utility_optimize(mop, lambdas, uo)) {
      f.rows.push_back({s.weights,
                        {s.lambda, s.utility, s.frozen_skewness, s.frozen_kurtosis, double(s.repeats),
                         s.fixed_point_residual},
                        {}});
      if (s.fixed_point_residual > uo.fixed_point_tol) ++unconverged;
    }
    f.summary = {{"steps", f.rows.size()}, {"fixed_point_unconverged", unconverged}};
  } else {
    uo.starts = p.integer("starts", uo.starts, 1);
    f.param_names = {"lambda", "utility"};
    for (double l : lambdas) {
      const UtilityStep s = optimize_utility(mop, UtilityParams(l), uo);
      f.rows.push_back({s.weights, {s.lambda, s.utility}, {}});
    }
    f.summary = {{"steps", f.rows.size()}};
  }
  return f;
}

bool wants_kurtosis(const RunConfig& c) {
  return c.method == "utility" || c.method == "utility_iterative" ||
         std::find(c.objectives.begin(), c.objectives.end(), Objective::kurtosis) != c.objectives.end();
}

int cmd_front(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto& methods = front_methods();
  if (std::find(methods.begin(), methods.end(), c.method) == methods.end())
    throw ParameterError("unknown method '" + c.method + "'");
  validate_params(c.method_params, c.method);
  const Instance inst = load_instance(c);
  const MomentSetd moments = compute_moments(inst.returns);
  const PortfolioMop mop(moments, c.objectives);
  Params p(c.method_params);

  FrontOutput f;
  if (c.method == "epsilon") f = front_epsilon(c, mop, p);
  else if (c.method == "tracer") f = front_tracer(c, mop, p);
  else if (c.method == "pgp") f = front_pgp(c, moments, mop, p);
  else if (c.method == "utility") f = front_utility(c, mop, p, false);
  else if (c.method == "utility_iterative") f = front_utility(c, mop, p, true);
  else f = front_ray_method(c, mop, p, c.method);

  const bool kurt = wants_kurtosis(c);
  struct Stats {
    double mean, variance, skewness, kurtosis;
  };
  std::vector<Stats> stats;
  for (const auto& r : f.rows) {
    const ObjectiveVectord s = mop.stats(r.weights);
    stats.push_back({s.mean, s.variance, s.skewness, s.kurtosis});
  }
  std::vector<std::size_t> order(f.rows.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return stats[a].mean > stats[b].mean; });

  std::vector<std::string> columns;
  for (const auto& a : inst.returns.assets()) columns.push_back("w_" + a);
  for (const char* s : {"mean", "variance", "skewness"}) columns.emplace_back(s);
  if (kurt) columns.emplace_back("kurtosis");
  for (const auto& s : f.param_names) columns.push_back(s);
  for (const auto& s : f.multiplier_names) columns.push_back(s);

  std::string csv;
  for (std::size_t i = 0; i < columns.size(); ++i) csv += (i ? "," : "") + columns[i];
  csv += "\n";
  std::string dat = "# hmfront front, method " + c.method + "\n#";
  for (const auto& col : columns) dat += " " + col;
  dat += "\n";

  json rows = json::array();
  for (std::size_t k : order) {
    const FrontRow& r = f.rows[k];
    const Stats& s = stats[k];
    std::vector<double> values = to_vector(r.weights);
    values.insert(values.end(), {s.mean, s.variance, s.skewness});
    if (kurt) values.push_back(s.kurtosis);
    values.insert(values.end(), r.params.begin(), r.params.end());
    values.insert(values.end(), r.multipliers.begin(), r.multipliers.end());
    for (std::size_t i = 0; i < values.size(); ++i) {
      csv += (i ? "," : "") + format_number(values[i]);
      dat += (i ? " " : "") + format_number(values[i]);
    }
    csv += "\n";
    dat += "\n";

    json row;
    row["weights"] = to_vector(r.weights);
    json st = {{"mean", s.mean}, {"variance", s.variance}, {"skewness", s.skewness}};
    if (kurt) st["kurtosis"] = s.kurtosis;
    row["stats"] = st;
    json params = json::object();
    for (std::size_t i = 0; i < f.param_names.size(); ++i) params[f.param_names[i]] = r.params[i];
    row["params"] = params;
    json mult = json::object();
    for (std::size_t i = 0; i < f.multiplier_names.size(); ++i) mult[f.multiplier_names[i]] = r.multipliers[i];
    row["multipliers"] = mult;
    row["status"] = "converged";
    rows.push_back(row);
  }

  const bool partial = !f.failures.empty();
  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "front";
  j["method"] = c.method;
  j["params"] = p.used();
  j["objectives"] = objective_names(c.objectives);
  j["seed"] = c.seed;
  j["instance"] = inst.description;
  j["partial"] = partial;
  j["summary"] = f.summary;
  j["warnings"] = f.warnings;
  j["failures"] = f.failures;
  j["columns"] = columns;
  j["rows"] = rows;

  const fs::path dir = prepare_output(c);
  write_text(dir / "front.csv", csv);
  write_json(dir / "front.json", j);
  if (c.gnuplot) write_text(dir / "front.dat", dat);
  for (const auto& w : f.warnings) err << "warning: " << w << "\n";
  out << "wrote " << (dir / "front.csv").string() << " (" << f.rows.size() << " rows)\n";
  if (partial) {
    err << "error: " << f.failures.size() << " subproblem(s) failed; the front is partial\n";
    for (const auto& fail : f.failures) err << "  " << fail.dump() << "\n";
    return int(ExitCode::solve_failure);
  }
  return int(ExitCode::ok);
}

// ---------------------------------------------------------------------------
// verify

constexpr double kTolValue = 1e-6;
constexpr double kTolWeights = 1e-5;
constexpr double kTolShortage = 1e-8;

int cmd_verify(const RunConfig& c, std::ostream& out, std::ostream& err) {
  validate_params(c.method_params, "verify");
  const Instance inst = load_instance(c);
  const MomentSetd moments = compute_moments(inst.returns);
  const PortfolioMop mop(moments, c.objectives);
  const int m = mop.objective_count();
  Params p(c.method_params);
  const int samples = p.integer("samples", 20, m);
  const std::array<int, 2> grid_counts = p.pair("grid", {10, 10});

  ScalarizationOptions opt = solver_options(c);
  const Anchors an = compute_anchors(mop, opt, 3, c.seed);
  for (Eigen::Index j = 0; j < an.weights.cols(); ++j) opt.starts.push_back(an.weights.col(j));

  std::vector<VectorXd> betas;
  for (int i = 0; i < m; ++i) betas.push_back(VectorXd::Unit(m, i));
  for (auto& b : dirichlet_samples(m, samples - m, c.seed)) betas.push_back(b);

  struct RayCase {
    ScalarizationResult nbi, sp, msf;
  };
  std::vector<RayCase> ray(betas.size());
  parallel_for(betas.size(), c.workers, [&](std::size_t i) {
    const NbiParams nbi = nbi_params(an, betas[i]);
    ray[i].nbi = solve_nbi(mop, nbi, opt);
    ray[i].sp = solve_sp(mop, map_nbi_to_sp(nbi), true, opt);
    ray[i].msf = solve_msf(mop, map_nbi_to_msf(nbi), opt);
  });

  json cases = json::array();
  json offending = json::array();
  int compared = 0, skipped = 0;
  auto record = [&](json entry, bool both_converged, bool pass) {
    entry["compared"] = both_converged;
    entry["pass"] = pass;
    if (both_converged) ++compared;
    else ++skipped;
    if (!pass) offending.push_back(entry);
    cases.push_back(std::move(entry));
  };

  for (std::size_t i = 0; i < betas.size(); ++i) {
    const RayCase& rc = ray[i];
    const json beta = to_vector(betas[i]);
    {
      json e = {{"kind", "nbi_modified_sp"}, {"beta", beta}, {"nbi_status", status_name(rc.nbi)}, {"sp_status", status_name(rc.sp)}};
      const bool both = rc.nbi.converged() && rc.sp.converged();
      bool pass = true;
      if (both) {
        const double dv = std::abs(rc.nbi.aux + rc.sp.aux);
        const double dw = (rc.nbi.weights - rc.sp.weights).cwiseAbs().maxCoeff();
        e["s"] = rc.nbi.aux;
        e["t"] = rc.sp.aux;
        e["delta_value"] = dv;
        e["delta_weights"] = dw;
        pass = dv <= kTolValue && dw <= kTolWeights;
      }
      record(e, both, pass);
    }
    {
      json e = {{"kind", "nbi_msf"}, {"beta", beta}, {"nbi_status", status_name(rc.nbi)}, {"msf_status", status_name(rc.msf)}};
      const bool both = rc.nbi.converged() && rc.msf.converged();
      bool pass = true;
      if (both) {
        const double dv = std::abs(rc.nbi.aux - rc.msf.aux);
        const double dw = (rc.nbi.weights - rc.msf.weights).cwiseAbs().maxCoeff();
        e["s"] = rc.nbi.aux;
        e["delta"] = rc.msf.aux;
        e["delta_value"] = dv;
        e["delta_weights"] = dw;
        pass = dv <= kTolValue && dw <= kTolWeights;
      }
      record(e, both, pass);
    }
    if (i < std::size_t(m)) {
      json e = {{"kind", "nbi_anchor"}, {"beta", beta}, {"nbi_status", status_name(rc.nbi)}};
      bool pass = true;
      if (rc.nbi.converged()) {
        const VectorXd anchor = an.ideal + an.phi.col(Eigen::Index(i));
        const double d = (rc.nbi.image - anchor).cwiseAbs().maxCoeff();
        e["delta_value"] = d;
        pass = d <= kTolWeights;
      }
      record(e, rc.nbi.converged(), pass);
    }
  }

  // Shortage function against its reflected SP at Dirichlet references.
  VectorXd g(m);
  for (int i = 0; i < m; ++i) g(i) = an.phi.row(i).maxCoeff() > 0.0 ? an.phi.row(i).maxCoeff() : 1.0;
  const std::vector<VectorXd> refs = dirichlet_samples(mop.assets(), samples, c.seed + 1);
  std::vector<std::pair<ScalarizationResult, ScalarizationResult>> sf(refs.size());
  parallel_for(refs.size(), c.workers, [&](std::size_t i) {
    const SfParams sfp = SfParams::from_weights(refs[i], g);
    sf[i].first = solve_sf(mop, sfp, opt);
    if (sf[i].first.converged())
      sf[i].second = solve_sp(mop, map_sf_to_sp(mop, sfp, mop.stats(sf[i].first.weights)), false, opt);
  });
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& [a, b] = sf[i];
    json e = {{"kind", "sf_sp"}, {"reference", to_vector(refs[i])}, {"g", to_vector(g)}, {"sf_status", status_name(a)}};
    const bool both = a.converged() && b.converged();
    bool pass = true;
    if (a.converged()) e["sp_status"] = status_name(b);
    if (both) {
      const double dv = std::abs(a.aux + b.aux);
      e["delta"] = a.aux;
      e["t"] = b.aux;
      e["delta_value"] = dv;
      pass = dv <= kTolShortage;
    }
    record(e, both, pass);
  }

  // Epsilon-constraint cells against their SP form.
  json eps_note = nullptr;
  if (m == 3) {
    const EpsilonGrid grid = build_grid(mop, grid_counts, 2, opt);
    std::vector<std::pair<ScalarizationResult, ScalarizationResult>> ep(grid.size());
    parallel_for(grid.size(), c.workers, [&](std::size_t i) {
      const VectorXd eps = grid.full(grid.centers[i]);
      ep[i].first = solve_epsilon(mop, eps, grid.minimized, opt);
      ep[i].second = solve_sp(mop, epsilon_as_sp(eps, grid.minimized), false, opt);
    });
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& [a, b] = ep[i];
      json e = {{"kind", "epsilon_sp"},
                {"eps", to_vector(grid.centers[i])},
                {"epsilon_status", status_name(a)},
                {"sp_status", status_name(b)}};
      const bool both = a.converged() && b.converged();
      bool pass = true;
      if (both) {
        const double dv = std::abs(a.aux - b.aux);
        e["epsilon_value"] = a.aux;
        e["t"] = b.aux;
        e["delta_value"] = dv;
        pass = dv <= kTolValue;
      }
      record(e, both, pass);
    }
  } else {
    eps_note = "epsilon comparison needs exactly three objectives";
  }

  // Goal-program stationarity at NBI solutions, report only.
  json pgp = json::object();
  const auto& objs = mop.objectives();
  if (m >= 3 && objs[0] == Objective::mean && objs[1] == Objective::variance && objs[2] == Objective::skewness) {
    const GoalInstance gi = goal_instance(moments, opt, c.seed);
    const PortfolioMop scaled(moments.scaled(gi.factor), objs, mop.short_bound());
    const PgpBounds bounds = pgp_bounds(scaled, opt);
    ScalarizationOptions sopt = solver_options(c);
    const Anchors san = compute_anchors(scaled, sopt, 3, c.seed);
    for (Eigen::Index j = 0; j < san.weights.cols(); ++j) sopt.starts.push_back(san.weights.col(j));
    std::vector<PgpKktReport> reports(betas.size());
    parallel_for(betas.size(), c.workers, [&](std::size_t i) {
      const NbiParams nbi = nbi_params(san, betas[i]);
      reports[i] = check_pgp_kkt(scaled, nbi, solve_nbi(scaled, nbi, sopt), bounds);
    });
    json rows = json::array();
    for (std::size_t i = 0; i < betas.size(); ++i) {
      const PgpKktReport& r = reports[i];
      json row = {{"beta", to_vector(betas[i])}, {"applicable", r.applicable}};
      if (!r.applicable) {
        row["alpha"] = "not-applicable";
        row["reason"] = r.reason;
      } else {
        row["alpha"] = r.alpha ? json(*r.alpha) : json("not-applicable");
        row["beta_exponent"] = r.beta ? json(*r.beta) : json("not-applicable");
        row["d1"] = r.d1;
        row["d3"] = r.d3;
        row["mu"] = {r.mu1, r.mu2, r.mu3};
        row["nbar_dot_lambda"] = r.nbar_dot_lambda;
        row["first_set_residual"] = r.first_set_residual;
        row["second_set_residual"] = r.second_set_residual ? json(*r.second_set_residual) : json(nullptr);
        row["mu2_vanishes"] = r.mu2_vanishes;
      }
      rows.push_back(row);
    }
    pgp["scale_factor"] = gi.factor;
    if (gi.warning) {
      pgp["warning"] = *gi.warning;
      err << "warning: " << *gi.warning << "\n";
    }
    pgp["rows"] = rows;
  } else {
    pgp["note"] = "not-applicable: the objectives must start with mean, variance, skewness";
  }

  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "verify";
  j["params"] = p.used();
  j["objectives"] = objective_names(c.objectives);
  j["seed"] = c.seed;
  j["instance"] = j["instance"] = inst.description;
  j["tolerances"] = {{"value", kTolValue}, {"weights", kTolWeights}, {"shortage", kTolShortage}};
  j["summary"] = {{"cases", cases.size()}, {"compared", compared}, {"skipped", skipped}, {"failed", offending.size()}};
  if (!eps_note.is_null()) j["epsilon_note"] = eps_note;
  j["cases"] = cases;
  j["pgp"] = pgp;

  const fs::path dir = prepare_output(c);
  write_json(dir / "verify.json", j);
  out << "wrote " << (dir / "verify.json").string() << " (" << compared << " comparisons, " << offending.size()
      << " failed)\n";
  if (!offending.empty()) {
    for (const auto& e : offending) err << "verification failed: " << e.dump() << "\n";
    return int(ExitCode::verification_failure);
  }
  return int(ExitCode::ok);
}

// ---------------------------------------------------------------------------
// quality

// Image-space points (minimization sense) read from a front CSV.
MatrixXd read_front_images(const std::string& path, const std::vector<Objective>& objectives) {
  std::ifstream in(path);
  if (!in) throw DataError("front CSV: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("front CSV: " + path + " is empty");
  const std::vector<std::string> header = split(line, ',');
  std::vector<std::size_t> cols;
  for (Objective o : objectives) {
    auto it = std::find(header.begin(), header.end(), to_string(o));
    if (it == header.end()) throw DataError("front CSV: " + path + " has no '" + to_string(o) + "' column");
    cols.push_back(std::size_t(it - header.begin()));
  }
  std::vector<VectorXd> pts;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line, ',');
    if (cells.size() != header.size())
      throw DataError("front CSV: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(header.size()));
    VectorXd f(Eigen::Index(objectives.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::string& s = cells[cols[k]];
      double v = 0.0;
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw DataError("front CSV: line " + std::to_string(line_no) + ", column " + std::to_string(cols[k] + 1) +
                        ": '" + s + "' is not a finite number");
      f(Eigen::Index(k)) = sense_sign(objectives[k]) * v;
    }
    pts.push_back(f);
  }
  MatrixXd m(Eigen::Index(pts.size()), Eigen::Index(objectives.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(Eigen::Index(i)) = pts[i].transpose();
  return m;
}

int cmd_quality(const RunConfig& c, std::ostream& out) {
  validate_params(c.method_params, "quality");
  Params p(c.method_params);
  const std::string front_path = c.front_path.empty() ? (fs::path(c.output_dir) / "front.csv").string() : c.front_path;
  const MatrixXd front = read_front_images(front_path, c.objectives);

  json ref = json::object();
  MatrixXd reference;
  if (!c.reference_path.empty()) {
    reference = read_front_images(c.reference_path, c.objectives);
    ref["source"] = "file";
    ref["path"] = c.reference_path;
  } else {
    const Instance inst = load_instance(c);
    const PortfolioMop mop(compute_moments(inst.returns), c.objectives);
    ScalarizationOptions opt = solver_options(c);
    opt.workers = c.workers;
    ref["instance"] = inst.description;
    if (mop.objective_count() == 3) {
      const std::array<int, 2> counts = p.pair("reference_counts", {200, 200});
      const GridRun run = solve_grid(mop, build_grid(mop, counts, 2, opt), opt);
      if (run.archive.size() > 0) reference = dominance_filter(run.archive.images());
      ref["source"] = "epsilon_grid";
      ref["counts"] = {counts[0], counts[1]};
    } else if (mop.objective_count() == 2) {
      const int points = p.integer("reference_points", 2000, 2);
      const Anchors an = compute_anchors(mop, opt, 3, c.seed);
      const double lo = an.ideal(0), hi = an.ideal(0) + an.phi.row(0).maxCoeff();
      std::vector<ScalarizationResult> res(static_cast<std::size_t>(points));
      parallel_for(res.size(), c.workers, [&](std::size_t i) {
        VectorXd eps = VectorXd::Zero(2);
        eps(0) = lo + (hi - lo) * double(i) / double(points - 1);
        ScalarizationOptions local = opt;
        local.workers = 1;
        res[i] = solve_epsilon(mop, eps, 1, local);
      });
      std::vector<VectorXd> imgs;
      for (const auto& r : res)
        if (r.converged()) imgs.push_back(r.image);
      MatrixXd all(Eigen::Index(imgs.size()), 2);
      for (std::size_t i = 0; i < imgs.size(); ++i) all.row(Eigen::Index(i)) = imgs[i].transpose();
      reference = dominance_filter(all);
      ref["source"] = "epsilon_sweep";
      ref["points"] = points;
    } else {
      throw ParameterError("quality: a generated reference supports two or three objectives; pass --reference");
    }
  }
  ref["rows"] = reference.rows();

  const QualityReport q = assess(front, reference);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "quality";
  j["front"] = front_path;
  j["objectives"] = objective_names(c.objectives);
  j["params"] = p.used();
  j["reference"] = ref;
  j["front_rows"] = front.rows();
  j["cardinality"] = q.cardinality;
  j["dominated_count"] = q.dominated_count;
  j["uniformity"] = q.uniformity;
  j["coverage_error"] = q.coverage_error;

  const fs::path dir = prepare_output(c);
  write_json(dir / "quality.json", j);
  out << "wrote " << (dir / "quality.json").string() << "\n";
  return int(ExitCode::ok);
}

}  // namespace

const std::vector<std::string>& front_methods() {
  static const std::vector<std::string> m{"sf", "msf", "nbi", "sp", "epsilon", "pgp", "tracer", "utility",
                                          "utility_iterative"};
  return m;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pareto fronts of higher-moment portfolio problems", "hmfront"};
  std::string command;
  app.add_option("command", command, "moments | front | verify | quality")
      ->required()
      ->check(CLI::IsMember({"moments", "front", "verify", "quality"}));
  std::string config_path, input, method, out_dir, objectives, params, front, reference;
  std::uint64_t seed = 0;
  int workers = 1;
  std::vector<std::string> synthetic;
  bool gnuplot = false, full_tensors = false;
  app.add_option("--config", config_path, "JSON configuration; flags override its fields");
  auto* o_input = app.add_option("--input", input, "returns CSV (header of asset identifiers)");
  auto* o_method = app.add_option("--method", method, "front method")->check(CLI::IsMember(front_methods()));
  auto* o_seed = app.add_option("--seed", seed, "seed for sampled starts and parameters");
  auto* o_workers = app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  auto* o_out = app.add_option("--out", out_dir, "output directory");
  auto* o_syn = app.add_option("--synthetic", synthetic, "generate returns: n T seed level")->expected(4);
  auto* o_obj = app.add_option("--objectives", objectives, "comma-separated objectives, e.g. mean,variance,skewness");
  auto* o_params = app.add_option("--params", params, "method parameters as a JSON object");
  auto* o_front = app.add_option("--front", front, "quality: front CSV to measure");
  auto* o_ref = app.add_option("--reference", reference, "quality: reference front CSV");
  auto* o_gnuplot = app.add_flag("--gnuplot", gnuplot, "front: also write front.dat");
  auto* o_full = app.add_flag("--full-tensors", full_tensors, "moments: include the full tensors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? int(ExitCode::ok) : int(ExitCode::input_error);
  }

  try {
    RunConfig c;
    c.command = command;
    if (!config_path.empty()) apply_config_file(c, config_path);
    if (o_input->count()) c.input_path = input;
    if (o_method->count()) c.method = method;
    if (o_seed->count()) c.seed = seed;
    if (o_workers->count()) c.workers = workers;
    if (o_out->count()) c.output_dir = out_dir;
    if (o_syn->count()) c.synthetic = parse_synthetic(synthetic);
    if (o_obj->count()) c.objectives = parse_objectives(split(objectives, ','));
    if (o_params->count()) {
      nlohmann::json extra;
      try {
        extra = nlohmann::json::parse(params);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParameterError(std::string("--params: ") + e.what());
      }
      if (!extra.is_object()) throw ParameterError("--params must be a JSON object");
      if (!c.method_params.is_object()) c.method_params = nlohmann::json::object();
      for (const auto& [key, value] : extra.items()) c.method_params[key] = value;
    }
    if (o_front->count()) c.front_path = front;
    if (o_ref->count()) c.reference_path = reference;
    if (o_gnuplot->count()) c.gnuplot = gnuplot;
    if (o_full->count()) c.full_tensors = full_tensors;
    if (c.workers < 1) throw ParameterError("workers must be at least 1");
    if (c.method_params.is_null()) c.method_params = nlohmann::json::object();

    if (c.command == "moments") return cmd_moments(c, out);
    if (c.command == "front") return cmd_front(c, out, err);
    if (c.command == "verify") return cmd_verify(c, out, err);
    return cmd_quality(c, out);
  } catch (const MeasureError& e) {
    err << "error: " << e.what() << "\n";
    return int(ExitCode::measure_undefined);
  } catch (const SolverError& e) {
    err << "error: " << e.what() << "\n";
    return int(ExitCode::solve_failure);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return int(ExitCode::input_error);
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return int(ExitCode::input_error);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return int(ExitCode::solve_failure);
  }
}

}  // namespace hmfront
