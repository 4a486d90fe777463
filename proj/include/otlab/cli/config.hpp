#pragma once

// Experiment configs: JSON objects with a fixed schema per subcommand.
// Unknown keys are rejected; every range check names the offending field.
// See README.md for the schema.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "otlab/cost.hpp"
#include "otlab/csv.hpp"
#include "otlab/geometry.hpp"
#include "otlab/jko/energy.hpp"

namespace otlab::cli {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A JSON object plus its dotted path, with typed getters that remember which
/// keys were read so that leftovers can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  Section section(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError("missing field " + field(key));
    return Section(j_.at(key), field(key));
  }
  std::optional<Section> optional_section(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return section(key);
  }

  template <class T>
  T get(const std::string& key, std::optional<T> fallback = std::nullopt) {
    used_.insert(key);
    if (!j_.contains(key)) {
      if (fallback) return *fallback;
      throw ConfigError("missing field " + field(key));
    }
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field(key) + " must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field(key) + " must be a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(field(key) + " must be an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError(field(key) + " must be nonnegative");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(field(key) + " must be a number");
    } else {
      using E = typename T::value_type;
      if (!v.is_array()) throw ConfigError(field(key) + " must be an array");
      for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(field(key) + " must hold numbers");
        if (std::is_integral_v<E> && !e.is_number_integer()) throw ConfigError(field(key) + " must hold integers");
        if (std::is_unsigned_v<E> && !e.is_number_unsigned()) throw ConfigError(field(key) + " must be nonnegative");
      }
    }
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + " has the wrong type");
    }
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    return get<double>(key, fallback);
  }

  /// Rejects keys that no getter asked for.
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError("unknown field " + field(k));
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

inline json load_json(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

// ---- grid, cost, densities -------------------------------------------------

inline Grid parse_grid(Section s) {
  const auto lower = s.get<std::vector<double>>("lower");
  const auto upper = s.get<std::vector<double>>("upper");
  const auto cells = s.get<std::vector<int>>("cells");
  s.finish();
  const std::size_t d = lower.size();
  require(d == 1 || d == 2, s.field("lower") + " must have 1 or 2 entries");
  require(upper.size() == d && cells.size() == d, s.field("upper") + " and " + s.field("cells") + " must match " +
                                                       s.field("lower") + " in length");
  for (std::size_t a = 0; a < d; ++a) {
    require(upper[a] > lower[a], s.field("upper") + " must exceed " + s.field("lower"));
    require(cells[a] >= 1, s.field("cells") + " must be positive");
  }
  return d == 1 ? Grid::line(lower[0], upper[0], cells[0])
                : Grid::box({lower[0], lower[1]}, {upper[0], upper[1]}, {cells[0], cells[1]});
}

struct CostSpec {
  std::string family = "power";
  double p = 2.0;
  std::vector<double> radii, values;
  std::optional<double> mollify_epsilon;
  int quadrature_order = 16;

  RadialCost build(const Grid& grid) const {
    const double R = grid.diameter();
    auto cost = family == "power" ? RadialCost::power(p, R) : RadialCost::tabulated(radii, values, R);
    if (mollify_epsilon) cost = mollify(cost, *mollify_epsilon, quadrature_order, grid.dim());
    return cost;
  }
};

inline CostSpec parse_cost(Section s) {
  CostSpec c;
  c.family = s.get<std::string>("family", std::string("power"));
  if (c.family == "power") {
    c.p = s.number("p");
    require(c.p > 1.0 && std::isfinite(c.p), s.field("p") + " must be > 1 (got " + format_double(c.p) + ")");
  } else if (c.family == "tabulated") {
    c.radii = s.get<std::vector<double>>("radii");
    c.values = s.get<std::vector<double>>("values");
    require(c.radii.size() == c.values.size() && c.radii.size() >= 2,
            s.field("radii") + " and " + s.field("values") + " need equal length >= 2");
  } else {
    throw ConfigError(s.field("family") + " must be \"power\" or \"tabulated\"");
  }
  if (auto m = s.optional_section("mollify")) {
    c.mollify_epsilon = m->number("epsilon");
    c.quadrature_order = m->get<int>("quadrature_order", 16);
    m->finish();
    require(*c.mollify_epsilon > 0.0, m->field("epsilon") + " must be positive");
    require(c.quadrature_order >= 2, m->field("quadrature_order") + " must be >= 2");
  }
  s.finish();
  return c;
}

struct DensitySpec {
  std::string kind = "smooth";
  std::optional<std::uint64_t> seed;
  int modes = 4;
  double floor = 0.1;
  std::vector<double> center;
  double width = 0.1, base = 0.05;
  std::filesystem::path path;

  /// `stream_seed` is used for kind "smooth" unless the spec fixes a seed.
  DensityField build(const Grid& grid, std::uint64_t stream_seed) const {
    if (kind == "uniform") return normalize(DensityField(grid, std::vector<double>(grid.size(), 1.0)));
    if (kind == "smooth") return random_smooth_density(grid, seed.value_or(stream_seed), modes, floor);
    if (kind == "gaussian") {
      std::vector<double> v(grid.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Point c = grid.center(i);
        double r2 = 0.0;
        for (int a = 0; a < grid.dim(); ++a) r2 += (c[a] - center[a]) * (c[a] - center[a]);
        v[i] = base + std::exp(-r2 / (2.0 * width * width));
      }
      return normalize(DensityField(grid, std::move(v)));
    }
    auto data = read_field_csv(path);
    if (!(data.grid == grid)) {
      // Accept files whose bounds differ from the config by rounding only.
      bool close = data.grid.dim() == grid.dim();
      for (int a = 0; close && a < grid.dim(); ++a)
        close = data.grid.count(a) == grid.count(a) &&
                std::abs(data.grid.lower(a) - grid.lower(a)) <= 1e-9 * grid.max_width() &&
                std::abs(data.grid.upper(a) - grid.upper(a)) <= 1e-9 * grid.max_width();
      if (!close) throw Error(ErrorKind::input, "density file " + path.string() + " does not match the grid");
    }
    return normalize(DensityField(grid, std::move(data.values)));
  }
};

inline DensitySpec parse_density(Section s, const Grid& grid, const std::filesystem::path& base_dir) {
  DensitySpec d;
  d.kind = s.get<std::string>("kind");
  if (d.kind == "smooth") {
    if (s.has("seed")) d.seed = s.get<std::uint64_t>("seed");
    d.modes = s.get<int>("modes", 4);
    d.floor = s.number("floor", 0.1);
    require(d.modes >= 1, s.field("modes") + " must be >= 1");
    require(d.floor > 0.0, s.field("floor") + " must be positive");
  } else if (d.kind == "gaussian") {
    d.center = s.get<std::vector<double>>("center");
    d.width = s.number("width");
    d.base = s.number("base", 0.05);
    require(static_cast<int>(d.center.size()) == grid.dim(), s.field("center") + " must match the grid dimension");
    require(d.width > 0.0, s.field("width") + " must be positive");
    require(d.base >= 0.0, s.field("base") + " must be >= 0");
  } else if (d.kind == "file") {
    d.path = s.get<std::string>("path");
    if (d.path.is_relative()) d.path = base_dir / d.path;
  } else if (d.kind != "uniform") {
    throw ConfigError(s.field("kind") + " must be one of uniform, smooth, gaussian, file");
  }
  s.finish();
  return d;
}

// ---- per-subcommand configs ------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  int threads = 1;
};

inline Common parse_common(Section& s) {
  Common c;
  c.seed = s.get<std::uint64_t>("seed", std::uint64_t{0});
  c.threads = s.get<int>("threads", 1);
  require(c.threads >= 1, s.field("threads") + " must be >= 1");
  return c;
}

struct SolveOtConfig {
  Common common;
  Grid grid = Grid::line(0.0, 1.0, 1);
  CostSpec cost;
  DensitySpec source, target;
  std::string solver = "lp";
  double epsilon = 1e-4;
  std::size_t max_iterations = 200'000;
  double tolerance = 1e-7;
  bool map = true;
};

inline SolveOtConfig parse_solve_ot(const json& j, const std::filesystem::path& base_dir) {
  Section s(j, "");
  SolveOtConfig c;
  c.common = parse_common(s);
  c.grid = parse_grid(s.section("grid"));
  c.cost = parse_cost(s.section("cost"));
  c.source = parse_density(s.section("source"), c.grid, base_dir);
  c.target = parse_density(s.section("target"), c.grid, base_dir);
  auto sv = s.section("solver");
  c.solver = sv.get<std::string>("kind");
  if (c.solver == "entropic") {
    c.epsilon = sv.number("epsilon", 1e-4);
    c.max_iterations = sv.get<std::size_t>("max_iterations", std::size_t{200'000});
    c.tolerance = sv.number("tolerance", 1e-7);
    require(c.epsilon > 0.0, sv.field("epsilon") + " must be positive");
    require(c.tolerance > 0.0, sv.field("tolerance") + " must be positive");
  } else if (c.solver == "exact1d") {
    require(c.grid.dim() == 1, sv.field("kind") + " exact1d needs a 1D grid");
  } else if (c.solver != "lp") {
    throw ConfigError(sv.field("kind") + " must be lp, entropic or exact1d");
  }
  sv.finish();
  c.map = s.get<bool>("map", true);
  s.finish();
  return c;
}

struct VerifyConfig {
  Common common;
  std::vector<std::uint64_t> seeds;
  std::vector<double> p, q;
  std::vector<int> n;
  int dim = 1;
  std::string solver = "lp";
  bool identical_pair = false;
  double kappa = 0.1;
  int modes = 4;
  double floor = 0.1;
  double entropic_epsilon = 1e-4;
  /// Fraction of instances required to have LHS >= 0 outright.
  double min_nonnegative_fraction = 0.0;
};

inline VerifyConfig parse_verify(const json& j) {
  Section s(j, "");
  VerifyConfig c;
  c.common = parse_common(s);
  auto b = s.section("batch");
  require(b.has("count") != b.has("seeds"), b.field("count") + " or " + b.field("seeds") + " (exactly one) is required");
  if (b.has("count")) {
    const int count = b.get<int>("count");
    require(count >= 1, b.field("count") + " must be >= 1");
    for (int k = 0; k < count; ++k) c.seeds.push_back(c.common.seed + static_cast<std::uint64_t>(k));
  } else {
    c.seeds = b.get<std::vector<std::uint64_t>>("seeds");
    require(!c.seeds.empty(), b.field("seeds") + " must not be empty");
  }
  c.p = b.get<std::vector<double>>("p");
  c.q = b.get<std::vector<double>>("q");
  c.n = b.get<std::vector<int>>("n");
  c.dim = b.get<int>("dim", 1);
  c.solver = b.get<std::string>("solver", std::string("lp"));
  c.identical_pair = b.get<bool>("identical_pair", false);
  c.kappa = b.number("kappa", 0.1);
  c.modes = b.get<int>("modes", 4);
  c.floor = b.number("floor", 0.1);
  c.entropic_epsilon = b.number("entropic_epsilon", 1e-4);
  b.finish();
  c.min_nonnegative_fraction = s.number("min_nonnegative_fraction", 0.0);
  s.finish();
  require(!c.p.empty() && !c.q.empty() && !c.n.empty(), "batch.p, batch.q and batch.n must not be empty");
  for (double p : c.p) require(p > 1.0, "batch.p entries must be > 1 (got " + format_double(p) + ")");
  for (double q : c.q) require(q > 1.0, "batch.q entries must be > 1 (got " + format_double(q) + ")");
  for (int n : c.n) require(n >= 2, "batch.n entries must be >= 2");
  require(c.dim == 1 || c.dim == 2, "batch.dim must be 1 or 2");
  require(c.solver == "lp" || c.solver == "entropic" || c.solver == "exact1d",
          "batch.solver must be lp, entropic or exact1d");
  require(c.solver != "exact1d" || c.dim == 1, "batch.solver exact1d needs batch.dim 1");
  require(c.kappa >= 0.0, "batch.kappa must be >= 0");
  require(c.modes >= 1, "batch.modes must be >= 1");
  require(c.floor > 0.0, "batch.floor must be positive");
  require(c.entropic_epsilon > 0.0, "batch.entropic_epsilon must be positive");
  require(c.min_nonnegative_fraction >= 0.0 && c.min_nonnegative_fraction <= 1.0,
          "min_nonnegative_fraction must lie in [0, 1]");
  return c;
}

struct JkoCliConfig {
  Common common;
  Grid grid = Grid::line(0.0, 1.0, 1);
  DensitySpec initial;
  double p = 2.0, tau = 1e-3;
  int steps = 1;
  std::string energy = "entropy";
  double m = 2.0;
  double epsilon = -1.0;
  std::size_t max_inner_iterations = 20'000;
  double inner_tolerance = 1e-8;
  double descent_tolerance = 1e-10;
  int max_backtracks = 30;
  int polish_iterations = 20;
  /// Per-step TV slack relative to TV(rho_0).
  double tv_slack = 1e-3;
  bool write_densities = true;
  bool compare = false;
  double compare_dt = -1.0;
  bool compare_refinement = true;
  std::optional<double> compare_max_l1;
};

inline JkoCliConfig parse_jko(const json& j, const std::filesystem::path& base_dir) {
  Section s(j, "");
  JkoCliConfig c;
  c.common = parse_common(s);
  c.grid = parse_grid(s.section("grid"));
  c.initial = parse_density(s.section("initial"), c.grid, base_dir);
  c.p = s.number("p", 2.0);
  c.tau = s.number("tau");
  c.steps = s.get<int>("steps");
  auto e = s.section("energy");
  c.energy = e.get<std::string>("kind");
  if (c.energy == "power") {
    c.m = e.number("m");
    require(c.m > 1.0, e.field("m") + " must be > 1");
  } else {
    require(c.energy == "entropy", e.field("kind") + " must be entropy or power");
  }
  e.finish();
  if (auto in = s.optional_section("solver")) {
    c.epsilon = in->number("epsilon", -1.0);
    c.max_inner_iterations = in->get<std::size_t>("max_inner_iterations", std::size_t{20'000});
    c.inner_tolerance = in->number("inner_tolerance", 1e-8);
    c.descent_tolerance = in->number("descent_tolerance", 1e-10);
    c.max_backtracks = in->get<int>("max_backtracks", 30);
    c.polish_iterations = in->get<int>("polish_iterations", 20);
    in->finish();
    require(c.max_inner_iterations >= 1, in->field("max_inner_iterations") + " must be >= 1");
    require(c.inner_tolerance > 0.0, in->field("inner_tolerance") + " must be positive");
    require(c.descent_tolerance >= 0.0, in->field("descent_tolerance") + " must be >= 0");
    require(c.max_backtracks >= 0, in->field("max_backtracks") + " must be >= 0");
    require(c.polish_iterations >= 0, in->field("polish_iterations") + " must be >= 0");
  }
  c.tv_slack = s.number("tv_slack", 1e-3);
  c.write_densities = s.get<bool>("write_densities", true);
  if (auto cmp = s.optional_section("compare")) {
    c.compare = true;
    c.compare_dt = cmp->number("dt", -1.0);
    c.compare_refinement = cmp->get<bool>("refinement", true);
    if (cmp->has("max_l1")) c.compare_max_l1 = cmp->number("max_l1");
    cmp->finish();
    require(c.grid.dim() == 1, cmp->field("dt") + ": the PDE comparison needs a 1D grid");
  }
  s.finish();
  require(c.p > 1.0, "p must be > 1 (got " + format_double(c.p) + ")");
  require(c.tau > 0.0, "tau must be positive");
  require(c.steps >= 0, "steps must be >= 0");
  require(c.tv_slack >= 0.0, "tv_slack must be >= 0");
  return c;
}

struct MollifyConfig {
  Common common;
  Grid grid = Grid::line(0.0, 1.0, 1);
  CostSpec cost;
  DensitySpec source, target;
  std::vector<double> epsilons;
  int quadrature_order = 16;
  double slack = 0.1;
};

inline MollifyConfig parse_mollify(const json& j, const std::filesystem::path& base_dir) {
  Section s(j, "");
  MollifyConfig c;
  c.common = parse_common(s);
  c.grid = parse_grid(s.section("grid"));
  c.cost = parse_cost(s.section("cost"));
  c.source = parse_density(s.section("source"), c.grid, base_dir);
  c.target = parse_density(s.section("target"), c.grid, base_dir);
  c.epsilons = s.get<std::vector<double>>("epsilons");
  c.quadrature_order = s.get<int>("quadrature_order", 16);
  c.slack = s.number("slack", 0.1);
  s.finish();
  require(c.grid.dim() == 1, "grid: the mollification study needs a 1D grid");
  require(!c.cost.mollify_epsilon, "cost.mollify: the study mollifies the base cost itself");
  require(!c.epsilons.empty(), "epsilons must not be empty");
  for (std::size_t k = 0; k < c.epsilons.size(); ++k) {
    require(c.epsilons[k] > 0.0, "epsilons entries must be positive");
    if (k > 0) require(c.epsilons[k] < c.epsilons[k - 1], "epsilons must be strictly decreasing");
  }
  require(c.quadrature_order >= 2, "quadrature_order must be >= 2");
  require(c.slack >= 0.0, "slack must be >= 0");
  return c;
}

struct CTransformConfig {
  Common common;
  std::filesystem::path input;
  CostSpec cost;
  /// "c" (psi -> psi^c), "cbar" (phi -> phi^cbar) or "double" (psi -> (psi^c)^cbar).
  std::string mode = "c";
};

inline CTransformConfig parse_ctransform(const json& j, const std::filesystem::path& base_dir) {
  Section s(j, "");
  CTransformConfig c;
  c.common = parse_common(s);
  c.input = s.get<std::string>("input");
  if (c.input.is_relative()) c.input = base_dir / c.input;
  c.cost = parse_cost(s.section("cost"));
  c.mode = s.get<std::string>("mode", std::string("c"));
  s.finish();
  require(c.mode == "c" || c.mode == "cbar" || c.mode == "double", "mode must be c, cbar or double");
  return c;
}

}  // namespace otlab::cli
