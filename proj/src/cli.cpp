#include "barista/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "barista/diagnostics.hpp"
#include "barista/estimate.hpp"
#include "barista/io.hpp"
#include "barista/optimize.hpp"
#include "barista/select.hpp"
#include "barista/simulate.hpp"

namespace barista {

namespace {

using json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string input, output, reference;
  std::string method = "qc";
  std::string family = "three-stage";
  std::string bounds = "default";
  std::uint64_t seed = 0;
  std::size_t bootstrap = 0;
  std::vector<double> windows;
  std::string unit;
  std::string clamp_policy = "reject";
  bool no_timestamp = false;
  double horizon = 0;
  std::vector<double> params;
  std::size_t n = 0;
  bool poisson = false;
  std::size_t generations = 500, population = 100;
  std::vector<std::string> grid;
  std::size_t grid_steps = 5;
  std::vector<double> qc_stage1, qc_stage2, qc_stage3, qc_safe;
  double alpha_level = 0.05;

  // which flags were given, from the command line or the config file
  bool has_horizon = false, has_unit = false, has_n = false, has_family = false;
};

// Output file, or the caller's stream when no path is given.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary);
    if (!file_) throw OutputError("cannot write '" + path + "'");
    stream_ = &file_;
  }
  std::ostream& operator*() { return *stream_; }
  void close() {
    stream_->flush();
    if (!*stream_) throw OutputError("write failed");
  }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json header(const std::string& command, const Options& o) {
  json r;
  r["schema"] = kSchema;
  r["command"] = command;
  if (!o.no_timestamp) r["generated_at"] = utc_now();
  return r;
}

void emit(const json& report, const std::string& path, std::ostream& out) {
  Sink sink(path, out);
  *sink << report.dump(2) << '\n';
  sink.close();
}

FamilyTag parse_family(const std::string& s) {
  if (s == "one-stage") return FamilyTag::OneStage;
  if (s == "two-stage") return FamilyTag::TwoStage;
  if (s == "three-stage") return FamilyTag::ThreeStage;
  throw UsageError("unknown family '" + s + "'");
}

Params params_from(const Options& o) {
  if (o.params.size() != 6) throw UsageError("--params needs alpha1,alpha2,alpha3,d1,d2,c");
  if (!o.has_horizon) throw UsageError("--horizon is required with --params");
  const auto& v = o.params;
  return Params(v[0], v[1], v[2], v[3], v[4], v[5], o.horizon);
}

Ingested read_input(const Options& o, const std::string& path) {
  if (path.empty()) throw UsageError("--input is required");
  IngestSpec spec;
  spec.path = path;
  if (o.has_horizon) spec.horizon = o.horizon;
  if (o.has_unit) spec.unit = parse_unit(o.unit);
  spec.clamp_policy = parse_clamp_policy(o.clamp_policy);
  return ingest(spec);
}

json params_json(const Params& p) {
  return json{{"alpha1", p.alpha1()}, {"alpha2", p.alpha2()}, {"alpha3", p.alpha3()},
              {"d1", p.d1()},         {"d2", p.d2()},         {"c", p.c()}};
}

json fit_json(const FitResult& f, TimeUnit unit) {
  json j;
  j["family"] = family_name(f.family);
  j["method"] = method_name(f.method);
  j["estimates"] = params_json(f.params);
  j["d2_minutes"] = f.params.d2() * minutes_per(unit);
  j["d2_per_10080"] = f.params.d2() * 10080;
  j["loglik"] = f.loglik;
  if (f.stderrs) {
    const auto& s = *f.stderrs;
    j["standard_errors"] = json{{"alpha1", s[0]}, {"alpha2", s[1]}, {"alpha3", s[2]},
                                {"d1", s[3]},     {"d2", s[4]},     {"c", s[5]}};
    j["d2_minutes_se"] = s[4] * minutes_per(unit);
  }
  if (!f.fitness_history.empty()) j["fitness_history"] = f.fitness_history;
  return j;
}

json sample_json(const Ingested& in) {
  return json{{"n", in.sample.size()},
              {"horizon", in.sample.horizon()},
              {"unit", unit_name(in.unit)},
              {"auctions", in.auctions.size()},
              {"clamped", in.clamped}};
}

std::vector<Bound> bounds_for(const Options& o, FamilyTag family, double T) {
  if (o.bounds == "reference") return reference_bounds(family, T);
  if (o.bounds == "default") return default_bounds(family, T);
  throw UsageError("--bounds must be reference or default");
}

json bounds_json(const std::vector<Bound>& b) {
  json j = json::array();
  for (const auto& x : b) j.push_back({x.lo, x.hi});
  return j;
}

GaConfig ga_config(const Options& o, FamilyTag family, double T) {
  GaConfig g;
  g.population_size = o.population;
  g.offspring_pairs = o.population / 2;
  g.generations = o.generations;
  g.bounds = bounds_for(o, family, T);
  g.seed = derive(Seed{o.seed}, 1);
  return g;
}

Window window_of(const std::vector<double>& v, const char* flag, Window fallback) {
  if (v.empty()) return fallback;
  if (v.size() != 2) throw UsageError(std::string(flag) + " needs lo,hi");
  return {v[0], v[1]};
}

// Default windows for the reference regime, scaled from a 7-day horizon.
QcConfig qc_config(const Options& o, double T) {
  const double k = T / 7;
  const double minute = T / (7 * 10080);
  QcConfig q;
  q.stage1 = window_of(o.qc_stage1, "--qc-stage1", {0.001 * k, 1 * k});
  q.stage2 = window_of(o.qc_stage2, "--qc-stage2", {3 * k, 6.9 * k});
  q.stage3 = window_of(o.qc_stage3, "--qc-stage3", {T - 2 * minute, T - minute});
  q.safe = {1 * k, 3 * k, 6 * k, T - 2 * minute};
  if (!o.qc_safe.empty()) {
    if (o.qc_safe.size() != 4) throw UsageError("--qc-safe needs t1,t2p,t2,t3");
    q.safe = {o.qc_safe[0], o.qc_safe[1], o.qc_safe[2], o.qc_safe[3]};
  }
  q.validate(T);
  return q;
}

std::vector<GridAxis> grid_axes(const Options& o, FamilyTag family, double T) {
  const auto names = gene_names(family);
  std::vector<GridAxis> axes;
  if (o.grid.empty()) {
    for (const auto& b : bounds_for(o, family, T)) axes.push_back({b.lo, b.hi, o.grid_steps});
    return axes;
  }
  if (o.grid.size() != names.size())
    throw UsageError("--grid needs one lo:hi:steps axis per parameter (" +
                     std::to_string(names.size()) + ")");
  for (const auto& spec : o.grid) {
    GridAxis a;
    char c1 = 0, c2 = 0;
    std::istringstream is(spec);
    if (!(is >> a.lo >> c1 >> a.hi >> c2 >> a.steps) || c1 != ':' || c2 != ':' || a.steps == 0 ||
        !(is >> std::ws).eof())
      throw UsageError("bad grid axis '" + spec + "', expected lo:hi:steps");
    axes.push_back(a);
  }
  return axes;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const Params p = params_from(o);
  if (o.poisson == o.has_n) throw UsageError("simulate needs exactly one of --n and --poisson");
  const TimeUnit unit = o.has_unit ? parse_unit(o.unit) : TimeUnit::Days;
  const Seed seed{o.seed};
  const BidSample s = o.poisson ? sample_poisson_count(p, seed) : sample_fixed_n(p, o.n, seed);
  std::vector<std::pair<std::string, std::string>> meta = {
      {"generator", o.poisson ? "sample_poisson_count" : "sample_fixed_n"},
      {"seed", std::to_string(o.seed)},
      {"n", o.poisson ? std::string("poisson") : std::to_string(o.n)},
      {"horizon", format_double(p.horizon())},
      {"unit", unit_name(unit)},
      {"alpha1", format_double(p.alpha1())},
      {"alpha2", format_double(p.alpha2())},
      {"alpha3", format_double(p.alpha3())},
      {"d1", format_double(p.d1())},
      {"d2", format_double(p.d2())},
      {"c", format_double(p.c())}};
  Sink sink(o.output, out);
  write_sample_csv(*sink, s, meta);
  sink.close();
  return 0;
}

int cmd_fit(const Options& o, std::ostream& out) {
  const Ingested in = read_input(o, o.input);
  const BidSample& s = in.sample;
  const double T = s.horizon();
  const FamilyTag family = parse_family(o.family);

  json config;
  config["input"] = o.input;
  config["method"] = o.method;
  config["family"] = family_name(family);
  config["clamp_policy"] = o.clamp_policy;

  Fitter fitter;
  if (o.method == "qc") {
    if (o.has_family && family != FamilyTag::ThreeStage)
      throw UsageError("qc fits the three-stage family only");
    const QcConfig q = qc_config(o, T);
    config["family"] = family_name(FamilyTag::ThreeStage);
    config["qc"] = {{"stage1", {q.stage1.lo, q.stage1.hi}},
                    {"stage2", {q.stage2.lo, q.stage2.hi}},
                    {"stage3", {q.stage3.lo, q.stage3.hi}},
                    {"safe", {q.safe.t1, q.safe.t2p, q.safe.t2, q.safe.t3}}};
    fitter = [q](const BidSample& x) { return qc_fit(x, q); };
  } else if (o.method == "grid") {
    const auto axes = grid_axes(o, family, T);
    json ax = json::array();
    for (const auto& a : axes) ax.push_back({a.lo, a.hi, a.steps});
    config["grid"] = ax;
    fitter = [axes, family](const BidSample& x) { return grid_search(x, family, axes); };
  } else if (o.method == "ga") {
    const GaConfig g = ga_config(o, family, T);
    g.validate(family);
    config["ga"] = {{"population_size", g.population_size},
                    {"elite_fraction", g.elite_fraction},
                    {"offspring_pairs", g.offspring_pairs},
                    {"generations", g.generations},
                    {"bounds_preset", o.bounds},
                    {"bounds", bounds_json(g.bounds)}};
    fitter = [g, family](const BidSample& x) { return ga_fit(x, family, g); };
  } else {
    throw UsageError("--method must be qc, grid or ga");
  }

  FitResult f = fitter(s);
  if (o.bootstrap > 0) {
    config["bootstrap"] = o.bootstrap;
    f.stderrs = bootstrap_se(s, fitter, o.bootstrap, derive(Seed{o.seed}, 2));
  }

  json r = header("fit", o);
  r["seed"] = o.seed;
  r["sample"] = sample_json(in);
  r["config"] = config;
  r["fit"] = fit_json(f, in.unit);
  emit(r, o.output, out);
  return 0;
}

json lr_json(const LrTest& t) {
  return json{{"statistic", t.statistic},
              {"p_value", t.p_value},
              {"flagged", t.flagged},
              {"refined", t.refined}};
}

int cmd_select(const Options& o, std::ostream& out) {
  const Ingested in = read_input(o, o.input);
  const double T = in.sample.horizon();
  SelectionConfig cfg = SelectionConfig::defaults(T, Seed{o.seed});
  for (auto* g : {&cfg.two_stage, &cfg.three_stage}) {
    g->population_size = o.population;
    g->offspring_pairs = o.population / 2;
    g->generations = o.generations;
  }
  cfg.two_stage.bounds = bounds_for(o, FamilyTag::TwoStage, T);
  cfg.three_stage.bounds = bounds_for(o, FamilyTag::ThreeStage, T);
  cfg.alpha_level = o.alpha_level;
  cfg.two_stage.validate(FamilyTag::TwoStage);
  cfg.three_stage.validate(FamilyTag::ThreeStage);

  const SelectionResult res = select_model(in.sample, cfg);

  json r = header("select", o);
  r["seed"] = o.seed;
  r["sample"] = sample_json(in);
  r["config"] = {{"input", o.input},
                 {"alpha_level", cfg.alpha_level},
                 {"population_size", o.population},
                 {"generations", o.generations},
                 {"bounds_preset", o.bounds},
                 {"clamp_policy", o.clamp_policy}};
  r["chosen"] = family_name(res.chosen);
  json fits = json::array();
  for (const auto& f : res.fits) fits.push_back(fit_json(f, in.unit));
  r["fits"] = fits;
  r["lr_tests"] = {{"one_vs_two", lr_json(res.lr_12)},
                   {"two_vs_three", res.lr_23 ? lr_json(*res.lr_23) : json(nullptr)}};
  emit(r, o.output, out);
  return 0;
}

int cmd_diagnose(const Options& o, std::ostream& out) {
  namespace fs = std::filesystem;
  const Ingested in = read_input(o, o.input);
  const BidSample& s = in.sample;
  const double T = s.horizon();
  if (o.output.empty()) throw UsageError("diagnose needs --output, a directory for the tables");
  if (o.params.empty() == o.reference.empty())
    throw UsageError("diagnose needs exactly one of --params and --reference");
  std::error_code ec;
  fs::create_directories(o.output, ec);
  if (ec) throw OutputError("cannot create '" + o.output + "': " + ec.message());
  const fs::path dir(o.output);

  struct KsRow {
    std::string test;
    std::optional<double> wa, wb;
    KsResult ks;
  };
  std::vector<KsRow> ks_rows;

  json r = header("diagnose", o);
  r["sample"] = sample_json(in);
  json files = json::object();

  // QQ against the model or a reference sample
  QqData qq;
  if (!o.params.empty()) {
    Options with_horizon = o;
    with_horizon.horizon = T;
    with_horizon.has_horizon = true;
    const Params p = params_from(with_horizon);
    qq = qq_points(s, p);
    ks_rows.push_back({"model", std::nullopt, std::nullopt, ks_one_sample(s, p)});
    r["reference"] = {{"params", params_json(p)}};
  } else {
    const Ingested other = read_input(o, o.reference);
    if (other.sample.horizon() != T) throw UsageError("reference sample has a different horizon");
    qq = qq_points(s, other.sample);
    ks_rows.push_back({"reference", std::nullopt, std::nullopt, ks_two_sample(s, other.sample)});
    r["reference"] = {{"input", o.reference}, {"n", other.sample.size()}};
  }
  {
    std::vector<std::vector<double>> rows;
    rows.reserve(qq.pairs.size());
    for (const auto& [a, b] : qq.pairs) rows.push_back({a, b});
    Sink sink((dir / "qq.csv").string(), out);
    write_table(*sink, {"observed", "reference"}, rows);
    sink.close();
    files["qq"] = "qq.csv";
  }

  std::vector<double> windows = o.windows.empty() ? std::vector<double>{T} : o.windows;
  std::vector<std::optional<WindowEcdf>> ecdfs;
  json wins = json::array();
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const double w = windows[k];
    if (!(w > 0 && w <= T)) throw UsageError("window " + format_double(w) + " outside (0, T]");
    std::optional<WindowEcdf> e;
    try {
      e = reverse_time_ecdf(s, w);
    } catch (const std::invalid_argument&) {
      // no events in the window: header-only table
    }
    std::vector<std::vector<double>> rows;
    if (e) {
      const auto& u = e->rescaled.times();
      for (std::size_t i = 0; i < u.size(); ++i)
        if (i + 1 == u.size() || u[i + 1] != u[i]) rows.push_back({u[i], (*e)(u[i])});
    }
    const std::string name = "ecdf_" + std::to_string(k) + ".csv";
    Sink sink((dir / name).string(), out);
    write_table(*sink, {"u", "ecdf"}, rows);
    sink.close();
    wins.push_back({{"window", w}, {"events", e ? e->rescaled.size() : 0}, {"file", name}});
    if (e)
      ks_rows.push_back({"window_uniform", w, std::nullopt,
                         ks_one_sample(e->rescaled, [](double x) { return x; })});
    ecdfs.push_back(std::move(e));
  }
  for (std::size_t a = 0; a < ecdfs.size(); ++a)
    for (std::size_t b = a + 1; b < ecdfs.size(); ++b)
      if (ecdfs[a] && ecdfs[b])
        ks_rows.push_back({"window_pair", windows[a], windows[b],
                           ks_two_sample(ecdfs[a]->rescaled, ecdfs[b]->rescaled)});
  files["ecdf"] = wins;

  {
    Sink sink((dir / "ks.csv").string(), out);
    auto& os = *sink;
    os << "test,window_a,window_b,n_effective,d,p_value\n";
    auto opt = [](const std::optional<double>& x) { return x ? format_double(*x) : std::string(); };
    json ks = json::array();
    for (const auto& k : ks_rows) {
      os << k.test << ',' << opt(k.wa) << ',' << opt(k.wb) << ',' << format_double(k.ks.n_effective)
         << ',' << format_double(k.ks.d_statistic) << ',' << format_double(k.ks.p_value) << '\n';
      ks.push_back({{"test", k.test},
                    {"window_a", k.wa ? json(*k.wa) : json(nullptr)},
                    {"window_b", k.wb ? json(*k.wb) : json(nullptr)},
                    {"n_effective", k.ks.n_effective},
                    {"d", k.ks.d_statistic},
                    {"p_value", k.ks.p_value}});
    }
    sink.close();
    files["ks"] = "ks.csv";
    r["ks"] = ks;
  }
  r["files"] = files;
  emit(r, "", out);
  return 0;
}

int cmd_ingest_check(const Options& o, std::ostream& out) {
  const Ingested in = read_input(o, o.input);
  json r = header("ingest-check", o);
  r["input"] = o.input;
  r["clamp_policy"] = o.clamp_policy;
  r["sample"] = sample_json(in);
  r["rows"] = in.rows;
  json a = json::array();
  for (const auto& x : in.auctions)
    a.push_back({{"id", x.id}, {"count", x.count}, {"first", x.first}, {"last", x.last}});
  r["per_auction"] = a;
  emit(r, o.output, out);
  return 0;
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message,
                 json extra = json::object()) {
  json e;
  e["kind"] = kind;
  e["message"] = message;
  for (auto& [k, v] : extra.items()) e[k] = v;
  json r;
  r["schema"] = kSchema;
  r["error"] = e;
  err << r.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Three-stage bid-arrival model: simulate, fit, select and diagnose.", "barista"};
  app.set_config("--config", "", "Flat key=value file of flag values; flags override it");
  app.allow_config_extras(false);
  Options o;

  app.add_option("--input", o.input, "Bid-time CSV");
  app.add_option("--output", o.output, "Output file (diagnose: directory); stdout if absent");
  app.add_option("--method", o.method, "fit: qc, grid or ga")->check(CLI::IsMember({"qc", "grid", "ga"}));
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--bootstrap", o.bootstrap, "fit: bootstrap replicates for standard errors");
  app.add_option("--windows", o.windows, "diagnose: final-window lengths, in the time unit")->delimiter(',');
  auto* unit = app.add_option("--unit", o.unit, "Time unit of the data")
                   ->check(CLI::IsMember({"days", "hours", "minutes", "seconds"}));
  app.add_option("--clamp-policy", o.clamp_policy, "Times outside [0, T): reject or clamp-epsilon")
      ->check(CLI::IsMember({"reject", "clamp-epsilon"}));
  app.add_flag("--no-timestamp", o.no_timestamp, "Omit the generation time from reports");
  auto* horizon = app.add_option("--horizon", o.horizon, "Auction length T");
  app.add_option("--params", o.params, "alpha1,alpha2,alpha3,d1,d2,c")->delimiter(',');
  auto* n = app.add_option("--n", o.n, "simulate: number of events");
  app.add_flag("--poisson", o.poisson, "simulate: Poisson number of events");
  auto* family = app.add_option("--family", o.family, "fit: one-stage, two-stage or three-stage")
                     ->check(CLI::IsMember({"one-stage", "two-stage", "three-stage"}));
  app.add_option("--bounds", o.bounds, "Search box: reference or default")
      ->check(CLI::IsMember({"reference", "default"}));
  app.add_option("--generations", o.generations, "GA generations");
  app.add_option("--population", o.population, "GA population size")->check(CLI::Range(2, 1000000));
  app.add_option("--grid", o.grid, "grid: lo:hi:steps per parameter")->delimiter(',');
  app.add_option("--grid-steps", o.grid_steps, "grid: steps per parameter over the bounds")
      ->check(CLI::PositiveNumber);
  app.add_option("--qc-stage1", o.qc_stage1, "qc: stage-1 window lo,hi")->delimiter(',');
  app.add_option("--qc-stage2", o.qc_stage2, "qc: stage-2 window lo,hi")->delimiter(',');
  app.add_option("--qc-stage3", o.qc_stage3, "qc: two stage-3 points")->delimiter(',');
  app.add_option("--qc-safe", o.qc_safe, "qc: safe points t1,t2p,t2,t3")->delimiter(',');
  app.add_option("--alpha-level", o.alpha_level, "select: test level");
  app.add_option("--reference", o.reference, "diagnose: reference sample CSV");

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"simulate", "Draw event times from a model"},
      {"fit", "Estimate a model from bid times"},
      {"select", "Choose the number of stages by likelihood-ratio tests"},
      {"diagnose", "QQ, reverse-time ECDF and KS tables"},
      {"ingest-check", "Validate and summarize a bid-time CSV"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();
  app.require_subcommand(1);

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }
  o.has_horizon = horizon->count() > 0;
  o.has_unit = unit->count() > 0;
  o.has_n = n->count() > 0;
  o.has_family = family->count() > 0;

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "simulate") return cmd_simulate(o, out);
    if (command == "fit") return cmd_fit(o, out);
    if (command == "select") return cmd_select(o, out);
    if (command == "diagnose") return cmd_diagnose(o, out);
    return cmd_ingest_check(o, out);
  } catch (const UsageError& e) {
    print_error(err, "usage", e.what());
    return 2;
  } catch (const IngestError& e) {
    json rows = json::array();
    for (const auto& r : e.rows()) rows.push_back({{"line", r.line}, {"message", r.message}});
    print_error(err, "ingest", e.what(), {{"rows", rows}});
  } catch (const EstimationError& e) {
    print_error(err, "estimation", e.what(), {{"stage", e.stage()}});
  } catch (const OutputError& e) {
    print_error(err, "output", e.what());
  } catch (const std::invalid_argument& e) {
    print_error(err, "invalid-argument", e.what());
  } catch (const std::domain_error& e) {
    print_error(err, "invalid-argument", e.what());
  } catch (const std::exception& e) {
    print_error(err, "runtime", e.what());
  }
  return 1;
}

}  // namespace barista
