// aeal: simulation experiments and the two-process agent.

#include "aeal/experiments.hpp"
#include "aeal/data.hpp"
#include "aeal/protocol.hpp"
#include "aeal/transport.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace aeal;

enum Exit { kOk = 0, kInput = 1, kProtocol = 2, kNumeric = 3 };

int exit_code(const Error& e) {
  switch (e.code()) {
    case Errc::ProtocolError:
    case Errc::TransportFailure: return kProtocol;
    case Errc::InvalidArgument:
    case Errc::CsvParse:
    case Errc::MissingId:
    case Errc::DuplicateId:
    case Errc::EmptyIntersection:
    case Errc::ColumnConflict:
    case Errc::UnsupportedResponse:
    case Errc::BadEpsilon:
    case Errc::BadFlipProb:
    case Errc::BadDimensions:
    case Errc::DimensionMismatch: return kInput;
    default: return kNumeric;
  }
}

/// Splices `--config file.json` into the argument list right after the
/// subcommand, so flags given on the command line still win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  require(in.good(), Errc::InvalidArgument, "cannot open config '" + path + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::InvalidArgument, "bad config '" + path + "': " + e.what());
  }
  require(cfg.is_object(), Errc::InvalidArgument, "config must be a JSON object");
  const auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  std::vector<std::string> extra;
  for (const auto& item : cfg.items()) {
    std::string key = item.key();
    std::replace(key.begin(), key.end(), '_', '-');  // the CSV header spells keys with underscores
    const json& v = item.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) extra.push_back("--" + key);
      continue;
    }
    extra.push_back("--" + key);
    if (v.is_array())
      for (const auto& e : v) extra.push_back(scalar(e));
    else
      extra.push_back(scalar(v));
  }
  const auto at = args.size() > 1 ? args.begin() + 2 : args.end();
  args.insert(at, extra.begin(), extra.end());
  return args;
}

/// Output stream: a file when a path is given, stdout otherwise.
struct Output {
  std::ofstream file;
  std::ostream* out = &std::cout;
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path);
    require(file.good(), Errc::InvalidArgument, "cannot write '" + path + "'");
    out = &file;
  }
};

void header(std::ostream& out, const std::string& cmd, const json& cfg) {
  out << "# aeal " << cmd << ' ' << cfg.dump() << '\n';
}

std::string num(double v) { return csv::format_double(v); }

ScreenTest parse_test(const std::string& s) {
  if (s == "wald") return ScreenTest::Wald;
  if (s == "lrt") return ScreenTest::Lrt;
  fail(Errc::InvalidArgument, "unknown test '" + s + "' (wald or lrt)");
}

Hypothesis parse_hypothesis(const std::string& s) {
  if (s == "h0" || s == "H0") return Hypothesis::H0;
  if (s == "h1" || s == "H1") return Hypothesis::H1;
  fail(Errc::InvalidArgument, "unknown hypothesis '" + s + "' (h0 or h1)");
}

// ---------------------------------------------------------------------------

struct ScreenArgs {
  std::string setting = "2";
  long n = 2000;
  double rho = 0.1;
  std::string family = "logistic";
  std::string test = "wald";
  std::string hypothesis = "h0";
  int reps = 100;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  double ridge = 0.0;
  bool keep_dependent = false;
  unsigned threads = 0;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--setting", setting, "covariate ownership setting (1, 2 or 3)")->capture_default_str();
    app->add_option("--n", n, "sample size")->capture_default_str();
    app->add_option("--rho", rho, "AR(1) correlation of the covariates")->capture_default_str();
    app->add_option("--family", family, "gaussian, logistic, poisson or logcosh[:alpha]")->capture_default_str();
    app->add_option("--test", test, "wald or lrt")->capture_default_str();
    app->add_option("--reps", reps, "replications")->capture_default_str();
    app->add_option("--seed", seed, "master seed")->capture_default_str();
    app->add_option("--alpha", alpha, "significance level")->capture_default_str();
    app->add_option("--ridge", ridge, "ridge penalty in the augmented fit")->capture_default_str();
    app->add_flag("--keep-dependent", keep_dependent, "fail instead of dropping sketch columns that are linearly dependent");
    app->add_option("--threads", threads, "worker threads (0: all cores)");
    app->add_option("--out,-o", out, "output CSV (default stdout)");
  }

  ScreenExperiment experiment() const {
    ScreenExperiment e;
    e.setting = parse_setting(setting);
    e.n = n;
    e.rho = rho;
    e.fam = LossFamily::parse(family);
    e.test = parse_test(test);
    e.hypothesis = parse_hypothesis(hypothesis);
    e.reps = reps;
    e.seed = seed;
    e.alpha = alpha;
    e.ridge = ridge;
    e.drop_dependent = !keep_dependent;
    e.threads = threads;
    require(reps >= 1, Errc::InvalidArgument, "--reps must be >= 1");
    return e;
  }

  json config() const {
    return {{"setting", setting}, {"n", n},       {"rho", rho},     {"family", family},
            {"test", test},       {"hypothesis", hypothesis},       {"reps", reps},
            {"seed", seed},       {"alpha", alpha}, {"ridge", ridge}, {"drop_dependent", !keep_dependent}};
  }
};

int cmd_qq(const ScreenArgs& a, double lap, int t_min, int t_max) {
  const ScreenExperiment e = a.experiment();
  const auto rows = qq_experiment(e, lap, t_min, t_max);
  Output o(a.out);
  json cfg = a.config();
  cfg["laplace_scale"] = lap;
  cfg["t_min"] = t_min;
  cfg["t_max"] = t_max;
  header(*o.out, "qq", cfg);
  csv::write_row(*o.out, {"replication", "t", "p_value"});
  for (const auto& r : rows) csv::write_row(*o.out, {std::to_string(r.replication), std::to_string(r.t), num(r.p_value)});
  return kOk;
}

int cmd_power(const ScreenArgs& a, const std::vector<std::string>& settings, const std::vector<long>& ns,
              const std::vector<int>& ts, const std::vector<double>& noises) {
  Output o(a.out);
  json cfg = a.config();
  cfg["setting"] = settings;
  cfg["n"] = ns;
  cfg["t"] = ts;
  cfg["noise"] = noises;
  header(*o.out, "power", cfg);
  csv::write_row(*o.out, {"setting", "n", "t", "noise_scale", "reject_rate"});
  for (const auto& s : settings)
    for (long n : ns) {
      ScreenArgs b = a;
      b.setting = s;
      b.n = n;
      for (const auto& r : power_experiment(b.experiment(), ts, noises))
        csv::write_row(*o.out, {std::to_string(r.setting), std::to_string(r.n), std::to_string(r.t),
                                num(r.noise_scale), num(r.reject_rate)});
    }
  return kOk;
}

int cmd_robust_u(const ScreenArgs& a, int t, const std::vector<double>& noises, int u_draws) {
  Output o(a.out);
  json cfg = a.config();
  cfg["t"] = t;
  cfg["noise"] = noises;
  cfg["u_draws"] = u_draws;
  header(*o.out, "robust-u", cfg);
  csv::write_row(*o.out, {"scenario", "noise", "matches_out_of_reps", "reps"});
  const ScreenExperiment e = a.experiment();
  for (double nz : noises) {
    const RobustRow r = robust_u_experiment(e, t, nz, u_draws);
    csv::write_row(*o.out, {r.scenario, num(r.noise_scale), std::to_string(r.matches), std::to_string(r.reps)});
  }
  return kOk;
}

struct CompareArgs {
  std::string setting = "2";
  long n = 2000;
  double rho = 0.1;
  std::string family = "logistic";
  long eval_n = 100000;
  int aeal_rounds = 25;
  int baseline_rounds = 200;
  int grid_size = 20;
  double step_min = 0.01;
  double step_max = 5.0;
  int local_steps = 5;
  double mu = 0.1;
  int batch = 0;
  bool constant_step = false;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_train_compare(const CompareArgs& a) {
  CompareConfig c;
  c.setting = parse_setting(a.setting);
  c.n = a.n;
  c.rho = a.rho;
  c.fam = LossFamily::parse(a.family);
  c.eval_n = a.eval_n;
  c.aeal_rounds = a.aeal_rounds;
  c.baseline_rounds = a.baseline_rounds;
  c.grid = default_step_grid(a.grid_size, a.step_min, a.step_max);
  c.baseline.local_steps = a.local_steps;
  c.baseline.mu = a.mu;
  if (a.batch > 0) c.baseline.batch = a.batch;
  c.baseline.decay = a.constant_step ? StepSchedule::Constant : StepSchedule::InvSqrt;
  c.baseline.batch_seed = derive_seed(a.seed, stream::mask + 1);
  c.seed = a.seed;
  const CompareResult r = train_compare(c);

  Output o(a.out);
  const json cfg = {{"setting", a.setting},
                    {"n", a.n},
                    {"rho", a.rho},
                    {"family", a.family},
                    {"eval_n", a.eval_n},
                    {"aeal_rounds", a.aeal_rounds},
                    {"baseline_rounds", a.baseline_rounds},
                    {"grid_size", a.grid_size},
                    {"step_min", a.step_min},
                    {"step_max", a.step_max},
                    {"local_steps", a.local_steps},
                    {"mu", a.mu},
                    {"batch", a.batch},
                    {"constant_step", a.constant_step},
                    {"seed", a.seed},
                    {"fedsgd_step", r.fedsgd_step},
                    {"fedbcd_step", r.fedbcd_step},
                    {"fedsgd_tuning_transmissions", r.fedsgd_tuning_transmissions},
                    {"fedbcd_tuning_transmissions", r.fedbcd_tuning_transmissions}};
  header(*o.out, "train-compare", cfg);
  csv::write_row(*o.out, {"method", "round", "metric"});
  for (const auto& row : r.rows) csv::write_row(*o.out, {row.method, std::to_string(row.round), num(row.metric)});
  return kOk;
}

// ---------------------------------------------------------------------------
// agent

struct AgentArgs {
  std::string role;
  std::string listen;
  std::string connect;
  std::string port_file;
  std::string data;
  std::string id_column = "id";
  std::string response = "y";
  std::string family;
  std::string mode = "train";
  std::optional<int> t;
  std::string test = "wald";
  double alpha = 0.05;
  double ridge = 0.0;
  bool drop_dependent = false;
  int max_rounds = 200;
  std::optional<double> offset_tol;
  double coef_tol = 1e-8;
  std::optional<double> flip_prob;
  std::uint64_t mask_seed = 0;
  std::uint64_t u_seed = 0;
  std::uint64_t noise_seed = 1;
  std::optional<double> epsilon;
  std::optional<double> clip_bound;
  std::optional<double> noise_scale;
  std::string predict;
  std::string transcript;
  std::string version{kProtocolVersion};
};

json coef_json(const std::vector<std::string>& names, const Vector& beta) {
  json j = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = beta[static_cast<Eigen::Index>(i)];
  return j;
}

json trace_json(const AgentTrace& t, const std::vector<std::string>& names) {
  json j = {{"coefficients", coef_json(names, t.beta)}, {"rounds", t.rounds}};
  if (t.stop_reason) j["stop_reason"] = std::string(stop_reason_name(*t.stop_reason));
  if (!t.grad_log.empty()) j["max_block_gradient"] = *std::max_element(t.grad_log.begin(), t.grad_log.end());
  return j;
}

void write_transcript(const std::string& path, const Transcript& t) {
  if (path.empty()) return;
  std::ofstream f(path);
  require(f.good(), Errc::InvalidArgument, "cannot write '" + path + "'");
  for (const auto& e : t) f << (e.sent ? "> " : "< ") << e.line << '\n';
}

std::unique_ptr<Channel> open_channel(const AgentArgs& a) {
  require(a.listen.empty() != a.connect.empty(), Errc::InvalidArgument, "give exactly one of --listen and --connect");
  if (!a.connect.empty()) return tcp_connect(a.connect);
  TcpListener l(a.listen);
  if (!a.port_file.empty()) {
    // written to a temporary name first so readers never see a partial file
    const std::string tmp = a.port_file + ".tmp";
    {
      std::ofstream f(tmp);
      f << l.port() << '\n';
    }
    std::rename(tmp.c_str(), a.port_file.c_str());
  }
  return l.accept();
}

int cmd_agent(const AgentArgs& a) {
  require(a.role == "alice" || a.role == "bob", Errc::InvalidArgument, "--role must be alice or bob");
  const bool positional = a.id_column.empty();
  const std::string id_col = positional ? std::string() : a.id_column;
  const bool alice = a.role == "alice";

  const auto load = [&](const std::string& path, bool with_y) {
    if (positional) {
      // no id column: every column but the response is a covariate
      const csv::Table t = csv::read_file(path);
      OwnerTable o;
      const int yc = with_y ? t.find(a.response) : -1;
      require(!with_y || yc >= 0, Errc::CsvParse, "'" + path + "' has no response column '" + a.response + "'");
      for (std::size_t j = 0; j < t.header.size(); ++j)
        if (static_cast<int>(j) != yc) o.names.push_back(t.header[j]);
      o.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(o.names.size()));
      if (with_y) o.y = Vector(o.values.rows());
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        Eigen::Index k = 0;
        for (std::size_t j = 0; j < t.header.size(); ++j) {
          const double v = csv::to_double(t.rows[i][j]);
          if (static_cast<int>(j) == yc)
            (*o.y)[static_cast<Eigen::Index>(i)] = v;
          else
            o.values(static_cast<Eigen::Index>(i), k++) = v;
        }
      }
      return o;
    }
    return load_owner_csv(path, id_col, with_y ? std::optional<std::string>(a.response) : std::nullopt);
  };

  const OwnerTable tab = load(a.data, alice);
  check_full_rank(tab.values, tab.names, Errc::RankDeficientView, "this agent's design");
  OwnerTable pred;
  if (!a.predict.empty()) {
    pred = load(a.predict, false);
    require(pred.names == tab.names, Errc::DimensionMismatch, "prediction file columns differ from the data file");
  }
  if (alice) require(a.mode != "predict" || !a.predict.empty(), Errc::InvalidArgument, "predict mode needs --predict");

  auto ch = open_channel(a);
  json out;
  if (alice) {
    AliceInputs in{tab.values, *tab.y, positional ? std::vector<std::string>{} : tab.ids, pred.values,
                   positional ? std::vector<std::string>{} : pred.ids};
    AliceOptions opt;
    opt.mode = a.mode;
    opt.train.fam = LossFamily::parse(a.family.empty() ? "gaussian" : a.family);
    opt.train.solver.ridge = a.ridge;
    opt.train.stop.max_rounds = a.max_rounds;
    opt.train.stop.offset_tol = a.offset_tol;
    opt.train.stop.coef_tol = a.coef_tol;
    opt.train.flip_prob = a.flip_prob;
    opt.train.mask_seed = a.mask_seed;
    opt.t = a.t;
    opt.test = parse_test(a.test);
    opt.screen.ridge = a.ridge;
    opt.screen.drop_dependent = a.drop_dependent;
    opt.screen.alpha = a.alpha;
    opt.alpha = a.alpha;
    opt.version = a.version;
    const AliceOutcome r = run_alice(*ch, in, opt);
    write_transcript(a.transcript, r.transcript);
    out = {{"role", "alice"}, {"mode", a.mode}, {"family", opt.train.fam.name()}, {"n", r.rows.size()},
           {"bytes", r.bytes}, {"offset_messages", r.offsets}};
    if (r.screen) {
      const auto& d = r.screen->decision;
      out["screen"] = {{"statistic", d.statistic}, {"df", d.df}, {"p_value", d.p_value}, {"reject", d.reject},
                       {"alpha", d.alpha},         {"n_used", r.screen->n_used}, {"warnings", r.screen->warnings}};
    }
    if (r.train) out["train"] = trace_json(*r.train, tab.names);
    if (!r.predictions.empty()) {
      json ps = json::array();
      for (std::size_t i = 0; i < r.predictions.size(); ++i) {
        const auto& p = r.predictions[i];
        ps.push_back({{"id", positional ? std::to_string(i) : pred.ids[i]},
                      {"nu", p.nu},
                      {"nu_lo", p.nu_lo},
                      {"nu_hi", p.nu_hi},
                      {"mean", p.point},
                      {"lo", p.lo},
                      {"hi", p.hi}});
      }
      out["predictions"] = std::move(ps);
    }
  } else {
    BobInputs in{tab.values, positional ? std::vector<std::string>{} : tab.ids, pred.values,
                 positional ? std::vector<std::string>{} : pred.ids};
    BobOptions opt;
    if (!a.family.empty()) opt.family = LossFamily::parse(a.family);
    opt.sketch.u_seed = a.u_seed;
    opt.sketch.noise_seed = a.noise_seed;
    opt.sketch.epsilon = a.epsilon;
    opt.sketch.clip_bound = a.clip_bound;
    opt.sketch.noise_scale = a.noise_scale;
    opt.version = a.version;
    const BobOutcome r = run_bob(*ch, in, opt);
    write_transcript(a.transcript, r.transcript);
    out = {{"role", "bob"},      {"mode", r.mode},   {"family", r.fam.name()}, {"lambda", r.lambda},
           {"n", r.rows.size()}, {"bytes", r.bytes}, {"stop_reason", r.stop_reason}};
    if (r.screen) out["screen"] = {{"p_value", r.screen->p_value}, {"reject", r.screen->reject}};
    if (r.train) out["train"] = trace_json(*r.train, tab.names);
  }
  std::cout << out.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Assisted learning between two agents holding different columns of the same rows"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_option("--config", "JSON file whose keys mirror the flags of the subcommand");

  ScreenArgs qq_args;
  double qq_lap = 0.0;
  int t_min = 1;
  int t_max = 5;
  auto* qq = app.add_subcommand("qq", "p-values of the screening test under H0");
  qq_args.add(qq);
  qq->add_option("--laplace-scale", qq_lap, "Laplace noise scale added to the sketch")->capture_default_str();
  qq->add_option("--t-min", t_min)->capture_default_str();
  qq->add_option("--t-max", t_max)->capture_default_str();

  ScreenArgs pw_args;
  pw_args.hypothesis = "h1";
  std::vector<std::string> pw_settings{"1", "2", "3"};
  std::vector<long> pw_ns{2000};
  std::vector<int> pw_ts{1, 2, 3, 4, 5};
  std::vector<double> pw_noise{0.0};
  auto* power = app.add_subcommand("power", "rejection rates by sketch width and noise");
  pw_args.add(power);
  power->remove_option(power->get_option("--setting"));
  power->remove_option(power->get_option("--n"));
  power->add_option("--setting", pw_settings, "settings (1, 2, 3)")->capture_default_str();
  power->add_option("--n", pw_ns, "sample sizes")->capture_default_str();
  power->add_option("--t", pw_ts, "sketch widths")->capture_default_str();
  power->add_option("--noise,--laplace-scale", pw_noise, "Laplace noise scales")->capture_default_str();
  power->add_option("--hypothesis", pw_args.hypothesis, "h0 or h1")->capture_default_str();
  for (auto* o : {power->get_option("--setting"), power->get_option("--n"), power->get_option("--t"),
                  power->get_option("--noise")})
    o->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  ScreenArgs ru_args;
  int ru_t = 1;
  std::vector<double> ru_noise{0.0, 0.1, 0.5};
  int ru_u = 6;
  auto* robust = app.add_subcommand("robust-u", "decision agreement across projection draws");
  ru_args.add(robust);
  robust->add_option("--hypothesis", ru_args.hypothesis, "h0 or h1")->capture_default_str();
  robust->add_option("--t", ru_t, "sketch width")->capture_default_str();
  robust->add_option("--noise,--laplace-scale", ru_noise, "Laplace noise scales")
      ->capture_default_str()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  robust->add_option("--u-draws", ru_u, "number of projection matrices")->capture_default_str();

  CompareArgs ca;
  auto* tc = app.add_subcommand("train-compare", "AE-AL against FedSGD and FedBCD by transmissions");
  tc->add_option("--setting", ca.setting)->capture_default_str();
  tc->add_option("--n", ca.n)->capture_default_str();
  tc->add_option("--rho", ca.rho)->capture_default_str();
  tc->add_option("--family", ca.family)->capture_default_str();
  tc->add_option("--eval-n", ca.eval_n, "evaluation sample size")->capture_default_str();
  tc->add_option("--aeal-rounds", ca.aeal_rounds, "AE-AL round cap")->capture_default_str();
  tc->add_option("--baseline-rounds", ca.baseline_rounds, "baseline synchronization rounds")->capture_default_str();
  tc->add_option("--grid-size", ca.grid_size, "step size candidates")->capture_default_str();
  tc->add_option("--step-min", ca.step_min)->capture_default_str();
  tc->add_option("--step-max", ca.step_max)->capture_default_str();
  tc->add_option("--local-steps", ca.local_steps, "FedBCD local steps Q")->capture_default_str();
  tc->add_option("--mu", ca.mu, "FedBCD proximal weight")->capture_default_str();
  tc->add_option("--batch", ca.batch, "mini-batch size (0: full batch)")->capture_default_str();
  tc->add_flag("--constant-step", ca.constant_step, "no step decay");
  tc->add_option("--seed", ca.seed)->capture_default_str();
  tc->add_option("--out,-o", ca.out, "output CSV (default stdout)");

  AgentArgs ag;
  auto* agent = app.add_subcommand("agent", "run one agent of a session over TCP");
  agent->add_option("--role", ag.role, "alice (holds the response) or bob")->required();
  agent->add_option("--listen", ag.listen, "host:port to accept the peer on (port 0: any)");
  agent->add_option("--connect", ag.connect, "host:port of the listening peer");
  agent->add_option("--port-file", ag.port_file, "write the listening port here");
  agent->add_option("--data", ag.data, "this agent's CSV")->required();
  agent->add_option("--id-column", ag.id_column, "row id column; empty aligns rows by position")->capture_default_str();
  agent->add_option("--response", ag.response, "response column (alice)")->capture_default_str();
  agent->add_option("--family", ag.family, "loss family (alice: default gaussian; bob: refuse others)");
  agent->add_option("--mode", ag.mode, "screen, train or predict (alice)")->capture_default_str();
  agent->add_option("--t", ag.t, "sketch width for screening (default min(3, p_B))");
  agent->add_option("--test", ag.test, "wald or lrt")->capture_default_str();
  agent->add_option("--alpha", ag.alpha, "test level and interval level")->capture_default_str();
  agent->add_option("--ridge", ag.ridge, "ridge penalty")->capture_default_str();
  agent->add_flag("--drop-dependent", ag.drop_dependent, "drop sketch columns that are linearly dependent");
  agent->add_option("--max-rounds", ag.max_rounds)->capture_default_str();
  agent->add_option("--offset-tol", ag.offset_tol, "stop when the joint predictor moves less (default 1e-8 sqrt(n))");
  agent->add_option("--coef-tol", ag.coef_tol)->capture_default_str();
  agent->add_option("--flip-prob", ag.flip_prob, "randomized response on a 0/1 response");
  agent->add_option("--mask-seed", ag.mask_seed)->capture_default_str();
  agent->add_option("--u-seed", ag.u_seed, "projection seed (bob)")->capture_default_str();
  agent->add_option("--noise-seed", ag.noise_seed, "Laplace noise seed (bob)")->capture_default_str();
  agent->add_option("--epsilon", ag.epsilon, "privacy budget of the sketch (bob)");
  agent->add_option("--clip-bound", ag.clip_bound, "row norm bound c2 (bob)");
  agent->add_option("--noise-scale", ag.noise_scale, "raw Laplace scale instead of epsilon (bob)");
  agent->add_option("--predict", ag.predict, "CSV of points to predict (same columns as --data)");
  agent->add_option("--transcript", ag.transcript, "write the message transcript here");
  agent->add_option("--protocol-version", ag.version)->group("");

  try {
    const std::vector<std::string> args = expand_config(argc, argv);
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInput;
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
    return exit_code(e);
  }

  try {
    if (*qq) return cmd_qq(qq_args, qq_lap, t_min, t_max);
    if (*power) return cmd_power(pw_args, pw_settings, pw_ns, pw_ts, pw_noise);
    if (*robust) return cmd_robust_u(ru_args, ru_t, ru_noise, ru_u);
    if (*tc) return cmd_train_compare(ca);
    if (*agent) return cmd_agent(ag);
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kOk;
}
