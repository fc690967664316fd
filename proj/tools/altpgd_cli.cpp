// altpgd command-line driver.
//
//   altpgd toy       --out DIR
//   altpgd make-data --out DIR
//   altpgd train     --data CSV --arch 32,32 [--adv-eps 0.12] --out MODEL
//   altpgd attack    --model MODEL --data CSV --losses "ce;cw;ce,cw" --eps 8/255 ... --out DIR
//   altpgd ablate    --kind ordering|combiner --model MODEL --data CSV ... --out DIR
//
// Every subcommand accepts --config FILE (flat key=value, keys are the long
// option names); options given on the command line take precedence.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "altpgd/altpgd.hpp"

namespace fs = std::filesystem;
using namespace altpgd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write " + path.string());
  return os;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
}

// --- toy --------------------------------------------------------------------

struct ToyArgs {
  std::string out = "toy-out";
};

int cmd_toy(const ToyArgs& args) {
  ensure_dir(args.out);
  const auto runs = toy_trajectories();
  const char* files[] = {"toy_ce.csv", "toy_cw.csv", "toy_ce_cw.csv"};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto os = open_out(fs::path(args.out) / files[i]);
    write_toy_csv(os, runs[i]);
    os.flush();
    if (!os) throw Error("failed writing " + (fs::path(args.out) / files[i]).string());
  }
  std::string summary;
  for (const auto& run : runs) {
    if (!summary.empty()) summary += ", ";
    summary += run.label + ": " + (run.outcome.success ? "success" : "fail");
  }
  std::cout << summary << '\n';
  for (const auto& run : runs)
    std::cout << run.label << " final prediction " << run.predictions.back() << '\n';
  const bool reproduced = runs[0].outcome.success && !runs[1].outcome.success &&
                          runs[2].outcome.success;
  if (!reproduced) {
    std::cerr << "expected outcome CE: success, CW: fail, CE&CW: success was not reproduced\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// --- make-data --------------------------------------------------------------

struct DataArgs {
  std::string out = "data";
};

int cmd_make_data(const DataArgs& args) {
  ensure_dir(args.out);
  const Dataset train = bench::train_set();
  const Dataset test = bench::test_set();
  save_dataset_csv(train, fs::path(args.out) / (train.name + ".csv"));
  save_dataset_csv(test, fs::path(args.out) / (test.name + ".csv"));
  std::cout << "wrote " << train.size() << " training and " << test.size() << " test examples to "
            << args.out << '\n';
  return kExitOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string arch = "32,32";
  std::size_t epochs = 300;
  std::string step = "0.5";
  std::uint64_t seed = bench::kInitSeed;
  std::string adv_eps;
  std::string p = "inf";
  std::size_t adv_steps = 10;
  bool box = true;
  std::string out = "model.bin";
};

int cmd_train(const TrainArgs& args) {
  const ArchSpec arch = parse_arch(args.arch);
  TrainOptions opt;
  opt.epochs = args.epochs;
  opt.step = cli::parse_real_or_fraction(args.step);
  opt.seed = args.seed;
  if (!args.adv_eps.empty()) {
    ThreatModel threat{cli::parse_norm(args.p), cli::parse_real_or_fraction(args.adv_eps), args.box};
    validate_threat(threat);
    opt.adversarial = AdversarialTraining{threat, args.adv_steps, 0.0};
  }
  const Dataset ds = load_dataset_csv(args.data);
  const Classifier model = train(ds, arch, opt);
  save_model(model, args.out);
  std::cout << (opt.adversarial ? "adversarial" : "plain") << " training done; clean accuracy "
            << 100.0 * accuracy(model, ds) << "% on " << ds.size() << " training examples\n";
  return kExitOk;
}

// --- attack / ablate --------------------------------------------------------

struct AttackArgs {
  std::string model;
  std::string data;
  std::string losses = "ce";
  std::size_t iterations = 100;
  std::size_t restarts = 1;
  std::string eps = "8/255";
  std::string p = "inf";
  bool box = true;
  std::string schedule = "fixed-quarter";
  std::string combiner = "alternate";
  double gamma = 0.5;
  std::string init = "clean";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool timing = false;
  bool trace = true;
  std::string out = "attack-out";
  // ablate only
  std::string kind = "ordering";
  std::string pairs = "ce,cw;ce,dlr;cw,dlr";
  std::string gammas = "0.25,0.75";
};

void add_attack_options(CLI::App* sub, AttackArgs& a) {
  sub->add_option("--model", a.model, "model file")->required()->check(CLI::ExistingFile);
  sub->add_option("--data", a.data, "dataset CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--T", a.iterations, "iterations per attack");
  sub->add_option("--R", a.restarts, "restarts");
  sub->add_option("--eps", a.eps, "radius, decimal or fraction (8/255)");
  sub->add_option("--p", a.p, "norm: inf or 2");
  sub->add_option("--box", a.box, "clip to [0,1]^D (true/false)");
  sub->add_option("--schedule", a.schedule, "fixed-quarter | gama | md2 | md3 | fixed:<value>");
  sub->add_option("--gamma", a.gamma, "convex weight of the first loss");
  sub->add_option("--init", a.init, "clean | random");
  sub->add_option("--seed", a.seed, "seed for random init and per-example streams");
  sub->add_option("--jobs", a.jobs, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--timing", a.timing, "write wall-clock times to report.csv (true/false)");
  sub->add_option("--trace", a.trace, "write successive-distance traces (true/false)");
  sub->add_option("--out", a.out, "output directory");
}

AttackConfig base_config(const AttackArgs& a) {
  AttackConfig c;
  c.iterations = a.iterations;
  c.restarts = a.restarts;
  c.threat = {cli::parse_norm(a.p), cli::parse_real_or_fraction(a.eps), a.box};
  validate_threat(c.threat);
  if (c.iterations == 0) throw ConfigError("T must be at least 1");
  c.steps = cli::parse_schedule(a.schedule, c.threat.eps, c.iterations);
  c.init = cli::parse_init(a.init, a.seed);
  c.combiner = cli::parse_combiner(a.combiner, a.gamma);
  return c;
}

void write_outputs(const fs::path& dir, const EvaluationReport& report,
                   const std::vector<DistanceTrace>& traces, bool timing) {
  ensure_dir(dir);
  {
    auto os = open_out(dir / "report.csv");
    write_report_csv(os, report, timing);
  }
  {
    auto os = open_out(dir / "examples.csv");
    write_examples_csv(os, report);
  }
  {
    auto os = open_out(dir / "report.txt");
    write_report_table(os, report);
  }
  if (!traces.empty()) {
    auto os = open_out(dir / "trace.csv");
    write_trace_csv(os, traces);
  }
  write_report_table(std::cout, report);
}

std::vector<DistanceTrace> traces_for(const Classifier& model, const Dataset& ds,
                                      const std::vector<LabeledAttack>& attacks,
                                      const EvalOptions& opt) {
  std::vector<DistanceTrace> out;
  const Dataset batch = ds.subset(0, 100);
  for (const auto& a : attacks) {
    if (a.config.iterations < 2) continue;
    DistanceTrace tr = distance_trace(model, batch.examples, a.config, opt);
    tr.label = a.label;
    out.push_back(std::move(tr));
  }
  return out;
}

int cmd_attack(const AttackArgs& args) {
  // parse and validate everything before any computation
  const AttackConfig base = base_config(args);
  std::vector<LabeledAttack> attacks;
  for (LossSchedule losses : cli::parse_loss_list(args.losses)) {
    AttackConfig c = base;
    c.losses = std::move(losses);
    validate_config(c);
    attacks.push_back(labeled(std::move(c)));
  }
  const Classifier model = load_model(args.model);
  const Dataset ds = load_dataset_csv(args.data, model.num_classes());
  for (const auto& a : attacks)
    for (SurrogateKind k : a.config.losses.stages)
      if (k == SurrogateKind::DLR && model.num_classes() < 3)
        throw ConfigError("DLR needs a model with at least 3 classes");

  const EvalOptions opt{args.seed, args.jobs, fs::path(args.model).stem().string()};
  const EvaluationReport report = evaluate(model, ds, attacks, opt);
  const auto traces = args.trace ? traces_for(model, ds, attacks, opt) : std::vector<DistanceTrace>{};
  write_outputs(args.out, report, traces, args.timing);
  return kExitOk;
}

std::vector<double> parse_gammas(const std::string& text) {
  std::vector<double> out;
  for (auto tok : detail::split_commas(text)) out.push_back(cli::parse_real_or_fraction(tok));
  return out;
}

int cmd_ablate(const AttackArgs& args) {
  AttackConfig base = base_config(args);
  base.combiner = {};
  if (args.kind != "ordering" && args.kind != "combiner")
    throw ConfigError("unknown ablation '" + args.kind + "' (expected ordering or combiner)");
  std::vector<std::pair<SurrogateKind, SurrogateKind>> pairs;
  std::vector<double> gammas;
  if (args.kind == "ordering") {
    for (const LossSchedule& s : cli::parse_loss_list(args.pairs)) {
      if (s.size() != 2) throw ConfigError("ordering pairs need exactly two losses each");
      pairs.emplace_back(s.stages[0], s.stages[1]);
    }
  } else {
    gammas = parse_gammas(args.gammas);
    for (double g : gammas) check_combo({g, SurrogateKind::CE, SurrogateKind::CW});
    if (!std::holds_alternative<FixedStep>(base.steps))
      throw ConfigError("combiner ablation needs a fixed step schedule");
  }
  validate_config(base);

  const Classifier model = load_model(args.model);
  const Dataset ds = load_dataset_csv(args.data, model.num_classes());
  const EvalOptions opt{args.seed, args.jobs, fs::path(args.model).stem().string()};
  const EvaluationReport report = args.kind == "ordering"
                                      ? ordering_ablation(model, ds, pairs, base, opt)
                                      : combiner_ablation(model, ds, gammas, base, opt);
  write_outputs(args.out, report, {}, args.timing);
  return kExitOk;
}

// Splices "--config FILE" contents in right after the subcommand name so
// that later command-line options override them.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> in(argv + 1, argv + argc);
  std::vector<std::string> rest;
  std::vector<std::string> from_file;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == "--config") {
      if (i + 1 >= in.size()) throw ConfigError("--config needs a file");
      from_file = cli::config_file_args(in[++i]);
    } else if (in[i].starts_with("--config=")) {
      from_file = cli::config_file_args(in[i].substr(9));
    } else {
      rest.push_back(in[i]);
    }
  }
  std::vector<std::string> out;
  std::size_t i = 0;
  if (!rest.empty() && !rest[0].starts_with("-")) out.push_back(rest[i++]);
  out.insert(out.end(), from_file.begin(), from_file.end());
  out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(i), rest.end());
  std::reverse(out.begin(), out.end());  // CLI11 consumes the vector form back to front
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-stage PGD with alternating surrogate losses", "altpgd"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  ToyArgs toy;
  auto* toy_cmd = app.add_subcommand("toy", "run the 2-D three-class toy example");
  toy_cmd->add_option("--out", toy.out, "output directory");

  DataArgs data;
  auto* data_cmd = app.add_subcommand("make-data", "write the synthetic blob benchmark CSVs");
  data_cmd->add_option("--out", data.out, "output directory");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a victim classifier");
  train_cmd->add_option("--data", tr.data, "training CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--arch", tr.arch, "hidden ReLU widths, e.g. 32,32, or 'linear'");
  train_cmd->add_option("--epochs", tr.epochs, "full-batch epochs");
  train_cmd->add_option("--step", tr.step, "gradient step");
  train_cmd->add_option("--seed", tr.seed, "weight-init seed");
  train_cmd->add_option("--adv-eps", tr.adv_eps, "enable PGD-CE adversarial training with this radius");
  train_cmd->add_option("--p", tr.p, "adversarial training norm: inf or 2");
  train_cmd->add_option("--adv-steps", tr.adv_steps, "inner PGD steps");
  train_cmd->add_option("--box", tr.box, "clip adversaries to [0,1]^D (true/false)");
  train_cmd->add_option("--out", tr.out, "model file to write");

  AttackArgs atk;
  auto* attack_cmd = app.add_subcommand("attack", "evaluate attacks on a model and dataset");
  add_attack_options(attack_cmd, atk);
  attack_cmd->add_option("--losses", atk.losses, "stage order per attack, attacks split by ';'");
  attack_cmd->add_option("--combiner", atk.combiner, "alternate | convex | ensemble");

  AttackArgs abl;
  auto* ablate_cmd = app.add_subcommand("ablate", "surrogate ordering or combiner ablation");
  add_attack_options(ablate_cmd, abl);
  ablate_cmd->add_option("--kind", abl.kind, "ordering | combiner");
  ablate_cmd->add_option("--pairs", abl.pairs, "ordering pairs, e.g. ce,cw;ce,dlr");
  ablate_cmd->add_option("--gammas", abl.gammas, "convex weights, e.g. 0.25,0.75");

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (toy_cmd->parsed()) return cmd_toy(toy);
    if (data_cmd->parsed()) return cmd_make_data(data);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (attack_cmd->parsed()) return cmd_attack(atk);
    if (ablate_cmd->parsed()) return cmd_ablate(abl);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
