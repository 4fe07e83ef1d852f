// advpc: train small classifiers, craft gradient-based adversarial examples
// (plain, momentum, Nesterov, and predictor-corrector variants, with
// optional resize/smoothing/scale gradient estimators), and report success
// matrices and sweeps.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advpc/attack.hpp"
#include "advpc/dataset.hpp"
#include "advpc/errors.hpp"
#include "advpc/eval.hpp"
#include "advpc/model_zoo.hpp"
#include "advpc/ode.hpp"

namespace {

using namespace advpc;

// Every tuning flag in one place; subcommands read the slice they need.
struct Flags {
  double epsilon = 0.3;
  double epsilon_255 = -1.0;  // >= 0: use this value / 255 as the budget
  double alpha = 0.0;         // 0 selects epsilon / iterations
  int iterations = 10;
  int predictions = 1;
  double mu = 1.0;
  double dim_p = 0.5;
  double dim_ratio = 330.0 / 299.0;
  int tim_kernel = 7;
  double tim_sigma = 0.0;  // 0 selects kernel / 3
  int sim_copies = 5;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 selects hardware concurrency
  std::string format = "csv";
  std::string out;  // empty: stdout
  std::string checkpoints;
  std::string dataset_path;
  int count = 1000;
  std::uint64_t data_seed = 1;
};

double budget_of(const Flags& f) {
  return f.epsilon_255 >= 0.0 ? f.epsilon_255 / 255.0 : f.epsilon;
}

AttackConfig attack_config(const Flags& f) {
  AttackConfig cfg;
  cfg.epsilon = budget_of(f);
  if (f.alpha > 0.0) cfg.step_alpha = f.alpha;
  cfg.iterations = f.iterations;
  cfg.predictions = f.predictions;
  cfg.momentum_mu = f.mu;
  AugmentConfig aug;  // parameters for whichever estimators an attack id enables
  aug.dim = DimConfig{f.dim_p, f.dim_ratio};
  aug.tim = TimConfig{f.tim_kernel, f.tim_sigma};
  aug.sim = SimConfig{f.sim_copies};
  cfg.augment = aug;
  return cfg;
}

EvalConfig eval_config(const Flags& f) {
  EvalConfig cfg;
  cfg.attack = attack_config(f);
  cfg.seed = f.seed;
  cfg.workers = f.workers;
  return cfg;
}

std::string checkpoints_dir(const Flags& f) {
  if (!f.checkpoints.empty()) return f.checkpoints;
  if (const char* env = std::getenv("ADVPC_CHECKPOINTS")) return env;
  return ".";
}

Dataset load_corpus(const Flags& f) {
  if (!f.dataset_path.empty()) return load_dataset(f.dataset_path);
  return make_synthetic_dataset(f.count, f.data_seed);
}

ReportFormat report_format(const Flags& f) {
  return f.format == "json" ? ReportFormat::Json : ReportFormat::Csv;
}

template <typename Report>
void deliver(const Report& report, const Flags& f) {
  if (f.out.empty())
    write_report(report, report_format(f), std::cout);
  else
    emit_report(report, report_format(f), f.out);
}

// Loads "arch#seed" checkpoints on demand; "a#1+b#2" resolves to an
// equal-weight logit fusion of the parts. Loaded models stay alive for the
// whole invocation.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::string dir) : dir_(std::move(dir)) {}

  const Model* resolve(const std::string& ref) {
    auto it = cache_.find(ref);
    if (it != cache_.end()) return it->second.get();
    if (ref.find('+') == std::string::npos) return load_single(ref);

    std::vector<const Model*> members;
    for (const auto& part : split(ref, '+')) members.push_back(resolve(part));
    std::vector<double> weights(members.size(), 1.0);
    auto fused = std::make_unique<EnsembleModel>(members, weights);
    const Model* raw = fused.get();
    cache_.emplace(ref, std::move(fused));
    return raw;
  }

  std::vector<std::string> all_refs() const {
    std::vector<std::string> refs;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir_, ec))
      if (entry.path().extension() == ".advm") refs.push_back(entry.path().stem());
    if (ec) throw IoError("cannot list checkpoints in " + dir_ + ": " + ec.message());
    std::sort(refs.begin(), refs.end());
    if (refs.empty()) throw ContractError("no .advm checkpoints found in " + dir_);
    return refs;
  }

  static std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
      if (c == sep) {
        if (!cur.empty()) parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) parts.push_back(cur);
    return parts;
  }

 private:
  const Model* load_single(const std::string& ref) {
    const std::string path = dir_ + "/" + ref + ".advm";
    auto model = std::make_unique<Classifier>(make_classifier(load_checkpoint(path)));
    const Model* raw = model.get();
    cache_.emplace(ref, std::move(model));
    return raw;
  }

  std::string dir_;
  std::map<std::string, std::unique_ptr<Model>> cache_;
};

std::vector<ModelRef> resolve_refs(ModelRegistry& registry, const std::string& list) {
  std::vector<ModelRef> refs;
  for (const auto& ref : ModelRegistry::split(list, ','))
    refs.push_back({ref, registry.resolve(ref)});
  if (refs.empty()) throw ContractError("empty model list");
  return refs;
}

std::vector<ModelRef> resolve_targets(ModelRegistry& registry, const std::string& list) {
  if (list != "all") return resolve_refs(registry, list);
  std::vector<ModelRef> refs;
  for (const auto& ref : registry.all_refs()) refs.push_back({ref, registry.resolve(ref)});
  return refs;
}

std::vector<AttackId> parse_attacks(const std::string& list) {
  std::vector<AttackId> ids;
  for (const auto& token : ModelRegistry::split(list, ','))
    ids.push_back(AttackId::parse(token));
  if (ids.empty()) throw ContractError("empty attack list");
  return ids;
}

// "1..10" or "2,4,6" -> explicit list.
std::vector<long long> parse_axis(const std::string& text) {
  const auto dots = text.find("..");
  std::vector<long long> values;
  if (dots != std::string::npos) {
    const long long lo = std::stoll(text.substr(0, dots));
    const long long hi = std::stoll(text.substr(dots + 2));
    if (hi < lo) throw ContractError("axis range '" + text + "' is descending");
    for (long long v = lo; v <= hi; ++v) values.push_back(v);
  } else {
    for (const auto& tok : ModelRegistry::split(text, ','))
      values.push_back(std::stoll(tok));
  }
  if (values.empty()) throw ContractError("empty axis '" + text + "'");
  return values;
}

std::vector<int> to_ints(const std::vector<long long>& values) {
  return {values.begin(), values.end()};
}

// ---- subcommand bodies -----------------------------------------------------

struct DatasetMakeArgs {
  std::string out;
  std::string idx_images, idx_labels;
};

void run_dataset_make(const Flags& f, const DatasetMakeArgs& a) {
  Dataset ds = a.idx_images.empty() ? make_synthetic_dataset(f.count, f.data_seed)
                                    : import_idx(a.idx_images, a.idx_labels);
  save_dataset(ds, a.out);
  std::cout << "wrote " << ds.size() << " examples (" << (a.idx_images.empty() ? "synthetic" : "imported")
            << ") to " << a.out << "\n";
}

struct TrainArgs {
  std::string arch = "cnn-small";
  std::uint64_t init_seed = 1;
  int epochs = 5;
  int batch = 32;
  double lr = 0.1;
  std::uint64_t train_seed = 1;
  bool adversarial = false;
  double adv_epsilon = 0.1;
};

void run_train(const Flags& f, const TrainArgs& a) {
  ModelSpec spec;
  spec.architecture = architecture_from_string(a.arch);
  spec.init_seed = a.init_seed;
  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.learning_rate = a.lr;
  cfg.rng_seed = a.train_seed;
  if (a.adversarial) cfg.adversarial = AdversarialTraining{a.adv_epsilon};

  const Dataset ds = load_corpus(f);
  const Checkpoint cp = train(spec, ds, cfg);
  const std::string path = checkpoints_dir(f) + "/" + cp.reference() + ".advm";
  save_checkpoint(cp, path);
  std::cout << "trained " << cp.reference() << " train_acc=" << cp.train_accuracy
            << " test_acc=" << cp.test_accuracy << " -> " << path << "\n";
}

struct AttackArgs {
  std::string attack = "pc-fgsm";
  std::string source;
  std::string save_path;  // optional .advd with the crafted examples
};

void run_attack_cmd(const Flags& f, const AttackArgs& a) {
  // Validate the id before any filesystem work so a typo fails fast.
  const AttackId id = AttackId::parse(a.attack);
  ModelRegistry registry(checkpoints_dir(f));
  const Model* source = registry.resolve(a.source);
  const Dataset corpus = load_corpus(f);
  const Dataset subset = filter_correct(*source, corpus);

  long long grads = 0;
  const EvalConfig cfg = eval_config(f);
  std::vector<Example> advs = craft_adversarial(id, *source, subset, cfg, &grads);
  const double rate = success_rate(*source, advs);

  if (!a.save_path.empty()) {
    Dataset out;
    out.examples = advs;
    out.provenance = corpus.provenance;
    out.class_count = corpus.class_count;
    save_dataset(out, a.save_path);
  }
  std::cout << "attack=" << id.str() << " source=" << a.source << " n=" << advs.size()
            << " success_rate=" << rate << " grad_evals_total=" << grads << "\n";
}

struct EvalArgs {
  std::string attacks = "fgsm,pc-fgsm";
  std::string sources;
  std::string targets = "all";
};

void run_eval(const Flags& f, const EvalArgs& a) {
  const std::vector<AttackId> attacks = parse_attacks(a.attacks);
  ModelRegistry registry(checkpoints_dir(f));
  const SuccessMatrix matrix =
      build_matrix(attacks, resolve_refs(registry, a.sources),
                   resolve_targets(registry, a.targets), load_corpus(f), eval_config(f));
  deliver(matrix, f);
}

struct SweepArgs {
  std::string mode;
  std::string attacks;  // single id for predictions/iterations, list for budget
  std::string sources;
  std::string targets = "all";
  std::string axis;
};

void run_sweep(const Flags& f, const SweepArgs& a) {
  ModelRegistry registry(checkpoints_dir(f));
  const auto sources = resolve_refs(registry, a.sources);
  if (sources.size() != 1)
    throw ContractError("sweep: exactly one --source is required");
  const auto targets = resolve_targets(registry, a.targets);
  const Dataset corpus = load_corpus(f);
  const EvalConfig cfg = eval_config(f);

  SweepResult result;
  if (a.mode == "predictions") {
    const std::string id = a.attacks.empty() ? "pc-fgsm" : a.attacks;
    const std::string axis = a.axis.empty() ? "1..10" : a.axis;
    result = sweep_predictions(AttackId::parse(id), sources[0], targets, corpus,
                               to_ints(parse_axis(axis)), cfg);
  } else if (a.mode == "iterations") {
    const std::string id = a.attacks.empty() ? "pc-i-fgsm" : a.attacks;
    const std::string axis = a.axis.empty() ? "1..10" : a.axis;
    result = sweep_iterations(AttackId::parse(id), sources[0], targets, corpus,
                              to_ints(parse_axis(axis)), cfg);
  } else {
    const std::string ids = a.attacks.empty() ? "i-fgsm,pc-i-fgsm" : a.attacks;
    const std::string axis = a.axis.empty() ? "2,4,6,8,10" : a.axis;
    result = sweep_budget(parse_attacks(ids), sources[0], targets, corpus,
                          parse_axis(axis), cfg);
  }
  deliver(result, f);
}

struct OdeArgs {
  std::uint64_t model_seed = 1;
};

void run_ode_demo(const Flags& f, const OdeArgs& a) {
  // Linear decay test problem with a known solution.
  OdeProblem base;
  base.f = [](double, const Tensor& u) { return scale(u, -2.0); };
  base.u0 = Tensor::scalar(1.0);
  base.t0 = 0.0;
  base.t_end = 1.0;
  const auto exact = [](double t) { return Tensor::scalar(std::exp(-2.0 * t)); };
  const std::vector<int> step_counts{8, 16, 32, 64, 128};

  for (OdeScheme scheme : {OdeScheme::Euler, OdeScheme::Trapezoid, OdeScheme::ImprovedEuler}) {
    OdeProblem p = base;
    p.steps = step_counts.back();
    const SolverRun run = scheme == OdeScheme::Euler        ? euler(p)
                          : scheme == OdeScheme::Trapezoid ? trapezoid(p)
                                                           : improved_euler(p);
    const double err = max_abs_diff(run.values.back(), exact(p.t_end));
    const auto order = convergence_order(scheme, base, exact, step_counts);
    std::cout << "scheme=" << scheme_name(scheme) << " steps=" << p.steps
              << " endpoint_error=" << err << " fitted_order="
              << (order ? std::to_string(*order) : std::string("exact")) << "\n";
  }

  // A single explicit-Euler step along the loss gradient is the same
  // arithmetic as the unsigned one-step attack.
  ModelSpec spec;
  spec.init_seed = a.model_seed;
  Classifier model = make_classifier({spec, init_params(spec)});
  const Dataset probe = make_synthetic_dataset(1, f.data_seed);
  const CorrespondencePair pair = fgsm_correspondence_demo(
      model, probe.examples[0].image, probe.examples[0].label, budget_of(f));
  if (!pair.euler_step.bit_equal(pair.unsigned_step))
    throw ContractError("ode-demo: Euler step and unsigned one-step attack disagree");
  std::cout << "correspondence=bit-identical epsilon=" << budget_of(f) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient-based adversarial attacks as predictor-corrector schemes"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value file; command-line flags override it");

  Flags f;
  app.add_option("--epsilon", f.epsilon,
                 "L-inf budget in [0,1] pixel units (implementation default for "
                 "28-pixel inputs)")
      ->capture_default_str();
  auto* e255 = app.add_option("--epsilon-255", f.epsilon_255,
                              "budget in 1/255 units, e.g. 16 (method preset); "
                              "overrides --epsilon");
  app.add_option("--alpha", f.alpha,
                 "iteration step size; 0 selects epsilon/iterations (method default)")
      ->capture_default_str();
  app.add_option("--iterations", f.iterations, "iteration count T (method default)")
      ->capture_default_str();
  app.add_option("--predictions", f.predictions,
                 "prediction horizon K (method default)")
      ->capture_default_str();
  app.add_option("--mu", f.mu, "momentum decay (method default)")->capture_default_str();
  app.add_option("--dim-p", f.dim_p, "resize-and-pad probability (method default)")
      ->capture_default_str();
  app.add_option("--dim-ratio", f.dim_ratio,
                 "max canvas expansion ratio (method default 330/299)")
      ->capture_default_str();
  app.add_option("--tim-kernel", f.tim_kernel,
                 "smoothing kernel size, odd (implementation default for 28-pixel "
                 "inputs; the method used 15 at 299 pixels)")
      ->capture_default_str();
  app.add_option("--tim-sigma", f.tim_sigma,
                 "smoothing kernel sigma; 0 selects kernel/3 (implementation default)")
      ->capture_default_str();
  app.add_option("--sim-copies", f.sim_copies, "scale-copy count (method default)")
      ->capture_default_str();
  app.add_option("--seed", f.seed, "master seed for per-example attack randomness")
      ->capture_default_str();
  app.add_option("--workers", f.workers,
                 "crafting threads; 0 selects hardware concurrency")
      ->capture_default_str();
  app.add_option("--format", f.format, "report format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--out", f.out, "report path; empty writes to stdout");
  app.add_option("--checkpoints", f.checkpoints,
                 "checkpoint directory (or env ADVPC_CHECKPOINTS; default '.')");
  app.add_option("--dataset", f.dataset_path, "dataset file (.advd); omit to synthesize");
  app.add_option("--count", f.count, "synthetic corpus size (implementation default)")
      ->capture_default_str();
  app.add_option("--data-seed", f.data_seed, "synthetic corpus seed")
      ->capture_default_str();
  (void)e255;

  DatasetMakeArgs mk;
  auto* c_make = app.add_subcommand("dataset-make", "generate or import a dataset file");
  c_make->fallthrough();
  c_make->add_option("--out", mk.out, "output path (.advd)")->required();
  auto* oi = c_make->add_option("--idx-images", mk.idx_images,
                                "IDX image file; switches to import mode");
  auto* ol = c_make->add_option("--idx-labels", mk.idx_labels, "IDX label file");
  oi->needs(ol);
  ol->needs(oi);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a classifier checkpoint");
  c_train->fallthrough();
  c_train->add_option("--arch", tr.arch, "architecture")
      ->check(CLI::IsMember({"mlp-2", "cnn-small", "cnn-wide"}))
      ->capture_default_str();
  c_train->add_option("--init-seed", tr.init_seed, "weight init seed; names the checkpoint")
      ->capture_default_str();
  c_train->add_option("--epochs", tr.epochs, "")->capture_default_str();
  c_train->add_option("--batch", tr.batch, "")->capture_default_str();
  c_train->add_option("--lr", tr.lr, "SGD learning rate")->capture_default_str();
  c_train->add_option("--train-seed", tr.train_seed, "shuffle seed")->capture_default_str();
  c_train->add_flag("--adversarial", tr.adversarial,
                    "replace half of each batch with single-step sign perturbations");
  c_train->add_option("--adv-epsilon", tr.adv_epsilon, "budget for --adversarial")
      ->capture_default_str();

  AttackArgs at;
  auto* c_attack = app.add_subcommand("attack", "craft adversarial examples for one model");
  c_attack->fallthrough();
  c_attack->add_option("--attack", at.attack, "attack id, e.g. pc-si-ti-di-ni-fgsm")
      ->capture_default_str();
  c_attack->add_option("--source", at.source,
                       "model ref (arch#seed); join with '+' for an equal-weight ensemble")
      ->required();
  c_attack->add_option("--save", at.save_path, "write the crafted examples (.advd)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "success-rate matrix over attacks and models");
  c_eval->fallthrough();
  c_eval->add_option("--attacks", ev.attacks, "comma-separated attack ids")
      ->capture_default_str();
  c_eval->add_option("--source", ev.sources,
                     "crafting model refs, comma-separated; '+' fuses an ensemble")
      ->required();
  c_eval->add_option("--targets", ev.targets, "target refs or 'all'")->capture_default_str();

  SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep", "success rates along K, T, or a budget");
  c_sweep->fallthrough();
  c_sweep->add_option("--mode", sw.mode, "sweep axis")
      ->check(CLI::IsMember({"predictions", "iterations", "budget"}))
      ->required();
  c_sweep->add_option("--attacks", sw.attacks,
                      "attack id (list allowed in budget mode); default pc-fgsm / "
                      "pc-i-fgsm / i-fgsm,pc-i-fgsm per mode");
  c_sweep->add_option("--source", sw.sources, "crafting model ref")->required();
  c_sweep->add_option("--targets", sw.targets, "target refs or 'all'")->capture_default_str();
  c_sweep->add_option("--k", sw.axis, "axis values, '1..10' or '2,4,6' (predictions mode)");
  c_sweep->add_option("--t", sw.axis, "axis values (iterations mode)");
  c_sweep->add_option("--budgets", sw.axis, "axis values (budget mode)");

  OdeArgs od;
  auto* c_ode = app.add_subcommand(
      "ode-demo", "convergence orders and the one-step-attack correspondence");
  c_ode->fallthrough();
  c_ode->add_option("--model-seed", od.model_seed, "seed for the probe classifier")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
    if (c_make->parsed()) run_dataset_make(f, mk);
    if (c_train->parsed()) run_train(f, tr);
    if (c_attack->parsed()) run_attack_cmd(f, at);
    if (c_eval->parsed()) run_eval(f, ev);
    if (c_sweep->parsed()) run_sweep(f, sw);
    if (c_ode->parsed()) run_ode_demo(f, od);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  } catch (const advpc::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
