#include "advpc/eval.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>
#include <utility>

#include "advpc/errors.hpp"
#include "advpc/rng.hpp"
#include "json.hpp"

namespace advpc {

namespace {

std::uint64_t example_seed(std::uint64_t master, std::size_t index) {
  return mix64(mix64(master) ^
               mix64(static_cast<std::uint64_t>(index) ^ 0xD1B54A32D192ED03ull));
}

// Index-strided worker pool. Each index is processed exactly once and the
// caller's per-index writes are disjoint, so results are identical for any
// worker count. The first exception wins and is rethrown after the join.
template <typename Fn>
void parallel_for(std::size_t count, int workers, const Fn& fn) {
  int w = workers <= 0 ? static_cast<int>(std::thread::hardware_concurrency()) : workers;
  if (w < 1) w = 1;
  if (static_cast<std::size_t>(w) > count) w = static_cast<int>(count);
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = static_cast<std::size_t>(t); i < count;
           i += static_cast<std::size_t>(w)) {
        if (failed.load(std::memory_order_relaxed)) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

void check_refs(const std::vector<ModelRef>& refs, const char* what) {
  if (refs.empty()) throw ContractError(std::string("eval: no ") + what + " given");
  for (const auto& r : refs)
    if (!r.model) throw ContractError(std::string("eval: null model in ") + what);
}

// Crafts adversarial examples for the whole subset, keeping the original
// labels so any target model can be scored against them.
std::vector<Example> craft_subset(const AttackId& id, const Model& source,
                                  const Dataset& subset, const EvalConfig& cfg,
                                  const AttackConfig& acfg, long long& grads_out) {
  std::vector<AttackResult> results(subset.size());
  parallel_for(subset.size(), cfg.workers, [&](std::size_t i) {
    AttackConfig c = acfg;
    c.rng_seed = example_seed(cfg.seed, i);
    results[i] =
        run_attack(id, source, subset.examples[i].image, subset.examples[i].label, c);
  });
  std::vector<Example> advs(subset.size());
  grads_out = 0;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    advs[i].image = std::move(results[i].x_adv);
    advs[i].label = subset.examples[i].label;
    grads_out += results[i].grad_evals;
  }
  return advs;
}

}  // namespace

std::vector<Example> craft_adversarial(const AttackId& id, const Model& source,
                                       const Dataset& subset, const EvalConfig& cfg,
                                       long long* grads_total) {
  long long grads = 0;
  std::vector<Example> advs = craft_subset(id, source, subset, cfg, cfg.attack, grads);
  if (grads_total) *grads_total = grads;
  return advs;
}

namespace {

// One sweep point: craft once on the source, score every target.
void score_point(const AttackId& id, const ModelRef& source,
                 const std::vector<ModelRef>& targets, const Dataset& subset,
                 const EvalConfig& cfg, const AttackConfig& acfg,
                 std::vector<double>& rates_out, long long& grads_out) {
  const std::vector<Example> advs =
      craft_subset(id, *source.model, subset, cfg, acfg, grads_out);
  rates_out.clear();
  rates_out.reserve(targets.size());
  for (const auto& t : targets) rates_out.push_back(success_rate(*t.model, advs));
}

AttackConfig realize_budget(const AttackId& id, long long budget,
                            const AttackConfig& base) {
  if (budget < 1) throw ContractError("sweep_budget: budgets must be >= 1");
  AttackConfig cfg = base;
  if (id.base == BaseMethod::Fgsm) {
    if (id.pc) {
      cfg.predictions = static_cast<int>(budget - 1);
    } else if (budget != 1) {
      throw ContractError("sweep_budget: " + id.str() + " only realizes budget 1");
    }
  } else if (id.pc) {
    const long long per_iter = static_cast<long long>(base.predictions) + 1;
    if (budget % per_iter != 0)
      throw ContractError("sweep_budget: budget " + std::to_string(budget) +
                          " is not a multiple of K+1=" + std::to_string(per_iter) +
                          " for " + id.str());
    cfg.iterations = static_cast<int>(budget / per_iter);
  } else {
    cfg.iterations = static_cast<int>(budget);
  }
  return cfg;
}

std::string rate4(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", r);
  return buf;
}

double round4(double r) { return std::round(r * 1e4) / 1e4; }

}  // namespace

Dataset filter_correct(const Model& m, const Dataset& ds) {
  Dataset kept;
  kept.provenance = ds.provenance;
  kept.class_count = ds.class_count;
  for (const auto& e : ds.examples)
    if (predict(m, e.image) == e.label) kept.examples.push_back(e);
  if (kept.examples.empty())
    throw EmptySubsetError("no correctly classified examples to attack");
  return kept;
}

double success_rate(const Model& m, const std::vector<Example>& examples) {
  if (examples.empty()) throw EmptySubsetError("success_rate over an empty set");
  std::size_t fooled = 0;
  for (const auto& e : examples)
    if (predict(m, e.image) != e.label) ++fooled;
  return static_cast<double>(fooled) / static_cast<double>(examples.size());
}

SuccessMatrix build_matrix(const std::vector<AttackId>& attacks,
                           const std::vector<ModelRef>& sources,
                           const std::vector<ModelRef>& targets, const Dataset& ds,
                           const EvalConfig& cfg) {
  if (attacks.empty()) throw ContractError("eval: no attacks given");
  check_refs(sources, "sources");
  check_refs(targets, "targets");

  std::vector<Dataset> subsets;
  subsets.reserve(sources.size());
  for (const auto& s : sources) subsets.push_back(filter_correct(*s.model, ds));

  SuccessMatrix matrix;
  for (const auto& attack : attacks) {
    for (std::size_t si = 0; si < sources.size(); ++si) {
      long long grads = 0;
      const std::vector<Example> advs =
          craft_subset(attack, *sources[si].model, subsets[si], cfg, cfg.attack, grads);
      for (const auto& t : targets) {
        MatrixCell cell;
        cell.attack = attack.str();
        cell.source_model = sources[si].id;
        cell.target_model = t.id;
        cell.white_box = sources[si].id == t.id;
        cell.n = static_cast<int>(advs.size());
        cell.success_rate = success_rate(*t.model, advs);
        cell.grad_evals_total = grads;
        matrix.cells.push_back(std::move(cell));
      }
    }
  }
  return matrix;
}

namespace {

SweepResult sweep_shell(const std::string& mode, const std::vector<AttackId>& ids,
                        const ModelRef& source, const std::vector<ModelRef>& targets,
                        const Dataset& subset) {
  SweepResult r;
  r.mode = mode;
  r.source_model = source.id;
  r.n = static_cast<int>(subset.size());
  for (const auto& id : ids)
    for (const auto& t : targets) r.series.push_back({id.str(), t.id, {}, {}});
  return r;
}

}  // namespace

SweepResult sweep_predictions(const AttackId& id, const ModelRef& source,
                              const std::vector<ModelRef>& targets, const Dataset& ds,
                              const std::vector<int>& k_values, const EvalConfig& cfg) {
  if (!id.pc)
    throw ContractError("sweep_predictions: " + id.str() +
                        " has no prediction horizon to sweep");
  if (k_values.empty()) throw ContractError("sweep_predictions: empty axis");
  check_refs({source}, "sources");
  check_refs(targets, "targets");

  const Dataset subset = filter_correct(*source.model, ds);
  SweepResult result = sweep_shell("predictions", {id}, source, targets, subset);
  for (int k : k_values) {
    if (k < 0) throw ContractError("sweep_predictions: negative horizon");
    AttackConfig acfg = cfg.attack;
    acfg.predictions = k;
    std::vector<double> rates;
    long long grads = 0;
    score_point(id, source, targets, subset, cfg, acfg, rates, grads);
    result.axis.push_back(k);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      result.series[t].rates.push_back(rates[t]);
      result.series[t].grad_evals.push_back(grads);
    }
  }
  return result;
}

SweepResult sweep_iterations(const AttackId& id, const ModelRef& source,
                             const std::vector<ModelRef>& targets, const Dataset& ds,
                             const std::vector<int>& t_values, const EvalConfig& cfg) {
  if (id.base == BaseMethod::Fgsm)
    throw ContractError("sweep_iterations: " + id.str() + " is single-step");
  if (t_values.empty()) throw ContractError("sweep_iterations: empty axis");
  check_refs({source}, "sources");
  check_refs(targets, "targets");

  const Dataset subset = filter_correct(*source.model, ds);
  SweepResult result = sweep_shell("iterations", {id}, source, targets, subset);
  for (int iter : t_values) {
    if (iter < 1) throw ContractError("sweep_iterations: iterations must be >= 1");
    AttackConfig acfg = cfg.attack;
    acfg.iterations = iter;
    std::vector<double> rates;
    long long grads = 0;
    score_point(id, source, targets, subset, cfg, acfg, rates, grads);
    result.axis.push_back(iter);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      result.series[t].rates.push_back(rates[t]);
      result.series[t].grad_evals.push_back(grads);
    }
  }
  return result;
}

SweepResult sweep_budget(const std::vector<AttackId>& ids, const ModelRef& source,
                         const std::vector<ModelRef>& targets, const Dataset& ds,
                         const std::vector<long long>& budgets, const EvalConfig& cfg) {
  if (ids.empty()) throw ContractError("sweep_budget: no attacks given");
  if (budgets.empty()) throw ContractError("sweep_budget: empty axis");
  check_refs({source}, "sources");
  check_refs(targets, "targets");

  // Fail on any unrealizable (attack, budget) pair before crafting anything.
  std::vector<std::vector<AttackConfig>> realized(ids.size());
  for (std::size_t a = 0; a < ids.size(); ++a)
    for (long long b : budgets) realized[a].push_back(realize_budget(ids[a], b, cfg.attack));

  const Dataset subset = filter_correct(*source.model, ds);
  SweepResult result = sweep_shell("budget", ids, source, targets, subset);
  for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
    result.axis.push_back(budgets[bi]);
    for (std::size_t a = 0; a < ids.size(); ++a) {
      std::vector<double> rates;
      long long grads = 0;
      score_point(ids[a], source, targets, subset, cfg, realized[a][bi], rates, grads);
      for (std::size_t t = 0; t < targets.size(); ++t) {
        auto& series = result.series[a * targets.size() + t];
        series.rates.push_back(rates[t]);
        series.grad_evals.push_back(grads);
      }
    }
  }
  return result;
}

void write_report(const SuccessMatrix& m, ReportFormat format, std::ostream& out) {
  if (format == ReportFormat::Csv) {
    out << "attack,source_model,target_model,white_box,n,success_rate,grad_evals_total\n";
    for (const auto& c : m.cells)
      out << c.attack << ',' << c.source_model << ',' << c.target_model << ','
          << (c.white_box ? "true" : "false") << ',' << c.n << ','
          << rate4(c.success_rate) << ',' << c.grad_evals_total << '\n';
    return;
  }
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& c : m.cells) {
    nlohmann::ordered_json row;
    row["attack"] = c.attack;
    row["source_model"] = c.source_model;
    row["target_model"] = c.target_model;
    row["white_box"] = c.white_box;
    row["n"] = c.n;
    row["success_rate"] = round4(c.success_rate);
    row["grad_evals_total"] = c.grad_evals_total;
    rows.push_back(std::move(row));
  }
  out << rows.dump(2) << '\n';
}

void write_report(const SweepResult& s, ReportFormat format, std::ostream& out) {
  if (format == ReportFormat::Csv) {
    out << "mode,x,attack,source_model,target_model,n,success_rate,grad_evals_total\n";
    for (std::size_t xi = 0; xi < s.axis.size(); ++xi)
      for (const auto& series : s.series)
        out << s.mode << ',' << s.axis[xi] << ',' << series.attack << ','
            << s.source_model << ',' << series.target_model << ',' << s.n << ','
            << rate4(series.rates[xi]) << ',' << series.grad_evals[xi] << '\n';
    return;
  }
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t xi = 0; xi < s.axis.size(); ++xi) {
    for (const auto& series : s.series) {
      nlohmann::ordered_json row;
      row["mode"] = s.mode;
      row["x"] = s.axis[xi];
      row["attack"] = series.attack;
      row["source_model"] = s.source_model;
      row["target_model"] = series.target_model;
      row["n"] = s.n;
      row["success_rate"] = round4(series.rates[xi]);
      row["grad_evals_total"] = series.grad_evals[xi];
      rows.push_back(std::move(row));
    }
  }
  out << rows.dump(2) << '\n';
}

namespace {

template <typename T>
void emit_to_path(const T& report, ReportFormat format, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  write_report(report, format, f);
  f.flush();
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace

void emit_report(const SuccessMatrix& m, ReportFormat format, const std::string& path) {
  emit_to_path(m, format, path);
}

void emit_report(const SweepResult& s, ReportFormat format, const std::string& path) {
  emit_to_path(s, format, path);
}

}  // namespace advpc
