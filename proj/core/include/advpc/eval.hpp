#ifndef ADVPC_EVAL_HPP
#define ADVPC_EVAL_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "advpc/attack.hpp"
#include "advpc/dataset.hpp"
#include "advpc/model.hpp"

namespace advpc {

// A model with the name it is reported under (e.g. "cnn-small#1").
struct ModelRef {
  std::string id;
  const Model* model = nullptr;
};

struct EvalConfig {
  AttackConfig attack;     // shared attack parameters; rng_seed is overridden
  std::uint64_t seed = 0;  // master seed; each example gets a derived stream
  int workers = 1;         // crafting threads; <= 0 selects hardware concurrency
};

struct MatrixCell {
  std::string attack;
  std::string source_model;
  std::string target_model;
  bool white_box = false;  // set iff source == target
  int n = 0;               // size of the source's correctly-classified subset
  double success_rate = 0.0;
  long long grad_evals_total = 0;  // crafting cost, summed over the subset
};

struct SuccessMatrix {
  std::vector<MatrixCell> cells;  // attack-major, then source, then target
};

// One success-rate series along the sweep axis.
struct SweepSeries {
  std::string attack;
  std::string target_model;
  std::vector<double> rates;            // parallel to SweepResult::axis
  std::vector<long long> grad_evals;    // crafting total per axis point
};

struct SweepResult {
  std::string mode;  // "predictions", "iterations", or "budget"
  std::string source_model;
  int n = 0;
  std::vector<long long> axis;
  std::vector<SweepSeries> series;
};

// Keeps exactly the examples the model classifies correctly. Throws
// EmptySubsetError when nothing survives.
Dataset filter_correct(const Model& m, const Dataset& ds);

// Fraction of examples whose prediction differs from the stored label.
double success_rate(const Model& m, const std::vector<Example>& examples);

// Attacks every example of `subset` on the source model, returning the
// perturbed images with their original labels. Each example's attack runs
// with an rng seed derived from (cfg.seed, index), so results are identical
// for any worker count. When given, *grads_total receives the summed
// gradient-calculation count.
std::vector<Example> craft_adversarial(const AttackId& id, const Model& source,
                                       const Dataset& subset, const EvalConfig& cfg,
                                       long long* grads_total = nullptr);

// For every (attack, source): craft adversarial examples over the source's
// correctly-classified subset, then score them against every target. Each
// example's attack runs with an rng seed derived from (cfg.seed, index), so
// results are identical for any worker count.
SuccessMatrix build_matrix(const std::vector<AttackId>& attacks,
                           const std::vector<ModelRef>& sources,
                           const std::vector<ModelRef>& targets, const Dataset& ds,
                           const EvalConfig& cfg);

// Success rates of `id` (which must use the predictor-corrector gradient)
// crafted on `source` for each prediction horizon in k_values.
SweepResult sweep_predictions(const AttackId& id, const ModelRef& source,
                              const std::vector<ModelRef>& targets, const Dataset& ds,
                              const std::vector<int>& k_values, const EvalConfig& cfg);

// Success rates for each iteration count in t_values; the base method must
// be iterative.
SweepResult sweep_iterations(const AttackId& id, const ModelRef& source,
                             const std::vector<ModelRef>& targets, const Dataset& ds,
                             const std::vector<int>& t_values, const EvalConfig& cfg);

// Equal-cost comparison: each attack is configured so its per-example
// gradient-calculation count equals the budget point exactly. Realization
// rules: a plain iterative method runs budget iterations; a
// predictor-corrector iterative method runs budget/(K+1) iterations and
// requires the budget to be a multiple of K+1; the single-step
// predictor-corrector spends the whole budget as K = budget - 1; plain
// single-step only realizes budget 1. Unrealizable budgets throw.
SweepResult sweep_budget(const std::vector<AttackId>& ids, const ModelRef& source,
                         const std::vector<ModelRef>& targets, const Dataset& ds,
                         const std::vector<long long>& budgets, const EvalConfig& cfg);

enum class ReportFormat { Csv, Json };

// Byte-deterministic report emission. CSV matrix schema:
//   attack,source_model,target_model,white_box,n,success_rate,grad_evals_total
// CSV sweep schema:
//   mode,x,attack,source_model,target_model,n,success_rate,grad_evals_total
// Rates carry exactly four decimal places; JSON holds one object per row
// with the same field names and values rounded identically.
void write_report(const SuccessMatrix& m, ReportFormat format, std::ostream& out);
void write_report(const SweepResult& s, ReportFormat format, std::ostream& out);

// File variants; I/O failures throw IoError naming the path.
void emit_report(const SuccessMatrix& m, ReportFormat format, const std::string& path);
void emit_report(const SweepResult& s, ReportFormat format, const std::string& path);

}  // namespace advpc

#endif  // ADVPC_EVAL_HPP
