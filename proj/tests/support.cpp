#include "support.hpp"

namespace advpc::testing {

const Dataset& unit_corpus() {
  static const Dataset ds = make_synthetic_dataset(240, 9);
  return ds;
}

const Checkpoint& unit_checkpoint() {
  static const Checkpoint cp = [] {
    ModelSpec spec;
    spec.architecture = Architecture::CnnSmall;
    spec.init_seed = 1;
    TrainConfig cfg;
    // 240 examples need a dozen passes before the conv stack separates all
    // ten glyphs; fewer epochs leave the fixture half-trained.
    cfg.epochs = 12;
    return train(spec, unit_corpus(), cfg);
  }();
  return cp;
}

const Classifier& unit_model() {
  static const Classifier m = make_classifier(unit_checkpoint());
  return m;
}

const Classifier& unit_mlp() {
  static const Classifier m = [] {
    ModelSpec spec;
    spec.architecture = Architecture::Mlp2;
    spec.init_seed = 1;
    TrainConfig cfg;
    cfg.epochs = 4;
    return make_classifier(train(spec, unit_corpus(), cfg));
  }();
  return m;
}

}  // namespace advpc::testing
