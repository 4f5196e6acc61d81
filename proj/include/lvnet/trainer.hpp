#pragma once

#include <functional>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lvnet/data.hpp"
#include "lvnet/network.hpp"
#include "lvnet/optim.hpp"

namespace lvnet {

enum class Strategy { single, cross_network, cross_task };

struct TrainPlan {
  Strategy strategy = Strategy::single;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  /// Mini-batches one network takes before handing over to the other.
  std::size_t alternation_steps = 1;
  /// Alternate whole epochs instead of mini-batches.
  bool alternate_per_epoch = false;
  AugmentSpec augment;
  bool freeze_tables = false;
  /// When false only the last epoch is scored on the test set.
  bool evaluate_each_epoch = true;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  /// NaN when the epoch was not scored.
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double seconds = 0.0;
};

using Metrics = std::vector<EpochMetrics>;

struct StepEvent {
  std::size_t network = 0;  // 0 = f, 1 = g
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainHooks {
  std::function<void(const StepEvent&)> before_step;
  std::function<void(const StepEvent&)> after_step;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Index of the largest logit in each row; ties resolve to the lowest index.
std::vector<int> predict_classes(const Network& net, const ImageBatch& images);

/// Single-view (unaugmented) loss and argmax accuracy.
EvalResult evaluate_full(const Network& net, const LabeledImageSet& set, std::size_t batch_size = 256);
double evaluate(const Network& net, const LabeledImageSet& set);

/// One joint update of the weights and (unless frozen) the tables on a batch.
/// Returns the batch loss and writes the number of correct predictions.
double train_step(Network& net, SgdMomentum& optim, const ImageBatch& images, std::span<const int> labels,
                  bool update_tables, std::size_t* correct = nullptr);

Metrics train_single(Network& net, SgdMomentum& optim, const LabeledImageSet& train, const LabeledImageSet* test,
                     const TrainPlan& plan, std::mt19937_64& rng, const TrainHooks& hooks = {});

/// Two networks sharing one table object, trained alternately on one task.
std::pair<Metrics, Metrics> train_cross_network(Network& f, Network& g, const LabeledImageSet& train,
                                                const LabeledImageSet* test, const TrainPlan& plan,
                                                SgdMomentum& optim_f, SgdMomentum& optim_g, std::mt19937_64& rng,
                                                const TrainHooks& hooks = {});

/// As above, with f drawing batches from task p and g from task q.
std::pair<Metrics, Metrics> train_cross_task(Network& f, Network& g, const LabeledImageSet& train_p,
                                             const LabeledImageSet& train_q, const LabeledImageSet* test_p,
                                             const LabeledImageSet* test_q, const TrainPlan& plan,
                                             SgdMomentum& optim_f, SgdMomentum& optim_g, std::mt19937_64& rng,
                                             const TrainHooks& hooks = {});

/// CSV with header epoch,split,loss,accuracy,seconds. With `with_time` false
/// the seconds column is written as 0 so logs are reproducible byte for byte.
void write_metrics_csv(std::ostream& out, const Metrics& metrics, bool with_time = true);

}  // namespace lvnet
