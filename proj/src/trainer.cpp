#include "lvnet/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "lvnet/ops.hpp"

namespace lvnet {
namespace {

using Clock = std::chrono::steady_clock;

int argmax_row(const double* row, std::size_t k) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (row[j] > row[best]) best = j;
  return static_cast<int>(best);
}

ImageBatch augmented(const Batch& batch, const AugmentSpec& spec, std::mt19937_64& rng) {
  if (!spec.enabled) return batch.images;
  const std::size_t side_h = spec.crop ? spec.crop : batch.images.height;
  const std::size_t side_w = spec.crop ? spec.crop : batch.images.width;
  ImageBatch out{batch.images.count, side_h, side_w, {}};
  out.pixels.reserve(out.count * out.image_bytes());
  for (std::size_t i = 0; i < batch.images.count; ++i) {
    auto img = augment(batch.images.image(i), batch.images.height, batch.images.width, spec, rng);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
  }
  return out;
}

/// Running loss/accuracy for one network within an epoch.
struct EpochTally {
  double loss_sum = 0.0;
  std::size_t seen = 0;
  std::size_t correct = 0;
  Clock::time_point start = Clock::now();
};

struct Runner {
  Network* net;
  SgdMomentum* optim;
  BatchIterator batches;
  const LabeledImageSet* test;
  std::size_t index;
  EpochTally tally;
  std::size_t step = 0;
  bool exhausted = false;
};

bool run_one_batch(Runner& r, const TrainPlan& plan, std::size_t epoch, std::mt19937_64& rng,
                   const TrainHooks& hooks) {
  Batch batch;
  if (!r.batches.next(batch)) {
    r.exhausted = true;
    return false;
  }
  StepEvent ev{r.index, epoch, r.step, 0.0};
  if (hooks.before_step) hooks.before_step(ev);
  const ImageBatch images = augmented(batch, plan.augment, rng);
  std::size_t correct = 0;
  const double loss = train_step(*r.net, *r.optim, images, batch.labels, !plan.freeze_tables, &correct);
  r.tally.loss_sum += loss * static_cast<double>(batch.labels.size());
  r.tally.seen += batch.labels.size();
  r.tally.correct += correct;
  ev.loss = loss;
  if (hooks.after_step) hooks.after_step(ev);
  ++r.step;
  return true;
}

EpochMetrics close_epoch(Runner& r, std::size_t epoch, const TrainPlan& plan) {
  EpochMetrics m;
  m.epoch = epoch;
  m.train_loss = r.tally.seen ? r.tally.loss_sum / static_cast<double>(r.tally.seen) : 0.0;
  m.train_accuracy = r.tally.seen ? static_cast<double>(r.tally.correct) / static_cast<double>(r.tally.seen) : 0.0;
  const bool score = r.test && (plan.evaluate_each_epoch || epoch + 1 == plan.epochs);
  if (score) {
    const EvalResult e = evaluate_full(*r.net, *r.test);
    m.test_loss = e.loss;
    m.test_accuracy = e.accuracy;
  } else {
    m.test_loss = m.test_accuracy = std::numeric_limits<double>::quiet_NaN();
  }
  m.seconds = std::chrono::duration<double>(Clock::now() - r.tally.start).count();
  return m;
}

void begin_epoch(Runner& r, std::size_t epoch) {
  r.optim->set_epoch(epoch);
  r.batches.start_epoch();
  r.tally = EpochTally{};
  r.exhausted = false;
}

void check_shared_tables(const Network& f, const Network& g) {
  check_input_stage(f);
  check_input_stage(g);
  if (!f.tables || f.tables != g.tables)
    throw std::invalid_argument("cross strategies require both networks to share one lookup table object");
}

std::pair<Metrics, Metrics> alternate(Runner& rf, Runner& rg, const TrainPlan& plan, std::mt19937_64& rng,
                                      const TrainHooks& hooks) {
  if (plan.alternation_steps == 0) throw std::invalid_argument("alternation_steps must be at least 1");
  std::pair<Metrics, Metrics> out;
  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    begin_epoch(rf, epoch);
    begin_epoch(rg, epoch);
    if (plan.alternate_per_epoch) {
      while (run_one_batch(rf, plan, epoch, rng, hooks)) {
      }
      while (run_one_batch(rg, plan, epoch, rng, hooks)) {
      }
    } else {
      while (!rf.exhausted || !rg.exhausted) {
        for (std::size_t s = 0; s < plan.alternation_steps && !rf.exhausted; ++s) run_one_batch(rf, plan, epoch, rng, hooks);
        for (std::size_t s = 0; s < plan.alternation_steps && !rg.exhausted; ++s) run_one_batch(rg, plan, epoch, rng, hooks);
      }
    }
    out.first.push_back(close_epoch(rf, epoch, plan));
    out.second.push_back(close_epoch(rg, epoch, plan));
  }
  return out;
}

}  // namespace

std::vector<int> predict_classes(const Network& net, const ImageBatch& images) {
  const Tensor logits = predict_logits(net, images);
  const std::size_t k = logits.dim(1);
  std::vector<int> out(logits.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax_row(logits.ptr() + i * k, k);
  return out;
}

EvalResult evaluate_full(const Network& net, const LabeledImageSet& set, std::size_t batch_size) {
  if (set.size() == 0) return {};
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + batch_size); ++i) idx.push_back(i);
    Tape tape;
    const ImageBatch images = set.gather(idx);
    Var logits = forward(tape, net, images, false);
    std::vector<int> labels;
    for (std::size_t i : idx) labels.push_back(set.labels[i]);
    loss += tape.value(softmax_cross_entropy(tape, logits, labels))[0] * static_cast<double>(idx.size());
    const Tensor& z = tape.value(logits);
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (argmax_row(z.ptr() + i * z.dim(1), z.dim(1)) == labels[i]) ++correct;
  }
  const double n = static_cast<double>(set.size());
  return {loss / n, static_cast<double>(correct) / n};
}

double evaluate(const Network& net, const LabeledImageSet& set) { return evaluate_full(net, set).accuracy; }

double train_step(Network& net, SgdMomentum& optim, const ImageBatch& images, std::span<const int> labels,
                  bool update_tables, std::size_t* correct) {
  const bool tables_learn = net.tables && update_tables;
  Tape tape;
  Var logits = forward(tape, net, images, tables_learn);
  Var loss = softmax_cross_entropy(tape, logits, labels);
  const double value = tape.value(loss)[0];
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "non-finite training loss " << value << " on a batch of " << labels.size() << " images";
    throw TrainingDiverged(msg.str());
  }
  if (correct) {
    const Tensor& z = tape.value(logits);
    *correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (argmax_row(z.ptr() + i * z.dim(1), z.dim(1)) == labels[i]) ++*correct;
  }
  const GradientMap grads = tape.backward(loss);
  optim.step(net.model->parameters(), grads);
  if (tables_learn) optim.step(*net.tables, grads);
  return value;
}

Metrics train_single(Network& net, SgdMomentum& optim, const LabeledImageSet& train, const LabeledImageSet* test,
                     const TrainPlan& plan, std::mt19937_64& rng, const TrainHooks& hooks) {
  check_input_stage(net);
  Runner r{&net, &optim, BatchIterator(train, plan.batch_size, plan.seed), test, 0, {}, 0, false};
  Metrics out;
  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    begin_epoch(r, epoch);
    while (run_one_batch(r, plan, epoch, rng, hooks)) {
    }
    out.push_back(close_epoch(r, epoch, plan));
  }
  return out;
}

std::pair<Metrics, Metrics> train_cross_network(Network& f, Network& g, const LabeledImageSet& train,
                                                const LabeledImageSet* test, const TrainPlan& plan,
                                                SgdMomentum& optim_f, SgdMomentum& optim_g, std::mt19937_64& rng,
                                                const TrainHooks& hooks) {
  return train_cross_task(f, g, train, train, test, test, plan, optim_f, optim_g, rng, hooks);
}

std::pair<Metrics, Metrics> train_cross_task(Network& f, Network& g, const LabeledImageSet& train_p,
                                             const LabeledImageSet& train_q, const LabeledImageSet* test_p,
                                             const LabeledImageSet* test_q, const TrainPlan& plan,
                                             SgdMomentum& optim_f, SgdMomentum& optim_g, std::mt19937_64& rng,
                                             const TrainHooks& hooks) {
  check_shared_tables(f, g);
  Runner rf{&f, &optim_f, BatchIterator(train_p, plan.batch_size, plan.seed), test_p, 0, {}, 0, false};
  Runner rg{&g, &optim_g, BatchIterator(train_q, plan.batch_size, plan.seed + 1), test_q, 1, {}, 0, false};
  return alternate(rf, rg, plan, rng, hooks);
}

void write_metrics_csv(std::ostream& out, const Metrics& metrics, bool with_time) {
  out << "epoch,split,loss,accuracy,seconds\n";
  char buf[160];
  for (const EpochMetrics& m : metrics) {
    const double secs = with_time ? m.seconds : 0.0;
    std::snprintf(buf, sizeof buf, "%zu,train,%.9g,%.6f,%.3f\n", m.epoch, m.train_loss, m.train_accuracy, secs);
    out << buf;
    if (!std::isnan(m.test_accuracy)) {
      std::snprintf(buf, sizeof buf, "%zu,test,%.9g,%.6f,%.3f\n", m.epoch, m.test_loss, m.test_accuracy, secs);
      out << buf;
    }
  }
}

}  // namespace lvnet
