#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "doctest.h"
#include "lvnet/checkpoint.hpp"
#include "lvnet/trainer.hpp"

using namespace lvnet;

namespace {

ModelConfig tiny_config(std::size_t channels, std::size_t classes, std::uint64_t seed) {
  ModelConfig c;
  c.input_channels = channels;
  c.height = c.width = 8;
  c.blocks = {{3, 8, 1, true}};
  c.head_width = 16;
  c.classes = classes;
  c.seed = seed;
  return c;
}

TrainPlan plan_for(std::size_t epochs, std::size_t batch = 16) {
  TrainPlan p;
  p.epochs = epochs;
  p.batch_size = batch;
  p.seed = 5;
  p.evaluate_each_epoch = false;
  return p;
}

SgdConfig sgd(double lr) {
  SgdConfig c;
  c.learning_rate = lr;
  return c;
}

}  // namespace

TEST_CASE("sgd step examples") {
  SUBCASE("no momentum, no decay is plain gradient descent") {
    Tensor p({3}, {1.0, -2.0, 0.5}), v({3}), g({3}, {0.1, 0.2, -0.3});
    sgd_step(p, v, g, 0.5, 0.0, 0.0);
    CHECK(p.values() == std::vector<double>{1.0 - 0.05, -2.0 - 0.1, 0.5 + 0.15});
  }
  SUBCASE("zero gradient and decay is a fixed point") {
    Tensor p({2}, {3.0, 4.0}), v({2}), g({2});
    for (int i = 0; i < 5; ++i) sgd_step(p, v, g, 0.1, 0.9, 0.0);
    CHECK(p.values() == std::vector<double>{3.0, 4.0});
  }
  SUBCASE("two momentum steps on a constant gradient move by lr*g*2.9") {
    Tensor p({1}, {1.0}), v({1}), g({1}, {0.4});
    sgd_step(p, v, g, 0.1, 0.9, 0.0);
    sgd_step(p, v, g, 0.1, 0.9, 0.0);
    CHECK(1.0 - p[0] == doctest::Approx(0.1 * 0.4 * 2.9).epsilon(1e-14));
  }
  SUBCASE("weight decay enters the velocity") {
    Tensor p({1}, {2.0}), v({1}), g({1}, {0.0});
    sgd_step(p, v, g, 0.1, 0.0, 0.5);
    CHECK(p[0] == doctest::Approx(2.0 - 0.1 * 1.0));
  }
  SUBCASE("tables skip decay unless asked") {
    SgdConfig c = sgd(0.1);
    c.momentum = 0.0;
    c.weight_decay = 0.5;
    SgdMomentum opt(c);
    Tensor w({1}, {2.0}), t({1}, {2.0});
    opt.step("w", w, Tensor({1}), false);
    opt.step("t", t, Tensor({1}), true);
    CHECK(w[0] < 2.0);
    CHECK(t[0] == 2.0);
    c.decay_tables = true;
    SgdMomentum decaying(c);
    decaying.step("t", t, Tensor({1}), true);
    CHECK(t[0] < 2.0);
  }
  SUBCASE("milestone schedule") {
    SgdConfig c = sgd(0.08);
    c.milestones = {2, 4};
    c.lr_divisor = 2.0;
    const SgdMomentum opt(c);
    CHECK(opt.learning_rate(0) == 0.08);
    CHECK(opt.learning_rate(1) == 0.08);
    CHECK(opt.learning_rate(2) == 0.04);
    CHECK(opt.learning_rate(4) == 0.02);
    CHECK(opt.learning_rate(9) == 0.02);
  }
}

TEST_CASE("single-network training") {
  const auto train = make_synthetic(SyntheticKind::separable, 32, 2, 8, 8, 1);

  SUBCASE("zero learning rate leaves every parameter unchanged") {
    Model m(tiny_config(3, 2, 1));
    LookupTables t = LookupTables::full(1, 2);
    const Model m0 = m;
    const LookupTables t0 = t;
    Network net{&m, &t, {}};
    SgdMomentum opt(sgd(0.0));
    std::mt19937_64 rng(0);
    train_single(net, opt, train, nullptr, plan_for(1), rng);
    CHECK(m.parameters() == m0.parameters());
    CHECK(t == t0);
  }
  SUBCASE("a small separable task is learned within 50 epochs") {
    Model m(tiny_config(3, 2, 1));
    LookupTables t = LookupTables::full(1, 2);
    Network net{&m, &t, {}};
    SgdMomentum opt(sgd(0.05));
    std::mt19937_64 rng(0);
    const Metrics metrics = train_single(net, opt, train, nullptr, plan_for(50), rng);
    CHECK(m.parameter_count() > 2000);
    CHECK(m.parameter_count() < 6000);
    CHECK(metrics.back().train_accuracy >= 0.95);
    CHECK(evaluate(net, train) >= 0.95);
  }
  SUBCASE("frozen tables stay bit-identical") {
    Model m(tiny_config(3, 2, 1));
    LookupTables t = LookupTables::full(1, 2);
    const LookupTables t0 = t;
    const Model m0 = m;
    Network net{&m, &t, {}};
    SgdMomentum opt(sgd(0.05));
    TrainPlan plan = plan_for(3);
    plan.freeze_tables = true;
    std::mt19937_64 rng(0);
    train_single(net, opt, train, nullptr, plan, rng);
    CHECK(t == t0);
    CHECK_FALSE(m.parameters() == m0.parameters());
  }
  SUBCASE("input stage mismatch is rejected") {
    Model m(tiny_config(6, 2, 1));
    LookupTables t = LookupTables::full(1, 2);
    Network net{&m, &t, {}};
    SgdMomentum opt;
    std::mt19937_64 rng(0);
    CHECK_THROWS(train_single(net, opt, train, nullptr, plan_for(1), rng));
  }
}

TEST_CASE("one step changes exactly the table rows whose colors occur") {
  const auto set = make_synthetic(SyntheticKind::striped, 2, 2, 8, 8, 3);
  for (bool compressed : {false, true}) {
    Model m(tiny_config(3, 2, 4));
    LookupTables t = compressed ? LookupTables::compressed(4, 5) : LookupTables::full(1, 5);
    const LookupTables t0 = t;
    Network net{&m, &t, {}};
    SgdMomentum opt(sgd(0.1));
    const ImageBatch images = set.all_images();
    train_step(net, opt, images, set.labels, true);
    const std::size_t plane = 64;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      std::set<std::size_t> present;
      for (std::size_t n = 0; n < images.count; ++n)
        for (std::size_t p = 0; p < plane; ++p) present.insert(t.row_of(images.pixels[(n * 3 + ch) * plane + p]));
      for (std::size_t row = 0; row < t.rows(); ++row) {
        CAPTURE(compressed);
        CAPTURE(row);
        CHECK((t.table(ch)[row] != t0.table(ch)[row]) == (present.count(row) == 1));
      }
    }
  }
}

TEST_CASE("cross-network training") {
  const auto train = make_synthetic(SyntheticKind::separable, 16, 2, 8, 8, 6);
  auto run_cross = [&](double lr_f, double lr_g, Model& f, Model& g, LookupTables& t, std::size_t epochs) {
    Network nf{&f, &t, {}}, ng{&g, &t, {}};
    SgdMomentum of(sgd(lr_f)), og(sgd(lr_g));
    std::mt19937_64 rng(0);
    return train_cross_network(nf, ng, train, nullptr, plan_for(epochs), of, og, rng);
  };

  SUBCASE("both rates zero leave everything unchanged") {
    Model f(tiny_config(3, 2, 1)), g(tiny_config(3, 2, 2));
    LookupTables t = LookupTables::full(1, 3);
    const Model f0 = f, g0 = g;
    const LookupTables t0 = t;
    run_cross(0.0, 0.0, f, g, t, 1);
    CHECK(f.parameters() == f0.parameters());
    CHECK(g.parameters() == g0.parameters());
    CHECK(t == t0);
  }
  SUBCASE("zero rate for g collapses to single-network training of f") {
    Model f(tiny_config(3, 2, 1)), g(tiny_config(3, 2, 2));
    LookupTables t = LookupTables::full(1, 3);
    const Model g0 = g;
    run_cross(0.05, 0.0, f, g, t, 2);
    CHECK(g.parameters() == g0.parameters());

    Model solo(tiny_config(3, 2, 1));
    LookupTables solo_t = LookupTables::full(1, 3);
    Network net{&solo, &solo_t, {}};
    SgdMomentum opt(sgd(0.05));
    std::mt19937_64 rng(0);
    train_single(net, opt, train, nullptr, plan_for(2), rng);
    CHECK(solo.parameters() == f.parameters());
    CHECK(solo_t == t);
  }
  SUBCASE("shared tables differ from single-network tables") {
    Model f(tiny_config(3, 2, 1)), g(tiny_config(3, 2, 2));
    LookupTables t = LookupTables::full(1, 3);
    run_cross(0.05, 0.05, f, g, t, 2);
    Model solo(tiny_config(3, 2, 1));
    LookupTables solo_t = LookupTables::full(1, 3);
    Network net{&solo, &solo_t, {}};
    SgdMomentum opt(sgd(0.05));
    std::mt19937_64 rng(0);
    train_single(net, opt, train, nullptr, plan_for(2), rng);
    CHECK_FALSE(solo_t == t);
  }
  SUBCASE("each step touches only its own network's weights") {
    Model f(tiny_config(3, 2, 1)), g(tiny_config(3, 2, 2));
    LookupTables t = LookupTables::full(1, 3);
    Network nf{&f, &t, {}}, ng{&g, &t, {}};
    SgdMomentum of(sgd(0.05)), og(sgd(0.05));
    std::mt19937_64 rng(0);
    ParameterStore f_before, g_before;
    std::size_t steps[2] = {0, 0}, violations = 0, owned_changes = 0;
    TrainHooks hooks;
    hooks.before_step = [&](const StepEvent&) {
      f_before = f.parameters();
      g_before = g.parameters();
    };
    hooks.after_step = [&](const StepEvent& e) {
      ++steps[e.network];
      const bool f_same = f.parameters() == f_before, g_same = g.parameters() == g_before;
      if (e.network == 0 ? !g_same : !f_same) ++violations;
      if (e.network == 0 ? !f_same : !g_same) ++owned_changes;
    };
    TrainPlan plan = plan_for(2);
    plan.alternation_steps = 1;
    train_cross_network(nf, ng, train, nullptr, plan, of, og, rng, hooks);
    CHECK(steps[0] == 4);
    CHECK(steps[1] == 4);
    CHECK(violations == 0);
    CHECK(owned_changes == 8);
  }
  SUBCASE("networks must share one table object") {
    Model f(tiny_config(3, 2, 1)), g(tiny_config(3, 2, 2));
    LookupTables a = LookupTables::full(1, 3), b = a;
    Network nf{&f, &a, {}}, ng{&g, &b, {}};
    SgdMomentum of, og;
    std::mt19937_64 rng(0);
    CHECK_THROWS_AS(train_cross_network(nf, ng, train, nullptr, plan_for(1), of, og, rng), std::invalid_argument);
  }
  SUBCASE("per-epoch alternation runs every batch of both networks") {
    Model f(tiny_config(3, 2, 1)), g(tiny_config(3, 2, 2));
    LookupTables t = LookupTables::full(1, 3);
    Network nf{&f, &t, {}}, ng{&g, &t, {}};
    SgdMomentum of(sgd(0.05)), og(sgd(0.05));
    std::vector<std::size_t> order;
    TrainHooks hooks;
    hooks.after_step = [&](const StepEvent& e) { order.push_back(e.network); };
    TrainPlan plan = plan_for(1);
    plan.alternate_per_epoch = true;
    std::mt19937_64 rng(0);
    train_cross_network(nf, ng, train, nullptr, plan, of, og, rng, hooks);
    CHECK(order == std::vector<std::size_t>{0, 0, 1, 1});
  }
}

TEST_CASE("cross-task training with different class counts") {
  const auto p = make_synthetic(SyntheticKind::separable, 32, 2, 8, 8, 11);
  const auto q = make_synthetic(SyntheticKind::separable, 22, 3, 8, 8, 12);
  Model f(tiny_config(3, 2, 1)), g(tiny_config(3, 3, 2));
  LookupTables t = LookupTables::full(1, 3);
  Network nf{&f, &t, {}}, ng{&g, &t, {}};
  SgdMomentum of(sgd(0.05)), og(sgd(0.05));
  std::mt19937_64 rng(0);
  const auto [mf, mg] = train_cross_task(nf, ng, p, q, nullptr, nullptr, plan_for(40), of, og, rng);
  CHECK(f.parameters().at("fc1.weight").dim(1) == 2);
  CHECK(g.parameters().at("fc1.weight").dim(1) == 3);
  CHECK(evaluate(nf, p) >= 0.9);
  CHECK(evaluate(ng, q) >= 0.9);
  CHECK(mf.back().train_accuracy >= 0.9);
  CHECK(mg.back().train_accuracy >= 0.9);
}

TEST_CASE("evaluation") {
  SUBCASE("a constant predictor scores 0.1 on a balanced 10-class set") {
    const auto set = make_synthetic(SyntheticKind::striped, 10, 10, 8, 8, 2);
    Model m(tiny_config(3, 10, 1));
    for (auto& [name, t] : m.parameters()) t.fill(0.0);
    m.parameters().at("fc1.bias")[3] = 1.0;
    LookupTables t = LookupTables::full(1, 1);
    CHECK(evaluate(Network{&m, &t, {}}, set) == 0.1);
  }
  SUBCASE("a hand-built memorizer scores 1.0") {
    const auto set = make_synthetic(SyntheticKind::separable, 20, 2, 8, 8, 4);
    ModelConfig c = tiny_config(3, 2, 1);
    c.blocks = {{1, 1, 1, true}};
    c.head_width = 0;
    Model m(c);
    for (auto& [name, t] : m.parameters()) t.fill(0.0);
    m.parameters().at("conv0.weight").fill(1.0);
    m.parameters().at("fc1.weight").fill(0.0);
    for (std::size_t f = 0; f < 16; ++f) m.parameters().at("fc1.weight")[f * 2 + 1] = 1.0;
    m.parameters().at("fc1.bias")[0] = 1e-3;
    std::array<Tensor, 3> tabs;
    for (auto& tab : tabs) {
      tab = Tensor({256, 1});
      for (std::size_t v = 0; v < 256; ++v) tab[v] = double(v) / 255.0 - 0.5;
    }
    LookupTables t = LookupTables::from_tables(TableKind::full, 1, tabs);
    CHECK(evaluate(Network{&m, &t, {}}, set) == 1.0);
  }
  SUBCASE("with c=256 accuracy equals one class frequency") {
    auto set = make_synthetic(SyntheticKind::striped, 8, 3, 8, 8, 5);
    set = balanced_subset(set, 8);
    // drop two images of class 0 so the classes are imbalanced
    LabeledImageSet imbalanced{set.name, 3, 8, 8, {}, {}};
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set.labels[i] == 0 && dropped < 2) {
        ++dropped;
        continue;
      }
      imbalanced.labels.push_back(set.labels[i]);
      auto img = set.image(i);
      imbalanced.pixels.insert(imbalanced.pixels.end(), img.begin(), img.end());
    }
    Model m(tiny_config(3, 3, 1));
    LookupTables t = LookupTables::compressed(256, 1);
    Network net{&m, &t, {}};
    SgdMomentum opt(sgd(0.05));
    std::mt19937_64 rng(0);
    train_single(net, opt, imbalanced, nullptr, plan_for(3, 8), rng);
    const auto preds = predict_classes(net, imbalanced.all_images());
    CHECK(std::set<int>(preds.begin(), preds.end()).size() == 1);
    const auto counts = imbalanced.class_counts();
    CHECK(evaluate(net, imbalanced) == double(counts[preds[0]]) / double(imbalanced.size()));
  }
}

TEST_CASE("a non-finite loss aborts training") {
  const auto train = make_synthetic(SyntheticKind::separable, 4, 2, 8, 8, 1);
  Model m(tiny_config(3, 2, 1));
  m.parameters().at("fc1.bias")[0] = std::numeric_limits<double>::quiet_NaN();
  LookupTables t = LookupTables::full(1, 2);
  Network net{&m, &t, {}};
  SgdMomentum opt;
  std::mt19937_64 rng(0);
  CHECK_THROWS_AS(train_single(net, opt, train, nullptr, plan_for(1), rng), TrainingDiverged);
}

TEST_CASE("identical plans and seeds give identical metrics") {
  const auto train = make_synthetic(SyntheticKind::striped, 8, 2, 8, 8, 1);
  const auto test = make_synthetic(SyntheticKind::striped, 4, 2, 8, 8, 2);
  auto run = [&] {
    Model m(tiny_config(3, 2, 1));
    LookupTables t = LookupTables::compressed(8, 2);
    Network net{&m, &t, {}};
    SgdMomentum opt(sgd(0.05));
    TrainPlan plan = plan_for(3, 4);
    plan.augment.enabled = true;
    plan.augment.pad = 1;
    plan.evaluate_each_epoch = true;
    std::mt19937_64 rng(9);
    const Metrics metrics = train_single(net, opt, train, &test, plan, rng);
    std::ostringstream csv;
    write_metrics_csv(csv, metrics, false);
    return std::make_pair(csv.str(), m.parameters());
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("metrics csv") {
  Metrics m{{0, 0.5, 0.75, 0.25, 1.0, 2.5}, {1, 0.4, 0.5, std::nan(""), std::nan(""), 1.25}};
  std::ostringstream timed, untimed;
  write_metrics_csv(timed, m, true);
  write_metrics_csv(untimed, m, false);
  CHECK(timed.str() ==
        "epoch,split,loss,accuracy,seconds\n0,train,0.5,0.750000,2.500\n0,test,0.25,1.000000,2.500\n"
        "1,train,0.4,0.500000,1.250\n");
  CHECK(untimed.str() ==
        "epoch,split,loss,accuracy,seconds\n0,train,0.5,0.750000,0.000\n0,test,0.25,1.000000,0.000\n"
        "1,train,0.4,0.500000,0.000\n");
}

TEST_CASE("checkpoint round trip") {
  const auto train = make_synthetic(SyntheticKind::separable, 4, 2, 8, 8, 1);
  Model m(tiny_config(6, 2, 1));
  LookupTables t = LookupTables::full(2, 2);
  Network net{&m, &t, {StandardizeMode::dataset, {{1, 2, 3}, {4, 5, 6}}}};
  SgdMomentum opt(sgd(0.05));
  std::mt19937_64 rng(77);
  train_single(net, opt, train, nullptr, plan_for(1), rng);

  Checkpoint ck;
  store_model(ck, "f", m);
  store_tables(ck, t);
  store_standardizer(ck, net.standardizer);
  store_optimizer(ck, "f", opt);
  store_rng(ck, rng);
  std::stringstream buf;
  ck.write(buf);
  const std::string bytes = buf.str();
  REQUIRE(bytes.substr(0, 4) == "LVNC");
  CHECK(bytes[4] == 1);

  const Checkpoint back = Checkpoint::read(buf);
  CHECK(back == ck);
  CHECK(load_model(back, "f").parameters() == m.parameters());
  ModelConfig expected = m.config();
  expected.seed = 0;  // weights are restored directly, the init seed is not kept
  CHECK(load_model(back, "f").config() == expected);
  CHECK(load_tables(back).value() == t);
  const Standardizer s = load_standardizer(back);
  CHECK(s.mode == StandardizeMode::dataset);
  CHECK(s.stats.stddev[2] == 6.0);
  SgdMomentum opt2(sgd(0.05));
  load_optimizer(back, "f", opt2);
  CHECK(opt2.velocities() == opt.velocities());
  std::mt19937_64 rng2 = load_rng(back);
  CHECK(rng2 == rng);

  std::stringstream again;
  back.write(again);
  CHECK(again.str() == bytes);

  Checkpoint baseline;
  store_model(baseline, "f", m);
  CHECK_FALSE(load_tables(baseline).has_value());

  std::stringstream bad("LVNX\x01");
  CHECK_THROWS(Checkpoint::read(bad));
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS(Checkpoint::read(truncated));
}
