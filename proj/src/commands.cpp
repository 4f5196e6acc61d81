#include "lvnet/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "lvnet/checkpoint.hpp"
#include "lvnet/gradcheck.hpp"
#include "lvnet/ops.hpp"
#include "lvnet/ppm.hpp"
#include "lvnet/trainer.hpp"

namespace lvnet {

ConfigError::ConfigError(std::string key, const std::string& what)
    : std::invalid_argument("config key '" + key + "': " + what), key_(std::move(key)) {}

namespace {

constexpr std::uint64_t kTableSeedSalt = 0x9E3779B97F4A7C15ULL;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T v{};
  if (!(in >> v) || !(in >> std::ws).eof()) throw ConfigError(key, "cannot parse '" + value + "' as a number");
  if constexpr (std::is_unsigned_v<T>) {
    if (!value.empty() && value[0] == '-') throw ConfigError(key, "must be non-negative");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError(key, "expected a boolean, got '" + value + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter num(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); };
}
Setter text(std::string RunConfig::*field) {
  return [field](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; };
}
Setter flag(bool RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_bool(k, v); };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table{
      {"dataset", text(&RunConfig::dataset)},
      {"dataset_q", text(&RunConfig::dataset_q)},
      {"test_file", text(&RunConfig::test_file)},
      {"classes", num(&RunConfig::classes)},
      {"classes_q", num(&RunConfig::classes_q)},
      {"per_class", num(&RunConfig::per_class)},
      {"test_per_class", num(&RunConfig::test_per_class)},
      {"height", num(&RunConfig::height)},
      {"width", num(&RunConfig::width)},
      {"data_seed", num(&RunConfig::data_seed)},
      {"blocks", text(&RunConfig::blocks)},
      {"head_width", num(&RunConfig::head_width)},
      {"table", text(&RunConfig::table)},
      {"dim", num(&RunConfig::dim)},
      {"cmp_rate", num(&RunConfig::cmp_rate)},
      {"standardize", text(&RunConfig::standardize)},
      {"strategy", text(&RunConfig::strategy)},
      {"epochs", num(&RunConfig::epochs)},
      {"batch_size", num(&RunConfig::batch_size)},
      {"alternation", num(&RunConfig::alternation)},
      {"alternate_per_epoch", flag(&RunConfig::alternate_per_epoch)},
      {"augment", flag(&RunConfig::augment)},
      {"pad", num(&RunConfig::pad)},
      {"hflip", num(&RunConfig::hflip)},
      {"freeze_tables", flag(&RunConfig::freeze_tables)},
      {"eval_each_epoch", flag(&RunConfig::eval_each_epoch)},
      {"lr", num(&RunConfig::lr)},
      {"lr_g", num(&RunConfig::lr_g)},
      {"momentum", num(&RunConfig::momentum)},
      {"weight_decay", num(&RunConfig::weight_decay)},
      {"decay_tables", flag(&RunConfig::decay_tables)},
      {"milestones", text(&RunConfig::milestones)},
      {"lr_divisor", num(&RunConfig::lr_divisor)},
      {"seed", num(&RunConfig::seed)},
      {"out_dir", text(&RunConfig::out_dir)},
      {"deterministic_log", flag(&RunConfig::deterministic_log)},
  };
  return table;
}

void validate(const RunConfig& c) {
  if (c.table != "none" && c.table != "full" && c.table != "compressed")
    throw ConfigError("table", "expected none, full or compressed, got '" + c.table + "'");
  if (c.table == "full" && c.dim == 0) throw ConfigError("dim", "vector dimension must be at least 1");
  if (c.table == "compressed" && (c.cmp_rate < 1 || c.cmp_rate > 256))
    throw ConfigError("cmp_rate", "must lie in [1,256]");
  if (c.strategy != "single" && c.strategy != "cross-network" && c.strategy != "cross-task")
    throw ConfigError("strategy", "expected single, cross-network or cross-task, got '" + c.strategy + "'");
  if (c.strategy != "single" && c.table == "none") throw ConfigError("strategy", "cross strategies need lookup tables");
  if (c.strategy == "cross-task" && c.dataset_q.empty()) throw ConfigError("dataset_q", "cross-task needs a second task");
  if (c.standardize != "auto" && c.standardize != "image" && c.standardize != "dataset")
    throw ConfigError("standardize", "expected auto, image or dataset");
  if (c.batch_size == 0) throw ConfigError("batch_size", "must be at least 1");
  if (c.classes == 0) throw ConfigError("classes", "must be at least 1");
  if (c.hflip < 0.0 || c.hflip > 1.0) throw ConfigError("hflip", "must lie in [0,1]");
  parse_blocks(c.blocks);
}

std::vector<std::size_t> parse_milestones(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<std::size_t>("milestones", item));
  }
  return out;
}

bool is_cifar(const std::string& spec) { return spec.rfind("cifar10", 0) == 0; }

Standardizer make_standardizer(const RunConfig& cfg, const LabeledImageSet& train) {
  Standardizer s;
  const bool per_image = cfg.standardize == "image" || (cfg.standardize == "auto" && is_cifar(cfg.dataset));
  s.mode = per_image ? StandardizeMode::per_image : StandardizeMode::dataset;
  s.stats = compute_channel_stats(train.pixels, train.size(), train.height * train.width);
  return s;
}

ModelConfig model_config(const RunConfig& cfg, std::size_t input_channels, std::size_t classes, std::size_t h,
                         std::size_t w, std::uint64_t seed) {
  ModelConfig m;
  m.input_channels = input_channels;
  m.height = h;
  m.width = w;
  m.blocks = parse_blocks(cfg.blocks);
  m.head_width = cfg.head_width;
  m.classes = classes;
  m.seed = seed;
  return m;
}

SgdConfig sgd_config(const RunConfig& cfg, double lr) {
  SgdConfig s;
  s.learning_rate = lr;
  s.momentum = cfg.momentum;
  s.weight_decay = cfg.weight_decay;
  s.decay_tables = cfg.decay_tables;
  s.milestones = parse_milestones(cfg.milestones);
  s.lr_divisor = cfg.lr_divisor;
  return s;
}

void write_csv(const std::filesystem::path& path, const Metrics& m, bool with_time) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_metrics_csv(out, m, with_time);
}

std::string format_accuracy(const Network& net, const LabeledImageSet& test) {
  const auto predicted = predict_classes(net, test.all_images());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == test.labels[i];
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.6f (%zu/%zu)",
                test.size() ? static_cast<double>(correct) / static_cast<double>(test.size()) : 0.0, correct,
                test.size());
  return buf;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, set] : setters())
    if (name == key) return set(cfg, key, trim(value));
  throw ConfigError(key, "unknown setting");
}

RunConfig parse_config_text(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line, "line " + std::to_string(line_no) + " is not of the form key=value");
    set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  validate(base);
  return base;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

std::string to_config_text(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "dataset=" << c.dataset << "\ndataset_q=" << c.dataset_q << "\ntest_file=" << c.test_file
    << "\nclasses=" << c.classes << "\nclasses_q=" << c.classes_q << "\nper_class=" << c.per_class
    << "\ntest_per_class=" << c.test_per_class << "\nheight=" << c.height << "\nwidth=" << c.width
    << "\ndata_seed=" << c.data_seed << "\nblocks=" << c.blocks << "\nhead_width=" << c.head_width
    << "\ntable=" << c.table << "\ndim=" << c.dim << "\ncmp_rate=" << c.cmp_rate << "\nstandardize=" << c.standardize
    << "\nstrategy=" << c.strategy << "\nepochs=" << c.epochs << "\nbatch_size=" << c.batch_size
    << "\nalternation=" << c.alternation << "\nalternate_per_epoch=" << c.alternate_per_epoch
    << "\naugment=" << c.augment << "\npad=" << c.pad << "\nhflip=" << c.hflip
    << "\nfreeze_tables=" << c.freeze_tables << "\neval_each_epoch=" << c.eval_each_epoch << "\nlr=" << c.lr
    << "\nlr_g=" << c.lr_g << "\nmomentum=" << c.momentum << "\nweight_decay=" << c.weight_decay
    << "\ndecay_tables=" << c.decay_tables << "\nmilestones=" << c.milestones << "\nlr_divisor=" << c.lr_divisor
    << "\nseed=" << c.seed << "\nout_dir=" << c.out_dir << "\ndeterministic_log=" << c.deterministic_log << "\n";
  return o.str();
}

std::vector<ConvBlock> parse_blocks(const std::string& spec) {
  std::vector<ConvBlock> blocks;
  std::istringstream in(spec);
  for (std::string item; std::getline(in, item, ',');) {
    item = trim(item);
    if (item.empty()) continue;
    ConvBlock b;
    b.pool = item.back() == 'p';
    if (b.pool) item.pop_back();
    std::size_t stride = 1;
    if (auto s = item.find('s'); s != std::string::npos) {
      stride = parse_number<std::size_t>("blocks", item.substr(s + 1));
      item.erase(s);
    }
    const auto x = item.find('x');
    if (x == std::string::npos) throw ConfigError("blocks", "block '" + item + "' is not of the form <k>x<filters>");
    b.kernel = parse_number<std::size_t>("blocks", item.substr(0, x));
    b.filters = parse_number<std::size_t>("blocks", item.substr(x + 1));
    b.stride = stride;
    if (b.kernel == 0 || b.filters == 0 || b.stride == 0) throw ConfigError("blocks", "sizes must be positive");
    blocks.push_back(b);
  }
  return blocks;
}

std::filesystem::path default_cifar_dir() {
  if (const char* env = std::getenv("LVNET_DATA_DIR"); env && *env) return env;
  return "data/cifar-10-batches-bin";
}

DataSplits load_dataset(const RunConfig& cfg, const std::string& spec, std::size_t classes) {
  if (spec.rfind("synthetic:", 0) == 0) {
    const std::string kind = spec.substr(10);
    SyntheticKind k;
    if (kind == "separable")
      k = SyntheticKind::separable;
    else if (kind == "striped")
      k = SyntheticKind::striped;
    else
      throw ConfigError("dataset", "unknown synthetic kind '" + kind + "'");
    return {make_synthetic(k, cfg.per_class, classes, cfg.height, cfg.width, cfg.data_seed),
            make_synthetic(k, cfg.test_per_class, classes, cfg.height, cfg.width, cfg.data_seed + 7919)};
  }
  if (is_cifar(spec)) {
    const std::filesystem::path dir = spec.size() > 8 && spec[7] == ':' ? std::filesystem::path(spec.substr(8))
                                                                       : default_cifar_dir();
    std::vector<std::filesystem::path> train_files;
    for (int i = 1; i <= 5; ++i) {
      auto p = dir / ("data_batch_" + std::to_string(i) + ".bin");
      if (std::filesystem::exists(p)) train_files.push_back(p);
    }
    if (train_files.empty()) throw ConfigError("dataset", "no CIFAR-10 batches found in " + dir.string());
    return {load_cifar10_binary(train_files, cfg.per_class), load_cifar10_binary(dir / "test_batch.bin", cfg.test_per_class)};
  }
  if (spec.rfind("file:", 0) == 0) {
    LabeledImageSet train = load_image_set(spec.substr(5));
    LabeledImageSet test = cfg.test_file.empty() ? train : load_image_set(cfg.test_file);
    return {std::move(train), std::move(test)};
  }
  throw ConfigError("dataset", "unrecognized dataset spec '" + spec + "'");
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    validate(cfg);
    DataSplits p = load_dataset(cfg, cfg.dataset, cfg.classes);
    const std::size_t h = p.train.height, w = p.train.width;

    std::optional<LookupTables> tables;
    const std::uint64_t table_seed = cfg.seed ^ kTableSeedSalt;
    if (cfg.table == "full") tables = LookupTables::full(cfg.dim, table_seed);
    if (cfg.table == "compressed") tables = LookupTables::compressed(cfg.cmp_rate, table_seed);
    const std::size_t channels = tables ? tables->output_channels() : 3;

    Model f(model_config(cfg, channels, p.train.classes, h, w, cfg.seed));
    Network nf{&f, tables ? &*tables : nullptr, make_standardizer(cfg, p.train)};

    TrainPlan plan;
    plan.epochs = cfg.epochs;
    plan.batch_size = cfg.batch_size;
    plan.seed = cfg.seed;
    plan.alternation_steps = cfg.alternation;
    plan.alternate_per_epoch = cfg.alternate_per_epoch;
    plan.augment = AugmentSpec{cfg.augment, cfg.pad, 0, cfg.hflip};
    plan.freeze_tables = cfg.freeze_tables;
    plan.evaluate_each_epoch = cfg.eval_each_epoch;

    SgdMomentum opt_f(sgd_config(cfg, cfg.lr));
    SgdMomentum opt_g(sgd_config(cfg, cfg.lr_g < 0.0 ? cfg.lr : cfg.lr_g));
    std::mt19937_64 rng(cfg.seed + 2);

    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path dir(cfg.out_dir);
    Checkpoint ck;
    const bool with_time = !cfg.deterministic_log;

    std::optional<Model> g;
    std::optional<DataSplits> q;
    if (cfg.strategy == "single") {
      plan.strategy = Strategy::single;
      write_csv(dir / "metrics.csv", train_single(nf, opt_f, p.train, &p.test, plan, rng), with_time);
    } else {
      const bool task = cfg.strategy == "cross-task";
      plan.strategy = task ? Strategy::cross_task : Strategy::cross_network;
      if (task) q = load_dataset(cfg, cfg.dataset_q, cfg.classes_q ? cfg.classes_q : cfg.classes);
      const LabeledImageSet& gtrain = task ? q->train : p.train;
      if (gtrain.height != h || gtrain.width != w)
        throw ConfigError("dataset_q", "second task must share the image size of the first");
      g.emplace(model_config(cfg, channels, gtrain.classes, h, w, cfg.seed + 1));
      Network ng{&*g, &*tables, nf.standardizer};
      auto [mf, mg] = task ? train_cross_task(nf, ng, p.train, q->train, &p.test, &q->test, plan, opt_f, opt_g, rng)
                           : train_cross_network(nf, ng, p.train, &p.test, plan, opt_f, opt_g, rng);
      write_csv(dir / "metrics.csv", mf, with_time);
      write_csv(dir / "metrics_g.csv", mg, with_time);
    }

    store_model(ck, "f", f);
    store_optimizer(ck, "f", opt_f);
    if (g) {
      store_model(ck, "g", *g);
      store_optimizer(ck, "g", opt_g);
    }
    if (tables) store_tables(ck, *tables);
    store_standardizer(ck, nf.standardizer);
    store_rng(ck, rng);
    ck.save(dir / "checkpoint.lvnc");
    {
      std::ofstream cfg_out(dir / "run.cfg");
      cfg_out << to_config_text(cfg);
    }

    out << "test-accuracy: " << format_accuracy(nf, p.test) << "\n";
    if (g) {
      Network ng{&*g, &*tables, nf.standardizer};
      out << "test-accuracy-g: " << format_accuracy(ng, q ? q->test : p.test) << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& out, std::ostream& err) {
  try {
    const Checkpoint ck = Checkpoint::load(checkpoint);
    Model f = load_model(ck, "f");
    std::optional<LookupTables> tables = load_tables(ck);
    Network nf{&f, tables ? &*tables : nullptr, load_standardizer(ck)};
    const DataSplits p = load_dataset(cfg, cfg.dataset, f.config().classes);
    out << "test-accuracy: " << format_accuracy(nf, p.test) << "\n";
    if (ck.has("g.meta") && tables) {
      Model g = load_model(ck, "g");
      Network ng{&g, &*tables, nf.standardizer};
      const bool task = !cfg.dataset_q.empty() && cfg.strategy == "cross-task";
      const DataSplits q = task ? load_dataset(cfg, cfg.dataset_q, g.config().classes) : p;
      out << "test-accuracy-g: " << format_accuracy(ng, q.test) << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

GradcheckReport gradient_check(const Network& net, const ImageBatch& images, std::span<const int> labels, double step,
                               bool corrupt_backward) {
  check_input_stage(net);
  Tape tape;
  const GradientMap grads = tape.backward(softmax_cross_entropy(tape, forward(tape, net, images, true), labels));

  // Copies so the finite-difference probes never touch the caller's state.
  Model model = *net.model;
  std::optional<LookupTables> tables;
  if (net.tables) tables = *net.tables;
  Network probe{&model, tables ? &*tables : nullptr, net.standardizer};
  auto loss_now = [&] {
    Tape t;
    return t.value(softmax_cross_entropy(t, forward(t, probe, images, false), labels))[0];
  };

  GradcheckReport report;
  report.parameters = net.parameter_count();
  auto compare = [&](const std::string& name, Tensor& slot, bool is_table) {
    Tensor analytic = grads.at(name);
    if (corrupt_backward)
      for (double& v : analytic.data()) v = v * 1.01 + 1e-3;
    const Tensor saved = slot;
    const Tensor numeric = finite_diff_grad(
        [&](const Tensor& theta) {
          slot = theta;
          return loss_now();
        },
        saved, step);
    slot = saved;
    const double e = max_relative_error(analytic, numeric);
    report.per_parameter[name] = e;
    double& bucket = is_table ? report.table_error : report.weight_error;
    bucket = std::max(bucket, e);
  };
  for (auto& [name, value] : model.parameters()) compare(name, value, false);
  if (tables)
    for (std::size_t ch = 0; ch < 3; ++ch) compare(std::string(kTableParamNames[ch]), tables->table(ch), true);
  return report;
}

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
  std::optional<LookupTables> tables;
  if (opt.table == "full") tables = LookupTables::full(opt.dim, opt.seed + 11);
  else if (opt.table == "compressed") tables = LookupTables::compressed(opt.cmp_rate, opt.seed + 11);
  else if (opt.table != "none") throw ConfigError("table", "expected none, full or compressed");

  ModelConfig mc;
  mc.input_channels = tables ? tables->output_channels() : 3;
  mc.height = mc.width = 8;
  mc.blocks = {{3, 4, 1, true}};
  mc.head_width = 8;
  mc.classes = 3;
  mc.seed = opt.seed;
  Model model(mc);
  // Nonzero biases keep pre-activations away from the relu kink at zero.
  std::mt19937_64 rng(opt.seed + 5);
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  for (auto& [name, value] : model.parameters())
    if (name.ends_with(".bias"))
      for (double& v : value.data()) v = small(rng);

  const std::vector<int> labels{0, 1, 2, 1};
  Standardizer st;
  st.mode = StandardizeMode::per_image;
  Network net{&model, tables ? &*tables : nullptr, st};
  if (net.parameter_count() - (tables ? tables->parameter_count() : 0) > 5000)
    throw std::logic_error("gradient check model exceeds 5000 weights");

  // Central differences only estimate the gradient where no relu or pool
  // switches within the probe step, so redraw the batch until every switching
  // point is at least 100 steps away.
  ImageBatch images{4, 8, 8, std::vector<std::uint8_t>(4 * 3 * 64)};
  std::uniform_int_distribution<int> byte(0, 255);
  double margin = 0.0;
  for (int attempt = 0; attempt < 64 && margin < 100.0 * opt.step; ++attempt) {
    for (auto& px : images.pixels) px = static_cast<std::uint8_t>(byte(rng));
    Tape probe;
    forward(probe, net, images, false);
    margin = probe.counters().kink_margin;
  }
  GradcheckReport r = gradient_check(net, images, labels, opt.step, opt.corrupt_backward);
  r.kink_margin = margin;
  return r;
}

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out) {
  const GradcheckReport r = run_gradcheck(opt);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "parameters: %zu\nkink margin: %.3e\nweights max-rel-error: %.3e\ntables max-rel-error: %.3e\n",
                r.parameters, r.kink_margin, r.weight_error, r.table_error);
  out << buf;
  const bool ok = r.passed(opt.tolerance);
  out << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

int cmd_cost(const CostInputs& in, std::ostream& out) {
  const CostReport r = cost_report(in);
  out << render_text(r) << "\n" << render_key_values(r);
  return 0;
}

ImageBatch recode_images(const LookupTables& tables, const ImageBatch& images) {
  const std::size_t plane = images.height * images.width, u = tables.dim();
  std::vector<double> values(images.pixels.size());
  std::array<double, 3> lo{}, hi{};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    lo[ch] = INFINITY;
    hi[ch] = -INFINITY;
  }
  for (std::size_t i = 0; i < images.count; ++i)
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t e = (i * 3 + ch) * plane + p;
        const double v = tables.table(ch)[tables.row_of(images.pixels[e]) * u];
        values[e] = v;
        lo[ch] = std::min(lo[ch], v);
        hi[ch] = std::max(hi[ch], v);
      }
  ImageBatch out{images.count, images.height, images.width, std::vector<std::uint8_t>(images.pixels.size())};
  for (std::size_t i = 0; i < images.count; ++i)
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t e = (i * 3 + ch) * plane + p;
        const double range = hi[ch] - lo[ch];
        out.pixels[e] =
            range > 0.0 ? static_cast<std::uint8_t>(std::lround((values[e] - lo[ch]) / range * 255.0)) : 128;
      }
  return out;
}

int cmd_recode(const std::filesystem::path& checkpoint, const ImageBatch& images, const std::filesystem::path& out_dir,
               std::ostream& out, std::ostream& err) {
  try {
    const auto tables = load_tables(Checkpoint::load(checkpoint));
    if (!tables) throw std::runtime_error(checkpoint.string() + " has no lookup table section");
    const ImageBatch recoded = recode_images(*tables, images);
    std::filesystem::create_directories(out_dir);
    char name[64];
    for (std::size_t i = 0; i < images.count; ++i) {
      std::snprintf(name, sizeof name, "%04zu_original.ppm", i);
      write_ppm(out_dir / name, images.image(i), images.height, images.width);
      std::snprintf(name, sizeof name, "%04zu_recoded.ppm", i);
      write_ppm(out_dir / name, recoded.image(i), images.height, images.width);
    }
    out << "recoded " << images.count << " images into " << out_dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lvnet
