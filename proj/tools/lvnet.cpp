// lvnet: train, evaluate, gradient-check, cost and recode Lookup-VNets.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lvnet/commands.hpp"
#include "lvnet/data.hpp"
#include "lvnet/ppm.hpp"
#include "lvnet/simd.hpp"

namespace {

std::string to_flag(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return "--" + key;
}

/// Adds one string option per config key; values are applied after --config.
void add_config_options(CLI::App* cmd, std::map<std::string, std::string>& values, std::string& config_path) {
  cmd->add_option("--config", config_path, "key=value configuration file");
  for (const auto& key : lvnet::config_keys()) cmd->add_option(to_flag(key), values[key], "config key " + key);
}

lvnet::RunConfig resolve(const std::string& config_path, const std::map<std::string, std::string>& values) {
  lvnet::RunConfig cfg;
  if (!config_path.empty()) cfg = lvnet::load_config_file(config_path);
  for (const auto& [key, value] : values)
    if (!value.empty()) lvnet::set_config_value(cfg, key, value);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lookup-VNet toolkit: learn per-color input lookup tables jointly with a CNN"};
  app.require_subcommand(1);
  std::string simd = "auto";
  app.add_option("--simd", simd, "kernel variant: auto, scalar or avx2");

  std::map<std::string, std::string> train_values, eval_values;
  std::string train_config, eval_config, eval_checkpoint;
  bool baseline = false, frozen = false, deterministic = false, augment = false;

  auto* train = app.add_subcommand("train", "train a Lookup-VNet or the standardized baseline");
  add_config_options(train, train_values, train_config);
  train->add_flag("--baseline", baseline, "standard network on standardized RGB (no tables)");
  train->add_flag("--frozen-tables", frozen, "keep table entries fixed");
  train->add_flag("--deterministic", deterministic, "write 0 in the metrics seconds column");
  train->add_flag("--augmentation", augment, "pad/crop/flip augmentation");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the configured test split");
  add_config_options(eval, eval_values, eval_config);
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint written by train")->required();

  lvnet::GradcheckOptions gc;
  auto* grad = app.add_subcommand("gradcheck", "compare reverse-mode gradients with finite differences");
  grad->add_option("--table", gc.table, "none, full or compressed");
  grad->add_option("--dim", gc.dim, "vector dimension u");
  grad->add_option("--cmp-rate", gc.cmp_rate, "CMP-Rate c");
  grad->add_option("--seed", gc.seed);
  grad->add_option("--step", gc.step, "finite difference step");
  grad->add_option("--tolerance", gc.tolerance);

  lvnet::CostInputs ci;
  int cost_rate = 0;
  auto* cost = app.add_subcommand("cost", "extra parameters, floats and pixel bits of a Lookup-VNet");
  cost->add_option("--m", ci.m, "image height");
  cost->add_option("--n", ci.n, "image width");
  cost->add_option("--s", ci.s, "first-layer stride");
  cost->add_option("--k", ci.k, "first-layer kernel size");
  cost->add_option("--j", ci.j, "first-layer kernel count");
  cost->add_option("--u", ci.u, "vector dimension");
  cost->add_option("--cmp-rate", cost_rate, "CMP-Rate (compressed tables)");

  std::string recode_ck, recode_out = "recoded", recode_dataset;
  std::vector<std::string> recode_ppms;
  std::size_t recode_count = 8;
  std::map<std::string, std::string> recode_values;
  std::string recode_config;
  auto* recode = app.add_subcommand("recode", "render images through learned tables as PPM files");
  recode->add_option("--checkpoint", recode_ck)->required();
  recode->add_option("--out", recode_out, "output directory");
  recode->add_option("--images", recode_ppms, "P6 images to recode");
  recode->add_option("--from-config", recode_config, "take images from the test split of this config");
  recode->add_option("--count", recode_count, "number of test images when using --from-config");

  CLI11_PARSE(app, argc, argv);
  if (simd != "auto" && !lvnet::simd::select(simd)) {
    std::cerr << "error: kernel variant '" << simd << "' is unavailable\n";
    return 2;
  }

  try {
    if (*train) {
      if (baseline) train_values["table"] = "none";
      if (frozen) train_values["freeze_tables"] = "true";
      if (deterministic) train_values["deterministic_log"] = "true";
      if (augment) train_values["augment"] = "true";
      return lvnet::cmd_train(resolve(train_config, train_values), std::cout, std::cerr);
    }
    if (*eval) return lvnet::cmd_eval(resolve(eval_config, eval_values), eval_checkpoint, std::cout, std::cerr);
    if (*grad) return lvnet::cmd_gradcheck(gc, std::cout);
    if (*cost) {
      if (cost_rate) ci.cmp_rate = cost_rate;
      return lvnet::cmd_cost(ci, std::cout);
    }
    if (*recode) {
      lvnet::ImageBatch images;
      if (!recode_ppms.empty()) {
        for (const auto& p : recode_ppms) {
          lvnet::ImageBatch one = lvnet::read_ppm(p);
          if (images.count && (one.height != images.height || one.width != images.width))
            throw std::runtime_error("recode inputs must share one image size");
          images.height = one.height;
          images.width = one.width;
          images.pixels.insert(images.pixels.end(), one.pixels.begin(), one.pixels.end());
          ++images.count;
        }
      } else {
        const lvnet::RunConfig cfg = recode_config.empty() ? lvnet::RunConfig{} : lvnet::load_config_file(recode_config);
        const auto data = lvnet::load_dataset(cfg, cfg.dataset, cfg.classes);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < std::min(recode_count, data.test.size()); ++i) idx.push_back(i);
        images = data.test.gather(idx);
      }
      return lvnet::cmd_recode(recode_ck, images, recode_out, std::cout, std::cerr);
    }
  } catch (const lvnet::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
