#pragma once

// The command surface shared by the `lvnet` executable and the acceptance
// suite. Commands return a process exit code and report on the given streams.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lvnet/costing.hpp"
#include "lvnet/data.hpp"
#include "lvnet/network.hpp"

namespace lvnet {

/// Configuration problem; `key()` names the offending setting.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  // data
  std::string dataset = "synthetic:separable";
  std::string dataset_q;  // second task of cross-task learning
  std::string test_file;  // test records for file: datasets
  std::size_t classes = 2;
  std::size_t classes_q = 0;  // 0: same as `classes`
  std::size_t per_class = 32;
  std::size_t test_per_class = 16;
  std::size_t height = 16;
  std::size_t width = 16;
  std::uint64_t data_seed = 1;
  // model
  std::string blocks = "3x8p";
  std::size_t head_width = 16;
  // input stage
  std::string table = "full";  // none | full | compressed
  std::size_t dim = 1;
  int cmp_rate = 16;
  std::string standardize = "auto";  // auto | image | dataset
  // plan
  std::string strategy = "single";  // single | cross-network | cross-task
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t alternation = 1;
  bool alternate_per_epoch = false;
  bool augment = false;
  std::size_t pad = 4;
  double hflip = 0.5;
  bool freeze_tables = false;
  bool eval_each_epoch = true;
  // optimizer
  double lr = 0.05;
  double lr_g = -1.0;  // negative: same as lr
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool decay_tables = false;
  std::string milestones;  // comma separated epochs
  double lr_divisor = 1.0;
  // run
  std::uint64_t seed = 0;
  std::string out_dir = "lvnet-run";
  bool deterministic_log = false;
};

/// Names accepted by set_config_value, in documentation order.
const std::vector<std::string>& config_keys();

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// key=value lines; blank lines and '#' comments are ignored.
RunConfig parse_config_text(std::string_view text, RunConfig base = {});
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});
std::string to_config_text(const RunConfig& cfg);

/// "3x8p,3x16s2p": kernel x filters, optional s<stride>, trailing p for pooling.
std::vector<ConvBlock> parse_blocks(const std::string& spec);

struct DataSplits {
  LabeledImageSet train;
  LabeledImageSet test;
};

/// Resolves synthetic:<kind>, cifar10[:<dir>] (default dir from LVNET_DATA_DIR)
/// and file:<path> dataset specs.
DataSplits load_dataset(const RunConfig& cfg, const std::string& spec, std::size_t classes);

/// Default CIFAR-10 directory: $LVNET_DATA_DIR, else ./data/cifar-10-batches-bin.
std::filesystem::path default_cifar_dir();

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& out, std::ostream& err);

struct GradcheckOptions {
  std::string table = "full";
  std::size_t dim = 2;
  int cmp_rate = 16;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Negative control: perturbs the analytic gradient before comparison.
  bool corrupt_backward = false;
};

struct GradcheckReport {
  std::size_t parameters = 0;
  double weight_error = 0.0;
  double table_error = 0.0;
  /// Distance of the checked point from the nearest relu or pool switch.
  double kink_margin = 0.0;
  std::map<std::string, double> per_parameter;
  bool passed(double tolerance) const { return weight_error < tolerance && table_error < tolerance; }
};

/// Compares reverse-mode gradients of every weight and table entry with
/// central differences on a small batch.
GradcheckReport gradient_check(const Network& net, const ImageBatch& images, std::span<const int> labels,
                               double step = 1e-5, bool corrupt_backward = false);

/// Gradient check of a small fixed model (under 5,000 weights, 8x8 inputs,
/// four images) with the input stage selected by `opt`.
GradcheckReport run_gradcheck(const GradcheckOptions& opt);
int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out);
int cmd_cost(const CostInputs& in, std::ostream& out);

/// Maps each image through the tables (first vector component per channel)
/// and min-max normalizes every channel over the whole set to 0..255. A
/// channel whose values are all equal becomes mid-gray 128.
ImageBatch recode_images(const LookupTables& tables, const ImageBatch& images);

/// Writes NNNN_original.ppm and NNNN_recoded.ppm for each image.
int cmd_recode(const std::filesystem::path& checkpoint, const ImageBatch& images, const std::filesystem::path& out_dir,
               std::ostream& out, std::ostream& err);

}  // namespace lvnet
