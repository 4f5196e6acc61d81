// Desk-scale CIFAR-10 criteria. Needs the binary CIFAR-10 batches in
// $LVNET_DATA_DIR (default data/cifar-10-batches-bin); exits with 77 (skipped)
// when they are absent.

#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "lvnet/commands.hpp"
#include "report.hpp"

using namespace lvnet;
using namespace lvnet::acceptance;
namespace fs = std::filesystem;

namespace {

// Protocol and limits, pinned.
constexpr std::size_t kPerClass = 200;  // 2,000 training images
constexpr std::size_t kEpochs = 20;
constexpr std::size_t kBatch = 32;
constexpr const char* kBlocks = "3x16p,3x32p,3x32p";
constexpr std::size_t kHead = 64;
constexpr double kLearningRate = 0.05;
constexpr const char* kMilestones = "15";
constexpr double kDivisor = 2.0;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};
constexpr double kParityPoints = 3.0;
constexpr double kDropPoints = 5.0;
constexpr double kParityBudget = 30 * 60.0;
constexpr double kDimensionBudget = 60 * 60.0;
constexpr double kCompressionBudget = 60 * 60.0;

struct Arm {
  std::string label;
  std::string table;  // none | full | compressed
  std::size_t dim = 1;
  int cmp_rate = 1;
};

struct Outcome {
  double mean_points = 0.0;
  double seconds = 0.0;
  bool ok = true;
};

double parse_accuracy(const std::string& out) {
  const auto at = out.find("test-accuracy: ");
  if (at == std::string::npos) return -1.0;
  return std::stod(out.substr(at + 15));
}

Outcome run_arm(const Arm& arm, const fs::path& root) {
  Stopwatch clock;
  Outcome o;
  std::vector<double> acc;
  for (std::uint64_t seed : kSeeds) {
    RunConfig cfg;
    cfg.dataset = "cifar10";
    cfg.classes = 10;
    cfg.per_class = kPerClass;
    cfg.test_per_class = 0;
    cfg.blocks = kBlocks;
    cfg.head_width = kHead;
    cfg.table = arm.table;
    cfg.dim = arm.dim;
    cfg.cmp_rate = arm.cmp_rate;
    cfg.standardize = "image";
    cfg.epochs = kEpochs;
    cfg.batch_size = kBatch;
    cfg.augment = true;
    cfg.lr = kLearningRate;
    cfg.milestones = kMilestones;
    cfg.lr_divisor = kDivisor;
    cfg.eval_each_epoch = false;
    cfg.seed = seed;
    cfg.out_dir = (root / (arm.label + "-" + std::to_string(seed))).string();
    std::ostringstream out, err;
    const int code = cmd_train(cfg, out, err);
    const double a = parse_accuracy(out.str());
    std::printf("      %-10s seed %llu: test accuracy %.4f%s\n", arm.label.c_str(),
                static_cast<unsigned long long>(seed), a, code ? (" (exit " + std::to_string(code) + ": " + err.str() + ")").c_str() : "");
    std::fflush(stdout);
    o.ok &= code == 0 && a >= 0.0;
    acc.push_back(a);
  }
  o.mean_points = 100.0 * std::accumulate(acc.begin(), acc.end(), 0.0) / double(acc.size());
  o.seconds = clock.seconds();
  return o;
}

bool have_cifar(const fs::path& dir) {
  return fs::exists(dir / "data_batch_1.bin") && fs::exists(dir / "test_batch.bin");
}

}  // namespace

int main() {
  Report report;
  const fs::path dir = default_cifar_dir();
  if (!have_cifar(dir)) {
    const std::string why = "CIFAR-10 binary batches not found in " + dir.string() + " (set LVNET_DATA_DIR)";
    report.skip(5, "desk-scale trainability", why);
    report.skip(6, "dimension insensitivity", why);
    report.skip(7, "compression threshold", why);
    return 77;
  }

  const fs::path root = fs::temp_directory_path() / ("lvnet-cifar-" + std::to_string(std::random_device{}()));
  fs::create_directories(root);
  std::map<std::string, Outcome> r;
  for (const Arm& arm : {Arm{"baseline", "none"}, Arm{"u1", "full", 1}})
    r[arm.label] = run_arm(arm, root);
  const double parity = std::abs(r["u1"].mean_points - r["baseline"].mean_points);
  const double t5 = r["u1"].seconds + r["baseline"].seconds;
  report.pass_fail(5, "desk-scale trainability",
                   r["u1"].ok && r["baseline"].ok && parity <= kParityPoints && t5 < kParityBudget,
                   format("u=1 %.2f%% vs baseline %.2f%% (|diff| %.2f <= %.1f points, 3 seeds), %.0f s (< %.0f s)",
                          r["u1"].mean_points, r["baseline"].mean_points, parity, kParityPoints, t5, kParityBudget));

  r["u4"] = run_arm(Arm{"u4", "full", 4}, root);
  const double dim_gap = std::abs(r["u4"].mean_points - r["u1"].mean_points);
  const double t6 = r["u4"].seconds + r["u1"].seconds;
  report.pass_fail(6, "dimension insensitivity", r["u4"].ok && dim_gap <= kParityPoints && t6 < kDimensionBudget,
                   format("u=1 %.2f%% vs u=4 %.2f%% (|diff| %.2f <= %.1f points), %.0f s (< %.0f s)",
                          r["u1"].mean_points, r["u4"].mean_points, dim_gap, kParityPoints, t6, kDimensionBudget));

  double t7 = 0.0;
  bool ok7 = true;
  for (int c : {1, 4, 16, 128}) {
    const std::string label = "c" + std::to_string(c);
    r[label] = run_arm(Arm{label, "compressed", 1, c}, root);
    t7 += r[label].seconds;
    ok7 &= r[label].ok;
  }
  const double lo = std::min({r["c1"].mean_points, r["c4"].mean_points, r["c16"].mean_points});
  const double hi = std::max({r["c1"].mean_points, r["c4"].mean_points, r["c16"].mean_points});
  const double drop = lo - r["c128"].mean_points;
  report.pass_fail(7, "compression threshold",
                   ok7 && hi - lo <= kParityPoints && drop > kDropPoints && t7 < kCompressionBudget,
                   format("c=1/4/16 %.2f/%.2f/%.2f%% (spread %.2f <= %.1f), c=128 %.2f%% (drop %.2f > %.1f points), "
                          "%.0f s (< %.0f s)",
                          r["c1"].mean_points, r["c4"].mean_points, r["c16"].mean_points, hi - lo, kParityPoints,
                          r["c128"].mean_points, drop, kDropPoints, t7, kCompressionBudget));
  fs::remove_all(root);
  return report.failed() ? 1 : 0;
}
