#pragma once

// Binary checkpoint: "LVNC", one version byte, a little-endian u32 section
// count, then per section
//   u32 name length | name bytes | u32 rank | rank x u64 dims | prod(dims) x f64
// All integers and reals are little-endian. Non-real state (RNG words) is
// stored bit-for-bit in the 64-bit payload slots.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lvnet/lookup.hpp"
#include "lvnet/network.hpp"
#include "lvnet/optim.hpp"
#include "lvnet/tensor.hpp"

namespace lvnet {

inline constexpr std::array<char, 4> kCheckpointMagic{'L', 'V', 'N', 'C'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Section {
  std::string name;
  Shape shape;
  std::vector<double> payload;
  friend bool operator==(const Section&, const Section&) = default;
};

class Checkpoint {
 public:
  void put(std::string name, const Tensor& value);
  void put(std::string name, Shape shape, std::vector<double> payload);
  bool has(const std::string& name) const;
  const Section& at(const std::string& name) const;
  Tensor tensor(const std::string& name) const;
  const std::vector<Section>& sections() const { return sections_; }

  void write(std::ostream& out) const;
  static Checkpoint read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;

 private:
  std::vector<Section> sections_;
};

// Helpers mapping training state onto sections. `prefix` distinguishes the two
// networks of cross strategies ("f", "g").
void store_model(Checkpoint& ck, const std::string& prefix, const Model& model);
Model load_model(const Checkpoint& ck, const std::string& prefix);

void store_tables(Checkpoint& ck, const LookupTables& tables);
std::optional<LookupTables> load_tables(const Checkpoint& ck);

void store_standardizer(Checkpoint& ck, const Standardizer& s);
Standardizer load_standardizer(const Checkpoint& ck);

void store_optimizer(Checkpoint& ck, const std::string& prefix, const SgdMomentum& optim);
void load_optimizer(const Checkpoint& ck, const std::string& prefix, SgdMomentum& optim);

void store_rng(Checkpoint& ck, const std::mt19937_64& rng);
std::mt19937_64 load_rng(const Checkpoint& ck);

}  // namespace lvnet
