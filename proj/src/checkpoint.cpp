#include "lvnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace lvnet {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
  return v;
}

constexpr const char* kTablesMeta = "tables.meta";
constexpr const char* kInputStats = "input.stats";
constexpr const char* kRngState = "rng.state";

}  // namespace

void Checkpoint::put(std::string name, const Tensor& value) { put(std::move(name), value.shape(), value.values()); }

void Checkpoint::put(std::string name, Shape shape, std::vector<double> payload) {
  if (payload.size() != shape_size(shape))
    throw std::invalid_argument("checkpoint section " + name + ": payload does not match shape");
  for (auto& s : sections_)
    if (s.name == name) {
      s.shape = std::move(shape);
      s.payload = std::move(payload);
      return;
    }
  sections_.push_back(Section{std::move(name), std::move(shape), std::move(payload)});
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.name == name) return true;
  return false;
}

const Section& Checkpoint::at(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.name == name) return s;
  throw std::out_of_range("checkpoint has no section " + name);
}

Tensor Checkpoint::tensor(const std::string& name) const {
  const Section& s = at(name);
  return Tensor(s.shape, s.payload);
}

void Checkpoint::write(std::ostream& out) const {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put_le<std::uint8_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(sections_.size()));
  for (const Section& s : sections_) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.name.size()));
    out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.shape.size()));
    for (std::size_t d : s.shape) put_le<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(s.payload.data()),
              static_cast<std::streamsize>(s.payload.size() * sizeof(double)));
  }
}

Checkpoint Checkpoint::read(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic)
    throw std::runtime_error("not a checkpoint: bad magic bytes");
  const auto version = get_le<std::uint8_t>(in, "version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(in, "section count");
  Checkpoint ck;
  for (std::uint32_t i = 0; i < count; ++i) {
    Section s;
    s.name.resize(get_le<std::uint32_t>(in, "name length"));
    if (!in.read(s.name.data(), static_cast<std::streamsize>(s.name.size())))
      throw std::runtime_error("checkpoint truncated in section name");
    const auto rank = get_le<std::uint32_t>(in, "rank");
    if (rank > 16) throw std::runtime_error("checkpoint section " + s.name + " has implausible rank");
    for (std::uint32_t r = 0; r < rank; ++r) s.shape.push_back(get_le<std::uint64_t>(in, "dimension"));
    s.payload.resize(shape_size(s.shape));
    if (!in.read(reinterpret_cast<char*>(s.payload.data()),
                 static_cast<std::streamsize>(s.payload.size() * sizeof(double))))
      throw std::runtime_error("checkpoint truncated in payload of " + s.name);
    ck.sections_.push_back(std::move(s));
  }
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write(out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read(in);
}

void store_model(Checkpoint& ck, const std::string& prefix, const Model& model) {
  const ModelConfig& c = model.config();
  std::vector<double> meta{double(c.input_channels), double(c.height), double(c.width), double(c.head_width),
                           double(c.classes), double(c.blocks.size())};
  for (const ConvBlock& b : c.blocks) {
    meta.insert(meta.end(), {double(b.kernel), double(b.filters), double(b.stride), b.pool ? 1.0 : 0.0});
  }
  ck.put(prefix + ".meta", {meta.size()}, meta);
  for (const auto& [name, value] : model.parameters()) ck.put(prefix + ".param." + name, value);
}

Model load_model(const Checkpoint& ck, const std::string& prefix) {
  const auto& m = ck.at(prefix + ".meta").payload;
  if (m.size() < 6) throw std::runtime_error("malformed model metadata in " + prefix);
  auto z = [](double v) { return static_cast<std::size_t>(v); };
  ModelConfig c;
  c.input_channels = z(m[0]);
  c.height = z(m[1]);
  c.width = z(m[2]);
  c.head_width = z(m[3]);
  c.classes = z(m[4]);
  c.blocks.clear();
  const std::size_t nb = z(m[5]);
  if (m.size() != 6 + 4 * nb) throw std::runtime_error("malformed model metadata in " + prefix);
  for (std::size_t i = 0; i < nb; ++i)
    c.blocks.push_back({z(m[6 + 4 * i]), z(m[7 + 4 * i]), z(m[8 + 4 * i]), m[9 + 4 * i] != 0.0});
  Model model(c);
  for (auto& [name, value] : model.parameters()) {
    Tensor t = ck.tensor(prefix + ".param." + name);
    if (t.shape() != value.shape()) throw ShapeError("checkpoint parameter " + name, t.shape(), value.shape());
    value = std::move(t);
  }
  return model;
}

void store_tables(Checkpoint& ck, const LookupTables& tables) {
  const double param = tables.kind() == TableKind::full ? double(tables.dim()) : double(tables.cmp_rate());
  ck.put(kTablesMeta, {2}, {double(static_cast<int>(tables.kind())), param});
  for (std::size_t ch = 0; ch < 3; ++ch) ck.put(std::string(kTableParamNames[ch]), tables.table(ch));
}

std::optional<LookupTables> load_tables(const Checkpoint& ck) {
  if (!ck.has(kTablesMeta)) return std::nullopt;
  const auto& meta = ck.at(kTablesMeta).payload;
  if (meta.size() != 2) throw std::runtime_error("malformed table metadata");
  const auto kind = static_cast<TableKind>(static_cast<int>(meta[0]));
  if (kind != TableKind::full && kind != TableKind::compressed) throw std::runtime_error("unknown table kind");
  std::array<Tensor, 3> t;
  for (std::size_t ch = 0; ch < 3; ++ch) t[ch] = ck.tensor(std::string(kTableParamNames[ch]));
  return LookupTables::from_tables(kind, static_cast<int>(meta[1]), std::move(t));
}

void store_standardizer(Checkpoint& ck, const Standardizer& s) {
  std::vector<double> v{s.mode == StandardizeMode::per_image ? 0.0 : 1.0, s.epsilon_guard ? 1.0 : 0.0, s.epsilon};
  v.insert(v.end(), s.stats.mean.begin(), s.stats.mean.end());
  v.insert(v.end(), s.stats.stddev.begin(), s.stats.stddev.end());
  ck.put(kInputStats, {v.size()}, v);
}

Standardizer load_standardizer(const Checkpoint& ck) {
  const auto& v = ck.at(kInputStats).payload;
  if (v.size() != 9) throw std::runtime_error("malformed input statistics section");
  Standardizer s;
  s.mode = v[0] == 0.0 ? StandardizeMode::per_image : StandardizeMode::dataset;
  s.epsilon_guard = v[1] != 0.0;
  s.epsilon = v[2];
  for (std::size_t ch = 0; ch < 3; ++ch) {
    s.stats.mean[ch] = v[3 + ch];
    s.stats.stddev[ch] = v[6 + ch];
  }
  return s;
}

void store_optimizer(Checkpoint& ck, const std::string& prefix, const SgdMomentum& optim) {
  for (const auto& [name, v] : optim.velocities()) ck.put(prefix + ".velocity." + name, v);
}

void load_optimizer(const Checkpoint& ck, const std::string& prefix, SgdMomentum& optim) {
  const std::string key = prefix + ".velocity.";
  for (const Section& s : ck.sections())
    if (s.name.rfind(key, 0) == 0) optim.velocities()[s.name.substr(key.size())] = Tensor(s.shape, s.payload);
}

void store_rng(Checkpoint& ck, const std::mt19937_64& rng) {
  std::ostringstream text;
  text << rng;
  std::istringstream words(text.str());
  std::vector<double> payload;
  for (std::uint64_t w; words >> w;) payload.push_back(std::bit_cast<double>(w));
  ck.put(kRngState, {payload.size()}, payload);
}

std::mt19937_64 load_rng(const Checkpoint& ck) {
  std::ostringstream text;
  for (double d : ck.at(kRngState).payload) text << std::bit_cast<std::uint64_t>(d) << ' ';
  std::istringstream in(text.str());
  std::mt19937_64 rng;
  if (!(in >> rng)) throw std::runtime_error("malformed RNG state section");
  return rng;
}

}  // namespace lvnet
