#include <cmath>
#include <random>

#include "doctest.h"
#include "lvnet/gradcheck.hpp"
#include "lvnet/lookup.hpp"
#include "lvnet/ops.hpp"

using namespace lvnet;

namespace {

ImageBatch random_images(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  ImageBatch b{n, h, w, std::vector<std::uint8_t>(n * 3 * h * w)};
  for (auto& p : b.pixels) p = static_cast<std::uint8_t>(d(rng));
  return b;
}

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = d(rng);
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("table initialization") {
  SUBCASE("full u=1 has 768 scalars in [-1,1]") {
    const auto t = LookupTables::full(1, 3);
    CHECK(t.parameter_count() == 768);
    for (const Tensor& tab : t.tables()) {
      CHECK(tab.shape() == Shape{256, 1});
      for (double v : tab.data()) CHECK((v >= -1.0 && v <= 1.0));
    }
  }
  SUBCASE("compressed sizes") {
    CHECK(LookupTables::compressed(256, 0).parameter_count() == 3);
    CHECK(LookupTables::compressed(128, 0).rows() == 2);
    CHECK(LookupTables::compressed(100, 0).rows() == 3);
    CHECK(LookupTables::compressed(1, 0).rows() == 256);
    CHECK(LookupTables::compressed(16, 0).rows() == 16);
  }
  SUBCASE("seeded and deterministic") {
    CHECK(LookupTables::full(2, 11) == LookupTables::full(2, 11));
    CHECK_FALSE(LookupTables::full(2, 11) == LookupTables::full(2, 12));
  }
  SUBCASE("entries look uniform") {
    const auto t = LookupTables::full(8, 5);
    double mean = 0.0, lo = 1.0, hi = -1.0;
    for (const Tensor& tab : t.tables())
      for (double v : tab.data()) {
        mean += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    mean /= double(t.parameter_count());
    CHECK(std::abs(mean) < 0.05);
    CHECK(lo < -0.95);
    CHECK(hi > 0.95);
  }
  SUBCASE("rate out of range") {
    CHECK_THROWS_AS(LookupTables::compressed(0, 0), std::out_of_range);
    CHECK_THROWS_AS(LookupTables::compressed(257, 0), std::out_of_range);
  }
}

TEST_CASE("compressed index") {
  CHECK(compressed_index(0, 7) == 0);
  CHECK(compressed_index(0, 256) == 0);
  CHECK(compressed_index(255, 16) == 15);
  CHECK(compressed_table_size(16) == 16);
  CHECK(compressed_index(255, 100) == 2);
  CHECK(compressed_table_size(100) == 3);
  for (int c = 1; c <= 256; ++c)
    for (int color = 0; color < 256; ++color) REQUIRE(compressed_index(color, c) < compressed_table_size(c));
  CHECK_THROWS(compressed_index(256, 4));
  CHECK_THROWS(compressed_index(-1, 4));
}

TEST_CASE("lookup forward examples") {
  SUBCASE("identity coding reproduces the image") {
    std::array<Tensor, 3> tabs;
    for (auto& t : tabs) {
      t = Tensor({256, 1});
      for (std::size_t v = 0; v < 256; ++v) t[v] = double(v);
    }
    const auto tables = LookupTables::from_tables(TableKind::full, 1, tabs);
    const ImageBatch img = random_images(2, 5, 4, 1);
    const auto r = lookup(img, tables);
    REQUIRE(r.values.shape() == Shape{2, 3, 5, 4});
    for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(r.values[i] == double(img.pixels[i]));
  }
  SUBCASE("u=2 single pixel expansion") {
    auto tables = LookupTables::full(2, 0);
    const double a = 0.25, b = -0.75;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      tables.table(ch)[5 * 2 + 0] = a;
      tables.table(ch)[5 * 2 + 1] = b;
    }
    const ImageBatch img{1, 1, 1, {5, 5, 5}};
    const auto r = lookup(img, tables);
    REQUIRE(r.values.shape() == Shape{1, 6, 1, 1});
    CHECK(r.values.values() == std::vector<double>{a, b, a, b, a, b});
  }
  SUBCASE("u=2 plane ordering on a multi-pixel image") {
    const auto tables = LookupTables::full(2, 9);
    const ImageBatch img = random_images(1, 3, 3, 2);
    const auto r = lookup(img, tables);
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t q = 0; q < 2; ++q)
        for (std::size_t p = 0; p < 9; ++p)
          CHECK(r.values[(ch * 2 + q) * 9 + p] == tables.table(ch)[img.pixels[ch * 9 + p] * 2 + q]);
  }
  SUBCASE("compressed tables use the bucket index") {
    const auto tables = LookupTables::compressed(16, 4);
    const ImageBatch img = random_images(3, 4, 4, 3);
    const auto r = lookup(img, tables);
    REQUIRE(r.values.shape() == Shape{3, 3, 4, 4});
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t p = 0; p < 16; ++p) {
          const std::size_t off = (n * 3 + ch) * 16 + p;
          CHECK(r.values[off] == tables.table(ch)[compressed_index(img.pixels[off], 16)]);
        }
  }
  SUBCASE("c=256 collapses every image to one constant tensor") {
    const auto tables = LookupTables::compressed(256, 6);
    const auto a = lookup(random_images(1, 6, 6, 10), tables);
    const auto b = lookup(random_images(1, 6, 6, 20), tables);
    CHECK(a.values == b.values);
  }
}

TEST_CASE("shape law holds for any image size") {
  for (std::size_t u : {1, 2, 5})
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 7}, {8, 8}}) {
      CHECK(lookup(random_images(2, h, w, u), LookupTables::full(u, 1)).values.shape() == Shape{2, 3 * u, h, w});
      CHECK(lookup(random_images(2, h, w, u), LookupTables::compressed(int(u) * 7, 1)).values.shape() ==
            Shape{2, 3, h, w});
    }
}

TEST_CASE("lookup backward examples") {
  const auto tables = LookupTables::full(1, 0);
  SUBCASE("one pixel") {
    const ImageBatch img{1, 1, 1, {7, 8, 9}};
    const auto r = lookup(img, tables);
    const auto g = lookup_backward(Tensor({1, 3, 1, 1}, 1.0), r.indices, tables);
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t v = 0; v < 256; ++v) CHECK(g[ch][v] == (v == 7 + ch ? 1.0 : 0.0));
  }
  SUBCASE("two pixels of one color accumulate") {
    const ImageBatch img{1, 1, 2, {4, 4, 1, 2, 3, 3}};
    const auto r = lookup(img, tables);
    const auto g = lookup_backward(Tensor({1, 3, 1, 2}, {1.0, 2.0, 0, 0, 0, 0}), r.indices, tables);
    CHECK(g[0][4] == 3.0);
    double rest = 0.0;
    for (std::size_t v = 0; v < 256; ++v)
      if (v != 4) rest += std::abs(g[0][v]);
    CHECK(rest == 0.0);
  }
}

TEST_CASE("table gradients match finite differences") {
  const ImageBatch img = random_images(1, 8, 8, 42);
  for (bool compressed : {false, true}) {
    const auto tables = compressed ? LookupTables::compressed(16, 3) : LookupTables::full(2, 3);
    const Tensor weights = random_tensor(lookup(img, tables).values.shape(), 77);
    auto loss = [&](const LookupTables& t) { return dot(lookup(img, t).values, weights); };
    const auto r = lookup(img, tables);
    const auto analytic = lookup_backward(weights, r.indices, tables);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const Tensor numeric = finite_diff_grad(
          [&](const Tensor& theta) {
            auto t = tables;
            t.table(ch) = theta;
            return loss(t);
          },
          tables.table(ch));
      CAPTURE(compressed);
      CHECK(max_relative_error(analytic[ch], numeric) < 1e-4);
    }
  }
}

TEST_CASE("tape lookup registers tables as parameters") {
  const ImageBatch img = random_images(2, 4, 4, 5);
  const auto tables = LookupTables::full(1, 1);
  Tape tape;
  Var x = lookup(tape, img, tables, true);
  const auto grads = tape.backward(sum(tape, x));
  std::vector<double> counts(256 * 3, 0.0);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t p = 0; p < 16; ++p) counts[ch * 256 + img.pixels[(n * 3 + ch) * 16 + p]] += 1.0;
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t v = 0; v < 256; ++v) CHECK(grads.at(std::string(kTableParamNames[ch]))[v] == counts[ch * 256 + v]);

  Tape frozen;
  const auto none = frozen.backward(sum(frozen, lookup(frozen, img, tables, false)));
  CHECK(none.empty());
}

TEST_CASE("gather and scatter are adjoint") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ImageBatch img = random_images(2, 5, 5, seed);
    auto tables = LookupTables::full(3, seed + 100);
    const auto r = lookup(img, tables);
    const Tensor g = random_tensor(r.values.shape(), seed + 200);
    const auto back = lookup_backward(g, r.indices, tables);
    // lookup is linear in T, so <lookup(x,E), G> = <E, lookup_backward(G)> exactly.
    std::array<Tensor, 3> e;
    double rhs = 0.0;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      e[ch] = random_tensor(tables.table(ch).shape(), seed * 10 + ch);
      rhs += dot(e[ch], back[ch]);
    }
    const double lhs = dot(lookup(img, LookupTables::from_tables(TableKind::full, 3, e)).values, g);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(lhs)));
  }
}

TEST_CASE("permuting table rows and recoloring leaves the output unchanged") {
  const ImageBatch img = random_images(2, 6, 6, 8);
  const auto tables = LookupTables::full(2, 12);
  const std::uint8_t a = img.pixels[0], b = static_cast<std::uint8_t>(a ^ 0x5A);
  auto swapped = tables;
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t q = 0; q < 2; ++q) std::swap(swapped.table(ch)[a * 2 + q], swapped.table(ch)[b * 2 + q]);
  ImageBatch recolored = img;
  for (auto& p : recolored.pixels) p = p == a ? b : p == b ? a : p;
  CHECK(lookup(img, tables).values == lookup(recolored, swapped).values);
}
