#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ceunet/error.hpp"
#include "ceunet/hsi_data.hpp"
#include "ceunet/io.hpp"
#include "support.hpp"

using namespace ceunet;

namespace {

Dataset random_dataset(Rng& rng, std::size_t h, std::size_t w, std::size_t b, int m) {
  Dataset d;
  d.cube = HsiCube("rand", h, w, b);
  d.cube.data = testing::uniform(rng, h * w * b, -5.0f, 20.0f);
  d.truth = GroundTruth(h, w, m);
  std::uniform_int_distribution<int> lab(0, m);
  for (auto& v : d.truth.labels) v = static_cast<std::uint16_t>(lab(rng));
  return d;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("dataset directory round trip and normalisation") {
  testing::TempDir dir;
  Rng rng(1);
  const Dataset d = random_dataset(rng, 7, 5, 4, 3);
  save_dataset(dir.path(), d.cube, d.truth);

  const Dataset raw = load_dataset(dir.path(), false);
  CHECK(raw.cube.data == d.cube.data);
  CHECK(raw.truth.labels == d.truth.labels);
  CHECK(raw.truth.num_classes == 3);
  CHECK(raw.cube.name == "rand");

  const Dataset norm = load_dataset(dir.path());
  for (std::size_t b = 0; b < 4; ++b) {
    float lo = 1e9f, hi = -1e9f;
    for (std::size_t p = 0; p < norm.cube.pixels(); ++p) {
      lo = std::min(lo, norm.cube.data[p * 4 + b]);
      hi = std::max(hi, norm.cube.data[p * 4 + b]);
    }
    CHECK(lo == 0.0f);
    CHECK(hi == doctest::Approx(1.0f));
  }
}

TEST_CASE("minimal 1x1x3 cube") {
  testing::TempDir dir;
  HsiCube c("tiny", 1, 1, 3);
  c.data = {0.1f, 0.2f, 0.3f};
  GroundTruth g(1, 1, 2);
  g.labels = {2};
  save_dataset(dir.path(), c, g);
  const Dataset d = load_dataset(dir.path(), false);
  CHECK(d.cube.height == 1);
  CHECK(d.cube.width == 1);
  CHECK(d.cube.bands == 3);
  CHECK(d.truth.num_classes >= 2);
  CHECK(d.truth.at(0, 0) == 2);
}

TEST_CASE("load errors") {
  testing::TempDir dir;
  CHECK(kind_of([&] { load_dataset(dir / "absent"); }) == ErrorKind::Load);

  Rng rng(2);
  Dataset d = random_dataset(rng, 4, 4, 2, 2);
  save_dataset(dir / "short", d.cube, d.truth);
  io::write_le<std::uint16_t>(dir / "short" / "labels.bin", std::vector<std::uint16_t>(15, 1));
  CHECK(kind_of([&] { load_dataset(dir / "short"); }) == ErrorKind::Integrity);

  save_dataset(dir / "nan", d.cube, d.truth);
  d.cube.data[5] = std::numeric_limits<float>::quiet_NaN();
  io::write_le<float>(dir / "nan" / "cube.bin", d.cube.data);
  CHECK(kind_of([&] { load_dataset(dir / "nan"); }) == ErrorKind::Data);

  std::filesystem::remove(dir / "short" / "cube.bin");
  CHECK(kind_of([&] { load_dataset(dir / "short"); }) == ErrorKind::Load);
}

TEST_CASE("background removal") {
  HsiCube c("g", 2, 2, 2);
  c.data = {1, 2, 3, 4, 5, 6, 7, 8};
  GroundTruth g(2, 2, 3);
  g.labels = {1, 0, 0, 3};
  const LabeledPixelSet s = remove_background(c, g);
  CHECK(s.size() == 2);
  CHECK(s.coords == std::vector<PixelCoord>{{0, 0}, {1, 1}});
  CHECK(s.labels == std::vector<int>{1, 3});
  CHECK(s.samples == std::vector<float>{1, 2, 7, 8});

  g.labels = {0, 0, 0, 0};
  CHECK(kind_of([&] { remove_background(c, g); }) == ErrorKind::EmptyDataset);
}

TEST_CASE("labelled set invariants on random grids") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Dataset d = random_dataset(rng, 3 + rep % 9, 2 + rep % 7, 1 + rep % 5, 4);
    if (d.truth.labeled_count() == 0) continue;
    const LabeledPixelSet s = remove_background(d.cube, d.truth);
    CHECK(s.size() == d.truth.labeled_count());
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s.labels[i] != 0);
      CHECK(s.labels[i] == d.truth.at(s.coords[i].row, s.coords[i].col));
      const auto px = d.cube.pixel(s.coords[i].row, s.coords[i].col);
      CHECK(std::equal(px.begin(), px.end(), s.sample(i).begin()));
      seen.insert({s.coords[i].row, s.coords[i].col});
      if (i > 0) {
        const auto a = s.coords[i - 1], b = s.coords[i];
        CHECK((a.row < b.row || (a.row == b.row && a.col < b.col)));
      }
    }
    CHECK(seen.size() == s.size());
  }
}

TEST_CASE("split sizes follow round-half-up arithmetic") {
  // round(n / 4) in integers: (n + 2) / 4.
  for (std::size_t n : {2u, 3u, 5u, 6u, 10u, 99u, 100u, 101u, 102u, 10249u, 54129u}) {
    CHECK(test_count(n, 0.25) == std::max<std::size_t>(1, (n + 2) / 4));
  }
  CHECK(test_count(100, 0.25) == 25);
  CHECK(test_count(10249, 0.25) == 2562);
}

TEST_CASE("random split is a deterministic partition") {
  const SplitSpec spec{0.25, 5, 42};
  for (int t = 0; t < 5; ++t) {
    const SplitIndices a = split_indices(1000, spec, t);
    const SplitIndices b = split_indices(1000, spec, t);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.test.size() == 250);
    CHECK(a.train.size() == 750);
    std::vector<std::size_t> all = a.train;
    all.insert(all.end(), a.test.begin(), a.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  }
  CHECK(split_indices(1000, spec, 0).test != split_indices(1000, spec, 1).test);
  CHECK(split_indices(1000, spec, 0).test != split_indices(1000, SplitSpec{0.25, 5, 43}, 0).test);

  CHECK(kind_of([] { split_indices(1, SplitSpec{}, 0); }) == ErrorKind::Split);
  CHECK(kind_of([] { split_indices(10, SplitSpec{}, 5); }) == ErrorKind::Split);
  CHECK(kind_of([] { split_indices(10, SplitSpec{}, -1); }) == ErrorKind::Split);
  CHECK(kind_of([] { split_indices(10, SplitSpec{1.0, 5, 0}, 0); }) == ErrorKind::Split);
}

TEST_CASE("random_split keeps samples, labels and coordinates together") {
  Rng rng(9);
  const Dataset d = random_dataset(rng, 12, 12, 3, 5);
  const LabeledPixelSet s = remove_background(d.cube, d.truth);
  const auto [train, test] = random_split(s, SplitSpec{0.25, 5, 1}, 2);
  CHECK(train.size() + test.size() == s.size());
  CHECK(test.size() == test_count(s.size(), 0.25));
  for (const auto* part : {&train, &test}) {
    for (std::size_t i = 0; i < part->size(); ++i) {
      const auto px = d.cube.pixel(part->coords[i].row, part->coords[i].col);
      CHECK(std::equal(px.begin(), px.end(), part->sample(i).begin()));
      CHECK(part->labels[i] == d.truth.at(part->coords[i].row, part->coords[i].col));
    }
  }
}

TEST_CASE("summary counts") {
  HsiCube c("s", 2, 3, 1);
  GroundTruth g(2, 3, 2);
  g.labels = {0, 1, 1, 2, 0, 0};
  const DatasetSummary s = summarize(c, g);
  CHECK(s.pixels == 6);
  CHECK(s.labeled == 3);
  CHECK(s.labeled_percent == doctest::Approx(50.0));
  CHECK(s.class_counts == std::vector<std::size_t>{2, 1});
  CHECK(format_summary(s).find("Labeled pixels") != std::string::npos);
}
