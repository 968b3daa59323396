#include <doctest.h>

#include "ceunet/error.hpp"
#include "ceunet/patching.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ceunet;

using testing::random_scene;

TEST_CASE("cpc matches the nested-loop oracle bit for bit") {
  Rng rng(11);
  std::uniform_int_distribution<std::size_t> side(1, 20), bands(1, 8);
  for (int rep = 0; rep < 40; ++rep) {
    const Dataset d = random_scene(rng, side(rng), side(rng), bands(rng), 5, 0.3);
    if (d.truth.labeled_count() == 0) continue;
    for (std::size_t n : {1u, 2u, 3u, 5u, 10u}) {
      const PatchDataset got = extract_cpc(d.cube, d.truth, PatchConfig{n, PatchMode::Cpc, PadPolicy::Zero});
      const PatchDataset want = oracle::naive_cpc(d.cube, d.truth, n);
      REQUIRE(got.size() == d.truth.labeled_count());
      CHECK(got.patches == want.patches);
      CHECK(got.labels == want.labels);
      CHECK(got.coords == want.coords);
      const std::size_t centre = (n / 2) * n + n / 2;
      for (std::size_t i = 0; i < got.size(); ++i) {
        const auto px = d.cube.pixel(got.coords[i].row, got.coords[i].col);
        CHECK(std::equal(px.begin(), px.end(), got.patch(i).begin() + static_cast<long>(centre * got.dim)));
      }
    }
  }
}

TEST_CASE("5x5 fully labelled cube with n=3") {
  HsiCube c("c", 5, 5, 2);
  std::fill(c.data.begin(), c.data.end(), 1.0f);
  GroundTruth g(5, 5, 1);
  std::fill(g.labels.begin(), g.labels.end(), 1);
  const PatchDataset p = extract_cpc(c, g, PatchConfig{3, PatchMode::Cpc, PadPolicy::Zero});
  CHECK(p.size() == 25);
  std::size_t zero_cells = 0;
  for (std::size_t cell = 0; cell < 9; ++cell) zero_cells += p.patch(0)[cell * 2] == 0.0f ? 1 : 0;
  CHECK(zero_cells == 5);
}

TEST_CASE("n=1 patches are the pixel vectors") {
  Rng rng(5);
  const Dataset d = random_scene(rng, 6, 7, 3, 4, 0.4);
  const PatchDataset p = extract_cpc(d.cube, d.truth, PatchConfig{1, PatchMode::Cpc, PadPolicy::Zero});
  const LabeledPixelSet s = remove_background(d.cube, d.truth);
  CHECK(p.patches == s.samples);
  CHECK(p.labels == s.labels);
}

TEST_CASE("pad policy none rejects labelled border pixels") {
  HsiCube c("c", 6, 6, 1);
  GroundTruth g(6, 6, 1);
  g.labels[3 * 6 + 3] = 1;
  CHECK_NOTHROW(extract_cpc(c, g, PatchConfig{3, PatchMode::Cpc, PadPolicy::None}));
  g.labels[0] = 1;
  try {
    extract_cpc(c, g, PatchConfig{3, PatchMode::Cpc, PadPolicy::None});
    FAIL("border pixel accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Boundary);
  }
}

TEST_CASE("downsampling matches block enumeration") {
  Rng rng(13);
  std::uniform_int_distribution<std::size_t> side(1, 16);
  for (int rep = 0; rep < 200; ++rep) {
    const int m = 1 + rep % 3;
    Dataset d = random_scene(rng, side(rng), side(rng), 2, m, rep % 5 == 0 ? 1.0 : 0.3);
    for (std::size_t n : {1u, 2u, 3u, 4u}) {
      for (bool majority : {false, true}) {
        const auto want = oracle::blocks(d.cube, d.truth, n, majority);
        const PatchConfig pc{n, majority ? PatchMode::Majority : PatchMode::Exclusive, PadPolicy::Zero};
        if (want.empty()) {
          CHECK_THROWS_AS(majority ? downsample_majority(d.cube, d.truth, pc) : downsample_exclusive(d.cube, d.truth, pc),
                          Error);
          continue;
        }
        const Dataset got = majority ? downsample_majority(d.cube, d.truth, pc) : downsample_exclusive(d.cube, d.truth, pc);
        CHECK(got.cube.height == d.cube.height / n);
        CHECK(got.cube.width == d.cube.width / n);
        CHECK(got.truth.labeled_count() == want.size());
        for (const auto& b : want) {
          CHECK(got.truth.at(b.row, b.col) == b.label);
          const auto px = got.cube.pixel(b.row, b.col);
          for (std::size_t k = 0; k < px.size(); ++k) CHECK(px[k] == doctest::Approx(b.mean[k]).epsilon(1e-5));
        }
      }
    }
  }
}

TEST_CASE("downsampling examples") {
  HsiCube c("c", 2, 2, 1);
  c.data = {1, 2, 3, 6};
  GroundTruth g(2, 2, 2);
  const PatchConfig ex{2, PatchMode::Exclusive, PadPolicy::Zero};
  const PatchConfig mj{2, PatchMode::Majority, PadPolicy::Zero};

  g.labels = {1, 1, 1, 1};
  const Dataset u = downsample_exclusive(c, g, ex);
  CHECK(u.truth.labels == std::vector<std::uint16_t>{1});
  CHECK(u.cube.data == std::vector<float>{3.0f});

  g.labels = {1, 1, 1, 2};
  CHECK_THROWS_AS(downsample_exclusive(c, g, ex), Error);
  CHECK(downsample_majority(c, g, mj).truth.labels == std::vector<std::uint16_t>{1});

  g.labels = {1, 1, 2, 0};
  CHECK(downsample_majority(c, g, mj).truth.labels == std::vector<std::uint16_t>{1});
  g.labels = {2, 1, 0, 0};
  CHECK(downsample_majority(c, g, mj).truth.labels == std::vector<std::uint16_t>{1});
  g.labels = {0, 0, 0, 0};
  try {
    downsample_majority(c, g, mj);
    FAIL("background block kept");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyDataset);
  }

  HsiCube big("b", 4, 4, 1);
  GroundTruth gg(4, 4, 3);
  std::fill(gg.labels.begin(), gg.labels.end(), 3);
  const Dataset out = downsample_exclusive(big, gg, ex);
  CHECK(out.cube.height == 2);
  CHECK(out.cube.width == 2);
  CHECK(out.truth.labels == std::vector<std::uint16_t>{3, 3, 3, 3});
}

TEST_CASE("downsampling bound and n=1 degeneracy") {
  Rng rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    const Dataset d = random_scene(rng, 9, 11, 2, 2, 0.2);
    for (std::size_t n : {2u, 3u}) {
      const auto ex = oracle::blocks(d.cube, d.truth, n, false).size();
      const auto mj = oracle::blocks(d.cube, d.truth, n, true).size();
      CHECK(ex <= mj);
      CHECK(mj <= (9 / n) * (11 / n));
    }
    const PatchConfig one{1, PatchMode::Exclusive, PadPolicy::Zero};
    const Dataset e1 = downsample_exclusive(d.cube, d.truth, one);
    const Dataset m1 = downsample_majority(d.cube, d.truth, PatchConfig{1, PatchMode::Majority, PadPolicy::Zero});
    const LabeledPixelSet base = remove_background(d.cube, d.truth);
    CHECK(remove_background(e1.cube, e1.truth).samples == base.samples);
    CHECK(remove_background(m1.cube, m1.truth).labels == base.labels);
  }
}

TEST_CASE("patch datasets persist") {
  testing::TempDir dir;
  Rng rng(19);
  const Dataset d = random_scene(rng, 8, 8, 3, 3, 0.5);
  const PatchDataset p = extract_cpc(d.cube, d.truth, PatchConfig{4, PatchMode::Cpc, PadPolicy::Zero});
  save_patches(dir.path(), p);
  const PatchDataset back = load_patches(dir.path());
  CHECK(back.n == 4);
  CHECK(back.dim == 3);
  CHECK(back.patches == p.patches);
  CHECK(back.labels == p.labels);
  CHECK(back.coords == p.coords);
}

TEST_CASE("mode names") {
  CHECK(parse_patch_mode("cpc") == PatchMode::Cpc);
  CHECK(parse_patch_mode("majority") == PatchMode::Majority);
  CHECK(to_string(PatchMode::Exclusive) == "exclusive");
  CHECK_THROWS_AS(parse_patch_mode("tiles"), Error);
}
