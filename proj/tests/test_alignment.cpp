#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "sstk/alignment.hpp"
#include "test_util.hpp"

using namespace sstk;

namespace {

// Independent oracle: destination slot of each source position from direct
// index arithmetic (row, col) -> (window, offset).
std::vector<Index> reorder_oracle(Index h, Index w, Index s) {
  std::vector<Index> out(static_cast<size_t>(h * w));
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      Index window = (r / s) * (w / s) + (c / s);
      Index offset = (r % s) * s + (c % s);
      out[static_cast<size_t>(window * s * s + offset)] = r * w + c;
    }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("alignment");

TEST_CASE("window_reorder matches the index-arithmetic oracle") {
  PatchGrid g4{4, 4, 2, 4};
  std::vector<int> in(16);
  std::iota(in.begin(), in.end(), 0);
  std::vector<int> got = window_reorder(in, g4);
  std::vector<int> expect{0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15};
  CHECK(got == expect);

  PatchGrid g1{2, 2, 2, 4};
  std::vector<int> in4{0, 1, 2, 3};
  CHECK(window_reorder(in4, g1) == in4);  // single window equals row-major

  PatchGrid gs1{3, 5, 1, 4};
  std::vector<int> in15(15);
  std::iota(in15.begin(), in15.end(), 0);
  CHECK(window_reorder(in15, gs1) == in15);  // s=1 is the identity

  for (Index h : {2, 4, 6, 8})
    for (Index w : {2, 4, 6, 8})
      for (Index s : {1, 2}) {
        PatchGrid grid{h, w, s, 4};
        auto perm = window_permutation(grid);
        CHECK(perm == reorder_oracle(h, w, s));
        // Bijectivity: sorting the output multiset recovers 0..N-1.
        auto sorted = perm;
        std::sort(sorted.begin(), sorted.end());
        for (Index i = 0; i < h * w; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
      }

  CHECK_THROWS_AS(window_reorder(std::vector<int>(15, 0), g4), AlignmentError);
  PatchGrid bad{3, 4, 2, 4};
  CHECK_THROWS_AS(window_permutation(bad), AlignmentError);
}

TEST_CASE("every reordered group covers exactly one merge window") {
  for (Index h : {2, 4, 6, 8})
    for (Index w : {2, 4, 6, 8})
      for (Index s : {1, 2}) {
        PatchGrid grid{h, w, s, 4};
        auto perm = window_permutation(grid);
        const Index win = s * s;
        for (Index k = 0; k < grid.merged(); ++k) {
          std::set<Index> group(perm.begin() + k * win, perm.begin() + (k + 1) * win);
          std::set<Index> expect;
          for (Index r = 0; r < h; ++r)
            for (Index c = 0; c < w; ++c)
              if ((r / s) * (w / s) + (c / s) == k) expect.insert(r * w + c);
          CHECK(group == expect);
        }
      }
}

TEST_CASE("strip_special_tokens keeps the trailing patch tokens per view") {
  auto make_tokens = [](int views, int regs, Index n) {
    Tensor t = Tensor::zeros({static_cast<Index>(views) * (1 + regs + n), 2});
    for (Index i = 0; i < t.outer(); ++i) t.at(i, 0) = static_cast<double>(i);
    return t;
  };

  Tensor one = make_tokens(1, 2, 16);
  Tensor out = strip_special_tokens(one, 1, 2, 16);
  CHECK(out.outer() == 16);
  for (Index i = 0; i < 16; ++i) CHECK(out.at(i, 0) == static_cast<double>(i + 3));

  Tensor r0 = strip_special_tokens(make_tokens(1, 0, 4), 1, 0, 4);
  CHECK(r0.outer() == 4);
  CHECK(r0.at(0, 0) == 1.0);

  // Two views: output equals the concatenation of per-view strips.
  Tensor two = make_tokens(2, 2, 16);
  Tensor both = strip_special_tokens(two, 2, 2, 16);
  CHECK(both.outer() == 32);
  for (int v = 0; v < 2; ++v) {
    Tensor view = slice_rows(two, v * 19, 19);
    Tensor solo = strip_special_tokens(view, 1, 2, 16);
    for (Index i = 0; i < 16; ++i)
      CHECK(both.at(static_cast<Index>(v) * 16 + i, 0) == solo.at(i, 0));
  }

  CHECK_THROWS_AS(strip_special_tokens(one, 1, 3, 16), AlignmentError);
}

TEST_CASE("plan_resolution scales then trims to the effective patch unit") {
  CHECK(plan_resolution(1000, 1000, 518, 14, 2) == std::pair<Index, Index>{504, 504});
  CHECK(plan_resolution(518, 1036, 518, 14, 2) == std::pair<Index, Index>{504, 1036});
  CHECK(plan_resolution(504, 504, 504, 14, 2) == std::pair<Index, Index>{504, 504});

  // Modularity and bounds hold across a sweep.
  Rng rng(31);
  for (int i = 0; i < 50; ++i) {
    Index hi = 100 + static_cast<Index>(rng.uniform_int(0, 900));
    Index wi = 100 + static_cast<Index>(rng.uniform_int(0, 900));
    auto [h, w] = plan_resolution(hi, wi, 518, 14, 2);
    CHECK(h % 28 == 0);
    CHECK(w % 28 == 0);
    double scale = 518.0 / static_cast<double>(std::min(hi, wi));
    CHECK(static_cast<double>(h) <= hi * scale + 0.5);
    CHECK(static_cast<double>(w) <= wi * scale + 0.5);
  }

  CHECK_THROWS_AS(plan_resolution(1000, 20, 518, 14, 2), ResolutionError);
  CHECK(plan_resolution(1036, 518, 518, 14, 2, ResizeSide::kLong) ==
        std::pair<Index, Index>{518 - 518 % 28, 252});
}

TEST_CASE("plan_frames clips the count and spreads indices uniformly") {
  FramePlan p = plan_frames(12, 2, 4, 8, 60);
  CHECK(p.k == 6);
  CHECK(p.indices == std::vector<Index>{0, 11, 23, 35, 47, 59});

  CHECK(plan_frames(100, 2, 4, 8, 60).k == 8);  // clipped to the upper bound
  CHECK(plan_frames(1, 2, 4, 8, 60).k == 4);    // clipped up to the lower bound

  Rng rng(13);
  for (int i = 0; i < 60; ++i) {
    int kmin = static_cast<int>(rng.uniform_int(1, 4));
    int kmax = kmin + static_cast<int>(rng.uniform_int(0, 4));
    Index frames = kmax + static_cast<Index>(rng.uniform_int(0, 40));
    FramePlan plan = plan_frames(rng.uniform() * 40, 1.7, kmin, kmax, frames);
    CHECK(plan.indices.front() >= 0);
    CHECK(plan.indices.back() <= frames - 1);
    for (size_t j = 1; j < plan.indices.size(); ++j)
      CHECK(plan.indices[j] > plan.indices[j - 1]);
  }

  CHECK_THROWS_AS(plan_frames(10, 2, 4, 8, 3), SamplingError);
  CHECK_THROWS_AS(plan_frames(10, 0.0, 4, 8, 60), SamplingError);
}

TEST_SUITE_END();
