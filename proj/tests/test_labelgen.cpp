#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "easal/labelgen.hpp"

using namespace easal;

namespace {

BinaryMap make_mask(int h, int w) {
  BinaryMap m;
  m.height = h;
  m.width = w;
  m.values.assign(static_cast<std::size_t>(h) * w, 0);
  return m;
}

BinaryMap centered_square_mask(int size, int x0, int y0, int side) {
  BinaryMap m = make_mask(size, size);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) m.set(y, x, 1);
  return m;
}

int chebyshev_to_boundary(int y, int x, int x0, int y0, int side) {
  // Distance to the analytic boundary set of the square (its outline).
  int best = 1 << 20;
  for (int by = y0; by < y0 + side; ++by)
    for (int bx = x0; bx < x0 + side; ++bx) {
      if (by != y0 && by != y0 + side - 1 && bx != x0 && bx != x0 + side - 1) continue;
      best = std::min(best, std::max(std::abs(by - y), std::abs(bx - x)));
    }
  return best;
}

}  // namespace

TEST_CASE("canny on flat masks produces no edges") {
  BinaryMap zeros = make_mask(32, 32);
  BinaryMap e0 = canny_edges(zeros);
  for (auto v : e0.values) CHECK(v == 0);

  BinaryMap ones = make_mask(32, 32);
  std::fill(ones.values.begin(), ones.values.end(), 1);
  // The one-pixel zero padding means a full-frame object still produces a
  // border ring, which is what keeps |Y_e| nonzero for such images.
  BinaryMap e1 = canny_edges(ones);
  bool any = false;
  for (auto v : e1.values) any = any || v;
  CHECK(any);
}

TEST_CASE("canny ring around a centered square") {
  const int x0 = 11, y0 = 11, side = 10;
  BinaryMap mask = centered_square_mask(32, x0, y0, side);
  BinaryMap edges = canny_edges(mask);

  int n_edges = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (edges.at(y, x)) {
        ++n_edges;
        CHECK(chebyshev_to_boundary(y, x, x0, y0, side) <= 1);
      }
  // A closed ring: at least the perimeter's worth of pixels.
  CHECK(n_edges >= 4 * (side - 1));

  // Every boundary pixel of the square is near a detected edge pixel.
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) {
      if (y != y0 && y != y0 + side - 1 && x != x0 && x != x0 + side - 1) continue;
      bool near = false;
      for (int dy = -1; dy <= 1 && !near; ++dy)
        for (int dx = -1; dx <= 1 && !near; ++dx)
          if (edges.at(y + dy, x + dx)) near = true;
      CHECK(near);
    }
}

TEST_CASE("canny rejects non-binary input") {
  Tensor t({1, 16, 16}, 0.5);
  CHECK_THROWS_AS(to_binary_mask(t), std::invalid_argument);
}

TEST_CASE("dilate_3x3") {
  BinaryMap single = make_mask(8, 8);
  single.set(3, 3, 1);
  BinaryMap d = dilate_3x3(single);
  int count = 0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      if (d.at(y, x)) {
        ++count;
        CHECK(std::abs(y - 3) <= 1);
        CHECK(std::abs(x - 3) <= 1);
      }
  CHECK(count == 9);

  // Clipped at the border.
  BinaryMap corner = make_mask(8, 8);
  corner.set(0, 0, 1);
  BinaryMap dc = dilate_3x3(corner);
  int corner_count = 0;
  for (auto v : dc.values) corner_count += v;
  CHECK(corner_count == 4);

  BinaryMap empty = make_mask(8, 8);
  BinaryMap de = dilate_3x3(empty);
  for (auto v : de.values) CHECK(v == 0);

  // Two pixels at Chebyshev distance 2: union of the two 3x3 blocks.
  BinaryMap two = make_mask(8, 8);
  two.set(3, 2, 1);
  two.set(3, 4, 1);
  BinaryMap dt = dilate_3x3(two);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const bool in_a = std::abs(y - 3) <= 1 && std::abs(x - 2) <= 1;
      const bool in_b = std::abs(y - 3) <= 1 && std::abs(x - 4) <= 1;
      CHECK(static_cast<bool>(dt.at(y, x)) == (in_a || in_b));
    }

  // Dilation output always contains its input.
  for (std::size_t i = 0; i < two.values.size(); ++i)
    if (two.values[i]) CHECK(dt.values[i] == 1);
}

TEST_CASE("three-category labels on an empty mask") {
  TriLabelMap m = three_category_labels(make_mask(32, 32));
  CHECK(m.counts[0] == 32u * 32u);
  CHECK(m.counts[1] == 0u);
  CHECK(m.counts[2] == 0u);
}

TEST_CASE("three-category labels on a centered square") {
  const int x0 = 11, y0 = 11, side = 10;
  BinaryMap mask = centered_square_mask(32, x0, y0, side);
  TriLabelMap m = three_category_labels(mask);

  CHECK(m.counts[0] + m.counts[1] + m.counts[2] == 32u * 32u);
  CHECK(m.counts[1] > 0);
  CHECK(m.counts[2] > 0);

  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const int label = m.at(y, x);
      const bool in_square = y >= y0 && y < y0 + side && x >= x0 && x < x0 + side;
      // gt=1 never falls back to background.
      if (in_square) CHECK(label != 0);
      // label 2 only inside the ground truth.
      if (label == 2) CHECK(in_square);
      // label 1 stays near the analytic boundary (Canny within distance 1,
      // plus one more for the dilation).
      if (label == 1) CHECK(chebyshev_to_boundary(y, x, x0, y0, side) <= 2);
    }

  // Deterministic relabeling.
  TriLabelMap again = three_category_labels(mask);
  CHECK(again.labels == m.labels);
  CHECK(again.counts == m.counts);
}

TEST_CASE("edge ring is at least 3 wide across straight boundary segments") {
  const int x0 = 10, y0 = 10, side = 12;
  BinaryMap mask = centered_square_mask(32, x0, y0, side);
  TriLabelMap m = three_category_labels(mask);
  // Cut through the middle of the left and top boundary edges.
  const int midy = y0 + side / 2;
  int run = 0, best = 0;
  for (int x = 0; x < 32; ++x) {
    if (m.at(midy, x) == 1 && x < x0 + side / 2) {
      ++run;
      best = std::max(best, run);
    } else if (x < x0 + side / 2) {
      run = 0;
    }
  }
  CHECK(best >= 3);
}

TEST_CASE("tri-label gray encoding round trip") {
  BinaryMap mask = centered_square_mask(32, 8, 8, 12);
  TriLabelMap m = three_category_labels(mask);
  TriLabelMap back = trilabel_from_gray(trilabel_to_gray(m));
  CHECK(back.labels == m.labels);
  CHECK(back.counts == m.counts);
}
