#include "easal/rbd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "easal/image.hpp"

namespace easal {

namespace {

struct LabImage {
  int h = 0, w = 0;
  std::vector<std::array<double, 3>> px;
  const std::array<double, 3>& at(int y, int x) const { return px[static_cast<std::size_t>(y) * w + x]; }
};

LabImage to_lab(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw std::invalid_argument("rbd: expected 3xHxW sRGB image");
  LabImage lab;
  lab.h = image.dim(1);
  lab.w = image.dim(2);
  lab.px.resize(static_cast<std::size_t>(lab.h) * lab.w);
  for (int y = 0; y < lab.h; ++y)
    for (int x = 0; x < lab.w; ++x)
      lab.px[static_cast<std::size_t>(y) * lab.w + x] =
          srgb_to_lab(image.at(0, y, x), image.at(1, y, x), image.at(2, y, x));
  return lab;
}

double lab_dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double dl = a[0] - b[0], da = a[1] - b[1], db = a[2] - b[2];
  return std::sqrt(dl * dl + da * da + db * db);
}

struct Cluster {
  double L = 0, a = 0, b = 0, x = 0, y = 0;
  int count = 0;
};

}  // namespace

double region_color_distance(const Region& a, const Region& b) { return lab_dist(a.mean_lab, b.mean_lab); }

SuperpixelGraph slic_superpixels(const Tensor& image, int k_regions, double compactness) {
  const LabImage lab = to_lab(image);
  const int h = lab.h, w = lab.w;
  if (h < 16 || w < 16)
    throw std::invalid_argument("slic: image too small (" + std::to_string(h) + "x" + std::to_string(w) +
                                "), need at least 16x16");
  if (k_regions < 4) throw std::invalid_argument("slic: k_regions must be >= 4");

  const double step = std::sqrt(static_cast<double>(h) * w / k_regions);
  const int grid_y = std::max(1, static_cast<int>(std::lround(h / step)));
  const int grid_x = std::max(1, static_cast<int>(std::lround(w / step)));

  std::vector<Cluster> clusters;
  clusters.reserve(static_cast<std::size_t>(grid_y) * grid_x);
  for (int gy = 0; gy < grid_y; ++gy) {
    for (int gx = 0; gx < grid_x; ++gx) {
      const int cy = std::min(h - 1, static_cast<int>((gy + 0.5) * h / grid_y));
      const int cx = std::min(w - 1, static_cast<int>((gx + 0.5) * w / grid_x));
      const auto& c = lab.at(cy, cx);
      clusters.push_back({c[0], c[1], c[2], static_cast<double>(cx), static_cast<double>(cy), 0});
    }
  }

  const double inv_step2 = (compactness * compactness) / (step * step);
  std::vector<int> assign(static_cast<std::size_t>(h) * w, 0);
  std::vector<double> best(assign.size());

  const int iters = 10;
  const int window = static_cast<int>(std::ceil(step)) + 1;
  for (int it = 0; it < iters; ++it) {
    std::fill(best.begin(), best.end(), std::numeric_limits<double>::max());
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
      const Cluster& c = clusters[ci];
      const int y0 = std::max(0, static_cast<int>(c.y) - window), y1 = std::min(h - 1, static_cast<int>(c.y) + window);
      const int x0 = std::max(0, static_cast<int>(c.x) - window), x1 = std::min(w - 1, static_cast<int>(c.x) + window);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const auto& p = lab.at(y, x);
          const double dl = p[0] - c.L, da = p[1] - c.a, db = p[2] - c.b;
          const double dx = x - c.x, dy = y - c.y;
          const double d = dl * dl + da * da + db * db + (dx * dx + dy * dy) * inv_step2;
          const std::size_t idx = static_cast<std::size_t>(y) * w + x;
          if (d < best[idx]) {
            best[idx] = d;
            assign[idx] = static_cast<int>(ci);
          }
        }
      }
    }
    std::vector<Cluster> next(clusters.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        Cluster& c = next[assign[static_cast<std::size_t>(y) * w + x]];
        const auto& p = lab.at(y, x);
        c.L += p[0];
        c.a += p[1];
        c.b += p[2];
        c.x += x;
        c.y += y;
        c.count += 1;
      }
    }
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
      if (next[ci].count == 0) continue;  // empty cluster keeps its old center
      const double n = next[ci].count;
      clusters[ci] = {next[ci].L / n, next[ci].a / n, next[ci].b / n, next[ci].x / n, next[ci].y / n, next[ci].count};
    }
  }

  // Connectivity enforcement: flood-fill connected components of the
  // assignment; fragments smaller than step^2/4 merge into the adjacent
  // component with the nearest mean color.
  const int min_size = std::max(1, static_cast<int>(step * step / 4.0));
  std::vector<int> comp(assign.size(), -1);
  std::vector<std::array<double, 3>> comp_mean;
  std::vector<int> comp_size;
  std::vector<int> stack;
  int n_comp = 0;
  for (int sy = 0; sy < h; ++sy) {
    for (int sx = 0; sx < w; ++sx) {
      const std::size_t sidx = static_cast<std::size_t>(sy) * w + sx;
      if (comp[sidx] >= 0) continue;
      const int cluster_id = assign[sidx];
      stack.clear();
      stack.push_back(static_cast<int>(sidx));
      comp[sidx] = n_comp;
      std::vector<int> members{static_cast<int>(sidx)};
      std::vector<int> adj_comps;
      std::array<double, 3> mean{0, 0, 0};
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int y = idx / w, x = idx % w;
        const auto& p = lab.at(y, x);
        mean[0] += p[0];
        mean[1] += p[1];
        mean[2] += p[2];
        const int dy4[4] = {-1, 1, 0, 0}, dx4[4] = {0, 0, -1, 1};
        for (int d = 0; d < 4; ++d) {
          const int ny = y + dy4[d], nx = x + dx4[d];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
          if (comp[nidx] == n_comp) continue;
          if (comp[nidx] >= 0) {
            adj_comps.push_back(comp[nidx]);
          } else if (assign[nidx] == cluster_id) {
            comp[nidx] = n_comp;
            members.push_back(static_cast<int>(nidx));
            stack.push_back(static_cast<int>(nidx));
          }
        }
      }
      const double n = static_cast<double>(members.size());
      mean = {mean[0] / n, mean[1] / n, mean[2] / n};
      if (static_cast<int>(members.size()) < min_size && !adj_comps.empty()) {
        int target = adj_comps[0];
        double best_d = std::numeric_limits<double>::max();
        for (int ac : adj_comps) {
          const double d = lab_dist(mean, comp_mean[ac]);
          if (d < best_d) {
            best_d = d;
            target = ac;
          }
        }
        for (int m : members) comp[m] = target;
        const double tn = comp_size[target];
        comp_mean[target] = {(comp_mean[target][0] * tn + mean[0] * n) / (tn + n),
                             (comp_mean[target][1] * tn + mean[1] * n) / (tn + n),
                             (comp_mean[target][2] * tn + mean[2] * n) / (tn + n)};
        comp_size[target] += static_cast<int>(members.size());
      } else {
        comp_mean.push_back(mean);
        comp_size.push_back(static_cast<int>(members.size()));
        ++n_comp;
      }
    }
  }

  SuperpixelGraph graph;
  graph.height = h;
  graph.width = w;
  graph.labels.assign(comp.begin(), comp.end());
  graph.regions.resize(n_comp);

  std::vector<std::array<double, 5>> acc(n_comp, {0, 0, 0, 0, 0});  // L,a,b,x,y sums
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int r = graph.label_at(y, x);
      Region& reg = graph.regions[r];
      reg.pixel_count += 1;
      if (y == 0 || y == h - 1 || x == 0 || x == w - 1) reg.boundary_contact_count += 1;
      const auto& p = lab.at(y, x);
      acc[r][0] += p[0];
      acc[r][1] += p[1];
      acc[r][2] += p[2];
      acc[r][3] += x;
      acc[r][4] += y;
    }
  }
  for (int r = 0; r < n_comp; ++r) {
    const double n = graph.regions[r].pixel_count;
    graph.regions[r].mean_lab = {acc[r][0] / n, acc[r][1] / n, acc[r][2] / n};
    graph.regions[r].centroid = {acc[r][3] / n / std::max(1, w - 1), acc[r][4] / n / std::max(1, h - 1)};
  }

  std::vector<std::vector<bool>> seen(n_comp, std::vector<bool>(n_comp, false));
  graph.adjacency.resize(n_comp);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int r = graph.label_at(y, x);
      if (x + 1 < w) {
        const int q = graph.label_at(y, x + 1);
        if (q != r && !seen[r][q]) {
          seen[r][q] = seen[q][r] = true;
          const double d = region_color_distance(graph.regions[r], graph.regions[q]);
          graph.adjacency[r].emplace_back(q, d);
          graph.adjacency[q].emplace_back(r, d);
        }
      }
      if (y + 1 < h) {
        const int q = graph.label_at(y + 1, x);
        if (q != r && !seen[r][q]) {
          seen[r][q] = seen[q][r] = true;
          const double d = region_color_distance(graph.regions[r], graph.regions[q]);
          graph.adjacency[r].emplace_back(q, d);
          graph.adjacency[q].emplace_back(r, d);
        }
      }
    }
  }
  for (auto& nbrs : graph.adjacency) std::sort(nbrs.begin(), nbrs.end());
  return graph;
}

namespace {

// Single-source shortest paths over the adjacency graph with edge cost d_app.
std::vector<double> dijkstra(const SuperpixelGraph& graph, int source) {
  const int n = graph.region_count();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  dist[source] = 0.0;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (const auto& [v, c] : graph.adjacency[u]) {
      const double nd = d + c;
      if (nd < dist[v]) {
        dist[v] = nd;
        pq.emplace(nd, v);
      }
    }
  }
  return dist;
}

}  // namespace

BndConScores geodesic_background_scores(const SuperpixelGraph& graph, double sigma_clr) {
  const int n = graph.region_count();
  BndConScores scores;
  scores.len_bnd.resize(n);
  scores.area.resize(n);
  scores.bndcon.resize(n);
  const double denom = 2.0 * sigma_clr * sigma_clr;
  for (int p = 0; p < n; ++p) {
    const std::vector<double> dist = dijkstra(graph, p);
    double area = 0.0, len = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(dist[i])) continue;  // unreachable contributes 0
      const double wgt = std::exp(-dist[i] * dist[i] / denom);
      area += wgt;
      if (graph.regions[i].boundary_contact_count > 0) len += wgt;
    }
    scores.area[p] = area;
    scores.len_bnd[p] = len;
    scores.bndcon[p] = len / std::sqrt(area);
  }
  return scores;
}

std::vector<double> background_probability(const BndConScores& scores, double delta_bndcon) {
  if (delta_bndcon <= 0.0) throw std::invalid_argument("background_probability: delta_bndcon must be > 0");
  std::vector<double> omega(scores.bndcon.size());
  const double denom = 2.0 * delta_bndcon * delta_bndcon;
  for (std::size_t i = 0; i < omega.size(); ++i)
    omega[i] = 1.0 - std::exp(-scores.bndcon[i] * scores.bndcon[i] / denom);
  return omega;
}

std::vector<double> weighted_contrast(const SuperpixelGraph& graph, const std::vector<double>& omega_bg,
                                      double sigma_spa) {
  const int n = graph.region_count();
  if (static_cast<int>(omega_bg.size()) != n)
    throw std::invalid_argument("weighted_contrast: omega_bg size does not match region count");
  std::vector<double> wctr(n, 0.0);
  const double denom = 2.0 * sigma_spa * sigma_spa;
  for (int p = 0; p < n; ++p) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      if (i == p) continue;
      const double dapp = region_color_distance(graph.regions[p], graph.regions[i]);
      const double dx = graph.regions[p].centroid[0] - graph.regions[i].centroid[0];
      const double dy = graph.regions[p].centroid[1] - graph.regions[i].centroid[1];
      const double wspa = std::exp(-(dx * dx + dy * dy) / denom);
      acc += dapp * wspa * omega_bg[i];
    }
    wctr[p] = acc;
  }
  return wctr;
}

Tensor rbd_saliency(const Tensor& image, const RbdParams& params) {
  const SuperpixelGraph graph = slic_superpixels(image, params.k_regions, params.compactness);
  const BndConScores scores = geodesic_background_scores(graph, params.sigma_clr);
  const std::vector<double> omega = background_probability(scores, params.delta_bndcon);
  std::vector<double> wctr = weighted_contrast(graph, omega, params.sigma_spa);

  const auto [mn_it, mx_it] = std::minmax_element(wctr.begin(), wctr.end());
  const double mn = *mn_it, mx = *mx_it;
  // A constant map normalizes to zero. The comparison needs slack: on a
  // perfectly uniform image the region means differ by accumulated rounding
  // only (1e-13 on the 0..100 Lab scale), and dividing by such a range
  // would amplify pure noise to full scale.
  if (mx - mn > 1e-9) {
    for (double& v : wctr) v = (v - mn) / (mx - mn);
  } else {
    std::fill(wctr.begin(), wctr.end(), 0.0);
  }

  Tensor out({1, graph.height, graph.width});
  for (int y = 0; y < graph.height; ++y)
    for (int x = 0; x < graph.width; ++x) out.at(0, y, x) = wctr[graph.label_at(y, x)];
  return out;
}

}  // namespace easal
