#include "addcat/hdbscan.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace addcat::hdbscan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lambda_of(double distance) { return 1.0 / std::max(distance, kEpsilonDistance); }

void check_points(const Points& points) {
  if (points.empty()) throw std::invalid_argument("hdbscan: empty point set");
  const std::size_t d = points.front().size();
  if (d == 0) throw std::invalid_argument("hdbscan: zero-dimensional points");
  for (const auto& row : points)
    if (row.size() != d) throw std::invalid_argument("hdbscan: ragged point set");
}

struct UnionFind {
  std::vector<int> parent;
  std::vector<int> size;
  std::vector<int> node;  // dendrogram node id of each component root

  explicit UnionFind(int n) : parent(n), size(n, 1), node(n) {
    std::iota(parent.begin(), parent.end(), 0);
    std::iota(node.begin(), node.end(), 0);
  }

  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  void unite(int ra, int rb, int new_node) {
    if (size[ra] < size[rb]) std::swap(ra, rb);
    parent[rb] = ra;
    size[ra] += size[rb];
    node[ra] = new_node;
  }
};

}  // namespace

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    ss += d * d;
  }
  return std::sqrt(ss);
}

std::vector<double> core_distances(const Points& points, int min_samples) {
  check_points(points);
  const int n = static_cast<int>(points.size());
  if (min_samples < 1) throw std::invalid_argument("core_distances: min_samples must be >= 1");
  if (n < min_samples) throw std::invalid_argument("core_distances: fewer points than min_samples");

  std::vector<double> core(n, 0.0);
  if (min_samples == 1) return core;  // the point itself is its first neighbor

  std::vector<double> dists;
  dists.reserve(n - 1);
  for (int i = 0; i < n; ++i) {
    dists.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) dists.push_back(euclidean(points[i], points[j]));
    const std::size_t k = static_cast<std::size_t>(min_samples - 2);  // (min_samples-1)-th other
    std::nth_element(dists.begin(), dists.begin() + k, dists.end());
    core[i] = dists[k];
  }
  return core;
}

double mutual_reachability(double d_ab, double core_a, double core_b) {
  return std::max(d_ab, std::max(core_a, core_b));
}

std::vector<MstEdge> build_mst(const Points& points, const std::vector<double>& core) {
  check_points(points);
  const int n = static_cast<int>(points.size());
  if (n < 2) throw std::invalid_argument("build_mst: need at least two points");
  if (core.size() != points.size()) throw std::invalid_argument("build_mst: core size mismatch");

  std::vector<bool> in_tree(n, false);
  std::vector<double> key(n, kInf);
  std::vector<int> parent(n, 0);

  in_tree[0] = true;
  for (int v = 1; v < n; ++v)
    key[v] = mutual_reachability(euclidean(points[0], points[v]), core[0], core[v]);

  std::vector<MstEdge> edges;
  edges.reserve(n - 1);
  for (int step = 1; step < n; ++step) {
    int u = -1;
    for (int v = 0; v < n; ++v)
      if (!in_tree[v] && (u < 0 || key[v] < key[u])) u = v;  // strict: keeps smallest index on ties
    in_tree[u] = true;
    edges.push_back({std::min(parent[u], u), std::max(parent[u], u), key[u]});
    for (int v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double w = mutual_reachability(euclidean(points[u], points[v]), core[u], core[v]);
      if (w < key[v]) {
        key[v] = w;
        parent[v] = u;
      }
    }
  }
  return edges;
}

std::vector<DendrogramMerge> single_linkage(std::vector<MstEdge> edges, int n_points) {
  if (n_points < 2) throw std::invalid_argument("single_linkage: need at least two points");
  if (edges.size() != static_cast<std::size_t>(n_points - 1))
    throw std::invalid_argument("single_linkage: edge count is not n-1, input is not a spanning tree");
  for (const MstEdge& e : edges)
    if (e.a < 0 || e.b < 0 || e.a >= n_points || e.b >= n_points || e.a == e.b)
      throw std::invalid_argument("single_linkage: edge endpoint out of range");

  std::sort(edges.begin(), edges.end(), [](const MstEdge& x, const MstEdge& y) {
    const int xmin = std::min(x.a, x.b), xmax = std::max(x.a, x.b);
    const int ymin = std::min(y.a, y.b), ymax = std::max(y.a, y.b);
    return std::tie(x.weight, xmin, xmax) < std::tie(y.weight, ymin, ymax);
  });

  UnionFind uf(n_points);
  std::vector<DendrogramMerge> merges;
  merges.reserve(n_points - 1);
  for (const MstEdge& e : edges) {
    const int ra = uf.find(e.a);
    const int rb = uf.find(e.b);
    if (ra == rb)
      throw std::invalid_argument("single_linkage: cycle in input, not a spanning tree");
    const int left = std::min(uf.node[ra], uf.node[rb]);
    const int right = std::max(uf.node[ra], uf.node[rb]);
    const int new_node = n_points + static_cast<int>(merges.size());
    merges.push_back({left, right, e.weight, uf.size[ra] + uf.size[rb]});
    uf.unite(ra, rb, new_node);
  }
  return merges;
}

CondensedTree condense_tree(const std::vector<DendrogramMerge>& merges, int n_points,
                            int min_cluster_size) {
  if (min_cluster_size < 2)
    throw std::invalid_argument("condense_tree: min_cluster_size must be >= 2");
  if (merges.size() != static_cast<std::size_t>(n_points - 1))
    throw std::invalid_argument("condense_tree: dendrogram size mismatch");

  const int total_nodes = 2 * n_points - 1;
  const int root_node = total_nodes - 1;
  const auto node_size = [&](int node) {
    return node < n_points ? 1 : merges[node - n_points].size;
  };

  // Leaves of a dendrogram subtree, in depth-first left-first order.
  const auto collect_leaves = [&](int start, std::vector<int>& out) {
    std::vector<int> stack{start};
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node < n_points) {
        out.push_back(node);
        continue;
      }
      const auto& m = merges[node - n_points];
      stack.push_back(m.right);
      stack.push_back(m.left);
    }
  };

  CondensedTree tree;
  tree.n_points = n_points;

  std::vector<int> relabel(total_nodes, -1);
  relabel[root_node] = n_points;  // root cluster id
  int next_label = n_points + 1;

  std::vector<int> leaves;
  std::deque<int> queue{root_node};
  while (!queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    if (node < n_points || relabel[node] < 0) continue;  // point, or inside an eaten subtree

    const auto& m = merges[node - n_points];
    const double lam = lambda_of(m.distance);
    const int cluster = relabel[node];
    const int left_size = node_size(m.left);
    const int right_size = node_size(m.right);
    const bool keep_left = left_size >= min_cluster_size;
    const bool keep_right = right_size >= min_cluster_size;

    const auto fall_out = [&](int side) {
      leaves.clear();
      collect_leaves(side, leaves);
      for (int pt : leaves) tree.nodes.push_back({cluster, pt, lam, 1});
    };

    if (keep_left && keep_right) {
      relabel[m.left] = next_label++;
      tree.nodes.push_back({cluster, relabel[m.left], lam, left_size});
      relabel[m.right] = next_label++;
      tree.nodes.push_back({cluster, relabel[m.right], lam, right_size});
      queue.push_back(m.left);
      queue.push_back(m.right);
    } else if (keep_left) {
      relabel[m.left] = cluster;
      fall_out(m.right);
      queue.push_back(m.left);
    } else if (keep_right) {
      relabel[m.right] = cluster;
      fall_out(m.left);
      queue.push_back(m.right);
    } else {
      fall_out(m.left);
      fall_out(m.right);
    }
  }
  return tree;
}

Labeling extract_eom(const CondensedTree& condensed, bool allow_single_cluster,
                     int min_cluster_size) {
  const int n = condensed.n_points;
  const int root = condensed.root();

  int max_cluster = root;
  for (const CondensedNode& row : condensed.nodes)
    max_cluster = std::max({max_cluster, row.parent, row.child});
  const int n_clusters = max_cluster - root + 1;
  const auto cidx = [&](int cluster) { return cluster - root; };

  std::vector<double> birth(n_clusters, 0.0);
  std::vector<int> parent_of(n_clusters, -1);
  std::vector<std::vector<int>> children(n_clusters);
  std::vector<int> fallout_parent(n, root);
  for (const CondensedNode& row : condensed.nodes) {
    if (row.child < n) {
      fallout_parent[row.child] = row.parent;
    } else {
      birth[cidx(row.child)] = row.lambda;
      parent_of[cidx(row.child)] = row.parent;
      children[cidx(row.parent)].push_back(row.child);
    }
  }

  std::vector<double> stability(n_clusters, 0.0);
  for (const CondensedNode& row : condensed.nodes)
    stability[cidx(row.parent)] += (row.lambda - birth[cidx(row.parent)]) * row.child_size;

  // Bottom-up: child cluster ids are always larger than their parent's.
  std::vector<double> propagated(n_clusters, 0.0);
  std::vector<bool> picked(n_clusters, false);
  for (int c = max_cluster; c >= root; --c) {
    double child_sum = 0.0;
    for (int ch : children[cidx(c)]) child_sum += propagated[cidx(ch)];
    const bool root_eligible = allow_single_cluster && n >= min_cluster_size;
    const bool eligible = c != root || root_eligible;
    if (eligible && stability[cidx(c)] > child_sum) {
      picked[cidx(c)] = true;
      propagated[cidx(c)] = stability[cidx(c)];
    } else {
      propagated[cidx(c)] = child_sum;
    }
  }

  // The selected set is the outermost picked clusters.
  std::vector<bool> selected(n_clusters, false);
  std::deque<int> queue{root};
  while (!queue.empty()) {
    const int c = queue.front();
    queue.pop_front();
    if (picked[cidx(c)]) {
      selected[cidx(c)] = true;
      continue;
    }
    for (int ch : children[cidx(c)]) queue.push_back(ch);
  }

  // Each point belongs to the innermost selected cluster above its exit.
  Labeling out;
  out.labels.assign(n, -1);
  std::vector<int> owner(n, -1);  // selected cluster id per point
  for (int p = 0; p < n; ++p) {
    int c = fallout_parent[p];
    while (c >= root) {
      if (selected[cidx(c)]) {
        owner[p] = c;
        break;
      }
      c = parent_of[cidx(c)];
    }
  }

  struct ClusterInfo {
    int cluster;
    std::size_t size = 0;
    int first_point = -1;
  };
  std::vector<ClusterInfo> infos;
  std::vector<int> info_of(n_clusters, -1);
  for (int p = 0; p < n; ++p) {
    if (owner[p] < 0) continue;
    int& slot = info_of[cidx(owner[p])];
    if (slot < 0) {
      slot = static_cast<int>(infos.size());
      infos.push_back({owner[p], 0, p});
    }
    ++infos[slot].size;
  }
  std::sort(infos.begin(), infos.end(), [](const ClusterInfo& a, const ClusterInfo& b) {
    if (a.size != b.size) return a.size > b.size;
    return a.first_point < b.first_point;
  });

  std::vector<int> final_label(n_clusters, -1);
  for (std::size_t i = 0; i < infos.size(); ++i) {
    const int label = static_cast<int>(i);
    final_label[cidx(infos[i].cluster)] = label;
    out.cluster_sizes[label] = infos[i].size;
    out.stabilities[label] = stability[cidx(infos[i].cluster)];
  }
  for (int p = 0; p < n; ++p)
    if (owner[p] >= 0) out.labels[p] = final_label[cidx(owner[p])];
  return out;
}

std::size_t Labeling::noise_count() const {
  std::size_t count = 0;
  for (int l : labels)
    if (l < 0) ++count;
  return count;
}

Result run(const Points& points, const Params& params) {
  check_points(points);
  const int n = static_cast<int>(points.size());
  const int min_samples = params.effective_min_samples();
  if (params.min_cluster_size < 2)
    throw std::invalid_argument("hdbscan: min_cluster_size must be >= 2");
  if (min_samples < 1) throw std::invalid_argument("hdbscan: min_samples must be >= 1");
  if (n < 2 || n < min_samples)
    throw std::invalid_argument("hdbscan: need at least max(2, min_samples) points");

  const std::vector<double> core = core_distances(points, min_samples);
  const std::vector<MstEdge> mst = build_mst(points, core);
  const std::vector<DendrogramMerge> merges = single_linkage(mst, n);
  Result result;
  result.condensed = condense_tree(merges, n, params.min_cluster_size);
  result.labeling = extract_eom(result.condensed, params.allow_single_cluster,
                                params.min_cluster_size);
  return result;
}

void CondensedTree::write_json(std::ostream& out) const {
  nlohmann::ordered_json j;
  j["n_points"] = n_points;
  j["root"] = root();
  auto& rows = j["nodes"];
  rows = nlohmann::ordered_json::array();
  for (const CondensedNode& node : nodes) {
    nlohmann::ordered_json row;
    row["parent"] = node.parent;
    row["child"] = node.child;
    row["lambda"] = node.lambda;
    row["child_size"] = node.child_size;
    rows.push_back(std::move(row));
  }
  out << j.dump(2) << "\n";
}

}  // namespace addcat::hdbscan
