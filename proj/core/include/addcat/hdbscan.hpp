#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <vector>

namespace addcat::hdbscan {

// Row-major point set; every row must have the same dimension.
using Points = std::vector<std::vector<double>>;

struct Params {
  int min_cluster_size = 5;
  int min_samples = 0;  // 0 means "same as min_cluster_size"
  bool allow_single_cluster = false;

  int effective_min_samples() const { return min_samples > 0 ? min_samples : min_cluster_size; }
};

// Distances at or below this floor are treated as zero; the matching
// density cap is lambda = 1 / kEpsilonDistance.
constexpr double kEpsilonDistance = 1e-12;

struct MstEdge {
  int a;  // a < b
  int b;
  double weight;
};

// One agglomeration step. Node ids: 0..n-1 are points, n..2n-2 are merges
// in creation order.
struct DendrogramMerge {
  int left;
  int right;
  double distance;
  int size;
};

// Condensed hierarchy row: `child` leaves `parent` at density lambda.
// Cluster ids start at n_points (the root); point ids are below n_points.
struct CondensedNode {
  int parent;
  int child;
  double lambda;
  int child_size;
};

struct CondensedTree {
  int n_points = 0;
  std::vector<CondensedNode> nodes;

  int root() const { return n_points; }
  void write_json(std::ostream& out) const;
};

struct Labeling {
  std::vector<int> labels;  // -1 noise, clusters 0..K-1 by decreasing size
  std::map<int, std::size_t> cluster_sizes;
  std::map<int, double> stabilities;

  std::size_t noise_count() const;
  int cluster_count() const { return static_cast<int>(cluster_sizes.size()); }
};

double euclidean(const std::vector<double>& a, const std::vector<double>& b);

// Distance from each point to its min_samples-th nearest neighbor, the
// point itself counting as the first. Throws when n < min_samples or
// min_samples < 1.
std::vector<double> core_distances(const Points& points, int min_samples);

// max(core_a, core_b, d_ab); symmetric in a and b.
double mutual_reachability(double d_ab, double core_a, double core_b);

// Minimum spanning tree of the implicit complete mutual-reachability
// graph. Prim over the dense graph, O(n) extra memory, ties broken by
// smallest vertex index. Throws when n < 2.
std::vector<MstEdge> build_mst(const Points& points, const std::vector<double>& core);

// Edges processed in ascending (weight, min endpoint, max endpoint)
// order; union-find with new nodes numbered n, n+1, ..., 2n-2. Throws on
// anything that is not a spanning tree over n_points vertices.
std::vector<DendrogramMerge> single_linkage(std::vector<MstEdge> edges, int n_points);

// Top-down walk of the dendrogram. A split where both sides reach
// min_cluster_size creates two child clusters; otherwise the undersized
// side's points fall out at that level's lambda.
CondensedTree condense_tree(const std::vector<DendrogramMerge>& merges, int n_points,
                            int min_cluster_size);

// Excess-of-mass cluster selection over the condensed tree. A cluster is
// selected when its stability exceeds the summed stability of its
// selected descendants; the root is eligible only with
// allow_single_cluster (and only when it holds at least min_cluster_size
// points). Points under no selected cluster get label -1.
Labeling extract_eom(const CondensedTree& condensed, bool allow_single_cluster,
                     int min_cluster_size);

struct Result {
  Labeling labeling;
  CondensedTree condensed;
};

// Full pipeline: core distances, mutual-reachability MST, single linkage,
// condensation, excess-of-mass extraction. Deterministic for fixed input
// and params.
Result run(const Points& points, const Params& params);

}  // namespace addcat::hdbscan
