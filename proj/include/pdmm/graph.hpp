#pragma once

#include <utility>
#include <vector>

namespace pdmm {

// Undirected graph over nodes 0..node_count-1. Edges are stored normalized
// as (min,max) pairs in ascending lexicographic order; adjacency lists are
// kept in ascending node-id order, which fixes every iteration order in the
// library deterministically.
struct Graph {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> adjacency;

  int edge_count() const { return static_cast<int>(edges.size()); }
  const std::vector<int>& neighbors(int i) const { return adjacency.at(i); }

  // Index of edge (i,j) in `edges`, or -1 if the edge does not exist.
  int edge_index(int i, int j) const;
  bool has_edge(int i, int j) const { return edge_index(i, j) >= 0; }
};

Graph build_graph(int node_count, const std::vector<std::pair<int, int>>& edge_list);

// Connected with exactly node_count-1 edges.
bool is_tree(const Graph& g);

// Tree whose nodes all have degree <= 2 (a path). A single node counts.
bool is_chain(const Graph& g);

// Root-based orientation of a tree: every edge is directed from the endpoint
// farther from the root towards the nearer one, so following outgoing edges
// from any node walks to the root.
struct Orientation {
  int root = 0;
  std::vector<int> dist;                           // hop distance to root
  std::vector<std::pair<int, int>> directed_edges; // [i,j] with dist(j) = dist(i)-1
  int graph_radius = 0;                            // max_i dist(i)
};

// BFS from `root` with ascending node-id neighbor order. Rejects non-trees.
Orientation orient_to_root(const Graph& g, int root);

}  // namespace pdmm
