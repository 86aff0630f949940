#include "pdmm/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <string>

#include "pdmm/errors.hpp"

namespace pdmm {

namespace {
std::string edge_name(int i, int j) {
  return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}
}  // namespace

int Graph::edge_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(i, j));
  if (it == edges.end() || *it != std::make_pair(i, j)) return -1;
  return static_cast<int>(it - edges.begin());
}

Graph build_graph(int node_count, const std::vector<std::pair<int, int>>& edge_list) {
  if (node_count <= 0) throw ValidationError("graph: node_count must be positive");

  std::set<std::pair<int, int>> seen;
  for (auto [i, j] : edge_list) {
    if (i == j) throw ValidationError("graph: self-loop at edge " + edge_name(i, j));
    if (i < 0 || j < 0 || i >= node_count || j >= node_count)
      throw ValidationError("graph: node id out of range in edge " + edge_name(i, j));
    auto e = std::minmax(i, j);
    if (!seen.insert(e).second)
      throw ValidationError("graph: duplicate edge " + edge_name(e.first, e.second));
  }

  Graph g;
  g.node_count = node_count;
  g.edges.assign(seen.begin(), seen.end());
  g.adjacency.assign(node_count, {});
  for (auto [i, j] : g.edges) {
    g.adjacency[i].push_back(j);
    g.adjacency[j].push_back(i);
  }
  for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
  return g;
}

bool is_tree(const Graph& g) {
  if (g.edge_count() != g.node_count - 1) return false;
  // connectivity check by BFS from node 0
  std::vector<char> visited(g.node_count, 0);
  std::queue<int> q;
  q.push(0);
  visited[0] = 1;
  int count = 1;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int u : g.neighbors(v)) {
      if (!visited[u]) {
        visited[u] = 1;
        ++count;
        q.push(u);
      }
    }
  }
  return count == g.node_count;
}

bool is_chain(const Graph& g) {
  if (!is_tree(g)) return false;
  for (int i = 0; i < g.node_count; ++i)
    if (g.neighbors(i).size() > 2) return false;
  return true;
}

Orientation orient_to_root(const Graph& g, int root) {
  if (root < 0 || root >= g.node_count)
    throw ValidationError("orientation: root " + std::to_string(root) + " out of range");
  if (!is_tree(g))
    throw ValidationError("orientation: graph is not a tree; tree-optimal weighting requires one");

  Orientation o;
  o.root = root;
  o.dist.assign(g.node_count, -1);
  o.dist[root] = 0;
  std::queue<int> q;
  q.push(root);
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int u : g.neighbors(v)) {
      if (o.dist[u] < 0) {
        o.dist[u] = o.dist[v] + 1;
        o.directed_edges.emplace_back(u, v);
        q.push(u);
      }
    }
  }
  std::sort(o.directed_edges.begin(), o.directed_edges.end());
  o.graph_radius = *std::max_element(o.dist.begin(), o.dist.end());
  return o;
}

}  // namespace pdmm
