#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "horolab/horofunction.hpp"
#include "horolab/linalg.hpp"

namespace horolab {

/// The block digraph: vertices in canonical (shortlex key) order, an edge
/// (B, C) when some h in C has Par(h) in B.
class BlockGraph {
 public:
  BlockGraph(int H, int W, std::vector<Block> vertices,
             std::vector<std::pair<std::size_t, std::size_t>> edges, bool closed);

  int H() const { return H_; }
  int W() const { return W_; }
  const std::vector<Block>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  /// Sorted, without duplicates; pairs are (from, to).
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  bool closed() const { return closed_; }

  std::optional<std::size_t> index_of(const std::string& key) const;
  bool has_edge(std::size_t from, std::size_t to) const;
  std::vector<std::size_t> successors(std::size_t v) const;

 private:
  int H_;
  int W_;
  std::vector<Block> vertices_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  bool closed_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// entries(C, B) = 1 iff the graph has an edge B -> C.
using AdjacencyMatrix = Matrix<int>;

AdjacencyMatrix adjacency_matrix(const BlockGraph& graph);

/// Closure of the seed blocks under parent and child transitions, at most
/// `depth` sweeps. closed() is false when the frontier was still nonempty.
BlockGraph enumerate_blocks(const GroupPtr& spec, const BlockShape& shape,
                            const std::vector<RayPrefix>& seed_rays, int depth);

/// `count` random rays of the length the enumeration depth needs.
std::vector<RayPrefix> sample_seed_rays(const GroupSpec& spec, const BlockShape& shape,
                                        std::size_t count, int depth, std::uint64_t seed);

/// P(h)(n) = Block(Par^n h) for n < length.
template <HorofunctionLike Hf>
std::vector<Block> path_coding(const Hf& h, int length, const BlockShape& shape) {
  std::vector<Block> out;
  if (length <= 0) return out;
  if (h.reach() != INT_MAX && h.reach() < length + shape.H + shape.W + 1)
    throw Error(ErrorCode::PatchTooSmall, "patch radius too small for the requested coding");
  Hf cur = h;
  for (int n = 0; n < length; ++n) {
    out.push_back(block_of(cur, shape));
    if (n + 1 < length) cur = parent_horofunction(cur);
  }
  return out;
}

/// True when consecutive coding entries are reverse-directed edges of the
/// graph, i.e. P(n+1) -> P(n).
bool is_reverse_walk(const BlockGraph& graph, const std::vector<Block>& coding);

struct InjectivityReport {
  std::size_t samples = 0;
  int depth = 0;
  int compare_radius = 0;
  std::size_t distinct_codings = 0;
  std::size_t collisions = 0;
  std::vector<std::string> witnesses;
  bool passed() const { return collisions == 0; }
};

/// Samples distinct rays; rays whose patches differ on B(e, depth-(H+W+1))
/// must have distinct codings of length `depth`.
InjectivityReport coding_injectivity_test(const GroupPtr& spec, const BlockShape& shape,
                                          std::size_t samples, int depth, std::uint64_t seed);

struct GraphConsistencyReport {
  std::size_t samples = 0;
  std::size_t unknown_blocks = 0;
  std::size_t parent_label_mismatches = 0;
  std::size_t child_set_mismatches = 0;
  std::size_t non_walks = 0;
  bool passed() const {
    return unknown_blocks == 0 && parent_label_mismatches == 0 && child_set_mismatches == 0 &&
           non_walks == 0;
  }
};

/// For sampled rays: the block is a vertex, Par_h(e) is the generator read off
/// the block, the child blocks are exactly the out-neighbours, and the coding
/// of length `depth` is a reverse walk.
GraphConsistencyReport graph_consistency_check(const GroupPtr& spec, const BlockGraph& graph,
                                               std::size_t samples, int depth,
                                               std::uint64_t seed);

}  // namespace horolab
