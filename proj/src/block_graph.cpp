#include "horolab/block_graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_set>

namespace horolab {

BlockGraph::BlockGraph(int H, int W, std::vector<Block> vertices,
                       std::vector<std::pair<std::size_t, std::size_t>> edges, bool closed)
    : H_(H), W_(W), vertices_(std::move(vertices)), edges_(std::move(edges)), closed_(closed) {
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (std::size_t i = 0; i < vertices_.size(); ++i) index_.emplace(vertices_[i].key(), i);
}

std::optional<std::size_t> BlockGraph::index_of(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool BlockGraph::has_edge(std::size_t from, std::size_t to) const {
  return std::binary_search(edges_.begin(), edges_.end(), std::make_pair(from, to));
}

std::vector<std::size_t> BlockGraph::successors(std::size_t v) const {
  std::vector<std::size_t> out;
  for (const auto& [a, b] : edges_)
    if (a == v) out.push_back(b);
  return out;
}

AdjacencyMatrix adjacency_matrix(const BlockGraph& graph) {
  AdjacencyMatrix m(graph.size(), graph.size(), 0);
  for (const auto& [from, to] : graph.edges()) m(to, from) = 1;
  return m;
}

BlockGraph enumerate_blocks(const GroupPtr& spec, const BlockShape& shape,
                            const std::vector<RayPrefix>& seed_rays, int depth) {
  std::map<std::string, Horofunction> reps;
  std::map<std::string, Block> blocks;
  std::set<std::pair<std::string, std::string>> edges;

  auto add = [&](const Horofunction& h, std::vector<std::string>& frontier) {
    Block b = block_of(h, shape);
    std::string key = b.key();
    if (blocks.count(key)) return key;
    blocks.emplace(key, std::move(b));
    reps.emplace(key, h);
    frontier.push_back(key);
    return key;
  };

  std::vector<std::string> frontier;
  for (const auto& ray : seed_rays) add(Horofunction::busemann(spec, ray), frontier);

  for (int sweep = 0; sweep < depth && !frontier.empty(); ++sweep) {
    std::sort(frontier.begin(), frontier.end());
    std::vector<std::string> next;
    for (const auto& key : frontier) {
      const Horofunction h = reps.at(key);
      const std::string parent_key = add(parent_horofunction(h), next);
      edges.emplace(parent_key, key);
      for (const auto& child : children(h)) edges.emplace(key, add(child, next));
    }
    frontier = std::move(next);
  }

  std::vector<std::string> keys;
  for (const auto& [k, b] : blocks) keys.push_back(k);
  std::sort(keys.begin(), keys.end(), block_key_less);
  std::map<std::string, std::size_t> pos;
  std::vector<Block> vertices;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    pos.emplace(keys[i], i);
    vertices.push_back(blocks.at(keys[i]));
  }
  std::vector<std::pair<std::size_t, std::size_t>> edge_list;
  for (const auto& [a, b] : edges) edge_list.emplace_back(pos.at(a), pos.at(b));
  return BlockGraph(shape.H, shape.W, std::move(vertices), std::move(edge_list),
                    frontier.empty());
}

std::vector<RayPrefix> sample_seed_rays(const GroupSpec& spec, const BlockShape& shape,
                                        std::size_t count, int depth, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RayPrefix> out;
  const int len = default_ray_length(spec, shape.H, shape.W, depth);
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_ray(spec, len, rng));
  return out;
}

bool is_reverse_walk(const BlockGraph& graph, const std::vector<Block>& coding) {
  for (std::size_t n = 0; n + 1 < coding.size(); ++n) {
    const auto to = graph.index_of(coding[n].key());
    const auto from = graph.index_of(coding[n + 1].key());
    if (!to || !from || !graph.has_edge(*from, *to)) return false;
  }
  return true;
}

namespace {

std::string coding_key(const std::vector<Block>& coding) {
  std::string s;
  for (const auto& b : coding) {
    s += b.key();
    s += '#';
  }
  return s;
}

}  // namespace

InjectivityReport coding_injectivity_test(const GroupPtr& spec, const BlockShape& shape,
                                          std::size_t samples, int depth, std::uint64_t seed) {
  InjectivityReport report;
  report.depth = depth;
  report.compare_radius = std::max(0, depth - (shape.H + shape.W + 1));
  const int len = default_ray_length(*spec, shape.H, shape.W, depth);
  Rng rng(seed);

  std::vector<RayPrefix> rays;
  std::unordered_set<Word> seen;
  for (std::size_t attempt = 0; rays.size() < samples && attempt < 50 * samples + 100; ++attempt) {
    RayPrefix r = random_ray(*spec, len, rng);
    if (seen.insert(r.word()).second) rays.push_back(std::move(r));
  }
  report.samples = rays.size();

  std::map<std::string, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < rays.size(); ++i) {
    const auto h = Horofunction::busemann(spec, rays[i]);
    buckets[coding_key(path_coding(h, depth, shape))].push_back(i);
  }
  report.distinct_codings = buckets.size();

  auto ball = std::make_shared<const Ball>(*spec, report.compare_radius);
  for (const auto& [code, members] : buckets) {
    if (members.size() < 2) continue;
    std::map<std::vector<int>, std::size_t> patches;
    for (std::size_t i : members) {
      const auto h = Horofunction::busemann(spec, rays[i]);
      auto p = HorofunctionPatch::tabulate(h, report.compare_radius, ball, true);
      patches.emplace(p.values(), i);
    }
    if (patches.size() > 1) {
      report.collisions += patches.size() - 1;
      if (report.witnesses.size() < 5) {
        auto it = patches.begin();
        const auto a = it->second;
        const auto b = (++it)->second;
        report.witnesses.push_back(spec->format(rays[a].word()) + " vs " +
                                   spec->format(rays[b].word()));
      }
    }
  }
  return report;
}

GraphConsistencyReport graph_consistency_check(const GroupPtr& spec, const BlockGraph& graph,
                                               std::size_t samples, int depth,
                                               std::uint64_t seed) {
  GraphConsistencyReport report;
  const auto shape = BlockShape::make(*spec, graph.H(), graph.W());
  Rng rng(seed);
  const int len = default_ray_length(*spec, shape.H, shape.W, depth);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto h = Horofunction::busemann(spec, random_ray(*spec, len, rng));
    ++report.samples;
    const Block b = block_of(h, shape);
    const auto v = graph.index_of(b.key());
    if (!v) {
      ++report.unknown_blocks;
      continue;
    }
    if (parent_at(h, Element{}) != spec->generator(b.parent_generator()))
      ++report.parent_label_mismatches;
    std::vector<std::size_t> kids;
    bool unknown = false;
    for (const auto& c : children(h)) {
      const auto ci = graph.index_of(block_of(c, shape).key());
      if (!ci) {
        unknown = true;
        break;
      }
      kids.push_back(*ci);
    }
    std::sort(kids.begin(), kids.end());
    if (unknown || kids != graph.successors(*v)) ++report.child_set_mismatches;
    if (!is_reverse_walk(graph, path_coding(h, depth, shape))) ++report.non_walks;
  }
  return report;
}

}  // namespace horolab
