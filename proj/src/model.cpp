#include "hetnav/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace hetnav {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

const char* to_string(RelationType relation) {
  switch (relation) {
    case RelationType::HHI: return "HHI";
    case RelationType::HCRI: return "HCRI";
    case RelationType::HORI: return "HORI";
    case RelationType::CRORI: return "CRORI";
    case RelationType::ORORI: return "ORORI";
  }
  return "?";
}

HetGraph build_het_graph(int n_humans, int n_other_robots, Ablation ablation) {
  if (n_humans < 0 || n_other_robots < 0) {
    throw std::invalid_argument("build_het_graph: negative agent count");
  }
  HetGraph g;
  g.n_humans = n_humans;
  g.n_other_robots = n_other_robots;
  const bool homo = is_homogeneous(ablation);
  auto add = [&](RelationType rel, int a, int b) {
    auto& list = g.edges[homo ? 0 : static_cast<int>(rel)];
    list.emplace_back(a, b);
    list.emplace_back(b, a);
  };
  const auto human = [](int k) { return 1 + k; };
  const auto robot = [n_humans](int k) { return 1 + n_humans + k; };

  for (int i = 0; i < n_humans; ++i) {
    for (int j = i + 1; j < n_humans; ++j) add(RelationType::HHI, human(i), human(j));
  }
  for (int i = 0; i < n_humans; ++i) add(RelationType::HCRI, human(i), 0);
  for (int i = 0; i < n_humans; ++i) {
    for (int j = 0; j < n_other_robots; ++j) {
      add(RelationType::HORI, human(i), robot(j));
    }
  }
  for (int j = 0; j < n_other_robots; ++j) add(RelationType::CRORI, 0, robot(j));
  for (int i = 0; i < n_other_robots; ++i) {
    for (int j = i + 1; j < n_other_robots; ++j) {
      add(RelationType::ORORI, robot(i), robot(j));
    }
  }
  return g;
}

HetGraph build_het_graph(const JointObservation& obs, Ablation ablation) {
  return build_het_graph(static_cast<int>(obs.humans.size()),
                         static_cast<int>(obs.other_robots.size()), ablation);
}

std::vector<ad::Tensor*> ModelParams::tensors() {
  std::vector<ad::Tensor*> out{&embed_cr.w0, &embed_cr.b0, &embed_cr.w1,
                               &embed_cr.b1, &embed_h.w0,  &embed_h.b0,
                               &embed_h.w1,  &embed_h.b1};
  if (!is_homogeneous(ablation)) {
    out.insert(out.end(),
               {&embed_or.w0, &embed_or.b0, &embed_or.w1, &embed_or.b1});
  }
  for (GnnLayer& layer : gnn) {
    for (int i = 0; i < n_relations(); ++i) {
      out.push_back(&layer.w1[i]);
      out.push_back(&layer.w2[i]);
    }
  }
  out.insert(out.end(),
             {&value_head.w0, &value_head.b0, &value_head.w1, &value_head.b1,
              &value_head.w2, &value_head.b2, &value_head.w3, &value_head.b3});
  return out;
}

std::vector<const ad::Tensor*> ModelParams::tensors() const {
  auto mutable_view = const_cast<ModelParams*>(this)->tensors();
  return {mutable_view.begin(), mutable_view.end()};
}

std::vector<std::string> ModelParams::tensor_names() const {
  std::vector<std::string> names;
  for (const char* block : {"embed_cr", "embed_h"}) {
    for (const char* t : {"w0", "b0", "w1", "b1"}) {
      names.push_back(std::string(block) + "." + t);
    }
  }
  if (!is_homogeneous(ablation)) {
    for (const char* t : {"w0", "b0", "w1", "b1"}) {
      names.push_back(std::string("embed_or.") + t);
    }
  }
  for (int layer = 0; layer < 2; ++layer) {
    for (int i = 0; i < n_relations(); ++i) {
      const std::string rel =
          is_homogeneous(ablation)
              ? "ALL"
              : to_string(static_cast<RelationType>(i));
      const std::string base = "gnn" + std::to_string(layer) + "." + rel;
      names.push_back(base + ".w1");
      names.push_back(base + ".w2");
    }
  }
  for (const char* t : {"w0", "b0", "w1", "b1", "w2", "b2", "w3", "b3"}) {
    names.push_back(std::string("value.") + t);
  }
  return names;
}

ModelParams make_zero_params(Ablation ablation) {
  ModelParams p;
  p.ablation = ablation;
  const int d_peer = p.neighbor_input_dim();
  auto mlp2 = [](int d_in) {
    return Mlp2{ad::Tensor(d_in, kEmbedDim), ad::Tensor(1, kEmbedDim),
                ad::Tensor(kEmbedDim, kEmbedDim), ad::Tensor(1, kEmbedDim)};
  };
  p.embed_cr = mlp2(6);
  p.embed_h = mlp2(d_peer);
  if (!is_homogeneous(ablation)) p.embed_or = mlp2(d_peer);
  for (GnnLayer& layer : p.gnn) {
    layer.w1.assign(p.n_relations(), ad::Tensor(kEmbedDim, kEmbedDim));
    layer.w2.assign(p.n_relations(), ad::Tensor(kEmbedDim, kEmbedDim));
  }
  p.value_head =
      Mlp4{ad::Tensor(kEmbedDim, 128), ad::Tensor(1, 128),
           ad::Tensor(128, 64),        ad::Tensor(1, 64),
           ad::Tensor(64, 32),         ad::Tensor(1, 32),
           ad::Tensor(32, 1),          ad::Tensor(1, 1)};
  return p;
}

ModelParams init_params(Ablation ablation, RngStream& rng) {
  ModelParams p = make_zero_params(ablation);
  const auto names = p.tensor_names();
  auto slots = p.tensors();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    // Names end in ".w<k>" or ".b<k>"; only weights get random values.
    const char kind = names[i][names[i].rfind('.') + 1];
    if (kind != 'w') continue;
    ad::Tensor& w = *slots[i];
    const double bound = std::sqrt(6.0 / (w.rows + w.cols));
    for (double& v : w.data) v = rng.uniform(-bound, bound);
  }
  return p;
}

namespace {

// Offsets of the blocks inside StagedParams::all / ModelParams::tensors().
struct ParamIndex {
  int embed_cr = 0;
  int embed_h = 4;
  int embed_or = -1;
  int gnn0 = 0;
  int gnn1 = 0;
  int head = 0;
  int n_relations = 0;

  explicit ParamIndex(Ablation ablation) {
    const bool het = !is_homogeneous(ablation);
    n_relations = het ? kNumRelations : 1;
    embed_or = het ? 8 : -1;
    gnn0 = het ? 12 : 8;
    gnn1 = gnn0 + 2 * n_relations;
    head = gnn1 + 2 * n_relations;
  }
  int w1(int layer, int rel) const {
    return (layer == 0 ? gnn0 : gnn1) + 2 * rel;
  }
  int w2(int layer, int rel) const { return w1(layer, rel) + 1; }
};

ad::NodeId mlp2_graph(ad::Tape& tape, ad::NodeId x, const StagedParams& p,
                      int base) {
  ad::NodeId h = tape.relu(tape.affine(x, p.all[base], p.all[base + 1]));
  return tape.relu(tape.affine(h, p.all[base + 2], p.all[base + 3]));
}

ad::NodeId mlp4_graph(ad::Tape& tape, ad::NodeId x, const StagedParams& p,
                      int base) {
  ad::NodeId h = x;
  for (int layer = 0; layer < 3; ++layer) {
    h = tape.relu(
        tape.affine(h, p.all[base + 2 * layer], p.all[base + 2 * layer + 1]));
  }
  return tape.affine(h, p.all[base + 6], p.all[base + 7]);
}

// One relational layer over an edge multigraph already indexed by global
// node ids. w1_ids/w2_ids hold one (self, neighbor) weight pair per relation.
//
// The self term h(v) * mean of the touched relations' w1 (every relation
// when v touches none) is evaluated by bucketing nodes on their touch set
// and averaging the weights once per bucket; the neighbor term runs each
// relation's matmul only over rows that actually receive messages. Both are
// algebraically the per-relation formulation, with the dead rows removed.
ad::NodeId gnn_layer_graph(
    ad::Tape& tape,
    const std::array<std::vector<std::pair<int, int>>, kNumRelations>& edges,
    int n_relations, int n_nodes, ad::NodeId feats,
    const std::vector<ad::NodeId>& w1_ids,
    const std::vector<ad::NodeId>& w2_ids) {
  std::vector<std::uint32_t> touch_mask(n_nodes, 0);
  for (int rel = 0; rel < n_relations; ++rel) {
    for (const auto& [src, dst] : edges[rel]) {
      // Edges are bidirectional, so marking sources marks every endpoint.
      touch_mask[src] |= 1u << rel;
    }
  }

  std::map<std::uint32_t, std::vector<int>> buckets;
  for (int v = 0; v < n_nodes; ++v) buckets[touch_mask[v]].push_back(v);

  std::vector<ad::NodeId> pieces;
  std::vector<int> seg;  // destination node of each stacked row
  for (const auto& [mask, rows] : buckets) {
    std::vector<int> rels;
    for (int rel = 0; rel < n_relations; ++rel) {
      if (mask == 0 || (mask >> rel) & 1u) rels.push_back(rel);
    }
    ad::NodeId w = w1_ids[rels[0]];
    for (std::size_t i = 1; i < rels.size(); ++i) {
      w = tape.add(w, w1_ids[rels[i]]);
    }
    if (rels.size() > 1) w = tape.scale(w, 1.0 / static_cast<double>(rels.size()));
    pieces.push_back(tape.matmul(tape.row_gather(feats, rows), w));
    seg.insert(seg.end(), rows.begin(), rows.end());
  }

  std::vector<int> compact_of(n_nodes, -1);
  for (int rel = 0; rel < n_relations; ++rel) {
    if (edges[rel].empty()) continue;
    std::vector<int> srcs, dst_rows;
    std::vector<int> seg_local;
    srcs.reserve(edges[rel].size());
    seg_local.reserve(edges[rel].size());
    for (const auto& [src, dst] : edges[rel]) {
      srcs.push_back(src);
      if (compact_of[dst] < 0) {
        compact_of[dst] = static_cast<int>(dst_rows.size());
        dst_rows.push_back(dst);
      }
      seg_local.push_back(compact_of[dst]);
    }
    for (int d : dst_rows) compact_of[d] = -1;

    const ad::NodeId messages = tape.row_gather(feats, srcs);
    const ad::NodeId summed = tape.segment_sum(
        messages, std::move(seg_local), static_cast<int>(dst_rows.size()));
    pieces.push_back(tape.matmul(summed, w2_ids[rel]));
    seg.insert(seg.end(), dst_rows.begin(), dst_rows.end());
  }

  const ad::NodeId stacked =
      pieces.size() == 1 ? pieces[0] : tape.concat_rows(pieces);
  return tape.relu(tape.segment_sum(stacked, std::move(seg), n_nodes));
}

struct BatchLayout {
  int n_nodes = 0;
  std::array<std::vector<std::pair<int, int>>, kNumRelations> edges;
  std::vector<int> cr_rows;
};

void fill_neighbor_row(ad::Tensor& block, int row, const NeighborObs& n,
                       bool drop_category) {
  block.at(row, 0) = n.px;
  block.at(row, 1) = n.py;
  block.at(row, 2) = n.vx;
  block.at(row, 3) = n.vy;
  block.at(row, 4) = n.r_i;
  block.at(row, 5) = n.d_a;
  block.at(row, 6) = n.r_sum;
  if (!drop_category) block.at(row, 7) = n.c;
}

// Embeds a batch of scenes into one feature matrix ordered scene by scene
// (center robot, humans, other robots), plus the union graph over it.
std::pair<ad::NodeId, BatchLayout> embed_graph(
    ad::Tape& tape, const StagedParams& p,
    const std::vector<JointObservation>& batch) {
  if (batch.empty()) throw std::invalid_argument("embed_graph: empty batch");
  const bool homo = is_homogeneous(p.ablation);
  const bool nocate = drops_category(p.ablation);
  const int d_peer = nocate ? 7 : 8;
  const int B = static_cast<int>(batch.size());
  const ParamIndex idx(p.ablation);

  int total_h = 0, total_o = 0;
  for (const JointObservation& obs : batch) {
    total_h += static_cast<int>(obs.humans.size());
    total_o += static_cast<int>(obs.other_robots.size());
  }

  ad::Tensor cr_in(B, 6);
  ad::Tensor h_in(total_h, d_peer);
  ad::Tensor or_in(total_o, d_peer);
  BatchLayout layout;
  std::vector<int> perm;
  perm.reserve(B + total_h + total_o);

  int h_at = 0, o_at = 0, node_at = 0;
  for (int b = 0; b < B; ++b) {
    const JointObservation& obs = batch[b];
    cr_in.at(b, 0) = obs.cr.d_g;
    cr_in.at(b, 1) = obs.cr.v_pref;
    cr_in.at(b, 2) = obs.cr.theta;
    cr_in.at(b, 3) = obs.cr.r;
    cr_in.at(b, 4) = obs.cr.vx;
    cr_in.at(b, 5) = obs.cr.vy;

    const int n = static_cast<int>(obs.humans.size());
    const int m = static_cast<int>(obs.other_robots.size());
    layout.cr_rows.push_back(node_at);
    perm.push_back(b);
    for (int k = 0; k < n; ++k) {
      fill_neighbor_row(h_in, h_at + k, obs.humans[k], nocate);
      perm.push_back(B + h_at + k);
    }
    for (int k = 0; k < m; ++k) {
      fill_neighbor_row(or_in, o_at + k, obs.other_robots[k], nocate);
      perm.push_back(B + total_h + o_at + k);
    }

    const HetGraph scene = build_het_graph(n, m, p.ablation);
    for (int rel = 0; rel < kNumRelations; ++rel) {
      for (const auto& [src, dst] : scene.edges[rel]) {
        layout.edges[rel].emplace_back(node_at + src, node_at + dst);
      }
    }
    h_at += n;
    o_at += m;
    node_at += 1 + n + m;
  }
  layout.n_nodes = node_at;

  const ad::NodeId cr_feat =
      mlp2_graph(tape, tape.input(std::move(cr_in)), p, idx.embed_cr);
  ad::NodeId stacked;
  if (homo) {
    // One shared peer embedding: humans block first, then other robots.
    ad::Tensor peers(total_h + total_o, d_peer);
    std::copy(h_in.data.begin(), h_in.data.end(), peers.data.begin());
    std::copy(or_in.data.begin(), or_in.data.end(),
              peers.data.begin() + h_in.data.size());
    const ad::NodeId peer_feat =
        mlp2_graph(tape, tape.input(std::move(peers)), p, idx.embed_h);
    stacked = tape.concat_rows({cr_feat, peer_feat});
  } else {
    const ad::NodeId h_feat =
        mlp2_graph(tape, tape.input(std::move(h_in)), p, idx.embed_h);
    const ad::NodeId or_feat =
        mlp2_graph(tape, tape.input(std::move(or_in)), p, idx.embed_or);
    stacked = tape.concat_rows({cr_feat, h_feat, or_feat});
  }
  return {tape.row_gather(stacked, perm), std::move(layout)};
}

}  // namespace

StagedParams stage_params(ad::Tape& tape, const ModelParams& params) {
  StagedParams staged;
  staged.ablation = params.ablation;
  for (const ad::Tensor* t : params.tensors()) {
    staged.all.push_back(tape.input(*t));
  }
  return staged;
}

ad::NodeId value_graph(ad::Tape& tape, const StagedParams& staged,
                       const std::vector<JointObservation>& batch) {
  const ParamIndex idx(staged.ablation);
  auto [feats, layout] = embed_graph(tape, staged, batch);

  ad::NodeId h = feats;
  for (int layer = 0; layer < 2; ++layer) {
    std::vector<ad::NodeId> w1_ids, w2_ids;
    for (int rel = 0; rel < idx.n_relations; ++rel) {
      w1_ids.push_back(staged.all[idx.w1(layer, rel)]);
      w2_ids.push_back(staged.all[idx.w2(layer, rel)]);
    }
    h = gnn_layer_graph(tape, layout.edges, idx.n_relations, layout.n_nodes, h,
                        w1_ids, w2_ids);
  }

  const ad::NodeId cr_feats = tape.row_gather(h, layout.cr_rows);
  return mlp4_graph(tape, cr_feats, staged, idx.head);
}

ad::Tensor embed(const JointObservation& obs, const ModelParams& params) {
  ad::Tape tape;
  const StagedParams staged = stage_params(tape, params);
  auto [feats, layout] = embed_graph(tape, staged, {obs});
  (void)layout;
  return tape.value(feats);
}

ad::Tensor hetgnn_layer(const HetGraph& graph, const ad::Tensor& feats,
                        const GnnLayer& weights) {
  const int n_relations = static_cast<int>(weights.w1.size());
  if (n_relations == 0 || weights.w2.size() != weights.w1.size()) {
    throw std::invalid_argument("hetgnn_layer: need matching w1/w2 lists");
  }
  for (int rel = n_relations; rel < kNumRelations; ++rel) {
    if (!graph.edges[rel].empty()) {
      throw std::invalid_argument(
          "hetgnn_layer: graph uses relations beyond the weight list");
    }
  }
  if (feats.rows != graph.n_nodes()) {
    throw std::invalid_argument("hetgnn_layer: feature rows != node count");
  }

  ad::Tape tape;
  const ad::NodeId x = tape.input(feats);
  std::vector<ad::NodeId> w1_ids, w2_ids;
  for (int rel = 0; rel < n_relations; ++rel) {
    w1_ids.push_back(tape.input(weights.w1[rel]));
    w2_ids.push_back(tape.input(weights.w2[rel]));
  }
  return tape.value(gnn_layer_graph(tape, graph.edges, n_relations,
                                    graph.n_nodes(), x, w1_ids, w2_ids));
}

std::vector<double> value_batch(const std::vector<JointObservation>& batch,
                                const ModelParams& params) {
  if (batch.empty()) return {};
  ad::Tape tape;
  const StagedParams staged = stage_params(tape, params);
  const ad::NodeId out = value_graph(tape, staged, batch);
  const ad::Tensor& v = tape.value(out);
  std::vector<double> values(v.data.begin(), v.data.end());
  return values;
}

double value(const JointObservation& obs, const ModelParams& params) {
  return value_batch({obs}, params)[0];
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw ConfigError("checkpoint truncated");
  return v;
}

std::string read_str(std::istream& in) {
  const std::uint32_t len = read_u32(in);
  if (len > (1u << 20)) throw ConfigError("checkpoint name field too large");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw ConfigError("checkpoint truncated");
  return s;
}

constexpr char kMagic[4] = {'H', 'N', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);

  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kFormatVersion);
  write_str(out, to_string(params.ablation));

  const auto names = params.tensor_names();
  const auto slots = params.tensors();
  write_u32(out, static_cast<std::uint32_t>(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    write_str(out, names[i]);
    write_u32(out, static_cast<std::uint32_t>(slots[i]->rows));
    write_u32(out, static_cast<std::uint32_t>(slots[i]->cols));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    write_str(out, names[i]);
    write_u32(out, static_cast<std::uint32_t>(slots[i]->rows));
    write_u32(out, static_cast<std::uint32_t>(slots[i]->cols));
    out.write(reinterpret_cast<const char*>(slots[i]->data.data()),
              static_cast<std::streamsize>(slots[i]->size() * sizeof(double)));
  }
  if (!out) throw ConfigError("checkpoint write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);

  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError("not a checkpoint file: " + path);
  }
  const std::uint32_t version = read_u32(in);
  if (version != kFormatVersion) {
    throw ConfigError("unsupported checkpoint format version " +
                      std::to_string(version));
  }
  ModelParams params = make_zero_params(ablation_from_string(read_str(in)));
  const auto names = params.tensor_names();
  auto slots = params.tensors();

  const std::uint32_t n_tensors = read_u32(in);
  std::ostringstream diff;
  if (n_tensors != slots.size()) {
    diff << "tensor count " << n_tensors << " != expected " << slots.size()
         << "; ";
  }
  std::vector<std::string> table_names;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = read_str(in);
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    table_names.push_back(name);
    if (i < slots.size()) {
      if (name != names[i] ||
          rows != static_cast<std::uint32_t>(slots[i]->rows) ||
          cols != static_cast<std::uint32_t>(slots[i]->cols)) {
        diff << name << " " << rows << "x" << cols << " != expected "
             << names[i] << " " << slots[i]->rows << "x" << slots[i]->cols
             << "; ";
      }
    }
  }
  if (!diff.str().empty()) {
    throw ConfigError("checkpoint architecture mismatch (" +
                      std::string(to_string(params.ablation)) + "): " +
                      diff.str());
  }

  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::string name = read_str(in);
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    if (name != names[i] ||
        rows != static_cast<std::uint32_t>(slots[i]->rows) ||
        cols != static_cast<std::uint32_t>(slots[i]->cols)) {
      throw ConfigError("checkpoint payload disagrees with header at " + name);
    }
    in.read(reinterpret_cast<char*>(slots[i]->data.data()),
            static_cast<std::streamsize>(slots[i]->size() * sizeof(double)));
    if (!in) throw ConfigError("checkpoint truncated inside " + name);
  }
  return params;
}

}  // namespace hetnav
