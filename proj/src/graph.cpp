#include "archspace/graph.hpp"

#include <array>
#include <utility>

#include "archspace/hashing.hpp"
#include "archspace/module.hpp"
#include "archspace/traversal.hpp"
#include "json_util.hpp"

namespace archspace {

namespace {

using detail::Json;

constexpr std::array<std::pair<NodeOp, std::string_view>, 10> kOpNames{{
    {NodeOp::Conv2D, "Conv2D"},
    {NodeOp::MaxPool2D, "MaxPool2D"},
    {NodeOp::Affine, "Affine"},
    {NodeOp::ReLU, "ReLU"},
    {NodeOp::Dropout, "Dropout"},
    {NodeOp::BatchNorm, "BatchNorm"},
    {NodeOp::Flatten, "Flatten"},
    {NodeOp::Identity, "Identity"},
    {NodeOp::Add, "Add"},
    {NodeOp::PadZeros, "PadZeros"},
}};

const Literal& attr(const Attrs& attrs, std::string_view name) {
  auto it = attrs.find(name);
  if (it == attrs.end()) throw Error(ErrorCode::MalformedGraph, "missing attribute '" + std::string(name) + "'");
  return it->second;
}

std::int64_t int_attr(const Attrs& attrs, std::string_view name) {
  const Literal& v = attr(attrs, name);
  if (literal_type(v) != LiteralType::Integer || std::get<std::int64_t>(v) < 1)
    throw Error(ErrorCode::MalformedGraph, "attribute '" + std::string(name) + "' must be a positive integer");
  return std::get<std::int64_t>(v);
}

std::string padding_attr(const Attrs& attrs) {
  auto it = attrs.find("padding");
  if (it == attrs.end()) return "SAME";
  if (literal_type(it->second) != LiteralType::String) throw Error(ErrorCode::MalformedGraph, "padding must be a string");
  return std::get<std::string>(it->second);
}

void require_order(NodeOp op, const Shape& in, std::size_t order) {
  if (in.order() != order)
    throw Error(ErrorCode::InconsistentShapes, std::string(to_string(op)) + " cannot take input [" + in.to_string() + "]");
}

Json node_json(const GraphNode& n) {
  Json j{{"attrs", detail::attrs_json(n.attrs)},
         {"id", n.id},
         {"in_shape", detail::shape_json(n.in_shape)},
         {"inputs", n.inputs},
         {"op", std::string(to_string(n.op))},
         {"out_shape", detail::shape_json(n.out_shape)},
         {"param_count", n.param_count}};
  if (n.train_only) j["train_only"] = true;
  return j;
}

const Json& field(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::MalformedGraph, std::string("missing field '") + key + "'");
  return *it;
}

GraphNode json_node(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::MalformedGraph, "node must be an object");
  GraphNode n;
  const Json& id = field(j, "id");
  if (!id.is_number_integer()) throw Error(ErrorCode::MalformedGraph, "node id must be an integer");
  n.id = id.get<int>();
  const Json& op = field(j, "op");
  auto parsed = op.is_string() ? node_op_from_string(op.get<std::string>()) : std::nullopt;
  if (!parsed) throw Error(ErrorCode::MalformedGraph, "unknown op " + op.dump());
  n.op = *parsed;
  n.attrs = detail::json_attrs(field(j, "attrs"));
  n.in_shape = detail::json_shape(field(j, "in_shape"));
  n.out_shape = detail::json_shape(field(j, "out_shape"));
  const Json& params = field(j, "param_count");
  if (!params.is_number_integer()) throw Error(ErrorCode::MalformedGraph, "param_count must be an integer");
  n.param_count = params.get<std::int64_t>();
  const Json& inputs = field(j, "inputs");
  if (!inputs.is_array()) throw Error(ErrorCode::MalformedGraph, "inputs must be an array");
  for (const auto& i : inputs) {
    if (!i.is_number_integer()) throw Error(ErrorCode::MalformedGraph, "inputs must be node ids");
    n.inputs.push_back(i.get<int>());
  }
  if (auto it = j.find("train_only"); it != j.end()) {
    if (!it->is_boolean()) throw Error(ErrorCode::MalformedGraph, "train_only must be a boolean");
    n.train_only = it->get<bool>();
  }
  return n;
}

}  // namespace

std::string_view to_string(NodeOp op) {
  for (const auto& [o, name] : kOpNames)
    if (o == op) return name;
  return "?";
}

std::optional<NodeOp> node_op_from_string(std::string_view name) {
  for (const auto& [o, n] : kOpNames)
    if (n == name) return o;
  return std::nullopt;
}

bool is_plumbing(NodeOp op) {
  return op == NodeOp::Flatten || op == NodeOp::Identity || op == NodeOp::Add || op == NodeOp::PadZeros;
}

// ---------------------------------------------------------------------------

GraphBuilder::GraphBuilder(Shape input_shape) : shape_(input_shape) { graph_.input_shape = std::move(input_shape); }

int GraphBuilder::append(NodeOp op, Attrs attrs, Shape out_shape, std::int64_t param_count, bool train_only) {
  std::vector<int> inputs;
  if (cursor_) inputs.push_back(*cursor_);
  int id = add(op, std::move(attrs), shape_, std::move(out_shape), param_count, std::move(inputs));
  graph_.nodes.back().train_only = train_only;
  move_to(id);
  return id;
}

int GraphBuilder::add(NodeOp op, Attrs attrs, Shape in_shape, Shape out_shape, std::int64_t param_count,
                      std::vector<int> inputs) {
  GraphNode node;
  node.id = static_cast<int>(graph_.nodes.size());
  node.op = op;
  node.attrs = std::move(attrs);
  node.in_shape = std::move(in_shape);
  node.out_shape = std::move(out_shape);
  node.param_count = param_count;
  node.inputs = std::move(inputs);
  graph_.nodes.push_back(std::move(node));
  return graph_.nodes.back().id;
}

int GraphBuilder::materialize() {
  if (!cursor_) append(NodeOp::Identity, {}, shape_, 0);
  return *cursor_;
}

void GraphBuilder::move_to(int node_id) {
  cursor_ = node_id;
  shape_ = graph_.nodes.at(static_cast<std::size_t>(node_id)).out_shape;
}

void GraphBuilder::set_training(const std::string& name, const Literal& value) {
  graph_.training_config.insert_or_assign(name, value);
}

GraphIR GraphBuilder::finish(Path source_path) && {
  if (graph_.nodes.empty()) append(NodeOp::Identity, {}, shape_, 0);
  graph_.output_shape = shape_;
  graph_.source_path = std::move(source_path);
  return std::move(graph_);
}

// ---------------------------------------------------------------------------

NodeInference infer_node(NodeOp op, const Attrs& attrs, const Shape& in) {
  switch (op) {
    case NodeOp::Conv2D: {
      require_order(op, in, 3);
      const auto f = int_attr(attrs, "filters");
      const auto k = int_attr(attrs, "kernel_size");
      const auto s = int_attr(attrs, "stride");
      const auto pad = padding_attr(attrs);
      return {Shape{window_output(in[0], k, s, pad), window_output(in[1], k, s, pad), f}, k * k * in[2] * f + f};
    }
    case NodeOp::MaxPool2D: {
      require_order(op, in, 3);
      const auto k = int_attr(attrs, "pool_size");
      const auto s = int_attr(attrs, "stride");
      const auto pad = padding_attr(attrs);
      return {Shape{window_output(in[0], k, s, pad), window_output(in[1], k, s, pad), in[2]}, 0};
    }
    case NodeOp::Affine: {
      require_order(op, in, 1);
      const auto h = int_attr(attrs, "units");
      return {Shape{h}, (in[0] + 1) * h};
    }
    case NodeOp::Flatten:
      return {Shape{in.elements()}, 0};
    case NodeOp::BatchNorm:
      return {in, 2 * in.last()};
    default:
      return {in, 0};
  }
}

void check_graph(const GraphIR& g) {
  if (g.nodes.empty()) throw Error(ErrorCode::MalformedGraph, "graph has no nodes");
  std::vector<int> consumers(g.nodes.size(), 0);
  int sources = 0;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const GraphNode& n = g.nodes[i];
    const std::string where = "node " + std::to_string(i) + " (" + std::string(to_string(n.op)) + ")";
    if (n.id != static_cast<int>(i)) throw Error(ErrorCode::MalformedGraph, where + ": ids must be 0..n-1 in order");
    for (int in : n.inputs) {
      if (in < 0 || in >= n.id) throw Error(ErrorCode::MalformedGraph, where + ": input is not an earlier node");
      ++consumers[static_cast<std::size_t>(in)];
    }
    if (n.train_only != (n.op == NodeOp::Dropout))
      throw Error(ErrorCode::MalformedGraph, where + ": train_only is set exactly on Dropout nodes");

    if (n.op == NodeOp::Add) {
      if (n.inputs.size() != 2) throw Error(ErrorCode::MalformedGraph, where + ": Add takes exactly two inputs");
      for (int in : n.inputs)
        if (g.nodes[static_cast<std::size_t>(in)].out_shape != n.in_shape)
          throw Error(ErrorCode::InconsistentShapes, where + ": Add operands must match");
    } else if (n.inputs.size() > 1) {
      throw Error(ErrorCode::MalformedGraph, where + ": too many inputs");
    } else if (n.inputs.empty()) {
      ++sources;
      if (n.in_shape != g.input_shape)
        throw Error(ErrorCode::InconsistentShapes, where + ": source must consume the graph input");
    } else if (g.nodes[static_cast<std::size_t>(n.inputs[0])].out_shape != n.in_shape) {
      throw Error(ErrorCode::InconsistentShapes, where + ": in_shape differs from its input's out_shape");
    }

    if (n.op == NodeOp::PadZeros) {
      bool ok = n.in_shape.order() == n.out_shape.order();
      for (std::size_t d = 0; ok && d < n.in_shape.order(); ++d) ok = n.out_shape[d] >= n.in_shape[d];
      if (!ok || n.param_count != 0) throw Error(ErrorCode::InconsistentShapes, where + ": PadZeros can only grow");
    } else {
      NodeInference expect;
      try {
        expect = infer_node(n.op, n.attrs, n.in_shape);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::MalformedGraph) throw;
        throw Error(ErrorCode::InconsistentShapes, where + ": " + e.what());
      }
      if (expect.out_shape != n.out_shape)
        throw Error(ErrorCode::InconsistentShapes, where + ": out_shape [" + n.out_shape.to_string() +
                                                       "], expected [" + expect.out_shape.to_string() + "]");
      if (expect.param_count != n.param_count)
        throw Error(ErrorCode::InconsistentShapes, where + ": param_count " + std::to_string(n.param_count) +
                                                       ", expected " + std::to_string(expect.param_count));
    }
    total += n.param_count;
  }
  if (sources != 1) throw Error(ErrorCode::MalformedGraph, "graph must have exactly one source node");
  int terminals = 0;
  for (int c : consumers) terminals += (c == 0);
  if (terminals != 1 || consumers.back() != 0)
    throw Error(ErrorCode::MalformedGraph, "graph must have exactly one terminal node, the last");
  if (g.nodes.back().out_shape != g.output_shape)
    throw Error(ErrorCode::InconsistentShapes, "output_shape differs from the terminal node");
  (void)total;
}

GraphIR compile(const Module& root, const Path& source_path) {
  GraphBuilder builder(root.in_shape());
  root.compile(builder);
  return std::move(builder).finish(source_path);
}

GraphIR compile(const SpaceExpr& space, const Shape& in_shape, const Path& path) {
  ModuleBox model = replay(space, in_shape, path);
  return compile(*model, path);
}

std::int64_t total_params(const GraphIR& graph) {
  std::int64_t total = 0;
  for (const auto& n : graph.nodes) total += n.param_count;
  return total;
}

std::string to_json(const GraphIR& g) {
  Json nodes = Json::array();
  for (const auto& n : g.nodes) nodes.push_back(node_json(n));
  Json j{{"input_shape", detail::shape_json(g.input_shape)},
         {"ir_version", kIrVersion},
         {"nodes", std::move(nodes)},
         {"output_shape", detail::shape_json(g.output_shape)},
         {"source_path", detail::path_json(g.source_path)},
         {"total_params", total_params(g)},
         {"training_config", detail::attrs_json(g.training_config)}};
  return j.dump();
}

GraphIR from_json(std::string_view text) {
  Json j = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedGraph, "graph is not a JSON object");
  const Json& version = field(j, "ir_version");
  if (!version.is_number_integer() || version.get<int>() != kIrVersion)
    throw Error(ErrorCode::MalformedGraph, "unsupported ir_version " + version.dump());
  GraphIR g;
  g.input_shape = detail::json_shape(field(j, "input_shape"));
  g.output_shape = detail::json_shape(field(j, "output_shape"));
  const Json& nodes = field(j, "nodes");
  if (!nodes.is_array()) throw Error(ErrorCode::MalformedGraph, "nodes must be an array");
  for (const auto& n : nodes) g.nodes.push_back(json_node(n));
  g.training_config = detail::json_attrs(field(j, "training_config"));
  g.source_path = detail::json_path(field(j, "source_path"));
  check_graph(g);
  const Json& total = field(j, "total_params");
  if (!total.is_number_integer() || total.get<std::int64_t>() != total_params(g))
    throw Error(ErrorCode::InconsistentShapes, "total_params differs from the node sum");
  return g;
}

std::string signature_json(const GraphIR& g) {
  // Identity nodes forward their input; -1 stands for the graph input.
  std::vector<int> remap(g.nodes.size(), -1);
  Json nodes = Json::array();
  for (const auto& n : g.nodes) {
    const std::size_t id = static_cast<std::size_t>(n.id);
    if (n.op == NodeOp::Identity) {
      remap[id] = n.inputs.empty() ? -1 : remap[static_cast<std::size_t>(n.inputs[0])];
      continue;
    }
    std::vector<int> inputs;
    for (int in : n.inputs) inputs.push_back(remap[static_cast<std::size_t>(in)]);
    if (inputs.empty()) inputs.push_back(-1);
    remap[id] = static_cast<int>(nodes.size());
    nodes.push_back(Json{{"attrs", detail::attrs_json(n.attrs)}, {"inputs", inputs}, {"op", to_string(n.op)}});
  }
  Json j{{"input_shape", detail::shape_json(g.input_shape)},
         {"nodes", std::move(nodes)},
         {"training_config", detail::attrs_json(g.training_config)}};
  return j.dump();
}

std::uint64_t signature_hash(const GraphIR& graph) { return fnv1a64(signature_json(graph)); }

std::vector<std::string> module_sequence(const GraphIR& graph) {
  std::vector<std::string> out;
  for (const auto& n : graph.nodes)
    if (!is_plumbing(n.op)) out.emplace_back(to_string(n.op));
  return out;
}

}  // namespace archspace
