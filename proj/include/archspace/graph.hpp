#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "archspace/dsl.hpp"
#include "archspace/path.hpp"
#include "archspace/shape.hpp"

namespace archspace {

class Module;

enum class NodeOp { Conv2D, MaxPool2D, Affine, ReLU, Dropout, BatchNorm, Flatten, Identity, Add, PadZeros };

std::string_view to_string(NodeOp op);
std::optional<NodeOp> node_op_from_string(std::string_view name);
/// Flatten, Identity, Add and PadZeros carry no architecture of their own.
bool is_plumbing(NodeOp op);

using Attrs = std::map<std::string, Literal, std::less<>>;

struct GraphNode {
  int id = 0;
  NodeOp op = NodeOp::Identity;
  Attrs attrs;
  Shape in_shape;
  Shape out_shape;
  std::int64_t param_count = 0;
  std::vector<int> inputs;
  bool train_only = false;

  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

/// Compiled dataflow graph of one fully specified model.
struct GraphIR {
  std::vector<GraphNode> nodes;
  Shape input_shape;
  Shape output_shape;
  Attrs training_config;
  Path source_path;

  friend bool operator==(const GraphIR&, const GraphIR&) = default;
};

inline constexpr int kIrVersion = 1;

/// Accumulates nodes while modules compile themselves in series.
class GraphBuilder {
 public:
  explicit GraphBuilder(Shape input_shape);

  /// Appends a node consuming the current tensor and makes it current.
  int append(NodeOp op, Attrs attrs, Shape out_shape, std::int64_t param_count, bool train_only = false);
  /// Appends a node with explicit inputs; does not move the cursor.
  int add(NodeOp op, Attrs attrs, Shape in_shape, Shape out_shape, std::int64_t param_count,
          std::vector<int> inputs);
  /// Node id holding the current tensor, inserting an Identity source when
  /// the current tensor is still the graph input.
  int materialize();

  const Shape& shape() const noexcept { return shape_; }
  std::optional<int> cursor() const noexcept { return cursor_; }
  void move_to(int node_id);
  void set_training(const std::string& name, const Literal& value);

  GraphIR finish(Path source_path) &&;

 private:
  GraphIR graph_;
  std::optional<int> cursor_;
  Shape shape_;
};

/// Output shape and parameter count implied by an op's attributes.
struct NodeInference {
  Shape out_shape;
  std::int64_t param_count = 0;
};
NodeInference infer_node(NodeOp op, const Attrs& attrs, const Shape& in_shape);

/// Compiles an already specified module tree.
GraphIR compile(const Module& root, const Path& source_path);
/// Replays `path` on a fresh instance of `space` and compiles the result.
GraphIR compile(const SpaceExpr& space, const Shape& in_shape, const Path& path);

std::int64_t total_params(const GraphIR& graph);

/// Canonical JSON: sorted keys, topological node order, shortest round-trip
/// decimals. Byte-identical for identical graphs.
std::string to_json(const GraphIR& graph);
/// Inverse of to_json; revalidates every invariant.
/// Throws MalformedGraph or InconsistentShapes.
GraphIR from_json(std::string_view text);
/// Structural checks shared by from_json and tests.
void check_graph(const GraphIR& graph);

/// Identity of a model for caching and table lookup: the canonical JSON of
/// the node list with Identity nodes elided, plus the training config.
std::string signature_json(const GraphIR& graph);
std::uint64_t signature_hash(const GraphIR& graph);
/// Basic-module op names in execution order, plumbing excluded.
std::vector<std::string> module_sequence(const GraphIR& graph);

}  // namespace archspace
