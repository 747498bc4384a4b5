#pragma once

// Dense double-precision tensors with tape-based reverse-mode autodiff.
//
// A Tensor is a cheap handle to shared storage. Ops are methods of Graph,
// which records one node per op in execution order; Graph::backward walks
// the nodes in exact reverse order and accumulates into input gradients.
// Storage is row-major and contiguous, slicing always copies.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dqg {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  // Mutation is for parameter updates and test fixtures; never mutate a
  // tensor that a live Graph still references.
  std::span<double> mutable_values();
  double operator[](std::size_t i) const { return values()[i]; }
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Deep copy of values (no grad, no graph linkage).
  Tensor clone(bool requires_grad = false) const;
  bool shares_storage_with(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  friend class Graph;
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until first accumulation when requires_grad
    bool requires_grad = false;
  };
  explicit Tensor(std::shared_ptr<Storage> s) : impl_(std::move(s)) {}
  Storage& storage() const;
  std::vector<double>& grad_buffer() const;

  std::shared_ptr<Storage> impl_;
};

enum class ElementwiseOp { Add, Sub, Mul, Tanh, Sigmoid };

class Graph {
 public:
  enum class Mode { Record, Inference };

  explicit Graph(Mode mode = Mode::Record) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Mode mode() const noexcept { return mode_; }
  bool recording() const noexcept { return mode_ == Mode::Record; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  const std::string& node_op(std::size_t i) const { return nodes_.at(i).op; }

  // [m x k] . [k x n] -> [m x n]
  Tensor matmul(const Tensor& a, const Tensor& b);
  // [m x k] . [k] -> [m]
  Tensor matvec(const Tensor& m, const Tensor& x);
  // [k] . [k x n] -> [n]
  Tensor vecmat(const Tensor& x, const Tensor& m);

  // Binary ops accept equal shapes or a single-element operand on either side.
  Tensor elementwise(ElementwiseOp op, std::span<const Tensor> inputs);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor tanh(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  Tensor scale(const Tensor& x, double factor);
  // 1 - x
  Tensor one_minus(const Tensor& x);

  Tensor concat(std::span<const Tensor> parts, std::size_t axis = 0);
  Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis = 0);
  // 1-D contiguous slice [offset, offset + length)
  Tensor slice(const Tensor& x, std::size_t offset, std::size_t length);
  // row i of a 2-D tensor, as a 1-D tensor
  Tensor row(const Tensor& x, std::size_t i);
  // list of equal-length 1-D tensors -> 2-D [count x len]
  Tensor stack(std::span<const Tensor> rows);
  Tensor reshape(const Tensor& x, Shape shape);

  // Fused LSTM cell. `gates` is [4H] pre-activations laid out as
  // input | forget | candidate | output; `cell` is [H]. Returns [2H] = [h; c].
  Tensor lstm_cell(const Tensor& gates, const Tensor& cell);

  Tensor softmax(const Tensor& x);
  Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);
  // out[index[i]] += x[i], out has `size` entries
  Tensor scatter_add(const Tensor& x, std::span<const int> index, std::size_t size);
  Tensor sum(const Tensor& x);
  static constexpr double kLogFloor = 1e-12;
  // -ln(dist[target] + kLogFloor), scalar
  Tensor nll_loss(const Tensor& dist, int target_id);

  // Seeds d(root)/d(root) = 1 and runs every recorded backward closure in
  // reverse order. Gradients accumulate; callers zero parameters as needed.
  void backward(const Tensor& root);

 private:
  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void(const Node&)> backward;
  };

  bool wants_grad(std::initializer_list<const Tensor*> inputs) const;
  Tensor make_output(Shape shape, std::vector<double> values, bool requires_grad) const;
  void record(std::string op, std::vector<Tensor> inputs, const Tensor& output,
              std::function<void(const Node&)> backward);

  Mode mode_;
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Scalar-valued function of the graph. Parameters it reads are captured by
// the closure.
using ScalarFn = std::function<Tensor(Graph&)>;

// Central-difference gradient check of `fn` w.r.t. every tensor in `inputs`.
// Returns the worst relative error |analytic - numeric| / max(|a|, |n|, 1e-8).
// Throws ContractError when fn is not scalar-valued or eps <= 0.
double grad_check(const ScalarFn& fn, std::span<Tensor> inputs, double eps);
double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& fn, Tensor input,
                  double eps);

}  // namespace dqg
