#include "dqg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dqg/errors.hpp"

namespace dqg {

namespace {

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(op) + ": non-finite value produced");
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (std::any_of(shape.begin(), shape.end(), [](std::size_t d) { return d == 0; }) &&
      !values.empty()) {
    throw DimensionError("tensor: zero-sized shape " + shape_to_string(shape) +
                         " with non-empty values");
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_to_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  check_finite(values, "tensor");
  impl_ = std::make_shared<Storage>();
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

Tensor::Storage& Tensor::storage() const {
  if (!impl_) throw ContractError("tensor: use of undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return storage().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw IndexError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::size() const { return storage().values.size(); }

std::span<const double> Tensor::values() const { return storage().values; }

std::span<double> Tensor::mutable_values() { return storage().values; }

double Tensor::at(std::size_t r, std::size_t c) const {
  const auto& s = shape();
  if (s.size() != 2 || r >= s[0] || c >= s[1]) {
    throw IndexError("tensor: at(" + std::to_string(r) + "," + std::to_string(c) +
                     ") invalid for shape " + shape_to_string(s));
  }
  return storage().values[r * s[1] + c];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("tensor: item() on non-scalar shape " + shape_to_string(shape()));
  }
  return storage().values[0];
}

bool Tensor::requires_grad() const { return storage().requires_grad; }

bool Tensor::has_grad() const { return !storage().grad.empty(); }

std::span<const double> Tensor::grad() const { return storage().grad; }

std::span<double> Tensor::mutable_grad() { return grad_buffer(); }

std::vector<double>& Tensor::grad_buffer() const {
  auto& s = storage();
  if (s.grad.empty()) s.grad.assign(s.values.size(), 0.0);
  return s.grad;
}

void Tensor::zero_grad() {
  auto& s = storage();
  if (!s.grad.empty()) std::fill(s.grad.begin(), s.grad.end(), 0.0);
}

Tensor Tensor::clone(bool requires_grad) const {
  return Tensor(shape(), storage().values, requires_grad);
}

// ---------------------------------------------------------------------------
// Graph plumbing

bool Graph::wants_grad(std::initializer_list<const Tensor*> inputs) const {
  if (!recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

Tensor Graph::make_output(Shape shape, std::vector<double> values, bool requires_grad) const {
  auto s = std::make_shared<Tensor::Storage>();
  s->shape = std::move(shape);
  s->values = std::move(values);
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

void Graph::record(std::string op, std::vector<Tensor> inputs, const Tensor& output,
                   std::function<void(const Node&)> backward) {
  if (!output.requires_grad()) return;
  nodes_.push_back(Node{std::move(op), std::move(inputs), output, std::move(backward)});
}

void Graph::backward(const Tensor& root) {
  if (root.size() != 1) {
    throw ContractError("backward: root must be scalar, got shape " +
                        shape_to_string(root.shape()));
  }
  if (!root.requires_grad()) {
    throw ContractError("backward: root does not depend on any gradient-tracked tensor");
  }
  if (backward_done_) {
    throw ContractError("backward: graph already consumed");
  }
  backward_done_ = true;
  root.grad_buffer()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward(*it);
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  check_finite(out, "matmul");
  Tensor result = make_output({m, n}, std::move(out), wants_grad({&a, &b}));
  record("matmul", {a, b}, result, [m, k, n](const Node& node) {
    const auto g = node.output.grad();
    const Tensor& a = node.inputs[0];
    const Tensor& b = node.inputs[1];
    if (a.requires_grad()) {
      auto& ga = a.grad_buffer();
      const auto bv = b.values();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (b.requires_grad()) {
      auto& gb = b.grad_buffer();
      const auto av = a.values();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
    }
  });
  return result;
}

Tensor Graph::matvec(const Tensor& m, const Tensor& x) {
  if (m.rank() != 2 || x.rank() != 1 || m.dim(1) != x.dim(0)) {
    throw DimensionError("matvec: incompatible shapes " + shape_to_string(m.shape()) + " and " +
                         shape_to_string(x.shape()));
  }
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  const auto mv = m.values();
  const auto xv = x.values();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* mr = mv.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += mr[c] * xv[c];
    out[r] = acc;
  }
  check_finite(out, "matvec");
  Tensor result = make_output({rows}, std::move(out), wants_grad({&m, &x}));
  record("matvec", {m, x}, result, [rows, cols](const Node& node) {
    const auto g = node.output.grad();
    const Tensor& m = node.inputs[0];
    const Tensor& x = node.inputs[1];
    if (m.requires_grad()) {
      auto& gm = m.grad_buffer();
      const auto xv = x.values();
      for (std::size_t r = 0; r < rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* row = gm.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += gr * xv[c];
      }
    }
    if (x.requires_grad()) {
      auto& gx = x.grad_buffer();
      const auto mv = m.values();
      for (std::size_t r = 0; r < rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        const double* row = mv.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gx[c] += gr * row[c];
      }
    }
  });
  return result;
}

Tensor Graph::vecmat(const Tensor& x, const Tensor& m) {
  if (m.rank() != 2 || x.rank() != 1 || m.dim(0) != x.dim(0)) {
    throw DimensionError("vecmat: incompatible shapes " + shape_to_string(x.shape()) + " and " +
                         shape_to_string(m.shape()));
  }
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  const auto mv = m.values();
  const auto xv = x.values();
  std::vector<double> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double xr = xv[r];
    const double* mr = mv.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += xr * mr[c];
  }
  check_finite(out, "vecmat");
  Tensor result = make_output({cols}, std::move(out), wants_grad({&x, &m}));
  record("vecmat", {x, m}, result, [rows, cols](const Node& node) {
    const auto g = node.output.grad();
    const Tensor& x = node.inputs[0];
    const Tensor& m = node.inputs[1];
    if (x.requires_grad()) {
      auto& gx = x.grad_buffer();
      const auto mv = m.values();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* mr = mv.data() + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += g[c] * mr[c];
        gx[r] += acc;
      }
    }
    if (m.requires_grad()) {
      auto& gm = m.grad_buffer();
      const auto xv = x.values();
      for (std::size_t r = 0; r < rows; ++r) {
        const double xr = xv[r];
        double* mr = gm.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) mr[c] += xr * g[c];
      }
    }
  });
  return result;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor Graph::elementwise(ElementwiseOp op, std::span<const Tensor> inputs) {
  switch (op) {
    case ElementwiseOp::Tanh:
    case ElementwiseOp::Sigmoid: {
      if (inputs.size() != 1) throw ContractError("elementwise: unary op takes one input");
      const Tensor& x = inputs[0];
      const bool is_tanh = op == ElementwiseOp::Tanh;
      std::vector<double> out(x.size());
      const auto xv = x.values();
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = is_tanh ? std::tanh(xv[i]) : stable_sigmoid(xv[i]);
      Tensor result = make_output(x.shape(), std::move(out), wants_grad({&x}));
      record(is_tanh ? "tanh" : "sigmoid", {x}, result, [is_tanh](const Node& node) {
        const Tensor& x = node.inputs[0];
        if (!x.requires_grad()) return;
        const auto g = node.output.grad();
        const auto y = node.output.values();
        auto& gx = x.grad_buffer();
        for (std::size_t i = 0; i < gx.size(); ++i)
          gx[i] += g[i] * (is_tanh ? (1.0 - y[i] * y[i]) : y[i] * (1.0 - y[i]));
      });
      return result;
    }
    case ElementwiseOp::Add:
    case ElementwiseOp::Sub:
    case ElementwiseOp::Mul:
      break;
  }
  if (inputs.size() != 2) throw ContractError("elementwise: binary op takes two inputs");
  const Tensor& a = inputs[0];
  const Tensor& b = inputs[1];
  const bool a_scalar = a.size() == 1 && b.size() != 1;
  const bool b_scalar = b.size() == 1 && a.size() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    throw DimensionError("elementwise: incompatible shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
  }
  const Shape out_shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(out_shape);
  const auto av = a.values();
  const auto bv = b.values();
  auto aat = [&](std::size_t i) { return a_scalar ? av[0] : av[i]; };
  auto bat = [&](std::size_t i) { return b_scalar ? bv[0] : bv[i]; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (op) {
      case ElementwiseOp::Add: out[i] = aat(i) + bat(i); break;
      case ElementwiseOp::Sub: out[i] = aat(i) - bat(i); break;
      default: out[i] = aat(i) * bat(i); break;
    }
  }
  const char* name = op == ElementwiseOp::Add ? "add" : op == ElementwiseOp::Sub ? "sub" : "mul";
  check_finite(out, name);
  Tensor result = make_output(out_shape, std::move(out), wants_grad({&a, &b}));
  record(name, {a, b}, result, [op, a_scalar, b_scalar, n](const Node& node) {
    const auto g = node.output.grad();
    const Tensor& a = node.inputs[0];
    const Tensor& b = node.inputs[1];
    const auto av = a.values();
    const auto bv = b.values();
    if (a.requires_grad()) {
      auto& ga = a.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const double local = op == ElementwiseOp::Mul ? (b_scalar ? bv[0] : bv[i]) : 1.0;
        ga[a_scalar ? 0 : i] += g[i] * local;
      }
    }
    if (b.requires_grad()) {
      auto& gb = b.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        double local = 1.0;
        if (op == ElementwiseOp::Sub) local = -1.0;
        if (op == ElementwiseOp::Mul) local = a_scalar ? av[0] : av[i];
        gb[b_scalar ? 0 : i] += g[i] * local;
      }
    }
  });
  return result;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  const Tensor in[] = {a, b};
  return elementwise(ElementwiseOp::Add, in);
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  const Tensor in[] = {a, b};
  return elementwise(ElementwiseOp::Sub, in);
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  const Tensor in[] = {a, b};
  return elementwise(ElementwiseOp::Mul, in);
}

Tensor Graph::tanh(const Tensor& x) {
  const Tensor in[] = {x};
  return elementwise(ElementwiseOp::Tanh, in);
}

Tensor Graph::sigmoid(const Tensor& x) {
  const Tensor in[] = {x};
  return elementwise(ElementwiseOp::Sigmoid, in);
}

Tensor Graph::scale(const Tensor& x, double factor) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v *= factor;
  check_finite(out, "scale");
  Tensor result = make_output(x.shape(), std::move(out), wants_grad({&x}));
  record("scale", {x}, result, [factor](const Node& node) {
    const auto g = node.output.grad();
    auto& gx = node.inputs[0].grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * factor;
  });
  return result;
}

Tensor Graph::one_minus(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = 1.0 - v;
  Tensor result = make_output(x.shape(), std::move(out), wants_grad({&x}));
  record("one_minus", {x}, result, [](const Node& node) {
    const auto g = node.output.grad();
    auto& gx = node.inputs[0].grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] -= g[i];
  });
  return result;
}

// ---------------------------------------------------------------------------
// Shape manipulation

Tensor Graph::concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor Graph::concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " invalid for shape " +
                         shape_to_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  bool grad = false;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d)
      if (d != axis && s[d] != first[d]) ok = false;
    if (!ok) {
      throw DimensionError("concat: shape " + shape_to_string(s) + " incompatible with " +
                           shape_to_string(first) + " on axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
    grad = grad || t.requires_grad();
  }
  grad = grad && recording();
  // outer = product of dims before axis, inner = product after
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t out_row = out_shape[axis] * inner;
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Tensor& t : parts) {
    offsets.push_back(off);
    const std::size_t chunk = t.dim(axis) * inner;
    const auto v = t.values();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.data() + o * chunk, chunk, out.data() + o * out_row + off);
    off += chunk;
  }
  Tensor result = make_output(std::move(out_shape), std::move(out), grad);
  record("concat", std::vector<Tensor>(parts.begin(), parts.end()), result,
         [outer, out_row, inner, axis, offsets](const Node& node) {
           const auto g = node.output.grad();
           for (std::size_t p = 0; p < node.inputs.size(); ++p) {
             const Tensor& t = node.inputs[p];
             if (!t.requires_grad()) continue;
             auto& gt = t.grad_buffer();
             const std::size_t chunk = t.dim(axis) * inner;
             for (std::size_t o = 0; o < outer; ++o)
               for (std::size_t i = 0; i < chunk; ++i)
                 gt[o * chunk + i] += g[o * out_row + offsets[p] + i];
           }
         });
  return result;
}

Tensor Graph::slice(const Tensor& x, std::size_t offset, std::size_t length) {
  if (x.rank() != 1 || offset + length > x.dim(0) || length == 0) {
    throw DimensionError("slice: [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") invalid for shape " +
                         shape_to_string(x.shape()));
  }
  const auto v = x.values();
  std::vector<double> out(v.begin() + offset, v.begin() + offset + length);
  Tensor result = make_output({length}, std::move(out), wants_grad({&x}));
  record("slice", {x}, result, [offset, length](const Node& node) {
    const auto g = node.output.grad();
    auto& gx = node.inputs[0].grad_buffer();
    for (std::size_t i = 0; i < length; ++i) gx[offset + i] += g[i];
  });
  return result;
}

Tensor Graph::row(const Tensor& x, std::size_t i) {
  if (x.rank() != 2) {
    throw DimensionError("row: expected 2-D tensor, got " + shape_to_string(x.shape()));
  }
  if (i >= x.dim(0)) {
    throw IndexError("row: index " + std::to_string(i) + " out of range for shape " +
                     shape_to_string(x.shape()));
  }
  const std::size_t cols = x.dim(1);
  const auto v = x.values();
  std::vector<double> out(v.begin() + i * cols, v.begin() + (i + 1) * cols);
  Tensor result = make_output({cols}, std::move(out), wants_grad({&x}));
  record("row", {x}, result, [i, cols](const Node& node) {
    const auto g = node.output.grad();
    auto& gx = node.inputs[0].grad_buffer();
    for (std::size_t c = 0; c < cols; ++c) gx[i * cols + c] += g[c];
  });
  return result;
}

Tensor Graph::stack(std::span<const Tensor> rows) {
  if (rows.empty()) throw ContractError("stack: no inputs");
  std::vector<Tensor> as_rows;
  as_rows.reserve(rows.size());
  for (const Tensor& r : rows) {
    if (r.rank() != 1) {
      throw DimensionError("stack: expected 1-D rows, got " + shape_to_string(r.shape()));
    }
    as_rows.push_back(reshape(r, {1, r.dim(0)}));
  }
  return concat(as_rows, 0);
}

Tensor Graph::reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                         shape_to_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  Tensor result = make_output(std::move(shape), std::move(out), wants_grad({&x}));
  record("reshape", {x}, result, [](const Node& node) {
    const auto g = node.output.grad();
    auto& gx = node.inputs[0].grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
  return result;
}

Tensor Graph::lstm_cell(const Tensor& gates, const Tensor& cell) {
  if (gates.rank() != 1 || cell.rank() != 1 || gates.dim(0) != 4 * cell.dim(0)) {
    throw DimensionError("lstm_cell: gates " + shape_to_string(gates.shape()) +
                         " incompatible with cell " + shape_to_string(cell.shape()));
  }
  const std::size_t h = cell.dim(0);
  const auto z = gates.values();
  const auto c_prev = cell.values();
  // Activated gates are kept for the backward pass.
  std::vector<double> act(4 * h);
  std::vector<double> out(2 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const double i = stable_sigmoid(z[k]);
    const double f = stable_sigmoid(z[h + k]);
    const double g = std::tanh(z[2 * h + k]);
    const double o = stable_sigmoid(z[3 * h + k]);
    const double c = f * c_prev[k] + i * g;
    act[k] = i;
    act[h + k] = f;
    act[2 * h + k] = g;
    act[3 * h + k] = o;
    out[h + k] = c;
    out[k] = o * std::tanh(c);
  }
  check_finite(out, "lstm_cell");
  Tensor result = make_output({2 * h}, std::move(out), wants_grad({&gates, &cell}));
  record("lstm_cell", {gates, cell}, result, [h, act = std::move(act)](const Node& node) {
    const auto g_out = node.output.grad();
    const auto y = node.output.values();
    const Tensor& gates = node.inputs[0];
    const Tensor& cell = node.inputs[1];
    const auto c_prev = cell.values();
    std::vector<double>* gz = gates.requires_grad() ? &gates.grad_buffer() : nullptr;
    std::vector<double>* gc = cell.requires_grad() ? &cell.grad_buffer() : nullptr;
    for (std::size_t k = 0; k < h; ++k) {
      const double i = act[k], f = act[h + k], g = act[2 * h + k], o = act[3 * h + k];
      const double c = y[h + k];
      const double tc = std::tanh(c);
      const double dh = g_out[k];
      const double dc = g_out[h + k] + dh * o * (1.0 - tc * tc);
      if (gz) {
        auto& z = *gz;
        z[k] += dc * g * i * (1.0 - i);
        z[h + k] += dc * c_prev[k] * f * (1.0 - f);
        z[2 * h + k] += dc * i * (1.0 - g * g);
        z[3 * h + k] += dh * tc * o * (1.0 - o);
      }
      if (gc) (*gc)[k] += dc * f;
    }
  });
  return result;
}

// ---------------------------------------------------------------------------
// Distributions and losses

Tensor Graph::softmax(const Tensor& x) {
  if (x.rank() != 1 || x.size() == 0) {
    throw DimensionError("softmax: expected non-empty 1-D tensor, got " +
                         shape_to_string(x.shape()));
  }
  const auto v = x.values();
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    total += out[i];
  }
  for (double& o : out) o /= total;
  Tensor result = make_output(x.shape(), std::move(out), wants_grad({&x}));
  record("softmax", {x}, result, [](const Node& node) {
    const auto g = node.output.grad();
    const auto y = node.output.values();
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
    auto& gx = node.inputs[0].grad_buffer();
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (g[i] - dot);
  });
  return result;
}

Tensor Graph::embedding_lookup(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) {
    throw DimensionError("embedding_lookup: table must be 2-D, got " +
                         shape_to_string(table.shape()));
  }
  const std::size_t rows = table.dim(0), width = table.dim(1);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= rows) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) + " outside [0, " +
                       std::to_string(rows) + ")");
    }
  }
  const auto tv = table.values();
  std::vector<double> out(ids.size() * width);
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[r]) * width, width,
                out.data() + r * width);
  if (ids.empty()) {
    // Degenerate [0 x width] tensor; nothing flows back.
    auto s = std::make_shared<Tensor::Storage>();
    s->shape = {0, width};
    return Tensor(std::move(s));
  }
  Tensor result = make_output({ids.size(), width}, std::move(out), wants_grad({&table}));
  record("embedding_lookup", {table}, result,
         [width, id_list = std::vector<int>(ids.begin(), ids.end())](const Node& node) {
           const auto g = node.output.grad();
           auto& gt = node.inputs[0].grad_buffer();
           for (std::size_t r = 0; r < id_list.size(); ++r) {
             double* dst = gt.data() + static_cast<std::size_t>(id_list[r]) * width;
             for (std::size_t c = 0; c < width; ++c) dst[c] += g[r * width + c];
           }
         });
  return result;
}

Tensor Graph::scatter_add(const Tensor& x, std::span<const int> index, std::size_t size) {
  if (x.rank() != 1 || x.dim(0) != index.size()) {
    throw DimensionError("scatter_add: " + std::to_string(index.size()) +
                         " indices for shape " + shape_to_string(x.shape()));
  }
  for (int id : index) {
    if (id < 0 || static_cast<std::size_t>(id) >= size) {
      throw IndexError("scatter_add: index " + std::to_string(id) + " outside [0, " +
                       std::to_string(size) + ")");
    }
  }
  const auto v = x.values();
  std::vector<double> out(size, 0.0);
  for (std::size_t i = 0; i < index.size(); ++i) out[static_cast<std::size_t>(index[i])] += v[i];
  Tensor result = make_output({size}, std::move(out), wants_grad({&x}));
  record("scatter_add", {x}, result,
         [idx = std::vector<int>(index.begin(), index.end())](const Node& node) {
           const auto g = node.output.grad();
           auto& gx = node.inputs[0].grad_buffer();
           for (std::size_t i = 0; i < idx.size(); ++i)
             gx[i] += g[static_cast<std::size_t>(idx[i])];
         });
  return result;
}

Tensor Graph::sum(const Tensor& x) {
  const auto v = x.values();
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  Tensor result = make_output({}, {total}, wants_grad({&x}));
  record("sum", {x}, result, [](const Node& node) {
    const double g = node.output.grad()[0];
    auto& gx = node.inputs[0].grad_buffer();
    for (double& d : gx) d += g;
  });
  return result;
}

Tensor Graph::nll_loss(const Tensor& dist, int target_id) {
  if (dist.rank() != 1) {
    throw DimensionError("nll_loss: expected 1-D distribution, got " +
                         shape_to_string(dist.shape()));
  }
  if (target_id < 0 || static_cast<std::size_t>(target_id) >= dist.size()) {
    throw IndexError("nll_loss: target " + std::to_string(target_id) + " outside [0, " +
                     std::to_string(dist.size()) + ")");
  }
  const auto t = static_cast<std::size_t>(target_id);
  const double p = dist.values()[t] + kLogFloor;
  Tensor result = make_output({}, {-std::log(p)}, wants_grad({&dist}));
  record("nll_loss", {dist}, result, [t, p](const Node& node) {
    node.inputs[0].grad_buffer()[t] += -node.output.grad()[0] / p;
  });
  return result;
}

// ---------------------------------------------------------------------------
// Gradient checking

double grad_check(const ScalarFn& fn, std::span<Tensor> inputs, double eps) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive");
  for (Tensor& t : inputs) {
    if (!t.requires_grad()) throw ContractError("grad_check: input does not require grad");
    t.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Graph g;
    const Tensor out = fn(g);
    if (out.size() != 1) {
      throw ContractError("grad_check: function output has shape " +
                          shape_to_string(out.shape()) + ", expected a scalar");
    }
    if (out.requires_grad()) g.backward(out);
    for (Tensor& t : inputs) {
      analytic.emplace_back(t.size(), 0.0);
      if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.back().begin());
    }
  }
  auto evaluate = [&fn] {
    Graph g(Graph::Mode::Inference);
    return fn(g).item();
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double plus = evaluate();
      values[i] = saved - eps;
      const double minus = evaluate();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  for (Tensor& t : inputs) t.zero_grad();
  return worst;
}

double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& fn, Tensor input,
                  double eps) {
  Tensor inputs[] = {input};
  return grad_check([&](Graph& g) { return fn(g, input); }, inputs, eps);
}

}  // namespace dqg
