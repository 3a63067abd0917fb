#pragma once

#include <Eigen/Core>

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dot {

using Index = Eigen::Index;

/// Extents of a rank-4 (batch, channel, height, width) array.
struct Shape {
  Index n = 0;
  Index c = 0;
  Index h = 0;
  Index w = 0;

  Index size() const { return n * c * h * w; }
  Index plane() const { return h * w; }
  Index offset(Index in, Index ic, Index iy, Index ix) const {
    return ((in * c + ic) * h + iy) * w + ix;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

namespace detail {

using BackwardFn = std::function<void(const Eigen::ArrayXd& grad_out,
                                      std::span<const std::shared_ptr<struct Node>> parents)>;

/// One vertex of the recorded computation graph.
struct Node {
  Shape shape;
  Eigen::ArrayXd value;
  Eigen::ArrayXd grad;  // empty until something flows in
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  /// Lazily allocates the gradient buffer and returns it.
  Eigen::ArrayXd& grad_buffer() {
    if (grad.size() != value.size()) grad = Eigen::ArrayXd::Zero(value.size());
    return grad;
  }
};

}  // namespace detail

/// Dense float64 (N, C, H, W) array carrying an optional reverse-mode graph.
///
/// Copies share the underlying node, so a parameter held by a model and the
/// handle passed to an op refer to the same storage and gradient. Use
/// `clone()` for an independent copy.
class Grid4 {
 public:
  Grid4();
  explicit Grid4(Shape shape, double fill = 0.0);
  Grid4(Shape shape, Eigen::ArrayXd values);
  Grid4(Shape shape, std::initializer_list<double> values);

  static Grid4 scalar(double v);

  const Shape& shape() const;
  Index size() const { return shape().size(); }

  const Eigen::ArrayXd& values() const;
  Eigen::ArrayXd& mutable_values();
  const double* data() const { return values().data(); }

  double operator()(Index n, Index c, Index y, Index x) const;
  double& at(Index n, Index c, Index y, Index x);
  double item() const;

  bool requires_grad() const;
  Grid4& set_requires_grad(bool on = true);
  bool is_leaf() const;

  bool has_grad() const;
  /// Accumulated gradient; zeros if nothing has flowed in yet.
  Eigen::ArrayXd grad() const;
  void zero_grad();

  /// New leaf with a copy of the values and no graph history.
  Grid4 clone() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Grid4(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Reverse pass from a scalar root. Leaf gradients accumulate across calls;
/// interior gradients are recomputed on every call.
void backward(const Grid4& root);

namespace detail {

/// Builds an op result. The backward closure is attached only when recording
/// is enabled and some parent requires a gradient.
Grid4 make_result(Shape shape, Eigen::ArrayXd value, std::vector<Grid4> parents,
                  BackwardFn backward);

void require(bool cond, const std::string& message);

/// True when an op over these operands will record a backward closure, so
/// forward-only calls can skip saving intermediates.
bool recording(std::initializer_list<const Grid4*> operands);

}  // namespace detail

}  // namespace dot
