#include "dot/tensor.hpp"

#include <unordered_set>

#include "dot/errors.hpp"

namespace dot {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

Grid4::Grid4() : Grid4(Shape{}) {}

Grid4::Grid4(Shape shape, double fill)
    : Grid4(shape, Eigen::ArrayXd::Constant(shape.size(), fill)) {}

Grid4::Grid4(Shape shape, Eigen::ArrayXd values) : node_(std::make_shared<detail::Node>()) {
  detail::require(shape.n >= 0 && shape.c >= 0 && shape.h >= 0 && shape.w >= 0,
                  "negative extent in shape " + shape.str());
  detail::require(values.size() == shape.size(),
                  "value count " + std::to_string(values.size()) + " does not match shape " +
                      shape.str());
  node_->shape = shape;
  node_->value = std::move(values);
}

Grid4::Grid4(Shape shape, std::initializer_list<double> values)
    : Grid4(shape, Eigen::Map<const Eigen::ArrayXd>(values.begin(),
                                                    static_cast<Index>(values.size()))) {}

Grid4::Grid4(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Grid4 Grid4::scalar(double v) { return Grid4(Shape{1, 1, 1, 1}, v); }

const Shape& Grid4::shape() const { return node_->shape; }
const Eigen::ArrayXd& Grid4::values() const { return node_->value; }
Eigen::ArrayXd& Grid4::mutable_values() { return node_->value; }

double Grid4::operator()(Index n, Index c, Index y, Index x) const {
  return node_->value[node_->shape.offset(n, c, y, x)];
}

double& Grid4::at(Index n, Index c, Index y, Index x) {
  return node_->value[node_->shape.offset(n, c, y, x)];
}

double Grid4::item() const {
  detail::require(size() == 1, "item() on non-scalar grid of shape " + shape().str());
  return node_->value[0];
}

bool Grid4::requires_grad() const { return node_->requires_grad; }

Grid4& Grid4::set_requires_grad(bool on) {
  detail::require(is_leaf(), "requires_grad can only be set on leaf grids");
  node_->requires_grad = on;
  return *this;
}

bool Grid4::is_leaf() const { return !node_->backward; }

bool Grid4::has_grad() const { return node_->grad.size() == node_->value.size(); }

Eigen::ArrayXd Grid4::grad() const {
  if (has_grad()) return node_->grad;
  return Eigen::ArrayXd::Zero(size());
}

void Grid4::zero_grad() { node_->grad.resize(0); }

Grid4 Grid4::clone() const { return Grid4(shape(), values()); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Grid4& root) {
  detail::require(root.size() == 1,
                  "backward requires a scalar root, got shape " + root.shape().str());
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* node : order)
    if (node->backward) node->grad = Eigen::ArrayXd::Zero(node->value.size());
  root.node()->grad_buffer()[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward) node->backward(node->grad, node->parents);
  }
}

namespace detail {

void require(bool cond, const std::string& message) {
  if (!cond) throw ContractViolation(message);
}

bool recording(std::initializer_list<const Grid4*> operands) {
  if (!grad_enabled()) return false;
  for (const Grid4* g : operands)
    if (g->requires_grad()) return true;
  return false;
}

Grid4 make_result(Shape shape, Eigen::ArrayXd value, std::vector<Grid4> parents,
                  BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  bool needs = false;
  if (grad_enabled())
    for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Grid4(std::move(node));
}

}  // namespace detail

}  // namespace dot
