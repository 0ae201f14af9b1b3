#include "air/transport.hpp"

#include "air/errors.hpp"
#include "air/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace air {

namespace {

struct Cell {
  Eigen::Index row;
  Eigen::Index col;
};

// Nodes 0..m-1 are rows, m..m+n-1 columns; every basic cell is a tree edge.
class BasisTree {
 public:
  BasisTree(Eigen::Index m, Eigen::Index n) : m_(m), adjacency_(static_cast<std::size_t>(m + n)) {}

  void add(std::size_t id, const Cell& c) {
    adjacency_[node_row(c.row)].push_back({node_col(c.col), id});
    adjacency_[node_col(c.col)].push_back({node_row(c.row), id});
  }

  void remove(std::size_t id, const Cell& c) {
    auto erase = [id](auto& list) {
      list.erase(std::find_if(list.begin(), list.end(), [id](const Edge& e) { return e.cell == id; }));
    };
    erase(adjacency_[node_row(c.row)]);
    erase(adjacency_[node_col(c.col)]);
  }

  /// Potentials with row_potential(0) = 0 and u_i + v_j = c_ij on the basis.
  void potentials(const std::vector<Cell>& cells, const Matrix& cost, Vector& u, Vector& v) const {
    const std::size_t nodes = adjacency_.size();
    std::vector<double> value(nodes, 0.0);
    std::vector<char> seen(nodes, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (const Edge& e : adjacency_[a]) {
        if (seen[e.to]) continue;
        const Cell& c = cells[e.cell];
        value[e.to] = cost(c.row, c.col) - value[a];
        seen[e.to] = 1;
        stack.push_back(e.to);
      }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
      throw NumericalError("transportation basis is not a spanning tree");
    }
    for (Eigen::Index i = 0; i < m_; ++i) u(i) = value[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = value[static_cast<std::size_t>(m_ + j)];
  }

  /// Basic cell ids on the tree path from column `col` to row `row`.
  std::vector<std::size_t> path(Eigen::Index row, Eigen::Index col) const {
    const std::size_t source = node_col(col);
    const std::size_t target = node_row(row);
    std::vector<std::size_t> parent_node(adjacency_.size(), kNone);
    std::vector<std::size_t> parent_cell(adjacency_.size(), kNone);
    std::queue<std::size_t> queue;
    queue.push(source);
    parent_node[source] = source;
    while (!queue.empty() && parent_node[target] == kNone) {
      const std::size_t a = queue.front();
      queue.pop();
      for (const Edge& e : adjacency_[a]) {
        if (parent_node[e.to] != kNone) continue;
        parent_node[e.to] = a;
        parent_cell[e.to] = e.cell;
        queue.push(e.to);
      }
    }
    if (parent_node[target] == kNone) throw NumericalError("no cycle through entering cell");
    std::vector<std::size_t> out;
    for (std::size_t a = target; a != source; a = parent_node[a]) out.push_back(parent_cell[a]);
    // out runs row -> ... -> col; the cycle after the entering cell starts at
    // the row end, so the first element is the first "minus" cell.
    return out;
  }

 private:
  struct Edge {
    std::size_t to;
    std::size_t cell;
  };
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t node_row(Eigen::Index i) const { return static_cast<std::size_t>(i); }
  std::size_t node_col(Eigen::Index j) const { return static_cast<std::size_t>(m_ + j); }

  Eigen::Index m_;
  std::vector<std::vector<Edge>> adjacency_;
};

void check_marginal(const Vector& mass, const char* name) {
  for (Eigen::Index i = 0; i < mass.size(); ++i) {
    if (!(mass(i) >= 0.0) || !std::isfinite(mass(i))) {
      throw DomainError(std::string(name) + " has a negative or non-finite entry");
    }
  }
}

}  // namespace

TransportPlan solve_transport(const Vector& supply, const Vector& demand, const Matrix& cost) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size()) {
    throw DomainError("transport: cost shape does not match marginals");
  }
  check_marginal(supply, "supply");
  check_marginal(demand, "demand");
  const double total = supply.sum();
  if (!(total > 0.0)) throw DomainError("transport: empty supply");
  if (std::abs(total - demand.sum()) > tol::probability_sum * std::max(1.0, total)) {
    throw DomainError("transport: supply and demand totals differ");
  }

  // Work on the rows/columns that carry mass.
  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index i = 0; i < supply.size(); ++i)
    if (supply(i) > 0.0) rows.push_back(i);
  for (Eigen::Index j = 0; j < demand.size(); ++j)
    if (demand(j) > 0.0) cols.push_back(j);
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto n = static_cast<Eigen::Index>(cols.size());

  Vector a(m), b(n);
  Matrix c(m, n);
  for (Eigen::Index i = 0; i < m; ++i) a(i) = supply(rows[static_cast<std::size_t>(i)]);
  for (Eigen::Index j = 0; j < n; ++j) b(j) = demand(cols[static_cast<std::size_t>(j)]);
  b *= a.sum() / b.sum();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      c(i, j) = cost(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);

  // North-west corner: a staircase of m + n - 1 cells, degenerate zeros kept.
  std::vector<Cell> cells;
  std::vector<double> flow;
  Matrix basic_id = Matrix::Constant(m, n, -1.0);
  {
    Vector ra = a, rb = b;
    Eigen::Index i = 0, j = 0;
    while (i < m && j < n) {
      const double x = std::min(ra(i), rb(j));
      basic_id(i, j) = static_cast<double>(cells.size());
      cells.push_back({i, j});
      flow.push_back(x);
      ra(i) -= x;
      rb(j) -= x;
      if (i == m - 1) {
        ++j;
      } else if (j == n - 1) {
        ++i;
      } else if (ra(i) <= rb(j)) {
        ++i;
      } else {
        ++j;
      }
    }
  }
  BasisTree tree(m, n);
  for (std::size_t k = 0; k < cells.size(); ++k) tree.add(k, cells[k]);

  const double cost_scale = 1.0 + c.cwiseAbs().maxCoeff();
  const double reduced_tol = 1e-13 * cost_scale;
  Vector u(m), v(n);
  long pivots = 0;
  const long max_pivots = 1000L * (m + n) * (m + n) + 1000;

  for (;;) {
    tree.potentials(cells, c, u, v);
    // Bland: first nonbasic cell in row-major order with negative reduced cost.
    Eigen::Index enter_i = -1, enter_j = -1;
    for (Eigen::Index i = 0; i < m && enter_i < 0; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (basic_id(i, j) >= 0.0) continue;
        if (c(i, j) - u(i) - v(j) < -reduced_tol) {
          enter_i = i;
          enter_j = j;
          break;
        }
      }
    }
    if (enter_i < 0) break;
    if (++pivots > max_pivots) throw NumericalError("transportation simplex did not terminate");

    const std::vector<std::size_t> path = tree.path(enter_i, enter_j);
    // path[0], path[2], ... lose flow; path[1], path[3], ... gain.
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < path.size(); k += 2) theta = std::min(theta, flow[path[k]]);
    std::size_t leave = std::numeric_limits<std::size_t>::max();
    auto order = [&](std::size_t id) { return cells[id].row * n + cells[id].col; };
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const std::size_t id = path[k];
      if (flow[id] == theta && (leave == std::numeric_limits<std::size_t>::max() || order(id) < order(leave))) {
        leave = id;
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      flow[path[k]] += (k % 2 == 0) ? -theta : theta;
      if (flow[path[k]] < 0.0) flow[path[k]] = 0.0;
    }
    const Cell old = cells[leave];
    tree.remove(leave, old);
    basic_id(old.row, old.col) = -1.0;
    cells[leave] = {enter_i, enter_j};
    flow[leave] = theta;
    basic_id(enter_i, enter_j) = static_cast<double>(leave);
    tree.add(leave, cells[leave]);
  }

  TransportPlan plan;
  plan.pivots = pivots;
  plan.flow = Matrix::Zero(supply.size(), demand.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const Eigen::Index i = rows[static_cast<std::size_t>(cells[k].row)];
    const Eigen::Index j = cols[static_cast<std::size_t>(cells[k].col)];
    plan.flow(i, j) += flow[k];
    plan.cost += flow[k] * cost(i, j);
  }
  // Extend potentials to massless rows/columns while keeping dual feasibility.
  plan.row_potential = Vector::Constant(supply.size(), std::numeric_limits<double>::quiet_NaN());
  plan.col_potential = Vector::Constant(demand.size(), std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < m; ++i) plan.row_potential(rows[static_cast<std::size_t>(i)]) = u(i);
  for (Eigen::Index j = 0; j < n; ++j) plan.col_potential(cols[static_cast<std::size_t>(j)]) = v(j);
  for (Eigen::Index j = 0; j < demand.size(); ++j) {
    if (!std::isnan(plan.col_potential(j))) continue;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i : rows) best = std::min(best, cost(i, j) - plan.row_potential(i));
    plan.col_potential(j) = best;
  }
  for (Eigen::Index i = 0; i < supply.size(); ++i) {
    if (!std::isnan(plan.row_potential(i))) continue;
    plan.row_potential(i) = (cost.row(i).transpose() - plan.col_potential).minCoeff();
  }
  return plan;
}

}  // namespace air
