#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <span>
#include <vector>

#include "resplan/error.hpp"

namespace resplan::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { less_equal, equal, greater_equal };

struct Row {
  std::vector<std::pair<int, double>> coefs; ///< sparse (variable, coefficient)
  Sense sense = Sense::less_equal;
  double rhs = 0.0;
};

/// minimize objective . x subject to rows and per-variable bounds.
struct Problem {
  std::vector<double> objective;
  std::vector<Row> rows;
  std::vector<double> lower; ///< default 0
  std::vector<double> upper; ///< default +inf

  explicit Problem(std::size_t num_vars = 0)
      : objective(num_vars, 0.0), lower(num_vars, 0.0), upper(num_vars, kInf) {}

  [[nodiscard]] std::size_t num_vars() const noexcept { return objective.size(); }

  int add_var(double cost = 0.0, double lo = 0.0, double hi = kInf) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    return static_cast<int>(objective.size()) - 1;
  }

  void add_row(std::vector<std::pair<int, double>> coefs, Sense sense, double rhs) {
    rows.push_back(Row{std::move(coefs), sense, rhs});
  }
};

enum class Status { optimal, infeasible, unbounded };

inline const char* to_string(Status s) {
  switch (s) {
  case Status::optimal:
    return "optimal";
  case Status::infeasible:
    return "infeasible";
  case Status::unbounded:
    return "unbounded";
  }
  return "?";
}

struct Solution {
  Status status = Status::infeasible;
  std::vector<double> values; ///< empty unless optimal
  double objective = 0.0;
  long iterations = 0;
  double max_violation = 0.0; ///< largest absolute row/bound violation of `values`
};

enum class PivotRule {
  bland,  ///< smallest-index entering and leaving variables throughout
  hybrid, ///< steepest reduced cost, falling back to Bland during degenerate streaks
};

struct Options {
  double tol = 1e-9;
  PivotRule rule = PivotRule::hybrid;
  int degenerate_streak = 50;
  long max_iterations = 0; ///< 0: automatic
};

/// Maximum absolute violation of the rows and bounds of `p` at `x`.
inline double max_violation(const Problem& p, const std::vector<double>& x) {
  double worst = 0.0;
  for (const Row& r : p.rows) {
    double lhs = 0.0;
    for (auto [j, a] : r.coefs) {
      lhs += a * x[static_cast<std::size_t>(j)];
    }
    double v = 0.0;
    switch (r.sense) {
    case Sense::less_equal:
      v = lhs - r.rhs;
      break;
    case Sense::greater_equal:
      v = r.rhs - lhs;
      break;
    case Sense::equal:
      v = std::abs(lhs - r.rhs);
      break;
    }
    worst = std::max(worst, v);
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    worst = std::max({worst, p.lower[j] - x[j], x[j] - p.upper[j]});
  }
  return worst;
}

/// Dense primal simplex on the condensed (dictionary) tableau.
///
/// The tableau has one row per constraint and one column per structural
/// variable; slacks live only as basis labels, so an LP with many more
/// constraints than variables stays compact. Free variables are pivoted into
/// the basis first and never leave, after which their rows are set aside and
/// only used to recover values; equality slacks are pivoted out and never
/// re-enter. Phase 1 uses a single auxiliary variable that absorbs every
/// initial infeasibility. Anti-cycling is Bland's rule.
class Simplex {
public:
  explicit Simplex(Options opts = {}) : opts_(opts) {}

  [[nodiscard]] Solution solve(const Problem& p) const {
    Engine engine(p, opts_);
    return engine.run();
  }

private:
  enum class Kind { nonneg, free, fixed };

  struct Transform {
    enum class Mode { shift, mirror, free } mode = Mode::shift;
    double offset = 0.0; // x = offset + y (shift) or x = offset - y (mirror) or x = y
  };

  class Engine {
  public:
    Engine(const Problem& p, const Options& opts) : p_(p), opts_(opts) {}

    Solution run() {
      build();
      Solution sol;
      const long cap = opts_.max_iterations > 0
                           ? opts_.max_iterations
                           : 50L * static_cast<long>(rows_ + cols_) + 10000L;
      max_iter_ = cap;

      pivot_in_free_columns();
      freeze_free_rows();
      if (!pivot_out_fixed_rows()) {
        sol.status = Status::infeasible;
        sol.iterations = iterations_;
        return sol;
      }
      if (!phase_one()) {
        sol.status = Status::infeasible;
        sol.iterations = iterations_;
        return sol;
      }
      set_costs(reduced_costs_);
      for (int j = 0; j < cols_; ++j) {
        const int var = nonbasic_[static_cast<std::size_t>(j)];
        if (kind_[static_cast<std::size_t>(var)] == Kind::free && std::abs(d_[j]) > opts_.tol) {
          sol.status = Status::unbounded;
          sol.iterations = iterations_;
          return sol;
        }
      }
      if (!iterate()) {
        sol.status = Status::unbounded;
        sol.iterations = iterations_;
        return sol;
      }
      sol.status = Status::optimal;
      sol.values = extract();
      sol.objective = 0.0;
      for (std::size_t j = 0; j < sol.values.size(); ++j) {
        sol.objective += p_.objective[j] * sol.values[j];
      }
      sol.iterations = iterations_;
      sol.max_violation = max_violation(p_, sol.values);
      double scale = 1.0;
      for (const Row& r : p_.rows) {
        scale = std::max(scale, std::abs(r.rhs));
      }
      for (double v : sol.values) {
        scale = std::max(scale, std::abs(v));
      }
      if (sol.max_violation > 1e-6 * scale) {
        throw SolverError("simplex lost feasibility: max violation " +
                          std::to_string(sol.max_violation) + " after " +
                          std::to_string(iterations_) + " pivots");
      }
      return sol;
    }

  private:
    // Tableau relation for row i: x_basic(i) + sum_j T(i,j) x_nonbasic(j) = b(i).
    // Objective: z = z0 + sum_j d(j) x_nonbasic(j).
    double& at(int i, int j) { return t_[static_cast<std::size_t>(i) * stride_ + j]; }

    void build() {
      const std::size_t nv = p_.num_vars();
      transforms_.resize(nv);
      std::vector<Row> rows;
      rows.reserve(p_.rows.size() + nv);
      for (const Row& r : p_.rows) {
        rows.push_back(r);
      }
      for (std::size_t j = 0; j < nv; ++j) {
        const double lo = p_.lower[j];
        const double hi = p_.upper[j];
        if (lo > hi) {
          // Encoded as an infeasible row so the status is reported uniformly.
          rows.push_back(Row{{{static_cast<int>(j), 1.0}}, Sense::less_equal, hi});
          rows.push_back(Row{{{static_cast<int>(j), 1.0}}, Sense::greater_equal, lo});
          transforms_[j] = {Transform::Mode::free, 0.0};
          continue;
        }
        if (std::isfinite(lo)) {
          transforms_[j] = {Transform::Mode::shift, lo};
          if (std::isfinite(hi)) {
            rows.push_back(Row{{{static_cast<int>(j), 1.0}}, Sense::less_equal, hi});
          }
        } else if (std::isfinite(hi)) {
          transforms_[j] = {Transform::Mode::mirror, hi};
        } else {
          transforms_[j] = {Transform::Mode::free, 0.0};
        }
      }

      cols_ = static_cast<int>(nv);
      rows_ = static_cast<int>(rows.size());
      artificial_col_ = cols_;
      stride_ = static_cast<std::size_t>(cols_) + 1;
      t_.assign(static_cast<std::size_t>(rows_) * stride_, 0.0);
      b_.assign(static_cast<std::size_t>(rows_), 0.0);
      // Variable labels: structurals 0..nv-1, slacks nv..nv+rows-1, artificial last.
      const int num_labels = cols_ + rows_ + 1;
      kind_.assign(static_cast<std::size_t>(num_labels), Kind::nonneg);
      for (std::size_t j = 0; j < nv; ++j) {
        if (transforms_[j].mode == Transform::Mode::free) {
          kind_[j] = Kind::free;
        }
      }
      kind_[static_cast<std::size_t>(num_labels - 1)] = Kind::fixed; // artificial, off by default
      artificial_label_ = num_labels - 1;
      basic_.resize(static_cast<std::size_t>(rows_));
      nonbasic_.resize(static_cast<std::size_t>(cols_) + 1);
      for (int j = 0; j < cols_; ++j) {
        nonbasic_[static_cast<std::size_t>(j)] = j;
      }
      nonbasic_[static_cast<std::size_t>(cols_)] = artificial_label_;
      active_.assign(static_cast<std::size_t>(rows_), true);
      col_nnz_.assign(stride_, 0);

      for (int i = 0; i < rows_; ++i) {
        const Row& r = rows[static_cast<std::size_t>(i)];
        const double sign = r.sense == Sense::greater_equal ? -1.0 : 1.0;
        double rhs = r.rhs;
        for (auto [j, a] : r.coefs) {
          const Transform& tr = transforms_[static_cast<std::size_t>(j)];
          double coef = a;
          if (tr.mode == Transform::Mode::shift) {
            rhs -= a * tr.offset;
          } else if (tr.mode == Transform::Mode::mirror) {
            rhs -= a * tr.offset;
            coef = -a;
          }
          at(i, j) += sign * coef;
        }
        b_[static_cast<std::size_t>(i)] = sign * rhs;
        basic_[static_cast<std::size_t>(i)] = cols_ + i;
        int nnz = 0;
        for (int j = 0; j < cols_; ++j) {
          const bool nonzero = at(i, j) != 0.0;
          nnz += nonzero ? 1 : 0;
          col_nnz_[static_cast<std::size_t>(j)] += nonzero ? 1 : 0;
        }
        row_nnz_.push_back(nnz);
        if (r.sense == Sense::equal) {
          kind_[static_cast<std::size_t>(cols_ + i)] = Kind::fixed;
        }
      }

      structural_costs_.assign(static_cast<std::size_t>(num_labels), 0.0);
      for (std::size_t j = 0; j < nv; ++j) {
        const double c = p_.objective[j];
        structural_costs_[j] = transforms_[j].mode == Transform::Mode::mirror ? -c : c;
      }
      d_.assign(stride_, 0.0);
      z0_ = 0.0;
    }

    [[nodiscard]] Kind kind_of(int label) const { return kind_[static_cast<std::size_t>(label)]; }

    /// Rows that take part in ratio tests: basic variable must stay >= 0.
    [[nodiscard]] bool ratio_row(int i) const {
      return active_[static_cast<std::size_t>(i)] &&
             kind_of(basic_[static_cast<std::size_t>(i)]) == Kind::nonneg;
    }

    void pivot(int r, int s) {
      ++iterations_;
      const double piv = at(r, s);
      const std::size_t cols = stride_;
      double* row_r = &t_[static_cast<std::size_t>(r) * cols];
      for (std::size_t j = 0; j < cols; ++j) {
        row_r[j] /= piv;
      }
      row_r[s] = 1.0 / piv;
      b_[static_cast<std::size_t>(r)] /= piv;
      nz_.clear();
      for (std::size_t j = 0; j < cols; ++j) {
        if (row_r[j] != 0.0 && static_cast<int>(j) != s) {
          nz_.push_back(static_cast<int>(j));
        }
      }
      const double br = b_[static_cast<std::size_t>(r)];
      for (int i = 0; i < rows_; ++i) {
        if (i == r || !active_[static_cast<std::size_t>(i)]) {
          continue;
        }
        double* row_i = &t_[static_cast<std::size_t>(i) * cols];
        const double f = row_i[s];
        if (f == 0.0) {
          continue;
        }
        int nnz_delta = 0;
        for (int j : nz_) {
          const double old = row_i[j];
          double v = old - f * row_r[j];
          v = std::abs(v) < 1e-14 ? 0.0 : v;
          const int delta = (v != 0.0 ? 1 : 0) - (old != 0.0 ? 1 : 0);
          nnz_delta += delta;
          col_nnz_[static_cast<std::size_t>(j)] += delta;
          row_i[j] = v;
        }
        row_nnz_[static_cast<std::size_t>(i)] += nnz_delta;
        row_i[s] = -f * row_r[s];
        b_[static_cast<std::size_t>(i)] -= f * br;
      }
      const double f = d_[static_cast<std::size_t>(s)];
      if (f != 0.0) {
        for (int j : nz_) {
          d_[static_cast<std::size_t>(j)] -= f * row_r[j];
        }
        d_[static_cast<std::size_t>(s)] = -f * row_r[s];
        z0_ += f * br;
      }
      std::swap(basic_[static_cast<std::size_t>(r)], nonbasic_[static_cast<std::size_t>(s)]);
    }

    /// Pivots every free column into the basis, sparsest column first and then
    /// the sparsest numerically acceptable row, to limit fill-in.
    void pivot_in_free_columns() {
      std::vector<int> pending;
      for (int s = 0; s < cols_; ++s) {
        if (kind_of(nonbasic_[static_cast<std::size_t>(s)]) == Kind::free) {
          pending.push_back(s);
        }
      }
      while (!pending.empty()) {
        auto pick = std::min_element(pending.begin(), pending.end(), [&](int x, int y) {
          return col_nnz_[static_cast<std::size_t>(x)] < col_nnz_[static_cast<std::size_t>(y)];
        });
        const int s = *pick;
        pending.erase(pick);
        double best = 0.0;
        for (int i = 0; i < rows_; ++i) {
          if (active_[static_cast<std::size_t>(i)] &&
              kind_of(basic_[static_cast<std::size_t>(i)]) != Kind::free) {
            best = std::max(best, std::abs(at(i, s)));
          }
        }
        if (best <= opts_.tol) {
          continue; // column empty: value stays 0, checked against its cost later
        }
        int r = -1;
        int best_nnz = 0;
        for (int i = 0; i < rows_; ++i) {
          if (!active_[static_cast<std::size_t>(i)] ||
              kind_of(basic_[static_cast<std::size_t>(i)]) == Kind::free ||
              std::abs(at(i, s)) < 0.1 * best) {
            continue;
          }
          const int nnz = row_nnz_[static_cast<std::size_t>(i)];
          if (r < 0 || nnz < best_nnz) {
            r = i;
            best_nnz = nnz;
          }
        }
        pivot(r, s);
      }
    }

    /// Moves rows with a free basic variable out of the tableau. Each keeps the
    /// column labels current at this point so extract() can evaluate it, and the
    /// objective is rewritten over the remaining nonbasic columns.
    void freeze_free_rows() {
      frozen_nonbasic_ = nonbasic_;
      reduced_costs_ = structural_costs_;
      std::vector<double> d(stride_, 0.0);
      for (int j = 0; j <= cols_; ++j) {
        d[static_cast<std::size_t>(j)] =
            structural_costs_[static_cast<std::size_t>(nonbasic_[static_cast<std::size_t>(j)])];
      }
      int kept = 0;
      for (int i = 0; i < rows_; ++i) {
        const int label = basic_[static_cast<std::size_t>(i)];
        const double* row = &t_[static_cast<std::size_t>(i) * stride_];
        if (active_[static_cast<std::size_t>(i)] && kind_of(label) == Kind::free) {
          const double cb = structural_costs_[static_cast<std::size_t>(label)];
          if (cb != 0.0) {
            for (std::size_t j = 0; j < stride_; ++j) {
              d[j] -= cb * row[j];
            }
          }
          frozen_.push_back(FrozenRow{label, b_[static_cast<std::size_t>(i)],
                                      std::vector<double>(row, row + stride_)});
          reduced_costs_[static_cast<std::size_t>(label)] = 0.0;
          continue;
        }
        if (kept != i) {
          std::copy(row, row + stride_, &t_[static_cast<std::size_t>(kept) * stride_]);
          b_[static_cast<std::size_t>(kept)] = b_[static_cast<std::size_t>(i)];
          basic_[static_cast<std::size_t>(kept)] = label;
          active_[static_cast<std::size_t>(kept)] = active_[static_cast<std::size_t>(i)];
          row_nnz_[static_cast<std::size_t>(kept)] = row_nnz_[static_cast<std::size_t>(i)];
        }
        ++kept;
      }
      rows_ = kept;
      t_.resize(static_cast<std::size_t>(rows_) * stride_);
      t_.shrink_to_fit();
      b_.resize(static_cast<std::size_t>(rows_));
      basic_.resize(static_cast<std::size_t>(rows_));
      active_.resize(static_cast<std::size_t>(rows_));
      row_nnz_.resize(static_cast<std::size_t>(rows_));
      // Nonbasic labels now carry the cost of the eliminated free variables.
      for (int j = 0; j <= cols_; ++j) {
        reduced_costs_[static_cast<std::size_t>(nonbasic_[static_cast<std::size_t>(j)])] =
            d[static_cast<std::size_t>(j)];
      }
    }

    bool pivot_out_fixed_rows() {
      for (int i = 0; i < rows_; ++i) {
        if (!active_[static_cast<std::size_t>(i)] ||
            kind_of(basic_[static_cast<std::size_t>(i)]) != Kind::fixed) {
          continue;
        }
        int s = -1;
        double best = opts_.tol;
        for (int j = 0; j < cols_; ++j) {
          if (kind_of(nonbasic_[static_cast<std::size_t>(j)]) == Kind::nonneg &&
              std::abs(at(i, j)) > best) {
            best = std::abs(at(i, j));
            s = j;
          }
        }
        if (s < 0) {
          if (std::abs(b_[static_cast<std::size_t>(i)]) > feas_tol()) {
            return false;
          }
          active_[static_cast<std::size_t>(i)] = false;
          continue;
        }
        pivot(i, s);
      }
      return true;
    }

    [[nodiscard]] double feas_tol() const {
      double scale = 1.0;
      for (double v : b_) {
        scale = std::max(scale, std::abs(v));
      }
      return opts_.tol * scale;
    }

    void set_costs(const std::vector<double>& cost) {
      for (int j = 0; j <= cols_; ++j) {
        d_[static_cast<std::size_t>(j)] = cost[static_cast<std::size_t>(nonbasic_[static_cast<std::size_t>(j)])];
      }
      z0_ = 0.0;
      for (int i = 0; i < rows_; ++i) {
        if (!active_[static_cast<std::size_t>(i)]) {
          continue;
        }
        const double cb = cost[static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)])];
        if (cb == 0.0) {
          continue;
        }
        z0_ += cb * b_[static_cast<std::size_t>(i)];
        const double* row = &t_[static_cast<std::size_t>(i) * stride_];
        for (int j = 0; j <= cols_; ++j) {
          d_[static_cast<std::size_t>(j)] -= cb * row[j];
        }
      }
    }

    bool phase_one() {
      const double ftol = feas_tol();
      int most = -1;
      for (int i = 0; i < rows_; ++i) {
        if (!ratio_row(i)) {
          continue;
        }
        if (b_[static_cast<std::size_t>(i)] < -ftol) {
          at(i, artificial_col_) = -1.0;
          if (most < 0 || b_[static_cast<std::size_t>(i)] < b_[static_cast<std::size_t>(most)]) {
            most = i;
          }
        } else if (b_[static_cast<std::size_t>(i)] < 0.0) {
          b_[static_cast<std::size_t>(i)] = 0.0;
        }
      }
      if (most < 0) {
        return true;
      }
      kind_[static_cast<std::size_t>(artificial_label_)] = Kind::nonneg;
      pivot(most, artificial_col_);
      std::vector<double> cost(kind_.size(), 0.0);
      cost[static_cast<std::size_t>(artificial_label_)] = 1.0;
      set_costs(cost);
      if (!iterate()) {
        throw SolverError("phase 1 reported unbounded; numerical breakdown");
      }
      if (z0_ > ftol) {
        return false;
      }
      // Drive the auxiliary variable out of the basis if it is still there at level 0.
      for (int i = 0; i < rows_; ++i) {
        if (!active_[static_cast<std::size_t>(i)] ||
            basic_[static_cast<std::size_t>(i)] != artificial_label_) {
          continue;
        }
        int s = -1;
        double best = opts_.tol;
        for (int j = 0; j <= cols_; ++j) {
          if (kind_of(nonbasic_[static_cast<std::size_t>(j)]) == Kind::nonneg &&
              std::abs(at(i, j)) > best) {
            best = std::abs(at(i, j));
            s = j;
          }
        }
        if (s < 0) {
          active_[static_cast<std::size_t>(i)] = false;
        } else {
          pivot(i, s);
        }
      }
      kind_[static_cast<std::size_t>(artificial_label_)] = Kind::fixed;
      return true;
    }

    /// Runs simplex pivots on the current cost row. Returns false when unbounded.
    bool iterate() {
      bool bland = opts_.rule == PivotRule::bland;
      int streak = 0;
      const double tol = opts_.tol;
      while (true) {
        if (iterations_ > max_iter_) {
          throw SolverError("simplex iteration limit reached (" + std::to_string(max_iter_) + ")");
        }
        int s = -1;
        if (bland) {
          int best_label = std::numeric_limits<int>::max();
          for (int j = 0; j <= cols_; ++j) {
            const int label = nonbasic_[static_cast<std::size_t>(j)];
            if (kind_of(label) == Kind::nonneg && d_[static_cast<std::size_t>(j)] < -tol &&
                label < best_label) {
              best_label = label;
              s = j;
            }
          }
        } else {
          double best = -tol;
          for (int j = 0; j <= cols_; ++j) {
            if (kind_of(nonbasic_[static_cast<std::size_t>(j)]) == Kind::nonneg &&
                d_[static_cast<std::size_t>(j)] < best) {
              best = d_[static_cast<std::size_t>(j)];
              s = j;
            }
          }
        }
        if (s < 0) {
          return true;
        }
        int r = -1;
        double best_ratio = kInf;
        for (int i = 0; i < rows_; ++i) {
          if (!ratio_row(i)) {
            continue;
          }
          const double a = at(i, s);
          if (a <= tol) {
            continue;
          }
          const double ratio = std::max(b_[static_cast<std::size_t>(i)], 0.0) / a;
          if (r < 0 || ratio < best_ratio - 1e-12 * (1.0 + best_ratio)) {
            r = i;
            best_ratio = ratio;
          } else if (ratio <= best_ratio + 1e-12 * (1.0 + best_ratio)) {
            const bool prefer =
                bland ? basic_[static_cast<std::size_t>(i)] < basic_[static_cast<std::size_t>(r)]
                      : a > at(r, s);
            if (prefer) {
              r = i;
              best_ratio = std::min(best_ratio, ratio);
            }
          }
        }
        if (r < 0) {
          return false;
        }
        const bool degenerate = best_ratio <= tol;
        pivot(r, s);
        if (opts_.rule == PivotRule::hybrid) {
          if (degenerate) {
            if (++streak >= opts_.degenerate_streak) {
              bland = true;
            }
          } else {
            streak = 0;
            bland = false;
          }
        }
      }
    }

    std::vector<double> extract() const {
      std::vector<double> value(kind_.size(), 0.0);
      for (int i = 0; i < rows_; ++i) {
        if (active_[static_cast<std::size_t>(i)]) {
          value[static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)])] =
              b_[static_cast<std::size_t>(i)];
        }
      }
      for (const FrozenRow& f : frozen_) {
        double v = f.rhs;
        for (std::size_t j = 0; j < f.row.size(); ++j) {
          if (f.row[j] != 0.0) {
            v -= f.row[j] * value[static_cast<std::size_t>(frozen_nonbasic_[j])];
          }
        }
        value[static_cast<std::size_t>(f.label)] = v;
      }
      std::vector<double> y(value.begin(), value.begin() + cols_);
      std::vector<double> x(y.size());
      for (std::size_t j = 0; j < y.size(); ++j) {
        const Transform& tr = transforms_[j];
        switch (tr.mode) {
        case Transform::Mode::shift:
          x[j] = tr.offset + std::max(y[j], 0.0);
          break;
        case Transform::Mode::mirror:
          x[j] = tr.offset - std::max(y[j], 0.0);
          break;
        case Transform::Mode::free:
          x[j] = y[j];
          break;
        }
      }
      return x;
    }

    struct FrozenRow {
      int label = 0;
      double rhs = 0.0;
      std::vector<double> row;
    };

    const Problem& p_;
    const Options& opts_;
    std::vector<Transform> transforms_;
    int rows_ = 0;
    int cols_ = 0;
    int artificial_col_ = 0;
    int artificial_label_ = 0;
    std::size_t stride_ = 0;
    std::vector<double> t_;
    std::vector<double> b_;
    std::vector<double> d_;
    double z0_ = 0.0;
    std::vector<Kind> kind_;
    std::vector<int> basic_;
    std::vector<int> nonbasic_;
    std::vector<bool> active_;
    std::vector<double> structural_costs_;
    std::vector<double> reduced_costs_;
    std::vector<FrozenRow> frozen_;
    std::vector<int> frozen_nonbasic_;
    std::vector<int> row_nnz_;
    std::vector<int> col_nnz_;
    std::vector<int> nz_;
    long iterations_ = 0;
    long max_iter_ = 0;
  };

  Options opts_;
};

/// Dual simplex in active-set form for problems with few variables and a
/// growing pool of rows:
///   minimize cost . y  subject to  y >= lower  and  a_k . y <= b_k for every pooled row.
/// The basis is a set of num_vars active constraints (rows or bounds) kept as
/// a dense inverse, so an iteration costs O(num_vars^2) plus pricing over a
/// working set of rows. With cost >= 0 the vertex y = lower is dual feasible,
/// so no phase 1 is needed and rows can be added between optimize() calls.
class ActiveSetDual {
public:
  ActiveSetDual(std::vector<double> cost, std::span<const double> lower, Options opts = {})
      : opts_(opts), n_(static_cast<int>(cost.size())), cost_(std::move(cost)) {
    if (lower.size() != cost_.size()) {
      throw ContractError("ActiveSetDual needs one lower bound per variable");
    }
    for (double c : cost_) {
      if (!(c >= 0.0)) {
        throw ContractError("ActiveSetDual needs a nonnegative cost vector");
      }
    }
    for (int j = 0; j < n_; ++j) {
      rows_.push_back(PoolRow{{{j, -1.0}}, -lower[static_cast<std::size_t>(j)]});
      basis_.push_back(j);
    }
    in_basis_.assign(static_cast<std::size_t>(n_), true);
    refactor();
  }

  [[nodiscard]] int num_vars() const noexcept { return n_; }
  [[nodiscard]] int num_rows() const noexcept { return static_cast<int>(rows_.size()) - n_; }
  [[nodiscard]] long iterations() const noexcept { return iterations_; }

  /// Pools sum coef * y <= rhs; takes effect at the next optimize().
  void add_row(std::vector<std::pair<int, double>> coefs, double rhs) {
    for (auto [j, a] : coefs) {
      if (j < 0 || j >= n_) {
        throw ContractError("row references unknown variable " + std::to_string(j));
      }
    }
    rows_.push_back(PoolRow{std::move(coefs), rhs});
    in_basis_.push_back(false);
    working_.push_back(static_cast<int>(rows_.size()) - 1);
    if (working_.size() > 8 * static_cast<std::size_t>(n_) + 64) {
      solve_primal();
      refresh_working(kInf);
    }
  }

  /// Dual simplex pivots until every pooled row holds. Returns false when the
  /// pool is infeasible.
  bool optimize() {
    bool bland = opts_.rule == PivotRule::bland;
    int streak = 0;
    const long cap = opts_.max_iterations > 0
                         ? iterations_ + opts_.max_iterations
                         : iterations_ + 50L * static_cast<long>(rows_.size()) + 10000L;
    while (true) {
      if (iterations_ > cap) {
        throw SolverError("dual simplex iteration limit reached");
      }
      solve_primal();
      double scale = 1.0;
      for (double v : y_) {
        scale = std::max(scale, std::abs(v));
      }
      const double feas = opts_.tol * scale;
      // The working set only changes when none of its rows is violated, so
      // Bland's rule over it still terminates.
      int k = select_violated(working_, feas, bland);
      if (k < 0) {
        refresh_working(feas);
        k = select_violated(working_, feas, bland);
      }
      if (k < 0) {
        return true;
      }
      // alpha = B^-T a_k: how the entering row is expressed in the active rows.
      std::vector<double> alpha(static_cast<std::size_t>(n_), 0.0);
      for (auto [j, a] : rows_[static_cast<std::size_t>(k)].coefs) {
        const double* binv_row = &binv_[static_cast<std::size_t>(j) * static_cast<std::size_t>(n_)];
        for (int r = 0; r < n_; ++r) {
          alpha[static_cast<std::size_t>(r)] += a * binv_row[r];
        }
      }
      // Ratio test over pivots above kPivotTol; exact ties go to the largest
      // pivot, or in Bland mode to the lowest index among well-sized pivots.
      constexpr double kPivotTol = 1e-7;
      double bound = kInf;
      double max_alpha = 0.0;
      for (int r = 0; r < n_; ++r) {
        const double ar = alpha[static_cast<std::size_t>(r)];
        if (ar > kPivotTol) {
          bound = std::min(bound, std::max(mu_[static_cast<std::size_t>(r)], 0.0) / ar);
          max_alpha = std::max(max_alpha, ar);
        }
      }
      int leave = -1;
      double best = 0.0;
      for (int r = 0; r < n_; ++r) {
        const double ar = alpha[static_cast<std::size_t>(r)];
        if (ar <= kPivotTol) {
          continue;
        }
        const double ratio = std::max(mu_[static_cast<std::size_t>(r)], 0.0) / ar;
        if (ratio > bound) {
          continue;
        }
        bool take = leave < 0;
        if (!take && bland) {
          take = ar >= 0.1 * max_alpha &&
                 (alpha[static_cast<std::size_t>(leave)] < 0.1 * max_alpha ||
                  basis_[static_cast<std::size_t>(r)] < basis_[static_cast<std::size_t>(leave)]);
        } else if (!take) {
          take = ar > alpha[static_cast<std::size_t>(leave)];
        }
        if (take) {
          leave = r;
          best = ratio;
        }
      }
      if (leave < 0) {
        return false;
      }
      // The objective rises by step * violation; tiny rises count as
      // degenerate so rounding noise does not switch off the anti-cycling rule.
      const double gain = best * (activity(rows_[static_cast<std::size_t>(k)]) -
                                  rows_[static_cast<std::size_t>(k)].rhs);
      double objective_scale = 1.0;
      for (int j = 0; j < n_; ++j) {
        objective_scale += std::abs(cost_[static_cast<std::size_t>(j)] * y_[static_cast<std::size_t>(j)]);
      }
      exchange(leave, k, alpha, best);
      if (opts_.rule == PivotRule::hybrid) {
        if (gain <= opts_.tol * objective_scale) {
          if (++streak >= opts_.degenerate_streak) {
            bland = true;
          }
        } else {
          streak = 0;
          bland = false;
        }
      }
    }
  }

  /// Primal values at the current basis.
  [[nodiscard]] const std::vector<double>& values() {
    solve_primal();
    return y_;
  }

private:
  struct PoolRow {
    std::vector<std::pair<int, double>> coefs;
    double rhs = 0.0;
  };

  static constexpr int kRefactorEvery = 64;

  /// Most violated row of the sorted `candidates`, or with `first` the lowest
  /// violated index; -1 if none.
  [[nodiscard]] int select_violated(const std::vector<int>& candidates, double feas,
                                    bool first) const {
    int k = -1;
    double worst = feas;
    for (int r : candidates) {
      const auto ru = static_cast<std::size_t>(r);
      if (in_basis_[ru]) {
        continue;
      }
      const double v = activity(rows_[ru]) - rows_[ru].rhs;
      if (v > worst) {
        if (first) {
          return r;
        }
        k = r;
        worst = v;
      }
    }
    return k;
  }

  /// Partial pricing: the working set holds recent and nearly binding rows.
  /// Rebuilt from a full pass over the pool when it has no violated row.
  void refresh_working(double feas) {
    std::vector<std::pair<double, int>> slack;
    bool violated = false;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (in_basis_[r]) {
        continue;
      }
      const double v = rows_[r].rhs - activity(rows_[r]);
      violated = violated || v < -feas;
      slack.emplace_back(v, static_cast<int>(r));
    }
    const std::size_t keep = std::min(slack.size(), 2 * static_cast<std::size_t>(n_) + 16);
    if (!violated && slack.size() <= working_.size()) {
      return;
    }
    std::partial_sort(slack.begin(), slack.begin() + static_cast<std::ptrdiff_t>(keep),
                      slack.end());
    working_.clear();
    for (std::size_t q = 0; q < keep; ++q) {
      working_.push_back(slack[q].second);
    }
    std::sort(working_.begin(), working_.end());
  }

  [[nodiscard]] double activity(const PoolRow& row) const {
    double v = 0.0;
    for (auto [j, a] : row.coefs) {
      v += a * y_[static_cast<std::size_t>(j)];
    }
    return v;
  }

  /// y = B^-1 b over the active rows.
  void solve_primal() {
    const auto n = static_cast<std::size_t>(n_);
    y_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* binv_row = &binv_[i * n];
      double v = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        v += binv_row[r] * rows_[static_cast<std::size_t>(basis_[r])].rhs;
      }
      y_[i] = v;
    }
  }

  /// Replaces active row `leave` by pool row k (step length t in the multipliers).
  void exchange(int leave, int k, const std::vector<double>& alpha, double t) {
    ++iterations_;
    const auto n = static_cast<std::size_t>(n_);
    const auto r = static_cast<std::size_t>(leave);
    const double pivot = alpha[r];
    for (std::size_t q = 0; q < n; ++q) {
      mu_[q] -= t * alpha[q];
    }
    mu_[r] = t;
    // Sherman-Morrison on B^-1 for replacing row r of B.
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = binv_[i * n + r];
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (u[i] == 0.0) {
        continue;
      }
      double* binv_row = &binv_[i * n];
      const double f = u[i] / pivot;
      for (std::size_t q = 0; q < n; ++q) {
        binv_row[q] -= f * alpha[q];
      }
      binv_row[r] = f;
    }
    in_basis_[static_cast<std::size_t>(basis_[r])] = false;
    in_basis_[static_cast<std::size_t>(k)] = true;
    basis_[r] = k;
    if (++since_refactor_ >= kRefactorEvery) {
      refactor();
    }
  }

  /// Recomputes B^-1 by Gauss-Jordan with partial pivoting and the
  /// multipliers mu = -B^-T cost.
  void refactor() {
    since_refactor_ = 0;
    const auto n = static_cast<std::size_t>(n_);
    std::vector<double> m(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (auto [j, a] : rows_[static_cast<std::size_t>(basis_[r])].coefs) {
        m[r * n + static_cast<std::size_t>(j)] += a;
      }
    }
    // inv starts as identity; row operations on [m | inv] give inv = m^-1.
    std::vector<double> inv(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      inv[i * n + i] = 1.0;
    }
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t p = c;
      for (std::size_t i = c + 1; i < n; ++i) {
        if (std::abs(m[i * n + c]) > std::abs(m[p * n + c])) {
          p = i;
        }
      }
      if (std::abs(m[p * n + c]) < 1e-12) {
        throw SolverError("dual simplex basis became singular");
      }
      if (p != c) {
        std::swap_ranges(&m[p * n], &m[p * n] + n, &m[c * n]);
        std::swap_ranges(&inv[p * n], &inv[p * n] + n, &inv[c * n]);
      }
      const double d = m[c * n + c];
      for (std::size_t q = 0; q < n; ++q) {
        m[c * n + q] /= d;
        inv[c * n + q] /= d;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double f = m[i * n + c];
        if (i == c || f == 0.0) {
          continue;
        }
        for (std::size_t q = 0; q < n; ++q) {
          m[i * n + q] -= f * m[c * n + q];
          inv[i * n + q] -= f * inv[c * n + q];
        }
      }
    }
    // m was B (rows = active constraints), so inv = B^-1 with binv(j, r).
    binv_ = std::move(inv);
    mu_.assign(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      double v = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        v += binv_[j * n + r] * cost_[j];
      }
      mu_[r] = -v;
    }
  }

  Options opts_;
  int n_ = 0;
  std::vector<double> cost_;
  std::vector<PoolRow> rows_; ///< bounds -y_j <= 0 first, then pooled rows
  std::vector<bool> in_basis_;
  std::vector<int> basis_;    ///< active constraint per basis position
  std::vector<double> binv_;  ///< B^-1, row-major n x n
  std::vector<double> mu_;    ///< multipliers of the active constraints (>= 0)
  std::vector<double> y_;
  std::vector<int> working_;  ///< candidate rows for pricing
  int since_refactor_ = 0;
  long iterations_ = 0;
};

} // namespace resplan::lp
