#ifndef RDC_SIMPLEX_HPP
#define RDC_SIMPLEX_HPP

// Dense two-phase primal simplex for  max c.x + c0  s.t.  A_eq x = b_eq,  A_in x <= b_in,  x free.
//
// Equalities are eliminated first by sparse substitution; the remaining inequality
// problem is solved on a dense tableau with x = x+ - x-.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rdc/matrix.hpp"

namespace rdc {

struct LpProblem {
    std::size_t n_vars = 0;
    std::vector<double> objective;
    double objective_constant = 0.0;
    Matrix eq_lhs;
    std::vector<double> eq_rhs;
    Matrix ineq_lhs;
    std::vector<double> ineq_rhs;
    std::vector<std::string> var_names;

    explicit LpProblem(std::size_t n = 0)
        : n_vars(n), objective(n, 0.0), eq_lhs(0, n), ineq_lhs(0, n) {}

    void add_eq(std::span<const double> row, double rhs) {
        eq_lhs.append_row(row);
        eq_rhs.push_back(rhs);
    }

    void add_ineq(std::span<const double> row, double rhs) {
        ineq_lhs.append_row(row);
        ineq_rhs.push_back(rhs);
    }

    void validate() const {
        if (objective.size() != n_vars || eq_lhs.cols() != n_vars || ineq_lhs.cols() != n_vars) {
            throw DimensionError("LpProblem: column counts differ from n_vars");
        }
        if (eq_lhs.rows() != eq_rhs.size() || ineq_lhs.rows() != ineq_rhs.size()) {
            throw DimensionError("LpProblem: row counts differ from rhs sizes");
        }
        if (!var_names.empty() && var_names.size() != n_vars) {
            throw DimensionError("LpProblem: var_names size differs from n_vars");
        }
    }

    std::string var_name(std::size_t j) const {
        return var_names.empty() ? "x" + std::to_string(j) : var_names[j];
    }
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        default: return "unbounded";
    }
}

struct LpOutcome {
    LpStatus status = LpStatus::infeasible;
    double value = 0.0;            // meaningful iff optimal; includes objective_constant
    std::vector<double> point;     // empty unless optimal
    std::size_t iterations = 0;
};

class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SolverOptions {
    double pivot_tol = 1e-10;
    double feas_tol = 1e-9;
    double opt_tol = 1e-9;
    std::size_t stall_threshold = 50;
    std::size_t max_iterations = 0;  // 0: derived from tableau size
    bool presolve = true;
};

/// Largest equality/inequality violation of `x`, relative to 1 + max |rhs|.
inline double lp_relative_violation(const LpProblem& lp, const std::vector<double>& x) {
    double scale = 1.0;
    for (double b : lp.eq_rhs) scale = std::max(scale, 1.0 + std::abs(b));
    for (double b : lp.ineq_rhs) scale = std::max(scale, 1.0 + std::abs(b));
    double worst = 0.0;
    for (std::size_t r = 0; r < lp.eq_rhs.size(); ++r) {
        worst = std::max(worst, std::abs(dot(lp.eq_lhs.row(r), x) - lp.eq_rhs[r]));
    }
    for (std::size_t r = 0; r < lp.ineq_rhs.size(); ++r) {
        worst = std::max(worst, dot(lp.ineq_lhs.row(r), x) - lp.ineq_rhs[r]);
    }
    return worst / scale;
}

namespace detail {

struct DenseResult {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    std::size_t iterations = 0;
};

// max c.x s.t. A x <= b, x free.
class Tableau {
public:
    Tableau(const Matrix& a, const std::vector<double>& b, const std::vector<double>& c, const SolverOptions& opt,
            bool bland_only)
        : opt_(opt), bland_(bland_only), m_(a.rows()), n_(a.cols()) {
        for (std::size_t i = 0; i < m_; ++i) {
            if (b[i] < 0.0) ++n_art_;
        }
        ncols_ = 2 * n_ + m_ + n_art_;
        width_ = ncols_ + 1;
        t_.assign(m_ * width_, 0.0);
        basis_.assign(m_, 0);
        std::size_t art = 0;
        for (std::size_t i = 0; i < m_; ++i) {
            double sign = b[i] < 0.0 ? -1.0 : 1.0;
            for (std::size_t j = 0; j < n_; ++j) {
                at(i, j) = sign * a(i, j);
                at(i, n_ + j) = -sign * a(i, j);
            }
            at(i, 2 * n_ + i) = sign;
            at(i, ncols_) = sign * b[i];
            if (sign < 0.0) {
                std::size_t col = 2 * n_ + m_ + art++;
                at(i, col) = 1.0;
                basis_[i] = col;
            } else {
                basis_[i] = 2 * n_ + i;
            }
        }
        cost_.assign(ncols_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) {
            cost_[j] = c[j];
            cost_[n_ + j] = -c[j];
        }
        bscale_ = 1.0;
        for (double v : b) bscale_ = std::max(bscale_, 1.0 + std::abs(v));
        limit_ = opt_.max_iterations ? opt_.max_iterations : 20 * (m_ + ncols_) + 2000;
    }

    DenseResult run() {
        DenseResult res;
        if (n_art_ > 0) {
            std::vector<double> phase1(ncols_, 0.0);
            for (std::size_t j = 2 * n_ + m_; j < ncols_; ++j) phase1[j] = -1.0;
            set_costs(phase1);
            LpStatus s = iterate(true);
            if (s != LpStatus::optimal) {
                throw NumericalFailure("phase 1 reported unbounded");
            }
            if (obj_ < -opt_.feas_tol * bscale_) {
                res.status = LpStatus::infeasible;
                res.iterations = iters_;
                return res;
            }
            drive_out_artificials();
        }
        set_costs(cost_);
        res.status = iterate(false);
        res.iterations = iters_;
        if (res.status == LpStatus::optimal) {
            res.x = extract();
        }
        return res;
    }

private:
    double& at(std::size_t i, std::size_t j) { return t_[i * width_ + j]; }
    double at(std::size_t i, std::size_t j) const { return t_[i * width_ + j]; }
    bool is_art(std::size_t j) const { return j >= 2 * n_ + m_; }

    void set_costs(const std::vector<double>& c) {
        active_cost_ = c;
        d_ = c;
        obj_ = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (dead_[i]) continue;
            double cb = c[basis_[i]];
            if (cb == 0.0) continue;
            for (std::size_t j = 0; j < ncols_; ++j) d_[j] -= cb * at(i, j);
            obj_ += cb * at(i, ncols_);
        }
    }

    void pivot(std::size_t r, std::size_t q) {
        double p = at(r, q);
        double* rr = &t_[r * width_];
        for (std::size_t j = 0; j < width_; ++j) rr[j] /= p;
        rr[q] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) continue;
            double f = at(i, q);
            if (f == 0.0) continue;
            double* ri = &t_[i * width_];
            for (std::size_t j = 0; j < width_; ++j) {
                if (rr[j] != 0.0) ri[j] -= f * rr[j];
            }
            ri[q] = 0.0;
        }
        double f = d_[q];
        if (f != 0.0) {
            for (std::size_t j = 0; j < ncols_; ++j) {
                if (rr[j] != 0.0) d_[j] -= f * rr[j];
            }
            d_[q] = 0.0;
            obj_ += f * rr[ncols_];
        }
        basis_[r] = q;
    }

    LpStatus iterate(bool phase1) {
        bool bland = bland_;
        std::size_t stalled = 0;
        std::size_t count = 0;
        double last = obj_;
        for (;;) {
            if (++count > limit_) {
                if (bland) {
                    throw NumericalFailure("simplex iteration limit reached under Bland's rule");
                }
                bland = true;
                count = 0;
            }
            std::size_t q = SIZE_MAX;
            double best = opt_.opt_tol;
            for (std::size_t j = 0; j < ncols_; ++j) {
                if (!phase1 && is_art(j)) continue;
                if (d_[j] > best) {
                    q = j;
                    if (bland) break;
                    best = d_[j];
                }
            }
            if (q == SIZE_MAX) return LpStatus::optimal;
            std::size_t r = SIZE_MAX;
            double ratio = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                if (dead_[i]) continue;
                double a = at(i, q);
                if (a <= opt_.pivot_tol) continue;
                double v = std::max(0.0, at(i, ncols_)) / a;
                if (r == SIZE_MAX || v < ratio - 1e-12 * (1.0 + ratio)) {
                    r = i;
                    ratio = v;
                } else if (v <= ratio + 1e-12 * (1.0 + ratio)) {
                    bool better = bland ? basis_[i] < basis_[r] : a > at(r, q);
                    if (better) {
                        r = i;
                        ratio = std::min(ratio, v);
                    }
                }
            }
            if (r == SIZE_MAX) return LpStatus::unbounded;
            pivot(r, q);
            ++iters_;
            if (obj_ > last + 1e-12 * (1.0 + std::abs(last))) {
                stalled = 0;
                last = obj_;
            } else if (!bland && ++stalled >= opt_.stall_threshold) {
                bland = true;
            }
        }
    }

    void drive_out_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (dead_[i] || !is_art(basis_[i])) continue;
            std::size_t q = SIZE_MAX;
            double best = opt_.pivot_tol;
            for (std::size_t j = 0; j < 2 * n_ + m_; ++j) {
                if (std::abs(at(i, j)) > best) {
                    best = std::abs(at(i, j));
                    q = j;
                }
            }
            if (q == SIZE_MAX) {
                dead_[i] = true;  // redundant row
            } else {
                pivot(i, q);
            }
        }
    }

    std::vector<double> extract() const {
        std::vector<double> xs(ncols_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            if (!dead_[i]) xs[basis_[i]] = at(i, ncols_);
        }
        std::vector<double> x(n_);
        for (std::size_t j = 0; j < n_; ++j) x[j] = xs[j] - xs[n_ + j];
        return x;
    }

    SolverOptions opt_;
    bool bland_;
    std::size_t m_, n_, n_art_ = 0, ncols_ = 0, width_ = 0;
    std::vector<double> t_;
    std::vector<std::size_t> basis_;
    std::vector<double> cost_, active_cost_, d_;
    std::vector<bool> dead_ = std::vector<bool>(m_, false);
    double obj_ = 0.0;
    double bscale_ = 1.0;
    std::size_t limit_ = 0;
    std::size_t iters_ = 0;
};

using SparseTerms = std::vector<std::pair<std::size_t, double>>;  // sorted by variable

struct SparseRow {
    SparseTerms terms;
    double rhs = 0.0;
};

inline SparseRow sparse_row(std::span<const double> dense, double rhs) {
    SparseRow r;
    r.rhs = rhs;
    for (std::size_t j = 0; j < dense.size(); ++j) {
        if (dense[j] != 0.0) r.terms.emplace_back(j, dense[j]);
    }
    return r;
}

inline double coef_of(const SparseTerms& t, std::size_t var) {
    auto it = std::lower_bound(t.begin(), t.end(), var, [](const auto& p, std::size_t v) { return p.first < v; });
    return it != t.end() && it->first == var ? it->second : 0.0;
}

// row <- row + f * src, dropping `skip` and cancellation residue.
inline SparseTerms axpy_terms(const SparseTerms& row, double f, const SparseTerms& src, std::size_t skip) {
    SparseTerms out;
    out.reserve(row.size() + src.size());
    std::size_t i = 0, j = 0;
    while (i < row.size() || j < src.size()) {
        std::size_t vi = i < row.size() ? row[i].first : SIZE_MAX;
        std::size_t vj = j < src.size() ? src[j].first : SIZE_MAX;
        std::size_t v = std::min(vi, vj);
        double a = vi == v ? row[i++].second : 0.0;
        double b = vj == v ? f * src[j++].second : 0.0;
        if (v == skip) continue;
        double s = a + b;
        if (std::abs(s) > 1e-13 * (std::abs(a) + std::abs(b))) out.emplace_back(v, s);
    }
    return out;
}

struct Elimination {
    std::size_t var;
    SparseRow row;  // row at elimination time; var appears with its pivot coefficient
};

// Result of eliminating equalities: remaining inequality rows and objective over surviving variables.
struct Presolved {
    bool infeasible = false;
    std::vector<SparseRow> ineq;
    SparseTerms objective;
    double constant = 0.0;
    std::vector<Elimination> eliminations;
};

inline Presolved eliminate_equalities(const LpProblem& lp, double feas_tol) {
    Presolved out;
    const std::size_t n = lp.n_vars;
    std::vector<SparseRow> eq;
    for (std::size_t r = 0; r < lp.eq_rhs.size(); ++r) eq.push_back(sparse_row(lp.eq_lhs.row(r), lp.eq_rhs[r]));
    for (std::size_t r = 0; r < lp.ineq_rhs.size(); ++r) {
        out.ineq.push_back(sparse_row(lp.ineq_lhs.row(r), lp.ineq_rhs[r]));
    }
    out.objective = sparse_row(lp.objective, 0.0).terms;
    out.constant = lp.objective_constant;

    double scale = 1.0;
    for (double b : lp.eq_rhs) scale = std::max(scale, 1.0 + std::abs(b));

    // Occurrence lists (may hold stale entries; checked on use).
    std::vector<std::set<std::size_t>> eq_occ(n), in_occ(n);
    for (std::size_t r = 0; r < eq.size(); ++r)
        for (const auto& [v, a] : eq[r].terms) eq_occ[v].insert(r);
    for (std::size_t r = 0; r < out.ineq.size(); ++r)
        for (const auto& [v, a] : out.ineq[r].terms) in_occ[v].insert(r);

    std::vector<bool> done(eq.size(), false);
    for (std::size_t e = 0; e < eq.size(); ++e) {
        SparseRow& row = eq[e];
        done[e] = true;
        if (row.terms.empty()) {
            if (std::abs(row.rhs) > feas_tol * scale) {
                out.infeasible = true;
                return out;
            }
            continue;
        }
        double amax = 0.0;
        for (const auto& [v, a] : row.terms) amax = std::max(amax, std::abs(a));
        // Threshold pivoting: among large enough coefficients prefer the sparsest column.
        std::size_t piv = SIZE_MAX;
        std::size_t piv_occ = SIZE_MAX;
        double piv_a = 0.0;
        for (const auto& [v, a] : row.terms) {
            if (std::abs(a) < 0.5 * amax) continue;
            std::size_t occ = eq_occ[v].size() + in_occ[v].size();
            if (occ < piv_occ || (occ == piv_occ && std::abs(a) > std::abs(piv_a))) {
                piv = v;
                piv_occ = occ;
                piv_a = a;
            }
        }
        // x_piv = (rhs - sum_{q != piv} a_q x_q) / a_piv
        auto substitute = [&](SparseRow& target, std::set<std::size_t>* occ_of_kind, std::size_t target_idx) {
            double c = coef_of(target.terms, piv);
            if (c == 0.0) return;
            double f = -c / piv_a;
            SparseTerms merged = axpy_terms(target.terms, f, row.terms, piv);
            if (occ_of_kind) {
                for (const auto& [v, a] : merged) occ_of_kind[v].insert(target_idx);
            }
            target.terms = std::move(merged);
            target.rhs += f * row.rhs;
        };
        for (std::size_t r : std::set<std::size_t>(eq_occ[piv])) {
            if (r != e && !done[r]) substitute(eq[r], eq_occ.data(), r);
        }
        for (std::size_t r : std::set<std::size_t>(in_occ[piv])) substitute(out.ineq[r], in_occ.data(), r);
        double c = coef_of(out.objective, piv);
        if (c != 0.0) {
            double f = -c / piv_a;
            out.objective = axpy_terms(out.objective, f, row.terms, piv);
            out.constant -= f * row.rhs;
        }
        eq_occ[piv].clear();
        in_occ[piv].clear();
        out.eliminations.push_back({piv, row});
    }
    return out;
}

inline LpOutcome solve_once(const LpProblem& lp, const SolverOptions& opt, bool bland_only, bool presolve) {
    const std::size_t n = lp.n_vars;
    Presolved pre;
    if (presolve) {
        pre = eliminate_equalities(lp, opt.feas_tol);
        if (pre.infeasible) return {LpStatus::infeasible, 0.0, {}, 0};
    } else {
        for (std::size_t r = 0; r < lp.ineq_rhs.size(); ++r) pre.ineq.push_back(sparse_row(lp.ineq_lhs.row(r), lp.ineq_rhs[r]));
        for (std::size_t r = 0; r < lp.eq_rhs.size(); ++r) {
            pre.ineq.push_back(sparse_row(lp.eq_lhs.row(r), lp.eq_rhs[r]));
            SparseRow neg = pre.ineq.back();
            for (auto& [v, a] : neg.terms) a = -a;
            neg.rhs = -neg.rhs;
            pre.ineq.push_back(neg);
        }
        pre.objective = sparse_row(lp.objective, 0.0).terms;
        pre.constant = lp.objective_constant;
    }

    // Compact the surviving variables that appear anywhere.
    std::vector<std::size_t> col_of(n, SIZE_MAX);
    std::vector<std::size_t> var_of;
    auto touch = [&](std::size_t v) {
        if (col_of[v] == SIZE_MAX) {
            col_of[v] = var_of.size();
            var_of.push_back(v);
        }
    };
    double bscale = 1.0;
    std::vector<const SparseRow*> rows;
    for (const auto& r : pre.ineq) {
        if (r.terms.empty()) {
            if (r.rhs < -opt.feas_tol * (1.0 + std::abs(r.rhs))) return {LpStatus::infeasible, 0.0, {}, 0};
            continue;
        }
        rows.push_back(&r);
        bscale = std::max(bscale, 1.0 + std::abs(r.rhs));
        for (const auto& [v, a] : r.terms) touch(v);
    }
    bool free_direction = false;  // objective variable in no constraint
    for (const auto& [v, a] : pre.objective) {
        if (col_of[v] == SIZE_MAX) free_direction = true;
    }

    Matrix a(rows.size(), var_of.size());
    std::vector<double> b(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const auto& [v, coef] : rows[i]->terms) a(i, col_of[v]) = coef;
        b[i] = rows[i]->rhs;
    }
    std::vector<double> c(var_of.size(), 0.0);
    for (const auto& [v, coef] : pre.objective) {
        if (col_of[v] != SIZE_MAX) c[col_of[v]] = coef;
    }

    DenseResult dr;
    if (free_direction) {
        // Unbounded iff the constraints are feasible: run phase 1 only.
        dr = Tableau(a, b, std::vector<double>(var_of.size(), 0.0), opt, bland_only).run();
        if (dr.status == LpStatus::optimal) dr.status = LpStatus::unbounded;
        return {dr.status, 0.0, {}, dr.iterations};
    }
    dr = Tableau(a, b, c, opt, bland_only).run();
    if (dr.status != LpStatus::optimal) return {dr.status, 0.0, {}, dr.iterations};

    std::vector<double> x(n, 0.0);
    for (std::size_t k = 0; k < var_of.size(); ++k) x[var_of[k]] = dr.x[k];
    for (auto it = pre.eliminations.rbegin(); it != pre.eliminations.rend(); ++it) {
        double s = it->row.rhs;
        double p = 0.0;
        for (const auto& [v, coef] : it->row.terms) {
            if (v == it->var) {
                p = coef;
            } else {
                s -= coef * x[v];
            }
        }
        x[it->var] = s / p;
    }
    double value = lp.objective_constant;
    for (std::size_t j = 0; j < n; ++j) value += lp.objective[j] * x[j];
    return {LpStatus::optimal, value, std::move(x), dr.iterations};
}

}  // namespace detail

/// Solves the LP. Deterministic; throws NumericalFailure rather than returning an unverified point.
inline LpOutcome solve(const LpProblem& lp, const SolverOptions& opt = {}) {
    lp.validate();
    struct Attempt {
        bool bland;
        bool presolve;
        double pivot_scale;
    };
    const Attempt attempts[] = {{false, opt.presolve, 1.0}, {true, opt.presolve, 1.0}, {true, false, 1.0},
                                {true, false, 100.0}};
    std::string last_error = "residual check failed";
    for (const Attempt& at : attempts) {
        SolverOptions o = opt;
        o.pivot_tol *= at.pivot_scale;
        LpOutcome out;
        try {
            out = detail::solve_once(lp, o, at.bland, at.presolve);
        } catch (const NumericalFailure& e) {
            last_error = e.what();
            continue;
        }
        if (out.status != LpStatus::optimal) return out;
        if (lp_relative_violation(lp, out.point) <= opt.feas_tol) return out;
    }
    throw NumericalFailure("simplex: " + last_error);
}

/// Plain-text LP-format listing (maximization, all variables free).
inline void write_lp_text(std::ostream& os, const LpProblem& lp, const std::string& title = {}) {
    lp.validate();
    auto term_list = [&](std::span<const double> coefs) {
        std::ostringstream s;
        s.precision(17);
        bool first = true;
        for (std::size_t j = 0; j < coefs.size(); ++j) {
            double a = coefs[j];
            if (a == 0.0) continue;
            s << (a < 0 ? (first ? "-" : " - ") : (first ? "" : " + ")) << std::abs(a) << " " << lp.var_name(j);
            first = false;
        }
        if (first) s << "0 " << lp.var_name(0);
        return s.str();
    };
    os.precision(17);
    if (!title.empty()) os << "\\ " << title << "\n";
    if (lp.objective_constant != 0.0) os << "\\ objective constant " << lp.objective_constant << "\n";
    os << "Maximize\n obj: " << term_list(lp.objective) << "\nSubject To\n";
    for (std::size_t r = 0; r < lp.eq_rhs.size(); ++r) {
        os << " e" << r << ": " << term_list(lp.eq_lhs.row(r)) << " = " << lp.eq_rhs[r] << "\n";
    }
    for (std::size_t r = 0; r < lp.ineq_rhs.size(); ++r) {
        os << " c" << r << ": " << term_list(lp.ineq_lhs.row(r)) << " <= " << lp.ineq_rhs[r] << "\n";
    }
    os << "Bounds\n";
    for (std::size_t j = 0; j < lp.n_vars; ++j) os << " " << lp.var_name(j) << " free\n";
    os << "End\n";
}

}  // namespace rdc

#endif
