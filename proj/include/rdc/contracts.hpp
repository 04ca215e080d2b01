#ifndef RDC_CONTRACTS_HPP
#define RDC_CONTRACTS_HPP

// LTI recursively-defined assume/guarantee contracts.
//
// A block of depth m is a set of rows  sum_s D_s d(k-m+s) + sum_s Y_s y(k-m+s) <= rhs.
// Assumption blocks read d(k-m..k) and y(k-m..k-1); guarantee blocks read d(k-m..k)
// and y(k-m..k). Columns are laid out oldest slot first. Each block is enforced at
// every time k >= its own depth.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rdc/matrix.hpp"

namespace rdc {

/// Time-indexed vector signal: values[t][coord].
using Signal = std::vector<std::vector<double>>;

inline Signal zero_signal(std::size_t length, std::size_t dim) {
    return Signal(length, std::vector<double>(dim, 0.0));
}

/// Real number extended with -inf and +inf as distinguished states.
class ExtReal {
public:
    enum class Kind { neg_inf, finite, pos_inf };

    constexpr ExtReal() = default;
    static constexpr ExtReal neg_inf() { return ExtReal(Kind::neg_inf, 0.0); }
    static constexpr ExtReal pos_inf() { return ExtReal(Kind::pos_inf, 0.0); }
    static constexpr ExtReal finite(double v) { return ExtReal(Kind::finite, v); }

    constexpr Kind kind() const { return kind_; }
    constexpr bool is_finite() const { return kind_ == Kind::finite; }
    constexpr bool is_neg_inf() const { return kind_ == Kind::neg_inf; }
    constexpr bool is_pos_inf() const { return kind_ == Kind::pos_inf; }

    double value() const {
        if (!is_finite()) {
            throw std::logic_error("ExtReal::value on infinite sentinel");
        }
        return value_;
    }

    /// IEEE view, for arithmetic-free comparisons and printing.
    double as_double() const {
        switch (kind_) {
            case Kind::neg_inf: return -std::numeric_limits<double>::infinity();
            case Kind::pos_inf: return std::numeric_limits<double>::infinity();
            default: return value_;
        }
    }

    bool le(double bound) const { return as_double() <= bound; }

    friend bool operator<(const ExtReal& a, const ExtReal& b) { return a.as_double() < b.as_double(); }
    friend bool operator==(const ExtReal& a, const ExtReal& b) {
        return a.kind_ == b.kind_ && (a.kind_ != Kind::finite || a.value_ == b.value_);
    }

    static ExtReal max(const ExtReal& a, const ExtReal& b) { return a < b ? b : a; }

private:
    constexpr ExtReal(Kind k, double v) : kind_(k), value_(v) {}
    Kind kind_ = Kind::neg_inf;
    double value_ = 0.0;
};

enum class BlockKind { assumption, guarantee };

inline const char* to_string(BlockKind k) { return k == BlockKind::assumption ? "assumption" : "guarantee"; }

/// One group of windowed linear inequalities sharing a depth.
struct InequalityBlock {
    BlockKind kind = BlockKind::guarantee;
    int depth = 0;
    Matrix coeff_d;
    Matrix coeff_y;
    std::vector<double> rhs;

    std::size_t rows() const { return rhs.size(); }

    /// Number of y slots the block reads.
    int y_slots() const { return kind == BlockKind::assumption ? depth : depth + 1; }

    void validate(std::size_t n_d, std::size_t n_y) const {
        if (depth < 0) {
            throw DimensionError("block depth must be nonnegative");
        }
        std::size_t rows = rhs.size();
        if (coeff_d.rows() != rows || coeff_y.rows() != rows) {
            throw DimensionError("block row counts differ: coeff_d " + std::to_string(coeff_d.rows()) +
                                 ", coeff_y " + std::to_string(coeff_y.rows()) + ", rhs " +
                                 std::to_string(rows));
        }
        std::size_t want_d = static_cast<std::size_t>(depth + 1) * n_d;
        std::size_t want_y = static_cast<std::size_t>(y_slots()) * n_y;
        if (coeff_d.cols() != want_d) {
            throw DimensionError("coeff_d has " + std::to_string(coeff_d.cols()) + " columns, expected " +
                                 std::to_string(want_d));
        }
        if (coeff_y.cols() != want_y) {
            throw DimensionError("coeff_y has " + std::to_string(coeff_y.cols()) + " columns, expected " +
                                 std::to_string(want_y));
        }
    }

    /// Residual (row . window - rhs) of one row at absolute time k. `d_at(t, c)` and
    /// `y_at(t, c)` return signal values at absolute times.
    template <typename DAt, typename YAt>
    double residual(std::size_t row, int k, std::size_t n_d, std::size_t n_y, DAt&& d_at, YAt&& y_at) const {
        double s = -rhs[row];
        auto drow = coeff_d.row(row);
        for (int slot = 0; slot <= depth; ++slot) {
            int t = k - depth + slot;
            for (std::size_t c = 0; c < n_d; ++c) {
                double a = drow[slot * n_d + c];
                if (a != 0.0) {
                    s += a * d_at(t, c);
                }
            }
        }
        auto yrow = coeff_y.row(row);
        for (int slot = 0; slot < y_slots(); ++slot) {
            int t = k - depth + slot;
            for (std::size_t c = 0; c < n_y; ++c) {
                double a = yrow[slot * n_y + c];
                if (a != 0.0) {
                    s += a * y_at(t, c);
                }
            }
        }
        return s;
    }
};

/// Fluent row builder addressing slots by lag (0 = current time k, 1 = k-1, ...).
class BlockBuilder {
public:
    BlockBuilder(BlockKind kind, int depth, std::size_t n_d, std::size_t n_y) : n_d_(n_d), n_y_(n_y) {
        block_.kind = kind;
        block_.depth = depth;
        block_.coeff_d = Matrix(0, static_cast<std::size_t>(depth + 1) * n_d);
        block_.coeff_y = Matrix(0, static_cast<std::size_t>(block_.y_slots()) * n_y);
    }

    BlockBuilder& row() {
        flush();
        cur_d_.assign(block_.coeff_d.cols(), 0.0);
        cur_y_.assign(block_.coeff_y.cols(), 0.0);
        cur_rhs_ = 0.0;
        open_ = true;
        return *this;
    }

    BlockBuilder& d(int lag, std::size_t coord, double coef) {
        require_open();
        if (lag < 0 || lag > block_.depth || coord >= n_d_) {
            throw DimensionError("BlockBuilder::d out of range");
        }
        cur_d_[static_cast<std::size_t>(block_.depth - lag) * n_d_ + coord] += coef;
        return *this;
    }

    BlockBuilder& y(int lag, std::size_t coord, double coef) {
        require_open();
        int slot = block_.depth - lag;
        if (lag < 0 || slot < 0 || slot >= block_.y_slots() || coord >= n_y_) {
            throw DimensionError("BlockBuilder::y out of range");
        }
        cur_y_[static_cast<std::size_t>(slot) * n_y_ + coord] += coef;
        return *this;
    }

    BlockBuilder& rhs(double value) {
        require_open();
        cur_rhs_ = value;
        return *this;
    }

    InequalityBlock build() {
        flush();
        return block_;
    }

private:
    void require_open() const {
        if (!open_) {
            throw std::logic_error("BlockBuilder: call row() first");
        }
    }

    void flush() {
        if (!open_) {
            return;
        }
        block_.coeff_d.append_row(cur_d_);
        block_.coeff_y.append_row(cur_y_);
        block_.rhs.push_back(cur_rhs_);
        open_ = false;
    }

    std::size_t n_d_;
    std::size_t n_y_;
    InequalityBlock block_;
    std::vector<double> cur_d_;
    std::vector<double> cur_y_;
    double cur_rhs_ = 0.0;
    bool open_ = false;
};

/// Embeds a block into a deeper window with zero coefficients on the added older slots.
inline InequalityBlock embed_block(const InequalityBlock& b, int new_depth, std::size_t n_d, std::size_t n_y) {
    if (new_depth < b.depth) {
        throw DimensionError("embed_block: cannot shrink depth");
    }
    InequalityBlock out;
    out.kind = b.kind;
    out.depth = new_depth;
    out.rhs = b.rhs;
    int shift = new_depth - b.depth;
    out.coeff_d = Matrix(b.rows(), static_cast<std::size_t>(new_depth + 1) * n_d);
    out.coeff_y = Matrix(b.rows(), static_cast<std::size_t>(out.y_slots()) * n_y);
    for (std::size_t r = 0; r < b.rows(); ++r) {
        for (std::size_t j = 0; j < b.coeff_d.cols(); ++j) {
            out.coeff_d(r, shift * n_d + j) = b.coeff_d(r, j);
        }
        for (std::size_t j = 0; j < b.coeff_y.cols(); ++j) {
            out.coeff_y(r, shift * n_y + j) = b.coeff_y(r, j);
        }
    }
    return out;
}

/// Window of consecutive signal samples, oldest first.
struct SignalWindow {
    std::size_t dim = 0;
    std::vector<std::vector<double>> values;

    std::size_t length() const { return values.size(); }

    void validate() const {
        for (const auto& v : values) {
            if (v.size() != dim) {
                throw DimensionError("signal window sample has wrong dimension");
            }
        }
    }
};

class LtiRdContract {
public:
    LtiRdContract() = default;

    LtiRdContract(std::size_t n_d, std::size_t n_y, std::vector<InequalityBlock> assumptions,
                  std::vector<InequalityBlock> guarantees, std::string label = {})
        : n_d_(n_d), n_y_(n_y), assumptions_(std::move(assumptions)), guarantees_(std::move(guarantees)),
          label_(std::move(label)) {
        if (n_d_ == 0 || n_y_ == 0) {
            throw DimensionError("contract '" + label_ + "': n_d and n_y must be positive");
        }
        for (const auto& b : assumptions_) {
            if (b.kind != BlockKind::assumption) {
                throw DimensionError("contract '" + label_ + "': guarantee-kind block in assumption list");
            }
            b.validate(n_d_, n_y_);
        }
        for (const auto& b : guarantees_) {
            if (b.kind != BlockKind::guarantee) {
                throw DimensionError("contract '" + label_ + "': assumption-kind block in guarantee list");
            }
            b.validate(n_d_, n_y_);
        }
        if (guarantees_.empty()) {
            InequalityBlock empty;
            empty.kind = BlockKind::guarantee;
            empty.depth = 0;
            empty.coeff_d = Matrix(0, n_d_);
            empty.coeff_y = Matrix(0, n_y_);
            guarantees_.push_back(std::move(empty));
        }
    }

    std::size_t n_d() const { return n_d_; }
    std::size_t n_y() const { return n_y_; }
    const std::string& label() const { return label_; }
    const std::vector<InequalityBlock>& assumptions() const { return assumptions_; }
    const std::vector<InequalityBlock>& guarantees() const { return guarantees_; }

    const std::vector<InequalityBlock>& blocks(BlockKind k) const {
        return k == BlockKind::assumption ? assumptions_ : guarantees_;
    }

    /// Contract-level depths, at least 1.
    int assumption_depth() const { return max_depth(assumptions_); }
    int guarantee_depth() const { return max_depth(guarantees_); }
    int depth(BlockKind k) const { return k == BlockKind::assumption ? assumption_depth() : guarantee_depth(); }

    std::size_t assumption_rows() const { return count_rows(assumptions_); }
    std::size_t guarantee_rows() const { return count_rows(guarantees_); }

    /// Current-time d coefficients of every guarantee row, stacked (rows x n_d).
    Matrix current_input_coefficients() const {
        Matrix out(0, n_d_);
        for (const auto& b : guarantees_) {
            for (std::size_t r = 0; r < b.rows(); ++r) {
                auto row = b.coeff_d.row(r);
                out.append_row(row.subspan(static_cast<std::size_t>(b.depth) * n_d_, n_d_));
            }
        }
        return out;
    }

    /// True iff any assumption row has a nonzero y coefficient.
    bool assumptions_read_output() const {
        return std::any_of(assumptions_.begin(), assumptions_.end(),
                           [](const InequalityBlock& b) { return !b.coeff_y.is_zero(); });
    }

    friend bool operator==(const LtiRdContract& a, const LtiRdContract& b) {
        auto same = [](const std::vector<InequalityBlock>& x, const std::vector<InequalityBlock>& y) {
            if (x.size() != y.size()) {
                return false;
            }
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (x[i].kind != y[i].kind || x[i].depth != y[i].depth || !(x[i].coeff_d == y[i].coeff_d) ||
                    !(x[i].coeff_y == y[i].coeff_y) || x[i].rhs != y[i].rhs) {
                    return false;
                }
            }
            return true;
        };
        return a.n_d_ == b.n_d_ && a.n_y_ == b.n_y_ && a.label_ == b.label_ &&
               same(a.assumptions_, b.assumptions_) && same(a.guarantees_, b.guarantees_);
    }

private:
    static int max_depth(const std::vector<InequalityBlock>& blocks) {
        int m = 1;
        for (const auto& b : blocks) {
            m = std::max(m, b.depth);
        }
        return m;
    }

    static std::size_t count_rows(const std::vector<InequalityBlock>& blocks) {
        std::size_t n = 0;
        for (const auto& b : blocks) {
            n += b.rows();
        }
        return n;
    }

    std::size_t n_d_ = 1;
    std::size_t n_y_ = 1;
    std::vector<InequalityBlock> assumptions_;
    std::vector<InequalityBlock> guarantees_;
    std::string label_;
};

namespace detail {

// Max residual over the blocks of one kind, windows indexed so that the last d sample is time k.
inline ExtReal eval_blocks(const LtiRdContract& c, BlockKind kind, const SignalWindow& d_window,
                           const SignalWindow& y_window) {
    d_window.validate();
    y_window.validate();
    // Blocks read window suffixes, so any window at least as long as the deepest block works.
    int deepest = 0;
    for (const auto& b : c.blocks(kind)) {
        deepest = std::max(deepest, b.depth);
    }
    std::size_t len = d_window.length();
    std::size_t want_y = kind == BlockKind::assumption ? len - 1 : len;
    if (d_window.dim != c.n_d() || len < static_cast<std::size_t>(deepest + 1)) {
        throw DimensionError("d window must hold at least " + std::to_string(deepest + 1) +
                             " samples of dimension " + std::to_string(c.n_d()));
    }
    if (y_window.dim != c.n_y() || y_window.length() != want_y) {
        throw DimensionError("y window must hold " + std::to_string(want_y) + " samples of dimension " +
                             std::to_string(c.n_y()));
    }
    int depth = static_cast<int>(len) - 1;
    // Window index w corresponds to time w with k = depth.
    auto d_at = [&](int t, std::size_t coord) { return d_window.values[t][coord]; };
    auto y_at = [&](int t, std::size_t coord) { return y_window.values[t][coord]; };
    ExtReal best = ExtReal::neg_inf();
    for (const auto& b : c.blocks(kind)) {
        for (std::size_t r = 0; r < b.rows(); ++r) {
            best = ExtReal::max(best, ExtReal::finite(b.residual(r, depth, c.n_d(), c.n_y(), d_at, y_at)));
        }
    }
    return best;
}

inline bool check_prefix(const LtiRdContract& c, BlockKind kind, const Signal& d, const Signal& y, double tol) {
    if (d.size() != y.size()) {
        throw DimensionError("prefix length mismatch: d has " + std::to_string(d.size()) + " samples, y has " +
                             std::to_string(y.size()));
    }
    for (const auto& v : d) {
        if (v.size() != c.n_d()) {
            throw DimensionError("d sample dimension mismatch");
        }
    }
    for (const auto& v : y) {
        if (v.size() != c.n_y()) {
            throw DimensionError("y sample dimension mismatch");
        }
    }
    auto d_at = [&](int t, std::size_t coord) { return d[t][coord]; };
    auto y_at = [&](int t, std::size_t coord) { return y[t][coord]; };
    int n = static_cast<int>(d.size()) - 1;
    for (const auto& b : c.blocks(kind)) {
        for (int k = b.depth; k <= n; ++k) {
            for (std::size_t r = 0; r < b.rows(); ++r) {
                if (b.residual(r, k, c.n_d(), c.n_y(), d_at, y_at) > tol) {
                    return false;
                }
            }
        }
    }
    return true;
}

}  // namespace detail

inline constexpr double kMembershipTolerance = 1e-9;

/// Assumption function: max over assumption rows of (row . window - rhs); -inf when there are no rows.
/// d_window covers k-L+1..k for some L > deepest block depth, y_window covers k-L+1..k-1.
inline ExtReal eval_alpha(const LtiRdContract& c, const SignalWindow& d_window, const SignalWindow& y_window) {
    return detail::eval_blocks(c, BlockKind::assumption, d_window, y_window);
}

/// Guarantee function; both windows cover the same L samples ending at k.
inline ExtReal eval_gamma(const LtiRdContract& c, const SignalWindow& d_window, const SignalWindow& y_window) {
    return detail::eval_blocks(c, BlockKind::guarantee, d_window, y_window);
}

/// Assumptions hold on the finite prefix d(0..n), y(0..n): every block at every k in [depth, n].
inline bool check_assumption_prefix(const LtiRdContract& c, const Signal& d, const Signal& y,
                                    double tol = kMembershipTolerance) {
    return detail::check_prefix(c, BlockKind::assumption, d, y, tol);
}

inline bool check_guarantee_prefix(const LtiRdContract& c, const Signal& d, const Signal& y,
                                   double tol = kMembershipTolerance) {
    return detail::check_prefix(c, BlockKind::guarantee, d, y, tol);
}

/// Strict recursive definition with respect to the given d coordinates (0-based):
/// no guarantee row reads the current-time sample of any of them.
inline bool is_srd(const LtiRdContract& c, const std::set<std::size_t>& input_coords) {
    for (std::size_t coord : input_coords) {
        if (coord >= c.n_d()) {
            throw DimensionError("is_srd: coordinate " + std::to_string(coord) + " out of range");
        }
    }
    for (const auto& b : c.guarantees()) {
        for (std::size_t r = 0; r < b.rows(); ++r) {
            for (std::size_t coord : input_coords) {
                if (b.coeff_d(r, static_cast<std::size_t>(b.depth) * c.n_d() + coord) != 0.0) {
                    return false;
                }
            }
        }
    }
    return true;
}

}  // namespace rdc

#endif
