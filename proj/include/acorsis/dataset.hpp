#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "acorsis/errors.hpp"

namespace acorsis {

enum class Family { gaussian, binomial };

/// Dense column-major matrix. Column-major because every hot loop in the
/// package walks one column at a time.
class Matrix {
  public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {}
    Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != static_cast<std::size_t>(rows_) * cols_)
            throw dimension_error("matrix data size does not match rows*cols");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& at(int i, int j) { return data_[static_cast<std::size_t>(j) * rows_ + i]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(j) * rows_ + i]; }

    std::span<double> col(int j) { return {data_.data() + static_cast<std::size_t>(j) * rows_, static_cast<std::size_t>(rows_)}; }
    std::span<const double> col(int j) const {
        return {data_.data() + static_cast<std::size_t>(j) * rows_, static_cast<std::size_t>(rows_)};
    }

    const std::vector<double>& data() const { return data_; }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

/// Effect identifier. Variables are numbered 1..p; (0,k) is the main effect
/// of variable k and (j,k) with j >= 1 is the elementwise product of columns
/// j and k. Always j < k and k >= 1.
struct EffectIndex {
    int j = 0;
    int k = 0;
    bool is_main() const { return j == 0; }
    friend bool operator==(const EffectIndex&, const EffectIndex&) = default;
    friend auto operator<=>(const EffectIndex&, const EffectIndex&) = default;
};

inline void validate_effect(const EffectIndex& e, int p) {
    if (e.k < 1 || e.k > p || e.j < 0 || e.j >= e.k)
        throw index_error("invalid effect (" + std::to_string(e.j) + "," + std::to_string(e.k) + ") for p=" + std::to_string(p));
}

/// Immutable sample: response plus design columns, optionally standardized.
/// Safe for concurrent read access; nothing here mutates after construction.
struct Dataset {
    int n = 0;
    int p = 0;
    Family family = Family::gaussian;
    bool standardized = false;
    std::vector<double> y;
    Matrix X;
    int n1 = 0; // class-1 count, binomial only

    /// Column of variable j (1-based, 1..p).
    std::span<const double> x(int j) const {
        if (j < 1 || j > p) throw index_error("variable index " + std::to_string(j) + " out of 1.." + std::to_string(p));
        return X.col(j - 1);
    }
};

namespace detail {

/// Center a column and rescale it to squared norm n, in place.
/// Returns false when the column is constant.
inline bool standardize_column(std::span<double> col) {
    const std::size_t n = col.size();
    double sum = 0.0;
    for (double v : col) sum += v;
    const double mean = sum / static_cast<double>(n);
    double css = 0.0;
    for (double v : col) {
        const double d = v - mean;
        css += d * d;
    }
    if (!(css > 0.0)) return false;
    const double scale = std::sqrt(css / static_cast<double>(n));
    for (double& v : col) v = (v - mean) / scale;
    return true;
}

} // namespace detail

/// Build a Dataset: center every design column and rescale it to squared
/// norm n; do the same to y for the gaussian family. A binomial response
/// must be exactly 0/1 with both classes present and is left untouched.
/// Buffers are taken by value so callers can move them in; standardization
/// happens in place with no extra copy of the design.
inline Dataset standardize(std::vector<double> raw_y, Matrix raw_x, Family family) {
    const int n = raw_x.rows();
    const int p = raw_x.cols();
    if (p < 1) throw dimension_error("need at least one design column");
    if (n < 3) throw dimension_error("need at least 3 samples");
    if (raw_y.size() != static_cast<std::size_t>(n)) throw dimension_error("response length does not match design rows");

    Dataset ds;
    ds.n = n;
    ds.p = p;
    ds.family = family;
    ds.X = std::move(raw_x);
    ds.y = std::move(raw_y);

    for (int j = 0; j < p; ++j) {
        if (!detail::standardize_column(ds.X.col(j))) throw zero_variance_error(j + 1);
    }

    if (family == Family::gaussian) {
        if (!detail::standardize_column(std::span<double>(ds.y)))
            throw zero_variance_error(0, "response has zero variance");
    } else {
        int ones = 0;
        for (double v : ds.y) {
            if (v == 0.0) continue;
            if (v == 1.0) {
                ++ones;
                continue;
            }
            throw degenerate_response_error("binomial response entries must be exactly 0 or 1");
        }
        if (ones == 0 || ones == n) throw degenerate_response_error("binomial response has a single class");
        ds.n1 = ones;
    }
    ds.standardized = true;
    return ds;
}

/// Elementwise product column for an effect; (0,k) returns column k itself.
/// Allocates exactly one length-n buffer and the product is not restandardized.
inline std::vector<double> interaction_column(const Dataset& ds, const EffectIndex& e) {
    validate_effect(e, ds.p);
    std::span<const double> xk = ds.x(e.k);
    std::vector<double> out(xk.begin(), xk.end());
    if (e.j >= 1) {
        std::span<const double> xj = ds.x(e.j);
        for (int i = 0; i < ds.n; ++i) out[i] *= xj[i];
    }
    return out;
}

namespace detail {

struct MomentSums {
    double su = 0.0, sv = 0.0, suu = 0.0, svv = 0.0, suv = 0.0;
};

inline double correlation_from_moments(const MomentSums& m, std::size_t n, bool* defined) {
    const double dn = static_cast<double>(n);
    const double vu = m.suu - m.su * m.su / dn;
    const double vv = m.svv - m.sv * m.sv / dn;
    const bool ok = vu > 1e-12 * std::max(m.suu, 1e-300) && vv > 1e-12 * std::max(m.svv, 1e-300);
    if (defined) *defined = ok;
    if (!ok) return 0.0;
    double r = (m.suv - m.su * m.sv / dn) / std::sqrt(vu * vv);
    if (r > 1.0) r = 1.0;
    if (r < -1.0) r = -1.0;
    return r;
}

} // namespace detail

/// Sample Pearson correlation. Throws zero_variance_error when either input
/// is (numerically) constant; callers in the screening layer use the
/// non-throwing kernel instead and count such pairs as score 0.
inline double pearson(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw dimension_error("pearson: length mismatch");
    if (u.size() < 3) throw dimension_error("pearson: need n >= 3");
    detail::MomentSums m;
    for (std::size_t i = 0; i < u.size(); ++i) {
        m.su += u[i];
        m.sv += v[i];
        m.suu += u[i] * u[i];
        m.svv += v[i] * v[i];
        m.suv += u[i] * v[i];
    }
    bool defined = false;
    const double r = detail::correlation_from_moments(m, u.size(), &defined);
    if (!defined) throw zero_variance_error(0, "pearson: zero-variance input");
    return r;
}

} // namespace acorsis
