#ifndef DOA_RMT_CMATRIX_HPP
#define DOA_RMT_CMATRIX_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "doa_rmt/errors.hpp"

namespace doa {

using cplx = std::complex<double>;

/// Dense complex matrix, row-major.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw InvalidArgument("CMatrix: entry count does not match shape");
    }
  }
  CMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw InvalidArgument("CMatrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static CMatrix identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static CMatrix diagonal(std::span<const cplx> d) {
    CMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  static CMatrix diagonal(std::span<const double> d) {
    CMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  /// Matrix with the given vector as its single column.
  static CMatrix column(std::span<const cplx> v) {
    return CMatrix(v.size(), 1, std::vector<cplx>(v.begin(), v.end()));
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  cplx& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }

  [[nodiscard]] std::span<cplx> data() noexcept { return data_; }
  [[nodiscard]] std::span<const cplx> data() const noexcept { return data_; }
  [[nodiscard]] std::span<cplx> row(std::size_t i) noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  [[nodiscard]] std::span<const cplx> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  [[nodiscard]] std::vector<cplx> col(std::size_t j) const {
    std::vector<cplx> v(rows_);
    for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
    return v;
  }

  void set_col(std::size_t j, std::span<const cplx> v) {
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
  }

  /// Columns [first, first + count).
  [[nodiscard]] CMatrix cols_range(std::size_t first, std::size_t count) const {
    CMatrix out(rows_, count);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < count; ++j) out(i, j) = (*this)(i, first + j);
    return out;
  }

  /// Rows [first, first + count).
  [[nodiscard]] CMatrix rows_range(std::size_t first, std::size_t count) const {
    if (first + count > rows_) throw InvalidArgument("CMatrix::rows_range out of range");
    return CMatrix(count, cols_,
                   std::vector<cplx>(data_.begin() + static_cast<std::ptrdiff_t>(first * cols_),
                                     data_.begin() +
                                         static_cast<std::ptrdiff_t>((first + count) * cols_)));
  }

  [[nodiscard]] CMatrix adjoint() const {
    CMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
    return out;
  }

  [[nodiscard]] CMatrix transpose() const {
    CMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
  }

  [[nodiscard]] cplx trace() const {
    cplx t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  [[nodiscard]] double max_abs() const noexcept {
    double m = 0.0;
    for (const auto& z : data_) m = std::max(m, std::abs(z));
    return m;
  }

  [[nodiscard]] double frobenius() const noexcept {
    double s = 0.0;
    for (const auto& z : data_) s += std::norm(z);
    return std::sqrt(s);
  }

  [[nodiscard]] bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](const cplx& z) {
      return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
  }

  CMatrix& operator+=(const CMatrix& o) {
    check_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  CMatrix& operator-=(const CMatrix& o) {
    check_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  CMatrix& operator*=(cplx s) noexcept {
    for (auto& z : data_) z *= s;
    return *this;
  }

  friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
  friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
  friend CMatrix operator*(CMatrix a, cplx s) { return a *= s; }
  friend CMatrix operator*(cplx s, CMatrix a) { return a *= s; }

  friend CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    if (a.cols_ != b.rows_) throw InvalidArgument("CMatrix: product shape mismatch");
    CMatrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      cplx* orow = out.data_.data() + i * out.cols_;
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const cplx aik = a(i, k);
        if (aik == cplx(0.0)) continue;
        const cplx* brow = b.data_.data() + k * b.cols_;
        for (std::size_t j = 0; j < b.cols_; ++j) orow[j] += aik * brow[j];
      }
    }
    return out;
  }

  friend bool operator==(const CMatrix&, const CMatrix&) = default;

 private:
  void check_same_shape(const CMatrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw InvalidArgument(std::string("CMatrix: shape mismatch in ") + op);
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

/// a^H b without forming the adjoint.
inline CMatrix adjoint_times(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("adjoint_times: row count mismatch");
  CMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto arow = a.row(k);
    const auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const cplx ai = std::conj(arow[i]);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += ai * brow[j];
    }
  }
  return out;
}

/// (m + m^H) / 2
inline CMatrix hermitian_part(const CMatrix& m) {
  if (!m.square()) throw InvalidArgument("hermitian_part: matrix not square");
  CMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
  return out;
}

inline double hermitian_defect(const CMatrix& m) {
  double d = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i; j < m.cols(); ++j) d = std::max(d, std::abs(m(i, j) - std::conj(m(j, i))));
  return d;
}

inline double max_abs_diff(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument("max_abs_diff: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

inline double vector_norm(std::span<const cplx> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

inline cplx dot_conj(std::span<const cplx> a, std::span<const cplx> b) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

/// LU factorization with partial pivoting of a square matrix.
class LuDecomposition {
 public:
  explicit LuDecomposition(CMatrix m) : lu_(std::move(m)), perm_(lu_.rows()) {
    if (!lu_.square()) throw InvalidArgument("LuDecomposition: matrix not square");
    const std::size_t n = lu_.rows();
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          piv = i;
        }
      }
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
        std::swap(perm_[k], perm_[piv]);
        sign_ = -sign_;
      }
      if (best == 0.0) {
        singular_ = true;
        continue;
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        const cplx f = lu_(i, k) / lu_(k, k);
        lu_(i, k) = f;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  [[nodiscard]] bool singular() const noexcept { return singular_; }

  [[nodiscard]] cplx determinant() const {
    cplx d = sign_;
    for (std::size_t i = 0; i < lu_.rows(); ++i) d *= lu_(i, i);
    return d;
  }

  /// Solves m x = b for every column of b.
  [[nodiscard]] CMatrix solve(const CMatrix& b) const {
    if (singular_) throw NumericalError("LuDecomposition::solve: singular matrix");
    const std::size_t n = lu_.rows();
    if (b.rows() != n) throw InvalidArgument("LuDecomposition::solve: shape mismatch");
    CMatrix x(n, b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
      std::vector<cplx> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        cplx s = b(perm_[i], c);
        for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * y[j];
        y[i] = s;
      }
      for (std::size_t ii = n; ii-- > 0;) {
        cplx s = y[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= lu_(ii, j) * x(j, c);
        x(ii, c) = s / lu_(ii, ii);
      }
    }
    return x;
  }

 private:
  CMatrix lu_;
  std::vector<std::size_t> perm_;
  double sign_ = 1.0;
  bool singular_ = false;
};

inline cplx determinant(const CMatrix& m) { return LuDecomposition(m).determinant(); }

}  // namespace doa

#endif  // DOA_RMT_CMATRIX_HPP
