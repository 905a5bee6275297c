#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "rigamp/util.hpp"

namespace rigamp {

namespace detail {

// Orthonormal DCT-II and its inverse (DCT-III) via FFTW r2r transforms.
// Plan creation is not thread-safe in FFTW; execution on caller-owned
// buffers is.
class OrthoDct {
  public:
    explicit OrthoDct(int n) : n_(n) {
        std::lock_guard<std::mutex> lock(plan_mutex());
        buf_in_ = fftw_alloc_real(n);
        buf_out_ = fftw_alloc_real(n);
        fwd_ = fftw_plan_r2r_1d(n, buf_in_, buf_out_, FFTW_REDFT10, FFTW_ESTIMATE);
        inv_ = fftw_plan_r2r_1d(n, buf_in_, buf_out_, FFTW_REDFT01, FFTW_ESTIMATE);
    }
    ~OrthoDct() {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
        fftw_free(buf_in_);
        fftw_free(buf_out_);
    }
    OrthoDct(const OrthoDct&) = delete;
    OrthoDct& operator=(const OrthoDct&) = delete;

    VectorXd forward(const VectorXd& v) const {
        VectorXd in = v, out(n_);
        fftw_execute_r2r(fwd_, in.data(), out.data());
        double s = std::sqrt(1.0 / (2.0 * n_));
        out *= s;
        out[0] *= M_SQRT1_2;
        return out;
    }

    VectorXd inverse(const VectorXd& v) const {
        VectorXd in = v;
        in[0] *= M_SQRT2;
        in *= std::sqrt(1.0 / (2.0 * n_));
        VectorXd out(n_);
        fftw_execute_r2r(inv_, in.data(), out.data());
        return out;
    }

  private:
    static std::mutex& plan_mutex() {
        static std::mutex m;
        return m;
    }
    int n_;
    double* buf_in_;
    double* buf_out_;
    fftw_plan fwd_;
    fftw_plan inv_;
};

}  // namespace detail

// Abstract n x d linear operator. apply() maps R^d -> R^n.
class DesignOperator {
  public:
    virtual ~DesignOperator() = default;
    virtual int rows() const = 0;  // n
    virtual int cols() const = 0;  // d
    virtual VectorXd apply(const VectorXd& v) const = 0;
    virtual VectorXd apply_transpose(const VectorXd& u) const = 0;
    // Singular values when known exactly (length min(n,d)); empty otherwise.
    virtual const std::vector<double>& singular_values() const {
        static const std::vector<double> empty;
        return empty;
    }
    virtual const MatrixXd* dense() const { return nullptr; }
    double delta() const { return static_cast<double>(rows()) / cols(); }
};

class DenseDesign final : public DesignOperator {
  public:
    explicit DenseDesign(MatrixXd a, std::vector<double> sv = {})
        : a_(std::move(a)), sv_(std::move(sv)) {}
    int rows() const override { return static_cast<int>(a_.rows()); }
    int cols() const override { return static_cast<int>(a_.cols()); }
    VectorXd apply(const VectorXd& v) const override { return a_ * v; }
    VectorXd apply_transpose(const VectorXd& u) const override { return a_.transpose() * u; }
    const std::vector<double>& singular_values() const override { return sv_; }
    const MatrixXd* dense() const override { return &a_; }

  private:
    MatrixXd a_;
    std::vector<double> sv_;
};

// A = Q_n Pi_n Lambda Pi_d Q_d with orthonormal DCT factors and random
// permutations; applies run in O((n+d) log(n+d)).
class StructuredDctDesign final : public DesignOperator {
  public:
    StructuredDctDesign(int n, int d, std::vector<double> sv, Rng& rng)
        : n_(n), d_(d), sv_(std::move(sv)), dct_n_(n), dct_d_(d) {
        if (static_cast<int>(sv_.size()) != std::min(n, d))
            throw std::invalid_argument("singular value list must have length min(n,d)");
        perm_n_.resize(n);
        perm_d_.resize(d);
        std::iota(perm_n_.begin(), perm_n_.end(), 0);
        std::iota(perm_d_.begin(), perm_d_.end(), 0);
        std::shuffle(perm_n_.begin(), perm_n_.end(), rng);
        std::shuffle(perm_d_.begin(), perm_d_.end(), rng);
        inv_perm_n_ = invert(perm_n_);
        inv_perm_d_ = invert(perm_d_);
    }

    int rows() const override { return n_; }
    int cols() const override { return d_; }

    VectorXd apply(const VectorXd& v) const override {
        VectorXd t = permute(dct_d_.forward(v), perm_d_);
        VectorXd mid = VectorXd::Zero(n_);
        const int m = static_cast<int>(sv_.size());
        for (int i = 0; i < m; ++i) mid[i] = sv_[i] * t[i];
        return dct_n_.inverse(permute(mid, inv_perm_n_));
    }

    VectorXd apply_transpose(const VectorXd& u) const override {
        VectorXd t = permute(dct_n_.forward(u), perm_n_);
        VectorXd mid = VectorXd::Zero(d_);
        const int m = static_cast<int>(sv_.size());
        for (int i = 0; i < m; ++i) mid[i] = sv_[i] * t[i];
        return dct_d_.inverse(permute(mid, inv_perm_d_));
    }

    const std::vector<double>& singular_values() const override { return sv_; }

  private:
    static std::vector<int> invert(const std::vector<int>& p) {
        std::vector<int> inv(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<int>(i);
        return inv;
    }
    // out[i] = in[p[i]]
    static VectorXd permute(const VectorXd& in, const std::vector<int>& p) {
        VectorXd out(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) out[i] = in[p[i]];
        return out;
    }

    int n_, d_;
    std::vector<double> sv_;
    detail::OrthoDct dct_n_, dct_d_;
    std::vector<int> perm_n_, perm_d_, inv_perm_n_, inv_perm_d_;
};

// Dense materialization for any operator: reuses the stored matrix when one
// exists, otherwise reconstructs it column by column through apply().
inline MatrixXd materialize(const DesignOperator& op) {
    if (const MatrixXd* m = op.dense()) return *m;
    MatrixXd a(op.rows(), op.cols());
    VectorXd e = VectorXd::Zero(op.cols());
    for (int j = 0; j < op.cols(); ++j) {
        e[j] = 1.0;
        a.col(j) = op.apply(e);
        e[j] = 0.0;
    }
    return a;
}

// ---- binary matrix file format: magic "RIGAMPMX", u32 n, u32 d, row-major f64 ----

inline void save_matrix(const std::string& path, const MatrixXd& a) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    std::fwrite("RIGAMPMX", 1, 8, f);
    std::uint32_t n = static_cast<std::uint32_t>(a.rows());
    std::uint32_t d = static_cast<std::uint32_t>(a.cols());
    std::fwrite(&n, 4, 1, f);
    std::fwrite(&d, 4, 1, f);
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) {
            double v = a(i, j);
            std::fwrite(&v, 8, 1, f);
        }
    std::fclose(f);
}

inline MatrixXd load_matrix(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    char magic[8];
    if (std::fread(magic, 1, 8, f) != 8 || std::memcmp(magic, "RIGAMPMX", 8) != 0) {
        std::fclose(f);
        throw std::runtime_error("bad matrix file magic in " + path);
    }
    std::uint32_t n = 0, d = 0;
    if (std::fread(&n, 4, 1, f) != 1 || std::fread(&d, 4, 1, f) != 1) {
        std::fclose(f);
        throw std::runtime_error("truncated matrix header in " + path);
    }
    MatrixXd a(n, d);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < d; ++j) {
            double v;
            if (std::fread(&v, 8, 1, f) != 1) {
                std::fclose(f);
                throw std::runtime_error("truncated matrix data in " + path);
            }
            a(i, j) = v;
        }
    std::fclose(f);
    return a;
}

}  // namespace rigamp
