#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace rigamp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// SplitMix64. Used both as a cheap mixer for deriving per-row seeds and as
// the seeding path for the solver RNGs, so any (config, trial) row can be
// reproduced in isolation from the base seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
    std::uint64_t s = seed ^ (v + 0x9e3779b97f4a7c15ULL);
    return splitmix64(s);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    return Rng(splitmix64(s));
}

inline VectorXd gaussian_vector(int n, Rng& rng, double stddev = 1.0) {
    std::normal_distribution<double> normal(0.0, stddev);
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

inline MatrixXd gaussian_matrix(int rows, int cols, Rng& rng, double stddev = 1.0) {
    std::normal_distribution<double> normal(0.0, stddev);
    MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

// ---- standard-normal helpers ----

inline double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

// Scaled complementary error function exp(x^2) erfc(x).
// Direct product is fine up to x ~ 20; beyond that erfc underflows and we
// switch to the asymptotic series 1/(x sqrt(pi)) sum (-1)^m (2m-1)!!/(2x^2)^m.
inline double erfcx(double x) {
    if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
    if (x <= 20.0) return std::exp(x * x) * std::erfc(x);
    const double inv2x2 = 1.0 / (2.0 * x * x);
    double term = 1.0, sum = 1.0;
    for (int m = 1; m <= 8; ++m) {
        term *= -(2 * m - 1) * inv2x2;
        sum += term;
    }
    return sum / (x * std::sqrt(M_PI));
}

// phi(z)/Phi(z), the inverse Mills ratio, stable for very negative z.
inline double inverse_mills(double z) {
    return std::sqrt(2.0 / M_PI) / erfcx(-z * M_SQRT1_2);
}

// log of E(u) = exp(u^2) (1 + erf(u)).
inline double log_erf_term(double u) {
    if (u >= -4.0) return u * u + std::log1p(std::erf(u));
    return std::log(erfcx(-u));
}

// ---- Gauss-Hermite quadrature (probabilists' weight: E f(Z), Z ~ N(0,1)) ----

struct GaussHermite {
    std::vector<double> nodes;    // abscissae for N(0,1)
    std::vector<double> weights;  // sum to 1

    explicit GaussHermite(int order) {
        // Golub-Welsch on the Jacobi matrix of the Hermite recurrence.
        MatrixXd J = MatrixXd::Zero(order, order);
        for (int i = 1; i < order; ++i) {
            double b = std::sqrt(static_cast<double>(i));
            J(i, i - 1) = b;
            J(i - 1, i) = b;
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
        nodes.resize(order);
        weights.resize(order);
        for (int i = 0; i < order; ++i) {
            nodes[i] = es.eigenvalues()[i];
            double w = es.eigenvectors()(0, i);
            weights[i] = w * w;
        }
    }

    template <class F>
    double expect(F&& f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
        return acc;
    }
};

// ---- linear algebra helpers ----

// Ridge-regularized solve: adds eps*trace/dim to the diagonal when the matrix
// is near-singular. The covariance matrices in long runs become
// ill-conditioned and plain solves blow up.
inline VectorXd ridge_solve(const MatrixXd& m, const VectorXd& rhs,
                            double rel_floor = 1e-10, double rel_ridge = 1e-9) {
    const int dim = static_cast<int>(m.rows());
    if (dim == 0) return VectorXd();
    MatrixXd sym = 0.5 * (m + m.transpose());
    double scale = std::max(sym.trace() / dim, 1e-300);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
    if (es.eigenvalues().minCoeff() < rel_floor * scale)
        sym.diagonal().array() += rel_ridge * scale;
    return sym.ldlt().solve(rhs);
}

inline double condition_number(const MatrixXd& m) {
    if (m.rows() == 0) return 1.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

// Clip small negative eigenvalues to zero; throw if the violation is large.
inline MatrixXd psd_clip(const MatrixXd& m, double rel_tol = 1e-10) {
    MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
    double scale = std::max(std::abs(sym.trace()), 1e-300);
    VectorXd ev = es.eigenvalues();
    bool changed = false;
    for (int i = 0; i < ev.size(); ++i) {
        if (ev[i] < 0.0) {
            if (ev[i] < -rel_tol * scale * 100.0)
                throw std::runtime_error("matrix has a significantly negative eigenvalue: " +
                                         std::to_string(ev[i]));
            ev[i] = 0.0;
            changed = true;
        }
    }
    if (!changed) return sym;
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// ---- timing ----

struct StopWatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

// ---- thread pool ----

inline int thread_budget() {
    if (const char* env = std::getenv("RIGAMP_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs tasks [0, count) over at most thread_budget() workers. Each task index
// is independent; results must be written to pre-sized slots by the caller.
inline void run_indexed_tasks(int count, const std::function<void(int)>& task) {
    int workers = std::min(thread_budget(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> threads;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace rigamp
