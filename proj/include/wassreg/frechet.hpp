#pragma once

#include <span>
#include <vector>

namespace wassreg {

//! Euclidean predictor sample X (n rows, q columns, row-major) with its
//! mean, covariance (1/n normalization) and covariance inverse cached at
//! construction. A ridge eps * tr(Sigma)/q * I is added when the plain
//! covariance is numerically singular; ridge_applied() reports it.
class PredictorSample {
public:
    PredictorSample(std::vector<double> x, int n, int q, bool allow_ridge = true);

    static PredictorSample from_scalar(std::vector<double> x, bool allow_ridge = true);

    int n() const { return n_; }
    int q() const { return q_; }
    const std::vector<double>& data() const { return x_; }
    double value(int i, int a) const { return x_[static_cast<std::size_t>(i) * q_ + a]; }

    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& covariance() const { return cov_; }
    const std::vector<double>& covariance_inverse() const { return cov_inv_; }
    bool ridge_applied() const { return ridge_applied_; }

    //! Per-axis design range [min, max], used as the local-mode hull.
    std::pair<double, double> range(int axis) const;

private:
    std::vector<double> x_;
    int n_, q_;
    std::vector<double> mean_, cov_, cov_inv_;
    bool ridge_applied_ = false;
};

enum class KernelFamily { gaussian, epanechnikov };

//! Smoothing kernel with per-axis bandwidths. Construction evaluates the
//! moment integrals K_14 = int K(u) u^4 du and K_26 = int K(u)^2 u^6 du
//! numerically and rejects kernels for which they are not finite.
class KernelSpec {
public:
    KernelSpec(KernelFamily family, std::vector<double> bandwidth);

    static KernelSpec gaussian(double bandwidth);

    KernelFamily family() const { return family_; }
    const std::vector<double>& bandwidth() const { return h_; }

    //! Product kernel K_h(u) = prod_a K(u_a / h_a) / h_a.
    double density(std::span<const double> u) const;

    double moment_k14() const { return k14_; }
    double moment_k26() const { return k26_; }

private:
    KernelFamily family_;
    std::vector<double> h_;
    double k14_, k26_;
};

//! Weights of the global model: s_i = 1 + (X_i - Xbar)' Sigma^-1 (x - Xbar).
//! They average to 1 and reproduce x: (1/n) sum s_i X_i = x.
std::vector<double> global_weights(const PredictorSample& sample, std::span<const double> x);

//! Weights of the locally linear model around x built from the kernel
//! moments mu_0, mu_1, mu_2; they average to 1 and are negative near the
//! design boundary. Throws when the local variance sigma_0^2 degenerates
//! ("bandwidth too small at x").
std::vector<double> local_weights(const PredictorSample& sample, std::span<const double> x,
                                  const KernelSpec& kernel);

} // namespace wassreg
