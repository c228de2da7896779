#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "klpriv/accountant.hpp"
#include "klpriv/data.hpp"
#include "klpriv/linearized.hpp"
#include "klpriv/network.hpp"
#include "klpriv/numerics.hpp"
#include "klpriv/rng.hpp"

namespace klpriv {

struct TrainConfig {
    double eta = 0.01;
    std::size_t steps = 0;
    double sigma2 = 1.0;
    LossKind loss = LossKind::LogisticSingle;
    std::uint64_t seed = 0;
    std::size_t runs = 6;
    KlConvention kl_constant = KlConvention::PaperHalfSigma2;
    std::size_t record_every = 1;
    /// When set, trajectories are simulated with this noise variance while KL
    /// is still accounted with `sigma2`. Lets two accounting variances share
    /// one trajectory.
    std::optional<double> replay_sigma2;
    double divergence_threshold = 1e12;
    /// 0 = hardware concurrency. Results do not depend on this.
    unsigned threads = 0;

    double horizon() const { return eta * static_cast<double>(steps); }
    double trajectory_sigma2() const { return replay_sigma2.value_or(sigma2); }
    void validate() const;
};

/// Random streams used by run r. Every run owns disjoint stream ids.
enum class StreamPurpose : std::uint64_t { Init = 1, Noise = 2, Monte = 3 };
std::uint64_t run_stream_id(std::size_t run, StreamPurpose purpose);

/// W − η·grad + √(2ησ²)·Z
ParamVector noisy_gd_step(const ParamVector& w, std::span<const double> grad, double eta, double sigma2,
                          RngStream& rng);

/// Squared norm of ∇L(W; D) − ∇L(W; D′) for each neighbor, from the per-example
/// gradients on D (rows of `grads`) and on the pool (rows of `pool_grads`).
std::vector<double> neighbor_grad_diffs(const Matrix& grads, const Matrix& pool_grads,
                                        const NeighborSet& neighbors);
/// Every neighbor of the given notion (no cap).
std::vector<double> neighbor_grad_diffs(const Matrix& grads, const Matrix& pool_grads, NeighborNotion notion);

struct DnnModel {
    NetArch arch;
    InitScheme scheme;
};

/// Linearized network with fixed features on the training set.
struct LinearizedModel {
    std::shared_ptr<const NtkFeatures> features;
};

using TrainModel = std::variant<DnnModel, LinearizedModel>;

struct KLTrace {
    /// 0, 1, …, last completed step
    std::vector<std::size_t> epochs;
    /// Row k: ‖ΔL‖² per neighbor at step k (one row per completed step).
    Matrix step_sq_diffs;
    /// Row e: accumulated KL per neighbor after e steps.
    Matrix cumulative_per_neighbor;
    /// Row-wise max of cumulative_per_neighbor.
    std::vector<double> cumulative_worst;
    bool diverged = false;
    std::optional<std::size_t> diverged_at;
};

struct KlEstimate {
    std::vector<KLTrace> runs;
    std::vector<std::size_t> epochs;  // 0..steps
    /// Mean and population std of cumulative_worst across runs; +∞ once any
    /// run has diverged.
    std::vector<double> mean;
    std::vector<double> stddev;
    std::size_t diverged_runs = 0;
};

/// One training run on D with KL accounting against every neighbor.
KLTrace run_kl_trace(const TrainModel& model, const Dataset& data, const NeighborSet& neighbors,
                     const TrainConfig& cfg, std::size_t run_index);

/// cfg.runs independent runs (parallel over runs, merged in run order).
KlEstimate run_kl_estimation(const TrainModel& model, const Dataset& data, const NeighborSet& neighbors,
                             const TrainConfig& cfg);

struct LinearizedTraining {
    ParamVector average;  // mean of W_0 … W_{K−1}
    ParamVector last;
    double average_loss = 0.0;
};

/// Noisy GD on the linearized empirical loss, tracking the iterate average.
LinearizedTraining train_linearized(const NtkFeatures& features, const Matrix& labels, LossKind loss,
                                    const TrainConfig& cfg, std::size_t run_index);

struct McReport {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
    double closed_form_reference = 0.0;
    double z_score = 0.0;
};

McReport make_mc_report(std::span<const double> values, double reference);

/// MC mean of ‖∂f(x)/∂W‖²_F over fresh initializations.
McReport mc_grad_norm_at_init(const NetArch& arch, const InitScheme& scheme, std::span<const double> x,
                              std::size_t samples, RngStream& rng);
/// MC mean of ‖f(x)‖² over fresh initializations.
McReport mc_output_sqnorm(const NetArch& arch, const InitScheme& scheme, std::span<const double> x,
                          std::size_t samples, RngStream& rng);
/// MC mean of ‖∇ℓ(f(x); y) − ∇ℓ(f(x′); y′)‖²/n² at fresh initializations;
/// the reference is the bound 4B/n².
McReport mc_linearized_grad_diff(const NetArch& arch, const InitScheme& scheme, std::span<const double> x,
                                 double y, std::span<const double> x_other, double y_other, double n,
                                 std::size_t samples, RngStream& rng);

/// The MC mean exceeds the reference bound by more than `slack` standard errors.
bool exceeds_bound(const McReport& report, double slack = 4.0);

/// Rank of the span of the gradient samples (rows).
std::size_t estimate_rank_MT(const Matrix& gradient_samples, double tol = kDefaultRankTolerance);

}  // namespace klpriv
