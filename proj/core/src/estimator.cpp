#include "klpriv/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "klpriv/errors.hpp"

namespace klpriv {

void TrainConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("eta must be > 0");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ValidationError("sigma2 must be > 0");
    if (replay_sigma2 && !(*replay_sigma2 >= 0.0)) throw ValidationError("replay sigma2 must be >= 0");
    if (runs == 0) throw ValidationError("runs must be >= 1");
    if (record_every == 0) throw ValidationError("record_every must be >= 1");
    if (!(divergence_threshold > 0.0)) throw ValidationError("divergence threshold must be > 0");
}

std::uint64_t run_stream_id(std::size_t run, StreamPurpose purpose) {
    return (static_cast<std::uint64_t>(run) << 4) | static_cast<std::uint64_t>(purpose);
}

ParamVector noisy_gd_step(const ParamVector& w, std::span<const double> grad, double eta, double sigma2,
                          RngStream& rng) {
    if (grad.size() != w.size()) throw DimensionError("noisy_gd_step: gradient length mismatch");
    for (double g : grad)
        if (!std::isfinite(g)) throw NonFiniteError("noisy_gd_step: non-finite gradient");
    if (!(eta >= 0.0) || !(sigma2 >= 0.0)) throw ValidationError("noisy_gd_step: eta and sigma2 must be >= 0");
    ParamVector next = w;
    auto out = next.flat();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= eta * grad[i];
    const double noise_sd = std::sqrt(2.0 * eta * sigma2);
    if (noise_sd > 0.0)
        for (double& v : out) v += noise_sd * rng.normal();
    return next;
}

namespace {

// Shared neighbor arithmetic. `to_mean(i)` and `pool_to_mean(j)` give squared
// distances to the mean gradient on D; `pair(i, j)` the squared distance
// between a record of D and a pool record.
template <typename ToMean, typename PoolToMean, typename Pair>
std::vector<double> diffs_for(const NeighborSet& neighbors, std::size_t n, std::size_t pool_n, ToMean&& to_mean,
                              PoolToMean&& pool_to_mean, Pair&& pair_dist) {
    const auto nd = static_cast<double>(n);
    if (neighbors.notion != NeighborNotion::ReplaceOne && n == 0)
        throw ValidationError("neighbor_grad_diffs: empty dataset");
    std::vector<double> out;
    out.reserve(neighbors.pairs.size());
    for (const NeighborPair& pair : neighbors.pairs) {
        switch (neighbors.notion) {
            case NeighborNotion::ReplaceOne: {
                // ‖(gᵢ − g′)/n‖²
                if (!pair.removed || !pair.inserted) throw ValidationError("replace-one pair is incomplete");
                if (*pair.removed >= n || *pair.inserted >= pool_n)
                    throw ValidationError("neighbor index out of range");
                out.push_back(pair_dist(*pair.removed, *pair.inserted) / (nd * nd));
                break;
            }
            case NeighborNotion::RemoveOne: {
                // S/n − (S − gᵢ)/(n − 1) = (gᵢ − S/n)/(n − 1)
                if (n < 2) throw ValidationError("remove-one neighbors need at least two records");
                if (!pair.removed || *pair.removed >= n) throw ValidationError("neighbor index out of range");
                const double k = nd - 1.0;
                out.push_back(to_mean(*pair.removed) / (k * k));
                break;
            }
            case NeighborNotion::AddOne: {
                // S/n − (S + g)/(n + 1) = (S/n − g)/(n + 1)
                if (!pair.inserted || *pair.inserted >= pool_n) throw ValidationError("neighbor index out of range");
                const double k = nd + 1.0;
                out.push_back(pool_to_mean(*pair.inserted) / (k * k));
                break;
            }
        }
    }
    return out;
}

Vector row_mean(const Matrix& rows) {
    Vector mean(rows.cols(), 0.0);
    for (std::size_t i = 0; i < rows.rows(); ++i) axpy(1.0, rows.row(i), mean);
    const double inv_n = 1.0 / static_cast<double>(rows.rows());
    for (double& v : mean) v *= inv_n;
    return mean;
}

}  // namespace

std::vector<double> neighbor_grad_diffs(const Matrix& grads, const Matrix& pool_grads,
                                        const NeighborSet& neighbors) {
    if (!pool_grads.empty() && pool_grads.cols() != grads.cols())
        throw DimensionError("neighbor_grad_diffs: pool gradient length mismatch");
    const Vector mean = neighbors.notion != NeighborNotion::ReplaceOne && grads.rows() > 0 ? row_mean(grads) : Vector{};
    return diffs_for(
        neighbors, grads.rows(), pool_grads.rows(),
        [&](std::size_t i) { return squared_distance(grads.row(i), mean); },
        [&](std::size_t j) { return squared_distance(pool_grads.row(j), mean); },
        [&](std::size_t i, std::size_t j) { return squared_distance(grads.row(i), pool_grads.row(j)); });
}

std::vector<double> neighbor_grad_diffs(const Matrix& grads, const Matrix& pool_grads, NeighborNotion notion) {
    NeighborSet set;
    set.notion = notion;
    const std::size_t n = grads.rows(), pool = pool_grads.rows();
    switch (notion) {
        case NeighborNotion::RemoveOne:
            if (n < 2) throw ValidationError("remove-one neighbors need at least two records");
            for (std::size_t i = 0; i < n; ++i) set.pairs.push_back({i, std::nullopt});
            break;
        case NeighborNotion::AddOne:
            if (pool == 0) throw ValidationError("add-one neighbors need a nonempty pool");
            for (std::size_t j = 0; j < pool; ++j) set.pairs.push_back({std::nullopt, j});
            break;
        case NeighborNotion::ReplaceOne:
            if (pool == 0) throw ValidationError("replace-one neighbors need a nonempty pool");
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < pool; ++j) set.pairs.push_back({i, j});
            break;
    }
    return neighbor_grad_diffs(grads, pool_grads, set);
}

namespace {

// Per-example gradients of the linearized model, one dense row per record.
// Returns false if any gradient is non-finite or its squared norm exceeds `limit`.
bool linearized_grads(const NtkFeatures& feat, const ParamVector& w, const Dataset& records, LossKind loss,
                      Matrix& out, double limit) {
    const std::size_t o = w.arch().output_dim;
    Vector delta(w.flat().begin(), w.flat().end());
    axpy(-1.0, feat.w0.flat(), delta);
    Vector pred(o);
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto row = out.row(i);
        for (std::size_t j = 0; j < o; ++j) pred[j] = feat.f0(i, j) + dot(feat.jacobian.row(i * o + j), delta);
        const Vector r = loss_derivative(loss, pred, records.y(i));
        std::fill(row.begin(), row.end(), 0.0);
        for (std::size_t j = 0; j < o; ++j) axpy(r[j], feat.jacobian.row(i * o + j), row);
        const double sq = squared_norm(row);
        if (!std::isfinite(sq) || sq > limit) return false;
    }
    return true;
}

// Per-example gradients of the full network in factored form: the gradient
// of weight layer k for record i is the outer product of column i of
// deltas[k] with row i of inputs[k].
struct FactoredGrads {
    std::vector<Matrix> inputs;  // n × m_k
    std::vector<Matrix> deltas;  // m_{k+1} × n
    std::size_t count = 0;
};

// Forward and backward passes batched over all records. Returns false on a
// non-finite output or when a squared gradient norm exceeds `limit`.
bool factored_grads(const ParamVector& w, const Dataset& records, LossKind loss, double limit, FactoredGrads& out) {
    const NetArch& arch = w.arch();
    const std::size_t n = records.size(), depth = arch.depth();
    out.count = n;
    out.inputs.resize(depth);
    out.deltas.resize(depth);
    if (n == 0) return true;

    Matrix act_t = records.features.transposed();
    for (std::size_t k = 0; k < depth; ++k) {
        out.inputs[k] = act_t.transposed();
        const LayerView wk = w.layer(k);
        Matrix z_t(wk.rows, n);
        for (std::size_t r = 0; r < wk.rows; ++r) {
            double* zr = z_t.row(r).data();
            const double* wr = wk.data.data() + r * wk.cols;
            for (std::size_t j = 0; j < wk.cols; ++j) {
                const double wj = wr[j];
                const double* hj = act_t.row(j).data();
                for (std::size_t i = 0; i < n; ++i) zr[i] += wj * hj[i];
            }
        }
        if (k + 1 < depth)
            for (double& v : z_t.entries()) v = v > 0.0 ? v : 0.0;
        act_t = std::move(z_t);
    }
    if (!act_t.all_finite()) return false;

    const std::size_t o = arch.output_dim;
    Matrix seed_t(o, n);
    Vector output(o);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < o; ++j) output[j] = act_t(j, i);
        const Vector g = loss_derivative(loss, output, records.y(i));
        for (std::size_t j = 0; j < o; ++j) seed_t(j, i) = g[j];
    }
    out.deltas[depth - 1] = std::move(seed_t);
    for (std::size_t k = depth - 1; k > 0; --k) {
        const LayerView wk = w.layer(k);
        const Matrix& d_t = out.deltas[k];
        Matrix prev_t(wk.cols, n);
        for (std::size_t r = 0; r < wk.rows; ++r) {
            const double* dr = d_t.row(r).data();
            const double* wr = wk.data.data() + r * wk.cols;
            for (std::size_t j = 0; j < wk.cols; ++j) {
                const double wj = wr[j];
                double* pj = prev_t.row(j).data();
                for (std::size_t i = 0; i < n; ++i) pj[i] += wj * dr[i];
            }
        }
        // ReLU'(0) = 0; a zero activation means a nonpositive preactivation
        const Matrix& h = out.inputs[k];
        for (std::size_t j = 0; j < wk.cols; ++j)
            for (std::size_t i = 0; i < n; ++i)
                if (!(h(i, j) > 0.0)) prev_t(j, i) = 0.0;
        out.deltas[k - 1] = std::move(prev_t);
    }

    // ‖δhᵀ‖² = ‖δ‖²‖h‖² per layer
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (std::size_t k = 0; k < depth; ++k) {
            double dd = 0.0;
            for (std::size_t r = 0; r < out.deltas[k].rows(); ++r) dd += out.deltas[k](r, i) * out.deltas[k](r, i);
            sq += dd * squared_norm(out.inputs[k].row(i));
        }
        if (!std::isfinite(sq) || sq > limit) return false;
    }
    return true;
}

// Mean gradient over the records, in parameter order.
void factored_mean(const FactoredGrads& g, const NetArch& arch, std::span<double> mean) {
    const double inv_n = 1.0 / static_cast<double>(g.count);
    for (std::size_t k = 0; k < g.deltas.size(); ++k) {
        const Matrix& d_t = g.deltas[k];
        const Matrix& h = g.inputs[k];
        const std::size_t cols = h.cols();
        double* base = mean.data() + arch.layer_offset(k);
        for (std::size_t r = 0; r < d_t.rows(); ++r) {
            double* mr = base + r * cols;
            std::fill(mr, mr + cols, 0.0);
            for (std::size_t i = 0; i < g.count; ++i) {
                const double di = d_t(r, i);
                if (di == 0.0) continue;
                const double* hi = h.row(i).data();
                for (std::size_t j = 0; j < cols; ++j) mr[j] += di * hi[j];
            }
            for (std::size_t j = 0; j < cols; ++j) mr[j] *= inv_n;
        }
    }
}

// Σ (a·x[j] − b·y[j])² with four partial sums.
double scaled_sq_distance(double a, const double* x, double b, const double* y, std::size_t len) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= len; j += 4) {
        const double d0 = a * x[j] - b * y[j], d1 = a * x[j + 1] - b * y[j + 1];
        const double d2 = a * x[j + 2] - b * y[j + 2], d3 = a * x[j + 3] - b * y[j + 3];
        s0 += d0 * d0;
        s1 += d1 * d1;
        s2 += d2 * d2;
        s3 += d3 * d3;
    }
    for (; j < len; ++j) {
        const double d = a * x[j] - b * y[j];
        s0 += d * d;
    }
    return (s0 + s1) + (s2 + s3);
}

// ‖∇ℓᵢ − v‖² for a dense vector v in parameter order.
double factored_distance(const FactoredGrads& g, std::size_t i, const NetArch& arch, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t k = 0; k < g.deltas.size(); ++k) {
        const std::size_t cols = g.inputs[k].cols();
        const double* hi = g.inputs[k].row(i).data();
        const double* base = v.data() + arch.layer_offset(k);
        for (std::size_t r = 0; r < g.deltas[k].rows(); ++r)
            s += scaled_sq_distance(g.deltas[k](r, i), hi, 1.0, base + r * cols, cols);
    }
    return s;
}

// ‖∇ℓᵢ(a) − ∇ℓⱼ(b)‖²
double factored_distance(const FactoredGrads& a, std::size_t i, const FactoredGrads& b, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.deltas.size(); ++k) {
        const std::size_t cols = a.inputs[k].cols();
        const double* hi = a.inputs[k].row(i).data();
        const double* hj = b.inputs[k].row(j).data();
        for (std::size_t r = 0; r < a.deltas[k].rows(); ++r)
            s += scaled_sq_distance(a.deltas[k](r, i), hi, b.deltas[k](r, j), hj, cols);
    }
    return s;
}

NetArch model_arch(const TrainModel& model) {
    if (const auto* dnn = std::get_if<DnnModel>(&model)) return dnn->arch;
    return std::get<LinearizedModel>(model).features->arch();
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count && !failed; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

KLTrace run_kl_trace(const TrainModel& model, const Dataset& data, const NeighborSet& neighbors,
                     const TrainConfig& cfg, std::size_t run_index) {
    cfg.validate();
    data.validate();
    if (data.empty()) throw EmptyInputError("run_kl_trace: empty dataset");
    if (neighbors.pairs.empty()) throw ValidationError("run_kl_trace: no neighbors");
    for (std::size_t i = 0; i < data.size(); ++i) validate_label(cfg.loss, data.y(i), data.outputs());
    for (std::size_t i = 0; i < neighbors.pool.size(); ++i)
        validate_label(cfg.loss, neighbors.pool.y(i), data.outputs());

    const NetArch arch = model_arch(model);
    if (arch.input_dim != data.dim() || arch.output_dim != data.outputs())
        throw DimensionError("run_kl_trace: dataset shape does not match the network");

    ParamVector w = [&] {
        if (const auto* dnn = std::get_if<DnnModel>(&model)) {
            RngStream init(cfg.seed, run_stream_id(run_index, StreamPurpose::Init));
            return sample_init(dnn->arch, init_betas(dnn->scheme, dnn->arch), init);
        }
        return std::get<LinearizedModel>(model).features->w0;
    }();

    const auto* lin = std::get_if<LinearizedModel>(&model);
    std::optional<NtkFeatures> pool_features;
    if (lin) {
        if (!lin->features) throw ValidationError("linearized model has no features");
        if (lin->features->examples() != data.size())
            throw DimensionError("linearized features were built for a different dataset");
        if (!neighbors.pool.empty()) pool_features = build_features(lin->features->w0, neighbors.pool);
    }

    RngStream noise(cfg.seed, run_stream_id(run_index, StreamPurpose::Noise));
    const std::size_t k_neighbors = neighbors.pairs.size();
    const double limit = cfg.divergence_threshold * cfg.divergence_threshold;

    Matrix grads, pool_grads;
    if (lin) {
        grads = Matrix(data.size(), w.size());
        pool_grads = Matrix(neighbors.pool.size(), w.size());
    }
    FactoredGrads fgrads, fpool;
    Vector mean_grad(w.size());
    Vector cumulative(k_neighbors, 0.0);

    std::vector<double> step_rows;
    std::vector<double> cum_rows(cumulative);
    KLTrace trace;
    trace.epochs.push_back(0);
    trace.cumulative_worst.push_back(0.0);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        std::vector<double> diffs;
        if (lin) {
            const bool ok = linearized_grads(*lin->features, w, data, cfg.loss, grads, limit) &&
                            (!pool_features || linearized_grads(*pool_features, w, neighbors.pool, cfg.loss,
                                                                pool_grads, limit));
            if (!ok) {
                trace.diverged = true;
                trace.diverged_at = step;
                break;
            }
            diffs = neighbor_grad_diffs(grads, pool_grads, neighbors);
            mean_grad = row_mean(grads);
        } else {
            if (!factored_grads(w, data, cfg.loss, limit, fgrads) ||
                !factored_grads(w, neighbors.pool, cfg.loss, limit, fpool)) {
                trace.diverged = true;
                trace.diverged_at = step;
                break;
            }
            factored_mean(fgrads, arch, mean_grad);
            diffs = diffs_for(
                neighbors, data.size(), neighbors.pool.size(),
                [&](std::size_t i) { return factored_distance(fgrads, i, arch, mean_grad); },
                [&](std::size_t j) { return factored_distance(fpool, j, arch, mean_grad); },
                [&](std::size_t i, std::size_t j) { return factored_distance(fgrads, i, fpool, j); });
        }
        double worst = 0.0;
        for (std::size_t j = 0; j < k_neighbors; ++j) {
            cumulative[j] += kl_step_contribution(cfg.eta, diffs[j], cfg.sigma2, cfg.kl_constant);
            worst = std::max(worst, cumulative[j]);
        }
        step_rows.insert(step_rows.end(), diffs.begin(), diffs.end());
        cum_rows.insert(cum_rows.end(), cumulative.begin(), cumulative.end());
        trace.epochs.push_back(step + 1);
        trace.cumulative_worst.push_back(worst);

        w = noisy_gd_step(w, mean_grad, cfg.eta, cfg.trajectory_sigma2(), noise);
    }

    const std::size_t done = trace.epochs.size() - 1;
    trace.step_sq_diffs = Matrix(done, k_neighbors, std::move(step_rows));
    trace.cumulative_per_neighbor = Matrix(done + 1, k_neighbors, std::move(cum_rows));
    return trace;
}

KlEstimate run_kl_estimation(const TrainModel& model, const Dataset& data, const NeighborSet& neighbors,
                             const TrainConfig& cfg) {
    cfg.validate();
    KlEstimate est;
    est.runs.resize(cfg.runs);
    parallel_for(cfg.runs, cfg.threads,
                 [&](std::size_t r) { est.runs[r] = run_kl_trace(model, data, neighbors, cfg, r); });

    const std::size_t rows = cfg.steps + 1;
    const double inf = std::numeric_limits<double>::infinity();
    const auto runs = static_cast<double>(cfg.runs);
    for (std::size_t e = 0; e < rows; ++e) {
        est.epochs.push_back(e);
        bool lost = false;
        double sum = 0.0;
        for (const KLTrace& t : est.runs) {
            if (e >= t.cumulative_worst.size()) {
                lost = true;
                break;
            }
            sum += t.cumulative_worst[e];
        }
        if (lost) {
            est.mean.push_back(inf);
            est.stddev.push_back(inf);
            continue;
        }
        const double mean = sum / runs;
        double ss = 0.0;
        for (const KLTrace& t : est.runs) {
            const double dlt = t.cumulative_worst[e] - mean;
            ss += dlt * dlt;
        }
        est.mean.push_back(mean);
        est.stddev.push_back(std::sqrt(ss / runs));
    }
    for (const KLTrace& t : est.runs) est.diverged_runs += t.diverged ? 1 : 0;
    return est;
}

LinearizedTraining train_linearized(const NtkFeatures& features, const Matrix& labels, LossKind loss,
                                    const TrainConfig& cfg, std::size_t run_index) {
    cfg.validate();
    if (cfg.steps == 0) throw ValidationError("train_linearized: need at least one step");
    RngStream noise(cfg.seed, run_stream_id(run_index, StreamPurpose::Noise));
    ParamVector w = features.w0;
    IterateAverage avg(features.arch());
    for (std::size_t k = 0; k < cfg.steps; ++k) {
        avg.add(w);
        const Vector g = lin_empirical_grad(features, w, labels, loss);
        w = noisy_gd_step(w, g, cfg.eta, cfg.trajectory_sigma2(), noise);
    }
    LinearizedTraining out{avg.mean(), w, 0.0};
    out.average_loss = lin_empirical_loss(features, out.average, labels, loss);
    return out;
}

McReport make_mc_report(std::span<const double> values, double reference) {
    if (values.size() < 2) throw ValidationError("Monte Carlo report needs at least two samples");
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (double v : values) {
        ++k;
        const double d = v - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (v - mean);
    }
    const auto n = static_cast<double>(values.size());
    McReport r;
    r.mean = mean;
    r.samples = values.size();
    r.std_error = std::sqrt(m2 / (n - 1.0) / n);
    r.closed_form_reference = reference;
    if (r.std_error > 0.0) {
        r.z_score = (mean - reference) / r.std_error;
    } else if (mean != reference) {
        r.z_score = std::copysign(std::numeric_limits<double>::infinity(), mean - reference);
    }
    return r;
}

namespace {

template <typename SampleFn>
std::vector<double> draw_samples(std::size_t samples, SampleFn&& fn) {
    if (samples < 2) throw ValidationError("Monte Carlo estimate needs at least two samples");
    std::vector<double> v(samples);
    for (double& s : v) s = fn();
    return v;
}

}  // namespace

McReport mc_grad_norm_at_init(const NetArch& arch, const InitScheme& scheme, std::span<const double> x,
                              std::size_t samples, RngStream& rng) {
    const std::vector<double> betas = init_betas(scheme, arch);
    const auto values = draw_samples(samples, [&] {
        const ParamVector w = sample_init(arch, betas, rng);
        return squared_norm(output_jacobian(w, x).entries());
    });
    return make_mc_report(values, expected_grad_norm_init(arch, betas, squared_norm(x)));
}

McReport mc_output_sqnorm(const NetArch& arch, const InitScheme& scheme, std::span<const double> x,
                          std::size_t samples, RngStream& rng) {
    const std::vector<double> betas = init_betas(scheme, arch);
    const auto values = draw_samples(samples, [&] {
        const ParamVector w = sample_init(arch, betas, rng);
        return squared_norm(forward(w, x).output);
    });
    return make_mc_report(values, expected_output_sqnorm_init(arch, betas, squared_norm(x)));
}

McReport mc_linearized_grad_diff(const NetArch& arch, const InitScheme& scheme, std::span<const double> x,
                                 double y, std::span<const double> x_other, double y_other, double n,
                                 std::size_t samples, RngStream& rng) {
    if (arch.output_dim != 1) throw ValidationError("mc_linearized_grad_diff: single-output networks only");
    if (!(n >= 1.0)) throw ValidationError("mc_linearized_grad_diff: n must be >= 1");
    const double d = static_cast<double>(arch.input_dim);
    if (squared_norm(x) > d * (1.0 + 1e-12) || squared_norm(x_other) > d * (1.0 + 1e-12))
        throw ValidationError("mc_linearized_grad_diff: inputs must satisfy ||x||^2 <= d");
    const std::vector<double> betas = init_betas(scheme, arch);
    const double label[1] = {y};
    const double label_other[1] = {y_other};
    const auto values = draw_samples(samples, [&] {
        const ParamVector w = sample_init(arch, betas, rng);
        const Vector g = per_example_grad(w, x, label, LossKind::LogisticSingle);
        const Vector g2 = per_example_grad(w, x_other, label_other, LossKind::LogisticSingle);
        return squared_distance(g, g2) / (n * n);
    });
    return make_mc_report(values, 4.0 * gradient_norm_constant_B(arch, betas) / (n * n));
}

bool exceeds_bound(const McReport& report, double slack) { return report.z_score > slack; }

std::size_t estimate_rank_MT(const Matrix& gradient_samples, double tol) {
    if (gradient_samples.rows() == 0) throw EmptyInputError("estimate_rank_MT: no gradient samples");
    return psd_spectrum(gram_of_rows(gradient_samples), tol).rank;
}

}  // namespace klpriv
