#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>
#include <tuple>

#include "klpriv/errors.hpp"
#include "klpriv/estimator.hpp"
#include "klpriv/linearized.hpp"

namespace klpriv::cli {

namespace {

// Stream ids below the per-run range are reserved for data generation.
constexpr std::uint64_t kDataStream = 0;
constexpr std::size_t kDefaultSynthDim = 10;

std::string num(double v) { return format_double(v); }

void emit(const RunConfig& cfg, const std::string& path, const std::string& body, std::ostream& out) {
    const std::string text = header_text(cfg) + body;
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot write output file '" + path + "'");
    f << text;
    if (!f) throw ValidationError("failed writing output file '" + path + "'");
}

Dataset load_data(const RunConfig& cfg) {
    const DataSpec spec = parse_data_spec(cfg.data);
    if (!spec.synthetic) {
        Dataset ds = load_csv(spec.path, {cfg.label_column, cfg.normalize, cfg.outputs});
        if (cfg.d && *cfg.d != ds.dim())
            throw ValidationError("d=" + std::to_string(*cfg.d) + " does not match the " +
                                  std::to_string(ds.dim()) + " feature columns of " + spec.path);
        return ds;
    }
    const std::size_t d = cfg.d.value_or(kDefaultSynthDim);
    RngStream rng(cfg.seed, kDataStream);
    if (cfg.outputs == 1) {
        RngStream teacher_rng = rng.substream(1);
        LinearTeacher teacher;
        teacher.weights.resize(d);
        for (double& w : teacher.weights) w = teacher_rng.normal();
        return synth_sphere(spec.n, d, rng, teacher);
    }
    return synth_sphere(spec.n, d, rng, RandomClass{cfg.outputs});
}

std::size_t data_size(const RunConfig& cfg) {
    const DataSpec spec = parse_data_spec(cfg.data);
    return spec.synthetic ? spec.n : load_data(cfg).size();
}

std::size_t data_dim(const RunConfig& cfg) {
    const DataSpec spec = parse_data_spec(cfg.data);
    return spec.synthetic ? cfg.d.value_or(kDefaultSynthDim) : load_data(cfg).dim();
}

NetArch make_arch(const RunConfig& cfg, std::size_t d, const std::vector<std::size_t>& widths, std::size_t depth) {
    NetArch arch = widths.size() == 1 ? NetArch::uniform(d, widths.front(), depth, cfg.outputs)
                                      : NetArch{d, cfg.outputs, widths};
    arch.validate();
    return arch;
}

struct Prepared {
    Dataset train;
    NeighborSet neighbors;
};

Prepared prepare_neighbors(const RunConfig& cfg, const Dataset& data) {
    RngStream rng(cfg.seed, kDataStream);
    if (cfg.neighbor == NeighborNotion::RemoveOne) {
        RngStream pick = rng.substream(3);
        return {data, enumerate_neighbors(data, cfg.neighbor, Dataset{}, cfg.neighbor_cap, pick)};
    }
    const std::size_t pool = cfg.pool ? cfg.pool : std::max<std::size_t>(1, data.size() / 8);
    if (pool >= data.size())
        throw ValidationError("pool of " + std::to_string(pool) + " leaves no training records");
    RngStream split_rng = rng.substream(2);
    HoldoutSplit split = holdout_split(data, pool, split_rng);
    RngStream pick = rng.substream(3);
    NeighborSet set = enumerate_neighbors(split.train, cfg.neighbor, split.pool, cfg.neighbor_cap, pick);
    return {std::move(split.train), std::move(set)};
}

TrainConfig train_config(const RunConfig& cfg, unsigned threads) {
    TrainConfig tc;
    tc.eta = cfg.eta;
    tc.steps = cfg.steps;
    tc.sigma2 = cfg.sigma2;
    tc.loss = default_loss(cfg.outputs);
    tc.seed = cfg.seed;
    tc.runs = cfg.runs;
    tc.kl_constant = cfg.kl_constant;
    tc.record_every = cfg.record_every;
    tc.replay_sigma2 = cfg.replay_sigma2;
    tc.threads = threads;
    return tc;
}

TrainModel make_model(const RunConfig& cfg, const NetArch& arch, const InitScheme& scheme, const Dataset& train) {
    if (cfg.model == "dnn") return DnnModel{arch, scheme};
    RngStream init(cfg.seed, run_stream_id(0, StreamPurpose::Init));
    const ParamVector w0 = sample_init(arch, init_betas(scheme, arch), init);
    return LinearizedModel{std::make_shared<const NtkFeatures>(build_features(w0, train))};
}

bool recorded(std::size_t epoch, const RunConfig& cfg) {
    return epoch % cfg.record_every == 0 || epoch == cfg.steps;
}

// Linearized bound scaled to the selected KL convention.
double linearized_kl(double b, double t, double n, const RunConfig& cfg) {
    const double paper = kl_bound_linearized(b, t, n, cfg.sigma2);
    return cfg.kl_constant == KlConvention::PaperHalfSigma2 ? paper : paper / 2.0;
}

bool is_uniform_named(const RunConfig& cfg, const InitScheme& s) {
    return cfg.widths.size() == 1 && s.kind != SchemeKind::Custom;
}

}  // namespace

int cmd_bound(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const std::size_t d = data_dim(cfg);
    const double n = static_cast<double>(data_size(cfg));
    const double t = cfg.time_horizon();
    const bool drift = cfg.c || cfg.beta_smooth || cfg.rank;
    // ‖softmax(f) − y‖² ≤ 2 for one-hot targets; the logistic residual is ≤ 1.
    const double residual_sq = cfg.outputs == 1 ? 1.0 : 2.0;

    std::ostringstream body;
    body << "scheme,metric,value\n";
    for (const InitScheme& scheme : selected_schemes(cfg)) {
        const NetArch arch = make_arch(cfg, d, cfg.widths, cfg.depths.front());
        const double b = gradient_norm_constant_B(arch, init_betas(scheme, arch));
        const double kl = linearized_kl(b, t, n, cfg);
        const std::string name = scheme.name();
        body << name << ",B," << num(b) << "\n";
        if (is_uniform_named(cfg, scheme))
            body << name << ",B_table," << num(table_closed_form_B(scheme.kind, d, cfg.widths.front(), arch.depth(), cfg.outputs)) << "\n";
        body << name << ",T," << num(t) << "\n";
        body << name << ",n," << num(n) << "\n";
        body << name << ",kl_linearized," << num(kl) << "\n";
        body << name << ",dp_delta_linearized," << num(kl_to_dp_delta(kl)) << "\n";
        if (drift) {
            DnnBoundInputs in;
            in.t = t;
            in.n = n;
            in.sigma2 = cfg.sigma2;
            in.c = cfg.c.value_or(0.0);
            in.beta_smooth = cfg.beta_smooth.value_or(0.0);
            in.rank_mt = cfg.rank.value_or(0.0);
            in.e_delta0 = residual_sq * 4.0 * b / (n * n);
            in.e_grad0 = residual_sq * b;
            in.provenance = "analytic upper bounds from B";
            const BoundReport r = dnn_drift_bound(in, cfg.kl_constant);
            body << name << ",drift_init_difference," << num(r.terms.init_difference) << "\n";
            body << name << ",drift_fluctuation," << num(r.terms.fluctuation) << "\n";
            body << name << ",drift_non_smoothness," << num(r.terms.non_smoothness) << "\n";
            body << name << ",drift_integral," << num(r.integral) << "\n";
            body << name << ",drift_kl," << num(r.value) << "\n";
            body << name << ",drift_exponential_regime," << (r.exponential_regime ? 1 : 0) << "\n";
            body << name << ",drift_dp_delta," << num(std::isfinite(r.value) ? kl_to_dp_delta(r.value) : r.value) << "\n";
        }
    }
    emit(cfg, cfg.out, body.str(), out);
    return kExitOk;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const Dataset data = load_data(cfg);
    const Prepared prep = prepare_neighbors(cfg, data);
    const InitScheme scheme = selected_schemes(cfg).front();
    const NetArch arch = make_arch(cfg, data.dim(), cfg.widths, cfg.depths.front());
    const TrainModel model = make_model(cfg, arch, scheme, prep.train);
    const KlEstimate est = run_kl_estimation(model, prep.train, prep.neighbors, train_config(cfg, cfg.threads));

    std::ostringstream trace;
    trace << "epochs,kl_means,kl_stds\n";
    for (std::size_t e = 0; e < est.epochs.size(); ++e)
        if (recorded(est.epochs[e], cfg))
            trace << est.epochs[e] << "," << num(est.mean[e]) << "," << num(est.stddev[e]) << "\n";
    emit(cfg, cfg.out, trace.str(), out);

    if (!cfg.out.empty()) {
        std::ostringstream detail;
        detail << "run,neighbor,removed,inserted,kl_final,diverged,diverged_at\n";
        for (std::size_t r = 0; r < est.runs.size(); ++r) {
            const KLTrace& t = est.runs[r];
            const Matrix& cum = t.cumulative_per_neighbor;
            for (std::size_t j = 0; j < prep.neighbors.pairs.size(); ++j) {
                const NeighborPair& p = prep.neighbors.pairs[j];
                detail << r << "," << j << "," << (p.removed ? std::to_string(*p.removed) : "") << ","
                       << (p.inserted ? std::to_string(*p.inserted) : "") << "," << num(cum(cum.rows() - 1, j)) << ","
                       << (t.diverged ? 1 : 0) << "," << (t.diverged_at ? std::to_string(*t.diverged_at) : "") << "\n";
            }
        }
        emit(cfg, cfg.out + ".neighbors.csv", detail.str(), out);
    }
    if (prep.neighbors.capped)
        err << "note: replace-one neighbors subsampled to " << prep.neighbors.pairs.size() << "\n";
    if (est.diverged_runs > 0) {
        err << "warning: " << est.diverged_runs << " of " << est.runs.size()
            << " runs diverged; KL reported as inf from the divergence step on\n";
        return kExitDiverged;
    }
    return kExitOk;
}

int cmd_mc_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const Dataset data = load_data(cfg);
    if (data.empty()) throw EmptyInputError("mc-verify needs at least one record");
    const double n = static_cast<double>(data.size());
    constexpr double kZ = 4.0;
    bool all_pass = true;

    std::ostringstream body;
    body << "scheme,check,mean,reference,std_error,z_score,pass\n";
    auto row = [&](const std::string& scheme, const std::string& check, const McReport& r, bool pass) {
        all_pass = all_pass && pass;
        body << scheme << "," << check << "," << num(r.mean) << "," << num(r.closed_form_reference) << ","
             << num(r.std_error) << "," << num(r.z_score) << "," << (pass ? "true" : "false") << "\n";
    };

    const std::vector<InitScheme> schemes = selected_schemes(cfg);
    for (std::size_t s = 0; s < schemes.size(); ++s) {
        const InitScheme& scheme = schemes[s];
        const NetArch arch = make_arch(cfg, data.dim(), cfg.widths, cfg.depths.front());
        const RngStream base(cfg.seed, run_stream_id(s, StreamPurpose::Monte));
        const std::string name = scheme.name();

        RngStream g_rng = base.substream(1);
        const McReport g = mc_grad_norm_at_init(arch, scheme, data.x(0), cfg.samples, g_rng);
        row(name, "grad_norm_init", g, std::abs(g.z_score) <= kZ);

        RngStream o_rng = base.substream(2);
        const McReport o = mc_output_sqnorm(arch, scheme, data.x(0), cfg.samples, o_rng);
        row(name, "output_sqnorm_init", o, std::abs(o.z_score) <= kZ);

        const std::vector<double> betas = init_betas(scheme, arch);
        const bool positive = std::all_of(betas.begin(), betas.end(), [](double b) { return b > 0.0; });
        if (cfg.outputs == 1 && data.size() >= 2 && positive) {
            RngStream l_rng = base.substream(3);
            const McReport l = mc_linearized_grad_diff(arch, scheme, data.x(0), data.y(0)[0], data.x(1),
                                                       data.y(1)[0], n, cfg.samples, l_rng);
            row(name, "grad_diff_bound", l, !exceeds_bound(l, kZ));
        }
    }
    emit(cfg, cfg.out, body.str(), out);
    if (!all_pass) {
        err << "mc-verify: at least one check failed\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

int cmd_lazy(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const Dataset data = load_data(cfg);
    const InitScheme scheme = selected_schemes(cfg).front();
    const NetArch arch = make_arch(cfg, data.dim(), cfg.widths, cfg.depths.front());
    const std::vector<double> betas = init_betas(scheme, arch);
    RngStream init(cfg.seed, run_stream_id(0, StreamPurpose::Init));
    const NtkFeatures features = build_features(sample_init(arch, betas, init), data);
    const GramAnalysis ga = gram_analysis(features);
    const std::vector<double> labels(data.labels.entries().begin(), data.labels.entries().end());
    const LazySolution sol = lazy_solution(features, labels, cfg.ridge);
    const double n = static_cast<double>(data.size());

    std::ostringstream body;
    body << "metric,value\n";
    body << "n," << num(n) << "\n";
    body << "params," << arch.param_count() << "\n";
    body << "lambda0," << num(ga.lambda0) << "\n";
    body << "rank," << ga.rank << "\n";
    body << "ridge," << num(sol.ridge) << "\n";
    body << "R," << num(sol.distance_sq) << "\n";
    body << "R_bound_order," << num(lazy_R_bound(arch, betas, n).value) << "\n";
    body << "achieved_loss," << num(sol.achieved_loss) << "\n";
    body << "inv_n2," << num(1.0 / (n * n)) << "\n";
    body << "achieved_below_inv_n2," << (sol.achieved_loss < 1.0 / (n * n) ? 1 : 0) << "\n";
    const double b = gradient_norm_constant_B(arch, betas);
    const TradeoffSchedule sched = tradeoff_schedule(b, sol.distance_sq, cfg.eps, n);
    body << "B," << num(b) << "\n";
    body << "eps," << num(cfg.eps) << "\n";
    body << "tradeoff_sigma2," << num(sched.sigma2) << "\n";
    body << "tradeoff_T," << num(sched.t) << "\n";
    body << "tradeoff_risk_bound," << num(sched.risk_bound) << "\n";
    if (cfg.train) {
        TrainConfig tc = train_config(cfg, 1);
        const LinearizedTraining tr = train_linearized(features, data.labels, LossKind::LogisticSingle, tc, 0);
        const double t = tc.horizon();
        const double bound = sol.alpha_gap + sol.distance_sq / (2.0 * t) + cfg.sigma2 * static_cast<double>(ga.rank) / 2.0;
        body << "train_T," << num(t) << "\n";
        body << "train_average_loss," << num(tr.average_loss) << "\n";
        body << "train_excess_bound," << num(bound) << "\n";
        body << "train_within_bound," << (tr.average_loss <= bound ? 1 : 0) << "\n";
    }
    emit(cfg, cfg.out, body.str(), out);
    return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    struct Cell {
        InitScheme scheme;
        std::size_t width;
        std::size_t depth;
    };
    struct Row {
        std::string scheme;
        std::size_t width, depth, epoch;
        std::string metric;
        double value;
    };
    struct CellResult {
        std::vector<Row> rows;
        std::string error;
        bool diverged = false;
    };

    std::vector<Cell> cells;
    for (const InitScheme& s : selected_schemes(cfg))
        for (std::size_t w : cfg.widths)
            for (std::size_t l : cfg.depths) cells.push_back({s, w, l});
    if (cells.empty()) throw ValidationError("sweep grid is empty");

    const Dataset data = load_data(cfg);
    const std::optional<Prepared> prep =
        cfg.empirical ? std::optional<Prepared>(prepare_neighbors(cfg, data)) : std::nullopt;
    const double n = static_cast<double>(prep ? prep->train.size() : data.size());

    std::vector<CellResult> results(cells.size());
    auto run_cell = [&](std::size_t i) {
        const Cell& cell = cells[i];
        CellResult& res = results[i];
        const std::string name = cell.scheme.name();
        try {
            const NetArch arch = make_arch(cfg, data.dim(), {cell.width}, cell.depth);
            const double b = gradient_norm_constant_B(arch, init_betas(cell.scheme, arch));
            for (std::size_t e = 0; e <= cfg.steps; ++e)
                if (recorded(e, cfg))
                    res.rows.push_back({name, cell.width, cell.depth, e, "kl_bound",
                                        linearized_kl(b, cfg.eta * static_cast<double>(e), n, cfg)});
            if (prep) {
                const TrainModel model = make_model(cfg, arch, cell.scheme, prep->train);
                const KlEstimate est = run_kl_estimation(model, prep->train, prep->neighbors, train_config(cfg, 1));
                for (std::size_t e = 0; e < est.epochs.size(); ++e) {
                    if (!recorded(est.epochs[e], cfg)) continue;
                    res.rows.push_back({name, cell.width, cell.depth, est.epochs[e], "kl_mean", est.mean[e]});
                    res.rows.push_back({name, cell.width, cell.depth, est.epochs[e], "kl_std", est.stddev[e]});
                }
                res.rows.push_back({name, cell.width, cell.depth, cfg.steps, "diverged_runs",
                                    static_cast<double>(est.diverged_runs)});
                res.diverged = est.diverged_runs > 0;
            }
        } catch (const std::exception& e) {
            res.rows.clear();
            res.rows.push_back({name, cell.width, cell.depth, 0, "error", std::nan("")});
            res.error = e.what();
        }
    };

    unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, cells.size()));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < workers; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
        });
    for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
    for (auto& th : pool) th.join();

    std::vector<Row> rows;
    bool diverged = false;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!results[i].error.empty())
            err << "sweep cell " << cells[i].scheme.name() << " width=" << cells[i].width
                << " depth=" << cells[i].depth << " failed: " << results[i].error << "\n";
        diverged = diverged || results[i].diverged;
        rows.insert(rows.end(), results[i].rows.begin(), results[i].rows.end());
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.scheme, a.width, a.depth, a.epoch, a.metric) <
               std::tie(b.scheme, b.width, b.depth, b.epoch, b.metric);
    });

    std::ostringstream body;
    body << "scheme,width,depth,epoch,metric,value\n";
    for (const Row& r : rows)
        body << r.scheme << "," << r.width << "," << r.depth << "," << r.epoch << "," << r.metric << ","
             << num(r.value) << "\n";
    emit(cfg, cfg.out, body.str(), out);
    return diverged ? kExitDiverged : kExitOk;
}

int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.command == "bound") return cmd_bound(cfg, out, err);
    if (cfg.command == "estimate") return cmd_estimate(cfg, out, err);
    if (cfg.command == "mc-verify") return cmd_mc_verify(cfg, out, err);
    if (cfg.command == "lazy") return cmd_lazy(cfg, out, err);
    if (cfg.command == "sweep") return cmd_sweep(cfg, out, err);
    throw ValidationError("unknown command '" + cfg.command + "'");
}

}  // namespace klpriv::cli
