#include <CLI11.hpp>

#include "commands.hpp"
#include "klpriv/errors.hpp"
#include "klpriv/version.hpp"

namespace klpriv::cli {

namespace {

struct FlagSpec {
    const char* flag;
    const char* key;
    const char* help;
};

constexpr FlagSpec kValueFlags[] = {
    {"--scheme", "scheme", "lecun | he | ntk | xavier | all | custom:b1,...,bL"},
    {"--d", "d", "input dimension (synthetic data; checked against CSV)"},
    {"--width", "width", "hidden width m, hidden widths m1,...,m(L-1), or a sweep grid"},
    {"--depth", "depth", "number of weight layers L (a grid for sweep)"},
    {"--outputs", "outputs", "output dimension o"},
    {"--eta", "eta", "step size"},
    {"--steps", "steps", "number of full-batch steps"},
    {"--sigma2", "sigma2", "noise variance used for KL accounting"},
    {"--runs", "runs", "independent training runs"},
    {"--seed", "seed", "random seed"},
    {"--neighbor", "neighbor", "replace | remove | add"},
    {"--kl-constant", "kl_constant", "paper (1/2sigma2) | exact (1/4sigma2)"},
    {"--data", "data", "synth:<n> | csv:<path>"},
    {"--model", "model", "dnn | linearized"},
    {"--pool", "pool", "held-out pool size for add/replace neighbors (0 = n/8)"},
    {"--neighbor-cap", "neighbor_cap", "maximum number of replace-one neighbors"},
    {"--label-column", "label_column", "CSV label column"},
    {"--normalize", "normalize", "none | cap | exact"},
    {"--record-every", "record_every", "trace row spacing in steps"},
    {"--replay-sigma2", "replay_sigma2", "simulate trajectories with this variance instead of sigma2"},
    {"--T", "T", "time horizon for bounds (default eta*steps)"},
    {"--c", "c", "non-smoothness constant for the drift bound"},
    {"--beta-smooth", "beta_smooth", "smoothness constant for the drift bound"},
    {"--rank", "rank", "rank(M_T) for the drift bound"},
    {"--eps", "eps", "KL budget for the lazy trade-off schedule"},
    {"--samples", "samples", "Monte Carlo samples per check"},
    {"--ridge", "ridge", "ridge for the lazy solve (default 1e-10*trace/n)"},
};

}  // namespace

int run_app(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"KL privacy bounds and estimates for noisy training of ReLU networks", "klpriv"};
    app.set_version_flag("--version", kVersion);

    std::string command;
    app.add_option("command", command, "bound | estimate | mc-verify | lazy | sweep")
        ->check(CLI::IsMember({"bound", "estimate", "mc-verify", "lazy", "sweep"}));

    std::vector<std::pair<const FlagSpec*, CLI::Option*>> value_opts;
    std::vector<std::string> values(std::size(kValueFlags));
    for (std::size_t i = 0; i < std::size(kValueFlags); ++i)
        value_opts.emplace_back(&kValueFlags[i], app.add_option(kValueFlags[i].flag, values[i], kValueFlags[i].help));

    bool train = false, empirical = false;
    auto* train_opt = app.add_flag("--train", train, "lazy: also run linearized noisy GD");
    auto* emp_opt = app.add_flag("--empirical", empirical, "sweep: add empirical KL estimates");
    std::string config_path, out_path;
    unsigned threads = 0;
    app.add_option("--config", config_path, "key=value file (an earlier output file works too)");
    app.add_option("--out", out_path, "output path (stdout when omitted)");
    app.add_option("--threads", threads, "worker threads (0 = all cores); results do not depend on it");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        std::map<std::string, std::string> kv;
        if (!config_path.empty()) kv = load_config_file(config_path);
        if (!command.empty()) kv["command"] = command;
        for (std::size_t i = 0; i < value_opts.size(); ++i)
            if (value_opts[i].second->count() > 0) kv[value_opts[i].first->key] = values[i];
        if (train_opt->count() > 0) kv["train"] = train ? "true" : "false";
        if (emp_opt->count() > 0) kv["empirical"] = empirical ? "true" : "false";
        if (kv.count("command") == 0) throw ValidationError("no command given");

        RunConfig cfg = parse_entries(kv);
        cfg.out = out_path;
        cfg.threads = threads;
        cfg.validate();
        return dispatch(cfg, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}

}  // namespace klpriv::cli
