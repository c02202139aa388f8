// dstab: collect -> synth -> verify -> roa / mc-roa -> report.
// Exit codes: 0 pass, 2 valid negative result (infeasible program, empty estimate), 1 error.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>

#include <dstab/pipeline.hpp>

namespace fs = std::filesystem;
using namespace dstab;

namespace {

constexpr int kPass = 0, kError = 1, kNegative = 2;

struct Args {
    std::string config;
    std::string out{"out"};
    std::optional<std::uint64_t> seed;
    int threads{1};
    std::vector<double> x0;
    int steps{200};
};

class SolverFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

PipelineConfig load_config(const Args& a) {
    io::json raw = io::read_json(a.config);
    if (a.seed) raw["experiment"]["seed"] = *a.seed;
    return PipelineConfig::from_json(raw);
}

fs::path artifact(const Args& a, const std::string& name) { return fs::path(a.out) / name; }

io::json read_artifact(const Args& a, const std::string& name, const PipelineConfig& cfg) {
    const auto p = artifact(a, name);
    if (!fs::exists(p)) throw std::runtime_error("missing artifact " + p.string() + "; run the earlier stage first");
    io::json j = io::read_json(p.string());
    pipeline::check_hash(j, cfg, name);
    return j;
}

void record_timing(const Args& a, const std::string& cmd, double seconds) {
    const auto p = artifact(a, "timings.json");
    io::json t = fs::exists(p) ? io::read_json(p.string()) : io::json::object();
    t[cmd] = seconds;
    io::write_json(p.string(), t);
}

struct Loaded {
    DataMatrices data;
    SynthesisOutcome outcome;
};

Loaded load_outcome(const Args& a, const PipelineConfig& cfg) {
    Loaded l;
    l.data = dataset::data_from_json(read_artifact(a, "data.json", cfg));
    l.outcome = synthesis::outcome_from_json(read_artifact(a, "outcome.json", cfg));
    return l;
}

int cmd_collect(const Args& a) {
    const auto cfg = load_config(a);
    const auto c = pipeline::collect(cfg);
    io::write_file(artifact(a, "trajectory.csv").string(), dataset::trajectory_csv(c.trajectory));
    const auto j = pipeline::data_artifact(cfg, c);
    io::write_json(artifact(a, "data.json").string(), j);
    std::cout << "collected T=" << c.data.T << " S=" << c.data.S << " rank=" << j["rank"]["rank"].get<int>() << "\n";
    return kPass;
}

int cmd_synth(const Args& a) {
    const auto cfg = load_config(a);
    const auto data = dataset::data_from_json(read_artifact(a, "data.json", cfg));
    const auto r = pipeline::synth(cfg, data, a.threads);
    io::write_json(artifact(a, "outcome.json").string(), pipeline::outcome_artifact(cfg, r));
    const auto& o = r.best;
    std::cout << to_string(o.mode) << " delta=" << io::fmt(o.delta) << " status=" << lmi::to_string(o.status) << "\n";
    if (o.status == lmi::Status::NumericalFailure) throw SolverFailure("solver failure: " + o.solver_status);
    return o.feasible() ? kPass : kNegative;
}

int cmd_verify(const Args& a) {
    const auto cfg = load_config(a);
    const auto l = load_outcome(a, cfg);
    auto v = pipeline::verify(cfg, l.data, l.outcome);
    v.json["config_hash"] = cfg.hash;
    io::write_json(artifact(a, "verify.json").string(), v.json);
    std::cout << "verify " << (v.pass ? "pass" : "fail") << "\n";
    if (!l.outcome.feasible()) return kNegative;
    return v.pass ? kPass : kError;
}

int cmd_roa(const Args& a) {
    const auto cfg = load_config(a);
    const auto l = load_outcome(a, cfg);
    if (!l.outcome.feasible()) {
        std::cout << "no feasible outcome; ROA estimate is empty\n";
        io::write_json(artifact(a, "roa.json").string(), {{"config_hash", cfg.hash}, {"empty", true}, {"reason", "outcome is not feasible"}});
        return kNegative;
    }
    const auto ctx = pipeline::bound_context(cfg, l.outcome, l.data);
    const auto r = pipeline::roa(cfg, ctx, a.threads);
    io::write_file(artifact(a, "roa_grid.csv").string(), analysis::roa_csv(r));
    io::json s = analysis::roa_summary(r);
    s["config_hash"] = cfg.hash;
    io::write_json(artifact(a, "roa.json").string(), s);
    std::cout << "roa " << to_string(r.kind) << " c_max=" << io::fmt(r.c_max) << " area=" << io::fmt(r.area)
              << (r.empty ? " (empty estimate)" : "") << "\n";
    return r.empty ? kNegative : kPass;
}

int cmd_mc_roa(const Args& a) {
    const auto cfg = load_config(a);
    const auto l = load_outcome(a, cfg);
    if (!l.outcome.feasible()) {
        std::cout << "no feasible outcome\n";
        return kNegative;
    }
    const auto r = pipeline::mc_roa(cfg, l.outcome, a.threads);
    io::write_file(artifact(a, "mc_roa.csv").string(), analysis::mc_csv(r));
    io::json s = analysis::mc_summary(r);
    s["config_hash"] = cfg.hash;
    io::write_json(artifact(a, "mc.json").string(), s);
    std::cout << "mc-roa converged=" << r.converged_count << "/" << r.samples << " area=" << io::fmt(r.area) << "\n";
    return r.empty() ? kNegative : kPass;
}

int cmd_simulate(const Args& a) {
    const auto cfg = load_config(a);
    const auto l = load_outcome(a, cfg);
    if (!l.outcome.feasible()) {
        std::cout << "no feasible outcome\n";
        return kNegative;
    }
    const Vec x0 = Eigen::Map<const Vec>(a.x0.data(), static_cast<Index>(a.x0.size()));
    const std::string csv = pipeline::simulate(cfg, l.outcome, x0, a.steps);
    io::write_file(artifact(a, "rollout.csv").string(), csv);
    std::cout << "simulated " << a.steps << " steps\n";
    return kPass;
}

int cmd_report(const Args& a) {
    io::json rep;
    std::string hash;
    if (!a.config.empty()) {
        const auto cfg = load_config(a);
        hash = cfg.hash;
        rep["config"] = cfg.name;
    }
    rep["config_hash"] = hash.empty() ? io::json() : io::json(hash);
    auto section = [&](const std::string& file) -> std::optional<io::json> {
        const auto p = artifact(a, file);
        if (!fs::exists(p)) return std::nullopt;
        io::json j = io::read_json(p.string());
        if (!hash.empty() && j.contains("config_hash") && j["config_hash"] != hash)
            throw pipeline::HashMismatch("config hash mismatch: " + file + " belongs to another config");
        return j;
    };
    if (auto d = section("data.json")) rep["data"] = {{"T", (*d)["T"]}, {"S", (*d)["S"]}, {"seed", (*d)["seed"]}, {"rank", (*d)["rank"]}};
    if (auto o = section("outcome.json")) {
        rep["synthesis"] = {{"mode", (*o)["mode"]}, {"status", (*o)["status"]}, {"delta", (*o)["delta"]},
                            {"objective", (*o)["solver"]["objective"]}, {"margin", (*o)["solver"]["margin"]}};
        if (o->contains("delta_sweep")) rep["synthesis"]["delta_sweep"] = (*o)["delta_sweep"];
    }
    if (auto v = section("verify.json")) rep["verify"] = {{"pass", (*v)["pass"]}};
    if (auto r = section("roa.json")) rep["roa"] = *r;
    if (auto m = section("mc.json")) rep["mc_roa"] = *m;
    if (auto t = section("timings.json")) rep["timings"] = *t;
    for (const char* k : {"roa", "mc_roa"})
        if (rep.contains(k)) rep[k].erase("config_hash");
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    rep["timestamp"] = buf;
    io::write_json(artifact(a, "report.json").string(), rep);
    std::cout << rep.dump(2) << "\n";
    return kPass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-driven stabilization of nonlinear systems via descriptor embedding"};
    app.require_subcommand(1);
    Args a;
    auto common = [&](CLI::App* s, bool need_config = true) {
        auto* c = s->add_option("--config", a.config, "pipeline config (JSON)");
        if (need_config) c->required()->check(CLI::ExistingFile);
        s->add_option("--out", a.out, "artifact directory");
        s->add_option("--seed", a.seed, "override experiment.seed");
        s->add_option("--threads", a.threads, "worker threads")->check(CLI::PositiveNumber);
    };
    const std::vector<std::pair<std::string, std::string>> cmds{
        {"collect", "run the open-loop experiment and assemble data"},
        {"synth", "solve the configured LMI program"},
        {"verify", "recompute residuals and sample checks"},
        {"roa", "sublevel-set ROA estimate on the grid"},
        {"mc-roa", "Monte-Carlo ROA from closed-loop rollouts"},
        {"simulate", "closed-loop rollout from x0"},
        {"report", "consolidate artifacts into report.json"}};
    std::map<std::string, CLI::App*> sub;
    for (const auto& [name, help] : cmds) {
        sub[name] = app.add_subcommand(name, help);
        common(sub[name], name != "report");
    }
    sub["simulate"]->add_option("--x0", a.x0, "initial state")->delimiter(',')->required();
    sub["simulate"]->add_option("--steps", a.steps, "number of steps")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kPass : kError;
    }

    const std::map<std::string, int (*)(const Args&)> run{
        {"collect", cmd_collect}, {"synth", cmd_synth},       {"verify", cmd_verify}, {"roa", cmd_roa},
        {"mc-roa", cmd_mc_roa},   {"simulate", cmd_simulate}, {"report", cmd_report}};
    for (const auto& [name, s] : sub) {
        if (!s->parsed()) continue;
        try {
            fs::create_directories(a.out);
            const auto t0 = std::chrono::steady_clock::now();
            const int code = run.at(name)(a);
            if (name != "report")
                record_timing(a, name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            return code;
        } catch (const pipeline::HashMismatch& e) {
            std::cerr << e.what() << "\n";
        } catch (const DimensionError& e) {
            std::cerr << e.what() << "\n";
        } catch (const SolverFailure& e) {
            std::cerr << e.what() << "\n";
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
        }
        return kError;
    }
    return kError;
}
