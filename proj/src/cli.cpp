#include "fbq/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fbq/analytic.hpp"
#include "fbq/config.hpp"
#include "fbq/engine.hpp"
#include "fbq/errors.hpp"
#include "fbq/validation.hpp"

namespace fbq::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Globals {
    std::string config;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool no_timestamp = false;
    bool allow_overload = false;
    unsigned jobs = 1;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path output(const Globals& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return fs::path(g.out_dir) / name;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

io::RunConfig load(const Globals& g) {
    if (g.config.empty()) throw ConfigError("--config is required for this command");
    json overrides = json::object();
    if (g.seed_given) overrides["seed"] = g.seed;
    if (g.allow_overload) overrides["allow_overload"] = true;
    overrides["threads"] = g.jobs;
    return io::parse_run_config(read_file(g.config), g.config, overrides);
}

json model_json(const io::RunConfig& rc) {
    const auto& m = rc.sim.model;
    json j = {{"arrival_rate", m.arrival_rate}, {"load", m.load()}, {"service", io::to_json(m.service)},
              {"discipline", io::to_json(m.discipline)}};
    if (m.interarrival) j["interarrival"] = io::to_json(*m.interarrival);
    return j;
}

std::string fmt(double x) {
    if (!std::isfinite(x)) return "";
    std::ostringstream s;
    s << std::setprecision(12) << x;
    return s.str();
}

int cmd_simulate(const Globals& g, bool trace, std::ostream& out) {
    auto rc = load(g);
    const std::string hash = io::config_hash(rc.effective);
    std::ostringstream csv;
    if (trace) {
        csv << "time,event_kind,job_id,queue_length_after,youngest_age\n" << std::setprecision(17);
        rc.sim.trace = [&csv](const TraceRecord& r) {
            csv << r.time << ',' << r.event_kind << ',' << r.job_id << ',' << r.queue_length_after << ',';
            if (std::isfinite(r.youngest_age)) csv << r.youngest_age;
            csv << '\n';
        };
    }
    const auto m = run(rc.sim);
    json doc = {{"model", model_json(rc)}, {"config", rc.effective}, {"metrics", io::metrics_to_json(m)}};
    io::stamp(doc, hash, !g.no_timestamp);
    const auto mp = output(g, rc.outputs.metrics);
    write(mp, dump(doc));
    out << "metrics: " << mp.string() << '\n';
    if (trace) {
        csv << io::csv_footer(hash);
        const auto tp = output(g, rc.outputs.trace);
        write(tp, csv.str());
        out << "trace: " << tp.string() << '\n';
    }
    if (!m.overload)
        out << "time_avg_queue_length " << fmt(m.time_avg_queue_length.value) << " +- "
            << fmt(m.time_avg_queue_length.half_width(0.95)) << '\n';
    return kOk;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> v;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');)
        if (!item.empty()) v.push_back(item);
    return v;
}

int cmd_analytic(const Globals& g, const std::string& quantities, std::ostream& out) {
    const auto rc = load(g);
    const bool all = quantities.empty() || quantities == "all";
    const auto names = all ? io::analytic_quantity_names() : split_list(quantities);
    if (names.empty()) throw ConfigError("--quantities: empty list");
    std::vector<std::string> failed;
    const auto report = io::analytic_report(AnalyticModel::from(rc.sim.model), rc.analytic, names, &failed);
    json doc = {{"model", model_json(rc)}, {"quantities", report}};
    io::stamp(doc, io::config_hash(rc.effective), !g.no_timestamp);
    const auto p = output(g, rc.outputs.analytic);
    write(p, dump(doc));
    out << "analytic: " << p.string() << '\n';
    for (const auto& q : failed) out << "unavailable: " << q << ": " << report[q]["error"].get<std::string>() << '\n';
    // A failed quantity that was asked for by name is an error; in the full
    // report it is only recorded.
    return !all && !failed.empty() ? kDomain : kOk;
}

int cmd_validate(const Globals& g, const std::string& suite, double effort, std::ostream& out) {
    validation::Options o;
    if (g.seed_given) o.seed = g.seed;
    o.effort = effort;
    o.threads = g.jobs;
    const auto verdicts = validation::run_suite(suite, o);
    json doc = {{"suite", suite}, {"seed", o.seed}, {"effort", effort}, {"verdicts", validation::to_json(verdicts)}};
    const json effective = {{"suite", suite}, {"seed", o.seed}, {"effort", effort}};
    const std::string hash = io::config_hash(effective);
    io::stamp(doc, hash, !g.no_timestamp);
    write(output(g, "validation.json"), dump(doc));
    write(output(g, "validation.csv"), validation::to_csv(verdicts) + io::csv_footer(hash));
    std::size_t bad = 0;
    for (const auto& v : verdicts) {
        out << std::left << std::setw(14) << validation::to_string(v.outcome) << v.experiment << '\n';
        bad += !v.passed();
    }
    out << verdicts.size() << " verdicts, " << bad << " not passed\n";
    return validation::all_passed(verdicts) ? kOk : kValidationFailed;
}

int cmd_scan(const Globals& g, const std::string& kind, std::ostream& out) {
    const auto rc = load(g);
    const auto am = AnalyticModel::from(rc.sim.model);
    std::ostringstream csv;
    csv << std::setprecision(12);
    if (kind == "heavy-traffic") {
        csv << "rho,EQ,compensated,lower_bound,error\n";
        for (const auto& r : heavy_traffic_scan(am.service, rc.scan.compensator, rc.scan.rhos))
            csv << fmt(r.rho) << ',' << fmt(r.eq) << ',' << fmt(r.compensated) << ',' << fmt(r.lower_bound) << ','
                << (r.error ? *r.error : "") << '\n';
        csv << "# compensator=" << rc.scan.compensator.name() << '\n';
    } else if (kind == "slowdown-profile") {
        const auto xs = quantile_grid(am.service, rc.scan.p_lo, rc.scan.p_hi, rc.scan.points);
        const auto p = slowdown_profile(am, xs);
        csv << "x,ES,limit\n";
        for (std::size_t i = 0; i < p.x.size(); ++i) csv << fmt(p.x[i]) << ',' << fmt(p.slowdown[i]) << ',' << fmt(p.limit) << '\n';
        csv << "# mean_slowdown=" << fmt(p.mean_slowdown) << " mean_bound=" << fmt(p.mean_bound);
        if (p.non_monotone) csv << " non_monotone=" << fmt(p.non_monotone->first) << ':' << fmt(p.non_monotone->second);
        csv << '\n';
    } else if (kind == "decay-curve") {
        const auto r = decay_rate(am);
        csv << "s,objective\n";
        for (const auto& [s, v] : r.curve) csv << fmt(s) << ',' << fmt(v) << '\n';
        csv << "# gamma=" << fmt(r.gamma) << " s_star=" << fmt(r.s_star) << '\n';
    } else {
        throw ConfigError("unknown scan kind '" + kind + "' (heavy-traffic, slowdown-profile, decay-curve)");
    }
    csv << io::csv_footer(io::config_hash(rc.effective));
    const auto p = output(g, rc.outputs.scan);
    write(p, csv.str());
    out << "scan: " << p.string() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Single-server queue laboratory: FB/LAS simulation and analytic cross-checks", "fbq"};
    app.set_version_flag("--version", std::string(io::kToolVersion));
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "JSON run config");
    app.add_option("--out-dir", g.out_dir, "Directory for output files");
    app.add_option("--seed", g.seed, "Override the seed")->each([&](const std::string&) { g.seed_given = true; });
    app.add_flag("--no-timestamp", g.no_timestamp, "Omit generated_at so outputs are byte-identical");
    app.add_flag("--allow-overload", g.allow_overload, "Permit rho >= 1 (stationary estimators are suppressed)");
    app.add_option("--jobs", g.jobs, "Parallel replications")->check(CLI::PositiveNumber);

    bool trace = false;
    auto* sim = app.add_subcommand("simulate", "Run the simulator and write metrics JSON");
    sim->add_flag("--trace", trace, "Also write an event-trace CSV");

    std::string quantities;
    auto* ana = app.add_subcommand("analytic", "Evaluate analytic quantities");
    ana->add_option("--quantities", quantities, "Comma-separated quantity names, or 'all'");

    std::string suite = "all";
    double effort = 1.0;
    auto* val = app.add_subcommand("validate", "Run validation experiments");
    val->add_option("suite", suite, "Suite name or 'all'");
    val->add_option("--effort", effort, "Multiplier on simulation budgets")->check(CLI::PositiveNumber);

    std::string kind;
    auto* scan = app.add_subcommand("scan", "Write a CSV table for plotting");
    scan->add_option("kind", kind, "heavy-traffic | slowdown-profile | decay-curve")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (sim->parsed()) return cmd_simulate(g, trace, out);
        if (ana->parsed()) return cmd_analytic(g, quantities, out);
        if (val->parsed()) return cmd_validate(g, suite, effort, out);
        if (scan->parsed()) return cmd_scan(g, kind, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const OverloadError& e) {
        err << "overload: " << e.what();
        if (std::isfinite(e.critical_size())) err << " (x* = " << e.critical_size() << ")";
        err << '\n';
        return kDomain;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kDomain;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

}  // namespace fbq::cli
