#include "fbq/config.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "fbq/errors.hpp"

namespace fbq::io {

using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::vector<std::string> split_pointer(const json::json_pointer& p) {
    std::vector<std::string> out;
    json::json_pointer q = p;
    while (!q.empty()) {
        out.push_back(q.back());
        q.pop_back();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

// Walks a JSON document and reports problems with the line of the offending
// value in the original text.
class Checker {
public:
    Checker(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

    [[noreturn]] void fail(const json::json_pointer& at, const std::string& msg) const {
        std::ostringstream os;
        os << source_;
        if (const auto line = locate(text_, at)) os << ':' << line;
        os << ": " << (at.empty() ? std::string("/") : at.to_string()) << ": " << msg;
        throw ConfigError(os.str());
    }

    void only(const json& j, const json::json_pointer& at, std::initializer_list<const char*> keys) const {
        if (!j.is_object()) fail(at, "expected an object");
        for (const auto& [k, v] : j.items()) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
                fail(at / k, "unknown key '" + k + "'");
        }
    }

    double num(const json& j, const json::json_pointer& at) const {
        if (!j.is_number()) fail(at, "expected a number");
        return j.get<double>();
    }

    double positive(const json& j, const json::json_pointer& at) const {
        const double v = num(j, at);
        if (!(v > 0.0)) fail(at, "must be > 0");
        return v;
    }

    std::uint64_t count(const json& j, const json::json_pointer& at) const {
        if (!j.is_number_integer() || j.get<std::int64_t>() < 1) fail(at, "expected a positive integer");
        return j.get<std::uint64_t>();
    }

    std::vector<double> nums(const json& j, const json::json_pointer& at) const {
        if (!j.is_array()) fail(at, "expected an array of numbers");
        std::vector<double> v;
        for (std::size_t i = 0; i < j.size(); ++i) v.push_back(num(j[i], at / i));
        return v;
    }

    template <class F>
    auto guard(const json::json_pointer& at, F&& f) const {
        try {
            return f();
        } catch (const ConfigError& e) {
            fail(at, e.what());
        } catch (const DomainError& e) {
            fail(at, e.what());
        }
    }

private:
    std::string_view text_;
    std::string source_;
};

const json& param(const json& params, const char* key) {
    if (!params.contains(key)) throw ConfigError(std::string("missing parameter '") + key + "'");
    const auto& v = params.at(key);
    if (!v.is_number() && !v.is_array()) throw ConfigError(std::string("parameter '") + key + "' must be numeric");
    return v;
}

double pnum(const json& params, const char* key) {
    const auto& v = param(params, key);
    if (!v.is_number()) throw ConfigError(std::string("parameter '") + key + "' must be a number");
    return v.get<double>();
}

std::vector<double> pvec(const json& params, const char* key) {
    const auto& v = param(params, key);
    if (!v.is_array()) throw ConfigError(std::string("parameter '") + key + "' must be an array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(std::string("parameter '") + key + "' must hold numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

void only_params(const json& params, std::initializer_list<const char*> keys) {
    if (!params.is_object()) throw ConfigError("'params' must be an object");
    for (const auto& [k, v] : params.items())
        if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
            throw ConfigError("unknown parameter '" + k + "'");
}

Compensator parse_compensator(const json& j) {
    if (!j.is_object()) throw ConfigError("compensator must be an object");
    for (const auto& [k, v] : j.items())
        if (k != "kind" && k != "exponent") throw ConfigError("unknown key '" + k + "'");
    const std::string kind = j.value("kind", "power");
    Compensator c;
    if (kind == "power") {
        c.kind = CompensatorKind::Power;
        c.exponent = j.value("exponent", 1.0);
    } else if (kind == "log") {
        c.kind = CompensatorKind::Log;
    } else if (kind == "log2") {
        c.kind = CompensatorKind::LogSquared;
    } else {
        throw ConfigError("compensator kind must be power, log or log2");
    }
    return c;
}

}  // namespace

std::size_t locate(std::string_view s, const json::json_pointer& pointer) {
    const auto target = split_pointer(pointer);
    struct Frame {
        bool object;
        std::string key;
        std::size_t index;
        std::size_t key_line;
        bool expect_key;
    };
    std::vector<Frame> stack;
    std::size_t line = 1;

    auto matches = [&] {
        if (stack.size() != target.size()) return false;
        for (std::size_t i = 0; i < stack.size(); ++i) {
            const auto& f = stack[i];
            if ((f.object ? f.key : std::to_string(f.index)) != target[i]) return false;
        }
        return true;
    };
    // Line of the value starting here, if it is the one we want.
    auto at_value = [&]() -> std::size_t {
        if (target.empty()) return line;
        if (!matches()) return 0;
        return stack.back().object ? stack.back().key_line : line;
    };

    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        switch (c) {
            case '\n': ++line; break;
            case ' ': case '\t': case '\r': case ':': break;
            case '{': case '[':
                if (auto l = at_value()) return l;
                stack.push_back(Frame{c == '{', {}, 0, line, c == '{'});
                break;
            case '}': case ']':
                if (!stack.empty()) stack.pop_back();
                break;
            case ',':
                if (!stack.empty()) {
                    if (stack.back().object) stack.back().expect_key = true;
                    else ++stack.back().index;
                }
                break;
            case '"': {
                std::string str;
                for (++i; i < s.size() && s[i] != '"'; ++i) {
                    if (s[i] == '\\' && i + 1 < s.size()) ++i;
                    str.push_back(s[i]);
                }
                if (!stack.empty() && stack.back().object && stack.back().expect_key) {
                    stack.back().key = std::move(str);
                    stack.back().key_line = line;
                    stack.back().expect_key = false;
                } else if (auto l = at_value()) {
                    return l;
                }
                break;
            }
            default: {
                if (auto l = at_value()) return l;
                while (i + 1 < s.size() && std::string_view(",]}\n \t\r").find(s[i + 1]) == std::string_view::npos) ++i;
            }
        }
    }
    return 0;
}

ServiceDistribution parse_distribution(const json& j) {
    if (!j.is_object()) throw ConfigError("distribution must be an object {\"kind\": ..., \"params\": {...}}");
    for (const auto& [k, v] : j.items())
        if (k != "kind" && k != "params") throw ConfigError("unknown key '" + k + "'");
    if (!j.contains("kind") || !j["kind"].is_string()) throw ConfigError("distribution needs a string 'kind'");
    const std::string kind = j["kind"];
    const json params = j.value("params", json::object());
    if (kind == "deterministic") {
        only_params(params, {"value"});
        return ServiceDistribution::deterministic(pnum(params, "value"));
    }
    if (kind == "exponential") {
        only_params(params, {"rate"});
        return ServiceDistribution::exponential(pnum(params, "rate"));
    }
    if (kind == "pareto") {
        only_params(params, {"scale", "shape"});
        return ServiceDistribution::pareto(pnum(params, "scale"), pnum(params, "shape"));
    }
    if (kind == "weibull") {
        only_params(params, {"a", "beta"});
        return ServiceDistribution::weibull(pnum(params, "a"), pnum(params, "beta"));
    }
    if (kind == "gamma") {
        only_params(params, {"shape", "rate"});
        return ServiceDistribution::gamma(pnum(params, "shape"), pnum(params, "rate"));
    }
    if (kind == "uniform") {
        only_params(params, {"lo", "hi"});
        return ServiceDistribution::uniform(pnum(params, "lo"), pnum(params, "hi"));
    }
    if (kind == "hyperexponential") {
        only_params(params, {"weights", "rates"});
        return ServiceDistribution::hyperexponential(pvec(params, "weights"), pvec(params, "rates"));
    }
    if (kind == "bounded_pareto") {
        only_params(params, {"scale", "shape", "cap"});
        return ServiceDistribution::bounded_pareto(pnum(params, "scale"), pnum(params, "shape"), pnum(params, "cap"));
    }
    throw ConfigError("unknown distribution kind '" + kind + "'");
}

Discipline parse_discipline(const json& j) {
    std::string kind;
    json params = json::object();
    if (j.is_string()) {
        kind = j.get<std::string>();
    } else if (j.is_object()) {
        for (const auto& [k, v] : j.items())
            if (k != "kind" && k != "params") throw ConfigError("unknown key '" + k + "'");
        if (!j.contains("kind") || !j["kind"].is_string()) throw ConfigError("discipline needs a string 'kind'");
        kind = j["kind"];
        params = j.value("params", json::object());
    } else {
        throw ConfigError("discipline must be a string or an object");
    }
    std::transform(kind.begin(), kind.end(), kind.begin(), [](unsigned char c) { return std::tolower(c); });
    if (kind != "fbn") only_params(params, {});
    if (kind == "fb" || kind == "las") return discipline::FB{};
    if (kind == "ps") return discipline::PS{};
    if (kind == "srpt") return discipline::SRPT{};
    if (kind == "fifo") return discipline::FIFO{};
    if (kind == "lifo") return discipline::LIFO{};
    if (kind == "fbn") {
        only_params(params, {"levels", "quantum"});
        const auto& lv = param(params, "levels");
        if (!lv.is_number_integer() || lv.get<std::int64_t>() < 1) throw ConfigError("levels must be a positive integer");
        const double q = pnum(params, "quantum");
        if (!(q > 0.0)) throw ConfigError("quantum must be > 0");
        return discipline::FBn{lv.get<std::uint64_t>(), q};
    }
    throw ConfigError("unknown discipline '" + kind + "'");
}

json to_json(const ServiceDistribution& d) {
    return std::visit(
        [](const auto& k) -> json {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Deterministic>) return {{"kind", "deterministic"}, {"params", {{"value", k.value}}}};
            if constexpr (std::is_same_v<T, Exponential>) return {{"kind", "exponential"}, {"params", {{"rate", k.rate}}}};
            if constexpr (std::is_same_v<T, Pareto>)
                return {{"kind", "pareto"}, {"params", {{"scale", k.scale}, {"shape", k.shape}}}};
            if constexpr (std::is_same_v<T, Weibull>) return {{"kind", "weibull"}, {"params", {{"a", k.a}, {"beta", k.beta}}}};
            if constexpr (std::is_same_v<T, Gamma>)
                return {{"kind", "gamma"}, {"params", {{"shape", k.shape}, {"rate", k.rate}}}};
            if constexpr (std::is_same_v<T, Uniform>) return {{"kind", "uniform"}, {"params", {{"lo", k.lo}, {"hi", k.hi}}}};
            if constexpr (std::is_same_v<T, Hyperexponential>)
                return {{"kind", "hyperexponential"}, {"params", {{"weights", k.weights}, {"rates", k.rates}}}};
            if constexpr (std::is_same_v<T, BoundedPareto>)
                return {{"kind", "bounded_pareto"}, {"params", {{"scale", k.scale}, {"shape", k.shape}, {"cap", k.cap}}}};
        },
        d.kind());
}

json to_json(const Discipline& d) {
    if (const auto* f = std::get_if<discipline::FBn>(&d))
        return {{"kind", "fbn"}, {"params", {{"levels", f->levels}, {"quantum", f->quantum}}}};
    static const char* names[] = {"fb", "fbn", "ps", "srpt", "fifo", "lifo"};
    return {{"kind", names[d.index()]}};
}

RunConfig parse_run_config(std::string_view text, const std::string& source, const json& overrides) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t at = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(at), '\n'));
        std::string what = e.what();
        throw ConfigError(source + ":" + std::to_string(line) + ": invalid JSON: " + what);
    }
    const Checker ck(text, source);
    using P = json::json_pointer;
    const P root;
    ck.only(doc, root,
            {"model", "discipline", "horizon", "warmup", "seed", "replications", "threads", "batches", "probe_sizes",
             "probe_fraction", "census_interval", "queue_sample_interval", "max_queue_times", "initial_jobs",
             "keep_sojourns", "analytic", "scan", "outputs"});
    if (!doc.contains("model")) ck.fail(root, "missing required key 'model'");

    RunConfig rc;
    SimConfig& c = rc.sim;

    const P pm = root / "model";
    const json& model = doc["model"];
    ck.only(model, pm, {"arrival_rate", "load", "service", "interarrival"});
    if (!model.contains("service")) ck.fail(pm, "missing required key 'service'");
    c.model.service = ck.guard(pm / "service", [&] { return parse_distribution(model["service"]); });
    if (model.contains("interarrival"))
        c.model.interarrival = ck.guard(pm / "interarrival", [&] { return parse_distribution(model["interarrival"]); });
    const bool has_rate = model.contains("arrival_rate"), has_load = model.contains("load");
    if (has_rate == has_load) ck.fail(pm, "give exactly one of 'arrival_rate' or 'load'");
    if (has_rate) {
        c.model.arrival_rate = ck.num(model["arrival_rate"], pm / "arrival_rate");
        if (c.model.arrival_rate < 0.0) ck.fail(pm / "arrival_rate", "must be >= 0");
    } else {
        const double load = ck.num(model["load"], pm / "load");
        if (load < 0.0) ck.fail(pm / "load", "must be >= 0");
        c.model.arrival_rate = load / c.model.service.mean();
    }
    if (c.model.interarrival) {
        const double implied = 1.0 / c.model.interarrival->mean();
        if (std::abs(implied - c.model.arrival_rate) > 1e-9 * implied)
            ck.fail(pm, "arrival_rate must equal 1 / E[interarrival]");
    }

    if (doc.contains("discipline"))
        c.model.discipline = ck.guard(root / "discipline", [&] { return parse_discipline(doc["discipline"]); });

    if (doc.contains("horizon")) {
        const P ph = root / "horizon";
        const json& h = doc["horizon"];
        ck.only(h, ph, {"jobs", "time"});
        if (h.size() != 1) ck.fail(ph, "give exactly one of 'jobs' or 'time'");
        if (h.contains("jobs")) c.horizon = {HorizonKind::Jobs, ck.positive(h["jobs"], ph / "jobs")};
        else c.horizon = {HorizonKind::Time, ck.positive(h["time"], ph / "time")};
    }
    if (doc.contains("warmup")) {
        c.warmup = ck.num(doc["warmup"], root / "warmup");
        if (!(c.warmup >= 0.0 && c.warmup <= 0.5)) ck.fail(root / "warmup", "must lie in [0, 0.5]");
    }
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned()) ck.fail(root / "seed", "expected a non-negative integer");
        c.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("replications"))
        c.replications = static_cast<std::uint32_t>(ck.count(doc["replications"], root / "replications"));
    if (doc.contains("threads")) c.threads = static_cast<std::uint32_t>(ck.count(doc["threads"], root / "threads"));
    if (doc.contains("batches")) {
        c.batches = static_cast<std::uint32_t>(ck.count(doc["batches"], root / "batches"));
        if (c.batches < 2) ck.fail(root / "batches", "need at least 2 batches");
    }
    if (doc.contains("probe_sizes")) {
        c.probe_sizes = ck.nums(doc["probe_sizes"], root / "probe_sizes");
        for (std::size_t i = 0; i < c.probe_sizes.size(); ++i)
            if (!(c.probe_sizes[i] > 0.0)) ck.fail(root / "probe_sizes" / i, "must be > 0");
    }
    if (doc.contains("probe_fraction")) {
        c.probe_fraction = ck.num(doc["probe_fraction"], root / "probe_fraction");
        if (!(c.probe_fraction > 0.0 && c.probe_fraction <= 1e-3)) ck.fail(root / "probe_fraction", "must lie in (0, 1e-3]");
    }
    if (doc.contains("census_interval")) c.census_interval = ck.positive(doc["census_interval"], root / "census_interval");
    if (doc.contains("queue_sample_interval"))
        c.queue_sample_interval = ck.positive(doc["queue_sample_interval"], root / "queue_sample_interval");
    if (doc.contains("max_queue_times")) c.max_queue_times = ck.nums(doc["max_queue_times"], root / "max_queue_times");
    if (doc.contains("keep_sojourns")) {
        if (!doc["keep_sojourns"].is_boolean()) ck.fail(root / "keep_sojourns", "expected a boolean");
        c.keep_sojourns = doc["keep_sojourns"].get<bool>();
    }
    if (doc.contains("initial_jobs")) {
        const P pi = root / "initial_jobs";
        if (!doc["initial_jobs"].is_array()) ck.fail(pi, "expected an array");
        for (std::size_t i = 0; i < doc["initial_jobs"].size(); ++i) {
            const json& jj = doc["initial_jobs"][i];
            ck.only(jj, pi / i, {"size", "age"});
            if (!jj.contains("size")) ck.fail(pi / i, "missing 'size'");
            InitialJob ij{ck.positive(jj["size"], pi / i / "size"), 0.0};
            if (jj.contains("age")) ij.age = ck.num(jj["age"], pi / i / "age");
            if (!(ij.age >= 0.0 && ij.age < ij.size)) ck.fail(pi / i, "need 0 <= age < size");
            c.initial_jobs.push_back(ij);
        }
    }

    if (doc.contains("analytic")) {
        const P pa = root / "analytic";
        const json& a = doc["analytic"];
        ck.only(a, pa, {"x", "z", "s", "n_max", "t"});
        if (a.contains("x")) rc.analytic.x = ck.nums(a["x"], pa / "x");
        if (a.contains("z")) {
            rc.analytic.z = ck.nums(a["z"], pa / "z");
            for (std::size_t i = 0; i < rc.analytic.z.size(); ++i)
                if (!(rc.analytic.z[i] >= 0.0 && rc.analytic.z[i] <= 1.0)) ck.fail(pa / "z" / i, "must lie in [0, 1]");
        }
        if (a.contains("s")) rc.analytic.s = ck.nums(a["s"], pa / "s");
        if (a.contains("n_max")) rc.analytic.n_max = ck.count(a["n_max"], pa / "n_max");
        if (a.contains("t")) rc.analytic.t = ck.positive(a["t"], pa / "t");
    }
    if (rc.analytic.x.empty()) {
        for (double p : {0.5, 0.9, 0.99}) {
            const double x = c.model.service.quantile(p);
            if (rc.analytic.x.empty() || x != rc.analytic.x.back()) rc.analytic.x.push_back(x);
        }
    }

    if (doc.contains("scan")) {
        const P ps = root / "scan";
        const json& s = doc["scan"];
        ck.only(s, ps, {"rhos", "compensator", "points", "p_lo", "p_hi"});
        if (s.contains("rhos")) {
            rc.scan.rhos = ck.nums(s["rhos"], ps / "rhos");
            for (std::size_t i = 0; i < rc.scan.rhos.size(); ++i)
                if (!(rc.scan.rhos[i] > 0.0 && rc.scan.rhos[i] <= 0.999)) ck.fail(ps / "rhos" / i, "must lie in (0, 0.999]");
        }
        if (s.contains("compensator"))
            rc.scan.compensator = ck.guard(ps / "compensator", [&] { return parse_compensator(s["compensator"]); });
        if (s.contains("points")) rc.scan.points = ck.count(s["points"], ps / "points");
        if (s.contains("p_lo")) rc.scan.p_lo = ck.num(s["p_lo"], ps / "p_lo");
        if (s.contains("p_hi")) rc.scan.p_hi = ck.num(s["p_hi"], ps / "p_hi");
        if (!(rc.scan.p_lo > 0.0 && rc.scan.p_lo < rc.scan.p_hi && rc.scan.p_hi < 1.0))
            ck.fail(ps, "need 0 < p_lo < p_hi < 1");
    }
    if (rc.scan.rhos.empty()) rc.scan.rhos = default_heavy_traffic_grid();

    if (doc.contains("outputs")) {
        const P po = root / "outputs";
        const json& o = doc["outputs"];
        ck.only(o, po, {"metrics", "trace", "analytic", "scan"});
        for (auto [key, dst] : {std::pair{"metrics", &rc.outputs.metrics}, std::pair{"trace", &rc.outputs.trace},
                                std::pair{"analytic", &rc.outputs.analytic}, std::pair{"scan", &rc.outputs.scan}}) {
            if (!o.contains(key)) continue;
            if (!o[key].is_string() || o[key].get<std::string>().empty()) ck.fail(po / key, "expected a file name");
            *dst = o[key].get<std::string>();
        }
    }

    // CLI overrides are applied last and recorded in the hashed document.
    if (overrides.contains("seed")) c.seed = overrides["seed"].get<std::uint64_t>();
    if (overrides.contains("threads")) c.threads = overrides["threads"].get<std::uint32_t>();
    if (overrides.contains("allow_overload")) c.allow_overload = overrides["allow_overload"].get<bool>();
    rc.effective = doc;
    rc.effective["overrides"] = overrides;
    return rc;
}

std::string config_hash(const json& effective) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : effective.dump()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json to_json(const stats::Estimate& e) {
    json j = {{"value", number(e.value)}, {"std_error", number(e.std_error)}, {"dof", number(e.dof)}, {"count", e.count}};
    if (std::isfinite(e.std_error) && e.dof > 0) {
        const auto [lo, hi] = e.ci(0.95);
        j["ci95"] = {number(lo), number(hi)};
    } else {
        j["ci95"] = {nullptr, nullptr};
    }
    return j;
}

json metrics_to_json(const SimulationMetrics& m) {
    json j;
    j["replications"] = m.replications;
    j["overload"] = m.overload;
    j["measured_time"] = number(m.measured_time);
    j["measured_jobs"] = m.measured_jobs;
    j["measured_departures"] = m.measured_departures;
    j["time_avg_queue_length"] = to_json(m.time_avg_queue_length);
    j["mean_sojourn"] = to_json(m.mean_sojourn);
    j["throughput"] = to_json(m.throughput);
    j["little_residual"] = to_json(m.little_residual);
    j["little_queue_length"] = to_json(m.little_queue_length);
    j["queue_length_pmf"] = m.queue_length_pmf;
    j["probes"] = json::array();
    for (const auto& p : m.probes) j["probes"].push_back({{"size", p.size}, {"sojourn", to_json(p.sojourn)}});

    json bp;
    bp["count"] = m.busy_periods.size();
    double len = 0.0;
    std::uint64_t max_m = 0, split = 0;
    for (const auto& b : m.busy_periods) {
        len += b.length;
        max_m = std::max(max_m, b.max_queue);
        split += b.departure_instants;
    }
    bp["mean_length"] = m.busy_periods.empty() ? json(nullptr) : json(len / static_cast<double>(m.busy_periods.size()));
    bp["max_queue"] = max_m;
    bp["departure_instants"] = split;
    bp["work_conservation_error"] = number(m.work_conservation_error);
    j["busy_periods"] = bp;

    j["max_queue_at"] = json::array();
    for (const auto& [t, mt] : m.max_queue_at) j["max_queue_at"].push_back({{"t", t}, {"M", mt}});
    if (!m.census.empty()) {
        std::map<std::size_t, std::uint64_t> h;
        for (const auto& s : m.census) ++h[s.cohorts.size()];
        json hist = json::array();
        for (const auto& [k, n] : h) hist.push_back({{"cohorts", k}, {"count", n}});
        j["census"] = {{"snapshots", m.census.size()}, {"histogram", hist}};
    }
    if (!m.queue_samples.empty()) {
        json qs = json::array();
        for (const auto& [t, q] : m.queue_samples) qs.push_back({t, q});
        j["queue_samples"] = qs;
    }
    j["final_queue_length"] = m.final_queue_length;
    j["end_time"] = number(m.end_time);
    return j;
}

const std::vector<std::string>& analytic_quantity_names() {
    static const std::vector<std::string> names = {
        "rho", "rho_x", "mean_cond_sojourn", "mean_queue_length", "det_bound", "fifo_fb_md1_ratio", "borel_pmf",
        "maxq_geometric_bound", "maxq_time_bound", "v_fixed_point", "queue_length_pgf", "cohort_intensity",
        "cohort_intensity_integral", "sojourn_lst", "cond_sojourn_moment", "decay_rate", "cond_decay_rate",
        "reduced_load_tail", "busy_tail_factor", "critical_size", "slowdown_profile", "coefficient_of_variation",
        "hazard_class",
    };
    return names;
}

namespace {

json over_x(const std::vector<double>& xs, const std::function<double(double)>& f) {
    json a = json::array();
    for (double x : xs) a.push_back({{"x", x}, {"value", number(f(x))}});
    return a;
}

json quantity(const AnalyticModel& m, const AnalyticParams& p, const std::string& q) {
    const double rho = m.rho();
    if (q == "rho") return rho;
    if (q == "rho_x") return over_x(p.x, [&](double x) { return rho_x(m, x); });
    if (q == "mean_cond_sojourn") return over_x(p.x, [&](double x) { return mean_cond_sojourn(m, x); });
    if (q == "mean_queue_length") return mean_queue_length(m);
    if (q == "det_bound") return det_bound(rho);
    if (q == "fifo_fb_md1_ratio") return fifo_fb_md1_ratio(rho);
    if (q == "borel_pmf") {
        // Unit deterministic service at this load.
        json a = json::array();
        for (std::uint64_t n = 1; n <= p.n_max; ++n)
            a.push_back({{"n", n}, {"value", borel_pmf(rho, n)}, {"asymptote", borel_tail_asymptote(rho, n)}});
        return a;
    }
    if (q == "maxq_geometric_bound") {
        json a = json::array();
        for (std::uint64_t n = 1; n <= p.n_max; ++n)
            a.push_back({{"n", n}, {"value", maxq_geometric_bound(rho, static_cast<double>(n))}});
        return a;
    }
    if (q == "maxq_time_bound") return {{"t", p.t}, {"x", 0.0}, {"value", maxq_time_bound(m.lambda, rho, p.t, 0.0)}};
    if (q == "v_fixed_point") {
        json a = json::array();
        for (double t : p.x)
            for (double z : p.z) {
                const double v = v_fixed_point(m, t, z);
                a.push_back({{"t", t}, {"z", z}, {"v", v}, {"residual", v_residual(m, t, z, v)}});
            }
        return a;
    }
    if (q == "queue_length_pgf") {
        json a = json::array();
        for (double z : p.z) a.push_back({{"z", z}, {"value", queue_length_pgf(m, z)}});
        return a;
    }
    if (q == "cohort_intensity") return over_x(p.x, [&](double x) { return cohort_intensity(m, x); });
    if (q == "cohort_intensity_integral") return cohort_intensity_integral(m);
    if (q == "sojourn_lst") {
        json a = json::array();
        for (double x : p.x)
            for (double s : p.s) a.push_back({{"x", x}, {"s", s}, {"value", sojourn_lst(m, x, s)}});
        return a;
    }
    if (q == "cond_sojourn_moment") {
        json a = json::array();
        for (double x : p.x)
            for (int n : {1, 2, 3}) {
                const auto e = cond_sojourn_moment(m, x, n);
                a.push_back({{"x", x}, {"n", n}, {"value", e.value}, {"unstable", e.unstable}});
            }
        return a;
    }
    if (q == "decay_rate") {
        const auto r = decay_rate(m);
        return {{"gamma", r.gamma}, {"s_star", r.s_star}, {"multimodal", r.multimodal}};
    }
    if (q == "cond_decay_rate") return over_x(p.x, [&](double x) { return cond_decay_rate(m, x).gamma; });
    if (q == "reduced_load_tail") return over_x(p.x, [&](double x) { return reduced_load_tail(m, x); });
    if (q == "busy_tail_factor") {
        const auto* par = std::get_if<Pareto>(&m.service.kind());
        if (!par) throw DomainError("busy_tail_factor needs Pareto service (the tail index)");
        return busy_tail_factor(rho, par->shape);
    }
    if (q == "critical_size") return number(critical_size(m));
    if (q == "slowdown_profile") {
        const auto sp = slowdown_profile(m, p.x);
        json pts = json::array();
        for (std::size_t i = 0; i < sp.x.size(); ++i) pts.push_back({{"x", sp.x[i]}, {"slowdown", sp.slowdown[i]}});
        json j = {{"limit", sp.limit}, {"mean_slowdown", number(sp.mean_slowdown)}, {"mean_bound", sp.mean_bound},
                  {"points", pts}};
        j["non_monotone"] = sp.non_monotone ? json{sp.non_monotone->first, sp.non_monotone->second} : json(nullptr);
        return j;
    }
    if (q == "coefficient_of_variation") return coefficient_of_variation(m.service);
    if (q == "hazard_class") {
        const auto c = classify(m.service);
        json j = {{"class", to_string(c.classification)}, {"no_density", c.no_density}};
        j["witness"] = c.witness ? json{c.witness->first, c.witness->second} : json(nullptr);
        return j;
    }
    throw ConfigError("unknown quantity '" + q + "'");
}

}  // namespace

json analytic_report(const AnalyticModel& m, const AnalyticParams& p, const std::vector<std::string>& quantities,
                     std::vector<std::string>* failed) {
    const auto& known = analytic_quantity_names();
    for (const auto& q : quantities)
        if (std::find(known.begin(), known.end(), q) == known.end()) throw ConfigError("unknown quantity '" + q + "'");
    json report = json::object();
    for (const auto& q : quantities) {
        auto record = [&](const char* kind, const char* what) {
            report[q] = {{"error", what}, {"error_kind", kind}};
            if (failed) failed->push_back(q);
        };
        try {
            report[q] = quantity(m, p, q);
        } catch (const OverloadError& e) {
            record("overload", e.what());
        } catch (const DomainError& e) {
            record("domain", e.what());
        } catch (const InfiniteMomentError& e) {
            record("infinite_moment", e.what());
        } catch (const DivergenceError& e) {
            record("divergence", e.what());
        } catch (const NoDensityError& e) {
            record("no_density", e.what());
        } catch (const NumericError& e) {
            record("numeric", e.what());
        }
    }
    return report;
}

void stamp(json& doc, const std::string& hash, bool timestamp) {
    doc["tool_version"] = kToolVersion;
    doc["config_hash"] = hash;
    if (timestamp) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        std::ostringstream os;
        os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
        doc["generated_at"] = os.str();
    }
}

std::string csv_footer(const std::string& hash) {
    return std::string("# tool_version=") + kToolVersion + " config_hash=" + hash + "\n";
}

}  // namespace fbq::io
