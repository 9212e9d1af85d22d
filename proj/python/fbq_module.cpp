#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fbq/analytic.hpp"
#include "fbq/config.hpp"
#include "fbq/dists.hpp"
#include "fbq/engine.hpp"
#include "fbq/errors.hpp"
#include "fbq/validation.hpp"

namespace py = pybind11;
using namespace fbq;
using json = nlohmann::json;

namespace {

AnalyticModel model(const ServiceDistribution& d, double lam) { return AnalyticModel{lam, d, std::nullopt}; }

// JSON crosses the boundary as text; the Python wrapper decodes it.
std::string simulate(const std::string& config, std::optional<std::uint64_t> seed, bool allow_overload) {
    json overrides = json::object();
    if (seed) overrides["seed"] = *seed;
    if (allow_overload) overrides["allow_overload"] = true;
    const auto rc = io::parse_run_config(config, "<config>", overrides);
    SimulationMetrics m;
    {
        py::gil_scoped_release nogil;
        m = run(rc.sim);
    }
    return io::metrics_to_json(m).dump();
}

std::string analytic(const std::string& config, const std::vector<std::string>& quantities) {
    const auto rc = io::parse_run_config(config, "<config>");
    const auto& names = quantities.empty() ? io::analytic_quantity_names() : quantities;
    return io::analytic_report(AnalyticModel::from(rc.sim.model), rc.analytic, names).dump();
}

std::string validate(const std::string& suite, std::uint64_t seed, double effort) {
    validation::Options o;
    o.seed = seed;
    o.effort = effort;
    std::vector<validation::Verdict> v;
    {
        py::gil_scoped_release nogil;
        v = validation::run_suite(suite, o);
    }
    return validation::to_json(v).dump();
}

std::vector<double> departures(const std::vector<double>& arrivals, const std::vector<double>& sizes,
                               const std::string& discipline) {
    if (arrivals.size() != sizes.size()) throw DomainError("arrivals and sizes differ in length");
    std::vector<Job> jobs(arrivals.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        jobs[i].id = i;
        jobs[i].arrival = arrivals[i];
        jobs[i].size = sizes[i];
    }
    return simulate_trace(jobs, io::parse_discipline(json::parse(discipline)));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "FB/LAS single-server queue simulator and analytic formulas";
    m.attr("__version__") = io::kToolVersion;

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<OverloadError>(m, "OverloadError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
    py::register_exception<InfiniteMomentError>(m, "InfiniteMomentError", base.ptr());
    py::register_exception<NoDensityError>(m, "NoDensityError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());

    py::class_<ServiceDistribution>(m, "ServiceDistribution")
        .def_static("from_json", [](const std::string& s) { return io::parse_distribution(json::parse(s)); })
        .def_static("deterministic", &ServiceDistribution::deterministic)
        .def_static("exponential", &ServiceDistribution::exponential)
        .def_static("pareto", &ServiceDistribution::pareto)
        .def_static("weibull", &ServiceDistribution::weibull)
        .def_static("gamma", &ServiceDistribution::gamma)
        .def_static("uniform", &ServiceDistribution::uniform)
        .def_static("hyperexponential", &ServiceDistribution::hyperexponential)
        .def_static("bounded_pareto", &ServiceDistribution::bounded_pareto)
        .def("to_json", [](const ServiceDistribution& d) { return io::to_json(d).dump(); })
        .def("name", &ServiceDistribution::name)
        .def("cdf", &ServiceDistribution::cdf)
        .def("survival", &ServiceDistribution::survival)
        .def("pdf", &ServiceDistribution::pdf)
        .def("hazard_rate", &ServiceDistribution::hazard_rate)
        .def("quantile", &ServiceDistribution::quantile)
        .def("mean", &ServiceDistribution::mean)
        .def("second_moment", &ServiceDistribution::second_moment)
        .def("truncated_moment", &ServiceDistribution::truncated_moment, py::arg("x"), py::arg("order") = 1)
        .def("mgf", &ServiceDistribution::mgf)
        .def("lst", &ServiceDistribution::lst)
        .def("right_endpoint", &ServiceDistribution::right_endpoint)
        .def(
            "sample",
            [](const ServiceDistribution& d, std::size_t n, std::uint64_t seed) {
                RngStream rng(seed);
                std::vector<double> v(n);
                for (auto& x : v) x = d.sample(rng);
                return v;
            },
            py::arg("n"), py::arg("seed"))
        .def("__repr__", &ServiceDistribution::name);

    m.def("classify", [](const ServiceDistribution& d) { return to_string(classify(d).classification); });
    m.def("coefficient_of_variation", &coefficient_of_variation);

    m.def("rho_x", [](const ServiceDistribution& d, double lam, double x) { return rho_x(model(d, lam), x); });
    m.def("mean_cond_sojourn", [](const ServiceDistribution& d, double lam, double x) {
        return mean_cond_sojourn(model(d, lam), x);
    });
    m.def("mean_queue_length", [](const ServiceDistribution& d, double lam) { return mean_queue_length(model(d, lam)); });
    m.def("det_bound", &det_bound);
    m.def("fifo_fb_md1_ratio", &fifo_fb_md1_ratio);
    m.def("borel_pmf", &borel_pmf);
    m.def("maxq_geometric_bound", &maxq_geometric_bound);
    m.def("maxq_time_bound", &maxq_time_bound);
    m.def("v_fixed_point", [](const ServiceDistribution& d, double lam, double t, double z) {
        return v_fixed_point(model(d, lam), t, z);
    });
    m.def("queue_length_pgf", [](const ServiceDistribution& d, double lam, double z) {
        return queue_length_pgf(model(d, lam), z);
    });
    m.def("cohort_intensity", [](const ServiceDistribution& d, double lam, double x) {
        return cohort_intensity(model(d, lam), x);
    });
    m.def("cohort_intensity_integral",
          [](const ServiceDistribution& d, double lam) { return cohort_intensity_integral(model(d, lam)); });
    m.def("sojourn_lst", [](const ServiceDistribution& d, double lam, double x, double s) {
        return sojourn_lst(model(d, lam), x, s);
    });
    m.def("decay_rate", [](const ServiceDistribution& d, double lam) {
        const auto r = decay_rate(model(d, lam));
        return py::make_tuple(r.gamma, r.s_star);
    });
    m.def("critical_size", [](const ServiceDistribution& d, double lam) { return critical_size(model(d, lam)); });
    m.def("slowdown_profile", [](const ServiceDistribution& d, double lam, const std::vector<double>& xs) {
        return slowdown_profile(model(d, lam), xs).slowdown;
    });

    m.def("_simulate", &simulate, py::arg("config"), py::arg("seed") = py::none(), py::arg("allow_overload") = false);
    m.def("_analytic", &analytic, py::arg("config"), py::arg("quantities") = std::vector<std::string>{});
    m.def("_validate", &validate, py::arg("suite"), py::arg("seed") = validation::Options{}.seed,
          py::arg("effort") = 1.0);
    m.def("_departures", &departures);
    m.def("suite_names", [] {
        std::vector<std::string> v;
        for (const auto& [k, f] : validation::suites()) v.push_back(k);
        return v;
    });
    m.def("analytic_quantity_names", &io::analytic_quantity_names);
}
