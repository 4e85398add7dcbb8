#include "levysym/experiment.hpp"

#include "levysym/rearrange.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"

namespace levysym {

using nlohmann::json;

// ---- random instance generators ----

GridField random_field(const Grid& g, Rng& rng, double lo, double hi,
                       double background) {
    GridField f = make_field(g, 0.0, background);
    for (double& v : f.values) v = rng.uniform_range(lo, hi);
    return f;
}

GridField random_indicator(const Grid& g, Rng& rng, double fill_prob) {
    GridField f = make_field(g);
    for (double& v : f.values) v = rng.uniform() < fill_prob ? 1.0 : 0.0;
    return f;
}

namespace {

bool within_reach(const Grid& g, std::size_t k, double reach) {
    double c[3];
    g.cell_center(k, c);
    for (int a = 0; a < g.dim; ++a)
        if (std::abs(c[a]) >= reach) return false;
    return true;
}

GridField random_kernel(const Grid& g, Rng& rng, double reach) {
    GridField p = make_field(g);
    double mass = 0.0;
    for (std::size_t k = 0; k < p.values.size(); ++k) {
        if (!within_reach(g, k, reach)) continue;
        p.values[k] = rng.uniform();
        mass += p.values[k];
    }
    if (mass == 0.0) throw std::invalid_argument("random_kernel: grid too coarse");
    double scale = 1.0 / (mass * g.cell_volume());
    for (double& v : p.values) v *= scale;
    return p;
}

} // namespace

DiscreteInstance random_instance(const Grid& g, int n, Rng& rng) {
    if (n < 0) throw std::invalid_argument("random_instance: n must be >= 0");
    double reach = g.half_extent / static_cast<double>(n + 1) - 2.0 * g.spacing;
    if (reach < 2.0 * g.spacing)
        throw std::invalid_argument("random_instance: grid too coarse for this n");
    DiscreteInstance inst;
    inst.sigma = 1.0;
    inst.phi = make_field(g, 1.0, 1.0);
    for (std::size_t k = 0; k < inst.phi.values.size(); ++k)
        if (within_reach(g, k, reach))
            inst.phi.values[k] = 1.0 - rng.uniform();
    for (int i = 0; i <= n; ++i) {
        GridField V = make_field(g);
        for (std::size_t k = 0; k < V.values.size(); ++k)
            if (within_reach(g, k, reach) && rng.uniform() < 0.5)
                V.values[k] = rng.uniform();
        inst.traps.push_back(std::move(V));
    }
    for (int i = 0; i < n; ++i)
        inst.kernels.push_back(random_kernel(g, rng, reach));
    return inst;
}

// ---- spec plumbing ----

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Grid grid_from(const json& j) {
    return make_grid(j.at("dim").get<int>(), j.at("L").get<double>(),
                     j.at("m").get<int>());
}

double cell_dist(const Grid& g, std::size_t k, const std::vector<double>& center) {
    double c[3];
    g.cell_center(k, c);
    double s = 0.0;
    for (int a = 0; a < g.dim; ++a) {
        double off = center.empty() ? 0.0 : center[a];
        s += (c[a] - off) * (c[a] - off);
    }
    return std::sqrt(s);
}

GridField build_field(const Grid& g, const json& j) {
    std::string type = j.at("type").get<std::string>();
    if (type == "values") return field_from_json(j.at("field").dump());
    if (type == "const") {
        return make_field(g, j.value("value", 0.0), j.value("background", 0.0));
    }
    std::vector<double> center = j.value("center", std::vector<double>{});
    if (!center.empty() && static_cast<int>(center.size()) != g.dim)
        throw std::invalid_argument("field spec: center dimension mismatch");
    if (type == "ball") {
        double radius = j.at("radius").get<double>();
        double value = 1.0;
        bool hard = false;
        if (j.contains("value")) {
            if (j["value"].is_string() && j["value"] == "inf") hard = true;
            else value = j["value"].get<double>();
        }
        GridField f = make_field(g);
        for (std::size_t k = 0; k < f.values.size(); ++k)
            if (cell_dist(g, k, center) < radius)
                f.values[k] = hard ? std::numeric_limits<double>::infinity() : value;
        return f;
    }
    if (type == "gaussian") {
        double sigma = j.at("sigma").get<double>();
        double amp = j.value("amp", 1.0);
        GridField f = make_field(g);
        for (std::size_t k = 0; k < f.values.size(); ++k) {
            double r = cell_dist(g, k, center);
            f.values[k] = amp * std::exp(-0.5 * r * r / (sigma * sigma));
        }
        return f;
    }
    throw std::invalid_argument("field spec: unknown type '" + type + "'");
}

McParams mc_from(const json& spec, const RunOverrides& ov) {
    McParams mc;
    if (spec.contains("mc")) {
        const json& j = spec["mc"];
        mc.paths = j.value("paths", mc.paths);
        mc.steps = j.value("steps", mc.steps);
        mc.trunc_n = j.value("trunc_n", mc.trunc_n);
        mc.eps_n = j.value("eps_n", mc.eps_n);
        mc.pad = j.value("pad", mc.pad);
        mc.horizon = j.value("horizon", mc.horizon);
        if (j.contains("times")) mc.times = j["times"].get<std::vector<double>>();
    }
    if (!spec.contains("seed")) throw std::invalid_argument("spec: seed is mandatory");
    mc.seed = spec["seed"].get<std::uint64_t>();
    if (ov.has_seed) mc.seed = ov.seed;
    mc.workers = spec.value("workers", 0);
    if (ov.workers >= 0) mc.workers = ov.workers;
    return mc;
}

json report_json(const ComparisonReport& r) {
    return json{{"label", r.label},   {"lhs", r.lhs},
                {"lhs_se", r.lhs_se}, {"rhs", r.rhs},
                {"rhs_se", r.rhs_se}, {"margin", r.margin},
                {"tolerance", r.tolerance}, {"holds", r.holds},
                {"seed", r.seed}};
}

void csv_report_row(std::ostringstream& csv, const std::string& id,
                    const ComparisonReport& r) {
    csv << id << ',' << r.label << ',' << fmt(r.lhs) << ',' << fmt(r.lhs_se)
        << ',' << fmt(r.rhs) << ',' << fmt(r.rhs_se) << ',' << fmt(r.margin)
        << ',' << fmt(r.tolerance) << ',' << (r.holds ? 1 : 0) << '\n';
}

struct RunResult {
    json results = json::array();
    std::string csv;
    bool all_hold = true;
    double summary = 0.0; // margin or estimate, for sweep summaries
};

TrapSchedule schedule_from(const Grid& g, const json& j, double t) {
    TrapSchedule sched;
    sched.slice_times.push_back(0.0);
    auto build_slice = [&](const json& sj) {
        TrapSlice sl;
        sl.soft = sj.contains("soft") ? build_field(g, sj["soft"]) : make_field(g);
        sl.hard = sj.contains("hard") ? build_field(g, sj["hard"]) : make_field(g);
        return sl;
    };
    if (j.contains("slices")) {
        for (const auto& sj : j["slices"]) {
            sched.slice_times.push_back(sj.at("until").get<double>());
            sched.slices.push_back(build_slice(sj));
        }
    } else {
        sched.slice_times.push_back(t);
        sched.slices.push_back(build_slice(j));
    }
    validate_schedule(sched);
    return sched;
}

RunResult run_ri_verify(const json& spec, const McParams& mc) {
    Grid g = grid_from(spec.at("grid"));
    int instances = spec.value("instances", 20);
    int n = spec.value("trap_steps", 2);
    RunResult out;
    std::ostringstream csv;
    csv << "instance,label,lhs,lhs_se,rhs,rhs_se,margin,tolerance,holds\n";
    for (int i = 0; i < instances; ++i) {
        Rng rng(mc.seed, static_cast<std::uint64_t>(i));
        DiscreteInstance inst = random_instance(g, n, rng);
        ComparisonReport rep = verify_ri(inst);
        rep.seed = mc.seed;
        out.results.push_back(report_json(rep));
        csv_report_row(csv, std::to_string(i), rep);
        out.all_hold = out.all_hold && rep.holds;
        out.summary = std::min(i == 0 ? rep.margin : out.summary, rep.margin);
    }
    out.csv = csv.str();
    return out;
}

RunResult run_bll_verify(const json& spec, const McParams& mc) {
    Grid g = grid_from(spec.at("grid"));
    int instances = spec.value("instances", 20);
    int n = spec.value("trap_steps", 2);
    double reach = g.half_extent / static_cast<double>(n + 1) - 2.0 * g.spacing;
    if (reach < 2.0 * g.spacing)
        throw std::invalid_argument("bll-verify: grid too coarse for this n");
    RunResult out;
    std::ostringstream csv;
    csv << "instance,label,lhs,lhs_se,rhs,rhs_se,margin,tolerance,holds\n";
    for (int i = 0; i < instances; ++i) {
        Rng rng(mc.seed, static_cast<std::uint64_t>(i));
        std::vector<GridField> domains, kernels;
        for (int k = 0; k <= n; ++k) {
            GridField A = make_field(g);
            bool any = false;
            for (std::size_t c = 0; c < A.values.size(); ++c)
                if (within_reach(g, c, reach) && rng.uniform() < 0.6) {
                    A.values[c] = 1.0;
                    any = true;
                }
            if (!any) A.values[A.values.size() / 2] = 1.0;
            domains.push_back(std::move(A));
        }
        for (int k = 0; k < n; ++k) kernels.push_back(random_kernel(g, rng, reach));
        ComparisonReport rep = verify_bll(domains, kernels);
        rep.seed = mc.seed;
        out.results.push_back(report_json(rep));
        csv_report_row(csv, std::to_string(i), rep);
        out.all_hold = out.all_hold && rep.holds;
        out.summary = std::min(i == 0 ? rep.margin : out.summary, rep.margin);
    }
    out.csv = csv.str();
    return out;
}

RunResult single_report(const ComparisonReport& rep) {
    RunResult out;
    out.results.push_back(report_json(rep));
    std::ostringstream csv;
    csv << "instance,label,lhs,lhs_se,rhs,rhs_se,margin,tolerance,holds\n";
    csv_report_row(csv, "0", rep);
    out.csv = csv.str();
    out.all_hold = rep.holds;
    out.summary = rep.margin;
    return out;
}

RunResult run_trap_verify(const json& spec, const McParams& mc) {
    Grid g = grid_from(spec.at("grid"));
    LevyTriple T = triple_from_json(spec.at("triple").dump());
    double t = spec.at("t").get<double>();
    TrapSchedule sched = schedule_from(g, spec.at("schedule"), t);
    double sigma = spec.value("sigma", 1.0);
    GridField phi = spec.contains("phi") ? build_field(g, spec["phi"])
                                         : make_field(g, sigma, sigma);
    double allowance = spec.value("allowance", -1.0);
    return single_report(verify_trap(T, sched, phi, sigma, t, mc, allowance));
}

RunResult run_sausage(const json& spec, const McParams& mc) {
    Grid g = grid_from(spec.at("grid"));
    LevyTriple T = triple_from_json(spec.at("triple").dump());
    double t = spec.at("t").get<double>();
    GridField D = build_field(g, spec.at("set"));
    std::vector<double> drift;
    if (spec.contains("drift") && spec["drift"].contains("linear")) {
        std::vector<double> v = spec["drift"]["linear"].get<std::vector<double>>();
        if (static_cast<int>(v.size()) != T.dim)
            throw std::invalid_argument("sausage: drift dimension mismatch");
        std::vector<double> times =
            mc.times.empty() ? uniform_times(t, mc.steps) : mc.times;
        drift.resize(times.size() * T.dim);
        for (std::size_t i = 0; i < times.size(); ++i)
            for (int a = 0; a < T.dim; ++a) drift[i * T.dim + a] = v[a] * times[i];
    }
    double allowance = spec.value("allowance", -1.0);
    return single_report(verify_sausage(T, D, drift, t, mc, allowance));
}

RunResult run_cap_verify(const json& spec, const McParams& mc) {
    Grid g = grid_from(spec.at("grid"));
    LevyTriple T = triple_from_json(spec.at("triple").dump());
    GridField A = build_field(g, spec.at("set"));
    double q = spec.at("q").get<double>();
    double allowance = spec.value("allowance", -1.0);
    return single_report(verify_cap(T, A, q, mc, allowance));
}

RunResult run_capacity(const json& spec, const McParams& mc) {
    Grid g = grid_from(spec.at("grid"));
    LevyTriple T = triple_from_json(spec.at("triple").dump());
    GridField A = build_field(g, spec.at("set"));
    double q = spec.at("q").get<double>();
    RunResult out;
    std::ostringstream csv;
    csv << "q,estimate,se,bias_bound,dt,paths,holds\n";
    CapacityEstimate est;
    if (q > 0.0) {
        est = qcapacity(T, A, q, mc);
    } else {
        est = zero_capacity(T, A, mc, spec.value("q0", 1.0));
    }
    bool holds = true;
    if (spec.contains("expect")) {
        double expect = spec["expect"].get<double>();
        double rel = spec.value("rel_tol", 0.05);
        holds = std::abs(est.value - expect) <=
                rel * std::abs(expect) + 3.0 * est.std_error;
    }
    csv << fmt(est.q) << ',' << fmt(est.value) << ',' << fmt(est.std_error)
        << ',' << fmt(est.spatial_truncation_bias_bound) << ','
        << fmt(est.time_step) << ',' << est.paths << ',' << (holds ? 1 : 0) << '\n';
    for (std::size_t i = 0; i < est.ladder_q.size(); ++i)
        csv << fmt(est.ladder_q[i]) << ',' << fmt(est.ladder_value[i]) << ','
            << fmt(est.ladder_se[i]) << ",,,,\n";
    json r{{"q", est.q},
           {"value", est.value},
           {"std_error", est.std_error},
           {"bias_bound", est.spatial_truncation_bias_bound},
           {"time_step", est.time_step},
           {"paths", est.paths},
           {"holds", holds}};
    if (!est.ladder_q.empty()) {
        r["ladder_q"] = est.ladder_q;
        r["ladder_value"] = est.ladder_value;
        r["ladder_se"] = est.ladder_se;
    }
    out.results.push_back(std::move(r));
    out.csv = csv.str();
    out.all_hold = holds;
    out.summary = est.value;
    return out;
}

RunResult run_selftest(const McParams& mc) {
    RunResult out;
    std::ostringstream csv;
    csv << "name,pass\n";
    auto check = [&](const std::string& name, bool pass) {
        csv << name << ',' << (pass ? 1 : 0) << '\n';
        out.results.push_back(json{{"name", name}, {"pass", pass}});
        out.all_hold = out.all_hold && pass;
    };

    check("survival_of_zero", survival_probability(0.0) == 1.0);
    check("survival_of_log2",
          std::abs(survival_probability(std::log(2.0)) - 0.5) < 1e-15);

    Grid g = make_grid(1, 2.0, 32);
    std::vector<double> times = uniform_times(1.0, 10);
    std::vector<double> still(times.size(), 0.0); // constant path at 0

    TrapSchedule empty_sched = single_slice(1.0, make_field(g), make_field(g));
    double x0 = 0.0;
    check("kill_weight_zero_potential",
          kill_weight(times, still.data(), empty_sched, &x0) == 0.0);

    double lambda = 0.7;
    GridField soft = make_field(g);
    for (std::size_t k = 0; k < soft.values.size(); ++k) {
        double c[3];
        g.cell_center(k, c);
        if (std::abs(c[0]) < 1.0) soft.values[k] = lambda;
    }
    TrapSchedule soft_sched = single_slice(1.0, soft, make_field(g));
    double w = kill_weight(times, still.data(), soft_sched, &x0);
    check("kill_weight_constant_rate",
          std::abs(w - (1.0 - std::exp(-lambda))) < 1e-12);

    GridField box = make_field(g, 1.0); // hard set covering the box
    TrapSchedule hard_sched = single_slice(1.0, make_field(g), box);
    check("kill_weight_hard_box",
          kill_weight(times, still.data(), hard_sched, &x0) == 1.0);

    GridField A = make_field(g);
    for (std::size_t k = 0; k < A.values.size(); ++k) {
        double c[3];
        g.cell_center(k, c);
        if (std::abs(c[0]) < 0.5) A.values[k] = 1.0;
    }
    double inside = 0.0, outside = 1.5;
    auto h0 = hitting_time(times, still.data(), 1, A, &inside);
    auto h1 = hitting_time(times, still.data(), 1, A, &outside);
    check("hitting_inside_is_zero", h0.has_value() && *h0 == 0);
    check("hitting_never", !h1.has_value());

    GridField Ar = rearrange_set(A);
    double na = 0.0, nr = 0.0;
    for (double v : A.values) na += v;
    for (double v : Ar.values) nr += v;
    check("rearrange_set_preserves_volume", na == nr);

    LevyTriple zero;
    zero.dim = 1;
    zero.b = {0.0};
    zero.A = {0.0};
    McParams m2 = mc;
    m2.paths = 16;
    m2.steps = 4;
    m2.eps_n = 0.0;
    Estimate sv = sausage_volume(zero, A, {}, 1.0, m2);
    check("zero_process_sausage_is_set_volume",
          std::abs(sv.value - integrate(A)) < 1e-12 && sv.std_error == 0.0);

    out.csv = csv.str();
    return out;
}

int run_core(json spec, const RunOverrides& ov) {
    std::string kind;
    McParams mc;
    std::filesystem::path dir;
    try {
        kind = spec.at("kind").get<std::string>();
        mc = mc_from(spec, ov);
        dir = ov.out_dir.empty() ? spec.value("out_dir", std::string("."))
                                 : ov.out_dir;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "spec error: %s\n", e.what());
        return 2;
    }

    spec["seed"] = mc.seed; // resolved config for provenance
    json report;
    report["kind"] = kind;
    report["config"] = spec;

    RunResult res;
    bool failed = false;
    std::string error;
    try {
        if (kind == "ri-verify") res = run_ri_verify(spec, mc);
        else if (kind == "bll-verify") res = run_bll_verify(spec, mc);
        else if (kind == "trap-verify") res = run_trap_verify(spec, mc);
        else if (kind == "sausage") res = run_sausage(spec, mc);
        else if (kind == "capacity") res = run_capacity(spec, mc);
        else if (kind == "cap-verify") res = run_cap_verify(spec, mc);
        else if (kind == "selftest") res = run_selftest(mc);
        else {
            std::fprintf(stderr, "spec error: unknown kind '%s'\n", kind.c_str());
            return 2;
        }
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "spec error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "spec error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        failed = true;
        error = e.what();
    }

    report["results"] = res.results;
    report["holds"] = res.all_hold && !failed;
    if (failed) report["error"] = error;

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    {
        std::ofstream out(dir / "report.json");
        out << report.dump(2) << '\n';
        if (!out) {
            std::fprintf(stderr, "cannot write report under %s\n", dir.string().c_str());
            return 2;
        }
    }
    {
        std::ofstream out(dir / "report.csv");
        out << res.csv;
    }
    return (res.all_hold && !failed) ? 0 : 1;
}

} // namespace

int run_experiment(const std::string& spec_text, const RunOverrides& ov) {
    json spec;
    try {
        spec = json::parse(spec_text);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "spec parse error: %s\n", e.what());
        return 2;
    }
    return run_core(std::move(spec), ov);
}

int run_experiment_file(const std::string& spec_path, const RunOverrides& ov) {
    std::ifstream in(spec_path);
    if (!in) {
        std::fprintf(stderr, "cannot open spec file %s\n", spec_path.c_str());
        return 2;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_experiment(buf.str(), ov);
}

int run_sweep(const std::string& spec_path, const std::string& parameter,
              const std::vector<double>& values, const RunOverrides& ov) {
    if (values.empty()) {
        std::fprintf(stderr, "sweep: empty value list\n");
        return 2;
    }
    std::ifstream in(spec_path);
    if (!in) {
        std::fprintf(stderr, "cannot open spec file %s\n", spec_path.c_str());
        return 2;
    }
    json base;
    try {
        base = json::parse(in);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "spec parse error: %s\n", e.what());
        return 2;
    }

    std::filesystem::path root =
        ov.out_dir.empty() ? base.value("out_dir", std::string(".")) : ov.out_dir;
    std::ostringstream summary;
    summary << "parameter,value,exit,holds\n";
    int worst = 0;
    for (double v : values) {
        json spec = base;
        if (parameter == "m") spec.at("grid")["m"] = static_cast<int>(v);
        else if (parameter == "K") spec["mc"]["steps"] = static_cast<std::size_t>(v);
        else if (parameter == "P") spec["mc"]["paths"] = static_cast<std::size_t>(v);
        else if (parameter == "n") spec["mc"]["trunc_n"] = static_cast<int>(v);
        else if (parameter == "q") spec["q"] = v;
        else {
            std::fprintf(stderr, "sweep: unknown parameter '%s'\n", parameter.c_str());
            return 2;
        }
        RunOverrides ov2 = ov;
        std::ostringstream sub;
        sub << parameter << '-' << fmt(v);
        ov2.out_dir = (root / sub.str()).string();
        int code = run_core(std::move(spec), ov2);
        worst = std::max(worst, code);
        summary << parameter << ',' << fmt(v) << ',' << code << ','
                << (code == 0 ? 1 : 0) << '\n';
    }
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    std::ofstream out(root / "summary.csv");
    out << summary.str();
    return worst;
}

int cli_main(int argc, char** argv) {
    CLI::App app{"rearrangement-inequality verification experiments"};
    std::string spec_path, out_dir, sweep_param;
    std::uint64_t seed = 0;
    bool has_seed = false;
    int workers = -1;
    std::vector<double> sweep_values;
    app.add_option("--spec", spec_path, "experiment spec JSON file")->required();
    auto* seed_opt = app.add_option("--seed", seed, "override the spec seed");
    app.add_option("--workers", workers, "worker thread count (0 = hardware)")
        ->envname("LEVYSYM_WORKERS");
    app.add_option("--out-dir", out_dir, "report output directory");
    app.add_option("--sweep", sweep_param, "sweep parameter (m, K, P, n, q)");
    app.add_option("--values", sweep_values, "sweep values")->delimiter(',');
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    has_seed = seed_opt->count() > 0;

    RunOverrides ov;
    ov.has_seed = has_seed;
    ov.seed = seed;
    ov.workers = workers;
    ov.out_dir = out_dir;
    if (!sweep_param.empty()) return run_sweep(spec_path, sweep_param, sweep_values, ov);
    return run_experiment_file(spec_path, ov);
}

} // namespace levysym
