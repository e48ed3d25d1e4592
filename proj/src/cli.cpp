#include "gdfpca/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <toml.hpp>

#include "gdfpca/serialize.hpp"

namespace gdfpca {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return kExitUsage;
        case ErrorKind::invalid_input:
        case ErrorKind::insufficient_data:
        case ErrorKind::missing_data:
        case ErrorKind::parse:
        case ErrorKind::missing_graph:
        case ErrorKind::invalid_lag: return kExitData;
        case ErrorKind::phase_alignment:
        case ErrorKind::degenerate_precision:
        case ErrorKind::numerical:
        case ErrorKind::internal: return kExitNumerical;
    }
    return kExitNumerical;
}

int resolve_threads(int requested) {
    int n = requested > 0 ? requested : int(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("GDFPCA_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return std::max(n, 1);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const auto workers = std::min<std::size_t>(std::size_t(std::max(threads, 1)), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<BenchRow> run_bench(const BenchConfig& cfg, std::ostream* progress) {
    if (cfg.settings.empty() || cfg.methods.empty()) throw Error(ErrorKind::config, "bench needs settings and methods");
    if (cfg.replicates < 1) throw Error(ErrorKind::config, "replicates must be positive");
    const auto nm = cfg.methods.size();
    const auto nq = std::size_t(cfg.q_max);
    std::vector<BenchRow> rows;
    for (const auto& s : cfg.settings) {
        SimConfig sim;
        sim.p = s.p;
        sim.units = s.units;
        sim.kappa = s.kappa;
        sim.lag = s.lag;
        sim.sim_case = s.sim_case;
        sim.seed = cfg.seed;
        sim.validate();

        // [replicate][method][q], NaN marks a failed fit
        std::vector<double> nmse_table(std::size_t(cfg.replicates) * nm * nq, std::nan(""));
        std::atomic<int> done{0};
        std::mutex log_mutex;
        parallel_for(std::size_t(cfg.replicates), resolve_threads(cfg.threads), [&](std::size_t r) {
            const auto truth = simulate(sim, r);
            for (std::size_t m = 0; m < nm; ++m) {
                auto fc = cfg.fit;
                if (needs_graph(cfg.methods[m])) fc.graph = truth.graph;
                try {
                    const auto res = fit(cfg.methods[m], truth.observations, fc);
                    for (std::size_t q = 0; q < nq; ++q)
                        nmse_table[(r * nm + m) * nq + q] = nmse(truth.curves, res.reconstruction(int(q) + 1), res.grid);
                } catch (const Error& e) {
                    std::lock_guard lock(log_mutex);
                    if (progress)
                        *progress << "replicate " << r << " " << to_string(cfg.methods[m]) << ": " << e.what() << '\n';
                }
            }
            const int d = ++done;
            if (progress) {
                std::lock_guard lock(log_mutex);
                *progress << "[" << to_string(s.sim_case) << " p=" << s.p << " J=" << s.units << " kappa=" << s.kappa
                          << "] replicate " << d << "/" << cfg.replicates << '\n';
            }
        });

        for (std::size_t m = 0; m < nm; ++m)
            for (std::size_t q = 0; q < nq; ++q) {
                BenchRow row{to_string(s.sim_case), to_string(cfg.methods[m]), s.p, s.units, s.kappa, int(q) + 1};
                double sum = 0.0, sum2 = 0.0;
                for (int r = 0; r < cfg.replicates; ++r) {
                    const double v = nmse_table[(std::size_t(r) * nm + m) * nq + q];
                    if (std::isnan(v)) {
                        ++row.failures;
                        continue;
                    }
                    sum += v;
                    sum2 += v * v;
                    ++row.replicates;
                }
                if (row.replicates > 0) {
                    row.mean = sum / row.replicates;
                    const double var =
                        row.replicates > 1 ? std::max(0.0, (sum2 - row.replicates * row.mean * row.mean) / (row.replicates - 1)) : 0.0;
                    row.std_error = std::sqrt(var / row.replicates);
                } else {
                    row.mean = row.std_error = std::nan("");
                }
                rows.push_back(row);
            }
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "case,method,p,J,kappa,q,mean_nmse,std_error,replicates,failures\n";
    char buf[64];
    for (const auto& r : rows) {
        out << r.sim_case << ',' << r.method << ',' << r.p << ',' << r.units << ',';
        std::snprintf(buf, sizeof(buf), "%g", r.kappa);
        out << buf << ',' << r.q << ',';
        std::snprintf(buf, sizeof(buf), "%.4f,%.4f", r.mean, r.std_error);
        out << buf << ',' << r.replicates << ',' << r.failures << '\n';
    }
    return out.str();
}

namespace {

// Values from a TOML table fill options that were not given on the command line.
class TomlDefaults {
public:
    TomlDefaults(const CLI::App* app, const toml::table* table) : app_(app), table_(table) {}

    template <class T>
    void fill(const std::string& option, const std::string& key, T& target) const {
        if (!table_ || app_->get_option(option)->count() > 0) return;
        const auto node = (*table_)[key];
        if (!node) return;
        if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = node.value<std::string>()) target = *v;
            else throw Error(ErrorKind::config, "config key '" + key + "' must be a string");
        } else if constexpr (std::is_same_v<T, std::vector<std::string>> || std::is_same_v<T, std::vector<double>> ||
                             std::is_same_v<T, std::vector<int>>) {
            using E = typename T::value_type;
            const auto* arr = node.as_array();
            if (!arr) throw Error(ErrorKind::config, "config key '" + key + "' must be an array");
            target.clear();
            for (const auto& el : *arr) {
                auto v = el.template value<E>();
                if (!v) throw Error(ErrorKind::config, "config key '" + key + "' has an element of the wrong type");
                target.push_back(*v);
            }
        } else {
            auto v = node.value<T>();
            if (!v) throw Error(ErrorKind::config, "config key '" + key + "' has the wrong type");
            target = *v;
        }
    }

private:
    const CLI::App* app_;
    const toml::table* table_;
};

toml::table load_toml(const std::string& path) {
    try {
        return toml::parse_file(path);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << path << ": " << e.description() << " (line " << e.source().begin.line << ")";
        throw Error(ErrorKind::config, msg.str());
    }
}

struct FitOptions {
    int k_max = 0;
    int fixed_k = 0;
    double fve = 0.8;
    double tau_l = 0.95;
    int l_max = -1;
    int bandwidth = 0;
    std::vector<double> lambdas;
    int lambda_count = 10;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--k-max", k_max, "Eigenvalues counted in the FVE total (0: all)")->capture_default_str()
            ->check(CLI::NonNegativeNumber);
        cmd->add_option("--fixed-k", fixed_k, "Use exactly this many components (0: select by FVE)")
            ->capture_default_str()->check(CLI::NonNegativeNumber);
        cmd->add_option("--fve", fve, "FVE threshold for K")->capture_default_str()->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--tau-l", tau_l, "Filter energy threshold for L_k")->capture_default_str()
            ->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--l-max", l_max, "Largest filter lag (-1: floor(J/4))")->capture_default_str();
        cmd->add_option("--bandwidth", bandwidth, "Lag-window bandwidth r (0: floor(J^0.4))")->capture_default_str()
            ->check(CLI::NonNegativeNumber);
        cmd->add_option("--lambda", lambdas, "Explicit lambda grid (default: 10 log-spaced values below lambda_max)");
        cmd->add_option("--lambda-count", lambda_count, "Size of the default lambda grid")->capture_default_str()
            ->check(CLI::PositiveNumber);
    }

    void fill(const CLI::App* cmd, const toml::table* t) {
        TomlDefaults d(cmd, t);
        d.fill("--k-max", "k_max", k_max);
        d.fill("--fixed-k", "fixed_k", fixed_k);
        d.fill("--fve", "fve", fve);
        d.fill("--tau-l", "tau_l", tau_l);
        d.fill("--l-max", "l_max", l_max);
        d.fill("--bandwidth", "bandwidth", bandwidth);
        d.fill("--lambda", "lambda", lambdas);
        d.fill("--lambda-count", "lambda_count", lambda_count);
    }

    FitConfig to_config() const {
        FitConfig c;
        c.truncation.k_max = k_max;
        c.truncation.fixed_k = fixed_k;
        c.truncation.fve_threshold = fve;
        c.truncation.filter_energy_threshold = tau_l;
        c.truncation.l_max = l_max;
        c.bandwidth = bandwidth;
        c.lambdas = lambdas;
        c.lambda_count = lambda_count;
        return c;
    }
};

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const auto& n : names) {
        if (n == "all" || n == "ALL") {
            for (auto m : all_methods())
                if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
            continue;
        }
        const auto m = parse_method(n);
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    if (out.empty()) throw Error(ErrorKind::config, "no methods requested");
    return out;
}

const toml::table* section(const toml::table& root, const char* name) {
    if (const auto* t = root[name].as_table()) return t;
    return &root;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Graphical dynamic functional principal component analysis for multivariate functional time series"};
    app.require_subcommand(1);

    // simulate
    SimConfig sim;
    std::string sim_case = "baseline", sim_out, sim_config;
    std::uint64_t sim_rep = 0;
    auto* cs = app.add_subcommand("simulate", "Generate a simulated data set with known graph");
    cs->add_option("--config", sim_config, "TOML file ([simulate] table)");
    cs->add_option("--p", sim.p, "Number of series")->capture_default_str()->check(CLI::PositiveNumber);
    cs->add_option("--J", sim.units, "Number of time units")->capture_default_str()->check(CLI::Range(2, 1 << 24));
    cs->add_option("--K", sim.k, "Number of components")->capture_default_str()->check(CLI::PositiveNumber);
    cs->add_option("--L", sim.lag, "Filter lag range")->capture_default_str()->check(CLI::NonNegativeNumber);
    cs->add_option("--kappa", sim.kappa, "Expected degree of the random graph")->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cs->add_option("--rho", sim.rho, "AR(1) coefficients per component");
    cs->add_option("--Z", sim.grid_size, "Grid size (0: J/4 + 10)")->capture_default_str()->check(CLI::NonNegativeNumber);
    cs->add_option("--case", sim_case, "baseline | case1 | case2")->capture_default_str();
    cs->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    cs->add_option("--replicate", sim_rep, "Replicate index under the seed")->capture_default_str();
    cs->add_option("--out", sim_out, "Output directory")->required();

    // fit
    FitOptions fit_opts;
    std::string fit_input, fit_out, fit_graph, fit_config;
    std::vector<std::string> fit_methods{"GDFPCA"};
    int fit_threads = 0;
    auto* cf = app.add_subcommand("fit", "Fit one or more estimators");
    cf->add_option("--config", fit_config, "TOML file ([fit] table)");
    cf->add_option("--input", fit_input, "Data CSV, or a directory holding obs.csv (and optionally truth.csv, graph.json)")
        ->required();
    cf->add_option("--method", fit_methods, "Method names or 'all'")->capture_default_str();
    cf->add_option("--graph", fit_graph, "Known edge set (JSON) for KG methods");
    cf->add_option("--out", fit_out, "Output directory (one subdirectory per method)")->required();
    cf->add_option("--threads", fit_threads, "Worker threads across methods (0: all cores)")->capture_default_str();
    fit_opts.add_to(cf);

    // bench
    FitOptions bench_fit;
    std::string bench_config, bench_out, bench_case = "baseline";
    std::vector<int> bench_p{30}, bench_j{40};
    std::vector<double> bench_kappa{0.0};
    std::vector<std::string> bench_methods{"SFPCA", "DFPCA", "WDFPCA", "GDFPCA"};
    int bench_reps = 100, bench_threads = 0, bench_lag = 1, bench_q = 4;
    std::uint64_t bench_seed = 1;
    auto* cb = app.add_subcommand("bench", "Monte Carlo NMSE(q) table over simulation settings");
    cb->add_option("--config", bench_config, "TOML file ([bench] table, optional [[bench.settings]] grid)");
    cb->add_option("--p", bench_p, "Values of p")->capture_default_str();
    cb->add_option("--J", bench_j, "Values of J")->capture_default_str();
    cb->add_option("--kappa", bench_kappa, "Values of kappa")->capture_default_str()->check(CLI::NonNegativeNumber);
    cb->add_option("--L", bench_lag, "Filter lag range of the generator")->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cb->add_option("--case", bench_case, "baseline | case1 | case2")->capture_default_str();
    cb->add_option("--method", bench_methods, "Method names or 'all'")->capture_default_str();
    cb->add_option("--replicates", bench_reps, "Replicates per setting")->capture_default_str()->check(CLI::PositiveNumber);
    cb->add_option("--q-max", bench_q, "Largest q reported")->capture_default_str()->check(CLI::PositiveNumber);
    cb->add_option("--seed", bench_seed, "Base seed")->capture_default_str();
    cb->add_option("--threads", bench_threads, "Worker threads (0: all cores; GDFPCA_THREADS caps)")
        ->capture_default_str();
    cb->add_option("--out", bench_out, "Output CSV (default: standard output)");
    bench_fit.fixed_k = 4;
    bench_fit.add_to(cb);

    // pmi
    std::string pmi_fit, pmi_out, pmi_truth;
    double pmi_tau = 0.05;
    auto* cp = app.add_subcommand("pmi", "Partial mutual information graph from a fitted precision set");
    cp->add_option("--fit", pmi_fit, "Fit directory of a graph method")->required();
    cp->add_option("--tau", pmi_tau, "Edge threshold")->capture_default_str()->check(CLI::NonNegativeNumber);
    cp->add_option("--out", pmi_out, "Output directory (default: the fit directory)");
    cp->add_option("--truth", pmi_truth, "True edge set (JSON) for an F1 summary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*cs) {
            if (!sim_config.empty()) {
                const auto root = load_toml(sim_config);
                TomlDefaults d(cs, section(root, "simulate"));
                d.fill("--p", "p", sim.p);
                d.fill("--J", "J", sim.units);
                d.fill("--K", "K", sim.k);
                d.fill("--L", "L", sim.lag);
                d.fill("--kappa", "kappa", sim.kappa);
                d.fill("--rho", "rho", sim.rho);
                d.fill("--Z", "Z", sim.grid_size);
                d.fill("--case", "case", sim_case);
                d.fill("--replicate", "replicate", sim_rep);
                d.fill("--seed", "seed", sim.seed);
            }
            sim.sim_case = parse_sim_case(sim_case);
            const auto truth = simulate(sim, sim_rep);
            save_truth(truth, sim_out);
            out << "p=" << sim.p << " J=" << sim.units << " Z=" << sim.resolved_grid_size()
                << " edges=" << truth.graph.size() << '\n';
            return kExitOk;
        }

        if (*cf) {
            if (!fit_config.empty()) {
                const auto root = load_toml(fit_config);
                const auto* t = section(root, "fit");
                fit_opts.fill(cf, t);
                TomlDefaults d(cf, t);
                d.fill("--method", "method", fit_methods);
                d.fill("--graph", "graph", fit_graph);
                d.fill("--threads", "threads", fit_threads);
            }
            fs::path input(fit_input);
            fs::path csv = input;
            std::optional<Panel> truth;
            if (fs::is_directory(input)) {
                csv = input / "obs.csv";
                if (fs::exists(input / "truth.csv")) truth = load_csv(input / "truth.csv").values;
                if (fit_graph.empty() && fs::exists(input / "graph.json")) fit_graph = (input / "graph.json").string();
            }
            const auto obs = load_csv(csv);
            auto methods = parse_methods(fit_methods);
            auto base = fit_opts.to_config();
            if (!fit_graph.empty()) base.graph = load_edges(fit_graph);
            const bool explicit_all =
                std::find(fit_methods.begin(), fit_methods.end(), "all") != fit_methods.end();
            if (!base.graph && explicit_all) {
                std::erase_if(methods, [](Method m) { return needs_graph(m); });
                err << "warning: no graph given; skipping known-graph methods\n";
            }
            std::vector<std::string> summaries(methods.size());
            parallel_for(methods.size(), resolve_threads(fit_threads), [&](std::size_t m) {
                const auto res = fit(methods[m], obs, base);
                const auto meta = save_fit(res, fs::path(fit_out) / to_string(methods[m]), truth ? &*truth : nullptr);
                std::ostringstream line;
                line << to_string(methods[m]);
                if (meta.contains("nmse"))
                    for (const auto& e : meta["nmse"]) line << " NMSE(" << e["q"].get<int>() << ")=" << e["nmse"].get<double>();
                for (const auto& w : res.warnings) line << "\n  warning: " << w;
                summaries[m] = line.str();
            });
            for (const auto& s : summaries) out << s << '\n';
            return kExitOk;
        }

        if (*cb) {
            BenchConfig bc;
            std::vector<BenchSetting> from_file;
            if (!bench_config.empty()) {
                const auto root = load_toml(bench_config);
                const auto* t = section(root, "bench");
                TomlDefaults d(cb, t);
                d.fill("--p", "p", bench_p);
                d.fill("--J", "J", bench_j);
                d.fill("--kappa", "kappa", bench_kappa);
                d.fill("--L", "L", bench_lag);
                d.fill("--case", "case", bench_case);
                d.fill("--method", "method", bench_methods);
                d.fill("--replicates", "replicates", bench_reps);
                d.fill("--q-max", "q_max", bench_q);
                d.fill("--seed", "seed", bench_seed);
                d.fill("--threads", "threads", bench_threads);
                bench_fit.fill(cb, t);
                if (const auto* arr = (*t)["settings"].as_array()) {
                    for (const auto& node : *arr) {
                        const auto* st = node.as_table();
                        if (!st) throw Error(ErrorKind::config, "bench.settings entries must be tables");
                        BenchSetting s;
                        s.p = (*st)["p"].value_or(30);
                        s.units = (*st)["J"].value_or(40);
                        s.kappa = (*st)["kappa"].value_or(0.0);
                        s.lag = (*st)["L"].value_or(1);
                        s.sim_case = parse_sim_case((*st)["case"].value_or(std::string("baseline")));
                        from_file.push_back(s);
                    }
                }
            }
            const bool grid_flags = cb->get_option("--p")->count() || cb->get_option("--J")->count() ||
                                    cb->get_option("--kappa")->count() || cb->get_option("--case")->count() ||
                                    cb->get_option("--L")->count();
            if (!from_file.empty() && !grid_flags) {
                bc.settings = from_file;
            } else {
                const auto c = parse_sim_case(bench_case);
                for (int p : bench_p)
                    for (int j : bench_j)
                        for (double k : bench_kappa) bc.settings.push_back({p, j, k, bench_lag, c});
            }
            bc.methods = parse_methods(bench_methods);
            bc.replicates = bench_reps;
            bc.seed = bench_seed;
            bc.threads = bench_threads;
            bc.q_max = bench_q;
            bc.fit = bench_fit.to_config();
            const auto rows = run_bench(bc, &err);
            const auto csv = bench_csv(rows);
            if (bench_out.empty()) {
                out << csv;
            } else {
                std::ofstream f(bench_out, std::ios::binary);
                if (!f) throw Error(ErrorKind::invalid_input, "cannot write " + bench_out);
                f << csv;
            }
            return kExitOk;
        }

        if (*cp) {
            const auto sets = load_precision(pmi_fit);
            const auto res = partial_mutual_info(sets);
            const auto edges = threshold_graph(res.pmi, pmi_tau);
            const fs::path dir = pmi_out.empty() ? fs::path(pmi_fit) : fs::path(pmi_out);
            fs::create_directories(dir);
            {
                std::ofstream f(dir / "pmi.csv");
                const auto p = res.pmi.rows();
                for (Eigen::Index a = 0; a < p; ++a) {
                    for (Eigen::Index b = 0; b < p; ++b) f << (b ? "," : "") << format_double(res.pmi(a, b));
                    f << '\n';
                }
            }
            write_json(edges_to_json(edges), dir / "edges.json");
            {
                std::ofstream f(dir / "graph.dot");
                f << "graph pmi {\n";
                for (Eigen::Index a = 0; a < res.pmi.rows(); ++a) f << "  " << a + 1 << ";\n";
                for (const auto& [a, b] : edges)
                    f << "  " << a + 1 << " -- " << b + 1 << " [weight=" << format_double(res.pmi(a, b)) << "];\n";
                f << "}\n";
            }
            out << "edges=" << edges.size() << " tau=" << pmi_tau;
            if (res.clamped) err << "warning: some partial coherences were clamped below 1\n";
            if (!pmi_truth.empty()) {
                const auto r = compare_edges(edges, load_edges(pmi_truth));
                out << " precision=" << r.precision() << " recall=" << r.recall() << " F1=" << r.f1();
            }
            out << '\n';
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitUsage;
}

} // namespace gdfpca
