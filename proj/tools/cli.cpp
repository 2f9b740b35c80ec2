#include "cli.hpp"

#include "cpo/backtest.hpp"
#include "cpo/changepoint.hpp"
#include "cpo/cluster.hpp"
#include "cpo/csv.hpp"
#include "cpo/errors.hpp"
#include "cpo/ingest.hpp"
#include "cpo/optimizer.hpp"
#include "cpo/setdist.hpp"
#include "cpo/synthetic.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

namespace cpo::cli {

namespace {

namespace fs = std::filesystem;

struct DetectorFlags {
    std::string phase = "sequential";
    double arl0 = 1000.0;
    double alpha = 0.05;
    std::size_t min_segment = 20;
    std::size_t mc_reps = 10000;
    std::uint64_t seed = 20090101;
    std::string threshold_cache;

    changepoint::DetectorConfig config() const {
        changepoint::DetectorConfig c;
        if (phase == "sequential") c.arl0 = arl0;
        else if (phase == "batch") c.alpha = alpha;
        else throw std::invalid_argument(fmt::format("unknown phase '{}' (sequential, batch)", phase));
        c.min_segment = min_segment;
        c.mc_reps = mc_reps;
        c.seed = seed;
        return c;
    }
};

struct MeasureFlags {
    std::string measure = "mj";
    double p = 0.5;
    double q = 1.0;

    setdist::DistanceMeasure get() const {
        setdist::DistanceMeasure m;
        if (measure == "mj") m = setdist::DistanceMeasure::mj(p);
        else if (measure == "hausdorff") m = setdist::DistanceMeasure::hausdorff();
        else if (measure == "wasserstein") m = setdist::DistanceMeasure::wasserstein(q);
        else throw std::invalid_argument(fmt::format("unknown measure '{}' (mj, hausdorff, wasserstein)", measure));
        m.validate();
        return m;
    }
};

struct BoundFlags {
    double lower = 0.0;
    double upper = 1.0;
    double risk_free = 0.0;
    std::string resolution = "auto";

    optimizer::AllocationConfig get() const {
        optimizer::AllocationConfig c;
        c.lower = lower;
        c.upper = upper;
        c.risk_free = risk_free;
        if (resolution != "auto") {
            std::size_t used = 0;
            try {
                c.resolution = std::stod(resolution, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != resolution.size() || !(c.resolution > 0.0)) {
                throw std::invalid_argument(fmt::format("--resolution must be 'auto' or a positive number, got '{}'",
                                                        resolution));
            }
        }
        return c;
    }
};

void add_detector(CLI::App* cmd, DetectorFlags& f) {
    cmd->add_option("--phase", f.phase, "sequential (multi-break) or batch (single break)")
        ->check(CLI::IsMember({"sequential", "batch"}));
    cmd->add_option("--arl0", f.arl0, "in-control average run length (sequential)");
    cmd->add_option("--alpha", f.alpha, "false-positive level (batch)");
    cmd->add_option("--min-segment", f.min_segment, "minimum observations on each side of a break");
    cmd->add_option("--mc-reps", f.mc_reps, "Monte-Carlo replications for thresholds");
    cmd->add_option("--seed", f.seed, "seed for all randomness");
    cmd->add_option("--threshold-cache", f.threshold_cache, "JSON file caching calibrated thresholds");
}

void add_measure(CLI::App* cmd, MeasureFlags& f) {
    cmd->add_option("--measure", f.measure, "mj, hausdorff or wasserstein")
        ->check(CLI::IsMember({"mj", "hausdorff", "wasserstein"}));
    cmd->add_option("--p", f.p, "MJ order");
    cmd->add_option("--q", f.q, "Wasserstein order");
}

void add_bounds(CLI::App* cmd, BoundFlags& f) {
    cmd->add_option("--lower", f.lower, "lower weight bound per asset");
    cmd->add_option("--upper", f.upper, "upper weight bound per asset");
    cmd->add_option("--risk-free", f.risk_free, "risk-free rate per period");
    cmd->add_option("--resolution", f.resolution, "grid step dividing 1, or auto");
}

std::unique_ptr<changepoint::ThresholdStore> make_store(const DetectorFlags& f) {
    std::string path = f.threshold_cache;
    if (path.empty()) {
        if (const char* env = std::getenv("CPO_THRESHOLD_CACHE")) path = env;
    }
    if (path.empty()) return std::make_unique<changepoint::ThresholdStore>();
    return std::make_unique<changepoint::ThresholdStore>(fs::path(path));
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open file: {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::pair<Date, Date> parse_range(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw std::invalid_argument(fmt::format("date range must look like FROM:TO, got '{}'", text));
    }
    try {
        return {parse_date(text.substr(0, colon)), parse_date(text.substr(colon + 1))};
    } catch (const DataError& e) {
        throw std::invalid_argument(e.what());
    }
}

class Writer {
public:
    Writer(fs::path dir, std::ostream& out) : dir_(std::move(dir)), out_(out) {}
    void operator()(const std::string& name, const std::string& contents) {
        const auto path = dir_ / name;
        csv::write_atomic(path, contents);
        out_ << "wrote " << path.string() << "\n";
    }

private:
    fs::path dir_;
    std::ostream& out_;
};

// Options from a --config JSON object become leading "--key value" tokens,
// so flags given on the command line (parsed later, last one wins) override
// them. Top-level keys apply to every subcommand that has the option; keys
// under an object named after the subcommand must all be its options.
std::vector<std::string> config_tokens(const fs::path& path, const CLI::App& sub) {
    const std::string subcommand = sub.get_name();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("{}: bad JSON: {}", path.string(), e.what()));
    }
    if (!j.is_object()) throw DataError(fmt::format("{}: config must be a JSON object", path.string()));
    std::vector<std::string> tokens;
    auto add = [&](const std::string& key, const nlohmann::json& value) {
        if (value.is_boolean()) {
            if (value.get<bool>()) tokens.push_back("--" + key);
            return;
        }
        tokens.push_back("--" + key);
        tokens.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    };
    static const std::set<std::string> kSubcommands = {"detect", "distmat", "optimize", "simulate", "cluster",
                                                        "backtest"};
    for (const auto& [key, value] : j.items()) {
        if (kSubcommands.count(key) || sub.get_option_no_throw("--" + key) == nullptr) continue;
        add(key, value);
    }
    if (j.contains(subcommand)) {
        for (const auto& [key, value] : j.at(subcommand).items()) add(key, value);
    }
    return tokens;
}

int exit_for(const std::exception& e, std::ostream& err, int code) {
    err << "error: " << e.what() << "\n";
    return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Change-point portfolio optimization toolkit", "cpo"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_path;
    std::string out_dir = ".";

    DetectorFlags detector;
    MeasureFlags measure;
    BoundFlags bounds;
    std::string prices_path;
    std::string breaks_path;
    std::string affinity_path;
    std::string dist_path;
    std::string spec_path;
    std::string method = "cpo";
    std::string linkage = "average";
    std::size_t k = 0;
    bool report_timing = false;
    std::string train;
    std::string test;
    std::size_t bins = 30;
    std::optional<std::uint64_t> sim_seed;

    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON file with option values; flags override it");
        cmd->add_option("--out", out_dir, "output directory");
    };

    auto* detect = app.add_subcommand("detect", "locate structural breaks -> breaks.csv");
    common(detect);
    detect->add_option("--prices", prices_path, "wide price CSV (date column plus one column per asset)")->required();
    add_detector(detect, detector);

    auto* distmat = app.add_subcommand("distmat", "break-set distances -> dist.csv, affinity.csv");
    common(distmat);
    distmat->add_option("--breaks", breaks_path, "breaks.csv")->required();
    add_measure(distmat, measure);

    auto* optimize = app.add_subcommand("optimize", "portfolio weights -> weights.csv, report.json");
    common(optimize);
    optimize->add_option("--prices", prices_path, "wide price CSV")->required();
    optimize->add_option("--breaks", breaks_path, "use these break sets instead of detecting");
    optimize->add_option("--affinity", affinity_path, "use this affinity matrix directly");
    optimize->add_option("--method", method, "cpo or mvo")->check(CLI::IsMember({"cpo", "mvo"}));
    optimize->add_flag("--report-timing", report_timing, "add wall_time to report.json");
    add_detector(optimize, detector);
    add_measure(optimize, measure);
    add_bounds(optimize, bounds);

    auto* simulate = app.add_subcommand("simulate", "GARCH-with-jumps series -> returns.csv, prices.csv, breaks.csv");
    common(simulate);
    simulate->add_option("--spec", spec_path, "simulation spec JSON")->required();
    simulate->add_option("--seed", sim_seed, "override the spec seed");

    auto* cluster = app.add_subcommand("cluster", "hierarchical clustering -> dendrogram.json, dendrogram.nwk");
    common(cluster);
    cluster->add_option("--dist", dist_path, "dist.csv")->required();
    cluster->add_option("--linkage", linkage, "average, single or complete")
        ->check(CLI::IsMember({"average", "single", "complete"}));
    cluster->add_option("--k", k, "also write partition.csv with k clusters");

    auto* backtest = app.add_subcommand("backtest", "train/test comparison -> report_*.json, paths.csv, density.csv");
    common(backtest);
    backtest->add_option("--prices", prices_path, "wide price CSV")->required();
    backtest->add_option("--train", train, "FROM:TO training dates (inclusive)")->required();
    backtest->add_option("--test", test, "FROM:TO test dates (inclusive)")->required();
    backtest->add_option("--method", method, "cpo, mvo or both")->check(CLI::IsMember({"cpo", "mvo", "both"}));
    backtest->add_option("--bins", bins, "histogram bins for density output");
    add_detector(backtest, detector);
    add_measure(backtest, measure);
    add_bounds(backtest, bounds);

    try {
        std::vector<std::string> args(argv + std::min(argc, 1), argv + argc);
        for (std::size_t i = 0; i < args.size(); ++i) {
            std::string path;
            if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
            else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
            if (!path.empty() && !args.empty() && app.get_subcommand_no_throw(args.front()) != nullptr) {
                const auto tokens = config_tokens(path, *app.get_subcommand(args.front()));
                args.insert(args.begin() + 1, tokens.begin(), tokens.end());
                break;
            }
        }
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    } catch (const DataError& e) {
        return exit_for(e, err, kData);
    }

    Writer write(out_dir, out);
    try {
        if (*detect) {
            const auto panel = load_return_panel(prices_path);
            auto store = make_store(detector);
            const auto config = detector.config();
            std::vector<BreakSet> breaks;
            if (detector.phase == "batch") {
                for (const auto& series : panel.assets()) {
                    const auto hit = changepoint::batch_detect(series.values(), config, *store);
                    std::vector<std::int64_t> idx;
                    if (hit) idx.push_back(static_cast<std::int64_t>(hit->split));
                    breaks.emplace_back(series.asset_id(), std::move(idx));
                }
            } else {
                breaks = changepoint::detect_breaks(panel, config, *store);
            }
            write("breaks.csv", changepoint::breaks_csv(breaks, panel.timestamps()));
        } else if (*distmat) {
            const auto breaks = changepoint::read_breaks_csv(breaks_path);
            const auto d = setdist::distance_matrix(breaks, measure.get());
            write("dist.csv", setdist::matrix_csv(d));
            write("affinity.csv", setdist::matrix_csv(setdist::affinity_matrix(d)));
        } else if (*optimize) {
            const auto panel = load_return_panel(prices_path);
            const auto allocation = bounds.get();
            optimizer::OptimizeResult result;
            if (method == "mvo") {
                if (!breaks_path.empty() || !affinity_path.empty()) {
                    throw std::invalid_argument("--breaks and --affinity apply to --method cpo only");
                }
                result = optimizer::allocate_mvo(panel, allocation);
            } else if (!affinity_path.empty()) {
                if (!breaks_path.empty()) throw std::invalid_argument("give --breaks or --affinity, not both");
                const auto a = setdist::AffinityMatrix::checked(setdist::read_matrix_csv(affinity_path));
                if (a.ids() != panel.asset_ids()) {
                    throw DataError(fmt::format("{}: assets do not match the price panel (an asset with an empty break "
                                                "set has no row in breaks.csv)",
                                                affinity_path));
                }
                result = optimizer::allocate_from_affinity(panel, a, allocation);
            } else if (!breaks_path.empty()) {
                const auto read = changepoint::read_breaks_csv(breaks_path);
                std::vector<BreakSet> breaks;
                for (const auto& id : panel.asset_ids()) {
                    auto it = std::find_if(read.begin(), read.end(), [&](const BreakSet& b) { return b.asset_id() == id; });
                    if (it == read.end()) throw DataError(fmt::format("empty break set for asset {}", id));
                    breaks.push_back(*it);
                }
                result = optimizer::allocate_cpo_from_breaks(panel, std::move(breaks), measure.get(), allocation).result;
            } else {
                auto store = make_store(detector);
                result = optimizer::allocate_cpo(panel, detector.config(), measure.get(), allocation, *store).result;
            }
            write("weights.csv", optimizer::weights_csv(result.weights));
            write("report.json", optimizer::report_json(result, method, report_timing));
        } else if (*simulate) {
            const auto text = read_text(spec_path);
            std::vector<synthetic::SimOutput> outputs;
            if (synthetic::is_cluster_json(text)) {
                auto spec = synthetic::cluster_spec_from_json(text);
                if (sim_seed) spec.base.seed = *sim_seed;
                outputs = synthetic::simulate_cluster(spec);
            } else {
                auto spec = synthetic::sim_spec_from_json(text);
                if (sim_seed) spec.seed = *sim_seed;
                outputs.push_back(synthetic::simulate(spec));
            }
            std::vector<BreakSet> truth;
            for (const auto& o : outputs) truth.push_back(o.true_breaks);
            write("returns.csv", synthetic::returns_csv(outputs));
            write("prices.csv", synthetic::prices_csv(outputs));
            write("breaks.csv", changepoint::breaks_csv(truth, outputs.front().returns.timestamps()));
        } else if (*cluster) {
            const auto d = setdist::DistanceMatrix::checked(setdist::read_matrix_csv(dist_path));
            const auto tree = cluster::hclust(d, cluster::parse_linkage(linkage));
            write("dendrogram.json", cluster::dendrogram_json(tree));
            write("dendrogram.nwk", cluster::newick(tree));
            if (k > 0) write("partition.csv", cluster::partition_csv(cluster::cut(tree, k)));
        } else if (*backtest) {
            const auto panel = load_return_panel(prices_path);
            backtest::BacktestConfig config;
            std::tie(config.train_from, config.train_to) = parse_range(train);
            std::tie(config.test_from, config.test_to) = parse_range(test);
            config.detector = detector.config();
            config.measure = measure.get();
            config.allocation = bounds.get();
            auto store = make_store(detector);
            std::vector<backtest::BacktestReport> reports;
            if (method == "both") {
                auto [c, m] = backtest::run_comparison(panel, config, *store);
                reports.push_back(std::move(c));
                reports.push_back(std::move(m));
            } else {
                config.method = backtest::parse_method(method);
                reports.push_back(backtest::run_backtest(panel, config, *store));
            }
            std::vector<const backtest::BacktestReport*> ptrs;
            std::vector<std::pair<std::string, backtest::DensityTable>> densities;
            for (const auto& r : reports) {
                auto c = config;
                c.method = r.method;
                write(fmt::format("report_{}.json", backtest::to_string(r.method)), backtest::report_json(r, c));
                ptrs.push_back(&r);
                densities.emplace_back(backtest::to_string(r.method),
                                       backtest::predictive_density_export(r.portfolio_returns, bins));
            }
            write("paths.csv", backtest::paths_csv(ptrs));
            write("density.csv", backtest::density_csv(densities));
            write("histogram.csv", backtest::histogram_csv(densities));
        }
    } catch (const std::invalid_argument& e) {
        return exit_for(e, err, kUsage);
    } catch (const DataError& e) {
        return exit_for(e, err, kData);
    } catch (const NumericalError& e) {
        return exit_for(e, err, kNumerical);
    } catch (const std::runtime_error& e) {
        return exit_for(e, err, kData);
    } catch (const std::exception& e) {
        return exit_for(e, err, kNumerical);
    }
    return kOk;
}

}  // namespace cpo::cli
