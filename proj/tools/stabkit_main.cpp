#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "stabkit/config.hpp"
#include "stabkit/equilibria.hpp"
#include "stabkit/expr.hpp"
#include "stabkit/report.hpp"
#include "stabkit/runner.hpp"

namespace {

stabkit::Json load_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    return stabkit::Json::parse(in);
}

int run_diff(const std::string& path_a, const std::string& path_b, double tol) {
    auto discrepancies = stabkit::diff_reports(load_json(path_a), load_json(path_b), tol);
    for (const auto& d : discrepancies) {
        std::cout << d.path << ": " << d.a.dump() << " vs " << d.b.dump();
        if (d.delta > 0.0) std::cout << " (delta " << stabkit::format_double(d.delta) << ")";
        std::cout << "\n";
    }
    if (discrepancies.empty()) {
        std::cout << "reports agree within tolerance\n";
        return 0;
    }
    std::cout << discrepancies.size() << " discrepancies\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Analysis toolkit for scalar difference systems: equilibria, first-order "
                 "shift estimates, sampled stability certificates, delayed-feedback gain "
                 "synthesis, and deterministic simulation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;

    auto add_run = [&](const std::string& name, const std::string& desc) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "analysis config file")->required();
        sub->add_option("--out", out_dir, "output directory (default: current)");
        sub->add_option("--seed", seed, "override the region sampling seed");
        return sub;
    };
    add_run("equilibria", "solve the root tables of every configured subsystem");
    add_run("estimate", "first-order equilibrium-shift estimates at each base root");
    add_run("certify", "sampled growth certificates and stability verdicts over the region");
    add_run("synthesize", "delayed-feedback gain schedule and closed-loop verdicts");
    add_run("simulate", "run the configured recursion and write its trajectory");
    add_run("full", "all stages the config supports, in order");

    CLI::App* diff = app.add_subcommand("diff", "compare two reports of identical shape");
    std::string diff_a, diff_b;
    double diff_tol = 0.0;
    diff->add_option("a", diff_a, "first report")->required();
    diff->add_option("b", diff_b, "second report")->required();
    diff->add_option("--tol", diff_tol, "numeric tolerance (default 0)");

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* sub = app.get_subcommands().front();
        if (sub == diff) return run_diff(diff_a, diff_b, diff_tol);

        stabkit::AnalysisConfig cfg = stabkit::load_config(config_path);
        stabkit::RunOutcome outcome =
            stabkit::run_analysis(cfg, sub->get_name(), out_dir, seed);
        std::cout << stabkit::summarize(outcome.report);
        for (const auto& f : outcome.files) std::cout << "wrote " << f << "\n";
        return outcome.exit_code;
    } catch (const stabkit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const stabkit::HypothesisError& e) {
        std::cerr << "hypothesis error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
