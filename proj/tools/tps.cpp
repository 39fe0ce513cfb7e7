//
// Project     : tps
// Module      : tools/tps
// Description : command line interface: node generation, interpolation,
//               convergence studies, block structure dumps
//

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <tps/bench.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNoConvergence = 2;
constexpr int kExitInvalidInput = 3;

tps::Domain parse_domain(const std::string& s) {
    if (s == "square")
        return tps::Domain::unit_square();
    if (s == "lshape")
        return tps::Domain::l_shape();
    throw CLI::ValidationError("--domain", "expected 'square' or 'lshape'");
}

struct SolverFlags {
    int p = 6;
    double eta = 2.0;
    int leaf = 32;
    double eps = 1e-8;
    double epschol = 1e-4;
    double cgtol = 1e-8;
    std::string method = "hmatrix";

    void attach(CLI::App* cmd) {
        cmd->add_option("--p", p, "Chebyshev degree per axis");
        cmd->add_option("--eta", eta, "admissibility parameter");
        cmd->add_option("--leaf", leaf, "cluster leaf size");
        cmd->add_option("--eps", eps, "low-rank recompression tolerance");
        cmd->add_option("--epschol", epschol, "Cholesky truncation tolerance");
        cmd->add_option("--cgtol", cgtol, "CG relative residual tolerance");
    }

    tps::SolverConfig config() const {
        tps::SolverConfig cfg;
        cfg.method = method == "dense" ? tps::SolverConfig::Method::Dense
                                       : tps::SolverConfig::Method::HMatrix;
        cfg.cheb_degree = p;
        cfg.eta = eta;
        cfg.leaf_size = leaf;
        cfg.eps_rel = eps;
        cfg.eps_chol = epschol;
        cfg.cg_tol = cgtol;
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"thin plate spline interpolation with hierarchical matrices"};
    app.require_subcommand(1);

    // nodes
    auto* nodes_cmd = app.add_subcommand("nodes", "generate a node file");
    std::string nodes_domain = "square", nodes_mode = "uniform", nodes_out;
    int nodes_n = 0;
    double nodes_h = 0.0, nodes_hmin = 0.0, nodes_delta = 1.0;
    nodes_cmd->add_option("--domain", nodes_domain, "square|lshape");
    nodes_cmd->add_option("--mode", nodes_mode, "uniform|bdry");
    nodes_cmd->add_option("--n", nodes_n, "grid parameter (uniform mode)");
    nodes_cmd->add_option("--h", nodes_h, "target fill distance (bdry mode)");
    nodes_cmd->add_option("--hmin", nodes_hmin, "boundary spacing (bdry mode)");
    nodes_cmd->add_option("--delta", nodes_delta, "covering parameter");
    nodes_cmd->add_option("--out", nodes_out, "output file")->required();

    // interpolate
    auto* interp_cmd = app.add_subcommand("interpolate", "interpolate a test function");
    std::string interp_nodes, interp_function = "franke", interp_domain = "square";
    SolverFlags interp_flags;
    interp_cmd->add_option("--nodes", interp_nodes, "node file")->required();
    interp_cmd->add_option("--function", interp_function, "r105|r276|expxy|franke");
    interp_cmd->add_option("--method", interp_flags.method, "dense|hmatrix");
    interp_cmd->add_option("--domain", interp_domain, "square|lshape (for error sampling)");
    interp_flags.attach(interp_cmd);

    // study
    auto* study_cmd = app.add_subcommand("study", "run a convergence study");
    std::string study_domain = "square", study_mode = "uniform", study_function = "franke",
                study_out;
    int study_levels = 6;
    SolverFlags study_flags;
    study_cmd->add_option("--domain", study_domain, "square|lshape");
    study_cmd->add_option("--mode", study_mode, "uniform|bdry");
    study_cmd->add_option("--function", study_function, "r105|r276|expxy|franke");
    study_cmd->add_option("--levels", study_levels, "number of refinement levels");
    study_cmd->add_option("--method", study_flags.method, "dense|hmatrix");
    study_cmd->add_option("--out", study_out, "CSV output path")->required();
    study_flags.attach(study_cmd);

    // blockstructure
    auto* block_cmd = app.add_subcommand("blockstructure", "dump the H-matrix block structure");
    std::string block_nodes, block_out;
    SolverFlags block_flags;
    block_cmd->add_option("--nodes", block_nodes, "node file")->required();
    block_cmd->add_option("--out", block_out, "CSV output path")->required();
    block_flags.attach(block_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalidInput;
    }

    try {
        if (*nodes_cmd) {
            const tps::Domain domain = parse_domain(nodes_domain);
            tps::NodeSet ns;
            if (nodes_mode == "uniform") {
                ns = tps::uniform_nodes(domain, nodes_n);
            } else if (nodes_mode == "bdry") {
                ns = tps::boundary_concentrated_nodes(domain, nodes_h, nodes_hmin, nodes_delta);
            } else {
                throw std::invalid_argument("--mode must be 'uniform' or 'bdry'");
            }
            tps::write_nodes(nodes_out, ns);
            std::printf("{ \"N\": %d, \"h\": %.6g, \"q\": %.6g, \"file\": \"%s\" }\n", ns.size(),
                        ns.h, ns.q, nodes_out.c_str());
            return kExitOk;
        }

        if (*interp_cmd) {
            const tps::Domain domain = parse_domain(interp_domain);
            const tps::NodeSet ns = tps::read_nodes(interp_nodes, domain);
            const auto fn = tps::parse_test_function(interp_function);
            if (!fn)
                throw std::invalid_argument("unknown test function " + interp_function);
            const auto cfg = interp_flags.config();
            auto [interp, rep] =
                tps::interpolate(ns, tps::sample_test_function(*fn, ns.points), {2, 2}, cfg);
            const auto err = tps::measure_error(interp, *fn, domain);
            std::printf("{ \"N\": %d, \"h\": %.6g, \"err_linf\": %.10g, \"err_l2\": %.10g,\n  ",
                        ns.size(), ns.h, err.linf, err.l2);
            std::printf("\"report\": %s }\n", rep.to_json().c_str());
            return rep.converged ? kExitOk : kExitNoConvergence;
        }

        if (*study_cmd) {
            tps::StudySpec spec;
            spec.domain = parse_domain(study_domain);
            if (study_mode == "uniform")
                spec.mode = tps::NodeMode::Uniform;
            else if (study_mode == "bdry")
                spec.mode = tps::NodeMode::BoundaryConcentrated;
            else
                throw std::invalid_argument("--mode must be 'uniform' or 'bdry'");
            const auto fn = tps::parse_test_function(study_function);
            if (!fn)
                throw std::invalid_argument("unknown test function " + study_function);
            spec.functions = {*fn};
            spec.levels = study_levels;
            spec.solver = study_flags.config();
            spec.csv_path = study_out;
            const auto rows = tps::convergence_study(spec);
            tps::write_plot_script(study_out, study_out + ".gnuplot");
            bool all_ok = true;
            std::vector<double> hs, es;
            for (const auto& r : rows) {
                all_ok = all_ok && r.iters >= 0 && std::isfinite(r.err_linf);
                if (std::isfinite(r.err_linf) && r.err_linf > 0) {
                    hs.push_back(r.h);
                    es.push_back(r.err_linf);
                }
            }
            if (hs.size() >= 3)
                std::printf("{ \"levels\": %d, \"linf_rate\": %.3f, \"csv\": \"%s\" }\n",
                            static_cast<int>(rows.size()), tps::fit_rate(hs, es),
                            study_out.c_str());
            else
                std::printf("{ \"levels\": %d, \"csv\": \"%s\" }\n",
                            static_cast<int>(rows.size()), study_out.c_str());
            return all_ok ? kExitOk : kExitNoConvergence;
        }

        if (*block_cmd) {
            // the dump covers the full node set with default clustering
            const tps::NodeSet ns = tps::read_nodes(block_nodes, tps::Domain::unit_square(), false);
            const auto cfg = block_flags.config();
            tps::ClusterTree tree(ns.points, cfg.leaf_size);
            tps::BlockTree blocks(tree, cfg.eta);
            const auto pts = tree.permuted_points(ns.points);
            tps::HMatrix h = tps::assemble_hmatrix(pts, tree, blocks, cfg.cheb_degree, true);
            tps::recompress_all(h, cfg.eps_rel);
            tps::coarsen(h, cfg.eps_rel);
            std::ofstream out(block_out);
            if (!out)
                throw std::runtime_error("cannot open " + block_out);
            tps::dump_block_structure(h, out);
            std::printf("{ \"N\": %d, \"storage_bytes\": %zu, \"csv\": \"%s\" }\n", ns.size(),
                        h.storage_bytes(), block_out.c_str());
            return kExitOk;
        }
    } catch (const tps::PivotBreakdownError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNoConvergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInvalidInput;
    }
    return kExitOk;
}
