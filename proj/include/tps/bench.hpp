//
// Project     : tps
// Module      : bench
// Description : test functions, error measurement, convergence studies
//               with rate fitting, CSV output
//

#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <tps/solve.hpp>

namespace tps {

enum class TestFunction { R105, R276, ExpXY, Franke };

inline std::string test_function_name(TestFunction t) {
    switch (t) {
        case TestFunction::R105: return "r105";
        case TestFunction::R276: return "r276";
        case TestFunction::ExpXY: return "expxy";
        default: return "franke";
    }
}

inline std::optional<TestFunction> parse_test_function(const std::string& s) {
    if (s == "r105") return TestFunction::R105;
    if (s == "r276") return TestFunction::R276;
    if (s == "expxy") return TestFunction::ExpXY;
    if (s == "franke") return TestFunction::Franke;
    return std::nullopt;
}

/// The four benchmark functions; r is the distance to the origin. The
/// Franke variant here keeps the 0.1(9y+1)^2 exponent of its second bump
/// (which differs from the classical form).
inline double eval_test_function(TestFunction t, const Point& x) {
    switch (t) {
        case TestFunction::R105:
            return std::pow(x.norm(), 1.05);
        case TestFunction::R276:
            return std::pow(x.norm(), 2.76);
        case TestFunction::ExpXY:
            return std::exp(x.x() * x.y());
        default: {
            const double u = 9.0 * x.x(), v = 9.0 * x.y();
            return 0.75 * std::exp(-0.25 * ((u - 2) * (u - 2) + (v - 2) * (v - 2))) +
                   0.75 * std::exp(-(u + 1) * (u + 1) / 49.0 - 0.1 * (v + 1) * (v + 1)) +
                   0.5 * std::exp(-0.25 * ((u - 7) * (u - 7) + (v - 3) * (v - 3))) -
                   0.2 * std::exp(-(u - 4) * (u - 4) - (v - 7) * (v - 7));
        }
    }
}

inline Vector sample_test_function(TestFunction t, const std::vector<Point>& pts) {
    Vector f(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        f[static_cast<int>(i)] = eval_test_function(t, pts[i]);
    return f;
}

struct ErrorPair {
    double linf = 0.0;
    double l2 = 0.0;  ///< root mean square over the sample grid
};

/// Max and RMS of |If - f| over a domain-restricted resolution^2 grid
/// (bounding-box edges included).
inline ErrorPair measure_error(const Interpolant& s, TestFunction t, const Domain& domain,
                               int resolution = 512) {
    if (resolution < 128)
        throw std::invalid_argument("measure_error: resolution must be >= 128");
    const Box bbox = domain.bounding_box();
    std::vector<Point> grid;
    grid.reserve(static_cast<std::size_t>(resolution) * resolution);
    for (int iy = 0; iy < resolution; ++iy) {
        const double y = bbox.lo.y() + (bbox.hi.y() - bbox.lo.y()) * iy / (resolution - 1);
        for (int ix = 0; ix < resolution; ++ix) {
            const Point p(bbox.lo.x() + (bbox.hi.x() - bbox.lo.x()) * ix / (resolution - 1), y);
            if (domain.contains(p))
                grid.push_back(p);
        }
    }
    const Vector vals = eval_interpolant_many(s, grid);
    ErrorPair err;
    double sq = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double e = std::abs(vals[static_cast<int>(i)] - eval_test_function(t, grid[i]));
        err.linf = std::max(err.linf, e);
        sq += e * e;
    }
    err.l2 = std::sqrt(sq / static_cast<double>(grid.size()));
    return err;
}

/// Least-squares slope of log(e) against log(h).
inline double fit_rate(const std::vector<double>& h_values, const std::vector<double>& e_values) {
    if (h_values.size() != e_values.size() || h_values.size() < 3)
        throw std::invalid_argument("fit_rate: need at least 3 matching levels");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = static_cast<int>(h_values.size());
    for (int i = 0; i < n; ++i) {
        if (!(h_values[i] > 0.0) || !(e_values[i] > 0.0))
            throw std::invalid_argument("fit_rate: values must be positive");
        const double lx = std::log(h_values[i]);
        const double ly = std::log(e_values[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

enum class NodeMode { Uniform, BoundaryConcentrated };

inline std::string node_mode_name(NodeMode m) {
    return m == NodeMode::Uniform ? "uniform" : "bdry";
}

struct ConvergenceRow {
    std::string function;
    std::string domain;
    std::string mode;
    int n_points = 0;
    double h = 0.0;
    double h_min = 0.0;
    double err_linf = 0.0;
    double err_l2 = 0.0;
    int iters = 0;
    double ms = 0.0;
};

inline std::string csv_header() { return "function,domain,mode,N,h,hmin,err_linf,err_l2,iters,ms"; }

inline std::string to_csv(const ConvergenceRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%d,%.17g,%.17g,%.17g,%.17g,%d,%.17g",
                  r.function.c_str(), r.domain.c_str(), r.mode.c_str(), r.n_points, r.h, r.h_min,
                  r.err_linf, r.err_l2, r.iters, r.ms);
    return buf;
}

inline ConvergenceRow row_from_csv(const std::string& line) {
    ConvergenceRow r;
    std::istringstream ss(line);
    std::string field;
    auto next = [&]() {
        if (!std::getline(ss, field, ','))
            throw std::runtime_error("row_from_csv: malformed row '" + line + "'");
        return field;
    };
    r.function = next();
    r.domain = next();
    r.mode = next();
    r.n_points = std::stoi(next());
    r.h = std::stod(next());
    r.h_min = std::stod(next());
    r.err_linf = std::stod(next());
    r.err_l2 = std::stod(next());
    r.iters = std::stoi(next());
    r.ms = std::stod(next());
    return r;
}

inline std::vector<ConvergenceRow> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("read_csv: cannot open " + path);
    std::vector<ConvergenceRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line))
        if (!line.empty())
            rows.push_back(row_from_csv(line));
    return rows;
}

struct StudySpec {
    Domain domain{DomainKind::UnitSquare};
    NodeMode mode = NodeMode::Uniform;
    std::vector<TestFunction> functions{TestFunction::Franke};
    int levels = 6;
    int base_n = 9;          ///< coarsest uniform grid parameter
    double base_h = 0.25;    ///< coarsest target fill distance (graded mode)
    SolverConfig solver;
    int error_resolution = 512;
    std::string csv_path;    ///< empty: keep rows in memory only
};

namespace detail {

inline NodeSet study_nodes(const StudySpec& spec, int level, double& h_min_out) {
    if (spec.mode == NodeMode::Uniform) {
        h_min_out = 0.0;
        return uniform_nodes(spec.domain, (spec.base_n - 1) * (1 << level) + 1);
    }
    const double h = spec.base_h / (1 << level);
    h_min_out = h * h;  // graded runs couple h_min to h
    return boundary_concentrated_nodes(spec.domain, h, h_min_out, 1.0);
}

}  // namespace detail

/// Run a refinement study. Rows are appended to the CSV as they complete;
/// solver failures are recorded and the study continues.
inline std::vector<ConvergenceRow> convergence_study(const StudySpec& spec) {
    std::ofstream csv;
    if (!spec.csv_path.empty()) {
        csv.open(spec.csv_path);
        if (!csv)
            throw std::runtime_error("convergence_study: cannot open " + spec.csv_path);
        csv << csv_header() << "\n" << std::flush;
    }
    std::vector<ConvergenceRow> rows;
    for (int level = 0; level < spec.levels; ++level) {
        double h_min = 0.0;
        const NodeSet nodes = detail::study_nodes(spec, level, h_min);
        const auto t0 = std::chrono::steady_clock::now();
        std::optional<TpsSolver> solver;
        std::string failure;
        try {
            solver.emplace(nodes, KernelOrder{2, 2}, spec.solver);
        } catch (const std::exception& e) {
            failure = e.what();
        }
        for (TestFunction fn : spec.functions) {
            ConvergenceRow row;
            row.function = test_function_name(fn);
            row.domain = domain_name(spec.domain.kind());
            row.mode = node_mode_name(spec.mode);
            row.n_points = nodes.size();
            row.h = nodes.h;
            row.h_min = h_min;
            if (failure.empty()) {
                auto [interp, rep] = solver->solve(sample_test_function(fn, nodes.points));
                const ErrorPair err = measure_error(interp, fn, spec.domain, spec.error_resolution);
                row.err_linf = err.linf;
                row.err_l2 = err.l2;
                row.iters = rep.converged ? rep.iterations : -rep.iterations;
            } else {
                row.err_linf = row.err_l2 = std::numeric_limits<double>::quiet_NaN();
                row.iters = -1;
            }
            row.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               t0)
                         .count();
            rows.push_back(row);
            if (csv.is_open())
                csv << to_csv(row) << "\n" << std::flush;
        }
    }
    return rows;
}

/// Companion gnuplot script: error against h and against N, both norms.
inline void write_plot_script(const std::string& csv_path, const std::string& script_path) {
    std::ofstream out(script_path);
    if (!out)
        throw std::runtime_error("write_plot_script: cannot open " + script_path);
    out << "# gnuplot script consuming " << csv_path << "\n"
        << "set datafile separator ','\n"
        << "set logscale xy\n"
        << "set key left bottom\n"
        << "set terminal pngcairo size 1200,500\n"
        << "set output '" << csv_path << ".png'\n"
        << "set multiplot layout 1,2\n"
        << "set xlabel 'h'\nset ylabel 'error'\n"
        << "plot '" << csv_path << "' every ::1 using 5:7 with linespoints title 'Linf', \\\n"
        << "     '" << csv_path << "' every ::1 using 5:8 with linespoints title 'L2'\n"
        << "set xlabel 'N'\n"
        << "plot '" << csv_path << "' every ::1 using 4:7 with linespoints title 'Linf', \\\n"
        << "     '" << csv_path << "' every ::1 using 4:8 with linespoints title 'L2'\n"
        << "unset multiplot\n";
}

}  // namespace tps
