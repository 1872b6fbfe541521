#pragma once

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cmc/multigraph.hpp"
#include "cmc/solver.hpp"
#include "cmc/stability.hpp"

namespace cmc {

using Json = nlohmann::ordered_json;

class IoError : public Error {
public:
    using Error::Error;
};

/// Text with 17 significant digits, enough to round-trip any double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
    auto out = open_for_write(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

inline Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// JSON conversions. Field names match the C++ members.

/// Negative zeros are normalized so equal vectors print identically.
inline Json to_json(const Vec3& v) { return Json::array({v.x() + 0.0, v.y() + 0.0, v.z() + 0.0}); }

inline Vec3 vec3_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json to_json(const ParamGrid& g) {
    return {{"s_min", g.s_min}, {"s_max", g.s_max}, {"t_min", g.t_min},
            {"t_max", g.t_max}, {"n_s", g.n_s},     {"n_t", g.n_t}};
}

/// NaN (the undefined first contraction factor) is written as null.
inline Json to_json(const IterationRecord& r) {
    Json c = std::isfinite(r.contraction) ? Json(r.contraction) : Json(nullptr);
    return {{"n", r.n},       {"sup_u", r.sup_u}, {"sup_grad", r.sup_grad}, {"c2_norm", r.c2_norm},
            {"step", r.step}, {"contraction", c}};
}

inline IterationRecord iteration_from_json(const Json& j) {
    IterationRecord r;
    r.n = j.at("n").get<int>();
    r.sup_u = j.at("sup_u").get<double>();
    r.sup_grad = j.at("sup_grad").get<double>();
    r.c2_norm = j.at("c2_norm").get<double>();
    r.step = j.at("step").get<double>();
    r.contraction = j.at("contraction").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                  : j.at("contraction").get<double>();
    return r;
}

inline Json to_json(const SolveReport& r) {
    Json it = Json::array();
    for (const auto& rec : r.iterations) it.push_back(to_json(rec));
    return {{"H_target", r.H_target},
            {"iterations", it},
            {"B_estimate", r.B_estimate},
            {"lambda_min_abs", r.lambda_min_abs},
            {"final_residual", r.final_residual},
            {"converged", r.converged},
            {"embedded", r.embedded},
            {"linearization_constant", r.linearization_constant},
            {"message", r.message}};
}

inline SolveReport solve_report_from_json(const Json& j) {
    SolveReport r;
    try {
        r.H_target = j.at("H_target").get<double>();
        for (const auto& rec : j.at("iterations")) r.iterations.push_back(iteration_from_json(rec));
        r.B_estimate = j.at("B_estimate").get<double>();
        r.lambda_min_abs = j.at("lambda_min_abs").get<double>();
        r.final_residual = j.at("final_residual").get<double>();
        r.converged = j.at("converged").get<bool>();
        r.embedded = j.at("embedded").get<bool>();
        r.linearization_constant = j.at("linearization_constant").get<double>();
        r.message = j.at("message").get<std::string>();
    } catch (const Json::exception& e) {
        throw IoError(std::string("malformed SolveReport: ") + e.what());
    }
    return r;
}

/// The domain is written as the list of member node indices.
inline Json to_json(const StabilityReport& r) {
    Json nodes = Json::array();
    for (std::size_t k = 0; k < r.domain.size(); ++k)
        if (r.domain[k]) nodes.push_back(k);
    return {{"delta", r.delta}, {"lambda1", r.lambda1}, {"stable", r.stable}, {"domain", nodes}, {"eig_tol", r.eig_tol}};
}

inline Json to_json(const MultigraphCertificate& c) {
    return {{"axis", to_json(c.axis)},
            {"N", c.N},
            {"R_bar", c.R_bar},
            {"omega", c.omega},
            {"epsilon", c.epsilon},
            {"grad_bound", c.grad_bound},
            {"dist_to_origin", c.dist_to_origin},
            {"center", to_json(c.center)},
            {"base_node", c.base_node},
            {"anchor_node", c.anchor_node},
            {"anchor_theta", c.anchor_theta},
            {"theta_center", c.theta_center},
            {"stretch", c.stretch},
            {"n_rho", c.n_rho},
            {"n_theta", c.n_theta},
            {"rho", c.rho},
            {"theta", c.theta},
            {"u", c.u}};
}

inline MultigraphCertificate certificate_from_json(const Json& j) {
    MultigraphCertificate c;
    try {
        c.axis = vec3_from_json(j.at("axis"));
        c.N = j.at("N").get<int>();
        c.R_bar = j.at("R_bar").get<double>();
        c.omega = j.at("omega").get<double>();
        c.epsilon = j.at("epsilon").get<double>();
        c.grad_bound = j.at("grad_bound").get<double>();
        c.dist_to_origin = j.at("dist_to_origin").get<double>();
        c.center = vec3_from_json(j.at("center"));
        c.base_node = j.at("base_node").get<std::size_t>();
        c.anchor_node = j.at("anchor_node").get<std::size_t>();
        c.anchor_theta = j.at("anchor_theta").get<double>();
        c.theta_center = j.at("theta_center").get<double>();
        c.stretch = j.at("stretch").get<double>();
        c.n_rho = j.at("n_rho").get<int>();
        c.n_theta = j.at("n_theta").get<int>();
        c.rho = j.at("rho").get<std::vector<double>>();
        c.theta = j.at("theta").get<std::vector<double>>();
        c.u = j.at("u").get<std::vector<double>>();
    } catch (const Json::exception& e) {
        throw IoError(std::string("malformed certificate: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Text formats

/// Wavefront OBJ: one `v x y z` per node in index order, two triangles per cell
/// (1-based indices), split along the (i, j)-(i+1, j+1) diagonal.
inline void write_obj(const std::filesystem::path& path, const SurfaceMesh& mesh) {
    auto out = open_for_write(path);
    const auto& g = mesh.grid;
    out << "# " << g.n_s << " x " << g.n_t << " grid\n";
    for (const auto& p : mesh.position)
        out << "v " << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
    for (int i = 0; i + 1 < g.n_s; ++i)
        for (int j = 0; j + 1 < g.n_t; ++j) {
            const std::size_t a = g.index(i, j) + 1, b = g.index(i + 1, j) + 1, c = g.index(i + 1, j + 1) + 1,
                              d = g.index(i, j + 1) + 1;
            out << "f " << a << ' ' << b << ' ' << c << '\n' << "f " << a << ' ' << c << ' ' << d << '\n';
        }
    if (!out) throw IoError("failed writing " + path.string());
}

inline std::vector<Vec3> read_obj_vertices(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::vector<Vec3> v;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("v ", 0) != 0) continue;
        std::istringstream ls(line.substr(2));
        double x, y, z;
        if (!(ls >> x >> y >> z)) throw IoError(path.string() + ": malformed vertex line: " + line);
        v.emplace_back(x, y, z);
    }
    return v;
}

/// Column order of the per-node sidecar CSV.
inline const std::vector<std::string>& node_csv_columns() {
    static const std::vector<std::string> cols{"i", "j", "s", "t", "H", "K", "A2", "u"};
    return cols;
}

inline void write_node_csv(const std::filesystem::path& path, const SurfaceMesh& mesh, const ScalarField& u) {
    require_same_grid(mesh.grid, u.grid(), "write_node_csv");
    const auto fs = compute_forms_and_shape(mesh);
    const auto& g = mesh.grid;
    auto out = open_for_write(path);
    out << "i,j,s,t,H,K,A2,u\n";
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j) {
            const std::size_t k = g.index(i, j);
            out << i << ',' << j << ',' << format_double(g.s(i)) << ',' << format_double(g.t(j)) << ','
                << format_double(fs.shape.H[k]) << ',' << format_double(fs.shape.K[k]) << ','
                << format_double(fs.shape.A2[k]) << ',' << format_double(u[k]) << '\n';
        }
    if (!out) throw IoError("failed writing " + path.string());
}

/// Generic numeric CSV: a header line and rows of equal length.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return c;
        throw IoError("CSV has no column '" + name + "'");
    }
};

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
    auto out = open_for_write(path);
    for (std::size_t c = 0; c < t.header.size(); ++c) out << (c ? "," : "") << t.header[c];
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty CSV");
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) t.header.push_back(cell);
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw IoError(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
            }
        }
        if (row.size() != t.header.size())
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(t.header.size()) + " fields");
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Sheet samples of a certificate as rows (rho, theta, u).
inline void write_sheet_csv(const std::filesystem::path& path, const MultigraphCertificate& c) {
    CsvTable t{{"rho", "theta", "u"}, {}};
    for (int a = 0; a < c.n_rho; ++a)
        for (int b = 0; b < c.n_theta; ++b) t.rows.push_back({c.rho[a], c.theta[b], c.sample(a, b)});
    write_csv(path, t);
}

/// Mesh and field stored as OBJ + node CSV. The grid is recovered from the
/// (i, j, s, t) columns.
struct StoredMesh {
    SurfaceMesh mesh;
    ScalarField u;
};

inline StoredMesh read_mesh(const std::filesystem::path& obj, const std::filesystem::path& csv) {
    const auto pos = read_obj_vertices(obj);
    const auto t = read_csv(csv);
    if (t.header != node_csv_columns()) throw IoError(csv.string() + ": unexpected node CSV header");
    if (t.rows.empty() || t.rows.size() != pos.size())
        throw IoError("node CSV and OBJ disagree on the node count");
    const auto& last = t.rows.back();
    ParamGrid g{t.rows.front()[2], last[2], t.rows.front()[3], last[3], static_cast<int>(last[0]) + 1,
                static_cast<int>(last[1]) + 1};
    g.validate();
    if (g.size() != pos.size()) throw IoError("node CSV does not describe a full grid");
    StoredMesh out{mesh_from_positions(g, pos), ScalarField(g)};
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        if (static_cast<std::size_t>(g.index(static_cast<int>(t.rows[k][0]), static_cast<int>(t.rows[k][1]))) != k)
            throw IoError(csv.string() + ": rows are not in grid order");
        out.u[k] = t.rows[k][7];
    }
    return out;
}

}  // namespace cmc
