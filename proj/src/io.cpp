#include "subid/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace subid {

namespace {

Error parse_error(const std::string& msg) { return Error(ErrorKind::Parse, msg); }

Index get_count(const Json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number_integer() || j.at(key).get<long long>() < 0) {
        throw parse_error(std::string("missing or invalid \"") + key + "\"");
    }
    return static_cast<Index>(j.at(key).get<long long>());
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
    Json out = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        out.push_back(std::move(row));
    }
    return out;
}

Matrix matrix_from_json(const Json& j, Index rows, Index cols, const std::string& name) {
    if (!j.is_array()) throw parse_error(name + " must be an array of rows");
    const auto r = static_cast<Index>(j.size());
    // Matrices with zero rows serialize as [], so their column count comes from the caller.
    if (r == 0) {
        if (rows > 0) throw parse_error(name + " has 0 rows, expected " + std::to_string(rows));
        return Matrix::Zero(0, cols < 0 ? 0 : cols);
    }
    if (rows >= 0 && r != rows) {
        throw parse_error(name + " has " + std::to_string(r) + " rows, expected " + std::to_string(rows));
    }
    if (!j[0].is_array()) throw parse_error(name + " rows must be arrays");
    const auto c = static_cast<Index>(j[0].size());
    if (cols >= 0 && c != cols) {
        throw parse_error(name + " has " + std::to_string(c) + " columns, expected " + std::to_string(cols));
    }
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i) {
        const Json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != c) throw parse_error(name + " is ragged");
        for (Index k = 0; k < c; ++k) {
            const Json& v = row[static_cast<std::size_t>(k)];
            if (!v.is_number()) throw parse_error(name + " has a non-numeric entry");
            m(i, k) = v.get<double>();
        }
    }
    return m;
}

Json model_to_json(const SsModel& m) {
    Json j;
    j["n_x"] = m.n_x();
    j["n_u"] = m.n_u();
    j["n_y"] = m.n_y();
    j["A"] = matrix_to_json(m.A);
    j["B"] = matrix_to_json(m.B);
    j["C"] = matrix_to_json(m.C);
    j["D"] = matrix_to_json(m.D);
    if (m.K) j["K"] = matrix_to_json(*m.K);
    return j;
}

SsModel model_from_json(const Json& j) {
    if (!j.is_object()) throw parse_error("model must be a JSON object");
    const Index nx = get_count(j, "n_x");
    const Index nu = get_count(j, "n_u");
    const Index ny = get_count(j, "n_y");
    for (const char* key : {"A", "B", "C", "D"}) {
        if (!j.contains(key)) throw parse_error(std::string("model is missing \"") + key + "\"");
    }
    SsModel m;
    m.A = matrix_from_json(j["A"], nx, nx, "A");
    m.B = matrix_from_json(j["B"], nx, nu, "B");
    m.C = matrix_from_json(j["C"], ny, nx, "C");
    m.D = matrix_from_json(j["D"], ny, nu, "D");
    if (j.contains("K") && !j["K"].is_null()) m.K = matrix_from_json(j["K"], nx, ny, "K");
    m.validate();
    return m;
}

Json noise_to_json(const NoiseSpec& n) {
    return Json{{"Q", matrix_to_json(n.Q)}, {"R", matrix_to_json(n.R)}, {"S", matrix_to_json(n.S)}};
}

NoiseSpec noise_from_json(const Json& j) {
    for (const char* key : {"Q", "R", "S"}) {
        if (!j.contains(key)) throw parse_error(std::string("noise is missing \"") + key + "\"");
    }
    NoiseSpec n;
    n.Q = matrix_from_json(j["Q"], -1, -1, "Q");
    n.R = matrix_from_json(j["R"], -1, -1, "R");
    n.S = matrix_from_json(j["S"], n.Q.rows(), n.R.rows(), "S");
    n.validate(n.Q.rows(), n.R.rows());
    return n;
}

ExcitationSpec excitation_from_json(const Json& j) {
    ExcitationSpec e;
    if (j.is_null()) return e;
    const std::string kind = j.value("kind", std::string("zero"));
    if (kind == "white" || kind == "white_gaussian") {
        e.kind = ExcitationKind::WhiteGaussian;
    } else if (kind == "binary" || kind == "binary_switching") {
        e.kind = ExcitationKind::BinarySwitching;
    } else if (kind == "zero") {
        e.kind = ExcitationKind::Zero;
    } else {
        throw parse_error("unknown excitation kind \"" + kind + "\"");
    }
    e.amplitude = j.value("amplitude", 0.0);
    e.switch_period = j.value("switch_period", static_cast<Index>(1));
    if (e.amplitude < 0.0) throw parse_error("amplitude must be >= 0");
    return e;
}

Json excitation_to_json(const ExcitationSpec& e) {
    const char* kind = e.kind == ExcitationKind::WhiteGaussian     ? "white_gaussian"
                       : e.kind == ExcitationKind::BinarySwitching ? "binary_switching"
                                                                   : "zero";
    return Json{{"kind", kind}, {"amplitude", e.amplitude}, {"switch_period", e.switch_period}};
}

LoopSpec loop_from_json(const Json& j) {
    for (const char* key : {"plant", "controller", "noise"}) {
        if (!j.contains(key)) throw parse_error(std::string("loop is missing \"") + key + "\"");
    }
    LoopSpec l;
    l.plant = model_from_json(j["plant"]);
    l.controller = model_from_json(j["controller"]);
    l.noise = noise_from_json(j["noise"]);
    if (j.contains("r1")) l.r1 = excitation_from_json(j["r1"]);
    if (j.contains("r2")) l.r2 = excitation_from_json(j["r2"]);
    return l;
}

Json result_to_json(const IdentResult& r) {
    Json j;
    j["model"] = model_to_json(r.model);
    j["order"] = r.order;
    j["singular_values"] = std::vector<double>(r.singular_values.data(),
                                               r.singular_values.data() + r.singular_values.size());
    j["algorithm"] = r.algorithm;
    j["p"] = r.p;
    j["f"] = r.f;
    j["diagnostics"] = {{"residual_fro", r.residual_fro}, {"rank_flags", r.rank_flags}};
    if (r.noise) j["noise"] = noise_to_json(*r.noise);
    return j;
}

IdentResult result_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("model")) throw parse_error("result is missing \"model\"");
    IdentResult r;
    r.model = model_from_json(j["model"]);
    r.order = j.value("order", r.model.n_x());
    const auto sv = j.value("singular_values", std::vector<double>{});
    r.singular_values = Eigen::Map<const Vector>(sv.data(), static_cast<Index>(sv.size()));
    r.algorithm = j.value("algorithm", std::string());
    r.p = j.value("p", static_cast<Index>(0));
    r.f = j.value("f", static_cast<Index>(0));
    if (j.contains("diagnostics")) {
        const Json& d = j["diagnostics"];
        r.residual_fro = d.value("residual_fro", 0.0);
        r.rank_flags = d.value("rank_flags", std::vector<std::string>{});
    }
    if (j.contains("noise")) r.noise = noise_from_json(j["noise"]);
    return r;
}

Json report_to_json(const MetricReport& r) {
    Json vaf = Json::array();
    for (const auto& v : r.vaf.vaf) vaf.push_back(v ? Json(*v) : Json(nullptr));
    return Json{{"eig_distance", r.eig_distance}, {"markov_error", r.markov_error}, {"vaf", vaf}};
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw parse_error(path + ": " + e.what());
    }
}

void write_json_file(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw parse_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

void write_csv(std::ostream& os, const DataSet& d) {
    d.validate();
    os << 't';
    for (Index i = 0; i < d.n_u(); ++i) os << ",u" << i + 1;
    for (Index i = 0; i < d.n_y(); ++i) os << ",y" << i + 1;
    os << '\n';
    os << std::setprecision(17);
    for (Index t = 0; t < d.n_samples(); ++t) {
        os << t;
        for (Index i = 0; i < d.n_u(); ++i) os << ',' << d.U(i, t);
        for (Index i = 0; i < d.n_y(); ++i) os << ',' << d.Y(i, t);
        os << '\n';
    }
}

void write_csv_file(const std::string& path, const DataSet& d) {
    std::ofstream out(path);
    if (!out) throw parse_error("cannot write " + path);
    write_csv(out, d);
}

DataSet read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw parse_error("empty CSV");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.empty() || header[0] != "t") throw parse_error("CSV header must start with t");
    Index nu = 0;
    Index ny = 0;
    for (std::size_t k = 1; k < header.size(); ++k) {
        const std::string& h = header[k];
        const bool is_u = !h.empty() && h[0] == 'u';
        const bool is_y = !h.empty() && h[0] == 'y';
        if (is_u && ny == 0 && h == "u" + std::to_string(nu + 1)) {
            ++nu;
        } else if (is_y && h == "y" + std::to_string(ny + 1)) {
            ++ny;
        } else {
            throw parse_error("unexpected CSV column \"" + h + "\"");
        }
    }
    std::vector<std::vector<double>> rows;
    const std::size_t width = header.size();
    Index lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw parse_error("bad number \"" + cell + "\" on line " + std::to_string(lineno));
            }
        }
        if (vals.size() != width) throw parse_error("wrong field count on line " + std::to_string(lineno));
        rows.push_back(std::move(vals));
    }
    DataSet d;
    const auto N = static_cast<Index>(rows.size());
    d.U.resize(nu, N);
    d.Y.resize(ny, N);
    for (Index t = 0; t < N; ++t) {
        const auto& r = rows[static_cast<std::size_t>(t)];
        for (Index i = 0; i < nu; ++i) d.U(i, t) = r[static_cast<std::size_t>(1 + i)];
        for (Index i = 0; i < ny; ++i) d.Y(i, t) = r[static_cast<std::size_t>(1 + nu + i)];
    }
    d.validate();
    return d;
}

DataSet read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open " + path);
    return read_csv(in);
}

}  // namespace subid
