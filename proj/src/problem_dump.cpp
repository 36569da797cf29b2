#include <cinttypes>
#include <cstdio>
#include <sstream>

#include "desos/problem.hpp"

// Line-oriented text form of a standard-form cone program, for external
// cross-checking and as the solver's regression-fixture format. Floats carry
// full precision so dump -> parse is exact.

namespace desos::opt {

namespace {

std::string fmt(double v) {
    char buf[40];
    if (v == conic::kInf) return "inf";
    if (v == -conic::kInf) return "-inf";
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_num(const std::string& s) {
    if (s == "inf") return conic::kInf;
    if (s == "-inf") return -conic::kInf;
    return std::stod(s);
}

}  // namespace

std::string dump_problem(const conic::Problem& problem) {
    std::ostringstream out;
    out << "desos-conic 1\n";
    out << "cols " << problem.num_cols << "\n";
    for (int j = 0; j < problem.num_cols; ++j) {
        const size_t js = static_cast<size_t>(j);
        const std::string& name = problem.col_names[js].empty() ? "x" + std::to_string(j)
                                                                : problem.col_names[js];
        out << j << " " << name << " " << fmt(problem.lower[js]) << " " << fmt(problem.upper[js])
            << " " << fmt(problem.objective[js]) << "\n";
    }
    auto rows = [&](const std::vector<conic::LinearRow>& list, const char* label) {
        out << label << " " << list.size() << "\n";
        for (const conic::LinearRow& row : list) {
            out << fmt(row.rhs) << " " << row.terms.size();
            for (const conic::LinearTerm& t : row.terms) {
                out << " " << t.col << ":" << fmt(t.coef);
            }
            out << "\n";
        }
    };
    rows(problem.eq_rows, "eq");
    rows(problem.ineq_rows, "ineq");
    out << "cones " << problem.cones.size() << "\n";
    for (const conic::ConeBlock& cone : problem.cones) {
        out << (cone.kind == conic::ConeKind::soc ? "soc" : "rsoc");
        for (int c : cone.cols) out << " " << c;
        out << "\n";
    }
    out << "end\n";
    return out.str();
}

conic::Problem parse_problem(const std::string& text) {
    std::istringstream in(text);
    std::string word;
    auto expect = [&](const std::string& what) {
        if (!(in >> word) || word != what) {
            fail(ErrorKind::parse, "problem dump: expected '" + what + "', got '" + word + "'");
        }
    };
    expect("desos-conic");
    expect("1");

    conic::Problem prob;
    expect("cols");
    int n = 0;
    in >> n;
    for (int j = 0; j < n; ++j) {
        int idx;
        std::string name, lo, hi, obj;
        if (!(in >> idx >> name >> lo >> hi >> obj) || idx != j) {
            fail(ErrorKind::parse, "problem dump: malformed column " + std::to_string(j));
        }
        prob.add_col(name, parse_num(lo), parse_num(hi), parse_num(obj));
    }
    auto read_rows = [&](std::vector<conic::LinearRow>& list, const char* label) {
        expect(label);
        size_t count = 0;
        in >> count;
        list.resize(count);
        for (size_t i = 0; i < count; ++i) {
            std::string rhs;
            size_t nnz = 0;
            if (!(in >> rhs >> nnz)) fail(ErrorKind::parse, "problem dump: malformed row header");
            list[i].rhs = parse_num(rhs);
            list[i].terms.resize(nnz);
            for (size_t k = 0; k < nnz; ++k) {
                std::string pair;
                in >> pair;
                const size_t colon = pair.find(':');
                if (colon == std::string::npos) fail(ErrorKind::parse, "problem dump: malformed term");
                list[i].terms[k].col = std::stoi(pair.substr(0, colon));
                list[i].terms[k].coef = parse_num(pair.substr(colon + 1));
            }
        }
    };
    read_rows(prob.eq_rows, "eq");
    read_rows(prob.ineq_rows, "ineq");
    expect("cones");
    size_t ncones = 0;
    in >> ncones;
    std::string line;
    std::getline(in, line);
    for (size_t k = 0; k < ncones; ++k) {
        if (!std::getline(in, line)) fail(ErrorKind::parse, "problem dump: missing cone line");
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        conic::ConeBlock cone;
        if (kind == "soc") {
            cone.kind = conic::ConeKind::soc;
        } else if (kind == "rsoc") {
            cone.kind = conic::ConeKind::rsoc;
        } else {
            fail(ErrorKind::parse, "problem dump: unknown cone kind '" + kind + "'");
        }
        int c;
        while (ls >> c) cone.cols.push_back(c);
        prob.cones.push_back(std::move(cone));
    }
    expect("end");
    conic::validate_problem(prob);
    return prob;
}

}  // namespace desos::opt
