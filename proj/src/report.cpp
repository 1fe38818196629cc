#include "crnctl/report.hpp"

#include "crnctl/analysis.hpp"

namespace crnctl {

using nlohmann::json;

json matrix_to_json(const Matrix &M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

json vector_to_json(const Vector &v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json structure_to_json(const Crn &crn, const StructuredSystem &s) {
    json out;
    std::vector<std::string> species, inputs;
    for (std::size_t i = 0; i < crn.n_species(); ++i) species.push_back(crn.species_name(i));
    for (std::size_t i = 0; i < crn.n_input_rails(); ++i) inputs.push_back(crn.input_name(i));
    out["species"] = species;
    out["inputs"] = inputs;
    out["output"] = crn.bases.at(crn.output);
    out["eta_per_nM_s"] = s.eta;
    out["symmetric"] = s.symmetric;
    out["cascaded"] = is_cascaded(crn);
    out["metzler"] = is_metzler(s.A);

    json reactions = json::array();
    for (const auto &rx : crn.reactions) {
        const char *kind = rx.kind == ReactionKind::Catalysis     ? "catalysis"
                           : rx.kind == ReactionKind::Degradation ? "degradation"
                                                                  : "annihilation";
        json r{{"name", rx.name}, {"kind", kind}, {"rate", rx.rate}, {"first", crn.operand_name(rx.first)}};
        if (rx.kind != ReactionKind::Degradation) r["second"] = crn.operand_name(rx.second);
        reactions.push_back(r);
    }
    out["reactions"] = reactions;

    json m;
    m["A"] = matrix_to_json(s.A);
    m["B"] = matrix_to_json(s.B);
    m["P"] = matrix_to_json(s.P);
    m["A1_plus"] = matrix_to_json(s.A1_plus);
    m["A1_minus"] = matrix_to_json(s.A1_minus);
    m["A2_plus"] = matrix_to_json(s.A2_plus);
    m["A2_minus"] = matrix_to_json(s.A2_minus);
    m["B1_plus"] = matrix_to_json(s.B1_plus);
    m["B1_minus"] = matrix_to_json(s.B1_minus);
    m["R11"] = matrix_to_json(s.R11);
    m["R12"] = matrix_to_json(s.R12);
    m["R21"] = matrix_to_json(s.R21);
    m["R22"] = matrix_to_json(s.R22);
    if (s.symmetric) {
        m["A1_bar"] = matrix_to_json(*s.A1_bar);
        m["A2_bar"] = matrix_to_json(*s.A2_bar);
        m["B1_bar"] = matrix_to_json(*s.B1_bar);
        m["R11_bar"] = matrix_to_json(*s.R11_bar);
        m["R22_bar"] = matrix_to_json(*s.R22_bar);
        // A_p = A1_bar - A2_bar, the I/O dynamics matrix
        m["A_p"] = matrix_to_json(*s.A1_bar - *s.A2_bar);
    }
    out["matrices"] = m;
    return out;
}

std::string dump(const json &doc) { return doc.dump(2) + "\n"; }

} // namespace crnctl
