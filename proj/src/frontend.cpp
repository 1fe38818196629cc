#include "crnctl/frontend.hpp"

#include "crnctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace crnctl {

using nlohmann::json;

namespace {

const std::vector<PortSpec> kSubtractionPorts = {{"plus", "input", false}, {"minus", "feedback", true}};
const std::vector<PortSpec> kSinglePort = {{"in", "input", false}};
const std::vector<PortSpec> kSummationPorts = {{"in1", "input1", false}, {"in2", "input2", false}};

bool has_decay(BlockKind kind) { return kind != BlockKind::Integrator; }

std::string describe(const RatePair &r) {
    return "(" + std::to_string(r.plus) + ", " + std::to_string(r.minus) + ")";
}

} // namespace

std::string_view to_string(BlockKind kind) {
    switch (kind) {
    case BlockKind::Gain:
        return "gain";
    case BlockKind::Integrator:
        return "integrator";
    case BlockKind::Summation:
        return "summation";
    case BlockKind::Subtraction:
        return "subtraction";
    case BlockKind::FirstOrderPlant:
        return "plant";
    }
    return "?";
}

std::optional<BlockKind> block_kind_from_string(std::string_view name) {
    if (name == "gain") return BlockKind::Gain;
    if (name == "integrator") return BlockKind::Integrator;
    if (name == "summation") return BlockKind::Summation;
    if (name == "subtraction") return BlockKind::Subtraction;
    if (name == "plant" || name == "first_order_plant") return BlockKind::FirstOrderPlant;
    return std::nullopt;
}

const std::vector<PortSpec> &ports_of(BlockKind kind) {
    switch (kind) {
    case BlockKind::Subtraction:
        return kSubtractionPorts;
    case BlockKind::Summation:
        return kSummationPorts;
    default:
        return kSinglePort;
    }
}

std::vector<std::string_view> roles_of(BlockKind kind) {
    std::vector<std::string_view> roles;
    for (const auto &p : ports_of(kind)) roles.push_back(p.role);
    if (has_decay(kind)) roles.push_back("decay");
    return roles;
}

const RateParam *Block::find_rate(std::string_view role) const {
    auto it = std::find_if(rates.begin(), rates.end(), [&](const RateParam &r) { return r.role == role; });
    return it == rates.end() ? nullptr : &*it;
}

const RateParam &Block::rate(std::string_view role) const {
    if (const auto *r = find_rate(role)) return *r;
    throw MissingRate(id + "." + std::string(role));
}

const Block *BlockDiagram::find_block(std::string_view id) const {
    auto it = std::find_if(blocks.begin(), blocks.end(), [&](const Block &b) { return b.id == id; });
    return it == blocks.end() ? nullptr : &*it;
}

std::optional<std::size_t> BlockDiagram::block_index(std::string_view id) const {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].id == id) return i;
    }
    return std::nullopt;
}

const Wire *BlockDiagram::wire_into(std::string_view block, std::string_view port) const {
    auto it = std::find_if(wires.begin(), wires.end(),
                           [&](const Wire &w) { return w.target_block == block && w.target_port == port; });
    return it == wires.end() ? nullptr : &*it;
}

// =============================================================================
// Validation
// =============================================================================

namespace {

void collect_violations(const BlockDiagram &d, std::vector<Diagnostic> &diags) {
    if (d.blocks.empty() || d.output.empty()) {
        diags.push_back({"output", "no output designated"});
    } else if (!d.find_block(d.output)) {
        diags.push_back({"output", "output '" + d.output + "' is not a block"});
    }
    if (!(d.eta_per_molar_second > 0.0) || !std::isfinite(d.eta_per_molar_second)) {
        diags.push_back({"eta", "annihilation rate must be strictly positive"});
    }

    std::set<std::string> names;
    for (const auto &ref : d.references) {
        if (ref.empty()) diags.push_back({"references", "empty reference name"});
        if (!names.insert(ref).second) diags.push_back({ref, "duplicate signal name"});
    }
    for (const auto &b : d.blocks) {
        if (b.id.empty()) diags.push_back({"blocks", "block with empty id"});
        if (!names.insert(b.id).second) diags.push_back({b.id, "duplicate signal name"});

        const auto roles = roles_of(b.kind);
        for (const auto &role : roles) {
            const auto *r = b.find_rate(role);
            if (!r) {
                diags.push_back({b.id, "missing rate for role '" + std::string(role) + "'"});
                continue;
            }
            const bool ok = r->value.plus > 0.0 && r->value.minus > 0.0 && std::isfinite(r->value.plus) &&
                            std::isfinite(r->value.minus);
            if (!ok) {
                diags.push_back({b.id, "nonpositive rate '" + std::string(role) + "' " + describe(r->value)});
            }
        }
        for (const auto &r : b.rates) {
            if (std::find(roles.begin(), roles.end(), r.role) == roles.end()) {
                diags.push_back({b.id, "unknown rate role '" + r.role + "' for " + std::string(to_string(b.kind))});
            }
        }
    }

    std::set<std::pair<std::string, std::string>> fed;
    for (const auto &w : d.wires) {
        const bool source_ok =
            d.find_block(w.source) != nullptr ||
            std::find(d.references.begin(), d.references.end(), w.source) != d.references.end();
        if (!source_ok) diags.push_back({w.label(), "dangling wire: unknown source '" + w.source + "'"});

        const Block *target = d.find_block(w.target_block);
        if (!target) {
            diags.push_back({w.label(), "dangling wire: unknown target block '" + w.target_block + "'"});
            continue;
        }
        const auto &ports = ports_of(target->kind);
        const bool port_ok =
            std::any_of(ports.begin(), ports.end(), [&](const PortSpec &p) { return p.port == w.target_port; });
        if (!port_ok) {
            diags.push_back({w.label(), "block '" + target->id + "' has no port '" + w.target_port + "'"});
            continue;
        }
        if (w.source == w.target_block) {
            diags.push_back({w.label(), "a block cannot drive its own input"});
        }
        if (!fed.insert({w.target_block, w.target_port}).second) {
            diags.push_back({w.label(), "port already driven by another wire"});
        }
    }
    for (const auto &b : d.blocks) {
        for (const auto &p : ports_of(b.kind)) {
            if (!fed.count({b.id, std::string(p.port)})) {
                diags.push_back({b.id + "." + std::string(p.port), "unconnected input port"});
            }
        }
    }
}

RatePair parse_rate_value(const json &v, const std::string &where, std::string &symbol,
                          std::vector<Diagnostic> &schema) {
    if (v.is_number()) return RatePair::symmetric(v.get<double>());
    if (!v.is_object()) {
        schema.push_back({where, "rate must be a number or an object"});
        return {};
    }
    if (v.contains("symbol")) {
        if (v["symbol"].is_string()) {
            symbol = v["symbol"].get<std::string>();
        } else {
            schema.push_back({where, "rate symbol must be a string"});
        }
    }
    if (v.contains("value")) {
        if (!v["value"].is_number()) {
            schema.push_back({where, "rate value must be a number"});
            return {};
        }
        return RatePair::symmetric(v["value"].get<double>());
    }
    if (v.contains("plus") && v.contains("minus") && v["plus"].is_number() && v["minus"].is_number()) {
        return {v["plus"].get<double>(), v["minus"].get<double>()};
    }
    schema.push_back({where, "rate object needs 'value' or numeric 'plus' and 'minus'"});
    return {};
}

} // namespace

void validate(const BlockDiagram &diagram) {
    std::vector<Diagnostic> diags;
    collect_violations(diagram, diags);
    if (!diags.empty()) throw ValidationError(std::move(diags));
}

// =============================================================================
// Document <-> diagram
// =============================================================================

BlockDiagram parse_spec(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error &e) {
        throw SchemaError("document", e.what());
    }
    return parse_spec(doc);
}

BlockDiagram parse_spec(const json &doc) {
    std::vector<Diagnostic> schema;
    std::vector<Diagnostic> invalid;
    BlockDiagram d;

    if (!doc.is_object()) throw SchemaError("document", "top level must be an object");
    for (const char *key : {"blocks", "wires", "references", "output"}) {
        if (!doc.contains(key)) schema.push_back({key, "missing top-level key"});
    }
    if (!schema.empty()) throw SchemaError(std::move(schema));

    if (doc.contains("eta")) {
        if (doc["eta"].is_number()) {
            d.eta_per_molar_second = doc["eta"].get<double>();
        } else {
            schema.push_back({"eta", "must be a number in 1/(M*s)"});
        }
    }

    if (!doc["output"].is_string()) {
        schema.push_back({"output", "must be a block id string"});
    } else {
        d.output = doc["output"].get<std::string>();
    }

    if (!doc["references"].is_array()) {
        schema.push_back({"references", "must be an array of names"});
    } else {
        for (const auto &r : doc["references"]) {
            if (r.is_string()) {
                d.references.push_back(r.get<std::string>());
            } else {
                schema.push_back({"references", "reference names must be strings"});
            }
        }
    }

    if (!doc["blocks"].is_array()) {
        schema.push_back({"blocks", "must be an array"});
    } else {
        std::size_t n = 0;
        for (const auto &jb : doc["blocks"]) {
            const std::string where = "blocks[" + std::to_string(n++) + "]";
            if (!jb.is_object() || !jb.contains("id") || !jb["id"].is_string() || !jb.contains("kind") ||
                !jb["kind"].is_string()) {
                schema.push_back({where, "block needs string 'id' and 'kind'"});
                continue;
            }
            Block b;
            b.id = jb["id"].get<std::string>();
            const auto kind = block_kind_from_string(jb["kind"].get<std::string>());
            if (!kind) {
                invalid.push_back({b.id, "unknown block kind '" + jb["kind"].get<std::string>() + "'"});
                continue;
            }
            b.kind = *kind;
            if (jb.contains("rates")) {
                if (!jb["rates"].is_object()) {
                    schema.push_back({b.id, "'rates' must be an object keyed by role"});
                } else {
                    for (const auto &[role, v] : jb["rates"].items()) {
                        std::string symbol = b.id + "." + role;
                        RatePair value = parse_rate_value(v, b.id + "." + role, symbol, schema);
                        b.rates.push_back({role, symbol, value});
                    }
                }
            }
            // Keep roles in the canonical order of the kind, unknown ones last.
            const auto roles = roles_of(b.kind);
            std::stable_sort(b.rates.begin(), b.rates.end(), [&](const RateParam &x, const RateParam &y) {
                auto rank = [&](const RateParam &r) {
                    return std::find(roles.begin(), roles.end(), r.role) - roles.begin();
                };
                return rank(x) < rank(y);
            });
            d.blocks.push_back(std::move(b));
        }
    }

    if (!doc["wires"].is_array()) {
        schema.push_back({"wires", "must be an array"});
    } else {
        std::size_t n = 0;
        for (const auto &jw : doc["wires"]) {
            const std::string where = "wires[" + std::to_string(n++) + "]";
            if (!jw.is_object() || !jw.contains("from") || !jw.contains("to") || !jw["from"].is_string() ||
                !jw["to"].is_string()) {
                schema.push_back({where, "wire needs string 'from' and 'to'"});
                continue;
            }
            const auto to = jw["to"].get<std::string>();
            const auto dot = to.rfind('.');
            if (dot == std::string::npos || dot == 0 || dot + 1 == to.size()) {
                schema.push_back({where, "'to' must be '<block>.<port>', got '" + to + "'"});
                continue;
            }
            d.wires.push_back({jw["from"].get<std::string>(), to.substr(0, dot), to.substr(dot + 1)});
        }
    }

    if (!schema.empty()) throw SchemaError(std::move(schema));
    collect_violations(d, invalid);
    if (!invalid.empty()) throw ValidationError(std::move(invalid));
    return d;
}

json to_json(const BlockDiagram &d) {
    json doc;
    doc["eta"] = d.eta_per_molar_second;
    doc["references"] = d.references;
    doc["output"] = d.output;
    doc["blocks"] = json::array();
    for (const auto &b : d.blocks) {
        json jb;
        jb["id"] = b.id;
        jb["kind"] = std::string(to_string(b.kind));
        jb["rates"] = json::object();
        for (const auto &r : b.rates) {
            json jr;
            jr["symbol"] = r.symbol;
            if (r.value.is_symmetric()) {
                jr["value"] = r.value.plus;
            } else {
                jr["plus"] = r.value.plus;
                jr["minus"] = r.value.minus;
            }
            jb["rates"][r.role] = jr;
        }
        doc["blocks"].push_back(jb);
    }
    doc["wires"] = json::array();
    for (const auto &w : d.wires) {
        doc["wires"].push_back({{"from", w.source}, {"to", w.target_block + "." + w.target_port}});
    }
    return doc;
}

std::string serialize(const BlockDiagram &diagram) { return to_json(diagram).dump(2) + "\n"; }

BlockDiagram open_loop(const BlockDiagram &diagram) {
    BlockDiagram out = diagram;
    out.wires.clear();
    for (auto &b : out.blocks) {
        if (b.kind != BlockKind::Subtraction) continue;
        b.kind = BlockKind::FirstOrderPlant;
        std::erase_if(b.rates, [](const RateParam &r) { return r.role == "feedback"; });
    }
    for (const auto &w : diagram.wires) {
        const Block *target = diagram.find_block(w.target_block);
        if (target && target->kind == BlockKind::Subtraction) {
            if (w.target_port == "minus") continue;
            out.wires.push_back({w.source, w.target_block, "in"});
            continue;
        }
        out.wires.push_back(w);
    }
    return out;
}

// =============================================================================
// Built-in designs
// =============================================================================

const RatePair &RateTable::at(const std::string &symbol) const {
    auto it = rates.find(symbol);
    if (it == rates.end()) throw MissingRate(symbol);
    return it->second;
}

RateTable RateTable::example1_nominal() {
    RateTable t;
    for (const char *g : {"gamma1", "gamma2", "gamma3"}) t.rates[g] = RatePair::symmetric(0.004);
    for (const char *g : {"gamma4", "gamma5"}) t.rates[g] = RatePair::symmetric(4e-6);
    for (const char *g : {"gamma6", "gamma7", "gamma8"}) t.rates[g] = RatePair::symmetric(0.008);
    t.rates["k0"] = RatePair::symmetric(4.5e-4);
    t.rates["k1"] = RatePair::symmetric(0.001);
    t.rates["k2"] = RatePair::symmetric(0.001);
    t.eta_per_molar_second = 5e5;
    return t;
}

RateTable RateTable::example1_asymmetric() {
    RateTable t;
    t.rates["k1"] = RatePair::symmetric(0.00132);
    t.rates["k2"] = {0.001320, 0.000680};
    t.rates["gamma1"] = RatePair::symmetric(0.00528);
    t.rates["gamma2"] = RatePair::symmetric(0.00528);
    t.rates["gamma3"] = RatePair::symmetric(0.00272);
    t.rates["gamma6"] = RatePair::symmetric(0.01056);
    t.rates["gamma7"] = {0.01056, 0.00544};
    t.rates["gamma8"] = RatePair::symmetric(0.00544);
    t.rates["gamma4"] = {2.72e-6, 5.28e-6};
    t.rates["gamma5"] = RatePair::symmetric(5.28e-6);
    t.rates["k0"] = RatePair::symmetric(0.000594);
    t.eta_per_molar_second = 5e5;
    return t;
}

BlockDiagram builtin_example1(const RateTable &p, bool with_feedback) {
    auto rate = [&](const char *role, const char *symbol) { return RateParam{role, symbol, p.at(symbol)}; };

    BlockDiagram d;
    d.eta_per_molar_second = p.eta_per_molar_second;
    d.references = {"r"};
    d.output = "X5";
    d.blocks = {
        {"X1",
         BlockKind::Subtraction,
         {rate("input", "gamma1"), rate("feedback", "gamma2"), rate("decay", "gamma3")}},
        {"X2", BlockKind::Gain, {rate("input", "gamma4"), rate("decay", "gamma5")}},
        {"X3", BlockKind::Integrator, {rate("input", "k0")}},
        {"X4", BlockKind::Summation, {rate("input1", "gamma6"), rate("input2", "gamma7"), rate("decay", "gamma8")}},
        {"X5", BlockKind::FirstOrderPlant, {rate("input", "k1"), rate("decay", "k2")}},
    };
    d.wires = {
        {"r", "X1", "plus"}, {"X5", "X1", "minus"}, {"X1", "X2", "in"}, {"X1", "X3", "in"},
        {"X2", "X4", "in1"}, {"X3", "X4", "in2"},   {"X4", "X5", "in"},
    };
    validate(d);
    return with_feedback ? d : open_loop(d);
}

BlockDiagram builtin_example2(double d1, double d2, double c1, double c2, double eta) {
    BlockDiagram d;
    d.eta_per_molar_second = eta * 1e9;
    d.references = {"u"};
    d.output = "Y";
    if (c2 > 0.0) {
        d.blocks.push_back({"X",
                            BlockKind::Subtraction,
                            {{"input", "b", RatePair::symmetric(1.0)},
                             {"feedback", "c2", RatePair::symmetric(c2)},
                             {"decay", "d1", RatePair::symmetric(d1)}}});
        d.wires = {{"u", "X", "plus"}, {"Y", "X", "minus"}};
    } else {
        d.blocks.push_back({"X",
                            BlockKind::FirstOrderPlant,
                            {{"input", "b", RatePair::symmetric(1.0)}, {"decay", "d1", RatePair::symmetric(d1)}}});
        d.wires = {{"u", "X", "in"}};
    }
    d.blocks.push_back({"Y",
                        BlockKind::FirstOrderPlant,
                        {{"input", "c1", RatePair::symmetric(c1)}, {"decay", "d2", RatePair::symmetric(d2)}}});
    d.wires.push_back({"X", "Y", "in"});
    validate(d);
    return d;
}

} // namespace crnctl
