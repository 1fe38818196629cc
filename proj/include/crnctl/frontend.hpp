#pragma once

// =============================================================================
// Controller design source language
// =============================================================================
// A design is a set of linear blocks wired into a signal graph. Every rate is
// entered per rail (plus/minus) so that both symmetric and perturbed
// parameterisations can be written down at design time.
// =============================================================================

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace crnctl {

/// Unimolecular rate as stored on the two rails, in 1/s.
struct RatePair {
    double plus = 0.0;
    double minus = 0.0;

    static constexpr RatePair symmetric(double v) { return {v, v}; }
    bool is_symmetric() const noexcept { return plus == minus; }
    bool operator==(const RatePair &) const = default;
};

enum class BlockKind { Gain, Integrator, Summation, Subtraction, FirstOrderPlant };

std::string_view to_string(BlockKind kind);
std::optional<BlockKind> block_kind_from_string(std::string_view name);

/// One rate parameter of a block. `role` is fixed by the block kind
/// ("input", "feedback", "decay", ...); `symbol` is the user-facing name that
/// reaction names are derived from (e.g. "gamma1").
struct RateParam {
    std::string role;
    std::string symbol;
    RatePair value;

    bool operator==(const RateParam &) const = default;
};

struct Block {
    std::string id;
    BlockKind kind = BlockKind::Gain;
    std::vector<RateParam> rates;

    const RateParam *find_rate(std::string_view role) const;
    const RateParam &rate(std::string_view role) const;
    bool operator==(const Block &) const = default;
};

/// Directed edge from a block output (or a reference input) to a block port.
struct Wire {
    std::string source;
    std::string target_block;
    std::string target_port;

    std::string label() const { return source + "->" + target_block + "." + target_port; }
    bool operator==(const Wire &) const = default;
};

struct BlockDiagram {
    std::vector<Block> blocks;
    std::vector<Wire> wires;
    std::vector<std::string> references;
    std::string output;
    /// Annihilation rate in 1/(M*s), the unit the design tables use.
    double eta_per_molar_second = 5e5;

    const Block *find_block(std::string_view id) const;
    std::optional<std::size_t> block_index(std::string_view id) const;
    const Wire *wire_into(std::string_view block, std::string_view port) const;
    bool operator==(const BlockDiagram &) const = default;
};

/// Input ports of a block kind, in canonical order, with the rate role each one drives.
struct PortSpec {
    std::string_view port;
    std::string_view role;
    bool crossed_rails;
};
const std::vector<PortSpec> &ports_of(BlockKind kind);
/// Rate roles that a kind requires (ports plus an optional "decay").
std::vector<std::string_view> roles_of(BlockKind kind);

/// Checks every diagram invariant and throws ValidationError listing all violations.
void validate(const BlockDiagram &diagram);

BlockDiagram parse_spec(std::string_view text);
BlockDiagram parse_spec(const nlohmann::json &doc);
nlohmann::json to_json(const BlockDiagram &diagram);
std::string serialize(const BlockDiagram &diagram);

/// Replaces each subtraction block by a first-order lag on its positive input,
/// dropping the negative (feedback) wire. Rate symbols are preserved.
BlockDiagram open_loop(const BlockDiagram &diagram);

// -----------------------------------------------------------------------------
// Built-in designs
// -----------------------------------------------------------------------------

/// Rate table keyed by symbol (gamma1..gamma8, k0, k1, k2) plus "eta" in 1/(M*s).
struct RateTable {
    std::map<std::string, RatePair> rates;
    double eta_per_molar_second = 5e5;

    const RatePair &at(const std::string &symbol) const;

    static RateTable example1_nominal();
    static RateTable example1_asymmetric();
};

/// PI loop: error -> {gain, integrator} -> sum -> first-order plant, output fed back.
BlockDiagram builtin_example1(const RateTable &params, bool with_feedback = true);

/// Two-state loop x, y with negative feedback c2 from y to x. `eta` is in 1/(nM*s).
/// With c2 == 0 the feedback wire is omitted and the design is a cascade.
BlockDiagram builtin_example2(double d1, double d2, double c1, double c2, double eta = 1.0);

} // namespace crnctl
