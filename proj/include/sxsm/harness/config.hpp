#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sxsm/defenses/endpoint.hpp"

namespace sxsm::harness {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One gate of the chain with its attributes as written.
struct GateSpec {
    std::string type;
    std::map<std::string, std::string> params;

    std::string get(const std::string& key, const std::string& fallback = {}) const;
    double number(const std::string& key, double fallback) const;
    bool flag(const std::string& key, bool fallback) const;
};

/// A defense deployment: chain, stores and the proxy's user table.
struct DefenseConfig {
    std::string name;
    std::vector<GateSpec> chain;

    defenses::EndpointOptions endpoint;
    defenses::ListStore::Options lists;
    /// (callee, caller) pairs.
    std::vector<std::pair<std::string, std::string>> white;
    std::vector<std::pair<std::string, std::string>> black;
    std::vector<std::string> global_black;

    defenses::ReputationWeights weights;
    std::map<std::string, std::int64_t> deposits;

    int puzzle_bits = 16;
    net::TimeMs challenge_expiry_ms = 30'000;

    std::filesystem::path fingerprint_db;
    /// Explicit decoy identities; everything unassigned is a decoy anyway.
    std::vector<std::string> decoys;

    /// Throws ConfigError on an unknown gate type, a bad parameter or a
    /// fingerprint gate without a db.
    void validate() const;
};

/// Relative paths resolve against `base_dir`. Throws ConfigError.
DefenseConfig parse_defense_config(std::string_view xml, const std::filesystem::path& base_dir = {});
DefenseConfig load_defense_config(const std::filesystem::path& path);

const std::vector<std::string>& gate_types();

/// Stores and endpoint built from a config.
class DefenseDeployment {
public:
    /// `seed` drives challenge digits and puzzles.
    DefenseDeployment(DefenseConfig config, net::Transport& transport, std::uint64_t seed = 1);

    defenses::DefenseStores& stores() { return *stores_; }
    defenses::DefenseEndpoint& endpoint() { return *endpoint_; }
    const DefenseConfig& config() const { return config_; }

private:
    DefenseConfig config_;
    std::unique_ptr<defenses::DefenseStores> stores_;
    std::unique_ptr<defenses::DefenseEndpoint> endpoint_;
};

/// Gates of `config` over `stores`, in chain order.
defenses::Chain build_chain(const DefenseConfig& config, defenses::DefenseStores& stores);

}  // namespace sxsm::harness
