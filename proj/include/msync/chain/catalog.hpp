#pragma once

#include <optional>
#include <string>
#include <vector>

#include <msync/chain/simulator.hpp>

namespace mxsync::chain {

/// Read-only view of the chains a deployment is connected to.
class ChainCatalog {
  public:
    virtual ~ChainCatalog() = default;

    [[nodiscard]] virtual std::vector<std::string> chains() const = 0;
    [[nodiscard]] virtual bool has_chain(const std::string& chain_id) const = 0;
    [[nodiscard]] virtual ChainParams chain_params(const std::string& chain_id) const = 0;
    /// nullopt while the chain has no blocks.
    [[nodiscard]] virtual std::optional<ChainHead> chain_head(const std::string& chain_id) const = 0;
    /// nullopt when no block exists at that height.
    [[nodiscard]] virtual std::optional<std::string> block_hash(const std::string& chain_id, Height height) const = 0;
};

}  // namespace mxsync::chain
