#pragma once

#include <map>
#include <optional>

#include "json.hpp"
#include "metachain/channels.hpp"
#include "metachain/ledger.hpp"

namespace metachain {

enum class ContractKind { LedgerConversion, NFR, OTMC, Channel, TrustRegistry };
std::string_view contract_name(ContractKind k);
ContractKind contract_from_name(std::string_view name);

enum class ResourceType { CPU, GPU, Disk };
std::string_view resource_name(ResourceType r);
ResourceType resource_from_name(std::string_view name);

enum class Validity { Proven, Unproven, Unrentable };
std::string_view validity_name(Validity v);

enum class ConversionDirection { ChainToDag, DagToChain };
std::string_view direction_name(ConversionDirection d);

struct GasSchedule {
  static constexpr std::uint64_t kBase = 50;
  static constexpr std::uint64_t kRead = 5;
  static constexpr std::uint64_t kWrite = 20;
  static constexpr std::uint64_t kHash = 30;
  static constexpr std::uint64_t kVerify = 100;
};

class GasMeter {
 public:
  explicit GasMeter(std::uint64_t limit) : limit_(limit) {}
  void charge(std::uint64_t amount);
  void read(int n = 1) { charge(GasSchedule::kRead * static_cast<std::uint64_t>(n)); }
  void write(int n = 1) { charge(GasSchedule::kWrite * static_cast<std::uint64_t>(n)); }
  void hash(int n = 1) { charge(GasSchedule::kHash * static_cast<std::uint64_t>(n)); }
  void verify(int n = 1) { charge(GasSchedule::kVerify * static_cast<std::uint64_t>(n)); }
  std::uint64_t used() const { return used_; }
  std::uint64_t limit() const { return limit_; }

 private:
  std::uint64_t limit_;
  std::uint64_t used_ = 0;
};

// ---- state ---------------------------------------------------------------

struct PendingConversion {
  ConversionDirection direction = ConversionDirection::ChainToDag;
  Height convert_height = 0;
  std::string consensus_name;
  bool operator==(const PendingConversion&) const = default;
};

struct LedgerConversionState {
  std::map<NodeId, bool> is_vote;
  int vote_count = 0;
  int threshold = 1;
  std::optional<PendingConversion> proposal;  // under vote
  std::optional<PendingConversion> pending;   // threshold reached, awaiting convert height
  bool operator==(const LedgerConversionState&) const = default;
};

struct Rental {
  NodeId renter = 0;
  Amount deposit = 0;
  Height start_height = 0;
  Height rent_blocks = 0;
  bool operator==(const Rental&) const = default;
};

struct NfrRecord {
  std::uint64_t token_id = 0;
  NodeId owner = 0;
  ResourceType resource = ResourceType::Disk;
  Amount price = 0;  // per block
  std::optional<Rental> rental;
  Validity validity = Validity::Unproven;
  bool cancelled = false;
  bool operator==(const NfrRecord&) const = default;
};

enum class OtmcStage { Open, Run, Close };
std::string_view stage_name(OtmcStage s);

struct OtmcState {
  Hash32 cid{};
  OtmcStage stage = OtmcStage::Open;
  std::vector<NodeId> members;  // G, sorted
  Height deadline_height = 0;
  std::vector<std::uint64_t> rentals;  // token ids rented with the open
  std::optional<Hash32> results;
  std::map<NodeId, Amount> deposits;
  bool operator==(const OtmcState&) const = default;
};

struct TrustRecord {
  std::string task_id;
  std::vector<NodeId> members;
  std::string algorithm;
  std::map<NodeId, double> values;
  Height height = 0;
  bool operator==(const TrustRecord&) const = default;
};

/// Everything contracts can touch. Escrow is implied by the open rentals,
/// clusters and channels; burned holds slashed deposits.
struct ContractState {
  std::map<NodeId, Amount> balances;
  std::map<NodeId, PublicKey> keys;
  Amount burned = 0;
  std::map<std::uint64_t, NfrRecord> tokens;
  std::uint64_t next_token = 1;
  LedgerConversionState conversion;
  std::map<Hash32, OtmcState> clusters;
  std::map<Hash32, ChannelState> channels;
  std::map<std::string, TrustRecord> trust;

  /// Accounts 0..n-1 funded with `balance` each and registered keys.
  static ContractState genesis(KeyRing& keys, int nodes, Amount balance);

  Amount escrowed() const;
  /// balances + escrow + burned: constant under every contract call.
  Amount total_value() const;
  bool operator==(const ContractState&) const = default;
};

// ---- calls ---------------------------------------------------------------

struct ContractCall {
  ContractKind contract = ContractKind::NFR;
  std::string function;
  nlohmann::json args = nlohmann::json::object();
  NodeId caller = 0;
  std::uint64_t gas_limit = 100'000;
  Amount value = 0;  // attached currency; the deposit for nfr_rental
  Hash32 txid{};     // opening-transaction id, used as the OTMC nonce
};

struct CallResult {
  std::uint64_t gas_used = 0;
  nlohmann::json value;  // function result on success
  std::optional<Errc> error;
  std::string reason;
  bool ok() const { return !error; }
};

struct ExecOutcome {
  ContractState state;
  CallResult result;
};

/// Runs one call against a copy of `state`. Any error leaves the returned
/// state identical to the input; OutOfGas consumes the whole limit.
ExecOutcome execute_call(const ContractState& state, const ContractCall& call, Height current_height);

/// Functions each contract exposes, with their argument names.
const std::map<std::string, std::vector<std::string>>& contract_functions(ContractKind k);

// ---- direct entry points (mutate in place, all-or-nothing) ----------------

void lc_vote(LedgerConversionState& st, NodeId caller, GasMeter& gas);
void lc_convert(LedgerConversionState& st, ConversionDirection dir, Height convert_height, std::string consensus_name,
                Height current_height, GasMeter& gas);
/// Opens a conversion for voting; the vote threshold then schedules it.
void lc_propose(LedgerConversionState& st, ConversionDirection dir, Height convert_height,
                std::string consensus_name, Height current_height, GasMeter& gas);
/// Clears votes and the pending entry once the ledger has converted.
void lc_reset(LedgerConversionState& st);

std::uint64_t nfr_registration(ContractState& st, NodeId caller, ResourceType type, Amount price, GasMeter& gas);
void nfr_rental(ContractState& st, NodeId caller, std::uint64_t token, Height rent_blocks, Amount deposit,
                Height current_height, GasMeter& gas);
/// Returns (owner payment, renter refund).
std::pair<Amount, Amount> nfr_liquidation(ContractState& st, NodeId caller, std::uint64_t token,
                                          Height current_height, GasMeter& gas);
void nfr_cancellation(ContractState& st, NodeId caller, std::uint64_t token, GasMeter& gas);

struct RentalRequest {
  NodeId renter = 0;
  std::uint64_t token = 0;
  Height rent_blocks = 0;
  Amount deposit = 0;
};

/// What every participant signs to join a cluster.
Bytes otmc_open_message(const std::vector<NodeId>& members, Height delta_blocks,
                        const std::map<NodeId, Amount>& deposits, const Hash32& nonce);
Bytes otmc_result_message(const Hash32& cid, const Hash32& results);

Hash32 otmc_open(ContractState& st, std::vector<NodeId> members, Height delta_blocks,
                 const std::map<NodeId, Amount>& deposits, const std::vector<RentalRequest>& rentals,
                 const std::map<NodeId, Signature>& signatures, const Hash32& nonce, Height current_height,
                 GasMeter& gas);
void otmc_run(ContractState& st, const Hash32& cid, GasMeter& gas);
void otmc_close(ContractState& st, const Hash32& cid, const std::optional<Hash32>& results,
                const std::map<NodeId, Signature>& signatures, Height current_height, GasMeter& gas);

struct CallTraceEntry {
  Height height = 0;
  std::string contract;
  std::string function;
  NodeId caller = 0;
  std::uint64_t gas_used = 0;
  std::string result;  // "ok" or the error name
};

nlohmann::json trace_json(const CallTraceEntry& e);
CallTraceEntry trace_entry(const ContractCall& call, const CallResult& res, Height height);

}  // namespace metachain
