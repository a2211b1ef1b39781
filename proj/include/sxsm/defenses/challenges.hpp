#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sxsm/defenses/verdict.hpp"

namespace sxsm::defenses {

// --- Turing test -----------------------------------------------------------

class UnknownToken : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ExpiredToken : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Five-digit tokens bound to a key (the challenged call's Call-ID).
class TuringChallenges {
public:
    explicit TuringChallenges(std::uint64_t seed, TimeMs expiry_ms = 30'000) : rng_(seed), expiry_ms_(expiry_ms) {}

    /// Fresh digits for `key`, replacing any earlier token.
    std::string issue(const std::string& key, TimeMs now);
    /// The digits, for whoever holds the challenge leg. Throws UnknownToken.
    std::string digits(const std::string& key) const;
    /// Forward iff `answer` equals the digits; the token is consumed.
    /// Throws UnknownToken, ExpiredToken.
    Verdict verify(const std::string& key, const std::string& answer, TimeMs now);
    bool pending(const std::string& key) const;
    TimeMs expiry_ms() const { return expiry_ms_; }

private:
    struct Token {
        std::string digits;
        TimeMs issued = 0;
    };
    mutable std::mutex mutex_;
    std::mt19937_64 rng_;
    TimeMs expiry_ms_;
    std::map<std::string, Token> tokens_;
};

// --- Computational puzzle --------------------------------------------------

using Sha1Digest = std::array<std::uint8_t, 20>;

Sha1Digest sha1(const std::vector<std::uint8_t>& data);
std::string to_hex(const std::vector<std::uint8_t>& bytes);
std::string to_hex(const Sha1Digest& digest);
/// Throws std::invalid_argument on odd length or a non-hex digit.
std::vector<std::uint8_t> from_hex(const std::string& hex);

struct Puzzle {
    /// SHA-1 of the secret nonce.
    Sha1Digest image{};
    int bits = 0;
};

class PuzzleBitsOutOfRange : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Publishes SHA-1(nonce) with a difficulty of `bits` (1..32).
Puzzle make_puzzle(const std::vector<std::uint8_t>& nonce, int bits);
/// True iff SHA-1(preimage) equals the image on the first `bits` bits.
bool puzzle_verify(const Puzzle& puzzle, const std::vector<std::uint8_t>& preimage);

struct PuzzleSolution {
    std::vector<std::uint8_t> preimage;
    std::uint64_t trials = 0;
};

/// Brute force over 8-byte big-endian counters starting at `start`.
PuzzleSolution solve_puzzle(const Puzzle& puzzle, std::uint64_t start = 0);

/// Puzzles bound to a key, with secret random nonces.
class PuzzleChallenges {
public:
    explicit PuzzleChallenges(std::uint64_t seed, int bits = 16);

    Puzzle issue(const std::string& key);
    /// Throws UnknownToken. The puzzle is consumed.
    Verdict verify(const std::string& key, const std::vector<std::uint8_t>& preimage);
    int bits() const { return bits_; }

private:
    std::mutex mutex_;
    std::mt19937_64 rng_;
    int bits_;
    std::map<std::string, Puzzle> puzzles_;
};

// --- Payment at risk -------------------------------------------------------

class InsufficientFunds : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DoubleSettle : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownHold : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Balances in integer micro-units plus an escrow of held amounts.
class PaymentLedger {
public:
    void deposit(const std::string& account, std::int64_t amount);
    std::int64_t balance(const std::string& account) const;
    std::int64_t escrow() const;
    /// Sum of all balances plus escrow.
    std::int64_t total() const;

    /// Debits `payer` into escrow. Throws InsufficientFunds.
    std::string hold(const std::string& payer, const std::string& payee, std::int64_t amount);
    /// spit=false refunds the payer, spit=true pays the payee. Throws
    /// DoubleSettle, UnknownHold.
    void settle(const std::string& hold_id, bool spit);
    bool is_open(const std::string& hold_id) const;
    std::vector<std::string> open_holds() const;

private:
    struct Hold {
        std::string payer;
        std::string payee;
        std::int64_t amount = 0;
        bool settled = false;
    };
    mutable std::mutex mutex_;
    std::map<std::string, std::int64_t> balances_;
    std::map<std::string, Hold> holds_;
    std::int64_t escrow_ = 0;
    std::uint64_t next_ = 0;
};

/// Challenge(Payment, hold id), or Reject(402) when the caller cannot pay.
Verdict payment_hold(const std::string& caller, const std::string& callee, std::int64_t amount,
                     PaymentLedger& ledger);

}  // namespace sxsm::defenses
