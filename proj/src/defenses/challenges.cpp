#include "sxsm/defenses/challenges.hpp"

#include <openssl/sha.h>

namespace sxsm::defenses {

std::string TuringChallenges::issue(const std::string& key, TimeMs now) {
    std::lock_guard lock(mutex_);
    std::uniform_int_distribution<int> digit(0, 9);
    std::string d;
    for (int i = 0; i < 5; ++i) d += static_cast<char>('0' + digit(rng_));
    tokens_[key] = {d, now};
    return d;
}

std::string TuringChallenges::digits(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = tokens_.find(key);
    if (it == tokens_.end()) throw UnknownToken(key);
    return it->second.digits;
}

Verdict TuringChallenges::verify(const std::string& key, const std::string& answer, TimeMs now) {
    std::lock_guard lock(mutex_);
    auto it = tokens_.find(key);
    if (it == tokens_.end()) throw UnknownToken(key);
    auto token = it->second;
    tokens_.erase(it);
    if (now - token.issued > expiry_ms_) throw ExpiredToken(key);
    return answer == token.digits ? Verdict::forward() : Verdict::reject(403, "turing");
}

bool TuringChallenges::pending(const std::string& key) const {
    std::lock_guard lock(mutex_);
    return tokens_.count(key) > 0;
}

Sha1Digest sha1(const std::vector<std::uint8_t>& data) {
    Sha1Digest out;
    SHA1(data.data(), data.size(), out.data());
    return out;
}

namespace {
template <typename Bytes>
std::string hex(const Bytes& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0xf];
    }
    return out;
}

int nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument(std::string("not a hex digit: ") + c);
}
}  // namespace

std::string to_hex(const std::vector<std::uint8_t>& bytes) { return hex(bytes); }
std::string to_hex(const Sha1Digest& digest) { return hex(digest); }

std::vector<std::uint8_t> from_hex(const std::string& text) {
    if (text.size() % 2) throw std::invalid_argument("odd hex length");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 2);
    for (std::size_t i = 0; i < text.size(); i += 2)
        out.push_back(static_cast<std::uint8_t>(nibble(text[i]) << 4 | nibble(text[i + 1])));
    return out;
}

Puzzle make_puzzle(const std::vector<std::uint8_t>& nonce, int bits) {
    if (bits < 1 || bits > 32) throw PuzzleBitsOutOfRange("puzzle difficulty must be 1..32 bits");
    return {sha1(nonce), bits};
}

namespace {
bool prefix_equal(const Sha1Digest& a, const Sha1Digest& b, int bits) {
    int full = bits / 8;
    for (int i = 0; i < full; ++i)
        if (a[i] != b[i]) return false;
    int rest = bits % 8;
    if (rest == 0) return true;
    auto mask = static_cast<std::uint8_t>(0xff << (8 - rest));
    return (a[full] & mask) == (b[full] & mask);
}
}  // namespace

bool puzzle_verify(const Puzzle& puzzle, const std::vector<std::uint8_t>& preimage) {
    return prefix_equal(sha1(preimage), puzzle.image, puzzle.bits);
}

PuzzleSolution solve_puzzle(const Puzzle& puzzle, std::uint64_t start) {
    std::vector<std::uint8_t> candidate(8);
    for (std::uint64_t n = start, trials = 1;; ++n, ++trials) {
        for (int i = 0; i < 8; ++i) candidate[i] = static_cast<std::uint8_t>(n >> (56 - 8 * i));
        Sha1Digest d;
        SHA1(candidate.data(), candidate.size(), d.data());
        if (prefix_equal(d, puzzle.image, puzzle.bits)) return {candidate, trials};
    }
}

PuzzleChallenges::PuzzleChallenges(std::uint64_t seed, int bits) : rng_(seed), bits_(bits) {
    if (bits < 1 || bits > 32) throw PuzzleBitsOutOfRange("puzzle difficulty must be 1..32 bits");
}

Puzzle PuzzleChallenges::issue(const std::string& key) {
    std::lock_guard lock(mutex_);
    std::vector<std::uint8_t> nonce(16);
    for (auto& b : nonce) b = static_cast<std::uint8_t>(rng_());
    auto p = make_puzzle(nonce, bits_);
    puzzles_[key] = p;
    return p;
}

Verdict PuzzleChallenges::verify(const std::string& key, const std::vector<std::uint8_t>& preimage) {
    Puzzle p;
    {
        std::lock_guard lock(mutex_);
        auto it = puzzles_.find(key);
        if (it == puzzles_.end()) throw UnknownToken(key);
        p = it->second;
        puzzles_.erase(it);
    }
    return puzzle_verify(p, preimage) ? Verdict::forward() : Verdict::reject(403, "puzzle");
}

void PaymentLedger::deposit(const std::string& account, std::int64_t amount) {
    if (amount < 0) throw std::invalid_argument("negative deposit");
    std::lock_guard lock(mutex_);
    balances_[account] += amount;
}

std::int64_t PaymentLedger::balance(const std::string& account) const {
    std::lock_guard lock(mutex_);
    auto it = balances_.find(account);
    return it == balances_.end() ? 0 : it->second;
}

std::int64_t PaymentLedger::escrow() const {
    std::lock_guard lock(mutex_);
    return escrow_;
}

std::int64_t PaymentLedger::total() const {
    std::lock_guard lock(mutex_);
    std::int64_t t = escrow_;
    for (const auto& [_, b] : balances_) t += b;
    return t;
}

std::string PaymentLedger::hold(const std::string& payer, const std::string& payee, std::int64_t amount) {
    if (amount < 0) throw std::invalid_argument("negative hold");
    std::lock_guard lock(mutex_);
    auto& b = balances_[payer];
    if (b < amount) throw InsufficientFunds(payer);
    b -= amount;
    escrow_ += amount;
    auto id = "hold-" + std::to_string(++next_);
    holds_[id] = {payer, payee, amount, false};
    return id;
}

void PaymentLedger::settle(const std::string& hold_id, bool spit) {
    std::lock_guard lock(mutex_);
    auto it = holds_.find(hold_id);
    if (it == holds_.end()) throw UnknownHold(hold_id);
    auto& h = it->second;
    if (h.settled) throw DoubleSettle(hold_id);
    h.settled = true;
    escrow_ -= h.amount;
    balances_[spit ? h.payee : h.payer] += h.amount;
}

bool PaymentLedger::is_open(const std::string& hold_id) const {
    std::lock_guard lock(mutex_);
    auto it = holds_.find(hold_id);
    return it != holds_.end() && !it->second.settled;
}

std::vector<std::string> PaymentLedger::open_holds() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, h] : holds_)
        if (!h.settled) out.push_back(id);
    return out;
}

Verdict payment_hold(const std::string& caller, const std::string& callee, std::int64_t amount,
                     PaymentLedger& ledger) {
    try {
        return Verdict::challenge_with(ChallengeKind::Payment, ledger.hold(caller, callee, amount));
    } catch (const InsufficientFunds&) {
        return Verdict::reject(402, "payment required");
    }
}

}  // namespace sxsm::defenses
