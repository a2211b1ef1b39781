#include "sxsm/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "json.hpp"
#include "sxsm/attacks/playbooks.hpp"
#include "sxsm/attacks/scan.hpp"
#include "sxsm/attacks/spit.hpp"
#include "sxsm/attacks/spoof.hpp"
#include "sxsm/engine/engine.hpp"

namespace sxsm::harness {

using net::Address;
using net::TimeMs;
using sip::SipUri;

bool EvalReport::accounting_holds() const {
    auto in_unit = [](double r) { return r >= 0 && r <= 1; };
    return forwarded + rejected + challenged + quarantined == attempted && in_unit(bypass_rate) &&
           in_unit(detection_rate) && in_unit(false_positive_rate);
}

const std::vector<std::string>& playbooks() {
    static const std::vector<std::string> names{
        "scan",           "bulk_spit",       "identity_spoofing", "header_spoofing", "greylist_retry",
        "direct_ip_spit", "ringtone_spit",   "device_spoofing",   "rate_adaptation", "account_switching",
        "reputation_push", "captcha_relay", "registration_hijack"};
    return names;
}

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("SXSM_DATA_DIR"); env && *env) return env;
    return SXSM_DEFAULT_DATA_DIR;
}

namespace {

// --- the simulated provider ---------------------------------------------------

const Address kProxy{"10.0.0.1", 5060};
const Address kVictimClient{"10.0.0.50", 5060};
const std::string kDomain = "example.com";
const std::string kAttackerNet = "10.6.6.";
const std::string kHonestNet = "10.1.0.";

constexpr int kAssignedUsers = 300;
constexpr int kFriends = 10;
constexpr int kCalleesPerFriend = 3;
constexpr int kCallsPerFriend = 6;
constexpr int kPhones = 10;
constexpr int kColluders = 20;
constexpr int kVictimContacts = 20;
constexpr std::int64_t kFunding = 1'000'000;
constexpr TimeMs kHorizonMs = 6 * 3'600'000;
constexpr TimeMs kDrainMs = 60'000;

struct Friend {
    SipUri uri;
    Address address;
    std::vector<SipUri> callees;
};

struct Population {
    std::map<std::string, defenses::SimulatedUser> users;
    /// Online numbered accounts in random order.
    std::vector<SipUri> pool;
    std::vector<Friend> friends;
    std::vector<SipUri> colluders;
    SipUri solver;
    SipUri victim;
    /// Accounts that white-list the victim.
    std::vector<SipUri> victim_contacts;
    std::vector<Address> phones;
};

SipUri local_uri(const std::string& user) { return SipUri::parse("sip:" + user + "@" + kDomain); }

Population populate(std::mt19937_64& rng) {
    Population p;
    std::vector<int> numbers(10'000);
    std::iota(numbers.begin(), numbers.end(), 0);
    std::shuffle(numbers.begin(), numbers.end(), rng);
    numbers.resize(kAssignedUsers);
    for (int n : numbers) {
        bool online = rng() % 10 != 0;
        auto uri = local_uri(std::to_string(5'550'000 + n));
        p.users[uri.identity()] = {online, 2'000};
        if (online) p.pool.push_back(uri);
    }
    for (int k = 0; k < kColluders; ++k) {
        std::ostringstream name;
        name << "col" << std::setw(2) << std::setfill('0') << k;
        p.colluders.push_back(local_uri(name.str()));
        p.users[p.colluders.back().identity()] = {};
    }
    p.solver = local_uri("solver");
    p.victim = local_uri("victim");
    p.users[p.solver.identity()] = {};
    p.users[p.victim.identity()] = {};
    p.victim_contacts.assign(p.pool.begin(), p.pool.begin() + kVictimContacts);
    auto callee = p.pool.end() - kFriends * kCalleesPerFriend;
    for (int k = 0; k < kFriends; ++k) {
        Friend f{SipUri::parse("sip:friend" + std::to_string(k) + "@partner.example"),
                 {kHonestNet + std::to_string(k + 1), 5060},
                 {}};
        for (int c = 0; c < kCalleesPerFriend; ++c) f.callees.push_back(*callee++);
        p.friends.push_back(std::move(f));
    }
    for (int k = 0; k < kPhones; ++k) p.phones.push_back({"10.2.0." + std::to_string(k + 1), 5060});
    return p;
}

// --- attack programs ----------------------------------------------------------

struct Launch {
    Address local;
    engine::ShootPlan plan;
    engine::EngineOptions options;
    /// Runs only as long as the phase's other launches.
    bool auxiliary = false;
};

struct Phase {
    TimeMs delay_ms = 0;
    std::vector<Launch> launches;
};

struct AttackProgram {
    std::vector<Phase> phases;
    /// Records count from the start of this phase on.
    std::size_t measured_phase = 0;
    /// Started before the first phase, stopped at the end of the run.
    std::vector<Launch> background;
    std::map<std::string, std::int64_t> deposits;
    std::vector<std::pair<Address, SipUri>> solvers;
};

class Params {
public:
    explicit Params(const AttackSpec& spec) : spec_(spec) {}

    std::string text(const std::string& key, const std::string& fallback) {
        used_.insert(key);
        auto it = spec_.params.find(key);
        return it == spec_.params.end() ? fallback : it->second;
    }
    int integer(const std::string& key, int fallback) {
        auto v = text(key, std::to_string(fallback));
        try {
            std::size_t used = 0;
            int n = std::stoi(v, &used);
            if (used == v.size() && n >= 0) return n;
        } catch (const std::exception&) {
        }
        throw ConfigError(spec_.playbook + ": " + key + " is not a non-negative integer: " + v);
    }
    engine::Rate rate(const std::string& key, const std::string& fallback) {
        auto v = text(key, fallback);
        try {
            return engine::Rate::parse(v);
        } catch (const std::exception& e) {
            throw ConfigError(spec_.playbook + ": " + key + ": " + e.what());
        }
    }
    SipUri uri(const std::string& key, const std::string& fallback) {
        auto v = text(key, fallback);
        auto u = SipUri::try_parse(v);
        if (!u) throw ConfigError(spec_.playbook + ": " + key + " is not a SIP URI: " + v);
        return *u;
    }
    void finish() const {
        for (const auto& [k, v] : spec_.params)
            if (!used_.count(k)) throw ConfigError(spec_.playbook + ": unknown parameter " + k);
    }

private:
    const AttackSpec& spec_;
    std::set<std::string> used_;
};

struct Context {
    const Population& population;
    const defenses::FingerprintDb& devices;
    std::mt19937_64& rng;
};

engine::ShootPlan plan_for(const Address& local, const std::string& prefix) {
    engine::ShootPlan plan;
    plan.remote = kProxy;
    plan.local = local;
    plan.domain = kDomain;
    plan.call_id_prefix = prefix;
    plan.recv_timeout_ms = 8'000;
    plan.global_timeout_ms = kHorizonMs;
    return plan;
}

scenario::InjectionTable caller_rows(const std::vector<SipUri>& callers) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : callers) rows.push_back(engine::caller_row(c));
    return scenario::InjectionTable(std::move(rows));
}

scenario::InjectionTable target_rows(const std::vector<SipUri>& targets) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& t : targets) rows.push_back(engine::target_row(t, kProxy.port));
    return scenario::InjectionTable(std::move(rows));
}

std::vector<SipUri> take_targets(const Population& p, int n, const std::string& playbook) {
    if (n < 1 || static_cast<std::size_t>(n) > p.pool.size() - kFriends * kCalleesPerFriend)
        throw ConfigError(playbook + ": targets must be in [1, " +
                          std::to_string(p.pool.size() - kFriends * kCalleesPerFriend) + "]");
    return {p.pool.begin(), p.pool.begin() + n};
}

scenario::Bundle spit_bundle() { return attacks::stock_bundle(attacks::spit_call_scenario({3'000, true, true})); }

engine::EngineOptions bot_options() {
    engine::EngineOptions o;
    o.computed = attacks::challenge_answers(attacks::SolverSkill::Bot);
    o.keep_call_summaries = false;
    return o;
}

Launch spit_launch(const Address& local, const std::string& prefix, scenario::Bundle bundle, engine::Rate rate,
                   const std::vector<SipUri>& callers, const std::vector<SipUri>& targets) {
    Launch l{local, plan_for(local, prefix), bot_options()};
    l.plan.entries.push_back({std::move(bundle), rate, static_cast<int>(targets.size()), prefix});
    l.plan.callers = caller_rows(callers);
    l.plan.targets = target_rows(targets);
    return l;
}

AttackProgram single(Launch launch) {
    AttackProgram p;
    p.phases.push_back({0, {std::move(launch)}});
    return p;
}

AttackProgram build_program(const AttackSpec& spec, Context& ctx) {
    Params params(spec);
    const auto& pop = ctx.population;
    const auto& name = spec.playbook;
    AttackProgram program;

    if (name == "scan") {
        auto users = attacks::UserRange::parse(params.text("range", "5550000-5550999"));
        auto probe = attacks::probe_from_string(params.text("probe", "OPTIONS"));
        Address local{kAttackerNet + "1", 5070};
        Launch l{local, plan_for(local, "scan-"), {}};
        l.options.keep_call_summaries = false;
        std::vector<std::vector<std::string>> rows;
        for (const auto& u : users.users()) rows.push_back({u, kDomain, std::to_string(kProxy.port)});
        if (rows.empty()) throw ConfigError("scan: empty range");
        l.plan.entries.push_back({attacks::stock_bundle(attacks::scan_scenario(probe)), params.rate("rate", "50"),
                                  static_cast<int>(rows.size()), "scan"});
        l.plan.callers = caller_rows({params.uri("scanner", "sip:scanner@scan.example")});
        l.plan.targets = scenario::InjectionTable(std::move(rows));
        program = single(std::move(l));
    } else if (name == "bulk_spit") {
        auto targets = take_targets(pop, params.integer("targets", 200), name);
        program = single(spit_launch({kAttackerNet + "2", 5070}, "bulk-", spit_bundle(), params.rate("rate", "10"),
                                     {params.uri("caller", "sip:spitter@evil.example")}, targets));
    } else if (name == "identity_spoofing") {
        auto targets = take_targets(pop, params.integer("targets", 50), name);
        std::vector<SipUri> identities;
        for (std::size_t k = 0; k < targets.size(); ++k) {
            std::ostringstream id;
            id << "sip:u" << std::hex << (ctx.rng() & 0xffffffffu) << "@spoof" << std::dec << k << ".example";
            identities.push_back(SipUri::parse(id.str()));
        }
        program = single(spit_launch({kAttackerNet + "3", 5070}, "idspoof-", spit_bundle(), params.rate("rate", "10"),
                                     identities, targets));
    } else if (name == "header_spoofing") {
        std::vector<SipUri> callers, targets;
        for (const auto& f : pop.friends)
            for (const auto& c : f.callees) {
                callers.push_back(f.uri);
                targets.push_back(c);
            }
        program = single(spit_launch({kAttackerNet + "4", 5070}, "hdrspoof-", spit_bundle(), params.rate("rate", "5"),
                                     callers, targets));
    } else if (name == "greylist_retry") {
        auto targets = take_targets(pop, params.integer("targets", 20), name);
        auto l = spit_launch({kAttackerNet + "5", 5070}, "retry-", spit_bundle(), params.rate("rate", "1"),
                             {params.uri("caller", "sip:retry@evil.example")}, targets);
        l.plan.entries.push_back(l.plan.entries.front());
        program = single(std::move(l));
    } else if (name == "direct_ip_spit") {
        Address local{kAttackerNet + "6", 5070};
        std::vector<std::vector<std::string>> rows;
        for (const auto& phone : pop.phones) rows.push_back({"user", phone.ip, std::to_string(phone.port)});
        Launch l{local, plan_for(local, "direct-"), bot_options()};
        l.plan.route = engine::Route::Direct;
        l.plan.entries.push_back({spit_bundle(), params.rate("rate", "5"), static_cast<int>(rows.size()), "direct"});
        l.plan.callers = caller_rows({params.uri("caller", "sip:direct@evil.example")});
        l.plan.targets = scenario::InjectionTable(std::move(rows));
        program = single(std::move(l));
    } else if (name == "ringtone_spit") {
        auto targets = take_targets(pop, params.integer("targets", 20), name);
        auto caller = params.uri("caller", "sip:promo@evil.example");
        auto bundle =
            attacks::stock_bundle(attacks::ringtone_spit_scenario(params.text("alert", "http://ads.evil.example/jingle.wav")));
        program = single(
            spit_launch({kAttackerNet + "7", 5070}, "ring-", std::move(bundle), params.rate("rate", "1"), {caller}, targets));
        program.deposits[caller.identity()] = kFunding;
    } else if (name == "device_spoofing") {
        auto targets = take_targets(pop, params.integer("targets", 20), name);
        const defenses::DeviceProfile* device = nullptr;
        try {
            device = &ctx.devices.device(params.text("device", "PhoneA"));
        } catch (const defenses::FingerprintDbError& e) {
            throw ConfigError(std::string("device_spoofing: ") + e.what());
        }
        program = single(spit_launch({kAttackerNet + "8", 5070}, "devspoof-", attacks::spoof_device(spit_bundle(), *device),
                                     params.rate("rate", "2"), {params.uri("caller", "sip:device@evil.example")}, targets));
    } else if (name == "rate_adaptation") {
        auto targets = take_targets(pop, params.integer("targets", 20), name);
        program = single(spit_launch({kAttackerNet + "9", 5070}, "slow-", spit_bundle(), params.rate("rate", "1/12"),
                                     {params.uri("caller", "sip:slow@evil.example")}, targets));
    } else if (name == "account_switching") {
        int accounts = params.integer("accounts", 20);
        auto targets = take_targets(pop, accounts * params.integer("per_account", 5), name);
        std::vector<SipUri> owned;
        for (int k = 0; k < accounts; ++k) owned.push_back(SipUri::parse("sip:acct" + std::to_string(k) + "@evil.example"));
        attacks::SpitPlanSpec s;
        s.bundle = spit_bundle();
        s.rate = params.rate("rate", "10");
        s.callers = attacks::CallerSource::fixed(owned);
        s.proxy = kProxy;
        s.local = {kAttackerNet + "10", 5070};
        s.scenario_ref = "account_switching";
        Launch l{s.local, attacks::account_switching_plan(attacks::partition_accounts(targets, owned), s), bot_options()};
        l.plan.domain = kDomain;
        l.plan.call_id_prefix = "switch-";
        l.plan.recv_timeout_ms = 8'000;
        l.plan.global_timeout_ms = kHorizonMs;
        program = single(std::move(l));
    } else if (name == "reputation_push") {
        int receivers = params.integer("receivers", 20);
        if (receivers < 1 || receivers > kColluders)
            throw ConfigError("reputation_push: receivers must be in [1, " + std::to_string(kColluders) + "]");
        attacks::ReputationPushSpec s;
        s.receivers.assign(pop.colluders.begin(), pop.colluders.begin() + receivers);
        s.boosted = params.uri("boosted", "sip:promoter@evil.example");
        s.value = params.text("value", "+1");
        s.hold_ms = params.integer("hold_ms", 11'000);
        s.calls_per_receiver = params.integer("rounds", 3);
        s.rate = params.rate("push_rate", "2");
        s.proxy = kProxy;
        s.caller_local = {kAttackerNet + "11", 5071};
        s.receiver_local = {kAttackerNet + "12", 5072};
        attacks::ReputationPush push;
        try {
            push = attacks::reputation_push(s);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("reputation_push: ") + e.what());
        }
        for (auto* plan : {&push.registration, &push.receiver, &push.caller}) plan->domain = kDomain;
        Launch rx{s.receiver_local, push.receiver, {}};
        rx.auxiliary = true;
        program.phases.push_back({0, {Launch{s.receiver_local, push.registration, {}}}});
        program.phases.push_back({500, {std::move(rx), Launch{s.caller_local, push.caller, {}}}});
        auto targets = take_targets(pop, params.integer("targets", 20), name);
        program.phases.push_back({1'000, {spit_launch(s.caller_local, "pushed-", spit_bundle(), params.rate("rate", "1"),
                                                      {s.boosted}, targets)}});
        program.measured_phase = 2;
        program.deposits[s.boosted.identity()] = kFunding;
    } else if (name == "captcha_relay") {
        auto targets = take_targets(pop, params.integer("targets", 20), name);
        auto sc = attacks::captcha_relay(targets.front(), pop.solver, {3'000, true, false});
        auto l = spit_launch({kAttackerNet + "13", 5070}, "relay-", attacks::stock_bundle(std::move(sc)),
                             params.rate("rate", "1"), {params.uri("caller", "sip:relay@evil.example")}, targets);
        l.plan.recv_timeout_ms = 40'000;
        program = single(std::move(l));
        program.solvers.emplace_back(Address{kAttackerNet + "14", 5060}, pop.solver);
    } else if (name == "registration_hijack") {
        auto interval = params.integer("interval_ms", 15'000);
        Address spit_local{kAttackerNet + "15", 5070}, race_local{kAttackerNet + "16", 5070};
        std::vector<SipUri> targets = pop.victim_contacts;
        targets.resize(std::min<std::size_t>(targets.size(), params.integer("targets", kVictimContacts)));
        if (targets.empty()) throw ConfigError("registration_hijack: no targets");
        scenario::Scenario race;
        try {
            race = attacks::registration_race(pop.victim, spit_local, interval);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("registration_hijack: ") + e.what());
        }
        program.background.push_back({race_local, attacks::registration_race_plan(race, kProxy, race_local), {}});
        program.phases.push_back({2'000, {spit_launch(spit_local, "hijack-", spit_bundle(), params.rate("rate", "1"),
                                                      {pop.victim}, targets)}});
    } else {
        throw ConfigError("unknown playbook " + name);
    }
    params.finish();
    return program;
}

// --- one run --------------------------------------------------------------------

struct Tally {
    std::int64_t attempted = 0, forwarded = 0, rejected = 0, challenged = 0, quarantined = 0;
};

/// One logical call per (method, caller, callee); a retry replaces the
/// earlier outcome.
Tally tally(std::vector<defenses::DefenseRecord> records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) { return a.time_ms < b.time_ms; });
    std::map<std::string, defenses::RecordOutcome> last;
    for (const auto& r : records) last[r.method + "|" + r.caller + "|" + r.callee] = r.outcome;
    Tally t;
    for (const auto& [key, outcome] : last) {
        ++t.attempted;
        switch (outcome) {
        case defenses::RecordOutcome::Forwarded: ++t.forwarded; break;
        case defenses::RecordOutcome::Rejected: ++t.rejected; break;
        case defenses::RecordOutcome::Challenged: ++t.challenged; break;
        case defenses::RecordOutcome::Quarantined: ++t.quarantined; break;
        }
    }
    return t;
}

class Run {
public:
    Run(DefenseConfig config, const AttackSpec& attack, std::uint64_t seed)
        : rng_(seed), devices_(defenses::load_fingerprint_db(default_data_dir() / "fingerprints.xml")) {
        population_ = populate(rng_);
        Context ctx{population_, devices_, rng_};
        program_ = build_program(attack, ctx);

        for (const auto& [id, user] : population_.users) config.endpoint.users.emplace(id, user);
        config.endpoint.domain = kDomain;
        for (const auto& f : population_.friends)
            for (const auto& c : f.callees) config.white.emplace_back(c.identity(), f.uri.identity());
        for (const auto& c : population_.victim_contacts)
            config.white.emplace_back(c.identity(), population_.victim.identity());
        for (const auto& f : population_.friends) config.deposits[f.uri.identity()] += kFunding;
        config.deposits[population_.victim.identity()] += kFunding;
        for (const auto& [id, amount] : program_.deposits) config.deposits[id] += amount;

        deployment_ = std::make_unique<DefenseDeployment>(std::move(config), transport(kProxy), seed);
        auto& rep = deployment_->stores().reputation;
        for (const auto& f : population_.friends)
            rep.update(f.uri.identity(), defenses::reputation_event::Feedback{10}, 0);
        rep.update(population_.victim.identity(), defenses::reputation_event::Feedback{10}, 0);

        defenses::EndpointOptions phone;
        phone.role = defenses::EndpointRole::Phone;
        for (const auto& a : population_.phones)
            phones_.push_back(std::make_unique<defenses::DefenseEndpoint>(transport(a), phone_stores_,
                                                                          defenses::Chain{}, phone));
    }

    void execute() {
        for (const auto& [address, identity] : program_.solvers) {
            solvers_.push_back(std::make_unique<attacks::HumanSolver>(transport(address), identity, kProxy));
            solvers_.back()->register_now();
        }
        engine::ShootPlan legit = attacks::registration_race_plan(
            attacks::registration_race(population_.victim, kVictimClient, 3'600'000), kProxy, kVictimClient);
        background_.push_back(launch({kVictimClient, legit, {}}, {}));
        loop_.run_until(loop_.now() + 50);
        for (auto& l : program_.background) background_.push_back(launch(l, {}));
        loop_.run_until(loop_.now() + 950);

        auto honest_bundle =
            attacks::spoof_device(attacks::stock_bundle(attacks::spit_call_scenario({12'000, false, true})),
                                  devices_.device("PhoneA"));
        for (std::size_t k = 0; k < population_.friends.size(); ++k) {
            const auto& f = population_.friends[k];
            Launch l{f.address, plan_for(f.address, "honest-"), {}};
            l.options.computed = attacks::challenge_answers(attacks::SolverSkill::Human);
            l.options.keep_call_summaries = false;
            l.plan.recv_timeout_ms = 40'000;
            l.plan.entries.push_back({honest_bundle, engine::Rate{1, 30}, kCallsPerFriend, "honest"});
            l.plan.callers = caller_rows({f.uri});
            l.plan.targets = target_rows(f.callees);
            loop_.after(static_cast<TimeMs>(500 + 2'000 * k), [this, l = std::move(l)] {
                honest_.push_back(launch(l, {}));
            });
        }
        loop_.after(1'000 + (program_.phases.empty() ? 0 : program_.phases.front().delay_ms),
                    [this] { start_phase(0); });

        const TimeMs horizon = loop_.now() + kHorizonMs;
        auto honest_done = [this] {
            if (honest_.size() < population_.friends.size()) return false;
            return std::all_of(honest_.begin(), honest_.end(), [](auto* e) { return e->finished(); });
        };
        loop_.run_while([&] { return error_.empty() && (!attack_done_ || !honest_done()) && loop_.now() < horizon; });
        if (error_.empty() && (!attack_done_ || !honest_done())) error_ = "run exceeded the time horizon";
        loop_.run_until(loop_.now() + kDrainMs);
        for (auto& e : engines_)
            if (!e->finished()) e->stop();
        loop_.run_while([&] {
            return std::any_of(engines_.begin(), engines_.end(), [](const auto& e) { return !e->finished(); });
        });
    }

    std::vector<defenses::DefenseRecord> records() const {
        auto out = deployment_->endpoint().records();
        for (const auto& p : phones_) {
            auto more = p->records();
            out.insert(out.end(), more.begin(), more.end());
        }
        return out;
    }

    TimeMs measured_from() const { return measured_from_; }
    const std::string& error() const { return error_; }

private:
    net::Transport& transport(const Address& a) {
        auto it = transports_.find(a);
        if (it == transports_.end()) it = transports_.emplace(a, network_.bind(a)).first;
        return *it->second;
    }

    engine::Engine* launch(const Launch& l, std::function<void()> on_done) {
        engines_.push_back(std::make_unique<engine::Engine>(transport(l.local), l.options));
        auto* e = engines_.back().get();
        e->start(l.plan, [this, on_done = std::move(on_done)](const engine::RunResult& r) {
            for (const auto& entry : r.entries)
                if (entry.exit_code == engine::kFatal && error_.empty())
                    error_ = entry.scenario + ": " + (entry.error.empty() ? "fatal" : entry.error);
            if (on_done) on_done();
        });
        return e;
    }

    void start_phase(std::size_t index) {
        if (index >= program_.phases.size()) {
            attack_done_ = true;
            return;
        }
        if (index == program_.measured_phase) measured_from_ = loop_.now();
        const auto& phase = program_.phases[index];
        auto pending = std::make_shared<int>(0);
        auto aux = std::make_shared<std::vector<engine::Engine*>>();
        for (const auto& l : phase.launches)
            if (!l.auxiliary) ++*pending;
        for (const auto& l : phase.launches) {
            if (l.auxiliary) {
                aux->push_back(launch(l, {}));
                continue;
            }
            launch(l, [this, index, pending, aux] {
                if (--*pending > 0) return;
                loop_.after(2'000, [this, index, aux] {
                    for (auto* e : *aux)
                        if (!e->finished()) e->stop();
                    TimeMs delay = index + 1 < program_.phases.size() ? program_.phases[index + 1].delay_ms : 0;
                    loop_.after(std::max<TimeMs>(delay, 1), [this, index] { start_phase(index + 1); });
                });
            });
        }
    }

    net::EventLoop loop_;
    net::LoopbackNetwork network_{loop_};
    std::mt19937_64 rng_;
    defenses::FingerprintDb devices_;
    Population population_;
    AttackProgram program_;
    std::map<Address, std::unique_ptr<net::Transport>> transports_;
    std::unique_ptr<DefenseDeployment> deployment_;
    defenses::DefenseStores phone_stores_;
    std::vector<std::unique_ptr<defenses::DefenseEndpoint>> phones_;
    std::vector<std::unique_ptr<attacks::HumanSolver>> solvers_;
    std::vector<std::unique_ptr<engine::Engine>> engines_;
    std::vector<engine::Engine*> background_;
    std::vector<engine::Engine*> honest_;
    TimeMs measured_from_ = 0;
    bool attack_done_ = false;
    std::string error_;
};

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

double ratio(std::int64_t a, std::int64_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

void finalize(EvalReport& r) {
    r.bypass_rate = ratio(r.forwarded, r.attempted);
    r.detection_rate = ratio(r.rejected + r.quarantined, r.attempted);
    r.false_positive_rate = ratio(r.honest_rejected + r.honest_quarantined, r.honest_attempted);
    r.flags.clear();
    if (r.false_positive_rate > 0) r.flags.push_back("false-positives");
    if (!r.complete) r.flags.push_back("incomplete");
}

}  // namespace

EvalReport run_experiment(const Experiment& exp) {
    auto started = std::chrono::steady_clock::now();
    auto config = load_defense_config(exp.defense);
    if (std::find(playbooks().begin(), playbooks().end(), exp.attack.playbook) == playbooks().end())
        throw ConfigError("unknown playbook " + exp.attack.playbook);
    if (exp.repetitions < 1) throw ConfigError("repetitions must be >= 1");

    EvalReport report;
    report.attack = exp.attack.name();
    report.defense = config.name;
    report.name = exp.name.empty() ? report.attack + "@" + report.defense : exp.name;
    report.seed = exp.seed;
    report.repetitions = exp.repetitions;

    for (int rep = 0; rep < exp.repetitions && report.complete; ++rep) {
        std::optional<Run> run;
        try {
            run.emplace(config, exp.attack, exp.seed + static_cast<std::uint64_t>(rep));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(report.name + ": " + e.what());
        }
        try {
            run->execute();
        } catch (const std::exception& e) {
            report.complete = false;
            report.error = e.what();
        }
        if (!run->error().empty()) {
            report.complete = false;
            report.error = run->error();
        }
        std::vector<defenses::DefenseRecord> attack, honest;
        for (auto& r : run->records()) {
            auto ip = r.source.substr(0, r.source.find(':'));
            if (starts_with(ip, kAttackerNet) && r.time_ms >= run->measured_from())
                attack.push_back(std::move(r));
            else if (starts_with(ip, kHonestNet))
                honest.push_back(std::move(r));
        }
        auto a = tally(std::move(attack));
        report.attempted += a.attempted;
        report.forwarded += a.forwarded;
        report.rejected += a.rejected;
        report.challenged += a.challenged;
        report.quarantined += a.quarantined;
        auto h = tally(std::move(honest));
        report.honest_attempted += h.attempted;
        report.honest_rejected += h.rejected;
        report.honest_quarantined += h.quarantined;
        report.honest_challenged += h.challenged;
    }
    finalize(report);
    report.runtime_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    return report;
}

EvalReport run_experiment(const Experiment& exp, const std::filesystem::path& out_dir) {
    auto report = run_experiment(exp);
    std::filesystem::create_directories(out_dir);
    scenario::write_file(out_dir / (report.name + ".json"), to_json(report) + "\n");
    scenario::write_file(out_dir / (report.name + ".csv"), to_csv({report}));
    return report;
}

// --- matrix -----------------------------------------------------------------------

MatrixSpec load_matrix_spec(const std::filesystem::path& path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_xml(path.string(), tree, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
        throw ConfigError(std::string("experiments file: ") + e.what());
    }
    auto root = tree.get_child_optional("experiments");
    if (!root) throw ConfigError("experiments file: missing <experiments> root");
    MatrixSpec spec;
    try {
        spec.seed = root->get<std::uint64_t>("<xmlattr>.seed", 1);
        spec.repetitions = root->get<int>("<xmlattr>.repetitions", 1);
    } catch (const pt::ptree_error& e) {
        throw ConfigError(std::string("experiments file: ") + e.what());
    }
    for (const auto& [tag, node] : *root) {
        if (tag == "defense") {
            std::filesystem::path p = node.get<std::string>("<xmlattr>.config", "");
            if (p.empty()) throw ConfigError("<defense> without config");
            spec.defenses.push_back(p.is_absolute() ? p : path.parent_path() / p);
        } else if (tag == "attack") {
            AttackSpec a;
            a.playbook = node.get<std::string>("<xmlattr>.playbook", "");
            a.label = node.get<std::string>("<xmlattr>.label", "");
            if (a.playbook.empty()) throw ConfigError("<attack> without playbook");
            for (const auto& [t, p] : node)
                if (t == "param") a.params[p.get<std::string>("<xmlattr>.name", "")] = p.get<std::string>("<xmlattr>.value", "");
            spec.attacks.push_back(std::move(a));
        } else if (tag != "<xmlattr>" && tag != "<xmlcomment>") {
            throw ConfigError("experiments file: unknown element <" + tag + ">");
        }
    }
    return spec;
}

const EvalReport& Matrix::cell(const std::string& defense, const std::string& attack) const {
    auto d = std::find(defenses.begin(), defenses.end(), defense);
    auto a = std::find(attacks.begin(), attacks.end(), attack);
    if (d == defenses.end() || a == attacks.end()) throw std::out_of_range("no matrix cell " + attack + "@" + defense);
    return cells.at(static_cast<std::size_t>(d - defenses.begin()) * attacks.size() +
                    static_cast<std::size_t>(a - attacks.begin()));
}

Matrix baseline_matrix(const std::vector<AttackSpec>& attacks, const std::vector<std::filesystem::path>& defenses,
                       std::uint64_t seed, int repetitions) {
    if (attacks.empty() || defenses.empty()) throw ConfigError("matrix needs at least one attack and one defense");
    Matrix m;
    for (const auto& a : attacks) m.attacks.push_back(a.name());
    for (const auto& path : defenses) {
        auto name = load_defense_config(path).name;
        m.defenses.push_back(name);
        for (const auto& a : attacks) m.cells.push_back(run_experiment({a.name() + "@" + name, a, path, repetitions, seed}));
    }
    return m;
}

// --- reports ------------------------------------------------------------------------

namespace {

nlohmann::ordered_json report_json(const EvalReport& r) {
    return {{"name", r.name},
            {"attack", r.attack},
            {"defense", r.defense},
            {"seed", r.seed},
            {"repetitions", r.repetitions},
            {"attempted", r.attempted},
            {"forwarded", r.forwarded},
            {"rejected", r.rejected},
            {"challenged", r.challenged},
            {"quarantined", r.quarantined},
            {"bypass_rate", r.bypass_rate},
            {"detection_rate", r.detection_rate},
            {"honest_attempted", r.honest_attempted},
            {"honest_rejected", r.honest_rejected},
            {"honest_quarantined", r.honest_quarantined},
            {"honest_challenged", r.honest_challenged},
            {"false_positive_rate", r.false_positive_rate},
            {"complete", r.complete},
            {"error", r.error},
            {"flags", r.flags},
            {"runtime_ms", r.runtime_ms}};
}

EvalReport report_of(const nlohmann::json& j) {
    EvalReport r;
    r.name = j.at("name");
    r.attack = j.at("attack");
    r.defense = j.at("defense");
    r.seed = j.at("seed");
    r.repetitions = j.at("repetitions");
    r.attempted = j.at("attempted");
    r.forwarded = j.at("forwarded");
    r.rejected = j.at("rejected");
    r.challenged = j.at("challenged");
    r.quarantined = j.at("quarantined");
    r.bypass_rate = j.at("bypass_rate");
    r.detection_rate = j.at("detection_rate");
    r.honest_attempted = j.at("honest_attempted");
    r.honest_rejected = j.at("honest_rejected");
    r.honest_quarantined = j.at("honest_quarantined");
    r.honest_challenged = j.at("honest_challenged");
    r.false_positive_rate = j.at("false_positive_rate");
    r.complete = j.at("complete");
    r.error = j.value("error", "");
    r.flags = j.value("flags", std::vector<std::string>{});
    r.runtime_ms = j.value("runtime_ms", 0);
    return r;
}

std::string fixed4(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4) << v;
    return out.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace

std::string to_json(const EvalReport& report) { return report_json(report).dump(2); }

EvalReport report_from_json(const std::string& text) {
    try {
        return report_of(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("report: ") + e.what());
    }
}

std::string to_csv(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << "name,attack,defense,seed,repetitions,attempted,forwarded,rejected,challenged,quarantined,bypass_rate,"
           "detection_rate,honest_attempted,honest_rejected,honest_quarantined,honest_challenged,false_positive_rate,"
           "complete,flags\n";
    for (const auto& r : reports) {
        std::string flags;
        for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
        out << csv_field(r.name) << ',' << csv_field(r.attack) << ',' << csv_field(r.defense) << ',' << r.seed << ','
            << r.repetitions << ',' << r.attempted << ',' << r.forwarded << ',' << r.rejected << ',' << r.challenged
            << ',' << r.quarantined << ',' << fixed4(r.bypass_rate) << ',' << fixed4(r.detection_rate) << ','
            << r.honest_attempted << ',' << r.honest_rejected << ',' << r.honest_quarantined << ','
            << r.honest_challenged << ',' << fixed4(r.false_positive_rate) << ',' << (r.complete ? "yes" : "no") << ','
            << flags << '\n';
    }
    return out.str();
}

std::string to_json(const Matrix& matrix) {
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& c : matrix.cells) cells.push_back(report_json(c));
    nlohmann::ordered_json doc{{"attacks", matrix.attacks}, {"defenses", matrix.defenses}, {"cells", cells}};
    return doc.dump(2);
}

std::string grid_csv(const Matrix& matrix) {
    std::ostringstream out;
    out << "defense";
    for (const auto& a : matrix.attacks) out << ',' << csv_field(a + ":bypass") << ',' << csv_field(a + ":detection");
    out << '\n';
    for (const auto& d : matrix.defenses) {
        out << csv_field(d);
        for (const auto& a : matrix.attacks) {
            const auto& c = matrix.cell(d, a);
            out << ',' << fixed4(c.bypass_rate) << ',' << fixed4(c.detection_rate);
        }
        out << '\n';
    }
    return out.str();
}

void write_matrix(const Matrix& matrix, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    scenario::write_file(dir / "matrix.json", to_json(matrix) + "\n");
    scenario::write_file(dir / "matrix.csv", to_csv(matrix.cells));
    scenario::write_file(dir / "grid.csv", grid_csv(matrix));
}

std::vector<EvalReport> read_reports(const std::filesystem::path& dir) {
    std::vector<EvalReport> out;
    if (!std::filesystem::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(scenario::read_file(f));
            if (j.contains("cells")) {
                for (const auto& c : j.at("cells")) out.push_back(report_of(c));
            } else {
                out.push_back(report_of(j));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(f.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace sxsm::harness
