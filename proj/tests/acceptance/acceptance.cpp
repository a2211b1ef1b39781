// Closed-loop acceptance run. One PASS/FAIL line per criterion; exit status
// is the number of failures.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sxsm/attacks/playbooks.hpp"
#include "sxsm/attacks/scan.hpp"
#include "sxsm/attacks/spit.hpp"
#include "sxsm/attacks/spoof.hpp"
#include "sxsm/defenses/endpoint.hpp"
#include "sxsm/harness/experiment.hpp"
#include "sxsm/ids/cpt.hpp"
#include "sxsm/ids/distance.hpp"
#include "sxsm/scenario/template.hpp"

using namespace sxsm;
using sip::SipUri;

namespace {

const std::filesystem::path kData = SXSM_DATA_DIR;

struct Check {
    std::vector<std::string> failures;
    std::ostringstream detail;

    void expect(bool ok, const std::string& what) {
        if (!ok && failures.size() < 5) failures.push_back(what);
        if (!ok && failures.size() == 5) failures.push_back("...");
    }
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// --- 1 -------------------------------------------------------------------------

std::string token(std::mt19937& rng, std::size_t min_len, std::size_t max_len,
                  const std::string& tail = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-._!~") {
    std::string s(1, "abcdefghijklmnopqrstuvwxyz"[rng() % 26]);
    auto n = min_len + rng() % (max_len - min_len + 1);
    while (s.size() < n) s += tail[rng() % tail.size()];
    return s;
}

/// Wire text built by hand, so that the parser never sees its own output.
std::string generated_wire(std::mt19937& rng) {
    static const char* methods[] = {"INVITE", "ACK", "BYE", "CANCEL", "OPTIONS", "REGISTER", "INFO", "REFER"};
    static const char* names[] = {"Via",        "From",  "To",         "Call-ID", "CSeq",   "Contact",
                                  "User-Agent", "Allow", "Alert-Info", "v",       "f",      "t",
                                  "i",          "m",     "X-Custom",   "Expires", "Accept", "Max-Forwards"};
    std::string wire;
    if (rng() % 2) {
        std::string host = rng() % 2 ? token(rng, 2, 9, "abcdefghijklmnopqrstuvwxyz0123456789-") + ".example" : "10.0." + std::to_string(rng() % 256) + ".7";
        wire = std::string(methods[rng() % 8]) + " sip:" + token(rng, 1, 8) + "@" + host +
               (rng() % 3 ? "" : ":" + std::to_string(1 + rng() % 65535)) + " SIP/2.0\r\n";
    } else {
        wire = "SIP/2.0 " + std::to_string(100 + rng() % 600) + " " + token(rng, 1, 10) + " " + token(rng, 1, 6) + "\r\n";
    }
    std::string body = rng() % 3 ? "" : "v=0\r\no=" + token(rng, 1, 30) + "\r\n";
    auto count = rng() % 12;
    for (std::size_t i = 0; i < count; ++i) {
        std::string value = token(rng, 1, 20);
        if (rng() % 2) value += ";tag=" + token(rng, 1, 6);
        wire += std::string(names[rng() % 18]) + ": " + value + "\r\n";
    }
    if (!body.empty()) wire += "Content-Length: " + std::to_string(body.size()) + "\r\n";
    return wire + "\r\n" + body;
}

std::vector<std::string> hand_base() {
    return {
        "INVITE sip:5550001@example.com SIP/2.0\r\nVia: SIP/2.0/UDP 10.0.0.5:5060;branch=z9hG4bK-1\r\n"
        "Max-Forwards: 70\r\nFrom: \"Spam\" <sip:spitter@evil.example>;tag=9\r\nTo: <sip:5550001@example.com>\r\n"
        "Call-ID: a1@10.0.0.5\r\nCSeq: 1 INVITE\r\nContact: <sip:spitter@10.0.0.5>\r\n"
        "Content-Type: application/sdp\r\nContent-Length: 13\r\n\r\nv=0\r\ns=spit\r\n",
        "SIP/2.0 180 Ringing\r\nVia: SIP/2.0/UDP 10.0.0.5:5060;branch=z9hG4bK-1\r\nFrom: <sip:a@b.example>;tag=1\r\n"
        "To: <sip:c@d.example>;tag=2\r\nCall-ID: x\r\nCSeq: 1 INVITE\r\nAlert-Info: <http://ads.example/tone.wav>\r\n"
        "Content-Length: 0\r\n\r\n",
        "REGISTER sip:example.com SIP/2.0\r\nVia: SIP/2.0/UDP 10.6.6.16:5060;branch=z9hG4bK-r\r\n"
        "From: <sip:victim@example.com>;tag=r\r\nTo: <sip:victim@example.com>\r\nCall-ID: reg-1\r\nCSeq: 7 REGISTER\r\n"
        "Contact: <sip:victim@10.6.6.16:5070>\r\nExpires: 3600\r\nContent-Length: 0\r\n\r\n",
        "OPTIONS sip:5550123@example.com SIP/2.0\r\nVia: SIP/2.0/UDP 10.6.6.1:5060;branch=z9hG4bK-o\r\n"
        "From: <sip:scan@evil.example>;tag=s\r\nTo: <sip:5550123@example.com>\r\nCall-ID: o-1\r\nCSeq: 1 OPTIONS\r\n"
        "Accept: application/sdp\r\nContent-Length: 0\r\n\r\n",
        "SIP/2.0 183 Session Progress\r\nVia: SIP/2.0/UDP 10.0.0.5;branch=z9hG4bK-1\r\nCall-ID: q\r\nCSeq: 1 INVITE\r\n"
        "X-Challenge: turing\r\nContent-Type: text/plain\r\nContent-Length: 14\r\n\r\ndigits=40213\r\n",
        "BYE sip:bob@10.0.0.9:5060 SIP/2.0\r\nVia: SIP/2.0/UDP 10.0.0.5:5060;branch=z9hG4bK-b\r\nFrom: <sip:a@b>;tag=1\r\n"
        "To: <sip:bob@example.com>;tag=2\r\nCall-ID: b-1\r\nCSeq: 2 BYE\r\nX-Reputation: +1\r\nContent-Length: 0\r\n\r\n",
        "REFER sip:solver@example.com SIP/2.0\r\nVia: SIP/2.0/UDP 10.6.6.13:5060;branch=z9hG4bK-f\r\n"
        "From: <sip:relay@evil.example>;tag=f\r\nTo: <sip:solver@example.com>\r\nCall-ID: f-1\r\nCSeq: 3 REFER\r\n"
        "Refer-To: <sip:5550001@example.com?Call-ID=x>\r\nReferred-By: <sip:relay@evil.example>\r\n"
        "Content-Length: 0\r\n\r\n",
        "SIP/2.0 404 Not Found\r\nVia: SIP/2.0/UDP 10.6.6.1:5060;branch=z9hG4bK-o\r\nFrom: <sip:scan@evil.example>;tag=s\r\n"
        "To: <sip:5550124@example.com>;tag=n\r\nCall-ID: o-2\r\nCSeq: 1 OPTIONS\r\nContent-Length: 0\r\n\r\n",
        "INFO sip:5550001@example.com SIP/2.0\r\nVia: SIP/2.0/UDP 10.0.0.5:5060;branch=z9hG4bK-i\r\nCall-ID: i-1\r\n"
        "CSeq: 2 INFO\r\nContent-Type: text/plain\r\nContent-Length: 14\r\n\r\nanswer=40213\r\n",
        "CANCEL sip:5550001@example.com SIP/2.0\r\nVia: SIP/2.0/UDP 10.0.0.5:5060;branch=z9hG4bK-1\r\n"
        "From: <sip:spitter@evil.example>;tag=9\r\nTo: <sip:5550001@example.com>\r\nCall-ID: a1@10.0.0.5\r\n"
        "CSeq: 1 CANCEL\r\nContent-Length: 0\r\n\r\n",
    };
}

/// Five mutations of each base: header order reversed, compact names,
/// irregular spacing, a folded continuation, duplicated extension headers.
std::vector<std::string> hand_mutated() {
    static const std::map<std::string, std::string> compact{{"Via", "v"},     {"From", "f"},    {"To", "t"},
                                                          {"Call-ID", "i"}, {"Contact", "m"}, {"Content-Length", "l"},
                                                          {"Content-Type", "c"}};
    std::vector<std::string> out;
    for (const auto& base : hand_base()) {
        auto head_end = base.find("\r\n\r\n");
        auto start = base.substr(0, base.find("\r\n") + 2);
        auto body = base.substr(head_end + 4);
        std::vector<std::string> lines;
        for (auto at = start.size(); at < head_end + 2;) {
            auto eol = base.find("\r\n", at);
            lines.push_back(base.substr(at, eol - at));
            at = eol + 2;
        }
        auto join = [&](const std::vector<std::string>& ls) {
            std::string s = start;
            for (const auto& l : ls) s += l + "\r\n";
            return s + "\r\n" + body;
        };
        auto reversed = lines;
        std::reverse(reversed.begin(), reversed.end());
        out.push_back(join(reversed));
        auto compacted = lines;
        for (auto& l : compacted) {
            auto name = l.substr(0, l.find(':'));
            if (compact.count(name)) l = compact.at(name) + l.substr(name.size());
        }
        out.push_back(join(compacted));
        auto spaced = lines;
        for (std::size_t i = 0; i < spaced.size(); ++i) {
            auto c = spaced[i].find(": ");
            spaced[i] = spaced[i].substr(0, c) + (i % 2 ? " :\t " : ":") + spaced[i].substr(c + 2);
        }
        out.push_back(join(spaced));
        auto folded = lines;
        folded.insert(folded.begin() + 1, "Subject: first part\r\n  second part");
        out.push_back(join(folded));
        auto dup = lines;
        dup.insert(dup.begin(), "X-Trace: one");
        dup.push_back("X-Trace: two");
        dup.push_back("x-trace: three");
        out.push_back(join(dup));
    }
    return out;
}

std::string names_of(const sip::SipMessage& m) {
    std::string s;
    for (const auto& h : m.headers) s += h.name + "|";
    return s;
}

/// Header names in wire order, read without the parser.
std::string wire_names(const std::string& wire) {
    std::string s;
    auto head_end = wire.find("\r\n\r\n");
    auto at = wire.find("\r\n") + 2;
    while (at < head_end + 2) {
        auto eol = wire.find("\r\n", at);
        if (wire[at] != ' ' && wire[at] != '\t') {
            auto name = wire.substr(at, wire.find(':', at) - at);
            while (!name.empty() && (name.back() == ' ' || name.back() == '\t')) name.pop_back();
            s += name + "|";
        }
        at = eol + 2;
    }
    return s;
}

void parser_round_trip(Check& c) {
    std::mt19937 rng(20240601);
    int ok = 0, total = 0;
    auto one = [&](const std::string& wire) {
        ++total;
        try {
            auto m = sip::parse(wire);
            bool good = sip::serialize(m) == wire && names_of(m) == wire_names(wire) && sip::parse(sip::serialize(m)) == m;
            c.expect(good, "round trip differs: " + wire.substr(0, wire.find('\r')));
            ok += good;
        } catch (const std::exception& e) {
            c.expect(false, std::string("parse failed: ") + e.what() + ": " + wire.substr(0, wire.find('\r')));
        }
    };
    for (int i = 0; i < 200; ++i) one(generated_wire(rng));
    auto mutated = hand_mutated();
    c.expect(mutated.size() == 50, "expected 50 mutated messages");
    for (const auto& w : mutated) one(w);
    c.detail << ok << "/" << total << " identical";
}

// --- 2 ----------------------------------------------------------------------------

void scan_oracle(Check& c) {
    net::EventLoop loop;
    net::LoopbackNetwork network(loop);
    defenses::DefenseStores stores;
    std::mt19937 rng(120);
    std::set<std::string> assigned;
    while (assigned.size() < 120) assigned.insert(std::to_string(5'550'000 + rng() % 10'000));
    defenses::EndpointOptions o;
    int i = 0;
    for (const auto& u : assigned) o.users[u + "@example.com"] = {i++ % 3 != 0, 1000};
    net::Address proxy{"10.0.0.1", 5060}, scanner{"10.6.6.1", 5060};
    auto pt = network.bind(proxy);
    defenses::DefenseEndpoint endpoint(*pt, stores, {}, o);
    auto st = network.bind(scanner);
    attacks::ScanOptions so;
    so.rate = engine::Rate::per_second(200);
    auto inv = attacks::scan_permanent("example.com", attacks::UserRange::parse("5550000-5559999"),
                                       attacks::ProbeMethod::Invite, *st, proxy, so);
    std::set<std::string> found;
    for (const auto& e : inv.assigned()) found.insert(e.uri.user);
    std::size_t fp = 0, fn = 0;
    for (const auto& u : found) fp += !assigned.count(u);
    for (const auto& u : assigned) fn += !found.count(u);
    std::size_t offline_ok = 0;
    for (const auto& e : inv.assigned())
        offline_ok += (e.status == sip::UriStatus::AssignedOnline) == o.users.at(e.uri.user + "@example.com").online;
    c.expect(inv.size() == 10'000, "inventory size " + std::to_string(inv.size()));
    c.expect(fp == 0 && fn == 0, "fp " + std::to_string(fp) + " fn " + std::to_string(fn));
    c.expect(inv.with_status(sip::UriStatus::Unassigned).size() == 10'000 - 120, "unassigned count");
    c.expect(offline_ok == found.size(), "online/offline split");
    c.detail << "found " << found.size() << "/120, fp " << fp << ", fn " << fn;
}

// --- 3 and 4 ---------------------------------------------------------------------------

const char* kInvite =
    "INVITE sip:[target_user]@[target_host] SIP/2.0\n"
    "Via: SIP/2.0/UDP [local_ip]:[local_port];branch=[branch]\n"
    "From: <sip:[field1]@[field2]>;tag=[call_number]\n"
    "To: <sip:[target_user]@[target_host]>\n"
    "Call-ID: [call_id]\n"
    "CSeq: [cseq] INVITE\n"
    "Content-Length: [len]\n";
const char* kAck =
    "ACK sip:[target_user]@[target_host] SIP/2.0\n"
    "Via: SIP/2.0/UDP [local_ip]:[local_port];branch=[branch]\n"
    "Call-ID: [call_id]\n"
    "CSeq: [cseq] ACK\n";
const char* kBye =
    "BYE sip:[target_user]@[target_host] SIP/2.0\n"
    "Via: SIP/2.0/UDP [local_ip]:[local_port];branch=[branch]\n"
    "Call-ID: [call_id]\n"
    "CSeq: [cseq] BYE\n";

/// Answers INVITE n with `final_for(n)` (0: no final), BYE with 200.
class ScriptedUas {
public:
    ScriptedUas(net::LoopbackNetwork& network, net::Address addr, std::function<int(int)> final_for)
        : transport_(network.bind(addr)), final_for_(std::move(final_for)) {
        transport_->on_receive([this](const net::Address& from, const std::string& bytes) {
            auto req = sip::parse(bytes);
            if (req.method() == "INVITE") {
                int status = final_for_(invites_++);
                reply(from, req, 100);
                if (status == 200) reply(from, req, 180);
                if (status != 0) reply(from, req, status);
            } else if (req.method() == "BYE") {
                reply(from, req, 200);
            }
        });
    }

private:
    void reply(const net::Address& to, const sip::SipMessage& req, int status) {
        auto r = sip::SipMessage::response(status, "X");
        for (const char* h : {"Via", "From", "To", "Call-ID", "CSeq"})
            if (auto v = req.header(h)) r.add_header(h, std::string(*v));
        transport_->send(to, sip::serialize(r));
    }

    std::unique_ptr<net::Transport> transport_;
    std::function<int(int)> final_for_;
    int invites_ = 0;
};

engine::ShootEntry uac_entry(int calls, engine::Rate rate) {
    scenario::Bundle b;
    b.scenario = scenario::load_scenario(R"(<scenario name="uac" set="t">
      <send template="invite"/>
      <recv status="100"/>
      <recv status="180"/>
      <recv status="200"/>
      <send template="ack"/>
      <send template="bye"/>
      <recv status="200"/>
    </scenario>)");
    b.templates["invite"] = {"t", "invite", kInvite};
    b.templates["ack"] = {"t", "ack", kAck};
    b.templates["bye"] = {"t", "bye", kBye};
    return {b, rate, calls, "uac"};
}

engine::ShootPlan uac_plan(int calls, engine::Rate rate) {
    engine::ShootPlan p;
    p.remote = {"127.0.0.1", 5060};
    p.local = {"127.0.0.1", 5061};
    p.callers = scenario::InjectionTable({{"Alice", "alice", "example.com"}});
    p.targets = scenario::InjectionTable({{"5550001"}});
    p.entries.push_back(uac_entry(calls, rate));
    return p;
}

int hand_success_rate(const std::vector<int>& codes) {
    if (codes.empty()) return 0;
    int zeros = static_cast<int>(std::count(codes.begin(), codes.end(), 0));
    // round half up on integers: floor((200 z + n) / 2n)
    int n = static_cast<int>(codes.size());
    return (200 * zeros + n) / (2 * n);
}

engine::EntryResult entry_with(int code) {
    engine::EntryResult e;
    e.exit_code = code;
    return e;
}

void exit_codes(Check& c) {
    auto run = [](std::function<int(int)> final_for, std::function<void(engine::ShootPlan&)> tweak) {
        net::EventLoop loop;
        net::LoopbackNetwork network(loop);
        ScriptedUas uas(network, {"127.0.0.1", 5060}, std::move(final_for));
        auto t = network.bind({"127.0.0.1", 5061});
        auto plan = uac_plan(5, engine::Rate::per_second(1));
        tweak(plan);
        return engine::execute(plan, *t).entries.at(0);
    };
    std::vector<int> codes;
    codes.push_back(run([](int) { return 200; }, [](auto&) {}).exit_code);
    codes.push_back(run([](int n) { return n == 2 ? 486 : 200; }, [](auto&) {}).exit_code);
    codes.push_back(run([](int) { return 200; }, [](auto& p) {
                        p.entries[0].max_calls = 100;
                        p.global_timeout_ms = 3'000;
                    }).exit_code);
    codes.push_back(run([](int) { return 200; }, [](auto& p) { p.targets = {}; }).exit_code);
    codes.push_back(run([](int) { return 200; }, [](auto& p) {
                        p.entries[0].bundle.templates["bye"].text += "X-Broken: [no_such_binding]\n";
                    }).exit_code);
    const std::vector<int> expected{0, 1, 97, 99, -1};
    c.expect(codes == expected, "exit codes did not cover 0/1/97/99/-1");

    engine::RunResult all;
    for (int code : codes) all.entries.push_back(entry_with(code));
    c.expect(engine::success_rate(all) == hand_success_rate(codes), "success rate of the five runs");
    engine::RunResult zeros;
    zeros.entries.resize(4);
    c.expect(engine::success_rate(zeros) == 100, "all-zero run is not 100");
    std::mt19937 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        engine::RunResult r;
        std::vector<int> cs(1 + rng() % 30);
        for (auto& x : cs) {
            x = expected[rng() % 5];
            r.entries.push_back(entry_with(x));
        }
        c.expect(engine::success_rate(r) == hand_success_rate(cs), "success rate on a random run");
    }
    std::ostringstream codes_text;
    for (int x : codes) codes_text << x << " ";
    c.detail << "codes " << codes_text.str() << "rate " << engine::success_rate(all) << "%, all-zero "
             << engine::success_rate(zeros) << "%";
}

void rate_discipline(Check& c) {
    net::EventLoop loop;
    net::LoopbackNetwork network(loop);
    ScriptedUas uas(network, {"127.0.0.1", 5060}, [](int) { return 200; });
    auto t = network.bind({"127.0.0.1", 5061});
    auto e = engine::execute(uac_plan(100, engine::Rate::per_second(10)), *t).entries.at(0);
    c.expect(e.exit_code == 0 && e.attempted == 100, "not all 100 calls ran");
    net::TimeMs first = e.calls.empty() ? 0 : e.calls.front().started_ms, last_end = first;
    for (const auto& call : e.calls) last_end = std::max(last_end, call.ended_ms);
    double seconds = (last_end - first) / 1000.0;
    c.expect(std::abs(seconds - 10.0) <= 0.5, "duration " + fmt(seconds) + " s");
    int worst = 0;
    const auto& s = e.start_times_ms;
    for (std::size_t i = 0; i < s.size(); ++i) {
        int in_window = 0;
        for (std::size_t j = i; j < s.size() && s[j] < s[i] + 1000; ++j) ++in_window;
        worst = std::max(worst, in_window);
    }
    c.expect(worst <= 11, "window with " + std::to_string(worst) + " starts");
    c.detail << "100 calls in " << fmt(seconds, 3) << " s, busiest 1 s window " << worst;
}

// --- 5 ------------------------------------------------------------------------------

void fingerprint_bypass(Check& c) {
    auto db = defenses::load_fingerprint_db(kData / "fingerprints.xml");
    auto bundle = attacks::stock_bundle(attacks::spit_call_scenario());
    for (const char* extra : {"options", "register_bind"}) bundle.templates[extra] = attacks::stock_templates().at(extra);
    int spoofed = 0, forwarded = 0, perturbed = 0, rejected = 0;
    for (const auto& device : db.devices) {
        auto out = attacks::spoof_device(bundle, device);
        for (const auto& [name, tmpl] : out.templates) {
            auto method = scenario::template_method(tmpl.text);
            if (!device.layouts.count(method)) continue;
            scenario::Bindings b;
            for (const auto& id : scenario::placeholders(tmpl.text))
                if (id != "len") b[id] = "x1";
            auto msg = scenario::expand(tmpl, b);
            ++spoofed;
            bool fwd = defenses::passive_check(msg, db).is_forward();
            forwarded += fwd;
            c.expect(fwd, device.label + " " + name + " not forwarded");
            auto lower = [](std::string s) {
                for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
                return s;
            };
            for (std::size_t i = 0; i + 1 < msg.headers.size(); ++i) {
                if (lower(msg.headers[i].name) == lower(msg.headers[i + 1].name)) continue;
                auto swapped = msg;
                std::swap(swapped.headers[i], swapped.headers[i + 1]);
                ++perturbed;
                bool rej = defenses::passive_check(swapped, db).is_reject();
                rejected += rej;
                c.expect(rej, device.label + " " + name + " swap " + std::to_string(i) + " not rejected");
            }
        }
    }
    c.expect(spoofed >= static_cast<int>(db.devices.size()), "some device had no spoofable template");
    c.detail << db.devices.size() << " devices, bypass " << fmt(double(forwarded) / spoofed, 2) << " over " << spoofed
             << ", detection " << fmt(double(rejected) / perturbed, 2) << " over " << perturbed << " perturbations";
}

// --- 6 and 7 -----------------------------------------------------------------------------

harness::EvalReport experiment(const std::string& playbook, const std::string& defense,
                               std::map<std::string, std::string> params = {}) {
    harness::Experiment exp;
    exp.attack = {playbook, std::move(params), {}};
    exp.defense = kData / "defenses" / (defense + ".xml");
    exp.seed = 7;
    return harness::run_experiment(exp);
}

void list_semantics(Check& c) {
    defenses::ListStore store;
    auto first = store.check("stranger@x.example", "bob@example.com", 0);
    auto retry = store.check("stranger@x.example", "bob@example.com", 30'000);
    auto later = store.check("stranger@x.example", "bob@example.com", 45'000);
    c.expect(first.is_reject(), "first contact not rejected");
    c.expect(retry.is_forward(), "retry inside the window not accepted");
    c.expect(later.is_forward(), "third call not accepted");

    defenses::ListStore consent({defenses::ListMode::Consent});
    c.expect(!consent.check("stranger@x.example", "bob@example.com", 0).is_forward(), "consent first contact");

    auto r = experiment("identity_spoofing", "blacklist", {{"targets", "50"}});
    c.expect(r.attempted == 50, "identity switching ran " + std::to_string(r.attempted) + " calls");
    c.expect(r.bypass_rate == 1.0, "identity switching bypass " + fmt(r.bypass_rate));
    auto known = experiment("bulk_spit", "blacklist", {{"targets", "50"}});
    c.expect(known.bypass_rate == 0.0, "the black-listed identity got through");
    c.detail << "grey sequence " << first.status << "/fwd/fwd, identity switching bypass " << fmt(r.bypass_rate, 2)
             << " over " << r.attempted << " calls";
}

void turing_gate(Check& c) {
    auto bots = experiment("bulk_spit", "turing", {{"targets", "100"}});
    auto relay = experiment("captcha_relay", "turing");
    c.expect(bots.attempted > 0 && bots.rejected == bots.attempted, "bot calls not all rejected");
    c.expect(relay.attempted > 0 && relay.bypass_rate >= 0.95, "relay forwarded " + fmt(relay.bypass_rate));
    c.detail << "bots rejected " << bots.rejected << "/" << bots.attempted << ", relay forwarded "
             << relay.forwarded << "/" << relay.attempted;
}

// --- 8 -------------------------------------------------------------------------------

/// Plain SHA-1, used to check pre-images apart from the library.
std::array<std::uint8_t, 20> sha1_reference(const std::vector<std::uint8_t>& data) {
    auto rol = [](std::uint32_t x, int n) { return (x << n) | (x >> (32 - n)); };
    std::uint32_t h[5] = {0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476, 0xC3D2E1F0};
    std::vector<std::uint8_t> m = data;
    std::uint64_t bit_len = static_cast<std::uint64_t>(data.size()) * 8;
    m.push_back(0x80);
    while (m.size() % 64 != 56) m.push_back(0);
    for (int i = 7; i >= 0; --i) m.push_back(static_cast<std::uint8_t>(bit_len >> (8 * i)));
    for (std::size_t off = 0; off < m.size(); off += 64) {
        std::uint32_t w[80];
        for (int i = 0; i < 16; ++i)
            w[i] = std::uint32_t(m[off + 4 * i]) << 24 | std::uint32_t(m[off + 4 * i + 1]) << 16 |
                   std::uint32_t(m[off + 4 * i + 2]) << 8 | m[off + 4 * i + 3];
        for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        std::uint32_t a = h[0], b = h[1], cc = h[2], d = h[3], e = h[4];
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20) f = (b & cc) | (~b & d), k = 0x5A827999;
            else if (i < 40) f = b ^ cc ^ d, k = 0x6ED9EBA1;
            else if (i < 60) f = (b & cc) | (b & d) | (cc & d), k = 0x8F1BBCDC;
            else f = b ^ cc ^ d, k = 0xCA62C1D6;
            std::uint32_t tmp = rol(a, 5) + f + e + k + w[i];
            e = d, d = cc, cc = rol(b, 30), b = a, a = tmp;
        }
        h[0] += a, h[1] += b, h[2] += cc, h[3] += d, h[4] += e;
    }
    std::array<std::uint8_t, 20> out{};
    for (int i = 0; i < 20; ++i) out[i] = static_cast<std::uint8_t>(h[i / 4] >> (24 - 8 * (i % 4)));
    return out;
}

bool leading_bits_equal(const std::array<std::uint8_t, 20>& a, const std::array<std::uint8_t, 20>& b, int bits) {
    for (int i = 0; i < bits; ++i) {
        int byte = i / 8, shift = 7 - i % 8;
        if (((a[byte] >> shift) & 1) != ((b[byte] >> shift) & 1)) return false;
    }
    return true;
}

void puzzle(Check& c) {
    std::mt19937_64 rng(16);
    double total = 0;
    int accepted = 0, reference_ok = 0;
    for (int run = 0; run < 100; ++run) {
        std::vector<std::uint8_t> nonce(16);
        for (auto& b : nonce) b = static_cast<std::uint8_t>(rng());
        auto p = defenses::make_puzzle(nonce, 16);
        auto image = sha1_reference(nonce);
        c.expect(std::equal(image.begin(), image.end(), p.image.begin()), "puzzle image is not SHA-1 of the nonce");
        auto s = defenses::solve_puzzle(p, rng());
        total += static_cast<double>(s.trials);
        accepted += defenses::puzzle_verify(p, s.preimage);
        reference_ok += leading_bits_equal(sha1_reference(s.preimage), image, 16);
    }
    double mean = total / 100;
    c.expect(mean >= 32768 && mean <= 131072, "mean trials " + fmt(mean, 0));
    c.expect(accepted == 100, "verification accepted " + std::to_string(accepted));
    c.expect(reference_ok == 100, "reference check accepted " + std::to_string(reference_ok));
    c.detail << "mean trials " << fmt(mean, 0) << " (2^" << fmt(std::log2(mean), 2) << "), verified " << accepted
             << "/100";
}

// --- 9 ----------------------------------------------------------------------------------

void ledger(Check& c) {
    std::mt19937 rng(9);
    defenses::PaymentLedger l;
    std::vector<std::string> accounts{"alice", "bob", "carol", "dave", "erin", "frank"};
    std::map<std::string, std::int64_t> shadow;
    std::map<std::string, std::tuple<std::string, std::string, std::int64_t>> open;
    std::int64_t total = 0;
    for (const auto& a : accounts) {
        auto d = 1'000 + static_cast<std::int64_t>(rng() % 9'000);
        l.deposit(a, d);
        shadow[a] += d;
        total += d;
    }
    int ops = 0, refused = 0;
    for (; ops < 1000; ++ops) {
        if (open.empty() || rng() % 2) {
            auto payer = accounts[rng() % accounts.size()], payee = accounts[rng() % accounts.size()];
            std::int64_t amount = 1 + static_cast<std::int64_t>(rng() % 3'000);
            try {
                auto id = l.hold(payer, payee, amount);
                c.expect(shadow[payer] >= amount, "hold beyond balance accepted");
                shadow[payer] -= amount;
                open[id] = {payer, payee, amount};
            } catch (const defenses::InsufficientFunds&) {
                ++refused;
                c.expect(shadow[payer] < amount, "affordable hold refused");
            }
        } else {
            auto it = std::next(open.begin(), static_cast<std::ptrdiff_t>(rng() % open.size()));
            bool spit = rng() % 2;
            l.settle(it->first, spit);
            auto& [payer, payee, amount] = it->second;
            shadow[spit ? payee : payer] += amount;
            open.erase(it);
        }
        std::int64_t escrow = 0, sum = 0;
        for (const auto& [id, h] : open) escrow += std::get<2>(h);
        for (const auto& a : accounts) {
            c.expect(l.balance(a) >= 0, "negative balance");
            c.expect(l.balance(a) == shadow[a], "balance of " + a + " differs from the shadow book");
            sum += l.balance(a);
        }
        c.expect(l.escrow() == escrow, "escrow differs");
        c.expect(sum + escrow == total && l.total() == total, "total not conserved");
        if (!c.failures.empty()) break;
    }
    c.detail << ops << " operations (" << refused << " refused holds), total " << l.total() << " = " << total;
}

// --- 10 ---------------------------------------------------------------------------------

std::map<std::string, double> brute_posterior(const ids::CptModel& m, const std::vector<std::size_t>& bins) {
    std::vector<double> score;
    double total = 0;
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
        double s = m.prior[c];
        for (std::size_t v = 0; v < bins.size(); ++v) s *= std::max(m.likelihood[c][v][bins[v]], m.epsilon);
        score.push_back(s);
        total += s;
    }
    std::map<std::string, double> out;
    for (std::size_t c = 0; c < m.classes.size(); ++c) out[m.classes[c]] = score[c] / total;
    return out;
}

void cpt_inference(Check& c) {
    std::mt19937 rng(10);
    std::uniform_real_distribution<double> unit(0, 1);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        ids::CptModel m;
        int nc = 2 + static_cast<int>(rng() % 3), nv = 1 + static_cast<int>(rng() % 3);
        double mass = 0;
        for (int k = 0; k < nc; ++k) {
            m.classes.push_back("K" + std::to_string(k));
            m.prior.push_back(0.05 + unit(rng));
            mass += m.prior.back();
        }
        for (auto& p : m.prior) p /= mass;
        m.likelihood.assign(static_cast<std::size_t>(nc), {});
        for (int v = 0; v < nv; ++v) {
            int nb = 2 + static_cast<int>(rng() % 3);
            ids::CptVariable var{"x" + std::to_string(v), {}};
            for (int b = 0; b <= nb; ++b) var.edges.push_back(b * 4.0);
            m.variables.push_back(var);
            for (auto& per_class : m.likelihood) {
                std::vector<double> row;
                for (int b = 0; b < nb; ++b) row.push_back(unit(rng) < 0.25 ? 0.0 : unit(rng));
                row[0] = std::max(row[0], 0.01);
                per_class.push_back(row);
            }
        }
        for (int draw = 0; draw < 10; ++draw) {
            std::map<std::string, double> values;
            std::vector<std::size_t> bins;
            for (const auto& v : m.variables) {
                auto b = rng() % v.bin_count();
                bins.push_back(b);
                values[v.name] = v.edges[b] + 4.0 * unit(rng) * 0.999;
            }
            auto got = ids::infer_values(values, m);
            for (const auto& [cls, p] : brute_posterior(m, bins)) worst = std::max(worst, std::abs(got[cls] - p));
        }
    }
    c.expect(worst <= 1e-9, "max deviation " + std::to_string(worst));

    auto model = ids::load_cpt(kData / "cpt_default.xml");
    auto v = model.variable_index("distinct_destinations");
    auto spit = model.class_index("Spit");
    double row_max = *std::max_element(model.likelihood[spit][v].begin(), model.likelihood[spit][v].end());
    for (int d = 0; d <= 7; ++d)
        c.expect(model.factor("Spit", "distinct_destinations", d) == model.epsilon, "destinations " + std::to_string(d));
    for (int d = 8; d <= 200; ++d)
        c.expect(model.factor("Spit", "distinct_destinations", d) == row_max, "destinations " + std::to_string(d));
    int max_hits = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::map<std::string, double> values;
        for (const auto& var : model.variables) {
            double hi = std::isinf(var.edges.back()) ? var.edges[var.edges.size() - 2] * 3 + 1 : var.edges.back();
            values[var.name] = var.edges.front() + (hi - var.edges.front()) * unit(rng) * 0.999;
        }
        double best = 0, at8 = 0;
        for (int d = 0; d <= 30; ++d) {
            values["distinct_destinations"] = d;
            auto p = ids::infer_values(values, model).at("Spit");
            best = std::max(best, p);
            if (d == 8) at8 = p;
        }
        max_hits += at8 == best;
    }
    c.expect(max_hits == 50, "8 destinations not the Spit maximum in " + std::to_string(50 - max_hits) + " windows");
    c.detail << "max deviation " << worst << " over 200 queries; Spit factor eps at <=7, " << row_max << " at >=8";
}

// --- 11 --------------------------------------------------------------------------------

void distances(Check& c) {
    ids::Histogram p{{"INVITE", 3}, {"BYE", 1}, {"OPTIONS", 2}};
    double same = ids::hellinger(p, p);
    double disjoint = ids::hellinger({{"a", 1}, {"b", 1}}, {{"c", 5}});
    double worked = ids::hellinger({{"a", 1}}, {{"a", 1}, {"b", 1}});
    c.expect(same == 0, "H(p,p) = " + std::to_string(same));
    c.expect(std::abs(disjoint - 1) < 1e-12, "disjoint " + std::to_string(disjoint));
    c.expect(std::abs(worked - 0.5412) <= 1e-4, "worked example " + std::to_string(worked));
    std::mt19937 rng(11);
    std::normal_distribution<double> g(0, 10);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        auto n = 1 + rng() % 8;
        std::vector<double> a(n), b(n);
        double sq = 0;
        for (std::size_t k = 0; k < n; ++k) {
            a[k] = g(rng), b[k] = g(rng);
            sq += (a[k] - b[k]) * (a[k] - b[k]);
        }
        auto d = ids::mahalanobis(a, b, Eigen::MatrixXd::Identity(static_cast<long>(n), static_cast<long>(n)));
        worst = std::max(worst, std::abs(d - std::sqrt(sq)));
    }
    c.expect(worst <= 1e-12, "mahalanobis deviation " + std::to_string(worst));
    c.detail << "H(p,p)=" << same << ", disjoint=" << fmt(disjoint, 6) << ", worked=" << fmt(worked, 6)
             << ", max |M-E|=" << worst;
}

// --- 12 ----------------------------------------------------------------------------------

struct HoneypotLab {
    net::EventLoop loop;
    net::LoopbackNetwork network{loop};
    defenses::DefenseStores stores;
    std::vector<std::unique_ptr<net::Transport>> transports;
    std::unique_ptr<defenses::DefenseEndpoint> proxy;
    const net::Address proxy_addr{"10.0.0.1", 5060};
    std::set<std::string> assigned;

    HoneypotLab(std::set<std::string> users, bool authenticate) : assigned(std::move(users)) {
        defenses::EndpointOptions o;
        o.authenticate_source = authenticate;
        for (const auto& u : assigned) o.users[u] = {true, 200};
        ids::HoneypotSpace space;
        space.assigned = assigned;
        defenses::Chain chain;
        chain.add(std::make_unique<defenses::HoneypotGate>(space, stores.honeypot));
        proxy = std::make_unique<defenses::DefenseEndpoint>(bind(proxy_addr), stores, std::move(chain), o);
    }

    net::Transport& bind(const net::Address& a) {
        transports.push_back(network.bind(a));
        return *transports.back();
    }
};

engine::ShootPlan call_plan(const SipUri& caller, const std::vector<SipUri>& targets, net::Address local,
                            net::Address proxy, engine::Rate rate, int calls) {
    engine::ShootPlan plan;
    plan.entries.push_back({attacks::stock_bundle(attacks::spit_call_scenario({200, true, false})), rate, calls, "spit"});
    plan.remote = proxy;
    plan.local = local;
    plan.callers = scenario::InjectionTable({engine::caller_row(caller)});
    std::vector<std::vector<std::string>> rows;
    for (const auto& t : targets) rows.push_back(engine::target_row(t));
    plan.targets = scenario::InjectionTable(rows);
    return plan;
}

void honeypot(Check& c) {
    std::set<std::string> users;
    std::mt19937 rng(12);
    while (users.size() < 100) users.insert(std::to_string(5'550'000 + rng() % 1'000) + "@example.com");
    users.insert("victim@example.com");

    // full scan
    std::size_t quarantined_ok = 0, unassigned = 0;
    {
        HoneypotLab lab(users, false);
        auto& t = lab.bind({"10.6.6.1", 5060});
        attacks::ScanOptions so;
        so.rate = engine::Rate::per_second(100);
        attacks::scan_permanent("example.com", attacks::UserRange::parse("5550000-5550999"),
                                attacks::ProbeMethod::Options, t, lab.proxy_addr, so);
        std::set<std::string> quarantined, logged;
        for (const auto& r : lab.proxy->records())
            if (r.outcome == defenses::RecordOutcome::Quarantined) quarantined.insert(r.callee);
        for (const auto& r : lab.stores.honeypot.records()) logged.insert(SipUri::parse(r.target_uri).user + "@example.com");
        std::set<std::string> expected;
        for (const auto& u : attacks::UserRange::parse("5550000-5550999").users())
            if (!users.count(u + "@example.com")) expected.insert(u + "@example.com");
        unassigned = expected.size();
        c.expect(quarantined == expected, "quarantined set differs from the unassigned probes");
        c.expect(logged == expected, "honeypot log differs from the unassigned probes");
        c.expect(lab.proxy->records().size() == 1000, "scan records " + std::to_string(lab.proxy->records().size()));
        quarantined_ok = quarantined.size();
    }

    // a caller that only calls assigned numbers
    std::size_t honest_forwarded = 0;
    {
        HoneypotLab lab(users, false);
        std::vector<SipUri> targets;
        for (const auto& u : users) targets.push_back(SipUri::parse("sip:" + u));
        auto& t = lab.bind({"10.1.0.1", 5060});
        auto caller = SipUri::parse("sip:friend@partner.example");
        engine::execute(call_plan(caller, targets, {"10.1.0.1", 5060}, lab.proxy_addr, engine::Rate::per_second(20), 1000),
                        t);
        for (const auto& r : lab.proxy->records()) honest_forwarded += r.outcome == defenses::RecordOutcome::Forwarded;
        c.expect(!lab.stores.honeypot.contains_source("friend@partner.example"), "assigned-only caller was logged");
        c.expect(lab.stores.honeypot.size() == 0, "honeypot log not empty");
        c.expect(honest_forwarded == 1000, "forwarded " + std::to_string(honest_forwarded) + "/1000");
    }

    // hijack, then SPIT under the victim's name to unassigned numbers
    std::set<std::string> sources;
    std::size_t logged = 0, blocked_without_hijack = 0;
    for (bool hijack : {false, true}) {
        HoneypotLab lab(users, true);
        auto victim = SipUri::parse("sip:victim@example.com");
        net::Address legit{"10.0.0.50", 5060}, race{"10.6.6.16", 5060}, spit{"10.6.6.15", 5070};
        engine::Engine good(lab.bind(legit)), bad(lab.bind(race)), spitter(lab.bind(spit));
        good.start(attacks::registration_race_plan(attacks::registration_race(victim, legit, 3'600'000), lab.proxy_addr,
                                                   legit));
        lab.loop.run_until(50);
        if (hijack)
            bad.start(attacks::registration_race_plan(attacks::registration_race(victim, spit, 15'000), lab.proxy_addr,
                                                      race));
        lab.loop.run_until(2'000);
        std::vector<SipUri> targets;
        for (int k = 0; targets.size() < 20; ++k) {
            auto u = std::to_string(5'550'000 + k) + "@example.com";
            if (!users.count(u)) targets.push_back(SipUri::parse("sip:" + u));
        }
        spitter.start(call_plan(victim, targets, spit, lab.proxy_addr, engine::Rate::per_second(2), 20));
        lab.loop.run_while([&] { return !spitter.finished(); });
        good.stop();
        bad.stop();
        lab.loop.run_while([&] { return !good.finished() || !bad.finished(); });
        if (!hijack) {
            for (const auto& r : lab.proxy->records())
                blocked_without_hijack += r.outcome == defenses::RecordOutcome::Rejected && r.caller == "victim@example.com";
            c.expect(lab.stores.honeypot.size() == 0, "unauthenticated SPIT reached the honeypot");
            continue;
        }
        sources = lab.stores.honeypot.sources();
        logged = lab.stores.honeypot.size();
        for (const auto& r : lab.stores.honeypot.records())
            c.expect(r.source_addr == spit.str(), "log entry from " + r.source_addr);
    }
    c.expect(blocked_without_hijack == 20, "without the hijack " + std::to_string(blocked_without_hijack) + "/20 blocked");
    c.expect(logged == 20, "honeypot logged " + std::to_string(logged) + "/20 hijacked calls");
    c.expect(sources == std::set<std::string>{"victim@example.com"}, "log does not blame the victim");
    c.detail << "scan quarantined " << quarantined_ok << "/" << unassigned << " unassigned; honest 0/" << honest_forwarded
             << " logged; hijacked SPIT logged " << logged << " calls as "
             << (sources.empty() ? std::string("nobody") : *sources.begin());
}

// --- 13 ------------------------------------------------------------------------------------

std::string without_runtime(std::string json) {
    for (auto at = json.find("\"runtime_ms\""); at != std::string::npos; at = json.find("\"runtime_ms\"", at))
        json.erase(at, json.find_first_of(",\n}", at) - at);
    return json;
}

void baseline_matrix(Check& c) {
    auto spec = harness::load_matrix_spec(kData / "experiments.xml");
    auto a = harness::baseline_matrix(spec.attacks, spec.defenses, spec.seed, spec.repetitions);
    auto b = harness::baseline_matrix(spec.attacks, spec.defenses, spec.seed, spec.repetitions);
    c.expect(without_runtime(harness::to_json(a)) == without_runtime(harness::to_json(b)), "matrix json differs");
    c.expect(harness::to_csv(a.cells) == harness::to_csv(b.cells), "matrix csv differs");
    int rows_ok = 0;
    for (const auto& d : a.defenses) {
        double best = 0;
        for (const auto& at : a.attacks) best = std::max(best, a.cell(d, at).bypass_rate);
        rows_ok += best >= 0.95;
        c.expect(best >= 0.95, d + " row has no bypass");
    }
    for (const auto& cell : a.cells) {
        c.expect(cell.complete, cell.name + " incomplete: " + cell.error);
        c.expect(cell.accounting_holds(), cell.name + " counts do not add up");
    }
    const std::pair<const char*, const char*> counters[] = {
        {"scan", "honeypot"}, {"bulk_spit", "ids"}, {"bulk_spit", "blacklist"}};
    std::ostringstream pairs;
    for (const auto& [attack, defense] : counters) {
        double det = a.cell(defense, attack).detection_rate;
        c.expect(det >= 0.95, std::string(attack) + " vs " + defense + " detection " + fmt(det));
        pairs << " " << attack << "/" << defense << "=" << fmt(det, 3);
    }
    c.detail << a.defenses.size() << "x" << a.attacks.size() << " cells, " << rows_ok << "/" << a.defenses.size()
             << " rows with a bypass; detection" << pairs.str() << "; reruns identical";
}

// --- 14 -----------------------------------------------------------------------------------

void campaign_duration(Check& c) {
    double h = engine::campaign_duration_hours(1000, 5.0);
    double h2 = engine::campaign_duration_hours(1000, engine::Rate::per_hour(5));
    c.expect(h == 200.0 && h2 == 200.0, "hours " + fmt(h));
    c.expect(std::lround(h / 24) == 8, "days " + fmt(h / 24));
    c.detail << fmt(h, 1) << " h = " << fmt(h / 24, 2) << " days";
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
        {"parser round-trip", parser_round_trip},
        {"scan-oracle equivalence", scan_oracle},
        {"exit codes and success rate", exit_codes},
        {"rate discipline", rate_discipline},
        {"fingerprint bypass", fingerprint_bypass},
        {"list semantics", list_semantics},
        {"turing gate", turing_gate},
        {"puzzle", puzzle},
        {"ledger conservation", ledger},
        {"cpt inference", cpt_inference},
        {"distances", distances},
        {"honeypot", honeypot},
        {"baseline matrix", baseline_matrix},
        {"campaign duration", campaign_duration},
    };
    int failed = 0, n = 0;
    for (const auto& [name, fn] : criteria) {
        Check c;
        try {
            fn(c);
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("exception: ") + e.what());
        }
        bool ok = c.failures.empty();
        failed += !ok;
        std::cout << (ok ? "PASS" : "FAIL") << " " << ++n << " " << name << ": " << c.detail.str() << "\n";
        for (const auto& f : c.failures) std::cout << "     " << f << "\n";
        std::cout.flush();
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
    return failed;
}
