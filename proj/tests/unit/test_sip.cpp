#include <gtest/gtest.h>

#include <random>

#include "sxsm/sip/fingerprint.hpp"
#include "sxsm/sip/message.hpp"
#include "sxsm/sip/uri.hpp"

using namespace sxsm::sip;

TEST(Uri, ParsesPermanentAndTemporary) {
    auto perm = SipUri::parse("sip:someone@example.com");
    EXPECT_EQ(perm.user, "someone");
    EXPECT_EQ(perm.host, "example.com");
    EXPECT_TRUE(perm.is_permanent());
    EXPECT_FALSE(perm.is_temporary());

    auto temp = SipUri::parse("sip:someone@192.0.2.5:5062;transport=udp");
    EXPECT_TRUE(temp.is_temporary());
    ASSERT_TRUE(temp.port);
    EXPECT_EQ(*temp.port, 5062);
    EXPECT_EQ(temp.params, ";transport=udp");
    EXPECT_EQ(temp.str(), "sip:someone@192.0.2.5:5062;transport=udp");
}

TEST(Uri, RejectsGarbage) {
    EXPECT_THROW(SipUri::parse("mailto:x@y"), UriError);
    EXPECT_THROW(SipUri::parse("sip:a@b:99999"), UriError);
    EXPECT_FALSE(SipUri::try_parse("nonsense").has_value());
}

TEST(Uri, HostKinds) {
    EXPECT_EQ(classify_host("example.com"), HostKind::Domain);
    EXPECT_EQ(classify_host("10.0.0.1"), HostKind::Ipv4);
    EXPECT_EQ(classify_host("300.1.1.1"), HostKind::Invalid);
}

TEST(Uri, FromHeaderValue) {
    auto u = uri_from_header_value("Alice <sip:alice@Example.com>;tag=1");
    ASSERT_TRUE(u);
    EXPECT_EQ(u->identity(), "alice@example.com");
    auto v = uri_from_header_value("sip:bob@example.com;tag=2");
    ASSERT_TRUE(v);
    EXPECT_EQ(v->user, "bob");
    EXPECT_EQ(v->host, "example.com");
}

TEST(Parse, MinimalInvite) {
    auto m = parse(
        "INVITE sip:5550001@example.com SIP/2.0\r\nFrom: a\r\nTo: b\r\nCall-ID: x\r\nCSeq: 1 INVITE\r\nVia: v\r\n\r\n");
    ASSERT_TRUE(m.is_request());
    EXPECT_EQ(m.method(), "INVITE");
    ASSERT_EQ(m.headers.size(), 5u);
    EXPECT_EQ(m.headers[0].name, "From");
    EXPECT_EQ(m.headers[4].name, "Via");
    EXPECT_TRUE(is_strictly_valid(m));
}

TEST(Parse, MinimalResponse) {
    auto m = parse("SIP/2.0 404 Not Found\r\n\r\n");
    ASSERT_TRUE(m.is_response());
    EXPECT_EQ(m.status(), 404);
    EXPECT_EQ(std::get<StatusLine>(m.start).reason, "Not Found");
    EXPECT_TRUE(m.headers.empty());
}

TEST(Parse, BareLfAccepted) {
    auto m = parse("OPTIONS sip:a@b.c SIP/2.0\nCall-ID: 1\n\n");
    EXPECT_EQ(m.call_id(), "1");
    EXPECT_EQ(serialize(m), "OPTIONS sip:a@b.c SIP/2.0\r\nCall-ID: 1\r\n\r\n");
}

TEST(Parse, Errors) {
    try {
        parse("HELLO\r\n\r\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.kind(), ParseErrorKind::MalformedStartLine);
        EXPECT_EQ(e.line(), 1u);
    }
    try {
        parse("SIP/2.0 200 OK\r\nVia: a\r\nbroken line\r\n\r\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.kind(), ParseErrorKind::MalformedHeader);
        EXPECT_EQ(e.line(), 3u);
    }
    try {
        parse("SIP/2.0 200 OK\r\nContent-Length: 10\r\n\r\nabc");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.kind(), ParseErrorKind::BodyLengthMismatch);
    }
    EXPECT_THROW(parse("SIP/2.0 99 Low\r\n\r\n"), ParseError);
}

TEST(Serialize, EmptyResponse) {
    EXPECT_EQ(serialize(SipMessage::response(200, "OK")), "SIP/2.0 200 OK\r\n\r\n");
}

TEST(Serialize, KeepsOrder) {
    auto m = SipMessage::request("INVITE", SipUri::parse("sip:a@b.c"));
    m.add_header("Via", "v").add_header("From", "f");
    auto wire = serialize(m);
    EXPECT_LT(wire.find("Via: v"), wire.find("From: f"));
}

TEST(Serialize, InsertsContentLength) {
    auto m = SipMessage::request("MESSAGE", SipUri::parse("sip:a@b.c"));
    m.add_header("Via", "v");
    m.body = "abcd";
    auto wire = serialize(m);
    EXPECT_NE(wire.find("Content-Length: 4\r\n\r\nabcd"), std::string::npos);
}

TEST(Strict, MissingMandatoryHeaders) {
    auto m = SipMessage::request("OPTIONS", SipUri::parse("sip:a@b.c"));
    m.add_header("Via", "v").add_header("To", "t").add_header("Call-ID", "c");
    auto v = strict_violations(m);
    EXPECT_EQ(v, (std::vector<std::string>{"From", "CSeq"}));
    EXPECT_TRUE(is_strictly_valid(SipMessage::response(200, "OK")));
}

TEST(Headers, CompactAliasLookupWithoutExpansion) {
    auto m = parse("SIP/2.0 200 OK\r\nv: SIP/2.0/UDP x\r\ni: abc\r\n\r\n");
    EXPECT_EQ(m.call_id(), "abc");
    EXPECT_EQ(fingerprint_of(m).header_names, (std::vector<std::string>{"v", "i"}));
}

TEST(Fingerprint, NamesOnly) {
    auto a = parse("SIP/2.0 200 OK\r\nVia: 1\r\nMax-Forwards: 70\r\nFrom: x\r\nVia: 2\r\n\r\n");
    auto fp = fingerprint_of(a);
    EXPECT_EQ(fp.header_names, (std::vector<std::string>{"via", "max-forwards", "from", "via"}));
    auto b = a;
    b.headers[0].value = "other";
    b.body = "xyz";
    EXPECT_TRUE(fingerprint_of(b).same_layout(fp));
}

TEST(ClassifyResponse, Convention) {
    EXPECT_EQ(classify_response(404), UriStatus::Unassigned);
    EXPECT_EQ(classify_response(480), UriStatus::AssignedOffline);
    EXPECT_EQ(classify_response(200), UriStatus::AssignedOnline);
    EXPECT_EQ(classify_response(180), UriStatus::AssignedOnline);
    EXPECT_EQ(classify_response(486), UriStatus::Indeterminate);
    EXPECT_THROW(classify_response(99), DomainError);
    EXPECT_THROW(classify_response(700), DomainError);
}

TEST(ClassifyResponse, TotalOverRange) {
    for (int s = 100; s <= 699; ++s) EXPECT_NO_THROW(classify_response(s));
}

namespace {

std::string random_token(std::mt19937& rng, std::size_t min_len, std::size_t max_len) {
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-.";
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string s;
    auto n = len(rng);
    s += "abcdefghijklmnopqrstuvwxyz"[rng() % 26];
    for (std::size_t i = 1; i < n; ++i) s += alphabet[pick(rng)];
    return s;
}

SipMessage random_message(std::mt19937& rng) {
    static const char* methods[] = {"INVITE", "ACK", "BYE", "CANCEL", "OPTIONS", "REGISTER", "INFO", "REFER"};
    static const char* names[] = {"Via", "From", "To", "Call-ID", "CSeq", "Contact", "Max-Forwards",
                                  "User-Agent", "Allow", "Alert-Info", "X-Custom", "v", "f", "t", "i"};
    SipMessage m;
    if (rng() % 2) {
        SipUri uri;
        uri.user = random_token(rng, 1, 8);
        uri.host = rng() % 2 ? random_token(rng, 3, 10) + ".com" : "10.0." + std::to_string(rng() % 256) + ".7";
        if (rng() % 3 == 0) uri.port = static_cast<std::uint16_t>(1 + rng() % 65535);
        m = SipMessage::request(methods[rng() % 8], uri);
    } else {
        m = SipMessage::response(100 + static_cast<int>(rng() % 600), random_token(rng, 0, 12) + " ok");
    }
    auto count = rng() % 12;
    for (std::size_t i = 0; i < count; ++i) {
        auto value = random_token(rng, 1, 20) + (rng() % 2 ? " ;tag=" + random_token(rng, 1, 6) : "");
        m.add_header(names[rng() % 15], value);
    }
    if (rng() % 3 == 0) {
        m.body = "v=0\r\no=" + random_token(rng, 1, 30) + "\r\n";
        m.add_header("Content-Length", std::to_string(m.body.size()));
    }
    return m;
}

}  // namespace

TEST(RoundTrip, GeneratedMessagesSurviveParseSerialize) {
    std::mt19937 rng(7);
    for (int i = 0; i < 300; ++i) {
        auto m = random_message(rng);
        auto wire = serialize(m);
        auto back = parse(wire);
        EXPECT_EQ(back, m) << wire;
        EXPECT_EQ(serialize(back), wire);
    }
}

TEST(RoundTrip, PreservesUnusualSpacing) {
    std::string wire = "SIP/2.0 180 Ringing\r\nVia:x\r\nFrom :  y\r\nTo:\tz\r\n\r\n";
    EXPECT_EQ(serialize(parse(wire)), wire);
}

TEST(RoundTrip, FoldedHeader) {
    std::string wire = "SIP/2.0 200 OK\r\nSubject: first\r\n second\r\n\r\n";
    auto m = parse(wire);
    ASSERT_EQ(m.headers.size(), 1u);
    EXPECT_EQ(serialize(m), wire);
}
