#include <doctest.h>

#include "psnap/protocol.hpp"

using namespace psnap;

TEST_CASE("message kinds classify into the four reporting categories") {
    CHECK(classify(Kind::App, false) == Category::Application);
    CHECK(classify(Kind::Marker, false) == Category::Marker);
    CHECK(classify(Kind::RbMarker, false) == Category::Marker);

    for (Kind k : {Kind::MyDS, Kind::Out, Kind::Fin, Kind::RbMyDS, Kind::RbOut,
                   Kind::RbFin})
        CHECK(classify(k, false) == Category::Normal);

    for (Kind k : {Kind::Link, Kind::Ack, Kind::Deny, Kind::Accept})
        CHECK(classify(k, false) == Category::Collision);

    for (Kind k : {Kind::Check, Kind::LocalTerm, Kind::GlobalTerm})
        CHECK(classify(k, false) == Category::InitiatorNetwork);
}

TEST_CASE("forwarding flips baseline bookkeeping kinds to initiator-network") {
    for (Kind k : {Kind::NewInit, Kind::CssCombine, Kind::CssCompInit,
                   Kind::CssInitInfo}) {
        CHECK(classify(k, false) == Category::Collision);
        CHECK(classify(k, true) == Category::InitiatorNetwork);
    }
    CHECK(classify(Kind::CssDSinfo, false) == Category::Normal);
    CHECK(classify(Kind::CssDSinfo, true) == Category::InitiatorNetwork);
}

TEST_CASE("kind names round-trip") {
    for (int i = 0; i <= static_cast<int>(Kind::CssInitInfo); ++i) {
        Kind k = static_cast<Kind>(i);
        auto parsed = kind_from_name(kind_name(k));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == k);
    }
    CHECK(!kind_from_name("NoSuchKind").has_value());
}

TEST_CASE("instance ids order by initiator then sequence") {
    InstanceId a{1, 1}, b{1, 2}, c{2, 1};
    CHECK(a < b);
    CHECK(b < c);
    CHECK(a == (InstanceId{1, 1}));
}
