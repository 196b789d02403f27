#include <doctest.h>

#include <set>

#include "teffect/common.hpp"

using namespace teffect;

TEST_CASE("iso dates parse and round trip") {
    Date d = Date::parse_iso("2022-07-23");
    CHECK(d.year == 2022);
    CHECK(d.month == 7);
    CHECK(d.day == 23);
    CHECK(d.iso() == "2022-07-23");
    CHECK(Date::from_serial(d.serial()) == d);
    CHECK(Date::parse_iso("1970-01-01").serial() == 0);
    CHECK(Date::parse_iso("2000-02-29").iso() == "2000-02-29");  // leap year
}

TEST_CASE("bad dates are rejected") {
    CHECK_THROWS_AS(Date::parse_iso("2021-02-29"), ValidationError);
    CHECK_THROWS_AS(Date::parse_iso("2021-13-01"), ValidationError);
    CHECK_THROWS_AS(Date::parse_iso("07/23/2022"), ValidationError);
    CHECK_THROWS_AS(Date::parse_iso("2022-7-23"), ValidationError);
    CHECK_THROWS_AS(Date::parse_iso(""), ValidationError);
}

TEST_CASE("date ordering follows the calendar") {
    CHECK(Date::parse_iso("2022-01-31") < Date::parse_iso("2022-02-01"));
    CHECK(Date::parse_iso("2021-12-31") < Date::parse_iso("2022-01-01"));
}

TEST_CASE("rng streams are deterministic and reasonably distributed") {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r(42);
    double sum = 0.0, sum_sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        sum += x;
        sum_sq += x * x;
    }
    CHECK(std::fabs(sum / n) < 0.03);
    CHECK(std::fabs(sum_sq / n - 1.0) < 0.05);

    std::set<uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        uint64_t v = r.uniform_int(10);
        CHECK(v < 10);
        seen.insert(v);
    }
    CHECK(seen.size() == 10);
}

TEST_CASE("derived seeds differ by stream") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(1, 5) == derive_seed(1, 5));
}

TEST_CASE("parallel_for covers every index once") {
    std::vector<int> hits(1000, 0);
    parallel_for(1000, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
}

TEST_CASE("round_sig pins significant digits") {
    CHECK(round_sig(123456.789, 6) == doctest::Approx(123457.0));
    CHECK(round_sig(0.00123456789, 6) == doctest::Approx(0.00123457));
    CHECK(round_sig(-9.87654321, 3) == doctest::Approx(-9.88));
    CHECK(round_sig(0.0, 6) == 0.0);
}
