#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "coinvent/errors.hpp"
#include "coinvent/geo.hpp"

using namespace coinvent;

namespace {
// Spherical law of cosines: a different formula on the same sphere.
double cosineDistance(GeoPoint p, GeoPoint q) {
  const double r = std::numbers::pi / 180.0;
  const double c = std::sin(p.lat * r) * std::sin(q.lat * r) +
                   std::cos(p.lat * r) * std::cos(q.lat * r) * std::cos((q.lon - p.lon) * r);
  return kEarthRadiusKm * std::acos(std::clamp(c, -1.0, 1.0));
}

GeoPoint offsetKm(GeoPoint p, double northKm, double eastKm) {
  const double degLat = 180.0 / (std::numbers::pi * kEarthRadiusKm);
  return {p.lat + northKm * degLat, p.lon + eastKm * degLat / std::cos(p.lat * std::numbers::pi / 180.0)};
}
}  // namespace

TEST_SUITE("geo") {
  TEST_CASE("great-circle distances") {
    const GeoPoint p{35.0, 135.0};
    CHECK(greatCircle(p, p) == 0.0);
    CHECK(greatCircle({0, 0}, {0, 180}) == doctest::Approx(std::numbers::pi * kEarthRadiusKm).epsilon(1e-12));
    const GeoPoint q{35.0, 136.0};
    CHECK(greatCircle(p, q) == doctest::Approx(cosineDistance(p, q)).epsilon(1e-3));
    CHECK(greatCircle(p, q) == doctest::Approx(91.09).epsilon(1e-3));
    CHECK_THROWS_AS(validate({91.0, 0.0}), DomainError);
    CHECK_THROWS_AS(validate({0.0, 181.0}), DomainError);
  }

  TEST_CASE("UA assignment: inside, nearest, rural") {
    const GeoPoint a{35.0, 135.0};
    const GeoPoint b = offsetKm(a, 0, 10.0);
    std::vector<UrbanAgglomeration> uas{{"A", {a}, 0}, {"B", {b}, 0}};
    const std::vector<GeoPoint> people{a, offsetKm(a, 0, 3.0), offsetKm(a, 11.0, 0), offsetKm(a, -30, -30)};
    const auto out = assignUA(people, uas);
    CHECK(out.ua[0] == 0u);
    CHECK(out.ua[1] == 0u);
    CHECK_FALSE(out.ua[2].has_value());
    CHECK_FALSE(out.ua[3].has_value());
    CHECK(out.rural == 2);
  }

  TEST_CASE("radius aggregation: index agrees with linear scan") {
    const GeoPoint c{35.0, 135.0};
    const std::vector<WeightedPoint> one{{c, 5.0}};
    CHECK(radiusAggregate(one, c, 1.0) == 5.0);
    CHECK(radiusAggregate(one, offsetKm(c, 2, 0), 1.0) == 0.0);

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> km(-15, 15), w(0, 10);
    std::vector<WeightedPoint> pts;
    for (int k = 0; k < 100; ++k) pts.push_back({offsetKm(c, km(rng), km(rng)), w(rng)});
    for (double r : {0.5, 1.0, 5.0, 20.0}) {
      const RadiusAggregator agg(pts, r);
      for (int q = 0; q < 50; ++q) {
        const GeoPoint center = offsetKm(c, km(rng), km(rng));
        double scan = 0;
        for (const auto& p : pts) scan += cosineDistance(center, p.at) < r ? p.weight : 0.0;
        CHECK(agg(center) == doctest::Approx(scan).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("R&D allocation by employment share") {
    const GeoPoint c{35.0, 135.0};
    std::unordered_map<std::string, double> rnd{{"M1", 100.0}, {"M2", 40.0}, {"M3", 10.0}};
    const std::vector<RnDEstablishment> one{{"M1", 0.3, c}};
    CHECK(allocateRnD(rnd, one, c, 1.0) == doctest::Approx(30.0));
    CHECK(allocateRnD(rnd, one, offsetKm(c, 5, 0), 1.0) == 0.0);

    std::vector<Establishment> raw{{"e1", 1, "M1", 30, 1, c},
                                   {"e2", 1, "M1", 70, 1, offsetKm(c, 3, 0)},
                                   {"e3", 1, "M2", 10, 1, offsetKm(c, 0.5, 0)},
                                   {"e4", 1, "M2", 30, 1, offsetKm(c, 0, 0.5)},
                                   {"e5", 1, "M3", 5, 1, offsetKm(c, 0, -4)}};
    const auto shares = employmentShares(raw);
    // Within 1 km: e1 (0.3 of M1), e3 (0.25 of M2), e4 (0.75 of M2).
    CHECK(allocateRnD(rnd, shares, c, 1.0) == doctest::Approx(100 * 0.3 + 40 * 0.25 + 40 * 0.75));
    CHECK(allocateRnD(rnd, shares, c, 10.0) == doctest::Approx(100 + 40 + 10));

    std::unordered_map<std::string, double> missing{{"M1", 1.0}};
    CHECK_THROWS_AS(allocateRnD(missing, shares, c, 10.0), DataError);
    std::unordered_map<std::string, double> negative{{"M1", -1.0}, {"M2", 1.0}, {"M3", 1.0}};
    CHECK_THROWS_AS(allocateRnD(negative, shares, c, 10.0), DataError);
  }
}
