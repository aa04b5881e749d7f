#include "coinvent/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "coinvent/errors.hpp"

namespace coinvent {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kKmPerDegree = kEarthRadiusKm * kDegToRad;
}  // namespace

void validate(const GeoPoint& p) {
  if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0)) {
    throw DomainError("coordinates out of range: lat=" + std::to_string(p.lat) + " lon=" + std::to_string(p.lon));
  }
}

namespace {
double haversineKm(const GeoPoint& p, const GeoPoint& q) {
  const double phi1 = p.lat * kDegToRad;
  const double phi2 = q.lat * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (q.lon - p.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = std::min(1.0, s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}
}  // namespace

double greatCircle(const GeoPoint& p, const GeoPoint& q) {
  validate(p);
  validate(q);
  return haversineKm(p, q);
}

SpatialIndex::SpatialIndex(std::span<const GeoPoint> points, double bucketKm)
    : points_(points.begin(), points.end()), bucketDeg_(std::max(bucketKm, 1e-3) / kKmPerDegree) {
  for (std::size_t k = 0; k < points_.size(); ++k) {
    validate(points_[k]);
    buckets_[key(row(points_[k].lat), col(points_[k].lon))].push_back(k);
  }
}

long SpatialIndex::row(double lat) const { return static_cast<long>(std::floor(lat / bucketDeg_)); }
long SpatialIndex::col(double lon) const { return static_cast<long>(std::floor(lon / bucketDeg_)); }

std::vector<std::size_t> SpatialIndex::within(const GeoPoint& center, double radiusKm) const {
  validate(center);
  std::vector<std::size_t> out;
  auto accept = [&](std::size_t k) {
    if (haversineKm(center, points_[k]) < radiusKm) out.push_back(k);
  };

  const double angular = radiusKm / kEarthRadiusKm;
  const double dlat = radiusKm / kKmPerDegree;
  const double cosLat = std::cos(center.lat * kDegToRad);
  const bool nearPole = std::abs(center.lat) + dlat >= 89.0 || angular >= std::numbers::pi / 2.0;
  double dlon = 360.0;
  if (!nearPole) dlon = std::asin(std::min(1.0, std::sin(angular) / cosLat)) / kDegToRad * 1.01;
  const bool wraps = center.lon - dlon < -180.0 || center.lon + dlon > 180.0;

  if (nearPole || wraps) {
    for (std::size_t k = 0; k < points_.size(); ++k) accept(k);
    return out;
  }
  // Lat/lon bounding box of the search disc, widened by one bucket.
  const long r0 = row(center.lat - dlat) - 1, r1 = row(center.lat + dlat) + 1;
  const long c0 = col(center.lon - dlon) - 1, c1 = col(center.lon + dlon) + 1;
  if (static_cast<std::size_t>((r1 - r0 + 1) * (c1 - c0 + 1)) > buckets_.size()) {
    for (const auto& [k, members] : buckets_) {
      for (std::size_t m : members) accept(m);
    }
  } else {
    for (long r = r0; r <= r1; ++r) {
      for (long c = c0; c <= c1; ++c) {
        auto it = buckets_.find(key(r, c));
        if (it == buckets_.end()) continue;
        for (std::size_t m : it->second) accept(m);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::pair<std::size_t, double>> SpatialIndex::nearest(const GeoPoint& center, double maxKm) const {
  std::optional<std::pair<std::size_t, double>> best;
  for (std::size_t k : within(center, maxKm)) {
    const double d = haversineKm(center, points_[k]);
    if (!best || d < best->second) best = std::pair{k, d};
  }
  return best;
}

UaAssignment assignUA(std::span<const GeoPoint> locations, std::span<const UrbanAgglomeration> uas,
                      double bufferKm) {
  std::vector<GeoPoint> cells;
  std::vector<std::size_t> owner;
  for (std::size_t u = 0; u < uas.size(); ++u) {
    for (const auto& c : uas[u].cells) {
      cells.push_back(c);
      owner.push_back(u);
    }
  }
  const SpatialIndex index(cells, std::max(bufferKm, 1.0));
  UaAssignment out;
  out.ua.resize(locations.size());
  // The buffer boundary itself counts as inside.
  const double reach = bufferKm * (1.0 + 1e-12) + 1e-9;
  for (std::size_t k = 0; k < locations.size(); ++k) {
    if (auto hit = index.nearest(locations[k], reach)) {
      out.ua[k] = owner[hit->first];
    } else {
      ++out.rural;
    }
  }
  return out;
}

double radiusAggregate(std::span<const WeightedPoint> points, const GeoPoint& center, double radiusKm) {
  if (!(radiusKm > 0.0)) throw DomainError("radius must be positive");
  double sum = 0.0;
  for (const auto& p : points) {
    if (greatCircle(center, p.at) < radiusKm) sum += p.weight;
  }
  return sum;
}

namespace {
std::vector<GeoPoint> locationsOf(const std::vector<WeightedPoint>& points) {
  std::vector<GeoPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.at);
  return out;
}
}  // namespace

RadiusAggregator::RadiusAggregator(std::vector<WeightedPoint> points, double radiusKm)
    : points_(std::move(points)), locations_(locationsOf(points_)), radius_(radiusKm), index_(locations_, std::max(radiusKm, 0.5)) {}

double RadiusAggregator::operator()(const GeoPoint& center, double radiusKm) const {
  if (!(radiusKm > 0.0)) throw DomainError("radius must be positive");
  double sum = 0.0;
  for (std::size_t k : index_.within(center, radiusKm)) sum += points_[k].weight;
  return sum;
}

double RadiusAggregator::operator()(const GeoPoint& center) const {
  return (*this)(center, radius_);
}

std::vector<WeightedPoint> allocatedRnD(const std::unordered_map<std::string, double>& industryRnD,
                                       std::span<const RnDEstablishment> establishments) {
  std::unordered_map<std::string, double> shareSum;
  for (const auto& e : establishments) {
    if (e.employmentShare < 0.0) throw DataError("negative employment share in industry " + e.industry);
    if ((shareSum[e.industry] += e.employmentShare) > 1.0 + 1e-9) {
      throw DataError("employment shares of industry " + e.industry + " sum to more than one");
    }
  }
  for (const auto& [industry, v] : industryRnD) {
    if (v < 0.0) throw DataError("negative R&D expenditure for industry " + industry);
  }
  std::vector<WeightedPoint> out;
  out.reserve(establishments.size());
  for (const auto& e : establishments) {
    validate(e.at);
    auto it = industryRnD.find(e.industry);
    if (it == industryRnD.end()) throw DataError("no R&D expenditure for industry " + e.industry);
    out.push_back({e.at, it->second * e.employmentShare});
  }
  return out;
}

double allocateRnD(const std::unordered_map<std::string, double>& industryRnD,
                   std::span<const RnDEstablishment> establishments, const GeoPoint& center, double radiusKm) {
  return radiusAggregate(allocatedRnD(industryRnD, establishments), center, radiusKm);
}

std::vector<RnDEstablishment> employmentShares(std::span<const Establishment> establishments) {
  std::unordered_map<std::string, double> total;
  for (const auto& e : establishments) {
    if (e.employment < 0.0) throw DataError("negative employment at establishment " + e.id);
    total[e.industry] += e.employment;
  }
  std::vector<RnDEstablishment> out;
  out.reserve(establishments.size());
  for (const auto& e : establishments) {
    const double t = total[e.industry];
    out.push_back(RnDEstablishment{e.industry, t > 0.0 ? e.employment / t : 0.0, e.at});
  }
  return out;
}

}  // namespace coinvent
