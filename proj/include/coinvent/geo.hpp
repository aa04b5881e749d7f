#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "coinvent/records.hpp"

namespace coinvent {

inline constexpr double kEarthRadiusKm = 6371.0088;

/// Throws DomainError when lat/lon fall outside [-90, 90] x [-180, 180].
void validate(const GeoPoint& p);

/// Haversine distance in km on a sphere of radius kEarthRadiusKm.
double greatCircle(const GeoPoint& p, const GeoPoint& q);

struct UrbanAgglomeration {
  std::string id;
  std::vector<GeoPoint> cells;  // 1 km cell centroids
  double population = 0.0;
};

/// Bucketed index over points for radius queries. Query results are exact:
/// candidates are filtered by great-circle distance.
class SpatialIndex {
 public:
  SpatialIndex(std::span<const GeoPoint> points, double bucketKm);

  /// Indices of points with distance strictly less than `radiusKm`.
  std::vector<std::size_t> within(const GeoPoint& center, double radiusKm) const;
  /// Nearest point and its distance, or nullopt when the index is empty.
  std::optional<std::pair<std::size_t, double>> nearest(const GeoPoint& center, double maxKm) const;

 private:
  std::int64_t key(long row, long col) const { return (static_cast<std::int64_t>(row) << 32) ^ (col & 0xffffffff); }
  long row(double lat) const;
  long col(double lon) const;

  std::vector<GeoPoint> points_;
  double bucketDeg_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets_;
};

struct UaAssignment {
  /// UA index into the supplied list, or nullopt for rural.
  std::vector<std::optional<std::size_t>> ua;
  std::size_t rural = 0;
};

/// Assigns each location to the UA with the closest cell centroid when that
/// centroid lies within `bufferKm`; otherwise rural.
UaAssignment assignUA(std::span<const GeoPoint> locations, std::span<const UrbanAgglomeration> uas,
                      double bufferKm = 10.0);

struct WeightedPoint {
  GeoPoint at;
  double weight = 0.0;
};

/// Sum of weights of points with d(center, point) < radiusKm, via a linear scan.
double radiusAggregate(std::span<const WeightedPoint> points, const GeoPoint& center, double radiusKm);

/// Same query backed by a spatial index; build once, query many centers.
class RadiusAggregator {
 public:
  RadiusAggregator(std::vector<WeightedPoint> points, double radiusKm);
  double operator()(const GeoPoint& center) const;
  double operator()(const GeoPoint& center, double radiusKm) const;

 private:
  std::vector<WeightedPoint> points_;
  std::vector<GeoPoint> locations_;
  double radius_;
  SpatialIndex index_;
};

struct Establishment {
  std::string id;
  int period = 0;
  std::string industry;
  double employment = 0.0;
  double output = 0.0;
  GeoPoint at;
};

struct RnDEstablishment {
  std::string industry;
  double employmentShare = 0.0;  // e_k within its industry
  GeoPoint at;
};

/// Sum over establishments within radius of v_m * e_k, where v_m is the
/// industry R&D expenditure. Callers pass previous-period values. Throws
/// DataError on negative expenditure, a missing industry, or shares that sum
/// to more than one within an industry.
/// Each establishment weighted by its share of its industry's R&D. Validates
/// shares (non-negative, summing to at most one per industry) and
/// expenditures, and requires every industry to have an expenditure.
std::vector<WeightedPoint> allocatedRnD(const std::unordered_map<std::string, double>& industryRnD,
                                       std::span<const RnDEstablishment> establishments);

double allocateRnD(const std::unordered_map<std::string, double>& industryRnD,
                   std::span<const RnDEstablishment> establishments, const GeoPoint& center, double radiusKm);

/// Converts raw establishments to employment shares within each industry.
std::vector<RnDEstablishment> employmentShares(std::span<const Establishment> establishments);

/// Geographic inputs of one corpus: UA cells, the population grid, manufacturing
/// establishments (per period) and industry R&D expenditure per period.
struct GeoInputs {
  std::vector<UrbanAgglomeration> uas;
  std::vector<WeightedPoint> population;
  std::vector<Establishment> establishments;
  std::map<int, std::unordered_map<std::string, double>> industryRnD;
};

struct NeighborhoodCovariates {
  double aInv = 0.0;   // inventors within radius, excluding i and N_it
  double aRnD = 0.0;   // allocated R&D of the previous period
  double aMnfE = 0.0;  // manufacturing employment
  double aMnfO = 0.0;  // manufacturing output
  double aPop = 0.0;   // residential population
};

struct NeighborhoodRadii {
  double inventors = 1.0;
  double rnd = 1.0;
  double manufacturing = 1.0;
  double population = 20.0;
};

}  // namespace coinvent
