import math
from typing import Any, Dict

from ..exceptions import InvalidGeoPointException, InvalidRegionException


class GeoPoint:
    """A latitude/longitude pair in degrees."""

    __slots__ = ("lat", "lon")

    def __init__(self, lat: float, lon: float):
        try:
            lat = float(lat)
            lon = float(lon)
        except (TypeError, ValueError):
            raise InvalidGeoPointException(f"Coordinates must be numbers, got ({lat!r}, {lon!r})", "INVALID_COORDINATES")
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise InvalidGeoPointException("Coordinates must be finite", "NON_FINITE_COORDINATES")
        if not -90.0 <= lat <= 90.0:
            raise InvalidGeoPointException(f"Latitude {lat} outside [-90, 90]", "LATITUDE_OUT_OF_RANGE")
        if not -180.0 <= lon <= 180.0:
            raise InvalidGeoPointException(f"Longitude {lon} outside [-180, 180]", "LONGITUDE_OUT_OF_RANGE")
        self.lat = lat
        self.lon = lon

    def __eq__(self, other):
        if not isinstance(other, GeoPoint):
            return NotImplemented
        return self.lat == other.lat and self.lon == other.lon

    def __hash__(self):
        return hash((self.lat, self.lon))

    def __lt__(self, other: "GeoPoint"):
        return (self.lat, self.lon) < (other.lat, other.lon)

    def __repr__(self):
        return f"GeoPoint({self.lat:.6f}, {self.lon:.6f})"

    def as_tuple(self):
        return (self.lat, self.lon)

    def to_dict(self) -> Dict[str, float]:
        return {"lat": self.lat, "lon": self.lon}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "GeoPoint":
        return GeoPoint(d.get("lat"), d.get("lon"))


class Region:
    def __init__(self, center: GeoPoint, radius_m: float = 5000.0, side_m: float = 5000.0):
        """Analysis region: circular harvest disc plus the square grid area, both around `center`."""
        if not isinstance(center, GeoPoint):
            raise InvalidRegionException("Region center must be a GeoPoint", "INVALID_REGION_CENTER")
        try:
            radius_m = float(radius_m)
            side_m = float(side_m)
        except (TypeError, ValueError):
            raise InvalidRegionException("Region sizes must be numbers", "INVALID_REGION_SIZE")
        if not (math.isfinite(radius_m) and radius_m > 0):
            raise InvalidRegionException(f"radius_m must be > 0, got {radius_m}", "INVALID_RADIUS")
        if not (math.isfinite(side_m) and side_m > 0):
            raise InvalidRegionException(f"side_m must be > 0, got {side_m}", "INVALID_SIDE")
        self.center = center
        self.radius_m = radius_m
        self.side_m = side_m

    def __repr__(self):
        return f"<Region center={self.center!r} radius_m={self.radius_m} side_m={self.side_m}>"

    def __eq__(self, other):
        if not isinstance(other, Region):
            return NotImplemented
        return (self.center, self.radius_m, self.side_m) == (other.center, other.radius_m, other.side_m)

    def to_dict(self) -> Dict[str, Any]:
        return {"center": self.center.to_dict(), "radius_m": self.radius_m, "side_m": self.side_m}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "Region":
        return Region(GeoPoint.from_dict(d.get("center", {})), d.get("radius_m", 5000.0), d.get("side_m", 5000.0))


# Times Square, the default analysis center
TIMES_SQUARE = GeoPoint(40.756667, -73.986389)
