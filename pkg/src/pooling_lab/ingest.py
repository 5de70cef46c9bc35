"""Convert an orders CSV into a time-window Pool2D instance."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from .errors import IngestError
from .instance import Arrival, Instance, TimeWindow
from .topology import Point2, Topology, TwoD

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_008.8
_PLANAR = ("origin_x", "origin_y", "dest_x", "dest_y")
_GEO = ("origin_lng", "origin_lat", "dest_lng", "dest_lat")


@dataclass(frozen=True)
class Equirectangular:
    """Local planar metres around (lng0, lat0)."""

    lng0: float
    lat0: float

    def __call__(self, lng: float, lat: float) -> tuple[float, float]:
        x = math.radians(lng - self.lng0) * math.cos(math.radians(self.lat0)) * EARTH_RADIUS_M
        y = math.radians(lat - self.lat0) * EARTH_RADIUS_M
        return x, y


def _identity(x: float, y: float) -> tuple[float, float]:
    return x, y


def parse_time(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    stamp = datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.timestamp()


def _order_key(order_id: str):
    return (0, int(order_id), "") if order_id.lstrip("-").isdigit() else (1, 0, order_id)


@dataclass
class IngestReport:
    order_ids: list[str] = field(default_factory=list)
    rejected: list[tuple[int, str]] = field(default_factory=list)  # (line number, reason)
    projection: Optional[Equirectangular] = None


def ingest_orders_csv(path, window: float, projection=None, strict: bool = False) -> tuple[Instance, IngestReport]:
    """Read orders, drop bad rows with a logged warning, and build the instance.

    ``projection`` maps (lng, lat) to planar metres; by default geographic files
    are projected about the centroid of all their points and planar files are
    taken as-is. With ``strict`` any rejected row is an error.
    """
    report = IngestReport()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or ())
        if {"order_id", "order_time"} - header:
            raise IngestError(f"missing columns: {sorted({'order_id', 'order_time'} - header)}")
        if set(_PLANAR) <= header:
            cols, geo = _PLANAR, False
        elif set(_GEO) <= header:
            cols, geo = _GEO, True
        else:
            raise IngestError(f"need coordinate columns {', '.join(_PLANAR)} or {', '.join(_GEO)}")
        rows, seen = [], set()
        for line, rec in enumerate(reader, start=2):
            oid = (rec.get("order_id") or "").strip()
            try:
                if not oid:
                    raise ValueError("empty order_id")
                if oid in seen:
                    raise ValueError(f"duplicate order_id {oid}")
                t = parse_time(rec["order_time"] or "")
                coords = [float(rec[c]) for c in cols]
                if not all(math.isfinite(v) for v in (t, *coords)):
                    raise ValueError("non-finite value")
                if geo and not (all(-180 <= v <= 180 for v in coords[0::2])
                                and all(-90 <= v <= 90 for v in coords[1::2])):
                    raise ValueError("longitude/latitude out of range")
            except (TypeError, ValueError) as exc:
                report.rejected.append((line, str(exc)))
                log.warning("%s:%d: rejected row: %s", path, line, exc)
                continue
            seen.add(oid)
            rows.append((t, oid, coords))
    if not rows:
        raise IngestError(f"no valid rows in {path}", rejected=len(report.rejected))
    if strict and report.rejected:
        raise IngestError(f"{len(report.rejected)} rejected rows in {path}", rejected=len(report.rejected))
    if projection is None:
        if geo:
            lngs = [c[i] for _, _, c in rows for i in (0, 2)]
            lats = [c[i] for _, _, c in rows for i in (1, 3)]
            projection = Equirectangular(math.fsum(lngs) / len(lngs), math.fsum(lats) / len(lats))
        else:
            projection = _identity
    if isinstance(projection, Equirectangular):
        report.projection = projection
    rows.sort(key=lambda r: (r[0], _order_key(r[1])))
    arrivals = []
    for i, (t, oid, (ox, oy, dx, dy)) in enumerate(rows, start=1):
        origin = Point2(*projection(ox, oy))
        dest = Point2(*projection(dx, dy))
        arrivals.append(Arrival(i, TwoD(origin, dest), t))
        report.order_ids.append(oid)
    return Instance(tuple(arrivals), TimeWindow(window), Topology.POOL_2D), report
