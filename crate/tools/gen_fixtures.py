#!/usr/bin/env python3
"""Regenerate the frozen test fixtures under crates/habit/tests/fixtures/.

The H3 fixtures are produced with the `h3` PyPI package (bindings to the
reference C implementation), so the Rust code is checked against an
independent implementation of the indexing standard. The DTW fixtures come
from a self-contained dynamic program below.

Usage: python3 tools/gen_fixtures.py
"""

import json
import math
import random
from pathlib import Path

import h3

FIXTURES = Path(__file__).resolve().parent.parent / "crates" / "habit" / "tests" / "fixtures"

EARTH_RADIUS_M = 6_371_008.8
RESOLUTIONS = [6, 7, 8, 9, 10]
POINTS_PER_RES = 2000  # x5 resolutions = 10,000 points and pairs

# Average hexagon edge length at each resolution, meters (for pair offsets).
EDGE_M = {6: 3724.5, 7: 1406.5, 8: 531.4, 9: 200.8, 10: 75.9}


def uniform_sphere_point(rng):
    lat = math.degrees(math.asin(2.0 * rng.random() - 1.0))
    lon = rng.uniform(-180.0, 180.0)
    return lat, lon


def gen_cells_and_boundaries(rng):
    cells_rows = []
    boundary_rows = []
    for res in RESOLUTIONS:
        for _ in range(POINTS_PER_RES):
            lat, lon = uniform_sphere_point(rng)
            cell = h3.latlng_to_cell(lat, lon, res)
            clat, clng = h3.cell_to_latlng(cell)
            cells_rows.append(f"{lat!r},{lon!r},{res},{cell},{clat!r},{clng!r}")
            verts = ";".join(f"{vlat!r},{vlng!r}" for vlat, vlng in h3.cell_to_boundary(cell))
            boundary_rows.append(f"{cell};{verts}")

    (FIXTURES / "h3_cells.csv").write_text(
        "lat,lon,res,cell,center_lat,center_lng\n" + "\n".join(cells_rows) + "\n"
    )
    (FIXTURES / "h3_boundaries.txt").write_text("\n".join(boundary_rows) + "\n")


def gen_pairs(rng):
    rows = []
    for res in RESOLUTIONS:
        edge = EDGE_M[res]
        made = 0
        while made < POINTS_PER_RES:
            lat, lon = uniform_sphere_point(rng)
            if abs(lat) > 85:
                continue  # keep the planar offset approximation sane
            max_off = 30.0 * edge
            dn = rng.uniform(-max_off, max_off)
            de = rng.uniform(-max_off, max_off)
            lat2 = lat + math.degrees(dn / EARTH_RADIUS_M)
            lon2 = lon + math.degrees(de / (EARTH_RADIUS_M * math.cos(math.radians(lat))))
            if abs(lat2) > 89 or abs(lon2) > 179.5:
                continue
            a = h3.latlng_to_cell(lat, lon, res)
            b = h3.latlng_to_cell(lat2, lon2, res)
            try:
                dist = h3.grid_distance(a, b)
            except h3.H3FailedError:
                continue
            rows.append(f"{a},{b},{dist}")
            made += 1
    (FIXTURES / "h3_pairs.csv").write_text("a,b,grid_distance\n" + "\n".join(rows) + "\n")


def haversine_m(a, b):
    (lon1, lat1), (lon2, lat2) = a, b
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def dtw_mean_step(a, b):
    """Classic DTW; total cost of the optimal warp divided by the length of
    the shortest minimum-cost warping path."""
    inf = float("inf")
    prev = [(inf, 0)] * (len(b) + 1)
    prev[0] = (0.0, 0)
    for i in range(1, len(a) + 1):
        row = [(inf, 0)] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            d = haversine_m(a[i - 1], b[j - 1])
            best = min(prev[j - 1], prev[j], row[j - 1])
            row[j] = (best[0] + d, best[1] + 1)
        prev = row
    cost, steps = prev[len(b)]
    return cost / steps


def gen_dtw_cases(rng):
    cases = []

    # Two parallel two-point tracks offset by 0.001 deg latitude.
    a = [(0.0, 0.0), (0.01, 0.0)]  # (lon, lat)
    b = [(0.0, 0.001), (0.01, 0.001)]
    cases.append({"a": a, "b": b, "expected_m": dtw_mean_step(a, b)})

    for _ in range(15):
        n, m = rng.randint(1, 40), rng.randint(1, 40)
        base_lon, base_lat = rng.uniform(10, 13), rng.uniform(54, 57)

        def walk(k):
            lon, lat = base_lon, base_lat
            pts = []
            for _ in range(k):
                pts.append((lon, lat))
                lon += rng.uniform(-0.01, 0.01)
                lat += rng.uniform(-0.01, 0.01)
            return pts

        a, b = walk(n), walk(m)
        cases.append({"a": a, "b": b, "expected_m": dtw_mean_step(a, b)})

    (FIXTURES / "dtw_cases.json").write_text(json.dumps(cases, indent=1))


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20240105)
    gen_cells_and_boundaries(rng)
    gen_pairs(rng)
    gen_dtw_cases(rng)
    print(f"fixtures written to {FIXTURES}")
    print("h3 version:", h3.versions())


if __name__ == "__main__":
    main()
