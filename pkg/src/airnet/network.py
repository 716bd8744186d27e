"""Whole-network orchestration across zones and layers.

Zones are generated independently in row-major order; committed zones feed
connection hints to their not-yet-generated neighbors so corridors continue
across zone seams. The assembled network is a graph of corridor cells,
vertical chains and inter-zone seam links that supports stats and BFS route
queries, and serializes to a single JSON document.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .corridor import Corridor, VerticalConnection, generate_layer, vertical_connections
from .elevation import ElevationMap, Slice, extract_slice
from .grid import CellCoord, GridConfig, ZoneCoord, locate_cell, zone_of_cell
from .streamfield import (
    ConvergenceError,
    LayerSpec,
    PsiField,
    solve_slice,
)


@dataclass(frozen=True)
class NetworkConfig:
    """Everything needed to generate one network: grid, layers, spacing, zones."""

    grid: GridConfig
    layers: tuple[LayerSpec, ...]
    n_r: int
    zones: tuple[ZoneCoord, ...]

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "zones", tuple(ZoneCoord(*z) for z in self.zones))
        if not layers:
            raise ValueError("at least one layer is required")
        for pos, layer in enumerate(layers):
            if layer.index != pos:
                raise ValueError(f"layer at position {pos} has index {layer.index}")
        alts = [layer.altitude_m for layer in layers]
        if any(b <= a for a, b in zip(alts, alts[1:])):
            raise ValueError(f"layer altitudes must be strictly increasing, got {alts}")
        if self.n_r < 1:
            raise ValueError(f"n_r must be >= 1, got {self.n_r}")

    def layer_k(self, index: int) -> int:
        """Cell altitude of a layer under this grid."""
        ax, ay, _ = self.grid.anchor
        return locate_cell((ax, ay, self.layers[index].altitude_m), self.grid).k


class MapSource:
    """Zone elevation source backed by a discrete elevation map."""

    def __init__(self, elevation_map: ElevationMap):
        self.map = elevation_map

    def slice_at(self, k: int) -> Slice:
        return extract_slice(self.map, k)

    def column_free(self, i: int, j: int, k: int) -> bool:
        return k > self.map.height(i, j)


class RasterSource:
    """Zone elevation source backed by per-altitude obstacle slices.

    Intermediate altitudes with no raster are assumed free when checking
    vertical chains (there is simply no data to say otherwise).
    """

    def __init__(self, slices):
        self.slices: dict[int, Slice] = {}
        for s in slices:
            if s.k in self.slices:
                raise ValueError(f"duplicate raster slice at cell altitude k={s.k}")
            self.slices[s.k] = s

    def slice_at(self, k: int) -> Slice:
        if k not in self.slices:
            raise KeyError(
                f"no raster provides cell altitude k={k}; have {sorted(self.slices)}"
            )
        return self.slices[k]

    def column_free(self, i: int, j: int, k: int) -> bool:
        s = self.slices.get(k)
        return True if s is None else not s.is_full(i, j)


@dataclass(frozen=True)
class InterzoneLink:
    """Seam adjacency between corridor endpoints of two zones at one layer."""

    layer_index: int
    zone_a: ZoneCoord
    cell_a: CellCoord
    zone_b: ZoneCoord
    cell_b: CellCoord


@dataclass
class AirNetwork:
    """All zones' layered corridors plus vertical and inter-zone connections."""

    config: NetworkConfig
    corridors: dict[ZoneCoord, dict[int, list[Corridor]]]
    vertical: dict[ZoneCoord, list[VerticalConnection]]
    interzone: list[InterzoneLink] = field(default_factory=list)
    timings_ms: dict = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)
    # In-memory extras for rendering/inspection; not serialized.
    full_masks: dict[tuple[ZoneCoord, int], np.ndarray] = field(default_factory=dict, repr=False)
    fields: dict[tuple[ZoneCoord, int], PsiField] = field(default_factory=dict, repr=False)

    def zone_layer_corridors(self, zone: ZoneCoord, layer_index: int) -> list[Corridor]:
        return self.corridors.get(ZoneCoord(*zone), {}).get(layer_index, [])

    def all_corridors(self):
        for zone in sorted(self.corridors):
            for layer_index in sorted(self.corridors[zone]):
                yield from self.corridors[zone][layer_index]

    def corridor_cell_set(self) -> set[CellCoord]:
        k_of = {n: self.config.layer_k(n) for n in range(len(self.config.layers))}
        return {
            CellCoord(i, j, k_of[c.layer_index])
            for c in self.all_corridors()
            for (i, j) in c.cells
        }


def _endpoint_neighbors_in_zone(cell: tuple[int, int], zone: ZoneCoord, grid: GridConfig):
    """Horizontal neighbors of a cell that fall inside ``zone``."""
    i, j = cell
    for ni, nj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
        if zone_of_cell(CellCoord(ni, nj, 0), grid) == zone:
            yield (ni, nj)


def _collect_hints(
    zone: ZoneCoord,
    layer_index: int,
    committed: dict[ZoneCoord, dict[int, list[Corridor]]],
    grid: GridConfig,
) -> list[tuple[ZoneCoord, tuple[int, int]]]:
    """Boundary cells of ``zone`` adjacent to committed neighbor-zone corridor endpoints."""
    hints = []
    seen = set()
    a, b = zone
    for nz in (ZoneCoord(a - 1, b), ZoneCoord(a + 1, b), ZoneCoord(a, b - 1), ZoneCoord(a, b + 1)):
        for c in committed.get(nz, {}).get(layer_index, []):
            for endpoint in (c.start, c.end):
                for cell in _endpoint_neighbors_in_zone(endpoint, zone, grid):
                    if cell not in seen:
                        seen.add(cell)
                        hints.append((nz, cell))
    return hints


def compute_interzone_links(net: AirNetwork) -> list[InterzoneLink]:
    """Seam links between corridor endpoints Cartesian-adjacent across zones, per layer."""
    grid = net.config.grid
    links = []
    endpoint_index: dict[tuple[int, CellCoord], ZoneCoord] = {}
    for c in net.all_corridors():
        k = net.config.layer_k(c.layer_index)
        for i, j in (c.start, c.end):
            endpoint_index[(c.layer_index, CellCoord(i, j, k))] = c.zone
    for (layer_index, cell), zone in sorted(endpoint_index.items()):
        for ni, nj in ((cell.i + 1, cell.j), (cell.i, cell.j + 1)):
            other = CellCoord(ni, nj, cell.k)
            other_zone = endpoint_index.get((layer_index, other))
            if other_zone is not None and other_zone != zone:
                links.append(
                    InterzoneLink(
                        layer_index=layer_index,
                        zone_a=zone,
                        cell_a=cell,
                        zone_b=other_zone,
                        cell_b=other,
                    )
                )
    return links


def generate(
    cfg: NetworkConfig,
    sources: Mapping[ZoneCoord, MapSource | RasterSource | ElevationMap],
    *,
    use_hints: bool = True,
    tol: float = 1e-9,
    max_iter: int | None = None,
    keep_fields: bool = False,
) -> AirNetwork:
    """Generate the full network, zone by zone in row-major order.

    A solver convergence failure aborts only the affected (zone, layer); it is
    recorded in the network's failure list and the remaining work proceeds.
    """
    sources = {
        ZoneCoord(*z): (MapSource(src) if isinstance(src, ElevationMap) else src)
        for z, src in sources.items()
    }
    missing = [z for z in cfg.zones if z not in sources]
    if missing:
        raise ValueError(f"no elevation source for zones: {missing}")

    layer_ks = [cfg.layer_k(n) for n in range(len(cfg.layers))]
    if len(set(layer_ks)) != len(layer_ks):
        raise ValueError(f"layers map to duplicate cell altitudes {layer_ks}; increase spacing")
    for n, k in enumerate(layer_ks):
        if k < 0:
            raise ValueError(f"layer {n} maps to cell altitude k={k} below the anchor")
        if k > cfg.grid.max_k:
            raise ValueError(f"layer {n} maps to cell altitude k={k} above max_k={cfg.grid.max_k}")

    net = AirNetwork(config=cfg, corridors={}, vertical={})
    timings: dict[str, dict] = {}
    t_total = time.perf_counter()

    for zone in sorted(cfg.zones):
        source = sources[zone]
        t_zone = time.perf_counter()
        zone_times = {"slice_ms": 0.0, "solve_ms": 0.0, "corridor_ms": 0.0, "vertical_ms": 0.0}
        per_layer: dict[int, list[Corridor]] = {}
        solved: dict[int, PsiField] = {}

        for layer in cfg.layers:
            k = layer_ks[layer.index]
            t0 = time.perf_counter()
            s = source.slice_at(k)
            zone_times["slice_ms"] += (time.perf_counter() - t0) * 1e3

            t0 = time.perf_counter()
            try:
                psi = solve_slice(s, layer, tol=tol, max_iter=max_iter)
            except ConvergenceError as err:
                net.failures.append(
                    {"zone": [zone.a, zone.b], "layer": layer.index, "error": str(err)}
                )
                per_layer[layer.index] = []
                zone_times["solve_ms"] += (time.perf_counter() - t0) * 1e3
                continue
            zone_times["solve_ms"] += (time.perf_counter() - t0) * 1e3
            solved[layer.index] = psi
            net.full_masks[(zone, layer.index)] = s.full
            if keep_fields:
                net.fields[(zone, layer.index)] = psi

            t0 = time.perf_counter()
            hints = (
                _collect_hints(zone, layer.index, net.corridors, cfg.grid) if use_hints else []
            )
            per_layer[layer.index] = generate_layer(s, psi, layer, cfg.n_r, hints)
            zone_times["corridor_ms"] += (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        connections: list[VerticalConnection] = []
        for lower, upper in zip(cfg.layers, cfg.layers[1:]):
            if lower.index in solved and upper.index in solved:
                connections.extend(
                    vertical_connections(
                        per_layer[lower.index],
                        per_layer[upper.index],
                        source.column_free,
                        layer_ks[lower.index],
                        layer_ks[upper.index],
                    )
                )
        zone_times["vertical_ms"] += (time.perf_counter() - t0) * 1e3

        net.corridors[zone] = per_layer
        net.vertical[zone] = connections
        zone_times["total_ms"] = (time.perf_counter() - t_zone) * 1e3
        timings[f"{zone.a},{zone.b}"] = zone_times

    net.interzone = compute_interzone_links(net)
    net.timings_ms = {"total_ms": (time.perf_counter() - t_total) * 1e3, "zones": timings}
    return net


# ---------------------------------------------------------------------------
# Graph queries


def _build_adjacency(net: AirNetwork) -> dict[CellCoord, list[CellCoord]]:
    adj: dict[CellCoord, list[CellCoord]] = {}

    def add_edge(u: CellCoord, v: CellCoord) -> None:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)

    for c in net.all_corridors():
        k = net.config.layer_k(c.layer_index)
        chain = [CellCoord(i, j, k) for i, j in c.cells]
        for node in chain:
            adj.setdefault(node, [])
        for u, v in zip(chain, chain[1:]):
            add_edge(u, v)
    for connections in net.vertical.values():
        for vc in connections:
            for u, v in zip(vc.cells, vc.cells[1:]):
                add_edge(u, v)
    for link in net.interzone:
        add_edge(link.cell_a, link.cell_b)
    return adj


def route_query(net: AirNetwork, src: CellCoord, dst: CellCoord) -> list[CellCoord] | None:
    """Shortest path by cell count over the network graph, or None when disconnected."""
    src = CellCoord(*src)
    dst = CellCoord(*dst)
    corridor_cells = net.corridor_cell_set()
    for name, cell in (("src", src), ("dst", dst)):
        if cell not in corridor_cells:
            raise ValueError(f"{name} cell {tuple(cell)} is not a corridor cell of this network")
    if src == dst:
        return [src]
    adj = _build_adjacency(net)
    prev: dict[CellCoord, CellCoord] = {src: src}
    queue = deque([src])
    while queue:
        node = queue.popleft()
        for nb in adj[node]:
            if nb in prev:
                continue
            prev[nb] = node
            if nb == dst:
                path = [nb]
                while path[-1] != src:
                    path.append(prev[path[-1]])
                return path[::-1]
            queue.append(nb)
    return None


def stats(net: AirNetwork) -> dict:
    """Summary record: corridor counts, cells, seam connectivity, vertical links, components."""
    corridor_counts: dict[str, dict[str, int]] = {}
    total_corridors = 0
    total_cells = 0
    for zone in sorted(net.corridors):
        per_layer = {}
        for layer_index in sorted(net.corridors[zone]):
            cs = net.corridors[zone][layer_index]
            per_layer[str(layer_index)] = len(cs)
            total_corridors += len(cs)
            total_cells += sum(len(c) for c in cs)
        corridor_counts[f"{zone.a},{zone.b}"] = per_layer

    vertical_count = sum(len(v) for v in net.vertical.values())

    # Seam connectivity: endpoints facing another generated zone, and how many
    # of them participate in an inter-zone link.
    linked = {(link.layer_index, link.cell_a) for link in net.interzone}
    linked |= {(link.layer_index, link.cell_b) for link in net.interzone}
    zone_set = set(net.config.zones)
    facing = 0
    matched = 0
    for c in net.all_corridors():
        k = net.config.layer_k(c.layer_index)
        for i, j in (c.start, c.end):
            outward = [
                z
                for (ni, nj) in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1))
                for z in [zone_of_cell(CellCoord(ni, nj, 0), net.config.grid)]
                if z != c.zone and z in zone_set
            ]
            if outward:
                facing += 1
                if (c.layer_index, CellCoord(i, j, k)) in linked:
                    matched += 1

    adj = _build_adjacency(net)
    components = 0
    seen: set[CellCoord] = set()
    for node in adj:
        if node in seen:
            continue
        components += 1
        queue = deque([node])
        seen.add(node)
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)

    return {
        "corridor_counts": corridor_counts,
        "total_corridors": total_corridors,
        "total_corridor_cells": total_cells,
        "vertical_connections": vertical_count,
        "interzone_links": len(net.interzone),
        "interzone_connection_ratio": (matched / facing) if facing else 0.0,
        "graph_components": components,
    }


# ---------------------------------------------------------------------------
# Serialization


def config_to_doc(cfg: NetworkConfig) -> dict:
    grid = cfg.grid
    return {
        "anchor_x_m": grid.anchor[0],
        "anchor_y_m": grid.anchor[1],
        "anchor_alt_m": grid.anchor[2],
        "crs": grid.crs_label,
        "cell_size_m": grid.cell_size,
        "zone_side": grid.zone_side,
        "max_k": grid.max_k,
        "layers": [
            {"altitude_m": layer.altitude_m, "direction": list(layer.direction)}
            for layer in cfg.layers
        ],
        "n_r": cfg.n_r,
        "zones": [[z.a, z.b] for z in cfg.zones],
    }


def config_from_doc(doc: dict) -> NetworkConfig:
    grid = GridConfig(
        anchor=(
            float(doc.get("anchor_x_m", 0.0)),
            float(doc.get("anchor_y_m", 0.0)),
            float(doc.get("anchor_alt_m", 0.0)),
        ),
        cell_size=float(doc["cell_size_m"]),
        zone_side=int(doc["zone_side"]),
        crs_label=str(doc.get("crs", "custom")),
        max_k=int(doc.get("max_k", 200)),
    )
    layers = tuple(
        LayerSpec(index=n, altitude_m=float(entry["altitude_m"]),
                  direction=tuple(float(v) for v in entry["direction"]))
        for n, entry in enumerate(doc["layers"])
    )
    zones = tuple(ZoneCoord(int(a), int(b)) for a, b in doc["zones"])
    return NetworkConfig(grid=grid, layers=layers, n_r=int(doc.get("n_r", 10)), zones=zones)


def network_to_doc(net: AirNetwork, config_doc: dict | None = None) -> dict:
    """Single JSON document for the whole network; cell triples are integers."""
    zones = []
    for zone in sorted(net.corridors):
        layers = []
        for layer_index in sorted(net.corridors[zone]):
            k = net.config.layer_k(layer_index)
            layers.append(
                {
                    "n": layer_index,
                    "corridors": [
                        {"cells": [[i, j, k] for i, j in c.cells]}
                        for c in net.corridors[zone][layer_index]
                    ],
                }
            )
        vertical = [
            {
                "i": vc.i,
                "j": vc.j,
                "lower": vc.lower_layer,
                "upper": vc.upper_layer,
                "cells": [[c.i, c.j, c.k] for c in vc.cells],
            }
            for vc in net.vertical.get(zone, [])
        ]
        zones.append({"a": zone.a, "b": zone.b, "layers": layers, "vertical": vertical})
    return {
        "config": config_doc if config_doc is not None else config_to_doc(net.config),
        "zones": zones,
        "stats": stats(net),
        "timings_ms": net.timings_ms,
    }


def save_network(net: AirNetwork, path, config_doc: dict | None = None) -> None:
    Path(path).write_text(json.dumps(network_to_doc(net, config_doc), indent=1) + "\n")


def network_from_doc(doc: dict) -> AirNetwork:
    """Rebuild a queryable network from its JSON document.

    Growth directions and full-cell masks are not serialized; the loaded
    network supports stats, route queries and re-serialization, which is all
    the on-disk format promises.
    """
    cfg = config_from_doc(doc["config"])
    corridors: dict[ZoneCoord, dict[int, list[Corridor]]] = {}
    vertical: dict[ZoneCoord, list[VerticalConnection]] = {}
    for zone_doc in doc["zones"]:
        zone = ZoneCoord(int(zone_doc["a"]), int(zone_doc["b"]))
        per_layer: dict[int, list[Corridor]] = {}
        for layer_doc in zone_doc["layers"]:
            n = int(layer_doc["n"])
            k = cfg.layer_k(n)
            cs = []
            for c_doc in layer_doc["corridors"]:
                cells = [(int(i), int(j)) for i, j, _ in c_doc["cells"]]
                if any(int(kk) != k for _, _, kk in c_doc["cells"]):
                    raise ValueError(f"corridor cells disagree with layer {n} altitude k={k}")
                cs.append(Corridor(layer_index=n, zone=zone, k=k, cells=cells))
            per_layer[n] = cs
        corridors[zone] = per_layer
        vertical[zone] = [
            VerticalConnection(
                i=int(v["i"]),
                j=int(v["j"]),
                lower_layer=int(v["lower"]),
                upper_layer=int(v["upper"]),
                cells=tuple(CellCoord(int(i), int(j), int(k)) for i, j, k in v["cells"]),
            )
            for v in zone_doc["vertical"]
        ]
    net = AirNetwork(
        config=cfg,
        corridors=corridors,
        vertical=vertical,
        timings_ms=doc.get("timings_ms", {}),
    )
    net.interzone = compute_interzone_links(net)
    return net


def load_network(path) -> AirNetwork:
    return network_from_doc(json.loads(Path(path).read_text()))
