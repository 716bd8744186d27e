"""Command-line entry point: config-driven generation, stats and route queries.

``airnet generate`` loads a JSON run configuration (flat keys mirroring the
usual parameter tables), builds every configured zone, and writes
``network.json``, per-(zone, layer) SVG renders and ``stats.txt`` into the
output directory. ``airnet stats`` and ``airnet route`` operate on a written
``network.json``. The USGS client's cache directory is configured through the
``AIRNET_CACHE_DIR`` environment variable.

Exit codes: 0 success, 2 config error, 3 io error, 4 solver error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .elevation import (
    build_map_from_points,
    build_map_from_slices,
    load_points,
    load_raster_stack,
)
from .grid import CellCoord, GridConfig, ZoneCoord
from .network import (
    MapSource,
    NetworkConfig,
    RasterSource,
    generate,
    load_network,
    network_to_doc,
    route_query,
    stats,
)
from .render import render_layer, render_zone_overlay
from .streamfield import LayerSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER = 4


class ConfigError(Exception):
    pass


class IoError(Exception):
    pass


@dataclass
class RunConfig:
    """Validated run configuration plus its normalized JSON echo."""

    network: NetworkConfig
    sources: dict[ZoneCoord, tuple[str, str]]  # zone -> ("points"|"rasters", path)
    out_dir: str
    render: bool
    tol: float
    max_iter: int | None
    offline: bool
    doc: dict


def _require(doc: dict, key: str):
    if key not in doc:
        raise ConfigError(f"missing required config field {key!r}")
    return doc[key]


def parse_run_config(doc: dict, base_dir: Path) -> RunConfig:
    """Validate a raw config document and fill defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")

    try:
        grid = GridConfig(
            anchor=(
                float(doc.get("anchor_x_m", 0.0)),
                float(doc.get("anchor_y_m", 0.0)),
                float(doc.get("anchor_alt_m", 0.0)),
            ),
            cell_size=float(_require(doc, "cell_size_m")),
            zone_side=int(_require(doc, "zone_side")),
            crs_label=str(doc.get("crs", "custom")),
            max_k=int(doc.get("max_k", 200)),
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid grid configuration: {err}") from err

    raw_layers = _require(doc, "layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ConfigError("layers must be a non-empty list")
    layers = []
    for n, entry in enumerate(raw_layers):
        try:
            direction = entry["direction"]
            layers.append(
                LayerSpec(
                    index=n,
                    altitude_m=float(entry["altitude_m"]),
                    direction=(float(direction[0]), float(direction[1])),
                )
            )
        except (KeyError, IndexError, TypeError) as err:
            raise ConfigError(f"layers[{n}]: missing or malformed field ({err})") from err
        except ValueError as err:
            raise ConfigError(f"layers[{n}]: {err}") from err

    raw_zones = _require(doc, "zones")
    try:
        zones = tuple(ZoneCoord(int(a), int(b)) for a, b in raw_zones)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"zones must be a list of [a, b] pairs: {err}") from err

    try:
        network = NetworkConfig(grid=grid, layers=tuple(layers), n_r=int(doc.get("n_r", 10)), zones=zones)
    except ValueError as err:
        raise ConfigError(str(err)) from err

    raw_sources = _require(doc, "sources")
    if not isinstance(raw_sources, list):
        raise ConfigError("sources must be a list")
    sources: dict[ZoneCoord, tuple[str, str]] = {}
    norm_sources = []
    for entry in raw_sources:
        try:
            zone = ZoneCoord(int(entry["zone"][0]), int(entry["zone"][1]))
        except (KeyError, IndexError, TypeError, ValueError) as err:
            raise ConfigError(f"source entry {entry!r}: malformed zone ({err})") from err
        kinds = [kind for kind in ("points", "rasters") if kind in entry]
        if len(kinds) != 1:
            raise ConfigError(f"source for zone {tuple(zone)} must name exactly one of points/rasters")
        if zone in sources:
            raise ConfigError(f"zone {tuple(zone)} has more than one source")
        if zone not in zones:
            raise ConfigError(f"source names zone {tuple(zone)} which is not in zones")
        kind = kinds[0]
        path = str(entry[kind])
        sources[zone] = (kind, str((base_dir / path) if not Path(path).is_absolute() else Path(path)))
        norm_sources.append({"zone": [zone.a, zone.b], kind: path})
    missing = [tuple(z) for z in zones if z not in sources]
    if missing:
        raise ConfigError(f"zones without an elevation source: {missing}")

    tol = float(doc.get("tol", 1e-9))
    max_iter = doc.get("max_iter")
    if max_iter is not None:
        max_iter = int(max_iter)

    normalized = {
        "anchor_lon": doc.get("anchor_lon"),
        "anchor_lat": doc.get("anchor_lat"),
        "anchor_x_m": grid.anchor[0],
        "anchor_y_m": grid.anchor[1],
        "anchor_alt_m": grid.anchor[2],
        "crs": grid.crs_label,
        "cell_size_m": grid.cell_size,
        "zone_side": grid.zone_side,
        "max_k": grid.max_k,
        "layers": [
            {"altitude_m": layer.altitude_m, "direction": list(layer.direction)}
            for layer in network.layers
        ],
        "n_r": network.n_r,
        "zones": [[z.a, z.b] for z in zones],
        "sources": norm_sources,
        "out_dir": str(doc.get("out_dir", "out")),
        "render": bool(doc.get("render", True)),
        "tol": tol,
        "max_iter": max_iter,
        "offline": bool(doc.get("offline", False)),
    }
    return RunConfig(
        network=network,
        sources=sources,
        out_dir=normalized["out_dir"],
        render=normalized["render"],
        tol=tol,
        max_iter=max_iter,
        offline=normalized["offline"],
        doc=normalized,
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise IoError(f"cannot read config {path}: {err}") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    return parse_run_config(doc, base_dir=path.parent)


def _load_sources(rc: RunConfig):
    out = {}
    for zone, (kind, path) in rc.sources.items():
        if not Path(path).exists():
            raise IoError(f"elevation source not found: {path}")
        try:
            if kind == "points":
                ps = load_points(path)
                out[zone] = MapSource(build_map_from_points(ps, zone, rc.network.grid))
            else:
                rasters = load_raster_stack(path)
                out[zone] = RasterSource(build_map_from_slices(rasters, zone, rc.network.grid))
        except OSError as err:
            raise IoError(f"cannot read elevation source {path}: {err}") from err
        except (ValueError, KeyError) as err:
            raise IoError(f"bad elevation source {path}: {err}") from err
    return out


def format_stats(record: dict) -> str:
    lines = []
    for zone_key, per_layer in sorted(record["corridor_counts"].items()):
        for layer_key, count in sorted(per_layer.items(), key=lambda kv: int(kv[0])):
            lines.append(f"zone {zone_key} layer {layer_key}: {count} corridors")
    lines.append(f"total corridors: {record['total_corridors']}")
    lines.append(f"total corridor cells: {record['total_corridor_cells']}")
    lines.append(f"vertical connections: {record['vertical_connections']}")
    lines.append(f"inter-zone links: {record['interzone_links']}")
    lines.append(f"inter-zone connection ratio: {record['interzone_connection_ratio']:.3f}")
    lines.append(f"graph components: {record['graph_components']}")
    return "\n".join(lines) + "\n"


def run(
    config_path,
    out_dir=None,
    offline: bool | None = None,
    tol: float | None = None,
    render: bool | None = None,
) -> int:
    """Execute a full generate run; returns the process exit code."""
    try:
        rc = load_run_config(config_path)
        if out_dir is not None:
            rc.out_dir = str(out_dir)
            rc.doc["out_dir"] = rc.out_dir
        if offline is not None:
            rc.offline = offline
            rc.doc["offline"] = offline
        if tol is not None:
            rc.tol = tol
            rc.doc["tol"] = tol
        if render is not None:
            rc.render = render
            rc.doc["render"] = render
        sources = _load_sources(rc)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except IoError as err:
        print(f"io error: {err}", file=sys.stderr)
        return EXIT_IO

    try:
        net = generate(rc.network, sources, tol=rc.tol, max_iter=rc.max_iter)
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if net.failures:
        first = net.failures[0]
        print(
            f"solver error: zone {tuple(first['zone'])} layer {first['layer']}: {first['error']}",
            file=sys.stderr,
        )
        return EXIT_SOLVER

    try:
        out = Path(rc.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "network.json").write_text(
            json.dumps(network_to_doc(net, config_doc=rc.doc), indent=1) + "\n"
        )
        (out / "stats.txt").write_text(format_stats(stats(net)))
        if rc.render:
            for zone in sorted(net.corridors):
                for layer_index in sorted(net.corridors[zone]):
                    svg = render_layer(net, zone, layer_index)
                    (out / f"zone_{zone.a}_{zone.b}_layer_{layer_index}.svg").write_text(svg)
                (out / f"zone_{zone.a}_{zone.b}_overlay.svg").write_text(
                    render_zone_overlay(net, zone)
                )
    except OSError as err:
        print(f"io error: cannot write artifacts: {err}", file=sys.stderr)
        return EXIT_IO

    print(f"wrote {out / 'network.json'}")
    return EXIT_OK


def _load_network_or_exit(path):
    try:
        return load_network(path), None
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return None, EXIT_IO
    except (json.JSONDecodeError, KeyError, ValueError) as err:
        print(f"config error: bad network document {path}: {err}", file=sys.stderr)
        return None, EXIT_CONFIG


def _parse_cell(text: str) -> CellCoord:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"expected i,j,k, got {text!r}")
    return CellCoord(int(parts[0]), int(parts[1]), int(parts[2]))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="airnet", description="Generate and query UAS air corridor networks."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="run a JSON config end to end")
    p_gen.add_argument("config", help="path to the run configuration JSON")
    p_gen.add_argument("--out", default=None, help="output directory (overrides config)")
    p_gen.add_argument("--offline", action="store_true", default=None, help="forbid network use")
    p_gen.add_argument("--tol", type=float, default=None, help="solver relative residual tolerance")
    p_gen.add_argument(
        "--render",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="write SVG renders (default: per config)",
    )

    p_stats = sub.add_parser("stats", help="print stats of a written network.json")
    p_stats.add_argument("network")

    p_route = sub.add_parser("route", help="BFS route between two corridor cells")
    p_route.add_argument("network")
    p_route.add_argument("--from", dest="src", required=True, metavar="i,j,k")
    p_route.add_argument("--to", dest="dst", required=True, metavar="i,j,k")

    args = parser.parse_args(argv)

    if args.command == "generate":
        return run(
            args.config, out_dir=args.out, offline=args.offline, tol=args.tol, render=args.render
        )

    if args.command == "stats":
        net, code = _load_network_or_exit(args.network)
        if net is None:
            return code
        print(format_stats(stats(net)), end="")
        return EXIT_OK

    if args.command == "route":
        net, code = _load_network_or_exit(args.network)
        if net is None:
            return code
        try:
            src = _parse_cell(args.src)
            dst = _parse_cell(args.dst)
            path = route_query(net, src, dst)
        except ValueError as err:
            print(f"config error: {err}", file=sys.stderr)
            return EXIT_CONFIG
        if path is None:
            print("no-route")
        else:
            for cell in path:
                print(f"{cell.i} {cell.j} {cell.k}")
        return EXIT_OK

    parser.error(f"unknown command {args.command!r}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
