"""Figure-style renders: per-layer SVG cell maps and grayscale psi dumps.

Full cells render grey, corridor cells red, free cells white; j grows upward
so the images read like a map. SVG keeps the renders lossless and diffable.
"""

from __future__ import annotations

import numpy as np

from .grid import ZoneCoord
from .network import AirNetwork
from .pgm import encode_pgm
from .streamfield import PsiField, psi_to_image

FULL_COLOR = "#808080"
CORRIDOR_COLOR = "#FF0000"
BACKGROUND_COLOR = "#FFFFFF"


def _svg_grid(n: int, cell_px: int, full_cells, corridor_cells) -> str:
    size = n * cell_px
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="{BACKGROUND_COLOR}"/>',
    ]
    for color, cells in ((FULL_COLOR, full_cells), (CORRIDOR_COLOR, corridor_cells)):
        for li, lj in sorted(cells):
            x = li * cell_px
            y = (n - 1 - lj) * cell_px
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell_px}" height="{cell_px}" fill="{color}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _local_corridor_cells(net: AirNetwork, zone: ZoneCoord, layer_index: int) -> set:
    n = net.config.grid.zone_side
    i0, j0 = n * zone.a, n * zone.b
    return {
        (i - i0, j - j0)
        for c in net.zone_layer_corridors(zone, layer_index)
        for i, j in c.cells
    }


def render_layer(net: AirNetwork, zone, layer_index: int, cell_px: int = 4) -> str:
    """SVG cell map of one (zone, layer): grey full cells, red corridor cells."""
    zone = ZoneCoord(*zone)
    if zone not in net.corridors or layer_index not in net.corridors[zone]:
        raise ValueError(f"zone {tuple(zone)} layer {layer_index} is not part of this network")
    mask = net.full_masks.get((zone, layer_index))
    full_cells = {(int(li), int(lj)) for li, lj in zip(*np.nonzero(mask))} if mask is not None else set()
    corridor_cells = _local_corridor_cells(net, zone, layer_index)
    return _svg_grid(net.config.grid.zone_side, cell_px, full_cells, corridor_cells)


def render_zone_overlay(net: AirNetwork, zone, cell_px: int = 4) -> str:
    """Combined SVG of one zone: all layers' corridors in red over the lowest layer's full cells."""
    zone = ZoneCoord(*zone)
    if zone not in net.corridors:
        raise ValueError(f"zone {tuple(zone)} is not part of this network")
    layer_indices = sorted(net.corridors[zone])
    mask = net.full_masks.get((zone, layer_indices[0])) if layer_indices else None
    full_cells = {(int(li), int(lj)) for li, lj in zip(*np.nonzero(mask))} if mask is not None else set()
    corridor_cells: set = set()
    for layer_index in layer_indices:
        corridor_cells |= _local_corridor_cells(net, zone, layer_index)
    return _svg_grid(net.config.grid.zone_side, cell_px, full_cells - corridor_cells, corridor_cells)


def render_psi(field: PsiField) -> bytes:
    """Grayscale PGM of a solved field, [min, max] mapped to [0, 255]."""
    return encode_pgm(psi_to_image(field))
