"""Published 16/32-APSK gene values, expanded under this package's label convention."""

from __future__ import annotations

import math
from dataclasses import replace

from .constellation import (LAYOUT_16, LAYOUT_32, Constellation, GeneVector, SymmetryMode,
                            expand)

# name -> (layout, symmetry, radii genes, phase genes, phase offset applied)
_TABLE = {
    "16apsk-baseline-double": (
        LAYOUT_16, "double", [0.6404], [1.0482, 0.9355, 0.6374, 0.4891], 0.0),
    "16apsk-double": (
        LAYOUT_16, "double", [0.8996], [1.0360, 0.8867, 0.5802, 0.4013], 0.0),
    "16apsk-single": (
        LAYOUT_16, "single", [0.9627],
        [2.5650, 2.3592, 2.0128, 1.7317, 1.4188, 1.2107, 0.8849, 0.5372], 0.0),
    "16apsk-none": (
        LAYOUT_16, "none", [0.9593],
        [5.0872, 4.7453, 4.3400, 3.7447, 3.4121, 3.1109, 2.7071, 2.2326,
         1.8925, 1.5490, 1.2567, 1.0438, 0.7340, 0.4687, 0.2205, 0.0699], 0.0),
    # given over [pi/2, 3pi/2] with a y-axis mirror; rotating by -pi/2 turns that
    # into the x-axis mirror used here without changing any distance
    "32apsk-baseline-single": (
        LAYOUT_32, "single", [0.2453, 0.8163],
        [3.9215, 3.8878, 3.7697, 3.6837, 3.4184, 3.6422, 3.2628, 3.1881,
         2.6639, 2.6409, 2.4866, 2.3709, 2.2034, 2.1479, 2.0492, 2.0199], -math.pi / 2),
    "32apsk-double": (
        LAYOUT_32, "double", [0.2446, 0.8285],
        [0.1664, 0.2998, 0.3009, 0.6293, 0.5831, 0.9550, 0.9219, 1.0028], 0.0),
    "32apsk-single": (
        LAYOUT_32, "single", [0.2487, 0.8217],
        [0.5301, 0.7360, 0.7342, 0.8993, 1.1148, 1.2771, 1.4283, 1.5063,
         1.8236, 1.9895, 2.0694, 2.1592, 2.2590, 2.5016, 2.5479, 2.5813], 0.0),
}

NAMES = tuple(_TABLE)


def published_genes(name: str) -> GeneVector:
    layout, sym, radii, phases, offset = _TABLE[name]
    return GeneVector(tuple(radii), tuple(p + offset for p in phases), layout,
                      SymmetryMode.parse(sym))


def published_constellation(name: str) -> Constellation:
    genes = published_genes(name)
    c = expand(genes)
    offset = _TABLE[name][4]
    meta = {"radii_genes": list(genes.radii_genes), "phase_genes": list(genes.phase_genes)}
    if offset:
        meta["phase_offset"] = offset
    return replace(c, name=name, meta=meta)


def all_published() -> dict[str, Constellation]:
    return {name: published_constellation(name) for name in NAMES}
