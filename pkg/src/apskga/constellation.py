"""APSK ring layouts, symmetry-constrained gene encodings and labeled constellations.

A constellation is stored with its points ordered by alphabet value, so that
``c.value[k] == k`` for every valid constellation and array positions double
as labels in the channel code.
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
RADIUS_EPS = 1e-3


class GeneError(ValueError):
    """A gene vector violates its layout/symmetry contract."""


class DocumentError(ValueError):
    """A constellation document could not be parsed."""


@dataclass(frozen=True)
class RingLayout:
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if not counts or any(c < 1 for c in counts):
            raise ValueError(f"ring counts must be positive, got {counts}")
        m = sum(counts)
        if m < 2 or m & (m - 1):
            raise ValueError(f"alphabet size {m} is not a power of two")

    @property
    def n_rings(self) -> int:
        return len(self.counts)

    @property
    def M(self) -> int:
        return sum(self.counts)

    @property
    def name(self) -> str:
        return f"{self.M}apsk" if self in PRESETS.values() else "+".join(map(str, self.counts))


LAYOUT_16 = RingLayout((4, 12))
LAYOUT_32 = RingLayout((4, 12, 16))
PRESETS = {"16apsk": LAYOUT_16, "32apsk": LAYOUT_32}


def layout_from_name(name: str) -> RingLayout:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown layout {name!r}; choose from {sorted(PRESETS)}") from None


class SymmetryMode(enum.Enum):
    DOUBLE = "double"
    SINGLE = "single"
    NONE = "none"

    @property
    def fold(self) -> int:
        return {"double": 4, "single": 2, "none": 1}[self.value]

    @property
    def phase_upper(self) -> float:
        return TWO_PI / self.fold

    @classmethod
    def parse(cls, text: str | SymmetryMode) -> SymmetryMode:
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).lower())
        except ValueError:
            raise ValueError(f"unknown symmetry {text!r}; choose double, single or none") from None


def _ring_blocks(layout: RingLayout, fold: int) -> list[int]:
    """Ring index of each phase gene: contiguous blocks, inner ring first."""
    rings = []
    for ring, count in enumerate(layout.counts):
        if count % fold:
            raise GeneError(
                f"ring {ring} holds {count} symbols, not divisible by symmetry fold {fold}"
            )
        rings.extend([ring] * (count // fold))
    return rings


def gene_count(layout: RingLayout, symmetry: SymmetryMode) -> int:
    return layout.n_rings - 1 + layout.M // symmetry.fold


def gene_bounds(layout: RingLayout, symmetry: SymmetryMode) -> list[tuple[float, float]]:
    """(lower, upper) for every gene: radii first, then phases."""
    _ring_blocks(layout, symmetry.fold)
    radii = [(RADIUS_EPS, 1.0 - RADIUS_EPS)] * (layout.n_rings - 1)
    phases = [(0.0, symmetry.phase_upper)] * (layout.M // symmetry.fold)
    return radii + phases


@dataclass(frozen=True)
class GeneVector:
    radii_genes: tuple[float, ...]
    phase_genes: tuple[float, ...]
    layout: RingLayout
    symmetry: SymmetryMode

    def __post_init__(self) -> None:
        object.__setattr__(self, "radii_genes", tuple(float(r) for r in self.radii_genes))
        object.__setattr__(self, "phase_genes", tuple(float(t) for t in self.phase_genes))
        object.__setattr__(self, "symmetry", SymmetryMode.parse(self.symmetry))

    @classmethod
    def from_array(
        cls, x: Sequence[float], layout: RingLayout, symmetry: SymmetryMode
    ) -> GeneVector:
        x = [float(v) for v in x]
        nr = layout.n_rings - 1
        return cls(tuple(x[:nr]), tuple(x[nr:]), layout, symmetry)

    def to_array(self) -> np.ndarray:
        return np.array(self.radii_genes + self.phase_genes, dtype=float)

    def check(self) -> None:
        """Raise GeneError naming the first offending gene."""
        layout, sym = self.layout, self.symmetry
        if len(self.radii_genes) != layout.n_rings - 1:
            raise GeneError(
                f"expected {layout.n_rings - 1} radius genes, got {len(self.radii_genes)}"
            )
        n_phase = layout.M // sym.fold
        if len(self.phase_genes) != n_phase:
            raise GeneError(f"expected {n_phase} phase genes, got {len(self.phase_genes)}")
        _ring_blocks(layout, sym.fold)
        for i, r in enumerate(self.radii_genes):
            if not (0.0 < r < 1.0) or not math.isfinite(r):
                raise GeneError(f"radius gene {i} = {r!r} outside (0, 1)")
        upper = sym.phase_upper
        for i, t in enumerate(self.phase_genes):
            if not (0.0 <= t <= upper) or not math.isfinite(t):
                raise GeneError(
                    f"phase gene {i} = {t!r} outside [0, {upper:.6f}] for {sym.value} symmetry"
                )


class Point(NamedTuple):
    ring: int
    radius: float
    phase: float
    value: int


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Constellation:
    """M labeled APSK points as parallel read-only arrays."""

    ring: np.ndarray
    radius: np.ndarray
    phase: np.ndarray
    value: np.ndarray
    layout: RingLayout
    symmetry: SymmetryMode | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        ring = np.asarray(self.ring, dtype=np.int64)
        order = np.argsort(np.asarray(self.value, dtype=np.int64), kind="stable")
        object.__setattr__(self, "ring", _frozen(ring[order]))
        object.__setattr__(self, "radius", _frozen(np.asarray(self.radius, dtype=float)[order]))
        object.__setattr__(self, "phase", _frozen(np.asarray(self.phase, dtype=float)[order]))
        object.__setattr__(self, "value", _frozen(np.asarray(self.value, dtype=np.int64)[order]))
        if self.symmetry is not None:
            object.__setattr__(self, "symmetry", SymmetryMode.parse(self.symmetry))

    @property
    def M(self) -> int:
        return len(self.value)

    @property
    def points(self) -> list[Point]:
        return [
            Point(int(k), float(r), float(t), int(v))
            for k, r, t, v in zip(self.ring, self.radius, self.phase, self.value)
        ]

    @property
    def symbols(self) -> np.ndarray:
        """Complex baseband points, index = position in value order."""
        return self.radius * np.exp(1j * self.phase)

    def ring_radii(self) -> list[float]:
        return [float(self.radius[self.ring == k][0]) for k in range(self.layout.n_rings)
                if np.any(self.ring == k)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Constellation):
            return NotImplemented
        return (
            self.layout == other.layout
            and self.symmetry == other.symmetry
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("ring", "radius", "phase", "value")
            )
        )


def expand(genes: GeneVector) -> Constellation:
    """Unfold a gene vector into the full labeled constellation.

    Radii genes are sorted ascending first (the repair step for operators
    that swap ring order). Mirrored copies carry ``value + q * M/fold``.
    """
    genes.check()
    layout, sym = genes.layout, genes.symmetry
    M = layout.M
    radii = sorted(genes.radii_genes) + [1.0]
    theta = np.array(genes.phase_genes)
    base_ring = np.array(_ring_blocks(layout, sym.fold))
    base_value = np.arange(len(theta))
    block = M // sym.fold

    if sym is SymmetryMode.NONE:
        copies = [theta]
    elif sym is SymmetryMode.SINGLE:
        copies = [theta, (TWO_PI - theta) % TWO_PI]
    else:
        copies = [theta, math.pi - theta, math.pi + theta, (TWO_PI - theta) % TWO_PI]

    phases = np.concatenate(copies)
    values = np.concatenate([base_value + q * block for q in range(len(copies))])
    rings = np.tile(base_ring, len(copies))
    return Constellation(
        ring=rings,
        radius=np.array(radii)[rings],
        phase=phases,
        value=values,
        layout=layout,
        symmetry=sym,
    )


def validate(c: Constellation) -> list[str]:
    """Every invariant violation of ``c``; an empty list means valid."""
    out: list[str] = []
    M = c.layout.M
    seen: dict[int, int] = {}
    for v in c.value.tolist():
        seen[v] = seen.get(v, 0) + 1
    for v, n in sorted(seen.items()):
        if n > 1:
            out.append(f"duplicate label {v}")
        if not 0 <= v < M:
            out.append(f"label {v} outside 0..{M - 1}")
    missing = sorted(set(range(M)) - set(seen))
    if missing:
        out.append(f"missing labels {missing}")
    if len(c.value) != M:
        out.append(f"{len(c.value)} points for alphabet size {M}")
    for k, expected in enumerate(c.layout.counts):
        n = int(np.sum(c.ring == k))
        if n != expected:
            out.append(f"ring {k} has {n} points, layout requires {expected}")
    bad_rings = sorted(set(c.ring.tolist()) - set(range(c.layout.n_rings)))
    if bad_rings:
        out.append(f"ring indices {bad_rings} outside layout")
    for k in range(c.layout.n_rings):
        r = c.radius[c.ring == k]
        if r.size and not np.all(r == r[0]):
            out.append(f"ring {k} points disagree on radius")
    outer = c.radius[c.ring == c.layout.n_rings - 1]
    if outer.size and not np.allclose(outer, 1.0, rtol=0, atol=1e-12):
        out.append(f"outer radius ≠ 1 (got {float(outer[0]):g})")
    if np.any(c.radius <= 0) or np.any(c.radius > 1.0 + 1e-12):
        out.append("radius outside (0, 1]")
    if not np.all(np.isfinite(c.phase)):
        out.append("non-finite phase")
    return out


def reference_constellation(layout: RingLayout, r_inner: Sequence[float]) -> Constellation:
    """Uniformly spaced rings, phase offset pi/count, labels sequential by ring."""
    r_inner = [float(r) for r in r_inner]
    if len(r_inner) != layout.n_rings - 1:
        raise GeneError(f"expected {layout.n_rings - 1} inner radii, got {len(r_inner)}")
    radii = r_inner + [1.0]
    if any(not 0 < r < 1 for r in r_inner) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise GeneError(f"inner radii must be increasing and inside (0, 1), got {r_inner}")
    ring, radius, phase = [], [], []
    for k, count in enumerate(layout.counts):
        step = TWO_PI / count
        for i in range(count):
            ring.append(k)
            radius.append(radii[k])
            phase.append(step / 2 + i * step)
    return Constellation(
        ring=ring, radius=radius, phase=phase, value=np.arange(layout.M), layout=layout,
        name="uniform",
    )


# -- documents ---------------------------------------------------------------

FORMAT_TAG = "apsk-constellation/1"


def to_record(c: Constellation) -> dict:
    rec = {
        "format": FORMAT_TAG,
        "name": c.name,
        "layout": list(c.layout.counts),
        "symmetry": c.symmetry.value if c.symmetry else None,
        "points": [
            {"ring": p.ring, "radius": p.radius, "phase": p.phase, "value": p.value}
            for p in c.points
        ],
    }
    if c.meta:
        rec["meta"] = c.meta
    return rec


def dumps(c: Constellation) -> str:
    # json writes shortest round-trip reprs, so float fields survive exactly
    return json.dumps(to_record(c), indent=1) + "\n"


def _field(obj: dict, key: str, where: str, kind: type | tuple[type, ...]):
    if key not in obj:
        raise DocumentError(f"{where}: missing field {key!r}")
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, kind):
        raise DocumentError(f"{where}: field {key!r} has wrong type {type(val).__name__}")
    return val


def from_record(rec: dict) -> Constellation:
    if not isinstance(rec, dict):
        raise DocumentError("document root must be an object")
    counts = _field(rec, "layout", "document", list)
    try:
        layout = RingLayout(tuple(counts))
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"document: bad layout {counts!r}: {exc}") from None
    sym_text = rec.get("symmetry")
    try:
        sym = SymmetryMode.parse(sym_text) if sym_text is not None else None
    except ValueError as exc:
        raise DocumentError(f"document: {exc}") from None
    points = _field(rec, "points", "document", list)
    ring, radius, phase, value = [], [], [], []
    for i, p in enumerate(points):
        where = f"points[{i}]"
        if not isinstance(p, dict):
            raise DocumentError(f"{where}: expected an object")
        ring.append(_field(p, "ring", where, int))
        radius.append(float(_field(p, "radius", where, (int, float))))
        phase.append(float(_field(p, "phase", where, (int, float))))
        value.append(_field(p, "value", where, int))
    return Constellation(
        ring=ring, radius=radius, phase=phase, value=value, layout=layout, symmetry=sym,
        name=str(rec.get("name", "")), meta=dict(rec.get("meta", {})),
    )


def loads(text: str) -> Constellation:
    try:
        rec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return from_record(rec)


def load(path) -> Constellation:
    with open(path, encoding="utf-8") as fh:
        c = loads(fh.read())
    if not c.name:
        c = replace(c, name=os.path.splitext(os.path.basename(str(path)))[0])
    return c


def save(c: Constellation, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(c))

