"""Uniform cell-centered grids and scalar fields on them.

A grid covers a box in one or two dimensions with axis-aligned cells of
equal size.  Nodes sit at cell centers, so the first node along an axis is
half a spacing inside the lower extent.  Nodes are ordered row-major: the
first axis is the slow one.  Quadrature is the plain midpoint rule, which
on this layout is just ``node_volume`` times a sum.

Fields are flat float64 arrays tied to their grid.  Constructing a field
validates length and finiteness, so any operation that hands back a
``Field`` has produced finite values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import ConfigurationError, GridMismatchError

FIELD_FILE_MAGIC = "# nldiff-field v1"


@dataclass(frozen=True)
class Grid:
    """Geometry of a uniform cell-centered grid.

    Attributes
    ----------
    dim : int
        1 or 2.
    extents : tuple of (float, float)
        Per-axis interval (lo, hi), lo < hi.
    counts : tuple of int
        Nodes per axis, each at least 2.
    spacing : tuple of float
        Cell size per axis, (hi - lo) / count.
    node_volume : float
        Product of the spacings; the quadrature weight of one node.
    total_measure : float
        Volume of the whole box.
    """

    dim: int
    extents: tuple
    counts: tuple
    spacing: tuple = dataclass_field(init=False)
    node_volume: float = dataclass_field(init=False)
    total_measure: float = dataclass_field(init=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError(f"grid dimension must be 1 or 2, got {self.dim}")
        if len(self.extents) != self.dim or len(self.counts) != self.dim:
            raise ConfigurationError(
                f"expected {self.dim} extents and counts, got "
                f"{len(self.extents)} and {len(self.counts)}"
            )
        for lo, hi in self.extents:
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise ConfigurationError(f"degenerate extent ({lo}, {hi})")
        for c in self.counts:
            if int(c) != c or c < 2:
                raise ConfigurationError(f"axis count must be an integer >= 2, got {c}")
        spacing = tuple(
            (hi - lo) / c for (lo, hi), c in zip(self.extents, self.counts)
        )
        object.__setattr__(self, "extents", tuple((float(lo), float(hi)) for lo, hi in self.extents))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "node_volume", float(np.prod(spacing)))
        object.__setattr__(
            self, "total_measure", float(np.prod([hi - lo for lo, hi in self.extents]))
        )

    @property
    def node_count(self) -> int:
        return int(np.prod(self.counts))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        lo, _ = self.extents[axis]
        h = self.spacing[axis]
        return lo + h * (np.arange(self.counts[axis]) + 0.5)

    def node_coordinates(self) -> np.ndarray:
        """All node positions, shape (node_count, dim), in storage order."""
        axes = [self.axis_coordinates(k) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def flat_index(self, multi) -> int:
        """Row-major flat index of a per-axis index tuple."""
        idx = 0
        for k, i in enumerate(multi):
            if not 0 <= i < self.counts[k]:
                raise ConfigurationError(f"index {i} outside axis {k}")
            idx = idx * self.counts[k] + i if k else i
        return idx

    def nearest_index(self, point) -> int:
        """Flat index of the node whose cell contains ``point``."""
        multi = []
        for k, x in enumerate(np.atleast_1d(point)):
            lo, _ = self.extents[k]
            i = int(round((x - lo) / self.spacing[k] - 0.5))
            multi.append(min(max(i, 0), self.counts[k] - 1))
        return self.flat_index(tuple(multi))


def build_grid(dim, extents, counts) -> Grid:
    """Construct a validated :class:`Grid`.

    Parameters
    ----------
    dim : int
        1 or 2.
    extents : sequence of (lo, hi) pairs
        One interval per axis.
    counts : sequence of int
        Nodes per axis.
    """
    return Grid(dim=int(dim), extents=tuple(tuple(e) for e in extents), counts=tuple(counts))


@dataclass(frozen=True)
class Field:
    """A scalar field sampled at the nodes of a grid.

    Values are stored as a flat float64 array in the grid's row-major node
    order.  Construction checks the length and rejects non-finite entries.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] != self.grid.node_count:
            raise GridMismatchError(
                f"field has {values.size} values, grid has {self.grid.node_count} nodes"
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ConfigurationError(f"field value at node {bad} is not finite")
        object.__setattr__(self, "values", values)

    def reshaped(self) -> np.ndarray:
        """The values as an array shaped like the grid."""
        return self.values.reshape(self.grid.counts)


def _require_same_grid(grid: Grid, f: Field):
    if f.grid != grid:
        raise GridMismatchError("field does not live on the given grid")


def integrate(grid: Grid, f: Field) -> float:
    """Midpoint-rule integral of a field over the grid's box."""
    _require_same_grid(grid, f)
    return grid.node_volume * float(np.sum(f.values))


def lp_norm(grid: Grid, f: Field, p) -> float:
    """Discrete L^p norm, p >= 1 or infinity.

    The finite-p norm is the quadrature of |f|^p raised to 1/p; infinity
    gives the plain max of |f|.
    """
    _require_same_grid(grid, f)
    if p == math.inf:
        return float(np.max(np.abs(f.values))) if f.values.size else 0.0
    p = float(p)
    if not p >= 1.0:
        raise ConfigurationError(f"norm exponent must be >= 1 or infinity, got {p}")
    return float((grid.node_volume * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_field(f: Field, path) -> None:
    """Write a field to CSV with enough metadata to rebuild its grid.

    Layout: a magic comment line, then dim / extents / counts comment
    lines, then one value per line at 17 significant digits (lossless for
    float64).
    """
    g = f.grid
    lines = [FIELD_FILE_MAGIC]
    lines.append(f"# dim {g.dim}")
    lines.append("# extents " + " ".join(_fmt(v) for pair in g.extents for v in pair))
    lines.append("# counts " + " ".join(str(c) for c in g.counts))
    lines.extend(_fmt(v) for v in f.values)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path) -> Field:
    """Read a field written by :func:`save_field`."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].strip() != FIELD_FILE_MAGIC:
        raise ConfigurationError(f"{path}: missing '{FIELD_FILE_MAGIC}' header")
    header = {}
    body_start = 1
    for ln in lines[1:4]:
        if not ln.startswith("# "):
            break
        key, _, rest = ln[2:].partition(" ")
        header[key] = rest.split()
        body_start += 1
    try:
        dim = int(header["dim"][0])
        flat_ext = [float(v) for v in header["extents"]]
        counts = [int(v) for v in header["counts"]]
    except (KeyError, IndexError, ValueError) as exc:
        raise ConfigurationError(f"{path}: malformed field header") from exc
    if len(flat_ext) != 2 * dim:
        raise ConfigurationError(f"{path}: expected {2 * dim} extent entries")
    extents = [(flat_ext[2 * k], flat_ext[2 * k + 1]) for k in range(dim)]
    grid = build_grid(dim, extents, counts)
    values = []
    for i, ln in enumerate(lines[body_start:], start=body_start + 1):
        if not ln.strip():
            continue
        try:
            values.append(float(ln))
        except ValueError as exc:
            raise ConfigurationError(f"{path}, line {i}: bad value {ln!r}") from exc
    return Field(grid, np.asarray(values))
