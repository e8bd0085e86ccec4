"""Kernels and coefficient data for the nonlocal flow.

Three ingredients drive the evolution: a spatial kernel J weighting each
offset between nodes, an odd range kernel A acting on value differences,
and a reaction term f.  This module builds and validates all three.

Spatial kernels are tabulated on integer node offsets and rescaled so the
discrete integral (node volume times the weight sum) is exactly one, the
same normalization the continuum problem puts on J.  Range kernels come in
the families

* ``linear``              A(s) = s
* ``p_laplacian``         A(s) = |s|^(p-2) s, p > 1
* ``variable_exponent``   A(s) = |s|^(p(|s|)-2) s with a tabulated,
                          non-increasing exponent function
* ``spatial_exponent``    A(x, y, s) = |s|^(q-2) s where q is the exponent
                          function evaluated at the reference-field
                          difference between y and x
* ``bilateral_gaussian``  A(s) = s exp(-s^2 / h^2)
* ``mollified``           a smoothed copy of another family, see
                          :func:`mollify_range_kernel`
* ``custom``              any callable, for experiments and validation
                          tests

Note the bilateral family multiplies the Gaussian window by s.  The bare
window exp(-s^2/h^2) familiar from image filters is even in s, which an
odd range kernel cannot be; the extra factor of s is what makes the
classical filter's window fit this framework, and
:func:`validate_assumptions` flags the bare form if someone supplies it as
a custom kernel.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GridMismatchError, KernelValidationError
from .grid import Field, Grid

RANGE_FAMILIES = (
    "linear",
    "p_laplacian",
    "variable_exponent",
    "spatial_exponent",
    "bilateral_gaussian",
    "mollified",
    "custom",
)

REACTION_FAMILIES = ("zero", "linear_decay", "affine", "logistic", "custom_table")


# ---------------------------------------------------------------------------
# spatial kernels


@dataclass(frozen=True)
class SpatialKernelTable:
    """A spatial kernel sampled on integer node offsets.

    ``offsets`` has shape (K, dim) and ``weights`` shape (K,).  Entries are
    sorted lexicographically by offset, which fixes the evaluation order of
    every loop that walks the table and so keeps runs reproducible.
    ``normalization`` records the constant the raw samples were divided by
    to reach a unit discrete integral.
    """

    grid: Grid
    radius: float
    offsets: np.ndarray
    weights: np.ndarray
    normalization: float

    def __post_init__(self):
        offsets = np.atleast_2d(np.asarray(self.offsets, dtype=np.int64))
        weights = np.asarray(self.weights, dtype=np.float64)
        if offsets.shape[1] != self.grid.dim or offsets.shape[0] != weights.shape[0]:
            raise ConfigurationError("kernel table shapes do not match the grid")
        order = np.lexsort(offsets.T[::-1])
        object.__setattr__(self, "offsets", offsets[order])
        object.__setattr__(self, "weights", weights[order])

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    def discrete_mass(self) -> float:
        """Node volume times the weight sum; one for conformant kernels."""
        return self.grid.node_volume * float(np.sum(self.weights))

    def weight_of(self, offset) -> float:
        """Weight stored for one offset, or 0.0 if absent."""
        key = np.asarray(offset, dtype=np.int64)
        hit = np.flatnonzero(np.all(self.offsets == key, axis=1))
        return float(self.weights[hit[0]]) if hit.size else 0.0


def _candidate_offsets(grid: Grid):
    ranges = [np.arange(-(c - 1), c) for c in grid.counts]
    if grid.dim == 1:
        return ranges[0][:, None]
    a, b = np.meshgrid(*ranges, indexing="ij")
    return np.stack([a.ravel(), b.ravel()], axis=-1)


def _physical_sq_norm(grid: Grid, offsets: np.ndarray) -> np.ndarray:
    acc = np.zeros(offsets.shape[0])
    for k in range(grid.dim):
        acc += (offsets[:, k] * grid.spacing[k]) ** 2
    return acc


def make_spatial_kernel(grid: Grid, family: str, radius: float = 0.0, table=None) -> SpatialKernelTable:
    """Build a spatial kernel table on a grid.

    Parameters
    ----------
    grid : Grid
    family : str
        ``gaussian``, ``box``, or ``custom_table``.
    radius : float
        Length scale.  The Gaussian is exp(-|x|^2 / radius^2), truncated to
        zero where |x| >= 4 radius; the box is the indicator of the ball
        |x| <= radius.
    table : (offsets, weights), optional
        Raw samples for ``custom_table``.  They must be even under offset
        negation, with bit-identical weights, and non-negative; violations
        raise :class:`KernelValidationError` listing the offenders.

    Whatever the family, raw weights are divided by their discrete integral
    so that ``node_volume * sum(weights)`` is one; the divisor is kept in
    ``normalization``.
    """
    if family in ("gaussian", "box"):
        if not radius > 0.0:
            raise ConfigurationError(f"kernel radius must be positive, got {radius}")
        cand = _candidate_offsets(grid)
        rsq = _physical_sq_norm(grid, cand)
        if family == "gaussian":
            keep = rsq < (4.0 * radius) ** 2
            cand = cand[keep]
            raw = np.exp(-rsq[keep] / (radius * radius))
        else:
            keep = rsq <= radius * radius
            cand = cand[keep]
            raw = np.ones(int(np.count_nonzero(keep)))
    elif family == "custom_table":
        if table is None:
            raise ConfigurationError("custom_table kernels need an (offsets, weights) table")
        cand = np.atleast_2d(np.asarray(table[0], dtype=np.int64))
        raw = np.asarray(table[1], dtype=np.float64)
        if cand.shape[1] != grid.dim or cand.shape[0] != raw.shape[0]:
            raise ConfigurationError("kernel table shapes do not match the grid")
        _check_table_validity(cand, raw)
        keep = raw != 0.0
        cand, raw = cand[keep], raw[keep]
        radius = float(np.sqrt(np.max(_physical_sq_norm(grid, cand)))) if cand.size else 0.0
    else:
        raise ConfigurationError(f"unknown spatial kernel family {family!r}")

    if cand.shape[0] == 0:
        raise ConfigurationError("spatial kernel support contains no offsets")
    normalization = grid.node_volume * float(np.sum(raw))
    if not normalization > 0.0:
        raise ConfigurationError("spatial kernel has zero discrete mass")
    return SpatialKernelTable(
        grid=grid,
        radius=float(radius),
        offsets=cand,
        weights=raw / normalization,
        normalization=normalization,
    )


def _check_table_validity(offsets: np.ndarray, weights: np.ndarray):
    bad_sign = [tuple(o) for o, w in zip(offsets, weights) if w < 0 or not math.isfinite(w)]
    if bad_sign:
        raise KernelValidationError(
            f"kernel weights must be finite and non-negative; offending offsets {bad_sign}",
            offenders=bad_sign,
        )
    index = {tuple(o): w for o, w in zip(offsets, weights)}
    if len(index) != len(weights):
        dupes = [o for o in map(tuple, offsets) if list(map(tuple, offsets)).count(o) > 1]
        raise KernelValidationError("kernel table lists an offset twice", offenders=dupes)
    uneven = []
    for o, w in index.items():
        mirror = tuple(-c for c in o)
        if mirror not in index or index[mirror] != w:
            uneven.append(o)
    if uneven:
        raise KernelValidationError(
            f"kernel table is not even under offset negation; offending offsets {sorted(uneven)}",
            offenders=sorted(uneven),
        )


# ---------------------------------------------------------------------------
# mollifier

_BUMP_PANELS = 1 << 16
_bump_cache = {}


def bump_profile(s) -> np.ndarray:
    """The standard unnormalized bump exp(-1/(1-s^2)) on (-1, 1), else 0."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


def _bump_quadrature(n_panels: int):
    h = 2.0 / n_panels
    mid = -1.0 + h * (np.arange(n_panels) + 0.5)
    return mid, h


def bump_mass() -> float:
    """Integral of the unnormalized bump over (-1, 1).

    Midpoint rule with a fixed fine panel count; the integrand is smooth and
    flat to all orders at the endpoints, so this converges far past float64
    resolution.
    """
    if "mass" not in _bump_cache:
        mid, h = _bump_quadrature(_BUMP_PANELS)
        _bump_cache["mass"] = h * float(np.sum(bump_profile(mid)))
    return _bump_cache["mass"]


def mollifier_moment(alpha: float) -> float:
    """Integral of the unit-mass bump times |s|^alpha over (-1, 1)."""
    key = ("moment", float(alpha))
    if key not in _bump_cache:
        mid, h = _bump_quadrature(_BUMP_PANELS)
        raw = h * float(np.sum(bump_profile(mid) * np.abs(mid) ** alpha))
        _bump_cache[key] = raw / bump_mass()
    return _bump_cache[key]


def mollifier_density(n: int, s) -> np.ndarray:
    """The unit-mass mollifier at level n: n * bump(n s) / bump mass."""
    return n * bump_profile(np.asarray(s) * n) / bump_mass()


@dataclass(frozen=True)
class MollifierSpec:
    """Quadrature data for one mollification level.

    ``nodes`` are midpoints on (-1, 1) in the rescaled variable, and
    ``weights`` are bump samples normalized to sum exactly to one, so
    smoothing an affine kernel reproduces it to round-off.
    """

    n: int
    quad_count: int
    nodes: np.ndarray
    weights: np.ndarray


def _mollifier_quadrature(quad_count: int):
    nodes, _ = _bump_quadrature(quad_count)
    w = bump_profile(nodes)
    return nodes, w / np.sum(w)


# ---------------------------------------------------------------------------
# range kernels


class RangeKernel:
    """Odd range kernel A(t, x, y, s).

    All built-in families are autonomous and act through the value
    difference s; the spatial_exponent family additionally reads the
    difference of a reference field between the two nodes.  ``monotone``
    declares non-decreasing dependence on s (the hypothesis behind the
    contraction estimates) and ``holder_alpha`` the Holder exponent used by
    the mollification bounds.
    """

    def __init__(
        self,
        family: str,
        *,
        p: float | None = None,
        h: float | None = None,
        exponent_sigmas=None,
        exponent_values=None,
        reference: Field | None = None,
        base: "RangeKernel | None" = None,
        mollifier: MollifierSpec | None = None,
        fn=None,
        holder_alpha: float = 1.0,
        monotone: bool = False,
    ):
        if family not in RANGE_FAMILIES:
            raise ConfigurationError(f"unknown range kernel family {family!r}")
        self.family = family
        self.p = p
        self.h = h
        self.exponent_sigmas = (
            None if exponent_sigmas is None else np.asarray(exponent_sigmas, dtype=np.float64)
        )
        self.exponent_values = (
            None if exponent_values is None else np.asarray(exponent_values, dtype=np.float64)
        )
        self.reference = reference
        self.base = base
        self.mollifier = mollifier
        self.fn = fn
        self.holder_alpha = float(holder_alpha)
        self.monotone = bool(monotone)

    @property
    def needs_pair_reference(self) -> bool:
        if self.family == "spatial_exponent":
            return True
        return self.family == "mollified" and self.base.needs_pair_reference

    def eval(self, t: float, s, pair_ref=None) -> np.ndarray:
        """Vectorized evaluation at value differences ``s``.

        ``pair_ref`` carries the reference-field differences for the
        spatial_exponent family and is ignored elsewhere.
        """
        s = np.asarray(s, dtype=np.float64)
        if self.family == "linear":
            return s.copy()
        if self.family == "p_laplacian":
            return _signed_power(s, self.p - 1.0)
        if self.family == "variable_exponent":
            a = np.abs(s)
            q = np.interp(a, self.exponent_sigmas, self.exponent_values)
            return _signed_power(s, q - 1.0)
        if self.family == "spatial_exponent":
            if pair_ref is None:
                raise ConfigurationError(
                    "spatial_exponent kernels need the reference differences"
                )
            ref = np.abs(np.asarray(pair_ref, dtype=np.float64))
            q = np.interp(ref, self.exponent_sigmas, self.exponent_values)
            return _signed_power(s, np.broadcast_to(q, s.shape) - 1.0)
        if self.family == "bilateral_gaussian":
            z = s / self.h
            return s * np.exp(-z * z)
        if self.family == "custom":
            return np.asarray(self.fn(t, s), dtype=np.float64)
        # mollified: smooth the base, then symmetrize so oddness is exact
        # in floating point (a - b and -(b - a) share bits).
        raw_pos = self._mollified_raw(t, s, pair_ref)
        raw_neg = self._mollified_raw(t, -s, pair_ref)
        return 0.5 * (raw_pos - raw_neg)

    def _mollified_raw(self, t, s, pair_ref):
        m = self.mollifier
        shifted = s[..., None] - m.nodes / m.n
        if pair_ref is not None:
            pair_ref = np.broadcast_to(np.asarray(pair_ref, dtype=np.float64), s.shape)[..., None]
            pair_ref = np.broadcast_to(pair_ref, shifted.shape)
        vals = self.base.eval(t, shifted, pair_ref)
        return vals @ m.weights


def _signed_power(s: np.ndarray, exponent) -> np.ndarray:
    """sign(s) |s|^exponent with the s = 0 limit pinned to 0.

    Keeping the zero case out of the power avoids 0^0 = 1 artifacts and
    0^negative overflow when tabulated exponents dip below one away from
    the origin.
    """
    a = np.abs(s)
    out = np.zeros_like(a)
    nz = a > 0.0
    e = np.broadcast_to(np.asarray(exponent, dtype=np.float64), a.shape)
    out[nz] = np.sign(s[nz]) * a[nz] ** e[nz]
    return out


def linear_kernel() -> RangeKernel:
    return RangeKernel("linear", holder_alpha=1.0, monotone=True)


def p_laplacian_kernel(p: float) -> RangeKernel:
    if not p > 1.0:
        raise ConfigurationError(f"p_laplacian exponent must exceed 1, got {p}")
    return RangeKernel("p_laplacian", p=float(p), holder_alpha=min(1.0, p - 1.0), monotone=True)


def _validated_exponent_table(sigmas, values):
    sig = np.asarray(sigmas, dtype=np.float64)
    val = np.asarray(values, dtype=np.float64)
    if sig.ndim != 1 or sig.shape != val.shape or sig.size < 2:
        raise ConfigurationError("exponent table needs matching 1-d arrays of length >= 2")
    if sig[0] != 0.0 or np.any(np.diff(sig) <= 0.0):
        raise ConfigurationError("exponent abscissae must start at 0 and increase strictly")
    if np.any(np.diff(val) > 0.0):
        raise ConfigurationError("exponent function must be non-increasing")
    return sig, val


def variable_exponent_kernel(sigmas, values) -> RangeKernel:
    """Kernel |s|^(p(|s|)-2) s with a tabulated exponent function.

    The table is interpolated linearly and held constant past its last
    abscissa.  Admissibility requires p(0) > 2, or p(0) = 2 with the table
    strictly decreasing on its first segment; either keeps the derivative
    of A bounded near s = 0 even though the exponent may fall below one
    farther out.
    """
    sig, val = _validated_exponent_table(sigmas, values)
    p0 = val[0]
    if not (p0 > 2.0 or (p0 == 2.0 and val[1] < val[0])):
        raise ConfigurationError(
            "variable exponent needs p(0) > 2, or p(0) = 2 strictly decreasing at 0"
        )
    return RangeKernel(
        "variable_exponent",
        exponent_sigmas=sig,
        exponent_values=val,
        holder_alpha=1.0,
        monotone=False,
    )


def spatial_exponent_kernel(sigmas, values, reference: Field) -> RangeKernel:
    """Kernel |s|^(q-2) s with q set per node pair from a reference field.

    The exponent is the table evaluated at |r(y) - r(x)| where r is the
    reference field (typically the initial state), so each pair sees a
    fixed exponent and the kernel stays monotone in s as long as the table
    stays above one.
    """
    sig, val = _validated_exponent_table(sigmas, values)
    if not np.min(val) > 1.0:
        raise ConfigurationError("spatial exponent table must stay strictly above 1")
    return RangeKernel(
        "spatial_exponent",
        exponent_sigmas=sig,
        exponent_values=val,
        reference=reference,
        holder_alpha=min(1.0, float(np.min(val)) - 1.0),
        monotone=True,
    )


def bilateral_kernel(h: float) -> RangeKernel:
    if not h > 0.0:
        raise ConfigurationError(f"bilateral width must be positive, got {h}")
    return RangeKernel("bilateral_gaussian", h=float(h), holder_alpha=1.0, monotone=False)


def custom_kernel(fn, *, monotone: bool = False, holder_alpha: float = 1.0) -> RangeKernel:
    return RangeKernel("custom", fn=fn, monotone=monotone, holder_alpha=holder_alpha)


def mollify_range_kernel(base: RangeKernel, n: int, quad_count: int = 129) -> RangeKernel:
    """Smooth a range kernel with the level-n mollifier.

    The returned kernel evaluates the convolution of the base with the
    unit-mass bump of support 1/n by midpoint quadrature on ``quad_count``
    panels, then antisymmetrizes, which keeps A(0) = 0 and oddness exact in
    floating point.  Monotonicity and the Holder constant survive
    mollification, so both declarations are inherited from the base.
    """
    if int(n) != n or n < 1:
        raise ConfigurationError(f"mollification level must be a positive integer, got {n}")
    if quad_count < 64:
        raise ConfigurationError(f"mollifier quadrature needs >= 64 panels, got {quad_count}")
    if base.family == "mollified":
        raise ConfigurationError("refusing to mollify an already mollified kernel")
    probe = np.linspace(-1.0, 1.0, 33)
    vals = base.eval(0.0, probe, np.zeros_like(probe) if base.needs_pair_reference else None)
    if np.max(np.abs(vals + base.eval(0.0, -probe, np.zeros_like(probe) if base.needs_pair_reference else None))) > 1e-12:
        raise ConfigurationError("mollification requires an odd base kernel")
    nodes, weights = _mollifier_quadrature(int(quad_count))
    spec = MollifierSpec(n=int(n), quad_count=int(quad_count), nodes=nodes, weights=weights)
    return RangeKernel(
        "mollified",
        base=base,
        mollifier=spec,
        reference=base.reference,
        holder_alpha=base.holder_alpha,
        monotone=base.monotone,
    )


def eval_range_kernel(spec: RangeKernel, t: float, x: int, y: int, s: float) -> float:
    """Scalar evaluation at a node pair, resolving the pair reference."""
    pair_ref = None
    if spec.needs_pair_reference:
        ref = spec.reference if spec.family != "mollified" else spec.base.reference
        if ref is None:
            raise ConfigurationError("spatial_exponent kernel is missing its reference field")
        pair_ref = np.float64(ref.values[y] - ref.values[x])
    return float(spec.eval(t, np.asarray(float(s)), pair_ref))


# ---------------------------------------------------------------------------
# reactions


class Reaction:
    """Reaction term f(t, x, s); every built-in is autonomous and local.

    ``c_growth`` bounds |f| <= c_growth (1 + |s|) on the declared working
    range, ``l_lipschitz`` bounds the slope there, and ``non_increasing``
    declares monotone decay in s.  The constructors fill all three from
    the family parameters.
    """

    def __init__(
        self,
        family: str,
        *,
        rate: float = 0.0,
        offset: float = 0.0,
        slope: float = 0.0,
        capacity: float = 1.0,
        table=None,
        working_range: tuple = (-2.0, 2.0),
        c_growth: float | None = None,
        l_lipschitz: float | None = None,
        non_increasing: bool | None = None,
    ):
        if family not in REACTION_FAMILIES:
            raise ConfigurationError(f"unknown reaction family {family!r}")
        self.family = family
        self.rate = float(rate)
        self.offset = float(offset)
        self.slope = float(slope)
        self.capacity = float(capacity)
        self.table = None
        if table is not None:
            ts = np.asarray(table[0], dtype=np.float64)
            tf = np.asarray(table[1], dtype=np.float64)
            if ts.ndim != 1 or ts.shape != tf.shape or ts.size < 2 or np.any(np.diff(ts) <= 0):
                raise ConfigurationError("reaction table needs strictly increasing abscissae")
            self.table = (ts, tf)
        lo, hi = working_range
        if not lo < hi:
            raise ConfigurationError("reaction working range is empty")
        self.working_range = (float(lo), float(hi))
        auto_c, auto_l, auto_mono = self._derive_constants()
        self.c_growth = float(auto_c if c_growth is None else c_growth)
        self.l_lipschitz = float(auto_l if l_lipschitz is None else l_lipschitz)
        self.non_increasing = bool(auto_mono if non_increasing is None else non_increasing)

    def _derive_constants(self):
        if self.family == "zero":
            return 0.0, 0.0, True
        if self.family == "linear_decay":
            return self.rate, self.rate, True
        if self.family == "affine":
            return max(self.offset, abs(self.slope)), abs(self.slope), self.slope <= 0.0
        grid = np.linspace(self.working_range[0], self.working_range[1], 4097)
        vals = self.eval(0.0, None, grid)
        c = float(np.max(np.abs(vals) / (1.0 + np.abs(grid))))
        slopes = np.diff(vals) / np.diff(grid)
        return c, float(np.max(np.abs(slopes))), bool(np.all(slopes <= 0.0))

    @property
    def is_zero(self) -> bool:
        return self.family == "zero"

    def eval(self, t: float, x, s) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        if self.family == "zero":
            return np.zeros_like(s)
        if self.family == "linear_decay":
            return -self.rate * s
        if self.family == "affine":
            return self.offset + self.slope * s
        if self.family == "logistic":
            return self.rate * s * (1.0 - s / self.capacity)
        return np.interp(s, self.table[0], self.table[1])


def zero_reaction() -> Reaction:
    return Reaction("zero")


def linear_decay_reaction(rate: float) -> Reaction:
    if rate < 0.0:
        raise ConfigurationError(f"decay rate must be non-negative, got {rate}")
    return Reaction("linear_decay", rate=rate)


def affine_reaction(offset: float, slope: float, working_range=(-2.0, 2.0)) -> Reaction:
    if offset < 0.0:
        raise ConfigurationError(f"affine reaction needs a non-negative offset, got {offset}")
    return Reaction("affine", offset=offset, slope=slope, working_range=working_range)


def logistic_reaction(growth: float, capacity: float, working_range=(-2.0, 2.0)) -> Reaction:
    if growth < 0.0 or not capacity > 0.0:
        raise ConfigurationError("logistic reaction needs growth >= 0 and capacity > 0")
    return Reaction("logistic", rate=growth, capacity=capacity, working_range=working_range)


def custom_table_reaction(s_values, f_values, working_range=None) -> Reaction:
    ts = np.asarray(s_values, dtype=np.float64)
    wr = (float(ts[0]), float(ts[-1])) if working_range is None else working_range
    return Reaction("custom_table", table=(s_values, f_values), working_range=wr)


def eval_reaction(spec: Reaction, t: float, x, s):
    return spec.eval(t, x, s)


# ---------------------------------------------------------------------------
# sampled constants

def _sample_points(radius: float, rng: np.random.Generator, samples: int, exclude: float):
    lin = rng.uniform(-radius, radius, size=samples // 2)
    mags = np.exp(rng.uniform(np.log(max(exclude, 1e-300)), np.log(radius), size=samples - samples // 2))
    signs = rng.choice([-1.0, 1.0], size=mags.shape)
    pts = np.concatenate([lin, signs * mags])
    return pts[np.abs(pts) >= exclude]


def _eval_for_constants(kernel: RangeKernel, rng: np.random.Generator, radius: float, *batches):
    """Evaluate aligned sample batches, sharing one reference draw across them.

    A node pair carries a single reference value, so the two points of a
    difference-quotient pair must see the same reference; drawing fresh
    references per batch would charge the slope samplers for reference
    variation that never happens inside a step.
    """
    if kernel.needs_pair_reference:
        pair_ref = rng.uniform(-radius, radius, size=batches[0].shape)
    else:
        pair_ref = None
    out = [kernel.eval(0.0, s, pair_ref) for s in batches]
    return out[0] if len(out) == 1 else out


def sample_growth_constant(
    kernel: RangeKernel,
    radius: float,
    rng: np.random.Generator,
    samples: int = 4096,
    exclude: float = 1e-8,
) -> float:
    """Largest sampled |A(s)| / |s| on [-radius, radius].

    Points with |s| below ``exclude`` are skipped; for p_laplacian kernels
    with p < 2 the ratio diverges at the origin, so the value returned is a
    statement about the sampled window only and such kernels should run
    with the manual or certificate mu modes rather than this one.
    """
    pts = _sample_points(radius, rng, samples, exclude)
    vals = _eval_for_constants(kernel, rng, radius, pts)
    return float(np.max(np.abs(vals) / np.abs(pts)))


def sample_lipschitz_constant(
    kernel: RangeKernel,
    radius: float,
    rng: np.random.Generator,
    samples: int = 4096,
    exclude: float = 1e-8,
) -> float:
    """Largest sampled difference quotient |A(s1)-A(s2)| / |s1-s2|.

    Mixes wide random pairs with tight pairs (spread 1e-6) so local slopes
    show up; pairs inside the exclusion window around 0 are dropped for the
    same reason as in :func:`sample_growth_constant`.
    """
    base = _sample_points(radius, rng, samples, exclude)
    tight = base + 1e-6 * rng.uniform(0.5, 1.5, size=base.shape)
    wide = _sample_points(radius, rng, samples, exclude)
    s1 = np.concatenate([base, base])
    s2 = np.concatenate([tight, wide])
    keep = (np.abs(s1) >= exclude) & (np.abs(s2) >= exclude) & (s1 != s2)
    s1, s2 = s1[keep], s2[keep]
    v1, v2 = _eval_for_constants(kernel, rng, radius, s1, s2)
    return float(np.max(np.abs(v1 - v2) / np.abs(s1 - s2)))


def sample_holder_constant(
    kernel: RangeKernel,
    alpha: float,
    radius: float,
    rng: np.random.Generator,
    samples: int = 4096,
) -> float:
    """Largest sampled |A(s1)-A(s2)| / |s1-s2|^alpha on [-radius, radius]."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigurationError(f"Holder exponent must lie in (0, 1], got {alpha}")
    s1 = rng.uniform(-radius, radius, size=samples)
    s2 = rng.uniform(-radius, radius, size=samples)
    mirror = rng.uniform(-radius, radius, size=samples // 4)
    s1 = np.concatenate([s1, mirror])
    s2 = np.concatenate([s2, -mirror])
    keep = s1 != s2
    s1, s2 = s1[keep], s2[keep]
    v1, v2 = _eval_for_constants(kernel, rng, radius, s1, s2)
    return float(np.max(np.abs(v1 - v2) / np.abs(s1 - s2) ** alpha))


# ---------------------------------------------------------------------------
# assumption validation


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            mark = "ok" if c.passed else "FAIL"
            lines.append(f"[{mark}] {c.name}" + (f": {c.detail}" if c.detail else ""))
        return "\n".join(lines)


def validate_assumptions(
    table: SpatialKernelTable,
    kernel: RangeKernel,
    reaction: Reaction,
    u0: Field,
    *,
    seed: int = 42,
    samples: int = 256,
) -> ValidationReport:
    """Check the structural hypotheses the well-posedness theory needs.

    Everything is reported; nothing raises.  The checks cover the spatial
    kernel (evenness bit for bit, non-negative weights, unit discrete
    mass), the range kernel (A(0) = 0, oddness, the sign condition
    A(s) s >= 0, symmetry in the node pair, and monotonicity when
    declared), the reaction (f(t, x, 0) >= 0 and the declared growth
    bound), and non-negativity of the initial state.  Sampling uses a
    dedicated generator seeded by ``seed`` so reports are reproducible.
    """
    rng = np.random.default_rng(seed)
    checks = []

    # spatial kernel
    index = {tuple(o): w for o, w in zip(table.offsets, table.weights)}
    uneven = [o for o, w in index.items() if index.get(tuple(-c for c in o)) != w]
    checks.append(
        CheckResult(
            "spatial kernel evenness",
            not uneven,
            "" if not uneven else f"offsets without bit-identical mirror: {sorted(uneven)[:8]}",
        )
    )
    neg = np.flatnonzero(table.weights < 0.0)
    checks.append(
        CheckResult(
            "spatial kernel non-negativity",
            neg.size == 0,
            "" if neg.size == 0 else f"negative weights at table rows {neg[:8].tolist()}",
        )
    )
    mass = table.discrete_mass()
    checks.append(
        CheckResult(
            "spatial kernel unit mass",
            abs(mass - 1.0) <= 1e-10,
            f"discrete mass {mass!r}",
        )
    )

    # range kernel, sampled on a window scaled to the data
    radius = 2.0 * max(1.0, float(np.max(np.abs(u0.values))))
    s = np.concatenate([rng.uniform(-radius, radius, size=samples), [0.0, radius, -radius]])
    pair_ref = None
    if kernel.needs_pair_reference:
        idx = rng.integers(0, u0.grid.node_count, size=(s.size, 2))
        ref_field = kernel.reference if kernel.family != "mollified" else kernel.base.reference
        pair_ref = ref_field.values[idx[:, 1]] - ref_field.values[idx[:, 0]]
    a_pos = kernel.eval(0.0, s, pair_ref)
    a_neg = kernel.eval(0.0, -s, pair_ref)

    zero_val = float(np.abs(kernel.eval(0.0, np.zeros(1), np.zeros(1) if kernel.needs_pair_reference else None))[0])
    checks.append(CheckResult("range kernel vanishes at 0", zero_val <= 1e-12, f"|A(0)| = {zero_val:.3e}"))

    odd_defect = float(np.max(np.abs(a_pos + a_neg)))
    checks.append(
        CheckResult(
            "range kernel oddness",
            odd_defect <= 1e-10 * max(1.0, float(np.max(np.abs(a_pos)))),
            f"max |A(s) + A(-s)| = {odd_defect:.3e}"
            + ("" if odd_defect <= 1e-10 else "; an even window like exp(-s^2/h^2) fails here"),
        )
    )

    sign_defect = float(np.min(a_pos * s))
    checks.append(
        CheckResult(
            "range kernel sign condition",
            sign_defect >= -1e-12,
            f"min A(s) s = {sign_defect:.3e}",
        )
    )

    if kernel.needs_pair_reference:
        swapped = kernel.eval(0.0, s, -np.asarray(pair_ref))
        pair_defect = float(np.max(np.abs(a_pos - swapped)))
    else:
        pair_defect = 0.0
    checks.append(
        CheckResult(
            "range kernel pair symmetry",
            pair_defect <= 1e-12,
            f"max |A(x,y,s) - A(y,x,s)| = {pair_defect:.3e}",
        )
    )

    if kernel.monotone:
        sorted_s = np.sort(s)
        vals = kernel.eval(0.0, sorted_s, np.zeros_like(sorted_s) if kernel.needs_pair_reference else None)
        defect = float(np.min(np.diff(vals)))
        checks.append(
            CheckResult(
                "range kernel monotonicity",
                defect >= -1e-12,
                f"min sampled increment {defect:.3e}",
            )
        )

    # reaction
    f0 = reaction.eval(0.0, None, np.zeros(1))[0]
    checks.append(CheckResult("reaction non-negative at 0", f0 >= 0.0, f"f(0) = {f0!r}"))
    lo, hi = reaction.working_range
    sg = np.linspace(lo, hi, 1025)
    fv = reaction.eval(0.0, None, sg)
    excess = float(np.max(np.abs(fv) - reaction.c_growth * (1.0 + np.abs(sg))))
    checks.append(
        CheckResult(
            "reaction growth bound",
            excess <= 1e-12 * max(1.0, reaction.c_growth),
            f"max |f| - C(1+|s|) = {excess:.3e} on [{lo}, {hi}]",
        )
    )

    # initial state
    min_idx = int(np.argmin(u0.values))
    min_val = float(u0.values[min_idx])
    checks.append(
        CheckResult(
            "initial state non-negativity",
            min_val >= 0.0,
            f"min {min_val!r} at node {min_idx}",
        )
    )

    return ValidationReport(checks=tuple(checks))
