"""Binned empirical distributions and the seeded roulette-wheel sampler.

Everything here is purely empirical: histograms over fixed-width bins,
conditional tables (one histogram per conditioning bin) and sparse joint
conditional tables keyed by tuples of conditioning bins.  Sampling is done
by roulette-wheel selection over integer counts followed by a uniform draw
inside the selected bin.
"""

from __future__ import annotations

import bisect
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NO_OCCURRENCE",
    "BinSpec",
    "ConditionalTable",
    "EmptyDistributionError",
    "Histogram1D",
    "JointConditionalTable",
    "SeededSampler",
    "build_conditional",
    "build_histogram",
    "build_joint_conditional",
    "quantile",
    "rws_index",
    "rws_sample",
]


class EmptyDistributionError(ValueError):
    """Raised when a distribution has no mass to normalize or sample from."""


@dataclass(frozen=True)
class BinSpec:
    """Contiguous half-open bins ``[lo + i*width, lo + (i+1)*width)``."""

    lower_edge: float
    width: float
    count: int
    unit: str = ""

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"bin width must be positive, got {self.width}")
        if self.count < 1:
            raise ValueError(f"bin count must be >= 1, got {self.count}")

    @property
    def upper_edge(self) -> float:
        return self.lower_edge + self.width * self.count

    @property
    def edges(self) -> np.ndarray:
        return self.lower_edge + self.width * np.arange(self.count + 1)

    def bin_lo(self, i: int) -> float:
        return self.lower_edge + i * self.width

    def index(self, x: float) -> int | None:
        """Bin index holding ``x``, or None when ``x`` is out of range."""
        lo, w, n = self.lower_edge, self.width, self.count
        if not (lo <= x < lo + w * n):
            return None
        i = min(int((x - lo) // w), n - 1)
        # the quotient can land one bin off right at an edge
        if x < lo + i * w:
            i -= 1
        elif i + 1 < n and x >= lo + (i + 1) * w:
            i += 1
        return i

    def indices(self, xs) -> np.ndarray:
        """Vectorised :meth:`index`; out-of-range samples map to -1."""
        xs = np.asarray(xs, dtype=float)
        out = np.full(xs.shape, -1, dtype=np.int64)
        ok = (xs >= self.lower_edge) & (xs < self.upper_edge)
        out[ok] = [self.index(x) for x in xs[ok]]
        return out

    def value_in_bin(self, i: int, v: float) -> float:
        """Map ``v`` in [0, 1) to a point of bin ``i`` that re-bins to ``i``."""
        lo = self.bin_lo(i)
        hi = self.bin_lo(i + 1)
        x = lo + v * self.width
        if x >= hi:
            x = math.nextafter(hi, lo)
        # same edges as index(), compared directly on the hot path
        while not lo <= x < hi:
            x = math.nextafter(x, lo) if x > lo else math.nextafter(x, hi)
        return x

    def midpoint(self, i: int) -> float:
        return self.lower_edge + (i + 0.5) * self.width

    def to_dict(self) -> dict:
        return {"lower_edge": self.lower_edge, "width": self.width,
                "count": self.count, "unit": self.unit}

    @classmethod
    def from_dict(cls, d: dict) -> BinSpec:
        return cls(float(d["lower_edge"]), float(d["width"]), int(d["count"]), d.get("unit", ""))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Histogram1D:
    """Integer bin counts over a :class:`BinSpec`.

    ``out_of_range`` is the number of samples that were offered to the
    builder but fell outside the bin range; they are not part of ``counts``.
    """

    spec: BinSpec
    counts: np.ndarray
    out_of_range: int = 0
    _cum: tuple = field(init=False, repr=False)

    def __post_init__(self):
        counts = _frozen(self.counts)
        if counts.shape != (self.spec.count,):
            raise ValueError(f"expected {self.spec.count} counts, got shape {counts.shape}")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "_cum", tuple(np.cumsum(counts).tolist()))

    @property
    def total(self) -> int:
        return self._cum[-1]

    @property
    def probabilities(self) -> np.ndarray:
        if self.total == 0:
            raise EmptyDistributionError("histogram has no mass")
        return self.counts / self.total

    @property
    def nonempty_bins(self) -> list[int]:
        return np.flatnonzero(self.counts).tolist()

    def __eq__(self, other):
        if not isinstance(other, Histogram1D):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.counts, other.counts)

    def to_rows(self) -> list[dict]:
        """Bin edges and probabilities, one dict per bin (for table export)."""
        p = self.probabilities if self.total else np.zeros(self.spec.count)
        return [
            {"lo": self.spec.bin_lo(i), "hi": self.spec.bin_lo(i + 1),
             "count": int(self.counts[i]), "probability": float(p[i])}
            for i in range(self.spec.count)
        ]


@dataclass(frozen=True, eq=False)
class ConditionalTable:
    """Counts of a target variable per conditioning bin (rows)."""

    cond_spec: BinSpec
    target_spec: BinSpec
    counts: np.ndarray

    def __post_init__(self):
        counts = _frozen(self.counts)
        if counts.shape != (self.cond_spec.count, self.target_spec.count):
            raise ValueError(f"counts shape {counts.shape} does not match specs")
        object.__setattr__(self, "counts", counts)
        rows = tuple(Histogram1D(self.target_spec, counts[r]) for r in range(self.cond_spec.count))
        object.__setattr__(self, "_rows", rows)

    def row(self, r: int) -> Histogram1D:
        return self._rows[r]

    @property
    def empty_rows(self) -> list[int]:
        return [r for r in range(self.cond_spec.count) if self._rows[r].total == 0]

    def row_probabilities(self) -> np.ndarray:
        """Row-normalised matrix; empty rows are all zero."""
        tot = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            p = np.where(tot > 0, self.counts / np.where(tot > 0, tot, 1), 0.0)
        return p

    def __eq__(self, other):
        if not isinstance(other, ConditionalTable):
            return NotImplemented
        return (self.cond_spec == other.cond_spec and self.target_spec == other.target_spec
                and np.array_equal(self.counts, other.counts))


class _NoOccurrence:
    __slots__ = ()

    def __repr__(self):
        return "NO_OCCURRENCE"

    def __bool__(self):
        return False


NO_OCCURRENCE = _NoOccurrence()
"""Returned by :meth:`JointConditionalTable.lookup` for unseen conditioning cells."""


@dataclass(frozen=True, eq=False)
class JointConditionalTable:
    """Sparse map from a tuple of conditioning bins to a target histogram."""

    cond_specs: tuple[BinSpec, ...]
    target_spec: BinSpec
    cells: dict

    def __post_init__(self):
        object.__setattr__(self, "cond_specs", tuple(self.cond_specs))
        cells = {}
        for key, hist in self.cells.items():
            if not isinstance(hist, Histogram1D):
                hist = Histogram1D(self.target_spec, hist)
            if len(key) != len(self.cond_specs):
                raise ValueError(f"cell key {key} has wrong arity")
            if hist.total <= 0:
                raise ValueError(f"cell {key} has no mass")
            cells[tuple(int(k) for k in key)] = hist
        object.__setattr__(self, "cells", cells)

    def lookup(self, key: Sequence[int]):
        """Histogram for ``key`` or :data:`NO_OCCURRENCE`."""
        return self.cells.get(tuple(key), NO_OCCURRENCE)

    def key_for(self, values: Sequence[float]) -> tuple[int, ...] | None:
        idx = tuple(s.index(v) for s, v in zip(self.cond_specs, values))
        return None if any(i is None for i in idx) else idx

    def __len__(self):
        return len(self.cells)

    def __eq__(self, other):
        if not isinstance(other, JointConditionalTable):
            return NotImplemented
        return (self.cond_specs == other.cond_specs and self.target_spec == other.target_spec
                and self.cells == other.cells)


def build_histogram(samples: Iterable[float], spec: BinSpec) -> Histogram1D:
    """Count in-range samples per bin; out-of-range ones are tallied separately.

    Raises:
        EmptyDistributionError: if no sample falls inside the bin range.
    """
    idx = spec.indices(np.fromiter(samples, dtype=float))
    inside = idx[idx >= 0]
    if inside.size == 0:
        raise EmptyDistributionError("no in-range samples to build a histogram from")
    counts = np.bincount(inside, minlength=spec.count)
    return Histogram1D(spec, counts, out_of_range=int((idx < 0).sum()))


def build_conditional(pairs: Iterable[tuple[float, float]], cond_spec: BinSpec,
                      target_spec: BinSpec) -> ConditionalTable:
    pairs = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
    ci = cond_spec.indices(pairs[:, 0])
    ti = target_spec.indices(pairs[:, 1])
    ok = (ci >= 0) & (ti >= 0)
    counts = np.zeros((cond_spec.count, target_spec.count), dtype=np.int64)
    np.add.at(counts, (ci[ok], ti[ok]), 1)
    return ConditionalTable(cond_spec, target_spec, counts)


def build_joint_conditional(tuples: Iterable[Sequence[float]], cond_specs: Sequence[BinSpec],
                            target_spec: BinSpec) -> JointConditionalTable:
    """Tuples are ``(c1, ..., ck, target)``; rows with any value out of range are skipped."""
    cond_specs = tuple(cond_specs)
    cells: dict[tuple, np.ndarray] = {}
    for row in tuples:
        *cond, t = row
        key = tuple(s.index(c) for s, c in zip(cond_specs, cond))
        ti = target_spec.index(t)
        if ti is None or any(k is None for k in key):
            continue
        cells.setdefault(key, np.zeros(target_spec.count, dtype=np.int64))[ti] += 1
    return JointConditionalTable(cond_specs, target_spec, cells)


class SeededSampler:
    """Uniform variate stream addressed by ``(seed, stream_id)``.

    Each stream is an independent PCG64 generator derived via
    ``SeedSequence(seed, spawn_key=(stream_id,))`` so scenario ``k`` always
    sees the same draws regardless of how many other scenarios ran before it.
    """

    BLOCK = 64

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed & (2**64 - 1), spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))
        self.draws = 0
        # block draws give the same sequence as one-at-a-time calls
        self._buf: list[float] = []
        self._pos = 0

    def uniform(self) -> float:
        """Next variate in [0, 1)."""
        if self._pos == len(self._buf):
            self._buf = self._gen.random(self.BLOCK).tolist()
            self._pos = 0
        self._pos += 1
        self.draws += 1
        return self._buf[self._pos - 1]

    def __repr__(self):
        return f"SeededSampler(seed={self.seed}, stream_id={self.stream_id}, draws={self.draws})"


def rws_index(cumulative: Sequence[float], u: float) -> int:
    """Index of the first bin whose cumulative weight exceeds ``u * total``."""
    total = cumulative[-1]
    if total <= 0:
        raise EmptyDistributionError("cannot sample from an empty distribution")
    return bisect.bisect_right(cumulative, u * total)


def rws_sample(dist: Histogram1D, sampler, midpoint: bool = False) -> float:
    """Roulette-wheel draw of a bin, then a value inside it.

    The first uniform picks the bin against the cumulative counts; a second
    independent uniform places the value inside the bin.  With
    ``midpoint=True`` the bin centre is returned and no second draw is made.
    """
    if dist.total == 0:
        raise EmptyDistributionError("cannot sample from an empty histogram")
    i = rws_index(dist._cum, sampler.uniform())
    if midpoint:
        return dist.spec.midpoint(i)
    return dist.spec.value_in_bin(i, sampler.uniform())


def _quantile_hist(h: Histogram1D, q: float) -> float:
    if h.total == 0:
        raise EmptyDistributionError("quantile of an empty histogram")
    target = q * h.total
    cum = np.asarray(h._cum)
    nz = np.flatnonzero(h.counts)
    # first non-empty bin where cumulative mass reaches the target
    i = int(nz[np.searchsorted(cum[nz], target, side="left")]) if target > 0 else int(nz[0])
    before = cum[i] - h.counts[i]
    frac = (target - before) / h.counts[i]
    return float(h.spec.bin_lo(i) + min(max(frac, 0.0), 1.0) * h.spec.width)


def quantile(data, q, axis: int | None = None):
    """Quantile of raw samples (type-7 linear interpolation) or of a histogram.

    For raw samples ``q`` may be a scalar or array; ``axis`` selects the
    sample axis of a 2-D input (returns one value per remaining index).
    For a :class:`Histogram1D` the value where the cumulative mass reaches
    ``q`` is returned, interpolating linearly inside the bin.
    """
    q_arr = np.asarray(q, dtype=float)
    if ((q_arr < 0) | (q_arr > 1)).any():
        raise ValueError(f"quantile level outside [0, 1]: {q}")
    if isinstance(data, Histogram1D):
        if q_arr.ndim == 0:
            return _quantile_hist(data, float(q_arr))
        return np.array([_quantile_hist(data, float(x)) for x in q_arr])

    x = np.asarray(data, dtype=float)
    if axis is None:
        x = x.ravel()
        axis = 0
    n = x.shape[axis]
    if n == 0:
        raise EmptyDistributionError("quantile of an empty sample")
    xs = np.moveaxis(np.sort(x, axis=axis), axis, 0)
    h = (n - 1) * q_arr
    lo = np.floor(h).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    w = h - lo
    # broadcast weights over the trailing (non-sample) axes
    w = w.reshape(w.shape + (1,) * (xs.ndim - 1))
    with np.errstate(under="ignore"):
        out = xs[lo] + w * (xs[hi] - xs[lo])
    # exact order statistic where no interpolation is needed keeps constants exact
    out = np.where(w == 0, xs[lo], out)
    if out.ndim == 0:
        return float(out)
    return out


def histogram_table_json(h: Histogram1D) -> str:
    """Structured-text export: bin spec plus per-bin edges and probabilities."""
    return json.dumps({"spec": h.spec.to_dict(), "total": h.total,
                       "out_of_range": h.out_of_range, "bins": h.to_rows()}, indent=2)
