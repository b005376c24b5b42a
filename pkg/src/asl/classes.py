"""Structured support classes: s-sets, unions of intervals, stars on K_p, submatrices.

Indices are 0-based throughout: a support over ``n`` components is a subset of
``range(n)``. Submatrix entries are laid out row-major (``i = r * n_c + c``) and
star edges follow :class:`EdgeIndexer`.
"""
from __future__ import annotations

import math
from dataclasses import MISSING, dataclass, fields
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import ConfigError

REJECTION_RETRIES = 10_000


def _positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise ConfigError(f"must be a positive integer, got {value!r}", field=name)
    return int(value)


@dataclass(frozen=True)
class SSet:
    n: int
    s: int

    kind = "sset"

    def __post_init__(self):
        _positive_int(self.n, "n")
        _positive_int(self.s, "s")
        if self.s > self.n:
            raise ConfigError(f"s={self.s} exceeds n={self.n}", field="s")

    @property
    def sparsity(self):
        return self.s

    def params(self):
        return {"n": self.n, "s": self.s}


@dataclass(frozen=True)
class Intervals:
    """Unions of ``k`` disjoint runs of ``s`` consecutive indices."""

    n: int
    s: int
    k: int = 1

    kind = "intervals"

    def __post_init__(self):
        for name in ("n", "s", "k"):
            _positive_int(getattr(self, name), name)
        if self.k * self.s > self.n:
            raise ConfigError(f"k*s={self.k * self.s} intervals do not fit in n={self.n}", field="k")

    @property
    def sparsity(self):
        return self.k * self.s

    def params(self):
        return {"n": self.n, "s": self.s, "k": self.k}


@dataclass(frozen=True)
class Stars:
    """Unions of ``k`` vertex-disjoint ``s``-stars in the complete graph on ``p`` vertices."""

    p: int
    s: int
    k: int = 1

    kind = "stars"

    def __post_init__(self):
        for name in ("p", "s", "k"):
            _positive_int(getattr(self, name), name)
        if self.s > self.p - 1:
            raise ConfigError(f"an s-star needs s <= p-1 (s={self.s}, p={self.p})", field="s")
        if self.k * (self.s + 1) > self.p:
            raise ConfigError(
                f"{self.k} vertex-disjoint {self.s}-stars need {self.k * (self.s + 1)} vertices, p={self.p}",
                field="k",
            )

    @property
    def n(self):
        return self.p * (self.p - 1) // 2

    @property
    def sparsity(self):
        return self.k * self.s

    @cached_property
    def indexer(self):
        return EdgeIndexer(self.p)

    def params(self):
        return {"p": self.p, "s": self.s, "k": self.k}


@dataclass(frozen=True)
class Submatrix:
    n_r: int
    n_c: int
    s_r: int
    s_c: int

    kind = "submatrix"

    def __post_init__(self):
        for name in ("n_r", "n_c", "s_r", "s_c"):
            _positive_int(getattr(self, name), name)
        if self.s_r > self.n_r:
            raise ConfigError(f"s_r={self.s_r} exceeds n_r={self.n_r}", field="s_r")
        if self.s_c > self.n_c:
            raise ConfigError(f"s_c={self.s_c} exceeds n_c={self.n_c}", field="s_c")

    @property
    def n(self):
        return self.n_r * self.n_c

    @property
    def sparsity(self):
        return self.s_r * self.s_c

    def normalized(self):
        """Return ``(cls, transposed)`` with ``s_r >= s_c`` enforced by transposition."""
        if self.s_r >= self.s_c:
            return self, False
        return Submatrix(self.n_c, self.n_r, self.s_c, self.s_r), True

    def params(self):
        return {"n_r": self.n_r, "n_c": self.n_c, "s_r": self.s_r, "s_c": self.s_c}


SupportClass = SSet | Intervals | Stars | Submatrix

_KINDS = {c.kind: c for c in (SSet, Intervals, Stars, Submatrix)}


def class_to_dict(cls: SupportClass) -> dict:
    return {"class": cls.kind, **cls.params()}


def class_from_dict(obj: dict) -> SupportClass:
    """Inverse of :func:`class_to_dict`; raises :class:`ConfigError` with a field path."""
    if not isinstance(obj, dict):
        raise ConfigError("class descriptor must be a JSON object", field="class")
    kind = obj.get("class")
    if kind not in _KINDS:
        raise ConfigError(f"unknown class {kind!r}; expected one of {sorted(_KINDS)}", field="class")
    ctor = _KINDS[kind]
    names = [f.name for f in fields(ctor)]
    kwargs = {}
    for f in fields(ctor):
        if f.name in obj:
            kwargs[f.name] = obj[f.name]
        elif f.default is MISSING:
            raise ConfigError("missing required parameter", field=f"class.{f.name}")
    extra = set(obj) - set(names) - {"class"}
    if extra:
        raise ConfigError(f"unexpected parameters {sorted(extra)}", field="class")
    return ctor(**kwargs)


class EdgeIndexer:
    """Bijection between edge indices ``0..p(p-1)/2-1`` and pairs ``u < v``.

    Edges are ordered lexicographically, u-major: (0,1), (0,2), ..., (0,p-1), (1,2), ...
    """

    def __init__(self, p: int):
        if p < 2:
            raise ConfigError("need at least two vertices", field="p")
        self.p = p
        self.n = p * (p - 1) // 2
        u, v = np.triu_indices(p, k=1)
        self._u = u.astype(np.int64)
        self._v = v.astype(np.int64)
        self._u.flags.writeable = False
        self._v.flags.writeable = False

    def index(self, u, v):
        u, v = np.minimum(u, v), np.maximum(u, v)
        return u * (2 * self.p - u - 1) // 2 + (v - u - 1)

    def pair(self, i):
        return self._u[i], self._v[i]

    @cached_property
    def incident(self) -> np.ndarray:
        """``(p, p-1)`` array; row ``v`` lists the edges touching vertex ``v`` in ascending order."""
        p = self.p
        out = np.empty((p, p - 1), dtype=np.int64)
        for v in range(p):
            others = np.delete(np.arange(p), v)
            out[v] = np.sort(self.index(np.full(p - 1, v), others))
        out.flags.writeable = False
        return out

    def edges_of(self, vertices) -> np.ndarray:
        """Sorted union of the edges incident to any of ``vertices``."""
        vertices = np.asarray(vertices, dtype=np.int64)
        if vertices.size == 0:
            return np.empty(0, dtype=np.int64)
        return np.unique(self.incident[vertices].ravel())


class SupportSet:
    """An immutable set of indices tagged with the class it is meant to belong to.

    Construction checks range and uniqueness only; whether the indices form a legal
    member is answered by :func:`validate_membership`.
    """

    __slots__ = ("indices", "cls")

    def __init__(self, indices, cls: SupportClass):
        arr = np.unique(np.asarray(indices, dtype=np.int64))
        if arr.size != len(np.asarray(indices).reshape(-1)):
            raise ConfigError("support indices must be unique", field="indices")
        if arr.size and (arr[0] < 0 or arr[-1] >= cls.n):
            raise ConfigError(f"support indices must lie in [0, {cls.n})", field="indices")
        arr.flags.writeable = False
        object.__setattr__(self, "indices", arr)
        object.__setattr__(self, "cls", cls)

    def __setattr__(self, name, value):
        raise AttributeError("SupportSet is immutable")

    @property
    def n(self):
        return self.cls.n

    def __len__(self):
        return int(self.indices.size)

    def __iter__(self):
        return iter(self.indices.tolist())

    def __eq__(self, other):
        if not isinstance(other, SupportSet):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.n, self.indices.tobytes()))

    def __repr__(self):
        return f"SupportSet({self.indices.tolist()}, {self.cls!r})"

    def mask(self):
        m = np.zeros(self.n, dtype=bool)
        m[self.indices] = True
        return m


def symmetric_difference_size(a: SupportSet, b: SupportSet) -> int:
    if a.n != b.n:
        raise ValueError(f"ambient dimensions differ: {a.n} vs {b.n}")
    return int(np.setxor1d(a.indices, b.indices, assume_unique=True).size)


def star_packing_bound(p: int, s: int) -> Fraction:
    """Lower bound ``p(p-1-s)/(2s)`` on the number of disjoint s-stars packable in K_p."""
    if s < 1 or s >= p:
        raise ValueError(f"need 1 <= s <= p-1, got p={p}, s={s}")
    return Fraction(p * (p - 1 - s), 2 * s)


# -- membership -------------------------------------------------------------

def validate_membership(support: SupportSet) -> bool:
    cls = support.cls
    idx = support.indices
    if idx.size != cls.sparsity:
        return False
    if idx.size and (idx[0] < 0 or idx[-1] >= cls.n):
        return False
    if isinstance(cls, SSet):
        return True
    if isinstance(cls, Intervals):
        return _valid_intervals(idx, cls.s)
    if isinstance(cls, Stars):
        return _valid_stars(idx, cls)
    if isinstance(cls, Submatrix):
        rows = np.unique(idx // cls.n_c)
        cols = np.unique(idx % cls.n_c)
        return rows.size == cls.s_r and cols.size == cls.s_c and rows.size * cols.size == idx.size
    return False


def _valid_intervals(idx, s):
    # every maximal run of consecutive indices must split into whole s-intervals
    breaks = np.flatnonzero(np.diff(idx) != 1) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [idx.size]])
    return bool(np.all((ends - starts) % s == 0))


def _valid_stars(idx, cls):
    u, v = cls.indexer.pair(idx)
    # union-find over vertices to split the edge set into connected components
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in zip(u.tolist(), v.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    comps = {}
    for a, b in zip(u.tolist(), v.tolist()):
        comps.setdefault(find(a), []).append((a, b))
    if len(comps) != cls.k:
        return False
    for edges in comps.values():
        if len(edges) != cls.s:
            return False
        deg = {}
        for a, b in edges:
            deg[a] = deg.get(a, 0) + 1
            deg[b] = deg.get(b, 0) + 1
        if max(deg.values()) != cls.s:
            return False
        if len(deg) != cls.s + 1:
            return False
    return True


# -- sampling ---------------------------------------------------------------

def sample_support(cls: SupportClass, rng: np.random.Generator) -> SupportSet:
    """Draw a uniformly random member of ``cls``."""
    if isinstance(cls, SSet):
        idx = rng.choice(cls.n, size=cls.s, replace=False)
    elif isinstance(cls, Intervals):
        idx = _sample_intervals(cls, rng)
    elif isinstance(cls, Stars):
        # k centers followed by k groups of s leaves, all distinct vertices; every
        # star union arises from the same number of draws, so this is uniform
        verts = rng.choice(cls.p, size=cls.k * (cls.s + 1), replace=False)
        centers = verts[: cls.k]
        leaves = verts[cls.k:].reshape(cls.k, cls.s)
        idx = cls.indexer.index(np.repeat(centers, cls.s), leaves.ravel())
    elif isinstance(cls, Submatrix):
        rows = rng.choice(cls.n_r, size=cls.s_r, replace=False)
        cols = rng.choice(cls.n_c, size=cls.s_c, replace=False)
        idx = (rows[:, None] * cls.n_c + cols[None, :]).ravel()
    else:  # pragma: no cover
        raise ConfigError(f"unsupported class {cls!r}")
    return SupportSet(idx, cls)


def _sample_intervals(cls, rng):
    n, s, k = cls.n, cls.s, cls.k
    if k * s == n:
        return np.arange(n)
    for _ in range(REJECTION_RETRIES):
        starts = np.sort(rng.integers(0, n - s + 1, size=k))
        if k == 1 or np.all(np.diff(starts) >= s):
            return (starts[:, None] + np.arange(s)[None, :]).ravel()
    # leftmost-greedy placement; only reachable when disjoint placements are very rare
    return np.arange(k * s)


def adversarial_supports(cls: SupportClass) -> list[SupportSet]:
    """Boundary placements that stress bin edges and index-range ends."""
    out = []
    if isinstance(cls, SSet):
        out.append(np.arange(cls.s))
        out.append(np.arange(cls.n - cls.s, cls.n))
    elif isinstance(cls, Intervals):
        n, s, k = cls.n, cls.s, cls.k
        out.append(np.arange(k * s))
        out.append(np.arange(n - k * s, n))
        half = max(1, s // 2)
        # straddle the first bin boundary when there is room
        if k * s + half <= n:
            out.append(np.arange(k * s) + half - 1 if half > 1 else np.arange(k * s) + 1)
    elif isinstance(cls, Stars):
        ix = cls.indexer
        for base in (0, cls.p - cls.k * (cls.s + 1)):
            edges = []
            for t in range(cls.k):
                c = base + t * (cls.s + 1)
                edges.extend(ix.index(np.full(cls.s, c), np.arange(c + 1, c + 1 + cls.s)).tolist())
            out.append(np.array(edges))
    elif isinstance(cls, Submatrix):
        for r0, c0 in ((0, 0), (cls.n_r - cls.s_r, cls.n_c - cls.s_c)):
            rows = np.arange(r0, r0 + cls.s_r)
            cols = np.arange(c0, c0 + cls.s_c)
            out.append((rows[:, None] * cls.n_c + cols[None, :]).ravel())
    uniq = []
    for idx in out:
        sup = SupportSet(idx, cls)
        if sup not in uniq and validate_membership(sup):
            uniq.append(sup)
    return uniq


def log2_ceil(x: float) -> int:
    """Smallest integer ``j >= 0`` with ``2**j >= x``."""
    if x <= 1:
        return 0
    return int(math.ceil(math.log2(x) - 1e-12))
