"""Finite-alphabet probability primitives.

Distributions, marginals, information measures (base-2 throughout), variational
distance, strong/joint typicality, and seeded sampling. All containers are
immutable after construction and all operations are pure given explicit seeds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .rng import generator

# Construction tolerances: reject real bugs, forgive float dust.
SUM_TOL = 1e-9
MASS_TOL = 1e-12

_LOG2E = 1.0 / np.log(2.0)


def _validated_mass(mass, expected_len: int) -> np.ndarray:
    arr = np.array(mass, dtype=float)
    if arr.ndim != 1 or arr.size != expected_len:
        raise ValueError(f"mass must be a length-{expected_len} vector, got shape {arr.shape}")
    if np.any(arr < -MASS_TOL):
        raise ValueError("negative probability mass")
    arr = np.maximum(arr, 0.0)
    total = arr.sum()
    if abs(total - 1.0) > SUM_TOL:
        raise ValueError(f"mass sums to {total!r}, not 1 within {SUM_TOL}")
    arr /= total
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Distribution:
    """Probability mass function over {0, ..., alphabet_size - 1}."""

    alphabet_size: int
    mass: np.ndarray

    def __post_init__(self):
        if self.alphabet_size < 1:
            raise ValueError("alphabet_size must be positive")
        object.__setattr__(self, "mass", _validated_mass(self.mass, self.alphabet_size))

    @classmethod
    def uniform(cls, size: int) -> "Distribution":
        return cls(size, np.full(size, 1.0 / size))

    @classmethod
    def point_mass(cls, size: int, symbol: int) -> "Distribution":
        m = np.zeros(size)
        m[symbol] = 1.0
        return cls(size, m)

    @classmethod
    def bernoulli(cls, p: float) -> "Distribution":
        return cls(2, np.array([1.0 - p, p]))

    def to_json(self) -> str:
        return json.dumps({"alphabet_size": self.alphabet_size, "mass": self.mass.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Distribution":
        obj = json.loads(text)
        return cls(int(obj["alphabet_size"]), obj["mass"])


@dataclass(frozen=True)
class JointDistribution:
    """PMF over a product alphabet, mass stored row-major (component 0 slowest)."""

    factor_sizes: tuple
    mass: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.factor_sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError("factor_sizes must be positive integers")
        object.__setattr__(self, "factor_sizes", sizes)
        total = int(np.prod(sizes))
        object.__setattr__(self, "mass", _validated_mass(self.mass, total))

    @property
    def component_count(self) -> int:
        return len(self.factor_sizes)

    @property
    def alphabet_size(self) -> int:
        return int(np.prod(self.factor_sizes))

    def grid(self) -> np.ndarray:
        return self.mass.reshape(self.factor_sizes)

    @classmethod
    def from_factors(cls, factors: Sequence[Distribution]) -> "JointDistribution":
        """Independent product of single-letter distributions."""
        mass = np.array([1.0])
        for f in factors:
            mass = np.kron(mass, f.mass)
        return cls(tuple(f.alphabet_size for f in factors), mass)

    def as_distribution(self) -> Distribution:
        return Distribution(self.alphabet_size, self.mass)

    def to_json(self) -> str:
        return json.dumps({
            "alphabet_size": self.alphabet_size,
            "factor_sizes": list(self.factor_sizes),
            "mass": self.mass.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "JointDistribution":
        obj = json.loads(text)
        return cls(tuple(obj["factor_sizes"]), obj["mass"])


@dataclass(frozen=True)
class ConditionalKernel:
    """Row-stochastic kernel: one output Distribution per input symbol."""

    input_size: int
    output_size: int
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.shape != (self.input_size, self.output_size):
            raise ValueError(f"kernel matrix must be {self.input_size}x{self.output_size}")
        rows = [_validated_mass(mat[i], self.output_size) for i in range(self.input_size)]
        mat = np.vstack(rows)
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    @property
    def rows(self) -> tuple:
        return tuple(Distribution(self.output_size, r) for r in self.matrix)

    @classmethod
    def identity(cls, size: int) -> "ConditionalKernel":
        return cls(size, size, np.eye(size))

    @classmethod
    def constant(cls, input_size: int, row: Distribution) -> "ConditionalKernel":
        return cls(input_size, row.alphabet_size, np.tile(row.mass, (input_size, 1)))


@dataclass(frozen=True)
class TypicalityParams:
    """Slack for strong typicality tests."""

    gamma: float = 0.1

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class SymbolSequence:
    """Length-n vector of alphabet indices."""

    symbols: np.ndarray

    def __post_init__(self):
        arr = np.array(self.symbols, dtype=np.int64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("symbols must be a non-empty 1-D vector")
        if np.any(arr < 0):
            raise ValueError("symbol indices must be non-negative")
        arr.flags.writeable = False
        object.__setattr__(self, "symbols", arr)

    @property
    def n(self) -> int:
        return self.symbols.size


def entropy(d: Distribution) -> float:
    """Shannon entropy in bits, with 0 log 0 := 0."""
    p = d.mass
    nz = p > 0
    return float(-np.sum(p[nz] * np.log2(p[nz])))


def entropy_of_mass(mass: np.ndarray) -> float:
    """Entropy of a raw (already valid) mass vector; solver hot path."""
    nz = mass > 0
    return float(-np.sum(mass[nz] * np.log2(mass[nz])))


def marginalize(j: JointDistribution, keep: Iterable[int]) -> Distribution:
    """Sum out every component not in `keep` (kept components in ascending order)."""
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= j.component_count for k in keep):
        raise ValueError(f"keep indices out of range for {j.component_count} components")
    if not keep:
        return Distribution(1, np.array([1.0]))
    drop = tuple(i for i in range(j.component_count) if i not in keep)
    grid = j.grid()
    if drop:
        grid = grid.sum(axis=drop)
    return Distribution(int(np.prod([j.factor_sizes[k] for k in keep])), grid.reshape(-1))


def mutual_information(j: JointDistribution, part_a: Iterable[int], part_b: Iterable[int]) -> float:
    """I(A;B) = H(A) + H(B) - H(A,B) in bits, clamped to be non-negative."""
    a = set(int(i) for i in part_a)
    b = set(int(i) for i in part_b)
    if a & b:
        raise ValueError("part_a and part_b must be disjoint")
    mi = entropy(marginalize(j, a)) + entropy(marginalize(j, b)) - entropy(marginalize(j, a | b))
    if mi < -1e-10:
        raise ValueError(f"mutual information evaluated to {mi}, below numerical floor")
    return max(mi, 0.0)


def variational_distance(p: Distribution, q: Distribution) -> float:
    if p.alphabet_size != q.alphabet_size:
        raise ValueError("alphabet size mismatch")
    return 0.5 * float(np.abs(p.mass - q.mass).sum())


def empirical_type(s: SymbolSequence, alphabet_size: int) -> Distribution:
    counts = np.bincount(s.symbols, minlength=alphabet_size)
    if counts.size > alphabet_size:
        raise ValueError("sequence contains symbols outside the alphabet")
    return Distribution(alphabet_size, counts / s.n)


def is_strongly_typical(s: SymbolSequence, d: Distribution, tp: TypicalityParams) -> bool:
    """Zero-mass symbols must not occur and total type deviation must be <= gamma."""
    counts = np.bincount(s.symbols, minlength=d.alphabet_size)
    if counts.size > d.alphabet_size:
        return False
    if np.any(counts[d.mass == 0] > 0):
        return False
    return float(np.abs(counts / s.n - d.mass).sum()) <= tp.gamma


def is_jointly_typical(
    su: SymbolSequence,
    sx: SymbolSequence,
    j: JointDistribution,
    tp: TypicalityParams,
) -> bool:
    """Strong typicality of the paired sequence under a two-component joint."""
    if j.component_count != 2:
        raise ValueError("joint typicality needs a two-component joint distribution")
    if su.n != sx.n:
        raise ValueError("sequence length mismatch")
    ku, kx = j.factor_sizes
    pair = SymbolSequence(su.symbols * kx + sx.symbols)
    return is_strongly_typical(pair, j.as_distribution(), tp)


def sample_iid(d: Distribution, n: int, rng_seed: int) -> SymbolSequence:
    """n i.i.d. draws from d; deterministic given (d, n, rng_seed)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = generator(rng_seed, "iid")
    cdf = np.cumsum(d.mass)
    u = rng.random(n)
    return SymbolSequence(np.searchsorted(cdf, u, side="right").clip(max=d.alphabet_size - 1))


def sample_conditional(k: ConditionalKernel, su: SymbolSequence, rng_seed: int) -> SymbolSequence:
    """Component-wise independent draws from the rows of k selected by su."""
    if np.any(su.symbols >= k.input_size):
        raise ValueError("input sequence exceeds kernel input alphabet")
    rng = generator(rng_seed, "conditional")
    cdf = np.cumsum(k.matrix, axis=1)
    u = rng.random(su.n)
    out = (u[:, None] > cdf[su.symbols]).sum(axis=1)
    return SymbolSequence(out.clip(max=k.output_size - 1))
