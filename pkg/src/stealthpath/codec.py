"""Codebook construction and decoding for the two random-coding schemes.

The direct scheme draws i.i.d. codewords from a network distribution and
decodes by exact sub-codeword matching over every candidate jam set. The
layered scheme draws intermediate codewords from an auxiliary distribution,
maps them through a stochastic kernel at transmit time, and decodes by joint
typicality on the unjammed links.

Codebooks above the in-memory symbol budget fall back to streaming chunked
regeneration: chunk c of CHUNK_MESSAGES codewords is reproducible from the
code seed alone, so codeword m never needs to be stored.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from . import indexing
from .probkit import (
    ConditionalKernel,
    Distribution,
    JointDistribution,
    SymbolSequence,
    TypicalityParams,
)
from .ratesolver import NetworkModel
from .rng import generator

CHUNK_MESSAGES = 1 << 16
SYMBOL_BUDGET = 1 << 26
MESSAGE_BUDGET = 1 << 31
DECODE_SCAN_BUDGET = 1 << 28

INNOCENT = 0
ACTIVE = 1


class ResourceBudgetError(RuntimeError):
    """A request would exceed a configured enumeration or memory budget."""


@dataclass(frozen=True)
class CodeParams:
    """Blocklength, rate in bits per channel use, and the codebook seed."""

    n: int
    rate: float
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("blocklength must be >= 1")
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    @property
    def message_count(self) -> int:
        exponent = self.n * self.rate
        if exponent >= 1000:
            raise ResourceBudgetError(
                f"message count 2^{exponent:.1f} is astronomically large"
            )
        return max(int(math.floor(2.0 ** exponent)), 1)


class _ChunkedStore:
    """Deterministic chunked source of i.i.d. codeword symbols.

    Chunk c is regenerated from derive(seed, label, c); a codebook is fully
    determined by (mass, n, seed) and the fixed chunk size.
    """

    def __init__(self, mass: np.ndarray, n: int, seed: int, count: int, label: str,
                 materialize: bool):
        self.mass = mass
        self.n = n
        self.seed = seed
        self.count = count
        self.label = label
        self.alphabet = mass.size
        self._uniform = bool(np.allclose(mass, mass[0], atol=1e-12))
        self._cdf = np.cumsum(mass)
        self._dtype = np.min_scalar_type(self.alphabet - 1)
        self._all: Optional[np.ndarray] = None
        if materialize:
            self._all = np.concatenate([block for _, block in self._iter_chunks()], axis=0)

    @property
    def materialized(self) -> bool:
        return self._all is not None

    def _generate(self, chunk_index: int, rows: int) -> np.ndarray:
        rng = generator(self.seed, self.label, chunk_index)
        if self._uniform:
            return rng.integers(0, self.alphabet, size=(rows, self.n), dtype=np.int64
                                ).astype(self._dtype)
        draws = np.searchsorted(self._cdf, rng.random((rows, self.n)), side="right")
        return draws.clip(max=self.alphabet - 1).astype(self._dtype)

    def _iter_chunks(self) -> Iterator[Tuple[int, np.ndarray]]:
        start = 0
        chunk_index = 0
        while start < self.count:
            rows = min(CHUNK_MESSAGES, self.count - start)
            yield start, self._generate(chunk_index, rows)
            start += rows
            chunk_index += 1

    def chunks(self) -> Iterator[Tuple[int, np.ndarray]]:
        if self._all is not None:
            yield 0, self._all
        else:
            yield from self._iter_chunks()

    def codeword(self, m: int) -> np.ndarray:
        if not 0 <= m < self.count:
            raise ValueError(f"message index {m} out of range")
        if self._all is not None:
            return self._all[m].astype(np.int64)
        chunk_index, offset = divmod(m, CHUNK_MESSAGES)
        rows = min(CHUNK_MESSAGES, self.count - chunk_index * CHUNK_MESSAGES)
        return self._generate(chunk_index, rows)[offset].astype(np.int64)


def _build_store(mass: np.ndarray, params: CodeParams, symbols_per_use: int,
                 label: str) -> _ChunkedStore:
    count = params.message_count
    if count > MESSAGE_BUDGET:
        raise ResourceBudgetError(
            f"codebook with {count} messages exceeds the message budget {MESSAGE_BUDGET}"
        )
    materialize = count * params.n * symbols_per_use <= SYMBOL_BUDGET
    return _ChunkedStore(mass, params.n, params.seed, count, label, materialize)


@dataclass
class DirectCode:
    """i.i.d. codewords over the network product alphabet."""

    params: CodeParams
    p_x: JointDistribution
    _store: _ChunkedStore
    _restriction_cache: dict

    @property
    def link_sizes(self) -> tuple:
        return self.p_x.factor_sizes

    @property
    def message_count(self) -> int:
        return self._store.count

    @property
    def materialized(self) -> bool:
        return self._store.materialized

    def codeword(self, m: int) -> np.ndarray:
        """Product codes of codeword m (message indices are 1-based)."""
        return self._store.codeword(m - 1)

    def codeword_links(self, m: int) -> np.ndarray:
        return indexing.unpack_links(self.codeword(m), self.link_sizes)

    def chunks(self) -> Iterator[Tuple[int, np.ndarray]]:
        return self._store.chunks()


@dataclass
class LayeredCode:
    """Intermediate codewords over the auxiliary alphabet plus a transmit kernel."""

    params: CodeParams
    p_u: Distribution
    kernel: ConditionalKernel
    link_sizes: tuple
    _store: _ChunkedStore

    @property
    def message_count(self) -> int:
        return self._store.count

    @property
    def materialized(self) -> bool:
        return self._store.materialized

    def u_codeword(self, m: int) -> np.ndarray:
        return self._store.codeword(m - 1)

    def u_chunks(self) -> Iterator[Tuple[int, np.ndarray]]:
        return self._store.chunks()


Code = Union[DirectCode, LayeredCode]


def build_direct_code(p_x: JointDistribution, params: CodeParams) -> DirectCode:
    store = _build_store(p_x.mass, params, len(p_x.factor_sizes), "codeword-chunk")
    return DirectCode(params=params, p_x=p_x, _store=store, _restriction_cache={})


def build_layered_code(p_u: Distribution, kernel: ConditionalKernel,
                       params: CodeParams, link_sizes: Sequence[int]) -> LayeredCode:
    link_sizes = tuple(int(s) for s in link_sizes)
    if kernel.input_size != p_u.alphabet_size:
        raise ValueError("kernel input alphabet does not match the auxiliary distribution")
    if kernel.output_size != int(np.prod(link_sizes)):
        raise ValueError("kernel output alphabet does not match the link alphabets")
    store = _build_store(p_u.mass, params, 1, "u-codeword-chunk")
    return LayeredCode(params=params, p_u=p_u, kernel=kernel,
                       link_sizes=link_sizes, _store=store)


@dataclass(frozen=True)
class Transmission:
    """One block on the wire: status, message, and per-link symbol rows."""

    status: int
    message: int
    links: np.ndarray  # (C, n)

    def __post_init__(self):
        if (self.status == INNOCENT) != (self.message == 0):
            raise ValueError("innocent status iff message 0")


@dataclass(frozen=True)
class ReceivedWord:
    """Per-link symbol rows with a per-link erasure flag (all-or-nothing)."""

    links: np.ndarray  # (C, n); rows of erased links are ignored
    erased: np.ndarray  # (C,) bool

    @property
    def erased_set(self) -> tuple:
        return tuple(int(i) for i in np.nonzero(self.erased)[0])


@dataclass(frozen=True)
class DecodeResult:
    verdict: str  # "innocent" | "message" | "error"
    message: int = 0
    examined_sets: int = 0

    def __post_init__(self):
        if self.verdict == "message" and self.message < 1:
            raise ValueError("message verdict requires a positive message index")


def encode(code: Code, model: NetworkModel, t: int, m: int, tx_seed: int) -> Transmission:
    """Alice's encoder: innocent sampling or codeword (plus kernel map) lookup."""
    n = code.params.n
    sizes = model.link_alphabet_sizes
    if t == INNOCENT:
        if m != 0:
            raise ValueError("innocent transmission must carry message 0")
        rng = generator(tx_seed, "innocent")
        cdf = np.cumsum(model.innocent.mass)
        codes = np.searchsorted(cdf, rng.random(n), side="right").clip(
            max=model.product_alphabet_size - 1)
        return Transmission(INNOCENT, 0, indexing.unpack_links(codes, sizes))
    if not 1 <= m <= code.message_count:
        raise ValueError(f"message {m} out of range 1..{code.message_count}")
    if isinstance(code, DirectCode):
        return Transmission(ACTIVE, m, code.codeword_links(m))
    # Layered scheme: a fresh stochastic map from the intermediate codeword
    # on every transmission.
    u = code.u_codeword(m)
    rng = generator(tx_seed, "transmit-map")
    cdf_rows = np.cumsum(code.kernel.matrix, axis=1)
    draws = (rng.random(n)[:, None] > cdf_rows[u]).sum(axis=1)
    codes = draws.clip(max=code.kernel.output_size - 1)
    return Transmission(ACTIVE, m, indexing.unpack_links(codes, sizes))


def induced_unjammed_joint(code: LayeredCode, unjammed_links: Sequence[int]) -> JointDistribution:
    """Exact single-letter joint of (U, X restricted to the unjammed links)."""
    s = indexing.restriction_matrix(code.link_sizes, unjammed_links)
    joint = code.p_u.mass[:, None] * (code.kernel.matrix @ s.T)
    return JointDistribution((code.p_u.alphabet_size, s.shape[0]), joint.reshape(-1))


def decode_erasure(code: LayeredCode, rx: ReceivedWord, tp: TypicalityParams,
                   model: Optional[NetworkModel] = None) -> DecodeResult:
    """Typicality decoding on the unjammed links, jam set read off the erasures."""
    c = rx.links.shape[0]
    unjammed = [i for i in range(c) if not rx.erased[i]]
    if not unjammed:
        return DecodeResult("error", examined_sets=0)
    if model is not None and len(unjammed) < c - model.adversary_budget:
        return DecodeResult("error", examined_sets=0)
    n = code.params.n
    count = code.message_count
    if not code.materialized and count > DECODE_SCAN_BUDGET:
        raise ResourceBudgetError(
            f"typicality decoding scans all {count} codewords; over the scan budget"
        )
    sub_sizes = [code.link_sizes[i] for i in unjammed]
    y = indexing.pack_links(rx.links[unjammed], sub_sizes)

    joint = induced_unjammed_joint(code, unjammed)
    ku, ax = joint.factor_sizes
    mass = joint.mass
    zero = mass == 0

    matches: list = []
    for start, block in code.u_chunks():
        rows = block.shape[0]
        pair = block.astype(np.int64) * ax + y[None, :]
        flat = (np.arange(rows, dtype=np.int64)[:, None] * (ku * ax) + pair).ravel()
        counts = np.bincount(flat, minlength=rows * ku * ax).reshape(rows, ku * ax)
        ok = (counts[:, zero] == 0).all(axis=1)
        dev = np.abs(counts / n - mass[None, :]).sum(axis=1)
        hit = np.nonzero(ok & (dev <= tp.gamma))[0]
        matches.extend(int(start + h + 1) for h in hit)
        if len(matches) > 1:
            break
    if not matches:
        return DecodeResult("innocent", examined_sets=1)
    if len(matches) == 1:
        return DecodeResult("message", message=matches[0], examined_sets=1)
    return DecodeResult("error", examined_sets=1)


def _packed_restrictions(code: DirectCode, links: tuple) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Per-message packed restriction values plus their sort order, cached."""
    if links in code._restriction_cache:
        return code._restriction_cache[links]
    sub_sizes = [code.link_sizes[i] for i in links]
    sub_alpha = int(np.prod(sub_sizes))
    if code.params.n * math.log2(sub_alpha) > 63:
        code._restriction_cache[links] = None
        return None
    restrict = indexing.restrict_codes(code.link_sizes, links)
    values = np.empty(code.message_count, dtype=np.int64)
    for start, block in code.chunks():
        values[start:start + block.shape[0]] = indexing.pack_sequences(
            restrict[block.astype(np.int64)], sub_alpha)
    order = np.argsort(values, kind="stable")
    result = (values, order)
    if code.materialized:
        code._restriction_cache[links] = result
    return result


def matching_messages(code: DirectCode, links: Sequence[int],
                      y_links: np.ndarray) -> np.ndarray:
    """1-based messages whose restriction to `links` equals the received rows."""
    links = tuple(sorted(int(i) for i in links))
    if not links:
        return np.arange(1, code.message_count + 1)
    sub_sizes = [code.link_sizes[i] for i in links]
    sub_alpha = int(np.prod(sub_sizes))
    ycodes = indexing.pack_links(np.asarray(y_links), sub_sizes)
    packed = _packed_restrictions(code, links)
    if packed is not None:
        target = int(indexing.pack_sequences(ycodes[None, :], sub_alpha)[0])
        values, order = packed
        lo = np.searchsorted(values, target, side="left", sorter=order)
        hi = np.searchsorted(values, target, side="right", sorter=order)
        return np.sort(order[lo:hi]) + 1
    restrict = indexing.restrict_codes(code.link_sizes, links)
    hits = []
    for start, block in code.chunks():
        eq = (restrict[block.astype(np.int64)] == ycodes[None, :]).all(axis=1)
        hits.append(np.nonzero(eq)[0] + start + 1)
    return np.concatenate(hits) if hits else np.array([], dtype=np.int64)


def decode_overwrite(code: DirectCode, rx: ReceivedWord,
                     model: NetworkModel) -> DecodeResult:
    """Erasure-like exhaustive list decoding over every candidate jam set."""
    if rx.erased.any():
        raise ValueError("overwrite decoding expects a fully symbol-valued word")
    count = code.message_count
    if not code.materialized and count > DECODE_SCAN_BUDGET:
        raise ResourceBudgetError(
            f"list decoding scans all {count} codewords; over the scan budget"
        )
    fam = model.jam_family()
    listed: set = set()
    for jhat in fam:
        jc = [i for i in range(model.link_count) if i not in jhat]
        for m in matching_messages(code, jc, rx.links[jc]):
            listed.add(int(m))
        if len(listed) > 1:
            return DecodeResult("error", examined_sets=len(fam))
    if not listed:
        return DecodeResult("innocent", examined_sets=len(fam))
    if len(listed) == 1:
        return DecodeResult("message", message=next(iter(listed)), examined_sets=len(fam))
    return DecodeResult("error", examined_sets=len(fam))


def dump_codewords(code: DirectCode, path: str) -> None:
    """Debug export: one row of product symbol indices per message."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["message"] + [f"t{t}" for t in range(code.params.n)])
        for start, block in code.chunks():
            for i, row in enumerate(block):
                writer.writerow([start + i + 1] + [int(v) for v in row])


# ---------------------------------------------------------------------------
# Streaming census used by the concentration and spoof-ratio surrogates
# ---------------------------------------------------------------------------

@dataclass
class RestrictionSurvey:
    """One streaming pass over a direct codebook.

    counts_j: histogram of packed restrictions to the jammed links;
    pair_values_sorted: packed (x_J, x_G) pairs over all messages, sorted;
    match_xj / match_g: for messages whose x_J hit a requested target, the
    packed jammed and good-set restrictions.
    """

    counts_j: np.ndarray
    pair_values_sorted: np.ndarray
    match_xj: np.ndarray
    match_g: np.ndarray
    j_space: int
    g_space: int


def survey_restrictions(code: DirectCode, j_links: Sequence[int],
                        g_links: Sequence[int],
                        xj_targets: Optional[np.ndarray] = None,
                        census_budget: int = 1 << 26) -> RestrictionSurvey:
    """Collect restriction statistics in a single pass over the codebook."""
    j_links = tuple(sorted(int(i) for i in j_links))
    g_links = tuple(sorted(int(i) for i in g_links))
    if set(j_links) & set(g_links):
        raise ValueError("jammed and good link sets must be disjoint")
    n = code.params.n
    sizes = code.link_sizes
    aj = int(np.prod([sizes[i] for i in j_links]))
    ag = int(np.prod([sizes[i] for i in g_links]))
    j_space = aj ** n
    g_space = ag ** n
    if j_space > census_budget:
        raise ResourceBudgetError("jammed restriction space exceeds the census budget")
    if n * (math.log2(aj) + math.log2(ag)) > 63:
        raise ResourceBudgetError("pair restriction space exceeds 63-bit packing")

    restrict_j = indexing.restrict_codes(sizes, j_links)
    restrict_g = indexing.restrict_codes(sizes, g_links)
    targets = np.sort(np.asarray(xj_targets, dtype=np.int64)) if xj_targets is not None \
        else None

    pair_dtype = np.uint32 if j_space * g_space <= (1 << 32) else np.uint64
    pair_values = np.empty(code.message_count, dtype=pair_dtype)
    counts = np.zeros(j_space, dtype=np.int64)
    got_xj, got_g = [], []
    for start, block in code.chunks():
        block64 = block.astype(np.int64)
        pj = indexing.pack_sequences(restrict_j[block64], aj)
        pg = indexing.pack_sequences(restrict_g[block64], ag)
        counts += np.bincount(pj, minlength=j_space)
        pair_values[start:start + block.shape[0]] = (pj * g_space + pg).astype(pair_dtype)
        if targets is not None:
            pos = np.searchsorted(targets, pj)
            pos[pos == targets.size] = 0
            mask = targets[pos] == pj
            got_xj.append(pj[mask])
            got_g.append(pg[mask])
    pair_values.sort()
    return RestrictionSurvey(
        counts_j=counts,
        pair_values_sorted=pair_values,
        match_xj=np.concatenate(got_xj) if got_xj else np.array([], dtype=np.int64),
        match_g=np.concatenate(got_g) if got_g else np.array([], dtype=np.int64),
        j_space=j_space,
        g_space=g_space,
    )


def pair_membership(survey: RestrictionSurvey, xj_packed: np.ndarray,
                    g_packed: np.ndarray) -> np.ndarray:
    """Whether each (x_J, x_G) pair occurs as some codeword's restriction."""
    query = (np.asarray(xj_packed, dtype=np.int64) * survey.g_space +
             np.asarray(g_packed, dtype=np.int64)).astype(survey.pair_values_sorted.dtype)
    pos = np.searchsorted(survey.pair_values_sorted, query)
    pos[pos == survey.pair_values_sorted.size] = 0
    return survey.pair_values_sorted[pos] == query
