"""The eavesdrop-and-jam adversary.

Jam-set selection, the two physical jamming modes (erase a link wholesale or
overwrite its symbols), a small suite of overwrite strategies covering the
qualitatively distinct attacks (noise, innocent mimicry, codebook-aware
spoofing, symmetrization), and detectors: the likelihood-ratio test against
exact n-letter marginals plus empirical false-alarm / missed-detection
estimation.

Every strategy exposes both `apply` (sampled, for Monte Carlo) and `outcomes`
(the full conditional output law, for the exact oracle).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import indexing
from .codec import (
    Code,
    DirectCode,
    LayeredCode,
    ReceivedWord,
    ResourceBudgetError,
    Transmission,
    encode,
)
from .probkit import Distribution
from .ratesolver import NetworkModel
from .rng import derive_seed, generator


@dataclass(frozen=True)
class JamSet:
    """A sorted subset of link indices the adversary controls."""

    links: tuple

    def __post_init__(self):
        links = tuple(sorted(int(i) for i in self.links))
        if len(set(links)) != len(links) or any(i < 0 for i in links):
            raise ValueError("jam set must be distinct non-negative link indices")
        object.__setattr__(self, "links", links)

    def validate(self, model: NetworkModel) -> "JamSet":
        if len(self.links) > model.adversary_budget and not model.allow_symmetrizable:
            raise ValueError(f"jam set {self.links} exceeds budget {model.adversary_budget}")
        if any(i >= model.link_count for i in self.links):
            raise ValueError("jam set references a nonexistent link")
        return self

    def complement(self, link_count: int) -> tuple:
        return tuple(i for i in range(link_count) if i not in self.links)


@dataclass(frozen=True)
class DetectorStats:
    """Empirical false-alarm (alpha) and missed-detection (beta) frequencies."""

    alpha: float
    beta: float
    trials: int

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError("alpha and beta must lie in [0, 1]")


def erasure_jam(tx: Transmission, j: JamSet) -> ReceivedWord:
    """Erase the jammed links wholesale; pass the rest through verbatim."""
    c = tx.links.shape[0]
    erased = np.zeros(c, dtype=bool)
    erased[list(j.links)] = True
    links = tx.links.copy()
    links[erased] = 0  # erased rows carry no information
    return ReceivedWord(links=links, erased=erased)


class JammingStrategy:
    """Conditional law of the overwritten symbols given the observed block.

    `apply` draws one output; `outcomes` enumerates the full conditional
    distribution as (probability, replacement rows) pairs for the exact oracle.
    """

    id: str = ""
    params_schema: dict = {}

    def apply(self, x_j: np.ndarray, j: JamSet, model: NetworkModel,
              code: Optional[Code], seed: int) -> np.ndarray:
        raise NotImplementedError

    def outcomes(self, x_j: np.ndarray, j: JamSet, model: NetworkModel,
                 code: Optional[Code], budget: int = 1 << 20) -> List[Tuple[float, np.ndarray]]:
        raise NotImplementedError


def _jam_marginal(model: NetworkModel, j: JamSet) -> Distribution:
    s = indexing.restriction_matrix(model.link_alphabet_sizes, j.links)
    return Distribution(s.shape[0], s @ model.innocent.mass)


def _sub_sizes(model: NetworkModel, j: JamSet) -> list:
    return [model.link_alphabet_sizes[i] for i in j.links]


class Passthrough(JammingStrategy):
    """Leaves the observed symbols untouched."""

    id = "passthrough"

    def apply(self, x_j, j, model, code, seed):
        return x_j.copy()

    def outcomes(self, x_j, j, model, code, budget=1 << 20):
        return [(1.0, x_j.copy())]


class UniformRandom(JammingStrategy):
    """Replaces the jammed links with i.i.d. uniform symbols."""

    id = "uniform-random"

    def apply(self, x_j, j, model, code, seed):
        rng = generator(seed, "uniform-jam")
        sizes = _sub_sizes(model, j)
        return np.vstack([rng.integers(0, s, size=x_j.shape[1]) for s in sizes]) \
            if sizes else x_j.copy()

    def outcomes(self, x_j, j, model, code, budget=1 << 20):
        sizes = _sub_sizes(model, j)
        n = x_j.shape[1]
        aj = int(np.prod(sizes)) if sizes else 1
        if aj ** n > budget:
            raise ResourceBudgetError("uniform-jam outcome space exceeds the budget")
        prob = 1.0 / aj ** n
        out = []
        for combo in itertools.product(range(aj), repeat=n):
            out.append((prob, indexing.unpack_links(np.array(combo), sizes)))
        return out


class ResampleInnocent(JammingStrategy):
    """Replaces the jammed links with fresh i.i.d. innocent-marginal symbols."""

    id = "resample-innocent"

    def apply(self, x_j, j, model, code, seed):
        if not j.links:
            return x_j.copy()
        rng = generator(seed, "innocent-jam")
        marg = _jam_marginal(model, j)
        cdf = np.cumsum(marg.mass)
        codes = np.searchsorted(cdf, rng.random(x_j.shape[1]), side="right").clip(
            max=marg.alphabet_size - 1)
        return indexing.unpack_links(codes, _sub_sizes(model, j))

    def outcomes(self, x_j, j, model, code, budget=1 << 20):
        if not j.links:
            return [(1.0, x_j.copy())]
        marg = _jam_marginal(model, j)
        n = x_j.shape[1]
        if marg.alphabet_size ** n > budget:
            raise ResourceBudgetError("innocent-jam outcome space exceeds the budget")
        sizes = _sub_sizes(model, j)
        out = []
        for combo in itertools.product(range(marg.alphabet_size), repeat=n):
            p = float(np.prod(marg.mass[list(combo)]))
            if p > 0:
                out.append((p, indexing.unpack_links(np.array(combo), sizes)))
        return out


def _codeword_restrictions(code: DirectCode, j: JamSet) -> np.ndarray:
    """(N, n) packed restriction codes of every codeword on the jammed links."""
    restrict = indexing.restrict_codes(code.link_sizes, j.links)
    parts = [restrict[block.astype(np.int64)] for _, block in code.chunks()]
    return np.concatenate(parts, axis=0)


class SpoofCodeword(JammingStrategy):
    """Writes the restriction of a uniformly chosen typical-looking codeword.

    Candidate messages are those whose restriction to the jammed links is
    strongly typical for the code's jammed-link marginal; if none qualify the
    choice falls back to all messages.
    """

    id = "spoof-codeword"
    params_schema = {"gamma": "typicality slack (default 0.1)"}

    def __init__(self, gamma: float = 0.1):
        self.gamma = float(gamma)
        self._cache: dict = {}

    def _candidates(self, code: DirectCode, j: JamSet) -> np.ndarray:
        key = (id(code), j.links)
        if key in self._cache:
            return self._cache[key]
        sub = _codeword_restrictions(code, j)
        s = indexing.restriction_matrix(code.link_sizes, j.links)
        mass = s @ code.p_x.mass
        aj = mass.size
        n = code.params.n
        rows = sub.shape[0]
        flat = (np.arange(rows, dtype=np.int64)[:, None] * aj + sub).ravel()
        counts = np.bincount(flat, minlength=rows * aj).reshape(rows, aj)
        ok = (counts[:, mass == 0] == 0).all(axis=1)
        dev = np.abs(counts / n - mass[None, :]).sum(axis=1)
        cand = np.nonzero(ok & (dev <= self.gamma))[0] + 1
        if cand.size == 0:
            cand = np.arange(1, rows + 1)
        self._cache[key] = cand
        return cand

    def _require_direct(self, code) -> DirectCode:
        if not isinstance(code, DirectCode):
            raise ValueError(f"strategy {self.id!r} needs a direct codebook handle")
        return code

    def apply(self, x_j, j, model, code, seed):
        if not j.links:
            return x_j.copy()
        code = self._require_direct(code)
        cand = self._candidates(code, j)
        rng = generator(seed, "spoof")
        m = int(cand[rng.integers(0, cand.size)])
        return code.codeword_links(m)[list(j.links)]

    def outcomes(self, x_j, j, model, code, budget=1 << 20):
        if not j.links:
            return [(1.0, x_j.copy())]
        code = self._require_direct(code)
        cand = self._candidates(code, j)
        sizes = _sub_sizes(model, j)
        weights: Dict[tuple, float] = {}
        for m in cand:
            key = tuple(code.codeword_links(int(m))[list(j.links)].ravel())
            weights[key] = weights.get(key, 0.0) + 1.0 / cand.size
        n = x_j.shape[1]
        return [(p, np.array(k).reshape(len(sizes), n)) for k, p in sorted(weights.items())]


class SpoofConsistent(JammingStrategy):
    """Writes the codeword restriction that best agrees with the observation."""

    id = "spoof-consistent"

    def _best(self, x_j, j, code: DirectCode) -> int:
        if not isinstance(code, DirectCode):
            raise ValueError(f"strategy {self.id!r} needs a direct codebook handle")
        sub = _codeword_restrictions(code, j)
        obs = indexing.pack_links(x_j, [code.link_sizes[i] for i in j.links])
        agreement = (sub == obs[None, :]).sum(axis=1)
        return int(np.argmax(agreement)) + 1  # ties -> smallest message

    def apply(self, x_j, j, model, code, seed):
        if not j.links:
            return x_j.copy()
        m = self._best(x_j, j, code)
        return code.codeword_links(m)[list(j.links)]

    def outcomes(self, x_j, j, model, code, budget=1 << 20):
        if not j.links:
            return [(1.0, x_j.copy())]
        m = self._best(x_j, j, code)
        return [(1.0, code.codeword_links(m)[list(j.links)])]


class Symmetrize(JammingStrategy):
    """Pretends to be the sender: writes a uniformly chosen fake codeword.

    Only meaningful when the jammed links can carry a full codeword image the
    decoder cannot distinguish from the honest half, i.e. |j| >= C/2.
    """

    id = "symmetrize"

    def _check(self, j: JamSet, model: NetworkModel, code) -> DirectCode:
        if 2 * len(j.links) < model.link_count:
            raise ValueError("symmetrization needs |j| >= C/2")
        if not isinstance(code, DirectCode):
            raise ValueError(f"strategy {self.id!r} needs a direct codebook handle")
        return code

    def apply(self, x_j, j, model, code, seed):
        code = self._check(j, model, code)
        rng = generator(seed, "fake-message")
        m = int(rng.integers(0, code.message_count)) + 1
        return code.codeword_links(m)[list(j.links)]

    def outcomes(self, x_j, j, model, code, budget=1 << 20):
        code = self._check(j, model, code)
        n = code.message_count
        if n > budget:
            raise ResourceBudgetError("fake-message enumeration exceeds the budget")
        return [(1.0 / n, code.codeword_links(m)[list(j.links)])
                for m in range(1, n + 1)]


_STRATEGY_CLASSES = (Passthrough, UniformRandom, ResampleInnocent,
                     SpoofCodeword, SpoofConsistent, Symmetrize)
STRATEGY_IDS = tuple(cls.id for cls in _STRATEGY_CLASSES)


def get_strategy(strategy_id: str, **params) -> JammingStrategy:
    """Instantiate a registered strategy by id."""
    for cls in _STRATEGY_CLASSES:
        if cls.id == strategy_id:
            return cls(**params)
    raise ValueError(f"unknown jamming strategy {strategy_id!r}; "
                     f"registered: {', '.join(STRATEGY_IDS)}")


def list_strategies() -> List[dict]:
    return [{"id": cls.id, "params": dict(cls.params_schema)} for cls in _STRATEGY_CLASSES]


def overwrite_jam(tx: Transmission, j: JamSet, strategy: JammingStrategy,
                  seed: int, model: NetworkModel,
                  code: Optional[Code] = None) -> ReceivedWord:
    """Replace the jammed links with the strategy's output; erase nothing."""
    links = tx.links.copy()
    if j.links:
        x_j = tx.links[list(j.links)]
        y_j = strategy.apply(x_j, j, model, code, seed)
        if y_j.shape != x_j.shape:
            raise ValueError(f"strategy {strategy.id!r} returned shape {y_j.shape}, "
                             f"expected {x_j.shape}")
        links[list(j.links)] = y_j
    return ReceivedWord(links=links, erased=np.zeros(links.shape[0], dtype=bool))


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------

def pack_observation(x_j: np.ndarray, sizes: Sequence[int]) -> int:
    """Jammed-link block -> index into the n-letter observation space."""
    codes = indexing.pack_links(x_j, sizes)
    aj = int(np.prod(sizes))
    return int(indexing.pack_sequences(codes[None, :], aj)[0])


def optimal_detect(x_j: np.ndarray, sizes: Sequence[int],
                   innocent_marg_n: Distribution,
                   active_marg_n: Distribution) -> int:
    """Likelihood-ratio test at threshold 1 against exact n-letter marginals.

    Returns 1 iff the active mass strictly exceeds the innocent mass at the
    observed block; ties break toward innocent.
    """
    if innocent_marg_n.alphabet_size != active_marg_n.alphabet_size:
        raise ValueError("marginal handles disagree on the observation space")
    idx = pack_observation(x_j, sizes)
    return int(active_marg_n.mass[idx] > innocent_marg_n.mass[idx])


def estimate_alpha_beta(detector: Callable[[np.ndarray], int], model: NetworkModel,
                        code: Code, j: JamSet, trials: int,
                        seed: int) -> DetectorStats:
    """Empirical alpha/beta over `trials` transmissions per hypothesis."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    j.validate(model)
    rows = list(j.links)
    false_alarms = 0
    missed = 0
    msg_rng = generator(seed, "detect-messages")
    n_msg = code.message_count
    for t in range(trials):
        tx0 = encode(code, model, 0, 0, derive_seed(seed, "detect-tx", 0, t))
        if detector(tx0.links[rows]) == 1:
            false_alarms += 1
        m = int(msg_rng.integers(0, n_msg)) + 1
        tx1 = encode(code, model, 1, m, derive_seed(seed, "detect-tx", 1, t))
        if detector(tx1.links[rows]) == 0:
            missed += 1
    return DetectorStats(alpha=false_alarms / trials, beta=missed / trials, trials=trials)
