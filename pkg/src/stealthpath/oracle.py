"""Exact brute-force references on tiny instances.

Everything here enumerates: n-letter marginals of what the adversary observes,
exact variational-distance stealth gaps, exhaustive detector optimization,
exact decoder error probabilities, and a grid search over the marginal-matching
polytope. These certify the fast Monte Carlo and solver paths on instances
small enough to enumerate; every operation raises ResourceBudgetError instead
of silently approximating when the state space is too large.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple, Union

import numpy as np

from . import indexing
from .adversary import JammingStrategy, JamSet, erasure_jam, overwrite_jam
from .codec import (
    Code,
    DirectCode,
    LayeredCode,
    ReceivedWord,
    ResourceBudgetError,
    Transmission,
    decode_erasure,
    decode_overwrite,
)
from .probkit import (
    Distribution,
    TypicalityParams,
    variational_distance,
)
from .ratesolver import (
    NetworkModel,
    SolutionB,
    _jammed_entropies,
    _marginal_system,
    _unjammed_matrices,
    check_feasibility_b,
)
from .probkit import JointDistribution, entropy_of_mass

MARGINAL_BUDGET = 1 << 22
DETECTOR_BUDGET = 1 << 16
ENUMERATION_BUDGET = 1 << 20
_WORK_BUDGET = 1 << 28


def _jam_space(model_or_code, j: JamSet, n: int) -> int:
    sizes = model_or_code.link_alphabet_sizes if isinstance(model_or_code, NetworkModel) \
        else model_or_code
    aj = int(np.prod([sizes[i] for i in j.links])) if j.links else 1
    if n * math.log2(max(aj, 2)) > 62:
        raise ResourceBudgetError("observation space exceeds 63-bit indexing")
    return aj ** n


def exact_innocent_marginal(model: NetworkModel, j: JamSet, n: int,
                            budget: int = MARGINAL_BUDGET) -> Distribution:
    """n-fold product of the innocent marginal on the jammed links."""
    space = _jam_space(model, j, n)
    if space > budget:
        raise ResourceBudgetError(f"observation space {space} exceeds budget {budget}")
    if not j.links:
        return Distribution(1, np.array([1.0]))
    s = indexing.restriction_matrix(model.link_alphabet_sizes, j.links)
    single = s @ model.innocent.mass
    mass = np.array([1.0])
    for _ in range(n):
        mass = np.kron(mass, single)
    return Distribution(space, mass)


def exact_active_marginal(code: Code, j: JamSet,
                          budget: int = MARGINAL_BUDGET) -> Distribution:
    """What the adversary sees on the jammed links, averaged over all codewords."""
    sizes = code.link_sizes
    n = code.params.n
    aj = int(np.prod([sizes[i] for i in j.links])) if j.links else 1
    space = _jam_space(tuple(sizes), j, n)
    if space > budget:
        raise ResourceBudgetError(f"observation space {space} exceeds budget {budget}")
    count = code.message_count
    if not j.links:
        return Distribution(1, np.array([1.0]))
    if isinstance(code, DirectCode):
        # one streaming histogram pass: O(N n) work regardless of the space
        if count * n > _WORK_BUDGET:
            raise ResourceBudgetError("marginal enumeration work exceeds the budget")
        restrict = indexing.restrict_codes(sizes, j.links)
        counts = np.zeros(space, dtype=np.int64)
        for _, block in code.chunks():
            packed = indexing.pack_sequences(restrict[block.astype(np.int64)], aj)
            counts += np.bincount(packed, minlength=space)
        return Distribution(space, counts / count)
    # Layered: exact per-position convolution of the kernel rows.
    if count * space > _WORK_BUDGET:
        raise ResourceBudgetError("marginal enumeration work exceeds the budget")
    s = indexing.restriction_matrix(sizes, j.links)
    rows = code.kernel.matrix @ s.T  # (u_size, aj)
    mass = np.zeros(space)
    for _, block in code.u_chunks():
        for u_seq in block:
            v = np.array([1.0])
            for u in u_seq:
                v = np.kron(v, rows[int(u)])
            mass += v
    return Distribution(space, mass / count)


def exact_stealth_gap(code: Code, model: NetworkModel, j: JamSet,
                      budget: int = MARGINAL_BUDGET) -> float:
    """Exact variational distance between active and innocent observations."""
    active = exact_active_marginal(code, j, budget)
    innocent = exact_innocent_marginal(model, j, code.params.n, budget)
    return variational_distance(active, innocent)


def stealth_gap_partition(code: Code, model: NetworkModel, j: JamSet,
                          tp: TypicalityParams,
                          budget: int = MARGINAL_BUDGET) -> Tuple[float, float]:
    """Split the exact gap into typical and atypical observation contributions.

    The two terms sum to the total gap exactly; typicality is judged against
    the single-letter innocent marginal on the jammed links.
    """
    active = exact_active_marginal(code, j, budget)
    innocent = exact_innocent_marginal(model, j, code.params.n, budget)
    n = code.params.n
    sizes = code.link_sizes
    aj = int(np.prod([sizes[i] for i in j.links])) if j.links else 1
    s = indexing.restriction_matrix(sizes, j.links)
    single = s @ model.innocent.mass

    diff = 0.5 * np.abs(active.mass - innocent.mass)
    typical_term = 0.0
    atypical_term = 0.0
    zero = single == 0
    for idx in range(active.alphabet_size):
        seq = indexing.unpack_sequence(idx, aj, n)
        counts = np.bincount(seq, minlength=aj)
        typ = not np.any(counts[zero] > 0) and \
            float(np.abs(counts / n - single).sum()) <= tp.gamma
        if typ:
            typical_term += diff[idx]
        else:
            atypical_term += diff[idx]
    return float(typical_term), float(atypical_term)


def exhaustive_best_detector(code: Code, model: NetworkModel, j: JamSet,
                             budget: int = DETECTOR_BUDGET) -> Tuple[float, float, float]:
    """(alpha, beta, alpha+beta) of the pointwise-optimal deterministic detector."""
    active = exact_active_marginal(code, j, budget)
    innocent = exact_innocent_marginal(model, j, code.params.n, budget)
    flag = active.mass > innocent.mass  # verdict 1 exactly where active dominates
    alpha = float(innocent.mass[flag].sum())
    beta = float(active.mass[~flag].sum())
    return alpha, beta, alpha + beta


def brute_force_min_ab(innocent: Distribution, active: Distribution,
                       max_points: int = 16) -> float:
    """min over ALL deterministic detectors of alpha+beta, by literal enumeration."""
    s = innocent.alphabet_size
    if s != active.alphabet_size:
        raise ValueError("alphabet mismatch")
    if s > max_points:
        raise ResourceBudgetError(f"2^{s} detectors exceed the enumeration budget")
    best = 2.0
    for bits in range(1 << s):
        flag = np.array([(bits >> i) & 1 for i in range(s)], dtype=bool)
        ab = float(innocent.mass[flag].sum()) + float(active.mass[~flag].sum())
        best = min(best, ab)
    return best


# ---------------------------------------------------------------------------
# Exact decoder error probability
# ---------------------------------------------------------------------------

def _innocent_blocks(model: NetworkModel, n: int, budget: int) -> Iterator[Tuple[float, np.ndarray]]:
    """Every innocent n-block with its probability (zero-mass blocks skipped)."""
    a = model.product_alphabet_size
    if a ** n > budget:
        raise ResourceBudgetError("innocent block enumeration exceeds the budget")
    mass = model.innocent.mass
    support = np.nonzero(mass)[0]
    for combo in itertools.product(support, repeat=n):
        p = float(np.prod(mass[list(combo)]))
        yield p, indexing.unpack_links(np.array(combo), model.link_alphabet_sizes)


def _active_blocks(code: Code, m: int, model: NetworkModel,
                   budget: int) -> Iterator[Tuple[float, np.ndarray]]:
    """Every possible transmitted block for message m with its probability."""
    if isinstance(code, DirectCode):
        yield 1.0, code.codeword_links(m)
        return
    u_seq = code.u_codeword(m)
    kern = code.kernel.matrix
    supports = [np.nonzero(kern[int(u)])[0] for u in u_seq]
    total = int(np.prod([s.size for s in supports]))
    if total > budget:
        raise ResourceBudgetError("kernel randomness enumeration exceeds the budget")
    for combo in itertools.product(*supports):
        p = float(np.prod([kern[int(u), int(x)] for u, x in zip(u_seq, combo)]))
        yield p, indexing.unpack_links(np.array(combo), code.link_sizes)


def _received_words(links: np.ndarray, j: JamSet, jamming: Union[str, JammingStrategy],
                    model: NetworkModel, code: Code,
                    budget: int) -> Iterator[Tuple[float, ReceivedWord]]:
    c = links.shape[0]
    if jamming == "erasure":
        erased = np.zeros(c, dtype=bool)
        erased[list(j.links)] = True
        out = links.copy()
        out[erased] = 0
        yield 1.0, ReceivedWord(links=out, erased=erased)
        return
    strategy = jamming
    if not isinstance(strategy, JammingStrategy):
        raise ValueError("jamming must be 'erasure' or a JammingStrategy instance")
    if not j.links:
        yield 1.0, ReceivedWord(links=links.copy(), erased=np.zeros(c, dtype=bool))
        return
    x_j = links[list(j.links)]
    for p, y_j in strategy.outcomes(x_j, j, model, code, budget):
        out = links.copy()
        out[list(j.links)] = y_j
        yield p, ReceivedWord(links=out, erased=np.zeros(c, dtype=bool))


def exact_error_probability(code: Code, model: NetworkModel, j: JamSet,
                            jamming: Union[str, JammingStrategy],
                            tp: Optional[TypicalityParams] = None,
                            budget: int = ENUMERATION_BUDGET) -> float:
    """Exact error probability, summed over the innocent and active hypotheses."""
    err0, err1 = exact_error_components(code, model, j, jamming, tp, budget)
    return err0 + err1


def exact_error_components(code: Code, model: NetworkModel, j: JamSet,
                           jamming: Union[str, JammingStrategy],
                           tp: Optional[TypicalityParams] = None,
                           budget: int = ENUMERATION_BUDGET) -> Tuple[float, float]:
    """Exact per-hypothesis error probabilities (innocent, active).

    Enumerates message choice, encoder randomness, and strategy randomness.
    Erasure jamming pairs with the typicality decoder on a layered code;
    overwrite strategies pair with the list decoder on a direct code.
    """
    if jamming == "erasure":
        if not isinstance(code, LayeredCode):
            raise ValueError("erasure jamming uses the layered scheme")
        if tp is None:
            tp = TypicalityParams()
        decode = lambda rx: decode_erasure(code, rx, tp, model)
    else:
        if not isinstance(code, DirectCode):
            raise ValueError("overwrite strategies use the direct scheme")
        decode = lambda rx: decode_overwrite(code, rx, model)

    n = code.params.n
    # Innocent hypothesis: error whenever the verdict is not "innocent".
    err0 = 0.0
    for p_block, links in _innocent_blocks(model, n, budget):
        for p_rx, rx in _received_words(links, j, jamming, model, code, budget):
            if decode(rx).verdict != "innocent":
                err0 += p_block * p_rx
    # Active hypothesis: uniform message; error unless that exact message decodes.
    count = code.message_count
    if count > budget:
        raise ResourceBudgetError("message enumeration exceeds the budget")
    err1 = 0.0
    for m in range(1, count + 1):
        for p_block, links in _active_blocks(code, m, model, budget):
            for p_rx, rx in _received_words(links, j, jamming, model, code, budget):
                result = decode(rx)
                if not (result.verdict == "message" and result.message == m):
                    err1 += p_block * p_rx / count
    return err0, err1


# ---------------------------------------------------------------------------
# Grid reference for the entropy-bound optimization
# ---------------------------------------------------------------------------

def grid_solve_b(model: NetworkModel, grid_resolution: float = 1e-2,
                 max_dimension: int = 4) -> SolutionB:
    """Exhaustive multi-resolution grid over the marginal-matching polytope.

    A slow certified reference for the projected-ascent solver; refuses
    instances whose polytope has more than `max_dimension` free directions.
    """
    if grid_resolution <= 0:
        raise ValueError("grid_resolution must be positive")
    dim_x = model.product_alphabet_size
    if model.adversary_budget == 0:
        # Only normalization constrains the mass: the uniform law is optimal.
        p = np.full(dim_x, 1.0 / dim_x)
        return SolutionB(feasible=True,
                         p_x=JointDistribution(model.link_alphabet_sizes, p),
                         value=float(np.log2(dim_x)),
                         feasibility_margin=float(np.log2(dim_x)),
                         info={"method": "grid", "dimension": 0})
    m, b = _marginal_system(model)
    # Orthonormal nullspace of the constraint matrix.
    _, sv, vt = np.linalg.svd(m)
    rank = int((sv > 1e-10).sum())
    null = vt[rank:].T  # (dim_x, d)
    d = null.shape[1]
    if d > max_dimension:
        raise ResourceBudgetError(
            f"polytope dimension {d} exceeds the grid limit {max_dimension}")
    s_jc = _unjammed_matrices(model)
    max_h_jammed = float(_jammed_entropies(model).max())
    p0 = model.innocent.mass.copy()  # always satisfies the marginal constraints

    def value_at(t: np.ndarray) -> float:
        p = p0 + null @ t
        if p.min() < -1e-12:
            return -np.inf
        p = np.maximum(p, 0.0)
        return min(entropy_of_mass(s @ p) for s in s_jc)

    # Coarse-to-fine refinement around the incumbent; grids always contain
    # their center so the start (the innocent point) is never lost.
    center = np.zeros(d)
    half = 1.5  # |t| <= ||p - p0||_2 <= sqrt(2) for simplex points
    best_t, best_v = center.copy(), value_at(center)
    points_per_axis = 11
    step = 2 * half / (points_per_axis - 1)
    while True:
        axes = [center[i] + np.linspace(-half, half, points_per_axis) for i in range(d)]
        for combo in itertools.product(*axes):
            v = value_at(np.array(combo))
            if v > best_v:
                best_t, best_v = np.array(combo), v
        if step <= grid_resolution:
            break
        center = best_t
        half = step  # refine one coarse cell around the incumbent
        step = 2 * half / (points_per_axis - 1)

    p = np.maximum(p0 + null @ best_t, 0.0)
    p /= p.sum()
    margin = best_v - max_h_jammed
    report = check_feasibility_b(JointDistribution(model.link_alphabet_sizes, p), model,
                                 tol_marg=1e-6, delta_feas=0.0)
    info = {"method": "grid", "dimension": d, "resolution": grid_resolution}
    if margin <= 0:
        return SolutionB(feasible=False, value=best_v, feasibility_margin=margin,
                         reason="no grid point with positive entropy margin", info=info)
    return SolutionB(feasible=True,
                     p_x=JointDistribution(model.link_alphabet_sizes, p),
                     value=best_v, feasibility_margin=margin, info=info)
