"""Achievable-rate bounds for the multipath stealth problem.

Two bounds are computed for a network with C links and an adversary that can
control any subset of at most Z links:

  * the entropy bound (direct scheme): maximize the worst-case entropy of the
    transmission seen on the unjammed links, subject to every size-<=Z marginal
    matching the innocent distribution;
  * the auxiliary-variable bound (layered scheme): the same game played through
    an auxiliary variable U and a kernel U -> X, which can only be larger.

The entropy problem is concave over an affine polytope and is solved by
projected supergradient ascent with multi-start. The auxiliary problem is
non-concave; the solver is a best-effort alternating ascent whose result is a
certified-feasible lower bound, never below the entropy bound (it seeds one
start by embedding U = X at the entropy optimum).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import indexing
from .probkit import (
    ConditionalKernel,
    Distribution,
    JointDistribution,
    entropy,
    entropy_of_mass,
)
from .rng import generator

_INV_LN2 = 1.0 / np.log(2.0)
_MASS_FLOOR = 1e-300


@dataclass(frozen=True)
class NetworkModel:
    """C parallel noiseless links, an adversary budget Z, and the innocent law."""

    link_count: int
    adversary_budget: int
    link_alphabet_sizes: tuple
    innocent: JointDistribution
    # Only for the symmetrization negative test; achievability needs Z < C/2.
    allow_symmetrizable: bool = False

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.link_alphabet_sizes)
        object.__setattr__(self, "link_alphabet_sizes", sizes)
        if self.link_count < 1 or len(sizes) != self.link_count:
            raise ValueError("link_alphabet_sizes must list one size per link")
        if self.innocent.factor_sizes != sizes:
            raise ValueError("innocent distribution does not match link alphabets")
        if self.adversary_budget < 0:
            raise ValueError("adversary budget must be non-negative")
        if not self.allow_symmetrizable and not self.adversary_budget * 2 < self.link_count:
            raise ValueError(
                "adversary budget must satisfy Z < C/2 (set allow_symmetrizable to bypass)"
            )

    @property
    def product_alphabet_size(self) -> int:
        return int(np.prod(self.link_alphabet_sizes))

    def jam_family(self) -> "JamSetFamily":
        return enumerate_jam_sets(self.link_count, self.adversary_budget)


@dataclass(frozen=True)
class JamSetFamily:
    """Every link subset of size at most Z, including the empty set."""

    sets: tuple

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)


def enumerate_jam_sets(link_count: int, budget: int) -> JamSetFamily:
    """All subsets of {0..C-1} with |J| <= Z, ordered by size then lexicographically."""
    if budget < 0 or budget > link_count:
        raise ValueError("budget must lie in [0, link_count]")
    sets = []
    for k in range(budget + 1):
        sets.extend(itertools.combinations(range(link_count), k))
    return JamSetFamily(tuple(sets))


def cardinality_bound(alphabet_size_of_x: int, jam_family_size: int) -> int:
    """Auxiliary-alphabet size that suffices without losing objective value."""
    if alphabet_size_of_x < 1 or jam_family_size < 1:
        raise ValueError("inputs must be positive")
    return alphabet_size_of_x + 2 * jam_family_size - 1


@dataclass
class SolverConfig:
    opt_tol: float = 1e-3
    delta_feas: float = 1e-3
    tol_marg: float = 1e-9
    restarts: int = 32
    seed: int = 0
    max_iterations: int = 400
    patience: int = 20
    improvement_tol: float = 1e-8
    initial_step: float = 0.5
    projection_iterations: int = 400
    # Alternating-ascent knobs for the auxiliary-variable problem.
    alt_rounds: int = 60
    alt_block_steps: int = 4


@dataclass
class JamSetReport:
    jam_set: tuple
    marginal_gap: float
    entropy_jammed: float
    entropy_unjammed: float


@dataclass
class FeasibilityReport:
    entries: list
    margin: float
    passed: bool


@dataclass
class SolutionB:
    feasible: bool
    p_x: Optional[JointDistribution] = None
    value: float = 0.0
    feasibility_margin: float = 0.0
    reason: str = ""
    info: dict = field(default_factory=dict)


@dataclass
class SolutionA:
    feasible: bool
    p_u: Optional[Distribution] = None
    kernel: Optional[ConditionalKernel] = None
    value: float = 0.0
    feasibility_margin: float = 0.0
    reason: str = ""
    info: dict = field(default_factory=dict)


@dataclass
class AchievableRate:
    bits: float
    feasible: bool
    clamped: bool = False
    reason: str = ""


class _Polytope:
    """{p : M p = b, p >= 0} with exact affine projection and Dykstra rounding."""

    def __init__(self, m: np.ndarray, b: np.ndarray):
        self.m = m
        self.b = b
        self.pinv = np.linalg.pinv(m)

    def affine_project(self, v: np.ndarray) -> np.ndarray:
        return v - self.pinv @ (self.m @ v - self.b)

    def project(self, v: np.ndarray, iterations: int = 400, tol: float = 1e-13) -> np.ndarray:
        """Euclidean projection via Dykstra's alternating scheme."""
        x = v.copy()
        p_inc = np.zeros_like(v)
        q_inc = np.zeros_like(v)
        for _ in range(iterations):
            y = self.affine_project(x + p_inc)
            p_inc = x + p_inc - y
            x_new = np.maximum(y + q_inc, 0.0)
            q_inc = y + q_inc - x_new
            if np.max(np.abs(x_new - x)) < tol:
                x = x_new
                break
            x = x_new
        return x

    def residual(self, p: np.ndarray) -> float:
        return float(np.max(np.abs(self.m @ p - self.b)))


def _marginal_system(model: NetworkModel):
    """Equality system pinning every size-<=Z marginal to the innocent one."""
    sizes = model.link_alphabet_sizes
    rows = [np.ones((1, model.product_alphabet_size))]
    rhs = [np.ones(1)]
    for j in model.jam_family():
        if not j:
            continue
        s = indexing.restriction_matrix(sizes, j)
        rows.append(s)
        rhs.append(s @ model.innocent.mass)
    return np.vstack(rows), np.concatenate(rhs)


def _unjammed_matrices(model: NetworkModel):
    """Restriction matrices onto the complement of each jam set."""
    sizes = model.link_alphabet_sizes
    out = []
    for j in model.jam_family():
        jc = [i for i in range(model.link_count) if i not in j]
        out.append(indexing.restriction_matrix(sizes, jc))
    return out


def _jammed_entropies(model: NetworkModel) -> np.ndarray:
    """H(X_J) for each J; fixed by the marginal-matching constraints."""
    sizes = model.link_alphabet_sizes
    vals = []
    for j in model.jam_family():
        if not j:
            vals.append(0.0)
        else:
            s = indexing.restriction_matrix(sizes, j)
            vals.append(entropy_of_mass(s @ model.innocent.mass))
    return np.array(vals)


def check_feasibility_b(
    p_x: JointDistribution,
    model: NetworkModel,
    tol_marg: float = 1e-9,
    delta_feas: float = 1e-3,
) -> FeasibilityReport:
    """Per-jam-set marginal gaps and entropies for a candidate distribution."""
    if p_x.factor_sizes != model.link_alphabet_sizes:
        raise ValueError("candidate distribution does not match the model alphabets")
    sizes = model.link_alphabet_sizes
    entries = []
    for j in model.jam_family():
        jc = [i for i in range(model.link_count) if i not in j]
        s_j = indexing.restriction_matrix(sizes, j)
        s_jc = indexing.restriction_matrix(sizes, jc)
        gap = 0.5 * float(np.abs(s_j @ p_x.mass - s_j @ model.innocent.mass).sum())
        entries.append(JamSetReport(
            jam_set=j,
            marginal_gap=gap,
            entropy_jammed=entropy_of_mass(s_j @ p_x.mass),
            entropy_unjammed=entropy_of_mass(s_jc @ p_x.mass),
        ))
    margin = min(e.entropy_unjammed for e in entries) - max(e.entropy_jammed for e in entries)
    passed = all(e.marginal_gap <= tol_marg for e in entries) and margin > delta_feas
    return FeasibilityReport(entries=entries, margin=margin, passed=passed)


def _entropy_objective(p: np.ndarray, s_jc: list) -> float:
    return min(entropy_of_mass(s @ p) for s in s_jc)


def _entropy_supergradient(p: np.ndarray, s_jc: list) -> np.ndarray:
    """Average the gradients of all near-active minimum terms (valid supergradient)."""
    vals = np.array([entropy_of_mass(s @ p) for s in s_jc])
    active = np.where(vals <= vals.min() + 1e-9)[0]
    g = np.zeros_like(p)
    for idx in active:
        q = np.maximum(s_jc[idx] @ p, _MASS_FLOOR)
        g += s_jc[idx].T @ (-np.log2(q) - _INV_LN2)
    return g / active.size


def _projected_ascent(p0, objective, supergradient, poly: _Polytope, cfg: SolverConfig):
    """Maximize a concave-ish objective over the polytope from one start."""
    p = poly.project(p0, cfg.projection_iterations)
    f = objective(p)
    stall = 0
    for _ in range(cfg.max_iterations):
        g = supergradient(p)
        norm = np.linalg.norm(g)
        if norm > 0:
            g = g / norm
        step = cfg.initial_step
        improved = False
        while step > 1e-12:
            cand = poly.project(p + step * g, cfg.projection_iterations)
            fc = objective(cand)
            if fc > f:
                improvement = fc - f
                p, f = cand, fc
                improved = True
                break
            step *= 0.5
        if not improved or improvement < cfg.improvement_tol:
            stall += 1
            if stall >= cfg.patience:
                break
        else:
            stall = 0
    return p, f


def _polish_onto_affine(p: np.ndarray, poly: _Polytope) -> Optional[np.ndarray]:
    """Exact affine projection, then clamp float dust; None if truly infeasible."""
    q = poly.affine_project(p)
    if np.min(q) < -1e-9:
        q = poly.project(p, 2000, tol=1e-15)
        q = poly.affine_project(q)
        if np.min(q) < -1e-9:
            return None
    q = np.maximum(q, 0.0)
    q /= q.sum()
    return q


def solve_b(model: NetworkModel, cfg: Optional[SolverConfig] = None) -> SolutionB:
    """Max-min unjammed entropy over the marginal-matching polytope."""
    cfg = cfg or SolverConfig()
    m, b = _marginal_system(model)
    poly = _Polytope(m, b)
    s_jc = _unjammed_matrices(model)
    max_h_jammed = float(_jammed_entropies(model).max())

    objective = lambda p: _entropy_objective(p, s_jc)
    supergrad = lambda p: _entropy_supergradient(p, s_jc)

    dim = model.product_alphabet_size
    starts = [model.innocent.mass.copy()]
    rng = generator(cfg.seed, "solve-b-starts")
    for _ in range(max(cfg.restarts - 1, 0)):
        starts.append(rng.dirichlet(np.ones(dim)))

    best_p, best_f, iterations = None, -np.inf, 0
    for p0 in starts:
        p, f = _projected_ascent(p0, objective, supergrad, poly, cfg)
        iterations += 1
        if f > best_f + 1e-12:
            best_p, best_f = p, f
        elif abs(f - best_f) <= 1e-12 and best_p is not None:
            # Deterministic tie-break: lexicographically smallest mass vector.
            if tuple(np.round(p, 12)) < tuple(np.round(best_p, 12)):
                best_p = p

    polished = _polish_onto_affine(best_p, poly)
    if polished is not None:
        f_pol = objective(polished)
        if f_pol >= best_f - 1e-9:
            best_p, best_f = polished, f_pol

    margin = best_f - max_h_jammed
    info = {"restarts": len(starts), "method": "projected-ascent", "seed": cfg.seed}
    if margin <= cfg.delta_feas:
        return SolutionB(feasible=False, value=best_f, feasibility_margin=margin,
                         reason="no point with entropy margin above delta_feas", info=info)
    report = check_feasibility_b(
        JointDistribution(model.link_alphabet_sizes, best_p), model, cfg.tol_marg, cfg.delta_feas
    )
    if not report.passed:
        return SolutionB(feasible=False, value=best_f, feasibility_margin=report.margin,
                         reason="solver output failed exact feasibility check", info=info)
    return SolutionB(
        feasible=True,
        p_x=JointDistribution(model.link_alphabet_sizes, best_p),
        value=best_f,
        feasibility_margin=margin,
        info=info,
    )


# ---------------------------------------------------------------------------
# Auxiliary-variable problem
# ---------------------------------------------------------------------------

def _mi_terms(q: np.ndarray, s_sub: np.ndarray) -> float:
    """I(U; X_sub) in bits from a joint (u_size, |X|) mass array."""
    qa = q @ s_sub.T
    pu = q.sum(axis=1)
    pa = qa.sum(axis=0)
    nz = qa > 0
    ratio = qa[nz] / (np.outer(pu, pa)[nz])
    return float(np.sum(qa[nz] * np.log2(np.maximum(ratio, _MASS_FLOOR))))


def _objective_a(q: np.ndarray, s_jc: list) -> float:
    return min(_mi_terms(q, s) for s in s_jc)


def _margin_a(q: np.ndarray, s_jc: list, s_j: list) -> float:
    return _objective_a(q, s_jc) - max(_mi_terms(q, s) for s in s_j)


def _mi_gradient(q: np.ndarray, s_sub: np.ndarray) -> np.ndarray:
    """d I(U;X_sub) / d q[u, x] up to an additive constant."""
    qa = np.maximum(q @ s_sub.T, _MASS_FLOOR)
    pu = np.maximum(q.sum(axis=1), _MASS_FLOOR)
    pa = np.maximum(qa.sum(axis=0), _MASS_FLOOR)
    log_ratio = np.log2(qa) - np.log2(pu)[:, None] - np.log2(pa)[None, :]
    return log_ratio @ s_sub


def _objective_a_supergradient(q: np.ndarray, s_jc: list) -> np.ndarray:
    vals = np.array([_mi_terms(q, s) for s in s_jc])
    active = np.where(vals <= vals.min() + 1e-9)[0]
    g = np.zeros_like(q)
    for idx in active:
        g += _mi_gradient(q, s_jc[idx])
    return g / active.size


def _split_joint(q: np.ndarray):
    pu = q.sum(axis=1)
    kern = np.where(pu[:, None] > 0, q / np.maximum(pu[:, None], _MASS_FLOOR),
                    1.0 / q.shape[1])
    return pu, kern


def _block_ascent_a(q0, s_jc, s_j, model, cfg: SolverConfig):
    """Alternating p_u / kernel projected-gradient ascent from one start.

    Steps are accepted only if the min-MI objective improves and the strict
    feasibility margin stays above delta_feas; the start itself is the floor.
    """
    u_size = q0.shape[0]
    dim_x = q0.shape[1]
    m_marg, b_marg = _marginal_system(model)

    def pu_polytope(kern):
        # Constraints on p_u for fixed kernel: marginal match plus sum-to-one.
        m = m_marg @ kern.T  # includes the all-ones row via the kernel row sums
        return _Polytope(m, b_marg)

    def kernel_polytope(pu):
        # Constraints on vec(kern): marginal match rows plus per-row sums.
        rows = [np.kron(pu[None, :], row_m) for row_m in m_marg[1:]]
        marg = np.vstack(rows).reshape(-1, u_size * dim_x) if rows else \
            np.zeros((0, u_size * dim_x))
        row_sum = np.kron(np.eye(u_size), np.ones((1, dim_x)))
        m = np.vstack([marg, row_sum])
        b = np.concatenate([b_marg[1:], np.ones(u_size)])
        return _Polytope(m, b)

    q = q0.copy()
    f = _objective_a(q, s_jc)
    best_q, best_f = q.copy(), f
    stall = 0
    for _ in range(cfg.alt_rounds):
        round_start = best_f
        pu, kern = _split_joint(q)
        # Block 1: update the auxiliary prior.
        poly = pu_polytope(kern)
        for _ in range(cfg.alt_block_steps):
            g_q = _objective_a_supergradient(q, s_jc)
            g = (kern * g_q).sum(axis=1)
            norm = np.linalg.norm(g)
            if norm == 0:
                break
            g /= norm
            step, moved = cfg.initial_step, False
            while step > 1e-10:
                cand_pu = poly.project(pu + step * g, cfg.projection_iterations)
                cand_q = cand_pu[:, None] * kern
                fc = _objective_a(cand_q, s_jc)
                if fc > best_f and _margin_a(cand_q, s_jc, s_j) > cfg.delta_feas:
                    pu, q, best_f = cand_pu, cand_q, fc
                    best_q = q.copy()
                    moved = True
                    break
                step *= 0.5
            if not moved:
                break
        # Block 2: update the kernel.
        pu, kern = _split_joint(q)
        poly = kernel_polytope(pu)
        for _ in range(cfg.alt_block_steps):
            g_q = _objective_a_supergradient(q, s_jc)
            g = (pu[:, None] * g_q).reshape(-1)
            norm = np.linalg.norm(g)
            if norm == 0:
                break
            g /= norm
            step, moved = cfg.initial_step, False
            while step > 1e-10:
                cand_k = poly.project(kern.reshape(-1) + step * g,
                                      cfg.projection_iterations).reshape(u_size, dim_x)
                cand_q = pu[:, None] * cand_k
                fc = _objective_a(cand_q, s_jc)
                if fc > best_f and _margin_a(cand_q, s_jc, s_j) > cfg.delta_feas:
                    kern, q, best_f = cand_k, cand_q, fc
                    best_q = q.copy()
                    moved = True
                    break
                step *= 0.5
            if not moved:
                break
        if best_f - round_start < cfg.improvement_tol:
            stall += 1
            if stall >= cfg.patience:
                break
        else:
            stall = 0
    return best_q, best_f


def solve_a(
    model: NetworkModel,
    u_size: Optional[int] = None,
    cfg: Optional[SolverConfig] = None,
) -> SolutionA:
    """Best-effort max-min I(U; unjammed links); certified-feasible lower bound."""
    cfg = cfg or SolverConfig()
    fam = model.jam_family()
    dim_x = model.product_alphabet_size
    bound = cardinality_bound(dim_x, len(fam))
    if u_size is None:
        u_size = bound
    if u_size < 1:
        raise ValueError("u_size must be >= 1")

    sizes = model.link_alphabet_sizes
    s_jc, s_j = [], []
    for j in fam:
        jc = [i for i in range(model.link_count) if i not in j]
        s_jc.append(indexing.restriction_matrix(sizes, jc))
        s_j.append(indexing.restriction_matrix(sizes, j))

    sol_b = solve_b(model, cfg)
    info = {"u_size": u_size, "cardinality_bound": bound,
            "method": "alternating-ascent", "seed": cfg.seed}
    if not sol_b.feasible:
        return SolutionA(feasible=False, reason=sol_b.reason, info=info)

    starts = []
    if u_size >= dim_x:
        # Embed U = X at the entropy-bound optimum: guarantees value >= entropy bound.
        q = np.zeros((u_size, dim_x))
        q[np.arange(dim_x), np.arange(dim_x)] = sol_b.p_x.mass
        starts.append(q)
    rng = generator(cfg.seed, "solve-a-starts")
    n_random = max(cfg.restarts - len(starts), 0)
    m_marg, b_marg = _marginal_system(model)
    # Joint-space polytope: q >= 0, sum 1, X-marginal in the entropy-bound polytope.
    m_joint = np.vstack([np.kron(np.ones((1, u_size)), row[None, :]) for row in m_marg])
    m_joint = m_joint.reshape(m_marg.shape[0], u_size * dim_x)
    poly_joint = _Polytope(m_joint, b_marg)
    for _ in range(n_random):
        raw = rng.dirichlet(np.ones(u_size * dim_x))
        starts.append(poly_joint.project(raw, cfg.projection_iterations).reshape(u_size, dim_x))

    best_q, best_f = None, -np.inf
    for q0 in starts:
        if q0.sum() <= 0:
            continue
        q0 = np.maximum(q0, 0.0)
        q0 /= q0.sum()
        if _margin_a(q0, s_jc, s_j) <= cfg.delta_feas:
            # Only random starts can land here; the embedded start inherits the
            # entropy-bound margin, which is already above delta_feas.
            continue
        q, f = _block_ascent_a(q0, s_jc, s_j, model, cfg)
        if f > best_f + 1e-12:
            best_q, best_f = q, f
        elif abs(f - best_f) <= 1e-12 and best_q is not None:
            if tuple(np.round(q.reshape(-1), 12)) < tuple(np.round(best_q.reshape(-1), 12)):
                best_q = q

    if best_q is None:
        return SolutionA(feasible=False, reason="no feasible start with positive margin",
                         info=info)

    # Exact cleanup of the marginal constraints.
    polished = poly_joint.affine_project(best_q.reshape(-1))
    if np.min(polished) >= -1e-9:
        polished = np.maximum(polished, 0.0).reshape(u_size, dim_x)
        polished /= polished.sum()
        f_pol = _objective_a(polished, s_jc)
        if f_pol >= best_f - 1e-9 and _margin_a(polished, s_jc, s_j) > cfg.delta_feas:
            best_q, best_f = polished, f_pol

    gaps = np.abs(m_joint @ best_q.reshape(-1) - b_marg)
    if float(gaps.max()) > cfg.tol_marg:
        return SolutionA(feasible=False,
                         reason=f"marginal residual {gaps.max():.2e} above tol_marg",
                         info=info)
    margin = _margin_a(best_q, s_jc, s_j)
    pu, kern = _split_joint(best_q)
    return SolutionA(
        feasible=True,
        p_u=Distribution(u_size, pu),
        kernel=ConditionalKernel(u_size, dim_x, kern),
        value=best_f,
        feasibility_margin=margin,
        info=info,
    )


def achievable_rate(
    model: NetworkModel,
    scheme: str,
    eps: float,
    cfg: Optional[SolverConfig] = None,
    u_size: Optional[int] = None,
) -> AchievableRate:
    """Bound minus epsilon for the requested jamming model, clamped at zero."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if scheme == "erasure":
        sol = solve_a(model, u_size=u_size, cfg=cfg)
    elif scheme == "overwrite":
        sol = solve_b(model, cfg=cfg)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if not sol.feasible:
        return AchievableRate(bits=0.0, feasible=False, clamped=True, reason=sol.reason)
    rate = sol.value - eps
    if rate <= 0:
        return AchievableRate(bits=0.0, feasible=True, clamped=True,
                              reason="bound minus epsilon is non-positive")
    return AchievableRate(bits=rate, feasible=True)
