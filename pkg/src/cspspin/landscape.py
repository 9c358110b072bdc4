"""Overlaps, exhaustive free energies, Monte Carlo samplers, debiasing and correlation curves.

Every Hamiltonian is handled through its multilinear expansion
``H(sigma) = c_0 + sum_S c_S prod_{i in S} sigma_i``. Exhaustive energies over
all 2^n states are then one Walsh-Hadamard transform of the coefficient
vector, and Metropolis moves only touch the terms containing the flipped spin.

State ``s`` (an integer) encodes sigma_i = +1 if bit i of s is 0, else -1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .ensembles import (
    CspInstance,
    CspModel,
    ResourceError,
    SpinGlassInstance,
    SpinGlassSum,
    make_rng,
    t_correlated_pair,
)
from .predicates import fwht, walsh_transform

ENUMERATION_BITS = 24
MAX_TUPLE = 12
_CHUNK = 1 << 20


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit integer seed for the substream ``key``; used where an API takes a plain seed."""
    words = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)).generate_state(2)
    return int((int(words[0]) << 31) ^ int(words[1]))


# -- overlaps -------------------------------------------------------------------------------


def _as_spins(sigma) -> np.ndarray:
    return np.asarray(sigma, dtype=np.int64)


def overlap(sigma1, sigma2) -> float:
    a, b = _as_spins(sigma1), _as_spins(sigma2)
    if a.shape != b.shape:
        raise ValueError(f"assignments have different lengths {a.shape} and {b.shape}")
    return float(a @ b) / len(a)


@dataclass(frozen=True)
class OverlapVector:
    ell: int
    entries: Mapping[frozenset, float]

    def __getitem__(self, subset: Iterable[int]) -> float:
        return self.entries[frozenset(subset)]


def nonempty_subsets(ell: int) -> list[frozenset]:
    return [frozenset(c) for r in range(1, ell + 1) for c in itertools.combinations(range(ell), r)]


def overlap_vector(assignments: Sequence) -> OverlapVector:
    """I-overlaps (1/n) sum_j prod_{i in I} sigma_i(j) for every nonempty I (0-based slots)."""
    sig = np.asarray([_as_spins(s) for s in assignments]) if len(assignments) else np.zeros((0, 0))
    ell = len(sig)
    if ell == 0:
        raise ValueError("need at least one assignment")
    if ell > MAX_TUPLE:
        raise ResourceError(f"overlap vectors are limited to {MAX_TUPLE} assignments, got {ell}")
    entries = {I: float(np.prod(sig[sorted(I)], axis=0).mean()) for I in nonempty_subsets(ell)}
    return OverlapVector(ell, entries)


@dataclass(frozen=True)
class OverlapRegion:
    """Open boxes on selected I-overlaps; unconstrained subsets are free.

    Intervals are open subsets of the real line intersected with [-1, 1], so an
    interval such as (0.5, 1.5) admits the overlap 1.
    """

    ell: int
    constraints: Mapping[frozenset, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for I, (lo, hi) in dict(self.constraints).items():
            I = frozenset(I)
            if not I or max(I) >= self.ell or min(I) < 0:
                raise ValueError(f"subset {sorted(I)} is not a nonempty subset of the {self.ell} slots")
            if not (lo < hi) or hi <= -1.0 or lo >= 1.0:
                raise ValueError(f"interval ({lo}, {hi}) for {sorted(I)} misses [-1, 1]")
            clean[I] = (float(lo), float(hi))
        object.__setattr__(self, "constraints", clean)

    @classmethod
    def full(cls, ell: int) -> "OverlapRegion":
        return cls(ell, {})

    @classmethod
    def pairwise(cls, lo: float, hi: float) -> "OverlapRegion":
        """Pairs (sigma_1, sigma_2) with overlap strictly between lo and hi."""
        return cls(2, {frozenset({0, 1}): (lo, hi)})

    @classmethod
    def branching(cls, branching: Sequence[int], q: Sequence[float], eta: float) -> "OverlapRegion":
        """Leaf tuples of a tree with |R(u, v) - q[depth(lca(u, v))]| < eta for every leaf pair.

        ``q`` lists q_0 .. q_D; leaves are ordered lexicographically by path.
        """
        leaves = [tuple(u) for u in np.ndindex(*tuple(branching))]
        if len(q) != len(branching) + 1:
            raise ValueError("q needs one value per depth 0..D")
        cons = {}
        for a, b in itertools.combinations(range(len(leaves)), 2):
            depth = next((d for d in range(len(branching)) if leaves[a][d] != leaves[b][d]), len(branching))
            target = q[depth]
            cons[frozenset({a, b})] = (target - eta, target + eta)
        return cls(len(leaves), cons)

    def contains(self, vector: OverlapVector) -> bool:
        return all(lo < vector[I] < hi for I, (lo, hi) in self.constraints.items())


# -- polynomial form of a Hamiltonian -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Multilinear polynomial over n spins; term t has coefficient ``coef[t]``."""

    n: int
    constant: float
    coef: np.ndarray
    term_ptr: np.ndarray
    term_vars: np.ndarray
    var_ptr: np.ndarray
    var_terms: np.ndarray

    @classmethod
    def from_terms(cls, n: int, terms: Mapping, constant: float = 0.0) -> "Polynomial":
        """``terms`` maps a frozenset or bitmask of variables to its coefficient."""
        items = []
        for key, c in terms.items():
            vars_ = sorted(key) if isinstance(key, (frozenset, set, tuple)) else _bits(int(key))
            if not vars_:
                constant += c
            elif c != 0.0:
                items.append((tuple(vars_), float(c)))
        items.sort()
        coef = np.array([c for _, c in items], dtype=float)
        lengths = np.array([len(v) for v, _ in items], dtype=np.int64)
        term_ptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        term_vars = np.array([i for v, _ in items for i in v], dtype=np.int64)
        term_of = np.repeat(np.arange(len(items)), lengths)
        order = np.argsort(term_vars, kind="stable")
        var_terms = term_of[order].astype(np.int64)
        counts = np.bincount(term_vars, minlength=n)
        var_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return cls(n, float(constant), coef, term_ptr, term_vars, var_ptr, var_terms)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if self.n != other.n:
            raise ValueError("cannot add polynomials on different numbers of spins")
        terms: dict = {}
        for poly in (self, other):
            for vars_, c in poly.terms():
                terms[vars_] = terms.get(vars_, 0.0) + c
        return Polynomial.from_terms(self.n, terms, self.constant + other.constant)

    def terms(self) -> Iterable[tuple[frozenset, float]]:
        for t, c in enumerate(self.coef):
            yield frozenset(self.term_vars[self.term_ptr[t] : self.term_ptr[t + 1]].tolist()), float(c)

    def energy(self, sigma) -> float:
        s = np.asarray(sigma, dtype=np.int64)
        return self.constant + float(_kernels.polynomial_energy(s, self.coef, self.term_ptr, self.term_vars))

    def energy_table(self) -> np.ndarray:
        """Energies of all 2^n states, indexed by the state bitmask."""
        if self.n > ENUMERATION_BITS:
            raise ResourceError(f"exhaustive enumeration is limited to n <= {ENUMERATION_BITS}, got {self.n}")
        c = np.zeros(1 << self.n)
        masks = np.zeros(len(self.coef), dtype=np.int64)
        lengths = np.diff(self.term_ptr)
        np.bitwise_or.at(masks, np.repeat(np.arange(len(self.coef)), lengths), 1 << self.term_vars)
        np.add.at(c, masks, self.coef)
        c[0] += self.constant
        return fwht(c)

    @property
    def energy_unit(self) -> float:
        """Median coefficient magnitude; the annealer measures inverse temperatures in these units."""
        return float(np.median(np.abs(self.coef))) if len(self.coef) else 1.0


def _bits(mask: int) -> list[int]:
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def csp_polynomial(inst: CspInstance) -> Polynomial:
    spectra = [walsh_transform(p).coefficients for p in inst.model.dist.predicates]
    k = inst.model.k
    terms: dict = {}
    constant = 0.0
    for p, idx, signs in zip(inst.predicate_index.tolist(), inst.indices.tolist(), inst.signs.tolist()):
        coeffs = spectra[p]
        for S in range(1 << k):
            c = coeffs[S]
            if c == 0.0:
                continue
            mask = 0
            for j in range(k):
                if S >> (k - 1 - j) & 1:
                    c *= signs[j]
                    mask ^= 1 << idx[j]
            if mask == 0:
                constant += c
            else:
                terms[mask] = terms.get(mask, 0.0) + c
    scale = 1.0 / inst.alpha
    return Polynomial.from_terms(inst.n, {m: c * scale for m, c in terms.items()}, constant * scale)


def spin_glass_polynomial(g: SpinGlassInstance | SpinGlassSum) -> Polynomial:
    if isinstance(g, SpinGlassSum):
        polys = [spin_glass_polynomial(p) for p in g.parts]
        out = polys[0]
        for p in polys[1:]:
            out = out + p
        return out
    n = g.n
    if n > 63:
        raise ResourceError("spin-glass polynomial expansion supports n <= 63")
    bit = (np.uint64(1) << np.arange(n, dtype=np.uint64))
    masks_all, coef_all = [], []
    for p, J in g.disorder.items():
        c = math.sqrt(g.xi.coefficients[p - 1]) * n ** (-(p - 1) / 2) * g.scale
        mask = np.zeros((n,) * p, dtype=np.uint64)
        for axis in range(p):
            shape = [1] * p
            shape[axis] = n
            mask = mask ^ bit.reshape(shape)
        masks_all.append(mask.ravel())
        coef_all.append(c * J.ravel())
    masks = np.concatenate(masks_all)
    coefs = np.concatenate(coef_all)
    uniq, inv = np.unique(masks, return_inverse=True)
    summed = np.bincount(inv, weights=coefs)
    terms = {int(m): float(c) for m, c in zip(uniq, summed)}
    constant = terms.pop(0, 0.0)
    return Polynomial.from_terms(n, terms, constant)


def polynomial_of(instance) -> Polynomial:
    if isinstance(instance, Polynomial):
        return instance
    if isinstance(instance, CspInstance):
        return csp_polynomial(instance)
    if isinstance(instance, (SpinGlassInstance, SpinGlassSum)):
        return spin_glass_polynomial(instance)
    raise TypeError(f"no energy oracle for {type(instance).__name__}")


@dataclass(frozen=True, eq=False)
class EnergyOracle:
    """Grand Hamiltonian sum_a H_a(sigma_a) over ``ell`` assignment slots."""

    slots: tuple[Polynomial, ...]

    @classmethod
    def of(cls, *instances) -> "EnergyOracle":
        polys = tuple(polynomial_of(i) for i in instances)
        if len({p.n for p in polys}) != 1:
            raise ValueError("all slots must share the same n")
        return cls(polys)

    @property
    def n(self) -> int:
        return self.slots[0].n

    @property
    def ell(self) -> int:
        return len(self.slots)

    def energy(self, assignments) -> float:
        sig = np.atleast_2d(np.asarray(assignments, dtype=np.int64))
        if sig.shape != (self.ell, self.n):
            raise ValueError(f"expected assignments of shape {(self.ell, self.n)}, got {sig.shape}")
        return sum(p.energy(s) for p, s in zip(self.slots, sig))


def zero_oracle(n: int, ell: int = 1) -> EnergyOracle:
    return EnergyOracle(tuple(Polynomial.from_terms(n, {}) for _ in range(ell)))


def states_to_spins(states, n: int) -> np.ndarray:
    s = np.asarray(states, dtype=np.int64)
    return 1 - 2 * ((s[..., None] >> np.arange(n)) & 1)


def spins_to_state(sigma) -> int:
    s = np.asarray(sigma)
    return int(((s == -1).astype(np.int64) << np.arange(len(s))).sum())


# -- exhaustive enumeration -----------------------------------------------------------------


def _check_enumerable(oracle: EnergyOracle, region: OverlapRegion | None):
    if oracle.ell * oracle.n > ENUMERATION_BITS:
        raise ResourceError(
            f"exhaustive enumeration needs ell * n <= {ENUMERATION_BITS}, got {oracle.ell} * {oracle.n}"
        )
    if region is not None and region.ell != oracle.ell:
        raise ValueError(f"region is for {region.ell} slots, oracle has {oracle.ell}")


def _enumerate(oracle: EnergyOracle, region: OverlapRegion | None = None, need_slots: bool = False):
    """Yield (flat state indices, slot states (ell, c), grand energies, slot energies) chunk by chunk."""
    _check_enumerable(oracle, region)
    n, ell = oracle.n, oracle.ell
    tables = [p.energy_table() for p in oracle.slots]
    total = 1 << (n * ell)
    low = (1 << n) - 1
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        states = np.stack([(flat >> (a * n)) & low for a in range(ell)])
        slot_e = np.stack([tables[a][states[a]] for a in range(ell)])
        keep = np.ones(len(flat), dtype=bool)
        if region is not None:
            for I, (lo, hi) in region.constraints.items():
                x = np.zeros(len(flat), dtype=np.int64)
                for a in I:
                    x ^= states[a]
                r = 1.0 - 2.0 * np.bitwise_count(x) / n
                keep &= (r > lo) & (r < hi)
        if not keep.all():
            flat, states, slot_e = flat[keep], states[:, keep], slot_e[:, keep]
        yield flat, states, slot_e.sum(axis=0), slot_e


@dataclass(frozen=True)
class GibbsConfig:
    beta: float
    sweeps: int = 50
    seed: int = 0

    def __post_init__(self):
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be a finite nonnegative number, got {self.beta}")
        if self.sweeps < 0:
            raise ValueError("sweeps must be nonnegative")


def restricted_log_partition(
    oracle: EnergyOracle, config: GibbsConfig | float, region: OverlapRegion | None = None
) -> float:
    """log sum over tuples in the region of exp(beta * grand energy); -inf if the region is empty."""
    beta = config.beta if isinstance(config, GibbsConfig) else float(config)
    parts = [logsumexp(beta * e) for _, _, e, _ in _enumerate(oracle, region) if len(e)]
    return float(logsumexp(parts)) if parts else -math.inf


def free_energy_density(oracle: EnergyOracle, beta: float, region: OverlapRegion | None = None) -> float:
    """(1 / (beta ell n)) log Z."""
    return restricted_log_partition(oracle, beta, region) / (beta * oracle.ell * oracle.n)


@dataclass
class MaxCertificate:
    """Exact maximizer of the grand energy (``assignments`` is None for an empty region)."""

    assignments: np.ndarray | None
    value: float
    n: int
    ell: int

    @property
    def density(self) -> float:
        return self.value / (self.ell * self.n)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "density": self.density,
            "n": self.n,
            "ell": self.ell,
            "assignments": None if self.assignments is None else self.assignments.tolist(),
            "empty": self.assignments is None,
        }


def brute_force_max(oracle: EnergyOracle, region: OverlapRegion | None = None) -> MaxCertificate:
    best_value, best_states = -math.inf, None
    for _, states, e, _ in _enumerate(oracle, region):
        if not len(e):
            continue
        i = int(np.argmax(e))
        if e[i] > best_value:
            best_value, best_states = float(e[i]), states[:, i].copy()
    if best_states is None:
        return MaxCertificate(None, -math.inf, oracle.n, oracle.ell)
    return MaxCertificate(states_to_spins(best_states, oracle.n), best_value, oracle.n, oracle.ell)


def ogp_scan(
    oracle: EnergyOracle,
    thresholds: Sequence[float],
    bins: int | None = None,
    mode: str = "average",
) -> list[dict]:
    """Histogram pairwise overlaps of all tuples above each energy-density threshold.

    ``mode='average'`` thresholds the grand energy / (ell n); ``'plain'``
    requires every slot to clear the threshold on its own. With ``bins=None``
    each attainable overlap value (-1 + 2j/n) is its own bin.
    """
    if mode not in ("average", "plain"):
        raise ValueError(f"mode must be 'average' or 'plain', got {mode!r}")
    if oracle.ell < 2:
        raise ValueError("an overlap scan needs at least two slots")
    n, ell = oracle.n, oracle.ell
    if bins is None:
        centers = -1.0 + 2.0 * np.arange(n + 1) / n
    else:
        edges = np.linspace(-1.0, 1.0, bins + 1)
        centers = 0.5 * (edges[1:] + edges[:-1])
    counts = np.zeros((len(thresholds), len(centers)), dtype=np.int64)
    thr = np.asarray(thresholds, dtype=float)
    pairs = list(itertools.combinations(range(ell), 2))
    for _, states, e, slot_e in _enumerate(oracle):
        if mode == "average":
            score = e / (ell * n)
        else:
            score = slot_e.min(axis=0) / n
        for a, b in pairs:
            pc = np.bitwise_count(states[a] ^ states[b])
            if bins is None:
                idx = n - 2 * pc.astype(np.int64)
                idx = (idx + n) // 2
            else:
                r = 1.0 - 2.0 * pc / n
                idx = np.minimum(((r + 1.0) / 2.0 * bins).astype(np.int64), bins - 1)
            for ti, v in enumerate(thr):
                sel = score >= v
                counts[ti] += np.bincount(idx[sel], minlength=len(centers))
    rows = []
    for ti, v in enumerate(thr):
        for ci, c in enumerate(centers):
            rows.append({"threshold": float(v), "overlap": float(c), "count": int(counts[ti, ci])})
    return rows


# -- Monte Carlo ----------------------------------------------------------------------------


_CHAIN_BLOCK = 1024


def _run_chains(poly: Polynomial, betas: np.ndarray, chains: int, seed: int, key: tuple):
    """Final states, best states seen and their energies for independent chains."""
    n = poly.n
    final = np.empty((chains, n), dtype=np.int64)
    best = np.empty((chains, n), dtype=np.int64)
    best_e = np.empty(chains)
    for b0 in range(0, chains, _CHAIN_BLOCK):
        c = min(_CHAIN_BLOCK, chains - b0)
        rng = make_rng(seed, *key, b0 // _CHAIN_BLOCK)
        states = 1 - 2 * rng.integers(0, 2, size=(c, n), dtype=np.int64)
        uniforms = rng.random((c, len(betas), n))
        b, e = _kernels.metropolis_chains(
            states, betas, uniforms, poly.coef, poly.term_ptr, poly.term_vars, poly.var_ptr, poly.var_terms
        )
        final[b0 : b0 + c] = states  # updated in place by the kernel
        best[b0 : b0 + c] = b
        best_e[b0 : b0 + c] = e + poly.constant
    return final, best, best_e


def gibbs_samples(oracle: EnergyOracle | object, config: GibbsConfig, count: int) -> np.ndarray:
    """Final states of ``count`` independent Metropolis chains started uniformly at random."""
    poly = _single_polynomial(oracle)
    betas = np.full(config.sweeps, float(config.beta))
    return _run_chains(poly, betas, count, config.seed, (0,))[0]


def gibbs_sample(oracle, config: GibbsConfig) -> np.ndarray:
    """Single-site Metropolis, ``sweeps`` sequential passes from a uniform random start."""
    return gibbs_samples(oracle, config, 1)[0]


def _single_polynomial(oracle) -> Polynomial:
    if isinstance(oracle, EnergyOracle):
        if oracle.ell != 1:
            raise ValueError("samplers act on a single slot")
        return oracle.slots[0]
    return polynomial_of(oracle)


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric inverse-temperature ramp in units of the median coupling magnitude."""

    beta_start: float = 0.2
    beta_end: float = 6.0
    sweeps: int = 200
    restarts: int = 1

    def betas(self, unit: float) -> np.ndarray:
        return np.geomspace(self.beta_start, self.beta_end, self.sweeps) / unit


def anneal_max(oracle, schedule: AnnealSchedule | None = None, seed: int = 0) -> np.ndarray:
    """Best state seen over ``restarts`` annealing runs; deterministic given ``seed``."""
    schedule = schedule or AnnealSchedule()
    poly = _single_polynomial(oracle)
    if not len(poly.coef):
        return np.ones(poly.n, dtype=np.int64)
    _, best, energies = _run_chains(poly, schedule.betas(poly.energy_unit), schedule.restarts, seed, (1,))
    return best[int(np.argmax(energies))]


Algorithm = Callable[[CspInstance], np.ndarray]


def annealer(schedule: AnnealSchedule | None = None, seed: int = 0) -> Algorithm:
    def run(inst: CspInstance) -> np.ndarray:
        return anneal_max(csp_polynomial(inst), schedule, seed)

    return run


def debias_size(n: int) -> int:
    return math.ceil(n / math.log(n)) if n > 1 else 1


def debias(algorithm: Algorithm, inst: CspInstance) -> np.ndarray:
    """Run ``algorithm`` on sign-scrambled clauses and unscramble its output.

    The first ceil(n / log n) clauses are spent: their first-literal signs,
    repeated cyclically to length n, give a sign vector C. Variable i's
    literal signs in the remaining clauses are multiplied by C_i, and the
    output C * sigma' has mean zero in every coordinate over random instances.
    """
    n = inst.n
    used = debias_size(n)
    if inst.num_clauses < used:
        raise ValueError(f"debiasing needs at least {used} clauses, instance has {inst.num_clauses}")
    first = inst.signs[:used, 0].astype(np.int64)
    C = first[np.arange(n) % used]
    rest = inst.subset(slice(used, None))
    scrambled = rest.with_signs((rest.signs * C[rest.indices]).astype(np.int8))
    return C * np.asarray(algorithm(scrambled), dtype=np.int64)


def debiased(algorithm: Algorithm) -> Algorithm:
    return lambda inst: debias(algorithm, inst)


@dataclass
class CorrelationCurve:
    t: np.ndarray
    estimates: np.ndarray
    stderr: np.ndarray
    reps: int

    def rows(self) -> list[dict]:
        return [
            {"t": float(t), "estimate": float(e), "stderr": float(s)}
            for t, e, s in zip(self.t, self.estimates, self.stderr)
        ]


def chi_curve(
    model: CspModel,
    algorithm_for_seed: Callable[[int], Algorithm],
    t_grid: Sequence[float],
    reps: int,
    seed: int,
    debias_outputs: bool = True,
) -> CorrelationCurve:
    """Mean output overlap on t-correlated pairs.

    Replicate r uses one algorithm seed for both members of the pair and for
    every t, so a deterministic algorithm gives overlap 1 at t = 1.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    est = np.empty(len(t_grid))
    se = np.empty(len(t_grid))
    for ti, t in enumerate(t_grid):
        vals = np.empty(reps)
        for r in range(reps):
            alg = algorithm_for_seed(derive_seed(seed, 1, r))
            if debias_outputs:
                alg = debiased(alg)
            first, second = t_correlated_pair(model, float(t), derive_seed(seed, 0, ti, r))
            vals[r] = overlap(alg(first), alg(second))
        est[ti] = vals.mean()
        se[ti] = vals.std(ddof=1) / math.sqrt(reps) if reps > 1 else float("nan")
    return CorrelationCurve(t_grid, est, se, reps)
