"""Random CSP and mixed spin-glass ensembles, including coupled constructions.

Randomness is keyed: every hidden instance draws from its own Philox stream
``(seed, *key)``, so the order in which instances are sampled never matters.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .predicates import (
    MixturePolynomial,
    Predicate,
    PredicateDistribution,
    as_distribution,
    mixture,
)

DEFAULT_ENTRY_BUDGET = 1 << 25  # float64 disorder entries across all degrees (~256 MB)
MODES = ("exact", "poisson")


class ResourceError(RuntimeError):
    """A requested object would exceed the desk-scale memory or enumeration budget."""


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream labelled ``key`` under ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


@dataclass(frozen=True)
class CspModel:
    dist: PredicateDistribution
    alpha: float
    n: int
    mode: str = "poisson"

    def __post_init__(self):
        object.__setattr__(self, "dist", as_distribution(self.dist))
        if not self.alpha > 0:
            raise ValueError(f"clause density must be positive, got {self.alpha}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "exact" and self.alpha * self.n < 1:
            raise ValueError("exact mode needs alpha * n >= 1")

    @property
    def k(self) -> int:
        return self.dist.k

    def with_mode(self, mode: str) -> "CspModel":
        return CspModel(self.dist, self.alpha, self.n, mode)

    def to_json(self) -> dict:
        return {
            "predicates": [p.to_json() for p in self.dist.predicates],
            "weights": self.dist.weights.tolist(),
            "alpha": self.alpha,
            "n": self.n,
            "mode": self.mode,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CspModel":
        preds = [Predicate(p["k"], tuple(p["table"]), p.get("name")) for p in d["predicates"]]
        dist = PredicateDistribution(tuple(zip(preds, d["weights"])))
        return cls(dist, d["alpha"], d["n"], d["mode"])


@dataclass(frozen=True)
class Clause:
    predicate_index: int
    indices: tuple[int, ...]
    signs: tuple[int, ...]
    multiplicity: int = 1


@dataclass(frozen=True, eq=False)
class CspInstance:
    """Clauses in struct-of-arrays form, sorted by their i.i.d. uniform order keys.

    ``alpha`` is the normalization used by the energy (the model density, also
    for unions of hidden instances whose own densities are fractions of it).
    """

    model: CspModel
    predicate_index: np.ndarray  # (m,)
    indices: np.ndarray  # (m, k) 0-based variable indices
    signs: np.ndarray  # (m, k) in {+1, -1}
    keys: np.ndarray  # (m,) order keys in [0, 1)
    seed_record: tuple = ()

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def alpha(self) -> float:
        return self.model.alpha

    @property
    def num_clauses(self) -> int:
        return len(self.keys)

    def clauses(self) -> list[Clause]:
        return [
            Clause(int(p), tuple(int(i) for i in idx), tuple(int(s) for s in sg))
            for p, idx, sg in zip(self.predicate_index, self.indices, self.signs)
        ]

    def multiplicities(self) -> Counter:
        """Count of every (predicate, indices, signs) constraint present."""
        return Counter(
            (int(p), tuple(idx.tolist()), tuple(sg.tolist()))
            for p, idx, sg in zip(self.predicate_index, self.indices, self.signs)
        )

    def subset(self, rows) -> "CspInstance":
        return CspInstance(
            self.model,
            self.predicate_index[rows],
            self.indices[rows],
            self.signs[rows],
            self.keys[rows],
            self.seed_record,
        )

    def with_signs(self, signs: np.ndarray) -> "CspInstance":
        return CspInstance(self.model, self.predicate_index, self.indices, signs, self.keys, self.seed_record)

    def to_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "seed_record": list(self.seed_record),
            "clauses": [
                {"predicate": int(p), "indices": idx.tolist(), "signs": sg.tolist(), "key": float(key)}
                for p, idx, sg, key in zip(self.predicate_index, self.indices, self.signs, self.keys)
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "CspInstance":
        model = CspModel.from_json(d["model"])
        cl = d["clauses"]
        k = model.k
        return cls(
            model,
            np.array([c["predicate"] for c in cl], dtype=np.int64),
            np.array([c["indices"] for c in cl], dtype=np.int64).reshape(-1, k),
            np.array([c["signs"] for c in cl], dtype=np.int8).reshape(-1, k),
            np.array([c["key"] for c in cl], dtype=float),
            tuple(d.get("seed_record", ())),
        )


def _draw_clauses(model: CspModel, count: int, seed: int, key: tuple):
    # one stream per field, so the first clauses do not depend on the count
    k = model.k
    weights = model.dist.weights
    if len(weights) == 1:
        pred = np.zeros(count, dtype=np.int64)
    else:
        pred = make_rng(seed, *key, 4).choice(len(weights), size=count, p=weights)
    idx = make_rng(seed, *key, 1).integers(0, model.n, size=(count, k))
    signs = (1 - 2 * make_rng(seed, *key, 2).integers(0, 2, size=(count, k))).astype(np.int8)
    keys = make_rng(seed, *key, 3).random(count)
    return pred, idx, signs, keys


def _assemble(model: CspModel, parts, seed_record) -> CspInstance:
    k = model.k
    if parts:
        pred = np.concatenate([p[0] for p in parts])
        idx = np.concatenate([p[1] for p in parts]).reshape(-1, k)
        signs = np.concatenate([p[2] for p in parts]).reshape(-1, k)
        keys = np.concatenate([p[3] for p in parts])
    else:
        pred, idx = np.zeros(0, np.int64), np.zeros((0, k), np.int64)
        signs, keys = np.zeros((0, k), np.int8), np.zeros(0)
    order = np.argsort(keys, kind="stable")
    return CspInstance(model, pred[order], idx[order], signs[order], keys[order], seed_record)


def _sample_block(model: CspModel, mean_count: float, seed: int, key: tuple) -> tuple:
    # separate streams for the count and the clauses: exact and poisson instances
    # with equal seeds share their leading clauses
    if model.mode == "exact":
        count = int(round(mean_count))
    else:
        count = int(make_rng(seed, *key, 0).poisson(mean_count))
    return _draw_clauses(model, count, seed, key)


def sample_csp(model: CspModel, seed: int, key: Sequence[int] = ()) -> CspInstance:
    """Exact mode draws round(alpha n) clauses, poisson mode Pois(alpha n)."""
    block = _sample_block(model, model.alpha * model.n, seed, tuple(key))
    return _assemble(model, [block], (int(seed), *key))


def _literal_index(inst: CspInstance, sigma: np.ndarray) -> np.ndarray:
    """Truth-table row of every clause for a batch of assignments, shape (B, m)."""
    lit = inst.signs[None, :, :] * sigma[:, inst.indices]  # (B, m, k)
    bits = (1 - lit) // 2
    weights = 1 << np.arange(inst.model.k - 1, -1, -1)
    return bits @ weights


def _check_assignments(sigma, n: int) -> tuple[np.ndarray, bool]:
    sigma = np.asarray(sigma)
    single = sigma.ndim == 1
    sigma = np.atleast_2d(sigma).astype(np.int64)
    if sigma.shape[-1] != n:
        raise ValueError(f"assignment has length {sigma.shape[-1]}, instance has n = {n}")
    if not np.all(np.abs(sigma) == 1):
        raise ValueError("assignments must be +1/-1 vectors")
    return sigma, single


def csp_energy(inst: CspInstance, sigma) -> float | np.ndarray:
    """(1/alpha) * sum over clauses of f_e at the signed literals; accepts a batch (B, n)."""
    sigma, single = _check_assignments(sigma, inst.n)
    tables = np.stack([p.values for p in inst.model.dist.predicates])  # (P, 2^k)
    rows = _literal_index(inst, sigma)
    vals = tables[inst.predicate_index[None, :], rows].sum(axis=1) / inst.alpha
    return float(vals[0]) if single else vals


# -- spin glasses ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpinGlassInstance:
    """Gaussian disorder for each active degree; ``scale`` multiplies every entry.

    The disorder is a deterministic function of ``(seed, key)`` and is
    regenerated on load rather than serialized.
    """

    xi: MixturePolynomial
    n: int
    seed: int
    key: tuple = ()
    scale: float = 1.0
    budget: int = DEFAULT_ENTRY_BUDGET
    disorder: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        degrees = self.xi.degrees
        if not degrees:
            raise ValueError("mixture polynomial has no active degree")
        entries = sum(self.n**p for p in degrees)
        if entries > self.budget:
            raise ResourceError(
                f"disorder needs {entries} entries for n={self.n}, degrees {degrees}; budget is {self.budget}"
            )
        if not self.disorder:
            for p in degrees:
                rng = make_rng(self.seed, *self.key, p)
                self.disorder[p] = rng.standard_normal((self.n,) * p)

    def energy(self, sigma) -> float | np.ndarray:
        return sg_energy(self, sigma)

    def to_json(self) -> dict:
        return {"xi": self.xi.to_json(), "n": self.n, "seed": self.seed, "key": list(self.key), "scale": self.scale}

    @classmethod
    def from_json(cls, d: dict) -> "SpinGlassInstance":
        xi = MixturePolynomial.from_degrees({int(p): c for p, c in d["xi"]["coefficients"].items()})
        return cls(xi, d["n"], d["seed"], tuple(d["key"]), d["scale"])


def sample_spin_glass(
    xi: MixturePolynomial, n: int, seed: int, key: Sequence[int] = (), budget: int = DEFAULT_ENTRY_BUDGET
) -> SpinGlassInstance:
    return SpinGlassInstance(xi, int(n), int(seed), tuple(key), 1.0, budget)


def _contract(J: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """<J, sigma^{(x)p}> for a batch of assignments (B, n)."""
    n = sigma.shape[1]
    t = J.reshape(-1, n) @ sigma.T  # (n^{p-1}, B)
    for _ in range(J.ndim - 1):
        t = np.einsum("ijb,jb->ib", t.reshape(-1, n, t.shape[1]), sigma.T)
    return t[0]


def sg_energy(g: SpinGlassInstance, sigma) -> float | np.ndarray:
    """sum_p c_p n^{-(p-1)/2} <J^(p), sigma^{(x)p}>, times the instance scale."""
    sigma, single = _check_assignments(sigma, g.n)
    s = sigma.astype(float)
    coeffs = g.xi.coefficients
    total = np.zeros(len(s))
    for p, J in g.disorder.items():
        c = math.sqrt(coeffs[p - 1])
        total += c * g.n ** (-(p - 1) / 2) * _contract(J, s)
    total *= g.scale
    return float(total[0]) if single else total


@dataclass(frozen=True, eq=False)
class SpinGlassSum:
    """Observed Hamiltonian formed as the sum of independent hidden components."""

    parts: tuple[SpinGlassInstance, ...]

    @property
    def n(self) -> int:
        return self.parts[0].n

    def energy(self, sigma):
        out = sum(sg_energy(p, sigma) for p in self.parts)
        return out

    def to_json(self) -> dict:
        return {"parts": [p.to_json() for p in self.parts]}


# -- coupled models -------------------------------------------------------------------------


@dataclass(frozen=True)
class CoupledSpec:
    """0/1 matrix A (l x l') and hidden strengths b with (A b)_i = 1 for every row."""

    A: tuple
    b: tuple

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2 or A.shape[1] != len(b):
            raise ValueError(f"A must be l x l' with l' = len(b); got {A.shape} and {len(b)}")
        if not np.all((A == 0) | (A == 1)):
            raise ValueError("A must have 0/1 entries")
        if np.any(b < 0):
            raise ValueError("b must be nonnegative")
        row = A @ b
        if not np.allclose(row, 1.0, atol=1e-9):
            raise ValueError(f"coupling needs (A b)_i = 1 for all i, got {row.tolist()}")
        object.__setattr__(self, "A", tuple(tuple(int(v) for v in r) for r in A))
        object.__setattr__(self, "b", tuple(float(v) for v in b))

    @property
    def observed(self) -> int:
        return len(self.A)

    @property
    def hidden(self) -> int:
        return len(self.b)


def _hidden_csp(model: CspModel, strength: float, seed: int, key: tuple) -> tuple:
    return _sample_block(model.with_mode("poisson"), strength * model.alpha * model.n, seed, key)


def sample_coupled(spec: CoupledSpec, base, seed: int) -> list:
    """Observed instances of the (A, b)-coupled model.

    ``base`` is a :class:`CspModel` (hidden instance j has density b_j alpha,
    observed instances are clause unions) or a pair ``(xi, n)`` (hidden
    instance j has disorder scaled by sqrt(b_j), observed instances are sums).
    """
    if isinstance(base, CspModel):
        model = base.with_mode("poisson")
        blocks = [_hidden_csp(model, bj, seed, (j,)) for j, bj in enumerate(spec.b)]
        return [
            _assemble(model, [blocks[j] for j in range(spec.hidden) if row[j]], (int(seed), i))
            for i, row in enumerate(spec.A)
        ]
    xi, n = base
    hidden = [SpinGlassInstance(xi, int(n), int(seed), (j,), math.sqrt(bj)) for j, bj in enumerate(spec.b)]
    return [SpinGlassSum(tuple(hidden[j] for j in range(spec.hidden) if row[j])) for row in spec.A]


def t_correlated_pair(model: CspModel, t: float, seed: int) -> tuple[CspInstance, CspInstance]:
    """Shared Pois(alpha t n) block plus two independent Pois(alpha (1-t) n) blocks."""
    if model.mode != "poisson":
        raise ValueError("t-correlated pairs are defined for the poisson model only")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    spec = CoupledSpec(((1, 1, 0), (1, 0, 1)), (t, 1.0 - t, 1.0 - t))
    first, second = sample_coupled(spec, model, seed)
    return first, second


@dataclass(frozen=True)
class TreeEnsembleSpec:
    branching: tuple[int, ...]
    couplings: tuple[float, ...]  # p_0 = 0 <= p_1 <= ... <= p_D = 1

    def __post_init__(self):
        k = tuple(int(v) for v in self.branching)
        p = tuple(float(v) for v in self.couplings)
        if not k or any(v < 1 for v in k):
            raise ValueError("branching must be a nonempty sequence of positive integers")
        if len(p) != len(k) + 1:
            raise ValueError(f"need D + 1 = {len(k) + 1} coupling levels, got {len(p)}")
        if p[0] != 0.0 or p[-1] != 1.0 or any(b < a for a, b in zip(p, p[1:])):
            raise ValueError(f"couplings must increase from 0 to 1, got {p}")
        object.__setattr__(self, "branching", k)
        object.__setattr__(self, "couplings", p)

    @property
    def depth(self) -> int:
        return len(self.branching)

    def leaves(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in u) for u in np.ndindex(*self.branching)]


def tree_ensemble(spec: TreeEnsembleSpec, base, seed: int) -> list:
    """Leaf instances, each the union or sum of scaled node instances along its root path.

    Leaves are ordered lexicographically by path.
    """
    weights = np.diff(spec.couplings)
    leaves = spec.leaves()
    nodes = {}
    for leaf in leaves:
        for d in range(1, spec.depth + 1):
            node = leaf[:d]
            if node in nodes:
                continue
            key = (d, *node)
            if isinstance(base, CspModel):
                nodes[node] = _hidden_csp(base, weights[d - 1], seed, key)
            else:
                xi, n = base
                nodes[node] = SpinGlassInstance(xi, int(n), int(seed), key, math.sqrt(weights[d - 1]))
    out = []
    for leaf in leaves:
        parts = [nodes[leaf[:d]] for d in range(1, spec.depth + 1)]
        if isinstance(base, CspModel):
            out.append(_assemble(base.with_mode("poisson"), parts, (int(seed), *leaf)))
        else:
            out.append(SpinGlassSum(tuple(parts)))
    return out


def dumps_instance(inst) -> str:
    return json.dumps(inst.to_json(), sort_keys=True)


def csp_mixture(model: CspModel) -> MixturePolynomial:
    return mixture(model.dist)
