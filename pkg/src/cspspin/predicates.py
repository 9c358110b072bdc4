"""Boolean predicates, their Fourier spectra, and the associated mixture polynomial.

Truth tables are indexed so that ``itertools.product((0, 1), repeat=k)`` walks
them in order: variable ``j`` (0-based) reads bit ``k - 1 - j`` of the index and
bit value ``b`` stands for the spin ``1 - 2b``. The literal convention is that
spin ``+1`` satisfies an un-negated literal.

Subsets of variables are encoded with the same bit convention, so the Walsh
coefficient of a subset lives at the matching mask of the transformed table.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

FAMILIES = ("kXOR", "kSAT", "kNAE", "oneInK")

_TOL = 1e-12


class PredicateError(ValueError):
    """Raised for malformed predicates or unsupported predicate families."""


def _variable_bit(k: int, j: int) -> int:
    return 1 << (k - 1 - j)


def spins_of_index(index: int, k: int) -> np.ndarray:
    """Spin vector in {+1, -1}^k for a truth-table index."""
    bits = [(index >> (k - 1 - j)) & 1 for j in range(k)]
    return 1 - 2 * np.asarray(bits, dtype=np.int64)


def index_of_spins(spins: Sequence[int]) -> int:
    idx = 0
    for s in spins:
        if s not in (1, -1):
            raise PredicateError(f"spins must be +1/-1, got {s!r}")
        idx = (idx << 1) | (1 if s == -1 else 0)
    return idx


def all_spin_inputs(k: int) -> np.ndarray:
    """All 2^k inputs as a (2^k, k) array of spins, in table order."""
    idx = np.arange(1 << k)[:, None]
    shifts = np.arange(k - 1, -1, -1)[None, :]
    return 1 - 2 * ((idx >> shifts) & 1)


def fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along the last axis.

    ``out[m] = sum_i values[i] * (-1)^popcount(i & m)``. Length must be a power of two.
    """
    a = np.array(values, dtype=np.float64, copy=True)
    size = a.shape[-1]
    if size & (size - 1):
        raise ValueError(f"length {size} is not a power of two")
    lead = a.shape[:-1]
    h = 1
    while h < size:
        a = a.reshape(*lead, size // (2 * h), 2, h)
        x = a[..., 0, :].copy()
        y = a[..., 1, :]
        a[..., 0, :] += y
        a[..., 1, :] = x - y
        a = a.reshape(*lead, size)
        h *= 2
    return a


@dataclass(frozen=True)
class Predicate:
    """A k-ary function on {+1,-1}^k with values in [-1, 1], stored as a truth table."""

    k: int
    table: tuple[float, ...]
    name: str | None = None

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise PredicateError(f"arity must be a positive integer, got {self.k!r}")
        table = tuple(float(v) for v in self.table)
        if len(table) != 1 << self.k:
            raise PredicateError(
                f"truth table for k={self.k} must have 2^k = {1 << self.k} entries, got {len(table)}"
            )
        bad = [v for v in table if not (-1.0 <= v <= 1.0)]
        if bad:
            raise PredicateError(f"table entries must lie in [-1, 1], got {bad[0]!r}")
        object.__setattr__(self, "table", table)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.table)

    def __call__(self, spins: Sequence[int]) -> float:
        return eval_predicate(self, spins)

    def padded(self, k: int) -> "Predicate":
        """The same function viewed as a k-ary predicate ignoring the trailing inputs."""
        if k < self.k:
            raise PredicateError(f"cannot pad arity {self.k} down to {k}")
        shift = k - self.k
        idx = np.arange(1 << k) >> shift
        return Predicate(k, tuple(self.values[idx]), self.name)

    def negated(self) -> "Predicate":
        return Predicate(self.k, tuple(1.0 - v for v in self.table), None)

    def to_json(self) -> dict:
        out = {"k": self.k, "table": list(self.table)}
        if self.name:
            out["name"] = self.name
        return out


def eval_predicate(p: Predicate, spins: Sequence[int]) -> float:
    if len(spins) != p.k:
        raise PredicateError(f"predicate has arity {p.k}, got {len(spins)} spins")
    return p.table[index_of_spins(spins)]


@dataclass(frozen=True)
class FourierSpectrum:
    """Parity-basis coefficients of a predicate, indexed by subset mask."""

    k: int
    coefficients: np.ndarray = field(repr=False)

    def __getitem__(self, subset: Iterable[int]) -> float:
        return float(self.coefficients[self.mask(subset)])

    def mask(self, subset: Iterable[int]) -> int:
        m = 0
        for j in subset:
            if not 0 <= j < self.k:
                raise IndexError(f"variable {j} out of range for arity {self.k}")
            m |= _variable_bit(self.k, j)
        return m

    def subsets(self) -> dict[frozenset, float]:
        out = {}
        for m, c in enumerate(self.coefficients):
            out[frozenset(j for j in range(self.k) if m & _variable_bit(self.k, j))] = float(c)
        return out

    @property
    def mean(self) -> float:
        return float(self.coefficients[0])

    def level_weights(self) -> np.ndarray:
        """Array w with w[j] = sum of squared coefficients over subsets of size j."""
        sizes = np.bitwise_count(np.arange(1 << self.k, dtype=np.uint64)).astype(np.int64)
        return np.bincount(sizes, weights=self.coefficients**2, minlength=self.k + 1)

    def inverse(self) -> np.ndarray:
        """Reconstruct the truth table."""
        return fwht(self.coefficients)


def walsh_transform(p: Predicate) -> FourierSpectrum:
    coeffs = fwht(p.values) / (1 << p.k)
    return FourierSpectrum(p.k, coeffs)


def noise_stability(s: FourierSpectrum, rho: float) -> float:
    """Stab_rho[f] = sum_S rho^|S| fhat(S)^2."""
    w = s.level_weights()
    return float(np.polynomial.polynomial.polyval(rho, w))


@dataclass(frozen=True)
class MixturePolynomial:
    """xi(s) = sum_{p>=1} c_p^2 s^p together with the mean term of the predicate.

    ``coefficients[p - 1]`` is c_p^2. ``mean_term_variance`` records the spread of
    fhat(empty) across a predicate distribution, which has no place in xi.
    """

    coefficients: tuple[float, ...]
    mean_term: float = 0.0
    mean_term_variance: float = 0.0

    def __post_init__(self):
        c = tuple(float(v) for v in self.coefficients)
        if any(v < 0 for v in c):
            raise ValueError(f"mixture coefficients must be nonnegative, got {c}")
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_degrees(cls, terms: Mapping[int, float], mean_term: float = 0.0) -> "MixturePolynomial":
        """Build from {degree: c_p^2}, e.g. ``{2: 0.25}`` for s^2/4."""
        if any(p < 1 for p in terms):
            raise ValueError("mixture degrees start at 1")
        k = max(terms) if terms else 1
        c = [0.0] * k
        for p, v in terms.items():
            c[p - 1] = float(v)
        return cls(tuple(c), mean_term)

    @property
    def max_degree(self) -> int:
        return len(self.coefficients)

    @property
    def degrees(self) -> list[int]:
        return [p for p, c in enumerate(self.coefficients, start=1) if c > 0]

    def _poly(self) -> np.polynomial.Polynomial:
        return np.polynomial.Polynomial((0.0,) + self.coefficients)

    def __call__(self, s):
        return self._poly()(s)

    def derivative(self, s, order: int = 1):
        return self._poly().deriv(order)(s)

    def is_zero(self) -> bool:
        return not any(self.coefficients)

    def is_even(self) -> bool:
        return all(c == 0 for p, c in enumerate(self.coefficients, start=1) if p % 2)

    def scaled(self, b: float) -> "MixturePolynomial":
        """Mixture s -> b * xi(s)."""
        return MixturePolynomial(tuple(b * c for c in self.coefficients), self.mean_term)

    def to_json(self) -> dict:
        return {
            "mean_term": self.mean_term,
            "coefficients": {str(p): c for p, c in enumerate(self.coefficients, start=1)},
            "mean_term_variance": self.mean_term_variance,
        }

    def __str__(self):
        terms = [f"{c:.6g}*s^{p}" for p, c in enumerate(self.coefficients, start=1) if c]
        return " + ".join(terms) or "0"


def mixture_of(p: Predicate) -> MixturePolynomial:
    spectrum = walsh_transform(p)
    w = spectrum.level_weights()
    return MixturePolynomial(tuple(w[1:]), spectrum.mean)


@dataclass(frozen=True)
class PredicateDistribution:
    """A finite distribution over predicates; mixed arities are padded to the largest one."""

    entries: tuple[tuple[Predicate, float], ...]

    def __post_init__(self):
        entries = tuple((p, float(w)) for p, w in self.entries)
        if not entries:
            raise PredicateError("a predicate distribution needs at least one entry")
        if any(w < 0 for _, w in entries):
            raise PredicateError("weights must be nonnegative")
        total = sum(w for _, w in entries)
        if abs(total - 1.0) > 1e-9:
            raise PredicateError(f"weights must sum to 1, got {total}")
        k = max(p.k for p, _ in entries)
        entries = tuple((p.padded(k) if p.k < k else p, w) for p, w in entries)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def point_mass(cls, p: Predicate) -> "PredicateDistribution":
        return cls(((p, 1.0),))

    @property
    def k(self) -> int:
        return self.entries[0][0].k

    @property
    def predicates(self) -> list[Predicate]:
        return [p for p, _ in self.entries]

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.entries])


def mixture_of_distribution(dist: PredicateDistribution) -> MixturePolynomial:
    """Average the level weights over the distribution.

    A nonzero variance of fhat(empty) across the distribution is excluded from
    xi (there is no degree-0 mixture term); it is recorded and warned about.
    """
    weights = dist.weights
    spectra = [walsh_transform(p) for p in dist.predicates]
    levels = sum(w * s.level_weights() for w, s in zip(weights, spectra))
    means = np.array([s.mean for s in spectra])
    mean = float(weights @ means)
    spread = float(weights @ (means - mean) ** 2)
    if spread > _TOL:
        warnings.warn(
            f"fhat(empty) varies across the predicate distribution (variance {spread:.3g}); "
            "this constant fluctuation is not part of the mixture polynomial",
            stacklevel=2,
        )
    return MixturePolynomial(tuple(levels[1:]), mean, spread)


def as_distribution(p: Predicate | PredicateDistribution) -> PredicateDistribution:
    return p if isinstance(p, PredicateDistribution) else PredicateDistribution.point_mass(p)


def mixture(p: Predicate | PredicateDistribution) -> MixturePolynomial:
    if isinstance(p, PredicateDistribution):
        return mixture_of_distribution(p)
    return mixture_of(p)


def builtin_predicate(family: str, k: int) -> Predicate:
    """0/1 truth table of a named predicate family (spin +1 satisfies a literal)."""
    if family not in FAMILIES:
        raise PredicateError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise PredicateError(f"k must be a positive integer, got {k!r}")
    if family == "kNAE" and k < 2:
        raise PredicateError("kNAE needs k >= 2")
    x = all_spin_inputs(k)
    true_count = (x == 1).sum(axis=1)
    if family == "kXOR":
        table = x.prod(axis=1) == -1
    elif family == "kSAT":
        table = true_count >= 1
    elif family == "kNAE":
        table = (true_count != 0) & (true_count != k)
    else:
        table = true_count == 1
    return Predicate(k, tuple(table.astype(float)), f"{family}{k}")


def load_predicate(spec: Mapping | str | Path) -> Predicate:
    """Parse a predicate from a JSON object, JSON text, or a path to a JSON file.

    Accepts ``{"k": 2, "table": [...], "name": "..."}`` or ``{"family": "kSAT", "k": 3}``.
    """
    if isinstance(spec, Path) or (isinstance(spec, str) and not spec.lstrip().startswith("{")):
        path = Path(spec)
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise PredicateError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    elif isinstance(spec, str):
        try:
            obj = json.loads(spec)
        except json.JSONDecodeError as e:
            raise PredicateError(f"<json>:{e.lineno}:{e.colno}: {e.msg}") from e
    else:
        obj = spec
    if not isinstance(obj, Mapping):
        raise PredicateError("predicate description must be a JSON object")
    if "family" in obj:
        return builtin_predicate(obj["family"], int(obj["k"]))
    for key in ("k", "table"):
        if key not in obj:
            raise PredicateError(f"predicate description is missing field {key!r}")
    return Predicate(int(obj["k"]), tuple(obj["table"]), obj.get("name"))
