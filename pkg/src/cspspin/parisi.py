"""Zero-temperature Parisi functional for mixed Ising spin glasses.

For a piecewise-constant order parameter the backward equation

    d_t Phi + xi''(t)/2 * (Phi_xx + zeta(t) * Phi_x^2) = 0,    Phi(x, 1) = |x|

is solved exactly interval by interval: with ``zeta = z`` on ``[a, b)`` the
substitution ``exp(z Phi)`` linearizes it, so

    Phi(x, a) = (1/z) log E exp(z Phi(x + sqrt(v) g, b)),    v = xi'(b) - xi'(a),

and ``z = 0`` is the plain heat flow. The last interval (where ``Phi = |x|``)
has a closed form; the others are Gaussian convolutions on a uniform grid.
Phi stays even in ``x``, so only ``x >= 0`` is stored.

A degree-1 term of xi (an external Gaussian field) is invisible to xi'' and
enters as a final average of Phi(., 0) over N(0, xi'(0)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize
from scipy.special import log_ndtr, logsumexp, ndtr

from .predicates import MixturePolynomial, Predicate, PredicateDistribution, mixture

# below this z the Cole-Hopf log loses digits; use the second-order cumulant expansion
_SMALL_Z = 1e-4
# kernels narrower than this many grid steps are applied on an upsampled grid
_MIN_SIGMA_STEPS = 4.0
_KERNEL_SIGMAS = 10.0
_BOUNDARY_TOL = 1e-6


class ParisiError(ValueError):
    """Invalid order parameter or mixture."""


class GridError(ParisiError):
    """The spatial grid cannot resolve the requested mixture."""


@dataclass(frozen=True)
class OrderParameter:
    """Piecewise-constant zeta: ``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``.

    ``monotone=True`` is the class U (non-decreasing, used for the ground state);
    ``monotone=False`` is the extended class L used for the algorithmic threshold.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    monotone: bool = True

    def __post_init__(self):
        t = tuple(float(v) for v in self.breakpoints)
        z = tuple(float(v) for v in self.values)
        if len(t) != len(z) + 1 or not z:
            raise ParisiError(f"need len(breakpoints) == len(values) + 1, got {len(t)} and {len(z)}")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ParisiError(f"breakpoints must run from 0 to 1, got {t[0]} .. {t[-1]}")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ParisiError(f"breakpoints must be strictly increasing: {t}")
        if any(not math.isfinite(v) or v < 0 for v in z):
            raise ParisiError(f"zeta values must be finite and nonnegative: {z}")
        if self.monotone and any(b < a for a, b in zip(z, z[1:])):
            raise ParisiError(f"class U order parameter must be non-decreasing: {z}")
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", z)

    @classmethod
    def constant(cls, z: float = 0.0) -> "OrderParameter":
        return cls((0.0, 1.0), (z,))

    @classmethod
    def from_arrays(cls, breakpoints, values, monotone: bool = True) -> "OrderParameter":
        """Build after dropping empty intervals (repeated breakpoints)."""
        t = np.asarray(breakpoints, dtype=float)
        z = np.asarray(values, dtype=float)
        keep = np.diff(t) > 0
        t_new = np.concatenate([[0.0], t[1:][keep]])
        t_new[-1] = 1.0
        return cls(tuple(t_new), tuple(z[keep]), monotone)

    @property
    def atoms(self) -> int:
        return len(self.values)

    @property
    def class_tag(self) -> str:
        return "U" if self.monotone else "L"

    def __call__(self, t):
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        return np.asarray(self.values)[np.clip(idx, 0, self.atoms - 1)]

    def refined(self, at: float) -> "OrderParameter":
        """Same function with an extra breakpoint at ``at``."""
        if at <= 0 or at >= 1 or at in self.breakpoints:
            raise ParisiError(f"cannot insert breakpoint at {at}")
        i = int(np.searchsorted(self.breakpoints, at)) - 1
        t = self.breakpoints[: i + 1] + (at,) + self.breakpoints[i + 1 :]
        z = self.values[: i + 1] + (self.values[i],) + self.values[i + 1 :]
        return OrderParameter(t, z, self.monotone)

    def to_json(self) -> dict:
        return {"class": self.class_tag, "breakpoints": list(self.breakpoints), "values": list(self.values)}


@dataclass(frozen=True)
class ParisiGrid:
    """Discretization of Phi(x, t): ``points`` cells across ``[-half_width, half_width]``.

    ``half_width=None`` picks ``8 * sqrt(xi'(1))``. Each interval's exact
    semigroup is applied in ``time_steps_per_interval`` equal pieces.
    """

    half_width: float | None = None
    points: int = 1 << 12
    time_steps_per_interval: int = 1

    def __post_init__(self):
        if self.half_width is not None and not self.half_width > 0:
            raise GridError(f"half_width must be positive, got {self.half_width}")
        if self.points < 16 or self.points % 2:
            raise GridError(f"points must be an even integer >= 16, got {self.points}")
        if self.time_steps_per_interval < 1:
            raise GridError("time_steps_per_interval must be >= 1")

    def refined(self) -> "ParisiGrid":
        return replace(self, points=2 * self.points, time_steps_per_interval=2 * self.time_steps_per_interval)

    def resolve(self, xi: MixturePolynomial) -> tuple[float, np.ndarray]:
        """Grid step and the nonnegative half of the grid for this mixture."""
        scale = math.sqrt(float(xi.derivative(1.0)))
        half_width = 8.0 * scale if self.half_width is None else float(self.half_width)
        # mass of the total field variance escaping the grid, times the slope-1 growth
        escape = 2.0 * float(ndtr(-half_width / scale)) * half_width
        if escape > _BOUNDARY_TOL:
            raise GridError(
                f"half_width {half_width:.3g} is too small for xi'(1) = {scale**2:.3g} "
                f"(boundary influence {escape:.2e} > {_BOUNDARY_TOL})"
            )
        half = self.points // 2
        dx = half_width / half
        return dx, np.arange(half + 1) * dx


@dataclass(frozen=True)
class ParisiEvaluation:
    phi_at_origin: float
    correction: float
    value: float
    grid_delta: float = float("nan")


# -- one interval of the backward flow ---------------------------------------------------


def terminal_phi(x: np.ndarray, z: float, v: float) -> np.ndarray:
    """(1/z) log E exp(z |x + sqrt(v) g|), and E|x + sqrt(v) g| at z = 0."""
    ax = np.abs(np.asarray(x, dtype=float))
    if v <= 0:
        return ax
    s = math.sqrt(v)
    mean = ax * (1.0 - 2.0 * ndtr(-ax / s)) + 2.0 * s * np.exp(-0.5 * (ax / s) ** 2) / math.sqrt(2 * math.pi)
    if z < _SMALL_Z:
        return mean + 0.5 * z * (ax**2 + v - mean**2)
    a = z * ax + log_ndtr((ax + z * v) / s)
    b = -z * ax + log_ndtr((z * v - ax) / s)
    return 0.5 * z * v + np.logaddexp(a, b) / z


def _extended(phi: np.ndarray, dx: float, pad: int) -> np.ndarray:
    """Even extension to indices -pad .. len(phi)-1+pad, slope one past the edge."""
    top = len(phi) - 1
    j = np.abs(np.arange(-pad, top + 1 + pad))
    inside = np.minimum(j, top)
    return np.where(j <= top, phi[inside], phi[-1] + (j - top) * dx)


def _euler_step(phi: np.ndarray, dx: float, z: float, v: float) -> np.ndarray:
    # one explicit step of Phi_t = (Phi_xx + z Phi_x^2) / 2; only used for v <= 0.4 dx^2, z v <= 0.1 dx
    p = np.concatenate([[phi[1]], phi, [phi[-1] + dx]])
    d2 = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / (dx * dx)
    d1 = (p[2:] - p[:-2]) / (2.0 * dx)
    return phi + 0.5 * v * (d2 + z * d1 * d1)


def _upsampled(phi: np.ndarray, dx: float, factor: int) -> np.ndarray:
    pad = 4
    ext = _extended(phi, dx, pad)
    xs = np.arange(-pad, len(phi) + pad) * dx
    fine = np.arange((len(phi) - 1) * factor + 1) * (dx / factor)
    return CubicSpline(xs, ext)(fine)


def _windowed_logsumexp(ext: np.ndarray, logw: np.ndarray, z: float, n_out: int) -> np.ndarray:
    # rows shifted by their own maximum; only used when the tilted form would overflow
    width = len(logw)
    win = sliding_window_view(z * ext, width)[:n_out]
    out = np.empty(n_out)
    chunk = max(1, (1 << 22) // width)
    for lo in range(0, n_out, chunk):
        e = win[lo : lo + chunk, ::-1] + logw[None, :]
        out[lo : lo + chunk] = logsumexp(e, axis=1) / z
    return out


def heat_flow(phi: np.ndarray, dx: float, z: float, v: float) -> np.ndarray:
    """Apply ``Phi -> (1/z) log E exp(z Phi(x + sqrt(v) g))`` to an even function on x >= 0."""
    if v <= 0:
        return phi
    s = math.sqrt(v)
    if s < _MIN_SIGMA_STEPS * dx:
        # one explicit step is accurate only if the drift z v Phi_x (|Phi_x| <= 1) stays well inside a cell
        if v <= 0.4 * dx * dx and z * v <= 0.1 * dx:
            return _euler_step(phi, dx, z, v)
        # resolve the narrow kernel on a finer grid, then sample back
        factor = math.ceil(_MIN_SIGMA_STEPS * dx / s)
        return heat_flow(_upsampled(phi, dx, factor), dx / factor, z, v)[::factor]
    n_out = len(phi)
    pad = math.ceil((_KERNEL_SIGMAS * s + z * v) / dx)
    y = np.arange(-pad, pad + 1) * dx
    ext = _extended(phi, dx, pad)
    logw = -0.5 * y * y / v
    logw -= logsumexp(logw)
    if z < _SMALL_Z:
        w = np.exp(logw)
        m1 = np.convolve(ext, w, mode="valid")
        if z == 0:
            return m1
        return m1 + 0.5 * z * (np.convolve(ext * ext, w, mode="valid") - m1 * m1)
    # factor out exp(z x): convolution of exp(z (Phi - x)) >= 1 with a tilted kernel
    xs = np.arange(-pad, n_out + pad) * dx
    excess = z * (ext - xs)
    if excess.max() > 700.0:
        return _windowed_logsumexp(ext, logw, z, n_out)
    tilted = logw - z * y
    top = tilted.max()
    conv = np.convolve(np.exp(excess), np.exp(tilted - top), mode="valid")
    return xs[pad : pad + n_out] + (top + np.log(conv)) / z


# -- functional ---------------------------------------------------------------------------


def correction_term(xi: MixturePolynomial, zeta: OrderParameter) -> float:
    """(1/2) int_0^1 s xi''(s) zeta(s) ds, exact for piecewise-constant zeta."""
    t = np.asarray(zeta.breakpoints)
    antideriv = t * xi.derivative(t) - xi(t)  # d/ds [s xi' - xi] = s xi''
    return 0.5 * float(np.dot(zeta.values, np.diff(antideriv)))


def _phi_at_origin(xi: MixturePolynomial, zeta: OrderParameter, grid: ParisiGrid) -> float:
    dx, x = grid.resolve(xi)
    t = np.asarray(zeta.breakpoints)
    z = zeta.values
    dxi = xi.derivative(t)
    steps = grid.time_steps_per_interval
    m = zeta.atoms
    field_variance = float(xi.derivative(0.0))
    if not np.any(np.diff(dxi) > 0):
        # no interaction beyond the field: Phi(., 0) = |x|
        return float(terminal_phi(0.0, 0.0, field_variance))
    phi = terminal_phi(x, z[-1], float(dxi[-1] - dxi[-2]))
    for i in range(m - 2, -1, -1):
        v = float(dxi[i + 1] - dxi[i])
        for _ in range(steps):
            phi = heat_flow(phi, dx, z[i], v / steps)
    if field_variance > 0:
        phi = heat_flow(phi, dx, 0.0, field_variance)
    return float(phi[0])


def _check_mixture(xi: MixturePolynomial):
    if xi.is_zero():
        raise ParisiError("mixture polynomial has no nonzero coefficient")


def parisi_value(xi: MixturePolynomial, zeta: OrderParameter, grid: ParisiGrid | None = None) -> float:
    """P(zeta) on a single grid, without refinement diagnostics."""
    _check_mixture(xi)
    grid = grid or ParisiGrid()
    return _phi_at_origin(xi, zeta, grid) - correction_term(xi, zeta)


def evaluate_parisi(
    xi: MixturePolynomial,
    zeta: OrderParameter,
    grid: ParisiGrid | None = None,
    refine: bool = True,
) -> ParisiEvaluation:
    """Evaluate the functional; with ``refine`` also on the doubled grid and report the change."""
    _check_mixture(xi)
    grid = grid or ParisiGrid()
    phi0 = _phi_at_origin(xi, zeta, grid)
    corr = correction_term(xi, zeta)
    delta = float("nan")
    if refine:
        delta = abs(_phi_at_origin(xi, zeta, grid.refined()) - phi0)
    return ParisiEvaluation(phi0, corr, phi0 - corr, delta)


def rs_value(xi: MixturePolynomial) -> float:
    """Value at zeta = 0: E|N(0, xi'(1))| = sqrt(2 xi'(1) / pi)."""
    return math.sqrt(2.0 * float(xi.derivative(1.0)) / math.pi)


# -- minimization ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerOptions:
    """Settings for the atom sweep.

    The search runs on ``search_grid``; the winner is re-evaluated on
    ``report_grid`` and its refinement.
    """

    max_atoms: int = 8
    search_grid: ParisiGrid = field(default_factory=lambda: ParisiGrid(points=1 << 10))
    report_grid: ParisiGrid = field(default_factory=ParisiGrid)
    evals_per_dim: int = 400
    xatol: float = 1e-3
    fatol: float = 1e-9


@dataclass
class ParisiMinimum:
    """Best order parameter found and its value (an upper bound on the infimum)."""

    order_parameter: OrderParameter
    value: float
    grid_delta: float
    converged: bool
    history: list[float]
    evaluations: int

    def __iter__(self) -> Iterator:
        yield self.order_parameter
        yield self.value

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "grid_delta": self.grid_delta,
            "converged": self.converged,
            "history": self.history,
            "evaluations": self.evaluations,
            "order_parameter": self.order_parameter.to_json(),
        }


def _decode(theta: np.ndarray, m: int, monotone: bool) -> tuple[np.ndarray, np.ndarray]:
    gaps = np.exp(np.clip(theta[:m], -40.0, 40.0))
    t = np.concatenate([[0.0], np.cumsum(gaps) / gaps.sum()])
    t[-1] = 1.0
    d = np.minimum(np.abs(theta[m:]), 1e4)
    z = np.cumsum(d) if monotone else d
    return t, z


def _encode(t: np.ndarray, z: np.ndarray, monotone: bool) -> np.ndarray:
    gaps = np.log(np.maximum(np.diff(t), 1e-300))
    d = np.diff(np.concatenate([[0.0], z])) if monotone else np.asarray(z, dtype=float)
    return np.concatenate([gaps - gaps.max(), d])


def _split_last(theta: np.ndarray, m: int, monotone: bool) -> np.ndarray:
    """Embed an (m-1)-atom parameter vector into m atoms without changing zeta."""
    gaps, d = theta[: m - 1], theta[m - 1 :]
    gaps = np.concatenate([gaps[:-1], [gaps[-1] - math.log(2.0)] * 2])
    extra = 0.0 if monotone else d[-1]
    return np.concatenate([gaps, d, [extra]])


class _Objective:
    def __init__(self, xi, m, monotone, grid):
        self.xi, self.m, self.monotone, self.grid = xi, m, monotone, grid
        self.calls = 0

    def __call__(self, theta) -> float:
        self.calls += 1
        t, z = _decode(theta, self.m, self.monotone)
        try:
            return parisi_value(self.xi, OrderParameter.from_arrays(t, z, self.monotone), self.grid)
        except ParisiError:
            return math.inf


def _nelder_mead(obj: _Objective, theta0: np.ndarray, opts: OptimizerOptions):
    dim = len(theta0)
    steps = np.where(np.arange(dim) < obj.m, 0.5, np.maximum(0.25 * np.abs(theta0), 0.25))
    simplex = np.vstack([theta0, theta0 + np.diag(steps)])
    res = minimize(
        obj,
        theta0,
        method="Nelder-Mead",
        options=dict(
            initial_simplex=simplex,
            maxfev=opts.evals_per_dim * dim,
            xatol=opts.xatol,
            fatol=opts.fatol,
            adaptive=dim > 4,
        ),
    )
    return res.x, float(res.fun), bool(res.success)


def _sweep(xi, opts, monotone, warm_starts=None):
    """Atom sweep m = 1..max_atoms; returns the best parameter vector for every m."""
    best_theta, best_value = None, math.inf
    per_atom, history, calls, converged = [], [], 0, True
    for m in range(1, opts.max_atoms + 1):
        obj = _Objective(xi, m, monotone, opts.search_grid)
        if best_theta is None:
            starts = [np.array([0.0, 1.0])]
        else:
            starts = [_split_last(best_theta, m, monotone)]
        if warm_starts is not None and m - 1 < len(warm_starts):
            starts.append(warm_starts[m - 1])
        values = [obj(s) for s in starts]
        theta0, value0 = starts[int(np.argmin(values))], min(values)
        theta, value, ok = _nelder_mead(obj, theta0, opts)
        if value > value0:
            theta, value = theta0, value0
        if value <= best_value:
            best_theta, best_value = theta, value
        else:
            best_theta = _split_last(best_theta, m, monotone)
        converged &= ok
        calls += obj.calls
        per_atom.append(best_theta)
        history.append(best_value)
    return per_atom, history, calls, converged


def _minimize(xi, opts, monotone, warm_starts=None):
    _check_mixture(xi)
    per_atom, history, calls, converged = _sweep(xi, opts, monotone, warm_starts)
    t, z = _decode(per_atom[-1], opts.max_atoms, monotone)
    zeta = OrderParameter.from_arrays(t, z, monotone)
    ev = evaluate_parisi(xi, zeta, opts.report_grid, refine=True)
    if not converged:
        warnings.warn(
            f"Parisi minimization hit its evaluation budget before converging (xi = {xi}); "
            "the reported value is still a valid upper bound",
            stacklevel=3,
        )
    result = ParisiMinimum(zeta, ev.value, ev.grid_delta, converged, history, calls)
    return result, per_atom


def minimize_gsed(xi: MixturePolynomial, opts: OptimizerOptions | None = None) -> ParisiMinimum:
    """Minimize over non-decreasing piecewise-constant zeta with up to ``max_atoms`` pieces."""
    return _minimize(xi, opts or OptimizerOptions(), monotone=True)[0]


def minimize_alg(xi: MixturePolynomial, opts: OptimizerOptions | None = None) -> ParisiMinimum:
    """Same sweep over the extended class (no monotonicity).

    Every m-atom search also starts from the monotone optimum with m atoms, so
    the result never exceeds the ground-state value from the same options.
    """
    opts = opts or OptimizerOptions()
    gsed, gsed_thetas = _minimize(xi, opts, monotone=True)
    warm = []
    for m, theta in enumerate(gsed_thetas, start=1):
        t, z = _decode(theta, m, True)
        warm.append(_encode(t, z, monotone=False))
    result, _ = _minimize(xi, opts, monotone=False, warm_starts=warm)
    if result.value > gsed.value:
        zeta = gsed.order_parameter
        result = ParisiMinimum(
            OrderParameter(zeta.breakpoints, zeta.values, monotone=False),
            gsed.value,
            gsed.grid_delta,
            result.converged,
            result.history,
            result.evaluations,
        )
    return result


def csp_value_formula(
    p: Predicate | PredicateDistribution,
    alpha: float,
    opts: OptimizerOptions | None = None,
) -> float:
    """Predicted optimal satisfied fraction: fhat(empty) + GSED / sqrt(alpha)."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    xi = mixture(p)
    return xi.mean_term + minimize_gsed(xi, opts).value / math.sqrt(alpha)
