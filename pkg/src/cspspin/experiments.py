"""Desk-scale experiment drivers shared by the command line and the acceptance tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ensembles import CspModel, sample_csp, sample_spin_glass
from .landscape import (
    AnnealSchedule,
    EnergyOracle,
    annealer,
    brute_force_max,
    chi_curve,
    derive_seed,
    free_energy_density,
    ogp_scan,
)
from .parisi import OptimizerOptions, ParisiGrid, minimize_gsed
from .predicates import FAMILIES, Predicate, builtin_predicate, mixture


def mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else float("nan")
    return float(v.mean()), se


def table1_rows(
    families: Sequence[str] = FAMILIES,
    ks: Sequence[int] = (2, 3, 4, 5),
    opts: OptimizerOptions | None = None,
) -> list[dict]:
    """One row per (family, k): mean term, ground-state estimate and its grid delta.

    A failing row records its error and the sweep continues.
    """
    rows = []
    for fam in families:
        for k in ks:
            row = {"family": fam, "k": k}
            try:
                xi = mixture(builtin_predicate(fam, k))
                res = minimize_gsed(xi, opts)
                row.update(
                    mean_term=xi.mean_term,
                    gsed=res.value,
                    grid_delta=res.grid_delta,
                    atoms=res.order_parameter.atoms,
                    converged=res.converged,
                    error="",
                )
            except Exception as exc:  # isolate the row; the sweep goes on
                row.update(mean_term=float("nan"), gsed=float("nan"), grid_delta=float("nan"),
                           atoms=0, converged=False, error=f"{type(exc).__name__}: {exc}")
            rows.append(row)
    return rows


@dataclass
class VmaxResult:
    values: np.ndarray
    mean: float
    stderr: float


def vmax_experiment(pred: Predicate, n: int, alpha: float, reps: int, seed: int, mode: str = "exact") -> VmaxResult:
    """Exact optimal satisfied fraction max H / n for ``reps`` random instances."""
    model = CspModel(pred, alpha, n, mode)
    vals = np.empty(reps)
    for r in range(reps):
        inst = sample_csp(model, seed, (r,))
        vals[r] = brute_force_max(EnergyOracle.of(inst)).density
    m, se = mean_se(vals)
    return VmaxResult(vals, m, se)


def interpolation_experiment(
    pred: Predicate, n: int, beta: float, alphas: Sequence[float], reps: int, seed: int
) -> list[dict]:
    """Compare the CSP free energy with the mean term plus the rescaled spin-glass free energy.

    For each alpha: phi_csp = (1/(beta n)) log sum exp(beta H_csp) and
    psi = (1/(beta n)) log sum exp(beta H_sg / sqrt(alpha)), each averaged over
    ``reps`` independent instances; delta = |phi_csp - mean_term - psi|.
    """
    xi = mixture(pred)
    rows = []
    for ai, alpha in enumerate(alphas):
        model = CspModel(pred, alpha, n, "exact")
        phi = np.empty(reps)
        psi = np.empty(reps)
        for r in range(reps):
            inst = sample_csp(model, seed, (0, ai, r))
            phi[r] = free_energy_density(EnergyOracle.of(inst), beta)
            sg = sample_spin_glass(xi, n, seed, (1, ai, r))
            psi[r] = free_energy_density(EnergyOracle.of(sg), beta / math.sqrt(alpha)) / math.sqrt(alpha)
        pm, ps = mean_se(phi)
        sm, ss = mean_se(psi)
        rows.append(
            {
                "alpha": float(alpha),
                "phi_csp": pm,
                "phi_csp_se": ps,
                "phi_sg_scaled": sm,
                "phi_sg_scaled_se": ss,
                "delta": abs(pm - xi.mean_term - sm),
                "delta_se": math.hypot(ps, ss),
            }
        )
    return rows


def poisson_exact_experiment(pred: Predicate, n: int, alpha: float, beta: float, reps: int, seed: int) -> dict:
    """Paired-seed free-energy difference between the poisson and exact clause counts."""
    model = CspModel(pred, alpha, n, "exact")
    diffs = np.empty(reps)
    for r in range(reps):
        exact = sample_csp(model, seed, (r,))
        pois = sample_csp(model.with_mode("poisson"), seed, (r,))
        diffs[r] = free_energy_density(EnergyOracle.of(pois), beta) - free_energy_density(EnergyOracle.of(exact), beta)
    m, se = mean_se(diffs)
    return {"mean_difference": m, "stderr": se, "bound": 1.0 / math.sqrt(alpha * n) + 3 * se, "reps": reps}


def chi_experiment(
    pred: Predicate,
    n: int,
    alpha: float,
    t_grid: Sequence[float],
    reps: int,
    seed: int,
    schedule: AnnealSchedule | None = None,
):
    """Correlation curve of the debiased annealer on t-correlated pairs."""
    model = CspModel(pred, alpha, n, "poisson")
    return chi_curve(model, lambda s: annealer(schedule, s), t_grid, reps, seed)


def ogp_experiment(
    pred: Predicate, n: int, alpha: float, t: float, thresholds: Sequence[float], seed: int,
    bins: int | None = None, mode: str = "average",
) -> list[dict]:
    """Overlap histogram over solution pairs of a t-correlated pair (t=1: one instance twice)."""
    from .ensembles import t_correlated_pair

    model = CspModel(pred, alpha, n, "poisson")
    first, second = t_correlated_pair(model, t, derive_seed(seed, 0))
    return ogp_scan(EnergyOracle.of(first, second), thresholds, bins, mode)


def default_search_options(points: int | None = None, half_width: float | None = None, atoms: int = 8) -> OptimizerOptions:
    report = ParisiGrid(half_width=half_width, points=points or (1 << 12))
    search = ParisiGrid(half_width=half_width, points=max(256, report.points // 4))
    return OptimizerOptions(max_atoms=atoms, search_grid=search, report_grid=report)
