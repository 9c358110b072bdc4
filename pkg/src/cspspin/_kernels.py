"""Numba kernels for single-site Metropolis on a multilinear polynomial.

The polynomial is sum_t coef[t] * prod_{j in vars(t)} sigma_j with terms in CSR
form (``term_ptr``/``term_vars``) and the variable-to-term incidence in
``var_ptr``/``var_terms``. Uniform draws come from numpy so the results are
fixed by the caller's generator.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _flip_gain(i, sigma, coef, term_ptr, term_vars, var_ptr, var_terms):
    # energy change when sigma_i flips
    total = 0.0
    for a in range(var_ptr[i], var_ptr[i + 1]):
        t = var_terms[a]
        prod = coef[t]
        for b in range(term_ptr[t], term_ptr[t + 1]):
            prod *= sigma[term_vars[b]]
        total += prod
    return -2.0 * total


@njit(cache=True)
def polynomial_energy(sigma, coef, term_ptr, term_vars):
    e = 0.0
    for t in range(len(coef)):
        prod = coef[t]
        for b in range(term_ptr[t], term_ptr[t + 1]):
            prod *= sigma[term_vars[b]]
        e += prod
    return e


@njit(cache=True)
def metropolis_chains(states, betas, uniforms, coef, term_ptr, term_vars, var_ptr, var_terms):
    """Run chains in place. ``betas`` has one entry per sweep; ``uniforms`` is (chains, sweeps, n).

    Returns the best state seen per chain and its energy.
    """
    chains, n = states.shape
    sweeps = len(betas)
    best = states.copy()
    best_e = np.empty(chains)
    for c in range(chains):
        sigma = states[c]
        e = polynomial_energy(sigma, coef, term_ptr, term_vars)
        be = e
        for s in range(sweeps):
            beta = betas[s]
            for i in range(n):
                d = _flip_gain(i, sigma, coef, term_ptr, term_vars, var_ptr, var_terms)
                if d >= 0.0 or uniforms[c, s, i] < np.exp(beta * d):
                    sigma[i] = -sigma[i]
                    e += d
                    if e > be + 1e-12:
                        be = e
                        best[c, :] = sigma
        best_e[c] = be
    return best, best_e
