"""Classical phase-space arrival densities (Monte Carlo).

An ensemble of non-interacting classical particles with phase-space density
rho(x, p; t) crosses the point X from the left at the rate

    Pi_plus(t, X)  = integral_{p>0} dp (p/m)  rho(X, p; t)
    Pi_minus(t, X) = integral_{p<0} dp (|p|/m) rho(X, p; t)

(the positive / negative probability currents; no distinction between
first and later crossings, since the estimator reads the instantaneous
density).  Densities are reported unnormalised, matching the quantum side;
normalisation is a post-processing step.

rho(X, p; t) is estimated from samples with a Gaussian kernel in x of
width `bandwidth` (Silverman's rule on the x-marginal by default).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .propagator import DEFAULT_UNITS

__all__ = [
    "PhaseSpaceEnsemble",
    "ArrivalDensity",
    "StepSizeError",
    "sample_gaussian_ensemble",
    "evolve_ensemble",
    "arrival_density",
    "silverman_bandwidth",
]

_MAX_VERLET_STEPS = 1_000_000
_DRIFT_TOL = 1e-6


class StepSizeError(RuntimeError):
    """Velocity-Verlet could not reach the energy-drift bound."""


@dataclass
class PhaseSpaceEnsemble:
    """Equally weighted samples (x_i, p_i); seed recorded for reproducibility."""

    x: np.ndarray
    p: np.ndarray
    seed: int

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if x.shape != p.shape or x.ndim != 1 or x.size == 0:
            raise ValueError("ensemble needs matching non-empty 1-d x and p arrays")
        self.x = x
        self.p = p

    @property
    def n(self):
        return self.x.size

    @property
    def weight(self):
        return 1.0 / self.n

    @property
    def samples(self):
        return np.column_stack([self.x, self.p])


@dataclass(frozen=True)
class ArrivalDensity:
    """Arrival rates at one instant: pi_plus, pi_minus, net current j and the
    Monte Carlo standard error of pi_plus over 10 sample blocks."""

    pi_plus: float
    pi_minus: float
    j: float
    mc_error: float


def sample_gaussian_ensemble(x0, p0, sigma_x, sigma_p, n, seed):
    """n independent Gaussian phase-space draws; deterministic given seed.

    With sigma_p = hbar / (2 sigma_x) this reproduces the Wigner function of
    a minimum-uncertainty packet.  sigma = 0 is accepted as the point limit.
    """
    if sigma_x < 0 or sigma_p < 0:
        raise ValueError("widths must be non-negative")
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ValueError("n must be a positive integer")
    rng = np.random.default_rng(seed)
    x = x0 + sigma_x * rng.standard_normal(n)
    p = p0 + sigma_p * rng.standard_normal(n)
    return PhaseSpaceEnsemble(x, p, int(seed))


def _force_table(V):
    spline = CubicSpline(V.x, V.v, bc_type="not-a-knot")
    dv = spline.derivative()

    def force(x):
        if np.any(x < V.x[0]) or np.any(x > V.x[-1]):
            raise ValueError("trajectory left the tabulated potential domain")
        return -dv(x)

    return force


def _verlet(x, p, t, n_steps, force, m, energy=None, e0=None, e_scale=None):
    """Velocity-Verlet over n_steps.  When an energy callback is given, the
    relative drift is sampled at ~16 checkpoints along the way (the endpoint
    alone is blind to the oscillatory part of the Verlet energy error) and
    the maximum is returned."""
    h = t / n_steps
    x = x.copy()
    p = p.copy()
    f = force(x)
    check_every = max(1, n_steps // 16)
    drift = 0.0
    for step in range(n_steps):
        p_half = p + 0.5 * h * f
        x = x + h * p_half / m
        f = force(x)
        p = p_half + 0.5 * h * f
        if energy is not None and (step + 1) % check_every == 0:
            drift = max(drift, np.max(np.abs(energy(x, p) - e0) / e_scale))
    if energy is not None:
        drift = max(drift, np.max(np.abs(energy(x, p) - e0) / e_scale))
    return x, p, drift


def evolve_ensemble(ens, t, V=None, units=DEFAULT_UNITS):
    """Hamiltonian flow of every sample for time t.

    Free (or all-zero table): x -> x + p t / m exactly.  Otherwise
    velocity-Verlet with the step refined until the worst-sample relative
    energy drift is below 1e-6; StepSizeError if that needs more than 1e6
    steps.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    m = units.mass
    if t == 0 or V is None or V.is_zero:
        shift = 0.0 if t == 0 else t / m
        return PhaseSpaceEnsemble(ens.x + ens.p * shift, ens.p.copy(), ens.seed)

    force = _force_table(V)
    spline = CubicSpline(V.x, V.v, bc_type="not-a-knot")

    def energy(x, p):
        return p**2 / (2 * m) + spline(x)

    e0 = energy(ens.x, ens.p)
    e_scale = np.maximum(np.abs(e0), 1e-12)
    n_steps = max(16, int(np.ceil(t / 0.05)))
    while True:
        x, p, drift = _verlet(ens.x, ens.p, t, n_steps, force, m, energy, e0, e_scale)
        if drift < _DRIFT_TOL:
            return PhaseSpaceEnsemble(x, p, ens.seed)
        if n_steps >= _MAX_VERLET_STEPS:
            raise StepSizeError(
                f"energy drift {drift:.2e} still above {_DRIFT_TOL:g} "
                f"at {n_steps} steps"
            )
        n_steps = min(4 * n_steps, _MAX_VERLET_STEPS)


def silverman_bandwidth(x):
    """Silverman's rule on a sample: 0.9 min(std, IQR/1.34) n^(-1/5)."""
    n = len(x)
    std = np.std(x)
    q75, q25 = np.percentile(x, [75, 25])
    iqr = q75 - q25
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    h = 0.9 * spread * n ** (-0.2)
    if not h > 0:
        raise ValueError("degenerate sample: bandwidth must be given explicitly")
    return float(h)


def _kde_flux(x, p, X, h, m):
    kern = np.exp(-0.5 * ((x - X) / h) ** 2) / (h * np.sqrt(2 * np.pi))
    contrib = np.abs(p) / m * kern
    plus = contrib[p > 0]
    minus = contrib[p < 0]
    n = len(x)
    return plus.sum() / n, minus.sum() / n


def arrival_density(ens, X, t, V=None, bandwidth=None, units=DEFAULT_UNITS):
    """Kernel-density estimate of the arrival rates at X after evolving the
    ensemble to time t.  Samples contribute (|p|/m) K_h(x - X), split by
    momentum sign; mc_error is the standard error of pi_plus over 10
    consecutive sample blocks."""
    if ens.n == 0:
        raise ValueError("empty ensemble")
    evolved = evolve_ensemble(ens, t, V, units)
    x, p = evolved.x, evolved.p
    if bandwidth is None:
        h = silverman_bandwidth(x)
    else:
        if not bandwidth > 0:
            raise ValueError("bandwidth must be strictly positive")
        h = float(bandwidth)

    plus, minus = _kde_flux(x, p, X, h, units.mass)

    n_blocks = min(10, ens.n)
    block_vals = []
    for chunk_x, chunk_p in zip(np.array_split(x, n_blocks), np.array_split(p, n_blocks)):
        bp, _ = _kde_flux(chunk_x, chunk_p, X, h, units.mass)
        block_vals.append(bp)
    block_vals = np.asarray(block_vals)
    if n_blocks > 1:
        mc_err = float(np.std(block_vals, ddof=1) / np.sqrt(n_blocks))
    else:
        mc_err = 0.0
    return ArrivalDensity(float(plus), float(minus), float(plus - minus), mc_err)
