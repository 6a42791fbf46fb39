"""Grids, wavefunctions and one-dimensional propagation.

Conventions
-----------
* Position grid: n (a power of two) uniform nodes x_j = x_min + j*dx with
  dx = (x_max - x_min)/n; the right endpoint is excluded (FFT periodicity).
* Momentum states are delta-normalised as <p1|p2> = 2*pi*hbar*delta(p1-p2),
  so the momentum-space wavefunction is phi(p) = integral dx e^{-ipx/hbar}
  psi(x) and norms read sum |psi|^2 dx = sum |phi|^2 dp / (2*pi*hbar) = 1.
* The momentum grid is the exact Fourier dual of the position grid:
  dp = 2*pi*hbar/(n*dx), nodes stored in ascending order.
* sqrt(i) = exp(i*pi/4) everywhere (see specfun.SQRT_I).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .specfun import SQRT_I

__all__ = [
    "SimulationUnits",
    "DEFAULT_UNITS",
    "PositionGrid",
    "MomentumGrid",
    "GridWavefunction",
    "GaussianPacket",
    "PotentialSpec",
    "BoundaryLeakageWarning",
    "free_propagator_kernel",
    "evolve_free",
    "evolve_potential",
    "project_region",
    "region_weights",
    "to_momentum",
    "to_position",
    "auto_position_grid",
]

_NORM_TOL = 1e-9


class BoundaryLeakageWarning(UserWarning):
    """Wavepacket amplitude reached the edge of the simulation box."""


@dataclass(frozen=True)
class SimulationUnits:
    """Carries hbar and the particle mass m (defaults 1, 1)."""

    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and np.isfinite(self.hbar)):
            raise ValueError("hbar must be strictly positive and finite")
        if not (self.mass > 0 and np.isfinite(self.mass)):
            raise ValueError("mass must be strictly positive and finite")


DEFAULT_UNITS = SimulationUnits()


def _check_pow2(n):
    if not (isinstance(n, (int, np.integer)) and n >= 2 and (n & (n - 1)) == 0):
        raise ValueError(f"grid size must be a power of two >= 2, got {n!r}")


@dataclass(frozen=True)
class PositionGrid:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        _check_pow2(self.n)
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.n

    def nodes(self):
        return self.x_min + self.dx * np.arange(self.n)

    def momentum_dual(self, units=DEFAULT_UNITS):
        dp = 2 * np.pi * units.hbar / (self.n * self.dx)
        p_min = -(self.n // 2) * dp
        return MomentumGrid(p_min, p_min + self.n * dp, self.n)


@dataclass(frozen=True)
class MomentumGrid:
    """Fourier dual of a position grid; nodes ascend from p_min, step dp."""

    p_min: float
    p_max: float
    n: int

    def __post_init__(self):
        _check_pow2(self.n)
        if not self.p_max > self.p_min:
            raise ValueError("p_max must exceed p_min")

    @property
    def dp(self):
        return (self.p_max - self.p_min) / self.n

    def nodes(self):
        return self.p_min + self.dp * np.arange(self.n)


@dataclass
class GridWavefunction:
    """Complex amplitudes sampled on a grid, in position or momentum form.

    `grid` is always the defining PositionGrid; in the "momentum"
    representation the amplitudes live on grid.momentum_dual(units).nodes()
    (ascending order), which keeps the two representations tied to one
    exactly dual pair.
    """

    grid: PositionGrid
    amplitudes: np.ndarray
    representation: str = "position"

    def __post_init__(self):
        if self.representation not in ("position", "momentum"):
            raise ValueError(f"bad representation {self.representation!r}")
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.grid.n,):
            raise ValueError("amplitude array does not match grid size")
        self.amplitudes = amps

    def norm(self, units=DEFAULT_UNITS):
        a2 = np.sum(np.abs(self.amplitudes) ** 2)
        if self.representation == "position":
            return float(np.sqrt(a2 * self.grid.dx))
        dp = self.grid.momentum_dual(units).dp
        return float(np.sqrt(a2 * dp / (2 * np.pi * units.hbar)))

    def momentum_nodes(self, units=DEFAULT_UNITS):
        return self.grid.momentum_dual(units).nodes()

    def copy(self):
        return GridWavefunction(self.grid, self.amplitudes.copy(), self.representation)


def _require_norm(psi, units, where):
    err = abs(psi.norm(units) - 1.0)
    if err > _NORM_TOL:
        raise ValueError(f"{where}: wavefunction norm off by {err:.3e} (> {_NORM_TOL:g})")


def to_momentum(psi, units=DEFAULT_UNITS):
    """Exact discrete Fourier transform position -> momentum representation."""
    if psi.representation == "momentum":
        return psi.copy()
    g = psi.grid
    x0 = g.x_min
    p_fft = 2 * np.pi * units.hbar * np.fft.fftfreq(g.n, d=g.dx)
    phi_fft = g.dx * np.exp(-1j * p_fft * x0 / units.hbar) * np.fft.fft(psi.amplitudes)
    return GridWavefunction(g, np.fft.fftshift(phi_fft), "momentum")


def to_position(psi, units=DEFAULT_UNITS):
    """Inverse of to_momentum; the round trip is the identity to ~1e-15."""
    if psi.representation == "position":
        return psi.copy()
    g = psi.grid
    x0 = g.x_min
    p_fft = 2 * np.pi * units.hbar * np.fft.fftfreq(g.n, d=g.dx)
    phi_fft = np.fft.ifftshift(psi.amplitudes)
    amps = np.fft.ifft(np.exp(1j * p_fft * x0 / units.hbar) * phi_fft) / g.dx
    return GridWavefunction(g, amps, "position")


@dataclass(frozen=True)
class GaussianPacket:
    """Minimum-uncertainty packet: centre x0, mean momentum p0, width sigma_x.

    psi(x) = (2 pi sigma_x^2)^(-1/4) exp(-(x-x0)^2/(4 sigma_x^2) + i p0 x/hbar)
    """

    x0: float
    p0: float
    sigma_x: float

    def __post_init__(self):
        if not (self.sigma_x > 0 and np.isfinite(self.sigma_x)):
            raise ValueError("sigma_x must be strictly positive")

    def sigma_p(self, units=DEFAULT_UNITS):
        return units.hbar / (2 * self.sigma_x)

    def sample_position(self, grid, units=DEFAULT_UNITS):
        x = grid.nodes()
        amps = np.exp(
            -((x - self.x0) ** 2) / (4 * self.sigma_x**2)
            + 1j * self.p0 * x / units.hbar
        )
        amps /= (2 * np.pi * self.sigma_x**2) ** 0.25
        raw = np.sqrt(np.sum(np.abs(amps) ** 2) * grid.dx)
        if abs(raw - 1.0) > 1e-2:
            raise ValueError(
                f"grid truncates the packet badly (discrete norm {raw:.4f}); "
                "use a span of at least 8 sigma_x around x0"
            )
        return GridWavefunction(grid, amps / raw, "position")

    def sample_momentum(self, grid, units=DEFAULT_UNITS):
        """Analytic momentum-space sampling on the dual grid (no FFT)."""
        p = grid.momentum_dual(units).nodes()
        hbar = units.hbar
        amps = np.exp(
            -(self.sigma_x**2) * (p - self.p0) ** 2 / hbar**2
            - 1j * (p - self.p0) * self.x0 / hbar
        ).astype(np.complex128)
        dp = grid.momentum_dual(units).dp
        raw = np.sqrt(np.sum(np.abs(amps) ** 2) * dp / (2 * np.pi * hbar))
        if raw == 0 or abs(np.log(raw)) > 5:
            raise ValueError("momentum grid misses the packet support")
        return GridWavefunction(grid, amps / raw, "momentum")


@dataclass(frozen=True)
class PotentialSpec:
    """Potential energy tabulated per grid node; an all-zero table is free."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.shape != v.shape or x.ndim != 1 or x.size < 2:
            raise ValueError("potential table needs matching 1-d x and v arrays")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("potential table must be finite everywhere")
        if np.any(np.diff(x) <= 0):
            raise ValueError("potential nodes must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def is_zero(self):
        return bool(np.all(self.v == 0.0))

    @classmethod
    def zero(cls, grid):
        x = grid.nodes()
        return cls(x, np.zeros_like(x))

    @classmethod
    def harmonic(cls, grid, k, center=0.0):
        x = grid.nodes()
        return cls(x, 0.5 * k * (x - center) ** 2)

    def on_grid(self, grid):
        x = grid.nodes()
        if self.x.shape == x.shape and np.allclose(self.x, x, rtol=0, atol=1e-9 * grid.dx):
            return self.v
        raise ValueError("potential table is not sampled on this grid")


def free_propagator_kernel(x1, x2, t, units=DEFAULT_UNITS, dagger=False):
    """Free-particle kernel <x1|U(t)|x2> = sqrt(m/(2 pi i hbar t)) *
    exp(i m (x1-x2)^2 / (2 hbar t)), branch sqrt(i) = exp(i pi/4).

    ``dagger=True`` returns <x1|U(t)^dag|x2> (the complex conjugate; the
    kernel is symmetric in x1 <-> x2).  t = 0 is rejected: callers use the
    identity path instead of a delta approximation.
    """
    if t == 0:
        raise ValueError("free_propagator_kernel is singular at t = 0")
    hbar, m = units.hbar, units.mass
    branch = np.conj(SQRT_I) if t > 0 else SQRT_I
    pref = np.sqrt(m / (2 * np.pi * hbar * abs(t))) * branch
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    out = pref * np.exp(1j * m * (x1 - x2) ** 2 / (2 * hbar * t))
    if dagger:
        out = np.conj(out)
    if out.ndim == 0:
        return complex(out)
    return out


def evolve_free(psi, t, units=DEFAULT_UNITS):
    """Free evolution in the momentum representation: phi *= exp(-i p^2 t / 2 m hbar)."""
    if psi.representation != "momentum":
        raise ValueError("evolve_free expects a momentum-representation wavefunction")
    p = psi.momentum_nodes(units)
    amps = psi.amplitudes * np.exp(-1j * p**2 * t / (2 * units.mass * units.hbar))
    return GridWavefunction(psi.grid, amps, "momentum")


def _kinetic_fft_phase(grid, t, units):
    p_fft = 2 * np.pi * units.hbar * np.fft.fftfreq(grid.n, d=grid.dx)
    return np.exp(-1j * p_fft**2 * t / (2 * units.mass * units.hbar))


def evolve_potential(psi, V, t, steps, units=DEFAULT_UNITS):
    """Strang split-operator evolution under a tabulated potential.

    Second order accurate in t/steps; exactly unitary up to FFT roundoff.
    Warns with BoundaryLeakageWarning if the edge amplitude ever exceeds
    1e-4 (the box is then too small for the run).
    """
    if psi.representation != "position":
        raise ValueError("evolve_potential expects a position-representation wavefunction")
    if not (isinstance(steps, (int, np.integer)) and steps >= 1):
        raise ValueError("steps must be a positive integer")
    v = V.on_grid(psi.grid)
    if t == 0:
        return psi.copy()
    h = t / steps
    half_v = np.exp(-0.5j * v * h / units.hbar)
    kin = _kinetic_fft_phase(psi.grid, h, units)
    amps = psi.amplitudes.copy()
    norm0 = np.sqrt(np.sum(np.abs(amps) ** 2))
    leaked = False
    for _ in range(steps):
        amps *= half_v
        amps = np.fft.ifft(kin * np.fft.fft(amps))
        amps *= half_v
        if not leaked and max(abs(amps[0]), abs(amps[-1])) > 1e-4:
            warnings.warn(
                "edge amplitude exceeded 1e-4 during split-operator evolution",
                BoundaryLeakageWarning,
            )
            leaked = True
    drift = abs(np.sqrt(np.sum(np.abs(amps) ** 2)) / norm0 - 1.0)
    if drift > _NORM_TOL:
        raise RuntimeError(f"split-operator norm drift {drift:.3e} exceeds {_NORM_TOL:g}")
    return GridWavefunction(psi.grid, amps, "position")


def region_weights(grid, X, side):
    """Diagonal weights of the sharp region projector for {x < X} or {x > X}.

    Nodes strictly inside the region get weight 1, outside 0.  A node that
    coincides with X (within 1e-12 of a grid spacing) gets weight 1/2 on
    both sides, which keeps left + right = identity exact and the pair
    symmetric under reflection about X.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if not (grid.x_min < X < grid.x_max):
        raise ValueError("X must lie strictly inside the grid")
    x = grid.nodes()
    tol = 1e-12 * max(grid.dx, abs(X), 1.0)
    w = np.where(x < X, 1.0, 0.0)
    w[np.abs(x - X) <= tol] = 0.5
    if side == "right":
        w = 1.0 - w
    return w


def project_region(psi, X, side):
    """Multiply the amplitudes by the sharp region mask (see region_weights)."""
    if psi.representation != "position":
        raise ValueError("project_region expects a position-representation wavefunction")
    w = region_weights(psi.grid, X, side)
    return GridWavefunction(psi.grid, psi.amplitudes * w, "position")


def auto_position_grid(packet, t_max, units=DEFAULT_UNITS, n=4096, X=None):
    """Box an experiment: centre on the packet, half-width
    max(8 sigma_x, 4 |p0| t_max / m), extended if needed so the arrival
    point X stays strictly interior."""
    half = max(8 * packet.sigma_x, 4 * abs(packet.p0) * t_max / units.mass)
    lo = packet.x0 - half
    hi = packet.x0 + half
    if X is not None:
        pad = max(8 * packet.sigma_x, 0.05 * (hi - lo))
        lo = min(lo, X - pad)
        hi = max(hi, X + pad)
    return PositionGrid(lo, hi, n)
