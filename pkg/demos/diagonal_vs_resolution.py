"""Resolution-time dependence of the diagonal arrival element.

At p = 1 (hbar = m = 1) the real part of <p|Pi_plus|p> diverges like
1/sqrt(dt) for small resolution times and settles on the classical value
p/m = 1 once dt exceeds hbar/E_k = 2: the weak protocol cannot resolve
arrivals sharper than hbar over the kinetic energy.
"""

import numpy as np

from weakarrival import ArrivalConfig, pi_plus_diagonal

p = 1.0
dts = np.geomspace(0.01, 30.0, 301)
vals = np.array([pi_plus_diagonal(p, ArrivalConfig(0.0, float(dt))) for dt in dts])

# small-dt divergence: fit the 1/sqrt law deep in its regime
small = np.geomspace(1e-6, 1e-4, 9)
mags = np.array([abs(pi_plus_diagonal(p, ArrivalConfig(0.0, float(dt)))) for dt in small])
slope = np.polyfit(np.log(small), np.log(mags), 1)[0]
print(f"log-log slope of |<p|Pi+|p>| for dt in [1e-6, 1e-4]: {slope:.4f}  (expect -0.5)")
print(f"|<p|Pi+|p>| sqrt(dt) at dt=1e-6: {mags[0]*np.sqrt(small[0]):.6f}"
      f"  (limit 1/sqrt(2 pi) = {1/np.sqrt(2*np.pi):.6f})")

for dt in (0.01, 0.1, 1.0, 2.0, 10.0, 20.0, 30.0):
    v = pi_plus_diagonal(p, ArrivalConfig(0.0, dt))
    marker = "  <- dt = hbar/E_k" if dt == 2.0 else ""
    print(f"dt = {dt:6.2f}: Re = {v.real:8.4f}  Im = {v.imag:+8.4f}{marker}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.semilogx(dts, vals.real, label="Re <p|Pi+|p>")
    ax.semilogx(dts, vals.imag, label="Im <p|Pi+|p>")
    ax.axhline(1.0, color="k", ls="--", lw=1, label="classical p/m")
    ax.axvline(2.0, color="gray", ls=":", lw=1, label="hbar/E_k")
    ax.set_xlabel("resolution time dt")
    ax.legend()
    fig.tight_layout()
    fig.savefig("diagonal_vs_resolution.png", dpi=150)
    print("saved diagonal_vs_resolution.png")
except ImportError:
    pass
