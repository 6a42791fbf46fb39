"""Diagonal arrival-operator elements across momentum.

Sweeps <p|Pi_plus|p> for hbar = m = dt = 1 and compares with the classical
positive current max(p, 0)/m: the real part hugs the classical value for
fast right-movers, dies off for left-movers, and keeps a finite quantum
floor ~0.28 at p = 0 set by the resolution time.  Saves a plot next to the
script when matplotlib is available.
"""

import numpy as np

from weakarrival import ArrivalConfig, pi_plus_diagonal

cfg = ArrivalConfig(X=0.0, dt=1.0)
p = np.linspace(-4.0, 10.0, 1401)
vals = pi_plus_diagonal(p, cfg)
classical = np.maximum(p, 0.0)

print("      p        Re<Pi+>      Im<Pi+>    classical")
for pi in (-4.0, -2.0, 0.0, 1.0, 2.0, 4.0, 8.0, 10.0):
    v = pi_plus_diagonal(pi, cfg)
    print(f"{pi:7.2f}   {v.real:10.5f}   {v.imag:10.5f}   {max(pi, 0.0):9.2f}")

print(f"\nquantum floor at p=0: {pi_plus_diagonal(0.0, cfg).real:.5f}"
      f"  (= 1/sqrt(2 pi dt) / sqrt(2))")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(p, vals.real, label="Re <p|Pi+|p>")
    ax1.plot(p, classical, "k--", label="classical max(p,0)/m")
    ax1.set_ylabel("Re")
    ax1.legend()
    ax2.plot(p, vals.imag, color="tab:orange")
    ax2.set_ylabel("Im")
    ax2.set_xlabel("p")
    fig.tight_layout()
    fig.savefig("diagonal_vs_momentum.png", dpi=150)
    print("saved diagonal_vs_momentum.png")
except ImportError:
    pass
