"""Command-line front end.

Four subcommands stream CSV (comment line, header, then rows; 17
significant digits, LF line endings, byte-reproducible for a fixed config
and seed):

    diag      momentum dependence of the diagonal arrival element
    diag-dt   resolution-time dependence at fixed momentum
    expect    complex arrival density vs time, with the classical
              Monte Carlo reference on a Wigner-matched ensemble
    simulate  full weak-measurement protocol vs the first-order prediction

Configuration is a flat ``section.key = value`` text file; unknown keys are
hard errors.  Exit codes: 0 success, 2 config error, 3 numerical failure,
4 postselection/coupling degeneracy.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .arrival_op import (
    ArrivalConfig,
    expectation_pi,
    expectation_pi_grid,
    pi_plus_diagonal,
)
from .classical_oracle import arrival_density, sample_gaussian_ensemble
from .propagator import (
    GaussianPacket,
    PositionGrid,
    PotentialSpec,
    SimulationUnits,
    auto_position_grid,
    evolve_free,
    to_position,
)
from .weak_meas_sim import (
    CouplingConfig,
    DegenerateCouplingError,
    PostselectionError,
    apply_interaction,
    detector_coefficient,
    gaussian_detector,
    postselect,
    prepare_joint,
)

__all__ = ["ConfigError", "NumericalFailure", "ExperimentConfig", "parse_config", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_DEGENERATE = 4


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved run parameters (one flat record; see _SCHEMA for defaults)."""

    packet_x0: float = -10.0
    packet_p0: float = 2.0
    packet_sigma_x: float = 1.0
    arrival_X: float = 0.0
    arrival_dt: float = 1.0
    coupling_lambda: float = 0.01
    coupling_tau: float = 1.0
    detector_sigma_q: float = 1.0
    detector_chirp: float = 0.0
    grid_x_min: float = float("nan")  # nan -> auto-sized box
    grid_x_max: float = float("nan")
    grid_x_n: int = 1024
    grid_q_min: float = -8.0
    grid_q_max: float = 8.0
    grid_q_n: int = 512
    potential_kind: str = "none"
    potential_k: float = 1.0
    potential_file: str = ""
    times_start: float = 0.0
    times_stop: float = 10.0
    times_step: float = 0.25
    units_hbar: float = 1.0
    units_mass: float = 1.0
    seed: int = 12345
    classical_samples: int = 200000
    classical_bandwidth: float = 0.0  # 0 -> Silverman's rule
    diag_p_min: float = -4.0
    diag_p_max: float = 10.0
    diag_points: int = 1401
    diagdt_dt_min: float = 0.01
    diagdt_dt_max: float = 30.0
    diagdt_points: int = 301
    diagdt_p: float = 1.0


def _cast_float(s):
    return float(s)


def _cast_float_or_auto(s):
    if s.strip().lower() == "auto":
        return float("nan")
    return float(s)


def _cast_int(s):
    return int(s, 0)


def _cast_str(s):
    return s


# config key -> (ExperimentConfig field, caster)
_SCHEMA = {
    "packet.x0": ("packet_x0", _cast_float),
    "packet.p0": ("packet_p0", _cast_float),
    "packet.sigma_x": ("packet_sigma_x", _cast_float),
    "arrival.X": ("arrival_X", _cast_float),
    "arrival.dt": ("arrival_dt", _cast_float),
    "coupling.lambda": ("coupling_lambda", _cast_float),
    "coupling.tau": ("coupling_tau", _cast_float),
    "detector.sigma_q": ("detector_sigma_q", _cast_float),
    "detector.chirp": ("detector_chirp", _cast_float),
    "grid.x.min": ("grid_x_min", _cast_float_or_auto),
    "grid.x.max": ("grid_x_max", _cast_float_or_auto),
    "grid.x.n": ("grid_x_n", _cast_int),
    "grid.q.min": ("grid_q_min", _cast_float),
    "grid.q.max": ("grid_q_max", _cast_float),
    "grid.q.n": ("grid_q_n", _cast_int),
    "potential.kind": ("potential_kind", _cast_str),
    "potential.k": ("potential_k", _cast_float),
    "potential.file": ("potential_file", _cast_str),
    "times.start": ("times_start", _cast_float),
    "times.stop": ("times_stop", _cast_float),
    "times.step": ("times_step", _cast_float),
    "units.hbar": ("units_hbar", _cast_float),
    "units.mass": ("units_mass", _cast_float),
    "seed": ("seed", _cast_int),
    "classical.samples": ("classical_samples", _cast_int),
    "classical.bandwidth": ("classical_bandwidth", _cast_float),
    "diag.p_min": ("diag_p_min", _cast_float),
    "diag.p_max": ("diag_p_max", _cast_float),
    "diag.points": ("diag_points", _cast_int),
    "diagdt.dt_min": ("diagdt_dt_min", _cast_float),
    "diagdt.dt_max": ("diagdt_dt_max", _cast_float),
    "diagdt.points": ("diagdt_points", _cast_int),
    "diagdt.p": ("diagdt_p", _cast_float),
}


def parse_config(text):
    """Parse flat ``key = value`` text into an ExperimentConfig.

    Blank lines and ``#`` comments are ignored; unknown keys, bad values and
    malformed lines raise ConfigError with the offending line number.
    """
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        field_name, caster = _SCHEMA[key]
        try:
            overrides[field_name] = caster(value)
        except ValueError as exc:
            raise ConfigError(
                f"line {lineno}: key {key!r}: cannot parse value {value!r}"
            ) from exc
    cfg = ExperimentConfig(**overrides)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg):
    def bad(msg):
        raise ConfigError(msg)

    for name, n in (("grid.x.n", cfg.grid_x_n), ("grid.q.n", cfg.grid_q_n)):
        if n < 2 or (n & (n - 1)) != 0:
            bad(f"key {name!r}: grid size must be a power of two, got {n}")
    if not cfg.arrival_dt > 0:
        bad("key 'arrival.dt': resolution time must be > 0")
    if not cfg.times_step > 0:
        bad("key 'times.step': must be > 0")
    if cfg.times_stop < cfg.times_start:
        bad("key 'times.stop': must be >= times.start")
    if not cfg.packet_sigma_x > 0:
        bad("key 'packet.sigma_x': must be > 0")
    if not cfg.detector_sigma_q > 0:
        bad("key 'detector.sigma_q': must be > 0")
    if cfg.potential_kind not in ("none", "harmonic", "table"):
        bad(f"key 'potential.kind': must be none|harmonic|table, got {cfg.potential_kind!r}")
    if cfg.potential_kind == "table" and not cfg.potential_file:
        bad("key 'potential.file': required for potential.kind = table")
    if not (cfg.units_hbar > 0 and cfg.units_mass > 0):
        bad("keys 'units.*': hbar and mass must be > 0")
    if cfg.classical_samples < 10:
        bad("key 'classical.samples': need at least 10 samples")
    for name, pts in (("diag.points", cfg.diag_points), ("diagdt.points", cfg.diagdt_points)):
        if pts < 2:
            bad(f"key {name!r}: need at least 2 points")
    if not (cfg.diagdt_dt_min > 0 and cfg.diagdt_dt_max > cfg.diagdt_dt_min):
        bad("keys 'diagdt.dt_min/dt_max': need 0 < dt_min < dt_max")


def config_hash(cfg):
    parts = []
    for f in sorted(fields(cfg), key=lambda f: f.name):
        v = getattr(cfg, f.name)
        if isinstance(v, float):
            parts.append(f"{f.name}={v:.17g}")
        else:
            parts.append(f"{f.name}={v}")
    return hashlib.sha256("\n".join(parts).encode()).hexdigest()[:12]


def _units(cfg):
    return SimulationUnits(hbar=cfg.units_hbar, mass=cfg.units_mass)


def _packet(cfg):
    return GaussianPacket(cfg.packet_x0, cfg.packet_p0, cfg.packet_sigma_x)


def _x_grid(cfg):
    if np.isnan(cfg.grid_x_min) or np.isnan(cfg.grid_x_max):
        return auto_position_grid(
            _packet(cfg),
            max(cfg.times_stop, cfg.arrival_dt),
            _units(cfg),
            n=cfg.grid_x_n,
            X=cfg.arrival_X,
        )
    return PositionGrid(cfg.grid_x_min, cfg.grid_x_max, cfg.grid_x_n)


def _q_grid(cfg):
    return PositionGrid(cfg.grid_q_min, cfg.grid_q_max, cfg.grid_q_n)


def _potential(cfg, grid):
    if cfg.potential_kind == "none":
        return None
    if cfg.potential_kind == "harmonic":
        return PotentialSpec.harmonic(grid, cfg.potential_k)
    try:
        table = np.loadtxt(cfg.potential_file, delimiter=None)
    except OSError as exc:
        raise ConfigError(f"key 'potential.file': cannot read {cfg.potential_file!r}") from exc
    if table.ndim != 2 or table.shape[1] < 2:
        raise ConfigError("key 'potential.file': expected two columns (x, V)")
    x = grid.nodes()
    v = np.interp(x, table[:, 0], table[:, 1])
    return PotentialSpec(x, v)


def _times(cfg):
    n = int(np.floor((cfg.times_stop - cfg.times_start) / cfg.times_step + 1e-9)) + 1
    return cfg.times_start + cfg.times_step * np.arange(n)


def _prediction_grid(cfg, grid):
    # The closed-form expectation integrates over the momentum grid, whose
    # spacing dp = 2 pi hbar / span must resolve the evolved state's phase,
    # d arg/dp ~ |x0 + p t|.  Widen the span (at constant dx, so the
    # momentum range is untouched) until the worst phase step over the
    # sweep stays below ~0.3 rad; the joint-simulation box keeps grid.n.
    u = _units(cfg)
    pk = _packet(cfg)
    sigma_p = pk.sigma_p(u)
    p_lo = pk.p0 - 5 * sigma_p
    p_hi = pk.p0 + 5 * sigma_p
    grad = max(
        abs(pk.x0 + p * t / u.mass)
        for p in (p_lo, p_hi)
        for t in (cfg.times_start, max(cfg.times_stop, cfg.arrival_dt))
    ) + 8 * pk.sigma_x
    span_needed = 2 * np.pi * u.hbar * grad / 0.3
    span = grid.x_max - grid.x_min
    factor = 1
    while factor * span < span_needed and factor < 32:
        factor *= 2
    center = 0.5 * (grid.x_min + grid.x_max)
    half = 0.5 * factor * span
    return PositionGrid(center - half, center + half, grid.n * factor)


def _free_density_evaluator(cfg, grid, ts):
    """Pick the Pi_plus evaluation route once per run for the free case.

    Closed-form momentum quadrature when the refined dual grid resolves the
    evolved phases at every sweep time; otherwise exact FFT composition of
    the projectors and propagators on the config grid (dp-independent).
    Returns a callable t -> ComplexArrivalResult.
    """
    from .arrival_op import _support_slice, momentum_phase_step

    u = _units(cfg)
    pk = _packet(cfg)
    acfg = _arrival(cfg)
    fine = _prediction_grid(cfg, grid)
    phi0 = pk.sample_momentum(fine, u)
    sl = _support_slice(phi0.amplitudes)
    support = sl.stop - sl.start
    worst = max(momentum_phase_step(evolve_free(phi0, t, u)) for t in ts) if len(ts) else 0.0
    if worst <= 0.45 and support <= 4096:
        return lambda t: expectation_pi(evolve_free(phi0, t, u), acfg)
    phi0_box = pk.sample_momentum(grid, u)

    def grid_route(t):
        psi_t = to_position(evolve_free(phi0_box, t, u), u)
        return expectation_pi_grid(psi_t, acfg)

    return grid_route


def _arrival(cfg):
    return ArrivalConfig(cfg.arrival_X, cfg.arrival_dt, _units(cfg))


def _fmt(x):
    return f"{x:.17g}"


def _emit(stream, cfg, command, header, rows):
    stream.write(
        f"# weakarrival {__version__} | command={command} | "
        f"hbar={_fmt(cfg.units_hbar)} mass={_fmt(cfg.units_mass)} | "
        f"config=sha256:{config_hash(cfg)}\n"
    )
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(row) + "\n")


def _check_finite(values, context):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericalFailure(f"non-finite value produced in {context}")


# ---------------------------------------------------------------- diag

def run_diag(cfg, stream):
    acfg = _arrival(cfg)
    p = np.linspace(cfg.diag_p_min, cfg.diag_p_max, cfg.diag_points)
    vals = pi_plus_diagonal(p, acfg)
    classical = np.maximum(p, 0.0) / cfg.units_mass
    _check_finite(vals.view(float), "diag")
    rows = (
        [_fmt(pi), _fmt(v.real), _fmt(v.imag), _fmt(c)]
        for pi, v, c in zip(p, vals, classical)
    )
    _emit(stream, cfg, "diag", ["p", "re", "im", "classical"], rows)


# ---------------------------------------------------------------- diag-dt

def run_diag_dt(cfg, stream):
    u = _units(cfg)
    dts = np.geomspace(cfg.diagdt_dt_min, cfg.diagdt_dt_max, cfg.diagdt_points)
    p = cfg.diagdt_p
    classical = p / u.mass
    rows = []
    for dt in dts:
        v = pi_plus_diagonal(p, ArrivalConfig(cfg.arrival_X, float(dt), u))
        _check_finite([v.real, v.imag], "diag-dt")
        rows.append([_fmt(dt), _fmt(v.real), _fmt(v.imag), _fmt(classical)])
    _emit(stream, cfg, "diag-dt", ["dt", "re", "im", "classical"], rows)


# ---------------------------------------------------------------- expect

def _expect_chunk(args):
    cfg, ts = args
    u = _units(cfg)
    acfg = _arrival(cfg)
    grid = _x_grid(cfg)
    pk = _packet(cfg)
    V = _potential(cfg, grid)
    det = gaussian_detector(_q_grid(cfg), cfg.detector_sigma_q, chirp=cfg.detector_chirp, units=u)
    coeff = detector_coefficient(det)
    ens = sample_gaussian_ensemble(
        pk.x0, pk.p0, pk.sigma_x, pk.sigma_p(u), cfg.classical_samples, cfg.seed
    )
    bw = cfg.classical_bandwidth if cfg.classical_bandwidth > 0 else None
    free = V is None or V.is_zero
    if free:
        density = _free_density_evaluator(cfg, grid, ts)
    else:
        from .propagator import evolve_potential

        psi0 = pk.sample_position(grid, u)

        def density(t):
            steps = max(64, int(np.ceil(abs(t) / 0.01))) if t else 1
            psi_t = evolve_potential(psi0, V, t, steps, u) if t else psi0
            return expectation_pi_grid(psi_t, acfg, V)

    rows = []
    for t in ts:
        res = density(t)
        w12 = res.pi1 * acfg.dt - (2 * acfg.dt / u.hbar) * coeff * res.pi2
        cl = arrival_density(ens, acfg.X, t, V, bw, u)
        rows.append([t, res.pi1, res.pi2, w12, cl.pi_plus, cl.mc_error])
    return rows


def run_expect(cfg, stream, normalize=None, jobs=1):
    ts = _times(cfg)
    raw = _parallel_rows(_expect_chunk, cfg, ts, jobs)
    raw = np.asarray(raw, dtype=float)
    _check_finite(raw, "expect")
    if normalize is not None:
        a, b = normalize
        sel = (raw[:, 0] >= a) & (raw[:, 0] <= b)
        if sel.sum() < 2:
            raise NumericalFailure("normalization window contains fewer than 2 rows")
        t_win = raw[sel, 0]
        for col in (1, 4):
            integral = np.trapezoid(raw[sel, col], t_win)
            if not integral > 0:
                raise NumericalFailure(
                    f"normalization window integral of column {col} is not positive"
                )
            raw[:, col] /= integral
            if col == 4:
                raw[:, 5] /= integral
    rows = ([_fmt(v) for v in row] for row in raw)
    _emit(
        stream,
        cfg,
        "expect",
        ["t", "pi1", "pi2", "w12_predicted", "classical_pi_plus", "classical_err"],
        rows,
    )


# ---------------------------------------------------------------- simulate

def _simulate_chunk(args):
    cfg, ts = args
    u = _units(cfg)
    acfg = _arrival(cfg)
    grid = _x_grid(cfg)
    pk = _packet(cfg)
    V = _potential(cfg, grid)
    det = gaussian_detector(_q_grid(cfg), cfg.detector_sigma_q, chirp=cfg.detector_chirp, units=u)
    coeff = detector_coefficient(det)
    cc = CouplingConfig(cfg.coupling_lambda, cfg.coupling_tau)
    ratio = cc.weakness_ratio(cfg.detector_sigma_q, u)
    free = V is None or V.is_zero
    phi0 = pk.sample_momentum(grid, u)
    if free:
        density = _free_density_evaluator(cfg, grid, ts)
    rows = []
    for t in ts:
        phi_t = evolve_free(phi0, t, u)
        psi_t = to_position(phi_t, u)
        if free:
            res = density(t)
        else:
            res = expectation_pi_grid(psi_t, acfg, V)
        w12_pred = res.pi1 * acfg.dt - (2 * acfg.dt / u.hbar) * coeff * res.pi2
        js = apply_interaction(prepare_joint(psi_t, det), acfg, cc)
        try:
            out = postselect(js, acfg, V=V)
            rows.append(
                (t, out.w2, out.w1, out.w1_given_2, out.w12, w12_pred, ratio, "")
            )
        except PostselectionError as exc:
            rows.append((t, exc.w2, exc.w1, None, None, w12_pred, ratio, "degenerate"))
    return rows


def run_simulate(cfg, stream, jobs=1):
    if cfg.coupling_lambda * cfg.coupling_tau == 0:
        raise DegenerateCouplingError(
            "coupling.lambda * coupling.tau = 0: weak values undefined"
        )
    ts = _times(cfg)
    raw = _parallel_rows(_simulate_chunk, cfg, ts, jobs)
    ok = [r for r in raw if r[7] == ""]
    if not ok:
        raise DegenerateCouplingError("postselection failed at every requested time")
    for r in ok:
        _check_finite([r[1], r[2], r[3], r[4], r[5]], "simulate")
    max_dev = max(abs(r[4] - r[5]) for r in ok)

    def fmt_row(r):
        cells = [_fmt(r[0]), _fmt(r[1]), _fmt(r[2])]
        cells.append("" if r[3] is None else _fmt(r[3]))
        cells.append("" if r[4] is None else _fmt(r[4]))
        cells.extend([_fmt(r[5]), _fmt(r[6]), r[7]])
        return cells

    _emit(
        stream,
        cfg,
        "simulate",
        ["t", "w2", "w1", "w1_given_2", "w12_sim", "w12_predicted", "weakness_ratio", "flag"],
        (fmt_row(r) for r in raw),
    )
    print(f"simulate: max |w12_sim - w12_predicted| = {max_dev:.3e}", file=sys.stderr)


# ---------------------------------------------------------------- plumbing

def _parallel_rows(worker, cfg, ts, jobs):
    ts = list(ts)
    if jobs <= 1 or len(ts) <= 1:
        return worker((cfg, ts))
    chunks = [c.tolist() for c in np.array_split(np.asarray(ts), min(jobs, len(ts)))]
    rows = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(worker, [(cfg, c) for c in chunks]):
            rows.extend(part)
    return rows


def _load_config(path):
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    return parse_config(text)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="weakarrival",
        description="Quantum arrival-time distributions from weak measurements",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("diag", "diag-dt", "expect", "simulate"):
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", default=None)
        p.add_argument("--out", metavar="PATH", default=None)
        p.add_argument("--jobs", type=int, default=1, metavar="N")
        if name == "expect":
            p.add_argument(
                "--normalize",
                nargs=2,
                type=float,
                metavar=("A", "B"),
                default=None,
                help="divide pi1 and the classical density by their integrals over [A, B]",
            )
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.out is None:
            _dispatch(args, cfg, sys.stdout)
        else:
            with open(args.out, "w", encoding="utf-8", newline="\n") as stream:
                _dispatch(args, cfg, stream)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateCouplingError, PostselectionError) as exc:
        print(f"degenerate run: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _dispatch(args, cfg, stream):
    if args.command == "diag":
        run_diag(cfg, stream)
    elif args.command == "diag-dt":
        run_diag_dt(cfg, stream)
    elif args.command == "expect":
        normalize = tuple(args.normalize) if args.normalize is not None else None
        run_expect(cfg, stream, normalize=normalize, jobs=args.jobs)
    elif args.command == "simulate":
        run_simulate(cfg, stream, jobs=args.jobs)
    else:  # pragma: no cover - argparse enforces the choices
        raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
