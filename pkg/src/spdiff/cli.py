"""Experiment command line.

Subcommands:
  run      one differentiator against a test signal -> trajectory CSV + report
  compare  several presets/configs -> one metrics CSV row each
  sweep    steady-state error across a gain sweep -> CSV + fitted slope
  lemma    reference-system checks: settling, Lyapunov, homogeneity
  freq     analytic vs simulated frequency response of the linear variant
  stream   online mode: (t, v) sample CSV in, (t, x2) CSV out, bounded memory

Exit codes: 0 success, 2 validation problem, 3 numerical failure.
Config files are flat "section.key = value" text; flags override file values,
which override the preset.  CSV output uses 17 significant digits and LF line
endings, so identical configurations reproduce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _backend
from .core import DiffState, DifferentiatorConfig, GainSchedule
from .errors import DivergenceError, ValidationError
from .integrate import (DIVERGENCE_LIMIT, MAX_SAMPLES, STIFFNESS_FACTOR,
                        _METHOD_CODES, IntegratorSpec, Trajectory, simulate,
                        simulate_w_form)
from .metrics import CSV_COLUMNS, MetricsReport, build_report, epsilon_order_fit, \
    fit_sinusoid, linear_freq_response
from .reference import (TimeScaleSystem, dissipation_residuals, exp_decay_fit,
                        homogeneity_residual, lyapunov, lyapunov_rate,
                        settling_time, simulate_timescale)
from .signals import (NoiseSpec, Polynomial, Signal, Sine, Triangular,
                      read_signal_csv)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

TRAJECTORY_COLUMNS = ("t", "v", "vdot", "x1", "x2", "e1", "e2")


@dataclass
class ExperimentConfig:
    label: str
    differentiator: DifferentiatorConfig
    signal: Signal
    integrator: IntegratorSpec
    horizon: float = 5.0
    t0: float = 0.0
    init: DiffState = DiffState()
    record_every: int | None = None
    max_samples: int | None = MAX_SAMPLES
    w_form: bool = False

    def run(self) -> tuple[Trajectory, MetricsReport]:
        start = time.perf_counter()
        span = (self.t0, self.t0 + self.horizon)
        if self.w_form:
            d = self.differentiator
            traj = simulate_w_form(d.a10, d.a20, d.schedule, self.signal, span,
                                   self.integrator, self.init,
                                   self.record_every, self.max_samples)
        else:
            traj = simulate(self.differentiator, self.signal, span,
                            self.integrator, self.init,
                            self.record_every, self.max_samples)
        wall = time.perf_counter() - start
        report = build_report(
            traj, label=self.label,
            fast_time_constant=1.0 / self.differentiator.schedule.g_max,
            wall_time_s=wall)
        return traj, report


def _sec6_defaults(differentiator: DifferentiatorConfig, label: str) -> ExperimentConfig:
    return ExperimentConfig(
        label=label,
        differentiator=differentiator,
        signal=Sine(1.0, 1.0, 0.0),
        integrator=IntegratorSpec(h=1e-6),
        horizon=5.0,
    )


def make_preset(name: str) -> ExperimentConfig:
    g300 = GainSchedule.fixed(300.0)
    if name == "linear-sec6":
        return _sec6_defaults(
            DifferentiatorConfig("linear", g300, a10=5.0, a20=2.0), name)
    if name == "nonlinear-sec6":
        return _sec6_defaults(
            DifferentiatorConfig("nonlinear-alt", g300, a11=5.0, a21=2.0,
                                 alpha1=0.5, alpha2=0.5), name)
    if name == "hybrid-sec6":
        return _sec6_defaults(
            DifferentiatorConfig("hybrid-alt", g300, a10=5.0, a11=0.5,
                                 a20=2.0, a21=0.5, alpha1=0.5, alpha2=0.5), name)
    if name == "linear-sec6-wform":
        cfg = _sec6_defaults(
            DifferentiatorConfig("linear", g300, a10=5.0, a20=2.0), name)
        cfg.w_form = True
        return cfg
    raise ValidationError(
        f"unknown preset {name!r}; available: {', '.join(PRESETS)}")


PRESETS = ("linear-sec6", "nonlinear-sec6", "hybrid-sec6", "linear-sec6-wform")


# --------------------------------------------------------------------------
# config-file handling: flat "section.key = value" lines

def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if "." not in key:
            raise ValidationError(f"config line {lineno}: key must be section.name, got {key!r}")
        out[key] = value.strip()
    return out


_KNOWN_KEYS = {
    "differentiator.variant", "differentiator.a10", "differentiator.a20",
    "differentiator.a11", "differentiator.a21", "differentiator.alpha",
    "differentiator.alpha1", "differentiator.alpha2",
    "gain.mode", "gain.g", "gain.mu", "gain.t_max",
    "signal.kind", "signal.amplitude", "signal.angular_frequency",
    "signal.phase", "signal.offset", "signal.period", "signal.coefficients",
    "signal.csv", "signal.noise_amplitude", "signal.noise_seed",
    "integrator.method", "integrator.h",
    "run.horizon", "run.t0", "run.init_x1", "run.init_x2",
    "run.decimate", "run.label",
}


def _build_signal(kv: dict[str, str]) -> Signal:
    kind = kv.get("signal.kind", "sine")
    noise = None
    if "signal.noise_amplitude" in kv:
        noise = NoiseSpec(float(kv["signal.noise_amplitude"]),
                          int(kv.get("signal.noise_seed", "0")))
    if kind == "sine":
        return Sine(float(kv.get("signal.amplitude", "1")),
                    float(kv.get("signal.angular_frequency", "1")),
                    float(kv.get("signal.phase", "0")),
                    float(kv.get("signal.offset", "0")), noise=noise)
    if kind == "triangular":
        return Triangular(float(kv.get("signal.amplitude", "1")),
                          float(kv.get("signal.period", str(2.0 * math.pi))),
                          noise=noise)
    if kind == "polynomial":
        coeffs = [float(c) for c in kv.get("signal.coefficients", "0").split(",")]
        return Polynomial(coeffs, noise=noise)
    if kind == "sampled":
        if "signal.csv" not in kv:
            raise ValidationError("signal.kind = sampled needs signal.csv")
        return read_signal_csv(kv["signal.csv"])
    raise ValidationError(f"unknown signal.kind {kind!r}")


def config_from_mapping(kv: dict[str, str], label: str = "run") -> ExperimentConfig:
    unknown = set(kv) - _KNOWN_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    mode = kv.get("gain.mode", "fixed")
    if mode == "fixed":
        schedule = GainSchedule.fixed(float(kv.get("gain.g", "300")))
    elif mode == "ramp":
        schedule = GainSchedule.ramp(float(kv["gain.mu"]), float(kv["gain.t_max"]))
    else:
        raise ValidationError(f"unknown gain.mode {mode!r}")

    def _opt(key):
        return float(kv[key]) if key in kv else None

    diff = DifferentiatorConfig(
        variant=kv.get("differentiator.variant", "hybrid-alt"),
        schedule=schedule,
        a10=float(kv.get("differentiator.a10", "0")),
        a20=float(kv.get("differentiator.a20", "0")),
        a11=float(kv.get("differentiator.a11", "0")),
        a21=float(kv.get("differentiator.a21", "0")),
        alpha=_opt("differentiator.alpha"),
        alpha1=_opt("differentiator.alpha1"),
        alpha2=_opt("differentiator.alpha2"),
    )
    decimate = kv.get("run.decimate")
    return ExperimentConfig(
        label=kv.get("run.label", label),
        differentiator=diff,
        signal=_build_signal(kv),
        integrator=IntegratorSpec(method=kv.get("integrator.method", "rk4"),
                                  h=float(kv.get("integrator.h", "1e-6"))),
        horizon=float(kv.get("run.horizon", "5")),
        t0=float(kv.get("run.t0", "0")),
        init=DiffState(float(kv.get("run.init_x1", "0")),
                       float(kv.get("run.init_x2", "0"))),
        record_every=int(decimate) if decimate is not None else None,
    )


def _load_experiment(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ValidationError("--preset and --config are mutually exclusive")
    if args.preset:
        cfg = make_preset(args.preset)
    elif args.config:
        with open(args.config) as fh:
            cfg = config_from_mapping(parse_config_text(fh.read()))
    else:
        raise ValidationError("need --preset or --config")
    if args.h is not None:
        cfg.integrator = replace(cfg.integrator, h=args.h)
    if args.horizon is not None:
        cfg.horizon = args.horizon
    if args.decimate is not None:
        cfg.record_every = args.decimate
    if args.seed is not None and cfg.signal.noise is not None:
        cfg.signal.noise = NoiseSpec(cfg.signal.noise.amplitude, args.seed)
    return cfg


# --------------------------------------------------------------------------
# output helpers

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_trajectory_csv(path, traj: Trajectory):
    cols = (traj.t, traj.v, traj.vdot, traj.x1, traj.x2, traj.e1, traj.e2)
    rows = ([_fmt(c[i]) for c in cols] for i in range(len(traj)))
    write_csv(path, TRAJECTORY_COLUMNS, rows)


# --------------------------------------------------------------------------
# subcommands

def cmd_run(args) -> int:
    cfg = _load_experiment(args)
    traj, report = cfg.run()
    out = args.out / f"{cfg.label}-trajectory.csv"
    write_trajectory_csv(out, traj)
    (args.out / f"{cfg.label}-report.txt").write_text(report.to_text() + "\n")
    print(report.to_text())
    print(f"trajectory: {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    rows = []
    for name in args.presets:
        cfg = make_preset(name)
        if args.h is not None:
            cfg.integrator = replace(cfg.integrator, h=args.h)
        if args.horizon is not None:
            cfg.horizon = args.horizon
        _, report = cfg.run()
        rows.append(report.csv_row())
        print(report.to_text())
        print()
    out = args.out / "compare.csv"
    write_csv(out, CSV_COLUMNS, rows)
    print(f"comparison: {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if len(args.epsilon) < 3:
        raise ValidationError("sweep needs at least 3 epsilon values")
    cfg = make_preset(args.preset)
    if args.horizon is not None:
        cfg.horizon = args.horizon
    points = []
    rows = []
    for eps in args.epsilon:
        if eps <= 0.0:
            raise ValidationError(f"epsilon must be positive, got {eps}")
        g = 1.0 / eps
        d = replace(cfg.differentiator, schedule=GainSchedule.fixed(g))
        h = args.h if args.h is not None else cfg.integrator.h
        required = (1.0 / g) / STIFFNESS_FACTOR
        if args.h is not None and args.h > required * (1.0 + 1e-12):
            raise ValidationError(
                f"requested h={args.h:g} violates the step guard for "
                f"epsilon={eps:g}; need h <= {required:g}")
        h = min(h, required)
        run = replace(cfg)
        run.differentiator = d
        run.integrator = IntegratorSpec(cfg.integrator.method, h)
        run.label = f"{args.preset}-eps{eps:g}"
        traj, report = run.run()
        points.append((eps, report.steady_state_error))
        rows.append([_fmt(eps), _fmt(report.steady_state_error),
                     _fmt(run.integrator.h)])
        print(f"epsilon={eps:g}: steady_state_error={report.steady_state_error:.6g}")
    slope, intercept, used, excluded = epsilon_order_fit(points)
    write_csv(args.out / "sweep.csv", ("epsilon", "steady_state_error", "h"), rows)
    print(f"fitted log-log slope = {slope:.6g} "
          f"({used} points used, {excluded} excluded)")
    (args.out / "sweep-slope.txt").write_text(f"slope = {slope:.17g}\n")
    return EXIT_OK


_LEMMA_SYSTEMS = {
    "linear": lambda: TimeScaleSystem("linear", a10=1.0, a20=1.0),
    "nonlinear": lambda: TimeScaleSystem("nonlinear", a11=1.0, a21=1.0, alpha=0.5),
    "nonlinear-alt": lambda: TimeScaleSystem("nonlinear-alt", a11=1.0, a21=1.0,
                                             alpha1=0.5, alpha2=0.5),
    "hybrid": lambda: TimeScaleSystem("hybrid", a10=1.0, a20=1.0, a11=1.0,
                                      a21=1.0, alpha=0.5),
    "hybrid-alt": lambda: TimeScaleSystem("hybrid-alt", a10=1.0, a20=1.0,
                                          a11=1.0, a21=1.0, alpha1=0.5,
                                          alpha2=0.5),
}


def cmd_lemma(args) -> int:
    system = _LEMMA_SYSTEMS[args.system]()
    if args.inits:
        inits = []
        for chunk in args.inits.split(";"):
            z1, z2 = chunk.split(",")
            inits.append((float(z1), float(z2)))
    else:
        rng = np.random.default_rng(args.seed)
        inits = [tuple(p) for p in rng.uniform(-5.0, 5.0, size=(args.random_inits, 2))]
    spec = IntegratorSpec(h=args.h if args.h is not None else 1e-3)
    failures = []
    rows = []
    print(f"system: {args.system}; horizon {args.horizon}; h {spec.h:g}")
    for z0 in inits:
        traj = simulate_timescale(system, z0, args.horizon, spec)
        st = settling_time(traj, args.tolerance)
        res, valid = dissipation_residuals(system, traj)
        max_res = float(res[valid].max()) if np.any(valid) else 0.0
        vio = sum(1 for z1, z2 in traj.y if lyapunov_rate(system, z1, z2) > 0.0)
        pd_ok = all(lyapunov(system, z1, z2) > 0.0
                    for z1, z2 in traj.y if (z1, z2) != (0.0, 0.0))
        line = (f"init=({z0[0]:+.4f}, {z0[1]:+.4f}) settling="
                f"{'none' if st is None else f'{st:.4f}'} "
                f"dissipation_residual={max_res:.3e} rate_violations={vio}")
        if args.system == "linear":
            slope, r2 = exp_decay_fit(traj)
            line += f" decay_slope={slope:.4f} r2={r2:.5f}"
            if slope >= 0.0 or r2 < 0.99:
                failures.append(f"{z0}: bad exponential fit")
        elif st is None:
            failures.append(f"{z0}: never settled")
        if vio or not pd_ok:
            failures.append(f"{z0}: Lyapunov check failed")
        if max_res > 1e-4:
            failures.append(f"{z0}: dissipation residual {max_res:.3e}")
        print(line)
        rows.append([f"{z0[0]:.17g}", f"{z0[1]:.17g}",
                     "" if st is None else f"{st:.17g}", f"{max_res:.17g}"])
    if args.system in ("nonlinear", "nonlinear-alt"):
        rng = np.random.default_rng(args.seed)
        pts = rng.uniform(-5.0, 5.0, size=(100, 2))
        resid = homogeneity_residual(system, pts, (0.5, 2.0, 10.0))
        print(f"homogeneity residual over 100 points: {resid:.3e}")
        if resid > 1e-9:
            failures.append(f"homogeneity residual {resid:.3e}")
    write_csv(args.out / f"lemma-{args.system}.csv",
              ("z1_0", "z2_0", "settling_time", "dissipation_residual"), rows)
    if failures:
        for f in failures:
            print(f"FAIL: {f}", file=sys.stderr)
        return EXIT_NUMERICAL
    print("all checks passed")
    return EXIT_OK


def cmd_freq(args) -> int:
    eps = args.epsilon
    rows = []
    for omega in args.omega:
        mag_a, ph_a = linear_freq_response(args.a10, args.a20, eps, omega)
        g = 1.0 / eps
        cfg = DifferentiatorConfig("linear", GainSchedule.fixed(g),
                                   a10=args.a10, a20=args.a20)
        period = 2.0 * math.pi / omega
        horizon = max(2.0 * period, 2.0)
        traj = simulate(cfg, Sine(1.0, omega, 0.0), (0.0, horizon),
                        IntegratorSpec(h=args.h))
        mask = traj.t >= horizon - period
        mag_s, ph_s = fit_sinusoid(traj.t[mask], traj.x2[mask], omega)
        rows.append([_fmt(omega), _fmt(mag_a), _fmt(ph_a), _fmt(mag_s), _fmt(ph_s),
                     _fmt(abs(mag_s - mag_a) / mag_a if mag_a else 0.0),
                     _fmt(abs(ph_s - ph_a))])
        print(f"omega={omega:g}: |H| analytic={mag_a:.6g} simulated={mag_s:.6g}; "
              f"phase analytic={ph_a:.6g} simulated={ph_s:.6g}")
    write_csv(args.out / "freq.csv",
              ("omega", "mag_analytic", "phase_analytic", "mag_simulated",
               "phase_simulated", "mag_rel_dev", "phase_abs_dev"), rows)
    return EXIT_OK


def cmd_stream(args) -> int:
    cfg = _load_experiment(args)
    d = cfg.differentiator
    code, a10, a20, a11, a21, p1, p2 = d.kernel_params()
    sched = d.schedule
    sched_mode = 0 if sched.mode == "fixed" else 1
    # sub-steps no coarser than the configured step and the stiffness guard
    h_guard = min(cfg.integrator.h, (1.0 / sched.g_max) / STIFFNESS_FACTOR)
    kernel = _backend.kernel
    method = _METHOD_CODES[cfg.integrator.method]
    x1, x2 = cfg.init.x1, cfg.init.x2
    t_prev = v_prev = 0.0
    has_prev = 0
    n_total = 0
    chunk = 65536
    with open(args.input, newline="") as fin, \
            open(args.out / "stream.csv", "w", newline="\n") as fout:
        reader = csv.reader(fin)
        writer = csv.writer(fout, lineterminator="\n")
        writer.writerow(("t", "x2"))
        header = next(reader, None)
        if header is None or len(header) != 2:
            raise ValidationError("stream input needs a two-column header row")
        ts_buf: list[float] = []
        vs_buf: list[float] = []

        def flush():
            nonlocal x1, x2, t_prev, v_prev, has_prev
            if not ts_buf:
                return
            ts = np.asarray(ts_buf)
            vs = np.asarray(vs_buf)
            out = np.empty(ts.size)
            try:
                x1, x2 = kernel.run_stream(
                    code, a10, a20, a11, a21, p1, p2,
                    sched_mode, sched.g, sched.mu, sched.t_max,
                    ts, vs, h_guard, method, x1, x2,
                    t_prev, v_prev, has_prev, DIVERGENCE_LIMIT, out)
            except ArithmeticError as exc:
                raise DivergenceError(float(str(exc).split()[0])) from None
            writer.writerows((_fmt(t), _fmt(v)) for t, v in zip(ts, out))
            t_prev, v_prev, has_prev = float(ts[-1]), float(vs[-1]), 1
            ts_buf.clear()
            vs_buf.clear()

        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValidationError(f"line {lineno}: expected 2 fields, got {len(row)}")
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError:
                raise ValidationError(f"line {lineno}: non-numeric field in {row!r}") from None
            last = ts_buf[-1] if ts_buf else (t_prev if has_prev else None)
            if last is not None and t <= last:
                raise ValidationError(
                    f"line {lineno}: timestamps must be strictly increasing "
                    f"({t!r} after {last!r})")
            if args.rate is not None and last is not None:
                dt = t - last
                if abs(dt - 1.0 / args.rate) > 0.01 / args.rate:
                    raise ValidationError(
                        f"line {lineno}: sample interval {dt:g} does not match "
                        f"the stated rate {args.rate:g} Hz")
            ts_buf.append(t)
            vs_buf.append(v)
            n_total += 1
            if len(ts_buf) >= chunk:
                flush()
        flush()
    if n_total == 0:
        raise ValidationError("stream input has no data rows")
    print(f"processed {n_total} samples -> {args.out / 'stream.csv'}")
    return EXIT_OK


# --------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--out", type=_out_dir, default=Path("."), help="output directory")
    p.add_argument("--h", type=float, default=None, help="integration step")
    p.add_argument("--horizon", type=float, default=None, help="run length (s)")
    p.add_argument("--decimate", type=int, default=None,
                   help="record every N-th integration step")
    p.add_argument("--seed", type=int, default=None, help="noise seed override")
    p.add_argument("--preset", choices=PRESETS, default=None)
    p.add_argument("--config", default=None, help="key-value config file")


def _out_dir(value):
    p = Path(value)
    p.mkdir(parents=True, exist_ok=True)
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="spdiff",
        description="Simulate and evaluate singular-perturbation differentiators "
                    f"(backend: {_backend.backend_name()})")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single run -> trajectory CSV + metrics")
    _add_common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("compare", help="run several presets, one CSV row each")
    p.add_argument("presets", nargs="+", choices=PRESETS)
    p.add_argument("--out", type=_out_dir, default=Path("."))
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("sweep", help="steady-state error across epsilon values")
    p.add_argument("--preset", choices=PRESETS, required=True)
    p.add_argument("--epsilon", type=float, nargs="+", required=True)
    p.add_argument("--out", type=_out_dir, default=Path("."))
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("lemma", help="reference-system convergence checks")
    p.add_argument("--system", choices=sorted(_LEMMA_SYSTEMS), required=True)
    p.add_argument("--inits", default=None,
                   help="semicolon-separated z1,z2 pairs (default: random)")
    p.add_argument("--random-inits", type=int, default=10)
    p.add_argument("--seed", type=int, default=20260808)
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--out", type=_out_dir, default=Path("."))
    p.set_defaults(fn=cmd_lemma)

    p = sub.add_parser("freq", help="linear frequency response, analytic vs simulated")
    p.add_argument("--a10", type=float, default=5.0)
    p.add_argument("--a20", type=float, default=2.0)
    p.add_argument("--epsilon", type=float, default=1.0 / 300.0)
    p.add_argument("--omega", type=float, nargs="+", required=True)
    p.add_argument("--h", type=float, default=1e-6)
    p.add_argument("--out", type=_out_dir, default=Path("."))
    p.set_defaults(fn=cmd_freq)

    p = sub.add_parser("stream", help="online sample-by-sample differentiation")
    _add_common(p)
    p.add_argument("--input", required=True, help="(t, v) CSV with header")
    p.add_argument("--rate", type=float, default=None,
                   help="expected sample rate (Hz), validated when given")
    p.set_defaults(fn=cmd_stream)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DivergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
