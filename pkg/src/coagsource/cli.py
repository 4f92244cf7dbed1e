"""Command-line interface wiring kernels, runs, solves, profiles and fits.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures (divergent quantities, integrator breakdown, overflow).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import parse_config
from .diagnostics import (
    characteristic_length,
    collapse_distance,
    logcorrected_moment_fit,
    powerlaw_fit,
    rescale_snapshot,
)
from .errors import (
    CoagSourceError,
    ConfigError,
    DivergenceError,
    InsufficientDataError,
    IntegratorError,
    KernelRangeError,
    KernelValidationError,
    RegimeError,
)
from .kernel import validate as validate_kernel
from .oracle import StochasticConfig, stochastic_run
from .quasistationary import (
    log_cn_asymptote,
    log_particle_flux,
    solve_recursion,
)
from .regimes import classify, predicted_length, predicted_moments, regime_grid
from .discrete import StateVector
from .runio import (
    CSV_VERSION,
    read_moments_csv,
    read_snapshot_csv,
    run_experiment,
    snapshot_filename,
    write_snapshot_csv,
)
from .selfsimilar import dirac_a, dirac_b, profile_infty

_CONFIG_ERRORS = (ConfigError, KernelValidationError, RegimeError, ValueError)
_NUMERICAL_ERRORS = (
    IntegratorError,
    DivergenceError,
    KernelRangeError,
    InsufficientDataError,
    OverflowError,
)


def _parse_range(spec: str) -> np.ndarray:
    try:
        lo, hi, count = spec.split(":")
        return np.linspace(float(lo), float(hi), int(count))
    except ValueError:
        raise ConfigError(f"ranges use lo:hi:count, got {spec!r}") from None


def _cmd_run(args) -> int:
    config_text = Path(args.config).read_text()
    result = run_experiment(
        config_text, args.out, force=args.force, resume=args.resume
    )
    print(f"wrote {len(result.outputs)} files to {result.out_dir}")
    return 0


def _cmd_regime(args) -> int:
    if args.grid:
        gamma_spec, lam_spec = args.grid.split(",", 1)
        rows = regime_grid(_parse_range(gamma_spec), _parse_range(lam_spec))
        lines = ["gamma,lambda,regime"]
        lines += [f"{g!r},{l!r},{name}" for g, l, name in rows]
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    if args.gamma is None or args.lam is None:
        raise ConfigError("regime needs --gamma and --lambda (or --grid)")
    kernel = validate_kernel(args.gamma, args.lam)
    report = classify(kernel)
    payload = report.to_dict()
    if args.t is not None:
        m_gl = None
        if report.length_law.mgl_exponent != 0.0:
            m_gl = predicted_moments(report, args.t)[1]
        payload["predicted_length"] = predicted_length(report, args.t, m_gl)
        m0, mgl = predicted_moments(report, args.t)
        payload["predicted_m0"] = m0
        payload["predicted_mgl"] = mgl
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0
    print(f"regime: {payload['regime']}")
    print(f"length law: L(t) = {report.length_law.describe()}")
    if report.length_law.mgl_exponent != 0.0:
        print(
            "length law (log law substituted): "
            f"L(t) = {report.length_law_substituted.describe()}"
        )
    print(f"m0 law: {report.m0_law.describe()}")
    print(f"m_gl law: {report.mgl_law.describe()}")
    print(f"profile: {report.profile.value}")
    if report.conjectural:
        for note in report.notes:
            print(f"note: {note}")
    for key in ("predicted_length", "predicted_m0", "predicted_mgl"):
        if key in payload:
            print(f"{key}: {payload[key]!r}")
    return 0


def _cmd_qs(args) -> int:
    kernel = validate_kernel(args.gamma, args.lam)
    if args.mode == "flux":
        if not args.m_range:
            raise ConfigError("qs flux requires --m-range lo:hi:count")
        lines = ["m_gl,log_flux"]
        for m in _parse_range(args.m_range):
            lines.append(f"{m!r},{log_particle_flux(kernel, float(m))!r}")
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    sol = solve_recursion(kernel, args.m, args.nmax)
    lines = ["n,log_c_recursion,log_c_asymptote"]
    for n in range(1, args.nmax + 1):
        try:
            asym = repr(log_cn_asymptote(kernel, args.m, float(n)))
        except (DivergenceError, ValueError):
            asym = "nan"
        lines.append(f"{n},{sol.log_c[n - 1]!r},{asym}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_profile(args) -> int:
    if args.mode == "dirac":
        kernel = validate_kernel(args.gamma, args.lam)
        if kernel.sign_gamma_plus_one == 0:
            params = dirac_a(kernel)
        else:
            if args.m0 is None:
                raise ConfigError(
                    "ballistic one-point profile needs --m0 (limiting count)"
                )
            params = dirac_b(args.m0)
        print(
            json.dumps(
                {
                    "law": params.law.value,
                    "location": params.location,
                    "weight": params.weight,
                },
                indent=2,
                sort_keys=True,
            )
        )
        return 0
    gl = args.gamma + args.lam
    prof = profile_infty(gl, n_grid=args.grid)
    lines = ["xi,phi"]
    lines += [f"{xi!r},{phi!r}" for xi, phi in prof.samples]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _read_xy_csv(path: str) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line[0].isalpha():
                continue
            parts = line.split(",")
            rows.append((float(parts[0]), float(parts[1])))
    return np.array(rows)


def _cmd_fit(args) -> int:
    if args.mode == "powerlaw":
        pts = _read_xy_csv(args.input)
        lo, hi = (float(v) for v in args.window.split(":"))
        fit = powerlaw_fit(pts, (lo, hi), log_correction=args.log_correction)
        print(
            json.dumps(
                {"exponent": fit.exponent, "stderr": fit.stderr,
                 "n_points": fit.n_points},
                indent=2, sort_keys=True,
            )
        )
        return 0
    if args.mode == "collapse":
        paths = args.input.split(",")
        if len(paths) < 2:
            raise ConfigError("fit collapse needs at least two snapshot files")
        snaps = []
        for path in paths:
            state = read_snapshot_csv(Path(path))
            t = max(state.t, 1.0)
            length = characteristic_length(state)
            snaps.append(rescale_snapshot(state, length, t, t / length**2))
        distances = [
            collapse_distance(snaps[i], snaps[i + 1]) for i in range(len(snaps) - 1)
        ]
        print(json.dumps({"distances": distances}, indent=2))
        return 0
    if args.model != "log":
        raise ConfigError(f"fit moments supports --model log, got {args.model!r}")
    data = read_moments_csv(Path(args.input))
    fit = logcorrected_moment_fit(np.column_stack([data["t"], data["m_gl"]]))
    print(
        json.dumps(
            {"q": fit.exponent, "stderr": fit.stderr, "n_points": fit.n_points},
            indent=2, sort_keys=True,
        )
    )
    return 0


def _cmd_oracle(args) -> int:
    config_text = Path(args.config).read_text()
    cfg = parse_config(config_text)
    lo, _, hi = args.seeds.partition("..")
    seeds = range(int(lo), int(hi) + 1) if hi else [int(lo)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gl = cfg.kernel.gl
    one_minus_lam = 1.0 - cfg.kernel.lam
    for seed in seeds:
        run = stochastic_run(
            StochasticConfig(
                kernel=cfg.kernel,
                source=cfg.source,
                volume=args.volume,
                t_end=cfg.t_end,
                seed=seed,
                sample_times=cfg.snapshot_times,
            )
        )
        path = out / f"stochastic_seed{seed}.csv"
        with open(path, "w") as fh:
            fh.write(f"# {CSV_VERSION} moments\n")
            fh.write("t,m0,m1,m_gl,m_one_minus_lambda,m2,leaked_mass\n")
            for i, t in enumerate(run.times):
                conc = run.snapshots[i]
                sizes = np.arange(1, conc.size + 1, dtype=float)
                m_gl = float(sizes**gl @ conc)
                m_oml = float(sizes**one_minus_lam @ conc)
                fh.write(
                    ",".join(
                        repr(v)
                        for v in (t, run.m0[i], run.m1[i], m_gl, m_oml,
                                  run.m2[i], 0.0)
                    )
                    + "\n"
                )
        for i, t in enumerate(run.times):
            state = StateVector(c=run.snapshots[i], t=float(t))
            write_snapshot_csv(
                out / f"stochastic_seed{seed}_{snapshot_filename(float(t))}", state
            )
    print(f"wrote {len(list(seeds))} stochastic runs to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coagsource",
        description="coagulation with a constant cluster source: runs, "
        "regime maps, quasi-stationary solves, profiles and fits",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a configured system")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--force", action="store_true")
    p_run.add_argument("--resume", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_regime = sub.add_parser("regime", help="classify (gamma, lambda)")
    p_regime.add_argument("--gamma", type=float)
    p_regime.add_argument("--lambda", dest="lam", type=float)
    p_regime.add_argument("--t", type=float)
    p_regime.add_argument("--json", action="store_true")
    p_regime.add_argument("--grid", help="g0:g1:n,l0:l1:n phase map")
    p_regime.add_argument("--out")
    p_regime.set_defaults(func=_cmd_regime)

    p_qs = sub.add_parser("qs", help="quasi-stationary recursion / flux table")
    p_qs.add_argument("mode", nargs="?", default="solve", choices=["solve", "flux"])
    p_qs.add_argument("--gamma", type=float, required=True)
    p_qs.add_argument("--lambda", dest="lam", type=float, required=True)
    p_qs.add_argument("--m", type=float, default=10.0)
    p_qs.add_argument("--nmax", type=int, default=100)
    p_qs.add_argument("--m-range", dest="m_range")
    p_qs.add_argument("--out")
    p_qs.set_defaults(func=_cmd_qs)

    p_profile = sub.add_parser("profile", help="self-similar profile samples")
    p_profile.add_argument("mode", nargs="?", default="infty",
                           choices=["infty", "dirac"])
    p_profile.add_argument("--gamma", type=float, required=True)
    p_profile.add_argument("--lambda", dest="lam", type=float, required=True)
    p_profile.add_argument("--grid", type=int, default=256)
    p_profile.add_argument("--m0", type=float)
    p_profile.add_argument("--out")
    p_profile.set_defaults(func=_cmd_profile)

    p_fit = sub.add_parser("fit", help="power-law / collapse / moment fits")
    p_fit.add_argument("mode", choices=["powerlaw", "collapse", "moments"])
    p_fit.add_argument("--in", dest="input", required=True)
    p_fit.add_argument("--window", default="1:1e9")
    p_fit.add_argument("--model", default="log")
    p_fit.add_argument("--log-correction", action="store_true")
    p_fit.set_defaults(func=_cmd_fit)

    p_oracle = sub.add_parser("oracle", help="stochastic finite-volume runs")
    p_oracle.add_argument("mode", choices=["stochastic"])
    p_oracle.add_argument("--config", required=True)
    p_oracle.add_argument("--seeds", default="0..15")
    p_oracle.add_argument("--volume", type=float, default=1e4)
    p_oracle.add_argument("--out", required=True)
    p_oracle.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CoagSourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
