"""Experiment persistence: versioned CSV files and hashed manifests.

One directory per experiment, never overwritten without force.  Every output
directory carries exactly one ``manifest.json`` recording the verbatim
config, wall times, completion status and a sha256 per output file.  CSV
files start with a version comment line; readers reject mismatched versions.
All floats are written with full round-trip precision.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import parse_config
from .discrete import MomentSeries, StateVector, Trajectory, integrate
from .errors import ConfigError

CSV_VERSION = "coagsource-csv v1"
MANIFEST_NAME = "manifest.json"

MOMENT_COLUMNS = ("t", "m0", "m1", "m_gl", "m_one_minus_lambda", "m2", "leaked_mass")


def _fmt(x: float) -> str:
    return repr(float(x))


def _series_columns(series: MomentSeries) -> dict[str, np.ndarray]:
    return {
        "t": series.t,
        "m0": series.m0,
        "m1": series.m1,
        "m_gl": series.m_gl,
        "m_one_minus_lambda": series.m_one_minus_lambda,
        "m2": series.m2,
        "leaked_mass": series.leaked_mass,
    }


def _write_moment_rows(path: Path, columns: dict[str, np.ndarray]) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {CSV_VERSION} moments\n")
        fh.write(",".join(MOMENT_COLUMNS) + "\n")
        for row in zip(*(columns[name] for name in MOMENT_COLUMNS)):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_moments_csv(path: Path, series: MomentSeries) -> None:
    _write_moment_rows(path, _series_columns(series))


def _check_version(line: str, kind: str, path: Path) -> None:
    expected = f"# {CSV_VERSION} {kind}"
    if not line.startswith(expected):
        raise ConfigError(
            f"{path}: expected header {expected!r}, got {line.strip()!r}"
        )


def read_moments_csv(path: Path) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path) as fh:
        _check_version(fh.readline(), "moments", path)
        header = fh.readline().strip().split(",")
        if tuple(header) != MOMENT_COLUMNS:
            raise ConfigError(f"{path}: unexpected moment columns {header!r}")
        rows = [list(map(float, line.split(","))) for line in fh if line.strip()]
    data = np.array(rows) if rows else np.zeros((0, len(MOMENT_COLUMNS)))
    return {name: data[:, i] for i, name in enumerate(MOMENT_COLUMNS)}


def snapshot_filename(t: float) -> str:
    return f"snapshot_{_fmt(t)}.csv"


def write_snapshot_csv(path: Path, state: StateVector) -> None:
    with open(path, "w") as fh:
        fh.write(
            f"# {CSV_VERSION} snapshot t={_fmt(state.t)} "
            f"leaked_mass={_fmt(state.leaked_mass)} "
            f"leaked_number={_fmt(state.leaked_number)}\n"
        )
        fh.write("n,c_n\n")
        for n, c in enumerate(state.c, start=1):
            fh.write(f"{n},{_fmt(c)}\n")


def read_snapshot_csv(path: Path) -> StateVector:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline()
        _check_version(header, "snapshot", path)
        meta = {}
        for token in header.strip().split():
            if "=" in token:
                key, value = token.split("=", 1)
                meta[key] = float(value)
        columns = fh.readline().strip().split(",")
        if columns != ["n", "c_n"]:
            raise ConfigError(f"{path}: unexpected snapshot columns {columns!r}")
        c = [float(line.split(",")[1]) for line in fh if line.strip()]
    return StateVector(
        c=np.array(c),
        t=meta.get("t", 0.0),
        leaked_mass=meta.get("leaked_mass", 0.0),
        leaked_number=meta.get("leaked_number", 0.0),
    )


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, payload: dict) -> None:
    with open(out_dir / MANIFEST_NAME, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class ExperimentResult:
    out_dir: Path
    trajectory: Trajectory
    outputs: dict[str, str]


def run_experiment(
    config_text: str,
    out_dir: str | Path,
    force: bool = False,
    resume: bool = False,
) -> ExperimentResult:
    """Run one configured experiment into its own output directory.

    Deterministic configs reproduce their outputs byte-identically.  An
    existing directory is refused unless ``force`` (start over) or
    ``resume`` (continue from the latest stored snapshot, splicing the
    moment series so the mass ledger stays exact end to end).
    """
    out_dir = Path(out_dir)
    cfg = parse_config(config_text)
    existing = out_dir.exists() and any(out_dir.iterdir())
    if existing and not (force or resume):
        raise ConfigError(
            f"output directory {out_dir} is not empty; pass force=True to "
            "overwrite or resume=True to continue"
        )

    initial = None
    old_moments: dict[str, np.ndarray] | None = None
    if resume and existing:
        snaps = sorted(out_dir.glob("snapshot_*.csv"))
        if not snaps:
            raise ConfigError(f"cannot resume: no snapshots in {out_dir}")
        states = [read_snapshot_csv(p) for p in snaps]
        initial = max(states, key=lambda s: s.t)
        if initial.t >= cfg.t_end:
            raise ConfigError(
                f"cannot resume: stored state at t={initial.t!r} already "
                f"reaches t_end={cfg.t_end!r}"
            )
        old_moments = read_moments_csv(out_dir / "moments.csv")

    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    (out_dir / "config.txt").write_text(config_text)
    _write_manifest(
        out_dir,
        {
            "tool": "coagsource",
            "version": __version__,
            "schema": 1,
            "status": "incomplete",
            "started_utc": started,
            "config": config_text,
            "outputs": {},
        },
    )

    trajectory = integrate(cfg, initial=initial)

    columns = _series_columns(trajectory.series)
    if old_moments is not None:
        keep = old_moments["t"] <= initial.t + 1e-12
        # the resumed run re-records its starting point; drop the duplicate
        columns = {
            name: np.concatenate([old_moments[name][keep], columns[name][1:]])
            for name in MOMENT_COLUMNS
        }
    _write_moment_rows(out_dir / "moments.csv", columns)
    for snap in trajectory.snapshots:
        write_snapshot_csv(out_dir / snapshot_filename(snap.t), snap)

    outputs = {}
    for path in sorted(out_dir.iterdir()):
        if path.name == MANIFEST_NAME:
            continue
        outputs[path.name] = _sha256(path)
    _write_manifest(
        out_dir,
        {
            "tool": "coagsource",
            "version": __version__,
            "schema": 1,
            "status": "complete",
            "started_utc": started,
            "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "config": config_text,
            "outputs": outputs,
        },
    )
    return ExperimentResult(out_dir=out_dir, trajectory=trajectory, outputs=outputs)


def verify_manifest(out_dir: str | Path) -> bool:
    """Recompute output hashes and compare against the stored manifest."""
    out_dir = Path(out_dir)
    with open(out_dir / MANIFEST_NAME) as fh:
        manifest = json.load(fh)
    for name, digest in manifest.get("outputs", {}).items():
        if _sha256(out_dir / name) != digest:
            return False
    return True
