"""Line-oriented run configuration: parsing, validation, serialization.

The format is ``key = value`` with ``#`` comments and blank lines ignored.
Unknown keys, malformed lines and type mismatches are reported with their
1-based line number.  Serialization emits a normalized form (sorted keys,
full round-trip float formatting), so parse -> serialize is idempotent.
"""

from __future__ import annotations

from .discrete import RunConfig, SourceSpec
from .errors import ConfigError
from .kernel import Shape, separable_form, validate as validate_kernel

_REQUIRED = ("kernel", "gamma", "lambda", "n_bins", "t_end")
_KNOWN = _REQUIRED + ("rel_tol", "abs_tol", "snapshots", "rhs_mode", "source")

_DEFAULT_REL_TOL = 1e-8
_DEFAULT_ABS_TOL = 1e-14


def _parse_float(raw: str, key: str, line: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} expects a number, got {raw!r}", line) from None


def _parse_int(raw: str, key: str, line: int) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{key} expects an integer, got {raw!r}", line) from None
    return value


def _parse_source(raw: str, line: int) -> tuple[tuple[int, float], ...]:
    entries = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(
                f"source entries use size:rate, got {chunk!r}", line
            )
        size_raw, rate_raw = chunk.split(":", 1)
        entries.append(
            (_parse_int(size_raw.strip(), "source size", line),
             _parse_float(rate_raw.strip(), "source rate", line))
        )
    if not entries:
        raise ConfigError("source must contain at least one size:rate entry", line)
    return tuple(entries)


def parse_config(text: str) -> RunConfig:
    """Parse config text into a validated :class:`RunConfig`."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", lineno)
        key, value = stripped.split("=", 1)
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if not value:
            raise ConfigError(f"{key} has no value", lineno)
        raw[key] = (value, lineno)

    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")

    kernel_token, kernel_line = raw["kernel"]
    if kernel_token not in ("constant", "canonical", "kmr", "custom"):
        raise ConfigError(
            f"kernel must be constant|canonical|kmr|custom, got {kernel_token!r}",
            kernel_line,
        )
    if kernel_token == "custom":
        raise ConfigError(
            "custom kernels carry a shape function and must be built "
            "programmatically, not from a config file",
            kernel_line,
        )
    gamma = _parse_float(raw["gamma"][0], "gamma", raw["gamma"][1])
    lam = _parse_float(raw["lambda"][0], "lambda", raw["lambda"][1])
    kernel = validate_kernel(gamma, lam, Shape(kernel_token))

    n_bins = _parse_int(raw["n_bins"][0], "n_bins", raw["n_bins"][1])
    t_end = _parse_float(raw["t_end"][0], "t_end", raw["t_end"][1])

    rel_tol = (
        _parse_float(raw["rel_tol"][0], "rel_tol", raw["rel_tol"][1])
        if "rel_tol" in raw
        else _DEFAULT_REL_TOL
    )
    abs_tol = (
        _parse_float(raw["abs_tol"][0], "abs_tol", raw["abs_tol"][1])
        if "abs_tol" in raw
        else _DEFAULT_ABS_TOL
    )
    if "snapshots" in raw:
        value, lineno = raw["snapshots"]
        snapshots = tuple(
            _parse_float(v.strip(), "snapshots", lineno)
            for v in value.split(",")
            if v.strip()
        )
    else:
        snapshots = (t_end,)
    if "rhs_mode" in raw:
        mode, lineno = raw["rhs_mode"]
        if mode not in ("separable", "generic"):
            raise ConfigError(
                f"rhs_mode must be separable|generic, got {mode!r}", lineno
            )
    else:
        # fast path whenever the kernel has a product decomposition (always
        # for canonical/kmr; for the constant shape only at gamma = 0)
        mode = "separable" if separable_form(kernel) is not None else "generic"
    if "source" in raw:
        source = SourceSpec(_parse_source(*raw["source"]))
    else:
        source = SourceSpec.monomer()

    return RunConfig(
        kernel=kernel,
        source=source,
        n_bins=n_bins,
        t_end=t_end,
        rel_tol=rel_tol,
        abs_tol=abs_tol,
        snapshot_times=snapshots,
        rhs_mode=mode,
    )


def serialize_config(cfg: RunConfig) -> str:
    """Normalized config text: sorted keys, round-trip float formatting."""
    entries = {
        "abs_tol": repr(cfg.abs_tol),
        "gamma": repr(cfg.kernel.gamma),
        "kernel": cfg.kernel.shape.value,
        "lambda": repr(cfg.kernel.lam),
        "n_bins": str(cfg.n_bins),
        "rel_tol": repr(cfg.rel_tol),
        "rhs_mode": cfg.rhs_mode,
        "snapshots": ",".join(repr(s) for s in cfg.snapshot_times),
        "source": ",".join(f"{n}:{r!r}" for n, r in cfg.source.entries),
        "t_end": repr(cfg.t_end),
    }
    return "\n".join(f"{key} = {value}" for key, value in sorted(entries.items())) + "\n"
