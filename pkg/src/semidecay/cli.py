"""Command line front end: ``semidecay CONFIG.toml [--output PATH] [--seed N] [--threads N]``.

The config is a TOML file; see the README for the schema.  Every command
writes one CSV with a header row, 17 significant digits and ``\\n`` line
endings, so identical configs give byte-identical output.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 bound violation.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import dataclass

import numpy as np
import tomli

from .bounds import KINDS, ResolventFrame, build_envelope
from .exceptions import ConfigError, SemidecayError
from .matrix_oracle import (
    MatrixOperator,
    base_majorant,
    default_omega,
    measure_frame,
    verify_envelope,
)
from .riccati import DEFAULT_S_MAX, f_plus, riccati_profile, theta_big
from .variational import a_star_by_eigenvalue
from .weights import Constant, ExponentialDecay, Tabulated, WeightFunction

__all__ = ["RunConfig", "load_config", "parse_config", "run", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VIOLATION = 0, 1, 2, 3
COMMANDS = ("astar", "profile", "bounds", "verify")

_TOP_KEYS = {"command", "seed", "iterations", "output", "weight", "frame", "t_grid",
             "matrix", "astar"}
_SECTION_KEYS = {
    "weight": {"kind", "c", "alpha", "scale", "nodes", "values", "interpolation"},
    "frame": {"omega", "r", "measure"},
    "t_grid": {"min", "max", "count", "spacing"},
    "matrix": {"rows", "eps"},
    "astar": {"s_max", "n"},
}


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    command: str
    weight: WeightFunction | None
    frame: tuple | None  # (omega, r); r is None when it is to be measured
    t_grid: np.ndarray | None
    iterations: int
    matrix: MatrixOperator | None
    matrix_eps: float
    astar_s_max: float
    astar_n: int
    seed: int
    output: str | None


def _get(section, key, kind, path, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    value = section[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{path}.{key}: must be finite")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
        return value
    if not isinstance(value, kind):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {value!r}")
    return value


def _check_keys(section, allowed, path):
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected a table")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")


def _parse_weight(sec):
    _check_keys(sec, _SECTION_KEYS["weight"], "weight")
    kind = _get(sec, "kind", str, "weight", required=True)
    try:
        if kind == "constant":
            return Constant(_get(sec, "c", float, "weight", 1.0))
        if kind == "exponential":
            return ExponentialDecay(_get(sec, "alpha", float, "weight", required=True),
                                    _get(sec, "scale", float, "weight", 1.0))
        if kind == "tabulated":
            nodes = _get(sec, "nodes", list, "weight", required=True)
            values = _get(sec, "values", list, "weight", required=True)
            interp = _get(sec, "interpolation", str, "weight", "cubic")
            return Tabulated(np.array(nodes, dtype=float), np.array(values, dtype=float), interp)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"weight: {exc}") from exc
    raise ConfigError(f"weight.kind: unknown kind {kind!r} (constant, exponential, tabulated)")


def parse_entry(value, where):
    """Matrix entry: a number, or a string ``"re"`` / ``"re+imI"``."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: invalid matrix entry {value!r}")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        text = value.replace(" ", "")
        if text.endswith("I"):
            text = text[:-1] + "j"
        try:
            return complex(text)
        except ValueError:
            pass
    raise ConfigError(f"{where}: invalid matrix entry {value!r}")


def _parse_matrix(sec):
    _check_keys(sec, _SECTION_KEYS["matrix"], "matrix")
    rows = _get(sec, "rows", list, "matrix", required=True)
    parsed = []
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise ConfigError(f"matrix.rows[{i}]: expected a list")
        parsed.append([parse_entry(v, f"matrix.rows[{i}][{j}]") for j, v in enumerate(row)])
    if any(len(row) != len(parsed) for row in parsed):
        raise ConfigError("matrix.rows: matrix must be square")
    try:
        matrix = MatrixOperator.from_rows(parsed)
    except ValueError as exc:
        raise ConfigError(f"matrix.rows: {exc}") from exc
    eps = _get(sec, "eps", float, "matrix", 0.1)
    if not eps > 0:
        raise ConfigError("matrix.eps: must be positive")
    return matrix, eps


def _parse_t_grid(sec):
    _check_keys(sec, _SECTION_KEYS["t_grid"], "t_grid")
    lo = _get(sec, "min", float, "t_grid", required=True)
    hi = _get(sec, "max", float, "t_grid", required=True)
    count = _get(sec, "count", int, "t_grid", required=True)
    spacing = _get(sec, "spacing", str, "t_grid", "linear")
    if count < 2:
        raise ConfigError("t_grid.count: must be at least 2")
    if not 0 <= lo < hi:
        raise ConfigError("t_grid: need 0 <= min < max")
    if spacing == "linear":
        return np.linspace(lo, hi, count)
    if spacing == "log":
        if lo <= 0:
            raise ConfigError("t_grid.min: log spacing needs min > 0")
        return np.geomspace(lo, hi, count)
    raise ConfigError(f"t_grid.spacing: expected 'linear' or 'log', got {spacing!r}")


def parse_config(data: dict) -> RunConfig:
    """Validate a parsed TOML document."""
    _check_keys(data, _TOP_KEYS, "config")
    command = _get(data, "command", str, "config", required=True)
    if command not in COMMANDS:
        raise ConfigError(f"config.command: expected one of {', '.join(COMMANDS)}, got {command!r}")
    iterations = _get(data, "iterations", int, "config", 1)
    if iterations < 1:
        raise ConfigError("config.iterations: must be >= 1")
    seed = _get(data, "seed", int, "config", 0)
    output = _get(data, "output", str, "config", None)

    weight = _parse_weight(data["weight"]) if "weight" in data else None
    matrix, eps = _parse_matrix(data["matrix"]) if "matrix" in data else (None, 0.1)
    t_grid = _parse_t_grid(data["t_grid"]) if "t_grid" in data else None

    frame = None
    if "frame" in data:
        sec = data["frame"]
        _check_keys(sec, _SECTION_KEYS["frame"], "frame")
        measure = _get(sec, "measure", bool, "frame", False)
        omega = _get(sec, "omega", float, "frame", None)
        r = _get(sec, "r", float, "frame", None)
        if measure:
            if r is not None:
                raise ConfigError("frame: give either r or measure = true, not both")
            if matrix is None:
                raise ConfigError("frame.measure: needs a [matrix] section")
        else:
            if omega is None or r is None:
                raise ConfigError("frame: need omega and r, or measure = true")
            if not r > 0:
                raise ConfigError("frame.r: must be positive")
        frame = (omega, r)

    astar_sec = data.get("astar", {})
    _check_keys(astar_sec, _SECTION_KEYS["astar"], "astar")
    s_max = _get(astar_sec, "s_max", float, "astar", DEFAULT_S_MAX)
    n = _get(astar_sec, "n", int, "astar", 4096)
    if not s_max > 0:
        raise ConfigError("astar.s_max: must be positive")
    if n < 16:
        raise ConfigError("astar.n: must be at least 16")

    if command in ("astar", "profile") and weight is None:
        raise ConfigError(f"weight: required by command {command!r}")
    if command in ("profile", "bounds", "verify") and t_grid is None:
        raise ConfigError(f"t_grid: required by command {command!r}")
    if command == "bounds":
        if frame is None and matrix is None:
            raise ConfigError("frame: required by command 'bounds' (or give a [matrix] to measure)")
        if weight is None and matrix is None:
            raise ConfigError("weight: required by command 'bounds' unless a [matrix] is given")
    if command == "verify" and matrix is None:
        raise ConfigError("matrix: required by command 'verify'")

    return RunConfig(command, weight, frame, t_grid, iterations, matrix, eps, s_max, n,
                     seed, output)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return ""
    return "%.17g" % x


def _csv(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def run_astar(cfg: RunConfig):
    w = cfg.weight
    profile = riccati_profile(w, min(cfg.astar_s_max, w.hi))
    rows = []
    found = {}
    a_r = profile.a_star
    found["riccati"] = a_r if math.isfinite(a_r) else None
    try:
        found["eigenvalue"] = a_star_by_eigenvalue(
            w, n=cfg.astar_n, window=(0.05, min(5.0, cfg.astar_s_max, w.hi)))
    except SemidecayError:
        found["eigenvalue"] = None
    for method in ("riccati", "eigenvalue"):
        a = found[method]
        if a is None:
            rows.append((method, "not found <= s_max", None, None))
            continue
        # probe: psi_0 at the reported a*; residual psi_0 - 1 vanishes at the true a*
        psi = float(profile.psi0(a)) if a <= profile.s_window else math.nan
        rows.append((method, a, psi, psi - 1.0))
    return _csv(("method", "a_star", "psi0_at_probe", "residual"), rows), EXIT_OK


def run_profile(cfg: RunConfig):
    w = cfg.weight
    s = cfg.t_grid
    profile = riccati_profile(w, min(max(float(s[-1]), 1e-3), w.hi))
    rows = []
    for x in s:
        m, mu = (float(v) for v in w.eval(x))
        psi = psi_d = theta = None
        if 0 < x <= profile.s_window:
            psi = float(profile.psi0(x))
        if 0 < x <= profile.s_window_dual:
            psi_d = float(profile.psi_dual(x))
        if 0 < x <= profile.a_limit:
            theta = theta_big(profile, x)
        rows.append((x, m, mu, psi, psi_d, f_plus(mu), theta))
    header = ("s", "m", "mu", "psi0", "psi_dual", "f_plus", "theta")
    return _csv(header, rows), EXIT_OK


def _resolve(cfg: RunConfig, threads: int):
    """Frame and base majorant, measuring from the matrix where needed."""
    if cfg.frame is not None and cfg.frame[1] is not None:
        frame = ResolventFrame(*cfg.frame)
    else:
        omega = cfg.frame[0] if cfg.frame is not None and cfg.frame[0] is not None else None
        if omega is None:
            omega = default_omega(cfg.matrix)
        frame = measure_frame(cfg.matrix, omega)
    if cfg.weight is not None:
        w = cfg.weight
    else:
        w = base_majorant(cfg.matrix, float(cfg.t_grid[-1]), cfg.matrix_eps, threads=threads)
    return frame, w


def _envelope(cfg, threads):
    frame, w = _resolve(cfg, threads)
    return build_envelope(frame, w, None, cfg.t_grid, iterations=cfg.iterations)


def run_bounds(cfg: RunConfig, threads: int = 1):
    env = _envelope(cfg, threads)
    rows = []
    for i, t in enumerate(env.t):
        a = b = None
        best = env.values[i]
        for kind in ("gp", "gp_decay", "riccati", "appendix"):
            if env.columns[kind][i] == best:
                a, b = env.argmins[kind][i]
                break
        rows.append([t, env.base[i]] + [env.columns[k][i] for k in KINDS] + [best, a, b])
    header = ("t", "base") + KINDS + ("envelope", "argmin_a", "argmin_b")
    return _csv(header, rows), EXIT_OK


def run_verify(cfg: RunConfig, threads: int = 1):
    env = _envelope(cfg, threads)
    rep = verify_envelope(cfg.matrix, env, cfg.t_grid, threads=threads)
    rows = [(t, n, e, q) for t, n, e, q in zip(rep.t, rep.true_norm, rep.envelope, rep.ratio)]
    rows.append(("min_ratio", None, None, rep.min_ratio))
    code = EXIT_OK if rep.passed else EXIT_VIOLATION
    return _csv(("t", "true_norm", "envelope", "ratio"), rows), code


def run(cfg: RunConfig, threads: int = 1):
    """Execute ``cfg``; returns ``(csv_text, exit_code)``."""
    if cfg.command == "astar":
        return run_astar(cfg)
    if cfg.command == "profile":
        return run_profile(cfg)
    if cfg.command == "bounds":
        return run_bounds(cfg, threads)
    return run_verify(cfg, threads)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="semidecay", description=__doc__.split("\n")[0])
    parser.add_argument("config", help="TOML run configuration")
    parser.add_argument("--output", help="CSV path (default: config 'output' or stdout)")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for norm sweeps")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = RunConfig(**{**cfg.__dict__, "seed": args.seed})
    try:
        text, code = run(cfg, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SemidecayError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = args.output or cfg.output
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    if code == EXIT_VIOLATION:
        print("bound violation: true norm exceeds the envelope", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
