"""Command-line front end.

Usage::

    besselkit COMMAND [--config PATH] [key=value ...] [--out PATH] [--format csv|jsonl]

Settings come from a flat ``key = value`` file and from ``key=value`` tokens on
the command line (the latter win).  A bare token such as ``well`` selects the
potential.  Complex numbers are written ``a+bi``.

Exit status: 0 on success, 2 on configuration errors, 3 when Q violates a
required integrability class, 4 on numerical failure.  Errors are reported as
one JSON object on stderr.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
import io
import json
import math
import os
from pathlib import Path
import re
import sys
from typing import Callable, Optional

import numpy as np

from . import __version__
from . import boundary as bd
from . import jost_spectral as js
from . import solutions as so
from . import specfun as sf
from .errors import BesselKitError, ConfigError
from .model import (CoulombCutoff, ExpDecay, PotentialSpec, PowerLaw, SquareWell, Zero,
                    read_tabulated)
from .unperturbed import KernelSpec, eval_kernel
from .volterra import N_DEFAULT, GridFunction, RadialGrid, default_grid

COMMANDS = ("solve", "jost", "spectrum", "green", "resolvent", "boundary", "scatlen", "selftest")
POTENTIALS = ("zero", "powerlaw", "coulomb", "well", "expdecay", "tabulated")
EXIT_CONFIG, EXIT_CLASS, EXIT_NUMERICAL = 2, 3, 4

# ---------------------------------------------------------------- parsing

_COMPLEX_RE = re.compile(r"^[\s+\-0-9.eEij()]+$")


def parse_complex(text: str) -> complex:
    """Parse ``a+bi`` (or ``a+bj``, ``inf``) into a complex number."""
    t = text.strip().replace(" ", "")
    if t.lower() in ("inf", "+inf", "infinity"):
        return complex(math.inf, 0.0)
    if not t or not _COMPLEX_RE.match(t):
        raise ConfigError(f"not a complex number: {text!r}")
    t = t.replace("i", "j")
    if t.endswith("j") and (t == "j" or t[-2] in "+-"):
        t = t[:-1] + "1j"
    try:
        return complex(t)
    except ValueError as exc:
        raise ConfigError(f"not a complex number: {text!r}") from exc


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


@dataclass
class RunConfig:
    """Validated settings for one run."""

    command: str
    values: dict = field(default_factory=dict)
    out: Optional[str] = None
    fmt: str = "csv"
    threads: int = 1
    grid_n: int = N_DEFAULT
    x_min: Optional[float] = None
    x_max: Optional[float] = None

    def has(self, key: str) -> bool:
        return key in self.values

    def get_str(self, key: str, default: Optional[str] = None) -> str:
        if key in self.values:
            return self.values[key]
        if default is None:
            raise ConfigError(f"missing setting {key!r}")
        return default

    def get_complex(self, key: str, default: Optional[complex] = None) -> complex:
        if key in self.values:
            return parse_complex(self.values[key])
        if default is None:
            raise ConfigError(f"missing setting {key!r}")
        return complex(default)

    def get_float(self, key: str, default: Optional[float] = None) -> float:
        z = self.get_complex(key, default)
        if z.imag != 0:
            raise ConfigError(f"{key} must be real")
        return z.real

    def get_int(self, key: str, default: Optional[int] = None) -> int:
        v = self.get_float(key, default)
        if v != int(v):
            raise ConfigError(f"{key} must be an integer")
        return int(v)

    def get_list(self, key: str) -> list[complex]:
        return [parse_complex(s) for s in self.get_str(key).split(",") if s.strip()]


def build_config(argv: Optional[list[str]] = None) -> RunConfig:
    parser = argparse.ArgumentParser(prog="besselkit", description="Perturbed Bessel operators on the half-line")
    parser.add_argument("command", nargs="?", help="one of " + ", ".join(COMMANDS))
    parser.add_argument("settings", nargs="*", help="key=value overrides or a potential name")
    parser.add_argument("--config", metavar="PATH")
    parser.add_argument("--out", metavar="PATH")
    parser.add_argument("--format", choices=("csv", "jsonl"))
    parser.add_argument("--threads", type=int)
    parser.add_argument("--grid-n", type=int)
    parser.add_argument("--xmin", type=float)
    parser.add_argument("--xmax", type=float)
    parser.add_argument("--version", action="version", version=f"besselkit {__version__}")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise ConfigError("invalid command line") from None
    values: dict[str, str] = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        values.update(parse_config_text(path.read_text(), str(path)))
    tokens = list(args.settings)
    command = args.command or values.pop("command", None)
    if args.command and args.command not in COMMANDS and "=" in args.command:
        tokens.insert(0, args.command)
        command = values.pop("command", None)
    for tok in tokens:
        if "=" in tok:
            k, v = (s.strip() for s in tok.split("=", 1))
            values[k] = v
        elif tok.lower() in POTENTIALS:
            values["potential"] = tok.lower()
        else:
            raise ConfigError(f"unrecognised argument {tok!r}")
    values.pop("command", None)
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}; got {command!r}")
    threads = args.threads
    if threads is None:
        env = os.environ.get("BESSELKIT_THREADS")
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"BESSELKIT_THREADS must be an integer, got {env!r}") from None
    fmt = args.format or values.pop("format", None) or ("jsonl" if command == "spectrum" else "csv")
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"format must be csv or jsonl, got {fmt!r}")
    cfg = RunConfig(command, values, args.out or values.pop("out", None), fmt, threads)
    # flags win over settings
    cfg.grid_n = args.grid_n if args.grid_n is not None else cfg.get_int("grid_n", N_DEFAULT)
    cfg.x_min = args.xmin if args.xmin is not None else (cfg.get_float("xmin") if "xmin" in values else None)
    if args.xmax is not None:
        cfg.x_max = args.xmax
    elif "xmax" in values:
        cfg.x_max = cfg.get_float("xmax")
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.threads < 1:
        raise ConfigError("threads must be positive")
    if cfg.grid_n < 64:
        raise ConfigError("grid-n must be at least 64")
    if cfg.x_min is not None and not cfg.x_min > 0:
        raise ConfigError("xmin must be positive")
    if cfg.x_max is not None and not cfg.x_max > (cfg.x_min or 0.0):
        raise ConfigError("xmax must exceed xmin")
    for key in ("k", "k_min", "k_max"):
        if cfg.has(key) and cfg.get_complex(key).real < 0:
            raise ConfigError(f"{key} must have Re >= 0")
    if cfg.has("k_list") and any(z.real < 0 for z in cfg.get_list("k_list")):
        raise ConfigError("k_list entries must have Re >= 0")


# ------------------------------------------------------------- potentials


def make_potential(cfg: RunConfig) -> PotentialSpec:
    kind = cfg.get_str("potential", "zero").lower()
    if kind == "zero":
        return Zero()
    if kind == "powerlaw":
        return PowerLaw(cfg.get_complex("c", 1.0), cfg.get_float("alpha", 1.0), cfg.get_float("x_c", 1.0))
    if kind == "coulomb":
        return CoulombCutoff(cfg.get_float("beta", 1.0), cfg.get_float("x_c", 1.0))
    if kind == "well":
        return SquareWell(cfg.get_complex("V0", 1.0), cfg.get_float("x0", 0.0), cfg.get_float("x1", 1.0))
    if kind == "expdecay":
        return ExpDecay(cfg.get_complex("c", 1.0), cfg.get_float("lam", 1.0))
    if kind == "tabulated":
        return read_tabulated(cfg.get_str("file"), cfg.get_float("sing_exponent", 0.0),
                              cfg.get_float("decay_exponent", math.inf))
    raise ConfigError(f"potential must be one of {', '.join(POTENTIALS)}; got {kind!r}")


def _grid(cfg: RunConfig, k: complex, Q: PotentialSpec, extra=()) -> RadialGrid:
    return default_grid(k, Q, n=cfg.grid_n, x_min=cfg.x_min, x_max=cfg.x_max, extra_breakpoints=extra)


def _k_values(cfg: RunConfig) -> list[complex]:
    if cfg.has("k_list"):
        return cfg.get_list("k_list")
    if cfg.has("k_min") or cfg.has("k_max"):
        a, b = cfg.get_complex("k_min"), cfg.get_complex("k_max")
        num = cfg.get_int("k_num", 11)
        if num < 1:
            raise ConfigError("k_num must be positive")
        return [complex(z) for z in np.linspace(a, b, num)]
    return [cfg.get_complex("k", 1.0)]


# ----------------------------------------------------------------- output


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    notes: dict = field(default_factory=dict)


def format_complex(z: complex) -> str:
    z = complex(z)
    if math.isinf(abs(z)):
        return "inf"
    if z.imag == 0:
        return repr(z.real)
    return f"{z.real!r}{'+' if z.imag >= 0 else '-'}{abs(z.imag)!r}i"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return format_complex(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def render(table: Table, fmt: str, command: str) -> str:
    buf = io.StringIO()
    if fmt == "csv":
        meta = {"besselkit": __version__, "command": command, **table.notes}
        buf.write("# " + " ".join(f"{k}={_cell(v)}" for k, v in meta.items()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_cell(v) for v in row])
    else:
        for row in table.rows:
            rec = {c: _json_safe(v) for c, v in zip(table.columns, row)}
            buf.write(json.dumps(rec) + "\n")
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (complex, np.complexfloating)):
        return format_complex(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _sweep(cfg: RunConfig, fn: Callable, items: list) -> list:
    """Map fn over items, in parallel when threads > 1, keeping input order."""
    if cfg.threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


# --------------------------------------------------------------- commands


def _solution_table(f: GridFunction) -> Table:
    vals, ders = f.plain()
    t = Table(["x", "re_f", "im_f", "re_df", "im_df"])
    for x, v, d in zip(f.grid.nodes, vals, ders):
        t.rows.append([float(x), v.real, v.imag, d.real, d.imag])
    return t


def cmd_solve(cfg: RunConfig) -> Table:
    Q = make_potential(cfg)
    m = cfg.get_complex("m", 0.5)
    k = cfg.get_complex("k", 1.0)
    kind = cfg.get_str("solution", "u").lower()
    a = cfg.get_float("a") if cfg.has("a") else None
    n = cfg.get_int("n", 1)
    extra = [a] if a else ()
    grid = _grid(cfg, k, Q, extra)
    builders = {
        "u": lambda: so.build_u(m, k, Q, grid),
        "p0": lambda: so.build_p0(k, Q, grid),
        "w": lambda: so.build_w(m, k, Q, grid),
        "v": lambda: so.build_v(m, k, Q, grid),
        "q": lambda: so.build_q(m, Q, _grid(cfg, 0.0, Q)),
        "q0ln": lambda: so.build_q0ln(Q, _grid(cfg, 0.0, Q)),
        "u_bowtie": lambda: so.build_u_bowtie(m, k, Q, a, grid),
        "p_diamond": lambda: so.build_p_diamond(k, Q, a, grid),
        "u0n": lambda: so.build_u0n(n, m, k, Q, grid, a or 1.0),
        "un": lambda: so.build_un(n, m, k, Q, grid),
    }
    if kind not in builders:
        raise ConfigError(f"solution must be one of {', '.join(builders)}")
    res = builders[kind]()
    f = res.data if isinstance(res, so.SolutionBundle) else res
    t = _solution_table(f)
    t.notes.update({"solution": kind, "m": m, "k": k, "potential": Q.label()})
    if isinstance(res, so.SolutionBundle) and res.report is not None:
        t.notes["neumann_terms"] = res.report.terms_used
    return t


def cmd_jost(cfg: RunConfig) -> Table:
    Q = make_potential(cfg)
    m = cfg.get_complex("m", 0.5)
    method = cfg.get_str("method", "WronskianMatch")
    ks = _k_values(cfg)
    explicit_grid = cfg.x_max is not None or cfg.x_min is not None

    def one(k):
        grid = _grid(cfg, k, Q) if explicit_grid else None
        return js.jost(m, k, Q, method=method, grid=grid, n=cfg.grid_n)

    results = _sweep(cfg, one, ks)
    t = Table(["re_k", "im_k", "re_jost", "im_jost", "abs_jost", "cross_check_dev"],
              notes={"m": m, "method": method, "potential": Q.label()})
    for k, r in zip(ks, results):
        t.rows.append([k.real, k.imag, r.value.real, r.value.imag, abs(r.value), float(r.cross_check_dev)])
    return t


def cmd_spectrum(cfg: RunConfig) -> Table:
    Q = make_potential(cfg)
    m = cfg.get_complex("m", 0.5)
    region = (cfg.get_float("re_min", 0.05), cfg.get_float("re_max", 5.0),
              cfg.get_float("im_min", -1.0), cfg.get_float("im_max", 1.0))
    zeros = js.find_jost_zeros(m, Q, region, n=cfg.grid_n)
    t = Table(["re_k", "im_k", "eigenvalue_re", "eigenvalue_im", "jost_abs", "multiplicity"],
              notes={"m": m, "potential": Q.label()})
    for k, mult in zeros:
        lam = -k * k
        t.rows.append([k.real, k.imag, lam.real, lam.imag, abs(js.jost_value(m, k, Q, n=cfg.grid_n)), mult])
    return t


def _kernel_spec(cfg: RunConfig, m: complex, k: complex) -> js.PerturbedKernelSpec:
    kind = cfg.get_str("realization", "Pure")
    return js.PerturbedKernelSpec(
        kind, m, k,
        kappa=cfg.get_complex("kappa") if cfg.has("kappa") else None,
        nu=cfg.get_complex("nu") if cfg.has("nu") else None,
        n=cfg.get_int("n", 0))


def cmd_green(cfg: RunConfig) -> Table:
    Q = make_potential(cfg)
    m = cfg.get_complex("m", 0.5)
    k = cfg.get_complex("k", 1.0)
    pts = [z.real for z in cfg.get_list("points")] if cfg.has("points") else list(np.geomspace(0.01, 10.0, 8))
    if any(p <= 0 for p in pts):
        raise ConfigError("points must be positive")
    xs, ys = np.meshgrid(pts, pts, indexing="ij")
    if Q.is_zero and cfg.get_str("realization", "Pure") == "Pure":
        vals = eval_kernel(KernelSpec("Bowtie", m, k), xs, ys)
    else:
        spec = _kernel_spec(cfg, m, k)
        vals = js.perturbed_kernel(spec, Q, _grid(cfg, k, Q))(xs, ys)
    t = Table(["x", "y", "re_G", "im_G"], notes={"m": m, "k": k, "potential": Q.label()})
    for x, y, v in zip(xs.ravel(), ys.ravel(), np.ravel(vals)):
        t.rows.append([float(x), float(y), complex(v).real, complex(v).imag])
    return t


def cmd_resolvent(cfg: RunConfig) -> Table:
    Q = make_potential(cfg)
    m = cfg.get_complex("m", 0.5)
    k = cfg.get_complex("k", 1.0)
    lo, hi = cfg.get_float("g_lo", 1.0), cfg.get_float("g_hi", 2.0)
    if not 0 < lo < hi:
        raise ConfigError("need 0 < g_lo < g_hi")
    grid = _grid(cfg, k, Q, (lo, hi))
    x = grid.nodes
    inside = (x > lo) & (x < hi)
    s = np.sin(np.pi * (x - lo) / (hi - lo))
    g = GridFunction(grid, np.where(inside, s * s, 0.0).astype(complex),
                     np.where(inside, 2 * s * np.cos(np.pi * (x - lo) / (hi - lo)) * np.pi / (hi - lo), 0.0).astype(complex))
    spec = _kernel_spec(cfg, m, k)
    f = js.resolvent_apply(spec, Q, g)
    rel = so.relative_residual(f, m, k, Q, g.values)
    t = _solution_table(f)
    t.notes.update({"realization": spec.realization, "m": m, "k": k, "potential": Q.label(),
                    "relative_residual": f"{rel:.3e}"})
    return t


def cmd_boundary(cfg: RunConfig) -> Table:
    Q = make_potential(cfg)
    m = cfg.get_complex("m", 0.5)
    basis = bd.boundary_basis(m, Q, _grid(cfg, 0.0, Q))
    t = Table(["index", "label", "case", "a", "n"], notes={"m": m, "potential": Q.label()})
    for i, phi in enumerate(basis, start=1):
        t.rows.append([i, phi.label, phi.case, phi.params.get("a", ""), phi.params.get("n", "")])
    return t


def _realization(cfg: RunConfig, m: complex) -> bd.RealizationSpec:
    kind = cfg.get_str("realization", "Hm")
    return bd.RealizationSpec(
        kind, m,
        kappa=cfg.get_complex("kappa") if cfg.has("kappa") else None,
        nu=cfg.get_complex("nu") if cfg.has("nu") else None,
        n=cfg.get_int("n", 0))


def cmd_scatlen(cfg: RunConfig) -> Table:
    Q = make_potential(cfg)
    m = cfg.get_complex("m", 0.5)
    spec = _realization(cfg, m)
    grid = None
    if cfg.x_max is not None or cfg.grid_n != N_DEFAULT or cfg.x_min is not None:
        grid = _grid(cfg, 0.0, Q, (bd._x_star(Q),))
    r = bd.scattering_length(spec, Q, grid)
    t = Table(["re_a", "im_a", "is_infinite", "x_star"], notes={"realization": spec.label, "potential": Q.label()})
    inf = math.isinf(abs(r.a))
    t.rows.append([math.inf if inf else r.a.real, 0.0 if inf else r.a.imag, inf, r.x_star])
    return t


def selftest_checks() -> list[tuple[str, float, float]]:
    """(name, deviation, tolerance) for the built-in identity suite."""
    rng = np.random.default_rng(20240611)
    out = []
    ms = rng.uniform(-1.5, 1.5, 20) + 1j * rng.uniform(-0.5, 0.5, 20)
    zs = rng.uniform(0.1, 30.0, 20) * np.exp(1j * rng.uniform(-np.pi / 2, np.pi / 2, 20))
    dev = 0.0
    for m, z in zip(ms, zs):
        I, dI = sf.calI_with_derivative(m, z)
        K, dK = sf.calK_with_derivative(m, z)
        dev = max(dev, abs(K * dI - dK * I - 1.0))
    out.append(("wronskian_K_I", dev, 1e-9))
    z = np.array([0.3, 1.0, 2.5 + 1j, 12.0 - 3j])
    out.append(("K_half_is_exp", float(np.max(np.abs(sf.calK(0.5, z) / np.exp(-z) - 1.0))), 1e-9))
    out.append(("I_half_is_sinh", float(np.max(np.abs(sf.calI(0.5, z) / np.sinh(z) - 1.0))), 1e-9))
    out.append(("K_even_in_m", float(np.max(np.abs(sf.calK(0.3 + 0.2j, z) / sf.calK(-0.3 - 0.2j, z) - 1.0))), 1e-12))
    out.append(("jost_zero_potential", abs(js.jost(0.5, 1.0, Zero()).value - 1.0), 1e-12))
    Q = SquareWell(4.0, 0.0, 1.0)
    r = js.jost(0.5, 1.0, Q, n=1024)
    out.append(("jost_methods_agree", float(r.cross_check_dev / abs(r.value)), 1e-6))
    a = bd.scattering_length(bd.Hm(0.5), Zero()).a
    out.append(("scatlen_zero_potential", abs(a), 1e-10))
    return out


def cmd_selftest(cfg: RunConfig) -> Table:
    t = Table(["check", "deviation", "tolerance", "pass"])
    for name, dev, tol in selftest_checks():
        t.rows.append([name, float(dev), tol, bool(dev <= tol)])
    return t


HANDLERS = {"solve": cmd_solve, "jost": cmd_jost, "spectrum": cmd_spectrum, "green": cmd_green,
            "resolvent": cmd_resolvent, "boundary": cmd_boundary, "scatlen": cmd_scatlen,
            "selftest": cmd_selftest}


# ------------------------------------------------------------------ driver


EXIT_CODES = {"config": EXIT_CONFIG, "class": EXIT_CLASS, "numerical": EXIT_NUMERICAL}


def _error_exit(exc: BaseException, category: str) -> int:
    code = EXIT_CODES[category]
    sys.stderr.write(json.dumps({"error": category, "type": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")
    return code


def run(cfg: RunConfig) -> int:
    """Execute a validated configuration and write its table."""
    table = HANDLERS[cfg.command](cfg)
    text = render(table, cfg.fmt, cfg.command)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    if cfg.command == "selftest" and not all(row[3] for row in table.rows):
        return EXIT_NUMERICAL
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cfg = build_config(argv)
        return run(cfg)
    except BesselKitError as exc:
        return _error_exit(exc, exc.category)
    except (FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
        return _error_exit(exc, "numerical")
    except BrokenPipeError:
        # downstream reader closed early (e.g. `| head`); not an error
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except OSError as exc:
        return _error_exit(exc, "config")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
