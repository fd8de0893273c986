"""Command line front end: ``layerdiff {solve,verify,roots} --config run.toml``.

A run is described by one TOML document::

    [grid]
    t_end = 0.5
    n_steps = 200

    [weight]              # optional, defaults rho = 0, m = 1, tau = 1
    rho = 1.0

    [solver]              # optional
    K = 64
    x_nodes = 33

    [stack]
    partition = [0.0, 0.5, 1.0]
    ratio = [1.0]         # Lambda_j, one per interior point
    left = { robin = [1.0, 0.0], data = 0.0 }
    right = { robin = [1.0, 0.0], data = { kind = "sinusoid", coefficients = [1.0, 5.0] } }

    [[layer]]             # one table per layer, left to right
    d = 1.0
    eta = { kind = "sinusoid", coefficients = [1.0, 3.141592653589793] }
    flux = [0.0, 1.0]     # (nu_j, mu_j), needed when there are several layers
    source = [{ x = 1.0, t = { kind = "exponential", coefficients = [1.0, -1.0] } }]

    [fd]                  # reference solver for ``verify``
    nodes = 257

    [verify]              # pass/fail thresholds
    rel_l2 = 5e-3

Function entries use the :class:`~layerdiff.funcspace.FunctionSpec`
dictionary form; a bare number is a constant.  Validation collects every
problem before giving up and prints them as a JSON list on stderr.

Exit codes: 0 success or pass, 1 invalid config, 2 solver error,
3 verification failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fdoracle import FdConfig, compare_fields, interface_residuals, pde_residual, solve_fd
from .funcspace import FunctionSpec, SpaceTimeFunctionSpec, TimeGrid, TimeSeries, WeightParams
from .multilayer import (
    SeriesDivergenceError,
    SingularRenewalError,
    SingularSystemError,
    StackError,
    StackSpec,
    assemble_solution,
    build_volterra_system,
    interface_probe_nodes,
    layer_bases,
    solve_interfaces,
)
from .spectral import RobinVector, SpectralError, find_roots
from .transforms import TruncationError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_FAIL = 0, 1, 2, 3

LEFT_LABEL = "|ı|+|ι|>0"
RIGHT_LABEL = "|ℓ|+|l|>0"
FLUX_LABEL = "|ν_j|+|μ_j|>0"

SOLVER_ERRORS = (
    SpectralError,
    SingularSystemError,
    SingularRenewalError,
    SeriesDivergenceError,
    TruncationError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class ConfigError(ValueError):
    """Invalid run configuration; ``errors`` holds ``{"path", "message"}`` items."""

    def __init__(self, errors: list[dict[str, str]]):
        super().__init__("; ".join(f"{e['path']}: {e['message']}" for e in errors))
        self.errors = errors


@dataclass(frozen=True)
class Thresholds:
    """Verification limits.

    ``rel_l2`` bounds the relative L2 distance to the reference solver,
    ``interface`` the interface residuals relative to the field's sup
    norm and ``tail_bound`` the series truncation bound of every layer.
    ``pde`` (absolute PDE residual) is only checked when set.
    """

    rel_l2: float = 5e-3
    interface: float = 1e-3
    tail_bound: float = 1e-6
    pde: float | None = None


@dataclass(frozen=True)
class RunConfig:
    stack: StackSpec
    grid: TimeGrid
    K: int = 64
    x_nodes: int = 33
    method: str = "march"
    interp: str = "linear"
    tol: float = 1e-12
    max_terms: int = 200
    fd: FdConfig = field(default_factory=FdConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    t_min: float | None = None
    out: Path = Path(".")
    raw: Mapping[str, Any] = field(default_factory=dict, repr=False)

    @property
    def tail_time(self) -> float:
        """Smallest time at which truncation bounds are reported."""
        return self.t_min if self.t_min is not None else self.grid.dt


# --- parsing ------------------------------------------------------------------


class _Collector:
    def __init__(self) -> None:
        self.errors: list[dict[str, str]] = []

    def add(self, path: str, message: str) -> None:
        self.errors.append({"path": path, "message": message})

    def take(self, path: str, build: Callable[[], Any], default: Any = None) -> Any:
        try:
            return build()
        except (ValueError, TypeError, KeyError) as exc:
            msg = str(exc) if not isinstance(exc, KeyError) else f"missing key {exc}"
            self.add(path, msg)
            return default


def _section(raw: Mapping, name: str, col: _Collector) -> Mapping:
    sec = raw.get(name, {})
    if not isinstance(sec, Mapping):
        col.add(name, "must be a table")
        return {}
    return sec


def _unknown(sec: Mapping, allowed: set[str], path: str, col: _Collector) -> None:
    for key in sorted(set(sec) - allowed):
        col.add(f"{path}.{key}" if path else key, "unknown key")


def _robin(pair: Any, label: str) -> RobinVector:
    if not isinstance(pair, Sequence) or isinstance(pair, str) or len(pair) != 2:
        raise ValueError("expected a pair [c0, c1]")
    return RobinVector(float(pair[0]), float(pair[1]), label)


def _source(entries: Any) -> SpaceTimeFunctionSpec | None:
    if entries is None:
        return None
    if isinstance(entries, Mapping):
        entries = [entries]
    return SpaceTimeFunctionSpec.from_dict(entries)


def parse_config(raw: Mapping[str, Any], out: Path | None = None) -> RunConfig:
    """Validate a parsed TOML document and build the run description."""
    col = _Collector()
    _unknown(raw, {"grid", "weight", "solver", "stack", "layer", "fd", "verify", "output"}, "", col)

    g = _section(raw, "grid", col)
    _unknown(g, {"t_end", "n_steps"}, "grid", col)
    grid = col.take("grid", lambda: TimeGrid(float(g["t_end"]), g["n_steps"]))

    w = _section(raw, "weight", col)
    _unknown(w, {"rho", "m", "tau"}, "weight", col)
    weight = col.take("weight", lambda: WeightParams(**{k: float(v) for k, v in w.items()}), WeightParams())

    s = _section(raw, "solver", col)
    _unknown(s, {"K", "x_nodes", "method", "interp", "tol", "max_terms", "t_min"}, "solver", col)
    K = s.get("K", 64)
    if not isinstance(K, int) or K < 0:
        col.add("solver.K", "must be a non-negative integer")
    nx = s.get("x_nodes", 33)
    if not isinstance(nx, int) or nx < 2:
        col.add("solver.x_nodes", "must be an integer >= 2")
    method = s.get("method", "march")
    if method not in ("march", "neumann"):
        col.add("solver.method", "must be 'march' or 'neumann'")
    interp = s.get("interp", "linear")
    if interp not in ("linear", "constant"):
        col.add("solver.interp", "must be 'linear' or 'constant'")
    t_min = s.get("t_min")
    if t_min is not None and not (isinstance(t_min, (int, float)) and t_min > 0):
        col.add("solver.t_min", "must be positive")

    st = _section(raw, "stack", col)
    _unknown(st, {"partition", "ratio", "left", "right"}, "stack", col)
    layers = raw.get("layer", [])
    if not isinstance(layers, list) or not layers:
        col.add("layer", "need at least one [[layer]] table")
        layers = []
    n = len(layers)
    partition = st.get("partition")
    if partition is None:
        col.add("stack.partition", "missing")
    ratio = st.get("ratio", [1.0] * max(n - 1, 0))

    ends = {}
    for side, label in (("left", LEFT_LABEL), ("right", RIGHT_LABEL)):
        sec = st.get(side, {})
        if not isinstance(sec, Mapping):
            col.add(f"stack.{side}", "must be a table")
            sec = {}
        _unknown(sec, {"robin", "data"}, f"stack.{side}", col)
        vec = col.take(f"stack.{side}.robin", lambda: _robin(sec["robin"], label))
        data = col.take(f"stack.{side}.data", lambda: FunctionSpec.from_dict(sec.get("data", 0.0)))
        ends[side] = (vec, data)

    d, eta, flux, source = [], [], [], []
    for j, lay in enumerate(layers):
        path = f"layer[{j}]"
        if not isinstance(lay, Mapping):
            col.add(path, "must be a table")
            continue
        _unknown(lay, {"d", "eta", "flux", "source"}, path, col)
        dj = col.take(f"{path}.d", lambda: float(lay["d"]))
        if dj is not None and not (dj > 0.0 and math.isfinite(dj)):
            col.add(f"{path}.d", "diffusivity must be positive")
        d.append(dj)
        eta.append(col.take(f"{path}.eta", lambda: FunctionSpec.from_dict(lay.get("eta", 0.0))))
        if n > 1:
            flux.append(col.take(f"{path}.flux", lambda: _robin(lay["flux"], FLUX_LABEL)))
        source.append(col.take(f"{path}.source", lambda: _source(lay.get("source"))))

    f = _section(raw, "fd", col)
    _unknown(f, {"nodes", "dt", "theta"}, "fd", col)
    fd = col.take("fd", lambda: FdConfig(
        nodes=tuple(f["nodes"]) if isinstance(f.get("nodes"), list) else f.get("nodes", 129),
        dt=f.get("dt"),
        theta=float(f.get("theta", 0.5)),
    ), FdConfig())

    v = _section(raw, "verify", col)
    _unknown(v, {"rel_l2", "interface", "tail_bound", "pde"}, "verify", col)
    thresholds = col.take("verify", lambda: Thresholds(**{k: float(x) for k, x in v.items()}), Thresholds())

    o = _section(raw, "output", col)
    _unknown(o, {"dir"}, "output", col)
    out_dir = Path(out) if out is not None else Path(o.get("dir", "."))

    if col.errors:
        raise ConfigError(col.errors)
    try:
        stack = StackSpec(
            partition=tuple(float(p) for p in partition),
            d=tuple(d),
            eta=tuple(eta),
            outer_left=ends["left"][0],
            outer_right=ends["right"][0],
            zeta=ends["left"][1],
            xi=ends["right"][1],
            ratio=tuple(float(r) for r in ratio),
            flux=tuple(flux),
            source=tuple(source),
            weight=weight,
        )
    except StackError as exc:
        raise ConfigError([{"path": "stack", "message": m} for m in exc.errors]) from None
    except (ValueError, TypeError) as exc:
        raise ConfigError([{"path": "stack", "message": str(exc)}]) from None
    return RunConfig(
        stack=stack,
        grid=grid,
        K=K,
        x_nodes=nx,
        method=method,
        interp=interp,
        tol=float(s.get("tol", 1e-12)),
        max_terms=int(s.get("max_terms", 200)),
        fd=fd,
        thresholds=thresholds,
        t_min=None if t_min is None else float(t_min),
        out=out_dir,
        raw=raw,
    )


def load_config(path: str | Path, out: Path | None = None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError([{"path": str(path), "message": exc.strerror or str(exc)}]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([{"path": str(path), "message": f"invalid TOML: {exc}"}]) from None
    return parse_config(raw, out)


# --- artifacts ------------------------------------------------------------------


def _fmt(v: float) -> str:
    return "%.17g" % v


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    """CSV with 17 significant digits and ``\\n`` line endings."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, (int, np.integer)) else _fmt(c) for c in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Header and float array of a CSV written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return header, data


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, obj: Any) -> None:
    with open(path, "w", newline="") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- runs -----------------------------------------------------------------------


def _analytic(cfg: RunConfig, K: int | None = None):
    """Bases, interface fluxes and series field of the configured stack."""
    K = cfg.K if K is None else K
    stack, grid = cfg.stack, cfg.grid
    bases = layer_bases(stack, K)
    if stack.n_layers == 1:
        h = TimeSeries(grid, np.zeros((len(grid), 0)))
    else:
        system = build_volterra_system(stack, grid, K, bases, cfg.interp)
        h = solve_interfaces(system, tol=cfg.tol, max_terms=cfg.max_terms, method=cfg.method)
    field_ = assemble_solution(stack, h, grid, K, cfg.x_nodes, bases)
    return bases, h, field_


def _tail_bounds(cfg: RunConfig, bases) -> list[float]:
    out = []
    for bs in bases:
        geom = bs.geometry
        ends = np.array([0.0, geom.width])
        coef = 1.0
        if bs.K:
            coef = max(coef, float(np.max(np.abs(bs.phi_coefficients(ends, bs.a)))),
                       float(np.max(np.abs(bs.phi_coefficients(ends, bs.b)))))
        out.append(bs.tail_bound(cfg.tail_time, coef))
    return out


def run_solve(cfg: RunConfig) -> dict:
    """Write ``solution.csv`` and ``metadata.json``; returns the metadata."""
    bases, h, fld = _analytic(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "solution.csv", ("x", "t", "layer", "phi"), fld.rows())
    meta = {
        "n_layers": cfg.stack.n_layers,
        "K": cfg.K,
        "grid": {"t_end": cfg.grid.t_end, "n_steps": cfg.grid.n_steps},
        "x_nodes": cfg.x_nodes,
        "tail_time": cfg.tail_time,
        "layers": [
            {"layer": j + 1, "s_next": bs.s_next, "degenerate": bs.degenerate, "tail_bound": tb}
            for j, (bs, tb) in enumerate(zip(bases, _tail_bounds(cfg, bases)))
        ],
        "sup_norm": fld.sup_norm(),
    }
    if cfg.stack.n_layers > 1:
        meta["interfaces"] = {k: h.meta[k] for k in ("method", "interp", "residual", "condition") if k in h.meta}
    write_json(cfg.out / "metadata.json", meta)
    return meta


def verify_report(cfg: RunConfig) -> dict:
    """Compare the series solution with the reference solver."""
    th = cfg.thresholds
    bases, h, fld = _analytic(cfg)
    ref = solve_fd(cfg.stack, cfg.fd, cfg.grid)
    cmp_ = compare_fields(fld, ref)
    norm = fld.sup_norm()
    probe = assemble_solution(cfg.stack, h, cfg.grid, cfg.K, interface_probe_nodes(cfg.stack), bases)
    iface = interface_residuals(probe, cfg.stack)
    pde = pde_residual(fld, cfg.stack)
    tails = _tail_bounds(cfg, bases)
    scale = max(norm, np.finfo(float).tiny)
    worst_iface = max([max(r["continuity"], r["flux"]) for r in iface], default=0.0)
    checks = {
        "rel_l2": {"value": cmp_["rel_l2"], "threshold": th.rel_l2, "pass": cmp_["rel_l2"] <= th.rel_l2},
        "interface": {
            "value": worst_iface,
            "threshold": th.interface * norm,
            "pass": worst_iface <= th.interface * scale,
        },
        "tail_bound": {"value": max(tails), "threshold": th.tail_bound, "pass": max(tails) <= th.tail_bound},
    }
    if th.pde is not None:
        checks["pde"] = {"value": max(pde), "threshold": th.pde, "pass": max(pde) <= th.pde}
    return {
        "pass": all(c["pass"] for c in checks.values()),
        "checks": checks,
        "sup_norm": norm,
        "rel_l2": cmp_["rel_l2"],
        "max_abs": cmp_["max_abs"],
        "layers": [
            {"layer": j + 1, **c, "pde_residual": p, "tail_bound": t}
            for j, (c, p, t) in enumerate(zip(cmp_["layers"], pde, tails))
        ],
        "interfaces": iface,
        "K": cfg.K,
        "reference": ref.metadata,
    }


def run_verify(cfg: RunConfig) -> dict:
    report = verify_report(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_json(cfg.out / "verify_report.json", report)
    return report


def roots_table(cfg: RunConfig, layer: int | None = None, count: int | None = None) -> list[tuple]:
    """Rows ``(layer, k, s_k, delta_prime, tail_bound)``; layers are 1-based.

    ``tail_bound`` is ``exp(s_{k+1} t_min / tau)``, the decay of the first
    root dropped when the series is cut after ``k`` terms.
    """
    stack = cfg.stack
    K = cfg.K if count is None else count
    if K < 0:
        raise ValueError("count must be non-negative")
    layers = range(stack.n_layers) if layer is None else [layer - 1]
    if layer is not None and not 1 <= layer <= stack.n_layers:
        raise ValueError(f"layer must lie in 1..{stack.n_layers}")
    rows = []
    for j in layers:
        bs = find_roots(stack.left_functional(j), stack.right_functional(j), stack.geometry(j), K)
        nxt = np.append(bs.s[1:], bs.s_next)
        for k in range(bs.K):
            tb = math.exp(nxt[k] * cfg.tail_time / stack.weight.tau)
            rows.append((j + 1, k + 1, float(bs.s[k]), float(bs.dprime[k]), tb))
    return rows


def run_roots(cfg: RunConfig, layer: int | None = None, count: int | None = None) -> list[tuple]:
    rows = roots_table(cfg, layer, count)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "roots.csv", ("layer", "k", "s_k", "delta_prime", "tail_bound"), rows)
    return rows


# --- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="layerdiff", description="Semi-analytical layered diffusion solver.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("solve", "series solution to solution.csv"),
        ("verify", "compare against the finite-difference reference"),
        ("roots", "characteristic roots to roots.csv"),
    ):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, type=Path, help="TOML run description")
        sp.add_argument("--out", type=Path, default=None, help="output directory (overrides [output] dir)")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
        if name == "roots":
            sp.add_argument("--layer", type=int, default=None, help="1-based layer (default: all)")
            sp.add_argument("--count", type=int, default=None, help="number of roots (default: solver.K)")
    return p


def _fail(errors: list[dict], code: int) -> int:
    json.dump({"errors": errors}, sys.stderr, ensure_ascii=False)
    sys.stderr.write("\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    say = (lambda *a: None) if args.quiet else print
    try:
        cfg = load_config(args.config, args.out)
    except ConfigError as exc:
        return _fail(exc.errors, EXIT_CONFIG)
    try:
        if args.command == "solve":
            meta = run_solve(cfg)
            say(f"wrote {cfg.out / 'solution.csv'} (sup |phi| = {meta['sup_norm']:.6g})")
        elif args.command == "verify":
            rep = run_verify(cfg)
            for name, c in rep["checks"].items():
                say(f"{name:<11} {'PASS' if c['pass'] else 'FAIL'}  {c['value']:.3e} (limit {c['threshold']:.3e})")
            say("PASS" if rep["pass"] else "FAIL")
            if not rep["pass"]:
                return EXIT_FAIL
        else:
            try:
                rows = run_roots(cfg, args.layer, args.count)
            except ValueError as exc:
                return _fail([{"path": "arguments", "message": str(exc)}], EXIT_CONFIG)
            say(f"wrote {len(rows)} roots to {cfg.out / 'roots.csv'}")
    except SOLVER_ERRORS as exc:
        return _fail([{"path": args.command, "message": f"{type(exc).__name__}: {exc}"}], EXIT_SOLVER)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
