"""Command-line front end: scans, kernels, the endpoint scan and verification.

Configuration is an INI file parsed strictly; unknown sections or keys are
errors.  Example::

    [function]
    id = gamma_ratio

    [grid]
    spacing = 1/128
    right_margin = 16

    [scan]
    t_min = -1
    t_max = 0.5
    t_step = 0.25

    [probes]
    z = 1j, 2j, 0.5+1j

    [output]
    format = csv

Exit codes: 0 success, 1 configuration error, 2 computation error,
3 verification failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import boundary as bd
from .chain import j_formula, j_gram, t0_diagnostics, y_vector
from .errors import CanonsysError, ConfigError
from .evolution import (
    OSCILLATION_BUDGET, ab_direct, ab_ode_anchored, theta_and_E,
)
from .grid import lattice_index
from .kernel import kernel_of
from .operator import (
    DEFAULT_NORM_MARGIN, DEFAULT_RIGHT_MARGIN, DEFAULT_SPACING, GridPolicy, norm_scan,
)
from .unimodular import REGISTRY_IDS, make_function

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_VERIFY = 0, 1, 2, 3
JOBS_ENV = "CANONSYS_JOBS"

SCHEMA = {
    "function": {"id", "params"},
    "grid": {"spacing", "right_margin", "left_margin"},
    "scan": {"t_min", "t_max", "t_step", "t_values"},
    "probes": {"z", "w", "x"},
    "tolerances": {"norm_margin", "oscillation_cap", "ode_budget", "pipeline"},
    "evolve": {"path"},
    "output": {"path", "format"},
    "run": {"seed", "jobs"},
}

HEADERS = {
    "norm-scan": ["t", "norm"],
    "hamiltonian": ["t", "alpha", "beta", "gamma", "re_phipsibar", "err"],
    "evolve": ["t", "re_z", "im_z", "re_A", "im_A", "re_B", "im_B", "path", "err"],
    "rkernel": ["t", "re_z", "im_z", "re_w", "im_w", "re_j_formula", "im_j_formula",
                "re_j_gram", "im_j_gram", "err"],
    "t0-scan": ["t", "norm", "j_diag", "y_norm", "err"],
}


@dataclass
class RunConfig:
    function_id: str = "pw"
    params: tuple = (1.0,)
    spacing: float = DEFAULT_SPACING
    right_margin: float = DEFAULT_RIGHT_MARGIN
    left_margin: float | None = None
    t_values: list = field(default_factory=list)
    z: list = field(default_factory=lambda: [1j])
    w: list | None = None
    x: list = field(default_factory=list)
    norm_margin: float = DEFAULT_NORM_MARGIN
    oscillation_cap: float = OSCILLATION_BUDGET
    ode_budget: float = 1e-4
    pipeline: float = 1e-3
    evolve_path: str = "direct"
    output_path: str | None = None
    output_format: str = "csv"
    seed: int = 0
    jobs: int | None = None

    @property
    def policy(self) -> GridPolicy:
        return GridPolicy(spacing=self.spacing, right_margin=self.right_margin,
                          left_margin=self.left_margin, norm_margin=self.norm_margin)

    def build(self):
        u = make_function(self.function_id, self.params)
        return u, kernel_of(u)


# ---------------------------------------------------------------------------
# parsing


def _real(text: str, where: str) -> float:
    text = text.strip()
    try:
        if "/" in text or "^" in text:
            if "^" in text:
                base, exp = text.split("^")
                return float(Fraction(base.strip())) ** float(Fraction(exp.strip()))
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{where}: expected a real number, got {text!r}") from None


def _complex(text: str, where: str) -> complex:
    s = text.strip().replace(" ", "").replace("i", "j")
    if s.endswith("j") and (s == "j" or s[-2:-1] in "+-"):
        s = s[:-1] + "1j"
    try:
        return complex(s)
    except ValueError:
        raise ConfigError(f"{where}: expected a complex number, got {text!r}") from None


def _list(text: str, conv, where: str) -> list:
    items = [p for p in text.replace(";", ",").split(",") if p.strip()]
    return [conv(p, where) for p in items]


def _params(id_: str, text: str, where: str):
    if id_ != "product":
        return tuple(_list(text, _complex, where))
    factors = []
    for chunk in text.split("|"):
        parts = chunk.split()
        if not parts:
            continue
        sub = parts[0]
        vals = [_complex(p, where) for p in " ".join(parts[1:]).replace(",", " ").split()]
        factors.append((sub, [v.real if v.imag == 0 and sub == "pw" else v for v in vals]))
    return tuple(factors)


def _line_numbers(text: str) -> dict:
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            lines.setdefault((section, None), no)
        elif s and not s.startswith(("#", ";")) and ("=" in s or ":" in s) and section:
            key = s.split("=", 1)[0].split(":", 1)[0].strip().lower()
            lines.setdefault((section, key), no)
    return lines


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a configuration; every violation raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    lines = _line_numbers(text)

    def where(sec, key=None):
        no = lines.get((sec, key)) or lines.get((sec, None))
        return f"{source}:{no} [{sec}]" + (f" {key}" if key else "")

    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{where(sec)}: unknown section")
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{where(sec, key)}: unknown key")
    cfg = RunConfig()
    get = lambda s, k: cp.get(s, k) if cp.has_option(s, k) else None  # noqa: E731
    if (v := get("function", "id")) is not None:
        cfg.function_id = v.strip()
        if cfg.function_id not in REGISTRY_IDS:
            raise ConfigError(f"{where('function', 'id')}: unknown function {cfg.function_id!r}")
        cfg.params = ()
    if (v := get("function", "params")) is not None:
        cfg.params = _params(cfg.function_id, v, where("function", "params"))
    if cfg.function_id == "pw":
        cfg.params = tuple(p.real if isinstance(p, complex) and p.imag == 0 else p for p in cfg.params)
    for key in ("spacing", "right_margin"):
        if (v := get("grid", key)) is not None:
            setattr(cfg, key, _real(v, where("grid", key)))
    if (v := get("grid", "left_margin")) is not None and v.strip().lower() != "auto":
        cfg.left_margin = _real(v, where("grid", "left_margin"))
    if not cfg.spacing > 0:
        raise ConfigError(f"{where('grid', 'spacing')}: spacing must be positive")
    h = cfg.spacing
    if (v := get("scan", "t_values")) is not None:
        if any(get("scan", k) is not None for k in ("t_min", "t_max", "t_step")):
            raise ConfigError(f"{where('scan', 't_values')}: give t_values or a range, not both")
        cfg.t_values = _list(v, _real, where("scan", "t_values"))
    elif get("scan", "t_min") is not None or get("scan", "t_max") is not None:
        t0 = _real(get("scan", "t_min") or "nan", where("scan", "t_min"))
        t1 = _real(get("scan", "t_max") or "nan", where("scan", "t_max"))
        step = _real(get("scan", "t_step") or str(h), where("scan", "t_step"))
        if not (math.isfinite(t0) and math.isfinite(t1)):
            raise ConfigError(f"{where('scan')}: both t_min and t_max are required")
        if not step > 0:
            raise ConfigError(f"{where('scan', 't_step')}: t_step must be positive")
        ratio = step / h
        if abs(ratio - round(ratio)) > 1e-12 * max(1.0, ratio):
            raise ConfigError(f"{where('scan', 't_step')}: t_step {step} is not a multiple of h={h}")
        n = int(math.floor((t1 - t0) / step + 1e-9))
        cfg.t_values = [t0 + i * step for i in range(n + 1)] if t1 >= t0 else []
    for t in cfg.t_values:
        try:
            lattice_index(t, h, "t")
        except CanonsysError:
            raise ConfigError(f"{where('scan')}: t={t} is not on the lattice of spacing {h}") from None
    for key in ("z", "w", "x"):
        if (v := get("probes", key)) is not None:
            conv = _real if key == "x" else _complex
            setattr(cfg, key, _list(v, conv, where("probes", key)))
    for key in ("norm_margin", "oscillation_cap", "ode_budget", "pipeline"):
        if (v := get("tolerances", key)) is not None:
            setattr(cfg, key, _real(v, where("tolerances", key)))
    probes = list(cfg.z) + list(cfg.w or [])
    for z in probes:
        if not z.imag > 0:
            raise ConfigError(f"{where('probes')}: probe {z} must have Im z > 0")
    for z in probes + [complex(x) for x in cfg.x]:
        if h * abs(z) > cfg.oscillation_cap:
            raise ConfigError(f"{where('probes')}: h*|z| = {h * abs(z):.3g} at z={z} exceeds the "
                              f"oscillation cap {cfg.oscillation_cap}")
    if (v := get("evolve", "path")) is not None:
        cfg.evolve_path = v.strip()
        if cfg.evolve_path not in ("direct", "ode", "both"):
            raise ConfigError(f"{where('evolve', 'path')}: path must be direct, ode or both")
    if (v := get("output", "path")) is not None:
        cfg.output_path = v.strip()
    if (v := get("output", "format")) is not None:
        cfg.output_format = v.strip().lower()
    if cfg.output_format not in ("csv", "json"):
        raise ConfigError(f"{where('output', 'format')}: format must be csv or json")
    for key in ("seed", "jobs"):
        if (v := get("run", key)) is not None:
            try:
                setattr(cfg, key, int(v))
            except ValueError:
                raise ConfigError(f"{where('run', key)}: expected an integer") from None
    if cfg.jobs is not None and cfg.jobs < 1:
        raise ConfigError(f"{where('run', 'jobs')}: jobs must be at least 1")
    try:
        u = make_function(cfg.function_id, cfg.params)
        kernel_of(u)
    except CanonsysError as exc:
        raise ConfigError(f"{where('function')}: {type(exc).__name__}: {exc}") from None
    return cfg


# ---------------------------------------------------------------------------
# output


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "" if v is None else str(v)


def render(rows: list[dict], header: list[str], form: str, extra: dict | None = None) -> str:
    if form == "json":
        def conv(v):
            if isinstance(v, (float, np.floating)):
                f = float(v)
                return float("%.17g" % f) if math.isfinite(f) else str(f)
            return v
        body = [{k: conv(r.get(k)) for k in header} for r in rows]
        doc = body if extra is None else dict(rows=body, **{k: conv(v) for k, v in extra.items()})
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(r.get(k)) for k in header])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# per-chunk workers (top level so that they can run in worker processes)


def _workspace(cfg: RunConfig, u, k):
    ts = cfg.t_values
    return bd.Workspace.for_range(k, u, cfg.policy, min(ts), max(ts))


def _chunks(items: list, jobs: int) -> list[list]:
    if not jobs or jobs <= 1 or len(items) <= 1:
        return [items]
    n = min(jobs, len(items))
    return [list(c) for c in np.array_split(np.array(items, dtype=object), n) if len(c)]


def _hamiltonian_rows(cfg: RunConfig, ts: list) -> list[dict]:
    u, k = cfg.build()
    ws = _workspace(cfg, u, k)
    rows = []
    for s in bd.scan_hamiltonian(k, u, cfg.policy, ts, ws=ws):
        if isinstance(s, bd.ScanFailure):
            rows.append(dict(t=s.t, alpha=math.nan, beta=math.nan, gamma=math.nan,
                             re_phipsibar=math.nan, err=s.error))
        else:
            rows.append(dict(t=s.t, alpha=s.alpha, beta=s.beta, gamma=s.gamma,
                             re_phipsibar=s.re_phipsibar, err=""))
    return rows


def _direct_rows(cfg: RunConfig, ts: list) -> list[dict]:
    u, k = cfg.build()
    ws = _workspace(cfg, u, k)
    rows = []
    for t in ts:
        try:
            bs = bd.boundary_solution(ws, t)
        except CanonsysError as exc:
            bs, err = None, f"{type(exc).__name__}: {exc}"
        for z in cfg.z:
            row = dict(t=t, re_z=z.real, im_z=z.imag, path="direct")
            try:
                if bs is None:
                    raise CanonsysError(err)
                ed = theta_and_E(ab_direct(bs, z), u.M_eval)
                row.update(re_A=ed.A.real, im_A=ed.A.imag, re_B=ed.B.real, im_B=ed.B.imag, err="")
            except CanonsysError as exc:
                row.update(re_A=math.nan, im_A=math.nan, re_B=math.nan, im_B=math.nan,
                           err=str(exc) if bs is None else f"{type(exc).__name__}: {exc}")
            rows.append(row)
    return rows


def _ode_rows(cfg: RunConfig) -> list[dict]:
    u, k = cfg.build()
    ts = cfg.t_values
    lo, hi = min(ts), max(ts)
    h = cfg.spacing
    ws = _workspace(cfg, u, k)
    n = int(round((hi - lo) / h))
    samples = bd.scan_hamiltonian(k, u, cfg.policy, [lo + i * h for i in range(n + 1)], ws=ws)
    fails = [s for s in samples if isinstance(s, bd.ScanFailure)]
    rows = []
    if fails:
        for t in ts:
            for z in cfg.z:
                rows.append(dict(t=t, re_z=z.real, im_z=z.imag, re_A=math.nan, im_A=math.nan,
                                 re_B=math.nan, im_B=math.nan, path="ode", err=fails[0].error))
        return rows
    b_lo, b_hi = bd.boundary_solution(ws, lo), bd.boundary_solution(ws, hi)
    for z in cfg.z:
        try:
            states, _ = ab_ode_anchored(samples, ab_direct(b_lo, z), ab_direct(b_hi, z), ts,
                                        budget=cfg.ode_budget)
            errs = [""] * len(ts)
        except CanonsysError as exc:
            states, errs = [None] * len(ts), [f"{type(exc).__name__}: {exc}"] * len(ts)
        for t, s, e in zip(ts, states, errs):
            row = dict(t=t, re_z=z.real, im_z=z.imag, path="ode", err=e)
            if s is None:
                row.update(re_A=math.nan, im_A=math.nan, re_B=math.nan, im_B=math.nan)
            else:
                ed = theta_and_E(s, u.M_eval)
                row.update(re_A=ed.A.real, im_A=ed.A.imag, re_B=ed.B.real, im_B=ed.B.imag)
            rows.append(row)
    # order by t, then probe, as the direct rows
    order = {(t, z): i for i, (t, z) in enumerate((t, z) for t in ts for z in cfg.z)}
    rows.sort(key=lambda r: order[(r["t"], complex(r["re_z"], r["im_z"]))])
    return rows


def _rkernel_rows(cfg: RunConfig, ts: list) -> list[dict]:
    u, k = cfg.build()
    ws = _workspace(cfg, u, k)
    ws_list = cfg.w if cfg.w else cfg.z
    rows = []
    for t in ts:
        for z in cfg.z:
            for w in ws_list:
                row = dict(t=t, re_z=z.real, im_z=z.imag, re_w=w.real, im_w=w.imag)
                try:
                    bs = bd.boundary_solution(ws, t)
                    jf = j_formula(ab_direct(bs, z), ab_direct(bs, w))
                    yz = y_vector(k, u, ws.grid, t, z, ws=ws)
                    yw = yz if w == z else y_vector(k, u, ws.grid, t, w, ws=ws)
                    jg = j_gram(yz, yw)
                    row.update(re_j_formula=jf.real, im_j_formula=jf.imag,
                               re_j_gram=jg.real, im_j_gram=jg.imag, err="")
                except CanonsysError as exc:
                    row.update(re_j_formula=math.nan, im_j_formula=math.nan, re_j_gram=math.nan,
                               im_j_gram=math.nan, err=f"{type(exc).__name__}: {exc}")
                rows.append(row)
    return rows


def _fan_out(fn, cfg: RunConfig) -> list[dict]:
    chunks = _chunks(list(cfg.t_values), cfg.jobs)
    if len(chunks) == 1:
        return fn(cfg, chunks[0])
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(fn, [cfg] * len(chunks), chunks))
    return [r for p in parts for r in p]


# ---------------------------------------------------------------------------
# commands


def cmd_norm_scan(cfg: RunConfig):
    if not cfg.t_values:
        return [], None, EXIT_OK
    u, k = cfg.build()
    ws = _workspace(cfg, u, k)
    res = norm_scan(k, cfg.t_values, cfg.policy, grid=ws.grid)
    rows = [dict(t=t, norm=n) for t, n in res]
    ok = all(n <= 1 - cfg.norm_margin for _, n in res)
    return rows, None, EXIT_OK if ok else EXIT_COMPUTE


def cmd_hamiltonian(cfg: RunConfig):
    if not cfg.t_values:
        return [], None, EXIT_OK
    rows = _fan_out(_hamiltonian_rows, cfg)
    return rows, None, EXIT_COMPUTE if any(r["err"] for r in rows) else EXIT_OK


def cmd_evolve(cfg: RunConfig):
    if not cfg.t_values:
        return [], None, EXIT_OK
    rows = []
    if cfg.evolve_path in ("direct", "both"):
        rows += _fan_out(_direct_rows, cfg)
    if cfg.evolve_path in ("ode", "both"):
        rows += _ode_rows(cfg)
    return rows, None, EXIT_COMPUTE if any(r["err"] for r in rows) else EXIT_OK


def cmd_rkernel(cfg: RunConfig):
    if not cfg.t_values:
        return [], None, EXIT_OK
    rows = _fan_out(_rkernel_rows, cfg)
    return rows, None, EXIT_COMPUTE if any(r["err"] for r in rows) else EXIT_OK


def cmd_t0(cfg: RunConfig):
    if not cfg.t_values:
        return [], dict(t0_estimate=math.inf, decay="t0 beyond scan", reason="empty scan"), EXIT_OK
    u, k = cfg.build()
    rep = t0_diagnostics(k, u, cfg.policy, cfg.t_values, z_probe=cfg.z[0])
    rows = [dict(t=t, norm=n, j_diag=j, y_norm=y, err=rep.errors.get(t, ""))
            for t, n, j, y in zip(rep.t, rep.norm, rep.j_diag, rep.y_norm)]
    extra = dict(t0_estimate=rep.t0_estimate, decay=rep.decay, reason=rep.reason,
                 z_probe=[cfg.z[0].real, cfg.z[0].imag])
    return rows, extra, EXIT_OK


COMMANDS = {
    "norm-scan": cmd_norm_scan,
    "hamiltonian": cmd_hamiltonian,
    "evolve": cmd_evolve,
    "rkernel": cmd_rkernel,
    "t0-scan": cmd_t0,
}


def _write(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _default_jobs() -> int:
    v = os.environ.get(JOBS_ENV)
    if v is None:
        return 1
    try:
        n = int(v)
    except ValueError:
        raise ConfigError(f"{JOBS_ENV}={v!r} is not an integer") from None
    if n < 1:
        raise ConfigError(f"{JOBS_ENV} must be at least 1")
    return n


def list_functions() -> str:
    lines = ["id           symmetric  inner  params"]
    examples = {"pw": ("1.0",), "mobius": (), "blaschke": ("1j",), "gamma_ratio": (),
                "product": ("pw 0.25 | gamma_ratio",)}
    for id_ in REGISTRY_IDS:
        p = examples[id_]
        params = _params(id_, p[0], id_) if p else ()
        u = make_function(id_, params)
        lines.append(f"{id_:<12} {str(u.symmetric):<10} {str(u.inner):<6} "
                     f"{p[0] if p else '-'}")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="canonsys", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--output", help="output path ('-' for stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV} or 1)")
    p = sub.add_parser("verify")
    p.add_argument("--all", action="store_true", help="run every criterion (the default)")
    p.add_argument("--criteria", help="comma-separated criterion numbers")
    p.add_argument("--coarsen", type=int, default=1, help="multiply default spacings by this")
    p.add_argument("--config", help="accepted for symmetry; only [output] and [run] are used")
    p.add_argument("--output")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--jobs", type=int)
    sub.add_parser("list-functions")
    return ap


def _load(args) -> RunConfig:
    if args.config is None:
        cfg = RunConfig()
    else:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from None
        cfg = parse_config(text, args.config)
    if cfg.jobs is None:
        cfg.jobs = _default_jobs()
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg.jobs = args.jobs
    if args.output is not None:
        cfg.output_path = args.output
    if args.format is not None:
        cfg.output_format = args.format
    return cfg


def _verify(args) -> int:
    from .verify import CRITERIA, report, run_all
    cfg = _load(args)
    nums = None
    if args.criteria:
        try:
            nums = [int(s) for s in args.criteria.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"--criteria expects integers, got {args.criteria!r}") from None
        bad = [n for n in nums if n not in CRITERIA]
        if bad:
            raise ConfigError(f"unknown criteria {bad}")
    if args.coarsen < 1:
        raise ConfigError("--coarsen must be a positive integer")
    results = run_all(nums, coarsen=args.coarsen, jobs=cfg.jobs)
    for r in results:
        print(r.line(), file=sys.stderr)
    doc = report(results)
    if cfg.output_format == "csv" and args.format == "csv":
        text = render([dict(criterion=r.number, title=r.title, passed=r.passed,
                            seconds=r.seconds, error=r.error or "") for r in results],
                      ["criterion", "title", "passed", "seconds", "error"], "csv")
    else:
        text = json.dumps(doc, indent=1, default=str) + "\n"
    _write(text, cfg.output_path)
    return EXIT_OK if doc["passed"] else EXIT_VERIFY


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-functions":
            sys.stdout.write(list_functions())
            return EXIT_OK
        if args.command == "verify":
            return _verify(args)
        cfg = _load(args)
        rows, extra, code = COMMANDS[args.command](cfg)
        _write(render(rows, HEADERS[args.command], cfg.output_format, extra), cfg.output_path)
        if extra and cfg.output_format == "csv":
            print(" ".join(f"{k}={fmt(v)}" for k, v in extra.items()), file=sys.stderr)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CanonsysError as exc:
        print(f"computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
