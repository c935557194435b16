"""Command-line front end: ``solve``, ``sweep``, ``verify`` and ``export``.

Configuration files are flat ``section.key = value`` text::

    params.omega = 0.0
    params.k = 1
    params.p = 4.0
    grid.r_max = 12.0
    grid.nr = 64
    solver.grad_tol = 1e-6
    run.output_dir = out
    run.seed = 0

A sweep file adds ``sweep.omega_values``, ``sweep.k_values`` (comma separated
lists), optionally ``sweep.p`` and ``sweep.resume``. Blank lines and ``#``
comments are ignored.

Field files are CSV with header ``r,z,value`` and rows ordered by ``r`` then
``z``; numbers are written with ``repr`` and round-trip exactly. Exported
magnetic fields use ``grad(theta) = (x2, -x1, 0)/r^2``, under which
``H_r = (d_z b)/r`` and ``H_z = -(d_r b)/r``.

Exit codes: 0 success (solve: converged), 2 solve finished without
convergence, 1 errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .cylgrid import CylGrid, grad2d, make_grid
from .model import ModelParams, ParameterError, check_params, validate
from .solver import SolveReport, SolverOptions, solve_vortex
from .verify import SUITES, run_check

log = logging.getLogger("kgmvortex")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
FIELD_FILES = ("u.csv", "b.csv", "phi.csv")
REPORT = "report.json"
ENERGY = "energy.csv"


class ConfigError(ValueError):
    pass


# --- configuration ----------------------------------------------------------------


@dataclass
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    grid: CylGrid = field(default_factory=lambda: CylGrid(12.0, 12.0, 64, 64))
    solver: SolverOptions = field(default_factory=SolverOptions)
    output_dir: str = "out"
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "grid": self.grid.to_dict(),
            "solver": self.solver.to_dict(),
            "run": {"output_dir": self.output_dir, "seed": self.seed},
        }


@dataclass
class SweepSpec:
    omega_values: list
    k_values: list
    p: float
    base: RunConfig
    resume: bool = True

    def points(self) -> list[RunConfig]:
        out = []
        for om in self.omega_values:
            for k in self.k_values:
                P = replace(self.base.params, omega=float(om), k=int(k), p=float(self.p))
                out.append(replace(self.base, params=P))
        return out


_SECTIONS = {
    "params": ModelParams(),
    "grid": CylGrid(12.0, 12.0, 64, 64),
    "solver": SolverOptions(),
}
_RUN_KEYS = {"output_dir": "out", "seed": 0}
_SWEEP_KEYS = {"omega_values": [0.0], "k_values": [1], "p": 4.0, "resume": True}


def _parse_scalar(text: str, like, key: str):
    try:
        if isinstance(like, bool):
            low = text.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(text)
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(like).__name__}") from None
    return text


def _format_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ", ".join(_format_scalar(x) for x in v)
    return str(v)


def _read_pairs(text: str) -> dict[str, str]:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} lacks a section")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _build(pairs: dict[str, str], allow_sweep: bool):
    values: dict[str, dict] = {s: {} for s in ("params", "grid", "solver", "run", "sweep")}
    for key, text in pairs.items():
        section, name = key.split(".", 1)
        if section in _SECTIONS:
            proto = _SECTIONS[section]
            known = {f.name: getattr(proto, f.name) for f in fields(proto)}
        elif section == "run":
            known = _RUN_KEYS
        elif section == "sweep" and allow_sweep:
            known = _SWEEP_KEYS
        else:
            raise ConfigError(f"unknown section {section!r}")
        if name not in known:
            raise ConfigError(f"unknown key {key!r}")
        like = known[name]
        if isinstance(like, list):
            items = [s.strip() for s in text.split(",") if s.strip()]
            values[section][name] = [_parse_scalar(s, like[0], key) for s in items]
        else:
            values[section][name] = _parse_scalar(text, like, key)
    try:
        P = ModelParams(**values["params"])
        gd = {**_SECTIONS["grid"].to_dict(), **values["grid"]}
        g = make_grid(gd["r_max"], gd["z_half"], gd["nr"], gd["nz"])
        opts = SolverOptions(**values["solver"])
    except ValueError as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ConfigError(str(exc)) from None
    run = {**_RUN_KEYS, **values["run"]}
    cfg = RunConfig(P, g, opts, run["output_dir"], run["seed"])
    return cfg, values["sweep"]


def parse_config(text: str) -> RunConfig:
    """Parse a run configuration (no parameter admissibility check)."""
    cfg, _ = _build(_read_pairs(text), allow_sweep=False)
    return cfg


def parse_sweep(text: str) -> SweepSpec:
    cfg, sw = _build(_read_pairs(text), allow_sweep=True)
    sw = {**_SWEEP_KEYS, "p": cfg.params.p, **sw}
    if not sw["omega_values"] or not sw["k_values"]:
        raise ConfigError("sweep lists must be non-empty")
    spec = SweepSpec(sw["omega_values"], sw["k_values"], sw["p"], cfg, sw["resume"])
    return spec


def format_config(cfg: RunConfig, sweep: SweepSpec | None = None) -> str:
    """Canonical text form; ``parse_config(format_config(c)) == c``."""
    lines = []
    for section, sub in cfg.to_dict().items():
        for key, value in sub.items():
            lines.append(f"{section}.{key} = {_format_scalar(value)}")
    if sweep is not None:
        lines += [
            f"sweep.omega_values = {_format_scalar([float(x) for x in sweep.omega_values])}",
            f"sweep.k_values = {_format_scalar([int(x) for x in sweep.k_values])}",
            f"sweep.p = {_format_scalar(float(sweep.p))}",
            f"sweep.resume = {_format_scalar(bool(sweep.resume))}",
        ]
    return "\n".join(lines) + "\n"


# --- files --------------------------------------------------------------------------


def write_field(path: Path, f: np.ndarray, g: CylGrid) -> None:
    """``r,z,value`` rows, r-major, full-precision decimal text."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("r", "z", "value"))
        for i, r in enumerate(g.r):
            for j, z in enumerate(g.z):
                w.writerow((repr(float(r)), repr(float(z)), repr(float(f[i, j]))))


def read_field(path: Path, g: CylGrid) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["r", "z", "value"]:
        raise ValueError(f"{path}: missing header r,z,value")
    data = np.array([[float(x) for x in row] for row in rows[1:]])
    if data.shape != (g.size, 3):
        raise ValueError(f"{path}: expected {g.size} rows of 3 columns")
    return data[:, 2].reshape(g.shape)


def _write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _report_document(cfg: RunConfig, rep: SolveReport) -> dict:
    return {
        "version": __version__,
        "config": cfg.to_dict(),
        "result": rep.summary(),
        "history": [[int(i), float(v), float(gn)] for i, v, gn in rep.history],
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


def write_outputs(out: Path, cfg: RunConfig, rep: SolveReport) -> None:
    out.mkdir(parents=True, exist_ok=True)
    g = cfg.grid
    write_field(out / "u.csv", rep.state.u, g)
    write_field(out / "b.csv", rep.state.b, g)
    write_field(out / "phi.csv", rep.phi, g)
    _write_table(out / ENERGY, ("term", "value"), list(rep.energy.to_dict().items()))
    doc = _report_document(cfg, rep)
    (out / REPORT).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_report(out: Path) -> dict:
    path = Path(out) / REPORT
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise FileNotFoundError(f"no {REPORT} in {out}") from None


def _grid_from_report(doc: dict) -> CylGrid:
    gd = doc["config"]["grid"]
    return make_grid(gd["r_max"], gd["z_half"], gd["nr"], gd["nz"])


def _report_valid(out: Path, cfg: RunConfig) -> bool:
    """A finished point: parsable report for the same configuration and all field files."""
    try:
        doc = load_report(out)
    except (OSError, ValueError):
        return False
    want = cfg.to_dict()
    got = doc.get("config", {})
    same = all(got.get(s) == want[s] for s in ("params", "grid", "solver"))
    return same and "result" in doc and all((out / f).exists() for f in FIELD_FILES + (ENERGY,))


# --- commands -----------------------------------------------------------------------


def _error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def _read_text(path) -> str:
    return Path(path).read_text()


def run_point(cfg: RunConfig, out: Path) -> SolveReport:
    check_params(cfg.params)
    rep = solve_vortex(cfg.params, cfg.grid, cfg.solver)
    write_outputs(out, cfg, rep)
    return rep


def cmd_solve(config: str, out: str | None = None, seed: int | None = None) -> int:
    try:
        cfg = parse_config(_read_text(config))
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        check_params(cfg.params)
    except OSError as exc:
        return _error(f"cannot read config: {exc}")
    except (ConfigError, ParameterError) as exc:
        return _error(str(exc))
    target = Path(out or cfg.output_dir)
    try:
        rep = run_point(cfg, target)
    except Exception as exc:  # noqa: BLE001 - every failure maps to exit 1
        return _error(f"solve failed: {exc}")
    log.info("%s: converged=%s I=%.12g", target, rep.converged, rep.I_value)
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def point_dirname(omega: float, k: int) -> str:
    return f"w{float(omega):g}_k{int(k)}"


def _sweep_worker(args):
    cfg, out = args
    try:
        rep = run_point(cfg, out)
        return {"converged": rep.converged, "status": rep.message}
    except Exception as exc:  # noqa: BLE001 - recorded per point
        return {"converged": False, "status": f"error: {exc}"}


SUMMARY_HEADER = ("omega", "k", "converged", "I", "total_energy", "phi_field",
                  "residual_z1", "residual_z3", "residual_z4", "lp_norm_p", "status")


def _summary_row(cfg: RunConfig, out: Path, status: str | None) -> list:
    row = [cfg.params.omega, cfg.params.k]
    try:
        res = load_report(out)["result"]
    except (OSError, ValueError, KeyError):
        return row + [False, "", "", "", "", "", "", "", status or "missing report"]
    e = res["energy"]
    return row + [res["converged"], res["I"], e["total"], e["phi_field"], res["residual_z1"],
                  res["residual_z3"], res["residual_z4"], res["lp_norm_p"],
                  status if status is not None else "resumed"]


def cmd_sweep(config: str, out: str | None = None, workers: int = 1) -> int:
    try:
        spec = parse_sweep(_read_text(config))
    except OSError as exc:
        return _error(f"cannot read sweep file: {exc}")
    except (ConfigError, ParameterError) as exc:
        return _error(str(exc))
    points = spec.points()
    bad = [(c.params, validate(c.params)) for c in points if validate(c.params)]
    if bad:
        return _error("; ".join(f"omega={P.omega}, k={P.k}, p={P.p}: {', '.join(v)}"
                                for P, v in bad))
    root = Path(out or spec.base.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    jobs, status = [], {}
    for cfg in points:
        d = root / point_dirname(cfg.params.omega, cfg.params.k)
        if spec.resume and _report_valid(d, cfg):
            log.info("resume: skipping %s", d.name)
            status[d.name] = None
        else:
            jobs.append((cfg, d))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    for (cfg, d), res in zip(jobs, results):
        status[d.name] = res["status"]
    rows = [_summary_row(c, root / point_dirname(c.params.omega, c.params.k),
                         status[point_dirname(c.params.omega, c.params.k)]) for c in points]
    _write_table(root / "summary.csv", SUMMARY_HEADER, rows)
    return EXIT_OK if all(r[2] is True for r in rows) else EXIT_NOT_CONVERGED


def cmd_verify(suite: str = "all", seed: int = 0, out: str | None = None) -> int:
    if suite not in SUITES:
        print(f"usage: kgmvortex verify --suite {{{','.join(SUITES)}}}", file=sys.stderr)
        return _error(f"unknown suite {suite!r}")
    root = Path(out or "verify_reports")
    root.mkdir(parents=True, exist_ok=True)
    ok = True
    for name in SUITES[suite]:
        rep = run_check(name, seed=seed)
        (root / f"{name}.json").write_text(rep.to_json() + "\n")
        print(f"{name}: {'PASS' if rep.passed else 'FAIL'}")
        ok &= rep.passed
    return EXIT_OK if ok else EXIT_ERROR


EXPORTS = ("fields", "hfield", "efield")


def export_fields(report_dir: Path, what: str) -> Path:
    """Write ``export_<what>.csv`` next to the report and return its path."""
    if what not in EXPORTS:
        raise ValueError(f"unknown export {what!r}; choose from {EXPORTS}")
    report_dir = Path(report_dir)
    g = _grid_from_report(load_report(report_dir))
    u, b, phi = (read_field(report_dir / f, g) for f in FIELD_FILES)
    if what == "fields":
        header, cols = ("r", "z", "u", "b", "phi"), (u, b, phi)
    elif what == "hfield":
        br, bz = grad2d(b, g)
        Hr, Hz = bz / g.R, -br / g.R
        header, cols = ("r", "z", "H_r", "H_z", "H_mag"), (Hr, Hz, np.hypot(Hr, Hz))
    else:
        pr, pz = grad2d(phi, g)
        Er, Ez = -pr, -pz
        header, cols = ("r", "z", "E_r", "E_z", "E_mag"), (Er, Ez, np.hypot(Er, Ez))
    path = report_dir / f"export_{what}.csv"
    rows = ([r, z] + [c[i, j] for c in cols]
            for i, r in enumerate(g.r) for j, z in enumerate(g.z))
    _write_table(path, header, ([float(x) for x in row] for row in rows))
    return path


def cmd_export(report_dir: str, what: str) -> int:
    try:
        path = export_fields(Path(report_dir), what)
    except (OSError, ValueError, KeyError) as exc:
        return _error(str(exc))
    print(path)
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kgmvortex", description="Axisymmetric KGM vortex solver.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("solve", help="solve one parameter point")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    w = sub.add_parser("sweep", help="solve an (omega, k) lattice")
    w.add_argument("--config", required=True)
    w.add_argument("--out")
    w.add_argument("--workers", type=int, default=1)
    v = sub.add_parser("verify", help="run verification checks")
    v.add_argument("--suite", default="all")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    e = sub.add_parser("export", help="export plot-ready fields from a solve directory")
    e.add_argument("report_dir")
    e.add_argument("what", nargs="?", default="fields")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "solve":
        return cmd_solve(args.config, args.out, args.seed)
    if args.command == "sweep":
        if args.workers < 1:
            return _error("--workers must be >= 1")
        return cmd_sweep(args.config, args.out, args.workers)
    if args.command == "verify":
        return cmd_verify(args.suite, args.seed, args.out)
    return cmd_export(args.report_dir, args.what)


if __name__ == "__main__":
    sys.exit(main())
