"""Experiment configs, source-term catalog, field files and the run pipelines.

Configs are INI files with sections ``[domain]``, ``[model]``, ``[source]``,
``[solver]``, ``[run]`` and optionally ``[oracle]`` and ``[sweep]``.
"""

from __future__ import annotations

import configparser
import csv
import io
import itertools
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .grid import DomainSpec, Grid, build_grid
from .linalg import SolveOptions
from .model import ModelParams, default_K, default_K2
from .solvers import ORACLE_MAX_NODES, brute_force_min, newton_primal, project_box, solve_dual
from .verify import DualityReport, dual_pair_from_primal, duality_gap, fmt

__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_NONCONVERGED",
    "EXIT_HYPOTHESES",
    "SUMMARY_COLUMNS",
    "SOURCE_KINDS",
    "ExperimentConfig",
    "load_config",
    "read_field",
    "write_field",
    "source_field",
    "run_solve_primal",
    "run_solve_dual",
    "run_verify",
    "run_sweep",
    "run_oracle_compare",
]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGED = 2
EXIT_HYPOTHESES = 3

SUMMARY_COLUMNS = [
    "gamma", "alpha", "beta", "K", "K2", "dim", "n", "seed",
    "J_primal", "J_dual", "gap_abs", "gap_rel",
    "in_A_plus_strict", "in_B_star", "in_C_star", "u_tilde_proxy",
    "lambda_zero_branch", "primal_iters", "dual_iters",
]

SOURCE_KINDS = ("zero", "constant", "sine", "bump", "polynomial", "file")
INIT_KINDS = ("zero", "random", "file")
SWEEPABLE = ("gamma", "alpha", "beta", "K", "K2", "n", "extent", "amplitude", "value")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


def _num(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int = 1
    extent: tuple[float, ...] = (1.0,)
    n: int = 101
    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    K: Optional[float] = None
    K2: Optional[float] = None
    source: str = "zero"
    value: float = 0.0
    amplitude: float = 1.0
    mode: int = 1
    center: Optional[tuple[float, ...]] = None
    width: float = 0.1
    coefficients: tuple[float, ...] = (0.0,)
    path: Optional[str] = None
    max_iter: int = 100
    tol: float = 1e-10
    backtrack: float = 0.5
    armijo: float = 1e-4
    project: bool = True
    init: str = "zero"
    init_amplitude: float = 0.1
    init_path: Optional[str] = None
    seed: int = 0
    out: str = "results"
    workers: int = 1
    oracle_starts: int = 200
    sweep: dict = field(default_factory=dict)
    plot: bool = False
    base_dir: str = "."

    def __post_init__(self):
        if self.source not in SOURCE_KINDS:
            raise ConfigurationError(
                f"source kind must be one of {SOURCE_KINDS}, got {self.source!r}"
            )
        if self.init not in INIT_KINDS:
            raise ConfigurationError(f"init must be one of {INIT_KINDS}, got {self.init!r}")
        if self.source == "file" and not self.path:
            raise ConfigurationError("source kind 'file' needs a path")
        if self.init == "file" and not self.init_path:
            raise ConfigurationError("init 'file' needs init_path")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        for key in self.sweep:
            if key not in SWEEPABLE:
                raise ConfigurationError(
                    f"cannot sweep over {key!r}; sweepable: {', '.join(SWEEPABLE)}"
                )
        # re-validate the domain and model invariants at load time
        object.__setattr__(self, "extent", self.domain_spec().extent)
        self.model_params()
        self.solve_options()

    # -- derived objects -------------------------------------------------
    def domain_spec(self) -> DomainSpec:
        return DomainSpec(self.dimension, tuple(self.extent), self.n)

    def grid(self) -> Grid:
        return build_grid(self.domain_spec())

    def model_params(self, grid: Grid | None = None) -> ModelParams:
        f = source_field(self, grid) if grid is not None else None
        return ModelParams(self.gamma, self.alpha, self.beta, K=self.K, K2=self.K2, f=f)

    def solve_options(self) -> SolveOptions:
        return SolveOptions(max_iter=self.max_iter, tol=self.tol, backtrack=self.backtrack,
                            armijo=self.armijo, project=self.project)

    def resolved(self) -> dict:
        K = default_K(self.alpha, self.beta) if self.K is None else float(self.K)
        K2 = default_K2(K, self.alpha) if self.K2 is None else float(self.K2)
        return {"gamma": self.gamma, "alpha": self.alpha, "beta": self.beta,
                "K": K, "K2": K2, "dim": self.dimension,
                "extent": ",".join(_num(e) for e in self.extent), "n": self.n,
                "source": self.source, "seed": self.seed}

    def resolve_path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else Path(self.base_dir) / q

    # -- serialization ---------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["domain"] = {"dimension": str(self.dimension),
                        "extent": ", ".join(_num(e) for e in self.extent),
                        "n": str(self.n)}
        model = {"gamma": _num(self.gamma), "alpha": _num(self.alpha), "beta": _num(self.beta)}
        if self.K is not None:
            model["K"] = _num(self.K)
        if self.K2 is not None:
            model["K2"] = _num(self.K2)
        cp["model"] = model
        src = {"kind": self.source}
        if self.source == "constant":
            src["value"] = _num(self.value)
        elif self.source == "sine":
            src.update(amplitude=_num(self.amplitude), mode=str(self.mode))
        elif self.source == "bump":
            src.update(amplitude=_num(self.amplitude), width=_num(self.width))
            if self.center is not None:
                src["center"] = ", ".join(_num(c) for c in self.center)
        elif self.source == "polynomial":
            src.update(amplitude=_num(self.amplitude),
                       coefficients=", ".join(_num(c) for c in self.coefficients))
        elif self.source == "file":
            src["path"] = str(self.path)
        cp["source"] = src
        solver = {"max_iter": str(self.max_iter), "tol": _num(self.tol),
                  "backtrack": _num(self.backtrack), "armijo": _num(self.armijo),
                  "project": fmt(self.project), "init": self.init}
        if self.init == "random":
            solver["init_amplitude"] = _num(self.init_amplitude)
        elif self.init == "file":
            solver["init_path"] = str(self.init_path)
        cp["solver"] = solver
        cp["run"] = {"seed": str(self.seed), "out": self.out, "workers": str(self.workers)}
        cp["oracle"] = {"n_starts": str(self.oracle_starts)}
        if self.sweep or self.plot:
            sw = {k: ", ".join(_num(v) if k != "n" else str(int(v)) for v in vals)
                  for k, vals in self.sweep.items()}
            sw["plot"] = fmt(self.plot)
            cp["sweep"] = sw
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, base_dir: str = ".") -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keep K / K2 case
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigurationError(f"unreadable config: {exc}") from exc
        kw: dict = {"base_dir": base_dir}
        try:
            if cp.has_section("domain"):
                d = cp["domain"]
                if "dimension" in d:
                    kw["dimension"] = int(d["dimension"])
                if "extent" in d:
                    kw["extent"] = _floats(d["extent"])
                if "n" in d:
                    kw["n"] = int(d["n"])
            if cp.has_section("model"):
                m = cp["model"]
                for key in ("gamma", "alpha", "beta", "K", "K2"):
                    for spelled in (key, key.lower()):
                        if spelled in m and m[spelled].strip():
                            kw[key] = float(m[spelled])
            if cp.has_section("source"):
                s = cp["source"]
                kw["source"] = s.get("kind", "zero").strip()
                for key in ("value", "amplitude", "width"):
                    if key in s:
                        kw[key] = float(s[key])
                if "mode" in s:
                    kw["mode"] = int(s["mode"])
                if "center" in s:
                    kw["center"] = _floats(s["center"])
                if "coefficients" in s:
                    kw["coefficients"] = _floats(s["coefficients"])
                if "path" in s:
                    kw["path"] = s["path"].strip()
            if cp.has_section("solver"):
                s = cp["solver"]
                for key in ("max_iter",):
                    if key in s:
                        kw[key] = int(s[key])
                for key in ("tol", "backtrack", "armijo", "init_amplitude"):
                    if key in s:
                        kw[key] = float(s[key])
                if "project" in s:
                    kw["project"] = _bool(s["project"])
                if "init" in s:
                    kw["init"] = s["init"].strip()
                if "init_path" in s:
                    kw["init_path"] = s["init_path"].strip()
            if cp.has_section("run"):
                r = cp["run"]
                if "seed" in r:
                    kw["seed"] = int(r["seed"])
                if "out" in r:
                    kw["out"] = r["out"].strip()
                if "workers" in r:
                    kw["workers"] = int(r["workers"])
            if cp.has_section("oracle") and "n_starts" in cp["oracle"]:
                kw["oracle_starts"] = int(cp["oracle"]["n_starts"])
            if cp.has_section("sweep"):
                sweep = {}
                for key, val in cp["sweep"].items():
                    if key == "plot":
                        kw["plot"] = _bool(val)
                    else:
                        sweep[key] = _floats(val)
                kw["sweep"] = sweep
        except ValueError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"bad config value: {exc}") from exc
        if "extent" in kw and len(kw["extent"]) == 1 and kw.get("dimension", 1) == 2:
            kw["extent"] = kw["extent"] * 2
        return cls(**kw)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_ini(text, base_dir=str(path.parent))


# ---------------------------------------------------------------------------
# field files

def read_field(path: str | os.PathLike, size: int | None = None) -> np.ndarray:
    """Read one real per line; blank lines and ``#`` comments are skipped."""
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals.append(float(line))
    arr = np.asarray(vals, dtype=float)
    if size is not None and arr.size != size:
        raise ConfigurationError(
            f"field file {path} has {arr.size} values, grid has {size} interior nodes"
        )
    return arr


def _header(meta: dict) -> str:
    return "".join(f"# {k} = {fmt(v)}\n" for k, v in meta.items())


def write_field(path: str | os.PathLike, w, meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        if meta:
            fh.write(_header(meta))
        for x in np.asarray(w, dtype=float):
            fh.write(f"{x:.17g}\n")


def source_field(cfg: ExperimentConfig, g: Grid) -> np.ndarray:
    x = g.coords
    L = np.asarray(g.spec.extent)
    if cfg.source == "zero":
        return g.zeros()
    if cfg.source == "constant":
        return g.constant(cfg.value)
    if cfg.source == "sine":
        return cfg.amplitude * np.prod(np.sin(cfg.mode * np.pi * x / L), axis=1)
    if cfg.source == "bump":
        c = np.asarray(cfg.center if cfg.center is not None else L / 2.0, dtype=float)
        if c.size == 1:
            c = np.full(g.dimension, float(c.ravel()[0]))
        r2 = np.sum((x - c) ** 2, axis=1)
        return cfg.amplitude * np.exp(-r2 / cfg.width**2)
    if cfg.source == "polynomial":
        coeffs = np.asarray(cfg.coefficients, dtype=float)
        per_axis = np.polynomial.polynomial.polyval(x, coeffs)
        return cfg.amplitude * np.prod(per_axis, axis=1)
    return read_field(cfg.resolve_path(cfg.path), g.size)


def initial_guess(cfg: ExperimentConfig, g: Grid) -> np.ndarray:
    if cfg.init == "zero":
        return g.zeros()
    if cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        return cfg.init_amplitude * rng.uniform(-1.0, 1.0, size=g.size)
    return read_field(cfg.resolve_path(cfg.init_path), g.size)


# ---------------------------------------------------------------------------
# pipelines

def _prepare(cfg: ExperimentConfig):
    g = cfg.grid()
    p = cfg.model_params(g)
    return g, p


def _outdir(cfg: ExperimentConfig, out: str | None) -> Path:
    d = Path(out if out is not None else cfg.resolve_path(cfg.out))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_kv(path: Path, items: dict) -> None:
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {fmt(v)}\n")


def _report_items(prefix: str, rep) -> dict:
    return {f"{prefix}.converged": rep.converged, f"{prefix}.iterations": rep.iterations,
            f"{prefix}.residual": rep.residual, f"{prefix}.objective": rep.objective,
            f"{prefix}.message": rep.message,
            f"{prefix}.history": " ".join(f"{h:.17g}" for h in rep.history)}


def run_solve_primal(cfg: ExperimentConfig, out: str | None = None) -> int:
    g, p = _prepare(cfg)
    d = _outdir(cfg, out)
    u, rep = newton_primal(p, g, initial_guess(cfg, g), cfg.solve_options())
    meta = cfg.resolved()
    write_field(d / "u0.txt", u, meta)
    _write_kv(d / "primal.txt", {**meta, "J": rep.objective, **_report_items("primal", rep)})
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def run_solve_dual(cfg: ExperimentConfig, out: str | None = None) -> int:
    g, p = _prepare(cfg)
    d = _outdir(cfg, out)
    pair, rep = solve_dual(p, g, None, cfg.solve_options())
    meta = cfg.resolved()
    write_field(d / "v1.txt", pair.v1, meta)
    write_field(d / "v0.txt", pair.v0, meta)
    _write_kv(d / "dual.txt", {**meta, "J1_star": rep.objective,
                               "in_B_star": pair.in_B_star, "in_C_star": pair.in_C_star,
                               **_report_items("dual", rep)})
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def verify_pipeline(cfg: ExperimentConfig) -> dict:
    """Primal solve, dual construction, duality report and dual re-solves."""
    g, p = _prepare(cfg)
    opts = cfg.solve_options()
    u0, prep = newton_primal(p, g, initial_guess(cfg, g), opts)
    report = duality_gap(p, g, u0)
    pair = dual_pair_from_primal(p, g, u0)
    warm = cold = None
    if report.in_B_star:
        _, warm = solve_dual(p, g, project_box(pair.v1, p.K2), opts)
    try:
        cold_pair, cold = solve_dual(p, g, None, opts)
        report.extras["dual_cold_distance"] = float(np.max(np.abs(cold_pair.v1 - pair.v1)))
    except Exception as exc:  # reported, never fatal
        report.notes.append(f"cold dual solve: {exc}")
    report.extras["primal_iterations"] = prep.iterations
    report.extras["primal_converged"] = prep.converged
    if warm is not None:
        report.extras["dual_warm_iterations"] = warm.iterations
    if cold is not None:
        report.extras["dual_cold_iterations"] = cold.iterations
        report.extras["dual_cold_converged"] = cold.converged
        report.extras["dual_cold_objective"] = cold.objective
    row = summary_row(cfg, report, prep.iterations, cold.iterations if cold else -1)
    return {"grid": g, "params": p, "u0": u0, "pair": pair, "report": report,
            "primal": prep, "dual_warm": warm, "dual_cold": cold, "row": row}


def summary_row(cfg: ExperimentConfig, report: DualityReport, primal_iters: int,
                dual_iters: int) -> dict:
    r = cfg.resolved()
    return {"gamma": r["gamma"], "alpha": r["alpha"], "beta": r["beta"], "K": r["K"],
            "K2": r["K2"], "dim": r["dim"], "n": r["n"], "seed": r["seed"],
            "J_primal": report.J_primal, "J_dual": report.J_dual,
            "gap_abs": report.gap_abs, "gap_rel": report.gap_rel,
            "in_A_plus_strict": report.in_A_plus_strict, "in_B_star": report.in_B_star,
            "in_C_star": report.in_C_star, "u_tilde_proxy": report.u_tilde_proxy,
            "lambda_zero_branch": report.lambda_zero_branch,
            "primal_iters": primal_iters, "dual_iters": dual_iters}


def write_summary_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([fmt(row[c]) for c in SUMMARY_COLUMNS])


def _verify_exit(res: dict) -> int:
    if not res["primal"].converged:
        return EXIT_NONCONVERGED
    rep = res["report"]
    if not rep.hypotheses_met:
        return EXIT_HYPOTHESES
    return EXIT_OK if rep.passed else EXIT_NONCONVERGED


def run_verify(cfg: ExperimentConfig, out: str | None = None) -> int:
    res = verify_pipeline(cfg)
    d = _outdir(cfg, out)
    meta = cfg.resolved()
    rep = res["report"]
    write_field(d / "u0.txt", res["u0"], meta)
    write_field(d / "v1.txt", res["pair"].v1, meta)
    write_field(d / "v0.txt", res["pair"].v0, meta)
    with open(d / "report.txt", "w") as fh:
        fh.write(_header({"seed": cfg.seed, "extent": meta["extent"], "source": cfg.source}))
        fh.write(rep.to_text())
    with open(d / "identities.csv", "w") as fh:
        fh.write(_header(meta))
        fh.write(rep.to_csv())
    write_summary_csv(d / "summary.csv", [res["row"]])
    return _verify_exit(res)


def _sweep_cells(cfg: ExperimentConfig) -> list[ExperimentConfig]:
    keys = list(cfg.sweep)
    cells = []
    for combo in itertools.product(*(cfg.sweep[k] for k in keys)):
        kw = {}
        for k, v in zip(keys, combo):
            if k == "n":
                kw[k] = int(v)
            elif k == "extent":
                kw[k] = (float(v),) * cfg.dimension
            else:
                kw[k] = float(v)
        cells.append(replace(cfg, sweep={}, plot=False, **kw))
    return cells


def _run_cell(args) -> tuple[int, dict, int]:
    idx, cell, out = args
    exit_code = run_verify(cell, out=str(out))
    with open(Path(out) / "summary.csv") as fh:
        row = next(csv.DictReader(fh))
    return idx, row, exit_code


def run_sweep(cfg: ExperimentConfig, out: str | None = None, workers: int | None = None) -> int:
    if not cfg.sweep or any(len(v) == 0 for v in cfg.sweep.values()):
        raise ConfigurationError("sweep is empty: list at least one value per swept parameter")
    cells = _sweep_cells(cfg)
    d = _outdir(cfg, out)
    jobs = [(i, c, d / f"cell_{i:03d}") for i, c in enumerate(cells)]
    workers = workers or cfg.workers
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    keys = list(cfg.sweep)
    with open(d / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell"] + SUMMARY_COLUMNS + ["exit_code"] +
                   [f"sweep_{k}" for k in keys])
        for (i, row, code), cell in zip(results, cells):
            w.writerow([i] + [row[c] for c in SUMMARY_COLUMNS] + [code] +
                       [fmt(getattr(cell, k) if k != "extent" else cell.extent[0]) for k in keys])
    if cfg.plot:
        _plot_sweep(d / "sweep.svg", cells, [r[1] for r in results], keys)
    if any(code == EXIT_NONCONVERGED for _, _, code in results):
        return EXIT_NONCONVERGED
    return EXIT_OK


def _plot_sweep(path: Path, cells, rows, keys) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    x_key = keys[0]
    groups: dict = {}
    for cell, row in zip(cells, rows):
        label = ", ".join(f"{k}={fmt(getattr(cell, k))}" for k in keys[1:] if k != "extent")
        x = cell.extent[0] if x_key == "extent" else getattr(cell, x_key)
        groups.setdefault(label, []).append((x, max(float(row["gap_rel"]), 1e-18)))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, pts in groups.items():
        pts.sort()
        ax.semilogy([a for a, _ in pts], [b for _, b in pts], marker="o", label=label or None)
    ax.set_xlabel(x_key)
    ax.set_ylabel("relative duality gap")
    if any(groups):
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def run_oracle_compare(cfg: ExperimentConfig, out: str | None = None) -> int:
    g = cfg.grid()
    if g.size > ORACLE_MAX_NODES:
        raise ConfigurationError(
            f"oracle-compare needs at most {ORACLE_MAX_NODES} interior nodes, grid has {g.size}"
        )
    res = verify_pipeline(cfg)
    p = res["params"]
    u_or, val, info = brute_force_min(p, g, n_starts=cfg.oracle_starts, seed=cfg.seed,
                                      return_info=True)
    rep = res["report"]
    J1 = rep.J1_dual
    diff = abs(val - J1) if np.isfinite(J1) else float("nan")
    agree = bool(np.isfinite(diff) and diff < 1e-8)
    d = _outdir(cfg, out)
    meta = cfg.resolved()
    write_field(d / "u_oracle.txt", u_or, meta)
    _write_kv(d / "oracle.txt", {
        **meta,
        "oracle_value": val, "oracle_starts": info.n_starts, "oracle_agree_starts": info.n_agree,
        "oracle_powell_value": info.powell_value,
        "J_primal": rep.J_primal, "J1_dual": J1, "J_dual": rep.J_dual,
        "oracle_minus_J1": val - J1, "abs_diff": diff, "agree": agree,
        "hypotheses_met": rep.hypotheses_met, "lambda_min": rep.lambda_min,
        "primal_converged": res["primal"].converged,
    })
    if not res["primal"].converged:
        return EXIT_NONCONVERGED
    if not rep.hypotheses_met:
        return EXIT_HYPOTHESES
    return EXIT_OK if agree else EXIT_NONCONVERGED
