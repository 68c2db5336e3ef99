"""Command-line experiment runner.

    bnmrf --experiment laplace-flower --out results/
    bnmrf --experiment convergence --k 3,6,9 --sweep-neurons 10,20,40,80

Writes summary.csv, field.csv, timing.csv and, for sweeps, convergence.csv
and convergence_fit.csv into ``--out``. Exit status 0 on success, 1 on a
configuration error, 2 on a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import experiments
from .errors import BNMError, InvalidConfig, NumericalFailure
from .features import SamplerConfig
from .geometry import read_off

EXPERIMENT_CHOICES = experiments.EXPERIMENTS + ("convergence",)
SUMMARY_COLUMNS = ["method", "experiment", "k", "M", "Ns", "n_gauss", "activation", "param",
                   "seed", "repeats", "rel_l2", "runtime_ms"]

# experiment -> defaults (flags and config files override)
DEFAULTS = {
    "interior-helmholtz": dict(k=9.0, neurons=40, collocation=60, activation="cosine", gamma=0.5),
    "laplace-flower": dict(k=None, neurons=60, collocation=100, activation="tanh", range=1.0),
    "exterior-helmholtz": dict(k=2.0, neurons=60, collocation=100, activation="tanh", range=1.0),
    "scatter-sphere": dict(k=4.0, neurons=32, collocation=648, activation="cosine", gamma=2.0, grid=31),
    "convergence": dict(k=None, ks=(3.0, 6.0, 9.0), neurons=40, collocation=60, activation="cosine",
                        gamma=0.5, sweep_neurons=(10, 20, 40, 80)),
}


@dataclass
class ExperimentConfig:
    experiment: str
    k: float | None = None
    ks: tuple = ()
    neurons: int = 40
    collocation: int = 60
    quad: int = 10
    activation: str = "cosine"
    gamma: float | None = None
    range: float | None = None
    seed: int = 0
    repeats: int = 4
    method: str = "bnm"
    grid: int = 41
    mesh: str | None = None
    out: str = "."
    sweep_neurons: tuple = ()
    sweep_collocation: tuple = ()

    def validate(self):
        if self.experiment not in EXPERIMENT_CHOICES:
            raise InvalidConfig(f"unknown experiment {self.experiment!r}")
        for name in ("neurons", "collocation", "quad", "repeats", "grid"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be at least 1")
        if self.grid < 2:
            raise InvalidConfig("grid must be at least 2")
        if self.activation not in ("cosine", "tanh"):
            raise InvalidConfig("activation must be cosine or tanh")
        if self.method not in ("bnm", "bem", "both"):
            raise InvalidConfig("method must be bnm, bem or both")
        if self.k is not None and not self.k > 0:
            raise InvalidConfig("k must be positive")
        if any(not k > 0 for k in self.ks):
            raise InvalidConfig("k must be positive")
        for name in ("sweep_neurons", "sweep_collocation"):
            sweep = getattr(self, name)
            if any(v < 1 for v in sweep) or list(sweep) != sorted(sweep):
                raise InvalidConfig(f"{name} must be ascending positive integers")
        if self.sampler().scale <= 0:
            raise InvalidConfig("sampling scale must be positive")
        return self

    @property
    def param(self) -> float:
        value = self.gamma if self.activation == "cosine" else self.range
        return 1.0 if value is None else float(value)

    def sampler(self, seed: int | None = None) -> SamplerConfig:
        law = "gaussian_cosine" if self.activation == "cosine" else "uniform_tanh"
        return SamplerConfig(law, self.param, self.seed if seed is None else seed)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidConfig(message)


def _int_list(text):
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise InvalidConfig(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text):
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise InvalidConfig(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bnmrf", description="Boundary neuron method with random features: experiment runner")
    p.add_argument("--config", help="plain-text key=value file; flags override it")
    p.add_argument("--experiment", choices=EXPERIMENT_CHOICES)
    p.add_argument("--k", help="wavenumber (comma-separated list for convergence)")
    p.add_argument("--neurons", type=int)
    p.add_argument("--collocation", type=int)
    p.add_argument("--quad", type=int)
    p.add_argument("--activation", choices=("cosine", "tanh"))
    p.add_argument("--gamma", type=float)
    p.add_argument("--range", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--method", choices=("bnm", "bem", "both"))
    p.add_argument("--grid", type=int)
    p.add_argument("--mesh")
    p.add_argument("--out")
    p.add_argument("--sweep-neurons")
    p.add_argument("--sweep-collocation")
    return p


def read_config_file(path) -> dict:
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


_CASTS = {"neurons": int, "collocation": int, "quad": int, "seed": int, "repeats": int, "grid": int,
          "gamma": float, "range": float, "sweep_neurons": _int_list, "sweep_collocation": _int_list}


def config_from_args(argv) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    raw = read_config_file(args.config) if args.config else {}
    known = {f.name for f in fields(ExperimentConfig)}
    for key, value in vars(args).items():
        if key != "config" and value is not None:
            raw[key] = value
    unknown = set(raw) - known
    if unknown:
        raise InvalidConfig(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    experiment = raw.get("experiment")
    if experiment is None:
        raise InvalidConfig("--experiment is required")
    if experiment not in EXPERIMENT_CHOICES:
        raise InvalidConfig(f"unknown experiment {experiment!r}")
    base = dict(DEFAULTS[experiment])
    if "activation" in raw and raw["activation"] != base.get("activation"):
        base.pop("gamma", None)
        base.pop("range", None)
    if "k" in raw and experiment == "convergence":
        base.pop("ks", None)
    merged = {**base, **raw}
    out = {}
    try:
        for key, value in merged.items():
            if key == "k":
                if value is None:
                    continue
                ks = _float_list(value) if isinstance(value, str) else (float(value),)
                if experiment == "convergence":
                    out["ks"] = ks
                elif len(ks) != 1:
                    raise InvalidConfig("--k takes a single value for this experiment")
                else:
                    out["k"] = ks[0]
            elif key in _CASTS and isinstance(value, str):
                out[key] = _CASTS[key](value)
            else:
                out[key] = value
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from exc
    return ExperimentConfig(**out).validate()


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10e}"
    return str(value)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _field_rows(sol):
    pts = sol.points
    ref = sol.reference
    for i in range(len(pts)):
        p = complex(sol.predicted[i])
        r = complex(ref[i])
        yield [*map(float, pts[i]), p.real, p.imag, r.real, r.imag, abs(p - r)]


def _problem(cfg: ExperimentConfig, k=None, collocation=None):
    mesh = read_off(cfg.mesh) if cfg.mesh else None
    name = "interior-helmholtz" if cfg.experiment == "convergence" else cfg.experiment
    if name == "scatter-sphere":
        return experiments.make_problem(name, k if k is not None else cfg.k, grid=cfg.grid, mesh=mesh)
    return experiments.make_problem(name, k if k is not None else cfg.k,
                                    n_collocation=collocation or cfg.collocation,
                                    n_gauss=cfg.quad, grid=cfg.grid)


def _ns(problem):
    return len(problem.mesh) if isinstance(problem, experiments.SphereProblem) else len(problem.boundary)


def _run_bnm(cfg, problem, M):
    results = [experiments.run_bnm(problem, cfg.sampler(s), M) for s in range(cfg.seed, cfg.seed + cfg.repeats)]
    return results


def run(cfg: ExperimentConfig) -> int:
    """Run one experiment configuration and write its CSV files."""
    if cfg.experiment == "convergence":
        return run_convergence(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = _problem(cfg)
    k = getattr(problem.kind, "k", None)
    summary, timing = [], []
    fields_written = False
    methods = ("bnm", "bem") if cfg.method == "both" else (cfg.method,)
    for method in methods:
        if method == "bnm":
            results = _run_bnm(cfg, problem, cfg.neurons)
            seeds = list(range(cfg.seed, cfg.seed + cfg.repeats))
            err = float(np.mean([r.rel_l2 for r in results]))
            summary.append(["bnm", cfg.experiment, k, cfg.neurons, _ns(problem), cfg.quad, cfg.activation,
                            cfg.param, cfg.seed, cfg.repeats, err,
                            np.mean([sum(r.timings.values()) for r in results])])
        else:
            results = [problem.solve_bem()]
            seeds = [None]
            summary.append(["bem", cfg.experiment, k, _ns(problem), _ns(problem), cfg.quad, None, None,
                            None, 1, results[0].rel_l2, sum(results[0].timings.values())])
        for seed, r in zip(seeds, results):
            timing.append([method, seed, r.timings.get("assembly"), r.timings.get("solve"),
                           r.timings.get("reconstruction")])
        sol = results[0].field
        coords = ["x", "y", "z"][: sol.points.shape[1]]
        name = "field.csv" if not fields_written else f"field_{method}.csv"
        _write_csv(out / name, coords + ["pred_re", "pred_im", "ref_re", "ref_im", "abs_err"], _field_rows(sol))
        fields_written = True
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    _write_csv(out / "timing.csv", ["method", "seed", "assembly_ms", "solve_ms", "reconstruction_ms"], timing)
    for row in summary:
        print(f"{row[0]:4s} {cfg.experiment} rel_l2={row[10]:.3e}")
    return 0


def fitted_slope(x, y) -> float:
    """Least-squares slope of log10(y) against log10(x)."""
    return float(np.polyfit(np.log10(np.asarray(x, float)), np.log10(np.asarray(y, float)), 1)[0])


def run_convergence(cfg: ExperimentConfig) -> int:
    """Error versus M (and, for BEM, versus panel count) on the interior Helmholtz problem."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ks = cfg.ks or ((cfg.k,) if cfg.k else DEFAULTS["convergence"]["ks"])
    neurons = cfg.sweep_neurons or (cfg.neurons,)
    collocations = cfg.sweep_collocation or (cfg.collocation,)
    rows, fits, summary = [], [], []
    for k in ks:
        for ns in collocations:
            problem = _problem(cfg, k=k, collocation=ns)
            if cfg.method in ("bnm", "both"):
                errs = []
                for M in neurons:
                    results = _run_bnm(cfg, problem, M)
                    errs.append(float(np.mean([r.rel_l2 for r in results])))
                    summary.append(["bnm", cfg.experiment, k, M, ns, cfg.quad, cfg.activation, cfg.param,
                                    cfg.seed, cfg.repeats, errs[-1],
                                    np.mean([sum(r.timings.values()) for r in results])])
                for M, e in zip(neurons, errs):
                    rows.append(["bnm", k, M, ns, e, errs[0] * (M / neurons[0]) ** -0.5])
                if len(neurons) > 1:
                    fits.append(["bnm", k, ns, "M", fitted_slope(neurons, errs)])
        if cfg.method in ("bem", "both"):
            errs = []
            for ns in collocations:
                r = _problem(cfg, k=k, collocation=ns).solve_bem()
                errs.append(r.rel_l2)
                summary.append(["bem", cfg.experiment, k, ns, ns, cfg.quad, None, None, None, 1, r.rel_l2,
                                sum(r.timings.values())])
            for ns, e in zip(collocations, errs):
                rows.append(["bem", k, ns, ns, e, errs[0] * (ns / collocations[0]) ** -0.5])
            if len(collocations) > 1:
                fits.append(["bem", k, None, "Ns", fitted_slope(collocations, errs)])
    _write_csv(out / "convergence.csv", ["method", "k", "M", "Ns", "rel_l2", "ref_slope_minus_half"], rows)
    _write_csv(out / "convergence_fit.csv", ["method", "k", "Ns", "variable", "slope"], fits)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    for f in fits:
        print(f"{f[0]:4s} k={f[1]:g} slope vs {f[3]} = {f[4]:.3f}")
    return 0


def main(argv=None) -> int:
    try:
        cfg = config_from_args(sys.argv[1:] if argv is None else argv)
    except (InvalidConfig, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        return run(cfg)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (BNMError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
