"""Command-line entry point: ``warptree {simulate,fit,rates,compare,cv}``.

Settings come from built-in defaults, then an optional flat TOML file
(``--config``), then command-line flags; later sources win.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli

from .design import (
    DESIGNS,
    FUNCTIONS,
    CatalogError,
    DesignError,
    SampleFormatError,
    generate_sample,
    get_design,
    get_function,
    read_sample,
    write_sample,
)
from .estimators import RULES, FitConfig, FitError, fit
from .quadrature import QuadratureError
from .risk import (
    ExperimentConfig,
    RiskError,
    cv_kappa,
    l2g_distance,
    rate_experiment,
    rate_slope,
    theoretical_rate_exponent,
    validate_grid,
)
from .wavelets import WaveletError

COMMANDS = ("simulate", "fit", "rates", "compare", "cv")
COMPARE_RULES = ("linear", "hard", "vertical", "piecewise")
CV_GRID = (0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0)


class CliError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


@dataclass
class RunConfig:
    command: str = "simulate"
    design: str | None = None
    function: str = "sine"
    sigma: float = 0.1
    M: float | None = None
    n: int = 1024
    seed: int = 0
    kappa: float = 1.0
    gamma: float = 1.0
    s: float = 1.0
    rule: list = field(default_factory=lambda: ["vertical"])
    reps: int = 20
    grid: list = field(default_factory=lambda: [2**k for k in range(9, 16)])
    out: str = "out"
    wavelet: str = "haar"
    folds: int = 5
    kappa_grid: list = field(default_factory=lambda: list(CV_GRID))
    kappa_cv: bool = False
    self_test: bool = False
    sample: str | None = None

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise CliError("validation", f"unknown command {self.command!r}")
        if self.design is not None and self.design not in DESIGNS:
            raise CliError("catalog", str(CatalogError("design", self.design, DESIGNS)))
        if self.function not in FUNCTIONS:
            raise CliError("catalog", str(CatalogError("function", self.function, FUNCTIONS)))
        for r in self.rule:
            if r not in RULES:
                raise CliError("catalog", f"unknown rule {r!r}; valid rules: {', '.join(RULES)}")
        if self.n < 1:
            raise CliError("validation", "n must be >= 1")
        if self.sigma < 0:
            raise CliError("validation", "sigma must be >= 0")
        if not self.kappa > 0:
            raise CliError("validation", "kappa must be > 0")
        if self.gamma < 0.5:
            raise CliError("validation", "gamma must be >= 1/2")
        if not self.s > 0:
            raise CliError("validation", "s must be > 0")
        if self.reps < 2:
            raise CliError("validation", "reps must be >= 2")
        if self.folds < 2:
            raise CliError("validation", "folds must be >= 2")
        if not self.kappa_grid or any(not k > 0 for k in self.kappa_grid):
            raise CliError("validation", "kappa_grid must hold positive values")
        if self.command == "rates" and not self.self_test:
            try:
                self.grid = validate_grid(self.grid)
            except RiskError as exc:
                raise CliError("validation", str(exc)) from None
        if self.command in ("fit", "compare", "cv") and not self.sample:
            raise CliError("validation", f"{self.command} needs a sample file")
        return self

    def fit_config(self, rule: str, design: str) -> FitConfig:
        return FitConfig(rule=rule, kappa=self.kappa, gamma=self.gamma, s_assumed=self.s, wavelet=self.wavelet, design=design)


def parse_grid(text) -> list[int]:
    """``2^9..2^15`` or a comma list such as ``512,1024``."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo_e, hi_e = (int(p.strip().split("^")[1]) for p in (lo, hi))
            return [2**e for e in range(lo_e, hi_e + 1)]
        return [int(eval_pow(v)) for v in text.split(",") if v.strip()]
    except (ValueError, IndexError):
        raise CliError("validation", f"cannot parse grid {text!r}; use 2^9..2^15 or 512,1024,...") from None


def eval_pow(v: str) -> int:
    v = v.strip()
    if "^" in v:
        b, e = v.split("^")
        return int(b) ** int(e)
    return int(v)


def _csv_list(text, cast=str):
    if isinstance(text, (list, tuple)):
        return [cast(v) for v in text]
    return [cast(v.strip()) for v in str(text).split(",") if v.strip()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat TOML file of settings")
    common.add_argument("--design")
    common.add_argument("--function")
    common.add_argument("--sigma", type=float)
    common.add_argument("--M", type=float, dest="M")
    common.add_argument("--n", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--kappa", type=float)
    common.add_argument("--gamma", type=float)
    common.add_argument("--s", type=float)
    common.add_argument("--rule", help="rule or comma list of rules")
    common.add_argument("--reps", type=int)
    common.add_argument("--grid", help="e.g. 2^9..2^15")
    common.add_argument("--out", help="output directory")
    common.add_argument("--wavelet")
    common.add_argument("--folds", type=int)
    common.add_argument("--kappa-grid", dest="kappa_grid", help="comma list of kappas")
    common.add_argument("--kappa-cv", dest="kappa_cv", action="store_true", default=None)
    parser = _Parser(prog="warptree", description="Warped-wavelet regression with vertical thresholding")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="draw a sample and write CSV + JSON sidecar")
    for name, help_ in (
        ("fit", "fit one rule to a sample"),
        ("compare", "fit linear, hard, vertical and piecewise rules to a sample"),
        ("cv", "select kappa by K-fold cross-validation"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("sample", help="sample CSV with header x,y")
    p = sub.add_parser("rates", parents=[common], help="Monte Carlo convergence-rate experiment")
    p.add_argument("--self-test", dest="self_test", action="store_true", default=None)
    return parser


_CASTS = {
    "rule": lambda v: _csv_list(v),
    "grid": parse_grid,
    "kappa_grid": lambda v: _csv_list(v, float),
}


def resolve_config(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(command=args.command)
    names = {f.name for f in fields(RunConfig)}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                data = tomli.load(fh)
        except OSError as exc:
            raise CliError("io", f"cannot read config {args.config}: {exc.strerror}") from None
        except tomli.TOMLDecodeError as exc:
            raise CliError("parse", f"config {args.config}: {exc}") from None
        for key, value in data.items():
            if key not in names or key == "command":
                raise CliError("validation", f"unknown config key {key!r}")
            setattr(cfg, key, _CASTS.get(key, lambda v: v)(value))
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None or key not in names:
            continue
        setattr(cfg, key, _CASTS.get(key, lambda v: v)(value))
    return cfg.validate()


# ------------------------------------------------------------------ output


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError("io", f"cannot create {out}: {exc.strerror}") from None
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def _load_sample(cfg: RunConfig):
    path = Path(cfg.sample)
    if not path.exists():
        raise CliError("io", f"sample file {path} not found")
    try:
        z = read_sample(path)
    except SampleFormatError as exc:
        raise CliError("parse", f"{path}: {exc}") from None
    design = cfg.design or z.meta.get("design") or "uniform"
    if design not in DESIGNS:
        raise CliError("catalog", str(CatalogError("design", design, DESIGNS)))
    return z, design


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig, out=None) -> Path:
    out = out or sys.stdout
    design = get_design(cfg.design or "uniform")
    f = get_function(cfg.function, design)
    try:
        z = generate_sample(design, f, cfg.sigma, cfg.n, seed=cfg.seed, M=cfg.M)
    except DesignError as exc:
        raise CliError("validation", str(exc)) from None
    outdir = _outdir(cfg)
    path = outdir / "sample.csv"
    write_sample(z, path, outdir / "sample.json")
    print(f"wrote {z.n} pairs to {path}", file=out)
    return path


def cmd_fit(cfg: RunConfig, out=None) -> dict:
    out = out or sys.stdout
    z, design = _load_sample(cfg)
    rule = cfg.rule[0]
    est = fit(z, cfg.fit_config(rule, design))
    outdir = _outdir(cfg)
    (outdir / "estimator.json").write_text(est.to_json())
    (outdir / "tree.json").write_text(est.tree.to_json() + "\n")
    report = {
        "n": z.n,
        "rule": rule,
        "lambda_n": est.meta.get("lambda_n"),
        "j_star": est.meta.get("j_star"),
        "retained": len(est.terms),
        "tree_nodes": len(est.tree),
        "empirical_risk": est.empirical_risk(z),
    }
    _write_json(outdir / "fit_report.json", report)
    lam = report["lambda_n"]
    print(f"n={z.n}", file=out)
    print(f"lambda_n={'n/a' if lam is None else repr(lam)}", file=out)
    print(f"j_star={report['j_star']}", file=out)
    print(f"retained={report['retained']}", file=out)
    print(f"empirical_risk={report['empirical_risk']!r}", file=out)
    return report


def _catalog_function(z, design):
    name = z.meta.get("function")
    if name in FUNCTIONS:
        return get_function(name, get_design(design))
    return None


def cmd_compare(cfg: RunConfig, out=None) -> list[dict]:
    out = out or sys.stdout
    z, design = _load_sample(cfg)
    f = _catalog_function(z, design)
    fits = {rule: fit(z, cfg.fit_config(rule, design)) for rule in COMPARE_RULES}
    hard_in_vertical = fits["hard"].retained <= fits["vertical"].retained
    rows = []
    for rule, est in fits.items():
        oracle = l2g_distance(f, est, get_design(design)) ** 2 if f is not None else None
        rows.append(
            {
                "rule": rule,
                "retained": len(est.terms),
                "empirical_risk": est.empirical_risk(z),
                "oracle_risk": oracle,
                "hard_subset_vertical": hard_in_vertical,
            }
        )
    outdir = _outdir(cfg)
    with open(outdir / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rule", "retained", "empirical_risk", "oracle_risk", "hard_subset_vertical"])
        for r in rows:
            w.writerow([r["rule"], r["retained"], _fmt(r["empirical_risk"]), _fmt(r["oracle_risk"]), str(r["hard_subset_vertical"]).lower()])
    for r in rows:
        print(f"{r['rule']:>10} retained={r['retained']:<5d} empirical_risk={r['empirical_risk']:.6g} oracle_risk={_fmt(r['oracle_risk']) or 'n/a'}", file=out)
    print(f"hard_subset_vertical={str(hard_in_vertical).lower()}", file=out)
    return rows


def cmd_cv(cfg: RunConfig, out=None) -> float:
    out = out or sys.stdout
    z, design = _load_sample(cfg)
    res = cv_kappa(z, cfg.kappa_grid, cfg.folds, cfg.fit_config(cfg.rule[0], design), seed=cfg.seed)
    outdir = _outdir(cfg)
    with open(outdir / "cv_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kappa", "cv_score"])
        for k, s in zip(res.grid, res.scores):
            w.writerow([repr(k), repr(s)])
    print(f"selected_kappa={res.kappa!r}", file=out)
    return res.kappa


def rates_self_test(out=None) -> float:
    out = out or sys.stdout
    grid = [2**k for k in range(9, 16)]
    risks = [(math.log(n) / n) ** (2.0 / 3.0) for n in grid]
    slope = rate_slope(grid, risks)
    ok = abs(slope - 2.0 / 3.0) <= 1e-6
    print(f"self_test_slope={slope!r} expected=0.6666666666666666 {'PASS' if ok else 'FAIL'}", file=out)
    if not ok:
        raise CliError("selftest", f"synthetic slope {slope} differs from 2/3")
    return slope


def cmd_rates(cfg: RunConfig, out=None) -> dict:
    out = out or sys.stdout
    if cfg.self_test:
        rates_self_test(out)
        return {}
    design = cfg.design or "uniform"
    outdir = _outdir(cfg)
    reports = {}
    for rule in cfg.rule:
        exp = ExperimentConfig(
            design=design,
            function=cfg.function,
            sigma=cfg.sigma,
            n=cfg.grid[0],
            n_reps=cfg.reps,
            base_seed=cfg.seed,
            fit=cfg.fit_config(rule, design),
            M=cfg.M,
            kappa_cv=bool(cfg.kappa_cv) and rule in ("vertical", "piecewise", "hard"),
            kappa_grid=tuple(cfg.kappa_grid),
            cv_folds=cfg.folds,
        )
        reports[rule] = rate_experiment(cfg.grid, exp, s=cfg.s, checkpoint_dir=outdir / "checkpoints")
    with open(outdir / "risk.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "rule", "kappa", "gamma", "mean_risk", "std_err", "n_reps", "seed"])
        for rule, rep in reports.items():
            kappa = "cv" if cfg.kappa_cv and rule in ("vertical", "piecewise", "hard") else repr(cfg.kappa)
            for n, r, s in rep.points:
                w.writerow([n, rule, kappa, repr(cfg.gamma), repr(r), repr(s), cfg.reps, cfg.seed])
    with open(outdir / "plot.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["log_lognn", "log_risk", "rule"])
        for rule, rep in reports.items():
            for n, r, _ in rep.points:
                w.writerow([repr(math.log(math.log(n) / n)), repr(math.log(r)), rule])
    _write_json(outdir / "rate_report.json", {rule: rep.to_dict() for rule, rep in reports.items()})
    for rule, rep in reports.items():
        print(f"{rule}: slope={rep.fitted_slope:.4f} theory={theoretical_rate_exponent(cfg.s):.4f}", file=out)
    return reports


_COMMAND_FNS = {"simulate": cmd_simulate, "fit": cmd_fit, "rates": cmd_rates, "compare": cmd_compare, "cv": cmd_cv}


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
        _COMMAND_FNS[cfg.command](cfg)
    except CliError as exc:
        print(f"ERROR:{exc.code}:{exc}", file=sys.stderr)
        return 2
    except (CatalogError,) as exc:
        print(f"ERROR:catalog:{exc}", file=sys.stderr)
        return 2
    except (FitError, DesignError, WaveletError) as exc:
        print(f"ERROR:fit:{exc}", file=sys.stderr)
        return 2
    except RiskError as exc:
        print(f"ERROR:validation:{exc}", file=sys.stderr)
        return 2
    except QuadratureError as exc:
        print(f"ERROR:quadrature:{exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ERROR:io:{exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
