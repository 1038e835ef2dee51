"""Experiment command line: fit / sweep / trace / synth.

Every command writes delimited outputs (CSV + a config echo) into its run
directory and, unless --no-figures is given, renders the matching figures
next to them.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import plots
from .cluster import evaluate_repeated
from .data import (
    DataMatrix,
    NoiseSpec,
    add_gaussian_noise,
    load_matrix_csv,
    normalize_columns_unit_l2,
    save_matrix_csv,
    synth_blobs,
)
from .engine import SPSCConfig, fit_csc_init, fit_spsc
from .errors import MissingArtifact, NonFiniteObjective, SPSCError
from .hypergraph import build_knn_graph, compute_weight_and_laplacian, knn_hypergraph_laplacian
from .selfpace import Variant
from .solvers import RegularizationConfig

BETA_GRID = [0.005, 0.01, 0.02, 0.04, 0.08]
ALPHA_GRID = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
ALL_METHODS = ["os", "sc", "lsc-g", "lsc-h", "csc", "spsc-sample", "spsc-element", "spsc-feature"]
RESULT_FIELDS = ["dataset", "method", "rho", "acc_mean", "nmi_mean", "acc_std", "nmi_std"]
TRACE_FIELDS = ["iter", "lambda", "pearson", "spearman", "mean_weight"]


@dataclass
class ExperimentConfig:
    """Effective configuration for fit/sweep; echoed verbatim into run dirs."""

    data: str | None = None
    has_labels: bool = False
    r: int = 128
    variant: str = "element"
    spl_mode: str = "soft"
    alpha: float = 0.0
    beta: float = 0.01
    gamma: float = 0.0
    mu: float = 1.2
    select_fraction0: float = 0.5
    max_outer_iters: int = 100
    tol_objective: float = 1e-5
    tol_weight_saturation: float = 1e-3
    rho: float = 0.0
    rho_list: list[float] = field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    knn_k: int = 3
    repeats: int = 30
    seed: int = 0
    out: str | None = None
    methods: list[str] = field(default_factory=lambda: list(ALL_METHODS))
    q_update: str = "per-iteration"
    tune: bool = False
    figures: bool = True


def _resolve_config(args) -> ExperimentConfig:
    """Defaults < JSON config file < command-line flags; env seed last resort."""
    cfg = ExperimentConfig()
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    loaded = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - known
        if unknown:
            raise SPSCError(f"unknown config keys: {sorted(unknown)}")
        for key, value in loaded.items():
            setattr(cfg, key, value)
    seed_given = getattr(args, "seed", None) is not None or "seed" in loaded
    for key in known:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if not seed_given:
        cfg.seed = int(os.environ.get("SPSC_SEED", "0"))
    return cfg


def _engine_config(cfg: ExperimentConfig, variant=None, alpha=None, gamma=None) -> SPSCConfig:
    return SPSCConfig(
        variant=Variant(variant if variant is not None else cfg.variant),
        reg=RegularizationConfig(
            alpha=cfg.alpha if alpha is None else alpha,
            beta=cfg.beta,
            gamma=cfg.gamma if gamma is None else gamma,
        ),
        r=cfg.r,
        spl_mode=cfg.spl_mode,
        mu=cfg.mu,
        select_fraction0=cfg.select_fraction0,
        max_outer_iters=cfg.max_outer_iters,
        tol_objective=cfg.tol_objective,
        tol_weight_saturation=cfg.tol_weight_saturation,
        seed=cfg.seed,
        q_update=cfg.q_update,
    )


def _echo_config(cfg: ExperimentConfig, run_dir: Path) -> None:
    with open(run_dir / "config-echo.json", "w") as fh:
        json.dump(dataclasses.asdict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _drop_zero_columns(X: DataMatrix, sidecar=None):
    norms = np.linalg.norm(X.values, axis=0)
    keep = norms > 0.0
    if keep.all():
        return X, sidecar
    dropped = int((~keep).sum())
    print(f"warning: dropping {dropped} all-zero sample column(s)", file=sys.stderr)
    labels = X.labels[keep] if X.labels is not None else None
    return DataMatrix(X.values[:, keep], labels), (sidecar[keep] if sidecar is not None else None)


def _snapshot_matrix(weights: np.ndarray, variant: Variant) -> np.ndarray:
    if variant is Variant.SAMPLE:
        return weights[None, :]
    if variant is Variant.FEATURE:
        return weights[:, None]
    return weights


def cmd_fit(args) -> int:
    cfg = _resolve_config(args)
    if not cfg.data:
        print("error: fit needs --data (or a config file providing it)", file=sys.stderr)
        return 2
    if not os.path.isfile(cfg.data):
        print(f"error: data file not found: {cfg.data}", file=sys.stderr)
        return 2
    if not cfg.out:
        print("error: fit needs an output directory (--out)", file=sys.stderr)
        return 2

    X = load_matrix_csv(cfg.data, cfg.has_labels)
    noise_mag = None
    if cfg.rho > 0:
        clean = X.values.copy()
        X = add_gaussian_noise(X, NoiseSpec(cfg.rho, cfg.seed + 101))
        noise_mag = np.mean(np.abs(X.values - clean), axis=0)
    X, noise_mag = _drop_zero_columns(X, noise_mag)
    X = normalize_columns_unit_l2(X)
    H = knn_hypergraph_laplacian(X, cfg.knn_k)

    run_dir = Path(cfg.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, run_dir)
    if getattr(args, "export_hypergraph", False):
        save_matrix_csv(run_dir / "I.csv", H.incidence)
        save_matrix_csv(run_dir / "W.csv", H.W)
        save_matrix_csv(run_dir / "L.csv", H.L)
    try:
        result = fit_spsc(X, H, _engine_config(cfg))
    except NonFiniteObjective as exc:
        if exc.trace is not None:
            exc.trace.to_csv(run_dir / "trace.csv")
        print(f"error: {exc} (partial trace preserved)", file=sys.stderr)
        return 1

    save_matrix_csv(run_dir / "B.csv", result.B)
    save_matrix_csv(run_dir / "S.csv", result.S)
    if X.labels is not None:
        save_matrix_csv(run_dir / "labels.csv", X.labels[None, :])
    result.trace.to_csv(run_dir / "trace.csv")
    variant = Variant(cfg.variant)
    for row in result.trace.rows:
        save_matrix_csv(
            run_dir / f"V_iter_{row.iteration}.csv", _snapshot_matrix(row.weights, variant)
        )
    if noise_mag is not None:
        save_matrix_csv(run_dir / "noise.csv", noise_mag[None, :])
    if cfg.figures:
        plots.render_fit_figure(result.trace, run_dir / "fit_summary.png")
    status = "converged" if result.converged else "iteration cap reached"
    print(f"{run_dir} ({result.iterations} outer iterations, {status})")
    return 0


def _codes_for_method(method, X, cfg, caches):
    """Fit one baseline / variant and return the matrix handed to k-means."""
    alpha = cfg.alpha if cfg.alpha > 0 else 1.0
    gamma = cfg.gamma if cfg.gamma > 0 else 1.0
    if method == "os":
        return X.values
    if method == "sc":
        _, S, _ = fit_csc_init(X, None, _engine_config(cfg, alpha=0.0, gamma=0.0))
        return S
    if method in ("lsc-g", "lsc-h"):
        key = "graph" if method == "lsc-g" else "hyper"
        _, S, _ = fit_csc_init(X, caches[key], _engine_config(cfg, alpha=alpha, gamma=0.0))
        return S
    if method == "csc":
        _, S, _ = fit_csc_init(X, caches["hyper"], _engine_config(cfg, alpha=alpha, gamma=gamma))
        return S
    if method.startswith("spsc-"):
        variant = method.split("-", 1)[1]
        res = fit_spsc(X, caches["hyper"], _engine_config(cfg, variant=variant, alpha=alpha, gamma=gamma))
        return res.S
    raise SPSCError(f"unknown method {method!r}")


def _tune_parameters(X0, cfg: ExperimentConfig, caches) -> ExperimentConfig:
    """Grid-tune beta (plain SC), then alpha (LSC-H), then gamma (CSC) by mean ACC."""
    k = len(np.unique(X0.labels))

    def score(code_cfg_alpha, code_cfg_gamma, beta):
        tuned = dataclasses.replace(cfg, alpha=code_cfg_alpha, beta=beta, gamma=code_cfg_gamma)
        H = caches["hyper"] if (code_cfg_alpha > 0 or code_cfg_gamma > 0) else None
        _, S, _ = fit_csc_init(
            X0, H, _engine_config(tuned, alpha=code_cfg_alpha, gamma=code_cfg_gamma)
        )
        return evaluate_repeated(S, k, X0.labels, cfg.repeats, cfg.seed).acc

    best_beta = max(BETA_GRID, key=lambda b: score(0.0, 0.0, b))
    best_alpha = max(ALPHA_GRID, key=lambda a: score(a, 0.0, best_beta))
    best_gamma = max(ALPHA_GRID, key=lambda g: score(best_alpha, g, best_beta))
    print(
        f"tuned: beta={best_beta} alpha={best_alpha} gamma={best_gamma}", file=sys.stderr
    )
    return dataclasses.replace(cfg, alpha=best_alpha, beta=best_beta, gamma=best_gamma)


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    if not cfg.data:
        print("error: sweep needs --data (or a config file providing it)", file=sys.stderr)
        return 2
    if not os.path.isfile(cfg.data):
        print(f"error: data file not found: {cfg.data}", file=sys.stderr)
        return 2
    if not cfg.out:
        print("error: sweep needs an output directory (--out)", file=sys.stderr)
        return 2
    clean = load_matrix_csv(cfg.data, has_labels=True)
    if clean.labels is None:
        print("error: sweep needs labeled data", file=sys.stderr)
        return 2
    dataset = Path(cfg.data).stem

    run_dir = Path(cfg.out)
    run_dir.mkdir(parents=True, exist_ok=True)

    records = []
    for ri, rho in enumerate(cfg.rho_list):
        X = clean
        if rho > 0:
            X = add_gaussian_noise(clean, NoiseSpec(rho, cfg.seed + 101 + ri))
        X, _ = _drop_zero_columns(X)
        X = normalize_columns_unit_l2(X)
        caches = {
            "hyper": knn_hypergraph_laplacian(X, cfg.knn_k),
            "graph": compute_weight_and_laplacian(build_knn_graph(X, cfg.knn_k)),
        }
        if ri == 0 and cfg.tune:
            cfg = _tune_parameters(X, cfg, caches)
        k = len(np.unique(X.labels))
        for method in cfg.methods:
            try:
                codes = _codes_for_method(method, X, cfg, caches)
                result = evaluate_repeated(codes, k, X.labels, cfg.repeats, cfg.seed)
            except Exception as exc:  # a failed method must not kill the sweep
                print(f"warning: {method} at rho={rho} failed: {exc}", file=sys.stderr)
                continue
            accs = np.array([a for a, _ in result.per_run])
            nmis = np.array([s for _, s in result.per_run])
            records.append(
                {
                    "dataset": dataset,
                    "method": method,
                    "rho": rho,
                    "acc_mean": result.acc,
                    "nmi_mean": result.nmi,
                    "acc_std": float(accs.std()),
                    "nmi_std": float(nmis.std()),
                }
            )
            print(
                f"{dataset} rho={rho:g} {method}: ACC={result.acc:.4f} NMI={result.nmi:.4f}"
            )

    _echo_config(cfg, run_dir)
    with open(run_dir / "results.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        writer.writeheader()
        writer.writerows(records)
    if cfg.figures and records:
        plots.render_sweep_figures(records, run_dir)
    print(run_dir / "results.csv")
    return 0


def _read_trace_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_trace(args) -> int:
    run_dir = Path(args.run)
    echo_path = run_dir / "config-echo.json"
    trace_path = run_dir / "trace.csv"
    noise_path = run_dir / "noise.csv"
    for required in (echo_path, trace_path, noise_path):
        if not required.is_file():
            raise MissingArtifact(f"{required} is required for the weight trace")
    with open(echo_path) as fh:
        variant = Variant(json.load(fh)["variant"])
    trace_rows = _read_trace_csv(trace_path)
    noise = load_matrix_csv(noise_path).values.ravel()

    rows = []
    for rec in trace_rows:
        t = int(rec["iteration"])
        snap_path = run_dir / f"V_iter_{t}.csv"
        if not snap_path.is_file():
            raise MissingArtifact(f"missing weight snapshot {snap_path}")
        W = load_matrix_csv(snap_path).values
        if variant is Variant.SAMPLE:
            per_sample = W.ravel()
        elif variant is Variant.FEATURE:
            per_sample = np.full(noise.shape, W.mean())
        else:
            per_sample = W.mean(axis=0)
        if per_sample.shape != noise.shape:
            raise MissingArtifact(
                f"{snap_path}: snapshot covers {per_sample.size} samples, noise sidecar {noise.size}"
            )
        pearson = spearman = None
        if np.ptp(per_sample) > 0 and np.ptp(noise) > 0:  # undefined on constant input
            p = float(stats.pearsonr(noise, per_sample)[0])
            s = float(stats.spearmanr(noise, per_sample)[0])
            pearson = p if np.isfinite(p) else None
            spearman = s if np.isfinite(s) else None
        rows.append(
            {
                "iter": t,
                "lambda": float(rec["lambda"]),
                "pearson": pearson,
                "spearman": spearman,
                "mean_weight": float(W.mean()),
            }
        )

    out_dir = Path(args.out) if args.out else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "weight_trace.csv"
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_FIELDS)
        for row in rows:
            writer.writerow(
                [
                    row["iter"],
                    repr(row["lambda"]),
                    "" if row["pearson"] is None else repr(row["pearson"]),
                    "" if row["spearman"] is None else repr(row["spearman"]),
                    repr(row["mean_weight"]),
                ]
            )
    if not args.no_figures:
        plots.render_weight_trace_figure(rows, out_dir / "weight_trace.png")
    print(out_path)
    return 0


def cmd_synth(args) -> int:
    X, corrupted = synth_blobs(
        n_per_class=args.n_per_class,
        classes=args.classes,
        m=args.m,
        r_true=args.r_true,
        noise_frac=args.noise_frac,
        seed=args.seed if args.seed is not None else int(os.environ.get("SPSC_SEED", "0")),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_matrix_csv(out, X.values, X.labels)
    if corrupted.size:
        save_matrix_csv(out.with_name(out.stem + "_corrupted_indices.csv"), corrupted[None, :])
    print(f"{out} ({X.m} features x {X.n} samples, {corrupted.size} corrupted)")
    return 0


def _add_experiment_flags(p: argparse.ArgumentParser, sweep: bool) -> None:
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override")
    p.add_argument("--data", help="input CSV (rows = features, columns = samples)")
    p.add_argument(
        "--has-labels", dest="has_labels", action=argparse.BooleanOptionalAction, default=None,
        help="treat the last CSV row as integer class labels",
    )
    p.add_argument("--r", type=int, help="dictionary size (default 128)")
    p.add_argument("--variant", choices=[v.value for v in Variant], help="selection granularity")
    p.add_argument("--spl-mode", dest="spl_mode", choices=["soft", "hard"])
    p.add_argument("--alpha", type=float, help="Laplacian smoothing weight")
    p.add_argument("--beta", type=float, help="l1 sparsity weight")
    p.add_argument("--gamma", type=float, help="incidence consistency weight")
    p.add_argument("--mu", type=float, help="pace growth factor (> 1)")
    p.add_argument(
        "--select-fraction0", dest="select_fraction0", type=float,
        help="fraction of items selected at the first iteration",
    )
    p.add_argument("--max-outer-iters", dest="max_outer_iters", type=int)
    p.add_argument("--tol-objective", dest="tol_objective", type=float)
    p.add_argument("--tol-weight-saturation", dest="tol_weight_saturation", type=float)
    p.add_argument("--knn-k", dest="knn_k", type=int, help="neighbors per hyperedge (default 3)")
    p.add_argument("--seed", type=int, help="RNG seed (SPSC_SEED env var as fallback)")
    p.add_argument("--out", help="output run directory")
    p.add_argument("--q-update", dest="q_update", choices=["per-iteration", "frozen"])
    p.add_argument(
        "--figures", dest="figures", action=argparse.BooleanOptionalAction, default=None,
        help="render PNG figures alongside the CSV outputs",
    )
    if sweep:
        p.add_argument(
            "--rho-list", dest="rho_list",
            type=lambda s: [float(v) for v in s.split(",")],
            help="comma-separated corruption ratios (default 0,0.2,...,1.0)",
        )
        p.add_argument(
            "--methods",
            type=lambda s: s.split(","),
            help=f"comma-separated subset of {','.join(ALL_METHODS)}",
        )
        p.add_argument("--repeats", type=int, help="k-means restarts per cell (default 30)")
        p.add_argument(
            "--tune", action=argparse.BooleanOptionalAction, default=None,
            help="grid-tune beta/alpha/gamma on the first rho before sweeping",
        )
    else:
        p.add_argument("--rho", type=float, help="corruption ratio applied before fitting")
        p.add_argument(
            "--export-hypergraph", dest="export_hypergraph", action="store_true",
            help="also write the incidence, weight, and Laplacian matrices as CSV",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spsc",
        description="Self-paced sparse coding experiments: fit models, sweep noise levels, trace weights.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one model and write its run directory")
    _add_experiment_flags(p_fit, sweep=False)
    p_fit.set_defaults(func=cmd_fit)

    p_sweep = sub.add_parser("sweep", help="noise sweep across methods, emitting results.csv")
    _add_experiment_flags(p_sweep, sweep=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_trace = sub.add_parser("trace", help="noise-vs-weight correlations from a fit run dir")
    p_trace.add_argument("run", help="run directory produced by `spsc fit`")
    p_trace.add_argument("--out", help="where to write weight_trace.csv (default: run dir)")
    p_trace.add_argument("--no-figures", action="store_true")
    p_trace.set_defaults(func=cmd_trace)

    p_synth = sub.add_parser("synth", help="generate a labeled synthetic dataset CSV")
    p_synth.add_argument("--out", required=True, help="output CSV path")
    p_synth.add_argument("--n-per-class", dest="n_per_class", type=int, default=20)
    p_synth.add_argument("--classes", type=int, default=3)
    p_synth.add_argument("--m", type=int, default=30)
    p_synth.add_argument("--r-true", dest="r_true", type=int, default=6)
    p_synth.add_argument("--noise-frac", dest="noise_frac", type=float, default=0.0)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SPSCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
