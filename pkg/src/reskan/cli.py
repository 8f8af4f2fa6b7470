"""Command-line entry point: ``reskan {compile,approximate,train,bounds,risk-gap}``.

Exit codes: 0 success, 2 usage or invalid specification, 3 numeric failure.
Every command draws its randomness from ``--seed`` through named child
streams, so re-running with the same arguments writes byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds as bnd
from .besov import (
    BesovParams,
    besov_estimate,
    expansion_derivative,
    expansion_network,
    fit_spline_expansion,
    read_expansion,
    spline_quasi_norm,
    truncate_expansion,
    truncation_level_for,
)
from .gadgets import GadgetSpec, compile_gadget
from .learning import (
    HISTORY_COLUMNS,
    Dataset,
    InputLaw,
    NoiseLaw,
    Target,
    TrainingConfig,
    TrainingDiverged,
    cusp_target,
    empirical_risk,
    f_alpha_target,
    risk_report,
    sample_dataset,
    sec_target,
    train,
    true_risk_mc,
)
from .modelio import load, save
from .network import count_stats, random_network
from .splines import DyadicIndex
from .utils import atomic_write_text, int_seed, rng_for

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

KIND_ALIASES = {
    "square": "square",
    "pair-mult": "pair_mult",
    "mult": "mult_d",
    "tensor-spline": "tensor_spline",
    "mra-spline": "mra_spline",
}


class UsageError(Exception):
    pass


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def resolve_target(name: str, domain: tuple[float, float] | None = None) -> Target:
    """``f_alpha<k>``, ``sec``, ``cusp`` or the path of an expansion file."""
    if name.startswith("f_alpha"):
        try:
            a = int(name[len("f_alpha") :])
        except ValueError:
            raise UsageError(f"bad target {name!r}: expected f_alpha<positive integer>") from None
        if a < 1:
            raise UsageError(f"bad target {name!r}: alpha must be >= 1")
        return f_alpha_target(a, domain or (0.0, 1.0))
    if name == "sec":
        return sec_target(domain or (-1.5, 1.5))
    if name == "cusp":
        return cusp_target(domain or (0.01, 2.0))
    if Path(name).is_file():
        try:
            e = read_expansion(name)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if e.d != 1:
            raise UsageError(f"{name}: only univariate expansions can serve as targets here")
        return Target(
            f"expansion:{Path(name).name}",
            e,
            lambda m, x: expansion_derivative(e, m, x),
            domain or (0.0, 1.0),
            e.order,
        )
    raise UsageError(f"unknown target {name!r}: use f_alpha<k>, sec, cusp or an expansion file path")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _interval(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'low,high', got {text!r}") from None
    if not hi > lo:
        raise argparse.ArgumentTypeError(f"empty interval {text!r}")
    return lo, hi


# compile -----------------------------------------------------------------------


def cmd_compile(args) -> int:
    idx = None
    if args.kind == "mra-spline":
        j = args.j if args.j is not None else [0] * args.d
        if len(j) != args.d:
            raise UsageError(f"--j has {len(j)} entries, expected d = {args.d}")
        if args.k < 0:
            raise UsageError("--k must be >= 0")
        idx = DyadicIndex(args.k, tuple(j))
    try:
        net = compile_gadget(GadgetSpec(KIND_ALIASES[args.kind], args.d, args.order, idx))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save(net, args.out)
    st = count_stats(net)
    print(f"depth={st.depth} width={st.width} nonzero={st.nonzero_params}")
    return EXIT_OK


# approximate -------------------------------------------------------------------

APPROX_COLUMNS = (
    "eps",
    "K",
    "order",
    "predicted_error",
    "constant_hint",
    "measured_error",
    "measured_seminorm",
    "quasi_norm",
    "reconstruction_max_abs",
    "width",
    "depth",
    "nonzero",
    "fit_regularized",
)


@dataclass(frozen=True)
class ApproxRow:
    eps: float
    K: int
    order: int
    predicted_error: float
    constant_hint: float
    measured_error: float
    measured_seminorm: float
    quasi_norm: float
    reconstruction_max_abs: float
    width: int
    depth: int
    nonzero: int
    fit_regularized: bool

    def row(self):
        return [getattr(self, c) for c in APPROX_COLUMNS]


def approximate(
    target,
    eps_list,
    alpha: float,
    s: float,
    order: int | None = None,
    p: float = 2.0,
    q: float = 2.0,
    grid_per_level: int = 4,
    grid_n: int = 2049,
    out_dir: Path | None = None,
) -> list[ApproxRow]:
    """Fit, truncate and assemble one network per eps; measure the B^alpha error on a grid.

    The spline order defaults to ceil(alpha), the order used by the
    expansion in the approximation argument.
    """
    params = BesovParams(alpha, p, q)
    order = math.ceil(alpha) if order is None else order
    if order < 1:
        raise UsageError("spline order must be >= 1")
    Ks = [truncation_level_for(e, alpha, s) for e in eps_list]
    if max(Ks) > 8:
        raise UsageError(f"eps too small: needs K = {max(Ks)} > 8 levels")
    full = fit_spline_expansion(target, max(Ks), order, grid_per_level, d=1)
    grid = np.linspace(0.0, 1.0, grid_n)
    f_grid = np.asarray(target(grid), dtype=np.float64)
    if not np.all(np.isfinite(f_grid)):
        raise FloatingPointError("target is not finite on [0, 1]")
    rows = []
    for eps, K in zip(eps_list, Ks):
        tr = truncate_expansion(full, K, params, s)
        net = expansion_network(tr.expansion)
        net_grid = np.asarray(net(grid[:, None]))[:, 0]
        est = besov_estimate(f_grid - net_grid, params, grid_n)
        st = count_stats(net)
        rows.append(
            ApproxRow(
                float(eps),
                K,
                order,
                tr.predicted_error,
                tr.constant_hint,
                float(est.total),
                float(est.seminorm),
                spline_quasi_norm(tr.expansion, params),
                float(np.max(np.abs(net_grid - tr.expansion(grid)))),
                st.width,
                st.depth,
                st.nonzero_params,
                bool(full.report.any_regularized),
            )
        )
        if out_dir is not None:
            save(net.replace(meta={"kind": "approximation", "K": K, "eps": float(eps)}), out_dir / f"model_K{K}.json")
    return rows


def cmd_approximate(args) -> int:
    if not args.s > args.alpha:
        raise UsageError(f"need s > alpha, got s={args.s}, alpha={args.alpha}")
    if any(not e > 0 for e in args.eps):
        raise UsageError("eps values must be > 0")
    target = resolve_target(args.target, (0.0, 1.0))
    out = Path(args.out)
    rows = approximate(target, args.eps, args.alpha, args.s, args.order, args.p, args.q, args.grid_per_level, args.grid_n, out)
    text = csv_text(APPROX_COLUMNS, [r.row() for r in rows])
    atomic_write_text(out / "approximation.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


# train -------------------------------------------------------------------------

SUMMARY_COLUMNS = (
    "run",
    "target",
    "alpha",
    "order",
    "residual",
    "initial_mse",
    "final_mse",
    "test_mse",
    "empirical_risk",
    "true_risk_estimate",
    "mc_samples",
    "gap",
)


@dataclass(frozen=True)
class RunSpec:
    """One training experiment; every field is plain data so runs can move between processes."""

    name: str
    target: str
    alpha: float
    order: int
    width: int
    layers: int
    residual: bool
    domain: tuple[float, float]
    n_train: int
    n_test: int
    noise: float
    epochs: int
    lr: float
    s: int
    batch_size: int | None
    momentum: float
    mc_samples: int
    seed: int
    out: str
    init: str = "support"
    grad_clip: float | None = 1.0
    lr_schedule: str = "cosine"


def run_experiment(spec: RunSpec) -> list:
    """Train one model and write its history, model and risk files; returns a summary row."""
    target = resolve_target(spec.target, spec.domain)
    law = InputLaw(*spec.domain)
    noise = NoiseLaw("gaussian", spec.noise)
    derivs = (spec.s,) if spec.s > 0 else ()
    data = sample_dataset(target, spec.n_train, law, noise, int_seed(spec.seed, f"data/{spec.target}"), derivs)
    xt = np.linspace(*spec.domain, spec.n_test)
    test = Dataset(xt[:, None], target(xt), 0)
    init_rng = rng_for(spec.seed, f"init/{spec.target}/{spec.width}x{spec.layers}")
    net = random_network(
        init_rng,
        [1] + [spec.width] * spec.layers,
        1,
        spec.order,
        spec.alpha,
        residual=spec.residual,
        bias=spec.init,
    )
    cfg = TrainingConfig(
        spec.epochs,
        spec.lr,
        spec.batch_size,
        spec.s,
        spec.momentum,
        spec.seed,
        spec.residual,
        spec.grad_clip,
        spec.lr_schedule,
    )
    out = Path(spec.out)
    try:
        result = train(net, data, cfg, test)
    except TrainingDiverged as exc:
        _write_history(out / f"{spec.name}_history.csv", exc.history)
        raise
    _write_history(out / f"{spec.name}_history.csv", result.history)
    save(result.net.replace(meta={"run": spec.name, "target": spec.target, "residual": spec.residual}), out / f"{spec.name}.json")
    rep = risk_report(result.net, data, target, law, noise, spec.mc_samples, int_seed(spec.seed, f"mc/{spec.name}"))
    atomic_write_text(
        out / f"{spec.name}_risk.csv",
        csv_text(
            ("empirical_risk", "true_risk_estimate", "mc_samples", "gap"),
            [[rep.empirical_risk, rep.true_risk_estimate, rep.mc_samples, rep.gap]],
        ),
    )
    return [
        spec.name,
        spec.target,
        spec.alpha,
        spec.order,
        spec.residual,
        result.initial_mse,
        result.final_mse,
        result.final_test_mse,
        rep.empirical_risk,
        rep.true_risk_estimate,
        rep.mc_samples,
        rep.gap,
    ]


def _write_history(path: Path, history: list[dict]) -> None:
    atomic_write_text(path, csv_text(HISTORY_COLUMNS, [[h[c] for c in HISTORY_COLUMNS] for h in history]))


def _workers() -> int:
    raw = os.environ.get("RESKAN_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"RESKAN_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"RESKAN_THREADS must be a positive integer, got {raw!r}")
    return n


def build_runs(args) -> list[RunSpec]:
    residuals = {"on": [True], "off": [False], "both": [True, False]}[args.residual]
    if args.alpha_grid:
        targets = [(f"f_alpha{a}", float(a)) for a in args.alpha_grid]
    else:
        targets = [(args.target, args.alpha)]
    runs = []
    for tname, a in targets:
        order = args.order if args.order is not None else max(math.ceil(a) + 1, 1)
        if order > 8:
            raise UsageError(f"spline order {order} exceeds 8")
        if args.s > order:
            raise UsageError(f"--s {args.s} exceeds the spline order {order}")
        resolve_target(tname, args.domain)
        for res in residuals:
            tag = "reskan" if res else "kan"
            runs.append(
                RunSpec(
                    f"{tname.replace(':', '_').replace('/', '_')}_{tag}",
                    tname,
                    a,
                    order,
                    args.width,
                    args.layers,
                    res,
                    args.domain,
                    args.n_train,
                    args.n_test,
                    args.noise,
                    args.epochs,
                    args.lr,
                    args.s,
                    args.batch_size,
                    args.momentum,
                    args.mc_samples,
                    args.seed,
                    args.out,
                    args.init,
                    args.grad_clip if args.grad_clip > 0 else None,
                    args.lr_schedule,
                )
            )
    return runs


def cmd_train(args) -> int:
    if args.width < 1 or args.layers < 1:
        raise UsageError("--width and --layers must be >= 1")
    if args.grad_clip < 0:
        raise UsageError("--grad-clip must be >= 0")
    runs = build_runs(args)
    workers = min(_workers(), len(runs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_experiment, runs))
    else:
        rows = [run_experiment(r) for r in runs]
    text = csv_text(SUMMARY_COLUMNS, rows)
    atomic_write_text(Path(args.out) / "summary.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


# bounds ------------------------------------------------------------------------


def bounds_table(args) -> dict:
    cfg = bnd.BoundConfig(args.c, args.c1)
    sc = bnd.sample_complexity_terms(args.eps, args.delta, args.L, args.W, args.order, args.alpha, args.d, cfg)
    n = args.n if args.n is not None else args.d - 0.5
    a_star = bnd.effective_smoothness(args.alpha, n, args.d, args.p)
    s = args.s if args.s is not None else a_star + 1.0
    size = bnd.approximator_size(args.eps, a_star, s, args.d)
    N = args.N if args.N is not None else sc.N
    return {
        "c": cfg.c,
        "c1": cfg.c1,
        "eps": args.eps,
        "delta": args.delta,
        "L": args.L,
        "W": args.W,
        "I": args.order,
        "alpha": args.alpha,
        "d": args.d,
        "pdim": bnd.pdim_bound(args.L, args.W, args.order, args.alpha, cfg),
        "gamma": args.gamma,
        "fat_shattering": bnd.fat_shattering_bound(args.gamma, args.L, args.W, args.order, args.alpha, args.d, cfg),
        "A": sc.A,
        "B": sc.B,
        "N_star": sc.N,
        "N": N,
        "certificate": bnd.generalization_certificate(N, args.eps, args.L, args.W, args.order, args.alpha, args.d, cfg),
        "n": n,
        "p": args.p,
        "alpha_star": a_star,
        "s": s,
        "K": size.K,
        "approx_width": size.width,
        "approx_depth": size.depth,
        "approx_params": size.params,
    }


def cmd_bounds(args) -> int:
    try:
        table = bounds_table(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    key_w = max(len(k) for k in table)
    for k, v in table.items():
        print(f"{k:<{key_w}}  {_fmt_num(v)}")
    if args.csv:
        atomic_write_text(args.csv, csv_text(list(table), [list(table.values())]))
    return EXIT_OK


def _fmt_num(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


# risk-gap ----------------------------------------------------------------------

RISK_GAP_COLUMNS = ("N", "reps", "mean_abs_gap", "std_abs_gap", "mean_empirical_risk", "true_risk_estimate", "mc_samples")


def risk_gap_study(
    net,
    target,
    law: InputLaw,
    noise: NoiseLaw,
    Ns,
    reps: int,
    mc_samples: int,
    seed: int,
) -> tuple[list[list], float]:
    """Mean |R - R_hat^N| over ``reps`` fresh datasets per N, and its log-log slope in N."""
    true = true_risk_mc(net, target, law, noise, mc_samples, int_seed(seed, "risk-gap/mc"))
    rows = []
    for N in Ns:
        gaps, emps = [], []
        for r in range(reps):
            data = sample_dataset(target, N, law, noise, int_seed(seed, f"risk-gap/{N}/{r}"))
            emp = empirical_risk(net, data)
            emps.append(emp)
            gaps.append(abs(true - emp))
        rows.append([N, reps, float(np.mean(gaps)), float(np.std(gaps)), float(np.mean(emps)), true, mc_samples])
    slope = float(np.polyfit(np.log(Ns), np.log([r[2] for r in rows]), 1)[0])
    return rows, slope


def cmd_risk_gap(args) -> int:
    if args.reps < 1 or args.mc_samples < 1 or any(n < 1 for n in args.n_grid):
        raise UsageError("--reps, --mc-samples and every N must be >= 1")
    target = resolve_target(args.target, args.domain)
    if args.model:
        net = load(args.model)
    else:
        net = random_network(rng_for(args.seed, "risk-gap/net"), [1, args.width], 1, order=3)
    rows, slope = risk_gap_study(
        net, target, InputLaw(*args.domain), NoiseLaw(args.noise_law, args.noise), args.n_grid, args.reps, args.mc_samples, args.seed
    )
    text = csv_text(RISK_GAP_COLUMNS, rows)
    if args.out:
        atomic_write_text(args.out, text)
    sys.stdout.write(text)
    print(f"# log-log slope of mean |R - R_hat^N| in N: {slope:.4f}")
    return EXIT_OK


# parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reskan", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="emit an exact gadget network")
    c.add_argument("kind", choices=sorted(KIND_ALIASES))
    c.add_argument("--d", type=int, default=2)
    c.add_argument("--order", type=int, default=1)
    c.add_argument("--k", type=int, default=0)
    c.add_argument("--j", type=_int_list, default=None, help="comma-separated shift vector")
    c.add_argument("--out", default="model.json")
    c.set_defaults(func=cmd_compile)

    a = sub.add_parser("approximate", help="fit, truncate and assemble a spline-expansion network")
    a.add_argument("--target", default="f_alpha3")
    a.add_argument("--eps", type=float, nargs="+", default=[0.25])
    a.add_argument("--alpha", type=float, default=1.0)
    a.add_argument("--s", type=float, default=2.5)
    a.add_argument("--order", type=int, default=None, help="spline order (default ceil(alpha))")
    a.add_argument("--p", type=float, default=2.0)
    a.add_argument("--q", type=float, default=2.0)
    a.add_argument("--grid-per-level", type=int, default=4)
    a.add_argument("--grid-n", type=int, default=2049)
    a.add_argument("--out", default="approx_out")
    a.set_defaults(func=cmd_approximate)

    t = sub.add_parser("train", help="Sobolev-loss training runs")
    t.add_argument("--target", default="f_alpha3")
    t.add_argument("--alpha", type=float, default=0.0, help="smoothness tag for the sparsity pattern")
    t.add_argument("--alpha-grid", type=_int_list, default=None, help="sweep f_alpha targets, e.g. 1,2,3")
    t.add_argument("--order", type=int, default=None, help="spline order (default ceil(alpha)+1)")
    t.add_argument("--width", type=int, default=32)
    t.add_argument("--layers", type=int, default=2)
    t.add_argument("--residual", choices=("on", "off", "both"), default="on")
    t.add_argument("--domain", type=_interval, default=(0.05, 1.0))
    t.add_argument("--n-train", type=int, default=1000)
    t.add_argument("--n-test", type=int, default=100)
    t.add_argument("--noise", type=float, default=0.0)
    t.add_argument("--epochs", type=int, default=2000)
    t.add_argument("--lr", type=float, default=1e-2)
    t.add_argument("--s", type=int, default=2)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--init", choices=("support", "fan_in"), default="support", help="hidden bias initialisation")
    t.add_argument("--grad-clip", type=float, default=1.0, help="gradient norm clip (0 disables)")
    t.add_argument("--lr-schedule", choices=("cosine", "constant"), default="cosine")
    t.add_argument("--mc-samples", type=int, default=100_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default="train_out")
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("bounds", help="print the capacity and sample-complexity calculators")
    b.add_argument("--eps", type=float, default=0.1)
    b.add_argument("--delta", type=float, default=0.05)
    b.add_argument("--L", type=int, default=2)
    b.add_argument("--W", type=int, default=32)
    b.add_argument("--order", type=int, default=3)
    b.add_argument("--alpha", type=float, default=2.0)
    b.add_argument("--d", type=int, default=1)
    b.add_argument("--gamma", type=float, default=0.05)
    b.add_argument("--N", type=float, default=None, help="sample size for the certificate (default N*)")
    b.add_argument("--n", type=float, default=None, help="regularity dimension (default d - 0.5)")
    b.add_argument("--p", type=float, default=2.0)
    b.add_argument("--s", type=float, default=None, help="target smoothness (default alpha* + 1)")
    b.add_argument("--c", type=float, default=1.0)
    b.add_argument("--c1", type=float, default=2.0)
    b.add_argument("--csv", default=None)
    b.set_defaults(func=cmd_bounds)

    r = sub.add_parser("risk-gap", help="empirical vs Monte-Carlo risk gap as a function of N")
    r.add_argument("--target", default="f_alpha3")
    r.add_argument("--model", default=None, help="model file (default: a seeded random network)")
    r.add_argument("--width", type=int, default=8)
    r.add_argument("--domain", type=_interval, default=(0.0, 1.0))
    r.add_argument("--noise", type=float, default=0.1)
    r.add_argument("--noise-law", choices=("gaussian", "uniform"), default="gaussian")
    r.add_argument("--n-grid", type=_int_list, default=[100, 1000, 10000])
    r.add_argument("--reps", type=int, default=200)
    r.add_argument("--mc-samples", type=int, default=1_000_000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_risk_gap)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"reskan {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"reskan {args.command}: {exc} (partial history saved)", file=sys.stderr)
        return EXIT_NUMERIC
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"reskan {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
