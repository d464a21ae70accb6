"""Command-line entry point: `wassdp <command> ...`.

Exit status is 0 on success, 2 for invalid arguments or inputs that fail
validation, and 3 when a file cannot be read or parsed.
"""

import argparse
import math
import os
import sys

import numpy as np

from wassdp import io
from wassdp.core_dist import Dataset, GridDomain, empirical_distribution
from wassdp.dp_primitives import PrivacyLedger, make_rng, resolve_seed
from wassdp.errors import InputFormatError, WassDPError

DEFAULTS = {
    "beta": 0.05,
    "c2": 1.0,
    "c3": 1.0,
    "C": 1.0,
    "cdf_error_constant": 1.0,
    "delta": 0.0,
    "jobs": 1,
    "trials": 20,
}


def setting(args, name, cast=float):
    """Flag value, else $WASSDP_<NAME>, else the built-in default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    env = os.environ.get("WASSDP_" + name.upper())
    if env not in (None, ""):
        try:
            return cast(env)
        except ValueError:
            raise WassDPError(f"WASSDP_{name.upper()}={env!r} is not a valid value") from None
    return DEFAULTS[name]


def parse_eps(text):
    if text.strip().lower() in ("inf", "infinity", "+inf"):
        return math.inf
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("epsilon must be positive")
    return value


def parse_grid(text):
    try:
        d, alpha = text.split(",")
        return int(d), float(alpha)
    except ValueError:
        raise argparse.ArgumentTypeError("--grid expects 'd,alpha', e.g. 2,0.0625") from None


def emit(args, obj, rows=None, header=None):
    """Write a JSON object, or rows as CSV when --format csv is selected."""
    if args.format == "csv" and rows is not None:
        lines = [header] if header else []
        lines += [",".join(_csv_cell(v) for v in row) for row in rows]
        text = "\n".join(lines) + "\n"
        if args.out in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(args.out, "w") as fh:
                fh.write(text)
        return
    io.write_json(io.jsonable(obj), args.out)


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _grid_from_args(args):
    return GridDomain(args.a, args.b, args.gamma)


def _load_dist(path, args):
    metric = io.load_metric(args.metric) if getattr(args, "metric", None) else None
    return io.load_distribution(path, metric)


def _dist_rows(P):
    domain = P.domain
    if isinstance(domain, GridDomain):
        return [(float(x), float(w)) for x, w in zip(domain.points, P.weights)], "x,weight"
    labels = getattr(domain, "labels", None) or range(domain.size)
    return [(lab, float(w)) for lab, w in zip(labels, P.weights)], "point,weight"


def _write_ledger(ledger, path):
    if path:
        io.write_json(ledger.to_json(), path)


def cmd_estimate_1d(args):
    from wassdp.onedim_estimator import estimate_1d

    domain = _grid_from_args(args)
    data = Dataset.from_values(io.read_samples(args.input), domain, snap=args.snap)
    ledger = PrivacyLedger()
    P = estimate_1d(
        data,
        args.eps,
        domain,
        setting(args, "beta"),
        make_rng(args.seed),
        k_override=args.k,
        ledger=ledger,
        c3=setting(args, "c3"),
        c2=setting(args, "c2"),
    )
    _write_ledger(ledger, args.ledger)
    rows, header = _dist_rows(P)
    emit(args, io.distribution_to_json(P), rows, header)


def _tree_setup(args, rng):
    from wassdp.hst import build_frt_embedding, embed_grid

    if args.metric and args.grid:
        raise WassDPError("give either --metric or --grid, not both")
    if args.metric:
        metric = io.load_metric(args.metric)
        return build_frt_embedding(metric, rng), metric, None
    if args.grid:
        d, alpha = args.grid
        emb = embed_grid(d, alpha, rng)
        return emb.hst, emb.cells, emb
    raise WassDPError("estimate-tree needs --metric or --grid")


def cmd_estimate_tree(args):
    from wassdp.tree_estimator import priv_density_est_tree

    rng = make_rng(args.seed)
    hst, domain, emb = _tree_setup(args, rng)
    if emb is None:
        data = Dataset.from_values(io.read_labels(args.input), domain)
    else:
        data = Dataset(domain, emb.map_points(io.read_samples(args.input, columns=emb.cells.dim)))
    P, ledger = priv_density_est_tree(
        data, hst, args.eps, setting(args, "beta"), rng, delta=setting(args, "delta")
    )
    _write_ledger(ledger, args.ledger)
    if args.hst_out:
        io.write_json(hst.to_json(), args.hst_out)
    rows, header = _dist_rows(P)
    emit(args, io.distribution_to_json(P), rows, header)


def cmd_rate_1d(args):
    from wassdp.onedim_estimator import cdf_error_bound, target_rate_1d

    P = io.load_distribution(args.input)
    terms = target_rate_1d(
        P,
        args.n,
        args.eps,
        C=setting(args, "C"),
        trials=setting(args, "trials", int),
        rng=make_rng(args.seed),
    )
    report = {"command": "rate-1d", "seed": resolve_seed(args.seed), **terms}
    if isinstance(P.domain, GridDomain):
        report["quantile_error_bound"] = cdf_error_bound(
            args.n, args.eps, P.domain, setting(args, "beta"), setting(args, "cdf_error_constant")
        )
    rows = [(k, v) for k, v in terms.items()]
    emit(args, report, rows, "term,value")


def cmd_rate_tree(args):
    from wassdp.hst import build_frt_embedding
    from wassdp.tree_estimator import target_rate_tree

    metric = io.load_metric(args.metric)
    P = io.load_distribution(args.input, metric)
    if args.hst:
        hst = io.hst_from_json(io.read_json(args.hst), domain=metric)
    else:
        hst = build_frt_embedding(metric, make_rng(args.seed))
    rate = target_rate_tree(P, hst, args.n, args.eps, setting(args, "delta"))
    report = {"command": "rate-tree", "seed": resolve_seed(args.seed), **rate}
    keys = ["level", "r", "statistical_term", "inactive_term", "active_term", "total"]
    rows = [[lv[k] for k in keys] for lv in rate["levels"]]
    emit(args, report, rows, ",".join(keys))


def cmd_w1(args):
    from wassdp.wasserstein import w1_cdf, w1_exact

    P = _load_dist(args.first, args)
    Q = _load_dist(args.second, args)
    if isinstance(P.domain, GridDomain):
        value, evaluator = w1_cdf(P, Q), "cdf"
    else:
        value, evaluator = w1_exact(P, Q), "exact"
    report = {"command": "w1", "value": value, "evaluator": evaluator}
    emit(args, report, [(value, evaluator)], "value,evaluator")


def cmd_embed(args):
    from wassdp.hst import build_frt_embedding, embed_grid

    rng = make_rng(args.seed)
    if args.metric:
        hst = build_frt_embedding(io.load_metric(args.metric), rng)
    elif args.grid:
        hst = embed_grid(args.grid[0], args.grid[1], rng).hst
    else:
        raise WassDPError("embed needs --metric or --grid")
    obj = hst.to_json()
    rows = [(v, int(hst.parent[v]), int(hst.level[v])) for v in range(hst.n_nodes)]
    emit(args, obj, rows, "node,parent,level")


def cmd_neighbor(args):
    from wassdp.adversarial import hard_empirical_neighbor_1d, hard_privacy_neighbor_1d

    P = io.load_distribution(args.input)
    if args.kind == "priv":
        if args.k is None:
            raise WassDPError("--kind priv needs --k")
        result = hard_privacy_neighbor_1d(P, args.k)
    else:
        if args.n is None:
            raise WassDPError("--kind emp needs --n")
        result = hard_empirical_neighbor_1d(P, args.n)
    if result.degenerate:
        print("warning: degenerate quantiles, returning the input", file=sys.stderr)
    rows, header = _dist_rows(result.distribution)
    emit(args, io.distribution_to_json(result.distribution), rows, header)


def cmd_regret(args):
    from wassdp.adversarial import regret_report
    from wassdp.hst import build_frt_embedding

    metric = io.load_metric(args.metric) if args.metric else None
    P = io.load_distribution(args.input, metric)
    rng = make_rng(args.seed)
    hst = None
    if args.estimator == "tree":
        if metric is None:
            raise WassDPError("--estimator tree needs --metric")
        hst = build_frt_embedding(metric, rng)
    report = regret_report(
        P,
        args.estimator,
        args.n,
        args.eps,
        setting(args, "trials", int),
        rng,
        beta=setting(args, "beta"),
        k_override=args.k,
        K=args.K,
        hst=hst,
        C=setting(args, "C"),
        delta=setting(args, "delta"),
        jobs=setting(args, "jobs", int),
    )
    report = {"command": "regret", "seed": resolve_seed(args.seed), **report}
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("trial,error\n")
            for t, e in enumerate(report["errors"]):
                fh.write(f"{t},{e!r}\n")
    rows = [(t, e) for t, e in enumerate(report["errors"])]
    emit(args, report, rows, "trial,error")


def cmd_experiment_bimodal(args):
    from wassdp.experiment import run_bimodal, write_curves_csv, write_svg

    seed = resolve_seed(args.seed)
    report, curves = run_bimodal(
        seed,
        n=args.n,
        K=args.K,
        eps=args.eps,
        k=args.k,
        trials=setting(args, "trials", int) if args.trials is not None else 50,
        beta=setting(args, "beta"),
        jobs=setting(args, "jobs", int),
    )
    if args.csv:
        write_curves_csv(curves, args.csv)
    if args.svg:
        write_svg(curves, args.svg)
    rows = [(t, a, b) for t, (a, b) in enumerate(zip(report["psmm_errors"], report["private_errors"]))]
    emit(args, report, rows, "trial,psmm_error,private_error")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wassdp", description="Private density estimation in Wasserstein distance."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (env WASSDP_SEED)")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--beta", type=float, default=None)

    p = sub.add_parser("estimate-1d", parents=[common], help="quantile-based private estimate")
    p.add_argument("--input", required=True, help="CSV of samples, one per line")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eps", type=parse_eps, required=True)
    p.add_argument("--k", type=int, default=None, help="number of quantiles (default: formula)")
    p.add_argument("--c2", type=float, default=None)
    p.add_argument("--c3", type=float, default=None)
    p.add_argument("--snap", action="store_true", help="round samples to the nearest grid point")
    p.add_argument("--ledger", default=None, help="write the privacy ledger here")
    p.set_defaults(func=cmd_estimate_1d)

    p = sub.add_parser("estimate-tree", parents=[common], help="HST-based private estimate")
    p.add_argument("--input", required=True)
    p.add_argument("--metric", default=None, help="metric JSON; samples are point labels")
    p.add_argument("--grid", type=parse_grid, default=None, help="'d,alpha' for [0,1]^d data")
    p.add_argument("--eps", type=parse_eps, required=True)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--ledger", default=None)
    p.add_argument("--hst-out", default=None, help="also write the tree used")
    p.set_defaults(func=cmd_estimate_tree)

    p = sub.add_parser("rate-1d", parents=[common], help="1-D target-rate terms")
    p.add_argument("--input", required=True, help="distribution JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=parse_eps, required=True)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--cdf-error-constant", dest="cdf_error_constant", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(func=cmd_rate_1d)

    p = sub.add_parser("rate-tree", parents=[common], help="per-level tree target rate")
    p.add_argument("--input", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--hst", default=None, help="HST JSON (default: fresh FRT embedding)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=parse_eps, required=True)
    p.add_argument("--delta", type=float, default=None)
    p.set_defaults(func=cmd_rate_tree)

    p = sub.add_parser("w1", parents=[common], help="1-Wasserstein distance between two files")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--metric", default=None)
    p.set_defaults(func=cmd_w1)

    p = sub.add_parser("embed", parents=[common], help="build an HST")
    p.add_argument("--metric", default=None)
    p.add_argument("--grid", type=parse_grid, default=None)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("neighbor", parents=[common], help="hard neighbouring distribution")
    p.add_argument("--kind", choices=("priv", "emp"), required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.set_defaults(func=cmd_neighbor)

    p = sub.add_parser("regret", parents=[common], help="measured error against the target rate")
    p.add_argument("--estimator", choices=("1d", "tree", "psmm"), required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--metric", default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=parse_eps, required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--K", type=int, default=40)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--csv", default=None, help="plot-ready per-trial errors")
    p.set_defaults(func=cmd_regret)

    p = sub.add_parser("experiment-bimodal", parents=[common], help="two-atom experiment")
    p.add_argument("--n", type=int, default=1600)
    p.add_argument("--K", type=int, default=40)
    p.add_argument("--eps", type=parse_eps, default=1.0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--csv", default=None, help="CDF curves of the first trial")
    p.add_argument("--svg", default=None, help="static plot of the same curves")
    p.set_defaults(func=cmd_experiment_bimodal)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InputFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (WassDPError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
