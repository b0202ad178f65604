"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 numeric or validity failure.
"""
import argparse
import io
import math
import sys

from knnentropy import bounds, experiments
from knnentropy.distributions import (FAMILIES, DistributionSpec, read_dataset_csv, sample,
                                      sample_gaussian_pair, substream_seed)
from knnentropy.estimators import kl_entropy, mutual_information
from knnentropy.knn import KnnError
from knnentropy.spaces import KINDS, MetricSpaceSpec
from knnentropy.special import DomainError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    return tuple(int(v) for v in text.split(","))


def _float_list(text):
    return tuple(float(v) for v in text.split(","))


def _k_rule(text):
    return text if text == "optimal" else int(text)


def _common(parser):
    parser.add_argument("--seed", type=int, default=0, help="base seed (64-bit)")
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", help="output path (default: stdout)")


def _dist_args(parser, default="gaussian"):
    parser.add_argument("--dist", choices=FAMILIES, default=default)
    parser.add_argument("--D", type=int, default=1)
    parser.add_argument("--sigma", type=float, default=1.0)


def build_parser():
    parser = _Parser(prog="knnentropy", description="k-NN entropy estimation and bound checks")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="KL entropy estimate of a CSV dataset or a sampled family")
    _common(p)
    _dist_args(p)
    p.add_argument("--input", help="CSV file, one point per row")
    p.add_argument("--space", choices=KINDS, default="euclidean")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--mode", choices=("strict", "lenient"), default="strict")
    p.add_argument("--unit", choices=("nats", "bits"), default="nats")

    p = sub.add_parser("mi", help="mutual information via entropy decomposition")
    _common(p)
    p.add_argument("--x", help="CSV file of X samples")
    p.add_argument("--y", help="CSV file of Y samples")
    p.add_argument("--space", choices=KINDS, default="euclidean")
    p.add_argument("--rho", type=float, help="sample a bivariate Gaussian with this correlation")
    p.add_argument("--independent", choices=FAMILIES,
                   help="sample X and Y independently from this 1-d family")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--mode", choices=("strict", "lenient"), default="strict")
    p.add_argument("--unit", choices=("nats", "bits"), default="nats")

    p = sub.add_parser("sweep", help="bias / variance / MSE sweep over n")
    _common(p)
    _dist_args(p)
    p.add_argument("--config", help="key = value config file (overrides the flags below)")
    p.add_argument("--experiment", choices=tuple(experiments.SWEEP_FIT), default="bias_sweep")
    p.add_argument("--n-grid", type=_int_list, default=(250, 500, 1000, 2000))
    p.add_argument("--k", type=_k_rule, default=1, help="integer, or 'optimal'")
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--C-beta", type=float)
    p.add_argument("--fit", choices=("abs_bias", "variance", "mse"))

    p = sub.add_parser("concentration", help="empirical k-NN tail probabilities vs bounds")
    _common(p)
    _dist_args(p, "uniform_torus")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--x", type=_float_list)
    p.add_argument("--r-points", type=int, default=20)
    p.add_argument("--delta", type=float, default=experiments.HOEFFDING_DELTA)

    p = sub.add_parser("moments", help="empirical k-NN distance moments vs bounds")
    _common(p)
    _dist_args(p, "uniform_torus")
    p.add_argument("--n", type=int, default=99)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--x", type=_float_list)
    p.add_argument("--alpha", type=_float_list, default=(1.0, -0.5))

    p = sub.add_parser("bounds", help="evaluate a bound formula, optionally along a grid")
    _common(p)
    p.add_argument("--kind", choices=bounds.BOUND_KINDS, required=True)
    for name, typ in (("k", int), ("n", int), ("D", int), ("gamma-star", float),
                      ("gamma-sup", float), ("C-T", float), ("beta", float), ("C-beta", float),
                      ("L", float), ("N-k", int), ("lambda", float), ("C-M", float),
                      ("Gamma-B", float), ("c-D", float), ("rho", float), ("alpha", float),
                      ("r", float), ("M-4", float)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--sweep-param", help="BoundParams field to vary (e.g. r, n, k)")
    p.add_argument("--grid", type=_float_list)

    p = sub.add_parser("identity", help="check E[ln P(B(X_i, eps_k))] = psi(k) - psi(n)")
    _common(p)
    _dist_args(p, "uniform_torus")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=_int_list, default=(1, 2, 5))
    return parser


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _convert(value, unit):
    return value / math.log(2.0) if unit == "bits" else value


def _read(path, kind):
    try:
        return read_dataset_csv(path, MetricSpaceSpec(kind, _csv_dim(path)))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _cmd_estimate(args):
    if args.input:
        data = _read(args.input, args.space)
    else:
        data = sample(DistributionSpec(args.dist, args.D, args.sigma), args.n, args.seed)
    est = kl_entropy(data, args.k, args.mode)
    text = (f"value,unit,n,k,dropped_points\n"
            f"{_convert(est.value, args.unit):.17g},{args.unit},{est.n},{est.k},{est.dropped_points}\n")
    _emit(text, args.out)
    return EXIT_OK


def _csv_dim(path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip() and not line.lstrip().startswith("#"):
                return len(line.split(","))
    raise UsageError(f"{path}: empty file")


def _cmd_mi(args):
    if args.x and args.y:
        x = _read(args.x, args.space)
        y = _read(args.y, args.space)
    elif args.rho is not None:
        x, y = sample_gaussian_pair(args.n, args.rho, args.seed)
    elif args.independent:
        dist = DistributionSpec(args.independent, 1)
        x = sample(dist, args.n, substream_seed(args.seed, 0))
        y = sample(dist, args.n, substream_seed(args.seed, 1))
    else:
        raise UsageError("mi needs --x and --y, --rho, or --independent")
    est = mutual_information(x, y, args.k, args.mode)
    if est.degenerate:
        print("warning: joint sample lies on a linear subspace; true mutual information is "
              "infinite and the estimate is not meaningful", file=sys.stderr)
    text = (f"value,unit,n,k,degenerate\n"
            f"{_convert(est.value, args.unit):.17g},{args.unit},{est.n},{est.k},{int(est.degenerate)}\n")
    _emit(text, args.out)
    return EXIT_OK


def _config_from_args(args, experiment, n_grid, k_rule, **extra):
    return experiments.ExperimentConfig(
        experiment=experiment, dist=DistributionSpec(args.dist, args.D, args.sigma),
        n_grid=n_grid, k_rule=k_rule, trials=args.trials, base_seed=args.seed,
        output_path=args.out, workers=args.workers, **extra)


def _cmd_sweep(args):
    if args.config:
        config = experiments.load_config(args.config)
        if args.out:
            config.output_path = args.out
        if args.workers != 1:
            config.workers = args.workers
    else:
        config = _config_from_args(args, args.experiment, args.n_grid, args.k, beta=args.beta,
                                   C_beta=args.C_beta, fit=args.fit)
    table = experiments.run(config)
    _emit(experiments.table_to_csv(table), config.output_path)
    return EXIT_OK


def _cmd_concentration(args):
    config = _config_from_args(args, "concentration", (args.n,), args.k, x=args.x,
                               r_points=args.r_points)
    table = experiments.run_concentration(config, delta=args.delta)
    _emit(experiments.table_to_csv(table), args.out)
    failed = [r for r in table.rows if r["validity_flag"] and not r["dominated"]]
    return EXIT_NUMERIC if failed else EXIT_OK


def _cmd_moments(args):
    config = _config_from_args(args, "moments", (args.n,), args.k, x=args.x, alphas=args.alpha)
    table = experiments.run_moments(config)
    _emit(experiments.table_to_csv(table), args.out)
    return EXIT_OK


_BOUND_FLAGS = {"gamma_star": "gamma_star", "gamma_sup": "gamma_sup", "C_T": "C_T",
                "C_beta": "C_beta", "N_k": "N_k", "lambda": "lam", "C_M": "C_M",
                "Gamma_B": "Gamma_B", "c_D": "c_D", "M_4": "M_4"}


def _cmd_bounds(args):
    given = {}
    for key, value in vars(args).items():
        field_name = _BOUND_FLAGS.get(key, key)
        if value is not None and field_name in bounds.BoundParams.__dataclass_fields__:
            given[field_name] = value
    params = bounds.BoundParams(**given)
    if args.sweep_param:
        if args.grid is None:
            raise UsageError("--sweep-param needs --grid")
        if args.sweep_param not in bounds.BoundParams.__dataclass_fields__:
            raise UsageError(f"unknown parameter {args.sweep_param!r}")
        typ = type(getattr(params, args.sweep_param))
        rows = bounds.bound_curve(args.kind, args.sweep_param, [typ(v) for v in args.grid], params)
    else:
        rows = [(getattr(params, "r"), bounds.evaluate(args.kind, params))]
    buf = io.StringIO()
    bounds.write_bound_csv(rows, buf, args.sweep_param or "r")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK if all(rep.valid for _, rep in rows) else EXIT_NUMERIC


def _cmd_identity(args):
    config = _config_from_args(args, "digamma_identity", (args.n,), 1, k_list=args.k)
    table = experiments.run_identity(config)
    _emit(experiments.table_to_csv(table), args.out)
    return EXIT_OK if all(r["within_3se"] for r in table.rows) else EXIT_NUMERIC


_COMMANDS = {"estimate": _cmd_estimate, "mi": _cmd_mi, "sweep": _cmd_sweep,
             "concentration": _cmd_concentration, "moments": _cmd_moments,
             "bounds": _cmd_bounds, "identity": _cmd_identity}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, experiments.ConfigError, OSError) as exc:
        print(f"knnentropy: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KnnError, DomainError, ArithmeticError, ValueError) as exc:
        print(f"knnentropy: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
