"""Monte Carlo harness: empirical bias, variance, MSE, k-NN tail probabilities and
moments, compared against the bounds and summarised by log-log rate fits.

Every trial draws from its own substream, seeded by
``substream_seed(substream_seed(base_seed, trial), n)``, and results are
aggregated in trial order after all workers finish. Output is therefore
byte-identical for any worker count.
"""
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import special as sp

from knnentropy import bounds, special
from knnentropy.distributions import (DistributionSpec, _draw, ball_probability_1d, envelopes,
                                      sample, substream_seed, true_entropy)
from knnentropy.estimators import kl_entropy
from knnentropy.knn import batch_knn_distances, build_index

EXPERIMENTS = ("bias_sweep", "variance_sweep", "mse_sweep", "concentration", "moments",
               "digamma_identity")
SWEEP_FIT = {"bias_sweep": "abs_bias", "variance_sweep": "variance", "mse_sweep": "mse"}
SE_MULTIPLIER = 3.0
HOEFFDING_DELTA = 0.01


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    dist: DistributionSpec
    n_grid: Tuple[int, ...]
    k_rule: object = 1              # positive int, or "optimal"
    trials: int = 100
    base_seed: int = 0
    output_path: Optional[str] = None
    beta: float = 2.0
    C_beta: Optional[float] = None
    C_M: float = 1.0
    fit: Optional[str] = None
    workers: int = 1
    x: Optional[Tuple[float, ...]] = None
    alphas: Tuple[float, ...] = (1.0,)
    k_list: Tuple[int, ...] = (1,)
    r_points: int = 20

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        self.n_grid = tuple(int(n) for n in self.n_grid)
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be non-empty and strictly increasing")
        if self.k_rule != "optimal" and (int(self.k_rule) != self.k_rule or self.k_rule < 1):
            raise ConfigError(f"k must be a positive integer or 'optimal', got {self.k_rule!r}")
        min_trials = 2 if self.experiment in ("variance_sweep", "mse_sweep", "bias_sweep") else 1
        if self.trials < min_trials:
            raise ConfigError(f"{self.experiment} needs at least {min_trials} trials")

    def k_for(self, n):
        if self.k_rule == "optimal":
            return bounds.optimal_k(n, self.beta, self.dist.D)
        return int(self.k_rule)

    def query_point(self):
        if self.x is not None:
            return np.asarray(self.x, dtype=np.float64)
        if self.dist.family == "gaussian":
            return np.zeros(self.dist.D)
        return np.full(self.dist.D, 0.5)


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: List[Tuple[float, float]] = field(default_factory=list)


@dataclass
class Table:
    experiment: str
    columns: List[str]
    rows: List[dict]
    fit: Optional[RateFit] = None
    fit_quantity: Optional[str] = None

    def column(self, name):
        return np.array([row[name] for row in self.rows])


# ---------------------------------------------------------------- config file

_INT_KEYS = {"trials", "base_seed", "seed", "workers", "D", "r_points"}
_FLOAT_KEYS = {"beta", "C_beta", "C_M", "sigma"}


def parse_config(text):
    """Parse ``key = value`` lines (``#`` comments, comma-separated lists)."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        raw[key] = value
    try:
        dist = DistributionSpec(raw.pop("family", raw.pop("dist", "gaussian")),
                                int(raw.pop("D", 1)), float(raw.pop("sigma", 1.0)))
        kwargs = {}
        for key, value in raw.items():
            if key in ("seed", "base_seed"):
                kwargs["base_seed"] = int(value)
            elif key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key == "n_grid":
                kwargs[key] = tuple(int(v) for v in value.split(","))
            elif key in ("k", "k_rule"):
                kwargs["k_rule"] = value if value == "optimal" else int(value)
            elif key in ("x", "alphas"):
                kwargs[key] = tuple(float(v) for v in value.split(","))
            elif key == "k_list":
                kwargs[key] = tuple(int(v) for v in value.split(","))
            elif key in ("experiment", "output_path", "fit"):
                kwargs[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        if "experiment" not in kwargs or "n_grid" not in kwargs:
            raise ConfigError("config needs at least 'experiment' and 'n_grid'")
        return ExperimentConfig(dist=dist, **kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------- execution

def _map(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunk = max(1, math.ceil(len(items) / (4 * workers)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def trial_seed(base_seed, trial, n):
    return substream_seed(substream_seed(base_seed, trial), n)


def _estimate_task(task):
    dist, n, k, seed = task
    return kl_entropy(sample(dist, n, seed), k).value


def _knn_task(task):
    dist, n, k, x, seeds = task
    space = dist.space
    out = np.empty(len(seeds))
    for j, seed in enumerate(seeds):
        pts = _draw(dist, np.random.default_rng(seed), n)
        out[j] = batch_knn_distances(space, pts[None], x, k)[0]
    return out


def _identity_task(task):
    dist, n, k_list, seed = task
    data = sample(dist, n, seed)
    index = build_index(data)
    out = []
    for k in k_list:
        eps = index.loo_knn_distances(k).eps
        out.append(float(np.mean(np.log(ball_probability_1d(dist, data.points[:, 0], eps)))))
    return out


def fit_rate(points):
    """Ordinary least squares of ln(value) on ln(n) for (n, value) pairs."""
    points = [(float(n), float(v)) for n, v in points]
    if len(points) < 2:
        raise ValueError("a rate fit needs at least two points")
    if any(v <= 0 or n <= 0 for n, v in points):
        raise ValueError("rate fits need positive n and values")
    x = np.log([n for n, _ in points])
    y = np.log([v for _, v in points])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return RateFit(slope=float(slope), intercept=float(intercept), r_squared=r2,
                   points=list(zip(x.tolist(), y.tolist())))


def _envelopes_or_none(dist):
    try:
        return envelopes(dist)
    except NotImplementedError:
        return None


def _sweep_bounds(config, env, n, k):
    D = config.dist.D
    c_D = config.dist.space.c_D
    C_beta = config.C_beta
    if C_beta is None and config.dist.family == "uniform_torus":
        # ball averages of a constant density are exact
        C_beta = 0.0
    bias_b = math.nan
    if env is not None and C_beta is not None:
        Gamma_B = env.Gamma_B(config.beta)
        bias_b = 0.0 if C_beta == 0.0 else bounds.bias_bound(k, n, D, config.beta, C_beta, Gamma_B, c_D)
    var_b = math.nan
    if env is not None and D in bounds.KISSING_NUMBERS:
        m4 = bounds.default_m4(k, D, env.Gamma_0, config.C_M)
        var_b = bounds.variance_bound(k, n, k * bounds.kissing_number(D), m4).raw
    return bias_b, var_b, bounds.mse_bound(bias_b, var_b)


SWEEP_COLUMNS = ["n", "k", "trials", "mean_estimate", "true_entropy", "bias", "abs_bias",
                 "bias_se", "variance", "mse", "bias_bound", "variance_bound", "mse_bound"]


def run_sweep(config, workers=None):
    """Bias / variance / MSE of the estimator along ``config.n_grid``."""
    if config.experiment not in SWEEP_FIT:
        raise ConfigError(f"run_sweep handles {tuple(SWEEP_FIT)}, not {config.experiment!r}")
    workers = config.workers if workers is None else workers
    truth = true_entropy(config.dist)
    env = _envelopes_or_none(config.dist)
    tasks = [(config.dist, n, config.k_for(n), trial_seed(config.base_seed, t, n))
             for n in config.n_grid for t in range(config.trials)]
    values = np.array(_map(_estimate_task, tasks, workers)).reshape(len(config.n_grid), config.trials)
    rows = []
    for n, est in zip(config.n_grid, values):
        k = config.k_for(n)
        mean = float(np.mean(est))
        bias_b, var_b, mse_b = _sweep_bounds(config, env, n, k)
        rows.append(dict(
            n=n, k=k, trials=config.trials, mean_estimate=mean, true_entropy=truth,
            bias=mean - truth, abs_bias=abs(mean - truth),
            bias_se=float(np.std(est, ddof=1) / math.sqrt(len(est))),
            variance=float(np.var(est, ddof=1)), mse=float(np.mean((est - truth) ** 2)),
            bias_bound=bias_b, variance_bound=var_b, mse_bound=mse_b))
    quantity = config.fit or SWEEP_FIT[config.experiment]
    fit = None
    if len(rows) >= 2 and all(row[quantity] > 0 for row in rows):
        fit = fit_rate([(row["n"], row[quantity]) for row in rows])
    return Table(config.experiment, SWEEP_COLUMNS, rows, fit, quantity)


def knn_distance_trials(config, n, k, x, workers=None):
    """eps_k(x) for each of ``config.trials`` independent samples of size n."""
    workers = config.workers if workers is None else workers
    seeds = [trial_seed(config.base_seed, t, n) for t in range(config.trials)]
    n_blocks = max(1, min(len(seeds), 64 * max(1, workers)))
    edges = np.linspace(0, len(seeds), n_blocks + 1).astype(int)
    tasks = [(config.dist, n, k, x, seeds[a:b]) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    return np.concatenate(_map(_knn_task, tasks, workers))


def _exact_tail(dist, n, k, r):
    """P[eps_k(x) > r] on the torus, where P(B(x, r)) = c_D r^D for r <= 1/2."""
    if dist.family != "uniform_torus":
        return math.nan
    if r > 0.5:
        return 0.0 if dist.D == 1 else math.nan
    p = dist.space.c_D * r ** dist.D
    if p >= 1.0:
        return 0.0
    return float(sp.bdtr(k - 1, n, p))


CONCENTRATION_COLUMNS = ["tail", "r", "empirical", "hoeffding_margin", "exact", "raw_bound",
                         "clamped_bound", "validity_flag", "dominated"]


def run_concentration(config, x=None, r_grid=None, workers=None, delta=HOEFFDING_DELTA):
    """Empirical upper and lower tail probabilities of eps_k(x) against the concentration bounds.

    Without an explicit ``r_grid`` each tail gets ``config.r_points`` radii
    spanning its validity window.
    """
    dist = config.dist
    n = config.n_grid[0]
    k = config.k_for(n)
    x = config.query_point() if x is None else np.asarray(x, dtype=np.float64)
    env = envelopes(dist)
    g_low, g_high, rho = env.gamma_star_fn(x), env.gamma_sup_fn(x), env.rho
    eps = knn_distance_trials(config, n, k, x, workers)
    margin = math.sqrt(math.log(2.0 / delta) / (2.0 * len(eps)))
    if r_grid is None:
        lo_up = bounds.upper_tail_threshold(k, n, dist.D, g_low)
        hi_low = bounds.lower_tail_threshold(k, n, dist.D, g_high, rho)
        grids = [("upper", np.linspace(lo_up, rho, config.r_points)),
                 ("lower", np.linspace(0.0, hi_low, config.r_points))]
    else:
        grids = [("upper", np.asarray(r_grid, float)), ("lower", np.asarray(r_grid, float))]
    rows = []
    for tail, grid in grids:
        for r in grid:
            r = float(r)
            if tail == "upper":
                emp = float(np.mean(eps > r))
                rep = bounds.concentration_upper(r, k, n, dist.D, g_low, rho)
                exact = _exact_tail(dist, n, k, r)
            else:
                emp = float(np.mean(eps <= r))
                rep = bounds.concentration_lower(r, k, n, dist.D, g_low, g_high, rho)
                exact = 1.0 - _exact_tail(dist, n, k, r)
            rows.append(dict(tail=tail, r=r, empirical=emp, hoeffding_margin=margin, exact=exact,
                             raw_bound=rep.raw, clamped_bound=rep.clamped,
                             validity_flag=int(rep.valid),
                             dominated=int(emp - margin <= rep.clamped)))
    return Table("concentration", CONCENTRATION_COLUMNS, rows)


def _exact_moment(dist, n, k, alpha):
    # on the 1-d torus 2 eps_k is the k-th order statistic of n uniforms
    if dist.family != "uniform_torus" or dist.D != 1:
        return math.nan
    if alpha <= -k:
        return math.inf
    return float(2.0 ** -alpha * np.exp(sp.betaln(k + alpha, n - k + 1) - sp.betaln(k, n - k + 1)))


MOMENT_COLUMNS = ["statistic", "alpha", "empirical", "stderr", "exact", "closed_form_bound",
                  "power_bound"]


def run_moments(config, alphas=None, x=None, workers=None):
    """Empirical moments and log-moments of eps_k(x) against their bounds."""
    dist = config.dist
    n = config.n_grid[0]
    k = config.k_for(n)
    alphas = config.alphas if alphas is None else tuple(alphas)
    x = config.query_point() if x is None else np.asarray(x, dtype=np.float64)
    env = envelopes(dist)
    g_low, g_high = env.gamma_star_fn(x), env.gamma_sup_fn(x)
    C_T = env.C_T
    floor = -dist.D * k * g_low / g_high
    for alpha in alphas:
        if alpha < floor:
            raise ValueError(f"alpha={alpha} is below the admissible floor {floor}")
    eps = knn_distance_trials(config, n, k, x, workers)
    root = math.sqrt(len(eps))
    rows = []
    for alpha in alphas:
        vals = np.ones_like(eps) if alpha == 0 else eps ** alpha
        if alpha > 0:
            closed = bounds.pos_moment_closed(alpha, k, n, dist.D, g_low, C_T)
        elif alpha < 0:
            closed = bounds.neg_moment_closed(alpha, k, n, dist.D, g_low, g_high, C_T)
        else:
            closed = 1.0
        rows.append(dict(statistic="moment", alpha=float(alpha), empirical=float(np.mean(vals)),
                         stderr=float(np.std(vals, ddof=1) / root) if len(vals) > 1 else math.nan,
                         exact=_exact_moment(dist, n, k, alpha), closed_form_bound=closed,
                         power_bound=bounds.moment_bound(alpha, k, n, dist.D, g_low, g_high)))
    logs = np.log(eps)
    for name, vals, bound in (
            ("log_pos", np.maximum(logs, 0.0), bounds.log_upper_closed(k, n, dist.D, g_low, C_T)),
            ("log_neg", np.maximum(-logs, 0.0),
             bounds.log_lower_closed(k, n, dist.D, g_low, g_high, C_T))):
        rows.append(dict(statistic=name, alpha=math.nan, empirical=float(np.mean(vals)),
                         stderr=float(np.std(vals, ddof=1) / root) if len(vals) > 1 else math.nan,
                         exact=math.nan, closed_form_bound=bound, power_bound=math.nan))
    return Table("moments", MOMENT_COLUMNS, rows)


IDENTITY_COLUMNS = ["n", "k", "trials", "mean_log_ball_probability", "stderr", "target",
                    "z_score", "within_3se"]


def run_identity(config, workers=None):
    """Check E[ln P(B(X_i, eps_k(X_i)))] = psi(k) - psi(n) for a 1-d family."""
    if config.dist.D != 1:
        raise ConfigError("the digamma identity check needs a one-dimensional family")
    workers = config.workers if workers is None else workers
    rows = []
    for n in config.n_grid:
        tasks = [(config.dist, n, config.k_list, trial_seed(config.base_seed, t, n))
                 for t in range(config.trials)]
        per_trial = np.array(_map(_identity_task, tasks, workers))
        for j, k in enumerate(config.k_list):
            vals = per_trial[:, j]
            mean = float(np.mean(vals))
            se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
            target = special.digamma(k) - special.digamma(n)
            z = (mean - target) / se if se > 0 else math.inf
            rows.append(dict(n=n, k=k, trials=config.trials, mean_log_ball_probability=mean,
                             stderr=se, target=target, z_score=z,
                             within_3se=int(abs(mean - target) <= SE_MULTIPLIER * se)))
    return Table("digamma_identity", IDENTITY_COLUMNS, rows)


def run(config, workers=None):
    """Dispatch on ``config.experiment``."""
    if config.experiment in SWEEP_FIT:
        return run_sweep(config, workers)
    if config.experiment == "concentration":
        return run_concentration(config, workers=workers)
    if config.experiment == "moments":
        return run_moments(config, workers=workers)
    return run_identity(config, workers)


# ---------------------------------------------------------------- CSV output

def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def table_to_csv(table):
    """Render a table: ``#schema:`` line, header row, data rows, optional ``#fit:`` line."""
    buf = io.StringIO()
    buf.write(f"#schema: {table.experiment}; columns={','.join(table.columns)}\n")
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        buf.write(",".join(_fmt(row[c]) for c in table.columns) + "\n")
    if table.fit is not None:
        f = table.fit
        buf.write(f"#fit: quantity={table.fit_quantity}; slope={_fmt(f.slope)}; "
                  f"intercept={_fmt(f.intercept)}; r_squared={_fmt(f.r_squared)}\n")
    return buf.getvalue()


def write_table(table, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table_to_csv(table))
