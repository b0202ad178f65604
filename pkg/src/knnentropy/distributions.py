"""Seeded samplers with closed-form entropies and full-dimension envelopes.

Families:

``uniform_cube``   uniform on [0, 1]^D, Euclidean metric.
``uniform_torus``  uniform on the flat torus [0, 1)^D.
``gaussian``       isotropic N(0, sigma^2 I_D), Euclidean metric.
``sine_bump``      product density prod_j (pi/2) sin(pi x_j) on (0, 1)^D; vanishes
                   on the boundary of the cube.

Random streams: a sample is drawn from ``numpy.random.default_rng(seed)``.
Independent substreams for trial ``i`` of a run seeded with ``base`` use
``substream_seed(base, i)``, a SplitMix64 finalizer of ``base + (i + 1) * golden``
(golden = 0x9E3779B97F4A7C15, arithmetic mod 2^64).
"""
import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special

from knnentropy.knn import Dataset
from knnentropy.spaces import euclidean, flat_torus, unit_ball_volume

FAMILIES = ("uniform_cube", "uniform_torus", "gaussian", "sine_bump")

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z):
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def substream_seed(base_seed, index):
    """64-bit seed for substream ``index`` of a run seeded with ``base_seed``."""
    return splitmix64((int(base_seed) + (int(index) + 1) * _GOLDEN) & _MASK64)


@dataclass(frozen=True)
class DistributionSpec:
    family: str
    D: int = 1
    sigma: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if int(self.D) != self.D or self.D < 1:
            raise ValueError(f"D must be a positive integer, got {self.D!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")

    @property
    def space(self):
        if self.family == "uniform_torus":
            return flat_torus(self.D)
        return euclidean(self.D)


@dataclass(frozen=True)
class SmoothnessSpec:
    beta: float
    C_beta: float = 1.0
    L: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class EnvelopeData:
    """Pointwise envelopes gamma_*(x) r^D <= P(B(x, r)) <= gamma^*(x) r^D for r <= rho,
    with the expectations of envelope functionals used by the bias and variance bounds.

    Infinite values are genuine divergences, not placeholders.
    """
    gamma_star_fn: Callable
    gamma_sup_fn: Callable
    rho: float
    Gamma_0: float
    Gamma: float
    Gamma_B: Callable
    Gamma_star_lambda: Callable
    Gamma_sup_lambda: Callable
    C_T: float = math.inf
    tail_condition_holds: bool = True
    Gamma_0_truncated: Optional[Callable] = None
    notes: str = field(default="", compare=False)


def sample(dist, n, seed):
    """Draw ``n`` IID points from ``dist``; deterministic given (dist, n, seed)."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    rng = np.random.default_rng(int(seed) & _MASK64)
    return Dataset(dist.space, _draw(dist, rng, int(n)))


def _draw(dist, rng, n):
    shape = (n, dist.D)
    if dist.family in ("uniform_cube", "uniform_torus"):
        return rng.random(shape)
    if dist.family == "gaussian":
        return rng.normal(0.0, dist.sigma, shape)
    # inverse CDF of (pi/2) sin(pi x): F(x) = (1 - cos(pi x)) / 2
    u = rng.random(shape)
    return np.arccos(1.0 - 2.0 * u) / math.pi


def sample_array(dist, n, seed):
    """Like :func:`sample` but returns the raw (n, D) array."""
    return sample(dist, n, seed).points


def sample_gaussian_pair(n, rho, seed, sigma=1.0):
    """Bivariate Gaussian with correlation ``rho`` split into two 1-d datasets.

    True mutual information is -0.5 ln(1 - rho^2).
    """
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie in (-1, 1)")
    rng = np.random.default_rng(int(seed) & _MASK64)
    z = rng.normal(0.0, sigma, (n, 2))
    x = z[:, :1]
    y = rho * z[:, :1] + math.sqrt(1.0 - rho * rho) * z[:, 1:]
    return Dataset(euclidean(1), x), Dataset(euclidean(1), y)


def true_entropy(dist):
    """Differential entropy H(p) in nats."""
    if dist.family in ("uniform_cube", "uniform_torus"):
        return 0.0
    if dist.family == "gaussian":
        return 0.5 * dist.D * math.log(2.0 * math.pi * math.e * dist.sigma ** 2)
    return dist.D * (1.0 - math.log(math.pi))


def density(dist, x):
    """Density of ``dist`` at ``x`` (a point or an (m, D) array)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim <= 1
    x = np.reshape(x, (-1, dist.D))
    if dist.family == "uniform_torus":
        out = np.ones(len(x))
    elif dist.family == "uniform_cube":
        out = np.all((x >= 0.0) & (x <= 1.0), axis=1).astype(np.float64)
    elif dist.family == "gaussian":
        s2 = dist.sigma ** 2
        out = np.exp(-0.5 * np.sum(x * x, axis=1) / s2) / (2.0 * math.pi * s2) ** (dist.D / 2.0)
    else:
        inside = np.all((x > 0.0) & (x < 1.0), axis=1)
        out = np.where(inside, np.prod(0.5 * math.pi * np.sin(math.pi * np.clip(x, 0, 1)), axis=1), 0.0)
    return float(out[0]) if single else out


def cdf_1d(dist, t):
    """CDF of a one-dimensional Euclidean family (used for exact interval probabilities)."""
    if dist.D != 1 or dist.family == "uniform_torus":
        raise ValueError("cdf_1d applies to one-dimensional Euclidean families")
    t = np.asarray(t, dtype=np.float64)
    if dist.family == "uniform_cube":
        return np.clip(t, 0.0, 1.0)
    if dist.family == "gaussian":
        return special.ndtr(t / dist.sigma)
    return np.sin(0.5 * math.pi * np.clip(t, 0.0, 1.0)) ** 2


def ball_probability_1d(dist, x, r):
    """Exact P(B(x, r)) for D = 1 families (torus included)."""
    if dist.D != 1:
        raise ValueError("ball_probability_1d requires D = 1")
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if dist.family == "uniform_torus":
        return np.minimum(2.0 * r, 1.0) + 0.0 * x
    if dist.family == "sine_bump":
        # sin^2 a - sin^2 b = sin(a + b) sin(a - b), no cancellation near the boundary
        lo, hi = np.clip(x - r, 0.0, 1.0), np.clip(x + r, 0.0, 1.0)
        return np.sin(0.5 * math.pi * (hi + lo)) * np.sin(0.5 * math.pi * (hi - lo))
    return cdf_1d(dist, x + r) - cdf_1d(dist, x - r)


# ---------------------------------------------------------------- envelopes

def _constant_envelopes(low, high, rho, D, C_T, notes):
    return EnvelopeData(
        gamma_star_fn=lambda x: low,
        gamma_sup_fn=lambda x: high,
        rho=rho,
        Gamma_0=high / low,
        Gamma=high / low,
        Gamma_B=lambda beta: low ** (-(beta + D) / D),
        Gamma_star_lambda=lambda lam: low ** (-lam / D),
        Gamma_sup_lambda=lambda lam: high ** (lam / D),
        C_T=C_T,
        notes=notes,
    )


def _chi_expectation(D, log_g):
    """E[exp(log_g(R))] for R ~ chi with D degrees of freedom."""
    log_norm = (D / 2.0 - 1.0) * math.log(2.0) + math.lgamma(D / 2.0)

    def integrand(r):
        if r == 0.0:
            return 0.0 if D > 1 else math.exp(log_g(0.0) - log_norm)
        return math.exp((D - 1) * math.log(r) - 0.5 * r * r - log_norm + log_g(r))

    val, _ = integrate.quad(integrand, 0.0, math.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def _gaussian_envelopes(dist, rho, C_T):
    D, s = dist.D, dist.sigma
    c = unit_ball_volume(D)
    log_peak = -0.5 * D * math.log(2.0 * math.pi * s * s)

    def log_phi(radius):
        return log_peak - 0.5 * radius * radius / (s * s)

    def norm_of(x):
        return float(np.linalg.norm(np.reshape(np.asarray(x, dtype=np.float64), -1)))

    def g_low(x):
        return c * math.exp(log_phi(norm_of(x) + rho))

    def g_high(x):
        return c * math.exp(log_phi(max(norm_of(x) - rho, 0.0)))

    def log_ratio(radius):
        return (log_phi(max(radius - rho, 0.0)) - log_phi(radius + rho))

    def gamma_star_lambda(lam):
        # integrand exponent has leading coefficient (lam/D - 1) r^2 / 2
        if lam / D >= 1.0:
            return math.inf
        return _chi_expectation(D, lambda r: -(lam / D) * (math.log(c) + log_phi(s * r + rho)))

    def gamma_sup_lambda(lam):
        return _chi_expectation(
            D, lambda r: (lam / D) * (math.log(c) + log_phi(max(s * r - rho, 0.0))))

    return EnvelopeData(
        gamma_star_fn=g_low,
        gamma_sup_fn=g_high,
        rho=rho,
        Gamma_0=math.inf,
        Gamma=_chi_expectation(D, lambda r: log_ratio(s * r)),
        # E[p(X + rho)^(-(beta + D)/D)] has integrand growing like exp(beta r^2 / (2 D))
        Gamma_B=lambda beta: math.inf,
        Gamma_star_lambda=gamma_star_lambda,
        Gamma_sup_lambda=gamma_sup_lambda,
        C_T=C_T,
        tail_condition_holds=True,
        Gamma_0_truncated=lambda R: math.exp(log_ratio(R)),
        notes=(f"envelopes from density extremes over balls of radius rho={rho}; "
               "Gamma_0 and Gamma_B diverge globally, Gamma_0_truncated(R) is the sup over |x| <= R; "
               "tail condition holds (exponential tails) but C_T has no closed form"),
    )


def _sine_bump_envelopes(dist, rho, C_T):
    if dist.D != 1:
        raise NotImplementedError("sine_bump envelopes are provided for D = 1 only")
    grid = np.geomspace(1e-9, rho, 400)

    def ratio(x, r):
        return ball_probability_1d(dist, x, r) / r

    def extreme(x, sign):
        vals = sign * ratio(x, grid)
        j = int(np.argmin(vals))
        lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(lambda r: sign * float(ratio(x, r)),
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        return sign * min(vals[j], res.fun)

    def g_low(x):
        x = float(np.reshape(x, -1)[0])
        if not 0.0 < x < 1.0:
            return 0.0
        return extreme(x, 1.0)

    def g_high(x):
        x = float(np.reshape(x, -1)[0])
        if not 0.0 < x < 1.0:
            return 0.0
        return extreme(x, -1.0)

    def expect(fn):
        val, _ = integrate.quad(lambda t: density(dist, t) * fn(t), 0.0, 1.0,
                                epsrel=1e-7, limit=200)
        return val

    # gamma_*(x) ~ pi^2 x near the boundary while p(x) ~ (pi^2 / 2) x, so
    # E[gamma_*^-s] is finite exactly when s < 2
    def gamma_b(beta):
        if beta + 1.0 >= 2.0:
            return math.inf
        return expect(lambda t: g_low(t) ** (-(beta + 1.0)))

    def gamma_star_lambda(lam):
        if lam >= 2.0:
            return math.inf
        return expect(lambda t: g_low(t) ** (-lam))

    return EnvelopeData(
        gamma_star_fn=g_low,
        gamma_sup_fn=g_high,
        rho=rho,
        Gamma_0=math.inf,
        Gamma=expect(lambda t: g_high(t) / g_low(t)),
        Gamma_B=gamma_b,
        Gamma_star_lambda=gamma_star_lambda,
        Gamma_sup_lambda=lambda lam: expect(lambda t: g_high(t) ** lam),
        C_T=C_T,
        notes=("envelopes are the numerical inf/sup over r in (0, rho] of P(B(x, r)) / r; "
               "gamma_* vanishes at the boundary so Gamma_0 diverges"),
    )


def envelopes(dist, rho=None, C_T=None):
    """Full-dimension envelope data for ``dist``.

    ``rho`` is the radius up to which the envelopes hold (family default when
    omitted). ``C_T`` is the tail-condition constant; it is only known exactly
    for the one-dimensional torus, where it is 0, and otherwise defaults to +inf
    unless supplied.
    """
    D = dist.D
    c = unit_ball_volume(D)
    if dist.family == "uniform_torus":
        rho = 0.5 if rho is None else min(rho, 0.5)
        if C_T is None:
            # for D = 1 every ball of radius >= 1/2 is the whole circle
            C_T = 0.0 if D == 1 else math.inf
        return _constant_envelopes(c, c, rho, D, C_T,
                                   "exact: P(B(x, r)) = c_D r^D for r <= 1/2")
    if dist.family == "uniform_cube":
        rho = 0.5 if rho is None else rho
        if rho > 1.0:
            raise ValueError("uniform_cube envelopes require rho <= 1")
        return _constant_envelopes(c * 2.0 ** -D, c, rho, D,
                                   math.inf if C_T is None else C_T,
                                   "corner balls keep a 2^-D fraction of their volume for r <= 1")
    if dist.family == "gaussian":
        return _gaussian_envelopes(dist, dist.sigma if rho is None else rho,
                                   math.inf if C_T is None else C_T)
    return _sine_bump_envelopes(dist, 0.5 if rho is None else rho,
                                math.inf if C_T is None else C_T)


# ---------------------------------------------------------------- CSV I/O

def write_dataset_csv(data, path):
    """One row per point, D columns, 17 significant digits (IEEE round trip)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in data.points:
            writer.writerow([format(float(v), ".17g") for v in row])


def read_dataset_csv(path, space):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            rows.append([float(v) for v in row])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return Dataset(space, np.array(rows, dtype=np.float64))
