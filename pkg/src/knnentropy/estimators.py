"""Kozachenko-Leonenko k-NN entropy estimator and derived quantities.

The estimator uses the usual n-sample leave-one-out form

    H_k = psi(n) - psi(k) + ln c_D + (D / n) sum_i ln eps_k(X_i),

where eps_k(X_i) is the distance from X_i to its k-th nearest neighbor among
the other n - 1 points. With this convention E[ln P(B(X_i, eps_k(X_i)))] is
exactly psi(k) - psi(n). All values are in nats.
"""
import math
from dataclasses import dataclass

import numpy as np

from knnentropy import special
from knnentropy.distributions import _draw, ball_probability_1d, density
from knnentropy.knn import Dataset, KnnError, ZeroDistanceError, build_index
from knnentropy.quadrature import gk_integrate
from knnentropy.spaces import distances_to, product_space

STRICT = "strict"
LENIENT = "lenient"


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    n: int
    k: int
    dropped_points: int = 0

    def in_bits(self):
        return self.value / math.log(2.0)


@dataclass(frozen=True)
class MutualInformationEstimate:
    value: float
    n: int
    k: int
    h_x: float
    h_y: float
    h_xy: float
    degenerate: bool = False


def kl_entropy_from_distances(eps, n, k, D, c_D, mode=STRICT):
    """Estimator value from precomputed leave-one-out distances.

    In lenient mode zero distances are dropped and the log-distance average is
    taken over the retained points only.
    """
    eps = np.asarray(eps, dtype=np.float64)
    keep = eps > 0.0
    dropped = int(len(eps) - np.count_nonzero(keep))
    if dropped and mode == STRICT:
        raise ZeroDistanceError(f"{dropped} zero {k}-NN distance(s); use lenient mode to drop them")
    if not np.any(keep):
        raise KnnError("every k-NN distance is zero")
    logs = np.log(eps[keep])
    # fixed-order summation keeps the value independent of how eps was gathered
    mean_log = math.fsum(logs.tolist()) / len(logs)
    value = special.digamma(n) - special.digamma(k) + math.log(c_D) + D * mean_log
    return EntropyEstimate(value=value, n=int(n), k=int(k), dropped_points=dropped)


def kl_entropy(data, k=1, mode=STRICT, method="auto"):
    """Kozachenko-Leonenko entropy estimate of a :class:`Dataset` in nats."""
    if mode not in (STRICT, LENIENT):
        raise ValueError(f"mode must be {STRICT!r} or {LENIENT!r}")
    if data.n < 2:
        raise KnnError("the estimator needs at least two points")
    result = build_index(data, method=method).loo_knn_distances(k, strict=False)
    return kl_entropy_from_distances(result.eps, data.n, k, data.D, data.space.c_D, mode)


def join(x_data, y_data):
    """Concatenate coordinates of paired samples into the product space."""
    if x_data.n != y_data.n:
        raise ValueError(f"paired samples differ in length: {x_data.n} vs {y_data.n}")
    space = product_space(x_data.space, y_data.space)
    return Dataset(space, np.hstack([x_data.points, y_data.points]))


def _is_degenerate(joint):
    # joint support confined to an affine subspace: no density w.r.t. Lebesgue measure
    if joint.space.is_torus or joint.n <= joint.D:
        return False
    centered = joint.points - joint.points.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    return bool(sv[-1] <= sv[0] * 1e-10)


def mutual_information(x_data, y_data, k=1, mode=STRICT, method="auto"):
    """I(X; Y) = H(X) + H(Y) - H(X, Y) from three KL estimates.

    The joint sample lives in the product space with the Euclidean metric on
    concatenated coordinates. ``degenerate`` flags joint samples lying on a
    linear subspace, for which the true mutual information is infinite.
    """
    joint = join(x_data, y_data)
    h_x = kl_entropy(x_data, k, mode, method).value
    h_y = kl_entropy(y_data, k, mode, method).value
    h_xy = kl_entropy(joint, k, mode, method).value
    return MutualInformationEstimate(
        value=h_x + h_y - h_xy, n=joint.n, k=int(k),
        h_x=h_x, h_y=h_y, h_xy=h_xy, degenerate=_is_degenerate(joint))


def smoothed_density(dist, x, eps, mc_draws=200_000, seed=0, return_stderr=False):
    """Ball-averaged density p_eps(x) = P(B(x, eps)) / (c_D eps^D).

    One-dimensional families use adaptive quadrature of the density over the
    ball; higher dimensions use a seeded Monte Carlo estimate.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    space = dist.space
    point = np.reshape(np.asarray(x, dtype=np.float64), -1)
    vol = space.c_D * eps ** space.D
    if dist.D == 1:
        c = float(point[0])
        lo, hi = c - eps, c + eps
        if dist.family in ("uniform_cube", "sine_bump"):
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        if dist.family == "uniform_torus":
            prob = min(2.0 * eps, 1.0)
        elif lo >= hi:
            prob = 0.0
        else:
            prob, _ = gk_integrate(lambda t: density(dist, t), lo, hi, rtol=1e-10)
        value, se = prob / vol, 0.0
    else:
        rng = np.random.default_rng(seed)
        draws = _draw(dist, rng, int(mc_draws))
        inside = distances_to(space, draws, point) < eps
        p_hat = float(np.mean(inside))
        value = p_hat / vol
        se = math.sqrt(p_hat * (1.0 - p_hat) / mc_draws) / vol
    return (value, se) if return_stderr else value


def ball_log_probabilities(data, k, dist):
    """ln P(B(X_i, eps_k(X_i))) for each sample point of a D = 1 family.

    The mean over i has expectation psi(k) - psi(n) for any sampling
    distribution.
    """
    eps = build_index(data).loo_knn_distances(k).eps
    return np.log(ball_probability_1d(dist, data.points[:, 0], eps))
