"""Scalar special functions: digamma, log-gamma and the upper incomplete gamma.

All functions take and return Python floats and raise ``DomainError`` outside
their domain.
"""
import math

EULER_GAMMA = 0.57721566490153286061

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_EPS = 1e-14
_MAX_ITER = 500


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class ConvergenceError(ArithmeticError):
    """Series or continued fraction did not converge within the iteration cap."""


def _check_positive(name, x):
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} requires a finite positive argument, got {x!r}")


def digamma(x):
    """Digamma function psi(x) = d/dx ln Gamma(x) for real x > 0."""
    x = float(x)
    _check_positive("digamma", x)
    acc = 0.0
    while x < 6.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    # Bernoulli tail: B_2k / (2k x^2k), k = 1..7
    tail = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (
        1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12))))))
    return acc + math.log(x) - 0.5 / x - tail


def log_gamma(x):
    """Natural log of the gamma function for real x > 0."""
    x = float(x)
    _check_positive("log_gamma", x)
    shift = 0.0
    if x < 7.0:
        prod = 1.0
        while x < 7.0:
            prod *= x
            x += 1.0
        shift = math.log(prod)
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv * (1.0 / 12 - inv2 * (1.0 / 360 - inv2 * (1.0 / 1260 - inv2 * (
        1.0 / 1680 - inv2 * (1.0 / 1188 - inv2 * (691.0 / 360360 - inv2 / 156))))))
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + series - shift


def _lower_series(s, x):
    # sum_{j>=0} x^j / (s (s+1) ... (s+j)), multiplied by s
    term = 1.0 / s
    total = term
    for j in range(1, _MAX_ITER + 1):
        term *= x / (s + j)
        total += term
        if abs(term) < abs(total) * _EPS:
            return total
    raise ConvergenceError(f"incomplete gamma series failed for s={s}, x={x}")


def _upper_cf(s, x):
    # modified Lentz evaluation of the continued fraction for Gamma(s, x) e^x x^-s
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ConvergenceError(f"incomplete gamma continued fraction failed for s={s}, x={x}")


def log_upper_incomplete_gamma(s, x):
    """ln Gamma(s, x); stays finite where Gamma(s, x) itself over- or underflows."""
    s = float(s)
    x = float(x)
    _check_positive("upper_incomplete_gamma (s)", s)
    if not math.isfinite(x) or x < 0.0:
        raise DomainError(f"upper_incomplete_gamma requires finite x >= 0, got {x!r}")
    lg = log_gamma(s)
    if x == 0.0:
        return lg
    if x < s + 1.0:
        log_lower = -x + s * math.log(x) + math.log(_lower_series(s, x))
        # ln(Gamma(s) - gamma(s, x)) = lg + ln(1 - P)
        p = math.exp(log_lower - lg)
        if p >= 1.0:
            raise ConvergenceError(f"catastrophic cancellation for s={s}, x={x}")
        return lg + math.log1p(-p)
    return -x + s * math.log(x) + math.log(_upper_cf(s, x))


def upper_incomplete_gamma(s, x):
    """Upper incomplete gamma Gamma(s, x) = int_x^inf t^(s-1) e^-t dt."""
    return math.exp(log_upper_incomplete_gamma(s, x))
