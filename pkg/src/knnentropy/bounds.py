"""Numeric evaluation of the k-NN distance and KL-estimator bounds.

Notation: ``gamma_star`` and ``gamma_sup`` are the lower and upper envelope
values at the query point, so that
gamma_star r^D <= P(B(x, r)) <= gamma_sup r^D for r <= rho.

Probability bounds come back as :class:`BoundReport` carrying the raw formula
value, the value clamped to [0, 1], and whether the inputs lie in the window
where the inequality is proven.
"""
import csv
import math
from dataclasses import asdict, dataclass, field

from knnentropy import special
from knnentropy.quadrature import integrate_decaying

# exact kissing numbers; other dimensions only have bracketing bounds
KISSING_NUMBERS = {1: 2, 2: 6, 3: 12, 4: 24, 8: 240, 24: 196560}


@dataclass(frozen=True)
class BoundReport:
    kind: str
    raw: float
    clamped: float
    valid: bool
    inputs: dict = field(default_factory=dict, compare=False)


@dataclass
class BoundParams:
    k: int = 1
    n: int = 100
    D: int = 1
    gamma_star: float = 2.0
    gamma_sup: float = 2.0
    C_T: float = 0.0
    beta: float = 1.0
    C_beta: float = 1.0
    L: float = 1.0
    N_k: int = 2
    lam: float = 1.0
    C_M: float = 1.0
    Gamma_B: float = 1.0
    c_D: float = 2.0
    rho: float = math.inf
    alpha: float = 1.0
    r: float = 0.0
    M_4: float = 1.0

    def __post_init__(self):
        if self.gamma_star > self.gamma_sup:
            raise ValueError("gamma_star must not exceed gamma_sup")


def _report(kind, raw, valid, **inputs):
    clamped = min(max(raw, 0.0), 1.0) if not math.isnan(raw) else raw
    return BoundReport(kind=kind, raw=raw, clamped=clamped, valid=bool(valid), inputs=inputs)


# ------------------------------------------------------------ concentration

def upper_tail_threshold(k, n, D, gamma_star):
    """Smallest r for which the upper-tail concentration bound holds."""
    return (k / (gamma_star * n)) ** (1.0 / D)


def lower_tail_threshold(k, n, D, gamma_sup, rho=math.inf):
    """Largest r for which the lower-tail concentration bound holds."""
    return min((k / (gamma_sup * n)) ** (1.0 / D), rho)


def concentration_upper(r, k, n, D, gamma_star, rho=math.inf):
    """Bound on P[eps_k(x) > r]: exp(-g r^D n) (e g r^D n / k)^k with g = gamma_star."""
    mass = gamma_star * r ** D * n
    valid = upper_tail_threshold(k, n, D, gamma_star) <= r <= rho
    raw = math.exp(-mass + k * (1.0 + math.log(mass / k))) if mass > 0 else math.inf
    return _report("concentration_upper", raw, valid, r=r, k=k, n=n, D=D, gamma_star=gamma_star)


def concentration_lower(r, k, n, D, gamma_star, gamma_sup, rho=math.inf):
    """Bound on P[eps_k(x) <= r]: (e gamma_sup r^D n / k)^(k gamma_star / gamma_sup)."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    valid = r <= lower_tail_threshold(k, n, D, gamma_sup, rho)
    if r == 0:
        raw = 0.0
    else:
        base = math.e * gamma_sup * r ** D * n / k
        raw = base ** (k * gamma_star / gamma_sup)
    return _report("concentration_lower", raw, valid, r=r, k=k, n=n, D=D,
                   gamma_star=gamma_star, gamma_sup=gamma_sup)


# ------------------------------------------------------------ expectations

def expectation_upper_bound(f, f_prime, k, n, D, gamma_star, C_T=0.0, rtol=1e-10):
    """Generic bound on E[f_+(eps_k(x))] for increasing, differentiable f.

    Sum of f_+ at the typical k-NN radius, the tail term C_T / n, and a
    gamma-weighted integral of f' evaluated by adaptive quadrature.
    """
    ng = n * gamma_star
    head = max(0.0, f((k / ng) ** (1.0 / D)))
    log_pref = k - k * math.log(k) - math.log(D) - math.log(ng) / D

    def integrand(t):
        y = k + t
        w = math.exp(log_pref - y + (k + 1.0 / D - 1.0) * math.log(y))
        if w == 0.0:
            return 0.0
        return w * f_prime((y / ng) ** (1.0 / D))

    integral, _ = integrate_decaying(integrand, 0.0, rtol=rtol, first_width=math.sqrt(k) + 1.0)
    return head + C_T / n + integral


def expectation_lower_bound(f, f_prime, k, n, D, gamma_star, gamma_sup, C_T=0.0, rtol=1e-10):
    """Generic bound on E[f_-(eps_k(x))] for increasing, differentiable f."""
    a = D * k * gamma_star / gamma_sup
    u0 = (k / (gamma_sup * n)) ** (1.0 / D)
    head = max(0.0, -f(u0))
    # y = u0 exp(-s) maps (0, u0] onto [0, inf) and turns the y^a weight into exp(-s a)
    def integrand(s):
        w = math.exp(-s * (a + 1.0))
        if w == 0.0:
            return 0.0
        return w * f_prime(u0 * math.exp(-s))

    integral, _ = integrate_decaying(integrand, 0.0, rtol=rtol, first_width=1.0 / (a + 1.0))
    return head + C_T / n + math.exp(a / D) * u0 * integral


def C_1(k, D, gamma_star, gamma_sup):
    return gamma_sup * math.exp(k * gamma_star / gamma_sup) / (D * k * gamma_star)


def C_2(alpha, D):
    return 1.0 + 2.0 * alpha / D


def C_3(alpha, k, D, gamma_star, gamma_sup):
    """Constant of the negative-moment bound, for alpha in (-D k gamma_star / gamma_sup, 0].

    The sign in front of the alpha term makes C_3 >= 1; it follows from
    integrating the generic lower bound with f(x) = -x^alpha.
    """
    denom = D * k * gamma_star + alpha * gamma_sup
    if denom <= 0:
        return math.inf
    return 1.0 - alpha * gamma_sup * math.exp(k * gamma_star / gamma_sup) / denom


def log_upper_closed(k, n, D, gamma_star, C_T=0.0, loose=False):
    """Closed-form bound on E[log_+ eps_k(x)]; ``loose`` uses (e/k)^k Gamma(k, k) <= 1."""
    head = max(0.0, math.log(k / (gamma_star * n))) / D
    if loose:
        return head + 1.0 / D + C_T / n
    tail = math.exp(k - k * math.log(k) + special.log_upper_incomplete_gamma(k, k)) / D
    return head + tail + C_T / n


def log_lower_closed(k, n, D, gamma_star, gamma_sup, C_T=0.0):
    """Closed-form bound on E[log_- eps_k(x)]."""
    head = max(0.0, -math.log(k / (gamma_sup * n))) / D
    return head + C_1(k, D, gamma_star, gamma_sup) + C_T / n


def pos_moment_closed(alpha, k, n, D, gamma_star, C_T=0.0):
    """Incomplete-gamma form of the bound on E[eps_k^alpha(x)], alpha > 0."""
    if not alpha > 0:
        raise ValueError("pos_moment_closed needs alpha > 0")
    head = (k / (gamma_star * n)) ** (alpha / D)
    log_tail = (k - k * math.log(k) + math.log(alpha)
                + special.log_upper_incomplete_gamma(k + alpha / D, k)
                - math.log(D) - (alpha / D) * math.log(n * gamma_star))
    return head + math.exp(log_tail) + C_T / n


def neg_moment_closed(alpha, k, n, D, gamma_star, gamma_sup, C_T=0.0):
    """Bound on E[eps_k^alpha(x)] for alpha in (-D k gamma_star / gamma_sup, 0)."""
    return (C_3(alpha, k, D, gamma_star, gamma_sup)
            * (k / (gamma_sup * n)) ** (alpha / D) + C_T / n)


def moment_bound(alpha, k, n, D, gamma_star, gamma_sup):
    """Power-law bound on E[eps_k^alpha(x)]: C_2 (k / (gamma_star n))^(alpha/D) for
    alpha > 0, C_3 (k / (gamma_sup n))^(alpha/D) for negative admissible alpha."""
    if alpha > 0:
        return C_2(alpha, D) * (k / (gamma_star * n)) ** (alpha / D)
    if alpha == 0:
        return 1.0
    floor = -D * k * gamma_star / gamma_sup
    if alpha < floor:
        raise ValueError(f"alpha={alpha} below the admissible range [{floor}, 0]")
    return neg_moment_closed(alpha, k, n, D, gamma_star, gamma_sup)


# ------------------------------------------------------------ estimator bounds

def bias_constant(D, beta, C_beta, Gamma_B, c_D):
    return (1.0 + c_D) * C_2(beta, D) * C_beta * Gamma_B


def bias_bound(k, n, D, beta, C_beta, Gamma_B, c_D):
    """|E[H - H_k]| <= C_B (k / n)^(beta / D)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    C_B = bias_constant(D, beta, C_beta, Gamma_B, c_D)
    if C_B == 0.0:
        return 0.0
    return C_B * (k / n) ** (beta / D)


def holder_bias_bound(k, n, D, beta, L, Gamma, c_D):
    """Bias bound for beta-Hoelder densities vanishing on the support boundary."""
    C_H = (1.0 + c_D) * C_2(beta, D) * Gamma * L * D / (D + beta)
    return C_H * (n / k) ** (-beta / D)


def kissing_number(D):
    try:
        return KISSING_NUMBERS[D]
    except KeyError:
        raise ValueError(f"no exact kissing number tabulated for D={D}; supply N_k") from None


def moment_ceiling(ell, lam, C_M=1.0):
    """Ceiling C_M ell! / lam^ell on the ell-th central moment of log eps_k."""
    if int(ell) != ell or ell < 2:
        raise ValueError("ell must be an integer >= 2")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return C_M * math.factorial(int(ell)) / lam ** ell


def default_m4(k, D, Gamma_0, C_M=1.0):
    """Fourth-moment ceiling at the midpoint lambda = D k / (2 Gamma_0) of the admissible range."""
    if math.isinf(Gamma_0):
        return math.inf
    return moment_ceiling(4, D * k / (2.0 * Gamma_0), C_M)


def variance_bound(k, n, N_k, M_4):
    """Var[H_k] <= 5 (3 + k N_k)(3 + 64 k) M_4 / n, proven for n >= 16 k."""
    raw = 5.0 * (3 + k * N_k) * (3 + 64 * k) * M_4 / n
    return BoundReport(kind="variance", raw=raw, clamped=raw, valid=n >= 16 * k,
                       inputs=dict(k=k, n=n, N_k=N_k, M_4=M_4))


def mse_bound(bias, variance):
    """Mean squared error bound composed as bias^2 + variance."""
    return bias * bias + variance


def optimal_k(n, beta, D):
    """k growing as n^max(0, (2 beta - D)/(2 beta + D)), kept in [1, n - 1]
    so that the leave-one-out estimator is defined."""
    if n < 2:
        raise ValueError("n must be at least 2")
    exponent = max(0.0, (2.0 * beta - D) / (2.0 * beta + D))
    return min(n - 1, max(1, int(round(n ** exponent))))


# ------------------------------------------------------------ curves

BOUND_KINDS = ("concentration_upper", "concentration_lower", "moment", "bias",
               "variance", "moment_ceiling", "log_upper", "log_lower", "optimal_k")


def evaluate(kind, p):
    """Evaluate one bound for a :class:`BoundParams`; returns a BoundReport."""
    if kind == "concentration_upper":
        return concentration_upper(p.r, p.k, p.n, p.D, p.gamma_star, p.rho)
    if kind == "concentration_lower":
        return concentration_lower(p.r, p.k, p.n, p.D, p.gamma_star, p.gamma_sup, p.rho)
    if kind == "variance":
        return variance_bound(p.k, p.n, p.N_k, p.M_4)
    if kind == "moment":
        floor = -p.D * p.k * p.gamma_star / p.gamma_sup
        valid = p.alpha >= floor
        raw = moment_bound(p.alpha, p.k, p.n, p.D, p.gamma_star, p.gamma_sup) if valid else math.nan
    elif kind == "bias":
        raw, valid = bias_bound(p.k, p.n, p.D, p.beta, p.C_beta, p.Gamma_B, p.c_D), True
    elif kind == "moment_ceiling":
        raw, valid = moment_ceiling(int(p.alpha), p.lam, p.C_M), True
    elif kind == "log_upper":
        raw, valid = log_upper_closed(p.k, p.n, p.D, p.gamma_star, p.C_T), True
    elif kind == "log_lower":
        raw, valid = log_lower_closed(p.k, p.n, p.D, p.gamma_star, p.gamma_sup, p.C_T), True
    elif kind == "optimal_k":
        raw, valid = float(optimal_k(p.n, p.beta, p.D)), True
    else:
        raise ValueError(f"unknown bound kind {kind!r}; expected one of {BOUND_KINDS}")
    return BoundReport(kind=kind, raw=raw, clamped=raw, valid=valid, inputs=asdict(p))


def bound_curve(kind, param, grid, params):
    """Evaluate ``kind`` along ``grid`` values of the BoundParams field ``param``."""
    rows = []
    for value in grid:
        p = BoundParams(**{**asdict(params), param: value})
        rows.append((value, evaluate(kind, p)))
    return rows


def write_bound_csv(rows, path_or_file, param="parameter"):
    """Columns: parameter, raw_bound, clamped_bound, validity_flag."""
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        writer = csv.writer(fh, lineterminator="\n")
        fh.write(f"#schema: bounds; parameter={param}\n")
        writer.writerow(["parameter", "raw_bound", "clamped_bound", "validity_flag"])
        for value, rep in rows:
            writer.writerow([format(float(value), ".17g"), format(rep.raw, ".17g"),
                             format(rep.clamped, ".17g"), int(rep.valid)])
    finally:
        if own:
            fh.close()
