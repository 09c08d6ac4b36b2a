"""Linear-threshold neurons: lp geometry, weight stabilization, and
accuracy-loss bounds for the stabilized replacement.

Sign convention: sign(0) = +1 everywhere, so every neuron output is exactly
+-1 and enumeration oracles are deterministic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateFunctionError, DimensionError
from .fourier import DEFAULT_ENUMERATION_CAP, ChowEstimate, enumerate_cube

# Best known Berry-Esseen constants; overridable per call for sensitivity runs.
C0_DEFAULT = 0.47
C1_DEFAULT = 21.82


@dataclass(frozen=True)
class PNorm:
    """An attack norm p in [1, inf] together with its dual exponent q."""

    p: float

    def __post_init__(self):
        if not (self.p >= 1.0):
            raise ValueError(f"p must be >= 1, got {self.p}")

    @property
    def q(self) -> float:
        if self.p == 1.0:
            return math.inf
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1.0)

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.p)


def norm(v: np.ndarray, p: float) -> float:
    """lp norm, handling p = inf."""
    v = np.asarray(v, dtype=np.float64)
    if math.isinf(p):
        return float(np.max(np.abs(v))) if v.size else 0.0
    return float(np.sum(np.abs(v) ** p) ** (1.0 / p))


def sign_pm1(z: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(z) >= 0.0, 1.0, -1.0)


@dataclass(frozen=True)
class LinearThresholdNeuron:
    """h(x) = sign(x . w - theta) on {-1,+1}^n."""

    w: np.ndarray
    theta: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        if w.ndim != 1 or w.size < 1:
            raise DimensionError("w must be a nonempty vector")
        if not np.any(w != 0.0):
            raise ValueError("w must not be the zero vector")

    @property
    def n(self) -> int:
        return self.w.size

    def handle(self):
        """Vectorized +-1-valued function handle over (m, n) inputs."""
        w, theta = self.w, self.theta

        def h(X):
            X = np.asarray(X, dtype=np.float64)
            return sign_pm1(X @ w - theta)

        return h

    def normalized(self, p: PNorm) -> "LinearThresholdNeuron":
        """Scale (w, theta) to unit dual norm; the sign function is unchanged."""
        s = norm(self.w, p.q)
        return LinearThresholdNeuron(self.w / s, self.theta / s)


@dataclass(frozen=True)
class StabilizationResult:
    """Replacement weights w* with the closed-form objective value."""

    w_star: np.ndarray
    mu: float
    p: PNorm
    analytic_robustness: Optional[float]
    chow: Optional[ChowEstimate]


def distance_lp(x, nrn: LinearThresholdNeuron, p: PNorm) -> float:
    """lp distance from x to the hyperplane {z : z . w = theta}."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (nrn.n,):
        raise DimensionError(f"x has shape {x.shape}, expected ({nrn.n},)")
    return abs(float(x @ nrn.w) - nrn.theta) / norm(nrn.w, p.q)


def robustness_exact(
    nrn: LinearThresholdNeuron, p: PNorm, cap: int = DEFAULT_ENUMERATION_CAP
) -> float:
    """Mean lp distance to the decision boundary over the whole cube."""
    qn = norm(nrn.w, p.q)
    total = 0.0
    for X in enumerate_cube(nrn.n, cap):
        total += float(np.sum(np.abs(X @ nrn.w - nrn.theta)))
    return total / qn / float(1 << nrn.n)


def robustness_analytic(chow: ChowEstimate, nrn: LinearThresholdNeuron, p: PNorm) -> float:
    """Coefficient-side robustness (sum_i w_i h_i - h_empty*theta)/||w||_q."""
    if chow.n != nrn.n:
        raise DimensionError(f"chow dimension {chow.n} != neuron dimension {nrn.n}")
    if not np.any(chow.h_vec != 0.0):
        warnings.warn("all degree-1 coefficients are zero; neuron is degenerate")
        return 0.0
    qn = norm(nrn.w, p.q)
    return (float(nrn.w @ chow.h_vec) - chow.h_empty * nrn.theta) / qn


def stabilized_weights(h_vec: np.ndarray, p: PNorm, infty_mode: str = "vertex") -> np.ndarray:
    """Closed-form maximizer of the mean signed distance, from h_vec alone.

    For p = inf, "vertex" places unit magnitude on the first coordinate of
    maximal |h_i| (the polytope-vertex maximizer); "statement" assigns |h_i|
    to every maximal coordinate instead.
    """
    h_vec = np.asarray(h_vec, dtype=np.float64)
    if not np.any(h_vec != 0.0):
        raise DegenerateFunctionError("zero coefficient vector: function is constant")
    if p.is_inf:
        amax = np.abs(h_vec).max()
        if infty_mode == "vertex":
            w = np.zeros_like(h_vec)
            imax = int(np.argmax(np.abs(h_vec)))
            w[imax] = math.copysign(1.0, h_vec[imax])
            return w
        if infty_mode == "statement":
            on = np.abs(h_vec) == amax
            return np.where(on, np.sign(h_vec) * np.abs(h_vec), 0.0)
        raise ValueError(f"unknown infty_mode {infty_mode!r}")
    if p.p == 1.0:
        return np.sign(h_vec)
    return np.sign(h_vec) * (np.abs(h_vec) / norm(h_vec, p.p)) ** (p.p - 1.0)


def stabilize(
    nrn: LinearThresholdNeuron,
    p: PNorm,
    chow: Optional[ChowEstimate],
    mu: float,
    infty_mode: str = "vertex",
) -> StabilizationResult:
    """Replacement weights for a neuron, plus the analytic objective value.

    For p = 1 the signs of the degree-1 coefficients equal the signs of the
    weights, so no coefficient estimate is needed; zero weights stay zero
    (the coordinate is irrelevant and any sign gives the same objective).
    For p > 1 a ChowEstimate is required. The analytic robustness
    ||h_vec||_p - h_empty*mu is reported whenever a ChowEstimate is given.
    """
    if chow is not None and chow.n != nrn.n:
        raise DimensionError(f"chow dimension {chow.n} != neuron dimension {nrn.n}")
    if p.p == 1.0:
        w_star = np.sign(nrn.w)
    else:
        if chow is None:
            raise ValueError("p > 1 requires a ChowEstimate")
        w_star = stabilized_weights(chow.h_vec, p, infty_mode=infty_mode)
    analytic = None
    if chow is not None:
        if not np.any(chow.h_vec != 0.0):
            raise DegenerateFunctionError("zero coefficient vector: function is constant")
        analytic = norm(chow.h_vec, p.p) - chow.h_empty * mu
    return StabilizationResult(w_star=w_star, mu=mu, p=p, analytic_robustness=analytic, chow=chow)


def alpha_mu(n: int, mu: float, support: str = "derived") -> float:
    """E|S - mu| for S a sum of n independent uniform +-1/sqrt(n) variables.

    The "derived" support places the atoms at i/sqrt(n) for even-offset
    i in {-n, ..., n}; "printed" places them at i*sqrt(n) and is kept only
    for auditing against the alternative reading of the source formula.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    scale = 1.0 / math.sqrt(n) if support == "derived" else math.sqrt(n)
    if support not in ("derived", "printed"):
        raise ValueError(f"unknown support {support!r}")
    total = 0.0
    for i in range(-n, n + 1, 2):
        total += math.comb(n, (n - i) // 2) * abs(i * scale - mu)
    return total / float(2**n)


def folded_gaussian_mean(mu: float) -> float:
    """E|N(mu, 1)| via the closed form; symmetric in mu."""
    phi_neg = 0.5 * math.erfc(mu / math.sqrt(2.0))  # Phi(-mu)
    return math.sqrt(2.0 / math.pi) * math.exp(-0.5 * mu * mu) + mu * (1.0 - 2.0 * phi_neg)


@dataclass(frozen=True)
class AccuracyBoundReport:
    """Upper bound on disagreement between sign(l(x)-mu) and the original neuron.

    bound is stored raw (it may exceed 1); bound_clamped is the reporting
    convenience. epsilon_be is the Berry-Esseen epsilon max|w*_i|/sigma,
    which collapses to 1/sqrt(n) for p = 1.
    """

    p: PNorm
    mu: float
    gamma: float
    bound: float
    c0: float
    c1: float
    epsilon_be: float
    sigma: Optional[float] = None
    e_mu: Optional[float] = None
    alpha: Optional[float] = None

    @property
    def rho(self) -> float:
        return 4.0 * math.pi * self.c1 / (3.0 * math.sqrt(3.0))

    @property
    def bound_clamped(self) -> float:
        return min(self.bound, 1.0)


def accuracy_bound_p1(
    chow: ChowEstimate,
    n: int,
    mu: float,
    c0: float = C0_DEFAULT,
    c1: float = C1_DEFAULT,
    alpha_support: str = "derived",
) -> AccuracyBoundReport:
    """Disagreement bound for the p=1 stabilized comparison l(x) = x.w*/sqrt(n).

    mu is the threshold of the normalized comparison; a neuron bias theta
    corresponds to mu = theta/sqrt(n).
    """
    if chow.n != n:
        raise DimensionError(f"chow dimension {chow.n} != {n}")
    a = alpha_mu(n, mu, support=alpha_support)
    gamma = abs(norm(chow.h_vec, 1.0) / math.sqrt(n) - chow.h_empty * mu - a)
    bound = 1.5 * (c0 / math.sqrt(n) + math.sqrt(c0**2 / n + math.sqrt(2.0 / math.pi) * gamma))
    return AccuracyBoundReport(
        p=PNorm(1.0),
        mu=mu,
        gamma=gamma,
        bound=bound,
        c0=c0,
        c1=c1,
        epsilon_be=1.0 / math.sqrt(n),
        alpha=a,
    )


def accuracy_bound_lp(
    chow: ChowEstimate,
    p: PNorm,
    mu: float,
    c0: float = C0_DEFAULT,
    c1: float = C1_DEFAULT,
) -> AccuracyBoundReport:
    """Disagreement bound for 1 < p < inf, with l(x) = x.w*/||w*||_2."""
    if not 1.0 < p.p < math.inf:
        raise ValueError("accuracy_bound_lp requires 1 < p < inf")
    w_star = stabilized_weights(chow.h_vec, p)
    sigma = norm(w_star, 2.0)
    eps = float(np.max(np.abs(w_star))) / sigma
    rho = 4.0 * math.pi * c1 / (3.0 * math.sqrt(3.0))
    e_mu = folded_gaussian_mean(mu)
    denom = norm(np.abs(chow.h_vec) ** (p.p - 1.0), 2.0)
    gamma = abs(norm(chow.h_vec, p.p) ** p.p / denom - chow.h_empty * mu - e_mu)
    bound = 1.5 * (
        c0 * eps + math.sqrt((c0 * eps) ** 2 + math.sqrt(2.0 / math.pi) * (gamma + rho * eps))
    )
    return AccuracyBoundReport(
        p=p,
        mu=mu,
        gamma=gamma,
        bound=bound,
        c0=c0,
        c1=c1,
        epsilon_be=eps,
        sigma=sigma,
        e_mu=e_mu,
    )


def disagreement_exact(a, b, n: int, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Exact Pr_x[a(x) != b(x)] by enumeration."""
    differ = 0
    for X in enumerate_cube(n, cap):
        differ += int(np.count_nonzero(np.asarray(a(X)) != np.asarray(b(X))))
    return differ / float(1 << n)
