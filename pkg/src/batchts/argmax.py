"""Probability that each independent Gaussian belief yields the largest sample.

For beliefs ``X_i ~ N(m_i, v_i)`` the quantity

    q_i = P[X_i > max_{j != i} X_j] = integral of pdf_i(x) * prod_{j != i} cdf_j(x) dx

is evaluated with a composite Gauss-Legendre rule.  Panel breakpoints sit at
``m_j + k * s_j`` for every belief and ``k`` in ``_BREAKS``, so each panel is
at most a few standard deviations wide for every belief whose CDF is in
transition there.  A single fixed-width panel cannot do this: when standard
deviations differ by three orders of magnitude the narrow density falls
between nodes.

The integration range is ``[max_j(m_j - 8 s_j), max_j(m_j + 8 s_j)]``.  Below
the lower end the arm attaining it has already exceeded ``x`` with probability
``1 - Phi(-8) > 1 - 1e-15``, so nothing below contributes.

Accuracy: normalization error below 1e-12 for up to 16 beliefs with variances
in ``[1e-6, 1]``.  The tests compare it with 40-digit mpmath integrals and
with Monte Carlo frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import log_ndtr, ndtr

from .exceptions import UsageError

__all__ = [
    "GaussianBelief",
    "std_normal_cdf",
    "argmax_prob_two",
    "argmax_prob",
    "argmax_prob_arrays",
    "argmax_prob_mc",
]

_BREAKS = np.array([-8.0, -5.0, -3.0, -1.5, 0.0, 1.5, 3.0, 5.0, 8.0])
_NODES_PER_PANEL = 16
_TAIL = 8.0
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianBelief:
    mean: float
    variance: float

    def __post_init__(self):
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise UsageError(f"belief variance must be positive and finite, got {self.variance!r}")
        if not math.isfinite(self.mean):
            raise UsageError(f"belief mean must be finite, got {self.mean!r}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF.

    Uses ``scipy.special.ndtr`` (erf/erfc based, relative error ~1e-16 in both
    tails), which is well inside the 1e-10 absolute error budget.
    """
    x = float(x)
    if not math.isfinite(x):
        raise UsageError(f"std_normal_cdf needs a finite argument, got {x!r}")
    return float(ndtr(x))


def argmax_prob_two(b1: GaussianBelief, b2: GaussianBelief) -> float:
    """Closed form ``P[X_1 > X_2]`` for two independent Gaussians."""
    return float(ndtr((b1.mean - b2.mean) / math.sqrt(b1.variance + b2.variance)))


@lru_cache(maxsize=None)
def _reference_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    return leggauss(n)


def argmax_prob_arrays(means: np.ndarray, stds: np.ndarray) -> np.ndarray:
    """Array form of :func:`argmax_prob` taking means and standard deviations."""
    mu = np.asarray(means, dtype=float)
    sd = np.asarray(stds, dtype=float)
    if mu.ndim != 1 or mu.shape != sd.shape:
        raise UsageError("means and stds must be 1-d arrays of equal length")
    if mu.size < 2:
        raise UsageError("argmax_prob needs at least 2 beliefs")
    if not (sd > 0).all():
        raise UsageError("standard deviations must be positive")

    lo = np.max(mu - _TAIL * sd)
    hi = np.max(mu + _TAIL * sd)
    # beliefs entirely below lo cannot win and add no breakpoints
    relevant = mu + _TAIL * sd > lo
    cuts = (mu[relevant, None] + _BREAKS[None, :] * sd[relevant, None]).ravel()
    cuts = np.unique(np.concatenate([np.clip(cuts, lo, hi), [lo, hi]]))
    a, b = cuts[:-1], cuts[1:]

    x0, w0 = _reference_rule(_NODES_PER_PANEL)
    half = 0.5 * (b - a)
    x = (half[:, None] * x0[None, :] + (0.5 * (a + b))[:, None]).ravel()
    w = (half[:, None] * w0[None, :]).ravel()

    z = (x[None, :] - mu[:, None]) / sd[:, None]
    log_cdf = log_ndtr(z)
    total = log_cdf.sum(axis=0)
    log_pdf = -0.5 * z * z - np.log(sd)[:, None]
    # product over j != i as exp(sum_j log cdf_j - log cdf_i)
    with np.errstate(invalid="ignore"):
        integrand = np.exp(log_pdf + total[None, :] - log_cdf) * _INV_SQRT_2PI
    # -inf - -inf only arises where pdf_i underflows to zero
    integrand = np.nan_to_num(integrand, nan=0.0)
    q = integrand @ w
    return np.clip(q, 0.0, 1.0)


def argmax_prob(beliefs) -> list[float]:
    """``q_i = P[X_i > max_{j != i} X_j]`` for each belief, by quadrature."""
    beliefs = list(beliefs)
    if len(beliefs) < 2:
        raise UsageError("argmax_prob needs at least 2 beliefs")
    mu = np.array([b.mean for b in beliefs])
    sd = np.sqrt([b.variance for b in beliefs])
    return argmax_prob_arrays(mu, sd).tolist()


def argmax_prob_mc(beliefs, samples: int, rng: np.random.Generator,
                   chunk: int = 200_000) -> list[float]:
    """Monte Carlo argmax frequencies; ties go to the lowest index."""
    beliefs = list(beliefs)
    if samples < 1:
        raise UsageError("samples must be at least 1")
    mu = np.array([b.mean for b in beliefs])
    sd = np.sqrt([b.variance for b in beliefs])
    counts = np.zeros(len(beliefs), dtype=np.int64)
    remaining = samples
    while remaining:
        n = min(chunk, remaining)
        draws = mu + sd * rng.standard_normal((n, len(beliefs)))
        counts += np.bincount(np.argmax(draws, axis=1), minlength=len(beliefs))
        remaining -= n
    return (counts / samples).tolist()
