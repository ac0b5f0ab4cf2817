"""Decay functions, decay exponents and weighted localization norms."""
from dataclasses import dataclass
import math

import numpy as np

from . import _kernels
from .errors import InvalidArgument, PreconditionViolation

NU_CEILING_FACTOR = 1e6
NU_TREND_SLOPE = 0.05


def positive_part(x):
    return x if x > 0 else 0.0 * x


class DecayFunction:
    """Positive, bounded function of a nonnegative radius.

    ``log_value`` is the primary evaluation (power laws and exponentials are
    evaluated in log space so that large radii never underflow). ``declared_nu``
    is the exact decay exponent for the closed-form rules, ``math.inf`` for
    exponentials and ``None`` for tabulated data.
    """

    def __init__(self, rule, param=None, radii=None, values=None, declared_nu=None):
        self.rule = rule
        self.param = None if param is None else float(param)
        if rule == "power_law":
            if not self.param >= 0:
                raise InvalidArgument("power_law exponent must be nonnegative")
            self.declared_nu = self.param
        elif rule == "exponential":
            if not self.param > 0:
                raise InvalidArgument("exponential rate must be positive")
            self.declared_nu = math.inf
        elif rule == "constant":
            self.param = 1.0 if param is None else self.param
            if not self.param > 0:
                raise InvalidArgument("constant decay function must be positive")
            self.declared_nu = 0.0
        elif rule == "tabulated":
            radii = np.asarray(radii, dtype=float)
            values = np.asarray(values, dtype=float)
            if radii.ndim != 1 or radii.shape != values.shape or radii.size == 0:
                raise InvalidArgument("tabulated decay needs matching 1-d radii and values")
            if radii[0] != 0 or np.any(np.diff(radii) <= 0):
                raise InvalidArgument("tabulated radii must start at 0 and increase strictly")
            if np.any(values <= 0) or not np.all(np.isfinite(values)):
                raise InvalidArgument("tabulated values must be positive and finite")
            self._radii, self._logs = radii, np.log(values)
            self.declared_nu = declared_nu
        else:
            raise InvalidArgument(f"unknown decay rule {rule!r}")

    @classmethod
    def power_law(cls, nu):
        return cls("power_law", nu)

    @classmethod
    def exponential(cls, b):
        return cls("exponential", b)

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", c)

    @classmethod
    def tabulated(cls, radii, values, declared_nu=None):
        """Log-linear interpolation between samples, constant beyond the last radius."""
        return cls("tabulated", radii=radii, values=values, declared_nu=declared_nu)

    @classmethod
    def from_config(cls, spec):
        spec = dict(spec)
        rule = spec.pop("rule", None)
        if rule == "power_law":
            return cls.power_law(spec.pop("nu"))
        if rule == "exponential":
            return cls.exponential(spec.pop("b"))
        if rule == "constant":
            return cls.constant(spec.pop("c", 1.0))
        if rule == "tabulated":
            return cls.tabulated(spec.pop("radii"), spec.pop("values"), spec.pop("nu", None))
        raise InvalidArgument(f"unknown decay rule {rule!r}")

    def to_config(self):
        if self.rule == "power_law":
            return {"rule": "power_law", "nu": self.param}
        if self.rule == "exponential":
            return {"rule": "exponential", "b": self.param}
        if self.rule == "constant":
            return {"rule": "constant", "c": self.param}
        return {"rule": "tabulated", "radii": self._radii.tolist(),
                "values": np.exp(self._logs).tolist()}

    def __repr__(self):
        return f"DecayFunction({self.rule}, {self.param})"

    @property
    def monotone(self):
        if self.rule == "tabulated":
            return bool(np.all(np.diff(self._logs) <= 0))
        return True

    @property
    def kernel_code(self):
        codes = {"power_law": _kernels.RULE_POWER_LAW, "exponential": _kernels.RULE_EXPONENTIAL,
                 "constant": _kernels.RULE_CONSTANT}
        return codes.get(self.rule)

    def log_value(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise InvalidArgument("decay functions are defined for r >= 0")
        if self.rule == "power_law":
            return -self.param * np.log1p(r)
        if self.rule == "exponential":
            return -self.param * r
        if self.rule == "constant":
            return np.full(r.shape, math.log(self.param))[()]
        return np.interp(r, self._radii, self._logs)

    def __call__(self, r):
        return np.exp(self.log_value(r))

    def sup(self, r_max=1e6):
        if self.monotone:
            return float(self(0.0))
        return float(np.exp(self._logs.max()))


@dataclass(frozen=True)
class NuBound:
    value: float      # largest passing grid nu, nan when none passes
    at_grid_max: bool  # the estimate is only "at least the largest grid value"

    def __str__(self):
        return f">= {self.value:g}" if self.at_grid_max else f"{self.value:g}"


def _nu_passes(F, nu, r, ceiling):
    vals = F.log_value(r) + nu * np.log1p(r)
    if vals.max() > ceiling:
        return False
    tail = r >= r[-1] / 10
    slope = np.polyfit(np.log(r[tail]), vals[tail], 1)[0]
    return slope <= NU_TREND_SLOPE


def nu_lower_bound(F, nu_grid, r_max=1e6):
    """Finite-grid estimate of nu_F = sup{nu : (1+r)^nu F(r) bounded}.

    A grid value passes when max over r <= r_max of F(r)(1+r)^nu stays below
    1e6 F(0) and its log has slope <= 0.05 against log r on the last decade
    below r_max. Returns the last passing value of the ascending grid before
    the first failure. This is a lower-bound style estimate, not a certificate.
    """
    nu_grid = [float(v) for v in nu_grid]
    if not nu_grid:
        raise InvalidArgument("empty nu grid")
    if any(b < a for a, b in zip(nu_grid, nu_grid[1:])):
        raise InvalidArgument("nu grid must be sorted ascending")
    if not r_max > 10:
        raise InvalidArgument("r_max must exceed 10")
    r = np.concatenate([[0.0], np.geomspace(1e-3, r_max, 4001)])
    ceiling = math.log(NU_CEILING_FACTOR) + float(F.log_value(0.0))
    best = math.nan
    for nu in nu_grid:
        if not _nu_passes(F, nu, r, ceiling):
            return NuBound(best, False)
        best = nu
    return NuBound(best, True)


def _critical_radii(A, x, monotone):
    graph = A.context.graph
    if monotone:
        rows = graph.distances_from(x)[graph.site_indices(A.support)] if A.support else []
        return np.unique(np.concatenate([[0.0], rows]))
    return graph.realized_distances(x)


def residual_profile(A, x, radii=None):
    """[(r, ||(1 - E_{B_r(x)}) A||)] for r in ``radii`` (critical radii by default)."""
    graph = A.context.graph
    if radii is None:
        radii = _critical_radii(A, x, True)
    out = []
    for r in radii:
        ball = graph.ball(x, float(r))
        if set(A.support) <= ball:
            out.append((float(r), 0.0))
        else:
            out.append((float(r), (A - A.conditional_expectation(ball)).norm()))
    return out


def localized_norm(A, F, x):
    """||A||_{F,x} = ||A|| + sup_{r >= 0} ||(1 - E_{B_r(x)}) A|| / F(r).

    The residual is piecewise constant in r with jumps only where the ball
    picks up a site. For monotone F only jumps at distances to sites of
    supp(A) matter, so the sup is the max over those radii r_j of
    residual(r_j) / F(r_j) and the left limits residual(r_j) / F(r_{j+1}).
    Other F are scanned over every realized distance with the same two
    families, which is the best a finite evaluation can do.
    """
    radii = _critical_radii(A, x, F.monotone)
    prof = residual_profile(A, x, radii)
    res = np.array([v for _, v in prof])
    logf = F.log_value(radii)
    best = 0.0
    with np.errstate(divide="ignore"):
        lres = np.log(res)
    if np.any(res > 0):
        best = max(best, float(np.exp(np.max(lres - logf))))
        if len(radii) > 1:
            best = max(best, float(np.exp(np.max(lres[:-1] - logf[1:]))))
    return A.norm() + best


def nu_norm(A, nu, x):
    """||A||_{nu,x}: the localization norm for F = power_law(nu)."""
    return localized_norm(A, DecayFunction.power_law(nu), x)


@dataclass(frozen=True)
class SupCheck:
    value: float
    k_at: float
    m_at: float
    k_max: float
    m_upper: float
    boundary_flag: bool  # maximizer sits on the k_max or m_upper edge of the grid


def decay_sup_check(F, nu, k_max, m_grid_density=8.0, k_step=0.5, m_upper=None):
    """Grid value of sup_{0<=k<=k_max} sup_{m>=k/2} (1+m)^nu F((3m/4 - (k+1)/4)_+).

    m runs over k/2 + j/m_grid_density up to ``m_upper`` (default 4(k_max+1)).
    A maximizer on the outer edge of the grid is flagged as a possible
    unbounded trend.
    """
    nu_f = F.declared_nu
    if nu_f is None:
        nu_f = nu_lower_bound(F, np.arange(0, 33) * 0.5).value
    if not (0 <= nu < nu_f):
        raise PreconditionViolation(f"need 0 <= nu < nu_F (nu={nu}, nu_F={nu_f})")
    if not (k_max >= 0 and m_grid_density > 0 and k_step > 0):
        raise InvalidArgument("k_max must be >= 0 and grid densities positive")
    m_upper = 4.0 * (k_max + 1.0) if m_upper is None else float(m_upper)
    k_values = np.arange(0.0, k_max + 0.5 * k_step, k_step)
    step = 1.0 / m_grid_density
    if F.kernel_code is not None:
        log_sup, k_at, m_at = _kernels.sup_grid(F.kernel_code, F.param if F.rule != "constant"
                                                else 0.0, nu, k_values, m_upper, step)
        if F.rule == "constant":
            log_sup += math.log(F.param)
    else:
        log_sup, k_at, m_at = -math.inf, math.nan, math.nan
        for k in k_values:
            m = k / 2 + step * np.arange(int((m_upper - k / 2) / step) + 1)
            vals = nu * np.log1p(m) + F.log_value(np.maximum(0.75 * m - (k + 1) / 4, 0))
            j = int(np.argmax(vals))
            if vals[j] > log_sup:
                log_sup, k_at, m_at = float(vals[j]), float(k), float(m[j])
    edge = (m_at >= m_upper - step) or (k_max > 0 and k_at >= k_values[-1])
    return SupCheck(math.exp(log_sup), k_at, m_at, float(k_max), m_upper, bool(edge))
