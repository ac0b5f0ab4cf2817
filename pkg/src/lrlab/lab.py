"""Finite-size measurements of light cones, truncation convergence and norm growth.

Each scan returns plain tables plus least-squares fits; fitted numbers are
empirical proxies and never compared with closed-form constants.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from . import algebra as alg
from . import gaussian as gs
from .errors import InvalidArgument, PreconditionViolation
from .localization import localized_norm, DecayFunction
from .propagator import PropagatorPlan, evolve
from .zerochain import covering_k, truncate

DEFAULT_DELTA = 1e-3
MIN_FIT_POINTS = 4


def ordered_map(fn, items, workers=1):
    """map() over a thread pool that always returns results in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ------------------------------------------------------------------ fits

@dataclass(frozen=True)
class FitResult:
    """y ~ slope * x + intercept, with residual diagnostics.

    ``residual`` is the RMS deviation in the space named by ``residual_space``
    (for the exponential light-cone model it is measured back in radius space so
    that it is comparable with the linear model).
    """

    model: str
    slope: float
    intercept: float
    residual: float
    max_abs_residual: float
    n_points: int
    x_range: tuple
    residual_space: str = "y"

    def to_dict(self):
        return {"model": self.model, "slope": self.slope, "intercept": self.intercept,
                "residual": self.residual, "max_abs_residual": self.max_abs_residual,
                "n_points": self.n_points, "x_range": list(self.x_range),
                "residual_space": self.residual_space}


def _polyfit(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < MIN_FIT_POINTS:
        raise PreconditionViolation(f"a fit needs at least {MIN_FIT_POINTS} points, got {x.size}")
    if np.ptp(x) == 0:
        raise PreconditionViolation("fit abscissae are all equal")
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def linear_fit(x, y, model="linear"):
    slope, intercept = _polyfit(x, y)
    res = np.asarray(y, float) - (slope * np.asarray(x, float) + intercept)
    return FitResult(model, slope, intercept, float(np.sqrt(np.mean(res ** 2))),
                     float(np.abs(res).max()), len(res), (float(np.min(x)), float(np.max(x))))


def exponential_radius_fit(t, r):
    """Fit ln(1 + r) = slope * t + intercept; residual reported in r-space."""
    t, r = np.asarray(t, float), np.asarray(r, float)
    slope, intercept = _polyfit(t, np.log1p(r))
    res = r - np.expm1(slope * t + intercept)
    return FitResult("exponential", slope, intercept, float(np.sqrt(np.mean(res ** 2))),
                     float(np.abs(res).max()), len(res), (float(t.min()), float(t.max())),
                     residual_space="r")


# --------------------------------------------------------- threshold radii

def threshold_radius(radii, values, delta, interpolate=False):
    """Smallest radius from which every value (at that radius or beyond) is below ``delta``.

    ``radii`` ascending, ``values`` the matching (max) entries. Returns
    ``(r, saturated)``; ``saturated`` means the largest radius is still above
    threshold, so the cone has reached the edge and r is ``nan``. Radius 0 is an
    implicit candidate. With ``interpolate`` the crossing between the last
    radius above threshold and the next one is located by linear interpolation
    of log(value) (radius 0 counts as value 1).
    """
    radii = np.asarray(radii, float)
    values = np.asarray(values, float)
    above = np.flatnonzero(values >= delta)
    if above.size == 0:
        j = -1
    else:
        j = int(above.max())
        if j == len(radii) - 1:
            return math.nan, True
    r_hi = radii[j + 1]
    if not interpolate:
        return (float(r_hi) if j >= 0 else 0.0), False
    r_lo, v_lo = (radii[j], values[j]) if j >= 0 else (0.0, 1.0)
    v_hi = values[j + 1]
    if v_hi <= 0:
        return float(r_lo), False
    if v_lo <= delta:
        return float(r_lo), False
    frac = (math.log(v_lo) - math.log(delta)) / (math.log(v_lo) - math.log(v_hi))
    return float(r_lo + min(max(frac, 0.0), 1.0) * (r_hi - r_lo)), False


# ------------------------------------------------------------- cone scan

@dataclass
class ConeScanResult:
    times: np.ndarray
    distances: np.ndarray
    table: np.ndarray            # table[i, j] = max ||[alpha_t A, B_y]|| over probes y at distances[j]
    r_star: np.ndarray           # nan where the cone is saturated
    delta: float
    linear: FitResult = None
    exponential: FitResult = None
    k: float = None
    engine: str = ""
    notes: list = field(default_factory=list)

    @property
    def velocity(self):
        return self.linear.slope if self.linear else math.nan

    def rows(self):
        """(t, r, value) triples in table order."""
        for i, t in enumerate(self.times):
            for j, r in enumerate(self.distances):
                yield float(t), float(r), float(self.table[i, j])


def _probe_operator(context, probe, y):
    if callable(probe):
        return probe(y)
    if isinstance(probe, str):
        return alg.pauli(context, {y: probe})
    return alg.site_operator(context, y, probe)


def _plan(chain, s, t, integrator, step_size, tolerance, engine):
    return PropagatorPlan(chain, s, t, integrator, step_size, tolerance, engine)


def cone_scan(chain, A, probe, t_grid, s=0.0, k=None, delta=DEFAULT_DELTA, probe_sites=None,
              integrator="auto", step_size=0.05, tolerance=1e-8, engine="auto", workers=1,
              interpolate=False):
    """Commutator norms ||[alpha^k_{s,t} A, B_y]|| over times and probe distances.

    ``probe`` is a Pauli label, a single-site matrix or a callable site -> operator.
    Entries at equal distance are maximized over probe sites. r*(t) uses the
    relative threshold delta * ||A|| * ||B||; saturated times are excluded from
    both fits (linear r* vs t, and ln(1 + r*) vs t).
    """
    ctx = A.context
    graph = ctx.graph
    work = truncate(chain, k) if k is not None else chain
    supp = set(A.support)
    if probe_sites is None:
        probe_sites = [y for y in graph.sites if y not in supp]
    else:
        if supp & set(probe_sites):
            raise InvalidArgument("probe sites overlap the support of A")
    probes = [_probe_operator(ctx, probe, y) for y in probe_sites]
    for B, y in zip(probes, probe_sites):
        if set(B.support) & supp:
            raise InvalidArgument(f"probe at {y!r} overlaps the support of A")
        if ctx.is_fermion and not alg.is_even(B):
            raise InvalidArgument("probes must be even on the fermion backend")
    dist = np.array([graph.set_distance(supp, B.support) for B in probes])
    distances = np.unique(dist)
    scale = A.norm() * max(B.norm() for B in probes) if probes else 1.0
    times = np.asarray(t_grid, dtype=float)

    def row(t):
        At = evolve(_plan(work, s, t, integrator, step_size, tolerance, engine), A)
        quadratic = isinstance(At, gs.MajoranaQuadratic)
        vals = np.zeros(distances.size)
        for B, d in zip(probes, dist):
            j = int(np.searchsorted(distances, d))
            if quadratic:
                c = At.commutator(gs.from_operator(B)).norm()
            else:
                c = alg.commutator_norm(At, B)
            vals[j] = max(vals[j], c)
        return vals, quadratic

    out = ordered_map(row, times, workers)
    table = np.array([v for v, _ in out]).reshape(times.size, distances.size)
    rs = [threshold_radius(distances, table[i] / scale, delta, interpolate)
          for i in range(times.size)]
    r_star = np.array([r for r, _ in rs])
    res = ConeScanResult(times, distances, table, r_star, delta, k=k,
                         engine="gaussian" if any(q for _, q in out) else "dense")
    ok = ~np.isnan(r_star)
    if ok.sum() >= MIN_FIT_POINTS and np.ptp(times[ok]) > 0:
        res.linear = linear_fit(times[ok], r_star[ok])
        res.exponential = exponential_radius_fit(times[ok], r_star[ok])
    else:
        res.notes.append("fewer than 4 unsaturated times; no fit")
    if (~ok).any():
        res.notes.append(f"{int((~ok).sum())} saturated times excluded from fits")
    return res


# ------------------------------------------------------------ tau and mu

def tau_of(c_lr, C_phi):
    """Short-time window 1 / (4 c_lr C_phi)."""
    if not (c_lr > 0 and C_phi > 0):
        raise InvalidArgument("c_lr and C_phi must be positive")
    return 1.0 / (4.0 * c_lr * C_phi)


def mu_of(nu_F, nu_G, D):
    """mu = min(nu_F - (2D + 2), nu_G - (D + 2))."""
    return min(nu_F - (2 * D + 2), nu_G - (D + 2))


def c_lr_from_velocity(velocity, psi_norm):
    """The cone velocity of a reference chain Psi is c_lr |||Psi|||_G, so c_lr = v / |||Psi|||_G."""
    if not (velocity > 0 and psi_norm > 0):
        raise InvalidArgument("velocity and |||Psi|||_G must be positive")
    return velocity / psi_norm


# ----------------------------------------------------------- cauchy scan

@dataclass
class CauchyScanResult:
    k_list: np.ndarray
    differences: np.ndarray
    l_ref: float
    s: float
    t: float
    nu: float
    a_nu_norm: float
    monotone: bool
    fit: FitResult = None
    exact_zero_k: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def rows(self):
        for k, v in zip(self.k_list, self.differences):
            yield self.t, float(k), float(v)


def cauchy_scan(chain, A, k_list, l_ref, s, t, nu, tau=None, x0=None, integrator="auto",
                step_size=0.05, tolerance=1e-8, engine="auto", workers=1):
    """||alpha^{l_ref}_{s,t} A - alpha^k_{s,t} A|| for k in k_list, with a log-log fit against 1 + k.

    Exact zeros (k large enough that the truncations coincide on A's light cone
    or on the lattice) are reported separately and left out of the fit.
    """
    k_list = np.asarray(sorted(float(k) for k in k_list))
    if k_list.size == 0:
        raise InvalidArgument("empty k list")
    if l_ref < k_list.max():
        raise InvalidArgument("l_ref must be at least max(k_list)")
    if tau is not None and abs(t - s) > tau * (1 + 1e-12):
        raise PreconditionViolation(
            f"|t - s| = {abs(t - s):g} exceeds the short-time window tau = {tau:g}")
    x0 = chain.x0 if x0 is None else x0
    a_nu = localized_norm(A, DecayFunction.power_law(nu), x0)

    def run(k, eng):
        return evolve(_plan(truncate(chain, k, x0), s, t, integrator, step_size, tolerance,
                            eng), A)

    # every truncation uses the engine the reference run needed, so differences
    # are taken between like objects
    ref = run(float(l_ref), engine)
    engine = "gaussian" if isinstance(ref, gs.MajoranaQuadratic) else "dense"
    evolved = ordered_map(lambda k: run(k, engine), list(k_list), workers)
    diffs = np.array([(ref - e).norm() for e in evolved])
    mono = bool(np.all(np.diff(diffs) <= 1e-12 * max(1.0, diffs.max(initial=0.0))))
    res = CauchyScanResult(k_list, diffs, float(l_ref), s, t, nu, a_nu, mono)
    nz = diffs > 0
    res.exact_zero_k = [float(k) for k in k_list[~nz]]
    if nz.sum() >= MIN_FIT_POINTS:
        res.fit = linear_fit(np.log1p(k_list[nz]), np.log(diffs[nz]), model="loglog")
    else:
        res.notes.append(f"only {int(nz.sum())} nonzero differences; no fit")
    return res


# ------------------------------------------------------ nu-norm growth

@dataclass
class GrowthScanResult:
    times: np.ndarray
    norms: np.ndarray
    nu: float
    C_phi: float
    k: float
    fit: FitResult = None
    envelope_shift: float = 0.0
    relative_residual: float = math.nan
    initial_norm: float = math.nan

    @property
    def log_norms(self):
        return np.log(self.norms)

    def envelope(self, times=None):
        """Affine upper envelope of ln N(t): the least-squares line shifted up to touch the data."""
        times = self.times if times is None else np.asarray(times)
        x = self.C_phi * np.abs(times - self.times[0])
        return self.fit.slope * x + self.fit.intercept + self.envelope_shift

    def rows(self):
        for t, v in zip(self.times, self.norms):
            yield float(t), self.nu, float(v)


def nu_norm_growth_scan(chain, A, nu, t_grid, C_phi, mu=None, s=None, k=None, x0=None,
                        integrator="auto", step_size=0.05, tolerance=1e-8, engine="auto",
                        workers=1):
    """||alpha_{s,t} A||_{nu,x0} over t_grid (s = first grid time), fitted as ln N vs C_phi |t - s|.

    ``k`` defaults to the covering truncation (the full lattice). The relative
    residual is max_t |N(t) / exp(fit(t)) - 1|.
    """
    if mu is not None and not (0 < nu < mu):
        raise PreconditionViolation(f"nu = {nu} must lie in (0, mu = {mu})")
    if not nu > 0:
        raise PreconditionViolation("nu must be positive")
    x0 = chain.x0 if x0 is None else x0
    times = np.asarray(t_grid, dtype=float)
    s = float(times[0]) if s is None else s
    k = covering_k(chain, x0) if k is None else k
    work = truncate(chain, k, x0)
    F = DecayFunction.power_law(nu)

    def norm_at(t):
        At = evolve(_plan(work, s, t, integrator, step_size, tolerance, engine), A)
        return localized_norm(At, F, x0)

    norms = np.array(ordered_map(norm_at, times, workers))
    res = GrowthScanResult(times, norms, nu, C_phi, float(k),
                           initial_norm=localized_norm(A, F, x0))
    x = C_phi * np.abs(times - s)
    if times.size >= MIN_FIT_POINTS and np.ptp(x) > 0:
        res.fit = linear_fit(x, np.log(norms), model="log-affine")
        dev = np.log(norms) - (res.fit.slope * x + res.fit.intercept)
        res.envelope_shift = float(max(dev.max(), 0.0))
        res.relative_residual = float(np.abs(np.expm1(dev)).max())
    return res


# ---------------------------------------------------- support radius scan

@dataclass
class RadiusScanResult:
    times: np.ndarray
    radii: np.ndarray
    delta: float
    saturated: np.ndarray
    linear: FitResult = None
    exponential: FitResult = None
    degenerate: bool = False
    notes: list = field(default_factory=list)

    @property
    def better_model(self):
        if self.linear is None:
            return None
        return "linear" if self.linear.residual <= self.exponential.residual else "exponential"

    def rows(self):
        for t, r in zip(self.times, self.radii):
            yield float(t), self.delta, float(r)


def support_radius(A, x0, delta, interpolate=False):
    """Smallest realized radius r beyond which ||(1 - E_{B_r(x0)}) A|| <= delta ||A|| holds."""
    graph = A.context.graph
    radii = graph.realized_distances(x0)
    # the largest ball is the whole lattice, where the residual vanishes
    # identically; a crossing there means the operator has reached the edge
    if radii.size > 1:
        radii = radii[:-1]
    scale = A.norm()
    if scale == 0:
        return 0.0, False
    vals = []
    for r in radii:
        ball = graph.ball(x0, float(r))
        vals.append(0.0 if set(A.support) <= ball
                    else (A - A.conditional_expectation(ball)).norm() / scale)
    vals = np.array(vals)
    # residual "above" means > delta; the shared helper uses >=, so nudge delta
    return threshold_radius(radii, vals, np.nextafter(delta, np.inf), interpolate)


def support_radius_scan(chain, A, delta, t_grid, s=None, k=None, x0=None, integrator="auto",
                        step_size=0.05, tolerance=1e-8, engine="auto", workers=1,
                        interpolate=False):
    """r(t) for alpha_{s,t} A, with linear (r vs t) and exponential (ln(1+r) vs t) fits.

    Times where the operator has reached the lattice edge are flagged saturated
    (r reported as the largest realized radius) and left out of the fits.
    """
    if not delta > 0:
        raise InvalidArgument("delta must be positive")
    x0 = chain.x0 if x0 is None else x0
    times = np.asarray(t_grid, dtype=float)
    s = float(times[0]) if s is None else s
    k = covering_k(chain, x0) if k is None else k
    work = truncate(chain, k, x0)
    r_max = float(A.context.graph.realized_distances(x0).max())

    def radius_at(t):
        At = evolve(_plan(work, s, t, integrator, step_size, tolerance, engine), A)
        r, sat = support_radius(At, x0, delta, interpolate)
        return (r_max if sat else r), sat

    out = ordered_map(radius_at, times, workers)
    radii = np.array([r for r, _ in out])
    sat = np.array([b for _, b in out])
    res = RadiusScanResult(times, radii, delta, sat, degenerate=delta >= 1)
    if res.degenerate:
        res.notes.append("delta >= 1 makes r identically 0")
    ok = ~sat
    if ok.sum() >= MIN_FIT_POINTS and np.ptp(times[ok]) > 0:
        res.linear = linear_fit(times[ok], radii[ok])
        res.exponential = exponential_radius_fit(times[ok], radii[ok])
    else:
        res.notes.append("fewer than 4 unsaturated times; no fit")
    return res


def ratio_increasing(times, radii):
    """True when r(t)/t is strictly increasing over the t > 0 samples."""
    times, radii = np.asarray(times, float), np.asarray(radii, float)
    sel = times > 0
    q = radii[sel] / times[sel]
    return bool(q.size >= 2 and np.all(np.diff(q) > 0))
