"""Time-dependent zero-chains: models, uniform norms, growth coefficient, truncation, Liouvillian."""
from dataclasses import dataclass
import math

import numpy as np

from . import algebra as alg
from .errors import InvalidArgument, UnsupportedBackend
from .localization import DecayFunction, localized_norm

DEFAULT_SAMPLE_DENSITY = 64


@dataclass(frozen=True)
class Coefficient:
    """Scalar time dependence ``amp * f(omega * t + phase)`` with f in {const, cos, sin}."""

    kind: str = "const"
    amp: float = 1.0
    omega: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("const", "cos", "sin"):
            raise InvalidArgument(f"unknown coefficient function {self.kind!r}")

    def __call__(self, t):
        if self.kind == "const":
            return self.amp
        f = math.cos if self.kind == "cos" else math.sin
        return self.amp * f(self.omega * t + self.phase)

    def derivative_bound(self):
        return 0.0 if self.kind == "const" else abs(self.amp * self.omega)

    @property
    def is_constant(self):
        return self.kind == "const" or self.omega == 0.0

    def scaled(self, factor):
        return Coefficient(self.kind, self.amp * factor, self.omega, self.phase)

    def shape(self):
        """The coefficient with unit amplitude; pieces sharing a shape can be summed."""
        if self.is_constant:
            base = self(0.0)
            return Coefficient(), base
        return Coefficient(self.kind, 1.0, self.omega, self.phase), self.amp

    def to_config(self):
        return {"fn": self.kind, "amp": self.amp, "omega": self.omega, "phase": self.phase}


CONST = Coefficient()


class ZeroChain:
    """x -> Phi_x(t) = sum_j f_j(t) O_j with static operators O_j and scalar coefficients f_j.

    ``pieces`` maps a site to a list of ``(LatticeOperator, Coefficient)`` pairs.
    Sites without pieces carry Phi_x = 0.
    """

    def __init__(self, context, pieces, interval=(-math.inf, math.inf), G=None, x0=None,
                 name="custom"):
        self.context = context
        graph = context.graph
        clean = {}
        for x, lst in pieces.items():
            graph.index(x)
            kept = []
            for op, coef in lst:
                if op.context is not context:
                    raise InvalidArgument("zero-chain term from a different context")
                kept.append((op, coef))
            if kept:
                clean[x] = tuple(kept)
        self.pieces = {x: clean[x] for x in graph.sorted_order(clean)}
        t0, t1 = interval
        if not t0 <= t1:
            raise InvalidArgument("empty time interval")
        self.interval = (float(t0), float(t1))
        self.G = G
        self.x0 = graph.x0 if x0 is None else x0
        self.name = name
        self._cache = {}

    def __repr__(self):
        return f"ZeroChain({self.name}, {len(self.pieces)} sites with terms)"

    @property
    def sites(self):
        return tuple(self.pieces)

    @property
    def is_static(self):
        return all(c.is_constant for lst in self.pieces.values() for _, c in lst)

    def check_time(self, t):
        t0, t1 = self.interval
        if not t0 - 1e-12 <= t <= t1 + 1e-12:
            raise InvalidArgument(f"time {t} outside the chain's interval {self.interval}")

    def term(self, x, t):
        """Phi_x(t) as one LatticeOperator (the zero operator if x carries no term)."""
        total = alg.zero(self.context)
        for op, coef in self.pieces.get(x, ()):
            total = total + op * coef(t)
        return total

    def term_support(self, x):
        return frozenset().union(*(op.support for op, _ in self.pieces.get(x, ())))

    def support(self):
        """Union of all term supports."""
        return frozenset().union(*(self.term_support(x) for x in self.pieces))

    def grouped_pieces(self):
        """Static operators summed per coefficient shape: [(Coefficient, [(op, amp), ...])]."""
        groups = {}
        for x in self.pieces:
            for op, coef in self.pieces[x]:
                shape, amp = coef.shape()
                groups.setdefault(shape, []).append((op, amp))
        return list(groups.items())

    def validate(self, t_samples=None, tol=1e-12):
        """Check self-adjointness, evenness and sampled continuity; returns a list of problems."""
        if t_samples is None:
            t_samples = default_time_samples(self, 0.0, 1.0)
        problems = []
        for x in self.pieces:
            for t in t_samples:
                phi = self.term(x, t)
                if not phi.is_hermitian(tol):
                    problems.append(f"Phi_{x}({t:g}) is not self-adjoint")
                    break
                if self.context.is_fermion and not alg.is_even(phi, tol):
                    problems.append(f"Phi_{x}({t:g}) is not even")
                    break
        # coefficients are smooth closed forms, so continuity reduces to a sampled jump bound
        ts = np.sort(np.asarray(t_samples, dtype=float))
        if ts.size > 1:
            for x in self.pieces:
                for _, coef in self.pieces[x]:
                    vals = np.array([coef(t) for t in ts])
                    jumps = np.abs(np.diff(vals))
                    if np.any(jumps > coef.derivative_bound() * np.diff(ts) + 1e-12):
                        problems.append(f"coefficient at {x} is not continuous on the samples")
        return problems


def default_time_samples(chain, t0=None, t1=None, density=DEFAULT_SAMPLE_DENSITY):
    """Uniform grid of ``density`` points per unit time plus both endpoints."""
    t0 = chain.interval[0] if t0 is None else t0
    t1 = chain.interval[1] if t1 is None else t1
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise InvalidArgument("time sampling needs a finite window")
    n = max(int(math.ceil((t1 - t0) * density)), 1)
    return np.linspace(t0, t1, n + 1)


# ------------------------------------------------------------------ models

def _spin_only(context):
    if context.is_fermion:
        raise UnsupportedBackend("this model is defined on the spin backend only")
    if context.local_dim != 2:
        raise UnsupportedBackend("this model needs spin-1/2 sites")


def _bonds(context):
    """Nearest-neighbour pairs (x, y) with d(x, y) = 1, assigned to the earlier site x."""
    graph = context.graph
    out = []
    for i, x in enumerate(graph.sites):
        row = graph.distances_from(x)
        for j in np.flatnonzero(np.abs(row - 1.0) < 1e-12):
            if j > i:
                out.append((x, graph.sites[j]))
    return out


def model_uniform_tfim(context, J=1.0, h=1.0, G=None):
    """Phi_x = J Z_x Z_{x+1} + h X_x, bonds assigned to their left site."""
    _spin_only(context)
    pieces = {}
    for x, y in _bonds(context):
        if J != 0:
            pieces.setdefault(x, []).append((alg.pauli(context, {x: "Z", y: "Z"}) * J, CONST))
    if h != 0:
        for x in context.sites:
            pieces.setdefault(x, []).append((alg.pauli(context, {x: "X"}) * h, CONST))
    return ZeroChain(context, pieces, G=G, name="uniform_tfim")


def model_time_modulated_tfim(context, J=1.0, h=1.0, omega=1.0, G=None):
    """Phi_x(t) = J Z_x Z_{x+1} + h cos(omega t) X_x."""
    _spin_only(context)
    pieces = {}
    for x, y in _bonds(context):
        if J != 0:
            pieces.setdefault(x, []).append((alg.pauli(context, {x: "Z", y: "Z"}) * J, CONST))
    if h != 0:
        for x in context.sites:
            pieces.setdefault(x, []).append(
                (alg.pauli(context, {x: "X"}), Coefficient("cos", h, omega)))
    return ZeroChain(context, pieces, G=G, name="time_modulated_tfim")


def model_linear_growth(context, base, x0=None, slope=1.0):
    """Phi_x(t) = (1 + slope d(x, x0)) base_x(t)."""
    if base.context is not context:
        raise InvalidArgument("base chain lives on a different context")
    if slope < 0:
        raise InvalidArgument("slope must be nonnegative")
    x0 = base.x0 if x0 is None else x0
    graph = context.graph
    pieces = {x: [(op * (1.0 + slope * graph.dist(x, x0)), c) for op, c in lst]
              for x, lst in base.pieces.items()}
    return ZeroChain(context, pieces, base.interval, base.G, x0, name="linear_growth_" + base.name)


def model_zero(context):
    return ZeroChain(context, {}, name="zero")


def model_from_terms(context, terms, interval=(-math.inf, math.inf), G=None):
    """Generic term list.

    Each term is ``{"site": x, "string": "ZZ", "coeff": {"fn": "cos", "amp": 1, "omega": 2}}``;
    letters act on consecutive chain sites starting at ``site`` unless an explicit
    ``"sites"`` list is given. The term is attached to ``site``.
    """
    _spin_only(context)
    graph = context.graph
    pieces = {}
    for term in terms:
        x = term["site"]
        string = term["string"]
        if "sites" in term:
            on = list(term["sites"])
        else:
            start = graph.index(x)
            on = [graph.sites[start + i] for i in range(len(string))
                  if start + i < len(graph)]
        if len(on) != len(string):
            raise InvalidArgument(f"operator string {string!r} does not fit at site {x!r}")
        op = alg.pauli(context, dict(zip(on, string)))
        cfg = dict(term.get("coeff", {}))
        coef = Coefficient(cfg.pop("fn", "const"), **cfg)
        if not op.is_hermitian():
            raise InvalidArgument("term operators must be self-adjoint")
        pieces.setdefault(x, []).append((op, coef))
    return ZeroChain(context, pieces, interval, G, name="terms")


# -------------------------------------------------------- norms and growth

def _sample_times(chain, t_samples):
    t_samples = list(t_samples)
    if not t_samples:
        raise InvalidArgument("empty time samples")
    for t in t_samples:
        chain.check_time(t)
    if chain.is_static:
        return t_samples[:1]
    return t_samples


def uniform_norm(chain, G, t_samples):
    """|||Phi|||_G = max over sampled t and all x of ||Phi_x(t)||_{G,x}."""
    best = 0.0
    for t in _sample_times(chain, t_samples):
        for x in chain.pieces:
            best = max(best, localized_norm(chain.term(x, t), G, x))
    return best


@dataclass(frozen=True)
class GrowthProfile:
    C_phi: float
    x0: object
    G: DecayFunction
    degenerate: bool
    site: object = None
    time: float = None


def growth_coefficient(chain, G, x0=None, t_samples=(0.0,)):
    """C_Phi = max over samples of ||Phi_x(t)||_{G,x} / (1 + d(x, x0)); zero flags a degenerate chain."""
    x0 = chain.x0 if x0 is None else x0
    graph = chain.context.graph
    best, at = 0.0, (None, None)
    for t in _sample_times(chain, t_samples):
        for x in chain.pieces:
            v = localized_norm(chain.term(x, t), G, x) / (1.0 + graph.dist(x, x0))
            if v > best:
                best, at = v, (x, float(t))
    return GrowthProfile(best, x0, G, best == 0.0, *at)


def truncate(chain, k, x0=None):
    """Phi^k_x = E_{B_{k/2}(x)} Phi_x for x in B_{k/2}(x0), zero elsewhere.

    E is linear, so it acts on each static piece and keeps the coefficients.
    """
    if not k >= 0:
        raise InvalidArgument("truncation parameter k must be nonnegative")
    x0 = chain.x0 if x0 is None else x0
    graph = chain.context.graph
    inner = graph.ball(x0, k / 2.0)
    pieces = {}
    for x, lst in chain.pieces.items():
        if x not in inner:
            continue
        ball = graph.ball(x, k / 2.0)
        pieces[x] = [(alg.conditional_expectation(op, ball), c) for op, c in lst]
    out = ZeroChain(chain.context, pieces, chain.interval, chain.G, x0,
                    name=f"{chain.name}^k={k:g}")
    out.truncation = (float(k), x0)
    return out


def covering_k(chain, x0=None):
    """Smallest k with B_{k/2}(x0) = whole lattice, so that truncate(chain, k) == chain."""
    x0 = chain.x0 if x0 is None else x0
    return 2.0 * float(chain.context.graph.distances_from(x0).max())


def liouvillian_apply(chain, t, A):
    """L_{Phi(t)} A = sum_x [Phi_x(t), A].

    Terms with support disjoint from A are skipped: they commute exactly with A
    on the spin backend and, being even, on the fermion backend as well.
    """
    chain.check_time(t)
    total = alg.zero(chain.context)
    sup = set(A.support)
    for x in chain.pieces:
        if chain.term_support(x) & sup:
            total = total + alg.commutator(chain.term(x, t), A)
    return total


def liouvillian_truncation_gap(chain, k, A, t_samples, x0=None):
    """max over samples of ||L_{Phi(t)} A - L_{Phi^k(t)} A||."""
    trunc = truncate(chain, k, x0)
    best = 0.0
    for t in _sample_times(chain, t_samples):
        diff = liouvillian_apply(chain, t, A) - liouvillian_apply(trunc, t, A)
        best = max(best, alg.op_norm(diff))
    return best
