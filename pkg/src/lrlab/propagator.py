"""Heisenberg dynamics alpha_{s,t}(A) = U(t,s)^* A U(t,s) with i dU/dt = H(t) U, U(s,s) = 1.

With this convention d/dt alpha_{s,t}(A) = alpha_{s,t}(i [H(t), A]) and
alpha_{s,t} alpha_{t,u} = alpha_{s,u}. H(t) is the sum of all terms of the
(truncated) chain and acts only on the union of their supports; operators
outside that region are returned unchanged.

Two engines share this interface:

* ``dense``: the observable is conjugated as a dense block on
  region = (term supports) | supp(A), capped by the context's dimension cap.
* ``gaussian``: spin-1/2 chains whose terms are Majorana bilinears (TFIM-type)
  are evolved as quadratics, M -> R^T M R, at any chain length.
"""
from dataclasses import dataclass
import math
import threading

import numpy as np
import scipy.linalg

from . import algebra as alg
from . import gaussian as gs
from .errors import InvalidArgument, PreconditionViolation, ResourceLimitError
from .zerochain import liouvillian_apply

INTEGRATORS = ("auto", "exact_static", "magnus2", "magnus4")
ENGINES = ("auto", "dense", "gaussian")
EXACT_EXPM_BELOW = 1024
UNITARITY_TOL = 1e-10
MAX_DOUBLINGS = 14
# certified stepped unitaries are memoized per generator up to this size
MEMO_MAX_DIM = 1024
MEMO_MAX_ENTRIES = 16


@dataclass(frozen=True)
class PropagatorPlan:
    chain: object
    s: float
    t: float
    integrator: str = "auto"
    step_size: float = 0.05
    tolerance: float = 1e-8
    engine: str = "auto"

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise InvalidArgument(f"unknown integrator {self.integrator!r}")
        if self.engine not in ENGINES:
            raise InvalidArgument(f"unknown engine {self.engine!r}")
        if not (self.step_size > 0 and self.tolerance > 0):
            raise InvalidArgument("step size and tolerance must be positive")
        self.chain.check_time(self.s)
        self.chain.check_time(self.t)
        if self.integrator == "exact_static" and not self.chain.is_static:
            raise InvalidArgument("exact_static needs time-independent coefficients")

    def with_times(self, s, t):
        return PropagatorPlan(self.chain, s, t, self.integrator, self.step_size,
                              self.tolerance, self.engine)

    @property
    def resolved_integrator(self):
        if self.integrator != "auto":
            return self.integrator
        return "exact_static" if self.chain.is_static else "magnus4"


# ----------------------------------------------------------- dense engine

def unitary_exp(omega):
    """exp(omega) for anti-Hermitian omega.

    Exact eigendecomposition of the Hermitian matrix i*omega below dimension
    1024, scipy's scaling-and-squaring Pade expm above, accepted only if the
    result is unitary to 1e-10.
    """
    n = omega.shape[0]
    if n < EXACT_EXPM_BELOW:
        ev, V = scipy.linalg.eigh(1j * omega, check_finite=False)
        return (V * np.exp(-1j * ev)) @ V.conj().T
    U = scipy.linalg.expm(omega)
    err = alg.matrix_norm(U.conj().T @ U - np.eye(n))
    if err > UNITARITY_TOL:
        raise ResourceLimitError(f"matrix exponential lost unitarity ({err:.2e})")
    return U


class DenseGenerator:
    """H(t) on a fixed region as a sum of dense matrices, one per coefficient shape."""

    def __init__(self, chain, region):
        self.chain = chain
        self.region = chain.context.order(region)
        self.shapes, self.mats = [], []
        for shape, items in chain.grouped_pieces():
            mat = None
            for op, amp in items:
                piece = alg.embed_sparse(op, self.region) * amp
                mat = piece if mat is None else mat + piece
            self.shapes.append(shape)
            self.mats.append(mat.toarray())
        self._eig = None
        self._memo = {}
        self._lock = threading.Lock()

    @property
    def dim(self):
        return self.chain.context.local_dim ** len(self.region)

    def H(self, t):
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for f, m in zip(self.shapes, self.mats):
            out += f(t) * m
        return out

    def eig(self):
        with self._lock:
            if self._eig is None:
                self._eig = scipy.linalg.eigh(self.H(0.0), check_finite=False)
            return self._eig

    def exact(self, s, t):
        ev, V = self.eig()
        return (V * np.exp(-1j * ev * (t - s))) @ V.conj().T

    def certified(self, s, t, order, step_size, tol):
        key = (s, t, order, step_size, tol)
        with self._lock:
            if key in self._memo:
                return self._memo[key]
        U, _ = _certified(lambda n: self.stepped(s, t, n, order), s, t, step_size, tol,
                          lambda a, b: alg.matrix_norm(a - b))
        if self.dim <= MEMO_MAX_DIM:
            with self._lock:
                if len(self._memo) >= MEMO_MAX_ENTRIES:
                    self._memo.pop(next(iter(self._memo)))
                self._memo[key] = U
        return U

    def stepped(self, s, t, n_steps, order):
        U = np.eye(self.dim, dtype=complex)
        dt = (t - s) / n_steps
        c = math.sqrt(3.0) / 6.0
        for i in range(n_steps):
            t0 = s + i * dt
            if order == 2:
                omega = -1j * dt * self.H(t0 + 0.5 * dt)
            else:
                h1, h2 = self.H(t0 + (0.5 - c) * dt), self.H(t0 + (0.5 + c) * dt)
                omega = (-0.5j * dt) * (h1 + h2) - (math.sqrt(3.0) / 12.0) * dt * dt * (
                    h2 @ h1 - h1 @ h2)
            U = unitary_exp(omega) @ U
        return U


def _certified(run, s, t, step_size, tol, distance):
    """Re-run with halved steps until two consecutive results agree to ``tol``."""
    n = max(1, int(math.ceil(abs(t - s) / step_size - 1e-12)))
    prev = run(n)
    for _ in range(MAX_DOUBLINGS):
        n *= 2
        cur = run(n)
        if distance(prev, cur) <= tol:
            return cur, n
        prev = cur
    raise ResourceLimitError(f"integrator did not reach tolerance {tol:g} with {n} steps")


# -------------------------------------------------------- gaussian engine

class QuadraticGenerator:
    """h(t) = sum_j f_j(t) M_j restricted to the active Majorana modes of the chain."""

    def __init__(self, chain):
        self.chain = chain
        ctx = chain.context
        n = 2 * len(ctx.graph)
        self.shapes, self.mats = [], []
        for shape, items in chain.grouped_pieces():
            M = np.zeros((n, n))
            for op, amp in items:
                q = gs.from_operator(op)
                if np.iscomplexobj(q.M):
                    raise gs.NotQuadratic("chain term is not self-adjoint")
                M = M + amp * q.M
            self.shapes.append(shape)
            self.mats.append(M)
        active = np.zeros(n, dtype=bool)
        for M in self.mats:
            active |= np.any(M != 0, axis=1)
        self.active = np.flatnonzero(active)
        self.sub = [M[np.ix_(self.active, self.active)] for M in self.mats]
        self.n = n
        self._eig = None
        self._lock = threading.Lock()

    def flow(self, s, t, integrator, step_size, tol):
        k = self.active.size
        if k == 0 or s == t:
            return np.eye(self.n), 0
        if integrator == "exact_static":
            with self._lock:
                if self._eig is None:
                    h = sum(f(0.0) * M for f, M in zip(self.shapes, self.sub))
                    self._eig = scipy.linalg.eigh(1j * h, check_finite=False)
            ev, V = self._eig
            R_sub, steps = ((V * np.exp(-1j * ev * (t - s))) @ V.conj().T).real, 0
        else:
            order = 2 if integrator == "magnus2" else 4
            R_sub, steps = _certified(
                lambda n: gs.orthogonal_flow(self.sub, self.shapes, s, t, n, order),
                s, t, step_size, tol, lambda a, b: float(np.abs(a - b).max()))
        R = np.eye(self.n)
        R[np.ix_(self.active, self.active)] = R_sub
        return R, steps


# ---------------------------------------------------------------- driver

def _generator(chain, kind, region=None):
    key = (kind, None if region is None else tuple(region))
    cache = chain._cache
    if key not in cache:
        cache[key] = DenseGenerator(chain, region) if kind == "dense" else QuadraticGenerator(chain)
    return cache[key]


def choose_engine(plan, A):
    chain = plan.chain
    if isinstance(A, gs.MajoranaQuadratic):
        return "gaussian"
    if plan.engine != "auto":
        return plan.engine
    ctx = chain.context
    region = chain.support() | set(A.support)
    if ctx.local_dim ** len(region) <= ctx.dim_cap:
        return "dense"
    try:
        _generator(chain, "gaussian")
        gs.from_operator(A)
    except (gs.NotQuadratic, InvalidArgument) as exc:
        raise ResourceLimitError(
            f"region of {len(region)} sites exceeds the dense cap {ctx.dim_cap} and the "
            f"model is not quadratic ({exc})") from None
    return "gaussian"


def evolve(plan, A):
    """alpha_{s,t}(A) for the plan's chain (normally a truncation Phi^k)."""
    chain = plan.chain
    if A.context is not chain.context:
        raise InvalidArgument("operator and chain live on different contexts")
    engine = choose_engine(plan, A)
    if engine == "gaussian":
        return _evolve_quadratic(plan, A)
    terms = chain.support()
    if not (terms & set(A.support)) or plan.s == plan.t:
        return A
    region = chain.context.order(terms | set(A.support))
    gen = _generator(chain, "dense", region)
    U = unitary(plan, gen)
    block = alg.embed_sparse(A, region)
    out = U.conj().T @ (block @ U)
    return alg.LatticeOperator(chain.context, region, out)


def unitary(plan, gen):
    integrator = plan.resolved_integrator
    if integrator == "exact_static":
        return gen.exact(plan.s, plan.t)
    order = 2 if integrator == "magnus2" else 4
    return gen.certified(plan.s, plan.t, order, plan.step_size, plan.tolerance)


def _evolve_quadratic(plan, A):
    q = A if isinstance(A, gs.MajoranaQuadratic) else gs.from_operator(A)
    if plan.s == plan.t:
        return q
    gen = _generator(plan.chain, "gaussian")
    R, _ = gen.flow(plan.s, plan.t, plan.resolved_integrator, plan.step_size, plan.tolerance)
    return gs.MajoranaQuadratic(q.context, R.T @ q.M @ R, q.c0)


def compose(plan1, plan2, A):
    """alpha_{s,t}(alpha_{t,u}(A)) for plan1 = s -> t and plan2 = t -> u."""
    if plan1.chain is not plan2.chain:
        raise InvalidArgument("composed plans must share the chain")
    if plan1.t != plan2.s:
        raise InvalidArgument(f"intermediate times differ ({plan1.t} vs {plan2.s})")
    return evolve(plan1, evolve(plan2, A))


def generator_residual(chain, s, t, A, h, integrator="auto", step_size=0.05, tolerance=1e-12,
                       engine="auto"):
    """|| (alpha_{s,t+h} A - alpha_{s,t-h} A) / 2h - alpha_{s,t}(i L_{Phi(t)} A) ||.

    By the cocycle law the bracket equals alpha_{s,t} applied to
    (alpha_{t,t+h} A - alpha_{t,t-h} A) / 2h - i L_{Phi(t)} A, and alpha_{s,t} is
    isometric, so the residual is evaluated on that short-time expression.
    """
    if h == 0:
        raise InvalidArgument("step h must be nonzero")
    h = abs(h)
    for u in (s, t - h, t + h):
        chain.check_time(u)
    base = PropagatorPlan(chain, t, t + h, integrator, min(step_size, h), tolerance, engine)
    fwd = evolve(base, A)
    bwd = evolve(base.with_times(t, t - h), A)
    lA = liouvillian_apply(chain, t, A)
    if isinstance(fwd, gs.MajoranaQuadratic):
        lA = gs.from_operator(lA) if lA.support else gs.MajoranaQuadratic(
            fwd.context, np.zeros_like(fwd.M))
        return ((fwd - bwd) * (0.5 / h) - lA * 1j).norm()
    return alg.op_norm((fwd - bwd) * (0.5 / h) - lA * 1j)


def largest_feasible_k(chain, x0=None, k_values=None, A=None):
    """Largest k (from ``k_values`` or 0, 1, 2, ...) whose truncated dense region fits the cap."""
    from .zerochain import covering_k, truncate

    ctx = chain.context
    if k_values is None:
        k_values = np.arange(0, covering_k(chain, x0) + 1)
    best = None
    for k in k_values:
        region = truncate(chain, k, x0).support() | set(A.support if A is not None else ())
        if ctx.local_dim ** len(region) <= ctx.dim_cap:
            best = float(k)
    if best is None:
        raise PreconditionViolation("no truncation fits the dense cap")
    return best
