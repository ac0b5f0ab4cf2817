"""Majorana-quadratic representation of spin-1/2 chain operators.

Under the Jordan-Wigner map with X strings,

    g_{2j} = (prod_{i<j} X_i) Z_j,    g_{2j+1} = (prod_{i<j} X_i) Y_j,

single-site X and bond operators Z Z become Majorana bilinears
(X_j = i g_{2j} g_{2j+1}, Z_j Z_{j+1} = i g_{2j+1} g_{2j+2}). An operator
Q = c0 + (i/4) g^T M g with antisymmetric M is stored as (c0, M), which is all
that is needed to evolve transverse-field Ising chains of any length:
Heisenberg evolution acts as M -> R^T M R with R' = h(t) R.

Conditional expectations, norms and commutators of such operators are
closed-form in (c0, M), so this engine supports the same duck-typed interface
as :class:`~lrlab.algebra.LatticeOperator` (``norm``, ``conditional_expectation``,
``commutator``, ``-``, ``support``).
"""
import math

import numpy as np
import scipy.linalg

from . import algebra as alg
from .errors import InvalidArgument, UnsupportedBackend


def _check_chain(context):
    if context.is_fermion or context.local_dim != 2 or not context.graph.path_metric:
        raise UnsupportedBackend("the quadratic engine needs a spin-1/2 chain")


class NotQuadratic(InvalidArgument):
    """Operator has a Pauli string outside the Majorana-bilinear family."""


class MajoranaQuadratic:
    __slots__ = ("context", "c0", "M", "_support")

    def __init__(self, context, M, c0=0.0):
        _check_chain(context)
        n = len(context.graph)
        M = np.asarray(M)
        if M.shape != (2 * n, 2 * n):
            raise InvalidArgument(f"M must be {2 * n}x{2 * n}")
        if np.abs(M + M.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(M).max(initial=0.0)):
            raise InvalidArgument("M must be antisymmetric")
        if np.iscomplexobj(M) and not np.any(M.imag):
            M = M.real
        self.context = context
        self.M = M
        self.c0 = complex(c0)
        self._support = None

    def __repr__(self):
        return f"MajoranaQuadratic(support={self.support})"

    @property
    def support(self):
        if self._support is None:
            rows = np.flatnonzero(np.any(self.M != 0, axis=1))
            sites = np.unique(rows // 2)
            if sites.size:
                lo, hi = int(sites.min()), int(sites.max())
                sites = np.arange(lo, hi + 1)
            self._support = tuple(self.context.graph.sites[i] for i in sites)
        return self._support

    # -- arithmetic
    def _same(self, other):
        if isinstance(other, alg.LatticeOperator):
            other = from_operator(other)
        if not isinstance(other, MajoranaQuadratic) or other.context is not self.context:
            raise InvalidArgument("operands must be quadratics on the same context")
        return other

    def __add__(self, other):
        if np.isscalar(other):
            return MajoranaQuadratic(self.context, self.M, self.c0 + other)
        other = self._same(other)
        return MajoranaQuadratic(self.context, self.M + other.M, self.c0 + other.c0)

    __radd__ = __add__

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return MajoranaQuadratic(self.context, self.M * scalar, self.c0 * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-1.0) * other

    def adjoint(self):
        # ((i/4) g^T M g)^* = (-i/4) g^T conj(M)^T g = (i/4) g^T conj(M) g
        return MajoranaQuadratic(self.context, np.conj(self.M), np.conj(self.c0))

    def commutator(self, other):
        """[Q_M, Q_N] = Q_{i[M, N]} (constants commute)."""
        other = self._same(other)
        return MajoranaQuadratic(self.context, 1j * (self.M @ other.M - other.M @ self.M))

    def norm(self):
        """Exact operator norm from the normal-mode spectrum of M.

        For real M the spectrum of (i/4) g^T M g is {sum_k +-e_k / 2} with e_k >= 0
        the positive eigenvalues of iM, so the norm of c0 + Q is
        max(|c0 + q|, |c0 - q|) with q = sum_k e_k / 2. Purely imaginary M is the
        anti-Hermitian case and reduces to the real one.
        """
        M = self.M
        c0 = self.c0
        if np.iscomplexobj(M):
            if np.any(M.real):
                raise UnsupportedBackend("norm of a quadratic with general complex M")
            M, c0 = M.imag, -1j * c0  # Q_{iK} = i Q_K
        rows = np.flatnonzero(np.any(M != 0, axis=1))
        if rows.size == 0:
            return abs(c0)
        sub = M[np.ix_(rows, rows)]
        ev = scipy.linalg.eigvalsh(1j * sub, check_finite=False)
        q = 0.25 * float(np.abs(ev).sum())
        return max(abs(c0 + q), abs(c0 - q))

    def conditional_expectation(self, region):
        """Keep the bilinears whose Pauli string (a site interval) lies inside ``region``."""
        graph = self.context.graph
        n = len(graph)
        inside = np.zeros(n, dtype=bool)
        inside[graph.site_indices(region)] = True
        # ok[i, j]: every site between i and j is in region
        bad = np.cumsum(~inside)
        bad_before = bad - (~inside)
        ok_sites = np.triu((bad[None, :] - bad_before[:, None]) == 0)
        ok_sites = ok_sites | ok_sites.T
        mode_site = np.arange(2 * n) // 2
        keep = ok_sites[mode_site[:, None], mode_site[None, :]]
        return MajoranaQuadratic(self.context, np.where(keep, self.M, 0), self.c0)

    def to_lattice_operator(self, region=None):
        """Dense LatticeOperator on ``region`` (default: the support hull); small chains only."""
        ctx = self.context
        region = ctx.order(self.support if region is None else region)
        graph = ctx.graph
        idx = graph.site_indices(region)
        if list(idx) != list(range(idx[0], idx[0] + len(idx))) if idx else False:
            raise InvalidArgument("region must be a contiguous chain interval")
        gam = majoranas(ctx, region)
        total = alg.identity(ctx) * self.c0
        off = 2 * idx[0] if idx else 0
        n = len(region)
        sub = self.M[off:off + 2 * n, off:off + 2 * n]
        outside = self.M.copy()
        outside[off:off + 2 * n, off:off + 2 * n] = 0
        if np.any(outside):
            raise InvalidArgument("quadratic is not supported in the requested region")
        for a in range(2 * n):
            for b in range(a + 1, 2 * n):
                if sub[a, b] != 0:
                    total = total + (gam[a] @ gam[b]) * (0.5j * sub[a, b])
        return alg.embed(total, region)


def majoranas(context, region):
    """Dense Majorana operators g_0 .. g_{2n-1} for the sites of ``region`` (strings start at region[0])."""
    region = list(context.order(region))
    out = []
    for j, s in enumerate(region):
        for last in ("Z", "Y"):
            factors = {region[i]: "X" for i in range(j)}
            factors[s] = last
            out.append(alg.pauli(context, factors))
    return out


def from_operator(A):
    """Convert a spin-1/2 chain operator to (c0, M); raises NotQuadratic for other strings."""
    ctx = A.context
    _check_chain(ctx)
    graph = ctx.graph
    n = len(graph)
    idx = graph.site_indices(A.support)
    W = np.zeros((2 * n, 2 * n), dtype=complex)
    c0 = 0.0
    for label, c in alg.pauli_expansion(A).items():
        active = [(i, p) for i, p in zip(idx, label) if p != "I"]
        if not active:
            c0 += c
            continue
        active.sort()
        if len(active) == 1 and active[0][1] == "X":
            i = active[0][0]
            W[2 * i, 2 * i + 1] += 1j * c
            continue
        (i, first), (j, last) = active[0], active[-1]
        middle = {k: p for k, p in active[1:-1]}
        if (len(active) < 2 or first not in "YZ" or last not in "ZY"
                or len(middle) != j - i - 1 or any(p != "X" for p in middle.values())):
            raise NotQuadratic(f"Pauli string {label} on {A.support} is not a Majorana bilinear")
        a = 2 * i if first == "Y" else 2 * i + 1
        b = 2 * j if last == "Z" else 2 * j + 1
        W[a, b] += (-1j if first == "Y" else 1j) * c
    M = -2j * W
    M = M - M.T
    if not np.any(M.imag):
        M = M.real
    return MajoranaQuadratic(ctx, M, c0)


def is_quadratic(A):
    try:
        from_operator(A)
    except NotQuadratic:
        return False
    return True


def _expm_antisym(M, dt):
    """exp(dt M) for a real antisymmetric M via the Hermitian matrix iM."""
    ev, V = scipy.linalg.eigh(1j * M, check_finite=False)
    # M = -i V diag(ev) V^*
    R = (V * np.exp(-1j * ev * dt)) @ V.conj().T
    return R.real


def _gauss_step(Ms, coefs, t0, dt):
    """Fourth-order Magnus step for R' = h(t) R, h(t) = sum_j f_j(t) M_j."""
    c = math.sqrt(3.0) / 6.0
    t1, t2 = t0 + (0.5 - c) * dt, t0 + (0.5 + c) * dt
    h1 = sum(f(t1) * M for f, M in zip(coefs, Ms))
    h2 = sum(f(t2) * M for f, M in zip(coefs, Ms))
    omega = 0.5 * dt * (h1 + h2) + (math.sqrt(3.0) / 12.0) * dt * dt * (h2 @ h1 - h1 @ h2)
    return _expm_antisym(omega, 1.0)


def _midpoint_step(Ms, coefs, t0, dt):
    h = sum(f(t0 + 0.5 * dt) * M for f, M in zip(coefs, Ms))
    return _expm_antisym(h, dt)


def orthogonal_flow(Ms, coefs, s, t, n_steps, order=4):
    """R(s, t) with R(s, s) = 1 and dR/dt = h(t) R, using ``n_steps`` equal steps."""
    dim = Ms[0].shape[0]
    R = np.eye(dim)
    if t == s:
        return R
    dt = (t - s) / n_steps
    step = _gauss_step if order == 4 else _midpoint_step
    for i in range(n_steps):
        # R(s, u + dt) = E(u, u + dt) R(s, u)
        R = step(Ms, coefs, s + i * dt, dt) @ R
    return R
