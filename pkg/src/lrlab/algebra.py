"""Finite-lattice operator algebra for spins and Jordan-Wigner fermions.

An operator is a dense block on an explicit support. Spin supports are plain
tensor products. Fermionic blocks use a Jordan-Wigner ordering *local to the
support* (modes ordered by site, then flavor), so a creation operator at x is a
genuine one-site block. Moving between supports then needs a diagonal sign
twist, see :func:`_twist_signs`.
"""
import math

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from . import _kernels
from .errors import InvalidArgument, ResourceLimitError, UnsupportedBackend

DEFAULT_DIM_CAP = 4096
EXACT_NORM_BELOW = 1024
NORM_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": np.eye(2, dtype=complex), "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}
PAULI_LABELS = ("I", "X", "Y", "Z")
# |0> empty, |1> occupied; the annihilator lowers
LOWERING = np.array([[0, 1], [0, 0]], dtype=complex)


class AlgebraContext:
    """Graph + backend description shared by all operators of one system.

    ``backend`` is ``"spin"`` (local dimension ``local_dim``) or ``"fermion"``
    (``flavors`` modes per site, local dimension 2**flavors, chains only).
    ``dim_cap`` bounds every dense block created in this context.
    """

    def __init__(self, graph, backend="spin", local_dim=2, flavors=1, dim_cap=DEFAULT_DIM_CAP):
        if backend not in ("spin", "fermion"):
            raise InvalidArgument(f"unknown backend {backend!r}")
        if backend == "spin" and (int(local_dim) != local_dim or local_dim < 2):
            raise InvalidArgument("spin local dimension must be an integer >= 2")
        if backend == "fermion":
            if int(flavors) != flavors or flavors < 1:
                raise InvalidArgument("number of flavors must be a positive integer")
            if not graph.path_metric:
                raise UnsupportedBackend("the fermion backend needs a chain (path metric)")
            local_dim = 2 ** int(flavors)
        self.graph = graph
        self.backend = backend
        self.local_dim = int(local_dim)
        self.flavors = int(flavors) if backend == "fermion" else 0
        self.dim_cap = int(dim_cap)

    def __repr__(self):
        extra = f"flavors={self.flavors}" if self.is_fermion else f"d={self.local_dim}"
        return f"AlgebraContext({self.backend}, {extra}, n_sites={len(self.graph)})"

    @classmethod
    def spin(cls, graph, local_dim=2, dim_cap=DEFAULT_DIM_CAP):
        return cls(graph, "spin", local_dim=local_dim, dim_cap=dim_cap)

    @classmethod
    def fermion(cls, graph, flavors=1, dim_cap=DEFAULT_DIM_CAP):
        return cls(graph, "fermion", flavors=flavors, dim_cap=dim_cap)

    @property
    def is_fermion(self):
        return self.backend == "fermion"

    @property
    def sites(self):
        return self.graph.sites

    def order(self, region):
        region = set(region)
        for s in region:
            self.graph.index(s)
        return self.graph.sorted_order(region)

    def block_dim(self, n_sites):
        dim = self.local_dim ** n_sites
        if dim > self.dim_cap:
            raise ResourceLimitError(
                f"dense block of dimension {dim} ({n_sites} sites) exceeds the cap {self.dim_cap}")
        return dim


class LatticeOperator:
    """Operator with an explicit support and a dense block in the context's site order."""

    __slots__ = ("context", "support", "block")

    def __init__(self, context, support, block):
        support = context.order(support)
        if list(support) != list(dict.fromkeys(support)):
            raise InvalidArgument("support contains duplicates")
        block = np.array(block, dtype=np.complex128)
        dim = context.block_dim(len(support))
        if block.shape != (dim, dim):
            raise InvalidArgument(f"block shape {block.shape} does not match support of "
                                  f"{len(support)} sites (dimension {dim})")
        block.setflags(write=False)
        self.context = context
        self.support = support
        self.block = block

    def __repr__(self):
        return f"LatticeOperator(support={self.support}, dim={self.block.shape[0]})"

    # -- arithmetic, on the union of supports
    def _aligned(self, other):
        if other.context is not self.context:
            raise InvalidArgument("operators belong to different contexts")
        union = set(self.support) | set(other.support)
        return embed(self, union).block, embed(other, union).block, union

    def __add__(self, other):
        if np.isscalar(other):
            other = identity(self.context) * other
        a, b, union = self._aligned(other)
        return LatticeOperator(self.context, union, a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return LatticeOperator(self.context, self.support, self.block * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __matmul__(self, other):
        a, b, union = self._aligned(other)
        return LatticeOperator(self.context, union, a @ b)

    def adjoint(self):
        return LatticeOperator(self.context, self.support, self.block.conj().T)

    # -- method forms of the module-level operations (duck-typed with MajoranaQuadratic)
    def norm(self):
        return op_norm(self)

    def commutator(self, other):
        return commutator(self, other)

    def conditional_expectation(self, region):
        return conditional_expectation(self, region)

    def embed(self, region):
        return embed(self, region)

    def is_hermitian(self, tol=1e-12):
        return bool(np.abs(self.block - self.block.conj().T).max(initial=0.0) <= tol)


# ------------------------------------------------------------------ builders

def identity(context):
    return LatticeOperator(context, (), np.eye(1))


def zero(context):
    return LatticeOperator(context, (), np.zeros((1, 1)))


def site_operator(context, site, matrix):
    """Single-site operator. On the fermion backend ``matrix`` is read in the site's local JW frame."""
    return LatticeOperator(context, (site,), matrix)


def product_operator(context, factors):
    """Spin-backend tensor product of single-site matrices, ``factors = {site: matrix or Pauli label}``."""
    if context.is_fermion:
        raise UnsupportedBackend("tensor products of local fermionic factors are not well defined; "
                                 "build fermionic operators from car_generators")
    support = context.order(factors)
    mats = [PAULI[factors[s]] if isinstance(factors[s], str) else np.asarray(factors[s])
            for s in support]
    block = np.eye(1, dtype=complex)
    for m in mats:
        block = np.kron(block, m)
    return LatticeOperator(context, support, block)


def pauli(context, factors):
    """Pauli string, e.g. ``pauli(ctx, {0: "Z", 1: "Z"})``."""
    return product_operator(context, factors)


def random_operator(context, support, rng, hermitian=False, even=False):
    support = context.order(support)
    dim = context.block_dim(len(support))
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    if hermitian:
        m = (m + m.conj().T) / 2
    op = LatticeOperator(context, support, m / math.sqrt(2 * dim))
    if even:
        op = (op + grading(op, math.pi)) * 0.5
    return op


def car_generators(context, x, i=1):
    """(a*_{x,i}, a_{x,i}) on support {x}; flavors are numbered 1..n."""
    if not context.is_fermion:
        raise UnsupportedBackend("CAR generators exist only on the fermion backend")
    n = context.flavors
    if not 1 <= i <= n:
        raise InvalidArgument(f"flavor index {i} outside 1..{n}")
    block = np.eye(1, dtype=complex)
    for j in range(1, n + 1):
        f = SIGMA_Z if j < i else (LOWERING if j == i else np.eye(2))
        block = np.kron(block, f)
    ann = LatticeOperator(context, (x,), block)
    return ann.adjoint(), ann


def number_operator(context, x):
    total = zero(context)
    for i in range(1, context.flavors + 1):
        cdag, c = car_generators(context, x, i)
        total = total + cdag @ c
    return total


# ------------------------------------------------- tensor plumbing helpers

def _digits(n_sites, d):
    """Base-d digits of every basis index, most significant site first."""
    idx = np.arange(d ** n_sites)
    out = np.empty((idx.size, n_sites), dtype=np.int64)
    for p in range(n_sites - 1, -1, -1):
        out[:, p] = idx % d
        idx = idx // d
    return out


def _occupations(n_sites, d):
    digits = _digits(n_sites, d)
    bits = np.zeros_like(digits)
    v = digits.copy()
    while np.any(v):
        bits += v & 1
        v >>= 1
    return bits


def _twist_signs(context, order, original):
    """Diagonal of the sign matrix D relating JW frames, or None on the spin backend.

    ``order`` is a site tuple, ``original`` the subset whose local-JW frame the
    block was written in. For every other site q the factor is
    (-1)^(N_original_above_q * n_q), which turns naive identity padding into the
    fermionic embedding (and undoes it before a partial trace).
    """
    if not context.is_fermion:
        return None
    original = set(original)
    occ = _occupations(len(order), context.local_dim)
    orig_mask = np.array([s in original for s in order])
    # N_above[:, p] = occupation of original sites strictly after position p
    orig_occ = occ * orig_mask[None, :]
    above = np.cumsum(orig_occ[:, ::-1], axis=1)[:, ::-1] - orig_occ
    expo = ((above * occ)[:, ~orig_mask]).sum(axis=1)
    if not np.any(expo & 1):
        return None
    return 1.0 - 2.0 * (expo & 1)


def _pad_identity(block, support, target, d):
    """Spin-style embedding: block on ``support`` tensored with identity, axes in ``target`` order."""
    extra = [s for s in target if s not in set(support)]
    if not extra:
        return block
    full = np.kron(block, np.eye(d ** len(extra)))
    current = list(support) + extra
    perm = [current.index(s) for s in target]
    n = len(target)
    t = full.reshape((d,) * (2 * n))
    t = t.transpose(perm + [n + p for p in perm])
    return t.reshape(d ** n, d ** n)


def _partial_trace(block, support, keep, d):
    """Normalized partial trace of ``block`` over ``support`` minus ``keep``."""
    keep_pos = [i for i, s in enumerate(support) if s in keep]
    drop_pos = [i for i, s in enumerate(support) if s not in keep]
    if not drop_pos:
        return block
    n = len(support)
    t = block.reshape((d,) * (2 * n))
    t = t.transpose(keep_pos + drop_pos + [n + p for p in keep_pos] + [n + p for p in drop_pos])
    dk, dr = d ** len(keep_pos), d ** len(drop_pos)
    t = t.reshape(dk, dr, dk, dr)
    return np.einsum("arbr->ab", t) / dr


# ------------------------------------------------------------ operations

def embed(A, region):
    """Same operator with support enlarged to ``region`` (identity on the new sites)."""
    ctx = A.context
    target = ctx.order(region)
    if not set(A.support) <= set(target):
        raise InvalidArgument(f"support {A.support} is not contained in {tuple(target)}")
    if len(target) == len(A.support):
        return A
    ctx.block_dim(len(target))
    block = _pad_identity(A.block, A.support, target, ctx.local_dim)
    signs = _twist_signs(ctx, target, A.support)
    if signs is not None:
        block = signs[:, None] * block * signs[None, :]
    return LatticeOperator(ctx, target, block)


def matrix_norm(m):
    """Spectral norm of a dense matrix.

    Below ``EXACT_NORM_BELOW`` the value is exact (eigvalsh for (anti-)Hermitian
    input, SVD otherwise); above it an ARPACK Lanczos iteration on the
    Hermitian matrix or on m^H m is used with relative tolerance ``NORM_TOL``.
    """
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    scale = float(np.abs(m).max())
    if scale == 0.0:
        return 0.0
    m = m / scale
    herm = np.abs(m - m.conj().T).max() <= 1e-13
    aherm = not herm and np.abs(m + m.conj().T).max() <= 1e-13
    if aherm:
        m, herm = 1j * m, True
    n = m.shape[0]
    if n < EXACT_NORM_BELOW:
        if herm:
            return scale * float(np.abs(scipy.linalg.eigvalsh(m, check_finite=False)).max())
        return scale * float(scipy.linalg.svdvals(m, check_finite=False)[0])
    try:
        if herm:
            val = eigsh(m, k=1, which="LM", tol=NORM_TOL, return_eigenvectors=False)
            return scale * float(abs(val[0]))
        gram = LinearOperator(m.shape, matvec=lambda v: m.conj().T @ (m @ v), dtype=m.dtype)
        val = eigsh(gram, k=1, which="LA", tol=NORM_TOL, return_eigenvectors=False)
        return scale * math.sqrt(max(float(val[0].real), 0.0))
    except ArpackNoConvergence:
        if herm:
            return scale * float(np.abs(scipy.linalg.eigvalsh(m, check_finite=False)).max())
        return scale * float(scipy.linalg.svdvals(m, check_finite=False)[0])


def op_norm(A):
    return matrix_norm(A.block)


def commutator(A, B):
    """[A, B] = AB - BA on the union support."""
    if A.context is not B.context:
        raise InvalidArgument("operators belong to different contexts")
    a, b, union = A._aligned(B)
    return LatticeOperator(A.context, union, a @ b - b @ a)


def anticommutator(A, B):
    a, b, union = A._aligned(B)
    return LatticeOperator(A.context, union, a @ b + b @ a)


def tracial_state(A):
    """Normalized trace; independent of the support the operator is written on."""
    return complex(np.trace(A.block) / A.block.shape[0])


def conditional_expectation(A, region):
    """E_M(A): the tracial-state-preserving projection onto operators supported in M.

    Computed as a normalized partial trace (after untwisting the JW frame on the
    fermion backend). That coincides with projecting the Pauli / Majorana string
    expansion onto strings supported in M, which the tests check independently.
    """
    ctx = A.context
    region = set(ctx.order(region))
    keep = tuple(s for s in A.support if s in region)
    if len(keep) == len(A.support):
        return A
    block = A.block
    signs = _twist_signs(ctx, A.support, keep)
    if signs is not None:
        block = signs[:, None] * block * signs[None, :]
    return LatticeOperator(ctx, keep, _partial_trace(block, A.support, set(keep), ctx.local_dim))


def grading(A, phi):
    """g_phi(A) = exp(i phi N) A exp(-i phi N); the identity map on the spin backend."""
    ctx = A.context
    if not ctx.is_fermion or not A.support:
        return A
    n_tot = _occupations(len(A.support), ctx.local_dim).sum(axis=1)
    ph = np.exp(1j * phi * n_tot)
    return LatticeOperator(ctx, A.support, ph[:, None] * A.block * ph.conj()[None, :])


def parity_part(A, odd=False):
    """Even (default) or odd component (A +- g_pi(A)) / 2."""
    g = grading(A, math.pi)
    return (A - g) * 0.5 if odd else (A + g) * 0.5


def is_even(A, tol=1e-12):
    if not tol > 0:
        raise InvalidArgument("tolerance must be positive")
    return op_norm(grading(A, math.pi) - A) <= tol


# ------------------------------------------------------ string expansions

def _weyl_basis(d):
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    mats, labels = [], []
    for a in range(d):
        for b in range(d):
            mats.append(np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b))
            labels.append(f"W{a},{b}")
    return mats, labels


def _site_basis(d):
    if d == 2:
        return [PAULI[k] for k in PAULI_LABELS], list(PAULI_LABELS)
    return _weyl_basis(d)


def _transform_mats(d):
    mats, _ = _site_basis(d)
    fwd = np.array([m.conj().reshape(-1) for m in mats]) / d
    inv = np.array([m.reshape(-1) for m in mats]).T
    return fwd, inv


def _interleave(block, n, d):
    t = block.reshape((d,) * (2 * n))
    axes = [a for p in range(n) for a in (p, n + p)]
    return t.transpose(axes).reshape(-1)


def _deinterleave(vec, n, d):
    t = vec.reshape((d,) * (2 * n))
    axes = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return t.transpose(axes).reshape(d ** n, d ** n)


def _string_coefficients(block, n, d):
    fwd, _ = _transform_mats(d)
    return _kernels.site_transform(_interleave(block, n, d), fwd, n)


def _string_block(coeffs, n, d):
    _, inv = _transform_mats(d)
    return _deinterleave(_kernels.site_transform(coeffs, inv, n), n, d)


def _label_tuples(n, labels):
    q = len(labels)
    return [tuple(labels[k] for k in row) for row in _digits(n, q)]


def pauli_expansion(A, tol=0.0):
    """Coefficients c_s = omega_tr(s* A) in the orthonormal Pauli (d=2) or Weyl (d>2) string basis.

    Keys are tuples with one single-site label per support site. Only valid on the
    spin backend; see :func:`majorana_expansion` for fermions.
    """
    ctx = A.context
    if ctx.is_fermion:
        raise UnsupportedBackend("use majorana_expansion on the fermion backend")
    n, d = len(A.support), ctx.local_dim
    coeffs = _string_coefficients(A.block, n, d)
    labels = _label_tuples(n, _site_basis(d)[1])
    return {lab: complex(c) for lab, c in zip(labels, coeffs) if abs(c) > tol}


def from_pauli_expansion(context, support, expansion):
    support = context.order(support)
    n, d = len(support), context.local_dim
    names = _site_basis(d)[1]
    pos = {lab: i for i, lab in enumerate(names)}
    q = len(names)
    coeffs = np.zeros(q ** n, dtype=complex)
    for label, c in expansion.items():
        if len(label) != n:
            raise InvalidArgument(f"label {label} does not match support size {n}")
        flat = 0
        for tok in label:
            flat = flat * q + pos[tok]
        coeffs[flat] += c
    return LatticeOperator(context, support, _string_block(coeffs, n, d))


# per-mode Majorana content: 0 none, 1 g1, 2 g2, 3 g1 g2 ; g1 = Z_< X, g2 = Z_< Y
_MAJ_TOKENS = ("1", "g1", "g2", "g1g2")
_MAJ_COUNT = np.array([0, 1, 1, 2])
# (content, string parity) -> Pauli index (I,X,Y,Z) and phase, from O_k Z^s
_MAJ_PAULI = np.array([[0, 3], [1, 2], [2, 1], [3, 0]])
_MAJ_PHASE = np.array([[1, 1], [1, -1j], [1, 1j], [1j, 1j]])


def _majorana_table(n_modes):
    content = _digits(n_modes, 4)
    counts = _MAJ_COUNT[content]
    above = (np.cumsum(counts[:, ::-1], axis=1)[:, ::-1] - counts) & 1
    paulis = _MAJ_PAULI[content, above]
    phase = np.prod(_MAJ_PHASE[content, above], axis=1)
    flat = (paulis * (4 ** np.arange(n_modes - 1, -1, -1))[None, :]).sum(axis=1)
    return content, flat, phase


def majorana_expansion(A, tol=0.0):
    """Coefficients in the orthonormal basis of ordered Majorana monomials of the support's modes.

    Keys are tuples with one entry per support site; each entry is a tuple of
    per-flavor tokens from ("1", "g1", "g2", "g1g2"), with g1 = a + a*,
    g2 = i(a* - a).
    """
    ctx = A.context
    if not ctx.is_fermion:
        raise UnsupportedBackend("majorana_expansion needs the fermion backend")
    n_modes = len(A.support) * ctx.flavors
    pc = _string_coefficients(A.block, n_modes, 2)
    content, flat, phase = _majorana_table(n_modes)
    coeffs = np.conj(phase) * pc[flat]
    out = {}
    f = ctx.flavors
    for row, c in zip(content, coeffs):
        if abs(c) > tol:
            label = tuple(tuple(_MAJ_TOKENS[k] for k in row[s * f:(s + 1) * f])
                          for s in range(len(A.support)))
            out[label] = complex(c)
    return out


def from_majorana_expansion(context, support, expansion):
    support = context.order(support)
    f = context.flavors
    n_modes = len(support) * f
    content, flat, phase = _majorana_table(n_modes)
    tok = {t: i for i, t in enumerate(_MAJ_TOKENS)}
    index_of = {tuple(row): i for i, row in enumerate(map(tuple, content))}
    pc = np.zeros(4 ** n_modes, dtype=complex)
    for label, c in expansion.items():
        if len(label) != len(support):
            raise InvalidArgument(f"label {label} does not match support size {len(support)}")
        row = tuple(tok[t] for site in label for t in site)
        i = index_of[row]
        pc[flat[i]] += c * phase[i]
    return LatticeOperator(context, support, _string_block(pc, n_modes, 2))


def string_expansion(A, tol=0.0):
    return majorana_expansion(A, tol) if A.context.is_fermion else pauli_expansion(A, tol)


def project_expansion(A, region):
    """E_M via coefficient projection: keep strings that act trivially outside ``region``."""
    region = set(region)
    ctx = A.context
    keep = [i for i, s in enumerate(A.support) if s in region]
    trivial = ("1",) * ctx.flavors if ctx.is_fermion else _site_basis(ctx.local_dim)[1][0]
    new = {}
    for label, c in string_expansion(A).items():
        if all(label[i] == trivial for i in range(len(label)) if i not in keep):
            key = tuple(label[i] for i in keep)
            new[key] = new.get(key, 0) + c
    support = tuple(A.support[i] for i in keep)
    if ctx.is_fermion:
        return from_majorana_expansion(ctx, support, new)
    return from_pauli_expansion(ctx, support, new)


# ---------------------------------------------------------- serialization

def _site_to_json(s):
    return list(s) if isinstance(s, tuple) else s


def _site_from_json(s):
    return tuple(s) if isinstance(s, list) else s


def operator_to_dict(A):
    ctx = A.context
    expansion = string_expansion(A)
    if ctx.is_fermion:
        basis, labels = "majorana", {k: [".".join(site) for site in k] for k in expansion}
    else:
        basis = "pauli" if ctx.local_dim == 2 else "weyl"
        labels = {k: list(k) for k in expansion}
    return {
        "backend": ctx.backend,
        "local_dim": ctx.local_dim,
        "flavors": ctx.flavors,
        "support": [_site_to_json(s) for s in A.support],
        "basis": basis,
        "terms": [{"label": labels[k], "re": c.real, "im": c.imag}
                  for k, c in expansion.items() if c != 0],
    }


def operator_from_dict(context, data):
    if data.get("backend") != context.backend or data.get("local_dim") != context.local_dim:
        raise InvalidArgument("serialized operator does not match the context backend")
    support = [_site_from_json(s) for s in data["support"]]
    expansion = {}
    for term in data["terms"]:
        if context.is_fermion:
            key = tuple(tuple(site.split(".")) for site in term["label"])
        else:
            key = tuple(term["label"])
        expansion[key] = expansion.get(key, 0) + complex(term["re"], term["im"])
    # the dict came from sorted support order; keep it
    if context.is_fermion:
        return from_majorana_expansion(context, support, expansion)
    return from_pauli_expansion(context, support, expansion)


def embed_sparse(A, region):
    """Sparse (CSR) matrix of ``A`` embedded in ``region``; avoids dense padding for large regions."""
    import scipy.sparse as sp

    ctx = A.context
    target = list(ctx.order(region))
    if not set(A.support) <= set(target):
        raise InvalidArgument(f"support {A.support} is not contained in {tuple(target)}")
    d, n = ctx.local_dim, len(target)
    ctx.block_dim(n)
    pos = [target.index(s) for s in A.support]
    rest = [p for p in range(n) if p not in set(pos)]
    weights = d ** (n - 1 - np.arange(n))
    local_off = (_digits(len(pos), d) * weights[pos][None, :]).sum(axis=1) if pos else np.zeros(1, int)
    rest_off = (_digits(len(rest), d) * weights[rest][None, :]).sum(axis=1) if rest else np.zeros(1, int)
    i, j = np.nonzero(A.block)
    vals = A.block[i, j]
    rows = (local_off[i][:, None] + rest_off[None, :]).ravel()
    cols = (local_off[j][:, None] + rest_off[None, :]).ravel()
    data = np.repeat(vals, rest_off.size)
    signs = _twist_signs(ctx, tuple(target), A.support)
    if signs is not None:
        data = data * signs[rows] * signs[cols]
    dim = d ** n
    return sp.csr_matrix((data, (rows, cols)), shape=(dim, dim))


def commutator_norm(A, B):
    """||[A, B]||.

    Fast path for a one-site Hermitian B with exactly two distinct eigenvalues
    b0, b1 (Pauli probes) on the spin backend: in B's eigenbasis the commutator
    only has the two off-diagonal blocks X, Y (scaled by b1 - b0), so its norm is
    |b1 - b0| * max(||X||, ||Y||). Everything else goes through the dense commutator.
    """
    ctx = A.context
    if ctx.is_fermion or len(B.support) != 1 or not B.is_hermitian():
        return op_norm(commutator(A, B))
    y = B.support[0]
    if y not in A.support:
        return 0.0
    ev, W = np.linalg.eigh(B.block)
    groups = np.abs(ev - ev[0]) <= 1e-12 * max(1.0, np.abs(ev).max())
    if groups.all() or not np.allclose(ev[~groups], ev[~groups][0], atol=1e-12):
        return op_norm(commutator(A, B)) if not groups.all() else 0.0
    d, n = ctx.local_dim, len(A.support)
    p = A.support.index(y)
    left, right = d ** p, d ** (n - p - 1)
    t = A.block.reshape(left, d, right, left, d, right)
    t = np.einsum("ki,akbcld,lj->aibcjd", W.conj(), t, W, optimize=True)
    s0, s1 = np.flatnonzero(groups), np.flatnonzero(~groups)
    X = t[:, s0][:, :, :, :, s1].reshape(left * s0.size * right, left * s1.size * right)
    gap = abs(ev[s1[0]] - ev[s0[0]])
    if A.is_hermitian():
        return gap * matrix_norm(X)
    Y = t[:, s1][:, :, :, :, s0].reshape(left * s1.size * right, left * s0.size * right)
    return gap * max(matrix_norm(X), matrix_norm(Y))
