import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrlab import algebra as alg
from lrlab.errors import InvalidArgument, ResourceLimitError, UnsupportedBackend
from lrlab.lattice import make_chain

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0 + 0j, -1.0])
I2 = np.eye(2)


def kron(*ms):
    out = np.eye(1)
    for m in ms:
        out = np.kron(out, m)
    return out


@pytest.fixture(scope="module")
def spin():
    return alg.AlgebraContext.spin(make_chain(4))


@pytest.fixture(scope="module")
def ferm():
    return alg.AlgebraContext.fermion(make_chain(3))


# ------------------------------------------------------------------ embed / norm

def test_embed_pads_identity(spin):
    A = alg.pauli(spin, {0: "Z"})
    E = alg.embed(A, {0, 1})
    assert np.allclose(E.block, kron(Z, I2))
    assert E.norm() == pytest.approx(1.0)


def test_embed_noop_and_functorial(spin):
    rng = np.random.default_rng(1)
    A = alg.random_operator(spin, {1}, rng)
    assert alg.embed(A, A.support) is A or np.array_equal(alg.embed(A, A.support).block, A.block)
    twice = alg.embed(alg.embed(A, {1, 2}), {0, 1, 2, 3})
    once = alg.embed(A, {0, 1, 2, 3})
    assert np.allclose(twice.block, once.block)


def test_embed_rejects_smaller_region(spin):
    with pytest.raises(InvalidArgument):
        alg.embed(alg.pauli(spin, {0: "X", 1: "X"}), {0})


def test_norms(spin):
    assert alg.op_norm(alg.pauli(spin, {2: "X"})) == pytest.approx(1.0)
    s = alg.pauli(spin, {0: "X"}) + alg.pauli(spin, {0: "Z"})
    assert alg.op_norm(s) == pytest.approx(np.linalg.eigvalsh(X + Z).max())
    assert alg.op_norm(s) == pytest.approx(math.sqrt(2))
    assert alg.op_norm(alg.zero(spin)) == 0.0


def test_matrix_norm_large_uses_iterative_route():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((1100, 1100))
    h = m + m.T
    assert alg.matrix_norm(h) == pytest.approx(np.abs(np.linalg.eigvalsh(h)).max(), rel=1e-9)
    assert alg.matrix_norm(np.zeros((1100, 1100))) == 0.0


# ------------------------------------------------------------------ commutators

def test_pauli_commutator(spin):
    c = alg.commutator(alg.pauli(spin, {1: "Z"}), alg.pauli(spin, {1: "X"}))
    assert np.allclose(c.block, 2j * Y)
    assert c.norm() == pytest.approx(2.0)


def test_disjoint_spin_commute(spin):
    rng = np.random.default_rng(0)
    A = alg.random_operator(spin, {0, 1}, rng)
    B = alg.random_operator(spin, {2, 3}, rng)
    assert alg.op_norm(alg.commutator(A, B)) < 1e-14


def jw_annihilators(n):
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    return [kron(*([Z] * j + [lower] + [I2] * (n - j - 1))) for j in range(n)]


def test_fermion_even_commutes_with_disjoint_dense_oracle(ferm):
    # oracle: explicit JW matrices on 3 modes
    c = jw_annihilators(3)
    even = c[0].conj().T @ c[0] + c[0] @ c[0].conj().T * 0.3
    odd_far = c[2] + c[2].conj().T
    assert np.abs(even @ odd_far - odd_far @ even).max() < 1e-14
    rng = np.random.default_rng(5)
    A = alg.random_operator(ferm, {0}, rng, even=True)
    B = alg.random_operator(ferm, {1, 2}, rng)
    assert alg.op_norm(alg.commutator(A, B)) < 1e-12


def test_fermion_odd_operators_anticommute(ferm):
    cd0, _ = alg.car_generators(ferm, 0)
    _, c2 = alg.car_generators(ferm, 2)
    assert alg.op_norm(alg.anticommutator(cd0, c2)) < 1e-14
    assert alg.op_norm(alg.commutator(cd0, c2)) > 0.5


def test_car_generators_match_jw(ferm):
    c = jw_annihilators(3)
    for x in range(3):
        _, a = alg.car_generators(ferm, x)
        assert np.allclose(alg.embed(a, {0, 1, 2}).block, c[x])


def test_car_relations(ferm):
    cd0, c0 = alg.car_generators(ferm, 0)
    cd1, _ = alg.car_generators(ferm, 1)
    one = alg.identity(ferm)
    assert alg.op_norm(alg.anticommutator(c0, cd0) - one) < 1e-14
    assert alg.op_norm(cd0 @ cd0) < 1e-14
    assert alg.op_norm(alg.anticommutator(c0, cd1)) < 1e-14


def test_multi_flavor_car():
    ctx = alg.AlgebraContext.fermion(make_chain(2), flavors=2)
    modes = [(x, i) for x in (0, 1) for i in (1, 2)]
    one = alg.identity(ctx)
    for m in modes:
        for n in modes:
            _, a = alg.car_generators(ctx, *m)
            ad, b = alg.car_generators(ctx, *n)
            target = one if m == n else alg.zero(ctx)
            assert alg.op_norm(alg.anticommutator(a, ad) - target) < 1e-13
            assert alg.op_norm(alg.anticommutator(a, b)) < 1e-13


def test_commutator_norm_fast_path_matches_dense(spin):
    rng = np.random.default_rng(11)
    for _ in range(5):
        A = alg.random_operator(spin, {0, 1, 2}, rng)
        H = alg.random_operator(spin, {0, 1, 2, 3}, rng, hermitian=True)
        for label in "XYZ":
            B = alg.pauli(spin, {1: label})
            assert alg.commutator_norm(A, B) == pytest.approx(alg.op_norm(alg.commutator(A, B)),
                                                              rel=1e-12, abs=1e-14)
            assert alg.commutator_norm(H, B) == pytest.approx(alg.op_norm(alg.commutator(H, B)),
                                                              rel=1e-12, abs=1e-14)
    assert alg.commutator_norm(A, alg.pauli(spin, {3: "X"})) == 0.0


# ------------------------------------------------------------------ tracial state

def test_tracial_state(spin):
    assert alg.tracial_state(alg.identity(spin)) == pytest.approx(1.0)
    assert alg.tracial_state(alg.pauli(spin, {0: "Z"})) == pytest.approx(0.0)
    rng = np.random.default_rng(2)
    for _ in range(50):
        A = alg.random_operator(spin, {0, 2}, rng)
        B = alg.random_operator(spin, {1, 2}, rng)
        assert abs(alg.tracial_state(A @ B) - alg.tracial_state(B @ A)) <= 1e-12


# ------------------------------------------------------------ conditional expectation

def test_conditional_expectation_examples(spin):
    rng = np.random.default_rng(4)
    A = alg.random_operator(spin, {0, 1, 3}, rng)
    assert alg.op_norm(alg.conditional_expectation(A, spin.sites) - A) == 0.0
    empty = alg.conditional_expectation(A, set())
    assert empty.support == ()
    assert empty.block[0, 0] == pytest.approx(alg.tracial_state(A))
    xx = alg.pauli(spin, {0: "X", 1: "X"})
    assert alg.op_norm(alg.conditional_expectation(xx, {0})) == 0.0
    x0 = alg.embed(alg.pauli(spin, {0: "X"}), {0, 1})
    assert np.allclose(alg.conditional_expectation(x0, {0}).block, X)


def test_partial_trace_oracle(spin):
    rng = np.random.default_rng(8)
    A = alg.random_operator(spin, {0, 1}, rng)
    t = A.block.reshape(2, 2, 2, 2)
    expected = np.einsum("ajbj->ab", t) / 2
    assert np.allclose(alg.conditional_expectation(A, {0}).block, expected)


def test_fermion_conditional_expectation_agrees_with_string_projection(ferm):
    rng = np.random.default_rng(9)
    for region in ({0}, {1}, {2}, {0, 2}, {1, 2}):
        A = alg.random_operator(ferm, {0, 1, 2}, rng)
        E = alg.conditional_expectation(A, region)
        P = alg.project_expansion(A, region)
        assert alg.op_norm(E - P) < 1e-13


def test_fermion_conditional_expectation_kills_outside_modes(ferm):
    # c_0^* c_2 has no component on mode 1 alone; number operator on 1 survives
    cd0, _ = alg.car_generators(ferm, 0)
    _, c2 = alg.car_generators(ferm, 2)
    hop = cd0 @ c2
    assert alg.op_norm(alg.conditional_expectation(hop, {0, 1})) < 1e-14
    n1 = alg.number_operator(ferm, 1)
    assert alg.op_norm(alg.conditional_expectation(alg.embed(n1, {0, 1, 2}), {1}) - n1) < 1e-14


region_st = st.sets(st.integers(0, 3))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), m1=region_st, m2=region_st)
def test_conditional_expectation_properties(seed, m1, m2):
    ctx = alg.AlgebraContext.spin(make_chain(4))
    rng = np.random.default_rng(seed)
    A = alg.random_operator(ctx, ctx.sites, rng)
    B = alg.random_operator(ctx, m1, rng)
    E = alg.conditional_expectation(A, m1)
    assert abs(alg.tracial_state(A @ B) - alg.tracial_state(E @ B)) <= 1e-12
    L = alg.random_operator(ctx, m1, rng)
    R = alg.random_operator(ctx, m1, rng)
    assert alg.op_norm(alg.conditional_expectation(L @ A @ R, m1) - L @ E @ R) <= 1e-12
    lhs = alg.conditional_expectation(alg.conditional_expectation(A, m2), m1)
    assert alg.op_norm(lhs - alg.conditional_expectation(A, m1 & m2)) <= 1e-12
    assert alg.op_norm(E) <= alg.op_norm(A) + 1e-12
    assert alg.op_norm(E - alg.project_expansion(A, m1)) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), m1=st.sets(st.integers(0, 2)))
def test_fermion_conditional_expectation_properties(seed, m1):
    ctx = alg.AlgebraContext.fermion(make_chain(3))
    rng = np.random.default_rng(seed)
    A = alg.random_operator(ctx, ctx.sites, rng)
    B = alg.random_operator(ctx, m1, rng)
    E = alg.conditional_expectation(A, m1)
    assert abs(alg.tracial_state(A @ B) - alg.tracial_state(E @ B)) <= 1e-12
    L = alg.random_operator(ctx, m1, rng, even=True)
    R = alg.random_operator(ctx, m1, rng, even=True)
    assert alg.op_norm(alg.conditional_expectation(L @ A @ R, m1) - L @ E @ R) <= 1e-12
    Ae = alg.parity_part(A)
    assert alg.is_even(alg.conditional_expectation(Ae, m1))


# ------------------------------------------------------------------ grading

def test_grading(ferm):
    cd, _ = alg.car_generators(ferm, 1)
    one = alg.identity(ferm)
    assert alg.op_norm(alg.grading(one, 0.7) - one) == 0.0
    assert alg.op_norm(alg.grading(cd, math.pi) + cd) < 1e-14
    n = alg.number_operator(ferm, 1)
    assert alg.op_norm(alg.grading(n, math.pi) - n) < 1e-14


def test_is_even(ferm):
    cd0, _ = alg.car_generators(ferm, 0)
    _, c1 = alg.car_generators(ferm, 1)
    assert alg.is_even(alg.number_operator(ferm, 0))
    assert not alg.is_even(cd0)
    assert alg.is_even(cd0 @ c1)
    # dense oracle: parity operator commutes with the hopping term
    c = jw_annihilators(2)
    P = kron(Z, Z)
    hop = c[0].conj().T @ c[1]
    assert np.allclose(P @ hop @ P, hop)
    with pytest.raises(InvalidArgument):
        alg.is_even(cd0, tol=0)


# ------------------------------------------------------------------ expansions

def test_pauli_expansion_roundtrip(spin):
    rng = np.random.default_rng(6)
    A = alg.random_operator(spin, {0, 2, 3}, rng)
    exp = alg.pauli_expansion(A)
    assert len(exp) == 64
    B = alg.from_pauli_expansion(spin, A.support, exp)
    assert np.allclose(A.block, B.block)
    zz = alg.pauli(spin, {0: "Z", 3: "Z"})
    assert alg.pauli_expansion(zz, tol=1e-14) == {("Z", "Z"): pytest.approx(1.0)}


def test_weyl_expansion_qutrit_roundtrip():
    ctx = alg.AlgebraContext.spin(make_chain(2), local_dim=3)
    rng = np.random.default_rng(7)
    A = alg.random_operator(ctx, {0, 1}, rng)
    exp = alg.pauli_expansion(A)
    assert len(exp) == 81
    assert np.allclose(alg.from_pauli_expansion(ctx, A.support, exp).block, A.block)
    assert abs(alg.conditional_expectation(A, {0}).block
               - alg.project_expansion(A, {0}).block).max() < 1e-13


def test_majorana_expansion(ferm):
    cd, c = alg.car_generators(ferm, 0)
    g1 = c + cd
    exp = alg.majorana_expansion(g1, tol=1e-14)
    assert exp == {(("g1",),): pytest.approx(1.0)}
    g2 = (cd - c) * 1j
    assert alg.majorana_expansion(g2, tol=1e-14) == {(("g2",),): pytest.approx(1.0)}
    rng = np.random.default_rng(12)
    A = alg.random_operator(ferm, {0, 1, 2}, rng)
    B = alg.from_majorana_expansion(ferm, A.support, alg.majorana_expansion(A))
    assert np.allclose(A.block, B.block)


def test_serialization_roundtrip(spin, ferm):
    rng = np.random.default_rng(13)
    for ctx in (spin, ferm):
        A = alg.random_operator(ctx, {0, 2}, rng)
        B = alg.operator_from_dict(ctx, alg.operator_to_dict(A))
        assert B.support == A.support
        assert np.allclose(A.block, B.block)
    with pytest.raises(InvalidArgument):
        alg.operator_from_dict(ferm, alg.operator_to_dict(alg.pauli(spin, {0: "X"})))


def test_embed_sparse_matches_dense(ferm, spin):
    rng = np.random.default_rng(14)
    for ctx in (spin, ferm):
        region = set(ctx.sites)
        A = alg.random_operator(ctx, {0, 2}, rng)
        assert np.allclose(alg.embed_sparse(A, region).toarray(), alg.embed(A, region).block)


# ------------------------------------------------------------------ guards

def test_dim_cap():
    ctx = alg.AlgebraContext.spin(make_chain(8), dim_cap=64)
    with pytest.raises(ResourceLimitError):
        alg.random_operator(ctx, range(7), np.random.default_rng(0))


def test_backend_guards(spin, ferm):
    with pytest.raises(UnsupportedBackend):
        alg.car_generators(spin, 0)
    with pytest.raises(UnsupportedBackend):
        alg.product_operator(ferm, {0: "X"})
    with pytest.raises(UnsupportedBackend):
        alg.pauli_expansion(alg.identity(ferm))


def test_mixed_context_arithmetic_rejected(spin):
    other = alg.AlgebraContext.spin(make_chain(4))
    with pytest.raises(InvalidArgument):
        alg.pauli(spin, {0: "X"}) + alg.pauli(other, {0: "X"})
