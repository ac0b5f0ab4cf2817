"""Property suites shared by the CLI and the acceptance tests."""
import math

import numpy as np
from scipy.special import zeta

from . import algebra as alg
from .lattice import make_chain, regularity_constant, summability_bound, summability_partial_sums


def _random_region(rng, sites, allow_empty=True):
    sites = list(sites)
    lo = 0 if allow_empty else 1
    size = int(rng.integers(lo, len(sites) + 1))
    return set(rng.choice(sites, size=size, replace=False).tolist()) if size else set()


def _record(name, errors, tol):
    err = float(max(errors)) if len(errors) else 0.0
    return {"property": name, "max_error": err, "tolerance": tol, "passed": bool(err <= tol)}


def conditional_expectation_suite(ctx, rng, samples, tol=1e-10):
    """Defining property, module property, composition, contraction, unitality, dual route."""
    sites = ctx.sites
    even = ctx.is_fermion
    defining, module, compo, contract, dual, unital, parity = [], [], [], [], [], [], []
    one = alg.identity(ctx)
    for _ in range(samples):
        M = _random_region(rng, sites)
        A = alg.random_operator(ctx, sites, rng)
        B = alg.random_operator(ctx, M, rng)
        EA = alg.conditional_expectation(A, M)
        defining.append(abs(alg.tracial_state(A @ B) - alg.tracial_state(EA @ B)))
        L = alg.random_operator(ctx, M, rng, even=even)
        R = alg.random_operator(ctx, M, rng, even=even)
        module.append(alg.op_norm(alg.conditional_expectation(L @ A @ R, M) - L @ EA @ R))
        M2 = _random_region(rng, sites)
        lhs = alg.conditional_expectation(alg.conditional_expectation(A, M2), M)
        compo.append(alg.op_norm(lhs - alg.conditional_expectation(A, M & M2)))
        contract.append(max(alg.op_norm(EA) - alg.op_norm(A), 0.0))
        dual.append(alg.op_norm(EA - alg.project_expansion(A, M)))
        unital.append(alg.op_norm(alg.conditional_expectation(one, M) - one))
        if even:
            Ae = alg.parity_part(A)
            parity.append(alg.op_norm(alg.parity_part(alg.conditional_expectation(Ae, M), odd=True)))
    tag = ctx.backend
    out = [
        _record(f"{tag}: defining property w(AB) = w(E_M(A)B)", defining, tol),
        _record(f"{tag}: module property E_M(LAR) = L E_M(A) R", module, tol),
        _record(f"{tag}: composition E_M1 E_M2 = E_(M1 & M2)", compo, tol),
        _record(f"{tag}: contraction ||E_M(A)|| <= ||A||", contract, 1e-12),
        _record(f"{tag}: unital E_M(1) = 1", unital, tol),
        _record(f"{tag}: partial trace agrees with string projection", dual, tol),
    ]
    if even:
        out.append(_record(f"{tag}: parity preserving", parity, tol))
    return out


def car_suite(ctx, rng, samples=20, tol=1e-12):
    """CAR relations on every mode pair, and even/disjoint commutation on random operators."""
    modes = [(x, i) for x in ctx.sites for i in range(1, ctx.flavors + 1)]
    gens = {m: alg.car_generators(ctx, *m) for m in modes}
    one = alg.identity(ctx)
    car = []
    for m in modes:
        for n in modes:
            cdag_n, _ = gens[n]
            _, c_m = gens[m]
            _, c_n = gens[n]
            target = one if m == n else alg.zero(ctx)
            car.append(alg.op_norm(alg.anticommutator(c_m, cdag_n) - target))
            car.append(alg.op_norm(alg.anticommutator(c_m, c_n)))
    comm = []
    sites = list(ctx.sites)
    for _ in range(samples):
        M1 = _random_region(rng, sites, allow_empty=False)
        rest = [s for s in sites if s not in M1]
        if not rest:
            continue
        M2 = _random_region(rng, rest, allow_empty=False)
        A = alg.random_operator(ctx, M1, rng, even=True)
        B = alg.random_operator(ctx, M2, rng)
        comm.append(alg.op_norm(alg.commutator(A, B)))
    # odd generators on different sites anticommute, so the even restriction is essential
    return [_record("fermion: canonical anticommutation relations", car, tol),
            _record("fermion: even A commutes with disjoint B", comm, tol)]


def algebra_suite(rng, spin_sites=6, fermion_sites=3, flavors=1, samples=100, tol=1e-10):
    spin = alg.AlgebraContext.spin(make_chain(spin_sites))
    ferm = alg.AlgebraContext.fermion(make_chain(fermion_sites), flavors=flavors)
    out = conditional_expectation_suite(spin, rng, samples, tol)
    out += conditional_expectation_suite(ferm, rng, max(samples // 5, 1), tol)
    out += car_suite(ferm, rng)
    return out


def summability_check(epsilon=1.0, r_max=1e6, D=1):
    """Partial sums of (1 + d)^-(D+1+eps) on a chain of 2 r_max + 1 sites centered at x0.

    For D = 1 the limit is 1 + 2 (zeta(2 + eps) - 1); the proof bound uses the
    volume constant measured at x0.
    """
    length = 2 * int(r_max) + 1
    graph = make_chain(length)
    x0 = graph.x0
    radii = np.unique(np.concatenate([[0.0], np.geomspace(1, r_max, 61).round()]))
    sums = summability_partial_sums(graph, x0, epsilon, radii)
    report = regularity_constant(graph, D, centers=[x0])
    bound = summability_bound(report.c_vol, D, epsilon)
    limit = 1.0 + 2.0 * (float(zeta(D + 1.0 + epsilon)) - 1.0) if D == 1 else math.nan
    monotone = bool(np.all(np.diff(sums) >= 0))
    err = abs(float(sums[-1]) - limit)
    return {"epsilon": epsilon, "r_max": r_max, "radii": radii, "partial_sums": sums,
            "limit": limit, "final": float(sums[-1]), "error": err, "monotone": monotone,
            "bound": bound, "c_vol": report.c_vol,
            "passed": bool(monotone and err <= 1e-6 and sums[-1] <= bound)}
