"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to get one pass/fail line
per criterion.
"""

import time

import numpy as np

from conftest import (
    CASCADE9_U_STAR,
    GOLDEN_FIXED_POINT,
    ORBIT9_PRODUCT,
    ORBIT9_U1,
    ORBIT9_U2,
    assert_eig_multisets_close,
    canonical_notch,
    pinned_cascade,
    random_hurwitz_monotone_system,
)
from latpat.analysis import (
    HomogeneousState,
    PeriodTwoOrbit,
    build_checkerboard,
    checkerboard_block_reduction,
    checkerboard_network_jacobian,
    find_homogeneous_fixed_point,
    find_period_two,
    homogeneous_network_jacobian,
    instability_test,
    mode_eigenvalues,
    spectral_radius,
)
from latpat.errors import GaugeViolationError
from latpat.graphs import (
    bipartition,
    cartesian_product,
    complete_bipartite,
    cycle_graph,
    grid_graph,
    path_graph,
    random_connected_bipartite,
    random_connected_graph,
    spectrum,
)
from latpat.models import (
    Characteristic,
    HillParams,
    cascade_model,
    fd_jacobian,
    notch_restricted_domain,
)
from latpat.monotone import (
    build_incidence_graph,
    certify_sign_pattern,
    excitability_transparency,
)
from latpat.sim import (
    PatternReferences,
    integrate,
    order_preservation_check,
    perturbed_homogeneous_start,
)


def _report(number: int, detail: str) -> None:
    print(f"PASS criterion {number}: {detail}")


def test_criterion_01_spectral_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    graphs = [path_graph(2), path_graph(5), cycle_graph(4), cycle_graph(5),
              grid_graph(2, 3), grid_graph(3, 3), complete_bipartite(2, 3),
              complete_bipartite(1, 4),
              cartesian_product(path_graph(2), cycle_graph(4)),
              cartesian_product(cycle_graph(3), path_graph(2))]
    for i in range(50):
        n = int(rng.integers(2, 31))
        graphs.append(random_connected_bipartite(n, rng) if i % 2 == 0
                      else random_connected_graph(n, rng))
    for g in graphs:
        spec = spectrum(g)
        assert np.max(np.abs(spec.matrix.sum(axis=1) - 1.0)) <= 1e-12
        assert np.all(spec.eigenvalues >= -1.0 - 1e-9)
        assert np.all(spec.eigenvalues <= 1.0 + 1e-9)
        assert abs(spec.eigenvalues[0] - 1.0) <= 1e-9
        is_bip = bipartition(g) is not None
        assert is_bip == (abs(spec.lambda_min + 1.0) <= 1e-9)
        if is_bip:
            v = spec.mode_min
            for a, b in g.edges:
                assert v[a] * v[b] < 0.0
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    _report(1, f"{len(graphs)} graphs checked in {elapsed:.2f}s")


def test_criterion_02_kronecker_mode_identity():
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    for _ in range(100):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        a, b, c = random_hurwitz_monotone_system(rng, n, m)
        g = random_connected_graph(int(rng.integers(2, 7)), rng)
        spec = spectrum(g)
        hs = HomogeneousState(u_star=np.zeros(m), x_star=np.zeros(n),
                              A=a, B=b, C=c,
                              gain_at_star=-c @ np.linalg.solve(a, b),
                              rho=0.0)
        union = np.concatenate([row.eigenvalues
                                for row in mode_eigenvalues(hs, spec)])
        dense = np.linalg.eigvals(homogeneous_network_jacobian(g, hs))
        assert_eig_multisets_close(union, dense, tol=1e-6)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _report(2, f"100 random instances matched in {elapsed:.2f}s")


def test_criterion_03_characteristic_identity():
    start = time.perf_counter()
    rng = np.random.default_rng(5150)
    for model in (pinned_cascade(9.0), canonical_notch()):
        char = Characteristic(model)
        lo, hi = model.input_domain.sampling_bounds(margin=0.0)
        for _ in range(50):
            u = lo + (0.05 + 0.9 * rng.random(model.io_dim)) * (hi - lo)
            gain = char.gain(u)
            fd = fd_jacobian(char.steady_output, u)
            rel = np.max(np.abs(fd - gain)) / max(1.0, float(np.max(np.abs(gain))))
            assert rel <= 1e-4
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _report(3, f"both models, 50 points each, in {elapsed:.2f}s")


def test_criterion_04_fixed_point_and_orbit_oracles():
    golden_model = cascade_model([1.0], [HillParams(1.0, 1.0, 1.0, "inhibiting")])
    hs_golden = find_homogeneous_fixed_point(Characteristic(golden_model))
    assert abs(float(hs_golden.u_star[0]) - GOLDEN_FIXED_POINT) <= 1e-9

    # independent bisection oracle for the cubic u^3 + u - 9 = 0
    lo, hi = 0.0, 9.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid ** 3 + mid - 9.0 > 0.0:
            hi = mid
        else:
            lo = mid
    cubic_root = 0.5 * (lo + hi)
    assert abs(cubic_root - CASCADE9_U_STAR) <= 1e-12

    char = Characteristic(pinned_cascade(9.0))
    hs = find_homogeneous_fixed_point(char)
    assert abs(float(hs.u_star[0]) - cubic_root) <= 1e-9
    assert hs.rho > 1.0

    orbit = find_period_two(char, hs=hs)
    assert orbit is not None
    u1, u2 = float(orbit.u1[0]), float(orbit.u2[0])
    t = lambda u: float(char.steady_output(np.array([u]))[0])
    assert abs(t(u1) - u2) <= 1e-10
    assert abs(t(u2) - u1) <= 1e-10
    assert abs(u1 - ORBIT9_U1) <= 1e-8
    assert abs(u2 - ORBIT9_U2) <= 1e-8
    assert abs(orbit.rho_product - ORBIT9_PRODUCT) <= 1e-8
    _report(4, f"u*={float(hs.u_star[0]):.10f}, orbit=({u1:.10f}, {u2:.10f})")


def test_criterion_05_checkerboard_residuals_and_swap():
    char = Characteristic(pinned_cascade(9.0))
    orbit = find_period_two(char)
    for g in (cycle_graph(4), grid_graph(2, 3)):
        bp = bipartition(g)
        cb = build_checkerboard(g, bp, orbit, char)
        assert max(cb.residual_a, cb.residual_b) <= 1e-8
        # swap symmetry: exchanging the two classes exchanges the two states
        for i in range(g.node_count):
            j_state = cb.states_b[i]
            swapped = orbit.x2 if i in bp.set_a else orbit.x1
            assert np.allclose(j_state, swapped, atol=0.0)
            assert np.allclose(cb.states_a[i],
                               orbit.x1 if i in bp.set_a else orbit.x2,
                               atol=0.0)
    _report(5, "cycle(4) and grid(2,3) residuals below 1e-8, swap exact")


def test_criterion_06_checkerboard_block_identity():
    rng = np.random.default_rng(4242)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        a1, b1, c1 = random_hurwitz_monotone_system(rng, n, m)
        a2, b2, c2 = random_hurwitz_monotone_system(rng, n, m)
        orbit = PeriodTwoOrbit(
            u1=np.zeros(m), u2=np.ones(m), x1=np.zeros(n), x2=np.ones(n),
            gain1=-c1 @ np.linalg.solve(a1, b1),
            gain2=-c2 @ np.linalg.solve(a2, b2),
            A1=a1, B1=b1, C1=c1, A2=a2, B2=b2, C2=c2, rho_product=0.0)
        g = random_connected_bipartite(int(rng.integers(2, 9)), rng)
        bp = bipartition(g)
        dense, _ = checkerboard_network_jacobian(g, bp, orbit)
        predicted = checkerboard_block_reduction(spectrum(g), bp, orbit)
        assert_eig_multisets_close(np.linalg.eigvals(dense), predicted, tol=1e-6)
    _report(6, "20 random bipartite instances matched within 1e-6")


def test_criterion_07_certification_regressions():
    model = canonical_notch()
    pattern = certify_sign_pattern(model)
    assert pattern.epsilon == (1, 1, 0)
    assert pattern.delta == (0, 0)
    assert pattern.mu == (1, 1)

    ig = build_incidence_graph(model, domain=notch_restricted_domain(model))
    assert ig.edge_pairs() == {("u0", "x0"), ("u1", "x1"), ("x0", "x1"),
                               ("x0", "y1"), ("x1", "y0")}
    flags = excitability_transparency(ig)
    assert flags[0].excitable and flags[0].transparent

    even = cascade_model(
        [1.0, 1.0],
        [HillParams(2.0, 1.0, 1.0, "activating"),
         HillParams(2.0, 1.0, 1.0, "activating")])
    try:
        certify_sign_pattern(even)
        raise AssertionError("even-inhibition cascade must fail the gauge")
    except GaugeViolationError:
        pass
    _report(7, "patterns, incidence edges, reachability, gauge failure")


def test_criterion_08_dynamics_consistency():
    start = time.perf_counter()
    g = cycle_graph(4)
    spec = spectrum(g)

    unstable_model = pinned_cascade(9.0)
    char = Characteristic(unstable_model)
    hs = find_homogeneous_fixed_point(char)
    verdict = instability_test(spec, hs)
    assert verdict.verdict == "unstable"
    orbit = find_period_two(char, hs=hs)
    cb = build_checkerboard(g, bipartition(g), orbit, char)
    refs = PatternReferences(homogeneous=np.tile(hs.x_star, (4, 1)),
                             checkerboard_a=cb.states_a,
                             checkerboard_b=cb.states_b)
    res = integrate(g, unstable_model, perturbed_homogeneous_start(spec, hs.x_star),
                    horizon=200.0, references=refs)
    assert res.classification in ("checkerboard_a", "checkerboard_b")
    assert res.distance <= 1e-6

    stable_model = pinned_cascade(1.0)
    char_s = Characteristic(stable_model)
    hs_s = find_homogeneous_fixed_point(char_s)
    verdict_s = instability_test(spec, hs_s)
    assert verdict_s.verdict == "criterion_not_met"
    refs_s = PatternReferences(homogeneous=np.tile(hs_s.x_star, (4, 1)))
    res_s = integrate(g, stable_model,
                      perturbed_homogeneous_start(spec, hs_s.x_star),
                      horizon=200.0, references=refs_s)
    assert res_s.classification == "homogeneous"
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _report(8, f"checkerboard at distance {res.distance:.2e}; stable regime "
               f"returned home; {elapsed:.2f}s")


def test_criterion_09_monotone_order_preservation():
    model = canonical_notch()
    pattern = certify_sign_pattern(model)
    restriction = notch_restricted_domain(model)
    for g, seed in ((path_graph(2), 101), (grid_graph(2, 3), 202)):
        res = order_preservation_check(g, model, pattern.epsilon, pairs=20,
                                       horizon=10.0, seed=seed,
                                       restriction=restriction)
        assert res.pairs_checked == 20
        assert res.ok and not res.violations
        assert res.strict_ok
    _report(9, "40 ordered pairs maintained the signed product order")


def test_criterion_10_dc_gain_property():
    rng = np.random.default_rng(31337)
    checked = 0
    trials = 0
    while checked < 200 and trials < 400:
        trials += 1
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 3))
        a, b, c = random_hurwitz_monotone_system(rng, n, m)
        gain_matrix = -(np.eye(m) + c @ np.linalg.solve(a, b))
        worst_open = float(np.linalg.eigvals(gain_matrix).real.max())
        worst_closed = float(np.linalg.eigvals(a + b @ c).real.max())
        if abs(worst_open) <= 1e-9:
            continue   # boundary: the statement makes no claim
        checked += 1
        if worst_open < 0.0:
            assert worst_closed < 0.0, "dc-gain Hurwitz but closed loop is not"
        else:
            assert worst_closed > 0.0, "dc-gain unstable but closed loop is not"
    assert checked >= 200
    _report(10, f"{checked} sign-structured systems, zero counterexamples")
