"""Steady-state and pattern analysis on the interconnected cell network.

Covers the homogeneous fixed point u* = T(u*), the sufficient instability
criterion lambda_min * rho(T'(u*)) < -1 with its per-mode eigenvalue table,
period-two orbits of the scalar characteristic, checkerboard construction on
bipartite graphs, and the checkerboard stability criterion
rho(T'(u1) T'(u2)) < 1 with its block eigenvalue reduction.

Both criteria are one-directional: a failed criterion never claims the
opposite verdict, it falls back to the numeric eigenvalue tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EigenSolverFailure,
    FixedPointIterationError,
    MemoryGuardError,
    NoBracketError,
    NotBipartiteError,
    NotHurwitzError,
)
from .graphs import Bipartition, ContactGraph, RandomWalkSpectrum
from .models import Characteristic
from .tolerances import DEFAULT_TOL, Tolerances

__all__ = [
    "HomogeneousState", "PeriodTwoOrbit", "ModeEigenvalues", "StabilityVerdict",
    "CheckerboardPair",
    "spectral_radius", "is_hurwitz",
    "find_homogeneous_fixed_point", "instability_test", "mode_eigenvalues",
    "find_period_two", "verify_period_two",
    "build_checkerboard", "checkerboard_stability_test",
    "homogeneous_network_jacobian", "checkerboard_network_jacobian",
    "checkerboard_block_reduction",
]

VERDICT_UNSTABLE = "unstable"
VERDICT_STABLE = "stable"
VERDICT_CRITERION_NOT_MET = "criterion_not_met"
VERDICT_INCONCLUSIVE = "inconclusive"

# Dense network Jacobians are refused beyond this many total states.
MAX_DENSE_STATES = 10_000


@dataclass(frozen=True)
class HomogeneousState:
    """Fixed point u* = T(u*) with x* = S(u*) and the local linearization."""

    u_star: np.ndarray
    x_star: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    gain_at_star: np.ndarray   # T'(u*), an io_dim x io_dim matrix
    rho: float                 # spectral radius of T'(u*)


@dataclass(frozen=True)
class PeriodTwoOrbit:
    """Pair u1 = T(u2), u2 = T(u1) with steady states and linearizations."""

    u1: np.ndarray
    u2: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    gain1: np.ndarray
    gain2: np.ndarray
    A1: np.ndarray
    B1: np.ndarray
    C1: np.ndarray
    A2: np.ndarray
    B2: np.ndarray
    C2: np.ndarray
    rho_product: float         # spectral radius of T'(u1) T'(u2)


@dataclass(frozen=True)
class ModeEigenvalues:
    """Eigenvalues of one spatial-mode block."""

    mode_value: float          # the graph eigenvalue entering the block
    eigenvalues: np.ndarray    # complex, sorted by (real, imag)
    max_real: float


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of a sufficient criterion plus the per-mode numeric table.

    ``margin`` is the signed distance past the threshold in the direction
    that satisfies the criterion; the verdict is inconclusive when it is
    within margin_tol of zero. ``numerically_unstable`` reports whether any
    mode block has an eigenvalue with real part above stab_tol, which
    decides the cases the one-directional criterion leaves open.
    """

    criterion: float
    threshold: float
    verdict: str
    margin: float
    mode_table: tuple[ModeEigenvalues, ...] = ()
    numerically_unstable: bool | None = None


@dataclass(frozen=True)
class CheckerboardPair:
    """The two alternating steady states built from one period-two orbit."""

    states_a: np.ndarray       # (N, n); orbit point 1 on set_a
    states_b: np.ndarray       # (N, n); orbit point 2 on set_a
    residual_a: float
    residual_b: float


# -- linear-algebra helpers -----------------------------------------------------

def spectral_radius(m) -> float:
    """Largest eigenvalue magnitude.

    Entrywise-nonnegative matrices go through power iteration first (their
    spectral radius is an eigenvalue reached from a positive start vector),
    falling back to the dense solver on slow convergence.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if not np.all(np.isfinite(m)):
        raise EigenSolverFailure("matrix has non-finite entries")
    if np.all(m >= 0.0):
        v = np.ones(m.shape[0])
        r_prev = 0.0
        for _ in range(200):
            w = m @ v
            norm = float(np.linalg.norm(w))
            if norm == 0.0:
                return 0.0
            v = w / norm
            r = float(v @ (m @ v))
            if abs(r - r_prev) <= 1e-14 * max(1.0, r):
                residual = float(np.linalg.norm(m @ v - r * v))
                if residual <= 1e-10 * max(1.0, r):
                    return r
            r_prev = r
    try:
        return float(np.max(np.abs(np.linalg.eigvals(m))))
    except np.linalg.LinAlgError as exc:
        raise EigenSolverFailure(f"eigvals did not converge: {exc}") from exc


def is_hurwitz(m, tol: float = 0.0) -> bool:
    return float(np.linalg.eigvals(m).real.max()) < -tol


def _sorted_eigs(eig: np.ndarray) -> np.ndarray:
    order = np.lexsort((eig.imag, eig.real))
    return eig[order]


# -- homogeneous fixed point -----------------------------------------------------

def find_homogeneous_fixed_point(c: Characteristic,
                                 tol: Tolerances = DEFAULT_TOL) -> HomogeneousState:
    """Solve u* = T(u*).

    Scalar case: bisection of T(u) - u on [0, T(0)], which brackets by the
    nonincreasing property (a lost bracket signals a non-monotone model).
    Multi-input case: damped fixed-point iteration with Newton polish; the
    underlying theory guarantees neither existence nor uniqueness there, so
    failure is reported with the iterate trace rather than guessed around.
    """
    if c.model.io_dim == 1:
        u_star = _scalar_fixed_point(c, tol)
    else:
        u_star = _multi_fixed_point(c, tol)
    x_star = c.steady_state(u_star)
    a, b, cc = c.jacobians_at(u_star)
    gain = c.gain(u_star)
    return HomogeneousState(u_star=u_star, x_star=x_star, A=a, B=b, C=cc,
                            gain_at_star=gain, rho=spectral_radius(gain))


def _scalar_fixed_point(c: Characteristic, tol: Tolerances) -> np.ndarray:
    cap = float(c.input_cap()[0])
    if cap <= tol.fp_tol:
        return np.zeros(1)

    def phi(u: float) -> float:
        return float(c.steady_output(np.array([u]))[0]) - u

    lo, hi = 0.0, cap
    phi_lo, phi_hi = phi(lo), phi(hi)
    if phi_lo < -tol.fp_tol or phi_hi > tol.fp_tol:
        raise NoBracketError(
            f"T(u) - u does not bracket on [0, T(0)] (endpoints {phi_lo:.3e}, "
            f"{phi_hi:.3e}); the scalar characteristic is not nonincreasing")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = phi(mid)
        if abs(val) <= 0.5 * tol.fp_tol or hi - lo <= 1e-16 * max(1.0, cap):
            return np.array([mid])
        if val > 0:
            lo = mid
        else:
            hi = mid
    return np.array([0.5 * (lo + hi)])


def _multi_fixed_point(c: Characteristic, tol: Tolerances,
                       damping: float = 0.5, max_iter: int = 400) -> np.ndarray:
    cap = c.input_cap()    # iterates stay in [0, T(0)] componentwise
    u = 0.5 * cap
    trace = [u.copy()]
    for _ in range(max_iter):
        t_u = c.steady_output(u)
        if float(np.max(np.abs(t_u - u))) <= tol.fp_tol:
            return u
        u = np.clip((1.0 - damping) * u + damping * t_u, 0.0, cap)
        trace.append(u.copy())
    # Newton polish on u - T(u) = 0
    for _ in range(60):
        residual = c.steady_output(u) - u
        if float(np.max(np.abs(residual))) <= tol.fp_tol:
            return u
        jac = np.eye(c.model.io_dim) - c.gain(u)
        try:
            u = np.clip(u + np.linalg.solve(jac, residual), 0.0, cap)
        except np.linalg.LinAlgError as exc:
            raise FixedPointIterationError(
                f"Newton polish hit a singular system: {exc}", trace) from exc
        trace.append(u.copy())
    raise FixedPointIterationError(
        "multi-input fixed-point iteration did not converge "
        f"(last residual {float(np.max(np.abs(c.steady_output(u) - u))):.3e})",
        trace)


# -- instability of the homogeneous state -----------------------------------------

def instability_test(spec: RandomWalkSpectrum, hs: HomogeneousState,
                     tol: Tolerances = DEFAULT_TOL) -> StabilityVerdict:
    """Sufficient instability criterion lambda_min * rho(T'(u*)) < -1.

    The criterion is one-directional: when it is not met the verdict is
    ``criterion_not_met`` (never "stable") and the per-mode eigenvalue
    table decides numerically.
    """
    lam_min = spec.lambda_min
    value = lam_min * hs.rho
    margin = -1.0 - value
    if abs(margin) <= tol.margin_tol:
        verdict = VERDICT_INCONCLUSIVE
    elif margin > 0:
        verdict = VERDICT_UNSTABLE
    else:
        verdict = VERDICT_CRITERION_NOT_MET
    table = mode_eigenvalues(hs, spec)
    numerically_unstable = any(row.max_real > tol.stab_tol for row in table)
    return StabilityVerdict(criterion=value, threshold=-1.0, verdict=verdict,
                            margin=margin, mode_table=table,
                            numerically_unstable=numerically_unstable)


def mode_eigenvalues(hs: HomogeneousState,
                     spec: RandomWalkSpectrum) -> tuple[ModeEigenvalues, ...]:
    """Eigenvalues of A + lambda_k B C for every graph eigenvalue lambda_k."""
    bc = hs.B @ hs.C
    rows = []
    for lam in spec.eigenvalues:
        try:
            eig = _sorted_eigs(np.linalg.eigvals(hs.A + float(lam) * bc))
        except np.linalg.LinAlgError as exc:
            raise EigenSolverFailure(f"mode eigensolve failed: {exc}") from exc
        rows.append(ModeEigenvalues(mode_value=float(lam), eigenvalues=eig,
                                    max_real=float(eig.real.max())))
    return tuple(rows)


# -- period-two orbits of the scalar characteristic --------------------------------

def find_period_two(c: Characteristic, tol: Tolerances = DEFAULT_TOL,
                    hs: HomogeneousState | None = None,
                    grid_points: int = 512) -> PeriodTwoOrbit | None:
    """Scan [0, T(0)] for period-two orbits of the scalar characteristic.

    Roots of T(T(u)) - u are bracketed on a uniform grid and bisected; the
    root at u* is excluded. Among multiple orbits the one minimizing
    T'(u1) T'(u2) is returned (at least one such pair has product < 1 when
    the homogeneous state is unstable). None is a valid outcome.
    """
    if c.model.io_dim != 1:
        raise FixedPointIterationError(
            "period-two search is only bracketed for single-input models; "
            "verify externally supplied candidates instead")
    if hs is None:
        hs = find_homogeneous_fixed_point(c, tol)
    u_star = float(hs.u_star[0])
    cap = float(c.input_cap()[0])
    if cap <= tol.fp_tol:
        return None

    def t_scalar(u: float) -> float:
        return float(c.steady_output(np.array([u]))[0])

    def psi(u: float) -> float:
        return t_scalar(t_scalar(u)) - u

    grid = np.linspace(0.0, cap, grid_points)
    values = np.array([psi(u) for u in grid])
    roots: list[float] = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0.0:
            roots.append(_bisect(psi, float(a), float(b), fa, tol.fp_tol))
    if values[-1] == 0.0:
        roots.append(float(grid[-1]))

    pairs: dict[tuple[float, float], tuple[float, float]] = {}
    for root in roots:
        if abs(root - u_star) <= tol.separation_tol:
            continue
        partner = t_scalar(root)
        if abs(partner - root) <= tol.separation_tol:
            continue
        key = (round(min(root, partner), 9), round(max(root, partner), 9))
        pairs.setdefault(key, (min(root, partner), max(root, partner)))
    if not pairs:
        return None

    best: PeriodTwoOrbit | None = None
    for u1, u2 in pairs.values():
        orbit = verify_period_two(c, np.array([u1]), np.array([u2]), tol)
        if best is None or orbit.rho_product < best.rho_product:
            best = orbit
    return best


def _bisect(fun, lo: float, hi: float, f_lo: float, tol: float,
            max_iter: int = 200) -> float:
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = fun(mid)
        if abs(val) <= 0.1 * tol or hi - lo <= 1e-15 * max(1.0, abs(mid)):
            return mid
        if (val > 0) == (f_lo > 0):
            lo, f_lo = mid, val
        else:
            hi = mid
    return 0.5 * (lo + hi)


def verify_period_two(c: Characteristic, u1, u2,
                      tol: Tolerances = DEFAULT_TOL,
                      refine: bool = False) -> PeriodTwoOrbit:
    """Check u1 = T(u2), u2 = T(u1) for supplied candidates and package the
    orbit. With ``refine`` a Newton step polishes the candidates first
    (useful for externally computed multi-input pairs)."""
    u1 = np.atleast_1d(np.asarray(u1, dtype=float))
    u2 = np.atleast_1d(np.asarray(u2, dtype=float))
    if refine:
        u1, u2 = _refine_orbit(c, u1, u2, tol)
    res1 = float(np.max(np.abs(c.steady_output(u2) - u1)))
    res2 = float(np.max(np.abs(c.steady_output(u1) - u2)))
    if max(res1, res2) > tol.fp_tol:
        raise FixedPointIterationError(
            f"candidate pair is not a period-two orbit (residuals {res1:.3e}, "
            f"{res2:.3e} exceed {tol.fp_tol:.1e})")
    if float(np.max(np.abs(u1 - u2))) <= tol.separation_tol:
        raise FixedPointIterationError(
            "candidate pair collapses onto a fixed point (separation below "
            f"{tol.separation_tol:.1e})")
    x1 = c.steady_state(u1)
    x2 = c.steady_state(u2)
    a1, b1, c1 = c.jacobians_at(u1)
    a2, b2, c2 = c.jacobians_at(u2)
    gain1 = c.gain(u1)
    gain2 = c.gain(u2)
    return PeriodTwoOrbit(u1=u1, u2=u2, x1=x1, x2=x2, gain1=gain1, gain2=gain2,
                          A1=a1, B1=b1, C1=c1, A2=a2, B2=b2, C2=c2,
                          rho_product=spectral_radius(gain1 @ gain2))


def _refine_orbit(c: Characteristic, u1, u2, tol: Tolerances, max_iter: int = 40):
    m = c.model.io_dim
    for _ in range(max_iter):
        r1 = c.steady_output(u2) - u1
        r2 = c.steady_output(u1) - u2
        if max(float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))) <= tol.fp_tol:
            break
        g1 = c.gain(u1)
        g2 = c.gain(u2)
        jac = np.block([[-np.eye(m), g2], [g1, -np.eye(m)]])
        step = np.linalg.solve(jac, -np.concatenate([r1, r2]))
        u1 = np.clip(u1 + step[:m], 0.0, None)
        u2 = np.clip(u2 + step[m:], 0.0, None)
    return u1, u2


# -- checkerboard patterns ----------------------------------------------------------

def build_checkerboard(g: ContactGraph, bp: Bipartition | None,
                       orbit: PeriodTwoOrbit, c: Characteristic,
                       tol: Tolerances = DEFAULT_TOL) -> CheckerboardPair:
    """Assemble both alternating steady states and verify their residuals.

    Each cell on one side of the bipartition sits at one orbit steady state;
    the neighbor-averaged inputs then reproduce the orbit exactly, so the
    full-network residual must vanish to solver precision.
    """
    from .sim import network_rhs  # local import; sim depends on graphs/models only

    if bp is None:
        raise NotBipartiteError("checkerboard patterns need a bipartite graph")
    n = c.model.state_dim
    states_a = np.empty((g.node_count, n))
    states_b = np.empty((g.node_count, n))
    for i in range(g.node_count):
        on_a = i in bp.set_a
        states_a[i] = orbit.x1 if on_a else orbit.x2
        states_b[i] = orbit.x2 if on_a else orbit.x1
    residual_a = float(np.max(np.abs(network_rhs(g, c.model, states_a))))
    residual_b = float(np.max(np.abs(network_rhs(g, c.model, states_b))))
    bound = 10.0 * tol.ss_tol
    if max(residual_a, residual_b) > bound:
        raise FixedPointIterationError(
            f"checkerboard residuals ({residual_a:.3e}, {residual_b:.3e}) exceed "
            f"{bound:.1e}; orbit and graph are inconsistent")
    return CheckerboardPair(states_a=states_a, states_b=states_b,
                            residual_a=residual_a, residual_b=residual_b)


def checkerboard_stability_test(orbit: PeriodTwoOrbit,
                                spec: RandomWalkSpectrum | None = None,
                                tol: Tolerances = DEFAULT_TOL) -> StabilityVerdict:
    """Sufficient stability criterion rho(T'(u1) T'(u2)) < 1 for checkerboards.

    One-directional: above the threshold the verdict is ``criterion_not_met``;
    exactly at it, ``inconclusive``. When the graph spectrum is supplied, the
    per-block eigenvalue table over its positive eigenvalues is attached.
    """
    for name, a in (("first", orbit.A1), ("second", orbit.A2)):
        if not is_hurwitz(a):
            raise NotHurwitzError(f"state Jacobian at the {name} orbit point is "
                                  "not Hurwitz")
    value = orbit.rho_product
    margin = 1.0 - value
    if abs(margin) <= tol.margin_tol:
        verdict = VERDICT_INCONCLUSIVE
    elif margin > 0:
        verdict = VERDICT_STABLE
    else:
        verdict = VERDICT_CRITERION_NOT_MET
    table: tuple[ModeEigenvalues, ...] = ()
    numerically_unstable = None
    if spec is not None:
        rows = []
        for lam in spec.positive_eigenvalues():
            block = _checkerboard_block(orbit, float(lam))
            eig = _sorted_eigs(np.linalg.eigvals(block))
            rows.append(ModeEigenvalues(mode_value=float(lam), eigenvalues=eig,
                                        max_real=float(eig.real.max())))
        table = tuple(rows)
        numerically_unstable = any(row.max_real > tol.stab_tol for row in table)
    return StabilityVerdict(criterion=value, threshold=1.0, verdict=verdict,
                            margin=margin, mode_table=table,
                            numerically_unstable=numerically_unstable)


def _checkerboard_block(orbit: PeriodTwoOrbit, lam: float) -> np.ndarray:
    top = np.hstack([orbit.A1, lam * orbit.B1 @ orbit.C2])
    bottom = np.hstack([lam * orbit.B2 @ orbit.C1, orbit.A2])
    return np.vstack([top, bottom])


# -- dense network Jacobians (cross-checks) -------------------------------------------

def homogeneous_network_jacobian(g: ContactGraph, hs: HomogeneousState,
                                 p: np.ndarray | None = None) -> np.ndarray:
    """Dense I_N (x) A + P (x) (BC) at the homogeneous steady state."""
    n = hs.A.shape[0]
    _guard_dense(g.node_count, n)
    if p is None:
        from .graphs import random_walk_matrix
        p = random_walk_matrix(g)
    return np.kron(np.eye(g.node_count), hs.A) + np.kron(p, hs.B @ hs.C)


def checkerboard_network_jacobian(g: ContactGraph, bp: Bipartition,
                                  orbit: PeriodTwoOrbit) -> tuple[np.ndarray, tuple[int, ...]]:
    """Dense Jacobian at the checkerboard with cells reordered set_a then set_b.

    Returns the matrix and the node order used, so callers can permute
    network states consistently.
    """
    n = orbit.A1.shape[0]
    _guard_dense(g.node_count, n)
    order = tuple(bp.set_a) + tuple(bp.set_b)
    from .graphs import random_walk_matrix
    p = random_walk_matrix(g)[np.ix_(order, order)]
    n_a = len(bp.set_a)
    p12 = p[:n_a, n_a:]
    p21 = p[n_a:, :n_a]
    if np.any(p[:n_a, :n_a]) or np.any(p[n_a:, n_a:]):
        raise NotBipartiteError("bipartition has an edge inside one set")
    top = np.hstack([np.kron(np.eye(n_a), orbit.A1),
                     np.kron(p12, orbit.B1 @ orbit.C2)])
    bottom = np.hstack([np.kron(p21, orbit.B2 @ orbit.C1),
                        np.kron(np.eye(g.node_count - n_a), orbit.A2)])
    return np.vstack([top, bottom]), order


def checkerboard_block_reduction(spec: RandomWalkSpectrum, bp: Bipartition,
                                 orbit: PeriodTwoOrbit,
                                 pos_tol: float = 1e-9) -> np.ndarray:
    """Eigenvalue multiset predicted by the block reduction of the
    checkerboard Jacobian: one 2n-block per strictly positive graph
    eigenvalue, plus copies of eig(A1) and eig(A2) for the null modes."""
    positive = spec.positive_eigenvalues(pos_tol)
    r = len(positive)
    n3 = len(bp.set_a) - r
    n4 = len(bp.set_b) - r
    if n3 < 0 or n4 < 0:
        raise EigenSolverFailure(
            "positive spectrum larger than a bipartition side; spectrum and "
            "bipartition disagree")
    chunks = [np.linalg.eigvals(_checkerboard_block(orbit, float(lam)))
              for lam in positive]
    chunks += [np.linalg.eigvals(orbit.A1)] * n3
    chunks += [np.linalg.eigvals(orbit.A2)] * n4
    return _sorted_eigs(np.concatenate(chunks))


def _guard_dense(node_count: int, state_dim: int) -> None:
    total = node_count * state_dim
    if total > MAX_DENSE_STATES:
        raise MemoryGuardError(
            f"dense assembly refused for {total} total states "
            f"(limit {MAX_DENSE_STATES})")
