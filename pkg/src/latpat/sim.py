"""Network integration, pattern classification, and ensemble experiments.

The network couples identical cells through neighbor averaging of their
outputs; the right-hand side never materializes a Kronecker product. A
fixed-step RK4 integrator is the default, with adaptive RKF45 available.
Trajectories that leave the invariant state domain by more than a roundoff
slack abort (that distinguishes model errors from discretization noise);
marginal violations are projected back.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainViolationError, NotBipartiteError, StepFailureError
from .graphs import ContactGraph, RandomWalkSpectrum, bipartition, random_walk_matrix
from .models import CellModel
from .tolerances import DEFAULT_TOL, Tolerances

__all__ = [
    "SimulationResult", "PatternReferences", "EnsembleStats",
    "OrderCheckResult", "OrderWitness",
    "network_rhs", "integrate", "integrate_cell",
    "perturbed_homogeneous_start", "ensemble_converge",
    "order_preservation_check", "order_sign_matrix", "is_ordered_pair",
    "classify_state",
]

CLASS_HOMOGENEOUS = "homogeneous"
CLASS_CHECKERBOARD_A = "checkerboard_a"
CLASS_CHECKERBOARD_B = "checkerboard_b"
CLASS_OTHER = "other"


@dataclass(frozen=True)
class PatternReferences:
    """Predicted steady states a final state is classified against."""

    homogeneous: np.ndarray                 # (N, n)
    checkerboard_a: np.ndarray | None = None
    checkerboard_b: np.ndarray | None = None


@dataclass(frozen=True)
class SimulationResult:
    times: np.ndarray            # decimated sample times
    states: np.ndarray           # (len(times), N, n)
    final_state: np.ndarray      # (N, n)
    final_time: float
    converged: bool
    residual: float              # max-norm of the network RHS at the final state
    steps: int
    classification: str | None = None
    distance: float | None = None


@dataclass(frozen=True)
class EnsembleStats:
    trials: int
    converged: int
    fraction_converged: float
    histogram: dict[str, int]
    max_residual: float
    failures: tuple[tuple[int, str], ...] = ()


@dataclass(frozen=True)
class OrderWitness:
    time: float
    cell: int
    coordinate: int
    value: float


@dataclass(frozen=True)
class OrderCheckResult:
    ok: bool
    pairs_checked: int
    violations: tuple[OrderWitness, ...]
    strict_ok: bool
    strict_violations: tuple[OrderWitness, ...] = ()


# -- network right-hand side -------------------------------------------------

def network_rhs(g: ContactGraph, model: CellModel, states,
                p: np.ndarray | None = None, check_domain: bool = True,
                proj_tol: float = 1e-12) -> np.ndarray:
    """Stacked cell dynamics with inputs u_i = average of neighbor outputs."""
    x = np.asarray(states, dtype=float)
    flat = x.ndim == 1
    x = x.reshape(g.node_count, model.state_dim)
    if check_domain:
        worst = max(model.state_domain.violation(x[i])
                    for i in range(g.node_count))
        if worst > proj_tol:
            raise DomainViolationError(
                f"network state leaves the invariant domain by {worst:.3e}")
    if p is None:
        p = random_walk_matrix(g)
    if model.vectorized:
        y = model.h(x)
        u = p @ y
        xdot = model.f(x, u)
    else:
        y = np.stack([model.h(x[i]) for i in range(g.node_count)])
        u = p @ y
        xdot = np.stack([model.f(x[i], u[i]) for i in range(g.node_count)])
    return xdot.ravel() if flat else xdot


def _make_flat_rhs(g: ContactGraph, model: CellModel):
    p = random_walk_matrix(g)
    shape = (g.node_count, model.state_dim)
    if model.vectorized:
        def rhs(z):
            x = z.reshape(shape)
            return model.f(x, p @ model.h(x)).ravel()
    else:
        def rhs(z):
            x = z.reshape(shape)
            y = np.stack([model.h(x[i]) for i in range(shape[0])])
            u = p @ y
            return np.stack([model.f(x[i], u[i]) for i in range(shape[0])]).ravel()
    return rhs


class _DomainGuard:
    """Vectorized per-cell domain check: project roundoff-level violations,
    abort on real ones."""

    def __init__(self, model: CellModel, proj_tol: float):
        self.model = model
        self.proj_tol = proj_tol
        self.lower = np.asarray(model.state_domain.lower)
        self.upper = np.asarray(model.state_domain.upper)
        self.constraints = [(np.asarray(a, dtype=float), float(b))
                            for a, b in model.state_domain.constraints]

    def worst(self, x: np.ndarray) -> float:
        v = max(float(np.max(self.lower - x, initial=0.0)),
                float(np.max(x - self.upper, initial=0.0)))
        for a, b in self.constraints:
            v = max(v, float(np.max(b - x @ a)))
        return max(v, 0.0)

    def apply(self, x: np.ndarray, time: float) -> np.ndarray:
        worst = self.worst(x)
        if worst == 0.0:
            return x
        if worst > self.proj_tol:
            raise DomainViolationError(
                f"state left the invariant domain by {worst:.3e} at t={time:.6g}")
        return np.stack([self.model.state_domain.project(x[i])
                         for i in range(x.shape[0])])


# -- integrators ----------------------------------------------------------------

_RKF45_A = (
    (),
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_RKF45_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0,
             -9.0 / 50.0, 2.0 / 55.0)
_RKF45_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0)


def _rk4_step(rhs, z: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(z)
    k2 = rhs(z + 0.5 * h * k1)
    k3 = rhs(z + 0.5 * h * k2)
    k4 = rhs(z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rkf45_step(rhs, z: np.ndarray, h: float):
    ks = [rhs(z)]
    for row in _RKF45_A[1:]:
        zi = z + h * sum(a * k for a, k in zip(row, ks))
        ks.append(rhs(zi))
    z5 = z + h * sum(b * k for b, k in zip(_RKF45_B5, ks))
    z4 = z + h * sum(b * k for b, k in zip(_RKF45_B4, ks))
    return z5, z5 - z4


def integrate(g: ContactGraph, model: CellModel, x0, horizon: float,
              method: str = "rk4", dt: float = 0.01,
              rtol: float = 1e-8, atol: float = 1e-10,
              references: PatternReferences | None = None,
              decimation: int = 10, early_exit: bool = True,
              tol: Tolerances = DEFAULT_TOL) -> SimulationResult:
    """Integrate the network from ``x0`` over ``horizon``.

    Exits early once the network residual stays below sim_ss_tol for ten
    consecutive recorded samples (disable with ``early_exit=False`` when a
    full fixed time grid is needed). The final state is classified against
    the supplied reference patterns (within class_tol) when given.
    """
    if horizon <= 0:
        raise StepFailureError("horizon must be positive")
    shape = (g.node_count, model.state_dim)
    guard = _DomainGuard(model, tol.proj_tol)
    z = guard.apply(np.asarray(x0, dtype=float).reshape(shape), 0.0)
    rhs = _make_flat_rhs(g, model)
    flat = z.ravel()

    times = [0.0]
    samples = [flat.copy()]
    quiet = 0
    steps = 0
    converged = False
    t = 0.0

    def record(t_now: float, z_now: np.ndarray) -> bool:
        nonlocal quiet
        times.append(t_now)
        samples.append(z_now.copy())
        if not early_exit:
            return False
        if float(np.max(np.abs(rhs(z_now)))) <= tol.sim_ss_tol:
            quiet += 1
        else:
            quiet = 0
        return quiet >= 10

    if method == "rk4":
        n_steps = int(np.ceil(horizon / dt))
        for k in range(n_steps):
            h = min(dt, horizon - t)
            flat = _rk4_step(rhs, flat, h)
            t += h
            steps += 1
            flat = guard.apply(flat.reshape(shape), t).ravel()
            if (k + 1) % decimation == 0 or t >= horizon:
                if record(t, flat):
                    converged = True
                    break
    elif method == "rkf45":
        h = min(dt, horizon)
        h_min = 1e-12 * max(1.0, horizon)
        accepted = 0
        while t < horizon:
            h = min(h, horizon - t)
            trial, err = _rkf45_step(rhs, flat, h)
            scale = atol + rtol * np.maximum(np.abs(flat), np.abs(trial))
            err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
            if err_norm <= 1.0:
                t += h
                flat = trial
                steps += 1
                accepted += 1
                flat = guard.apply(flat.reshape(shape), t).ravel()
                if accepted % decimation == 0 or t >= horizon:
                    if record(t, flat):
                        converged = True
                        break
            factor = 0.9 * (1.0 / max(err_norm, 1e-12)) ** 0.2
            h *= min(5.0, max(0.2, factor))
            if h < h_min:
                raise StepFailureError(
                    f"adaptive step underflow (h={h:.3e}) at t={t:.6g}")
    else:
        raise StepFailureError(f"unknown integration method {method!r}")

    final = flat.reshape(shape)
    residual = float(np.max(np.abs(rhs(flat))))
    converged = converged or residual <= tol.sim_ss_tol
    classification = None
    distance = None
    if references is not None:
        classification, distance = classify_state(final, references, tol.class_tol)
    return SimulationResult(
        times=np.asarray(times),
        states=np.asarray(samples).reshape(len(times), *shape),
        final_state=final,
        final_time=t,
        converged=converged,
        residual=residual,
        steps=steps,
        classification=classification,
        distance=distance,
    )


def integrate_cell(model: CellModel, x0, u, horizon: float, dt: float = 0.01,
                   decimation: int = 10,
                   tol: Tolerances = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 for one isolated cell under a constant input.

    Returns (times, states) with states shaped (len(times), n).
    """
    u = np.asarray(u, dtype=float)
    z = np.asarray(x0, dtype=float).copy()
    rhs = lambda x: model.f(x, u)
    times = [0.0]
    samples = [z.copy()]
    t = 0.0
    n_steps = int(np.ceil(horizon / dt))
    for k in range(n_steps):
        h = min(dt, horizon - t)
        z = _rk4_step(rhs, z, h)
        t += h
        v = model.state_domain.violation(z)
        if v > tol.proj_tol:
            raise DomainViolationError(
                f"cell state left the domain by {v:.3e} at t={t:.6g}")
        if v > 0.0:
            z = model.state_domain.project(z)
        if (k + 1) % decimation == 0 or t >= horizon:
            times.append(t)
            samples.append(z.copy())
    return np.asarray(times), np.asarray(samples)


# -- classification and starts -----------------------------------------------------

def classify_state(final: np.ndarray, references: PatternReferences,
                   class_tol: float) -> tuple[str, float]:
    """Label the final state by its nearest predicted pattern (max-norm)."""
    candidates = [(CLASS_HOMOGENEOUS, references.homogeneous)]
    if references.checkerboard_a is not None:
        candidates.append((CLASS_CHECKERBOARD_A, references.checkerboard_a))
    if references.checkerboard_b is not None:
        candidates.append((CLASS_CHECKERBOARD_B, references.checkerboard_b))
    label, distance = CLASS_OTHER, np.inf
    for name, ref in candidates:
        d = float(np.max(np.abs(final - ref)))
        if d < distance:
            label, distance = name, d
    if distance > class_tol:
        return CLASS_OTHER, distance
    return label, distance


def perturbed_homogeneous_start(spec: RandomWalkSpectrum, x_star: np.ndarray,
                                delta: float = 1e-4,
                                direction: np.ndarray | None = None) -> np.ndarray:
    """Homogeneous state plus delta times the most oscillatory spatial mode,
    applied along a fixed unit state direction (first coordinate by default)."""
    n = x_star.size
    w = np.zeros(n)
    if direction is None:
        w[0] = 1.0
    else:
        w = np.asarray(direction, dtype=float)
        w = w / np.linalg.norm(w)
    return np.tile(x_star, (spec.matrix.shape[0], 1)) + delta * np.outer(spec.mode_min, w)


# -- ensembles -----------------------------------------------------------------------

def _thread_count() -> int:
    raw = os.environ.get("LATPAT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ensemble_converge(g: ContactGraph, model: CellModel, trials: int, seed: int,
                      horizon: float = 200.0, method: str = "rk4",
                      dt: float = 0.01,
                      references: PatternReferences | None = None,
                      tol: Tolerances = DEFAULT_TOL) -> EnsembleStats:
    """Integrate random starts (uniform over the central 80% of the state box)
    and tally convergence and pattern classes. Per-trial failures are recorded,
    not raised. Results are aggregated by trial index, so the outcome does not
    depend on the LATPAT_THREADS parallelism."""
    if trials <= 0:
        return EnsembleStats(trials=0, converged=0, fraction_converged=0.0,
                             histogram={}, max_residual=0.0)
    rng = np.random.default_rng(seed)
    inner = model.sampling_domain.shrink(0.8)
    starts = [inner.sample(g.node_count, rng) for _ in range(trials)]

    def run(idx: int):
        try:
            res = integrate(g, model, starts[idx], horizon, method=method, dt=dt,
                            references=references, tol=tol)
            label = res.classification or (
                "converged" if res.converged else "not_converged")
            return idx, res.converged, label, res.residual, None
        except (DomainViolationError, StepFailureError) as exc:
            return idx, False, "failed", np.inf, str(exc)

    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, range(trials)))
    else:
        outcomes = [run(i) for i in range(trials)]
    outcomes.sort(key=lambda item: item[0])

    histogram: dict[str, int] = {}
    converged = 0
    max_residual = 0.0
    failures = []
    for idx, ok, label, residual, err in outcomes:
        histogram[label] = histogram.get(label, 0) + 1
        if ok:
            converged += 1
            max_residual = max(max_residual, residual)
        if err is not None:
            failures.append((idx, err))
    return EnsembleStats(trials=trials, converged=converged,
                         fraction_converged=converged / trials,
                         histogram=histogram, max_residual=max_residual,
                         failures=tuple(failures))


# -- monotone order preservation -------------------------------------------------------

def order_sign_matrix(g: ContactGraph, epsilon, set_a) -> np.ndarray:
    """Signs defining the network partial order: the per-cell orthant from the
    sign pattern, flipped on the second bipartition class."""
    eps = np.asarray(epsilon, dtype=int)
    base = np.where(eps == 0, 1.0, -1.0)
    sigma = np.tile(base, (g.node_count, 1))
    in_a = np.zeros(g.node_count, dtype=bool)
    in_a[list(set_a)] = True
    sigma[~in_a] *= -1.0
    return sigma


def is_ordered_pair(x, x_hat, sigma: np.ndarray, tol: float = 0.0) -> bool:
    diff = sigma * (np.asarray(x_hat, float) - np.asarray(x, float))
    return bool(np.all(diff >= -tol))


def order_preservation_check(g: ContactGraph, model: CellModel, epsilon,
                             pairs: int = 20, horizon: float = 20.0,
                             seed: int = 0, dt: float = 0.01,
                             restriction=None,
                             tol: Tolerances = DEFAULT_TOL) -> OrderCheckResult:
    """Integrate ordered initial pairs and verify the signed product order at
    every sample time (tolerance 1e-8), plus strict ordering at the final
    time for initially distinct pairs (1e-10).

    When a restriction box is given, initial pairs are drawn from it and its
    pinned coordinates are exempt from the strict check: strong monotonicity
    only holds on the invariant subset where non-excitable coordinates sit
    at their equilibrium value.
    """
    bp = bipartition(g)
    if bp is None:
        raise NotBipartiteError("order preservation needs a bipartite graph")
    sigma = order_sign_matrix(g, epsilon, bp.set_a)
    rng = np.random.default_rng(seed)
    base = restriction if restriction is not None else model.sampling_domain
    inner = base.shrink(0.8)
    lo, hi = base.sampling_bounds(margin=0.0)
    width = hi - lo
    strict_coords = [j for j in range(model.state_dim) if j not in base.pins]

    violations: list[OrderWitness] = []
    strict_violations: list[OrderWitness] = []
    checked = 0
    maintain_tol = 1e-8
    strict_tol = 1e-10
    for _ in range(pairs):
        for _attempt in range(100):
            x = inner.sample(g.node_count, rng)
            # gaps bounded away from zero so the decaying difference stays
            # resolvable at the final time
            gap = rng.uniform(0.02, 0.1, size=x.shape) * width
            x_hat = x + sigma * gap
            ok = all(model.state_domain.contains(x_hat[i]) for i in range(g.node_count))
            if ok:
                break
        else:
            continue
        checked += 1
        t1, traj1 = _trajectory_on_grid(g, model, x, horizon, dt, tol)
        _t2, traj2 = _trajectory_on_grid(g, model, x_hat, horizon, dt, tol)
        diff = sigma[None, :, :] * (traj2 - traj1)
        bad = np.argwhere(diff < -maintain_tol)
        for s_idx, cell, coord in bad[:4]:
            violations.append(OrderWitness(time=float(t1[s_idx]), cell=int(cell),
                                           coordinate=int(coord),
                                           value=float(diff[s_idx, cell, coord])))
        initially_distinct = bool(np.any(sigma * (x_hat - x) > strict_tol))
        if initially_distinct and strict_coords:
            final_diff = diff[-1][:, strict_coords]
            weak = np.argwhere(final_diff <= strict_tol)
            for cell, col in weak[:4]:
                strict_violations.append(OrderWitness(
                    time=float(t1[-1]), cell=int(cell),
                    coordinate=int(strict_coords[col]),
                    value=float(final_diff[cell, col])))
    return OrderCheckResult(ok=not violations, pairs_checked=checked,
                            violations=tuple(violations),
                            strict_ok=not strict_violations,
                            strict_violations=tuple(strict_violations))


def _trajectory_on_grid(g: ContactGraph, model: CellModel, x0, horizon: float,
                        dt: float, tol: Tolerances):
    res = integrate(g, model, x0, horizon, method="rk4", dt=dt, tol=tol,
                    early_exit=False)
    return res.times, res.states
