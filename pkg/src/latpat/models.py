"""Per-cell input-output models and their steady-state characteristics.

A cell is ``xdot = f(x, u), y = h(x)`` with as many outputs as inputs.
For each constant input u the cell is assumed to settle to a unique steady
state S(u); the steady-state output map T(u) = h(S(u)) and its derivative
T'(u) = -C A^{-1} B (A, B, C the Jacobians at (S(u), u)) drive all the
pattern predictions downstream.

Two built-in model families are provided: a single-input inhibition cascade
and a two-input Notch/Delta receptor-ligand model in transformed states.
Their rate nonlinearities are Hill functions (plus linear and constant
stages), standing in for arbitrary monotone rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    ConfigError,
    NoConvergenceError,
    NotHurwitzError,
    SingularJacobianError,
)
from .tolerances import DEFAULT_TOL, Tolerances

__all__ = [
    "SIGN_POS", "SIGN_NEG", "SIGN_ZERO", "SIGN_NONNEG", "SIGN_NONPOS", "SIGN_MIXED",
    "HillParams", "HillStage", "LinearStage", "ConstantStage",
    "BoxDomain", "CellModel", "SignTables", "Characteristic",
    "cascade_model", "notch_mimo_model", "notch_restricted_domain",
    "fd_jacobian",
]

# Sign classes for partial derivatives over a domain. "pos"/"neg" are strict
# (bounded away from zero except nowhere), "nonneg"/"nonpos" attain zero
# somewhere, "mixed" takes both signs.
SIGN_POS = "pos"
SIGN_NEG = "neg"
SIGN_ZERO = "zero"
SIGN_NONNEG = "nonneg"
SIGN_NONPOS = "nonpos"
SIGN_MIXED = "mixed"


# -- rate stages -------------------------------------------------------------

@dataclass(frozen=True)
class HillParams:
    """Hill nonlinearity: activating a s^p/(K^p + s^p), inhibiting a/(1 + (s/K)^p)."""

    amplitude: float
    threshold: float
    exponent: float
    direction: str

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ConfigError("Hill amplitude must be positive")
        if self.threshold <= 0:
            raise ConfigError("Hill threshold must be positive")
        if self.exponent < 1:
            raise ConfigError("Hill exponent must be >= 1")
        if self.direction not in ("activating", "inhibiting"):
            raise ConfigError(f"unknown Hill direction {self.direction!r}")


class HillStage:
    """Evaluates a Hill nonlinearity; inputs are clamped at 0 from below."""

    def __init__(self, params: HillParams):
        self.params = params

    @property
    def direction(self) -> str:
        return ("nondecreasing" if self.params.direction == "activating"
                else "nonincreasing")

    def value(self, s):
        p = self.params
        s = np.maximum(s, 0.0)
        zp = (s / p.threshold) ** p.exponent
        if p.direction == "activating":
            return p.amplitude * zp / (1.0 + zp)
        return p.amplitude / (1.0 + zp)

    def deriv(self, s):
        p = self.params
        s = np.maximum(s, 0.0)
        z = s / p.threshold
        zp = z ** p.exponent
        mag = p.amplitude * p.exponent * z ** (p.exponent - 1.0) / (
            p.threshold * (1.0 + zp) ** 2)
        return mag if p.direction == "activating" else -mag

    def bound(self, s_max: float) -> float:
        # sup over [0, s_max]; both Hill forms are bounded by the amplitude
        return self.params.amplitude

    def sign_on(self, lo: float, hi: float, lo_open: bool) -> str:
        """Exact sign class of the derivative over the s-interval [lo, hi]."""
        p = self.params
        strict_sign = SIGN_POS if p.direction == "activating" else SIGN_NEG
        weak_sign = SIGN_NONNEG if p.direction == "activating" else SIGN_NONPOS
        if hi <= 0:
            # interval degenerate at the origin
            return SIGN_ZERO if p.exponent > 1 else strict_sign
        if p.exponent == 1 or lo > 0 or (lo == 0 and lo_open):
            return strict_sign
        return weak_sign

    def describe(self) -> dict:
        p = self.params
        return {"type": "hill", "a": p.amplitude, "K": p.threshold,
                "p": p.exponent, "direction": p.direction}


class LinearStage:
    """Pass-through rate g(s) = slope * s; slope must be nonnegative so the
    stage maps nonnegative concentrations to nonnegative rates."""

    def __init__(self, slope: float = 1.0):
        self.slope = float(slope)
        if self.slope < 0:
            raise ConfigError("linear stage slope must be nonnegative")

    @property
    def direction(self) -> str:
        return "nondecreasing" if self.slope > 0 else "constant"

    def value(self, s):
        return self.slope * np.maximum(s, 0.0)

    def deriv(self, s):
        return self.slope * np.ones_like(np.asarray(s, dtype=float))

    def bound(self, s_max: float) -> float:
        return self.slope * s_max

    def sign_on(self, lo, hi, lo_open) -> str:
        return SIGN_POS if self.slope > 0 else SIGN_ZERO

    def describe(self) -> dict:
        return {"type": "linear", "slope": self.slope}


class ConstantStage:
    """Constant rate g(s) = value."""

    def __init__(self, value: float):
        self.constant = float(value)
        if self.constant < 0:
            raise ConfigError("constant stage must be nonnegative")

    direction = "constant"

    def value(self, s):
        return self.constant * np.ones_like(np.asarray(s, dtype=float))

    def deriv(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def bound(self, s_max: float) -> float:
        return self.constant

    def sign_on(self, lo, hi, lo_open) -> str:
        return SIGN_ZERO

    def describe(self) -> dict:
        return {"type": "constant", "value": self.constant}


def _as_stage(stage):
    if isinstance(stage, HillParams):
        return HillStage(stage)
    if isinstance(stage, (HillStage, LinearStage, ConstantStage)):
        return stage
    raise ConfigError(f"not a stage: {stage!r}")


# -- domains ------------------------------------------------------------------

@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box, optionally with linear constraints a.x >= b.

    ``open_lower``/``open_upper`` mark strict bounds; they only affect
    sampling (a margin keeps samples off the open face) and exact sign
    tables. A coordinate with ``lower == upper`` is pinned.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    open_lower: tuple[bool, ...] = ()
    open_upper: tuple[bool, ...] = ()
    constraints: tuple[tuple[tuple[float, ...], float], ...] = ()

    def __post_init__(self):
        dim = len(self.lower)
        if len(self.upper) != dim:
            raise ConfigError("box bounds must have equal length")
        if not self.open_lower:
            object.__setattr__(self, "open_lower", (False,) * dim)
        if not self.open_upper:
            object.__setattr__(self, "open_upper", (False,) * dim)
        for lo, hi in zip(self.lower, self.upper):
            if lo > hi:
                raise ConfigError(f"empty box: lower {lo} > upper {hi}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def pins(self) -> tuple[int, ...]:
        return tuple(i for i, (lo, hi) in enumerate(zip(self.lower, self.upper))
                     if lo == hi)

    def violation(self, x) -> float:
        """Largest amount by which x breaks a bound or constraint (0 inside)."""
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        v = max(float(np.max(lo - x, initial=0.0)), float(np.max(x - hi, initial=0.0)))
        for a, b in self.constraints:
            v = max(v, b - float(np.dot(a, x)))
        return max(v, 0.0)

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.violation(x) <= tol

    def project(self, x) -> np.ndarray:
        """Clamp to the box, then orthogonally project onto violated constraints."""
        x = np.clip(np.asarray(x, dtype=float), self.lower, self.upper)
        for a, b in self.constraints:
            a = np.asarray(a, dtype=float)
            gap = b - float(np.dot(a, x))
            if gap > 0:
                x = x + a * (gap / float(np.dot(a, a)))
        return x

    def sampling_bounds(self, margin: float = 1e-3):
        """Effective closed bounds with open faces shaved inward by margin*width."""
        lo = np.asarray(self.lower, dtype=float).copy()
        hi = np.asarray(self.upper, dtype=float).copy()
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ConfigError("cannot sample an unbounded box")
        width = hi - lo
        for i in range(self.dim):
            if width[i] == 0:
                continue
            if self.open_lower[i]:
                lo[i] += margin * width[i]
            if self.open_upper[i]:
                hi[i] -= margin * width[i]
        return lo, hi

    def center(self) -> np.ndarray:
        lo, hi = self.sampling_bounds()
        return self.project(0.5 * (lo + hi))

    def shrink(self, factor: float) -> "BoxDomain":
        """Sub-box with the same center and width scaled by ``factor``."""
        lo, hi = self.sampling_bounds(margin=0.0)
        mid = 0.5 * (lo + hi)
        half = 0.5 * factor * (hi - lo)
        return BoxDomain(tuple(mid - half), tuple(mid + half),
                         constraints=self.constraints)

    def sample(self, count: int, rng: np.random.Generator,
               margin: float = 1e-3) -> np.ndarray:
        """Uniform samples inside the box honoring linear constraints."""
        lo, hi = self.sampling_bounds(margin)
        out = np.empty((count, self.dim))
        filled = 0
        attempts = 0
        while filled < count:
            draw = rng.uniform(lo, hi, size=(max(count - filled, 8), self.dim))
            if self.constraints:
                ok = np.ones(len(draw), dtype=bool)
                for a, b in self.constraints:
                    ok &= draw @ np.asarray(a) >= b
                draw = draw[ok]
            take = min(len(draw), count - filled)
            out[filled:filled + take] = draw[:take]
            filled += take
            attempts += 1
            if attempts > 200:
                raise NoConvergenceError("constraint rejection sampling stalled")
        return out


def box(lower, upper, **kw) -> BoxDomain:
    return BoxDomain(tuple(float(v) for v in lower),
                     tuple(float(v) for v in upper), **kw)


# -- cell model ---------------------------------------------------------------

@dataclass(frozen=True)
class SignTables:
    """Exact sign classes of the model partials over a stated domain."""

    f_x: tuple[tuple[str, ...], ...]   # n x n, diagonal entries unused
    f_u: tuple[tuple[str, ...], ...]   # n x m
    h_x: tuple[tuple[str, ...], ...]   # m x n


@dataclass(frozen=True)
class CellModel:
    """Input-output cell dynamics with Jacobians and domain metadata.

    ``rhs`` and ``output`` accept arrays whose last axis is the state/input
    when ``vectorized`` is set (the built-ins are). Jacobian callables are
    analytic when available; accessor methods fall back to central finite
    differences.
    """

    name: str
    state_dim: int
    io_dim: int
    rhs: Callable
    output: Callable
    state_domain: BoxDomain
    input_domain: BoxDomain
    sampling_domain: BoxDomain
    jac_x: Callable | None = None
    jac_u: Callable | None = None
    jac_out: Callable | None = None
    characteristic_fn: Callable | None = None
    sign_tables_fn: Callable | None = field(default=None, repr=False)
    params: Mapping = field(default_factory=dict)
    vectorized: bool = False

    def f(self, x, u) -> np.ndarray:
        return np.asarray(self.rhs(np.asarray(x, float), np.asarray(u, float)), float)

    def h(self, x) -> np.ndarray:
        return np.asarray(self.output(np.asarray(x, float)), float)

    def jacobian_x(self, x, u) -> np.ndarray:
        if self.jac_x is not None:
            return np.asarray(self.jac_x(x, u), dtype=float)
        return fd_jacobian(lambda z: self.f(z, u), np.asarray(x, float))

    def jacobian_u(self, x, u) -> np.ndarray:
        if self.jac_u is not None:
            return np.asarray(self.jac_u(x, u), dtype=float)
        return fd_jacobian(lambda w: self.f(x, w), np.asarray(u, float))

    def jacobian_h(self, x) -> np.ndarray:
        if self.jac_out is not None:
            return np.asarray(self.jac_out(x), dtype=float)
        return fd_jacobian(self.h, np.asarray(x, float))

    def exact_sign_tables(self, domain_x: BoxDomain, domain_u: BoxDomain) -> SignTables | None:
        if self.sign_tables_fn is None:
            return None
        return self.sign_tables_fn(domain_x, domain_u)


def fd_jacobian(fun, x, rel_step: float = 1e-6) -> np.ndarray:
    """Central finite differences, per-coordinate step rel_step*max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(fun(x), dtype=float))
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        step = rel_step * max(1.0, abs(x[i]))
        xp = x.copy(); xp[i] += step
        xm = x.copy(); xm[i] -= step
        jac[:, i] = (np.atleast_1d(fun(xp)) - np.atleast_1d(fun(xm))) / (2.0 * step)
    return jac


# -- built-in: inhibition cascade ---------------------------------------------

def cascade_model(gammas, stages) -> CellModel:
    """Single-input chain: xdot_j = -gamma_j x_j + g_j(x_{j+1}), last stage fed
    by the input, output y = x_0.

    ``stages`` entries are HillParams or stage objects (hill, linear,
    constant); one stage per state. Lateral inhibition requires an odd
    number of nonincreasing stages, which is certified, not assumed, by the
    monotone module.
    """
    gammas = tuple(float(g) for g in gammas)
    if not gammas:
        raise ConfigError("cascade needs at least one state")
    if any(g <= 0 for g in gammas):
        raise ConfigError("degradation rates must be positive")
    stages = tuple(_as_stage(s) for s in stages)
    if len(stages) != len(gammas):
        raise ConfigError(f"{len(gammas)} states need {len(gammas)} stages, "
                          f"got {len(stages)}")
    n = len(gammas)
    gam = np.asarray(gammas)

    def rhs(x, u):
        cols = []
        for j in range(n):
            drive = stages[j].value(x[..., j + 1] if j < n - 1 else u[..., 0])
            cols.append(-gam[j] * x[..., j] + drive)
        return np.stack(cols, axis=-1)

    def output(x):
        return x[..., :1]

    def jac_x(x, u):
        a = np.diag(-gam)
        for j in range(n - 1):
            a[j, j + 1] = float(stages[j].deriv(x[j + 1]))
        return a

    def jac_u(x, u):
        b = np.zeros((n, 1))
        b[n - 1, 0] = float(stages[n - 1].deriv(u[0]))
        return b

    def jac_out(x):
        c = np.zeros((1, n))
        c[0, 0] = 1.0
        return c

    def characteristic(u):
        u = np.asarray(u, dtype=float)
        x = np.empty(u.shape[:-1] + (n,))
        x[..., n - 1] = stages[n - 1].value(u[..., 0]) / gam[n - 1]
        for j in range(n - 2, -1, -1):
            x[..., j] = stages[j].value(x[..., j + 1]) / gam[j]
        return x

    x_caps = _cascade_state_caps(gam, stages)
    u_cap = x_caps[0]

    def sign_tables(domain_x: BoxDomain, domain_u: BoxDomain) -> SignTables:
        fx = [[SIGN_ZERO] * n for _ in range(n)]
        for j in range(n - 1):
            lo, hi = domain_x.lower[j + 1], domain_x.upper[j + 1]
            fx[j][j + 1] = stages[j].sign_on(lo, hi, domain_x.open_lower[j + 1])
        fu = [[SIGN_ZERO] for _ in range(n)]
        fu[n - 1][0] = stages[n - 1].sign_on(domain_u.lower[0], domain_u.upper[0],
                                             domain_u.open_lower[0])
        hx = [[SIGN_ZERO] * n]
        hx[0][0] = SIGN_POS
        return SignTables(f_x=tuple(map(tuple, fx)), f_u=tuple(map(tuple, fu)),
                          h_x=tuple(map(tuple, hx)))

    return CellModel(
        name="cascade",
        state_dim=n,
        io_dim=1,
        rhs=rhs,
        output=output,
        state_domain=box([0.0] * n, [np.inf] * n),
        input_domain=box([0.0], [u_cap]),
        sampling_domain=box([0.0] * n, x_caps),
        jac_x=jac_x,
        jac_u=jac_u,
        jac_out=jac_out,
        characteristic_fn=characteristic,
        sign_tables_fn=sign_tables,
        params={"type": "cascade", "gammas": list(gammas),
                "stages": [s.describe() for s in stages]},
        vectorized=True,
    )


def _cascade_state_caps(gam, stages, iters: int = 32) -> list[float]:
    """Self-consistent invariant-box caps: inputs are bounded by the output cap."""
    n = len(gam)
    u_cap = 1.0
    caps = [1.0] * n
    for _ in range(iters):
        caps[n - 1] = stages[n - 1].bound(u_cap) / gam[n - 1]
        for j in range(n - 2, -1, -1):
            caps[j] = stages[j].bound(caps[j + 1]) / gam[j]
        new_cap = max(caps[0], 1e-12)
        if abs(new_cap - u_cap) <= 1e-12 * max(1.0, new_cap):
            break
        u_cap = min(new_cap, 1e9)
    return [max(c, 1e-12) for c in caps]


# -- built-in: Notch/Delta receptor-ligand model -------------------------------

def notch_mimo_model(beta: float, gamma: float, k: float, g) -> CellModel:
    """Two-input Notch/Delta model in transformed states.

    States: x0 = receptor, x1 = ligand, x2 = receptor + released signal.
    Inputs: u0 = neighbor-average ligand, u1 = neighbor-average receptor.

        x0' = beta - gamma x0 - k x0 u0
        x1' = g(x2 - x0) - gamma x1 - k x1 u1
        x2' = beta - gamma x2
        y   = (x1, x0)

    ``g`` is the ligand production rate driven by the released signal
    (inhibiting for lateral inhibition). Valid states satisfy x0, x1 >= 0
    and x2 >= x0.
    """
    beta, gamma, k = float(beta), float(gamma), float(k)
    if beta <= 0 or gamma <= 0 or k <= 0:
        raise ConfigError("notch parameters must be positive")
    g = _as_stage(g)

    def rhs(x, u):
        s = x[..., 2] - x[..., 0]
        return np.stack([
            beta - gamma * x[..., 0] - k * x[..., 0] * u[..., 0],
            g.value(s) - gamma * x[..., 1] - k * x[..., 1] * u[..., 1],
            beta - gamma * x[..., 2],
        ], axis=-1)

    def output(x):
        return np.stack([x[..., 1], x[..., 0]], axis=-1)

    def jac_x(x, u):
        gp = float(g.deriv(x[2] - x[0]))
        return np.array([
            [-gamma - k * u[0], 0.0, 0.0],
            [-gp, -gamma - k * u[1], gp],
            [0.0, 0.0, -gamma],
        ])

    def jac_u(x, u):
        return np.array([[-k * x[0], 0.0], [0.0, -k * x[1]], [0.0, 0.0]])

    def jac_out(x):
        return np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])

    def characteristic(u):
        u = np.asarray(u, dtype=float)
        x0 = beta / (gamma + k * u[..., 0])
        x2 = np.full_like(x0, beta / gamma)
        x1 = g.value(x2 - x0) / (gamma + k * u[..., 1])
        return np.stack([x0, x1, x2], axis=-1)

    x0_cap = beta / gamma
    x1_cap = g.bound(x0_cap) / gamma

    def sign_tables(domain_x: BoxDomain, domain_u: BoxDomain) -> SignTables:
        s_lo = domain_x.lower[2] - domain_x.upper[0]
        s_hi = domain_x.upper[2] - domain_x.lower[0]
        s_lo_open = domain_x.open_upper[0] or domain_x.open_lower[2]
        g_sign = g.sign_on(max(s_lo, 0.0), s_hi, s_lo_open)
        fx = [[SIGN_ZERO] * 3 for _ in range(3)]
        fx[1][0] = _flip(g_sign)
        fx[1][2] = g_sign
        fu = [[SIGN_ZERO, SIGN_ZERO] for _ in range(3)]
        fu[0][0] = _scaled_state_sign(domain_x, 0, -k)
        fu[1][1] = _scaled_state_sign(domain_x, 1, -k)
        hx = [[SIGN_ZERO, SIGN_POS, SIGN_ZERO], [SIGN_POS, SIGN_ZERO, SIGN_ZERO]]
        return SignTables(f_x=tuple(map(tuple, fx)), f_u=tuple(map(tuple, fu)),
                          h_x=tuple(map(tuple, hx)))

    return CellModel(
        name="notch_mimo",
        state_dim=3,
        io_dim=2,
        rhs=rhs,
        output=output,
        state_domain=BoxDomain((0.0, 0.0, 0.0), (np.inf, np.inf, np.inf),
                               constraints=(((-1.0, 0.0, 1.0), 0.0),)),
        input_domain=box([0.0, 0.0], [x1_cap, x0_cap]),
        sampling_domain=BoxDomain((0.0, 0.0, 0.0), (x0_cap, x1_cap, x0_cap),
                                  constraints=(((-1.0, 0.0, 1.0), 0.0),)),
        jac_x=jac_x,
        jac_u=jac_u,
        jac_out=jac_out,
        characteristic_fn=characteristic,
        sign_tables_fn=sign_tables,
        params={"type": "notch_mimo", "beta": beta, "gamma": gamma, "k": k,
                "g": g.describe()},
        vectorized=True,
    )


def _flip(sign: str) -> str:
    return {SIGN_POS: SIGN_NEG, SIGN_NEG: SIGN_POS, SIGN_NONNEG: SIGN_NONPOS,
            SIGN_NONPOS: SIGN_NONNEG}.get(sign, sign)


def _scaled_state_sign(domain: BoxDomain, coord: int, scale: float) -> str:
    """Sign class of scale * x_coord over the domain (scale != 0)."""
    lo, hi = domain.lower[coord], domain.upper[coord]
    if hi == 0.0 and lo == 0.0:
        return SIGN_ZERO
    strictly_positive = lo > 0 or (lo == 0 and domain.open_lower[coord])
    if scale > 0:
        return SIGN_POS if strictly_positive else SIGN_NONNEG
    return SIGN_NEG if strictly_positive else SIGN_NONPOS


def notch_restricted_domain(model: CellModel) -> BoxDomain:
    """Forward-invariant sub-box where the Notch model's partials are strictly
    signed: x0, x1 strictly positive, x0 strictly below its cap, x2 pinned at
    its equilibrium value."""
    if model.name != "notch_mimo":
        raise ConfigError("restricted domain is specific to the notch model")
    beta = model.params["beta"]
    gamma = model.params["gamma"]
    x0_cap, x1_cap, _ = model.sampling_domain.upper
    pin = beta / gamma
    return BoxDomain((0.0, 0.0, pin), (x0_cap, x1_cap, pin),
                     open_lower=(True, True, False),
                     open_upper=(True, False, False))


# -- characteristic evaluation --------------------------------------------------

class Characteristic:
    """Evaluator for S(u), T(u) and T'(u) with analytic and numeric paths.

    The steady state for a constant input is taken from the model's closed
    form when it has one; otherwise damped Newton on f(., u) = 0 seeded by
    ODE relaxation from the domain-box center. Either way the state Jacobian
    at the solution must be Hurwitz (raises NotHurwitzError otherwise, which
    signals a violated stability assumption) and nonsingular.
    """

    def __init__(self, model: CellModel, tol: Tolerances = DEFAULT_TOL):
        self.model = model
        self.tol = tol
        self._cache: dict[bytes, np.ndarray] = {}

    # -- S ------------------------------------------------------------------

    def steady_state(self, u) -> np.ndarray:
        u = self._check_input(u)
        key = u.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit.copy()
        if self.model.characteristic_fn is not None:
            x = np.asarray(self.model.characteristic_fn(u), dtype=float)
        else:
            x = self.relax(u)
            x = self.newton_steady_state(u, x)
        resid = float(np.max(np.abs(self.model.f(x, u))))
        if resid > self.tol.ss_tol:
            x = self.newton_steady_state(u, x)
        self._verify_hurwitz(x, u)
        self._cache[key] = x.copy()
        return x

    def newton_steady_state(self, u, x0, max_iter: int = 60) -> np.ndarray:
        """Damped Newton (backtracking halving) on f(., u) = 0."""
        u = np.asarray(u, dtype=float)
        x = np.asarray(x0, dtype=float).copy()
        fx = self.model.f(x, u)
        norm = float(np.max(np.abs(fx)))
        for _ in range(max_iter):
            if norm <= self.tol.ss_tol:
                return x
            jac = self.model.jacobian_x(x, u)
            try:
                step = np.linalg.solve(jac, -fx)
            except np.linalg.LinAlgError as exc:
                raise NoConvergenceError(f"singular Newton system: {exc}") from exc
            t = 1.0
            while t >= 2.0 ** -30:
                x_trial = self.model.state_domain.project(x + t * step)
                f_trial = self.model.f(x_trial, u)
                norm_trial = float(np.max(np.abs(f_trial)))
                if norm_trial < norm * (1.0 - 1e-4 * t) or norm_trial <= self.tol.ss_tol:
                    x, fx, norm = x_trial, f_trial, norm_trial
                    break
                t *= 0.5
            else:
                raise NoConvergenceError(
                    f"Newton line search stalled at residual {norm:.3e}")
        if norm <= self.tol.ss_tol:
            return x
        raise NoConvergenceError(
            f"Newton did not reach {self.tol.ss_tol:.1e} in {max_iter} iterations "
            f"(residual {norm:.3e})")

    def relax(self, u, x0=None, max_horizon: float = 1e5) -> np.ndarray:
        """Integrate xdot = f(x, u) until the residual drops below relax_tol."""
        u = np.asarray(u, dtype=float)
        x = (self.model.sampling_domain.center() if x0 is None
             else np.asarray(x0, dtype=float))
        horizon = 10.0
        total = 0.0
        while total < max_horizon:
            sol = solve_ivp(lambda _t, z: self.model.f(z, u), (0.0, horizon), x,
                            method="LSODA", rtol=1e-10, atol=1e-12)
            if not sol.success:
                raise NoConvergenceError(f"relaxation failed: {sol.message}")
            x = self.model.state_domain.project(sol.y[:, -1])
            total += horizon
            horizon *= 2.0
            if float(np.max(np.abs(self.model.f(x, u)))) < self.tol.relax_tol:
                return x
        raise NoConvergenceError(
            f"relaxation exceeded horizon {max_horizon:g} for input {u}")

    # -- T and T' --------------------------------------------------------------

    def steady_output(self, u) -> np.ndarray:
        return self.model.h(self.steady_state(u))

    def jacobians_at(self, u):
        """(A, B, C) evaluated at (S(u), u)."""
        u = np.asarray(u, dtype=float)
        x = self.steady_state(u)
        return (self.model.jacobian_x(x, u), self.model.jacobian_u(x, u),
                self.model.jacobian_h(x))

    def gain(self, u) -> np.ndarray:
        """Steady-state output sensitivity -C A^{-1} B; nonpositive for
        certified-monotone lateral inhibition models."""
        a, b, c = self.jacobians_at(u)
        sigma = np.linalg.svd(a, compute_uv=False)
        if sigma[-1] <= 1e-12 * max(sigma[0], 1.0):
            raise SingularJacobianError(
                f"state Jacobian singular at u={np.asarray(u)} "
                f"(sigma_min={sigma[-1]:.3e})")
        return -c @ np.linalg.solve(a, b)

    def input_cap(self) -> np.ndarray:
        """Componentwise T(0); fixed-point searches live in [0, T(0)]."""
        return self.steady_output(np.zeros(self.model.io_dim))

    # -- internals --------------------------------------------------------------

    def _check_input(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (self.model.io_dim,):
            raise ConfigError(
                f"input must have shape ({self.model.io_dim},), got {u.shape}")
        if self.model.input_domain.violation(u) > 1e-9:
            raise ConfigError(f"input {u} outside the admissible domain")
        return u

    def _verify_hurwitz(self, x, u) -> None:
        a = self.model.jacobian_x(x, u)
        try:
            eig = np.linalg.eigvals(a)
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError(f"eigvals failed: {exc}") from exc
        worst = float(eig.real.max())
        if worst >= 0.0:
            raise NotHurwitzError(
                f"state Jacobian at S({np.asarray(u)}) has eigenvalue with real "
                f"part {worst:.3e} >= 0; stable-steady-state assumption violated")
