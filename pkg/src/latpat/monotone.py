"""Orthant monotonicity certification and incidence-graph reachability.

Certification searches for a binary sign assignment (one bit per state,
input, and output coordinate) under which every Jacobian entry of the cell
model keeps a consistent sign over the domain; the assignment is gauged so
inputs carry the standard nonnegative orthant and outputs its negative
(that is what makes neighbor coupling inhibitory). Strong-interaction
structure is then read off a directed incidence graph whose edges require
strictly one-signed partials: excitability means every state is reachable
from an input channel, transparency that an output channel is reachable
from every state.

For the built-in models the sign classes are evaluated from closed forms,
making the certificate exact; for other models sampling gives evidence,
never proof, and the report says which one it has.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import (
    CertificationError,
    GaugeViolationError,
    LatpatError,
    MixedSignError,
    NoConvergenceError,
    NotHurwitzError,
    ParityConflictError,
)
from .models import (
    SIGN_MIXED,
    SIGN_NEG,
    SIGN_NONNEG,
    SIGN_NONPOS,
    SIGN_POS,
    SIGN_ZERO,
    BoxDomain,
    CellModel,
    Characteristic,
    SignTables,
)
from .tolerances import DEFAULT_TOL, Tolerances

__all__ = [
    "SignPattern", "IncidenceGraph", "ChannelFlags", "AssumptionReport",
    "JacobianSignClasses",
    "classify_jacobian_signs", "certify_sign_pattern", "validate_sign_pattern",
    "build_incidence_graph", "excitability_transparency", "assumption_report",
]

DEFAULT_SAMPLES = 4096


@dataclass(frozen=True)
class SignPattern:
    """Certified orthant sign assignment (0 = plain axis, 1 = flipped)."""

    epsilon: tuple[int, ...]   # states
    delta: tuple[int, ...]     # inputs; gauged to all zeros
    mu: tuple[int, ...]        # outputs; gauged to all ones
    sample_count: int
    witness_box: BoxDomain
    exact: bool

    @property
    def mode(self) -> str:
        return "exact" if self.exact else "sampled"


@dataclass(frozen=True)
class IncidenceGraph:
    """Directed influence graph over state/input/output vertices.

    Vertices are "x{j}", "u{k}", "y{k}" (0-based); pinned state coordinates
    are dropped. Every edge corresponds to a strictly one-signed partial.
    """

    state_vertices: tuple[str, ...]
    input_vertices: tuple[str, ...]
    output_vertices: tuple[str, ...]
    edges: tuple[tuple[str, str, int], ...]   # (src, dst, sign)

    def successors(self, vertex: str) -> tuple[str, ...]:
        return tuple(dst for src, dst, _ in self.edges if src == vertex)

    def reachable_from(self, start: str) -> set[str]:
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in self.successors(v):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return seen

    def edge_pairs(self) -> set[tuple[str, str]]:
        return {(src, dst) for src, dst, _ in self.edges}


@dataclass(frozen=True)
class ChannelFlags:
    channel: int
    excitable: bool
    transparent: bool


@dataclass(frozen=True)
class StabilityEvidence:
    """Numerical evidence for the stable-steady-state assumption: Hurwitz
    linearizations at probe inputs plus relaxation convergence from random
    states. Evidence, not proof."""

    probe_inputs: int
    all_hurwitz: bool
    relaxation_probes: int
    relaxation_converged: bool
    max_mismatch: float


@dataclass(frozen=True)
class AssumptionReport:
    model_name: str
    stability: StabilityEvidence | None
    sign_pattern: SignPattern | None
    sign_pattern_failure: str | None
    channels: tuple[ChannelFlags, ...]
    incidence_failure: str | None
    chosen_channel: int | None
    restriction: BoxDomain | None = None
    incidence: IncidenceGraph | None = field(default=None, repr=False)

    @property
    def monotonicity_certified(self) -> bool:
        return self.sign_pattern is not None

    @property
    def strong_interaction_certified(self) -> bool:
        return self.chosen_channel is not None


# -- sign classification ----------------------------------------------------------

@dataclass(frozen=True)
class JacobianSignClasses:
    """Per-entry sign classes with worst-case witness points per entry."""

    f_x: tuple[tuple[str, ...], ...]
    f_u: tuple[tuple[str, ...], ...]
    h_x: tuple[tuple[str, ...], ...]
    witnesses: dict
    sample_count: int
    exact: bool


def _sobol_points(domain_x: BoxDomain, domain_u: BoxDomain, count: int,
                  seed: int):
    """Low-discrepancy (x, u) samples honoring pins, open faces, and
    constraints; the box corners are always included."""
    lo_x, hi_x = domain_x.sampling_bounds()
    lo_u, hi_u = domain_u.sampling_bounds()
    lo = np.concatenate([lo_x, lo_u])
    hi = np.concatenate([hi_x, hi_u])
    dim = lo.size
    engine = qmc.Sobol(d=dim, scramble=True, seed=seed)
    points = [lo.copy(), hi.copy()]
    need = count
    guard = 0
    nx = domain_x.dim
    while need > 0:
        draw = engine.random(max(int(2 ** np.ceil(np.log2(max(need, 2)))), 2))
        mapped = lo + draw * (hi - lo)
        if domain_x.constraints:
            keep = np.ones(len(mapped), dtype=bool)
            for a, b in domain_x.constraints:
                keep &= mapped[:, :nx] @ np.asarray(a) >= b
            mapped = mapped[keep]
        take = mapped[:need]
        points.append(take)
        need -= len(take)
        guard += 1
        if guard > 64:
            raise CertificationError("sampling under constraints stalled")
    pts = np.vstack(points)
    return pts[:, :nx], pts[:, nx:]


def classify_jacobian_signs(model: CellModel, samples: int = DEFAULT_SAMPLES,
                            domain: BoxDomain | None = None, seed: int = 0,
                            tol: Tolerances = DEFAULT_TOL) -> JacobianSignClasses:
    """Classify every Jacobian entry over the domain.

    Classes: strictly positive/negative everywhere ("pos"/"neg"),
    identically zero, zero somewhere with one strict sign elsewhere
    ("nonneg"/"nonpos"), or genuinely both signs ("mixed"). Uses the model's
    closed-form tables when it has them (exact), otherwise sampled classes
    with witness points.
    """
    domain_x = domain if domain is not None else model.sampling_domain
    domain_u = model.input_domain
    exact = model.exact_sign_tables(domain_x, domain_u)
    if exact is not None:
        sampled = _sampled_classes(model, domain_x, domain_u, min(samples, 256),
                                   seed, tol)
        _check_exact_consistency(exact, sampled)
        return JacobianSignClasses(f_x=exact.f_x, f_u=exact.f_u, h_x=exact.h_x,
                                   witnesses=sampled.witnesses,
                                   sample_count=sampled.sample_count, exact=True)
    return _sampled_classes(model, domain_x, domain_u, samples, seed, tol)


def _sampled_classes(model: CellModel, domain_x: BoxDomain, domain_u: BoxDomain,
                     samples: int, seed: int,
                     tol: Tolerances) -> JacobianSignClasses:
    xs, us = _sobol_points(domain_x, domain_u, samples, seed)
    n, m = model.state_dim, model.io_dim
    names = {"f_x": (n, n), "f_u": (n, m), "h_x": (m, n)}
    lows = {k: np.full(shape, np.inf) for k, shape in names.items()}
    highs = {k: np.full(shape, -np.inf) for k, shape in names.items()}
    arg_low = {k: np.zeros(shape, dtype=int) for k, shape in names.items()}
    arg_high = {k: np.zeros(shape, dtype=int) for k, shape in names.items()}
    for idx, (x, u) in enumerate(zip(xs, us)):
        blocks = {"f_x": model.jacobian_x(x, u), "f_u": model.jacobian_u(x, u),
                  "h_x": model.jacobian_h(x)}
        for key, blk in blocks.items():
            lower_mask = blk < lows[key]
            lows[key] = np.where(lower_mask, blk, lows[key])
            arg_low[key][lower_mask] = idx
            upper_mask = blk > highs[key]
            highs[key] = np.where(upper_mask, blk, highs[key])
            arg_high[key][upper_mask] = idx

    witnesses: dict = {}

    def classify(key: str, j: int, k: int) -> str:
        lo = lows[key][j, k]
        hi = highs[key][j, k]
        has_pos = hi > tol.sign_tol
        has_neg = lo < -tol.sign_tol
        point_lo = (xs[arg_low[key][j, k]], us[arg_low[key][j, k]], float(lo))
        point_hi = (xs[arg_high[key][j, k]], us[arg_high[key][j, k]], float(hi))
        witnesses[(key, j, k)] = (point_lo, point_hi)
        if has_pos and has_neg:
            return SIGN_MIXED
        if has_pos:
            return SIGN_POS if lo > tol.sign_tol else SIGN_NONNEG
        if has_neg:
            return SIGN_NEG if hi < -tol.sign_tol else SIGN_NONPOS
        return SIGN_ZERO

    tables = {key: tuple(tuple(classify(key, j, k) for k in range(shape[1]))
                         for j in range(shape[0]))
              for key, shape in names.items()}
    return JacobianSignClasses(f_x=tables["f_x"], f_u=tables["f_u"],
                               h_x=tables["h_x"], witnesses=witnesses,
                               sample_count=len(xs), exact=False)


_COMPATIBLE = {
    SIGN_POS: {SIGN_POS},
    SIGN_NEG: {SIGN_NEG},
    SIGN_ZERO: {SIGN_ZERO},
    SIGN_NONNEG: {SIGN_POS, SIGN_ZERO, SIGN_NONNEG},
    SIGN_NONPOS: {SIGN_NEG, SIGN_ZERO, SIGN_NONPOS},
    SIGN_MIXED: {SIGN_POS, SIGN_NEG, SIGN_ZERO, SIGN_NONNEG, SIGN_NONPOS,
                 SIGN_MIXED},
}


def _check_exact_consistency(exact: SignTables,
                             sampled: JacobianSignClasses) -> None:
    for key in ("f_x", "f_u", "h_x"):
        table_exact = getattr(exact, key)
        table_sampled = getattr(sampled, key)
        for j, row in enumerate(table_exact):
            for k, sign in enumerate(row):
                if key == "f_x" and j == k:
                    continue
                if table_sampled[j][k] not in _COMPATIBLE[sign]:
                    raise LatpatError(
                        f"closed-form sign table disagrees with samples at "
                        f"{key}[{j},{k}]: {sign} vs {table_sampled[j][k]}")


# -- parity solving -----------------------------------------------------------------

_PARITY_BY_SIGN = {SIGN_POS: 0, SIGN_NONNEG: 0, SIGN_NEG: 1, SIGN_NONPOS: 1}


def _parity_constraints(classes: JacobianSignClasses, n: int, m: int):
    """(var_a, var_b, parity, provenance) for every sign-carrying entry.

    Variables are ("x", j), ("u", k), ("y", k); parity 0 forces equal
    orientation bits, parity 1 opposite ones.
    """
    constraints = []
    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            sign = classes.f_x[j][k]
            if sign == SIGN_MIXED:
                raise ParityConflictError(
                    f"d f[{j}]/d x[{k}] takes both signs on the domain",
                    entry=("f_x", j, k),
                    witnesses=classes.witnesses.get(("f_x", j, k), ()))
            if sign in _PARITY_BY_SIGN:
                constraints.append((("x", j), ("x", k), _PARITY_BY_SIGN[sign],
                                    ("f_x", j, k)))
    for j in range(n):
        for k in range(m):
            sign = classes.f_u[j][k]
            if sign == SIGN_MIXED:
                raise ParityConflictError(
                    f"d f[{j}]/d u[{k}] takes both signs on the domain",
                    entry=("f_u", j, k),
                    witnesses=classes.witnesses.get(("f_u", j, k), ()))
            if sign in _PARITY_BY_SIGN:
                constraints.append((("x", j), ("u", k), _PARITY_BY_SIGN[sign],
                                    ("f_u", j, k)))
    for k in range(m):
        for j in range(n):
            sign = classes.h_x[k][j]
            if sign == SIGN_MIXED:
                raise ParityConflictError(
                    f"d h[{k}]/d x[{j}] takes both signs on the domain",
                    entry=("h_x", k, j),
                    witnesses=classes.witnesses.get(("h_x", k, j), ()))
            if sign in _PARITY_BY_SIGN:
                constraints.append((("x", j), ("y", k), _PARITY_BY_SIGN[sign],
                                    ("h_x", k, j)))
    return constraints


def certify_sign_pattern(model: CellModel, samples: int = DEFAULT_SAMPLES,
                         domain: BoxDomain | None = None, seed: int = 0,
                         tol: Tolerances = DEFAULT_TOL) -> SignPattern:
    """Solve the orthant sign-pattern constraints by parity 2-coloring.

    Every one-signed Jacobian entry ties the orientation bits of two
    coordinates (equal for positive, opposite for negative). The solution is
    gauged so all input bits are 0 and all output bits are 1; components
    untouched by that gauge default their smallest variable to 0.

    Raises ParityConflictError when the constraints are contradictory (with
    the witness points), GaugeViolationError when no consistent assignment
    reaches the required input/output gauge.
    """
    classes = classify_jacobian_signs(model, samples, domain, seed, tol)
    n, m = model.state_dim, model.io_dim
    constraints = _parity_constraints(classes, n, m)

    variables = ([("x", j) for j in range(n)] + [("u", k) for k in range(m)]
                 + [("y", k) for k in range(m)])
    adjacency: dict = {v: [] for v in variables}
    for a, b, parity, provenance in constraints:
        adjacency[a].append((b, parity, provenance))
        adjacency[b].append((a, parity, provenance))

    assignment: dict = {}
    component_of: dict = {}
    components: list[list] = []
    for root in variables:
        if root in component_of:
            continue
        comp_idx = len(components)
        components.append([root])
        component_of[root] = comp_idx
        assignment[root] = 0
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for w, parity, provenance in adjacency[v]:
                want = assignment[v] ^ parity
                if w not in assignment:
                    assignment[w] = want
                    component_of[w] = comp_idx
                    components[comp_idx].append(w)
                    queue.append(w)
                elif assignment[w] != want:
                    raise ParityConflictError(
                        "sign constraints contain an odd cycle (closed by "
                        f"{provenance[0]}[{provenance[1]},{provenance[2]}])",
                        entry=provenance,
                        witnesses=classes.witnesses.get(provenance, ()))

    # Gauge: delta = 0 on inputs, mu = 1 on outputs.
    flips = [None] * len(components)
    for k in range(m):
        for var, target in ((("u", k), 0), (("y", k), 1)):
            comp = component_of[var]
            needed = assignment[var] ^ target
            if flips[comp] is None:
                flips[comp] = needed
            elif flips[comp] != needed:
                raise GaugeViolationError(
                    "no sign assignment gives all inputs the plain orthant and "
                    f"all outputs its negative (conflict at {var[0]}{var[1]})")
    for comp_idx, members in enumerate(components):
        flip = flips[comp_idx]
        if flip is None:
            flip = assignment[min(members)]   # free component: smallest var to 0
        if flip:
            for v in members:
                assignment[v] ^= 1

    pattern = SignPattern(
        epsilon=tuple(assignment[("x", j)] for j in range(n)),
        delta=tuple(assignment[("u", k)] for k in range(m)),
        mu=tuple(assignment[("y", k)] for k in range(m)),
        sample_count=classes.sample_count,
        witness_box=domain if domain is not None else model.sampling_domain,
        exact=classes.exact,
    )
    failure = validate_sign_pattern(model, pattern, samples=min(samples, 512),
                                    domain=domain, seed=seed + 1, tol=tol)
    if failure is not None:
        raise ParityConflictError(
            f"assignment failed validation at {failure[0]} "
            f"(value {failure[1]:.3e})", entry=failure[0])
    return pattern


def validate_sign_pattern(model: CellModel, pattern: SignPattern,
                          samples: int = 512, domain: BoxDomain | None = None,
                          seed: int = 1, tol: Tolerances = DEFAULT_TOL):
    """Re-check the three orientation inequalities at fresh sample points.

    Returns None when every signed partial satisfies its inequality within
    -1e-9, else (entry, worst_value).
    """
    domain_x = domain if domain is not None else model.sampling_domain
    xs, us = _sobol_points(domain_x, model.input_domain, samples, seed)
    eps = np.where(np.asarray(pattern.epsilon) == 0, 1.0, -1.0)
    dlt = np.where(np.asarray(pattern.delta) == 0, 1.0, -1.0)
    mu = np.where(np.asarray(pattern.mu) == 0, 1.0, -1.0)
    slack = -1e-9
    for x, u in zip(xs, us):
        fx = model.jacobian_x(x, u)
        signed = eps[:, None] * eps[None, :] * fx
        np.fill_diagonal(signed, 0.0)
        if signed.min() < slack:
            j, k = np.unravel_index(signed.argmin(), signed.shape)
            return (("f_x", int(j), int(k)), float(signed[j, k]))
        fu = eps[:, None] * dlt[None, :] * model.jacobian_u(x, u)
        if fu.min() < slack:
            j, k = np.unravel_index(fu.argmin(), fu.shape)
            return (("f_u", int(j), int(k)), float(fu[j, k]))
        hx = mu[:, None] * eps[None, :] * model.jacobian_h(x)
        if hx.min() < slack:
            k, j = np.unravel_index(hx.argmin(), hx.shape)
            return (("h_x", int(k), int(j)), float(hx[k, j]))
    return None


# -- incidence graph and reachability ---------------------------------------------------

def build_incidence_graph(model: CellModel, samples: int = DEFAULT_SAMPLES,
                          domain: BoxDomain | None = None, seed: int = 0,
                          tol: Tolerances = DEFAULT_TOL) -> IncidenceGraph:
    """Directed incidence graph from strictly one-signed partials.

    Pinned coordinates of the (restriction) domain are dropped as vertices.
    An entry that attains zero anywhere on the domain while being signed
    elsewhere is not sign-definite and raises MixedSignError with the
    witness points.
    """
    domain_x = domain if domain is not None else model.sampling_domain
    classes = classify_jacobian_signs(model, samples, domain_x, seed, tol)
    pinned = set(domain_x.pins)
    n, m = model.state_dim, model.io_dim
    edges: list[tuple[str, str, int]] = []

    def require_definite(sign: str, entry, src: str, dst: str):
        if sign in (SIGN_POS, SIGN_NEG):
            edges.append((src, dst, 1 if sign == SIGN_POS else -1))
        elif sign != SIGN_ZERO:
            raise MixedSignError(
                f"partial for edge {src}->{dst} is not strictly one-signed "
                f"({sign}) on the domain", entry=entry,
                witnesses=classes.witnesses.get(entry, ()))

    for j in range(n):
        if j in pinned:
            continue
        for k in range(n):
            if k == j or k in pinned:
                continue
            require_definite(classes.f_x[j][k], ("f_x", j, k), f"x{k}", f"x{j}")
        for k in range(m):
            require_definite(classes.f_u[j][k], ("f_u", j, k), f"u{k}", f"x{j}")
    for k in range(m):
        for j in range(n):
            if j in pinned:
                continue
            require_definite(classes.h_x[k][j], ("h_x", k, j), f"x{j}", f"y{k}")

    return IncidenceGraph(
        state_vertices=tuple(f"x{j}" for j in range(n) if j not in pinned),
        input_vertices=tuple(f"u{k}" for k in range(m)),
        output_vertices=tuple(f"y{k}" for k in range(m)),
        edges=tuple(sorted(edges)),
    )


def excitability_transparency(ig: IncidenceGraph) -> tuple[ChannelFlags, ...]:
    """Per-channel reachability flags: excitable when every state is reachable
    from u_k, transparent when y_k is reachable from every state."""
    states = set(ig.state_vertices)
    flags = []
    for k, (u_vertex, y_vertex) in enumerate(zip(ig.input_vertices,
                                                 ig.output_vertices)):
        excitable = states <= ig.reachable_from(u_vertex)
        transparent = all(y_vertex in ig.reachable_from(x) for x in states)
        flags.append(ChannelFlags(channel=k, excitable=excitable,
                                  transparent=transparent))
    return tuple(flags)


# -- combined report ------------------------------------------------------------------

def assumption_report(model: CellModel, restriction: BoxDomain | None = None,
                      samples: int = DEFAULT_SAMPLES, seed: int = 0,
                      relax_probes: int = 32,
                      tol: Tolerances = DEFAULT_TOL) -> AssumptionReport:
    """Run every certification stage and collect the outcomes.

    Stability evidence and the sign-pattern search use the model's full
    sampling domain; the incidence analysis runs on the restriction when one
    is supplied (that is how boundary-degenerate partials are excluded).
    Reachability is only evaluated once monotonicity certified.
    """
    stability = _stability_evidence(model, seed=seed, probes=relax_probes, tol=tol)

    pattern = None
    pattern_failure = None
    try:
        pattern = certify_sign_pattern(model, samples=samples, seed=seed, tol=tol)
    except CertificationError as exc:
        pattern_failure = f"{type(exc).__name__}: {exc}"

    channels: tuple[ChannelFlags, ...] = ()
    incidence = None
    incidence_failure = None
    chosen = None
    if pattern is not None:
        try:
            incidence = build_incidence_graph(model, samples=samples,
                                              domain=restriction, seed=seed,
                                              tol=tol)
            channels = excitability_transparency(incidence)
            qualifying = [c.channel for c in channels
                          if c.excitable and c.transparent]
            chosen = min(qualifying) if qualifying else None
        except CertificationError as exc:
            incidence_failure = f"{type(exc).__name__}: {exc}"
    return AssumptionReport(
        model_name=model.name,
        stability=stability,
        sign_pattern=pattern,
        sign_pattern_failure=pattern_failure,
        channels=channels,
        incidence_failure=incidence_failure,
        chosen_channel=chosen,
        restriction=restriction,
        incidence=incidence,
    )


def _stability_evidence(model: CellModel, seed: int, probes: int,
                        tol: Tolerances) -> StabilityEvidence | None:
    """Hurwitz checks at corner/center probe inputs plus relaxation from
    random states toward S(center input)."""
    c = Characteristic(model, tol)
    lo, hi = model.input_domain.sampling_bounds(margin=0.0)
    probes_u = [lo, hi, 0.5 * (lo + hi)]
    try:
        for u in probes_u:
            c.steady_state(u)   # raises NotHurwitzError on a bad linearization
    except (NotHurwitzError, NoConvergenceError):
        return StabilityEvidence(probe_inputs=len(probes_u), all_hurwitz=False,
                                 relaxation_probes=0, relaxation_converged=False,
                                 max_mismatch=np.inf)
    u_mid = 0.5 * (lo + hi)
    target = c.steady_state(u_mid)
    rng = np.random.default_rng(seed)
    starts = model.sampling_domain.sample(probes, rng)
    worst = 0.0
    for x0 in starts:
        try:
            x_end = c.relax(u_mid, x0=x0)
        except NoConvergenceError:
            worst = np.inf
            break
        worst = max(worst, float(np.max(np.abs(x_end - target))))
    return StabilityEvidence(probe_inputs=len(probes_u), all_hurwitz=True,
                             relaxation_probes=probes,
                             relaxation_converged=worst <= 1e-4,
                             max_mismatch=worst)
