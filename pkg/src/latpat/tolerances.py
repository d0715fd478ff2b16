"""Numerical tolerances with package-wide defaults, overridable per run."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class Tolerances:
    ss_tol: float = 1e-10        # steady-state residual for S(u)
    fp_tol: float = 1e-10        # fixed-point / orbit residual for T
    separation_tol: float = 1e-6  # minimum distance between orbit points
    margin_tol: float = 1e-9     # half-width of the inconclusive band around a criterion
    stab_tol: float = 1e-9       # eigenvalue real-part threshold for numeric verdicts
    sign_tol: float = 1e-12      # strict sign-definiteness threshold
    proj_tol: float = 1e-12      # domain violation projected back instead of aborting
    class_tol: float = 1e-4      # pattern classification distance
    sim_ss_tol: float = 1e-8     # network residual for "converged"
    relax_tol: float = 1e-6      # relaxation stop before Newton polish
    fd_rel_tol: float = 1e-4     # analytic-vs-finite-difference Jacobian agreement

    def replace(self, **overrides) -> "Tolerances":
        names = {f.name for f in dataclasses.fields(self)}
        for key in overrides:
            if key not in names:
                raise ConfigError(f"unknown tolerance {key!r}", pointer=f"tol.{key}")
        return dataclasses.replace(self, **overrides)

    @classmethod
    def from_pairs(cls, pairs) -> "Tolerances":
        """Build from ``KEY=VALUE`` strings as accepted by the CLI."""
        overrides = {}
        for pair in pairs:
            key, sep, value = pair.partition("=")
            if not sep:
                raise ConfigError(f"expected KEY=VALUE, got {pair!r}", pointer="tol")
            try:
                overrides[key.strip()] = float(value)
            except ValueError as exc:
                raise ConfigError(f"not a number: {value!r}", pointer=f"tol.{key}") from exc
        return cls().replace(**overrides)


DEFAULT_TOL = Tolerances()
