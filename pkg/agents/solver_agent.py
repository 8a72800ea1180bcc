# agents/solver_agent.py
"""
SolverAgent

Integrates the Allen-Cahn gradient flow
    u_t = kappa * Lap u - W'(u)  in (0, L)^2,    u = 0 on the boundary,
with forward Euler in time and the five-point Laplacian in space, starting from seeded
random data of one sign, until a numerical equilibrium is reached.

Stopping rule: stop at the first step whose time t is >= t_min (default 50) and whose
flow residual ||kappa Lap_h u - W'(u)||_inf is below residual_tol (default 1e-7); the
residual is checked every step. A node with |u| > 1 raises
InstabilityError at the step it appears. t_checkpoint reports t_final rounded up to the next
multiple of the checkpoint period. Runs that hit t_max are returned with
converged=False and the "t_max_reached" flag instead of being dropped.

Potential modes
- "exact": W' of the logarithmic potential, guarded near |u| = 1 (strict guard raises).
- "modified": W~' of the globally defined potential; same minimizers, no singularity.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from agents.diagnostics_agent import (
    FAILURE_FLAGS,
    DEFAULT_TRIVIAL_TOL,
    check_maximum_principle,
    classify_with_reasons,
    energy,
    flow_residual,
    kappa_c,
    modified_energy,
    nehari_residual,
    nehari_residual_modified,
)
from tools.errors import InstabilityError, StabilityError, ValidationError
from tools.field_io import dump_field, result_stem
from tools.flory_huggins import (
    DEFAULT_C,
    GUARD_MODES,
    ModifiedPotential,
    PotentialParams,
    build_modified_potential,
    find_u_theta,
    modified_values,
    w_prime,
)
from tools.grid import GridGeometry, ScalarField, continuum_lambda1
from tools.prng import node_uniforms

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

DEFAULT_L = math.sqrt(2.0) * math.pi
POTENTIAL_MODES = ("exact", "modified")
NEAR_THRESHOLD_WIDTH = 0.01
ENERGY_RISE_RTOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    kappa: float
    theta: float
    dt: float = 1e-4
    grid: GridGeometry = field(default_factory=lambda: GridGeometry(DEFAULT_L, 128))
    seed: int = 1
    init_amplitude: float = 0.1
    init_sign: int = 1
    residual_tol: float = 1e-7
    checkpoint_period: float = 50.0
    t_min: float = 50.0
    t_max: float = 5000.0
    potential_mode: str = "exact"
    guard: str = "strict"
    C: float = DEFAULT_C
    trivial_tol: float = DEFAULT_TRIVIAL_TOL

    def __post_init__(self):
        problems = []
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            problems.append(f"kappa must be positive, got {self.kappa!r}")
        if not (0.0 < self.theta < 1.0):
            problems.append(f"theta must lie in (0, 1), got {self.theta!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            problems.append(f"dt must be positive, got {self.dt!r}")
        if not (0.0 < self.init_amplitude < 1.0):
            problems.append(f"init_amplitude must lie in (0, 1), got {self.init_amplitude!r}")
        if self.init_sign not in (1, -1):
            problems.append(f"init_sign must be +1 or -1, got {self.init_sign!r}")
        if not self.residual_tol > 0:
            problems.append(f"residual_tol must be positive, got {self.residual_tol!r}")
        if not self.checkpoint_period > 0:
            problems.append(f"checkpoint_period must be positive, got {self.checkpoint_period!r}")
        if not (0 <= self.t_min <= self.t_max):
            problems.append(f"need 0 <= t_min <= t_max, got t_min={self.t_min!r}, t_max={self.t_max!r}")
        if self.potential_mode not in POTENTIAL_MODES:
            problems.append(f"potential_mode must be one of {POTENTIAL_MODES}, got {self.potential_mode!r}")
        if self.guard not in GUARD_MODES:
            problems.append(f"guard must be one of {GUARD_MODES}, got {self.guard!r}")
        if not self.C > 1:
            problems.append(f"C must be > 1, got {self.C!r}")
        if problems:
            raise ValidationError("; ".join(problems))

    @classmethod
    def from_overrides(cls, theta: float, kappa: float, **overrides: Any) -> "SolverConfig":
        """Build a config from flat overrides; L and N are turned into the grid."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        L = overrides.pop("L", DEFAULT_L)
        N = overrides.pop("N", 128)
        known = set(cls.__dataclass_fields__) - {"grid", "theta", "kappa"}
        unknown = set(overrides) - known
        if unknown:
            raise ValidationError(f"unknown solver settings: {sorted(unknown)}")
        return cls(kappa=kappa, theta=theta, grid=GridGeometry(L, N), **overrides)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["grid"] = {"L": self.grid.L, "N": self.grid.N, "h": self.grid.h}
        return out


@dataclass
class RunResult:
    final_field: ScalarField
    max_u: float
    min_u: float
    steps: int
    t_final: float
    t_checkpoint: float
    energy: float
    energy_report: Dict[str, Any]
    nehari_residual: float
    residual_inf: float
    classification: str
    converged: bool
    u_theta: float
    flags: List[str] = field(default_factory=list)
    reasons: List[str] = field(default_factory=list)
    energy_history: List[Tuple[float, float]] = field(default_factory=list)
    potential_mode: str = "exact"
    modified_potential: Optional[Dict[str, Any]] = None
    wall_time_s: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready summary; the field itself is dumped separately."""
        out = {k: v for k, v in asdict(self).items() if k != "final_field"}
        out["energy_history"] = [list(p) for p in self.energy_history]
        return out


@lru_cache(maxsize=64)
def cached_modified_potential(theta: float, C: float) -> ModifiedPotential:
    return build_modified_potential(PotentialParams(theta), C)


def stability_bound(cfg: SolverConfig) -> float:
    """Forward Euler bound h^2/(4 kappa) for the diffusion part."""
    h = cfg.grid.h
    return h * h / (4.0 * cfg.kappa)


class SolverAgent:
    """
    Runs gradient-flow integrations.

    Parameters
    ----------
    checkpoint_dir: Optional[str]
        When set, a field dump is written every checkpoint period.
    image: bool
        Also write the 16-bit grayscale image with each dump.
    progress: bool
        Show a tqdm bar over simulated time.
    """

    def __init__(self, checkpoint_dir: Optional[str] = None, image: bool = False, progress: bool = False):
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.image = image
        self.progress = progress

    # -----------------------
    # Building blocks
    # -----------------------
    stability_bound = staticmethod(stability_bound)

    def init_random(self, cfg: SolverConfig) -> ScalarField:
        """Interior values i.i.d. uniform on (0, a0) times init_sign, from the (seed, i, j) generator."""
        vals = cfg.init_sign * (cfg.init_amplitude * node_uniforms(cfg.seed, cfg.grid.shape))
        return ScalarField(cfg.grid, vals)

    def _modified(self, cfg: SolverConfig) -> Optional[ModifiedPotential]:
        if cfg.potential_mode == "modified":
            return cached_modified_potential(cfg.theta, cfg.C)
        try:
            return cached_modified_potential(cfg.theta, cfg.C)
        except ValueError as exc:
            logger.debug("Modified potential unavailable for theta=%s C=%s: %s", cfg.theta, cfg.C, exc)
            return None

    def _derivative(self, cfg: SolverConfig) -> Callable[[np.ndarray], np.ndarray]:
        if cfg.potential_mode == "modified":
            m = cached_modified_potential(cfg.theta, cfg.C)
            return lambda u: modified_values(u, m)[1]
        p = PotentialParams(cfg.theta)
        return lambda u: w_prime(u, p, cfg.guard)

    def step(self, u: ScalarField, cfg: SolverConfig) -> Tuple[ScalarField, float]:
        """One forward Euler step; returns the new field and ||r||_inf of the input field."""
        r = flow_residual(u.values, cfg.grid.h, cfg.kappa, self._derivative(cfg)(u.values))
        new = u.values + cfg.dt * r
        if not np.all(np.isfinite(new)):
            i, j = np.argwhere(~np.isfinite(new))[0]
            raise InstabilityError(f"non-finite value at node ({i}, {j}) after one step", step=1, node=(int(i), int(j)))
        return ScalarField(cfg.grid, new), float(np.max(np.abs(r)))

    # -----------------------
    # Integration
    # -----------------------
    def run_to_equilibrium(self, cfg: SolverConfig) -> RunResult:
        dt_max = stability_bound(cfg)
        if cfg.dt > dt_max:
            raise StabilityError(
                f"dt={cfg.dt:g} exceeds the forward Euler bound h^2/(4 kappa) = {dt_max:.6g} "
                f"(h={cfg.grid.h:.6g}, kappa={cfg.kappa:g})",
                dt_max=dt_max,
            )

        started = time.perf_counter()
        p = PotentialParams(cfg.theta)
        u_theta = find_u_theta(p)
        m = self._modified(cfg)
        dW = self._derivative(cfg)
        g = cfg.grid
        h = g.h

        u = self.init_random(cfg).values.copy()
        r = np.zeros_like(u)
        steps_per_checkpoint = max(1, int(round(cfg.checkpoint_period / cfg.dt)))
        max_steps = int(math.ceil(cfg.t_max / cfg.dt - 1e-9))
        min_steps = int(math.ceil(cfg.t_min / cfg.dt - 1e-9))

        flags: List[str] = []
        history: List[Tuple[float, float]] = [(0.0, self._energy_value(u, cfg, p, m))]
        logger.info(
            "Run start: theta=%s kappa=%s N=%d dt=%g seed=%d mode=%s (dt_max=%.4g)",
            cfg.theta, cfg.kappa, g.N, cfg.dt, cfg.seed, cfg.potential_mode, dt_max,
        )

        bar = tqdm(total=cfg.t_max, unit="t", disable=not self.progress, leave=False)
        n = 0
        converged = False
        res = math.inf
        try:
            while True:
                flow_residual(u, h, cfg.kappa, dW(u), out=r)
                res = float(np.max(np.abs(r)))
                if not math.isfinite(res):
                    i, j = np.argwhere(~np.isfinite(r))[0]
                    raise InstabilityError(
                        f"non-finite residual at node ({i}, {j}), step {n}", step=n, node=(int(i), int(j))
                    )
                peak = max(float(u.max()), -float(u.min()))
                if peak > 1.0:
                    i, j = np.unravel_index(int(np.argmax(np.abs(u))), u.shape)
                    raise InstabilityError(
                        f"||u||_inf = {peak:.6g} > 1 at node ({i}, {j}), t={n * cfg.dt:g}",
                        step=n,
                        node=(int(i), int(j)),
                    )
                if n >= min_steps and res < cfg.residual_tol:
                    converged = True
                    break
                if n >= max_steps:
                    flags.append("t_max_reached")
                    break

                u += cfg.dt * r
                n += 1

                if n % steps_per_checkpoint == 0:
                    t = n * cfg.dt
                    e_now = self._energy_value(u, cfg, p, m)
                    e_prev = history[-1][1]
                    if e_now > e_prev + ENERGY_RISE_RTOL * abs(e_prev) and "energy_increase" not in flags:
                        logger.warning("Energy increased between checkpoints: %.12g -> %.12g at t=%g", e_prev, e_now, t)
                        flags.append("energy_increase")
                    history.append((t, e_now))
                    logger.info("t=%g residual=%.3e max u=%.6f energy=%.10f", t, res, float(u.max()), e_now)
                    self._checkpoint(u, cfg, t)
                    bar.update(cfg.checkpoint_period)
        finally:
            bar.close()

        t_final = n * cfg.dt
        final = ScalarField(g, u)
        t_checkpoint = math.ceil(t_final / cfg.checkpoint_period - 1e-9) * cfg.checkpoint_period

        report = energy(final, cfg.kappa, p, m) if final.values.max() <= 1.0 and final.values.min() >= -1.0 else None
        if report is None and cfg.potential_mode == "exact":
            raise InstabilityError(f"final field leaves [-1, 1] (max |u| = {np.max(np.abs(u)):.6g})", step=n)
        if cfg.potential_mode == "modified":
            nehari = nehari_residual_modified(final, cfg.kappa, m)
            total = report.total if report else modified_energy(final, cfg.kappa, m)
        else:
            nehari = nehari_residual(final, cfg.kappa, p, guard="clamped")
            total = report.total

        label, reasons = classify_with_reasons(final.max_value, final.min_value, cfg.trivial_tol)
        flags.extend(check_maximum_principle(label, final.max_value, final.min_value, u_theta))
        kc = kappa_c(cfg.theta, continuum_lambda1(g))
        if abs(cfg.kappa - kc) < NEAR_THRESHOLD_WIDTH:
            flags.append("near_threshold")

        result = RunResult(
            final_field=final,
            max_u=final.max_value,
            min_u=final.min_value,
            steps=n,
            t_final=t_final,
            t_checkpoint=t_checkpoint,
            energy=total,
            energy_report=report.to_dict() if report else {},
            nehari_residual=nehari,
            residual_inf=res,
            classification=label,
            converged=converged,
            u_theta=u_theta,
            flags=flags,
            reasons=reasons,
            energy_history=history,
            potential_mode=cfg.potential_mode,
            modified_potential=m.to_dict() if m else None,
            wall_time_s=time.perf_counter() - started,
        )
        if FAILURE_FLAGS.intersection(flags):
            logger.warning("Maximum principle check failed: %s", sorted(FAILURE_FLAGS.intersection(flags)))
        logger.info(
            "Run done: %s after %d steps (t=%g), max u=%.6f, energy=%.10f, residual=%.3e, flags=%s",
            label, n, t_final, result.max_u, total, res, flags,
        )
        return result

    def _energy_value(self, u: np.ndarray, cfg: SolverConfig, p: PotentialParams, m: Optional[ModifiedPotential]) -> float:
        field_ = ScalarField(cfg.grid, u)
        if cfg.potential_mode == "modified":
            return modified_energy(field_, cfg.kappa, m)
        return energy(field_, cfg.kappa, p).total

    def _checkpoint(self, u: np.ndarray, cfg: SolverConfig, t: float) -> None:
        if self.checkpoint_dir is None:
            return
        g = cfg.grid
        stem = result_stem(g.L, g.N, cfg.theta, cfg.kappa, t, run=cfg.seed)
        meta = {"theta": cfg.theta, "kappa": cfg.kappa, "t_final": t, "seed": cfg.seed}
        dump_field(ScalarField(g, u), self.checkpoint_dir, stem, meta, image=self.image)


def symmetric_config(cfg: SolverConfig) -> SolverConfig:
    """Same run with the sign of the initial data flipped."""
    return replace(cfg, init_sign=-cfg.init_sign)
