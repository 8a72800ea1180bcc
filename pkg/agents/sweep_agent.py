# agents/sweep_agent.py
"""
SweepAgent

Coordinates many solver runs:
  SolverConfig -> SolverAgent.run_to_equilibrium -> diagnostics -> SweepRecord -> RecordStore

- run_case: one (theta, kappa, seed) case. Exact-mode guard trips are rerun with the
  modified potential; other numerical failures become flagged records, never dropped.
- sweep_grid: Cartesian product of cases, optionally on a process pool; the output is
  ordered by (theta, kappa, seed) whatever the completion order.
- symmetry_experiment, threshold_probe: the two experiments built on top of run_case.
- Presets with published maxima (a theta scan and a kappa scan) and helpers that compare a sweep with them.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from agents.diagnostics_agent import FAILURE_FLAGS, TRIVIAL, kappa_c
from agents.record_store import RecordStore, SweepRecord, sort_records
from agents.solver_agent import NEAR_THRESHOLD_WIDTH, RunResult, SolverAgent, SolverConfig, stability_bound
from tools.errors import NoStraddleError, PhaseFieldError, PotentialDomainError, StabilityError, ValidationError
from tools.flory_huggins import PotentialParams, find_u_theta
from tools.grid import continuum_lambda1, discrete_lambda1

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

FAILED = "failed"
DICHOTOMY_MARGIN = 5e-3
SEED_AGREEMENT_TOL = 1e-4
REFERENCE_TOLERANCE = 5e-3
WIDE_TOLERANCE = 2e-2

FAST_NUMERICS: Dict[str, Any] = {"N": 64, "dt": 4e-4}
FULL_NUMERICS: Dict[str, Any] = {"N": 128, "dt": 1e-4}


# -------------------------
# Presets
# -------------------------
@dataclass(frozen=True)
class SweepPreset:
    """A parameter set with published maxima; `wide` lists (theta, kappa) pairs held to WIDE_TOLERANCE."""

    name: str
    thetas: Tuple[float, ...]
    kappas: Tuple[float, ...]
    reference: Tuple[Tuple[float, float, float], ...]
    u_theta: Tuple[Tuple[float, float], ...] = ()
    wide: Tuple[Tuple[float, float], ...] = ()

    def reference_max_u(self, theta: float, kappa: float) -> Optional[float]:
        for t, k, v in self.reference:
            if t == theta and k == kappa:
                return v
        return None

    def tolerance_for(self, theta: float, kappa: float) -> float:
        return WIDE_TOLERANCE if (theta, kappa) in self.wide else REFERENCE_TOLERANCE


THETA_SCAN = SweepPreset(
    name="table1",
    thetas=(0.3, 0.5, 0.7, 0.9, 0.95),
    kappas=(0.02,),
    reference=(
        (0.3, 0.02, 0.997414),
        (0.5, 0.02, 0.957504),
        (0.7, 0.02, 0.828634),
        (0.9, 0.02, 0.523093),
        (0.95, 0.02, 0.356520),
    ),
    u_theta=((0.3, 0.997414), (0.5, 0.957504), (0.7, 0.828635), (0.9, 0.525430), (0.95, 0.379485)),
    wide=((0.95, 0.02),),
)

KAPPA_SCAN = SweepPreset(
    name="table2",
    thetas=(0.7,),
    kappas=(0.02, 0.05, 0.10, 0.15, 0.20, 0.25, 0.28, 0.299),
    reference=(
        (0.7, 0.02, 0.828634),
        (0.7, 0.05, 0.828409),
        (0.7, 0.10, 0.821620),
        (0.7, 0.15, 0.791735),
        (0.7, 0.20, 0.717498),
        (0.7, 0.25, 0.560631),
        (0.7, 0.28, 0.375849),
        (0.7, 0.299, 0.087817),
    ),
    u_theta=((0.7, 0.828635),),
    wide=((0.7, 0.28), (0.7, 0.299)),
)

# "theta-scan" and "kappa-scan" are descriptive aliases of the same presets.
PRESETS: Dict[str, SweepPreset] = {
    THETA_SCAN.name: THETA_SCAN,
    KAPPA_SCAN.name: KAPPA_SCAN,
    "theta-scan": THETA_SCAN,
    "kappa-scan": KAPPA_SCAN,
}
NUMERICS_PRESETS: Dict[str, Dict[str, Any]] = {"fast": FAST_NUMERICS, "full": FULL_NUMERICS}


class SymmetryOutcome(NamedTuple):
    positive: SweepRecord
    negative: SweepRecord
    mismatch: float


@dataclass
class ThresholdEstimate:
    theta: float
    kappa_lo: float
    kappa_hi: float
    kappa_c: float
    kappa_c_discrete: float
    evaluations: List[Tuple[float, str]] = field(default_factory=list)

    @property
    def estimate(self) -> float:
        return 0.5 * (self.kappa_lo + self.kappa_hi)

    @property
    def width(self) -> float:
        return self.kappa_hi - self.kappa_lo

    def contains(self, kappa: float) -> bool:
        return self.kappa_lo <= kappa <= self.kappa_hi

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out.update(
            estimate=self.estimate,
            width=self.width,
            contains_kappa_c=self.contains(self.kappa_c),
            contains_kappa_c_discrete=self.contains(self.kappa_c_discrete),
            evaluations=[list(e) for e in self.evaluations],
        )
        return out


def _run_case_worker(args: Tuple[float, float, int, Dict[str, Any], float]) -> SweepRecord:
    """Process-pool entry point; must stay at module level to be picklable."""
    theta, kappa, seed, numerics, factor = args
    return SweepAgent(numerics=numerics, near_threshold_factor=factor).run_case(theta, kappa, seed)


class SweepAgent:
    """
    Parameters
    ----------
    numerics: Mapping
        SolverConfig overrides shared by every case (N, L, dt, t_max, potential_mode, ...).
    jobs: int
        Worker processes for sweep_grid; 1 runs in-process.
    near_threshold_factor: float
        t_max multiplier for cases with |kappa - kappa_c| < 0.01.
    store: RecordStore
        When given, every record produced by sweep_grid is persisted.
    progress: bool
        tqdm bar over cases.
    """

    def __init__(
        self,
        numerics: Optional[Mapping[str, Any]] = None,
        jobs: int = 1,
        near_threshold_factor: float = 4.0,
        store: Optional[RecordStore] = None,
        progress: bool = False,
    ):
        if jobs < 1:
            raise ValidationError(f"jobs must be >= 1, got {jobs!r}")
        if not near_threshold_factor >= 1:
            raise ValidationError(f"near_threshold_factor must be >= 1, got {near_threshold_factor!r}")
        self.numerics = dict(numerics or {})
        self.jobs = int(jobs)
        self.near_threshold_factor = float(near_threshold_factor)
        self.store = store
        self.progress = progress
        self.solver = SolverAgent()

    # -----------------------
    # Configuration
    # -----------------------
    def config_for(self, theta: float, kappa: float, seed: int = 1, numerics: Optional[Mapping[str, Any]] = None,
                   init_sign: int = 1) -> SolverConfig:
        """Validated config for one case, with t_max extended near the threshold."""
        overrides = {**self.numerics, **dict(numerics or {})}
        overrides["seed"] = seed
        overrides["init_sign"] = init_sign
        cfg = SolverConfig.from_overrides(theta, kappa, **overrides)
        dt_max = stability_bound(cfg)
        if cfg.dt > dt_max:
            raise StabilityError(
                f"dt={cfg.dt:g} exceeds h^2/(4 kappa) = {dt_max:.6g} for theta={theta}, kappa={kappa}",
                dt_max=dt_max,
            )
        kc = kappa_c(theta, continuum_lambda1(cfg.grid))
        if abs(kappa - kc) < NEAR_THRESHOLD_WIDTH and self.near_threshold_factor > 1:
            cfg = replace(cfg, t_max=cfg.t_max * self.near_threshold_factor)
        return cfg

    # -----------------------
    # Single cases
    # -----------------------
    def _solve(self, cfg: SolverConfig) -> Tuple[SweepRecord, Optional[RunResult]]:
        flags: List[str] = []
        kc = kappa_c(cfg.theta, continuum_lambda1(cfg.grid))
        if abs(cfg.kappa - kc) < NEAR_THRESHOLD_WIDTH and self.near_threshold_factor > 1:
            flags.append("t_max_extended")
        logger.info("Case start: theta=%s kappa=%s seed=%d sign=%+d", cfg.theta, cfg.kappa, cfg.seed, cfg.init_sign)

        result: Optional[RunResult] = None
        try:
            try:
                result = self.solver.run_to_equilibrium(cfg)
            except PotentialDomainError as exc:
                if cfg.potential_mode == "modified":
                    raise
                logger.warning("Guard tripped (%s); rerunning theta=%s kappa=%s with the modified potential",
                               exc, cfg.theta, cfg.kappa)
                flags.append("rerun_modified")
                result = self.solver.run_to_equilibrium(replace(cfg, potential_mode="modified"))
        except (ValidationError, StabilityError):
            raise
        except PhaseFieldError as exc:
            logger.exception("Case failed: theta=%s kappa=%s seed=%d: %s", cfg.theta, cfg.kappa, cfg.seed, exc)
            flags.append(f"error:{type(exc).__name__}")

        record = self._record(cfg, kc, result, flags)
        detect_anomalies([record])
        logger.info("Case done: theta=%s kappa=%s seed=%d -> %s max_u=%.6f flags=%s",
                    cfg.theta, cfg.kappa, cfg.seed, record.classification, record.max_u, record.flags)
        return record, result

    def _record(self, cfg: SolverConfig, kc: float, result: Optional[RunResult], flags: List[str]) -> SweepRecord:
        kc_h = kappa_c(cfg.theta, discrete_lambda1(cfg.grid))
        if result is None:
            nan = float("nan")
            return SweepRecord(
                theta=cfg.theta, kappa=cfg.kappa, kappa_c=kc, seed=cfg.seed,
                u_theta=find_u_theta(PotentialParams(cfg.theta)),
                max_u=nan, energy=nan, nehari_residual=nan, t_final=nan,
                classification=FAILED, flags=flags, min_u=nan, converged=False, kappa_c_discrete=kc_h,
            )
        return SweepRecord(
            theta=cfg.theta,
            kappa=cfg.kappa,
            kappa_c=kc,
            seed=cfg.seed,
            u_theta=result.u_theta,
            max_u=result.max_u,
            energy=result.energy,
            nehari_residual=result.nehari_residual,
            t_final=result.t_final,
            classification=result.classification,
            flags=flags + result.flags,
            min_u=result.min_u,
            converged=result.converged,
            kappa_c_discrete=kc_h,
            wall_time_s=result.wall_time_s,
        )

    def run_case(self, theta: float, kappa: float, seed: int = 1, numerics: Optional[Mapping[str, Any]] = None) -> SweepRecord:
        """One record for (theta, kappa, seed) from positive initial data."""
        record, _ = self._solve(self.config_for(theta, kappa, seed, numerics))
        return record

    # -----------------------
    # Grids
    # -----------------------
    def sweep_grid(
        self,
        thetas: Sequence[float],
        kappas: Sequence[float],
        seeds: Sequence[int] = (1,),
        numerics: Optional[Mapping[str, Any]] = None,
        jobs: Optional[int] = None,
    ) -> List[SweepRecord]:
        """
        Run every (theta, kappa, seed) combination. All configs are validated before the
        first case starts; failures of single cases show up as flagged records.
        """
        thetas, kappas, seeds = list(thetas), list(kappas), list(seeds)
        if not thetas or not kappas or not seeds:
            raise ValidationError("theta, kappa and seed lists must all be nonempty")
        merged = {**self.numerics, **dict(numerics or {})}
        cases = [(t, k, int(s)) for t in thetas for k in kappas for s in seeds]
        for t, k, s in cases:
            self.config_for(t, k, s, merged)

        jobs = self.jobs if jobs is None else int(jobs)
        logger.info("Sweep: %d case(s) on %d worker(s)", len(cases), jobs)
        records: List[SweepRecord] = []
        bar = tqdm(total=len(cases), unit="case", disable=not self.progress)
        try:
            if jobs <= 1:
                for t, k, s in cases:
                    records.append(self.run_case(t, k, s, merged))
                    bar.update(1)
            else:
                with ProcessPoolExecutor(max_workers=jobs) as pool:
                    futures = [
                        pool.submit(_run_case_worker, (t, k, s, merged, self.near_threshold_factor))
                        for t, k, s in cases
                    ]
                    for fut in as_completed(futures):
                        records.append(fut.result())
                        bar.update(1)
        finally:
            bar.close()

        records = sort_records(records)
        detect_anomalies(records)
        if self.store is not None:
            self.store.store_many(records)
        return records

    def run_preset(self, preset: SweepPreset, seeds: Sequence[int] = (1,), numerics: Optional[Mapping[str, Any]] = None,
                   jobs: Optional[int] = None) -> List[SweepRecord]:
        return self.sweep_grid(preset.thetas, preset.kappas, seeds, numerics, jobs)

    # -----------------------
    # Experiments
    # -----------------------
    def symmetry_experiment(self, theta: float, kappa: float, seed: int = 1,
                            numerics: Optional[Mapping[str, Any]] = None) -> SymmetryOutcome:
        """Runs with init_sign = +1 and -1 from the same seed; mismatch = ||u- + u+||_inf."""
        cfg_pos = self.config_for(theta, kappa, seed, numerics, init_sign=1)
        kc = kappa_c(theta, continuum_lambda1(cfg_pos.grid))
        if not kappa < kc:
            logger.warning("symmetry_experiment above threshold (kappa=%s >= kappa_c=%s): both runs should be trivial",
                           kappa, kc)
        pos, res_pos = self._solve(cfg_pos)
        neg, res_neg = self._solve(replace(cfg_pos, init_sign=-1))
        if res_pos is None or res_neg is None:
            mismatch = float("nan")
        else:
            mismatch = float(np.max(np.abs(res_pos.final_field.values + res_neg.final_field.values)))
        logger.info("Symmetry: theta=%s kappa=%s mismatch=%.3e energies %.12g / %.12g",
                    theta, kappa, mismatch, pos.energy, neg.energy)
        return SymmetryOutcome(pos, neg, mismatch)

    def threshold_probe(
        self,
        theta: float,
        kappa_lo: float,
        kappa_hi: float,
        seeds: Sequence[int] = (1,),
        numerics: Optional[Mapping[str, Any]] = None,
        resolution: float = 5e-3,
    ) -> ThresholdEstimate:
        """
        Bisection on kappa with "some seed ends nontrivial" as the predicate. The lower end
        must be nontrivial and the upper end trivial; otherwise NoStraddleError.
        """
        if not (0 < kappa_lo < kappa_hi):
            raise ValidationError(f"need 0 < kappa_lo < kappa_hi, got [{kappa_lo}, {kappa_hi}]")
        if not resolution > 0:
            raise ValidationError(f"resolution must be positive, got {resolution!r}")
        seeds = list(seeds) or [1]
        evaluations: List[Tuple[float, str]] = []

        def nontrivial(kappa: float) -> bool:
            labels = [self.run_case(theta, kappa, s, numerics).classification for s in seeds]
            if FAILED in labels:
                raise NoStraddleError(f"case theta={theta} kappa={kappa} failed; cannot classify")
            if len(set(labels)) > 1:
                logger.warning("Seeds disagree at kappa=%s: %s", kappa, labels)
            label = next((lab for lab in labels if lab != TRIVIAL), TRIVIAL)
            evaluations.append((kappa, label))
            return label != TRIVIAL

        lo_nt, hi_nt = nontrivial(kappa_lo), nontrivial(kappa_hi)
        if lo_nt == hi_nt:
            raise NoStraddleError(
                f"bracket [{kappa_lo}, {kappa_hi}] does not straddle the threshold at theta={theta}: "
                f"both ends classify as {evaluations[0][1]}"
            )
        if not lo_nt:
            raise NoStraddleError(
                f"bracket [{kappa_lo}, {kappa_hi}] is inverted at theta={theta}: trivial below, nontrivial above"
            )

        lo, hi = kappa_lo, kappa_hi
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            if nontrivial(mid):
                lo = mid
            else:
                hi = mid
            logger.info("Threshold bracket for theta=%s: [%.6f, %.6f]", theta, lo, hi)

        grid = self.config_for(theta, kappa_lo, seeds[0], numerics).grid
        estimate = ThresholdEstimate(
            theta=theta,
            kappa_lo=lo,
            kappa_hi=hi,
            kappa_c=kappa_c(theta, continuum_lambda1(grid)),
            kappa_c_discrete=kappa_c(theta, discrete_lambda1(grid)),
            evaluations=evaluations,
        )
        logger.info("Threshold estimate for theta=%s: %.6f (kappa_c=%.6f, discrete %.6f)",
                    theta, estimate.estimate, estimate.kappa_c, estimate.kappa_c_discrete)
        return estimate


# -------------------------
# Analysis of record lists
# -------------------------
def detect_anomalies(
    records: Iterable[SweepRecord],
    margin: float = DICHOTOMY_MARGIN,
    seed_tol: float = SEED_AGREEMENT_TOL,
) -> List[str]:
    """
    Adds anomaly flags in place and returns one message per new anomaly.

    - anomaly:dichotomy: nontrivial with kappa >= kappa_c + margin, or trivial with
      kappa <= kappa_c - margin after a converged run. Cases inside the margin get the
      plain flag "dichotomy_unresolved" when they disagree with the threshold.
    - anomaly:maximum_principle: a maximum-principle failure flag from the solver.
    - anomaly:seed_disagreement: runs of the same (theta, kappa) whose max_u differ by more than seed_tol.
    """
    records = list(records)
    messages: List[str] = []

    def flag(rec: SweepRecord, name: str, message: str) -> None:
        if name not in rec.flags:
            rec.flags.append(name)
            messages.append(message)
            logger.warning("Anomaly %s: %s", rec.key, message)

    for rec in records:
        if rec.classification == FAILED:
            continue
        nontrivial = rec.classification != TRIVIAL
        if nontrivial and rec.kappa >= rec.kappa_c + margin:
            flag(rec, "anomaly:dichotomy", f"{rec.key} nontrivial although kappa >= kappa_c={rec.kappa_c:.6g}")
        elif not nontrivial and rec.converged and rec.kappa <= rec.kappa_c - margin:
            flag(rec, "anomaly:dichotomy", f"{rec.key} trivial although kappa < kappa_c={rec.kappa_c:.6g}")
        elif nontrivial == (rec.kappa >= rec.kappa_c) and "dichotomy_unresolved" not in rec.flags:
            rec.flags.append("dichotomy_unresolved")
        if FAILURE_FLAGS.intersection(rec.flags):
            flag(rec, "anomaly:maximum_principle", f"{rec.key} violates the maximum principle: "
                 f"{sorted(FAILURE_FLAGS.intersection(rec.flags))}")

    groups: Dict[Tuple[float, float], List[SweepRecord]] = {}
    for rec in records:
        if math.isfinite(rec.max_u):
            groups.setdefault((rec.theta, rec.kappa), []).append(rec)
    for (theta, kappa), group in groups.items():
        if len(group) < 2:
            continue
        spread = max(r.max_u for r in group) - min(r.max_u for r in group)
        if spread > seed_tol:
            for rec in group:
                flag(rec, "anomaly:seed_disagreement",
                     f"theta={theta} kappa={kappa}: max_u spread {spread:.3e} across seeds exceeds {seed_tol:g}")
    return messages


def compare_with_reference(records: Iterable[SweepRecord], preset: SweepPreset,
                           tolerance: Optional[float] = None) -> List[Dict[str, Any]]:
    """Per record: reference max_u, deviation and pass/fail at the preset (or given) tolerance."""
    rows = []
    for rec in sort_records(records):
        ref = preset.reference_max_u(rec.theta, rec.kappa)
        if ref is None:
            continue
        tol = tolerance if tolerance is not None else preset.tolerance_for(rec.theta, rec.kappa)
        deviation = rec.max_u - ref
        rows.append({
            "theta": rec.theta,
            "kappa": rec.kappa,
            "seed": rec.seed,
            "max_u": rec.max_u,
            "reference": ref,
            "deviation": deviation,
            "tolerance": tol,
            "passed": bool(math.isfinite(deviation) and abs(deviation) <= tol),
        })
    return rows


def monotonicity_verdict(records: Iterable[SweepRecord]) -> Dict[str, Any]:
    """
    Per theta, max_u (averaged over seeds) must strictly decrease as kappa increases.
    Consecutive trivial cases are allowed to tie.
    """
    by_theta: Dict[float, Dict[float, List[SweepRecord]]] = {}
    for rec in records:
        if rec.classification == FAILED:
            continue
        by_theta.setdefault(rec.theta, {}).setdefault(rec.kappa, []).append(rec)

    violations = []
    series = {}
    for theta in sorted(by_theta):
        points = []
        for kappa in sorted(by_theta[theta]):
            group = by_theta[theta][kappa]
            points.append((kappa, float(np.mean([r.max_u for r in group])), all(r.classification == TRIVIAL for r in group)))
        series[theta] = [(k, v) for k, v, _ in points]
        for (k1, v1, t1), (k2, v2, t2) in zip(points, points[1:]):
            if v2 >= v1 and not (t1 and t2):
                violations.append({"theta": theta, "kappa_pair": [k1, k2], "max_u_pair": [v1, v2]})
    return {
        "monotone": not violations,
        "violations": violations,
        "series": {str(t): [list(p) for p in pts] for t, pts in series.items()},
    }
