"""Monte Carlo estimation of exceedance and exit probabilities.

Across a descending mass ladder the same path indices reuse the same
noise streams, so the estimated probabilities form a coupled comparison:
the m-th and m'-th rows differ only through the mass, never through the
randomness.  Paths are integrated in fixed-size chunks; the chunk
layout is a pure function of the plan, and worker threads only decide
*when* a chunk runs, never *what* it computes, so tables are bit-identical
at any thread count.

Paths whose samples go non-finite are quarantined: they are excluded
from the estimators and reported in a separate column.  A quarantined
fraction above 1% fails the run.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional

import numpy as np

from .errors import DomainError, QuarantineExceeded
from .integrators import NoiseStream, run_coupled_batch
from .models import Model

CHUNK_PATHS = 512
QUARANTINE_FRACTION = 0.01


def wilson_interval(successes, n, confidence=0.95):
    """Wilson score interval for a binomial proportion.

    Returns (low, high).  At the default 95% level the critical value is
    z = 1.959964.
    """
    if n < 1 or successes < 0 or successes > n:
        raise DomainError(f"need 0 <= successes <= n, n >= 1; got {successes}/{n}")
    if not 0.0 < confidence < 1.0:
        raise DomainError("confidence must lie in (0, 1)")
    z = NormalDist().inv_cdf(0.5 * (1.0 + confidence))
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# ---------------------------------------------------------------------------
# Plans and results


@dataclass(frozen=True)
class ExperimentPlan:
    """Fully-resolved description of one coupled Monte Carlo experiment.

    Every estimate derived from a plan is a pure function of it: the
    table produced is identical across reruns and thread counts.
    """

    model: Model
    x0: np.ndarray
    T: float
    dt: float
    epsilons: tuple
    masses: tuple
    n_paths: int
    master_seed: int
    v0: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if self.v0 is not None:
            object.__setattr__(self, "v0", np.atleast_1d(np.asarray(self.v0, dtype=float)))
        eps = self.epsilons
        if np.isscalar(eps):
            eps = (float(eps),)
        object.__setattr__(self, "epsilons", tuple(float(e) for e in eps))
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))
        if not self.masses or any(m <= 0 for m in self.masses):
            raise DomainError("masses must be strictly positive")
        if any(b >= a for a, b in zip(self.masses, self.masses[1:])):
            raise DomainError("masses must be strictly decreasing")
        if any(e <= 0 for e in self.epsilons):
            raise DomainError("epsilon thresholds must be positive")
        if self.T < 0:
            raise DomainError("horizon T must be nonnegative")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if self.T > 0 and self.dt > self.T:
            raise DomainError("dt must not exceed the horizon T")
        if self.n_paths < 1:
            raise DomainError("n_paths must be at least 1")
        if self.master_seed < 0:
            raise DomainError("master_seed must be nonnegative")


@dataclass
class MassResult:
    """Per-path summaries for one mass of the ladder."""

    mass: float
    sup_distance: np.ndarray
    exit_time_m: np.ndarray
    exit_time_limit: np.ndarray
    aborted: np.ndarray

    @property
    def n_completed(self):
        return int(len(self.aborted) - self.aborted.sum())


@dataclass
class LadderResults:
    plan: ExperimentPlan
    per_mass: list


def _resolve_threads(threads):
    if threads is None or threads == 0:
        env = os.environ.get("KRAMERS_THREADS", "")
        if env.strip():
            threads = int(env)
        else:
            threads = os.cpu_count() or 1
    return max(1, int(threads))


def run_experiment(plan: ExperimentPlan, threads=0) -> LadderResults:
    """Integrate the whole mass ladder, reusing path seeds across masses.

    Work items are (mass, path chunk) pairs laid out deterministically;
    results are merged in layout order, so the outcome does not depend
    on the degree of parallelism.
    """
    threads = _resolve_threads(threads)
    model = plan.model
    chunks = [
        (lo, min(lo + CHUNK_PATHS, plan.n_paths))
        for lo in range(0, plan.n_paths, CHUNK_PATHS)
    ]
    items = [(mi, lo, hi) for mi in range(len(plan.masses)) for lo, hi in chunks]

    def work(item):
        mi, lo, hi = item
        streams = [
            NoiseStream(plan.master_seed, i, model.dim_k, plan.dt)
            for i in range(lo, hi)
        ]
        return run_coupled_batch(
            model, plan.x0, plan.v0, plan.masses[mi], plan.T, plan.dt, streams
        )

    if threads == 1:
        outputs = [work(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(work, items))

    per_mass = []
    n_chunks = len(chunks)
    for mi, mass in enumerate(plan.masses):
        batch = outputs[mi * n_chunks : (mi + 1) * n_chunks]
        result = MassResult(
            mass=mass,
            sup_distance=np.concatenate([b.sup_distance for b in batch]),
            exit_time_m=np.concatenate([b.exit_time_m for b in batch]),
            exit_time_limit=np.concatenate([b.exit_time_limit for b in batch]),
            aborted=np.concatenate([b.aborted for b in batch]),
        )
        frac = result.aborted.mean() if plan.n_paths else 0.0
        if frac > QUARANTINE_FRACTION:
            raise QuarantineExceeded(
                f"{frac:.1%} of paths aborted with non-finite samples at m={mass}"
            )
        per_mass.append(result)
    return LadderResults(plan=plan, per_mass=per_mass)


# ---------------------------------------------------------------------------
# Tables


def _fmt(value):
    return repr(float(value))


@dataclass
class ConvergenceRow:
    m: float
    epsilon: float
    p_exceed: float
    ci_low: float
    ci_high: float
    p_exit: float
    n_limit_exit: int
    aborted: int


@dataclass
class ConvergenceTable:
    """Exceedance/exit probability estimates across the mass ladder."""

    rows: list
    confidence: float = 0.95

    CSV_HEADER = "m,epsilon,p_exceed,ci_low,ci_high,p_exit,aborted"

    def to_csv(self, comments=()) -> str:
        lines = [f"# {c}" for c in comments]
        lines.append(self.CSV_HEADER)
        for r in self.rows:
            lines.append(
                ",".join(
                    [
                        _fmt(r.m), _fmt(r.epsilon), _fmt(r.p_exceed),
                        _fmt(r.ci_low), _fmt(r.ci_high), _fmt(r.p_exit),
                        str(r.aborted),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "confidence": self.confidence,
            "rows": [
                {
                    "m": r.m, "epsilon": r.epsilon, "p_exceed": r.p_exceed,
                    "ci_low": r.ci_low, "ci_high": r.ci_high, "p_exit": r.p_exit,
                    "numerical_limit_exit_count": r.n_limit_exit,
                    "aborted": r.aborted,
                }
                for r in self.rows
            ],
        }

    def to_gnuplot(self) -> str:
        """Two-column blocks (m, p_exceed), one block per epsilon; log-x ready."""
        lines = []
        for eps in sorted({r.epsilon for r in self.rows}):
            lines.append(f"# epsilon = {_fmt(eps)}")
            lines.append("# m p_exceed")
            for r in self.rows:
                if r.epsilon == eps:
                    lines.append(f"{_fmt(r.m)} {_fmt(r.p_exceed)}")
            lines.append("")
        return "\n".join(lines)


@dataclass
class ExitRow:
    m: float
    p_exit: float
    ci_low: float
    ci_high: float
    aborted: int


@dataclass
class ExitTable:
    """Exit-time probability estimates P{tau_m <= T} across the ladder."""

    rows: list
    confidence: float = 0.95

    CSV_HEADER = "m,p_exit,ci_low,ci_high,aborted"

    def to_csv(self, comments=()) -> str:
        lines = [f"# {c}" for c in comments]
        lines.append(self.CSV_HEADER)
        for r in self.rows:
            lines.append(
                ",".join(
                    [_fmt(r.m), _fmt(r.p_exit), _fmt(r.ci_low), _fmt(r.ci_high), str(r.aborted)]
                )
            )
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "confidence": self.confidence,
            "rows": [
                {
                    "m": r.m, "p_exit": r.p_exit,
                    "ci_low": r.ci_low, "ci_high": r.ci_high, "aborted": r.aborted,
                }
                for r in self.rows
            ],
        }

    def to_gnuplot(self) -> str:
        lines = ["# m p_exit"]
        for r in self.rows:
            lines.append(f"{_fmt(r.m)} {_fmt(r.p_exit)}")
        lines.append("")
        return "\n".join(lines)


def exceedance_table(results: LadderResults, confidence=0.95) -> ConvergenceTable:
    plan = results.plan
    rows = []
    for res in results.per_mass:
        ok = ~res.aborted
        n = int(ok.sum())
        sup = res.sup_distance[ok]
        exited_m = np.isfinite(res.exit_time_m[ok])
        exited_l = np.isfinite(res.exit_time_limit[ok])
        for eps in plan.epsilons:
            exceed = int(np.sum(sup > eps))
            low, high = wilson_interval(exceed, n, confidence)
            rows.append(
                ConvergenceRow(
                    m=res.mass,
                    epsilon=eps,
                    p_exceed=exceed / n,
                    ci_low=low,
                    ci_high=high,
                    p_exit=float(exited_m.sum()) / n,
                    n_limit_exit=int(exited_l.sum()),
                    aborted=int(res.aborted.sum()),
                )
            )
    return ConvergenceTable(rows=rows, confidence=confidence)


def exit_table(results: LadderResults, confidence=0.95) -> ExitTable:
    rows = []
    for res in results.per_mass:
        ok = ~res.aborted
        n = int(ok.sum())
        exited = int(np.isfinite(res.exit_time_m[ok]).sum())
        low, high = wilson_interval(exited, n, confidence)
        rows.append(
            ExitRow(
                m=res.mass, p_exit=exited / n, ci_low=low, ci_high=high,
                aborted=int(res.aborted.sum()),
            )
        )
    return ExitTable(rows=rows, confidence=confidence)


def estimate_exceedance(plan: ExperimentPlan, threads=0, confidence=0.95) -> ConvergenceTable:
    """Estimate P{sup_t d_inf(x_m(t), x(t)) > eps} across the mass ladder."""
    return exceedance_table(run_experiment(plan, threads=threads), confidence)


def estimate_exit_probability(plan: ExperimentPlan, threads=0, confidence=0.95) -> ExitTable:
    """Estimate P{tau_m <= T} (inertial process exits by the horizon)."""
    return exit_table(run_experiment(plan, threads=threads), confidence)
