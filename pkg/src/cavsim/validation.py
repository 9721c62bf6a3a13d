"""Cross-backend certification suites behind the ``validate`` CLI verb.

``quick`` cross-checks the closed form, the dense map and the branch backend on
the first cavity in a few seconds.  ``full`` re-runs the branch-vs-dense
certification over the whole experimental grid and certifies the dense backend
against the brute-force integrator.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import analytic, lindblad
from .evolution import Scenario, StageKind, branch_densify, branch_run, run_scenario, stage_step
from .hilbert import trace_distance

CERT_GRID = (0.0, 0.05, 0.5, 1.0)
CERT_AMPLITUDES = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _margin_truncation(amplitude, extra: int = 10) -> int:
    from .evolution import default_truncation

    return default_truncation(amplitude) + extra


def _stage1_scenario(alpha, g, t1: float = 1000.0) -> Scenario:
    sc = Scenario().variant(g=g, q=0.0, alpha=alpha)
    return sc.variant(
        stage_durations=(t1, 0.0, 0.0, 0.0, 0.0),
        n1=_margin_truncation(alpha),
        n2=_margin_truncation(sc.beta),
    )


def stage1_equivalence(alphas, gs, times, tol: float = 1e-8) -> list[CheckResult]:
    """Analytic vs dense vs branch on the first cavity."""
    results = []
    worst_ad = worst_bd = 0.0
    for alpha in alphas:
        for g in gs:
            sc = _stage1_scenario(alpha, g, t1=float(max(times)))
            dense = run_scenario(sc, times)
            branch = branch_run(sc, times)
            for i, t in enumerate(times):
                ref = analytic.rho_stage1(float(t), sc)
                worst_ad = max(worst_ad, trace_distance(ref, dense.states[i]))
                worst_bd = max(
                    worst_bd, trace_distance(dense.states[i], branch.dense_state(i))
                )
    results.append(
        CheckResult(
            "analytic-vs-dense (stage 1)",
            worst_ad < tol,
            f"worst trace distance {worst_ad:.3e} (tol {tol:.1e})",
        )
    )
    results.append(
        CheckResult(
            "branch-vs-dense (stage 1)",
            worst_bd < tol,
            f"worst trace distance {worst_bd:.3e} (tol {tol:.1e})",
        )
    )
    return results


def concurrence_landmark(tol: float = 1e-6) -> CheckResult:
    """Lossless peak sqrt(1 - e^{-4|a|^2}) at omega_1 t = pi/2 and zero at pi."""
    sc = _stage1_scenario(1.0, 0.0)
    t_peak = 0.5 * math.pi / sc.omega_1
    peak = analytic.concurrence_stage1(t_peak, sc)
    zero = analytic.concurrence_stage1(2.0 * t_peak, sc)
    expected = math.sqrt(1.0 - math.exp(-4.0))
    ok = abs(peak - expected) < tol and zero < tol
    return CheckResult(
        "concurrence landmark",
        ok,
        f"peak {peak:.8f} vs {expected:.8f}, zero crossing {zero:.2e}",
    )


def snapshot_invariants(tol_pos: float = -1e-9) -> CheckResult:
    """Hermiticity/trace/positivity of dense snapshots along a lossy traversal."""
    sc = Scenario().variant(g=0.5, q=0.5, alpha=1.0, beta=1.0)
    traj = run_scenario(sc, np.linspace(0.0, sc.total_time(), 16))
    worst = 0.0
    for st in traj.states:
        st.validate()
        worst = min(worst, float(np.linalg.eigvalsh(st.data)[0]))
    return CheckResult(
        "snapshot invariants",
        worst >= tol_pos,
        f"minimum eigenvalue {worst:.3e} (tol {tol_pos:.1e})",
    )


def quick_checks() -> list[CheckResult]:
    times = np.array([120.0, 400.0, 900.0])
    results = stage1_equivalence((1.0,), (0.05,), times)
    results.append(concurrence_landmark())
    results.append(snapshot_invariants())
    return results


def branch_certification(tol: float = 1e-8, n_times: int = 9) -> CheckResult:
    """Branch vs dense over the full (alpha, beta, g, q) experimental grid."""
    from .hilbert import trace_distance_below

    worst_detail = ""
    passed = True
    t0 = time.perf_counter()
    for alpha in CERT_AMPLITUDES:
        for beta in CERT_AMPLITUDES:
            sc = Scenario().variant(
                alpha=alpha,
                beta=beta,
                n1=_margin_truncation(alpha),
                n2=_margin_truncation(beta),
            )
            times = np.linspace(0.0, sc.total_time(), n_times)
            for g in CERT_GRID:
                for q in CERT_GRID:
                    run_sc = sc.variant(g=g, q=q)
                    dense = run_scenario(run_sc, times)
                    branch = branch_run(run_sc, times)
                    for i in range(times.size):
                        if not trace_distance_below(
                            dense.states[i], branch.dense_state(i), tol
                        ):
                            passed = False
                            worst_detail = (
                                f"alpha={alpha} beta={beta} g={g} q={q} t={times[i]:.1f}"
                            )
    elapsed = time.perf_counter() - t0
    detail = f"144 runs in {elapsed:.1f}s" + (f"; first failure {worst_detail}" if worst_detail else "")
    return CheckResult("branch-vs-dense (full grid)", passed, detail)


def oracle_certification(tol: float = 1e-6, checkpoints: int = 10) -> CheckResult:
    """Dense factorized maps vs direct master-equation integration."""
    sc = Scenario().variant(g=0.05, q=0.05, alpha=1.0, beta=1.0, n1=20, n2=20)
    times = np.linspace(0.0, sc.total_time(), checkpoints)
    t0 = time.perf_counter()
    dense = run_scenario(sc, times)
    oracle = lindblad.run_oracle(sc, times)
    worst = max(
        trace_distance(dense.states[i], oracle.states[i]) for i in range(times.size)
    )
    elapsed = time.perf_counter() - t0
    return CheckResult(
        "dense-vs-oracle (5 stages)",
        worst < tol,
        f"worst trace distance {worst:.3e} (tol {tol:.1e}) in {elapsed:.1f}s",
    )


def frame_invariance(tol: float = 1e-8) -> CheckResult:
    """Pairwise concurrences agree between the rotating and lab frames."""
    sc = Scenario().variant(g=0.05, q=0.5, alpha=1.0, beta=0.5)
    times = np.linspace(0.0, sc.total_time(), 7)
    rot = run_scenario(sc, times).records()
    lab = run_scenario(sc.variant(frame="lab"), times).records()
    worst = max(
        max(
            abs(a.c_af1 - b.c_af1), abs(a.c_af2 - b.c_af2), abs(a.c_f1f2 - b.c_f1f2)
        )
        for a, b in zip(rot, lab)
    )
    return CheckResult(
        "frame invariance", worst < tol, f"worst concurrence shift {worst:.3e}"
    )


def semigroup_property(tol: float = 1e-9) -> CheckResult:
    """stage_step(t1+t2) equals stage_step(t2) after stage_step(t1), per stage."""
    sc = Scenario().variant(g=0.5, q=0.3, alpha=1.0, beta=0.8)
    from .evolution import initial_density

    rho = initial_density(sc)
    worst = 0.0
    for stage in (StageKind.CAVITY1, StageKind.FREE1, StageKind.RAMSEY, StageKind.CAVITY2):
        one = stage_step(rho, stage, 9.0, sc)
        two = stage_step(stage_step(rho, stage, 4.0, sc), stage, 5.0, sc)
        worst = max(worst, trace_distance(one, two))
    return CheckResult("semigroup property", worst < tol, f"worst trace distance {worst:.3e}")


def full_checks() -> list[CheckResult]:
    results = quick_checks()
    results.append(semigroup_property())
    results.append(frame_invariance())
    results.append(branch_certification())
    results.append(oracle_certification())
    return results
