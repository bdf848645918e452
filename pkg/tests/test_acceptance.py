"""Acceptance criteria 1-7.

Each test prints one ``CRITERION k: PASS|FAIL`` line (collected again in the
terminal summary). Run standalone with ``python tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest

from ricsolve import bench, diagnostics
from ricsolve.certify import run_certify
from ricsolve.problem_io import gen_laplacian_problem, gen_random_problem
from ricsolve.rksm import SolverOptions
from ricsolve.shifts import RationalNodeSet, grid_search_shift, next_shift, spectral_region

try:
    from conftest import record_criterion
except ImportError:  # pragma: no cover
    from tests.conftest import record_criterion

N_SUITE = 50
SUITE_SEED = 1
BOUND_NAMES = ("cost_gap", "stability_perturbation", "iterate_gap")
IDENTITY_NAMES = ("residual_formula_vs_dense", "residual_sqrt2_semi", "galerkin_orthogonality",
                  "eigenresidual", "arnoldi", "closed_loop_arnoldi")


def suite_instances():
    """Fifty random stable instances with n <= 100 and q, p <= 3."""
    rng = np.random.default_rng(SUITE_SEED)
    out = []
    for i in range(N_SUITE):
        n = int(rng.integers(10, 101))
        q, p = (int(v) for v in rng.integers(1, 4, size=2))
        out.append(gen_random_problem(n, q, p, seed=i))
    return out


@pytest.fixture(scope="module")
def suite():
    results = []
    for inst in suite_instances():
        opts = SolverOptions(tol=1e-10, max_dim=min(inst.n, 300))
        results.append(run_certify(inst, opts))
    return results


@pytest.fixture(scope="module")
def laplacian_traces():
    return [run_certify(gen_laplacian_problem(10, t), SolverOptions(tol=1e-10))
            for t in bench.TABLE1_T]


def test_criterion_1_table1():
    t0 = time.perf_counter()
    res = bench.run_table1(n0=30)
    elapsed = time.perf_counter() - t0
    ok = res.passed and elapsed < 120
    detail = "; ".join(f"{k}: {d}" for k, (_, d) in res.checks.items())
    assert record_criterion(1, ok, f"{detail}; {elapsed:.1f}s"), res.summary_lines()


def test_criterion_2_toeplitz_contrast():
    t0 = time.perf_counter()
    res = bench.run_toeplitz(n=700)
    elapsed = time.perf_counter() - t0
    ok = res.passed and elapsed < 60
    detail = "; ".join(f"{k}: {d}" for k, (_, d) in res.checks.items())
    assert record_criterion(2, ok, f"{detail}; {elapsed:.1f}s"), res.summary_lines()


def test_criterion_3_gamma_rate():
    t0 = time.perf_counter()
    g = diagnostics.gamma_rate(1.25)
    res = bench.run_grcar(n=400)
    elapsed = time.perf_counter() - t0
    lo, hi = bench.GRCAR_RATE_WINDOW
    rate = res.extra["fitted_rate"]
    ok = abs(g - 0.25) <= 1e-14 and lo <= rate <= hi and elapsed < 120
    assert record_criterion(
        3, ok, f"gamma(1.25) = {g!r}; Grcar n=400 fitted early rate {rate:.4f} "
               f"(window [{lo}, {hi}]); gamma at measured disk "
               f"{res.extra['gamma_measured_disk']:.4f}; {elapsed:.1f}s")


def test_criterion_4_residual_identities(suite):
    worst = {name: 0.0 for name in IDENTITY_NAMES}
    fails = 0
    count = 0
    for r in suite:
        for c in r.identities:
            if c.name in worst:
                count += 1
                worst[c.name] = max(worst[c.name], c.value)
                fails += not c.passed
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert record_criterion(4, fails == 0 and count > 0,
                            f"{count} checks on {len(suite)} instances, {fails} failed; worst: {detail}")


def test_criterion_5_oracle_equivalence(suite):
    worst_err = max(r.oracle_rel_error for r in suite)
    unconverged = sum(not r.record.converged for r in suite)
    eb = [rep for r in suite for rep in r.reports if rep.name == "error_bound"]
    viol = sum(rep.violated for rep in eb)
    applicable = sum(rep.hypothesis_satisfied for rep in eb)
    ok = worst_err <= 1e-6 and viol == 0 and unconverged == 0
    assert record_criterion(5, ok, f"max ||X_k - X||_F/||X||_F = {worst_err:.2e}; error bound "
                                   f"{applicable}/{len(eb)} applicable, {viol} violations; "
                                   f"{unconverged} unconverged")


def test_criterion_6_bound_certificates(suite, laplacian_traces):
    reps = [rep for r in (*suite, *laplacian_traces) for rep in r.reports if rep.name in BOUND_NAMES]
    viol = [rep for rep in reps if rep.violated]
    na = sum(not rep.hypothesis_satisfied for rep in reps)
    by_name = {n: sum(rep.name == n and rep.hypothesis_satisfied for rep in reps) for n in BOUND_NAMES}
    pad_fail = sum(not c.passed for r in (*suite, *laplacian_traces)
                   for c in r.identities if c.name == "padding_residual")
    ok = not viol and pad_fail == 0 and all(by_name.values())
    assert record_criterion(6, ok, f"{len(reps)} reports, {len(viol)} violations, {na} not applicable; "
                                   f"applicable per bound {by_name}; padding identity failures "
                                   f"{pad_fail}")


def random_node_set(rng):
    m = int(rng.integers(1, 12))
    eigs = -(rng.uniform(0.1, 10.0, m) + 1j * rng.uniform(-5.0, 5.0, m) * rng.integers(0, 2, m))
    eigs = np.concatenate([eigs, np.conj(eigs[eigs.imag != 0])])
    k = int(rng.integers(0, 8))
    poles = rng.uniform(0.1, 12.0, k) + 1j * rng.uniform(-4.0, 4.0, k) * rng.integers(0, 2, k)
    return eigs, poles


def test_criterion_7_shift_oracle():
    rng = np.random.default_rng(7)
    h = 1e-4
    worst = 0.0
    fails = 0
    for _ in range(100):
        eigs, poles = random_node_set(rng)
        region = spectral_region(eigs)
        nodes = RationalNodeSet(poles=poles, zeros=eigs)
        s = next_shift(region, nodes)
        f_s = float(nodes.log_objective(s))
        z_grid, f_grid = grid_search_shift(region, nodes, h=h)
        # objective change across one grid step bounds the grid's own error
        step = 0.0
        for a, b in region.edges():
            z = a + (b - a) * np.linspace(0.0, 1.0, int(np.ceil(1 / h)) + 1)
            v = nodes.log_objective(z)
            step = max(step, float(np.max(np.abs(np.diff(v)))))
        gap = abs(f_s - f_grid)
        worst = max(worst, gap / max(step, 1e-300))
        fails += gap > step + 1e-12 or not region.contains(s, tol=1e-8)
    assert record_criterion(7, fails == 0, f"100 node sets, {fails} disagreements beyond grid "
                                           f"resolution (max |f(s) - f(grid)| / grid step "
                                           f"{worst:.2f})")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
