"""Acceptance criteria, one test each.

Every check records a PASS/FAIL line with its measured values; the lines are
printed in the pytest terminal summary, or directly when this file is run as
a script.
"""

import math
import time

import numpy as np
import pytest

from fxtsp import certify as cert
from fxtsp import gradflow as gf
from fxtsp import highorder as ho
from fxtsp import oracle_suite, sim
from fxtsp.model import boundary_layer_field, decay_model, reduced_field

RESULTS = []
MAGNITUDES = [1.0, 10.0, 1e2, 1e3, 1e4, 1e6]


def record(number, title, checks, elapsed, limit=None):
    """checks: list of (label, ok, measured text)."""
    if limit is not None:
        checks = checks + [("runtime", elapsed < limit, f"{elapsed:.2f} s (limit {limit:g} s)")]
    ok = all(c[1] for c in checks)
    failed = [c for c in checks if not c[1]]
    shown = failed or checks
    detail = "; ".join(f"{label} {text}" for label, _, text in shown)
    RESULTS.append(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} | {detail}")
    return ok, checks


def _assert(outcome):
    ok, checks = outcome
    assert ok, [c for c in checks if not c[1]]


def _within(value, lo, hi):
    return lo <= value <= hi


def check_gradflow_constants():
    start = time.perf_counter()
    rep = gf.reproduce_reference_example()
    q = {k: v["value"] for k, v in rep["quantities"].items()}
    elapsed = time.perf_counter() - start
    checks = [
        ("k_lower", abs(q["k_lower"] - 0.359) <= 1e-3, f"{q['k_lower']:.5f}"),
        ("k2", abs(q["k2"] - 0.453) <= 1e-3, f"{q['k2']:.5f}"),
        ("eta", _within(q["eta"], 1.8e-4, 2.1e-4), f"{q['eta']:.5g}"),
        ("mu_star", abs(q["mu_star"] / 262.6 - 1) <= 0.01, f"{q['mu_star']:.2f}"),
        ("chi", abs(q["chi"] / 1.5e6 - 1) <= 0.1, f"{q['chi']:.6g}"),
        ("chi_exact_eta", abs(rep["exact_chain"]["chi"] / 1.5e6 - 1) <= 0.1, f"{rep['exact_chain']['chi']:.6g}"),
        ("P11", _within(q["P11"], 0.019, 0.021), f"{q['P11']:.5f}"),
        # Exact up to the roundoff of forming q * mu / eta in binary.
        ("P12", abs(q["P12"] + 750000) <= 1e-9 * 750000, f"{q['P12']!r}"),
        ("P22_slope", abs(q["P22_slope"] / 0.045 - 1) <= 0.01, f"{q['P22_slope']:.5f}"),
        ("P22_offset", _within(q["P22_offset"], 87.0, 88.1), f"{q['P22_offset']:.3f}"),
    ]
    return record(1, "worked gradient-flow constants", checks, elapsed, limit=1.0)


def check_eps_star_consistency():
    start = time.perf_counter()
    rep = gf.reproduce_reference_example()
    ex = rep["inputs"]
    q = rep["quantities"]
    chi = q["chi"]["value"]
    bounds = cert.InterconnectionBounds(chi, ex["mu"], ex["mu"], chi, ex["mu"], q["mu_star"]["value"])
    args = (rep["k_lower"], ex["kappa_lower"], bounds, ex["theta"])
    det_lo = np.linalg.det(cert.build_P(*args, 1e-15))
    det_hi = np.linalg.det(cert.build_P(*args, 2.5e-15))
    eps_star = rep["eps_star"]
    checks = [
        ("eps_star", 1e-15 < eps_star < 2e-15, f"{eps_star:.5g}"),
        ("det P(1e-15)", det_lo > 0, f"{det_lo:.4g}"),
        ("det P(2.5e-15)", det_hi < 0, f"{det_hi:.4g}"),
        ("eps_star from bounds", cert.epsilon_star(*args) == eps_star, f"{cert.epsilon_star(*args):.5g}"),
    ]
    return record(2, "eps* consistency", checks, time.perf_counter() - start)


def check_inequality_oracles():
    start = time.perf_counter()
    rep = oracle_suite.run_suite(samples=100_000)
    elapsed = time.perf_counter() - start
    checks = [(name, r["violations"] == 0 and r["samples"] == 100_000,
               f"{r['violations']} violations / {r['samples']}")
              for name, r in rep["lemmas"].items()]
    checks.append(("total", rep["total_violations"] == 0, f"{rep['total_violations']} violations"))
    return record(3, "inequality oracle suite, 1e5 samples per check", checks, elapsed, limit=30.0)


def _derived_parts(system):
    if system == "gradflow":
        p = gf.GradFlowParams()
        # The symmetrized gradient is the true gradient of V when Q is asymmetric.
        return (gf.build_system(p), gf.reduced_certificate(p, "symmetrized"),
                gf.boundary_certificate(p, "symmetrized"), gf.interconnection_bounds(p, 0.1))
    p = ho.HighOrderParams()
    rc, bc = ho.certificates(p)
    return ho.build_system(p), rc, bc, ho.interconnection_bounds(p)


def check_composite_decrease():
    start = time.perf_counter()
    checks = []
    for system in ("gradflow", "highorder"):
        model, rc, bc, bounds = _derived_parts(system)
        c = cert.certify(rc, bc, bounds)
        x, y = sim.random_states(model, 10_000, seed=sim.DEFAULT_SEED)
        rep = sim.decrease_report(model, rc, bc, c.theta, c.gamma1, c.gamma2, c.lambda_min, c.eps_ref, x, y,
                                  slack=1e-6)
        checks.append((system, rep["violations"] == 0 and c.eps_ref == c.eps_star / 2,
                       f"eps={c.eps_ref:.4g} theta={c.theta:.3f} {rep['violations']} violations / {rep['samples']}"))
    return record(4, "composite decrease at eps*/2", checks, time.perf_counter() - start, limit=10.0)


def check_fixed_time_saturation():
    start = time.perf_counter()
    checks = []
    for system, model in (("highorder", ho.build_system(ho.HighOrderParams())),
                          ("gradflow", gf.build_system(gf.GradFlowParams()))):
        table = sim.sweep(model, 1e-3, MAGNITUDES, directions=8)
        top = table["max_by_magnitude"]
        t3, t6 = top[1e3], top[1e6]
        ok = t3 is not None and t6 is not None and t6 - t3 <= 0.25 * t3
        shown = ", ".join("fail" if top[m] is None else f"{top[m]:.4f}" for m in MAGNITUDES)
        checks.append((system, ok, f"max settle by magnitude [{shown}]"))
    report = ho.reproduce_reference_example()
    settle = report["settle_time"]
    checks.append(("reference state", settle is not None and settle < 50.0,
                   f"settles at t={settle}"))
    return record(5, "fixed-time saturation at eps=1e-3", checks, time.perf_counter() - start, limit=120.0)


def _lie_gap(lie, bound):
    return np.max((lie - bound) / (np.abs(lie) + np.abs(bound) + 1e-300))


def check_assumption_oracles():
    start = time.perf_counter()
    checks = []
    systems = [("highorder", ho.build_system(ho.HighOrderParams()), *ho.certificates(ho.HighOrderParams()))]
    for gradient in ("as_written", "symmetrized"):
        p = gf.GradFlowParams()
        systems.append((f"gradflow/{gradient}", gf.build_system(p), gf.reduced_certificate(p, gradient),
                        gf.boundary_certificate(p, gradient)))
    for name, model, rc, bc in systems:
        x, y = sim.random_states(model, 10_000, seed=sim.DEFAULT_SEED)
        lie_v = np.sum(rc.gradV(x) * reduced_field(model, x), axis=-1)
        V = rc.V(x)
        bound_v = -rc.k1 * V ** rc.a1 - rc.k2 * V ** rc.a2
        lie_w = np.sum(bc.gradW_y(x, y) * boundary_layer_field(model, x, y), axis=-1)
        W = bc.W(x, y)
        bound_w = -bc.kappa1 * W ** bc.b1 - bc.kappa2 * W ** bc.b2
        bad_v = int(np.sum(lie_v > bound_v + 1e-9 * (np.abs(lie_v) + np.abs(bound_v))))
        bad_w = int(np.sum(lie_w > bound_w + 1e-9 * (np.abs(lie_w) + np.abs(bound_w))))
        checks.append((name, bad_v == 0 and bad_w == 0,
                       f"reduced {bad_v}, boundary {bad_w} violations / 10000 "
                       f"(worst rel gaps {_lie_gap(lie_v, bound_v):.3g}, {_lie_gap(lie_w, bound_w):.3g})"))
    return record(6, "reduced and boundary-layer decrease assumptions", checks, time.perf_counter() - start)


def check_integrator_sanity():
    start = time.perf_counter()
    cfg = sim.IntegratorConfig(t_max=10.0, settle_radius=1e-300)
    traj = sim.integrate(decay_model(1.0, 1.0), 1.0, [1.0], [1.0], cfg)
    err = float(np.max(np.abs(traj.states - np.exp(-traj.times)[:, None])))
    base = ho.reproduce_reference_example(cfg=sim.IntegratorConfig())["settle_time"]
    half = ho.reproduce_reference_example(cfg=sim.IntegratorConfig(rel_tol=5e-9))["settle_time"]
    change = abs(half - base) / base
    checks = [
        ("decay error", err <= 10 * cfg.rel_tol and math.isclose(traj.times[-1], 10.0),
         f"{err:.3g} (limit {10 * cfg.rel_tol:g})"),
        ("settle under rel_tol halving", change < 0.01, f"{base:.6f} -> {half:.6f} ({100 * change:.3g}%)"),
    ]
    return record(7, "integrator sanity", checks, time.perf_counter() - start)


CHECKS = [check_gradflow_constants, check_eps_star_consistency, check_inequality_oracles,
          check_composite_decrease, check_fixed_time_saturation, check_assumption_oracles,
          check_integrator_sanity]


@pytest.fixture(scope="module", autouse=True)
def _total_runtime():
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    RESULTS.append(f"total runtime {'PASS' if elapsed < 300 else 'FAIL'}: {elapsed:.1f} s (limit 300 s)")


def test_criterion_1_gradflow_constants():
    _assert(check_gradflow_constants())


def test_criterion_2_eps_star_consistency():
    _assert(check_eps_star_consistency())


def test_criterion_3_inequality_oracles():
    _assert(check_inequality_oracles())


def test_criterion_4_composite_decrease():
    _assert(check_composite_decrease())


def test_criterion_5_fixed_time_saturation():
    _assert(check_fixed_time_saturation())


def test_criterion_6_assumption_oracles():
    _assert(check_assumption_oracles())


def test_criterion_7_integrator_sanity():
    _assert(check_integrator_sanity())


if __name__ == "__main__":
    t0 = time.perf_counter()
    outcomes = [check()[0] for check in CHECKS]
    for line in RESULTS:
        print(line)
    print(f"total runtime: {time.perf_counter() - t0:.1f} s")
    raise SystemExit(0 if all(outcomes) else 1)
