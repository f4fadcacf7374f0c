"""Acceptance criteria, one test per criterion.

Each test prints a single ``CRITERION <n> PASS|FAIL: ...`` line (also
collected into the terminal summary). Training runs are shared through
session fixtures so every configuration is trained once.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from stlforge import autodiff as ad
from stlforge.experiments import config_with, risk, run
from stlforge.objectives import objectives
from stlforge.plant import sample_init, sample_model
from stlforge.risk import report_from_samples, var_cvar
from stlforge.semantics import bool_sat, hard_robustness, softmin, stl2cbf, weighted_average
from stlforge.trainer import TrainConfig

from oracles import oracle_rho, random_formula, random_trace, random_zeta, to_ast

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
RESULTS: list[str] = []


def verdict(n, ok, detail):
    line = f"CRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


# -- 1 ------------------------------------------------------------------------

def test_criterion_1_smoothing_bounds():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(100_000):
        k = int(rng.integers(1, 13))
        v = (rng.normal(size=k) * 10.0 ** rng.uniform(-2, 2)).tolist()
        eta = 1.0 + float(rng.exponential(10.0)) + 1e-9
        b = (rng.normal(size=k) * 3).tolist()
        s = softmin(v, eta)
        lo, hi = min(v), max(v)
        bad += not (s <= lo + 1e-12 and lo - s <= math.log(k) / eta + 1e-12)
        for form in ("squared", "softmax"):
            w = weighted_average(v, b, form)
            bad += not (lo - 1e-12 <= w <= hi + 1e-12)
    dt = time.perf_counter() - t0
    verdict(1, bad == 0 and dt < 10, f"1e5 samples, {bad} violations, {dt:.1f} s (limit 10 s)")


# -- 2 ------------------------------------------------------------------------

def test_criterion_2_soundness():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    unsound = above = 0
    for _ in range(10_000):
        H = int(rng.integers(1, 11))
        phi = to_ast(random_formula(rng, 3, H))
        _, _, sig = random_trace(rng, H)
        zeta = random_zeta(rng, phi)
        g = stl2cbf(phi, sig, zeta)
        unsound += g > 0 and not bool_sat(phi, sig)
        above += g > hard_robustness(phi, sig)
    dt = time.perf_counter() - t0
    verdict(2, unsound == 0 and above == 0 and dt < 30,
            f"1e4 cases, {unsound} unsound, {above} above hard robustness, {dt:.1f} s (limit 30 s)")


# -- 3 ------------------------------------------------------------------------

def test_criterion_3_oracle_equivalence():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10_000):
        H = int(rng.integers(1, 9))
        f = random_formula(rng, 3, H)
        xs, ys, sig = random_trace(rng, H)
        worst = max(worst, abs(hard_robustness(to_ast(f), sig) - oracle_rho(f, xs, ys)))
    verdict(3, worst <= 1e-12, f"1e4 cases, max |difference| {worst:.2e} (limit 1e-12)")


# -- 4 ------------------------------------------------------------------------

def test_criterion_4_gradients():
    tc = config_with(CONFIGS / "unicycle_rho03.json")
    prob = tc.build_problem()
    init = tc.build_init()
    rng = np.random.default_rng(4)
    h = 1e-5
    worst = {"J": 0.0, "Gamma": 0.0}
    for _ in range(100):
        theta = rng.normal(scale=0.3, size=prob.n_theta)
        zeta = prob.zeta.with_vector(np.concatenate([[rng.uniform(0.5, 2.0)], rng.normal(size=22)]))
        p = prob.pack(theta, zeta)
        x0 = sample_init(init, rng).tolist()
        d = sample_model(prob.dynamics, rng).tolist()
        tape = ad.Tape()
        ps = tape.inputs_from(p)
        J, G = objectives(prob, ps, x0, d)
        gJ, gG = ad.grad(J, ps), ad.grad(G, ps)
        for i in range(len(p)):
            up, dn = p.copy(), p.copy()
            up[i] += h
            dn[i] -= h
            Ju, Gu = objectives(prob, up.tolist(), x0, d)
            Jd, Gd = objectives(prob, dn.tolist(), x0, d)
            for name, an, fd in (("J", gJ[i], (Ju - Jd) / (2 * h)), ("Gamma", gG[i], (Gu - Gd) / (2 * h))):
                worst[name] = max(worst[name], abs(an - fd) / max(1.0, abs(an)))
    ok = worst["J"] < 1e-4 and worst["Gamma"] < 1e-4
    verdict(4, ok, f"100 trials, max rel. error J {worst['J']:.2e}, Gamma {worst['Gamma']:.2e} (limit 1e-4)")


# -- training runs shared by 5, 6 ------------------------------------------------

@pytest.fixture(scope="session")
def uni03():
    t0 = time.perf_counter()
    out = run(config_with(CONFIGS / "unicycle_rho03.json"))
    return out + (time.perf_counter() - t0,)


@pytest.fixture(scope="session")
def uni05():
    return run(config_with(CONFIGS / "unicycle_rho05.json"))


@pytest.mark.slow
def test_criterion_5_unicycle_reproduction(uni03):
    res, _, val, wall = uni03
    ok = (wall <= 4 * 1048 and val.satisfaction >= 0.95 and 0.3 <= val.mean_rho <= 0.9
          and val.mean_Gamma <= val.mean_rho)
    verdict(5, ok, f"40000 iters in {wall:.0f} s (limit {4 * 1048} s); satisfaction {val.satisfaction:.4f} "
                   f"(>= 0.95); mean rho {val.mean_rho:.4f} in [0.3, 0.9]; mean Gamma {val.mean_Gamma:.4f} "
                   f"<= mean rho; mean J {val.mean_J:.3f}")


@pytest.mark.slow
def test_criterion_6_margin_tradeoff(uni03, uni05):
    r3, e3, v3, _ = uni03
    r5, e5, v5 = uni05
    tc = config_with(CONFIGS / "unicycle_rho03.json")
    k3 = risk(e3, r3.params, tc.build_init(), 100_000).entry(0.95).neg_var
    k5 = risk(e5, r5.params, tc.build_init(), 100_000).entry(0.95).neg_var
    ok = v5.mean_rho > v3.mean_rho and v5.mean_J < v3.mean_J and k5 > k3
    verdict(6, ok, f"mean rho {v5.mean_rho:.4f} (0.5) > {v3.mean_rho:.4f} (0.3); mean J {v5.mean_J:.3f} < "
                   f"{v3.mean_J:.3f}; -VaR_0.95 {k5:.4f} > {k3:.4f} (N=1e5)")


# -- 7 ------------------------------------------------------------------------

def test_criterion_7_risk_measures():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    z = rng.uniform(size=100_000)
    errs = {b: abs(var_cvar(z, b)[0] - b) for b in (0.95, 0.98, 0.99)}
    ok_a = all(e < 0.01 for e in errs.values())
    var, cvar = var_cvar(np.arange(1, 101), 0.95)
    ok_b = var == 95 and cvar == 97.5
    betas = [0.5, 0.9, 0.95, 0.98, 0.99, 0.999]
    ok_c = True
    for _ in range(200):
        n = int(rng.integers(1000, 5000))
        rho = rng.standard_t(3, size=n) if rng.random() < 0.5 else rng.normal(size=n).round(1)
        rep = report_from_samples(rho, betas)
        vars_ = [e.var for e in rep.entries]
        ok_c &= all(e.cvar >= e.var for e in rep.entries) and all(a <= b for a, b in zip(vars_, vars_[1:]))
    dt = time.perf_counter() - t0
    ok = ok_a and ok_b and ok_c and dt < 30
    verdict(7, ok, f"uniform |VaR-beta| max {max(errs.values()):.4f}; {{1..100}} -> VaR {var}, CVaR {cvar}; "
                   f"invariants on 200 reports {'hold' if ok_c else 'violated'}; {dt:.1f} s")


# -- 8 ------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_8_quadrotor():
    tc = config_with(CONFIGS / "quadrotor_rho01.json")
    t0 = time.perf_counter()
    res, _, val = run(tc, n_val=1000)
    wall = time.perf_counter() - t0
    weights = res.zeta.weight_report()[0]  # the top-level disjunction
    ok = wall <= 4 * 155 and val.satisfaction >= 0.90 and min(weights) < 0.05
    verdict(8, ok, f"10000 iters in {wall:.0f} s (limit {4 * 155} s); satisfaction {val.satisfaction:.3f} "
                   f"(>= 0.90); disjunct weights {weights[0]:.4f} / {weights[1]:.4f} (one < 0.05)")


# -- 9 ------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_9_lagrangian_contrast():
    iters = 10_000
    wins = []
    detail = []
    for seed in (0, 1, 2):
        sat = {}
        for mode in ("switching", "lagrangian"):
            tc = config_with(CONFIGS / "unicycle_rho03.json", seed=seed, iterations=iters, mode=mode)
            sat[mode] = run(tc, n_val=1000)[2].satisfaction
        wins.append(sat["lagrangian"] < sat["switching"])
        detail.append(f"seed {seed}: {sat['lagrangian']:.3f} vs {sat['switching']:.3f}")
    verdict(9, sum(wins) >= 2, f"lagrangian vs switching satisfaction ({iters} iters each): " + "; ".join(detail))
