import math

import numpy as np
import pytest

from stlforge import autodiff as ad
from stlforge.engine import JaxEngine, TapeEngine, make_engine
from stlforge.errors import SpecError
from stlforge.expr import parse_expr
from stlforge.objectives import lagrangian_objective, objectives, perf_reward
from stlforge.plant import sample_init, sample_model
from stlforge.semantics import with_time
from stlforge.trainer import AdamState, TrainConfig, TrainLog, adam_step, train

UNI = dict(
    dynamics="unicycle",
    init_set={"kind": "box", "lo": [0.6, 0.6, 2 * math.pi / 5], "hi": [1.4, 1.4, 3 * math.pi / 5]},
    definitions={"e1": "1 - 2/3*((x-2)^2 + (y-8)^2)", "e2": "1 - 2/3*((x-8)^2 + (y-2)^2)",
                 "e3": "1 - exp(1 - 2/3*((x-5)^2 + (y-5)^2))"},
    formula="(F[1,10](e1 >= 0) || F[1,10](e2 >= 0)) && G[1,20](e3 >= 0)",
    reward="10*exp(-((x-8)^2 + (y-8)^2)/36)",
    layer_dims=[4, 5, 2, 2],
)

# 1-D toy: x' = x + u with u = tanh(a), reward -(x - 0.5)^2; optimum u = 0.5 from x0 = 0
TOY = dict(
    dynamics={"states": ["x"], "controls": ["u"], "uncertainties": {"d": [-0.01, 0.01]},
              "updates": ["x + u + d"]},
    init_set={"kind": "box", "lo": [0.0], "hi": [0.0]},
    formula="x >= -10",
    reward="-(x - 0.5)^2",
    layer_dims=[2, 1],
    horizon=1,
    gamma=1.0,
)


def test_perf_reward_geometric():
    sig = with_time([{"x": 0.0}] * 21)
    one = parse_expr("1", ["x"])
    assert perf_reward(sig, one, 1.0) == 21.0
    assert perf_reward(sig, one, 0.9) == pytest.approx((1 - 0.9 ** 21) / 0.1, abs=1e-12)
    with pytest.raises(ValueError):
        perf_reward(sig, one, 1.5)


def test_adam_first_step_closed_form():
    st = AdamState.zeros(3)
    inc, new = adam_step(st, np.array([2.0, -0.5, 0.0]), 1e-3)
    np.testing.assert_allclose(inc, [1e-3, -1e-3, 0.0], rtol=1e-7)
    assert new.t == 1 and st.t == 0 and not st.m.any()
    inc0, _ = adam_step(st, np.zeros(3), 1e-3)
    assert not inc0.any()
    with pytest.raises(ValueError):
        adam_step(st, np.zeros(2), 1e-3)


def test_config_validation():
    with pytest.raises(SpecError):
        TrainConfig(**UNI, tau=1.0)
    with pytest.raises(SpecError):
        TrainConfig(**UNI, gamma=2.0)
    with pytest.raises(SpecError):
        TrainConfig(**UNI, mode="bogus")
    with pytest.raises(SpecError):
        TrainConfig(**{**UNI, "dynamics": "bicycle"}).build_problem()


@pytest.fixture(scope="module")
def uni_problem():
    return TrainConfig(**UNI).build_problem()


def test_engines_agree(uni_problem):
    rng = np.random.default_rng(0)
    p = np.concatenate([rng.normal(scale=0.5, size=43), uni_problem.zeta.to_vector()])
    x0s = sample_init(TrainConfig(**UNI).build_init(), rng, 3)
    d = sample_model(uni_problem.dynamics, rng)
    a = TapeEngine(uni_problem).batch_grads(p, x0s, d)
    b = JaxEngine(uni_problem).batch_grads(p, x0s, d)
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v, rtol=1e-9, atol=1e-10)
    with pytest.raises(ValueError):
        make_engine(uni_problem, "gpu")


def test_objective_gradients_fd(uni_problem):
    rng = np.random.default_rng(1)
    x0 = sample_init(TrainConfig(**UNI).build_init(), rng).tolist()
    d = sample_model(uni_problem.dynamics, rng).tolist()
    p = np.concatenate([rng.normal(scale=0.3, size=43), uni_problem.zeta.to_vector()])
    assert ad.check_gradient(lambda q: objectives(uni_problem, q, x0, d)[1], p) < 1e-4
    assert ad.check_gradient(lambda q: objectives(uni_problem, q, x0, d)[0], p) < 1e-4


def test_lagrangian_objective(uni_problem):
    rng = np.random.default_rng(2)
    batch = sample_init(TrainConfig(**UNI).build_init(), rng, 2).tolist()
    d = [0.0]
    p = np.concatenate([rng.normal(scale=0.3, size=43), uni_problem.zeta.to_vector()]).tolist()
    js = [objectives(uni_problem, p, x, d) for x in batch]
    assert lagrangian_objective(uni_problem, batch, d, p, 0.0) == pytest.approx(sum(j for j, _ in js))
    assert lagrangian_objective(uni_problem, batch[:1], d, p, 1.0) == pytest.approx(sum(js[0]))
    with pytest.raises(ValueError):
        lagrangian_objective(uni_problem, batch, d, p, [-1.0, 1.0])


def test_training_is_deterministic(tmp_path):
    cfg = TrainConfig(**UNI, iterations=60, seed=3)
    a = train(cfg)
    b = train(cfg)
    a.log.to_csv(tmp_path / "a.csv")
    b.log.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()
    np.testing.assert_array_equal(a.params, b.params)
    back = TrainLog.from_csv(tmp_path / "a.csv")
    np.testing.assert_array_equal(back.column("Gamma"), a.log.column("Gamma"))


def test_tape_and_jax_training_agree():
    cfg = TrainConfig(**UNI, iterations=4, seed=1, batch_size=3)
    a = train(cfg, engine=TapeEngine(cfg.build_problem()))
    b = train(cfg)
    assert [r.branch for r in a.log] == [r.branch for r in b.log]
    np.testing.assert_allclose(a.params, b.params, rtol=1e-9, atol=1e-12)


class Recording:
    """Engine wrapper keeping each iteration's batch gradients for replay checks."""

    def __init__(self, inner):
        self.inner = inner
        self.problem = inner.problem
        self.grads = []

    def batch_grads(self, p, x0s, delta):
        out = self.inner.batch_grads(p, x0s, delta)
        self.grads.append(out)
        return out

    def evaluate(self, p, x0s, delta):
        return self.inner.evaluate(p, x0s, delta)


def test_log_invariants_replay():
    cfg = TrainConfig(**UNI, iterations=300, seed=0, rho=0.3)
    eng = Recording(make_engine(cfg.build_problem()))
    res = train(cfg, engine=eng)
    lam_i = res.problem.n_theta
    assert res.params[lam_i] ** 2 + 1 > 1
    for rec, (_, _, gJ, gG) in zip(res.log, eng.grads):
        n1, n2 = np.linalg.norm(gJ, axis=1), np.linalg.norm(gG, axis=1)
        assert rec.norm_d1 == n1.max() and rec.b1 == int(np.argmax(n1))
        assert rec.norm_d2 == n2.max() and rec.b2 == int(np.argmax(n2))
        if rec.branch == "perf":
            assert rec.Gamma <= cfg.rho and rec.Gamma_perf >= rec.Gamma
        elif rec.branch == "stl":
            assert rec.Gamma <= cfg.rho and rec.Gamma_perf < rec.Gamma
        else:
            assert rec.branch == "slow" and rec.Gamma > cfg.rho
    assert res.log.branch_counts()["perf"] + res.log.branch_counts()["stl"] > 0


def test_negative_infinite_margin_takes_slow_branch():
    cfg = TrainConfig(**TOY, rho=-math.inf, tau=2.0, iterations=400, adam={"alpha": 0.05}, batch_size=4)
    res = train(cfg)
    assert res.log.branch_counts()["slow"] == 400
    J = res.log.column("J")
    assert J[-50:].mean() > J[:50].mean()
    # J includes the fixed k=0 term -(0 - 0.5)^2, so the optimum is -0.25 (up to the perturbation d)
    assert J[-50:].mean() == pytest.approx(-0.25, abs=1e-3)


def test_without_formula_reduces_to_slow_ascent():
    cfg = TrainConfig(**{**TOY, "formula": None}, tau=2.0, iterations=50, adam={"alpha": 0.05}, batch_size=2)
    res = train(cfg)
    assert res.log.branch_counts()["slow"] == 50
    # replay: slow Adam ascent on the largest-norm performance gradient
    prob = cfg.build_problem()
    eng = make_engine(prob)
    rng = np.random.default_rng(cfg.seed)
    from stlforge.trainer import initial_params

    p = initial_params(cfg, prob)
    batch = sample_init(cfg.build_init(), rng, 2)
    st = AdamState.zeros(len(p))
    for _ in range(50):
        d = sample_model(prob.dynamics, rng)
        _, _, gJ, _ = eng.batch_grads(p, batch, d)
        sample_init(cfg.build_init(), rng)
        inc, st = adam_step(st, gJ[int(np.argmax(np.linalg.norm(gJ, axis=1)))], 0.05)
        p = p + inc / 2.0
    np.testing.assert_array_equal(p, res.params)


def test_lagrangian_mode_runs():
    cfg = TrainConfig(**TOY, mode="lagrangian", iterations=20)
    res = train(cfg)
    assert res.log.branch_counts()["lagrangian"] == 20
