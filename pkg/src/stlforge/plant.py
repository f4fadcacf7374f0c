"""Uncertain discrete-time plants, initial sets, sampling and closed-loop rollout."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .errors import DomainError, SpecError
from .expr import Expr, compile_expr, parse_expr, variables
from .policy import Policy, Squash, forward_flat


@dataclass
class Guard:
    """Alternative updates used while ``|control| < threshold``."""

    control: str
    threshold: float
    updates: list


@dataclass
class DynamicsSpec:
    name: str
    states: list[str]
    controls: list[str]
    uncertainties: dict[str, tuple[float, float]]
    updates: list
    guard: Guard | None = None
    squash: list[Squash] = field(default_factory=list)
    # |control| bounds asserted on concrete values (not part of the differentiable map)
    domain: dict[str, tuple[float, float]] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        names = set(self.states) | set(self.controls) | set(self.uncertainties) | {"t"}
        if len(self.updates) != len(self.states):
            raise SpecError(f"{self.name}: {len(self.updates)} updates for {len(self.states)} states")
        exprs = list(self.updates) + (list(self.guard.updates) if self.guard else [])
        for e in exprs:
            extra = variables(e) - names
            if extra:
                raise SpecError(f"{self.name}: update references undeclared names {sorted(extra)}")
        if self.guard is not None and self.guard.control not in self.controls:
            raise SpecError(f"{self.name}: guard on unknown control {self.guard.control!r}")
        for k, (lo, hi) in self.uncertainties.items():
            if lo > hi:
                raise SpecError(f"{self.name}: empty range for {k}")

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def m(self) -> int:
        return len(self.controls)

    def compiled(self, ops):
        key = ops.name
        if key not in self._cache:
            main = [compile_expr(e, ops) for e in self.updates]
            limit = [compile_expr(e, ops) for e in self.guard.updates] if self.guard else None
            self._cache[key] = (main, limit)
        return self._cache[key]

    def nominal_delta(self) -> np.ndarray:
        return np.zeros(len(self.uncertainties))


def _exprs(texts, names):
    return [parse_expr(t, names) for t in texts]


def unicycle() -> DynamicsSpec:
    names = ["x", "y", "alpha", "v", "w", "delta"]
    updates = _exprs([
        "(1 + delta)*x + v/w*(sin(alpha + w) - sin(alpha))",
        "(1 + delta)*y + v/w*(cos(alpha) - cos(alpha + w))",
        "(1 + delta)*alpha + w",
    ], names)
    # first-order expansion in w of the updates above
    limit = _exprs([
        "(1 + delta)*x + v*(cos(alpha) - 0.5*w*sin(alpha))",
        "(1 + delta)*y + v*(sin(alpha) + 0.5*w*cos(alpha))",
        "(1 + delta)*alpha + w",
    ], names)
    return DynamicsSpec(
        name="unicycle",
        states=["x", "y", "alpha"],
        controls=["v", "w"],
        uncertainties={"delta": (-0.01, 0.01)},
        updates=updates,
        guard=Guard("w", 1e-6, limit),
        squash=[Squash("sigmoid", 0.5, 1.0, 0.0), Squash("tanh", 0.5, 0.5, 0.0)],
    )


def quadrotor() -> DynamicsSpec:
    names = ["x", "y", "z", "vx", "vy", "vz", "u1", "u2", "u3", "delta"]
    updates = _exprs([
        "(1 + delta)*x + 0.05*vx",
        "(1 + delta)*y + 0.05*vy",
        "(1 + delta)*z + 0.05*vz",
        "(1 + delta)*vx + 0.4905*tan(u1)",
        "(1 + delta)*vy - 0.4905*tan(u2)",
        "(1 + delta)*vz + 0.05*(9.81 - u3)",
    ], names)
    return DynamicsSpec(
        name="quadrotor",
        states=["x", "y", "z", "vx", "vy", "vz"],
        controls=["u1", "u2", "u3"],
        uncertainties={"delta": (-0.01, 0.01)},
        updates=updates,
        squash=[Squash("tanh", 0.1, 0.1, 0.0), Squash("tanh", 0.1, 0.1, 0.0), Squash("tanh", 0.1, -2.0, 9.81)],
        domain={"u1": (-1.0, 1.0), "u2": (-1.0, 1.0)},
    )


PRESETS = {"unicycle": unicycle, "quadrotor": quadrotor}


def preset(name: str) -> DynamicsSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise SpecError(f"unknown dynamics preset {name!r}; known: {sorted(PRESETS)}") from None


def dynamics_from_dict(d: dict) -> DynamicsSpec:
    """Inline dynamics: ``{"states", "controls", "uncertainties", "updates", ["guard"], ["squash"]}``."""
    try:
        states, controls = list(d["states"]), list(d["controls"])
        unc = {k: (float(v[0]), float(v[1])) for k, v in d.get("uncertainties", {}).items()}
        names = states + controls + list(unc)
        updates = _exprs(d["updates"], names)
        guard = None
        if d.get("guard"):
            g = d["guard"]
            guard = Guard(g["control"], float(g.get("threshold", 1e-6)), _exprs(g["updates"], names))
        squash = [Squash(**s) for s in d.get("squash", [])] or [Squash() for _ in controls]
        domain = {k: (float(v[0]), float(v[1])) for k, v in d.get("domain", {}).items()}
    except KeyError as exc:
        raise SpecError(f"inline dynamics missing field {exc}") from None
    return DynamicsSpec(d.get("name", "inline"), states, controls, unc, updates, guard, squash, domain)


@dataclass(frozen=True)
class InitSet:
    kind: str  # "box" | "ball"
    lo: tuple = ()
    hi: tuple = ()
    center: tuple = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind == "box":
            if len(self.lo) != len(self.hi) or any(a > b for a, b in zip(self.lo, self.hi)):
                raise SpecError("box init set needs lo <= hi per dimension")
        elif self.kind == "ball":
            if self.radius <= 0:
                raise SpecError("ball init set needs radius > 0")
        else:
            raise SpecError(f"unknown init set kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return len(self.lo) if self.kind == "box" else len(self.center)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return bool(np.all(x >= np.asarray(self.lo) - tol) and np.all(x <= np.asarray(self.hi) + tol))
        return float(np.linalg.norm(x - np.asarray(self.center))) <= self.radius + tol

    @classmethod
    def box(cls, lo, hi):
        return cls("box", lo=tuple(map(float, lo)), hi=tuple(map(float, hi)))

    @classmethod
    def ball(cls, center, radius):
        return cls("ball", center=tuple(map(float, center)), radius=float(radius))

    @classmethod
    def from_dict(cls, d: dict) -> "InitSet":
        if d.get("kind") == "box":
            return cls.box(d["lo"], d["hi"])
        if d.get("kind") == "ball":
            return cls.ball(d["center"], d["radius"])
        raise SpecError(f"unknown init set kind {d.get('kind')!r}")

    def to_dict(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)}
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


def sample_init(init: InitSet, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform samples from the box, or from the ball by rejection from its bounding box."""
    count = 1 if size is None else size
    if init.kind == "box":
        out = rng.uniform(np.asarray(init.lo), np.asarray(init.hi), size=(count, init.dim))
    else:
        c = np.asarray(init.center)
        r = init.radius
        chunks, have = [], 0
        while have < count:
            cand = rng.uniform(-r, r, size=(max(2 * (count - have), 16), init.dim))
            keep = cand[np.sum(cand * cand, axis=1) <= r * r]
            chunks.append(keep)
            have += len(keep)
        out = c + np.concatenate(chunks)[:count]
    return out[0] if size is None else out


def sample_model(dyn: DynamicsSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    lo = np.array([r[0] for r in dyn.uncertainties.values()])
    hi = np.array([r[1] for r in dyn.uncertainties.values()])
    count = 1 if size is None else size
    out = rng.uniform(lo, hi, size=(count, len(lo)))
    return out[0] if size is None else out


def step(dyn: DynamicsSpec, x: Sequence, u: Sequence, delta: Sequence, ops=ad.OPS) -> list:
    """One application of the plant map ``x' = f(x, u; delta)``."""
    if len(x) != dyn.n or len(u) != dyn.m or len(delta) != len(dyn.uncertainties):
        raise ValueError("state/control/uncertainty dimension mismatch")
    env = dict(zip(dyn.states, x))
    env.update(zip(dyn.controls, u))
    env.update(zip(dyn.uncertainties, delta))
    if ops.name == "scalar":
        _check_domain(dyn, env)
    main, limit = dyn.compiled(ops)
    if dyn.guard is None:
        return [f(env) for f in main]
    g = dyn.guard

    def large(w):
        e = dict(env)
        e[g.control] = w
        return [f(e) for f in main]

    return ops.where_small(env[g.control], g.threshold, lambda: [f(env) for f in limit], large)


def _check_domain(dyn, env):
    for name, (lo, hi) in dyn.domain.items():
        v = ad.value_of(env[name])
        if not lo < v < hi:
            raise DomainError(f"{dyn.name}: control {name}={v!r} outside ({lo}, {hi})")
    for name, (lo, hi) in dyn.uncertainties.items():
        v = ad.value_of(env[name])
        if not lo - 1e-12 <= v <= hi + 1e-12:
            raise DomainError(f"{dyn.name}: {name}={v!r} outside [{lo}, {hi}]")


def simulate(dyn: DynamicsSpec, dims, squash, flat, x0, delta, horizon: int, ops=ad.OPS):
    """Closed-loop states (``horizon + 1`` lists) and controls on any backend."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    x = list(x0)
    states, controls = [x], []
    for k in range(horizon):
        u = forward_flat(dims, squash, flat, x, k / horizon, ops)
        x = step(dyn, x, u, delta, ops)
        states.append(x)
        controls.append(u)
    return states, controls


@dataclass
class Trajectory:
    states: np.ndarray    # (H+1, n)
    controls: np.ndarray  # (H, m)
    delta: np.ndarray
    x0: np.ndarray
    state_names: list[str]
    control_names: list[str]

    @property
    def horizon(self) -> int:
        return len(self.states) - 1

    def envs(self) -> list[dict]:
        return [dict(zip(self.state_names, row.tolist()), t=k) for k, row in enumerate(self.states)]

    def to_csv(self, path) -> None:
        n, m = self.states.shape[1], self.controls.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k"] + [f"x_{i}" for i in range(n)] + [f"u_{j}" for j in range(m)])
            for k, row in enumerate(self.states):
                u = self.controls[k] if k < len(self.controls) else [None] * m
                w.writerow([k] + [_fmt(v) for v in row] + ["" if v is None else _fmt(v) for v in u])

    @classmethod
    def from_csv(cls, path, state_names=None, control_names=None) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][0].strip() != "k":
            raise SpecError(f"{path}: missing 'k,x_0,...' header")
        header = [h.strip() for h in rows[0]]
        xs = [i for i, h in enumerate(header) if h.startswith("x_")]
        us = [i for i, h in enumerate(header) if h.startswith("u_")]
        if not xs:
            raise SpecError(f"{path}: no state columns")
        states, controls = [], []
        try:
            for k, row in enumerate(rows[1:]):
                if int(row[0]) != k:
                    raise SpecError(f"{path}: step column out of order at row {k + 1}")
                states.append([float(row[i]) for i in xs])
                if us and any(row[i].strip() for i in us):
                    controls.append([float(row[i]) for i in us])
        except (ValueError, IndexError) as exc:
            raise SpecError(f"{path}: malformed row ({exc})") from None
        if not states:
            raise SpecError(f"{path}: no data rows")
        states = np.array(states)
        controls = np.array(controls).reshape(len(controls), len(us))
        n, m = states.shape[1], len(us)
        return cls(states, controls, np.zeros(0), states[0].copy(),
                   list(state_names or [f"x_{i}" for i in range(n)]),
                   list(control_names or [f"u_{j}" for j in range(m)]))


def _fmt(v) -> str:
    return format(float(v), ".17g")


def rollout(dyn: DynamicsSpec, policy: Policy, x0, delta, horizon: int) -> Trajectory:
    """Numeric closed-loop trajectory ``x_{k+1} = f(x_k, pi(x_k, k); delta)``."""
    flat = policy.to_vector().tolist()
    x0 = [float(v) for v in x0]
    delta = [float(v) for v in np.atleast_1d(delta)]
    states, controls = simulate(dyn, policy.layer_dims, policy.squash, flat, x0, delta, horizon)
    return Trajectory(np.array(states, dtype=float), np.array(controls, dtype=float).reshape(horizon, dyn.m),
                      np.array(delta), np.array(x0), list(dyn.states), list(dyn.controls))


def resimulation_error(dyn: DynamicsSpec, traj: Trajectory) -> float:
    """Max deviation between stored states and re-applying ``step`` to them."""
    worst = 0.0
    for k in range(traj.horizon):
        nxt = step(dyn, traj.states[k].tolist(), traj.controls[k].tolist(), traj.delta.tolist())
        worst = max(worst, float(np.max(np.abs(np.array(nxt) - traj.states[k + 1]))))
    return worst
