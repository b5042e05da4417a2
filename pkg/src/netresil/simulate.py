"""Deterministic fixed-step simulation and attack/recovery scenarios.

Classical fourth-order Runge-Kutta with a hard step-size guard
(h |lambda|_max <= 0.1). For piecewise-constant inputs the four stages
collapse to a precomputed affine step map, which is exactly the classical
scheme and fast enough for million-step horizons; arbitrary input
callables fall back to stage evaluation.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla

from .compensator import (Compensator, ObserverCompensator, attach_compensator,
                          attach_observer_compensator)
from .lti import StateSpace, spectral_abscissa
from .network import NetworkedSystem, interconnect

DIVERGENCE_LIMIT = 1e9


class StepSizeError(ValueError):
    """h violates the stability-resolving bound h |lambda|_max <= 0.1."""


class DivergenceError(RuntimeError):
    """Operation requires a non-divergent trajectory."""


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled closed-loop record.

    ``states`` holds the physical plant state x, ``comp_states`` the
    compensator state phi (zero columns when none is attached),
    ``outputs``/``inputs`` the measured outputs and the exogenous inputs
    driving the run (controller commands for scenario runs are in
    ``commands``). ``h`` is the stored sample step; ``diverged`` marks a
    truncated run whose state left the finite range.
    """

    times: np.ndarray
    states: np.ndarray
    comp_states: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray
    h: float
    diverged: bool = False
    commands: np.ndarray | None = None

    def __post_init__(self):
        k = self.times.size
        for name in ("states", "comp_states", "outputs", "inputs"):
            if getattr(self, name).shape[0] != k:
                raise ValueError(f"{name} rows must match times")


class L2Report(NamedTuple):
    """L2 norm with a truncation-quality indicator."""

    value: float
    terminal_ratio: float


@dataclass(frozen=True)
class ReferenceSignal:
    """Piecewise-constant reference: level rows hold between change times."""

    times: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        lv = np.atleast_2d(np.asarray(self.levels, dtype=float))
        if t.ndim != 1 or t.size != lv.shape[0]:
            raise ValueError("one level row per change time required")
        if t.size == 0 or t[0] != 0.0 or (t.size > 1 and not np.all(np.diff(t) > 0)):
            raise ValueError("change times must start at 0 and increase")
        t.setflags(write=False)
        lv.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "levels", lv)

    @property
    def width(self) -> int:
        return self.levels.shape[1]

    def sample(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.times, t, side="right") - 1)
        return self.levels[max(idx, 0)]

    @classmethod
    def constant(cls, level) -> "ReferenceSignal":
        return cls(np.array([0.0]), np.atleast_2d(np.asarray(level, dtype=float)))

    @classmethod
    def random_levels(cls, rng: np.random.Generator, horizon: float, dwell: float,
                      width: int, lo: float = -0.2, hi: float = 0.2,
                      shared: bool = True) -> "ReferenceSignal":
        """Random levels redrawn every ``dwell`` seconds; ``shared`` draws
        one level broadcast across all channels."""
        k = max(1, int(np.ceil(horizon / dwell)))
        times = np.arange(k) * dwell
        if shared:
            lv = np.repeat(rng.uniform(lo, hi, size=(k, 1)), width, axis=1)
        else:
            lv = rng.uniform(lo, hi, size=(k, width))
        return cls(times, lv)


@dataclass(frozen=True)
class Scenario:
    """Timeline of controller swaps with a tracking reference.

    ``segments`` pairs each start time (first must be 0) with a key into
    the controller library passed to :func:`run_scenario`. Controller
    internal state carries over at swaps when dimensions match
    (``carryover=True``), else resets to zero; plant and compensator
    states always carry over.
    """

    segments: tuple
    horizon: float
    x0: np.ndarray
    h: float = 1e-3
    reference: ReferenceSignal | None = None
    carryover: bool = True
    store_every: int = 1

    def __post_init__(self):
        segs = tuple((float(t), key) for t, key in self.segments)
        if not segs or segs[0][0] != 0.0:
            raise ValueError("segments must start at t = 0")
        starts = [t for t, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment start times must strictly increase")
        if self.horizon < starts[-1]:
            raise ValueError("horizon must reach the last segment")
        if self.h <= 0 or self.store_every < 1:
            raise ValueError("invalid step or storage stride")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))


def _rk4_step_maps(A: np.ndarray, B: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """One classical RK4 step with the input held constant: x+ = Phi x + Psi u."""
    n = A.shape[0]
    eye = np.eye(n)
    hA = h * A
    inner = eye / 2 + hA @ (eye / 6 + hA / 24)
    Phi = eye + hA @ (eye + hA @ inner)
    Psi = h * (eye + hA @ inner) @ B
    return Phi, Psi


def check_step(A: np.ndarray, h: float) -> float:
    """Enforce h |lambda|_max <= 0.1; returns |lambda|_max."""
    lam = float(np.abs(np.linalg.eigvals(A)).max()) if A.size else 0.0
    if h * lam > 0.1 + 1e-12:
        raise StepSizeError(f"h={h:g} too large: h*|lambda|_max = {h * lam:.3f} > 0.1")
    return lam


def max_step(A: np.ndarray) -> float:
    """Largest step admitted by the guard for this system matrix."""
    lam = float(np.abs(np.linalg.eigvals(A)).max()) if A.size else 0.0
    return 0.1 / lam if lam > 0 else np.inf


def _diverged(x: np.ndarray) -> bool:
    return not np.all(np.isfinite(x)) or np.abs(x).max() > DIVERGENCE_LIMIT


def simulate(system: StateSpace, x0, inputs=None, T: float = 1.0, h: float = 1e-3,
             store_every: int = 1) -> Trajectory:
    """Integrate x' = A x + B u(t) from x0 over [0, T].

    ``inputs`` is None (zero input), a constant vector, or a callable
    t -> u evaluated at the RK4 stage times. Divergence (non-finite state
    or norm above 1e9) truncates the run and flags the trajectory.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != system.n:
        raise ValueError(f"x0 has {x0.size} entries, expected {system.n}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    check_step(system.A, h)
    n_steps = int(round(T / h))

    u_fun: Callable | None = None
    if inputs is None:
        u_const = np.zeros(system.m)
    elif callable(inputs):
        u_const, u_fun = None, inputs
    else:
        u_const = np.asarray(inputs, dtype=float).reshape(-1)
        if u_const.size != system.m:
            raise ValueError("constant input width mismatch")

    rows_x, rows_u, rows_k = [], [], []
    x = x0.copy()
    diverged = False
    A, B = system.A, system.B

    if u_fun is None:
        Phi, Psi = _rk4_step_maps(A, B, h)
        drift = Psi @ u_const
        for k in range(n_steps + 1):
            if k % store_every == 0:
                rows_x.append(x)
                rows_u.append(u_const)
                rows_k.append(k)
            if k == n_steps:
                break
            x = Phi @ x + drift
            if (k % 1000 == 999 or k == n_steps - 1) and _diverged(x):
                diverged = True
                break
    else:
        for k in range(n_steps + 1):
            t = k * h
            if k % store_every == 0:
                rows_x.append(x)
                rows_u.append(np.asarray(u_fun(t), dtype=float).reshape(-1))
                rows_k.append(k)
            if k == n_steps:
                break
            k1 = A @ x + B @ np.asarray(u_fun(t), dtype=float).reshape(-1)
            k2 = A @ (x + 0.5 * h * k1) + B @ np.asarray(u_fun(t + 0.5 * h), dtype=float).reshape(-1)
            k3 = A @ (x + 0.5 * h * k2) + B @ np.asarray(u_fun(t + 0.5 * h), dtype=float).reshape(-1)
            k4 = A @ (x + h * k3) + B @ np.asarray(u_fun(t + h), dtype=float).reshape(-1)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if _diverged(x):
                diverged = True
                break

    X = np.asarray(rows_x)
    U = np.asarray(rows_u)
    times = np.asarray(rows_k, dtype=float) * h
    Y = X @ system.C.T + U @ system.D.T
    return Trajectory(times=times, states=X, comp_states=np.zeros((X.shape[0], 0)),
                      outputs=Y, inputs=U, h=h * store_every, diverged=diverged)


@dataclass(frozen=True)
class SegmentReport:
    t_start: float
    key: str
    abscissa: float
    stable: bool


def closed_tracking_loop(plant: StateSpace, controllers: Sequence[StateSpace],
                         q_dims: Sequence[int]) -> StateSpace:
    """Close per-channel tracking controllers u_i = kappa_i(y_i, y_i^d).

    Returns the loop driven by the stacked reference y^d with outputs
    (y, u). The plant must be strictly proper.
    """
    if np.any(plant.D):
        raise ValueError("tracking loop assembly expects a strictly proper plant")
    if sum(q_dims) != plant.q:
        raise ValueError("channel output dims must cover the plant outputs")
    Ak = sla.block_diag(*[k.A for k in controllers])
    nk = Ak.shape[0]
    By, Bd, Dy, Dd = [], [], [], []
    for k, qi in zip(controllers, q_dims):
        if k.m != 2 * qi:
            raise ValueError("tracking controller must take (y_i, y_i^d)")
        By.append(k.B[:, :qi])
        Bd.append(k.B[:, qi:])
        Dy.append(k.D[:, :qi])
        Dd.append(k.D[:, qi:])
    Bky = sla.block_diag(*By)
    Bkd = sla.block_diag(*Bd)
    Ck = sla.block_diag(*[k.C for k in controllers])
    Dky = sla.block_diag(*Dy)
    Dkd = sla.block_diag(*Dd)
    n, q = plant.n, plant.q
    A = np.block([[plant.A + plant.B @ Dky @ plant.C, plant.B @ Ck],
                  [Bky @ plant.C, Ak]])
    B = np.vstack([plant.B @ Dkd, Bkd])
    C = np.block([[plant.C, np.zeros((q, nk))],
                  [Dky @ plant.C, Ck]])
    D = np.vstack([np.zeros((q, q)), Dkd])
    return StateSpace(A, B, C, D)


def run_scenario(ns: NetworkedSystem, comp: Compensator | ObserverCompensator | None,
                 scenario: Scenario,
                 controllers: Mapping[str, Sequence[StateSpace]]
                 ) -> tuple[Trajectory, list[SegmentReport]]:
    """Simulate the closed network over a controller-swap timeline.

    ``controllers`` maps scenario keys to (kappa_1, kappa_2) tracking
    controllers with inputs (y_i, y_i^d). Segment and reference switch
    times are quantized to the step grid. Returns the trajectory (plant
    state, compensator state, outputs, reference, commands) and one
    stability report per segment.
    """
    if comp is None:
        plant = interconnect(ns)
        n_phi = 0
        x_slice = slice(0, ns.n)
    elif isinstance(comp, ObserverCompensator):
        plant = attach_observer_compensator(ns, comp)
        n_phi = ns.n
        x_slice = slice(2 * ns.n, 3 * ns.n)
    else:
        plant = attach_compensator(ns, comp)
        n_phi = ns.n
        x_slice = slice(ns.n, 2 * ns.n)
    n_plant = plant.n
    q_dims = (ns.sub1.q, ns.sub2.q)

    loops: dict[str, StateSpace] = {}
    for key in {k for _, k in scenario.segments}:
        if key not in controllers:
            raise KeyError(f"scenario references unknown controller set {key!r}")
        loops[key] = closed_tracking_loop(plant, controllers[key], q_dims)
    h = scenario.h
    for loop in loops.values():
        check_step(loop.A, h)

    ref = scenario.reference or ReferenceSignal.constant(np.zeros(ns.q))
    if ref.width != ns.q:
        raise ValueError("reference width must match the measured output")
    ref_steps = [int(round(t / h)) for t in ref.times]

    if scenario.x0.size != ns.n:
        raise ValueError(f"x0 must have {ns.n} entries")
    x_plant = np.zeros(n_plant)
    x_plant[x_slice] = scenario.x0          # phi(0) = 0, observer starts at 0

    n_steps = int(round(scenario.horizon / h))
    bounds = [int(round(t / h)) for t, _ in scenario.segments] + [n_steps]
    keys = [k for _, k in scenario.segments]
    store = scenario.store_every

    all_t, all_x, all_y, all_u, all_yd = [], [], [], [], []
    seg_reports: list[SegmentReport] = []
    prev_ctrl: np.ndarray | None = None
    diverged = False

    for i, key in enumerate(keys):
        k0, k1 = bounds[i], bounds[i + 1]
        loop = loops[key]
        nc = loop.n - n_plant
        if scenario.carryover and prev_ctrl is not None and prev_ctrl.size == nc:
            ctrl = prev_ctrl
        else:
            ctrl = np.zeros(nc)
        x = np.concatenate([x_plant, ctrl])
        Phi, Psi = _rk4_step_maps(loop.A, loop.B, h)
        absc = spectral_abscissa(loop.A)
        seg_reports.append(SegmentReport(t_start=k0 * h, key=key,
                                         abscissa=absc, stable=absc < 0))
        rows_x, rows_yd, rows_k = [], [], []
        ptr = max(bisect_right(ref_steps, k0) - 1, 0)
        drift = Psi @ ref.levels[ptr]
        last = (i == len(keys) - 1)
        k = k0
        while k < k1 or (last and k == k1):
            while ptr + 1 < len(ref_steps) and k >= ref_steps[ptr + 1]:
                ptr += 1
                drift = Psi @ ref.levels[ptr]
            if k % store == 0:
                rows_x.append(x)
                rows_yd.append(ref.levels[ptr])
                rows_k.append(k)
            if k == k1:
                break
            x = Phi @ x + drift
            if (k % 1000 == 999 or k == k1 - 1) and _diverged(x):
                diverged = True
                break
            k += 1
        if rows_x:
            Xseg = np.asarray(rows_x)
            Ydseg = np.asarray(rows_yd)
            out = Xseg @ loop.C.T + Ydseg @ loop.D.T
            all_t.append(np.asarray(rows_k, dtype=float) * h)
            all_x.append(Xseg[:, :n_plant])
            all_yd.append(Ydseg)
            all_y.append(out[:, :ns.q])
            all_u.append(out[:, ns.q:])
        if diverged:
            break
        x_plant = x[:n_plant].copy()
        prev_ctrl = x[n_plant:].copy()

    times = np.concatenate(all_t) if all_t else np.zeros(0)
    Xp = np.vstack(all_x) if all_x else np.zeros((0, n_plant))
    phi_cols = Xp[:, :n_phi] if n_phi else np.zeros((Xp.shape[0], 0))
    x_cols = Xp[:, x_slice]
    traj = Trajectory(times=times, states=x_cols, comp_states=phi_cols,
                      outputs=np.vstack(all_y) if all_y else np.zeros((0, ns.q)),
                      inputs=np.vstack(all_yd) if all_yd else np.zeros((0, ns.q)),
                      h=h * store, diverged=diverged,
                      commands=np.vstack(all_u) if all_u else np.zeros((0, ns.m)))
    return traj, seg_reports


def l2_norm(traj: Trajectory, signal: str = "states") -> L2Report:
    """Trapezoidal L2 norm of a trajectory signal over its horizon.

    ``signal`` selects one of states / comp_states / outputs / inputs /
    commands. The terminal-energy ratio ||v(T)||^2 / max ||v||^2 indicates
    how much tail the finite horizon truncated.
    """
    if traj.diverged:
        raise DivergenceError("trajectory diverged; L2 norm undefined")
    v = getattr(traj, signal)
    if v is None:
        raise ValueError(f"trajectory has no {signal!r} signal")
    sq = np.einsum("ij,ij->i", v, v)
    if sq.size < 2:
        return L2Report(0.0, 0.0)
    val = float(np.sqrt(np.trapezoid(sq, dx=traj.h)))
    peak = float(sq.max())
    ratio = float(sq[-1] / peak) if peak > 0 else 0.0
    return L2Report(val, ratio)
