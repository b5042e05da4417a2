"""Desk-scale five-generator power-grid experiment.

Each generator is a four-state swing model (angle, speed, mechanical
input, valve position) with inertia M, damping Dd, turbine constant T,
governor constant K and droop Rd, all in per-unit. Generators couple
electrically through a reduced admittance matrix acting on the angle
vector (torque = -Y delta); the bundled Y comes from Kron-reducing the
IEEE 14-bus line susceptances to the five generator buses.

Generators {1,2,3} form subsystem one and {4,5} subsystem two. The local
controllers are observer-based LQR trackers on the integral-augmented
local cluster (angles track a piecewise-constant reference), so each
controller consumes only its cluster's measured angles. Attacks keep the
local loops stable: either LQR detuning (input penalty x 1e4) or a random
stable free-parameter perturbation on the nominal loop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np
import scipy.linalg as sla

from .lti import StateSpace, spectral_abscissa
from .network import NetworkedSystem, Subsystem
from .simulate import ReferenceSignal, closed_tracking_loop
from .synthesis import SynthesisError, solve_care

PARAM_RANGES = {
    "M": (0.01, 1.0),
    "Dd": (0.4, 11.0),
    "T": (0.01, 0.02),
    "K": (0.03, 0.7),
    "Rd": (0.01, 0.05),
}
N_GEN = 5
DEFAULT_CLUSTERING = ((1, 2, 3), (4, 5))


@dataclass(frozen=True)
class GeneratorParams:
    """Per-unit swing-model constants, each inside its sampling interval."""

    M: float
    Dd: float
    T: float
    K: float
    Rd: float

    def __post_init__(self):
        for name, (lo, hi) in PARAM_RANGES.items():
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")

    @classmethod
    def sample(cls, rng: np.random.Generator) -> "GeneratorParams":
        return cls(**{k: float(rng.uniform(*PARAM_RANGES[k]))
                      for k in ("M", "Dd", "T", "K", "Rd")})


def generator_matrices(p: GeneratorParams):
    """(A, b, b_tau, c): state (angle, speed, mech input, valve)."""
    A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, -p.Dd / p.M, -1.0 / p.M, 0.0],
        [0.0, 0.0, -1.0 / p.T, 1.0 / p.T],
        [0.0, 1.0 / p.K, 0.0, -p.Rd / p.K],
    ])
    b = np.array([[0.0], [0.0], [0.0], [1.0 / p.K]])
    b_tau = np.array([[0.0], [1.0 / p.M], [0.0], [0.0]])
    c = np.array([[1.0, 0.0, 0.0, 0.0]])
    return A, b, b_tau, c


def build_generator(p: GeneratorParams) -> StateSpace:
    """One generator with inputs (u, v, tau) and measured angle output."""
    A, b, b_tau, c = generator_matrices(p)
    return StateSpace(A, np.hstack([b, b, b_tau]), c, None)


def load_reduced_admittance() -> tuple[np.ndarray, dict]:
    """Bundled 5x5 generator-coupling matrix and its metadata."""
    with resources.files("netresil").joinpath("data/ieee14_kron_y.json").open() as fh:
        payload = json.load(fh)
    Y = np.asarray(payload["Y"], dtype=float)
    meta = {k: payload[k] for k in payload if k != "Y"}
    return Y, meta


@dataclass(frozen=True)
class GridModel:
    """Five generators, a symmetric coupling matrix and the 3/2 clustering."""

    generators: tuple
    Y: np.ndarray
    clustering: tuple = DEFAULT_CLUSTERING
    seed: int = 0

    def __post_init__(self):
        gens = tuple(self.generators)
        if len(gens) != N_GEN:
            raise ValueError(f"expected {N_GEN} generators")
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if Y.shape != (N_GEN, N_GEN):
            raise ValueError("Y must be 5x5")
        if np.abs(Y - Y.T).max() > 1e-9 * max(1.0, np.abs(Y).max()):
            raise ValueError("Y must be symmetric")
        cl = tuple(tuple(int(i) for i in grp) for grp in self.clustering)
        if sorted(i for grp in cl for i in grp) != list(range(1, N_GEN + 1)):
            raise ValueError("clustering must partition generators 1..5")
        Y.setflags(write=False)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "clustering", cl)

    @classmethod
    def sample(cls, seed: int, Y: np.ndarray | None = None,
               clustering=DEFAULT_CLUSTERING) -> "GridModel":
        rng = np.random.default_rng(seed)
        gens = tuple(GeneratorParams.sample(rng) for _ in range(N_GEN))
        if Y is None:
            Y, _ = load_reduced_admittance()
        return cls(generators=gens, Y=Y, clustering=clustering, seed=seed)

    def to_dict(self) -> dict:
        return {"generators": [vars(g) for g in self.generators],
                "Y": self.Y.tolist(),
                "clustering": [list(g) for g in self.clustering],
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "GridModel":
        seed = int(d.get("seed", 0))
        rng = np.random.default_rng(seed)
        gens = []
        given = d.get("generators", [])
        for k in range(N_GEN):
            if k < len(given) and given[k]:
                gens.append(GeneratorParams(**given[k]))
            else:
                gens.append(GeneratorParams.sample(rng))
        Y = np.asarray(d["Y"], dtype=float) if "Y" in d else load_reduced_admittance()[0]
        clustering = tuple(tuple(g) for g in d.get("clustering", DEFAULT_CLUSTERING))
        return cls(generators=tuple(gens), Y=Y, clustering=clustering, seed=seed)


def build_network(gm: GridModel) -> NetworkedSystem:
    """Assemble the clustered two-subsystem network.

    The full 20-state drift is dg(A_k) - dg(b_tau_k) Y dg(c); cluster
    blocks of Y stay inside each subsystem while the cross blocks form the
    couplings: S_i selects the cluster's angles and J_i injects the
    peer-scaled torques. B, R and C stack the per-generator input and
    angle-output maps (R = B: supervisory commands enter like governor
    commands).
    """
    mats = [generator_matrices(p) for p in gm.generators]
    groups = [[i - 1 for i in grp] for grp in gm.clustering]

    def cluster(idx):
        A = sla.block_diag(*[mats[k][0] for k in idx])
        B = sla.block_diag(*[mats[k][1] for k in idx])
        Btau = sla.block_diag(*[mats[k][2] for k in idx])
        C = sla.block_diag(*[mats[k][3] for k in idx])
        return A, B, Btau, C

    (A1d, B1, Bt1, C1) = cluster(groups[0])
    (A2d, B2, Bt2, C2) = cluster(groups[1])
    Y11 = gm.Y[np.ix_(groups[0], groups[0])]
    Y12 = gm.Y[np.ix_(groups[0], groups[1])]
    Y21 = gm.Y[np.ix_(groups[1], groups[0])]
    Y22 = gm.Y[np.ix_(groups[1], groups[1])]

    A1 = A1d - Bt1 @ Y11 @ C1
    A2 = A2d - Bt2 @ Y22 @ C2
    J1 = -Bt1 @ Y12        # torque injection from peer angles
    J2 = -Bt2 @ Y21
    S1, S2 = C1, C2        # interaction output = cluster angles
    sub1 = Subsystem(A1, B1, C1, J1, S1, None)
    sub2 = Subsystem(A2, B2, C2, J2, S2, None)
    R = sla.block_diag(B1, B2)
    return NetworkedSystem(sub1, sub2, R)


@dataclass(frozen=True)
class TrackingController:
    """Observer-based LQR tracker for one cluster.

    u = -Kx xhat - Ke int(y - y_d), with xhat from a Luenberger observer
    on the local cluster; an optional stable free parameter Q perturbs the
    loop through the output innovation without breaking local stability.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Kx: np.ndarray
    Ke: np.ndarray
    L: np.ndarray

    def realize(self, q_param: StateSpace | None = None) -> StateSpace:
        """Controller with inputs (y, y_d) and output u."""
        A, B, C = self.A, self.B, self.C
        Kx, Ke, L = self.Kx, self.Ke, self.L
        n, qd = A.shape[0], C.shape[0]
        if q_param is None:
            q_param = StateSpace.from_gain(np.zeros((B.shape[1], qd)))
        Aq, Bq, Cq, Dq = q_param.A, q_param.B, q_param.C, q_param.D
        nq = q_param.n
        Ak = np.block([
            [A - L @ C - B @ Kx - B @ Dq @ C, -B @ Ke, B @ Cq],
            [np.zeros((qd, n)), np.zeros((qd, qd)), np.zeros((qd, nq))],
            [-Bq @ C, np.zeros((nq, qd)), Aq],
        ])
        Bk = np.block([
            [L + B @ Dq, np.zeros((n, qd))],
            [np.eye(qd), -np.eye(qd)],
            [Bq, np.zeros((nq, qd))],
        ])
        Ck = np.hstack([-Kx - Dq @ C, -Ke, Cq])
        Dk = np.hstack([Dq, np.zeros((B.shape[1], qd))])
        return StateSpace(Ak, Bk, Ck, Dk)

    def local_abscissa(self, q_param: StateSpace | None = None) -> float:
        """Spectral abscissa of the local cluster closed loop."""
        plant = StateSpace(self.A, self.B, self.C, None)
        loop = closed_tracking_loop(plant, [self.realize(q_param)], [self.C.shape[0]])
        return spectral_abscissa(loop.A)


def design_tracking_controller(A, B, C, q_scale: float = 1.0,
                               r_scale: float = 1.0) -> TrackingController:
    """LQR on the integral-augmented cluster plus a dual-LQR observer."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    n, m, qd = A.shape[0], B.shape[1], C.shape[0]
    A_aug = np.block([[A, np.zeros((n, qd))], [C, np.zeros((qd, qd))]])
    B_aug = np.vstack([B, np.zeros((qd, m))])
    sol = solve_care(A_aug, B_aug, q_scale * np.eye(n + qd), r_scale * np.eye(m))
    Kx, Ke = sol.K[:, :n], sol.K[:, n:]
    obs = solve_care(A.T, C.T, np.eye(n), np.eye(qd))
    return TrackingController(A=A, B=B, C=C, Kx=Kx, Ke=Ke, L=obs.K.T)


def design_tracking_controllers(ns: NetworkedSystem, q_scale: float = 1.0,
                                r_scale: float = 1.0, seed: int = 0,
                                horizon: float = 50.0, dwell: float = 25.0,
                                level: float = 0.2
                                ) -> tuple[TrackingController, TrackingController, ReferenceSignal]:
    """Per-cluster trackers (couplings dropped) plus a seeded reference.

    Each subsystem gets one shared random piecewise-constant level across
    its channels. Raises :class:`SynthesisError` if an augmented cluster
    is not stabilizable for this parameter draw.
    """
    k1 = design_tracking_controller(ns.sub1.A, ns.sub1.B, ns.sub1.C, q_scale, r_scale)
    k2 = design_tracking_controller(ns.sub2.A, ns.sub2.B, ns.sub2.C, q_scale, r_scale)
    rng = np.random.default_rng(seed)
    r1 = ReferenceSignal.random_levels(rng, horizon, dwell, ns.sub1.q,
                                       -level, level, shared=True)
    r2 = ReferenceSignal.random_levels(rng, horizon, dwell, ns.sub2.q,
                                       -level, level, shared=True)
    ref = ReferenceSignal(r1.times, np.hstack([r1.levels, r2.levels]))
    return k1, k2, ref


def random_innovation_parameter(rng: np.random.Generator, n_out: int, n_in: int,
                                order: int = 2, gain: float = 1.0) -> StateSpace:
    """Random stable free parameter for the innovation channel."""
    Aq = rng.normal(size=(order, order))
    Aq = Aq - (np.linalg.eigvals(Aq).real.max() + rng.uniform(0.2, 2.0)) * np.eye(order)
    return StateSpace(Aq, rng.normal(size=(order, n_in)),
                      gain * rng.normal(size=(n_out, order)),
                      gain * rng.normal(size=(n_out, n_in)))


@dataclass(frozen=True)
class GridAttack:
    """Locally stable controller pair that destabilizes the open network."""

    kappa1: StateSpace
    kappa2: StateSpace
    local_abscissae: tuple[float, float]
    global_abscissa: float
    trial: int
    gain: float


def find_destabilizing_attack(ns: NetworkedSystem, k1: TrackingController,
                              k2: TrackingController, seed: int = 0,
                              max_trials: int = 200) -> GridAttack | None:
    """Random free-parameter attack search on the uncompensated network.

    Draws stable perturbations of growing gain on both trackers, keeps
    only locally stable pairs, and returns the first pair whose
    interconnected closed loop has spectral abscissa above 1e-6. All the
    attacked loops remain locally stable by construction, so a hit is a
    certified resilience violation.
    """
    from .network import interconnect

    plant = interconnect(ns)
    rng = np.random.default_rng(seed)
    q_dims = (ns.sub1.q, ns.sub2.q)
    for trial in range(max_trials):
        gain = 10.0 ** rng.uniform(0.0, 2.5)
        qp1 = random_innovation_parameter(rng, ns.sub1.m, ns.sub1.q, gain=gain)
        qp2 = random_innovation_parameter(rng, ns.sub2.m, ns.sub2.q, gain=gain)
        loc1 = k1.local_abscissa(qp1)
        loc2 = k2.local_abscissa(qp2)
        if loc1 >= -1e-6 or loc2 >= -1e-6:
            continue
        c1 = k1.realize(qp1)
        c2 = k2.realize(qp2)
        glob = spectral_abscissa(closed_tracking_loop(plant, [c1, c2], q_dims).A)
        if glob > 1e-6:
            return GridAttack(kappa1=c1, kappa2=c2,
                              local_abscissae=(float(loc1), float(loc2)),
                              global_abscissa=float(glob), trial=trial,
                              gain=float(gain))
    return None


def grid_network(seed: int, max_resample: int = 5) -> tuple[GridModel, NetworkedSystem,
                                                            TrackingController,
                                                            TrackingController,
                                                            ReferenceSignal, int]:
    """Sample a grid and design its trackers, resampling on design failure.

    Returns (model, network, k1, k2, reference, seed_used); the seed
    increments on stabilizability failures, which are logged to stderr.
    """
    import sys

    s = seed
    for _ in range(max_resample):
        gm = GridModel.sample(s)
        ns = build_network(gm)
        try:
            k1, k2, ref = design_tracking_controllers(ns, seed=s)
            return gm, ns, k1, k2, ref, s
        except SynthesisError as exc:
            print(f"grid seed {s}: tracker design failed ({exc}); resampling",
                  file=sys.stderr)
            s += 1
    raise SynthesisError(f"no stabilizable grid draw within {max_resample} seeds of {seed}")
