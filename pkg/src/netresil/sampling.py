"""Seeded random instances for sweeps, demos and fixtures."""

from __future__ import annotations

import numpy as np

from .lti import StateSpace, is_controllable, is_observable
from .network import NetworkedSystem, Subsystem


def random_stable_statespace(rng: np.random.Generator, n: int, m: int = 1,
                             q: int = 1, gain: float = 1.0,
                             min_margin: float = 0.1,
                             max_margin: float = 2.0) -> StateSpace:
    """Random internally stable system; spectrum shifted left by a random
    margin, outputs scaled by ``gain``."""
    if n == 0:
        return StateSpace.from_gain(gain * rng.normal(size=(q, m)))
    A = rng.normal(size=(n, n))
    A = A - (np.linalg.eigvals(A).real.max() + rng.uniform(min_margin, max_margin)) * np.eye(n)
    B = rng.normal(size=(n, m))
    C = gain * rng.normal(size=(q, n))
    D = gain * rng.normal(size=(q, m))
    return StateSpace(A, B, C, D)


def _eig_margin(A: np.ndarray) -> float:
    if A.size == 0:
        return np.inf
    return float(np.abs(np.linalg.eigvals(A).real).min())


def random_subsystem(rng: np.random.Generator, n: int, m: int = 1, q: int = 1,
                     p: int = 1, p_peer: int = 1, with_dz: bool = False,
                     axis_margin: float = 0.02, max_tries: int = 50) -> Subsystem:
    """Random controllable/observable node with dense coupling maps.

    Eigenvalues of A are kept at least ``axis_margin`` away from the
    imaginary axis so frequency-grid evaluations stay well conditioned.
    """
    for _ in range(max_tries):
        A = rng.normal(size=(n, n))
        if _eig_margin(A) < axis_margin:
            continue
        B = rng.normal(size=(n, m))
        C = rng.normal(size=(q, n))
        if not (is_controllable(A, B) and is_observable(A, C)):
            continue
        J = rng.normal(size=(n, p_peer))
        S = rng.normal(size=(p, n))
        Dz = rng.normal(size=(q, p_peer)) if with_dz else None
        return Subsystem(A, B, C, J, S, Dz)
    raise RuntimeError("failed to sample a minimal subsystem")


def random_networked_system(rng: np.random.Generator, n1: int = 3, n2: int = 3,
                            channels: tuple[int, int] = (1, 1),
                            with_dz: bool = False,
                            coupling_scale: float = 1.0,
                            normalize_s: bool = False) -> NetworkedSystem:
    """Dense-coupled two-node network with R = I (always controllable).

    ``channels`` gives (width of node-1 channels, width of node-2
    channels) applied to u/y/z alike; ``normalize_s`` rescales each S_i to
    unit spectral norm (moving the scale into the peer's J) so interaction
    outputs are non-amplifying.
    """
    c1, c2 = channels
    s1 = random_subsystem(rng, n1, m=c1, q=c1, p=c1, p_peer=c2, with_dz=with_dz)
    s2 = random_subsystem(rng, n2, m=c2, q=c2, p=c2, p_peer=c1, with_dz=with_dz)
    J1 = coupling_scale * s1.J
    J2 = coupling_scale * s2.J
    S1, S2 = s1.S, s2.S
    if normalize_s:
        g1 = np.linalg.svd(S1, compute_uv=False)[0]
        g2 = np.linalg.svd(S2, compute_uv=False)[0]
        S1, J2 = S1 / g1, J2 * g1
        S2, J1 = S2 / g2, J1 * g2
    s1 = Subsystem(s1.A, s1.B, s1.C, J1, S1, s1.Dz if with_dz else None)
    s2 = Subsystem(s2.A, s2.B, s2.C, J2, S2, s2.Dz if with_dz else None)
    return NetworkedSystem(s1, s2, np.eye(n1 + n2))


def random_cascade_system(rng: np.random.Generator, n1: int = 3, n2: int = 3,
                          direction: str = "1to2") -> NetworkedSystem:
    """SISO network with one influence direction structurally zero."""
    ns = random_networked_system(rng, n1, n2)
    s1, s2 = ns.sub1, ns.sub2
    if direction == "1to2":
        # nothing flows 2 -> 1
        s1 = Subsystem(s1.A, s1.B, s1.C, np.zeros_like(s1.J), s1.S, None)
    elif direction == "2to1":
        s2 = Subsystem(s2.A, s2.B, s2.C, np.zeros_like(s2.J), s2.S, None)
    else:
        raise ValueError("direction must be '1to2' or '2to1'")
    return NetworkedSystem(s1, s2, ns.R)


def random_stabilizable_pair(rng: np.random.Generator, n: int,
                             m: int = 1, max_tries: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Random controllable (A, B) with A allowed to be unstable."""
    for _ in range(max_tries):
        A = rng.normal(size=(n, n))
        B = rng.normal(size=(n, m))
        if is_controllable(A, B):
            return A, B
    raise RuntimeError("failed to sample a controllable pair")
