"""Pauli attack patterns and the binding channel that prepares the hiding family.

Two noise mechanisms appear in protocol runs:

* independent (or fixed-weight) X/Z Pauli patterns on Bob's key qubit --
  the adversarially-flavored noise class the estimators are calibrated
  against; patterns are sampled per copy, never materialized as 16^n
  matrices;
* the binding channel: a six-branch Kraus map on Bob's key/shield pair
  B ⊗ B' that turns two maximally entangled pairs into the hiding state
  rho_h(p, kappa) exactly (white noise enters as a convex mix with the
  completely randomizing channel on the same pair).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import (
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    dagger,
    kron_all,
    promote,
)
from .states import CHI_C, CHI_S, DensityState, KEY_SHIELD_LAYOUT, bell_vec, proj

__all__ = [
    "PauliNoiseModel",
    "pauli_op",
    "apply_pauli",
    "POVM_M0",
    "POVM_M1",
    "binding_channel_kraus",
    "apply_channel",
    "binding_channel_apply",
    "channel_branches",
    "sample_branch",
]


@dataclass(frozen=True)
class PauliNoiseModel:
    """iid or fixed-weight X/Z flip patterns on the B factor of each copy.

    mode "iid": every copy independently gets an X flip with probability
    eps_x and a Z flip with probability eps_z.  mode "fixed_weight": exactly
    round(n*eps_x) X flips and round(n*eps_z) Z flips land on uniformly
    random positions (sampled without replacement, X and Z independent).
    """

    eps_x: float
    eps_z: float
    mode: str = "iid"

    def __post_init__(self) -> None:
        if not 0.0 <= self.eps_x <= 1.0 or not 0.0 <= self.eps_z <= 1.0:
            raise ValueError("flip probabilities must lie in [0, 1]")
        if self.mode not in ("iid", "fixed_weight"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def sample_pattern(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Per-copy flip indicators (x, z), each a uint8 array of length n."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        if self.mode == "iid":
            x = (rng.random(n) < self.eps_x).astype(np.uint8)
            z = (rng.random(n) < self.eps_z).astype(np.uint8)
            return x, z
        x = np.zeros(n, dtype=np.uint8)
        z = np.zeros(n, dtype=np.uint8)
        kx = int(round(n * self.eps_x))
        kz = int(round(n * self.eps_z))
        if kx:
            x[rng.choice(n, size=kx, replace=False)] = 1
        if kz:
            z[rng.choice(n, size=kz, replace=False)] = 1
        return x, z

    def to_json(self) -> str:
        return json.dumps(
            {"eps_x": self.eps_x, "eps_z": self.eps_z, "mode": self.mode},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "PauliNoiseModel":
        d = json.loads(text)
        return cls(float(d["eps_x"]), float(d["eps_z"]), str(d.get("mode", "iid")))


def pauli_op(x: int, z: int) -> np.ndarray:
    """Single-qubit sigma_x^x sigma_z^z (phases irrelevant under conjugation)."""
    op = np.eye(2, dtype=complex)
    if x:
        op = PAULI_X @ op
    if z:
        op = PAULI_Z @ op
    return op


def apply_pauli(state: DensityState, x: int, z: int, label: str = "B") -> DensityState:
    """Conjugate one labeled qubit factor by sigma_x^x sigma_z^z."""
    if not x and not z:
        return DensityState(state.mat.copy(), state.layout)
    return state.conjugate_by(pauli_op(x, z), [label])


# --- the binding channel -----------------------------------------------------

# Two-outcome shield measurement used by the non-key-flipping branches: a
# diagonal POVM pair with M0†M0 + M1†M1 = I (c² + s² = 1 on each entry).
POVM_M0 = np.diag([CHI_C, CHI_S]).astype(complex)
POVM_M1 = np.diag([CHI_S, CHI_C]).astype(complex)
_M0 = POVM_M0
_M1 = POVM_M1
_KET = {0: np.array([[1, 0], [0, 0]], complex), 1: np.array([[0, 0], [0, 1]], complex)}


def binding_channel_kraus(p: float, kappa: float = 0.0) -> list[tuple[str, np.ndarray]]:
    """Labeled Kraus operators of the binding channel on B ⊗ B'.

    Six branches realize the flagged-Bell mixture (branch probabilities on a
    double maximally-entangled input: p/4 each for 1a/1b/2/3 and (1-p)/2 each
    for 4a/4b); for kappa > 0 the whole map is mixed with the completely
    randomizing channel on the pair (16 extra Pauli-product operators), which
    adds the white-noise term of rho_h.  Completeness sum K†K = I holds for
    every (p, kappa).
    """
    if not 0.0 <= p <= 1.0 or not 0.0 <= kappa <= 1.0:
        raise ValueError("p and kappa must lie in [0, 1]")
    six: list[tuple[str, np.ndarray]] = [
        ("1a", np.sqrt(p / 2.0) * np.kron(PAULI_I, _KET[0])),
        ("1b", np.sqrt(p / 2.0) * np.kron(PAULI_Z, _KET[1])),
        ("2", np.sqrt(p / 4.0) * np.kron(PAULI_Z, PAULI_Y)),
        ("3", np.sqrt(p / 4.0) * np.kron(PAULI_I, PAULI_X)),
        ("4a", np.sqrt(1.0 - p) * np.kron(PAULI_X, _M0)),
        ("4b", np.sqrt(1.0 - p) * np.kron(PAULI_Y, PAULI_Z @ _M1)),
    ]
    ops = [(lab, np.sqrt(1.0 - kappa) * k) for lab, k in six]
    if kappa > 0.0:
        paulis = [PAULI_I, PAULI_X, PAULI_Y, PAULI_Z]
        letters = "IXYZ"
        for i, pi in enumerate(paulis):
            for j, pj in enumerate(paulis):
                ops.append(
                    (f"r{letters[i]}{letters[j]}", np.sqrt(kappa) / 4.0 * np.kron(pi, pj))
                )
    return ops


def apply_channel(
    state: DensityState,
    kraus: Sequence[tuple[str, np.ndarray]] | Sequence[np.ndarray],
    labels: Sequence[str] = ("B", "B'"),
) -> DensityState:
    """Deterministic channel action sum_k K rho K† on the given factors."""
    out = np.zeros_like(state.mat)
    for item in kraus:
        k = item[1] if isinstance(item, tuple) else item
        big = promote(k, state.layout, labels)
        out += big @ state.mat @ dagger(big)
    return DensityState(out, state.layout)


def binding_channel_apply(state: DensityState, p: float, kappa: float = 0.0) -> DensityState:
    """Apply the binding channel to the B ⊗ B' factors of a four-factor state."""
    return apply_channel(state, binding_channel_kraus(p, kappa), ("B", "B'"))


def channel_branches(
    state: DensityState,
    kraus: Sequence[tuple[str, np.ndarray]],
    labels: Sequence[str] = ("B", "B'"),
) -> list[tuple[str, float, DensityState]]:
    """Branch probabilities and normalized post-states for each Kraus operator."""
    out = []
    for lab, k in kraus:
        big = promote(k, state.layout, labels)
        post = big @ state.mat @ dagger(big)
        prob = float(np.trace(post).real)
        if prob > 1e-15:
            post = post / prob
        out.append((lab, prob, DensityState(post, state.layout)))
    return out


def sample_branch(
    state: DensityState,
    kraus: Sequence[tuple[str, np.ndarray]],
    rng: np.random.Generator,
    labels: Sequence[str] = ("B", "B'"),
) -> tuple[str, DensityState]:
    """Pick one Kraus branch at random according to its probability."""
    branches = channel_branches(state, kraus, labels)
    probs = np.array([b[1] for b in branches])
    probs = probs / probs.sum()
    idx = int(rng.choice(len(branches), p=probs))
    lab, _, post = branches[idx]
    return lab, post
