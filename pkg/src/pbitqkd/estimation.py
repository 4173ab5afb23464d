"""LOCC estimation of twisted observables via product-observable sampling.

The phase-error observable gamma_x(U) is generally entangled across the
Alice/Bob cut, so nobody can measure it directly with local operations.  It
can, however, be expanded over the Hilbert-Schmidt-orthonormal product basis

    gamma_x = sum_{ja,jb} s[ja,jb] * O_ja ⊗ O_jb,
    O_j = (P_1 ⊗ P_2)/2  (single-qubit Paulis on the local key/shield pair),

and each product term is locally measurable: Alice and Bob measure O_ja and
O_jb on a batch of copies and multiply outcomes.  Combining the empirical
group means with the coefficients recovers <gamma_x> and hence the phase
error rate eps_z = (1 - <gamma_x>)/2.

Estimation always goes through per-group product outcomes; nothing in this
module evaluates the global observable against the state behind the
estimator's back.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .linalg import TensorLayout, hs_norm, pauli_product_basis
from .states import DensityState

__all__ = [
    "ProductDecomposition",
    "decompose_two_local",
    "local_eigensystem",
    "joint_outcome_table",
    "sample_product_outcomes",
    "estimate_eps_x",
    "EstimationResult",
    "estimate_eps_z_locc",
    "optimal_untwist",
]

_EIGVECS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0),
    "Y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2.0),
    "Z": np.eye(2, dtype=complex),
}
_EIGVALS = {
    "I": np.array([1.0, 1.0]),
    "X": np.array([1.0, -1.0]),
    "Y": np.array([1.0, -1.0]),
    "Z": np.array([1.0, -1.0]),
}


def local_eigensystem(label: str) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvector columns of the normalized basis element O_label.

    ``label`` is a string over IXYZ, one letter per qubit; the observable is
    the Pauli product divided by sqrt(2^k), so outcomes are products of ±1
    divided by that normalization (identity factors contribute +1 and are
    "measured" in the computational basis).
    """
    vals = np.array([1.0])
    vecs = np.array([[1.0]], dtype=complex)
    for ch in label:
        if ch not in _EIGVECS:
            raise ValueError(f"unknown Pauli letter {ch!r}")
        vals = np.kron(vals, _EIGVALS[ch])
        vecs = np.kron(vecs, _EIGVECS[ch])
    return vals / np.sqrt(2.0 ** len(label)), vecs


@dataclass
class ProductDecomposition:
    """Expansion of a two-sided observable over local Pauli product bases.

    coeffs[ja, jb] multiplies O_{ja} ⊗ O_{jb}; side_a/side_b record which
    layout factors each side's basis acts on (in order).
    """

    labels_a: tuple[str, ...]
    labels_b: tuple[str, ...]
    coeffs: np.ndarray
    side_a: tuple[str, ...] = ("A", "A'")
    side_b: tuple[str, ...] = ("B", "B'")

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (len(self.labels_a), len(self.labels_b)):
            raise ValueError(
                f"coeff shape {self.coeffs.shape} != "
                f"({len(self.labels_a)}, {len(self.labels_b)})"
            )

    @property
    def hs_norm_sq(self) -> float:
        """||Gamma||_HS² = sum of squared coefficients (the basis is orthonormal)."""
        return float(np.sum(self.coeffs**2))

    def support(self, tol: float = 1e-12) -> list[tuple[int, int]]:
        ja, jb = np.nonzero(np.abs(self.coeffs) > tol)
        return sorted(zip(ja.tolist(), jb.tolist()))

    def reconstruct(self, layout: TensorLayout) -> np.ndarray:
        """Rebuild the full-space matrix sum_jajb s O_ja ⊗ O_jb on ``layout``."""
        ba = np.stack([op for _, op in pauli_product_basis(len(self.side_a))])
        bb = np.stack([op for _, op in pauli_product_basis(len(self.side_b))])
        gperm = np.einsum("ab,aij,bkl->ikjl", self.coeffs, ba, bb)
        da = 2 ** len(self.side_a)
        db = 2 ** len(self.side_b)
        gperm = gperm.reshape(da * db, da * db)
        return _permute_sides_inverse(gperm, layout, self.side_a, self.side_b)


def _side_axes(layout: TensorLayout, side_a: Sequence[str], side_b: Sequence[str]) -> list[int]:
    axes = [layout.axis(lab) for lab in tuple(side_a) + tuple(side_b)]
    if sorted(axes) != list(range(len(layout.factors))):
        raise ValueError(
            f"sides {side_a}+{side_b} must cover the layout {layout.labels} exactly"
        )
    return axes


def _permute_sides(
    mat: np.ndarray, layout: TensorLayout, side_a: Sequence[str], side_b: Sequence[str]
) -> np.ndarray:
    """Reorder a layout-ordered matrix to (side_a..., side_b...) index order."""
    axes = _side_axes(layout, side_a, side_b)
    n = len(layout.factors)
    dims = layout.dims
    tens = np.asarray(mat, dtype=complex).reshape(dims + dims)
    tens = tens.transpose(axes + [a + n for a in axes])
    return tens.reshape(layout.dim, layout.dim)


def _permute_sides_inverse(
    mat: np.ndarray, layout: TensorLayout, side_a: Sequence[str], side_b: Sequence[str]
) -> np.ndarray:
    axes = _side_axes(layout, side_a, side_b)
    n = len(layout.factors)
    inv = np.argsort(axes).tolist()
    side_dims = tuple(layout.dims[a] for a in axes)
    tens = np.asarray(mat, dtype=complex).reshape(side_dims + side_dims)
    tens = tens.transpose(inv + [a + n for a in inv])
    return tens.reshape(layout.dim, layout.dim)


def decompose_two_local(
    op: np.ndarray,
    layout: TensorLayout,
    side_a: Sequence[str] = ("A", "A'"),
    side_b: Sequence[str] = ("B", "B'"),
    tol: float = 1e-9,
) -> ProductDecomposition:
    """Expand a Hermitian observable over the two-sided Pauli product basis.

    Every factor on both sides must be a qubit.  Coefficients are
    s[ja, jb] = Tr[(O_ja ⊗ O_jb) op]; for Hermitian input they are real
    (enforced within ``tol``).
    """
    for lab in tuple(side_a) + tuple(side_b):
        if layout.dim_of(lab) != 2:
            raise ValueError(f"factor {lab!r} is not a qubit; Pauli basis unavailable")
    gperm = _permute_sides(op, layout, side_a, side_b)
    ka, kb = len(tuple(side_a)), len(tuple(side_b))
    basis_a = pauli_product_basis(ka)
    basis_b = pauli_product_basis(kb)
    ba = np.stack([m for _, m in basis_a])
    bb = np.stack([m for _, m in basis_b])
    da, db = 2**ka, 2**kb
    g4 = gperm.reshape(da, db, da, db)
    coeffs = np.einsum("aij,bkl,jlik->ab", ba, bb, g4)
    imag_max = float(np.max(np.abs(coeffs.imag)))
    if imag_max > tol:
        raise ValueError(f"observable is not Hermitian enough (imag coeff {imag_max:.3e})")
    return ProductDecomposition(
        labels_a=tuple(lab for lab, _ in basis_a),
        labels_b=tuple(lab for lab, _ in basis_b),
        coeffs=coeffs.real,
        side_a=tuple(side_a),
        side_b=tuple(side_b),
    )


def joint_outcome_table(
    state: DensityState,
    decomp: ProductDecomposition,
    ja: int,
    jb: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Joint outcome distribution for one product-observable pair.

    Returns (probs, products): ``probs[k]`` is the probability of the k-th
    joint eigenvector (side-A outcome varying slowest) and ``products[k]``
    the corresponding product of local eigenvalues lambda_a * lambda_b.
    """
    vals_a, vecs_a = local_eigensystem(decomp.labels_a[ja])
    vals_b, vecs_b = local_eigensystem(decomp.labels_b[jb])
    rho = _permute_sides(state.mat, state.layout, decomp.side_a, decomp.side_b)
    v = np.kron(vecs_a, vecs_b)
    probs = np.real(np.einsum("ik,ij,jk->k", v.conj(), rho, v))
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if not np.isclose(total, 1.0, atol=1e-8):
        raise ValueError(f"outcome probabilities sum to {total}, state not normalized?")
    probs = probs / total
    products = np.kron(vals_a, vals_b)
    return probs, products


def sample_product_outcomes(
    state: DensityState,
    decomp: ProductDecomposition,
    ja: int,
    jb: int,
    m: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample m product outcomes lambda_a*lambda_b for the given basis pair."""
    probs, products = joint_outcome_table(state, decomp, ja, jb)
    idx = rng.choice(probs.size, size=m, p=probs)
    return products[idx]


def estimate_eps_x(outcomes: np.ndarray) -> float:
    """Bit-error estimate from ±1 key-correlation outcomes: (1 - mean)/2."""
    arr = np.asarray(outcomes, dtype=float)
    if arr.size == 0:
        raise ValueError("no outcomes")
    return float((1.0 - arr.mean()) / 2.0)


@dataclass
class EstimationResult:
    """Outcome of one LOCC phase-error estimation."""

    out: float
    eps_z_raw: float
    eps_z: float
    clamped: bool
    group_means: dict = field(default_factory=dict)
    group_counts: dict = field(default_factory=dict)


def estimate_eps_z_locc(
    records: Mapping[tuple[int, int], np.ndarray],
    decomp: ProductDecomposition,
    tol: float = 1e-12,
) -> EstimationResult:
    """Combine per-group product outcomes into a phase-error estimate.

    ``records`` maps (ja, jb) basis-pair indices to arrays of sampled
    products.  Every pair in the decomposition's support must come with a
    nonempty record (pairs with zero coefficient may be omitted -- they
    cannot contribute).  The raw estimate (1 - out)/2 is clamped to [0, 1]
    with a flag; callers keep the raw value for transcripts.
    """
    out = 0.0
    means: dict[str, float] = {}
    counts: dict[str, int] = {}
    for ja, jb in decomp.support(tol):
        rec = records.get((ja, jb))
        if rec is None or len(rec) == 0:
            raise ValueError(
                f"support pair ({decomp.labels_a[ja]},{decomp.labels_b[jb]}) has no outcomes"
            )
        arr = np.asarray(rec, dtype=float)
        key = f"{decomp.labels_a[ja]},{decomp.labels_b[jb]}"
        means[key] = float(arr.mean())
        counts[key] = int(arr.size)
        out += float(decomp.coeffs[ja, jb]) * means[key]
    raw = (1.0 - out) / 2.0
    clamped = not 0.0 <= raw <= 1.0
    eps_z = min(max(raw, 0.0), 1.0)
    return EstimationResult(
        out=out,
        eps_z_raw=raw,
        eps_z=eps_z,
        clamped=clamped,
        group_means=means,
        group_counts=counts,
    )


def optimal_untwist(
    records: Mapping[tuple[int, int], np.ndarray],
    decomps: Sequence[ProductDecomposition],
    tol: float = 1e-12,
) -> tuple[list[EstimationResult], int]:
    """Evaluate several candidate twisting decompositions on shared records.

    The same measured group means serve every candidate (their supports may
    differ; the records must cover the union).  Returns all results and the
    index of the candidate with the smallest clamped eps_z -- the best
    untwisting consistent with the observed statistics.
    """
    if not decomps:
        raise ValueError("need at least one candidate decomposition")
    results = [estimate_eps_z_locc(records, dec, tol) for dec in decomps]
    best = int(np.argmin([r.eps_z for r in results]))
    return results, best
