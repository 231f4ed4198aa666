"""Gridless v recovery from learned block correlations.

After the block solver converges, block i of the state describes the
sources sharing u-grid point i: gamma_i carries their combined power and
B_i the correlation across the ny-element column array, i.e. a noisy sum
of outer products a(v) a(v)^H of length-ny steering vectors.  Polynomial
rooting of the noise subspace of B_i therefore recovers the v components
without any v grid, and pairing with the block's u point is automatic.
"""

from dataclasses import dataclass

import numpy as np

from .dictionary import Grid1D

__all__ = [
    "PeakSelection",
    "PeakAllocation",
    "RootMusicEstimate",
    "PairProvenance",
    "PairedEstimates",
    "select_peaks",
    "root_music_v",
    "pair_estimates",
]

# eigen-gap ratio below which a rooting result is marked unreliable
_GAP_TOL = 0.1


@dataclass(frozen=True)
class PeakSelection:
    """Chosen block indices, descending by power.  ``fallback`` is set when
    there were fewer strict local maxima than requested and the largest
    values were taken instead."""

    indices: tuple
    fallback: bool


@dataclass(frozen=True)
class PeakAllocation:
    """How many v components to root per chosen block: (block, count) pairs."""

    entries: tuple

    def __post_init__(self):
        entries = tuple((int(i), int(c)) for i, c in self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise ValueError("allocation must contain at least one block")
        blocks = [i for i, _ in entries]
        if len(set(blocks)) != len(blocks):
            raise ValueError("allocation blocks must be distinct")
        if any(c < 1 for _, c in entries):
            raise ValueError("allocation counts must be >= 1")

    @property
    def total(self) -> int:
        return sum(c for _, c in self.entries)


@dataclass(frozen=True)
class RootMusicEstimate:
    """Recovered v values (ascending) with the eigen-gap diagnostic."""

    values: np.ndarray
    eigen_gap: float
    low_confidence: bool


@dataclass(frozen=True)
class PairProvenance:
    block: int
    eigen_gap: float
    low_confidence: bool


@dataclass(frozen=True)
class PairedEstimates:
    """(u, v) estimates; u comes from the grid, v from rooting."""

    pairs: tuple
    provenance: tuple

    def as_array(self) -> np.ndarray:
        return np.array(self.pairs, dtype=float).reshape(-1, 2)


def select_peaks(gamma, grid_u: Grid1D, k_peaks: int) -> PeakSelection:
    """Indices of the k_peaks largest strict local maxima of the power
    spectrum, endpoints compared one-sided.  Falls back to the k_peaks
    largest values (flagged) when maxima are scarce.  Ties break toward
    the lower index."""
    g = np.asarray(gamma, dtype=float)
    if g.ndim != 1 or g.size != grid_u.size:
        raise ValueError("gamma must be 1-D with one entry per grid point")
    if not (1 <= k_peaks <= g.size):
        raise ValueError(f"k_peaks must lie in [1, {g.size}]")
    n = g.size
    maxima = [
        i for i in range(n)
        if (i == 0 or g[i] > g[i - 1]) and (i == n - 1 or g[i] > g[i + 1])
    ]
    maxima.sort(key=lambda i: (-g[i], i))
    if len(maxima) >= k_peaks:
        return PeakSelection(indices=tuple(maxima[:k_peaks]), fallback=False)
    order = sorted(range(n), key=lambda i: (-g[i], i))
    return PeakSelection(indices=tuple(order[:k_peaks]), fallback=True)


def root_music_v(b: np.ndarray, k: int, gap_tol: float = _GAP_TOL) -> RootMusicEstimate:
    """Root the MUSIC polynomial of a block correlation matrix.

    Parameters
    ----------
    b : Hermitian PSD matrix of size ny.
    k : number of v components to extract, 1 <= k <= ny - 1.

    Returns
    -------
    RootMusicEstimate with k values in [-1, 1].  The polynomial is
    z^(ny-1) a(1/z)^H E_n E_n^H a(z); its roots come in conjugate
    reciprocal pairs and the k roots inside the unit circle closest to it
    are kept, v = arg(root) / pi.  A small gap between the k-th and
    (k+1)-th eigenvalues flags the result as low confidence.
    """
    b = np.asarray(b, dtype=complex)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError("correlation matrix must be square")
    ny = b.shape[0]
    if not (1 <= k <= ny - 1):
        raise ValueError(f"k must lie in [1, {ny - 1}] for a {ny}-element block")
    scale = float(np.max(np.abs(b)))
    if scale > 0 and np.max(np.abs(b - b.conj().T)) > 1e-8 * scale:
        raise ValueError("correlation matrix must be Hermitian")

    evals, evecs = np.linalg.eigh(b)
    noise = evecs[:, : ny - k]
    c = noise @ noise.conj().T
    coeffs = np.array([np.trace(c, offset=m) for m in range(ny - 1, -ny, -1)])
    roots = np.roots(coeffs)

    inside = sorted(roots[np.abs(roots) < 1.0], key=lambda r: abs(1.0 - abs(r)))
    chosen = list(inside[:k])
    degenerate = len(chosen) < k
    if degenerate:
        # double roots can straddle or sit on the circle; take the nearest
        # leftover roots, skipping conjugate reciprocals of ones already kept
        rest = sorted(roots[np.abs(roots) >= 1.0], key=lambda r: abs(1.0 - abs(r)))
        for r in rest:
            if len(chosen) == k:
                break
            if all(abs(r * np.conj(c0) - 1.0) > 1e-8 for c0 in chosen):
                chosen.append(r)
        while len(chosen) < k:
            chosen.append(0.0 + 0.0j)

    values = np.sort(np.angle(np.array(chosen)) / np.pi)
    desc = evals[::-1]
    gap = float((desc[k - 1] - desc[k]) / desc[0]) if desc[0] > 0 else 0.0
    return RootMusicEstimate(
        values=values,
        eigen_gap=gap,
        low_confidence=bool(gap < gap_tol or degenerate),
    )


def pair_estimates(state, grid_u: Grid1D, allocation: PeakAllocation) -> PairedEstimates:
    """Root every allocated block and pair its v values with the block's
    u-grid point.  All allocated blocks must be active, and each count must
    leave a nonempty noise subspace (count <= ny - 1)."""
    ny = state.block_size
    pairs = []
    provenance = []
    for block, count in allocation.entries:
        if not (0 <= block < state.n_blocks):
            raise ValueError(f"block {block} out of range")
        if not state.active[block]:
            raise ValueError(f"block {block} is inactive")
        if count > ny - 1:
            raise ValueError(f"cannot root {count} components from a {ny}-element block")
        est = root_music_v(state.b_mats[block], count)
        u = float(grid_u.points[block])
        pairs.extend((u, float(v)) for v in est.values)
        provenance.append(PairProvenance(block=block, eigen_gap=est.eigen_gap,
                                         low_confidence=est.low_confidence))
    return PairedEstimates(pairs=tuple(pairs), provenance=tuple(provenance))
