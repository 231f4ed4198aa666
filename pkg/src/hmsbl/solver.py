"""Block-sparse Bayesian EM solver shared by H-MSBL and the flat baseline.

The model is Y = D X + V with D organized in M column blocks of width b.
Block i of X carries a zero-mean Gaussian prior with covariance
gamma_i * B_i, where gamma_i >= 0 is the block power and B_i is a
unit-Frobenius correlation matrix.  Noise is white with variance lam.

For H-MSBL the dictionary is Phi_u kron I_ny (b = ny) and each B_i absorbs
the v-frequency structure of the sources sharing u-bin i, so no v grid is
ever formed.  The flat baseline is the same solver with b = 1 on an
explicit 2-D dictionary.  Neither backend materializes Phi_u kron I_ny:
the marginal covariance is assembled blockwise as

    Sigma_y = sum_i gamma_i (phi_i phi_i^H) kron B_i + lam I

so per-iteration cost never depends on any v-grid size.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dictionary import DictionaryPair, KronDictionary
from .signal_model import SnapshotSet, sample_covariance

__all__ = [
    "SolverError",
    "DegenerateInputError",
    "HMsblParams",
    "HMsblState",
    "Posterior",
    "RunDiagnostics",
    "init_state",
    "e_step",
    "update_gamma",
    "update_b",
    "update_lambda",
    "ml_cost",
    "prune",
    "compress_snapshots",
    "run",
]


class SolverError(RuntimeError):
    """An EM run reached a numerically invalid or degenerate state."""


class DegenerateInputError(ValueError):
    """Input data carries no energy to fit."""


@dataclass
class HMsblParams:
    """Knobs for one EM run.

    ``lambda_mode`` is "fixed" (use ``lambda_value``) or "adaptive"
    (re-estimate the noise variance each iteration).  ``prune_tol`` is a
    relative threshold against the largest block power, or an absolute one
    with ``prune_mode="absolute"``; zero disables pruning.  ``compress``
    replaces Y by a rank-preserving square root of Y Y^H when snapshots
    outnumber rows, leaving every 1/L average unchanged.
    """

    max_iters: int = 200
    prune_tol: float = 1e-3
    prune_mode: str = "relative"
    b_loading: float = 1e-10
    cost_tol: float = 1e-8
    lambda_mode: str = "fixed"
    lambda_value: float = 1e-2
    compress: bool = False

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.prune_tol < 0:
            raise ValueError("prune_tol must be >= 0")
        if self.prune_mode not in ("relative", "absolute"):
            raise ValueError(f"unknown prune_mode {self.prune_mode!r}")
        if self.b_loading < 0:
            raise ValueError("b_loading must be >= 0")
        if self.cost_tol < 0:
            raise ValueError("cost_tol must be >= 0")
        if self.lambda_mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown lambda_mode {self.lambda_mode!r}")
        if self.lambda_mode == "fixed" and not self.lambda_value > 0:
            raise ValueError("fixed lambda_value must be > 0")


@dataclass
class HMsblState:
    """Mutable solver state: block powers, correlations, noise variance."""

    gamma: np.ndarray
    b_mats: np.ndarray
    noise_var: float
    active: np.ndarray
    cost_trace: list = field(default_factory=list)

    @property
    def n_blocks(self) -> int:
        return self.gamma.size

    @property
    def block_size(self) -> int:
        return self.b_mats.shape[1]


@dataclass
class Posterior:
    """Posterior moments of X given Y: mean columns and per-block
    covariance diagonal blocks.  Inactive blocks are identically zero."""

    mu: np.ndarray
    sigma_blocks: np.ndarray


@dataclass
class RunDiagnostics:
    cost_trace: list
    iter_seconds: list
    active_counts: list
    n_iters: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "cost_trace": [float(c) for c in self.cost_trace],
            "iter_seconds": [float(t) for t in self.iter_seconds],
            "active_counts": [int(a) for a in self.active_counts],
            "n_iters": int(self.n_iters),
            "converged": bool(self.converged),
        }


# ---------------------------------------------------------------------------
# dictionary backends


class _KronIdentityOperator:
    """Phi kron I_b applied blockwise; nothing of size (n x M b) is formed."""

    def __init__(self, phi: np.ndarray, block_size: int):
        self.phi = np.asarray(phi, dtype=complex)
        self.block_size = int(block_size)
        self.n_factor_rows, self.n_blocks = self.phi.shape
        self.n_rows = self.n_factor_rows * self.block_size

    def signal_cov(self, scaled: np.ndarray) -> np.ndarray:
        # sum_i (phi_i phi_i^H) kron (gamma_i B_i)
        c4 = np.einsum("xm,ym,mkl->xkyl", self.phi, self.phi.conj(), scaled, optimize=True)
        return c4.reshape(self.n_rows, self.n_rows)

    def adjoint_blocks(self, w: np.ndarray) -> np.ndarray:
        w3 = w.reshape(self.n_factor_rows, self.block_size, -1)
        return np.einsum("xm,xkl->mkl", self.phi.conj(), w3, optimize=True)

    def forward(self, blocks: np.ndarray) -> np.ndarray:
        out = np.einsum("xm,mkl->xkl", self.phi, blocks, optimize=True)
        return out.reshape(self.n_rows, -1)

    def quad_blocks(self, rinv: np.ndarray) -> np.ndarray:
        # (phi_m kron I)^H Rinv (phi_m kron I) for every block m
        r4 = rinv.reshape(self.n_factor_rows, self.block_size, self.n_factor_rows, self.block_size)
        t = np.einsum("xm,xkyl->mkyl", self.phi.conj(), r4, optimize=True)
        return np.einsum("mkyl,ym->mkl", t, self.phi, optimize=True)

    def gram_fro(self) -> float:
        # || (Phi Phi^H) kron I ||_F = || Phi Phi^H ||_F * sqrt(b)
        g = self.phi @ self.phi.conj().T
        return float(np.linalg.norm(g, "fro") * math.sqrt(self.block_size))

    def lambda_penalty(self, gamma: np.ndarray, lam: float) -> float:
        g = (self.phi * gamma) @ self.phi.conj().T
        a = g + lam * np.eye(self.n_factor_rows)
        tr = np.trace(np.linalg.solve(a, g)).real
        return lam * tr / self.n_factor_rows


class _ColumnOperator:
    """Arbitrary dictionary columns treated as blocks of width one."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.n_rows, self.n_blocks = self.matrix.shape
        self.block_size = 1

    def signal_cov(self, scaled: np.ndarray) -> np.ndarray:
        w = scaled[:, 0, 0].real
        return (self.matrix * w) @ self.matrix.conj().T

    def adjoint_blocks(self, w: np.ndarray) -> np.ndarray:
        return (self.matrix.conj().T @ w)[:, None, :]

    def forward(self, blocks: np.ndarray) -> np.ndarray:
        return self.matrix @ blocks[:, 0, :]

    def quad_blocks(self, rinv: np.ndarray) -> np.ndarray:
        t = rinv @ self.matrix
        q = np.einsum("xp,xp->p", self.matrix.conj(), t)
        return q[:, None, None]

    def gram_fro(self) -> float:
        return float(np.linalg.norm(self.matrix @ self.matrix.conj().T, "fro"))

    def lambda_penalty(self, gamma: np.ndarray, lam: float) -> float:
        g = (self.matrix * gamma) @ self.matrix.conj().T
        a = g + lam * np.eye(self.n_rows)
        tr = np.trace(np.linalg.solve(a, g)).real
        return lam * tr / self.n_rows


def _operator_for(dictionary, y: SnapshotSet):
    if isinstance(dictionary, DictionaryPair):
        phi_u = dictionary.phi_u
        if phi_u.shape[0] != y.nx:
            raise ValueError(f"phi_u has {phi_u.shape[0]} rows for an nx = {y.nx} array")
        return _KronIdentityOperator(phi_u, y.ny)
    if isinstance(dictionary, KronDictionary):
        if dictionary.matrix.shape[0] != y.size:
            raise ValueError(
                f"dictionary has {dictionary.matrix.shape[0]} rows for {y.size} array elements"
            )
        return _ColumnOperator(dictionary.matrix)
    raise TypeError(f"unsupported dictionary type {type(dictionary).__name__}")


def _hermitize(blocks: np.ndarray) -> np.ndarray:
    return 0.5 * (blocks + blocks.conj().swapaxes(-1, -2))


# ---------------------------------------------------------------------------
# solver operations


def init_state(y: SnapshotSet, dictionary, params: HMsblParams) -> HMsblState:
    """Data-scaled flat start.

    gamma_i = ||Y Y^H / L||_F / ||D D^H||_F for the solver's own effective
    dictionary D, B_i = I / sqrt(b), lambda from ``params`` in fixed mode or
    0.01 tr(S_hat) / n in adaptive mode.
    """
    op = _operator_for(dictionary, y)
    scm = sample_covariance(y)
    data_fro = float(np.linalg.norm(scm, "fro"))
    if data_fro == 0.0:
        raise DegenerateInputError("snapshot matrix carries no energy")
    gamma = np.full(op.n_blocks, data_fro / op.gram_fro())
    b0 = np.eye(op.block_size, dtype=complex) / math.sqrt(op.block_size)
    b_mats = np.broadcast_to(b0, (op.n_blocks, op.block_size, op.block_size)).copy()
    if params.lambda_mode == "fixed":
        lam = float(params.lambda_value)
    else:
        lam = 0.01 * float(np.trace(scm).real) / op.n_rows
    return HMsblState(
        gamma=gamma,
        b_mats=b_mats,
        noise_var=lam,
        active=np.ones(op.n_blocks, dtype=bool),
        cost_trace=[],
    )


def _scaled_prior(state: HMsblState) -> np.ndarray:
    scaled = state.gamma[:, None, None] * state.b_mats
    scaled[~state.active] = 0.0
    return scaled


def _factor_sigma_y(op, state: HMsblState):
    scaled = _scaled_prior(state)
    sy = op.signal_cov(scaled)
    idx = np.arange(op.n_rows)
    sy[idx, idx] += state.noise_var
    try:
        cho = cho_factor(sy, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - requires lam <= 0
        raise SolverError(f"marginal covariance not positive definite: {exc}") from exc
    return scaled, cho


def _posterior(op, data: np.ndarray, state: HMsblState) -> Posterior:
    scaled, cho = _factor_sigma_y(op, state)
    rinv = cho_solve(cho, np.eye(op.n_rows, dtype=complex))
    w = cho_solve(cho, data)
    z = op.adjoint_blocks(w)
    mu_blocks = np.einsum("mab,mbl->mal", scaled, z)
    g = op.quad_blocks(rinv)
    sigma = scaled - np.einsum("mab,mbc,mcd->mad", scaled, g, scaled, optimize=True)
    sigma = _hermitize(sigma)
    mu = mu_blocks.reshape(op.n_blocks * op.block_size, -1)
    return Posterior(mu=mu, sigma_blocks=sigma)


def e_step(y: SnapshotSet, state: HMsblState, dictionary) -> Posterior:
    """Posterior mean and per-block covariance under the current prior.

    Works through Sigma_y = D Sigma_0 D^H + lam I, so cost is independent
    of the number of blocks beyond one pass of blockwise assembly.
    """
    if state.noise_var <= 0:
        raise ValueError("noise variance must be > 0")
    if not state.active.any():
        raise SolverError("no active blocks left")
    op = _operator_for(dictionary, y)
    return _posterior(op, y.y, state)


def _moment_blocks(post: Posterior, n_blocks: int, block_size: int, n_snapshots: int) -> np.ndarray:
    mu_b = post.mu.reshape(n_blocks, block_size, -1)
    outer = np.einsum("mal,mbl->mab", mu_b, mu_b.conj()) / n_snapshots
    return _hermitize(post.sigma_blocks + outer)


def _gamma_from_moments(moments, b_mats, active, b_loading) -> np.ndarray:
    m = b_mats.shape[0]
    b = b_mats.shape[1]
    gamma = np.zeros(m)
    if active.any():
        loaded = b_mats[active] + b_loading * np.eye(b)
        solved = np.linalg.solve(loaded, moments[active])
        traces = np.einsum("mkk->m", solved).real / b
        gamma[active] = np.maximum(traces, 0.0)
    return gamma


def update_gamma(post: Posterior, state: HMsblState, n_snapshots: int, b_loading: float = 1e-10) -> np.ndarray:
    """Block powers gamma_i = tr(B_i^-1 (Sigma_x^i + mu^i mu^iH / L)) / b.

    Consumes the previous iteration's B_i, diagonally loaded by
    ``b_loading`` before inversion.  Inactive blocks stay at zero.
    """
    moments = _moment_blocks(post, state.n_blocks, state.block_size, n_snapshots)
    return _gamma_from_moments(moments, state.b_mats, state.active, b_loading)


def _b_from_moments(moments, gamma, active):
    """B_i = (moment_i / gamma_i) scaled to unit Frobenius norm.

    Returns the new matrices and the norms removed, so callers can push the
    scale back into gamma and keep gamma_i B_i equal to the moment.
    """
    b_new = np.array(moments, copy=True)
    m = moments.shape[0]
    scales = np.ones(m)
    ok = active & (gamma > 0)
    if ok.any():
        pre = moments[ok] / gamma[ok, None, None]
        fro = np.sqrt(np.einsum("mab,mab->m", pre, pre.conj()).real)
        if np.any(fro == 0):
            raise SolverError("zero posterior moment on an active block")
        b_new[ok] = pre / fro[:, None, None]
        scales[ok] = fro
    return b_new, scales, ok


def update_b(post: Posterior, state: HMsblState, n_snapshots: int) -> np.ndarray:
    """Unit-Frobenius correlation update B_i from the posterior moment.

    Uses the gamma values already placed in ``state`` by this iteration's
    gamma update.  Blocks that are inactive or have zero gamma keep their
    previous correlation matrix.
    """
    moments = _moment_blocks(post, state.n_blocks, state.block_size, n_snapshots)
    b_new, _, ok = _b_from_moments(moments, state.gamma, state.active)
    out = state.b_mats.copy()
    out[ok] = _hermitize(b_new[ok])
    return out


def update_lambda(y: SnapshotSet, post: Posterior, state: HMsblState, dictionary) -> float:
    """Stabilized noise-variance update.

    lam <- ||Y - D mu||_F^2 / (n L)
           + (lam / n_u) tr(A Gamma A^H (A Gamma A^H + lam I)^-1)

    where A is Phi_u (n_u = nx) for the block solver and the flat
    dictionary (n_u = n) for the baseline.  Floored at
    1e-12 tr(S_hat) / n so the next factorization stays positive definite.
    """
    op = _operator_for(dictionary, y)
    mu_blocks = post.mu.reshape(op.n_blocks, op.block_size, -1)
    resid = y.y - op.forward(mu_blocks)
    n = op.n_rows
    L = y.n_snapshots
    lam = float(np.linalg.norm(resid, "fro") ** 2) / (n * L)
    lam += op.lambda_penalty(np.where(state.active, state.gamma, 0.0), state.noise_var)
    floor = 1e-12 * float(np.linalg.norm(y.y, "fro") ** 2) / (L * n)
    return max(lam, floor)


def ml_cost(y: SnapshotSet, state: HMsblState, dictionary) -> float:
    """Marginal-likelihood cost log det Sigma_y + tr(Sigma_y^-1 S_hat)."""
    op = _operator_for(dictionary, y)
    scm = sample_covariance(y)
    return _cost_from_scm(op, scm, state)


def _cost_from_scm(op, scm: np.ndarray, state: HMsblState) -> float:
    _, cho = _factor_sigma_y(op, state)
    logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]).real)))
    tr = float(np.trace(cho_solve(cho, scm)).real)
    cost = logdet + tr
    if not math.isfinite(cost):
        raise SolverError(f"non-finite marginal-likelihood cost {cost}")
    return cost


def prune(state: HMsblState, params: HMsblParams) -> np.ndarray:
    """Deactivation mask after thresholding block powers.

    Relative mode drops gamma_i < prune_tol * max_j gamma_j; absolute mode
    compares against prune_tol directly.  Deactivation is permanent: the
    returned mask is a subset of the current one.
    """
    if not state.active.any():
        raise SolverError("no active blocks to prune")
    if params.prune_tol == 0:
        return state.active.copy()
    if params.prune_mode == "relative":
        thr = params.prune_tol * float(state.gamma[state.active].max())
    else:
        thr = params.prune_tol
    mask = state.active & (state.gamma >= thr)
    if not mask.any():
        raise SolverError("pruning removed every block (degenerate fit)")
    return mask


def compress_snapshots(y: SnapshotSet) -> SnapshotSet:
    """Rank-preserving snapshot reduction.

    Returns Ytilde with Ytilde Ytilde^H = Y Y^H and at most min(n, L)
    columns; the statistical snapshot count is carried over unchanged, so
    every downstream 1/L average is identical.  Data with no energy
    collapses to a single zero column.
    """
    n, cols = y.y.shape
    if not y.y.any():
        return SnapshotSet(y=np.zeros((n, 1), dtype=complex), nx=y.nx, ny=y.ny,
                           n_snapshots=y.n_snapshots)
    if cols <= n:
        return y
    s = y.y @ y.y.conj().T
    s = 0.5 * (s + s.conj().T)
    evals, vecs = np.linalg.eigh(s)
    keep = evals > evals[-1] * n * np.finfo(float).eps
    ytilde = vecs[:, keep] * np.sqrt(evals[keep])
    return SnapshotSet(y=ytilde, nx=y.nx, ny=y.ny, n_snapshots=y.n_snapshots)


def run(y: SnapshotSet, dictionary, params: HMsblParams, on_iteration=None):
    """Full EM loop: posterior, power and correlation updates, optional
    noise-variance re-estimation, pruning, until ``max_iters`` or the
    relative cost change falls below ``cost_tol``.

    After the correlation update the removed Frobenius scale is pushed back
    into gamma, keeping gamma_i B_i equal to the posterior moment block.
    That preserves the exact EM maximizer, so the cost trace is
    non-increasing while lambda is fixed and pruning is off, with B_i still
    unit-norm and gamma_i carrying all block power.

    ``on_iteration(iteration, state, posterior)`` is invoked after every
    completed iteration (1-based); treat its arguments as read-only and
    copy anything retained.  Returns (state, posterior, diagnostics).
    """
    op = _operator_for(dictionary, y)
    state = init_state(y, dictionary, params)
    data = compress_snapshots(y) if params.compress else y
    scm = sample_covariance(data)

    state.cost_trace.append(_cost_from_scm(op, scm, state))
    iter_seconds = []
    active_counts = []
    converged = False
    post = None

    for it in range(1, params.max_iters + 1):
        t0 = time.perf_counter()
        post = _posterior(op, data.y, state)
        moments = _moment_blocks(post, op.n_blocks, op.block_size, data.n_snapshots)
        g_raw = _gamma_from_moments(moments, state.b_mats, state.active, params.b_loading)

        dead = state.active & (g_raw <= 0)
        if dead.any():
            state.active = state.active & ~dead
            if not state.active.any():
                raise SolverError("all block powers collapsed to zero")

        b_new, scales, ok = _b_from_moments(moments, g_raw, state.active)
        state.b_mats[ok] = _hermitize(b_new[ok])
        state.gamma = np.where(ok, g_raw * scales, 0.0)

        if params.lambda_mode == "adaptive":
            state.noise_var = update_lambda(data, post, state, dictionary)

        state.cost_trace.append(_cost_from_scm(op, scm, state))
        state.active = prune(state, params)
        state.gamma = np.where(state.active, state.gamma, 0.0)

        iter_seconds.append(time.perf_counter() - t0)
        active_counts.append(int(state.active.sum()))
        if on_iteration is not None:
            on_iteration(it, state, post)

        prev, cur = state.cost_trace[-2], state.cost_trace[-1]
        if abs(cur - prev) / max(1.0, abs(prev)) < params.cost_tol:
            converged = True
            break

    if post is None:
        post = _posterior(op, data.y, state)
    diagnostics = RunDiagnostics(
        cost_trace=list(state.cost_trace),
        iter_seconds=iter_seconds,
        active_counts=active_counts,
        n_iters=len(iter_seconds),
        converged=converged,
    )
    return state, post, diagnostics
