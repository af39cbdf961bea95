"""Polynomial graph manifolds over an orthonormal tangent basis.

A manifold model writes observable vectors as

    y ~ v(xi) = V xi + M2 phi(xi),      xi = V^T y,

where V is an orthonormal basis of the tangent space at the origin (n x d),
phi collects monomials of xi of orders 2..m and the nonlinear coefficients
satisfy V^T M2 = 0, so the reduced coordinate of a reconstructed point is the
coordinate it was reconstructed from.  The fit minimizes the total squared
reconstruction error by alternating an exact constrained least-squares update
of M2 with a line-searched gradient step on V, orthonormalized by QR.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddedSeries
from .errors import DegenerateDataError, FitError, InputError, ShapeError
from .metrics import ermse
from .polynomial import MultiIndexBasis, term_count

MIN_SAMPLES_PER_TERM = 10


@dataclass(frozen=True)
class ManifoldModel:
    """Fitted graph manifold: tangent basis, full coefficient matrix, order."""

    tangent_basis: np.ndarray  # (n, d), orthonormal columns
    coeffs: np.ndarray  # (n, terms of orders 1..order); first d columns = V
    order: int
    training_ermse: float = 0.0
    cost_history: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.tangent_basis, dtype=float).copy()
        m = np.asarray(self.coeffs, dtype=float).copy()
        if v.ndim != 2:
            raise ShapeError("tangent_basis must be a matrix")
        n, d = v.shape
        if self.order < 1:
            raise InputError("order must be >= 1")
        if m.shape != (n, term_count(d, 1, self.order)):
            raise ShapeError(
                f"coeffs must be (n, {term_count(d, 1, self.order)}), got {m.shape}"
            )
        if np.linalg.norm(v.T @ v - np.eye(d)) > 1e-8:
            raise InputError("tangent_basis must have orthonormal columns")
        if not np.allclose(m[:, :d], v, atol=1e-10):
            raise InputError("linear block of coeffs must equal tangent_basis")
        v.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "tangent_basis", v)
        object.__setattr__(self, "coeffs", m)
        object.__setattr__(self, "cost_history", tuple(self.cost_history))

    @property
    def ambient_dim(self):
        return self.tangent_basis.shape[0]

    @property
    def manifold_dim(self):
        return self.tangent_basis.shape[1]

    @property
    def basis(self) -> MultiIndexBasis:
        return MultiIndexBasis(self.manifold_dim, 1, self.order)


def project(tangent_basis: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Reduced coordinates xi = V^T y (rows of y are samples)."""
    v = np.asarray(tangent_basis, dtype=float)
    y = np.asarray(y, dtype=float)
    return y @ v


def parameterize(model: ManifoldModel, xi: np.ndarray) -> np.ndarray:
    """Lift reduced coordinates back to observable space, y = M phi(xi)."""
    xi = np.asarray(xi, dtype=float)
    feats = model.basis.evaluate(xi)
    return feats @ model.coeffs.T


def _stack_samples(data) -> np.ndarray:
    if isinstance(data, EmbeddedSeries):
        data = [data]
    if isinstance(data, np.ndarray):
        data = [data]
    blocks = []
    for item in data:
        arr = item.vectors if isinstance(item, EmbeddedSeries) else np.asarray(item, float)
        if arr.ndim != 2:
            raise ShapeError("each trajectory must be (samples, dim)")
        blocks.append(arr)
    dims = {b.shape[1] for b in blocks}
    if len(dims) != 1:
        raise ShapeError(f"trajectories disagree on dimension: {sorted(dims)}")
    return np.vstack(blocks)


def _fix_signs(v: np.ndarray) -> np.ndarray:
    # deterministic column signs: largest-magnitude entry positive
    out = v.copy()
    for j in range(out.shape[1]):
        k = np.argmax(np.abs(out[:, j]))
        if out[k, j] < 0:
            out[:, j] = -out[:, j]
    return out


def fit_manifold(
    data,
    dim: int,
    order: int,
    max_iter: int = 500,
    tol: float = 1e-9,
    error_bound: float = 0.03,
) -> ManifoldModel:
    """Fit a graph manifold of dimension ``dim`` and polynomial order ``order``.

    ``data`` is one or more trajectories (EmbeddedSeries or (samples, n)
    arrays); samples are pooled with equal weight.  The tangent basis starts
    from the leading left singular vectors of the snapshot matrix.  Raises
    DegenerateDataError when the snapshots do not span ``dim`` directions,
    InputError when there are fewer than 10 samples per coefficient, and
    FitError when the training ERMSE ends up above ``error_bound`` (pass
    ``error_bound=None`` to skip that check).
    """
    y = _stack_samples(data)  # (N, n)
    n = y.shape[1]
    n_samples = y.shape[0]
    if not 1 <= dim <= n:
        raise InputError(f"dim must be in [1, {n}]")
    if order < 1:
        raise InputError("order must be >= 1")
    n_terms = term_count(dim, 1, order)
    if n_samples < MIN_SAMPLES_PER_TERM * n_terms:
        raise InputError(
            f"{n_samples} samples is too few for {n_terms} coefficients "
            f"(need {MIN_SAMPLES_PER_TERM} per coefficient)"
        )
    yt = y.T  # (n, N)
    u, s, _ = np.linalg.svd(yt, full_matrices=False)
    if s[0] == 0 or s[dim - 1] / s[0] < 1e-12:
        raise DegenerateDataError(
            f"snapshot matrix has numerical rank below {dim} "
            f"(singular values {s[: dim + 1]})"
        )
    v = _fix_signs(u[:, :dim])

    basis2 = MultiIndexBasis(dim, 2, order) if order > 1 else None

    def solve_coeffs(v_cur):
        xi = v_cur.T @ yt  # (d, N)
        resid_lin = yt - v_cur @ xi
        if basis2 is None:
            m2 = np.zeros((n, 0))
            feats2 = np.zeros((0, n_samples))
        else:
            feats2 = basis2.evaluate(xi.T).T  # (terms2, N)
            sol, *_ = np.linalg.lstsq(feats2.T, resid_lin.T, rcond=None)
            m2 = sol.T
            m2 -= v_cur @ (v_cur.T @ m2)  # keep V^T M2 = 0
        resid = resid_lin - m2 @ feats2
        return m2, feats2, xi, resid, float(np.sum(resid * resid))

    m2, feats2, xi, resid, cost = solve_coeffs(v)
    history = [cost]
    step = None
    for _ in range(max_iter):
        if cost == 0.0:
            break
        # euclidean gradient of the cost in V, holding M2 fixed
        grad = -2.0 * (resid @ xi.T)
        chain = v.T @ resid  # (d, N)
        if basis2 is not None:
            weights = (m2.T @ resid).T  # (N, terms2)
            chain = chain + basis2.gradient_weighted(xi.T, weights).T
        grad += -2.0 * (yt @ chain.T)
        gnorm = np.linalg.norm(grad)
        if gnorm == 0.0:
            break
        if step is None:
            step = 0.01 * np.sqrt(dim) / gnorm
        improved = False
        for _ in range(40):
            q, r = np.linalg.qr(v - step * grad)
            q = q * np.sign(np.diag(r))
            m2_t, feats2_t, xi_t, resid_t, cost_t = solve_coeffs(q)
            if cost_t < cost:
                v, m2, feats2, xi, resid, cost = q, m2_t, feats2_t, xi_t, resid_t, cost_t
                improved = True
                step *= 1.5
                break
            step *= 0.5
        history.append(cost)
        if not improved:
            break
        if len(history) > 1:
            prev = history[-2]
            if abs(prev - cost) <= tol * max(prev, 1e-300):
                break

    coeffs = np.hstack([v, m2])
    full_feats = MultiIndexBasis(dim, 1, order).evaluate((v.T @ yt).T)
    recon = full_feats @ coeffs.T
    err = ermse(y, recon)
    if error_bound is not None and err > error_bound:
        raise FitError(
            f"manifold fit ERMSE {err:.4g} exceeds the error bound {error_bound:.4g}; "
            "consider raising the order or the manifold dimension"
        )
    return ManifoldModel(v, coeffs, order, err, tuple(history))
