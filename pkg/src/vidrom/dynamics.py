"""Reduced dynamics, normal forms, polar backbone curves and advection.

The reduced vector field is a polynomial regression xi_dot ~ R phi(xi) over
monomials of orders 1..r.  Its linear part is diagonalized, R1 = W L W^-1,
and a near-identity polynomial change of coordinates takes the dynamics to a
normal form:

    z   = t_inv(xi) = W^-1 xi + H2 phi(W^-1 xi)       (to normal coordinates)
    xi  = t(z)      = W z     + T2 phi(z)             (back from them)
    z'  = n(z)      = L z     + N2 phi(z)             (normal-form field)

H2 carries only non-resonant exponents, N2 only near-resonant ones, where an
exponent tuple k is near resonant for row j when |lambda_j - k . lambda| <
resonance_tol * |lambda_j|.  (H2, N2) minimize the flow-matching residual

    sum_j || grad t_inv(xi_j) xi_dot_j - n(t_inv(xi_j)) ||^2

by damped Gauss-Newton from the identity transform; T2 follows by linear
least squares.  Complex-conjugate eigenvalue pairs are stored adjacently and
all coefficient matrices are conjugate symmetric by construction, so real
data stays real through a round trip.

For an oscillatory pair, writing z = rho exp(i theta) gives
rho' = gamma(rho) rho and theta' = omega(rho) with gamma, omega real
polynomials in rho^2 whose constant parts are Re lambda and Im lambda.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    ConditioningError,
    DivergenceError,
    ExtrapolationWarning,
    FitError,
    InputError,
    ShapeError,
)
from .manifold import ManifoldModel, parameterize
from .polynomial import MultiIndexBasis, term_count

HYPERBOLICITY_TOL = 1e-8
PHASE_SAMPLES = 256


def _pool(xi, xi_dot):
    if isinstance(xi, np.ndarray) and xi.ndim == 2:
        xi = [xi]
        xi_dot = [xi_dot]
    xs = [np.asarray(a, dtype=float) for a in xi]
    ds = [np.asarray(a, dtype=float) for a in xi_dot]
    if len(xs) != len(ds):
        raise ShapeError("need as many derivative arrays as coordinate arrays")
    for a, b in zip(xs, ds):
        if a.shape != b.shape or a.ndim != 2:
            raise ShapeError("each trajectory needs matching (samples, dim) arrays")
    return np.vstack(xs), np.vstack(ds)


@dataclass(frozen=True)
class ReducedModel:
    """Polynomial vector field xi_dot = coeffs . phi(xi), orders 1..order."""

    dim: int
    order: int
    coeffs: np.ndarray  # (dim, term_count(dim, 1, order))
    fit_rms: float = 0.0

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float).copy()
        want = (self.dim, term_count(self.dim, 1, self.order))
        if coeffs.shape != want:
            raise ShapeError(f"coeffs must be {want}, got {coeffs.shape}")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def basis(self) -> MultiIndexBasis:
        return MultiIndexBasis(self.dim, 1, self.order)

    @property
    def linear_part(self) -> np.ndarray:
        return np.asarray(self.coeffs[:, : self.dim])


def reduced_rhs(model: ReducedModel, xi: np.ndarray) -> np.ndarray:
    """Evaluate the reduced vector field at one point or a batch of points."""
    feats = model.basis.evaluate(xi)
    return feats @ model.coeffs.T


def fit_reduced_dynamics(xi, xi_dot, order: int, check_hyperbolic=True) -> ReducedModel:
    """Least-squares polynomial fit of the reduced vector field.

    Raises ConditioningError naming the offending monomials when the feature
    matrix is numerically rank deficient, and FitError when the fitted linear
    part is not hyperbolic (an eigenvalue with |Re| below 1e-8).
    """
    x, xd = _pool(xi, xi_dot)
    dim = x.shape[1]
    if order < 1:
        raise InputError("order must be >= 1")
    basis = MultiIndexBasis(dim, 1, order)
    feats = basis.evaluate(x)
    if x.shape[0] < len(basis):
        raise InputError(
            f"{x.shape[0]} samples cannot determine {len(basis)} coefficients"
        )
    sol, _, rank, svals = np.linalg.lstsq(feats, xd, rcond=None)
    if rank < len(basis):
        _, _, vt = np.linalg.svd(feats, full_matrices=False)
        null = vt[rank:]
        bad = np.unique(np.nonzero(np.abs(null) > 0.5 * np.abs(null).max())[1])
        names = [tuple(int(e) for e in basis.exponents[i]) for i in bad]
        raise ConditioningError(
            f"feature matrix is rank deficient (rank {rank} of {len(basis)}); "
            f"data does not excite monomials {names}"
        )
    coeffs = sol.T
    resid = feats @ sol - xd
    rms = float(np.sqrt(np.mean(resid * resid)))
    model = ReducedModel(dim, order, coeffs, rms)
    if check_hyperbolic:
        eigvals = np.linalg.eigvals(model.linear_part)
        if np.abs(eigvals.real).min() < HYPERBOLICITY_TOL:
            raise FitError(
                f"linear part is not hyperbolic: eigenvalues {eigvals}"
            )
    return model


def _split_spectrum(linear: np.ndarray, tol: float = 1e-9):
    """Eigen-decompose a real matrix into conjugate pairs and real modes.

    Returns (eigvals, eigvecs) with each oscillatory pair adjacent as
    [lambda, conj(lambda)] (positive imaginary part first, pairs sorted by
    frequency) followed by real eigenvalues in descending order.  Every
    eigenvector has unit norm and a real, positive first nonzero component.
    """
    vals, vecs = np.linalg.eig(linear)
    scale = max(np.abs(vals).max(), 1.0)
    pair_idx = [i for i in range(len(vals)) if vals[i].imag > tol * scale]
    real_idx = [i for i in range(len(vals)) if abs(vals[i].imag) <= tol * scale]
    if 2 * len(pair_idx) + len(real_idx) != len(vals):
        raise FitError(f"could not pair the spectrum {vals}")
    pair_idx.sort(key=lambda i: (vals[i].imag, vals[i].real))
    real_idx.sort(key=lambda i: -vals[i].real)

    def normalize(v):
        v = v / np.linalg.norm(v)
        k = int(np.argmax(np.abs(v) > 1e-12))
        phase = v[k] / abs(v[k])
        return v / phase

    out_vals = []
    out_vecs = []
    for i in pair_idx:
        v = normalize(vecs[:, i])
        out_vals.extend([vals[i], np.conj(vals[i])])
        out_vecs.extend([v, np.conj(v)])
    for i in real_idx:
        v = vecs[:, i].real
        v = v / np.linalg.norm(v)
        k = int(np.argmax(np.abs(v) > 1e-12))
        if v[k] < 0:
            v = -v
        out_vals.append(vals[i].real + 0.0j)
        out_vecs.append(v.astype(complex))
    return np.array(out_vals), np.column_stack(out_vecs), len(pair_idx)


@dataclass(frozen=True)
class NormalFormModel:
    """Normal-form change of coordinates and dynamics for a reduced model.

    ``eigvals``/``eigvecs`` hold L and W with conjugate pairs adjacent;
    ``num_pairs`` counts oscillatory pairs (coordinates 2j, 2j+1 belong to
    pair j).  ``inverse_coeffs``, ``dynamics_coeffs`` and ``forward_coeffs``
    are the nonlinear blocks H2, N2, T2 over monomials of orders
    2..order; the linear blocks are W^-1, diag(L) and W respectively.
    ``trained_amplitude`` records max |z| per coordinate on the training data.
    """

    eigvals: np.ndarray
    eigvecs: np.ndarray
    num_pairs: int
    order: int
    inverse_coeffs: np.ndarray
    dynamics_coeffs: np.ndarray
    forward_coeffs: np.ndarray
    resonant_mask: np.ndarray
    resonance_tol: float
    trained_amplitude: tuple = None
    roundtrip_error: float = 0.0

    def __post_init__(self):
        d = len(np.asarray(self.eigvals))
        t2 = term_count(d, 2, self.order) if self.order > 1 else 0
        for name in ("inverse_coeffs", "dynamics_coeffs", "forward_coeffs"):
            arr = np.asarray(getattr(self, name), dtype=complex).copy()
            if arr.shape != (d, t2):
                raise ShapeError(f"{name} must be ({d}, {t2}), got {arr.shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        for name in ("eigvals", "eigvecs"):
            arr = np.asarray(getattr(self, name), dtype=complex).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        mask = np.asarray(self.resonant_mask, dtype=bool).copy()
        if mask.shape != (d, t2):
            raise ShapeError(f"resonant_mask must be ({d}, {t2})")
        mask.flags.writeable = False
        object.__setattr__(self, "resonant_mask", mask)
        if self.trained_amplitude is not None:
            object.__setattr__(
                self,
                "trained_amplitude",
                tuple(float(a) for a in self.trained_amplitude),
            )

    @property
    def dim(self):
        return len(self.eigvals)

    @property
    def basis2(self) -> MultiIndexBasis:
        return MultiIndexBasis(self.dim, 2, self.order)

    @property
    def inverse_eigvecs(self) -> np.ndarray:
        return np.linalg.inv(self.eigvecs)

    def to_normal(self, xi: np.ndarray) -> np.ndarray:
        """Map reduced coordinates to normal coordinates, z = t_inv(xi)."""
        xi = np.atleast_2d(np.asarray(xi))
        zeta = xi @ self.inverse_eigvecs.T
        if self.order > 1:
            zeta = zeta + self.basis2.evaluate(zeta) @ self.inverse_coeffs.T
        return zeta[0] if np.asarray(xi).ndim == 1 else zeta

    def from_normal(self, z: np.ndarray) -> np.ndarray:
        """Map normal coordinates back to reduced coordinates, xi = t(z)."""
        z = np.asarray(z, dtype=complex)
        single = z.ndim == 1
        zz = np.atleast_2d(z)
        xi = zz @ self.eigvecs.T
        if self.order > 1:
            xi = xi + self.basis2.evaluate(zz) @ self.forward_coeffs.T
        xi = xi.real
        return xi[0] if single else xi

    def field(self, z: np.ndarray) -> np.ndarray:
        """Normal-form vector field n(z)."""
        z = np.asarray(z, dtype=complex)
        single = z.ndim == 1
        zz = np.atleast_2d(z)
        out = zz * self.eigvals[None, :]
        if self.order > 1:
            out = out + self.basis2.evaluate(zz) @ self.dynamics_coeffs.T
        return out[0] if single else out


def resonant_exponents(
    eigvals: np.ndarray, basis2: MultiIndexBasis, resonance_tol: float
) -> np.ndarray:
    """Near-resonance mask: |lambda_j - k . lambda| < tol |lambda_j|."""
    lam = np.asarray(eigvals, dtype=complex)
    combos = basis2.exponents @ lam  # k . lambda per monomial
    gap = np.abs(lam[:, None] - combos[None, :])
    return gap < resonance_tol * np.abs(lam)[:, None]


def _conj_permutation(basis2: MultiIndexBasis, num_pairs: int) -> np.ndarray:
    """Column permutation matching z -> conj(z): swap exponents within pairs."""
    exps = basis2.exponents
    lookup = {tuple(row): i for i, row in enumerate(exps)}
    perm = np.empty(len(basis2), dtype=int)
    for i, row in enumerate(exps):
        swapped = list(row)
        for j in range(num_pairs):
            swapped[2 * j], swapped[2 * j + 1] = swapped[2 * j + 1], swapped[2 * j]
        perm[i] = lookup[tuple(swapped)]
    return perm


def _fit_forward_map(xi, z, eigvecs, basis2, num_pairs, perm):
    """Least-squares T2 with conjugate symmetry built into the parameters."""
    target = xi - (z @ eigvecs.T).real
    phi = basis2.evaluate(z)
    t2 = phi.shape[1]
    if num_pairs == 0:
        sol, *_ = np.linalg.lstsq(phi.real, target, rcond=None)
        return sol.T.astype(complex)
    cols = []
    layout = []  # (kind, i) with kind 'self' or 'pair'
    for i in range(t2):
        j = perm[i]
        if j == i:
            cols.append(phi[:, i].real)
            layout.append(("self", i))
        elif i < j:
            cols.append(2.0 * phi[:, i].real)
            cols.append(-2.0 * phi[:, i].imag)
            layout.append(("pair", i))
    design = np.column_stack(cols)
    sol, *_ = np.linalg.lstsq(design, target, rcond=None)
    coeffs = np.zeros((target.shape[1], t2), dtype=complex)
    pos = 0
    for kind, i in layout:
        if kind == "self":
            coeffs[:, i] = sol[pos]
            pos += 1
        else:
            c = sol[pos] + 1j * sol[pos + 1]
            coeffs[:, i] = c
            coeffs[:, perm[i]] = np.conj(c)
            pos += 2
    return coeffs


def normal_form(
    reduced: ReducedModel,
    xi,
    xi_dot,
    order: int = None,
    resonance_tol: float = 0.1,
    roundtrip_tol: float = 1e-6,
    max_nfev: int = None,
) -> NormalFormModel:
    """Fit the normal-form transform and dynamics on reduced-coordinate data.

    ``order`` defaults to the reduced model order.  The spectrum must be
    either purely oscillatory (conjugate pairs) or purely real.  Raises
    FitError when the optimizer stalls or the forward/inverse round trip
    misses identity by more than ``roundtrip_tol`` (relative, on the data).
    """
    x, xd = _pool(xi, xi_dot)
    d = reduced.dim
    if x.shape[1] != d:
        raise ShapeError(f"data dimension {x.shape[1]} != model dimension {d}")
    if order is None:
        order = reduced.order
    if order < 1:
        raise InputError("order must be >= 1")
    lam, w, num_pairs = _split_spectrum(reduced.linear_part)
    if num_pairs and 2 * num_pairs != d:
        raise InputError(
            "mixed oscillatory and real spectra are not supported; "
            f"eigenvalues {lam}"
        )
    w_inv = np.linalg.inv(w)
    zeta = x @ w_inv.T
    zeta_dot = xd @ w_inv.T
    real_system = num_pairs == 0
    if real_system:
        zeta = zeta.real
        zeta_dot = zeta_dot.real

    if order == 1:
        t2 = 0
        empty = np.zeros((d, 0), dtype=complex)
        mask = np.zeros((d, 0), dtype=bool)
        z = zeta.astype(complex)
        amp = tuple(np.abs(z).max(axis=0))
        return NormalFormModel(
            lam, w, num_pairs, order, empty, empty, empty, mask, resonance_tol,
            amp, 0.0,
        )

    basis2 = MultiIndexBasis(d, 2, order)
    t2 = len(basis2)
    mask = resonant_exponents(lam, basis2, resonance_tol)
    perm = _conj_permutation(basis2, num_pairs)
    phi = basis2.evaluate(zeta)
    phi_dot = basis2.directional_derivative(zeta, zeta_dot)

    # one representative row per conjugate pair, every row of a real system
    solved_rows = (
        [2 * j for j in range(num_pairs)] if not real_system else list(range(d))
    )
    entries = []  # (matrix, row, col)
    for row in solved_rows:
        for col in range(t2):
            if not mask[row, col]:
                entries.append(("H", row, col))
    for row in solved_rows:
        for col in range(t2):
            if mask[row, col]:
                entries.append(("N", row, col))
    reals_per_entry = 1 if real_system else 2

    def assemble(params):
        dtype = float if real_system else complex
        h2 = np.zeros((d, t2), dtype=dtype)
        n2 = np.zeros((d, t2), dtype=dtype)
        pos = 0
        for which, row, col in entries:
            if real_system:
                c = params[pos]
                pos += 1
            else:
                c = params[pos] + 1j * params[pos + 1]
                pos += 2
            (h2 if which == "H" else n2)[row, col] = c
        if not real_system:
            for j in range(num_pairs):
                h2[2 * j + 1] = np.conj(h2[2 * j, perm])
                n2[2 * j + 1] = np.conj(n2[2 * j, perm])
        return h2, n2

    def residual(params):
        h2, n2 = assemble(params)
        z = zeta + phi @ h2.T
        lhs = zeta_dot + phi_dot @ h2.T
        rhs = z * lam[None, :] + basis2.evaluate(z) @ n2.T
        res = (lhs - rhs)[:, solved_rows]
        if real_system:
            return res.real.ravel()
        return np.concatenate([res.real.ravel(), res.imag.ravel()])

    # identity initial transform; dynamics coefficients from a linear solve
    x0 = np.zeros(len(entries) * reals_per_entry)
    res0 = zeta_dot - zeta * lam[None, :]
    n_start = sum(1 for e in entries if e[0] == "H") * reals_per_entry
    for row in solved_rows:
        cols = np.nonzero(mask[row])[0]
        if cols.size:
            sol, *_ = np.linalg.lstsq(phi[:, cols], res0[:, row], rcond=None)
            for c_idx, col in enumerate(cols):
                # position of this (row, col) among the N entries
                offset = 0
                for which, r, c in entries:
                    if which == "N" and r == row and c == col:
                        break
                    if which == "N":
                        offset += 1
                base = n_start + offset * reals_per_entry
                if real_system:
                    x0[base] = sol[c_idx].real
                else:
                    x0[base] = sol[c_idx].real
                    x0[base + 1] = sol[c_idx].imag

    if entries:
        result = least_squares(
            residual,
            x0,
            method="lm",
            max_nfev=max_nfev or 400 * (x0.size + 1),
        )
        if result.status <= 0:
            raise FitError(
                f"normal-form optimisation did not converge "
                f"(status {result.status}, residual {result.cost:.4g})"
            )
        params = result.x
    else:
        params = x0
    h2, n2 = assemble(params)
    h2 = h2.astype(complex)
    n2 = n2.astype(complex)
    z = (zeta + phi @ h2.T).astype(complex)
    t2_coeffs = _fit_forward_map(x, z, w, basis2, num_pairs, perm)
    model = NormalFormModel(
        lam, w, num_pairs, order, h2, n2, t2_coeffs, mask, resonance_tol,
        tuple(np.abs(z).max(axis=0)), 0.0,
    )
    recon = model.from_normal(z)
    denom = np.linalg.norm(x)
    rt = float(np.linalg.norm(recon - x) / denom) if denom > 0 else 0.0
    model = NormalFormModel(
        lam, w, num_pairs, order, h2, n2, t2_coeffs, mask, resonance_tol,
        model.trained_amplitude, rt,
    )
    if rt > roundtrip_tol:
        raise FitError(
            f"normal-form round trip misses identity by {rt:.3g} "
            f"(tolerance {roundtrip_tol:.3g})"
        )
    return model


def normal_form_from_polar(gamma_coeffs, omega_coeffs) -> NormalFormModel:
    """Build a 2-d oscillatory normal form from polar polynomial coefficients.

    ``gamma_coeffs`` and ``omega_coeffs`` list the coefficients of rho^(2p),
    p = 0, 1, ..., of the radial decay rate and the instantaneous frequency.
    The reduced coordinates are the standard realification (identity manifold).
    """
    g = [float(c) for c in gamma_coeffs]
    om = [float(c) for c in omega_coeffs]
    p_max = max(len(g), len(om)) - 1
    g += [0.0] * (p_max + 1 - len(g))
    om += [0.0] * (p_max + 1 - len(om))
    lam0 = g[0] + 1j * om[0]
    lam = np.array([lam0, np.conj(lam0)])
    v = np.array([1.0, -1.0j]) / np.sqrt(2.0)
    w = np.column_stack([v, np.conj(v)])
    order = max(2 * p_max + 1, 1)
    if order == 1:
        empty = np.zeros((2, 0), dtype=complex)
        return NormalFormModel(
            lam, w, 1, 1, empty, empty, empty, np.zeros((2, 0), bool), 0.1
        )
    basis2 = MultiIndexBasis(2, 2, order)
    t2 = len(basis2)
    n2 = np.zeros((2, t2), dtype=complex)
    mask = np.zeros((2, t2), dtype=bool)
    for p in range(1, p_max + 1):
        c = g[p] + 1j * om[p]
        i = basis2.index_of((p + 1, p))
        j = basis2.index_of((p, p + 1))
        n2[0, i] = c
        n2[1, j] = np.conj(c)
        mask[0, i] = True
        mask[1, j] = True
    zeros = np.zeros((2, t2), dtype=complex)
    return NormalFormModel(lam, w, 1, order, zeros, n2, zeros, mask, 0.1)


@dataclass(frozen=True)
class PolarModel:
    """Per-pair polar dynamics: gamma and omega as polynomials in rho^2."""

    decay: tuple  # per pair: tuple of coefficients of rho^(2p), p = 0, 1, ...
    frequency: tuple

    def __post_init__(self):
        decay = tuple(tuple(float(c) for c in row) for row in self.decay)
        freq = tuple(tuple(float(c) for c in row) for row in self.frequency)
        if len(decay) != len(freq):
            raise ShapeError("decay and frequency need one row per pair")
        object.__setattr__(self, "decay", decay)
        object.__setattr__(self, "frequency", freq)

    @property
    def num_pairs(self):
        return len(self.decay)


def _poly_in_rho2(coeffs, rho):
    rho2 = np.asarray(rho, dtype=float) ** 2
    out = np.zeros_like(rho2)
    for p, c in enumerate(coeffs):
        out = out + c * rho2**p
    return out


def polar_decay(pm: PolarModel, rho, pair: int = 0):
    """gamma(rho): instantaneous decay rate of pair ``pair``."""
    return _poly_in_rho2(pm.decay[pair], rho)


def polar_frequency(pm: PolarModel, rho, pair: int = 0):
    """omega(rho): instantaneous frequency of pair ``pair``."""
    return _poly_in_rho2(pm.frequency[pair], rho)


def to_polar(nf: NormalFormModel) -> PolarModel:
    """Extract per-pair polar polynomials from a normal form.

    Requires an oscillatory spectrum whose resonant terms couple each pair
    only to its own amplitude; anything else is an internal resonance.
    """
    if nf.num_pairs == 0:
        raise InputError("polar dynamics need at least one oscillatory pair")
    exps = nf.basis2.exponents if nf.order > 1 else np.zeros((0, nf.dim), int)
    decay = []
    freq = []
    for j in range(nf.num_pairs):
        row = 2 * j
        lam = nf.eigvals[row]
        g = {0: lam.real}
        om = {0: lam.imag}
        cols = np.nonzero(np.abs(nf.dynamics_coeffs[row]) > 0)[0]
        for col in cols:
            k = exps[col]
            p = int(k[row + 1])
            phase_only = (
                k[row] == p + 1
                and k[row + 1] == p
                and all(k[i] == 0 for i in range(nf.dim) if i not in (row, row + 1))
            )
            if not phase_only:
                raise FitError(
                    f"internal resonance: pair {j} couples through exponent "
                    f"{tuple(int(e) for e in k)}; multi-frequency backbones "
                    "are not supported"
                )
            c = nf.dynamics_coeffs[row, col]
            g[p] = c.real
            om[p] = c.imag
        p_max = max(g)
        decay.append(tuple(g.get(p, 0.0) for p in range(p_max + 1)))
        p_max_f = max(om)
        freq.append(tuple(om.get(p, 0.0) for p in range(p_max_f + 1)))
    return PolarModel(tuple(decay), tuple(freq))


def amplitude_map(
    mm: ManifoldModel,
    nf: NormalFormModel,
    selector,
    rho: float,
    pair: int = 0,
    phase_samples: int = PHASE_SAMPLES,
) -> float:
    """Peak observable amplitude over one oscillation at radius ``rho``.

    ``selector`` picks the observable: an integer indexes a component of the
    observable vector, an array is applied as a linear functional.
    """
    thetas = 2.0 * np.pi * np.arange(phase_samples) / phase_samples
    zp = rho * np.exp(1j * thetas)
    z = np.zeros((phase_samples, nf.dim), dtype=complex)
    z[:, 2 * pair] = zp
    z[:, 2 * pair + 1] = np.conj(zp)
    xi = nf.from_normal(z)
    y = parameterize(mm, xi)
    if np.isscalar(selector) or isinstance(selector, (int, np.integer)):
        vals = y[:, int(selector)]
    else:
        vals = y @ np.asarray(selector, dtype=float)
    return float(np.abs(vals).max())


@dataclass(frozen=True)
class BackboneCurve:
    """Sampled backbone: radius, decay rate, frequency, observable amplitude."""

    rho: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    amplitude: np.ndarray
    extrapolated: bool = False

    def __post_init__(self):
        for name in ("rho", "gamma", "omega", "amplitude"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def backbone_curves(
    pm: PolarModel,
    amplitude_fn,
    rho_max: float,
    samples: int,
    pair: int = 0,
    trained_max: float = None,
) -> BackboneCurve:
    """Tabulate gamma, omega and amplitude on a radius grid [0, rho_max]."""
    if rho_max < 0:
        raise InputError("rho_max must be >= 0")
    if samples < 1:
        raise InputError("samples must be >= 1")
    rho = np.linspace(0.0, rho_max, samples) if samples > 1 else np.array([rho_max])
    gamma = polar_decay(pm, rho, pair)
    omega = polar_frequency(pm, rho, pair)
    amp = np.array([amplitude_fn(r) for r in rho])
    extrapolated = bool(trained_max is not None and rho_max > trained_max)
    if extrapolated:
        warnings.warn(
            f"backbone sampled to rho = {rho_max:.4g}, beyond the trained "
            f"amplitude {trained_max:.4g}",
            ExtrapolationWarning,
            stacklevel=2,
        )
    return BackboneCurve(rho, gamma, omega, amp, extrapolated)


@dataclass(frozen=True)
class AdvectResult:
    """Integrated trajectory; ``transformed`` holds xi(t) for normal forms."""

    times: np.ndarray
    states: np.ndarray
    transformed: np.ndarray = None


def advect(
    model,
    initial,
    duration: float,
    dt: float,
    substeps: int = 1,
    bound: float = 1e6,
) -> AdvectResult:
    """Integrate a ReducedModel or NormalFormModel with fixed-step RK4.

    Output samples land on the ``dt`` grid; ``substeps`` (a power of two)
    refines the internal step.  Raises DivergenceError with the time at which
    the state left ``bound``.
    """
    if dt <= 0:
        raise InputError("dt must be positive")
    if substeps < 1 or (substeps & (substeps - 1)) != 0:
        raise InputError("substeps must be a power of two")
    steps = int(round(duration / dt))
    if steps < 0:
        raise InputError("duration must be >= 0")
    if isinstance(model, NormalFormModel):
        rhs = model.field
        state = np.asarray(initial, dtype=complex)
    elif isinstance(model, ReducedModel):
        rhs = lambda s: reduced_rhs(model, s)
        state = np.asarray(initial, dtype=float)
    else:
        raise InputError(f"cannot advect a {type(model).__name__}")
    h = dt / substeps
    out = np.empty((steps + 1, state.size), dtype=state.dtype)
    out[0] = state
    for i in range(steps):
        for k in range(substeps):
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * h * k1)
            k3 = rhs(state + 0.5 * h * k2)
            k4 = rhs(state + h * k3)
            state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(state)) or np.abs(state).max() > bound:
                raise DivergenceError(i * dt + (k + 1) * h)
        out[i + 1] = state
    times = np.arange(steps + 1) * dt
    transformed = None
    if isinstance(model, NormalFormModel):
        transformed = model.from_normal(out)
    return AdvectResult(times, out, transformed)


@dataclass(frozen=True)
class Prediction:
    """Reconstructed observable trajectory with an extrapolation flag."""

    times: np.ndarray
    observables: np.ndarray
    extrapolated: bool = False


def predict_observable(
    mm: ManifoldModel,
    nf: NormalFormModel,
    y0: np.ndarray,
    duration: float,
    dt: float,
    substeps: int = 1,
) -> Prediction:
    """Advect an initial observable vector and lift the result back.

    ``y0`` is one embedded observable vector (already centered).  When its
    normal-coordinate amplitude exceeds the trained range an
    ExtrapolationWarning is emitted and flagged on the result.
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (mm.ambient_dim,):
        raise ShapeError(f"y0 must have shape ({mm.ambient_dim},)")
    xi0 = y0 @ mm.tangent_basis
    z0 = nf.to_normal(xi0)
    extrapolated = False
    if nf.trained_amplitude is not None:
        limit = np.asarray(nf.trained_amplitude)
        if np.any(np.abs(z0) > limit * (1 + 1e-9)):
            extrapolated = True
            warnings.warn(
                f"initial amplitude {np.abs(z0).max():.4g} exceeds the trained "
                f"range {limit.max():.4g}",
                ExtrapolationWarning,
                stacklevel=2,
            )
    result = advect(nf, z0, duration, dt, substeps)
    y = parameterize(mm, result.transformed)
    return Prediction(result.times, y, extrapolated)
