# gamma.py
"""
Green kernels, the N x N interaction matrix, the half-line spectral
multiplier and bound-state computation.

The interaction matrix at spectral parameter z (wavenumber convention,
energy z^2) is

    Gamma(z)_jl = (alpha_j - i z / 4pi) delta_jl - G_z(y_j - y_l),

with G_z(x) = e^{iz|x|}/(4pi|x|) and a vanishing self term.  Its inverse is
meromorphic; the poles on the positive imaginary axis are in one-to-one
correspondence with the negative eigenvalues -lambda0^2, with eigenfunctions
sum_j c_j G_{i lambda0}(x - y_j) for c in the null space of Gamma(i lambda0).

The multiplier F(lambda) = lambda * Gamma(-lambda)^{-1} (lambda > 0) is
smooth, uniformly bounded, and flattens to -4pi i * I at large lambda; the
wave-operator machinery splits off that constant exactly and integrates only
the decaying remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Configuration, ConfigError, NumericalError, PoleError

FOUR_PI = 4.0 * math.pi
#: large-lambda limit of the multiplier
F_LIMIT = -4j * math.pi


def sqrt_upper(z: complex) -> complex:
    """Square root in the closed upper half-plane.

    On the positive real axis approached from above/below this realises
    sqrt(lambda + i0) = +sqrt(lambda), sqrt(lambda - i0) = -sqrt(lambda).
    """
    w = complex(np.sqrt(complex(z)))
    return -w if w.imag < 0 else w


def green_kernel(z: complex, r) -> complex | np.ndarray:
    """G_z(r) = e^{izr} / (4 pi r) for r > 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ConfigError("green_kernel requires r > 0")
    out = np.exp(1j * complex(z) * r) / (FOUR_PI * r)
    return out if out.ndim else complex(out)


@dataclass(frozen=True)
class GammaMatrix:
    """The interaction matrix at one spectral point (exactly symmetric)."""

    z: complex
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def det(self) -> complex:
        return complex(np.linalg.det(self.entries))

    def cond(self) -> float:
        return float(np.linalg.cond(self.entries))


def gamma_matrix(cfg: Configuration, z: complex) -> np.ndarray:
    """Raw entries of Gamma(z); built symmetrically (bit-equal transpose)."""
    n = cfg.n_centres
    z = complex(z)
    out = np.zeros((n, n), dtype=complex)
    diag = cfg.alphas - 1j * z / FOUR_PI
    out[np.diag_indices(n)] = diag
    if n > 1:
        d = cfg.distances()
        iu = np.triu_indices(n, k=1)
        vals = -np.exp(1j * z * d[iu]) / (FOUR_PI * d[iu])
        out[iu] = vals
        out[(iu[1], iu[0])] = vals
    return out


def gamma_build(cfg: Configuration, z: complex) -> GammaMatrix:
    return GammaMatrix(complex(z), gamma_matrix(cfg, z))


def det_scale(mat: np.ndarray) -> float:
    """Product of row norms; the natural scale for |det| pole guards."""
    return float(np.prod(np.linalg.norm(mat, axis=1)))


def pole_guard(cfg: Configuration, z: complex, rel_tol: float = 1e-10) -> np.ndarray:
    """Return Gamma(z) entries, raising PoleError when nearly singular."""
    mat = gamma_matrix(cfg, z)
    det = complex(np.linalg.det(mat))
    scale = det_scale(mat)
    if abs(det) < rel_tol * max(scale, 1e-300):
        raise PoleError(
            f"Gamma(z) nearly singular at z={z!r}: |det|={abs(det):.3e}, "
            f"scale={scale:.3e}", det=det, cond=float(np.linalg.cond(mat)))
    return mat


# ---------------------------------------------------------------------------
# spectral multiplier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralMultiplier:
    """F(lambda) sampled on a positive lambda grid, with conditioning data."""

    lambda_grid: np.ndarray   # (m,) strictly increasing, > 0
    values: np.ndarray        # (m, N, N)
    conds: np.ndarray         # (m,) condition numbers of Gamma(-lambda)

    def tail_norms(self) -> np.ndarray:
        """|| F(lambda) + 4 pi i I || (spectral norm) per node."""
        n = self.values.shape[1]
        dev = self.values - F_LIMIT * np.eye(n)[None, :, :]
        return np.linalg.norm(dev, ord=2, axis=(1, 2))

    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.values, ord=2, axis=(1, 2))))

    def tail_trend_ok(self) -> bool:
        """Deviation from the limit shrinks in trend over the last decade."""
        lam = self.lambda_grid
        tails = self.tail_norms()
        mask = lam >= lam[-1] / 10.0
        t = tails[mask]
        if t.size < 4:
            return True
        k = t.size // 2
        return float(np.mean(t[k:])) <= float(np.mean(t[:k])) * 1.05


def f_values(cfg: Configuration, lam: np.ndarray,
              cond_limit: float = 1e12):
    """F(lambda) = lambda * Gamma(-lambda)^{-1} on positive nodes.

    A singular Gamma at strictly positive real lambda cannot occur for the
    self-adjoint model; if conditioning degenerates numerically we raise
    with the condition number attached.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ConfigError("multiplier nodes must be positive")
    n = cfg.n_centres
    mats = np.zeros((lam.size, n, n), dtype=complex)
    idx = np.arange(n)
    mats[:, idx, idx] = cfg.alphas[None, :] + 1j * lam[:, None] / FOUR_PI
    if n > 1:
        d = cfg.distances()
        iu, il = np.triu_indices(n, k=1)
        vals = -np.exp(-1j * np.outer(lam, d[iu, il])) / (FOUR_PI * d[iu, il])
        mats[:, iu, il] = vals
        mats[:, il, iu] = vals
    conds = np.linalg.cond(mats)
    if np.any(~np.isfinite(conds)) or np.any(conds > cond_limit):
        i = int(np.argmax(np.where(np.isfinite(conds), conds, np.inf)))
        raise NumericalError(
            f"Gamma(-lambda) ill-conditioned at lambda={lam[i]:.6g} "
            f"(cond={conds[i]:.3e})")
    inv = np.linalg.inv(mats)
    return lam[:, None, None] * inv, conds


def f_remainder_values(cfg: Configuration, lam: np.ndarray) -> np.ndarray:
    """F(lambda) + 4 pi i I: the decaying remainder of the multiplier."""
    vals, _ = f_values(cfg, lam)
    return vals - F_LIMIT * np.eye(cfg.n_centres)[None, :, :]


def default_lambda_grid(lam_min: float, lam_max: float, n_geom: int = 200,
                        n_uniform: int = 512) -> np.ndarray:
    """Geometric nodes resolving lambda -> 0 merged with a uniform grid."""
    if not (0 < lam_min < lam_max):
        raise ConfigError("need 0 < lam_min < lam_max")
    geom = np.geomspace(lam_min, lam_max, n_geom)
    uni = np.linspace(lam_min, lam_max, n_uniform)
    return np.unique(np.concatenate([geom, uni]))


def f_multiplier(cfg: Configuration, lambda_grid) -> SpectralMultiplier:
    """Sample the multiplier on the given positive grid."""
    lam = np.atleast_1d(np.asarray(lambda_grid, dtype=float))
    if np.any(np.diff(lam) <= 0):
        raise ConfigError("lambda grid must be strictly increasing")
    vals, conds = f_values(cfg, lam)
    return SpectralMultiplier(lam, vals, conds)


def offdiag_scale(cfg: Configuration) -> float:
    """Bound on || A - G~ ||, the bounded part of Gamma(-lambda)."""
    n = cfg.n_centres
    s = float(np.max(np.abs(cfg.alphas)))
    if n > 1:
        s += (n - 1) / (FOUR_PI * cfg.min_distance())
    return s


def auto_lambda_max(cfg: Configuration, tol: float = 5e-3,
                    max_doublings: int = 40) -> float:
    """Smallest grid-friendly lambda with ||F(lambda) + 4 pi i I|| < tol.

    Starts from the first-order tail estimate (4 pi)^2 ||A - G~|| / lambda
    and verifies directly, doubling until satisfied.
    """
    lam = max((FOUR_PI ** 2) * offdiag_scale(cfg) / tol, 1.0)
    for _ in range(max_doublings):
        dev = np.linalg.norm(
            f_remainder_values(cfg, np.array([lam]))[0], ord=2)
        if dev < tol:
            return lam
        lam *= 2.0
    raise NumericalError("multiplier tail did not reach tolerance")


# ---------------------------------------------------------------------------
# bound states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundState:
    """One negative-energy state: root lambda0 of det Gamma(i lambda) = 0.

    coeffs is a (unit) null vector of Gamma(i lambda0); the eigenfunction is
    psi0 = sum_j c_j e^{-lambda0 |x-y_j|} / (4 pi |x-y_j|) and norm_sq its
    analytic L2 norm squared sum_jk conj(c_j) c_k e^{-lambda0 d_jk}/(8 pi lambda0).
    """

    lambda0: float
    energy: float
    coeffs: np.ndarray
    norm_sq: float
    null_dim: int = 1


def _gamma_imag_axis(cfg: Configuration, lam: float) -> np.ndarray:
    """Gamma(i lambda): real symmetric (diag alpha + lambda/4pi)."""
    n = cfg.n_centres
    out = np.zeros((n, n))
    out[np.diag_indices(n)] = cfg.alphas + lam / FOUR_PI
    if n > 1:
        d = cfg.distances()
        iu = np.triu_indices(n, k=1)
        vals = -np.exp(-lam * d[iu]) / (FOUR_PI * d[iu])
        out[iu] = vals
        out[(iu[1], iu[0])] = vals
    return out


def bound_state_lambda_cap(cfg: Configuration) -> float:
    """Gershgorin-type upper bound for roots of det Gamma(i lambda)."""
    extra = 0.0
    if cfg.n_centres > 1:
        extra = (cfg.n_centres - 1) / cfg.min_distance()
    return FOUR_PI * max(0.0, -float(np.min(cfg.alphas))) + extra + 1.0


def find_bound_states(cfg: Configuration, lambda_max: float | None = None,
                      tol: float = 1e-12, grid_points: int = 256,
                      null_tol: float = 1e-8) -> list[BoundState]:
    """All roots of det Gamma(i lambda) = 0 in (0, lambda_max].

    Gamma(i lambda) is real symmetric with a positive-definite lambda
    derivative (the matrix (e^{-lambda d_jk})_jk), so each sorted eigenvalue
    curve is continuous and strictly increasing: sign changes bracket every
    root exactly once and bisection converges without complex contour work.
    """
    if lambda_max is None:
        lambda_max = bound_state_lambda_cap(cfg)
    if lambda_max <= 0:
        raise ConfigError("lambda_max must be positive")
    n = cfg.n_centres

    lam_lo = min(1e-9, lambda_max * 1e-9)
    lams = np.linspace(lam_lo, lambda_max, grid_points)
    eigs = np.empty((lams.size, n))
    for i, lv in enumerate(lams):
        eigs[i] = np.linalg.eigvalsh(_gamma_imag_axis(cfg, lv))

    states: list[BoundState] = []
    for band in range(n):
        col = eigs[:, band]
        sign_changes = np.nonzero(np.diff(np.signbit(col)))[0]
        if sign_changes.size > 1:
            raise NumericalError(
                f"eigenvalue branch {band} changes sign more than once; "
                "bracketing degenerate (increase grid_points)")
        for idx in sign_changes:
            a, b = lams[idx], lams[idx + 1]
            fa = eigs[idx, band]
            for _ in range(200):
                mid = 0.5 * (a + b)
                fm = np.linalg.eigvalsh(_gamma_imag_axis(cfg, mid))[band]
                if fa * fm <= 0:
                    b = mid
                else:
                    a, fa = mid, fm
                if b - a < tol * max(1.0, mid):
                    break
            lam0 = 0.5 * (a + b)
            mat = _gamma_imag_axis(cfg, lam0)
            w, v = np.linalg.eigh(mat)
            k = int(np.argmin(np.abs(w)))
            c = v[:, k]
            if np.linalg.norm(mat @ c) > max(null_tol, 1e3 * tol) * np.linalg.norm(c):
                raise NumericalError(
                    f"null-vector residual too large at lambda0={lam0:.6g}")
            # sign convention: largest-magnitude component positive
            c = c * np.sign(c[np.argmax(np.abs(c))])
            d = cfg.distances()
            overlap = np.exp(-lam0 * d) / (8.0 * math.pi * lam0)
            norm_sq = float(np.real(c @ overlap @ c))
            null_dim = int(np.sum(np.abs(w) <= null_tol * max(np.abs(w).max(), 1.0)))
            states.append(BoundState(lambda0=float(lam0), energy=-float(lam0) ** 2,
                                     coeffs=c, norm_sq=norm_sq,
                                     null_dim=max(1, null_dim)))

    # dedupe colliding brackets (same root found on two bands)
    states.sort(key=lambda s: s.lambda0)
    unique: list[BoundState] = []
    for s in states:
        if unique and abs(s.lambda0 - unique[-1].lambda0) < 1e3 * tol * max(1.0, s.lambda0):
            continue  # same root found on two bands; null_dim already counts it
        unique.append(s)
    if len(unique) > n:
        raise NumericalError("more bound states than centres: numerical failure")
    return unique
