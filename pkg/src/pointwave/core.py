# core.py
"""
Shared domain types for the multi-centre point-interaction Hamiltonian.

The model lives on L²(R³) in dimensionless units (hbar = 1, 2m = 1): a free
Laplacian perturbed at N distinct centres y_1..y_N with real coupling
strengths a_1..a_N.  An infinitely strong coupling means "no interaction at
that centre" and is represented by simply omitting the centre.

This module holds:

- ``Configuration``: the centre set and strength vector,
- ``RadialGrid`` / ``RadialProfile``: staggered half-line grids and sampled
  complex radial functions with even/odd extension semantics,
- ``ScalarField`` implementations (Gaussians, generic callables, sampled
  radial fields, band-limited radial fields) carrying decay tags that drive
  quadrature truncation radii,
- ``CentredField``: a free part plus radial profiles anchored at centres,
  the natural output shape of wave operators and resolvent differences.

The staggered grid r_i = (i + 1/2) h deliberately excludes r = 0: every
anchored profile may carry a 1/r factor, and values at the origin are only
defined as limits (quadratic extrapolation from the innermost nodes).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline


class ConfigError(ValueError):
    """Invalid configuration document or constructor arguments."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (conditioning, bracketing, resolution)."""


class PoleError(NumericalError):
    """Spectral parameter too close to a pole of the interaction matrix."""

    def __init__(self, message, det=None, cond=None):
        super().__init__(message)
        self.det = det
        self.cond = cond


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Configuration:
    """Centre positions y_1..y_N and strengths a_1..a_N.

    Invariants: N >= 1, centres pairwise distinct, strengths finite reals.
    """

    centres: np.ndarray  # (N, 3) float
    alphas: np.ndarray   # (N,) float

    def __post_init__(self):
        centres = np.atleast_2d(np.asarray(self.centres, dtype=float))
        alphas = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        if centres.ndim != 2 or centres.shape[1] != 3:
            raise ConfigError("centres must be an (N, 3) array")
        if alphas.shape != (centres.shape[0],):
            raise ConfigError("alphas length must match number of centres")
        if centres.shape[0] < 1:
            raise ConfigError("at least one centre required")
        if not np.all(np.isfinite(centres)):
            raise ConfigError("non-finite centre coordinates")
        if not np.all(np.isfinite(alphas)):
            raise ConfigError("non-finite alpha (represent an infinite "
                              "strength by omitting the centre)")
        if centres.shape[0] > 1:
            d = np.linalg.norm(centres[:, None, :] - centres[None, :, :], axis=-1)
            np.fill_diagonal(d, np.inf)
            if d.min() <= 0.0:
                raise ConfigError("duplicate centres")
        centres.setflags(write=False)
        alphas.setflags(write=False)
        object.__setattr__(self, "centres", centres)
        object.__setattr__(self, "alphas", alphas)

    @property
    def n_centres(self) -> int:
        return self.centres.shape[0]

    def distances(self) -> np.ndarray:
        """Pairwise distance matrix d_jk (zeros on the diagonal)."""
        return np.linalg.norm(
            self.centres[:, None, :] - self.centres[None, :, :], axis=-1)

    def min_distance(self) -> float:
        if self.n_centres == 1:
            return math.inf
        d = self.distances()
        return d[~np.eye(self.n_centres, dtype=bool)].min()

    def shifted(self, offset) -> "Configuration":
        return Configuration(self.centres + np.asarray(offset, dtype=float),
                             self.alphas.copy())

    def to_dict(self) -> dict:
        return {"centres": self.centres.tolist(), "alphas": self.alphas.tolist()}


def load_config(document) -> Configuration:
    """Build a Configuration from a path, JSON text, or mapping.

    The document must contain equal-length arrays "centres" (list of
    [x, y, z]) and "alphas" (list of reals).
    """
    if isinstance(document, Configuration):
        return document
    if isinstance(document, dict):
        data = document
    else:
        text = None
        doc = str(document)
        if "\n" not in doc and not doc.lstrip().startswith("{"):
            try:
                with open(doc, "r", encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read configuration file: {exc}") from exc
        else:
            text = doc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration does not parse: {exc}") from exc
    if not isinstance(data, dict) or "centres" not in data or "alphas" not in data:
        raise ConfigError('configuration must contain "centres" and "alphas"')
    return Configuration(np.asarray(data["centres"], dtype=float),
                         np.asarray(data["alphas"], dtype=float))


def dump_config(cfg: Configuration, path=None) -> str:
    """Serialize a Configuration to JSON (round-trips exactly)."""
    text = json.dumps(cfg.to_dict(), sort_keys=True)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
    return text


# ---------------------------------------------------------------------------
# Radial grids and profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Staggered half-line grid r_i = (i + 1/2) h, h = r_max / n.

    Excludes r = 0 so that 1/r factors are always evaluable on nodes.
    """

    r_max: float
    n: int

    def __post_init__(self):
        if not (self.r_max > 0 and np.isfinite(self.r_max)):
            raise ConfigError("r_max must be positive and finite")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError("n must be an integer >= 2")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return self.r_max / self.n

    @property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    def fullline_nodes(self) -> np.ndarray:
        """Symmetric extension nodes (m - n + 1/2) h, m = 0..2n-1."""
        return (np.arange(2 * self.n) - self.n + 0.5) * self.h


def build_grid(r_max: float, n: int) -> RadialGrid:
    return RadialGrid(float(r_max), int(n))


class RadialProfile:
    """Complex samples of a function of r >= 0 on a staggered grid.

    ``parity`` ('even' or 'odd') fixes the extension to r < 0 used by the
    Fourier/Hilbert machinery.  Profiles are immutable value objects;
    arithmetic returns new profiles on the same grid.
    """

    __slots__ = ("grid", "values", "parity", "_spline")

    def __init__(self, grid: RadialGrid, values, parity: str = "even"):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.n,):
            raise ConfigError("profile length must equal grid.n")
        if not np.all(np.isfinite(values)):
            raise ConfigError("non-finite profile values")
        if parity not in ("even", "odd"):
            raise ConfigError("parity must be 'even' or 'odd'")
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)
        self.parity = parity
        self._spline = None

    # -- evaluation --------------------------------------------------------

    def _get_spline(self):
        if self._spline is None:
            self._spline = CubicSpline(self.grid.nodes, self.values,
                                       extrapolate=True)
        return self._spline

    def __call__(self, r):
        """Evaluate at r >= 0 (cubic spline; clamped to 0 beyond r_max)."""
        r = np.asarray(r, dtype=float)
        out = self._get_spline()(np.clip(r, 0.0, self.grid.r_max))
        return np.where(r > self.grid.r_max, 0.0, out)

    def value_at_zero(self) -> complex:
        """Quadratic extrapolation to r = 0 from the three innermost nodes."""
        r = self.grid.nodes[:3]
        v = self.values[:3]
        # Lagrange basis at 0
        l0 = (r[1] * r[2]) / ((r[0] - r[1]) * (r[0] - r[2]))
        l1 = (r[0] * r[2]) / ((r[1] - r[0]) * (r[1] - r[2]))
        l2 = (r[0] * r[1]) / ((r[2] - r[0]) * (r[2] - r[1]))
        return complex(l0 * v[0] + l1 * v[1] + l2 * v[2])

    def fullline_values(self) -> np.ndarray:
        """Samples on the symmetric extension nodes, honouring parity."""
        sign = 1.0 if self.parity == "even" else -1.0
        return np.concatenate([sign * self.values[::-1], self.values])

    def tail_mass(self, fraction: float = 0.05) -> float:
        """Mean |value| over the outermost `fraction` of the grid."""
        k = max(1, int(self.grid.n * fraction))
        return float(np.mean(np.abs(self.values[-k:])))

    # -- arithmetic --------------------------------------------------------

    def _like(self, values):
        return RadialProfile(self.grid, values, self.parity)

    def __add__(self, other):
        if isinstance(other, RadialProfile):
            if other.grid != self.grid or other.parity != self.parity:
                raise ConfigError("profile grids/parities differ")
            return self._like(self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, RadialProfile):
            if other.grid != self.grid or other.parity != self.parity:
                raise ConfigError("profile grids/parities differ")
            return self._like(self.values - other.values)
        return NotImplemented

    def __mul__(self, scalar):
        return self._like(self.values * complex(scalar))

    __rmul__ = __mul__

    def conj(self):
        return self._like(np.conj(self.values))


# ---------------------------------------------------------------------------
# Scalar fields
# ---------------------------------------------------------------------------

#: decay classes used to pick quadrature truncation radii
DECAY_SCHWARTZ = "schwartz"
DECAY_COMPACT = "compact-support"
DECAY_POLY = "polynomial-decay"


@dataclass(frozen=True)
class DecayTag:
    """Honest decay class of a field; drives truncation bounds.

    kind: 'schwartz' (scale = Gaussian-like width), 'compact-support'
    (radius = support radius), or 'polynomial-decay' (|u| <~ amp/(1+r)^rate).
    """

    kind: str
    scale: float = 1.0
    radius: float = math.inf
    rate: float = 0.0
    amplitude: float = 1.0

    def truncation_radius(self, tol: float) -> float:
        """Radius beyond which |u| < tol, per the tag."""
        if self.kind == DECAY_COMPACT:
            return self.radius
        if self.kind == DECAY_SCHWARTZ:
            # Gaussian-like bound amp * exp(-(r/scale)^2)
            ratio = max(self.amplitude / tol, math.e)
            return self.scale * math.sqrt(math.log(ratio)) + 2.0 * self.scale
        if self.kind == DECAY_POLY:
            if self.rate <= 0:
                raise ConfigError("polynomial decay needs a positive rate")
            return max(1.0, (self.amplitude / tol) ** (1.0 / self.rate))
        raise ConfigError(f"unknown decay kind {self.kind!r}")


class ScalarField:
    """An evaluable complex field on R³ with a decay tag.

    Subclasses implement ``__call__`` on (m, 3) arrays of points.  Fields
    that are exactly radial about some point expose it through
    ``radial_centre`` so that downstream operations can use 1-D fast paths.
    """

    decay: DecayTag
    radial_centre: Optional[np.ndarray] = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def radial_profile_about(self, centre) -> Optional[Callable]:
        """Exact radial profile r -> u(centre + r w), if u is radial there."""
        if self.radial_centre is None:
            return None
        if np.linalg.norm(np.asarray(centre, float) - self.radial_centre) > 1e-14:
            return None
        c = self.radial_centre

        def prof(r):
            r = np.atleast_1d(np.asarray(r, dtype=float))
            pts = np.zeros((r.size, 3))
            pts[:, 0] = r
            return self(pts + c)

        return prof

    def conj(self) -> "ScalarField":
        return _ConjField(self)

    def shifted(self, offset) -> "ScalarField":
        return _ShiftedField(self, np.asarray(offset, dtype=float))

    def support_radius(self, tol: float = 1e-12) -> float:
        return self.decay.truncation_radius(tol)


class _ConjField(ScalarField):
    def __init__(self, base: ScalarField):
        self.base = base
        self.decay = base.decay
        self.radial_centre = base.radial_centre

    def __call__(self, points):
        return np.conj(self.base(points))

    def conj(self):
        return self.base


class _ShiftedField(ScalarField):
    """(T_a u)(x) = u(x - a)."""

    def __init__(self, base: ScalarField, offset):
        self.base = base
        self.offset = np.asarray(offset, dtype=float)
        self.decay = base.decay
        if base.radial_centre is not None:
            self.radial_centre = base.radial_centre + self.offset

    def __call__(self, points):
        return self.base(np.asarray(points, dtype=float) - self.offset)


class GaussianField(ScalarField):
    """u(x) = amplitude * exp(-|x - centre|² / width²)."""

    def __init__(self, centre=(0.0, 0.0, 0.0), width: float = 1.0,
                 amplitude: complex = 1.0):
        if width <= 0:
            raise ConfigError("width must be positive")
        self.centre = np.asarray(centre, dtype=float)
        self.width = float(width)
        self.amplitude = complex(amplitude)
        self.decay = DecayTag(DECAY_SCHWARTZ, scale=self.width,
                              amplitude=max(abs(self.amplitude), 1e-300))
        self.radial_centre = self.centre

    def __call__(self, points):
        d2 = np.sum((np.asarray(points, dtype=float) - self.centre) ** 2, axis=-1)
        return self.amplitude * np.exp(-d2 / self.width ** 2)

    def spherical_mean_exact(self, about, r) -> np.ndarray:
        """Closed-form angular average about an arbitrary point.

        For a displaced unit-width Gaussian at distance a this is
        exp(-(r²+a²)/w²) sinh(2ra/w²) / (2ra/w²).
        """
        a = float(np.linalg.norm(np.asarray(about, float) - self.centre))
        r = np.asarray(r, dtype=float)
        w2 = self.width ** 2
        if a < 1e-300:
            return self.amplitude * np.exp(-r ** 2 / w2)
        z = 2.0 * r * a / w2
        # sinh(z)/z, stable at small z
        ratio = np.where(z < 1e-6, 1.0 + z * z / 6.0, np.sinh(z) / np.where(z == 0, 1.0, z))
        return self.amplitude * np.exp(-(r ** 2 + a ** 2) / w2) * ratio

    def lp_norm_exact(self, p: float) -> float:
        """||u||_p = |A| (pi/p)^{3/(2p)} * w^{3/p} for this Gaussian."""
        return abs(self.amplitude) * (math.pi / p) ** (1.5 / p) * self.width ** (3.0 / p)


class CallableField(ScalarField):
    """Wrap an arbitrary vectorised function of (m, 3) points."""

    def __init__(self, fn: Callable, decay: DecayTag,
                 radial_centre=None):
        self.fn = fn
        self.decay = decay
        self.radial_centre = (None if radial_centre is None
                              else np.asarray(radial_centre, dtype=float))

    def __call__(self, points):
        return np.asarray(self.fn(np.asarray(points, dtype=float)), dtype=complex)


class RadialCallableField(ScalarField):
    """u(x) = f(|x - centre|) for a vectorised radial function f."""

    def __init__(self, f: Callable, centre=(0.0, 0.0, 0.0),
                 decay: DecayTag = DecayTag(DECAY_SCHWARTZ)):
        self.f = f
        self.centre = np.asarray(centre, dtype=float)
        self.decay = decay
        self.radial_centre = self.centre

    def __call__(self, points):
        r = np.linalg.norm(np.asarray(points, dtype=float) - self.centre, axis=-1)
        return np.asarray(self.f(r), dtype=complex)


class SampledRadialField(ScalarField):
    """A radial field given by a RadialProfile anchored at a centre."""

    def __init__(self, profile: RadialProfile, centre=(0.0, 0.0, 0.0),
                 decay: Optional[DecayTag] = None):
        self.profile = profile
        self.centre = np.asarray(centre, dtype=float)
        self.decay = decay or DecayTag(DECAY_COMPACT, radius=profile.grid.r_max)
        self.radial_centre = self.centre

    def __call__(self, points):
        r = np.linalg.norm(np.asarray(points, dtype=float) - self.centre, axis=-1)
        return self.profile(r)


# ---------------------------------------------------------------------------
# Centred fields
# ---------------------------------------------------------------------------

class CentredField:
    """free part + sum of radial profiles anchored at configuration centres.

    Evaluation sums the free part (if any) and p_j(|x - y_j|) for each
    anchored pair (j, p_j).  This is the natural output shape of the wave
    operators and of resolvent differences: anchored profiles may carry a
    1/r singularity at their own centre, where evaluation uses the profile's
    innermost-node extrapolation.
    """

    def __init__(self, cfg: Configuration, free: Optional[ScalarField],
                 anchored: Sequence[tuple] = ()):
        self.cfg = cfg
        self.free = free
        anchored = list(anchored)
        for j, prof in anchored:
            if not (0 <= j < cfg.n_centres):
                raise ConfigError("anchored centre index out of range")
            if not isinstance(prof, RadialProfile):
                raise ConfigError("anchored parts must be RadialProfiles")
        self.anchored = anchored

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(points.shape[0], dtype=complex)
        if self.free is not None:
            out += self.free(points)
        for j, prof in self.anchored:
            r = np.linalg.norm(points - self.cfg.centres[j], axis=-1)
            out += prof(r)
        return out

    def conj(self) -> "CentredField":
        free = self.free.conj() if self.free is not None else None
        return CentredField(self.cfg, free,
                            [(j, p.conj()) for j, p in self.anchored])

    def anchored_at(self, j: int) -> Optional[RadialProfile]:
        total = None
        for k, p in self.anchored:
            if k == j:
                total = p if total is None else total + p
        return total

    def as_scalar_field(self) -> ScalarField:
        """View as a ScalarField (radial when everything shares one centre)."""
        centre = None
        if self.free is None or getattr(self.free, "radial_centre", None) is not None:
            centres = []
            if self.free is not None:
                centres.append(self.free.radial_centre)
            centres.extend(self.cfg.centres[j] for j, _ in self.anchored)
            if centres and all(np.allclose(c, centres[0], atol=1e-14) for c in centres):
                centre = centres[0]
        decay = self.free.decay if self.free is not None else DecayTag(
            DECAY_COMPACT,
            radius=max((p.grid.r_max for _, p in self.anchored), default=1.0))
        return CallableField(lambda pts: self(pts), decay, radial_centre=centre)


def as_points(where) -> np.ndarray:
    """Normalise an evaluation set to an (m, 3) float array."""
    pts = np.atleast_2d(np.asarray(where, dtype=float))
    if pts.shape[-1] != 3:
        raise ConfigError("evaluation points must be 3-vectors")
    return pts
