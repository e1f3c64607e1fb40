# lpprobe.py
"""
L^p norms of centred fields and the boundedness / blow-up probes.

The probes quantify the three regimes of the wave operator:

- boundedness_scan: ||W+ u||_p / ||u||_p stays finite and family-stable for
  1 < p < 3,
- p1_blowup_scan: at p = 1, the L1 mass of (W+ - 1)u_eps over shrinking
  balls grows like log R with a computable coefficient (the Hilbert
  transform of r^2 f does not stay integrable),
- p3_blowup_scan: at p = 3, the resolvent difference has a 1/|x-y| local
  singularity whose cubed annulus norm diverges like log(1/delta).

Norm evaluation prefers exact 1-D reductions: fields radial about a point
integrate radially; co-centred CentredFields reduce the same way; products
of anchored profiles at different centres use bipolar coordinates with
spline antiderivatives.  A genuinely non-radial field falls back to
spherical-shell quadrature about its dominant centre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import radial as radial_mod
from . import waveop as waveop_mod
from .core import (CentredField, Configuration, ConfigError, GaussianField,
                   NumericalError, RadialCallableField, RadialGrid,
                   RadialProfile, ScalarField, build_grid)
from .gamma import FOUR_PI, pole_guard

_LN = math.log


class SingularNormError(NumericalError):
    """Non-integrable singularity detected while evaluating a norm."""

    def __init__(self, message, exponent=None, p=None):
        super().__init__(message)
        self.exponent = exponent
        self.p = p


@dataclass(frozen=True)
class QuadSpec:
    """Quadrature controls for norm evaluation."""

    n_radial: int = 4096
    angular_order: int = 24
    tol: float = 1e-8
    r_max: Optional[float] = None


def _halfline_integral(r: np.ndarray, vals: np.ndarray) -> complex:
    """\int_0^{r_max} vals dr by spline quadrature.

    Plain midpoint sums on the staggered grid carry an O(h^2) boundary term
    at r = 0 whenever the integrand is not even there; the spline keeps the
    boundary exact to O(h^4), which the isometry tolerances require.
    """
    if np.iscomplexobj(vals):
        re = CubicSpline(r, vals.real).integrate(0.0, r[-1])
        im = CubicSpline(r, vals.imag).integrate(0.0, r[-1])
        return complex(re + 1j * im)
    return complex(CubicSpline(r, vals).integrate(0.0, r[-1]))


# ---------------------------------------------------------------------------
# radial views
# ---------------------------------------------------------------------------

def _radial_view(f):
    """(centre, values_on(r) callable, r_hint) when f is radial, else None."""
    if isinstance(f, CentredField):
        sf = f.as_scalar_field()
        if sf.radial_centre is None:
            return None
        centre = sf.radial_centre
        r_hints = [p.grid.r_max for _, p in f.anchored]
        if f.free is not None:
            r_hints.append(f.free.support_radius(1e-14))

        def vals(r):
            r = np.atleast_1d(np.asarray(r, dtype=float))
            pts = centre[None, :] + np.outer(r, np.array([1.0, 0.0, 0.0]))
            return f(pts)

        return centre, vals, max(r_hints)
    if isinstance(f, ScalarField):
        if f.radial_centre is None:
            return None
        centre = f.radial_centre
        prof = f.radial_profile_about(centre)
        return centre, (lambda r: np.asarray(prof(np.atleast_1d(r)), dtype=complex)), \
            f.support_radius(1e-14)
    raise ConfigError("expected a ScalarField or CentredField")


def _singularity_check(r, absvals, p, scale):
    """Raise when |f| ~ r^-s near 0 with p*s >= 3 (non-integrable |f|^p r^2)."""
    k = 6
    mag = absvals[:k]
    if np.any(mag <= 0) or mag[0] < 1e-13 * max(scale, 1e-300):
        return
    s = -np.polyfit(np.log(r[:k]), np.log(mag), 1)[0]
    if s * p >= 2.98 and s > 0.5:
        raise SingularNormError(
            f"non-integrable singularity: |f| ~ r^-{s:.3f} with p={p} "
            f"(local exponent p*s-2 = {p * s - 2:.3f} >= 1)",
            exponent=float(s), p=float(p))


def _radial_lp(vals_fn, r_hint, p, quad: QuadSpec) -> float:
    r_max = quad.r_max or max(r_hint, 1.0)
    grid = build_grid(r_max, quad.n_radial)
    r = grid.nodes
    a = np.abs(vals_fn(r))
    scale = float(a.max()) if a.size else 0.0
    _singularity_check(r, a, p, scale)
    val = FOUR_PI * _halfline_integral(r, a ** p * r ** 2).real
    return float(max(val, 0.0) ** (1.0 / p))


def _shell_lp(f, centre, r_hint, p, quad: QuadSpec) -> float:
    """Spherical-shell quadrature about `centre` for non-radial fields."""
    r_max = quad.r_max or max(r_hint, 1.0)
    grid = build_grid(r_max, max(quad.n_radial // 4, 512))
    dirs, w = radial_mod._angular_nodes(quad.angular_order, 2 * quad.angular_order)
    r = grid.nodes
    shell = np.empty(r.size)
    chunk = max(1, int(4e6 / dirs.shape[0]))
    fn = f if isinstance(f, CentredField) else (lambda pts: f(pts))
    for lo in range(0, r.size, chunk):
        hi = min(lo + chunk, r.size)
        pts = centre[None, None, :] + r[lo:hi, None, None] * dirs[None, :, :]
        vals = np.abs(fn(pts.reshape(-1, 3)).reshape(hi - lo, -1)) ** p
        shell[lo:hi] = vals @ w
    _singularity_check(r, (shell / (4 * math.pi)) ** (1 / p), p,
                       float(((shell / (4 * math.pi)) ** (1 / p)).max()))
    return float((grid.h * np.sum(shell * r ** 2)) ** (1.0 / p))


def lp_norm(f, p: float, quad: Optional[QuadSpec] = None) -> float:
    """||f||_p for p in [1, inf) on fields with honest decay tags.

    Radial fields (and co-centred CentredFields) reduce to an exact 1-D
    integral; otherwise spherical-shell quadrature about the dominant
    centre is used.  Raises SingularNormError when the local behaviour at a
    centre is non-integrable at this p (used as a detector at p >= 3).
    """
    if p < 1:
        raise ConfigError("p must be >= 1")
    quad = quad or QuadSpec()
    view = _radial_view(f)
    if view is not None:
        centre, vals_fn, r_hint = view
        return _radial_lp(vals_fn, r_hint, p, quad)
    if isinstance(f, CentredField):
        centres = [f.cfg.centres[j] for j, _ in f.anchored]
        if f.free is not None and f.free.radial_centre is not None:
            centres.append(f.free.radial_centre)
        if not centres:
            raise ConfigError("cannot locate the field: no centres, no tag")
        anchor_pts = {tuple(np.round(c, 12)) for c in
                      (f.cfg.centres[j] for j, _ in f.anchored)}
        if len(anchor_pts) <= 1:
            centre = (next(iter(anchor_pts)) if anchor_pts
                      else tuple(centres[0]))
            r_hint = max([pr.grid.r_max for _, pr in f.anchored]
                         + ([np.linalg.norm(f.free.radial_centre - np.asarray(centre))
                             + f.free.support_radius(1e-14)]
                            if f.free is not None and f.free.radial_centre is not None
                            else [1.0]))
            return _shell_lp(f, np.asarray(centre, float), r_hint, p, quad)
        return _multi_anchor_lp(f, p, quad)
    if isinstance(f, ScalarField):
        centre = f.radial_centre if f.radial_centre is not None else np.zeros(3)
        return _shell_lp(f, np.asarray(centre, float), f.support_radius(1e-14),
                         p, quad)
    raise ConfigError("expected a ScalarField or CentredField")


def _multi_anchor_lp(f: CentredField, p: float, quad: QuadSpec) -> float:
    """Union of disjoint balls about each anchor plus a masked far region.

    Accuracy is limited by the mask discontinuity (~1e-3 relative); exact
    1-D paths cover the co-centred cases used by the quantitative tests.
    """
    cfg = f.cfg
    dmin = cfg.min_distance()
    b = 0.45 * dmin
    total = 0.0
    for j in range(cfg.n_centres):
        qj = QuadSpec(n_radial=max(quad.n_radial // 4, 512),
                      angular_order=quad.angular_order, r_max=b)
        total += _shell_lp(f, cfg.centres[j], b, p, qj) ** p
    centroid = cfg.centres.mean(axis=0)
    spread = float(np.max(np.linalg.norm(cfg.centres - centroid, axis=1)))
    r_hint = (quad.r_max or max(pr.grid.r_max for _, pr in f.anchored)) + spread
    grid = build_grid(r_hint, max(quad.n_radial // 4, 512))
    dirs, w = radial_mod._angular_nodes(quad.angular_order, 2 * quad.angular_order)
    r = grid.nodes
    acc = 0.0
    chunk = max(1, int(4e6 / dirs.shape[0]))
    for lo in range(0, r.size, chunk):
        hi = min(lo + chunk, r.size)
        pts = (centroid[None, None, :] + r[lo:hi, None, None] * dirs[None, :, :])
        flat = pts.reshape(-1, 3)
        mask = np.ones(flat.shape[0], dtype=bool)
        for j in range(cfg.n_centres):
            mask &= np.linalg.norm(flat - cfg.centres[j], axis=1) > b
        vals = np.zeros(flat.shape[0])
        vals[mask] = np.abs(f(flat[mask])) ** p
        acc += grid.h * np.sum((vals.reshape(hi - lo, -1) @ w) * r[lo:hi] ** 2)
    return float((total + acc) ** (1.0 / p))


def lp_norm_annulus(f, centre, p: float, r_lo: float, r_hi: float,
                    n_radial: int = 2048, angular_order: int = 24) -> float:
    """||f||_p over the annulus r_lo < |x - centre| < r_hi."""
    if not (0 < r_lo < r_hi):
        raise ConfigError("need 0 < r_lo < r_hi")
    centre = np.asarray(centre, dtype=float)
    # geometric radial nodes resolve the inner decades
    edges = np.geomspace(r_lo, r_hi, n_radial + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    dr = np.diff(edges)
    view = _radial_view(f)
    if view is not None and np.allclose(view[0], centre, atol=1e-12):
        a = np.abs(view[1](mid))
        return float((FOUR_PI * np.sum(a ** p * mid ** 2 * dr)) ** (1.0 / p))
    dirs, w = radial_mod._angular_nodes(angular_order, 2 * angular_order)
    fn = f if isinstance(f, CentredField) else (lambda pts: f(pts))
    acc = 0.0
    chunk = max(1, int(4e6 / dirs.shape[0]))
    for lo in range(0, mid.size, chunk):
        hi = min(lo + chunk, mid.size)
        pts = centre[None, None, :] + mid[lo:hi, None, None] * dirs[None, :, :]
        vals = np.abs(fn(pts.reshape(-1, 3)).reshape(hi - lo, -1)) ** p
        acc += np.sum((vals @ w) * mid[lo:hi] ** 2 * dr[lo:hi])
    return float(acc ** (1.0 / p))


# ---------------------------------------------------------------------------
# L2 inner products (exact reductions)
# ---------------------------------------------------------------------------

def _parts(f):
    """Split into (free ScalarField | None, [(centre, profile)])."""
    if isinstance(f, CentredField):
        return f.free, [(f.cfg.centres[j], p) for j, p in f.anchored]
    return f, []


def _inner_free_free(a: ScalarField, b: ScalarField, quad: QuadSpec) -> complex:
    if isinstance(a, GaussianField) and isinstance(b, GaussianField):
        pa, pb = 1.0 / a.width ** 2, 1.0 / b.width ** 2
        d2 = float(np.sum((a.centre - b.centre) ** 2))
        pref = np.conj(a.amplitude) * b.amplitude
        return complex(pref * (math.pi / (pa + pb)) ** 1.5
                       * math.exp(-pa * pb * d2 / (pa + pb)))
    if (a.radial_centre is not None and b.radial_centre is not None
            and np.allclose(a.radial_centre, b.radial_centre, atol=1e-14)):
        c = a.radial_centre
        r_max = max(a.support_radius(quad.tol * 1e-4),
                    b.support_radius(quad.tol * 1e-4))
        grid = build_grid(r_max, quad.n_radial)
        fa = np.asarray(a.radial_profile_about(c)(grid.nodes), dtype=complex)
        fb = np.asarray(b.radial_profile_about(c)(grid.nodes), dtype=complex)
        return FOUR_PI * _halfline_integral(grid.nodes,
                                            np.conj(fa) * fb * grid.nodes ** 2)
    # generic: spherical mean of the product about a's centre
    c = a.radial_centre if a.radial_centre is not None else np.zeros(3)
    r_max = max(a.support_radius(quad.tol * 1e-4),
                b.support_radius(quad.tol * 1e-4)) + 1.0
    grid = build_grid(r_max, max(quad.n_radial // 2, 1024))
    w = waveop_mod.CentredField  # noqa: F841  (documentation hook)
    prod = lambda pts: np.conj(a(pts)) * b(pts)  # noqa: E731
    from .core import CallableField, DecayTag, DECAY_SCHWARTZ
    pf = CallableField(prod, DecayTag(DECAY_SCHWARTZ, scale=1.0))
    m = radial_mod.spherical_mean(pf, c, grid,
                                  angular_order=quad.angular_order)
    return FOUR_PI * _halfline_integral(grid.nodes, m.values * grid.nodes ** 2)


def _inner_free_anchored(a: ScalarField, centre, prof: RadialProfile,
                         quad: QuadSpec, conj_free: bool) -> complex:
    """<a, T p> (conj_free) or <T p, a> (not conj_free)."""
    grid = prof.grid
    if isinstance(a, GaussianField):
        ma = a.spherical_mean_exact(centre, grid.nodes)
    else:
        ma = radial_mod.spherical_mean(a, centre, grid,
                                       angular_order=quad.angular_order).values
    if conj_free:
        integ = np.conj(ma) * prof.values
    else:
        integ = np.conj(prof.values) * ma
    return FOUR_PI * _halfline_integral(grid.nodes, integ * grid.nodes ** 2)


def _inner_anchored_anchored(c1, p1: RadialProfile, c2, p2: RadialProfile,
                             quad: QuadSpec) -> complex:
    d = float(np.linalg.norm(np.asarray(c1) - np.asarray(c2)))
    if d < 1e-14:
        grid = p1.grid
        v2 = p2.values if p2.grid == grid else p2(grid.nodes)
        return FOUR_PI * _halfline_integral(
            grid.nodes, np.conj(p1.values) * v2 * grid.nodes ** 2)
    # bipolar reduction: <T1 p1, T2 p2> = (2 pi / d) \int r conj(p1)(r)
    #                                   [Q(r+d) - Q(|r-d|)] dr,
    # Q(s) = \int_0^s t p2(t) dt, via spline antiderivatives.
    g2 = p2.grid
    s2 = CubicSpline(np.concatenate([[0.0], g2.nodes]),
                     np.concatenate([[0.0], g2.nodes * p2.values]))
    Q = s2.antiderivative()
    smax = g2.r_max

    def Qc(s):
        return Q(np.clip(s, 0.0, smax))

    g1 = p1.grid
    r = g1.nodes
    integrand = r * np.conj(p1.values) * (Qc(r + d) - Qc(np.abs(r - d)))
    return 2.0 * math.pi / d * _halfline_integral(r, integrand)


def l2_inner(f, g, quad: Optional[QuadSpec] = None) -> complex:
    """<f, g> on L²(R³), anti-linear in the first argument."""
    quad = quad or QuadSpec()
    fa, fan = _parts(f)
    ga, gan = _parts(g)
    total = 0.0 + 0.0j
    if fa is not None and ga is not None:
        total += _inner_free_free(fa, ga, quad)
    if fa is not None:
        for c, p in gan:
            total += _inner_free_anchored(fa, c, p, quad, conj_free=True)
    if ga is not None:
        for c, p in fan:
            total += _inner_free_anchored(ga, c, p, quad, conj_free=False)
    for c1, p1 in fan:
        for c2, p2 in gan:
            total += _inner_anchored_anchored(c1, p1, c2, p2, quad)
    return complex(total)


def l2_norm(f, quad: Optional[QuadSpec] = None) -> float:
    return math.sqrt(max(l2_inner(f, f, quad).real, 0.0))


# ---------------------------------------------------------------------------
# boundedness scan (1 < p < 3)
# ---------------------------------------------------------------------------

def boundedness_scan(cfg: Configuration, family: Sequence, p_grid,
                     grid: Optional[RadialGrid] = None,
                     quad: Optional[QuadSpec] = None) -> dict:
    """Table of ||W+ u||_p / ||u||_p over a field family.

    Returns {"p": [...], "ratios": (n_p, n_family), "max_ratio": per p,
    "stability": max/min per p}.
    """
    quad = quad or QuadSpec()
    grid = grid or build_grid(48.0, 2048)
    p_grid = list(p_grid)
    ratios = np.empty((len(p_grid), len(family)))
    for i_u, u in enumerate(family):
        wu = waveop_mod.wave_apply(cfg, u, "+", grid)
        for i_p, p in enumerate(p_grid):
            ratios[i_p, i_u] = lp_norm(wu, p, quad) / lp_norm(u, p, quad)
    return {
        "p": p_grid,
        "ratios": ratios,
        "max_ratio": ratios.max(axis=1),
        "stability": ratios.max(axis=1) / ratios.min(axis=1),
    }


# ---------------------------------------------------------------------------
# p = 1 blow-up probe
# ---------------------------------------------------------------------------

def _smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    return a / (a + b)


def default_p1_profile(grid: Optional[RadialGrid] = None, cutoff: float = 5.0,
                       moll: float = 0.1) -> RadialProfile:
    """Even counterexample profile: 1/(1+r^2), cut off smoothly at r=cutoff
    and mollified at scale `moll` (Gaussian filter in the frequency domain).
    """
    grid = grid or build_grid(60.0, 4096)
    r = grid.nodes
    raw = 1.0 / (1.0 + r ** 2) * _smoothstep((cutoff - r) / 1.0)
    prof = RadialProfile(grid, raw, "even")
    x = grid.fullline_nodes()
    vals = prof.fullline_values()
    n = x.size
    freq = 2.0 * math.pi * np.fft.fftfreq(n, d=grid.h)
    sm = np.fft.ifft(np.fft.fft(vals) * np.exp(-0.5 * (freq * moll) ** 2))
    return RadialProfile(grid, np.real(sm[grid.n:]) + 0j, "even")


def p1_blowup_scan(f: Optional[RadialProfile], R_list, eps_list,
                   cfg: Optional[Configuration] = None,
                   n_wave: int = 3072, angular_order: int = 12) -> dict:
    """Quantify the p = 1 blow-up of W+ - 1 under the L1-invariant rescale
    u_eps(x) = eps^-3 u(x/eps).

    Curve (a): A(R) = 4 pi \int_0^R |(1 - iH)(r^2 f)(rho)| d rho, whose
    growth in log R has slope 4 \int_R r^2 f (raw) — the normalised slope
    A(R)/(4 pi) vs log R equals (2/pi) \int_0^inf r^2 f dr.
    Curve (b): B(eps, R) = L1 norm of (W+ - 1)u_eps over the ball of radius
    eps R (the scaled-frame ball), which converges to A(R) as eps -> 0.
    Both exchange orders (eps down at fixed R; slope in log R at the
    smallest eps) are reported, with a disagreement flag.
    """
    if cfg is None:
        cfg = Configuration(np.zeros((1, 3)), np.zeros(1))
    if np.linalg.norm(cfg.centres[0]) > 1e-12:
        raise ConfigError("first centre must sit at the origin for the probe")
    R_list = np.asarray(sorted(R_list), dtype=float)
    eps_list = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    if f is None:
        f = default_p1_profile(build_grid(max(3.0 * R_list[-1], 60.0), 8192))
    if f.parity != "even":
        raise ConfigError("profile must be even")
    grid = f.grid
    r = grid.nodes
    if grid.r_max < R_list[-1]:
        raise ConfigError("profile grid must cover max(R_list)")

    moment = float(np.real(grid.h * np.sum(r ** 2 * f.values)))
    scale = float(np.max(np.abs(f.values))) * grid.r_max ** 3
    if abs(moment) < 1e-12 * max(scale, 1e-300):
        raise ConfigError("degenerate counterexample: \\int r^2 f = 0")

    r2f = RadialProfile(grid, r ** 2 * f.values, "even")
    hr2f = radial_mod.hilbert_transform(r2f, taper=0.0)
    integrand = np.abs(r2f.values - 1j * hr2f.values)
    cumulative = FOUR_PI * grid.h * np.cumsum(integrand)
    A = np.interp(R_list, r, cumulative)

    # asymptotic slope of A vs log R over the region beyond the support
    mask = R_list >= 2.0 * _support_radius(f)
    fitR = R_list[mask] if mask.sum() >= 2 else R_list[-2:]
    fitA = A[mask] if mask.sum() >= 2 else A[-2:]
    slope_raw = float(np.polyfit(np.log(fitR), fitA, 1)[0])
    slope_norm = slope_raw / FOUR_PI
    target = (2.0 / math.pi) * moment

    # curve (b): rescaled fields through the wave operator
    spl = CubicSpline(np.concatenate([[0.0], r]),
                      np.concatenate([[f.value_at_zero()], f.values]).real)
    sup_f = _support_radius(f)
    B = np.empty((eps_list.size, R_list.size))
    for i_e, eps in enumerate(eps_list):
        r_max_e = eps * R_list[-1] * 1.02
        wgrid = build_grid(r_max_e, n_wave)

        def u_eps(rr, _e=eps):
            rr = np.asarray(rr, dtype=float)
            out = np.zeros_like(rr)
            inside = rr <= _e * sup_f * 1.2
            out[inside] = spl(rr[inside] / _e) / _e ** 3
            return out

        field = RadialCallableField(
            u_eps, centre=cfg.centres[0],
            decay=_compact_tag(eps * sup_f * 1.2))
        wu = waveop_mod.wave_apply(cfg, field, "+", wgrid,
                                   angular_order=angular_order)
        corr = CentredField(cfg, None, wu.anchored)
        for i_r, R in enumerate(R_list):
            B[i_e, i_r] = _ball_l1(corr, cfg, eps * R, angular_order)

    conv = np.abs(B[-1] / A - 1.0)
    maskB = fitR.size >= 2
    slopeB = float(np.polyfit(np.log(fitR),
                              np.interp(fitR, R_list, B[-1]), 1)[0]) if maskB else float("nan")
    return {
        "R": R_list, "eps": eps_list, "A": A, "B": B,
        "moment": moment,
        "slope_raw": slope_raw, "slope_norm": slope_norm,
        "slope_target": target,
        "slope_rel_err": abs(slope_norm - target) / abs(target),
        "B_slope_raw": slopeB,
        "conv_eps_then_R": conv,
        "orders_disagree": bool(np.nanmax(conv) > 0.05
                                and abs(slopeB - slope_raw) > 0.1 * abs(slope_raw)),
    }


def _support_radius(f: RadialProfile, rel: float = 1e-8) -> float:
    mag = np.abs(f.values)
    idx = np.nonzero(mag > rel * mag.max())[0]
    return float(f.grid.nodes[idx[-1]]) if idx.size else f.grid.h


def _compact_tag(radius):
    from .core import DecayTag, DECAY_COMPACT
    return DecayTag(DECAY_COMPACT, radius=radius)


def _ball_l1(corr: CentredField, cfg: Configuration, R: float,
             angular_order: int) -> float:
    """L1 norm of the correction field over the ball |x| <= R."""
    grid = build_grid(R, 1024)
    r = grid.nodes
    if cfg.n_centres == 1:
        prof = corr.anchored_at(0)
        return float(FOUR_PI * grid.h * np.sum(np.abs(prof(r)) * r ** 2))
    dirs, w = radial_mod._angular_nodes(angular_order, 2 * angular_order)
    acc = 0.0
    chunk = max(1, int(4e6 / dirs.shape[0]))
    for lo in range(0, r.size, chunk):
        hi = min(lo + chunk, r.size)
        pts = r[lo:hi, None, None] * dirs[None, :, :]
        vals = np.abs(corr(pts.reshape(-1, 3)).reshape(hi - lo, -1))
        acc += grid.h * np.sum((vals @ w) * r[lo:hi] ** 2)
    return float(acc)


# ---------------------------------------------------------------------------
# p = 3 blow-up probe
# ---------------------------------------------------------------------------

def p3_blowup_scan(cfg: Configuration, u: ScalarField, c: float, delta_list,
                   delta0: Optional[float] = None,
                   grid: Optional[RadialGrid] = None) -> dict:
    """Log-divergence of the cubed local L3 norm of the resolvent
    difference D = (R_{a,Y}(-c^2) - R_0(-c^2)) u near the dominant centre.

    D is the rank-N correction sum_j q_j e^{-c|x-y_j|}/(4 pi |x-y_j|) with
    q = Gamma(ic)^{-1} (<conj G_ic^{y_k}, u>)_k; its cubed annulus norm
    grows like 4 pi (|q_j0|/4 pi)^3 log(1/delta).
    """
    if c <= 0:
        raise ConfigError("c must be positive")
    mat = pole_guard(cfg, 1j * c)
    grid = grid or build_grid(40.0, 4096)
    pair = np.empty(cfg.n_centres, dtype=complex)
    for k in range(cfg.n_centres):
        m = radial_mod.spherical_mean(u, cfg.centres[k], grid)
        pair[k] = grid.h * np.sum(np.exp(-c * grid.nodes)
                                  * grid.nodes * m.values)
    q = np.linalg.solve(mat, pair)
    scale = float(np.max(np.abs(pair))) / max(abs(np.linalg.det(mat)), 1e-300)
    if np.max(np.abs(q)) < 1e-12 * max(scale, 1e-300):
        raise NumericalError(
            "all correction coefficients vanish: u is orthogonal to the "
            "Green functions at this c (precondition violated)")
    j0 = int(np.argmax(np.abs(q)))
    delta_list = np.asarray(sorted(delta_list, reverse=True), dtype=float)
    if delta0 is None:
        delta0 = min(0.5 / c, cfg.min_distance() / 2.0, 0.5)
    if delta_list[0] >= delta0:
        raise ConfigError("delta values must lie below delta0")

    anchored = []
    for j in range(cfg.n_centres):
        vals = q[j] * np.exp(-c * grid.nodes) / (FOUR_PI * grid.nodes)
        anchored.append((j, RadialProfile(grid, vals, "even")))
    D = CentredField(cfg, None, anchored)

    cubes = np.array([
        lp_norm_annulus(D, cfg.centres[j0], 3.0, d, delta0) ** 3
        for d in delta_list])
    x = np.log(1.0 / delta_list)
    slope, intercept = np.polyfit(x, cubes, 1)
    resid = cubes - (slope * x + intercept)
    ss_tot = float(np.sum((cubes - cubes.mean()) ** 2)) or 1.0
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot
    target = FOUR_PI * (abs(q[j0]) / FOUR_PI) ** 3
    return {
        "charges": q, "j0": j0, "delta": delta_list, "delta0": delta0,
        "cubes": cubes, "slope": float(slope), "intercept": float(intercept),
        "r2": r2, "slope_target": float(target),
        "slope_rel_err": abs(slope - target) / target,
    }
