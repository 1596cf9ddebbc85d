"""Charts on the degenerate set, the closed 1-form built from the normal
Hessian, and the compatibility-identity residuals.

Complex charts use interleaved parameters (x1, y1, ..., xm, ym) and are
expected to embed holomorphically; real charts use (t1, ..., tm).  Chart
derivatives of boundary fields use centered differences of boundary-projected
stencils; derivatives along J-companions of real-chart directions (which may
leave the boundary) use ambient straight-line stencils of the collar fields.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distance import delta_jet, foot_points, normal_n
from .errors import ChartMismatch, HypothesisFail, StencilLeak
from .jets import DomainSpec, WirtingerJet
from .util import complex_pack


@dataclass
class SigmaChart:
    """A parametrized patch (or foliation leaf) of the degenerate set."""

    domain: DomainSpec
    kind: str                  # "complex" | "real"
    m: int                     # complex dimension (complex) / real dim (real)
    lo: np.ndarray
    hi: np.ndarray
    embed: Callable            # (K, p) params -> (K, 2n) ambient points
    tangent: Callable | None = None  # (K, p) -> (K, m, n) complex coefficients
    leaf_label: float | None = None
    name: str = ""
    resolution: int = 17
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)

    @property
    def params_dim(self):
        return 2 * self.m if self.kind == "complex" else self.m

    def contains(self, U, pad=1e-12):
        U = np.atleast_2d(U)
        tol = pad + 1e-12 * float(np.max(self.hi - self.lo))
        return np.all((U >= self.lo - tol) & (U <= self.hi + tol), axis=1)

    def require_inside(self, U, margin=0.0):
        U = np.atleast_2d(U)
        if np.any(U < self.lo + margin - 1e-12) or \
           np.any(U > self.hi - margin + 1e-12):
            raise StencilLeak("chart parameter outside the box")
        return U

    def grid(self, res=None):
        """Uniform tensor grid; returns (params (K, p), shape tuple)."""
        res = self.resolution if res is None else res
        axes = [np.linspace(self.lo[a], self.hi[a], res)
                for a in range(self.params_dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        U = np.stack([m.ravel() for m in mesh], axis=1)
        return U, tuple(len(ax) for ax in axes)

    def embed_batch(self, U):
        return self.embed(np.atleast_2d(np.asarray(U, dtype=float)))

    def tangents(self, U):
        """(1,0)-part coefficients of the coordinate directions, (K, m, n).

        Complex charts: the coordinate fields d/dz_j of the holomorphic
        parametrization.  Real charts: the (1,0) parts of d/dt_j.
        """
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if self.tangent is not None:
            return self.tangent(U)
        he = 1e-6 * float(np.max(self.hi - self.lo))
        K, p = U.shape
        cols = []
        for a in range(p):
            dU = np.zeros_like(U)
            dU[:, a] = he
            dE = (self.embed_batch(U + dU) - self.embed_batch(U - dU)) / (2 * he)
            cols.append(complex_pack(dE))
        if self.kind == "real":
            return np.stack(cols, axis=1)
        W = []
        for j in range(self.m):
            xi_x = cols[2 * j]
            xi_y = cols[2 * j + 1]
            W.append(0.5 * (xi_x - 1j * xi_y))
        return np.stack(W, axis=1)

    def holomorphy_defect(self, U):
        """max |xi(Y_j) - i xi(X_j)| over the grid; zero for holomorphic
        embeddings."""
        if self.kind != "complex":
            raise ChartMismatch("holomorphy defect needs a complex chart")
        U = np.atleast_2d(np.asarray(U, dtype=float))
        he = 1e-6 * float(np.max(self.hi - self.lo))
        worst = 0.0
        for j in range(self.m):
            dx = np.zeros_like(U)
            dx[:, 2 * j] = he
            dy = np.zeros_like(U)
            dy[:, 2 * j + 1] = he
            xx = complex_pack((self.embed_batch(U + dx)
                               - self.embed_batch(U - dx)) / (2 * he))
            yy = complex_pack((self.embed_batch(U + dy)
                               - self.embed_batch(U - dy)) / (2 * he))
            worst = max(worst, float(np.max(np.abs(yy - 1j * xx))))
        return worst


# ---------------------------------------------------------------------------
# boundary fields
# ---------------------------------------------------------------------------

def _snap(chart, U):
    """Embed chart parameters and project back onto the boundary."""
    P = chart.embed_batch(U)
    feet, _ = foot_points(chart.domain, P, ambiguity_check=False)
    return feet


def h_field(chart: SigmaChart, U):
    """Normal-Hessian field h_j = Hess_delta(N, W_j) on the chart, (K, m)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    P = _snap(chart, U)
    jet = delta_jet(chart.domain, P, order=2)
    N = normal_n(jet)
    W = chart.tangents(U)
    H = jet.mixed
    return np.einsum("kij,ki,kmj->km", H, N, np.conj(W))


def theta_components(chart: SigmaChart, U):
    """Components of the 1-form, aligned with the chart parameters.

    Complex charts: theta = sum_j Re(h_j) dx_j + Im(h_j) dy_j, returned as a
    (K, 2m) array in (x1, y1, ..., xm, ym) order.
    """
    if chart.kind != "complex":
        raise ChartMismatch("theta needs a complex chart")
    h = h_field(chart, U)
    K, m = h.shape
    comps = np.empty((K, 2 * m))
    comps[:, 0::2] = h.real
    comps[:, 1::2] = h.imag
    return comps


def theta_at(chart: SigmaChart, u):
    """The 2m real components at a single parameter point."""
    return theta_components(chart, np.atleast_2d(u))[0]


def nu_field(domain: DomainSpec, jet: WirtingerJet):
    """w_k = nu(nu_plus_k): derivative of the doubled antiholomorphic
    gradient coefficients along nu = N - conj(N); (K, n) complex.

    Through the eikonal identity, h_j = (1/4) <w, xi_j> pointwise in the
    collar, which realizes the real-form identities.
    """
    nu_plus = 2.0 * np.conj(jet.wgrad)
    H = jet.mixed     # H[i, k] = d^2 delta / dz_i dzbar_k
    S = jet.holo
    term1 = np.einsum("ki,kil->kl", nu_plus, H)
    term2 = np.einsum("ki,kil->kl", np.conj(nu_plus), np.conj(S))
    return 2.0 * (term1 - term2)


def nu_pairings(domain: DomainSpec, jet: WirtingerJet, xi):
    """(g(nabla_nu nu, X), g(nabla_nu nu, JX)) for real vectors X given by
    their (1,0)-part coefficients xi, batched (K, n) or (K, m, n)."""
    w = nu_field(domain, jet)
    if xi.ndim == 3:
        inner = np.einsum("kmj,kj->km", np.conj(xi), w)
    else:
        inner = np.einsum("kj,kj->k", np.conj(xi), w)
    return inner.real, inner.imag


def real_one_form_at(chart: SigmaChart, u):
    """m real components (1/4) g(nabla_nu nu, d/dx_j-dual) on a real chart."""
    if chart.kind != "real":
        raise ChartMismatch("the real 1-form needs a real chart")
    U = np.atleast_2d(np.asarray(u, dtype=float))
    P = _snap(chart, U)
    jet = delta_jet(chart.domain, P, order=2)
    xi = chart.tangents(U)
    gx, _ = nu_pairings(chart.domain, jet, xi)
    out = 0.25 * gx
    return out[0] if np.asarray(u).ndim == 1 else out


# ---------------------------------------------------------------------------
# identity residuals
# ---------------------------------------------------------------------------

def _chart_wirtinger_derivs(chart, U, fn, h):
    """(d/dz_j F, d/dzbar_j F) of a chart field by centered differences.

    F = fn(U) must return (K, m) complex samples; derivatives for every
    chart coordinate j, giving (K, m_coords, m_fields) arrays.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    K, p = U.shape
    m = chart.m
    stack = []
    for j in range(m):
        for a, step in ((2 * j, h), (2 * j + 1, h)):
            dU = np.zeros_like(U)
            dU[:, a] = step
            stack.append(U + dU)
            stack.append(U - dU)
    allU = np.concatenate(stack, axis=0)
    chart.require_inside(allU)
    allF = fn(allU)
    m_fields = allF.shape[1]
    blocks = allF.reshape(2 * m, 2, K, m_fields)
    dzs = np.empty((K, m, m_fields), dtype=complex)
    dzbars = np.empty((K, m, m_fields), dtype=complex)
    for j in range(m):
        Dx = (blocks[2 * j, 0] - blocks[2 * j, 1]) / (2 * h)
        Dy = (blocks[2 * j + 1, 0] - blocks[2 * j + 1, 1]) / (2 * h)
        dzs[:, j, :] = 0.5 * (Dx - 1j * Dy)
        dzbars[:, j, :] = 0.5 * (Dx + 1j * Dy)
    return dzs, dzbars


def chart_compat_residuals(chart: SigmaChart, u, h):
    """Residuals of the two normal-Hessian compatibility identities.

    Identity one: d/dz_j h_i = conj(d/dz_i h_j); identity two:
    d/dzbar_j h_i = d/dzbar_i h_j.  Both vanish on the degenerate set; the
    centered differences converge at second order.
    """
    if chart.kind != "complex":
        raise ChartMismatch("compatibility residuals need a complex chart")
    U = np.atleast_2d(np.asarray(u, dtype=float))
    dz, dzb = _chart_wirtinger_derivs(chart, U, lambda V: h_field(chart, V), h)
    r1 = np.abs(dz - np.conj(np.swapaxes(dz, 1, 2)))
    r2 = np.abs(dzb - np.swapaxes(dzb, 1, 2))
    r1 = r1.reshape(U.shape[0], -1).max(axis=1)
    r2 = r2.reshape(U.shape[0], -1).max(axis=1)
    if np.asarray(u).ndim == 1:
        return float(r1[0]), float(r2[0])
    return r1, r2


def dtheta_residual(chart: SigmaChart, u, h, plane=(0, 1), components=None):
    """|circulation|/area of the 1-form around the grid cell spanned by the
    parameter axes `plane` at corner u; second-order proxy for |d theta|."""
    U = np.atleast_2d(np.asarray(u, dtype=float))
    a, b = plane
    ea = np.zeros(U.shape[1])
    eb = np.zeros(U.shape[1])
    ea[a] = h
    eb[b] = h
    corners = [U, U + ea, U + ea + eb, U + eb]
    comp_fn = components if components is not None \
        else (lambda V: theta_components(chart, V))
    vals = [comp_fn(np.atleast_2d(c)) for c in corners]
    circ = 0.0
    edges = [(0, 1, a), (1, 2, b), (2, 3, a), (3, 0, b)]
    signs = [1.0, 1.0, -1.0, -1.0]
    for (i0, i1, axis), sg in zip(edges, signs):
        avg = 0.5 * (vals[i0][:, axis] + vals[i1][:, axis])
        circ = circ + sg * avg * h
    res = np.abs(circ) / (h * h)
    return float(res[0]) if np.asarray(u).ndim == 1 else res


def wirtinger_compat_residual(h_samples, step):
    """Maximum residual of the complex compatibility identities for gridded
    fields h_j, j = 1..m, sampled on a uniform grid over (x1, y1, ..., ym).

    h_samples: complex array of shape (G1, ..., G2m, m).
    """
    h = np.asarray(h_samples, dtype=complex)
    m = h.shape[-1]
    grads_z = []
    grads_zb = []
    interior = tuple(slice(1, -1) for _ in range(2 * m))
    for j in range(m):
        Dx = np.gradient(h, step, axis=2 * j)
        Dy = np.gradient(h, step, axis=2 * j + 1)
        grads_z.append((0.5 * (Dx - 1j * Dy))[interior])
        grads_zb.append((0.5 * (Dx + 1j * Dy))[interior])
    worst = 0.0
    for i in range(m):
        for j in range(m):
            worst = max(worst, float(np.max(np.abs(
                grads_zb[i][..., j] - grads_zb[j][..., i]))))
            worst = max(worst, float(np.max(np.abs(
                grads_z[i][..., j] - np.conj(grads_z[j][..., i])))))
    return worst


def nu_identity_residuals(chart: SigmaChart, u, h, strict=True,
                          null_tol=None):
    """Residuals of the three transversal-field identities at chart point u.

    r1, r2: pointwise identities Re/Im h_j = (1/4) g(nabla_nu nu, X_j / Y_j);
    r3: the derivative identity, discretized with chart steps along X_j and
    ambient collar steps along the J-companion Y_j.

    strict=True raises HypothesisFail when the complexified x-direction is
    not Levi-null within null_tol (the identity set r1/r2 holds regardless;
    r3 discretizes the closedness statement that needs the hypothesis).
    """
    U = np.atleast_2d(np.asarray(u, dtype=float))
    dom = chart.domain
    P = _snap(chart, U)
    jet = delta_jet(dom, P, order=2)
    N = normal_n(jet)
    xi = chart.tangents(U)          # (K, m, n)
    if chart.kind == "complex":
        # coordinate fields are already (1,0); X_j realifies them
        pass
    levi = np.einsum("kij,kmi,kmj->km", jet.mixed, xi, np.conj(xi)).real
    if null_tol is None:
        null_tol = 1e-3 * float(np.max(np.abs(jet.mixed)))
    if strict and np.any(np.abs(levi) > null_tol):
        raise HypothesisFail(
            f"Levi form on the complexified chart direction reaches "
            f"{float(np.max(np.abs(levi))):.3e} (tol {null_tol:.3e})")
    hvals = np.einsum("kij,ki,kmj->km", jet.mixed, N, np.conj(xi))
    gx, gy = nu_pairings(dom, jet, xi)
    r1 = np.abs(hvals.real - 0.25 * gx).max(axis=1)
    r2 = np.abs(hvals.imag - 0.25 * gy).max(axis=1)

    # r3: Re(d/dz_j h_j) vs (1/8)(D_X g(.,X_j) + D_Y g(.,Y_j))
    K, m, n = xi.shape
    r3 = np.zeros(K)
    ha = 1e-3 * dom.scale
    for j in range(m):
        if chart.kind == "complex":
            dUx = np.zeros_like(U)
            dUx[:, 2 * j] = h
            dUy = np.zeros_like(U)
            dUy[:, 2 * j + 1] = h
            hxp, gxp, _ = _h_and_g(chart, U + dUx, j)
            hxm, gxm, _ = _h_and_g(chart, U - dUx, j)
            hyp, _, gyp = _h_and_g(chart, U + dUy, j)
            hym, _, gym = _h_and_g(chart, U - dUy, j)
            Dx_h = (hxp - hxm) / (2 * h)
            Dy_h = (hyp - hym) / (2 * h)
            Dx_gx = (gxp - gxm) / (2 * h)
            Dy_gy = (gyp - gym) / (2 * h)
        else:
            dUx = np.zeros_like(U)
            dUx[:, j] = h
            hxp, gxp, _ = _h_and_g(chart, U + dUx, j)
            hxm, gxm, _ = _h_and_g(chart, U - dUx, j)
            Dx_h = (hxp - hxm) / (2 * h)
            Dx_gx = (gxp - gxm) / (2 * h)
            # ambient straight-line steps along the J-companion (may leave
            # the boundary; the collar fields stay defined)
            Yreal = _realify(1j * xi[:, j, :])
            nrm = np.linalg.norm(Yreal, axis=1, keepdims=True)
            Yhat = Yreal / np.maximum(nrm, 1e-300)
            hyp, _, gyp = _h_and_g_ambient(chart, P + ha * Yhat, xi[:, j, :])
            hym, _, gym = _h_and_g_ambient(chart, P - ha * Yhat, xi[:, j, :])
            rate = nrm[:, 0] / (2.0 * ha)
            Dy_h = (hyp - hym) * rate
            Dy_gy = (gyp - gym) * rate
        dz_h = 0.5 * (Dx_h - 1j * Dy_h)
        rhs = 0.125 * (Dx_gx + Dy_gy)
        r3 = np.maximum(r3, np.abs(dz_h.real - rhs))
    if np.asarray(u).ndim == 1:
        return float(r1[0]), float(r2[0]), float(r3[0])
    return r1, r2, r3


def _realify(xi):
    out = np.empty(xi.shape[:-1] + (2 * xi.shape[-1],))
    out[..., 0::2] = xi.real
    out[..., 1::2] = xi.imag
    return out


def _h_and_g(chart, U, j):
    """(h_j, g(.,X_j), g(.,Y_j)) at chart parameters U for direction j."""
    dom = chart.domain
    P = _snap(chart, U)
    jet = delta_jet(dom, P, order=2)
    N = normal_n(jet)
    xi = chart.tangents(U)[:, j, :]
    hj = np.einsum("kij,ki,kj->k", jet.mixed, N, np.conj(xi))
    gx, gy = nu_pairings(dom, jet, xi)
    return hj, gx, gy


def _h_and_g_ambient(chart, P, xi_frozen):
    """Collar fields evaluated at ambient points with a frozen direction."""
    dom = chart.domain
    jet = delta_jet(dom, P, order=2)
    N = normal_n(jet)
    hj = np.einsum("kij,ki,kj->k", jet.mixed, N, np.conj(xi_frozen))
    gx, gy = nu_pairings(dom, jet, xi_frozen)
    return hj, gx, gy


# ---------------------------------------------------------------------------
# sampled grids
# ---------------------------------------------------------------------------

@dataclass
class OneFormSample:
    """1-form components on a chart grid with residual fields."""

    chart: SigmaChart
    params: np.ndarray          # (K, p)
    shape: tuple
    comps: np.ndarray           # (K, p) parameter-aligned coefficients
    positions: np.ndarray       # (K, 2n)
    closed_residual: np.ndarray | None = None
    compat_residual: np.ndarray | None = None

    @staticmethod
    def from_chart(chart: SigmaChart, res=None, with_residuals=True):
        U, shape = chart.grid(res)
        if chart.kind == "complex":
            comps = theta_components(chart, U)
        else:
            comps = np.atleast_2d(real_one_form_at(chart, U))
            comps = comps.reshape(U.shape[0], chart.m)
        sample = OneFormSample(chart=chart, params=U, shape=shape,
                               comps=comps,
                               positions=chart.embed_batch(U))
        if with_residuals and chart.kind == "complex" and chart.params_dim >= 2:
            hstep = float((chart.hi[0] - chart.lo[0])) / (shape[0] - 1)
            interior = U[(U[:, 0] < chart.hi[0] - hstep) &
                         (U[:, 1] < chart.hi[1] - hstep)]
            if interior.size:
                sample.closed_residual = dtheta_residual(
                    chart, interior, hstep, plane=(0, 1))
            inner = U[np.all((U > chart.lo + hstep) &
                             (U < chart.hi - hstep), axis=1)]
            if inner.size:
                c1, c2 = chart_compat_residuals(chart, inner, hstep / 2)
                sample.compat_residual = np.maximum(c1, c2)
        return sample

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            p = self.params.shape[1]
            header = [f"u{a}" for a in range(p)] \
                + [f"pos{a}" for a in range(self.positions.shape[1])] \
                + [f"comp{a}" for a in range(self.comps.shape[1])]
            w.writerow(header)
            for k in range(self.params.shape[0]):
                row = [f"{v:.12e}" for v in self.params[k]] + \
                      [f"{v:.12e}" for v in self.positions[k]] + \
                      [f"{v:.12e}" for v in self.comps[k]]
                w.writerow(row)
