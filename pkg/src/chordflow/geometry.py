"""Charted analytic submanifolds of R^n.

Manifolds are unions of closed-form charts built from jet primitives, so
values, Jacobians and Hessians are exact. Provided builders: circles and
perturbed closed curves, spheres (hemisphere atlas), standing tori, affine
images, products, disjoint unions, the Hopf link, the sphere-times-M family
K0, and its connected-sum companion K1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from . import algebra
from .jets import Jet, const, seed, smoothstep, stack


# -- charts -------------------------------------------------------------------

@dataclass
class Chart:
    name: str
    dim: int
    lo: np.ndarray
    hi: np.ndarray
    periodic: np.ndarray
    fn: Callable[[list[Jet]], list[Jet]]
    valid: Callable[[np.ndarray], np.ndarray] | None = None
    piece: str = ""
    normal_fields: dict[str, Callable[[list[Jet]], list[list[Jet]]]] = field(default_factory=dict)

    def contains(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        ok = np.ones(u.shape[0], dtype=bool)
        for i in range(self.dim):
            if not self.periodic[i]:
                ok &= (u[:, i] >= self.lo[i]) & (u[:, i] <= self.hi[i])
        if self.valid is not None:
            ok &= self.valid(u)
        return ok

    def wrap(self, u: np.ndarray) -> np.ndarray:
        u = np.array(u, dtype=float, copy=True)
        for i in range(self.dim):
            if self.periodic[i]:
                span = self.hi[i] - self.lo[i]
                u[..., i] = self.lo[i] + np.mod(u[..., i] - self.lo[i], span)
        return u


class ChartedManifold:
    """Compact submanifold of R^n given by a finite atlas of analytic charts."""

    def __init__(self, ambient_dim: int, intrinsic_dim: int, charts: list[Chart],
                 seam_tolerance: float = 1e-8, betti_spec=None, meta: dict | None = None):
        self.ambient_dim = ambient_dim
        self.intrinsic_dim = intrinsic_dim
        self.charts = charts
        self.seam_tolerance = seam_tolerance
        self.betti_spec = betti_spec
        self.meta = meta or {}

    @property
    def codim(self) -> int:
        return self.ambient_dim - self.intrinsic_dim

    def eval(self, chart_id: int, u: np.ndarray, order: int = 2, check: bool = True):
        """Point, Jacobian and (order=2) Hessian of the chart immersion.

        Input u of shape (m,) or (B, m); outputs q (B,n), jac (B,n,m),
        hess (B,n,m,m) with the batch axis kept. ``check=False`` skips the
        domain test (hot loops that wrap beforehand).
        """
        chart = self.charts[chart_id]
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[-1] != chart.dim:
            raise ValueError("chart coordinate dimension mismatch")
        u = chart.wrap(u)
        if check and not chart.contains(u).all():
            raise ValueError(f"point outside domain of chart {chart.name!r}")
        comps = chart.fn(seed(u, order=order))
        q, jac, hess = stack(comps)
        return q, jac, hess

    def point(self, chart_id: int, u: np.ndarray) -> np.ndarray:
        return self.eval(chart_id, u, order=1)[0]

    def tangent_frame(self, chart_id: int, u: np.ndarray):
        """Orthonormal tangent and normal frames at chart points (Gram-Schmidt)."""
        q, jac, _ = self.eval(chart_id, u, order=1)
        tans, nors = [], []
        for b in range(q.shape[0]):
            J = jac[b]
            qt, _ = np.linalg.qr(J)
            if np.linalg.matrix_rank(J, tol=1e-10) < self.intrinsic_dim:
                raise ValueError("rank-deficient immersion differential")
            # complete to an ambient orthonormal basis
            full = np.linalg.qr(np.concatenate([qt, np.eye(self.ambient_dim)], axis=1))[0]
            tans.append(full[:, : self.intrinsic_dim].T)
            nors.append(full[:, self.intrinsic_dim : self.ambient_dim].T)
        return np.array(tans), np.array(nors)

    def sample(self, per_dim: int = 12, rng: np.random.Generator | None = None):
        """Valid chart-point batches, one (chart_id, u) pair per chart."""
        out = []
        for cid, chart in enumerate(self.charts):
            axes = []
            for i in range(chart.dim):
                hiror = chart.hi[i] - (0.0 if chart.periodic[i] else 1e-9)
                pts = np.linspace(chart.lo[i] + 1e-9, hiror, per_dim,
                                  endpoint=not chart.periodic[i])
                axes.append(pts)
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, chart.dim)
            if rng is not None:
                step = np.array([(chart.hi[i] - chart.lo[i]) / per_dim for i in range(chart.dim)])
                grid = chart.wrap(grid + rng.uniform(-0.3, 0.3, grid.shape) * step)
            grid = grid[chart.contains(grid)]
            if len(grid):
                out.append((cid, grid))
        return out

    def sample_points(self, per_dim: int = 12, rng=None) -> np.ndarray:
        qs = [self.point(cid, u) for cid, u in self.sample(per_dim, rng)]
        return np.concatenate(qs, axis=0)

    # -- nearest-point queries ------------------------------------------------

    def distance_to(self, x: np.ndarray, per_dim: int = 24, refine: int = 25):
        """Distance from ambient point(s) x to the manifold, with nearest data.

        Coarse grid over every chart followed by projected-Newton polish.
        Returns (dist (B,), chart_id (B,), u (B, m)).
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        best_d = np.full(x.shape[0], np.inf)
        best_c = np.zeros(x.shape[0], dtype=int)
        best_u = np.zeros((x.shape[0], self.intrinsic_dim))
        for cid, grid in self.sample(per_dim):
            q = self.point(cid, grid)
            d2 = ((x[:, None, :] - q[None, :, :]) ** 2).sum(-1)
            idx = d2.argmin(axis=1)
            u0 = grid[idx]
            u, d = self._polish_nearest(cid, u0, x, refine)
            better = d < best_d
            best_d[better] = d[better]
            best_c[better] = cid
            best_u[better] = u[better]
        return best_d, best_c, best_u

    def _polish_nearest(self, cid, u0, x, iters):
        chart = self.charts[cid]
        u = chart.wrap(u0.copy())
        for _ in range(iters):
            q, jac, hess = self.eval(cid, u, order=2)
            r = q - x
            g = np.einsum("bnm,bn->bm", jac, r)
            H = np.einsum("bni,bnj->bij", jac, jac) + np.einsum("bnij,bn->bij", hess, r)
            H = H + 1e-12 * np.eye(chart.dim)
            try:
                step = np.linalg.solve(H, g[..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = g
            nrm = np.linalg.norm(step, axis=1, keepdims=True)
            step = np.where(nrm > 0.3, step * 0.3 / np.maximum(nrm, 1e-30), step)
            u_new = chart.wrap(u - step)
            ok = chart.contains(u_new)
            u[ok] = u_new[ok]
        q = self.point(cid, u)
        return u, np.linalg.norm(q - x, axis=1)

    # -- diagnostics ----------------------------------------------------------

    def frame_residuals(self, per_dim: int = 8) -> float:
        worst = 0.0
        for cid, grid in self.sample(per_dim):
            tan, nor = self.tangent_frame(cid, grid[: min(len(grid), 64)])
            frames = np.concatenate([tan, nor], axis=1)
            gram = np.einsum("bin,bjn->bij", frames, frames)
            worst = max(worst, float(np.abs(gram - np.eye(self.ambient_dim)).max()))
        return worst

    def min_immersion_rank(self, per_dim: int = 8) -> int:
        r = self.intrinsic_dim
        for cid, grid in self.sample(per_dim):
            _, jac, _ = self.eval(cid, grid, order=1)
            sv = np.linalg.svd(jac, compute_uv=False)
            r = min(r, int((sv > 1e-9).sum(axis=1).min()))
        return r


# -- elementary builders -------------------------------------------------------

def _embed(components: list[Jet], ambient: int, offsets: list[int], like: Jet) -> list[Jet]:
    from .jets import zero
    z = zero(like)  # shared; jets are never mutated in place
    out = [z] * ambient
    for c, o in zip(components, offsets):
        out[o] = c
    return out


def circle(ambient: int = 3, center=None, radius: float = 1.0,
           axes: tuple[int, int] = (0, 1), name: str = "circle") -> ChartedManifold:
    center = np.zeros(ambient) if center is None else np.asarray(center, float)
    i, j = axes

    def fn(u):
        (t,) = u
        from .jets import zero
        z = zero(t)
        comps = [(z + center[k]) if center[k] != 0.0 else z for k in range(ambient)]
        comps[i] = radius * t.cos() + center[i]
        comps[j] = radius * t.sin() + center[j]
        return comps

    def normals(u):
        (t,) = u
        fields = [_embed([t.cos(), t.sin()], ambient, [i, j], t)]
        for k in range(ambient):
            if k not in (i, j):
                fields.append(_embed([const(1.0, t)], ambient, [k], t))
        return fields

    chart = Chart(name, 1, np.array([0.0]), np.array([2 * np.pi]),
                  np.array([True]), fn, normal_fields={"all": normals})
    return ChartedManifold(ambient, 1, [chart], betti_spec="S1",
                           meta={"kind": "circle", "center": center, "radius": radius, "axes": axes})


def curve_from_modes(ambient: int, radial, height, axes=(0, 1), normal_axis: int = 2,
                     radius: float = 1.0, name: str = "curve") -> ChartedManifold:
    """Closed curve r(θ)(cos,sin) + z(θ)·e_k with trig-polynomial r-1 and z."""
    i, j = axes

    def trig(t: Jet, modes) -> Jet:
        out = const(0.0, t)
        for k, amp, phase in modes:
            out = out + amp * (t * float(k) + phase).cos()
        return out

    def fn(u):
        (t,) = u
        r = trig(t, radial) + radius
        comps = [const(0.0, t) for _ in range(ambient)]
        comps[i] = r * t.cos()
        comps[j] = r * t.sin()
        comps[normal_axis] = trig(t, height)
        return comps

    chart = Chart(name, 1, np.array([0.0]), np.array([2 * np.pi]), np.array([True]), fn)
    return ChartedManifold(ambient, 1, [chart], betti_spec="S1", meta={"kind": "curve"})


def sphere(m: int, ambient: int | None = None, radius: float = 1.0,
           offsets: list[int] | None = None, center=None, name: str = "sphere",
           cover: float = 0.92) -> ChartedManifold:
    """Round S^m of given radius, hemisphere atlas of 2(m+1) charts."""
    amb_block = m + 1
    ambient = amb_block if ambient is None else ambient
    offsets = list(range(amb_block)) if offsets is None else offsets
    center = np.zeros(ambient) if center is None else np.asarray(center, float)
    charts = []
    for axis in range(m + 1):
        for sign in (+1.0, -1.0):
            rest = [k for k in range(m + 1) if k != axis]

            def fn(u, axis=axis, sign=sign, rest=rest):
                s2 = const(0.0, u[0])
                for ui in u:
                    s2 = s2 + ui * ui
                pole = sign * (const(radius * radius, u[0]) - s2).sqrt()
                block = [None] * (m + 1)
                block[axis] = pole
                for ui, k in zip(u, rest):
                    block[k] = ui
                comps = [const(center[k], u[0]) for k in range(ambient)]
                for k in range(m + 1):
                    comps[offsets[k]] = comps[offsets[k]] + block[k]
                return comps

            def valid(u, cov=cover * radius):
                return (u ** 2).sum(axis=1) <= cov * cov

            def normals(u, axis=axis, sign=sign, rest=rest):
                s2 = const(0.0, u[0])
                for ui in u:
                    s2 = s2 + ui * ui
                pole = sign * (const(radius * radius, u[0]) - s2).sqrt()
                block = [None] * (m + 1)
                block[axis] = pole * (1.0 / radius)
                for ui, k in zip(u, rest):
                    block[k] = ui * (1.0 / radius)
                rad = [const(0.0, u[0]) for _ in range(ambient)]
                for k in range(m + 1):
                    rad[offsets[k]] = block[k]
                fields = [rad]
                for k in range(ambient):
                    if k not in offsets:
                        fields.append([const(1.0 if t == k else 0.0, u[0]) for t in range(ambient)])
                return fields

            lim = cover * radius
            charts.append(Chart(f"{name}[{axis}{'+' if sign > 0 else '-'}]", m,
                                -lim * np.ones(m), lim * np.ones(m),
                                np.zeros(m, dtype=bool), fn, valid=valid,
                                normal_fields={"all": normals}))
    return ChartedManifold(ambient, m, charts, betti_spec=f"S{m}",
                           meta={"kind": "sphere", "m": m, "radius": radius,
                                 "offsets": offsets, "center": center})


def standing_torus(ambient: int = 3, ring: float = 2.0 / 3.0, tube: float = 1.0 / 3.0,
                   name: str = "T2") -> ChartedManifold:
    """Torus about the first of its last three coordinates.

    max |w| = ring+tube and the height (last coordinate) attains its maximum
    ring+tube at the single point (0,...,0,ring+tube); with ring+tube = 1 this
    satisfies the K0-family normalization.
    """
    o = ambient - 3  # torus occupies the last three coordinates

    def fn(u):
        th, ph = u
        ring_r = const(ring, th) + tube * ph.cos()
        a = tube * ph.sin()
        b = ring_r * th.cos()
        c = ring_r * th.sin()
        return _embed([a, b, c], ambient, [o, o + 1, o + 2], th)

    def normals(u):
        th, ph = u
        nx = ph.sin()
        ny = ph.cos() * th.cos()
        nz = ph.cos() * th.sin()
        fields = [_embed([nx, ny, nz], ambient, [o, o + 1, o + 2], th)]
        for k in range(o):
            fields.append([const(1.0 if t == k else 0.0, th) for t in range(ambient)])
        return fields

    chart = Chart(name, 2, np.zeros(2), 2 * np.pi * np.ones(2),
                  np.ones(2, dtype=bool), fn, normal_fields={"all": normals})
    return ChartedManifold(ambient, 2, [chart], betti_spec="T2",
                           meta={"kind": "standing_torus", "ring": ring, "tube": tube,
                                 "top_chart_u": np.array([np.pi / 2, 0.0])})


def standing_circle(ambient: int = 2, name: str = "M-circle") -> ChartedManifold:
    """Unit circle in the last two coordinates; height max at (0,..,0,1)."""
    o = ambient - 2

    def fn(u):
        (t,) = u
        return _embed([t.cos(), t.sin()], ambient, [o, o + 1], t)

    def normals(u):
        (t,) = u
        fields = [_embed([t.cos(), t.sin()], ambient, [o, o + 1], t)]
        for k in range(o):
            fields.append([const(1.0 if m == k else 0.0, t) for m in range(ambient)])
        return fields

    chart = Chart(name, 1, np.array([0.0]), np.array([2 * np.pi]), np.array([True]),
                  fn, normal_fields={"all": normals})
    return ChartedManifold(ambient, 1, [chart], betti_spec="S1",
                           meta={"kind": "standing_circle", "top_chart_u": np.array([np.pi / 2])})


def affine_image(m: ChartedManifold, A: np.ndarray, b=None, name: str = "affine") -> ChartedManifold:
    A = np.asarray(A, float)
    n_out = A.shape[0]
    b = np.zeros(n_out) if b is None else np.asarray(b, float)
    charts = []
    for ch in m.charts:
        def fn(u, base=ch.fn):
            comps = base(u)
            out = []
            for i in range(n_out):
                acc = const(b[i], comps[0])
                for j, c in enumerate(comps):
                    if A[i, j] != 0.0:
                        acc = acc + A[i, j] * c
                out.append(acc)
            return out
        charts.append(Chart(f"{name}:{ch.name}", ch.dim, ch.lo, ch.hi, ch.periodic,
                            fn, valid=ch.valid, piece=ch.piece))
    return ChartedManifold(n_out, m.intrinsic_dim, charts, m.seam_tolerance,
                           betti_spec=m.betti_spec, meta={"kind": "affine", "base": m.meta})


def ellipsoid(semi_axes=(1.0, 1.2, 1.5)) -> ChartedManifold:
    s = sphere(2)
    e = affine_image(s, np.diag(semi_axes), name="ellipsoid")
    e.meta = {"kind": "ellipsoid", "semi_axes": tuple(semi_axes)}
    e.betti_spec = "S2"
    return e


def product(a: ChartedManifold, b: ChartedManifold, name: str = "prod") -> ChartedManifold:
    n = a.ambient_dim + b.ambient_dim
    charts = []
    for ca in a.charts:
        for cb in b.charts:
            def fn(u, ca=ca, cb=cb):
                ua, ub = u[: ca.dim], u[ca.dim :]
                qa = ca.fn(ua)
                qb = cb.fn(ub)
                return qa + qb

            def valid(u, ca=ca, cb=cb):
                ok = np.ones(u.shape[0], dtype=bool)
                if ca.valid is not None:
                    ok &= ca.valid(u[:, : ca.dim])
                if cb.valid is not None:
                    ok &= cb.valid(u[:, ca.dim :])
                return ok

            normal_fields = {}
            if "all" in ca.normal_fields or "all" in cb.normal_fields:
                normal_fields = {"all": _product_normals(ca, cb, a.ambient_dim, b.ambient_dim)}

            charts.append(Chart(f"{name}({ca.name},{cb.name})", ca.dim + cb.dim,
                                np.concatenate([ca.lo, cb.lo]), np.concatenate([ca.hi, cb.hi]),
                                np.concatenate([ca.periodic, cb.periodic]), fn,
                                valid=valid, normal_fields=normal_fields))
    spec = [a.betti_spec, b.betti_spec]
    return ChartedManifold(n, a.intrinsic_dim + b.intrinsic_dim, charts,
                           min(a.seam_tolerance, b.seam_tolerance), betti_spec=spec,
                           meta={"kind": "product", "factors": (a.meta, b.meta),
                                 "split": a.ambient_dim})


def _product_normals(ca: Chart, cb: Chart, na: int, nb: int):
    """Factor normal fields extended by zero: still normal to the product.

    The split jets already carry gradients over the full product coordinates,
    so no widening is needed.
    """
    def normals(u):
        ua, ub = u[: ca.dim], u[ca.dim :]
        zero = const(0.0, u[0])
        fields = []
        if "all" in ca.normal_fields:
            for f in ca.normal_fields["all"](ua):
                fields.append(list(f) + [zero] * nb)
        if "all" in cb.normal_fields:
            for f in cb.normal_fields["all"](ub):
                fields.append([zero] * na + list(f))
        return fields
    return normals


def disjoint_union(a: ChartedManifold, b: ChartedManifold) -> ChartedManifold:
    if a.ambient_dim != b.ambient_dim or a.intrinsic_dim != b.intrinsic_dim:
        raise ValueError("disjoint union needs equal ambient and intrinsic dimensions")
    charts = []
    for i, m in enumerate((a, b)):
        for ch in m.charts:
            charts.append(Chart(f"c{i}:{ch.name}", ch.dim, ch.lo, ch.hi, ch.periodic,
                                ch.fn, valid=ch.valid, piece=f"component{i}",
                                normal_fields=ch.normal_fields))
    return ChartedManifold(a.ambient_dim, a.intrinsic_dim, charts,
                           min(a.seam_tolerance, b.seam_tolerance),
                           betti_spec=("disjoint", a.betti_spec, b.betti_spec),
                           meta={"kind": "disjoint", "components": (a.meta, b.meta),
                                 "component_charts": (len(a.charts), len(b.charts))})


def build_hopf_link() -> ChartedManifold:
    """The Hopf link: unit xy-circle and the unit yz-circle through the origin
    centered at (0,1,0)."""
    c1 = circle(3, center=[0.0, 0.0, 0.0], radius=1.0, axes=(0, 1), name="hopf1")
    c2 = circle(3, center=[0.0, 1.0, 0.0], radius=1.0, axes=(1, 2), name="hopf2")
    m = disjoint_union(c1, c2)
    m.meta["kind"] = "hopf_link"
    return m


# -- normal sections and perturbations -----------------------------------------

@dataclass
class TrigPoly:
    """Sum of amp·cos(<k,u> + phase) terms over chart coordinates."""

    terms: list[tuple[tuple, float, float]]

    def __call__(self, u: list[Jet]) -> Jet:
        out = const(0.0, u[0])
        for k, amp, phase in self.terms:
            arg = const(phase, u[0])
            for ki, ui in zip(k, u):
                if ki:
                    arg = arg + float(ki) * ui
            out = out + amp * arg.cos()
        return out

    def sup_bound(self) -> float:
        return float(sum(abs(a) for _, a, _ in self.terms))


@dataclass
class NormalSection:
    """Coefficients against a chart's closed-form normal fields.

    ``coefficients[field_index]`` is a TrigPoly in the chart coordinates.
    """

    coefficients: dict[int, TrigPoly]

    def sup_norm_bound(self) -> float:
        vals = [c.sup_bound() for c in self.coefficients.values()]
        return float(np.sqrt(np.sum(np.square(vals)))) if vals else 0.0


def random_normal_section(manifold: ChartedManifold, rng: np.random.Generator,
                          amplitude: float = 0.05, max_mode: int = 3) -> NormalSection:
    chart = manifold.charts[0]
    if "all" not in chart.normal_fields:
        raise ValueError("manifold has no registered closed-form normal fields")
    probe = seed(np.zeros((1, chart.dim)))
    n_fields = len(chart.normal_fields["all"](probe))
    coeffs = {}
    for fi in range(n_fields):
        terms = []
        for _ in range(3):
            k = tuple(int(rng.integers(0, max_mode + 1)) for _ in range(chart.dim))
            if not any(k):
                k = tuple(1 if i == 0 else 0 for i in range(chart.dim))
            terms.append((k, float(rng.normal()) * amplitude / 3.0, float(rng.uniform(0, 2 * np.pi))))
        coeffs[fi] = TrigPoly(terms)
    return NormalSection(coeffs)


def perturb(manifold: ChartedManifold, section: NormalSection | None,
            max_sup: float | None = None) -> ChartedManifold:
    """K_sigma = {q + sigma(q)}: add the normal section to every chart.

    Only manifolds whose charts carry closed-form normal fields are
    supported; this keeps all derivatives exact.
    """
    if section is None or not section.coefficients:
        return manifold
    if max_sup is not None and section.sup_norm_bound() > max_sup:
        raise ValueError(f"sup|sigma| bound {section.sup_norm_bound():.3g} exceeds r_K/2 = {max_sup:.3g}")
    charts = []
    for ch in manifold.charts:
        if "all" not in ch.normal_fields:
            raise ValueError(f"chart {ch.name!r} has no closed-form normal fields; "
                             "cannot build exact jets for this perturbation")

        def fn(u, base=ch.fn, nf=ch.normal_fields["all"]):
            comps = base(u)
            fields = nf(u)
            for fi, poly in section.coefficients.items():
                c = poly(u)
                for k in range(len(comps)):
                    comps[k] = comps[k] + c * fields[fi][k]
            return comps

        charts.append(Chart(ch.name + "+sigma", ch.dim, ch.lo, ch.hi, ch.periodic,
                            fn, valid=ch.valid, piece=ch.piece, normal_fields=ch.normal_fields))
    return ChartedManifold(manifold.ambient_dim, manifold.intrinsic_dim, charts,
                           manifold.seam_tolerance, betti_spec=manifold.betti_spec,
                           meta=dict(manifold.meta, perturbed=True))


def perturb_component(link: ChartedManifold, sections: list[NormalSection | None]) -> ChartedManifold:
    """Perturb each component of a disjoint union independently."""
    ca, cb = link.meta["component_charts"]
    charts = []
    for idx, ch in enumerate(link.charts):
        section = sections[0] if idx < ca else sections[1]
        if section is None:
            charts.append(ch)
            continue
        def fn(u, base=ch.fn, nf=ch.normal_fields["all"], sec=section):
            comps = base(u)
            fields = nf(u)
            for fi, poly in sec.coefficients.items():
                c = poly(u)
                for k in range(len(comps)):
                    comps[k] = comps[k] + c * fields[fi][k]
            return comps
        charts.append(Chart(ch.name + "+sigma", ch.dim, ch.lo, ch.hi, ch.periodic, fn,
                            valid=ch.valid, piece=ch.piece, normal_fields=ch.normal_fields))
    return ChartedManifold(link.ambient_dim, link.intrinsic_dim, charts,
                           link.seam_tolerance, betti_spec=link.betti_spec,
                           meta=dict(link.meta, perturbed=True))


# -- the K0 family --------------------------------------------------------------

def build_K0(n: int, d: int, M: ChartedManifold) -> ChartedManifold:
    """K0 = S^{d-1} x M in R^d x R^{n-d}.

    M must be a compact connected codimension-(d-1) submanifold of R^{n-d},
    normalized: max|w| <= 1 and the last-coordinate height attains max 1 at
    the single point (0,...,0,1).
    """
    if M.ambient_dim != n - d:
        raise ValueError(f"M must sit in R^{n-d}")
    if M.ambient_dim - M.intrinsic_dim != d - 1:
        raise ValueError("M must have codimension d-1 in R^{n-d}")
    _check_M_normalization(M)
    if d == 2:
        s = circle(ambient=2, radius=1.0, axes=(0, 1), name="S1")
        s.meta.update(kind="sphere_factor", m=1)
    else:
        s = sphere(d - 1, ambient=d, radius=1.0, name=f"S{d-1}")
    Mshift = affine_image(M, np.eye(n - d), name="M")
    Mshift.meta = M.meta
    Mshift.betti_spec = M.betti_spec
    for cnew, cold in zip(Mshift.charts, M.charts):
        cnew.normal_fields = cold.normal_fields
    k0 = product(s, Mshift, name="K0")
    k0.meta.update(kind="K0", n=n, d=d, sphere_meta=s.meta, M_meta=M.meta,
                   M_betti=M.betti_spec)
    return k0


def _check_M_normalization(M: ChartedManifold, samples: int = 14) -> None:
    pts = M.sample_points(samples)
    if np.linalg.norm(pts, axis=1).max() > 1.0 + 1e-6:
        raise ValueError("M normalization failed: max|w| > 1")
    top = np.zeros(M.ambient_dim)
    top[-1] = 1.0
    d, _, _ = M.distance_to(top[None, :])
    if d[0] > 1e-6:
        raise ValueError("M normalization failed: (0,...,0,1) not on M")
    heights = pts[:, -1]
    near_top = pts[np.abs(heights - 1.0) < 5e-3]
    if len(near_top) and np.linalg.norm(near_top - top, axis=1).max() > 0.2:
        raise ValueError("M normalization failed: height max not unique")


def k0_shift_section_margin(k0: ChartedManifold, shift: float) -> float:
    """Margin of Prop-5.7-style disjointness: K_{0,sigma} has sphere radius 1+shift."""
    return shift


def shifted_K0(k0: ChartedManifold, shift: float) -> ChartedManifold:
    """K_{0,sigma} with sigma(v,w) = (shift*v, 0): the scaled-sphere product."""
    n = k0.ambient_dim
    split = k0.meta["split"]
    A = np.eye(n)
    A[:split, :split] *= 1.0 + shift
    out = affine_image(k0, A, name="K0shift")
    out.meta = dict(k0.meta, kind="K0_shifted", shift=shift)
    out.betti_spec = k0.betti_spec
    return out


# -- the K1 connected sum ---------------------------------------------------------

@dataclass
class ConnectedSumRecipe:
    """Data of the connected sum of K0 = S^{d-1} x M with the sphere S.

    gamma(s) = (e_1, (1+2s) e_last) joins p0 = (e_1, e_last) in K0 to
    p1 = (e_1, 3 e_last) in S; the frame path b(t) rotates T_{p0}K0 to
    T_{p1}S inside the orthogonal complement of gamma'.
    """

    n: int
    d: int
    M: ChartedManifold
    r0: float = 0.05
    height_cut: float = 0.8        # the level a with h^{-1}([a,1]) inside B
    flat_pad: float = 0.2          # flattening: exactly flat for |u| <= (2+pad) r0
    blend_pad: float = 0.8         # original beyond (2+flat_pad+blend_pad) r0

    def __post_init__(self):
        if self.M.ambient_dim != self.n - self.d:
            raise ValueError("M must sit in R^{n-d}")
        if "top_chart_u" not in self.M.meta:
            raise ValueError("M must declare its height-maximum chart point")


def _frame_path_data(n: int, d: int, M: ChartedManifold):
    """Rotation data for b(t): trig expansion of expm(t log Omega) b(0).

    b(0) spans T_{p0}K0 (sphere tangent at e_1 plus M tangent at the top),
    b(1) spans T_{p1}S (R e_1 plus the height-orthogonal block); both lie in
    the complement of gamma' = e_{n-1}.
    """
    b0 = np.zeros((n, n - d))
    for i in range(d - 1):
        b0[1 + i, i] = 1.0
    top_u = M.meta["top_chart_u"]
    _, jac, _ = M.eval(0, top_u[None, :], order=1)
    jm = jac[0]  # (n-d, dim M); columns orthogonal at the height maximum
    scales = np.linalg.norm(jm, axis=0)
    cols = jm / scales[None, :]
    if np.abs(cols.T @ cols - np.eye(cols.shape[1])).max() > 1e-9:
        raise ValueError("M chart derivatives not orthogonal at the top point")
    for k in range(cols.shape[1]):
        b0[d:, d - 1 + k] = cols[:, k]
    b1 = np.zeros((n, n - d))
    b1[0, 0] = 1.0
    for k in range(n - d - 1):
        b1[d + k, 1 + k] = 1.0
    # orthogonal Omega with Omega b0_i = b1_i exactly and Omega e_{n-1} = e_{n-1}
    # (so the rotated frames stay orthogonal to gamma' for every t)
    full0 = _complete_frame(b0, n)
    full1 = _complete_frame(b1, n)
    omega = full1 @ full0.T
    if np.linalg.det(omega) < 0:
        full1[:, n - 2] *= -1.0
        omega = full1 @ full0.T
    A = _so_log(omega)
    if np.linalg.norm(scipy.linalg.expm(A) - omega) > 1e-8 \
            or np.abs(omega @ b0 - b1).max() > 1e-10 \
            or np.abs(A[:, n - 1]).max() > 1e-10:
        raise RuntimeError("frame-path rotation log failed")
    # skew Schur: A = Q T Q^T with 2x2 rotation blocks of frequencies omega_j
    T, Q = scipy.linalg.schur(A, output="real")
    freqs, blocks = [], []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 1e-12:
            freqs.append(T[i + 1, i])
            blocks.append((i, i + 1))
            i += 2
        else:
            i += 1
    beta = Q.T @ b0  # (n, n-d) coefficients per frame vector
    return {"Q": Q, "freqs": freqs, "blocks": blocks, "beta": beta,
            "b0": b0, "b1": b1}


def _so_log(omega: np.ndarray) -> np.ndarray:
    """Real logarithm of a special orthogonal matrix.

    Works where scipy.linalg.logm goes complex: isolated -1 eigenvalues are
    paired into pi-rotation planes (possible since det = +1).
    """
    n = omega.shape[0]
    T, Q = scipy.linalg.schur(omega, output="real")
    A = np.zeros((n, n))
    minus = []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 1e-12:
            theta = np.arctan2(T[i + 1, i], T[i, i])
            A[i, i + 1] = -theta
            A[i + 1, i] = theta
            i += 2
        else:
            if T[i, i] < 0:
                minus.append(i)
            i += 1
    if len(minus) % 2:
        raise ValueError("not a rotation: odd count of -1 eigenvalues")
    for a, b in zip(minus[::2], minus[1::2]):
        A[a, b] = -np.pi
        A[b, a] = np.pi
    return Q @ A @ Q.T


def _complete_frame(b: np.ndarray, n: int) -> np.ndarray:
    """ONB of R^n of the form [b | complement in e_{n-1}^perp | e_{n-1}]."""
    cols = [b[:, k].copy() for k in range(b.shape[1])]
    for j in range(n - 1):
        v = np.zeros(n)
        v[j] = 1.0
        for c in cols:
            v -= (c @ v) * c
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            cols.append(v / nrm)
        if len(cols) == n - 1:
            break
    if len(cols) != n - 1:
        raise RuntimeError("frame completion failed")
    last = np.zeros(n)
    last[n - 1] = 1.0
    return np.stack(cols + [last], axis=1)


def _frame_at(data: dict, t: Jet) -> list[list[Jet]]:
    """b_i(t) as ambient jet vectors; components are cos/sin combinations."""
    Q = data["Q"]
    beta = data["beta"]
    n, k = beta.shape
    rotated = [[const(beta[rr, c], t) for c in range(k)] for rr in range(n)]
    for freq, (i, j) in zip(data["freqs"], data["blocks"]):
        cw = (t * freq).cos()
        sw = (t * freq).sin()
        for c in range(k):
            bi, bj = beta[i, c], beta[j, c]
            if bi == 0.0 and bj == 0.0:
                continue
            rotated[i][c] = cw * bi - sw * bj
            rotated[j][c] = sw * bi + cw * bj
    frames = []
    for c in range(k):
        vec = []
        for rr in range(n):
            acc = None
            for ss in range(n):
                if Q[rr, ss] == 0.0:
                    continue
                term = rotated[ss][c] * Q[rr, ss]
                acc = term if acc is None else acc + term
            vec.append(acc)
        frames.append(vec)
    return frames


def _k0_cap_chart(recipe: ConnectedSumRecipe, flat_r: float, blend_w: float):
    """Chart of the flattened K0 around p0 with d(chart)(0) = b(0).

    Coordinates u in a ball of radius 3 r0: sphere-factor hemisphere chart
    around e_1 paired with a rescaled M chart around the top, blended in
    ambient space toward the tangent plane inside |u| <= flat_r.
    """
    n, d, M, r0 = recipe.n, recipe.d, recipe.M, recipe.r0
    top_u = M.meta["top_chart_u"]
    _, jac, _ = M.eval(0, top_u[None, :], order=1)
    jm = jac[0]
    scales = np.linalg.norm(jm, axis=0)  # chart-speed per M coordinate
    data = _frame_path_data(n, d, M)
    b0 = data["b0"]
    p0 = np.zeros(n)
    p0[0] = 1.0
    p0[n - 1] = 1.0

    def phi(u: list[Jet]) -> list[Jet]:
        us = u[: d - 1]
        um = u[d - 1 :]
        s2 = None
        for ui in us:
            s2 = ui * ui if s2 is None else s2 + ui * ui
        comps: list[Jet] = []
        if s2 is None:
            from .jets import zero
            comps.append(const(1.0, um[0]))
        else:
            comps.append((1.0 - s2).sqrt())
        comps += list(us)
        mcoords = [top_u[k] + um[k] / scales[k] for k in range(len(um))]
        mcomps = M.charts[0].fn(mcoords)
        comps += mcomps
        return comps

    def lin(u: list[Jet]) -> list[Jet]:
        comps = []
        for rr in range(n):
            acc = const(p0[rr], u[0])
            for c in range(n - d):
                if b0[rr, c] != 0.0:
                    acc = acc + u[c] * b0[rr, c]
            comps.append(acc)
        return comps

    def fn(u: list[Jet]) -> list[Jet]:
        r2 = None
        for ui in u:
            r2 = ui * ui if r2 is None else r2 + ui * ui
        w = smoothstep((r2 * (1.0 / flat_r ** 2) - 1.0) * (flat_r ** 2 / (blend_w * (2 * flat_r + blend_w))))
        phiu = phi(u)
        linu = lin(u)
        return [lv + (pv - lv) * w for pv, lv in zip(phiu, linu)]

    return fn, p0, data


def build_K1(recipe: ConnectedSumRecipe) -> ChartedManifold:
    """Connected sum of (flattened) K0 with the flattened sphere S along gamma.

    Charts: K0 product charts away from p0, the cap/tube chart around the
    surgery region, and the flattened-sphere charts away from p1. Seam checks
    are the caller's job via k1_seam_report.
    """
    n, d, M, r0 = recipe.n, recipe.d, recipe.M, recipe.r0
    k0 = build_K0(n, d, M)
    flat_r = (2.0 + recipe.flat_pad) * r0
    blend_w = recipe.blend_pad * r0
    cap_fn, p0, frame_data = _k0_cap_chart(recipe, flat_r, blend_w)
    p1 = np.zeros(n)
    p1[0] = 1.0
    p1[n - 1] = 3.0

    # -- tube/cap chart of K1 over the annulus r0 < |u| < 3 r0 ----------------
    def a_pair(r: Jet):
        s = smoothstep((r - r0) * (1.0 / r0))
        a2 = 1.0 - s
        a1 = (3.0 * r0 - r) + s * (r * 2.0 - 3.0 * r0)
        return a1, a2

    def tube_fn(u: list[Jet]) -> list[Jet]:
        r2 = None
        for ui in u:
            r2 = ui * ui if r2 is None else r2 + ui * ui
        r = r2.sqrt()
        a1, a2 = a_pair(r)
        frames = _frame_at(frame_data, a2)
        inv_r = r.inv()
        comps = []
        for rr in range(n):
            acc = None
            for c in range(n - d):
                term = u[c] * frames[c][rr]
                acc = term if acc is None else acc + term
            acc = acc * (a1 * inv_r)
            comps.append(acc)
        # gamma(a2) = (e_1, (1+2 a2) e_last)
        comps[0] = comps[0] + 1.0
        comps[n - 1] = comps[n - 1] + (1.0 + a2 * 2.0)
        return comps

    def cap_or_tube(u: list[Jet]) -> list[Jet]:
        r2v = np.zeros_like(u[0].val)
        for ui in u:
            r2v = r2v + ui.val ** 2
        use_tube = r2v < (2.05 * r0) ** 2
        tub = tube_fn(u)
        cap = cap_fn(u)
        out = []
        mask = use_tube.astype(float)
        for tv, cv in zip(tub, cap):
            val = np.where(use_tube, tv.val, cv.val)
            grad = tv.grad * mask[..., None] + cv.grad * (1 - mask)[..., None]
            hess = None
            if tv.hess is not None:
                hess = tv.hess * mask[..., None, None] + cv.hess * (1 - mask)[..., None, None]
            out.append(Jet(val, grad, hess))
        return out

    m = n - d
    # the tube/cap chart covers the whole surgery annulus r0 < |u| < 3 r0:
    # cone+tube for |u| < 2.05 r0, flattened/blended K0 beyond
    tube_chart = Chart("K1-tube", m, -(3 * r0) * np.ones(m), (3 * r0) * np.ones(m),
                       np.zeros(m, dtype=bool), cap_or_tube,
                       valid=lambda uu, lo=0.99 * r0: np.linalg.norm(uu, axis=1) > lo,
                       piece="tube")

    # -- K0 product charts away from the surgery ball -------------------------
    outer_charts = []
    exclusion = 2.0 + recipe.flat_pad + recipe.blend_pad
    for ch in k0.charts:
        outer_charts.append(Chart("K1-outer:" + ch.name, ch.dim, ch.lo, ch.hi,
                                  ch.periodic, ch.fn,
                                  valid=_exclusion_wrap(ch, p0, (exclusion * r0) ** 2),
                                  piece="outer", normal_fields=ch.normal_fields))

    # -- flattened-sphere charts away from the p1 cone cap ---------------------
    sphere_charts = _flattened_sphere_charts(recipe, p1)

    charts = [tube_chart] + outer_charts + sphere_charts
    k1 = ChartedManifold(n, m, charts, seam_tolerance=1e-6,
                         betti_spec=k0.betti_spec,
                         meta={"kind": "K1", "n": n, "d": d, "r0": r0,
                               "p0": p0, "p1": p1, "split": d,
                               "height_cut": recipe.height_cut,
                               "M_betti": M.betti_spec,
                               "frame_b1": frame_data["b1"]})
    return k1


def _flattened_sphere_charts(recipe: ConnectedSumRecipe, p1: np.ndarray) -> list[Chart]:
    """Charts of S = f(S^{n-d}) flattened near p1, restricted off the cone cap.

    The sphere is round of radius 3 about (e_1, 0) wherever |y_0| <= 1/sqrt(18)
    and elsewhere given by the bottom-cap formula ((1 - mu)e_1, 3y'). The
    flattening blends toward the tangent plane p1 + span b(1) so that the
    cone seam at distance 2 r0 from p1 is exactly flat.
    """
    n, d, r0 = recipe.n, recipe.d, recipe.r0
    md = n - d
    flat_r = (2.0 + recipe.flat_pad) * r0
    blend_w = recipe.blend_pad * r0
    b1_dirs = [0] + list(range(d, n - 1))  # span b(1): e_0 and e_d..e_{n-2}

    def flatten(comps: list[Jet]) -> list[Jet]:
        # distance from p1 within the sphere's ambient
        rho2 = None
        for rr in range(n):
            dv = comps[rr] - p1[rr]
            rho2 = dv * dv if rho2 is None else rho2 + dv * dv
        w = smoothstep((rho2 * (1.0 / flat_r ** 2) - 1.0) * (flat_r ** 2 / (blend_w * (2 * flat_r + blend_w))))
        # projection onto the tangent plane p1 + span b(1)
        proj = []
        for rr in range(n):
            if rr in b1_dirs:
                proj.append(comps[rr])
            else:
                proj.append(const(p1[rr], comps[0]))
        return [pv + (cv - pv) * w for cv, pv in zip(comps, proj)]

    charts: list[Chart] = []

    # bottom-cap chart: y_0 <= 0 region, f = ((1 - mu_c(|y'|^2)) e_1, 3 y')
    def bottom_fn(u: list[Jet]) -> list[Jet]:
        t2 = None
        for ui in u:
            t2 = ui * ui if t2 is None else t2 + ui * ui
        lo_t, hi_t = 8.0 / 9.0, 17.0 / 18.0
        wblend = smoothstep((t2 - lo_t) * (1.0 / (hi_t - lo_t)))
        root = (1.0 - t2)
        mu = 1.0 + ((root.sqrt() * 3.0) - 1.0) * wblend
        comps = [None] * n
        comps[0] = 1.0 - mu
        from .jets import zero
        z = zero(u[0])
        for rr in range(1, d):
            comps[rr] = z
        for k in range(md):
            comps[d + k] = u[k] * 3.0
        return flatten(comps)

    lim = 0.96
    charts.append(Chart("S-bottom", md, -lim * np.ones(md), lim * np.ones(md),
                        np.zeros(md, dtype=bool), bottom_fn,
                        valid=lambda uu: (uu ** 2).sum(1) <= lim ** 2,
                        piece="sphere"))

    # round charts: hemisphere atlas of the y-sphere on y_0 >= -1/sqrt(18),
    # f = ((1 + 3 y_0) e_1, 3 y'); skip the -y_0 axis chart (bottom covers it)
    cover = 0.92
    for axis in range(md + 1):
        for sign in (+1.0, -1.0):
            if axis == 0 and sign < 0:
                continue
            rest = [k for k in range(md + 1) if k != axis]

            def fn(u, axis=axis, sign=sign, rest=rest):
                s2 = None
                for ui in u:
                    s2 = ui * ui if s2 is None else s2 + ui * ui
                pole = sign * (1.0 - s2).sqrt()
                y = [None] * (md + 1)
                y[axis] = pole
                for ui, k in zip(u, rest):
                    y[k] = ui
                comps = [None] * n
                comps[0] = y[0] * 3.0 + 1.0
                from .jets import zero
                z = zero(u[0])
                for rr in range(1, d):
                    comps[rr] = z
                for k in range(md):
                    comps[d + k] = y[1 + k] * 3.0
                return flatten(comps)

            def valid(uu, axis=axis, sign=sign, rest=rest, cov=cover):
                ok = (uu ** 2).sum(1) <= cov * cov
                # stay on the round region y_0 >= -1/sqrt(18) (with margin)
                if axis == 0:
                    y0 = sign * np.sqrt(np.maximum(1.0 - (uu ** 2).sum(1), 0.0))
                else:
                    y0 = uu[:, rest.index(0)]
                return ok & (y0 >= -1.0 / np.sqrt(18.0) + 0.02)

            charts.append(Chart(f"S-round[{axis}{'+' if sign > 0 else '-'}]", md,
                                -cover * np.ones(md), cover * np.ones(md),
                                np.zeros(md, dtype=bool), fn, valid=valid,
                                piece="sphere"))

    # restrict every sphere chart off the p1 cone cap (covered by the tube)
    return [Chart(ch.name, ch.dim, ch.lo, ch.hi, ch.periodic, ch.fn,
                  valid=_exclusion_wrap(ch, p1, (1.9 * recipe.r0) ** 2),
                  piece="sphere")
            for ch in charts]


def _exclusion_wrap(ch: Chart, center: np.ndarray, bound: float):
    """Chart validity minus an ambient ball; inner validity runs first so the
    chart map is only evaluated on its domain."""
    def valid(uu):
        ok = np.ones(uu.shape[0], dtype=bool)
        if ch.valid is not None:
            ok &= ch.valid(uu)
        idx = np.where(ok)[0]
        if len(idx):
            q = stack(ch.fn(seed(ch.wrap(uu[idx]), order=1)))[0]
            ok[idx] = ((q - center[None, :]) ** 2).sum(1) > bound
        return ok
    return valid


def k1_seam_report(k1: ChartedManifold, recipe: ConnectedSumRecipe,
                   samples: int = 1000, rng: np.random.Generator | None = None) -> dict:
    """C^0/C^1 mismatch across the two surgery seams, sampled.

    Inner seam (|u| = r0): tube cone against the flattened-sphere charts;
    outer seam (|u| = 2 r0): tube against the flat K0 annulus (same chart, so
    branch agreement is checked by evaluating both formulas near the switch).
    """
    rng = rng or np.random.default_rng(0)
    r0 = recipe.r0
    m = k1.intrinsic_dim
    tube = k1.charts[0]
    worst_pos = 0.0
    worst_tan = 0.0
    # inner seam: cone points at |u| <= r0 (where a2 = 1 exactly) must lie on
    # the flattened-sphere piece
    dirs = rng.normal(size=(samples, m))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    u = dirs * (0.995 * r0)
    q, jac, _ = k1.eval(0, u, order=1)
    sphere_charts = [i for i, c in enumerate(k1.charts) if c.piece == "sphere"]
    best = np.full(len(u), np.inf)
    for cid in sphere_charts:
        _, dval = k1._polish_nearest(cid, _nearest_grid(k1, cid, q), q, 60)
        best = np.minimum(best, dval)
    worst_pos = float(best.max())
    # outer seam: the tube formula must meet the flat annulus C^1 at 2.05 r0
    u_in = dirs * ((2.05 - 2e-9) * r0)
    u_out = dirs * ((2.05 + 2e-9) * r0)
    q_in, j_in, _ = k1.eval(0, u_in, order=1)
    q_out, j_out, _ = k1.eval(0, u_out, order=1)
    worst_pos = max(worst_pos, float(np.linalg.norm(q_in - q_out, axis=1).max()))
    worst_tan = float(np.abs(j_in - j_out).max())
    return {"samples": samples, "position_mismatch": worst_pos,
            "tangent_mismatch": worst_tan, "tolerance": k1.seam_tolerance}


def _nearest_grid(man: ChartedManifold, cid: int, x: np.ndarray) -> np.ndarray:
    grids = dict(man.sample(10))
    grid = grids.get(cid)
    if grid is None or not len(grid):
        grids = dict(man.sample(18))
        grid = grids[cid]
    q = man.point(cid, grid)
    d2 = ((x[:, None, :] - q[None, :, :]) ** 2).sum(-1)
    return grid[d2.argmin(axis=1)]


def k1_invariant_report(k1: ChartedManifold, recipe: ConnectedSumRecipe,
                        rng: np.random.Generator | None = None) -> dict:
    """Sampled recipe invariants: gamma clearance, V-region coverage,
    identity outside U, embedding min-gap."""
    rng = rng or np.random.default_rng(1)
    n, d, r0 = recipe.n, recipe.d, recipe.r0
    p0, p1 = k1.meta["p0"], k1.meta["p1"]
    report = {}
    # gamma((0,1)) stays clear of K0 and S
    ts = np.linspace(0.02, 0.98, 49)
    gpts = np.zeros((len(ts), n))
    gpts[:, 0] = 1.0
    gpts[:, n - 1] = 1.0 + 2.0 * ts
    dist, _, _ = k1.distance_to(gpts, per_dim=8)
    report["gamma_clearance"] = float(dist.min())
    # V-region coverage: the flat-bottom disk {(0, w): |w| <= sqrt(2)}
    w = rng.normal(size=(64, n - d))
    w *= (rng.uniform(0, np.sqrt(2), (64, 1)) / np.linalg.norm(w, axis=1, keepdims=True))
    pts = np.zeros((64, n))
    pts[:, d:] = w
    dist, _, _ = k1.distance_to(pts, per_dim=8)
    report["v_region_max_dist"] = float(dist.max())
    # identity outside U: sampled K0 points far from p0 lie on K1
    k0 = build_K0(n, d, recipe.M)
    pts0 = k0.sample_points(5)
    far = pts0[np.linalg.norm(pts0 - p0[None, :], axis=1) > 3.2 * r0][:80]
    dist, _, _ = k1.distance_to(far, per_dim=8)
    report["identity_outside_U"] = float(dist.max())
    # embedding: distinct-piece samples keep a positive gap unless seam-adjacent
    samples = []
    for cid, grid in k1.sample(6):
        take = grid[:: max(1, len(grid) // 40)]
        q = k1.point(cid, take)
        piece = k1.charts[cid].piece
        samples += [(piece, qq) for qq in q]
    min_gap = np.inf
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            pa, qa = samples[i]
            pb, qb = samples[j]
            if pa == pb:
                continue
            gap = np.linalg.norm(qa - qb)
            near_seam = (min(np.linalg.norm(qa - p0), np.linalg.norm(qb - p0)) < 3.5 * r0
                         or min(np.linalg.norm(qa - p1), np.linalg.norm(qb - p1)) < 3.5 * r0)
            if not near_seam:
                min_gap = min(min_gap, gap)
    report["cross_piece_min_gap"] = float(min_gap)
    return report
