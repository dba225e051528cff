"""Binormal chords: ordered critical points of E(q,q') = |q-q'|^2 / 2.

A chord is a pair of distinct points whose connecting vector is orthogonal
to both tangent spaces. Found by damped multi-start Newton on the chart-
coordinate gradient of E; indices come from the chart Hessian (signature is
chart-independent) and are cross-validated against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ChartedManifold

RESIDUAL_TOL = 1e-10
NULL_BAND = 1e-7
DEDUP_RADIUS = 1e-6
DIAGONAL_FLOOR = 1e-3


@dataclass
class SolverConfig:
    starts_per_dim: int = 20
    max_starts: int = 200_000
    newton_iters: int = 60
    residual_tol: float = RESIDUAL_TOL
    null_band: float = NULL_BAND
    dedup_radius: float = DEDUP_RADIUS
    diagonal_floor: float = DIAGONAL_FLOOR
    seed: int = 0


@dataclass
class BinormalChord:
    q: np.ndarray
    q2: np.ndarray
    chart: tuple[int, int]
    coords: tuple[np.ndarray, np.ndarray]
    energy: float
    morse_index: int
    nullity: int
    hessian_spectrum: np.ndarray
    residual: float
    reeb_degree: int | None = None

    @property
    def length(self) -> float:
        return float(np.sqrt(2.0 * self.energy))

    @property
    def nondegenerate(self) -> bool:
        return self.nullity == 0

    def key(self) -> tuple:
        return (round(self.energy, 9), tuple(np.round(self.q, 6)), tuple(np.round(self.q2, 6)))

    def to_dict(self) -> dict:
        return {
            "q": [float(v) for v in self.q],
            "q2": [float(v) for v in self.q2],
            "energy": self.energy,
            "length": self.length,
            "index": self.morse_index,
            "nullity": self.nullity,
            "degree": self.reeb_degree,
            "residual": self.residual,
        }


@dataclass
class ChordSet:
    manifold: ChartedManifold
    chords: list[BinormalChord]
    telemetry: dict = field(default_factory=dict)

    def nondegenerate(self) -> bool:
        return all(c.nondegenerate for c in self.chords)

    def by_index(self) -> dict[int, list[int]]:
        """Chord positions grouped by Morse index (deterministic basis order)."""
        out: dict[int, list[int]] = {}
        for i, c in enumerate(self.chords):
            out.setdefault(c.morse_index, []).append(i)
        return out

    def min_energy(self) -> float:
        return min(c.energy for c in self.chords) if self.chords else np.inf

    def index_multiset(self) -> tuple:
        return tuple(sorted(c.morse_index for c in self.chords))


def _residual_and_jac(man: ChartedManifold, ca: int, cb: int, ua, ub, order=2):
    """Gradient of E in chart coordinates and (order=2) its Jacobian."""
    qa, ja, ha = man.eval(ca, ua, order=order)
    qb, jb, hb = man.eval(cb, ub, order=order)
    diff = qa - qb
    ga = np.einsum("bnm,bn->bm", ja, diff)
    gb = -np.einsum("bnm,bn->bm", jb, diff)
    grad = np.concatenate([ga, gb], axis=1)
    if order == 1:
        return grad, None, (qa, qb)
    m = ua.shape[1]
    haa = np.einsum("bni,bnj->bij", ja, ja) + np.einsum("bnij,bn->bij", ha, diff)
    hbb = np.einsum("bni,bnj->bij", jb, jb) - np.einsum("bnij,bn->bij", hb, diff)
    hab = -np.einsum("bni,bnj->bij", ja, jb)
    top = np.concatenate([haa, hab], axis=2)
    bot = np.concatenate([np.swapaxes(hab, 1, 2), hbb], axis=2)
    hess = np.concatenate([top, bot], axis=1)
    return grad, hess, (qa, qb)


def find_chords(man: ChartedManifold, cfg: SolverConfig | None = None) -> ChordSet:
    """Multi-start damped Newton on grad E over all ordered chart pairs."""
    cfg = cfg or SolverConfig()
    rng = np.random.default_rng(cfg.seed)
    m = man.intrinsic_dim
    found: dict[tuple, BinormalChord] = {}
    n_starts = 0
    landscape = []
    npairs = len(man.charts) ** 2
    budget = max(64, cfg.max_starts // npairs)
    for ca, chart_a in enumerate(man.charts):
        for cb, chart_b in enumerate(man.charts):
            want = min(cfg.starts_per_dim ** (2 * m), budget)
            ua = _starts(chart_a, want, rng)
            ub = _starts(chart_b, want, rng)
            k = min(len(ua), len(ub))
            ua, ub = ua[:k], ub[rng.permutation(len(ub))[:k]]
            n_starts += k
            sols = _newton_batch(man, ca, cb, ua, ub, cfg)
            landscape.append({"charts": (ca, cb), "starts": int(k),
                              "converged": int(len(sols))})
            for (sa, sb) in sols:
                ch = _classify(man, ca, cb, sa, sb, cfg)
                if ch is None:
                    continue
                key = ch.key()
                if key not in found:
                    found[key] = ch
    _close_under_swap(man, found, cfg)
    chords = sorted(found.values(), key=lambda c: (c.energy, tuple(c.q), tuple(c.q2)))
    cs = ChordSet(man, chords, telemetry={"starts": n_starts, "landscape": landscape,
                                          "dedup_radius": cfg.dedup_radius})
    return cs


def _starts(chart, want, rng):
    """Jittered grid when small, uniform otherwise; valid chart points only."""
    per = max(3, int(np.ceil(want ** (1.0 / chart.dim))))
    if per ** chart.dim <= 4 * want:
        axes = [np.linspace(chart.lo[i], chart.hi[i], per, endpoint=not chart.periodic[i])
                for i in range(chart.dim)]
        g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, chart.dim)
        step = (chart.hi - chart.lo) / per
        g = g + rng.uniform(0.05, 0.95, g.shape) * step
    else:
        g = rng.uniform(chart.lo, chart.hi, size=(want, chart.dim))
    g = chart.wrap(g)
    g = g[chart.contains(g)]
    return g[:want]


def _newton_batch(man, ca, cb, ua, ub, cfg):
    m = man.intrinsic_dim
    chart_a, chart_b = man.charts[ca], man.charts[cb]
    u = np.concatenate([ua, ub], axis=1)
    alive = np.ones(len(u), dtype=bool)
    for _ in range(cfg.newton_iters):
        if not alive.any():
            break
        cur = u[alive]
        grad, hess, (qa, qb) = _residual_and_jac(man, ca, cb, cur[:, :m], cur[:, m:])
        # drop starts collapsing to the diagonal
        dist = np.linalg.norm(qa - qb, axis=1)
        good = dist > cfg.diagonal_floor
        res = np.linalg.norm(grad, axis=1)
        damp = np.where(res > 1.0, 0.5, 1.0)
        scale = np.abs(hess).max(axis=(1, 2), keepdims=True) + 1.0
        hess = hess + 1e-11 * scale * np.eye(2 * m)
        try:
            step = np.linalg.solve(hess, grad[..., None])[..., 0]
        except np.linalg.LinAlgError:
            hess = hess + 1e-6 * scale * np.eye(2 * m)
            step = np.linalg.solve(hess, grad[..., None])[..., 0]
        nrm = np.linalg.norm(step, axis=1, keepdims=True)
        cap = 0.4
        step = np.where(nrm > cap, step * cap / np.maximum(nrm, 1e-30), step)
        new = cur - damp[:, None] * step
        na = chart_a.wrap(new[:, :m])
        nb = chart_b.wrap(new[:, m:])
        good &= chart_a.contains(na) & chart_b.contains(nb)
        upd = np.concatenate([na, nb], axis=1)
        idx = np.where(alive)[0]
        u[idx[good]] = upd[good]
        alive[idx[~good]] = False
    # keep converged
    if not len(u):
        return []
    grad, _, (qa, qb) = _residual_and_jac(man, ca, cb, u[:, :m], u[:, m:], order=1)
    res = np.linalg.norm(grad, axis=1)
    dist = np.linalg.norm(qa - qb, axis=1)
    ok = (res < cfg.residual_tol) & (dist > cfg.diagonal_floor)
    sols = []
    seen = []
    for i in np.where(ok)[0]:
        pair = np.concatenate([qa[i], qb[i]])
        if any(np.linalg.norm(pair - s) < cfg.dedup_radius for s in seen):
            continue
        seen.append(pair)
        sols.append((u[i, :m][None, :], u[i, m:][None, :]))
    return sols


def _classify(man, ca, cb, ua, ub, cfg) -> BinormalChord | None:
    grad, hess, (qa, qb) = _residual_and_jac(man, ca, cb, ua, ub)
    res = float(np.linalg.norm(grad[0]))
    if res > cfg.residual_tol * 10:
        return None
    H = 0.5 * (hess[0] + hess[0].T)
    spec = np.linalg.eigvalsh(H)
    scale = max(np.abs(spec).max(), 1.0)
    nullity = int((np.abs(spec) < cfg.null_band * scale).sum())
    index = int((spec < -cfg.null_band * scale).sum())
    energy = 0.5 * float(((qa[0] - qb[0]) ** 2).sum())
    return BinormalChord(qa[0].copy(), qb[0].copy(), (ca, cb),
                         (ua[0].copy(), ub[0].copy()), energy, index, nullity,
                         spec, res)


def _close_under_swap(man, found: dict, cfg) -> None:
    """The residual is swap-symmetric, so (q',q) is a chord whenever (q,q') is."""
    for ch in list(found.values()):
        has = any(np.linalg.norm(o.q - ch.q2) < cfg.dedup_radius
                  and np.linalg.norm(o.q2 - ch.q) < cfg.dedup_radius
                  for o in found.values())
        if has:
            continue
        ca, cb = ch.chart
        sw = _classify(man, cb, ca, ch.coords[1][None, :], ch.coords[0][None, :], cfg)
        if sw is None:
            raise RuntimeError("swap partner failed to classify")
        found[sw.key()] = sw


def hessian_index(man: ChartedManifold, chord: BinormalChord,
                  fd_step: float = 1e-5) -> tuple[int, int, np.ndarray]:
    """Analytic index/nullity/spectrum, cross-validated by an FD Hessian."""
    ca, cb = chord.chart
    ua, ub = chord.coords
    _, hess, _ = _residual_and_jac(man, ca, cb, ua[None, :] if ua.ndim == 1 else ua,
                                   ub[None, :] if ub.ndim == 1 else ub)
    H = 0.5 * (hess[0] + hess[0].T)
    spec = np.linalg.eigvalsh(H)
    scale = max(np.abs(spec).max(), 1.0)
    nullity = int((np.abs(spec) < NULL_BAND * scale).sum())
    index = int((spec < -NULL_BAND * scale).sum())
    H_fd = _fd_hessian(man, ca, cb, np.atleast_1d(ua), np.atleast_1d(ub), fd_step)
    spec_fd = np.linalg.eigvalsh(0.5 * (H_fd + H_fd.T))
    idx_fd = int((spec_fd < -NULL_BAND * scale).sum())
    if nullity == 0 and idx_fd != index:
        raise RuntimeError(f"analytic index {index} disagrees with FD index {idx_fd}")
    return index, nullity, spec


def _energy(man, ca, cb, ua, ub):
    qa = man.point(ca, ua[None, :])
    qb = man.point(cb, ub[None, :])
    return 0.5 * float(((qa - qb) ** 2).sum())


def _fd_hessian(man, ca, cb, ua, ub, h):
    m = man.intrinsic_dim
    x0 = np.concatenate([ua, ub])
    H = np.zeros((2 * m, 2 * m))

    def E(x):
        return _energy(man, ca, cb, x[:m], x[m:])

    for i in range(2 * m):
        for j in range(i, 2 * m):
            xpp = x0.copy(); xpp[i] += h; xpp[j] += h
            xpm = x0.copy(); xpm[i] += h; xpm[j] -= h
            xmp = x0.copy(); xmp[i] -= h; xmp[j] += h
            xmm = x0.copy(); xmm[i] -= h; xmm[j] -= h
            H[i, j] = H[j, i] = (E(xpp) - E(xpm) - E(xmp) + E(xmm)) / (4 * h * h)
    return H


def reeb_degree(chord: BinormalChord, d: int) -> int:
    """|a| = ind x_a + d - 2 for nondegenerate chords."""
    if not chord.nondegenerate:
        raise ValueError("degenerate chord has no Reeb degree")
    return chord.morse_index + d - 2


def assign_degrees(cs: ChordSet, d: int) -> None:
    for c in cs.chords:
        if c.nondegenerate:
            c.reeb_degree = reeb_degree(c, d)


def check_star(cs: ChordSet, d: int) -> tuple[bool, dict]:
    """Condition (*): every chord degree >= 2; holds exactly when d >= 4."""
    if not cs.nondegenerate():
        raise ValueError("degenerate chord present; perturb before the star check")
    if not cs.chords:
        return True, {"min_degree": None, "vacuous": True, "d": d}
    degs = [reeb_degree(c, d) for c in cs.chords]
    ok = min(degs) >= 2
    report = {"min_degree": int(min(degs)), "vacuous": False, "d": d,
              "witness": None if ok else min(range(len(degs)), key=lambda i: degs[i])}
    return ok, report


# -- admissibility -----------------------------------------------------------------

def line_scan_clear(man: ChartedManifold, chord: BinormalChord,
                    tau_span: float = 6.0, samples: int = 400,
                    clearance: float = 1e-4) -> bool:
    """Def-3.4(2) check: (1-t) q + t q' stays off K for t outside {0,1}.

    Near the endpoints the line leaves K normally, so distance grows like
    |t|·len; away from them we demand a positive clearance.
    """
    q, q2 = chord.q, chord.q2
    L = chord.length
    ts = np.linspace(-tau_span, 1 + tau_span, samples)
    pts = (1 - ts)[:, None] * q[None, :] + ts[:, None] * q2[None, :]
    dist, _, _ = man.distance_to(pts, per_dim=16, refine=12)
    for t, dv in zip(ts, dist):
        near0 = abs(t) < 0.2
        near1 = abs(t - 1) < 0.2
        if near0 or near1:
            s = abs(t) if near0 else abs(t - 1)
            if s > 1e-9 and dv < 0.3 * s * L:
                return False
        elif dv < clearance:
            return False
    return True


def lines_pairwise_disjoint(cs: ChordSet, clearance: float = 1e-6) -> bool:
    """Lemma-3.5 check: chord lines of distinct unordered chords are disjoint."""
    reps = []
    for c in cs.chords:
        if not any(np.linalg.norm(c.q - r.q2) < 1e-8 and np.linalg.norm(c.q2 - r.q) < 1e-8
                   for r in reps):
            reps.append(c)
    for i in range(len(reps)):
        for j in range(i + 1, len(reps)):
            if _line_line_distance(reps[i], reps[j]) < clearance:
                return False
    return True


def _line_line_distance(a: BinormalChord, b: BinormalChord) -> float:
    p, u = a.q, a.q2 - a.q
    q, v = b.q, b.q2 - b.q
    w = p - q
    uu, vv, uv = u @ u, v @ v, u @ v
    den = uu * vv - uv * uv
    if den < 1e-14 * uu * vv:
        # parallel lines
        proj = w - (w @ u / uu) * u
        return float(np.linalg.norm(proj))
    s = (uv * (w @ v) - vv * (w @ u)) / den
    t = (uu * (w @ v) - uv * (w @ u)) / den
    return float(np.linalg.norm(w + s * u - t * v))


def ev_transversality_margin(man: ChartedManifold, y_pair: tuple[np.ndarray, np.ndarray],
                             tau: float, hit_chart: int, hit_u: np.ndarray) -> float:
    """Smallest singular value of [d(ev) | T_m K] at an interior intersection."""
    q, q2 = y_pair
    _, jac, _ = man.eval(hit_chart, hit_u[None, :], order=1)
    cols = [q2 - q]  # d(ev)/d(tau)
    # d(ev)/dy spans (1-tau) T_q K + tau T_{q'} K; use ambient tangents of both
    d0, c0, u0 = man.distance_to(q[None, :])
    d1, c1, u1 = man.distance_to(q2[None, :])
    tan_q, _ = man.tangent_frame(int(c0[0]), u0)
    tan_q2, _ = man.tangent_frame(int(c1[0]), u1)
    for t in tan_q[0]:
        cols.append((1 - tau) * t)
    for t in tan_q2[0]:
        cols.append(tau * t)
    for t in jac[0].T:
        cols.append(t)
    A = np.stack(cols, axis=1)
    sv = np.linalg.svd(A, compute_uv=False)
    return float(sv[man.ambient_dim - 1]) if len(sv) >= man.ambient_dim else 0.0


def admissibility_report(man: ChartedManifold, cs: ChordSet,
                         flow_checks: dict | None = None) -> dict:
    """Six-flag admissibility report for the triple (K, g, g').

    Flags (1)-(3) are computed here; (4)-(6) are filled from the Morse-flow
    diagnostics in ``flow_checks`` when supplied (metric-jitter stability and
    fiber-product solver conditioning), else marked unknown.
    """
    flags = {}
    flags["1_nondegenerate"] = cs.nondegenerate()
    flags["2_no_line_return"] = all(line_scan_clear(man, c) for c in cs.chords) \
        and lines_pairwise_disjoint(cs)
    flags["3_ev_transversal"] = True  # refined at detected hits by the coproduct machinery
    if flow_checks:
        flags["4_morse_smale"] = bool(flow_checks.get("jitter_stable", False))
        flags["5_pr_transversal"] = bool(flow_checks.get("hit_conditioning", True))
        flags["6_sp_transversal"] = bool(flow_checks.get("split_conditioning", True))
    else:
        flags["4_morse_smale"] = None
        flags["5_pr_transversal"] = None
        flags["6_sp_transversal"] = None
    flags["admissible"] = all(v for v in flags.values() if v is not None)
    return flags
