"""Negative gradient flow of E on K x K and the chord Morse complex.

Points of K x K live in a fixed ordered chart pair; the metric is the
pullback product metric times a conformal factor built from compactly
supported bumps placed away from all chords. Rigid trajectories between
index-adjacent chords are found by scanning shooting spheres in the
unstable eigenspace, bisecting basin boundaries onto separatrices, and
verifying convergence into the target's stable cone. The complex is only
returned after d∘d = 0 verifies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algebra import Mod2Complex
from .chords import BinormalChord, ChordSet
from .geometry import ChartedManifold


@dataclass
class MetricSpec:
    """Conformal perturbation data over the product pullback metric."""

    bumps: list[tuple[np.ndarray, float, float]] = field(default_factory=list)  # (center(2n), radius, amp)
    tag: str = "g"

    def conformal(self, pair_pts: np.ndarray) -> np.ndarray:
        lam = np.zeros(pair_pts.shape[0])
        for center, radius, amp in self.bumps:
            s2 = ((pair_pts - center[None, :]) ** 2).sum(1) / radius ** 2
            inside = s2 < 1.0
            lam[inside] += amp * (1.0 - s2[inside]) ** 3
        return lam


def random_metric(man: ChartedManifold, chords: ChordSet, rng: np.random.Generator,
                  n_bumps: int = 6, amp: float = 0.35, radius: float = 0.45,
                  exclusion: float = 0.15, tag: str = "g") -> MetricSpec:
    """Bumps centered at pair-points away from every chord (Lemma-3.6 style)."""
    pts = man.sample_points(10, rng)
    bumps = []
    guard = 0
    while len(bumps) < n_bumps and guard < 400:
        guard += 1
        qa = pts[rng.integers(len(pts))]
        qb = pts[rng.integers(len(pts))]
        center = np.concatenate([qa, qb])
        ok = all(np.linalg.norm(center - np.concatenate([c.q, c.q2])) > radius + exclusion
                 for c in chords.chords)
        if ok:
            bumps.append((center, radius, float(rng.uniform(-amp, amp))))
    return MetricSpec(bumps, tag)


def jitter_metric(metric: MetricSpec, rng: np.random.Generator, amplitude: float = 1e-3) -> MetricSpec:
    bumps = [(c.copy(), r, a + float(rng.uniform(-amplitude, amplitude)))
             for c, r, a in metric.bumps]
    return MetricSpec(bumps, metric.tag + "~")


class FlowSystem:
    """Negative gradient flow of E on a fixed ordered chart pair of K x K."""

    def __init__(self, man: ChartedManifold, metric: MetricSpec, charts: tuple[int, int]):
        self.man = man
        self.metric = metric
        self.charts = charts
        self.m = man.intrinsic_dim

    def split(self, w: np.ndarray):
        return w[:, : self.m], w[:, self.m :]

    def wrap(self, w: np.ndarray) -> np.ndarray:
        ca, cb = self.charts
        ua = self.man.charts[ca].wrap(w[:, : self.m])
        ub = self.man.charts[cb].wrap(w[:, self.m :])
        return np.concatenate([ua, ub], axis=1)

    def _eval_pair(self, w: np.ndarray):
        ua, ub = self.split(w)
        qa, ja, _ = self.man.eval(self.charts[0], ua, order=1, check=False)
        qb, jb, _ = self.man.eval(self.charts[1], ub, order=1, check=False)
        return qa, ja, qb, jb

    def energy(self, w: np.ndarray) -> np.ndarray:
        ua, ub = self.split(w)
        qa = self.man.point(self.charts[0], ua)
        qb = self.man.point(self.charts[1], ub)
        return 0.5 * ((qa - qb) ** 2).sum(1)

    def pair_points(self, w: np.ndarray) -> np.ndarray:
        ua, ub = self.split(w)
        qa = self.man.point(self.charts[0], ua)
        qb = self.man.point(self.charts[1], ub)
        return np.concatenate([qa, qb], axis=1)

    def metric_matrix(self, w: np.ndarray) -> np.ndarray:
        qa, ja, qb, jb = self._eval_pair(w)
        G = self._block_metric(ja, jb)
        lam = self.metric.conformal(np.concatenate([qa, qb], axis=1))
        return G * np.exp(2.0 * lam)[:, None, None]

    def _block_metric(self, ja, jb) -> np.ndarray:
        m = self.m
        G = np.zeros((ja.shape[0], 2 * m, 2 * m))
        G[:, :m, :m] = np.einsum("bni,bnj->bij", ja, ja)
        G[:, m:, m:] = np.einsum("bni,bnj->bij", jb, jb)
        return G

    def grad_E(self, w: np.ndarray) -> np.ndarray:
        qa, ja, qb, jb = self._eval_pair(w)
        diff = qa - qb
        return np.concatenate([np.einsum("bnm,bn->bm", ja, diff),
                               -np.einsum("bnm,bn->bm", jb, diff)], axis=1)

    def velocity(self, w: np.ndarray) -> np.ndarray:
        """-dE = g(V, .) solved in chart frames (single pair evaluation)."""
        qa, ja, qb, jb = self._eval_pair(w)
        diff = qa - qb
        grad = np.concatenate([np.einsum("bnm,bn->bm", ja, diff),
                               -np.einsum("bnm,bn->bm", jb, diff)], axis=1)
        G0 = self._block_metric(ja, jb)
        lam = self.metric.conformal(np.concatenate([qa, qb], axis=1))
        v = -np.linalg.solve(G0, grad[..., None])[..., 0]
        return v * np.exp(-2.0 * lam)[:, None]

    def hessian_E(self, w: np.ndarray) -> np.ndarray:
        from .chords import _residual_and_jac
        ua, ub = self.split(w)
        _, hess, _ = _residual_and_jac(self.man, *self.charts, ua, ub)
        return hess

    def rk4_step(self, w: np.ndarray, dt: np.ndarray) -> np.ndarray:
        k1 = self.velocity(w)
        k2 = self.velocity(self.wrap(w + 0.5 * dt[:, None] * k1))
        k3 = self.velocity(self.wrap(w + 0.5 * dt[:, None] * k2))
        k4 = self.velocity(self.wrap(w + dt[:, None] * k3))
        return self.wrap(w + dt[:, None] / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))

    def flow(self, w0: np.ndarray, T: float, dt_max: float = 0.2,
             record: bool = False, energy_slack: float = 1e-9):
        """Integrate for time T; energy must not increase beyond the slack."""
        w = self.wrap(np.atleast_2d(np.asarray(w0, float)).copy())
        t = np.zeros(w.shape[0])
        E = self.energy(w)
        path = [w.copy()] if record else None
        times = [t.copy()] if record else None
        energies = [E.copy()] if record else None
        while (t < T - 1e-12).any():
            v = self.velocity(w)
            speed = np.linalg.norm(v, axis=1)
            dt = np.minimum(dt_max, 0.3 / (speed + 1e-9))
            dt = np.minimum(dt, T - t)
            dt = np.maximum(dt, 0.0)
            active = dt > 0
            if not active.any():
                break
            w_new = w.copy()
            w_new[active] = self.rk4_step(w[active], dt[active])
            E_new = self.energy(w_new)
            bad = active & (E_new > E + energy_slack)
            tries = 0
            while bad.any():
                tries += 1
                if tries > 24:
                    raise RuntimeError("energy monotonicity violated beyond slack; step collapse")
                dt[bad] *= 0.5
                w_new[bad] = self.rk4_step(w[bad], dt[bad])
                E_new[bad] = self.energy(w_new[bad])
                bad = active & (E_new > E + energy_slack)
            w, E = w_new, E_new
            t = t + dt
            if record:
                path.append(w.copy())
                times.append(t.copy())
                energies.append(E.copy())
        if record:
            return w, (np.array(times), np.stack(path, axis=0), np.stack(energies, axis=0))
        return w


@dataclass
class ChordFrame:
    """Cached linearization data of a chord for cone tests and shooting."""

    chord_idx: int
    charts: tuple[int, int]
    w: np.ndarray
    eigvals: np.ndarray     # generalized eigenvalues of (H, G), ascending
    eigvecs: np.ndarray     # columns, G-orthonormal
    Gx: np.ndarray

    @property
    def index(self) -> int:
        return int((self.eigvals < 0).sum())

    def wrapped_delta(self, w: np.ndarray, man: ChartedManifold) -> np.ndarray:
        delta = w - self.w[None, :]
        m = man.intrinsic_dim
        for i, cid in ((0, self.charts[0]), (1, self.charts[1])):
            chart = man.charts[cid]
            for k in range(m):
                if chart.periodic[k]:
                    span = chart.hi[k] - chart.lo[k]
                    col = i * m + k
                    delta[:, col] = (delta[:, col] + span / 2) % span - span / 2
        return delta

    def coords_of(self, w: np.ndarray, man: ChartedManifold) -> np.ndarray:
        """Eigen-coordinates (G-orthonormal) of the wrapped displacement."""
        return np.einsum("ij,bj->bi", self.eigvecs.T @ self.Gx,
                         self.wrapped_delta(w, man))


@dataclass
class Signature:
    """Omega-limit signature: a sink chord, the diagonal with its landing
    point, or unresolved."""

    kind: str           # 'chord' | 'diagonal' | 'unresolved'
    chord: int | None
    landing: np.ndarray | None

    def same_basin(self, other: "Signature", jump_tol: float) -> bool:
        if self.kind != other.kind:
            return False
        if self.kind == "chord":
            return self.chord == other.chord
        if self.landing is None or other.landing is None:
            return False
        return float(np.linalg.norm(self.landing - other.landing)) < jump_tol

    def closer_to(self, a: "Signature", b: "Signature", jump_tol: float) -> bool:
        """True if self matches a better than b (used during bisection)."""
        if self.same_basin(a, jump_tol) and not self.same_basin(b, jump_tol):
            return True
        if self.same_basin(b, jump_tol) and not self.same_basin(a, jump_tol):
            return False
        if self.kind == a.kind == b.kind and self.kind in ("diagonal", "unresolved"):
            da = np.linalg.norm(self.landing - a.landing)
            db = np.linalg.norm(self.landing - b.landing)
            return da <= db
        return True


class MorseEngine:
    """Flow-based classification and rigid-trajectory counting."""

    def __init__(self, man: ChartedManifold, chords: ChordSet, metric: MetricSpec,
                 cone_radius: float = 0.08, cone_ratio: float = 0.1,
                 shoot_radius: float = 1e-3, t_max: float = 400.0,
                 scan: int = 720, jump_tol: float = 0.25):
        if not chords.nondegenerate():
            raise ValueError("degenerate chords present; perturb before building complexes")
        self.man = man
        self.chords = chords
        self.metric = metric
        self.cone_radius = cone_radius
        self.cone_ratio = cone_ratio
        self.shoot_radius = shoot_radius
        self.t_max = t_max
        self.scan = scan
        self.jump_tol = jump_tol
        self.eps0 = 0.5 * chords.min_energy()
        self.floor = 0.85 * chords.min_energy()
        # Poincare section below every chord: trajectories that split at a
        # saddle cross it at well-separated points, which is what basin
        # signatures compare (endpoints on the diagonal can coincide).
        self.section = 0.92 * chords.min_energy()
        self.match_tol = 0.2
        self.systems: dict[tuple[int, int], FlowSystem] = {}
        self.frames = [self._frame(i, c) for i, c in enumerate(chords.chords)]
        self._sep_cache: dict[int, list[tuple[float, int]]] = {}
        self._end_cache: dict[int, tuple[Signature, Signature]] = {}

    def system(self, charts: tuple[int, int]) -> FlowSystem:
        if charts not in self.systems:
            self.systems[charts] = FlowSystem(self.man, self.metric, charts)
        return self.systems[charts]

    def _frame(self, idx: int, c: BinormalChord) -> ChordFrame:
        sys = self.system(c.chart)
        w = np.concatenate(c.coords)[None, :]
        H = sys.hessian_E(w)[0]
        G = sys.metric_matrix(w)[0]
        vals, vecs = scipy.linalg.eigh(H, G)
        return ChordFrame(idx, c.chart, w[0], vals, vecs, G)

    # -- omega-limit signatures -----------------------------------------------

    def classify(self, charts: tuple[int, int], w0: np.ndarray,
                 chunk_T: float = 4.0) -> list[Signature]:
        """Flow to sinks or the diagonal; saddles are flowed through.

        Diagonal limits are tagged with the pair point where the trajectory
        first crosses the energy section, which separates the two sides of
        every saddle passage.
        """
        sys = self.system(charts)
        w = sys.wrap(np.atleast_2d(np.asarray(w0, float)).copy())
        B = w.shape[0]
        out: list[Signature | None] = [None] * B
        live = np.arange(B)
        sinks = [f for f in self.frames if f.charts == charts and f.index == 0]
        t = 0.0
        while len(live) and t < self.t_max:
            w_new, (_, path, E_path) = sys.flow(w[live], chunk_T, record=True)
            done = np.zeros(len(live), dtype=bool)
            # crossing the section decides the trajectory: no chord lies below
            below = E_path < self.section
            crossed = below.any(axis=0)
            if crossed.any():
                first = below.argmax(axis=0)
                for idx in np.where(crossed)[0]:
                    pt = sys.pair_points(path[first[idx], idx][None, :])[0]
                    out[live[idx]] = Signature("diagonal", None, pt)
                    done[idx] = True
            w[live] = w_new
            for f in sinks:
                dist = np.linalg.norm(f.coords_of(w_new, self.man), axis=1)
                inside = (dist < self.cone_radius) & ~done
                for idx in np.where(inside)[0]:
                    out[live[idx]] = Signature("chord", f.chord_idx, None)
                    done[idx] = True
            live = live[~done]
            t += chunk_T
        for gi in live:
            out[gi] = Signature("unresolved", None, sys.pair_points(w[gi][None, :])[0])
        return out

    # -- shooting and separatrices ----------------------------------------------

    def unstable_frame(self, idx: int) -> np.ndarray:
        f = self.frames[idx]
        return f.eigvecs[:, f.eigvals < 0]

    def shoot_points(self, idx: int, directions: np.ndarray,
                     radius: float | None = None) -> np.ndarray:
        f = self.frames[idx]
        U = self.unstable_frame(idx)
        r = self.shoot_radius if radius is None else radius
        return f.w[None, :] + r * directions @ U.T

    def separatrices(self, src: int, radius: float | None = None) -> list[tuple[float, int]]:
        """Verified (angle, saddle) separatrix crossings on the shooting circle.

        Only implemented for index-2 sources (1-sphere scans); higher index
        sources are gated to the algebra route. All bisections run batched.
        """
        key = src if radius is None else (src, radius)
        if key in self._sep_cache:
            return self._sep_cache[key]
        cs = self.chords.chords[src]
        charts = cs.chart
        if cs.morse_index != 2:
            raise NotImplementedError("separatrix scan only for index-2 sources")
        angles = np.linspace(0, 2 * np.pi, self.scan, endpoint=False)
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        sigs = self.classify(charts, self.shoot_points(src, dirs, radius))
        saddles = [f.chord_idx for f in self.frames
                   if f.charts == charts and f.index == 1]
        coarse = []
        for i in range(self.scan):
            j = (i + 1) % self.scan
            if not sigs[i].same_basin(sigs[j], self.jump_tol):
                coarse.append((angles[i], angles[i] + 2 * np.pi / self.scan, sigs[i], sigs[j]))
        if not coarse:
            self._sep_cache[key] = []
            return []
        # one level of local refinement: sliver basins narrower than the grid
        # hide pairs of separatrices, so subdivide every transition interval
        refine = 16
        subs, owners = [], []
        for ci, (a0, a1, _, _) in enumerate(coarse):
            pts = np.linspace(a0, a1, refine + 1)[1:-1]
            subs.append(pts)
            owners += [ci] * len(pts)
        allsub = np.concatenate(subs)
        d = np.stack([np.cos(allsub), np.sin(allsub)], axis=1)
        subsigs = self.classify(charts, self.shoot_points(src, d, radius))
        lo, hi, slo, shi = [], [], [], []
        pos = 0
        for ci, (a0, a1, s0, s1) in enumerate(coarse):
            pts = subs[ci]
            ssig = [s0] + subsigs[pos : pos + len(pts)] + [s1]
            pos += len(pts)
            edges = np.concatenate([[a0], pts, [a1]])
            for k in range(len(edges) - 1):
                if not ssig[k].same_basin(ssig[k + 1], self.jump_tol):
                    lo.append(edges[k])
                    hi.append(edges[k + 1])
                    slo.append(ssig[k])
                    shi.append(ssig[k + 1])
        lo = np.array(lo)
        hi = np.array(hi)
        # Bracket signatures are refreshed as the bracket tightens: landings
        # vary continuously within a basin side, so comparing against the
        # adjacent endpoints keeps the side decision robust even through the
        # exponential amplification of near-separatrix trajectories.
        for _ in range(32):
            mid = 0.5 * (lo + hi)
            d = np.stack([np.cos(mid), np.sin(mid)], axis=1)
            msigs = self.classify(charts, self.shoot_points(src, d, radius))
            for t, sig in enumerate(msigs):
                if sig.closer_to(slo[t], shi[t], self.jump_tol):
                    lo[t] = mid[t]
                    slo[t] = sig
                else:
                    hi[t] = mid[t]
                    shi[t] = sig
        mids = 0.5 * (lo + hi)
        hits: list[tuple[float, int]] = []
        pending = []
        for t in range(len(mids)):
            if not saddles:
                continue
            # A separatrix limits onto a broken trajectory through its saddle,
            # so the two deep-bracket landings must reproduce the landings of
            # the saddle's own unstable-manifold ends. This signature is O(1)
            # and immune to the Lyapunov amplification of the transit.
            cands = [s for s in saddles if self._ends_match(s, slo[t], shi[t])]
            if len(cands) == 1:
                hits.append((float(mids[t]), cands[0]))
            else:
                pending.append((t, cands))
        if pending:
            d = np.stack([np.cos(mids), np.sin(mids)], axis=1)
            approach, linger = self.approach_stats_multi(
                charts, self.shoot_points(src, d, radius), saddles)
            for t, cands in pending:
                pool = cands if cands else saddles
                close = [saddles.index(s) for s in pool
                         if approach[t][saddles.index(s)] < 0.5 * self.cone_radius or s in cands]
                if close:
                    best = max(close, key=lambda k: (linger[t][k], -approach[t][k]))
                    hits.append((float(mids[t]), saddles[best]))
                    continue
                retry = self._retry_transition(charts, src, slo[t], shi[t],
                                               lo[t], hi[t], saddles)
                if retry is None:
                    raise RuntimeError(
                        f"unverifiable basin transition at angle {mids[t]:.6f} of chord {src}; "
                        "Morse-Smale suspect, re-seed the metric or strengthen sigma")
                hits.append(retry)
        merged: list[tuple[float, int]] = []
        for a, s in sorted(hits):
            if merged and abs(a - merged[-1][0]) < 1e-6 * 2 * np.pi and merged[-1][1] == s:
                continue
            merged.append((a, s))
        if len(merged) > 1 and abs(merged[0][0] + 2 * np.pi - merged[-1][0]) < 1e-6 * 2 * np.pi \
                and merged[0][1] == merged[-1][1]:
            merged.pop()
        self._sep_cache[key] = merged
        return merged

    def saddle_end_signatures(self, s: int) -> tuple[Signature, Signature]:
        """Omega-limit signatures of the two unstable ends of an index-1 chord."""
        if s not in self._end_cache:
            charts = self.chords.chords[s].chart
            pts = self.shoot_points(s, np.array([[1.0], [-1.0]]))
            sigs = self.classify(charts, pts)
            self._end_cache[s] = (sigs[0], sigs[1])
        return self._end_cache[s]

    def _sig_match(self, a: Signature, b: Signature) -> bool:
        if a.kind != b.kind:
            return False
        if a.kind == "chord":
            return a.chord == b.chord
        if a.landing is None or b.landing is None:
            return False
        return float(np.linalg.norm(a.landing - b.landing)) < self.match_tol

    def _ends_match(self, s: int, sig_a: Signature, sig_b: Signature) -> bool:
        e1, e2 = self.saddle_end_signatures(s)
        return (self._sig_match(sig_a, e1) and self._sig_match(sig_b, e2)) or \
               (self._sig_match(sig_a, e2) and self._sig_match(sig_b, e1))

    def _retry_transition(self, charts, src, sig_a, sig_b, a0, a1, saddles):
        """Re-locate and bisect one transition with a 30x shooting radius.

        The boundary angle drifts with the radius, so re-scan a window around
        the failed bracket first.
        """
        big = 30.0 * self.shoot_radius
        pad = 0.02
        grid = np.linspace(a0 - pad, a1 + pad, 64)
        d = np.stack([np.cos(grid), np.sin(grid)], axis=1)
        sigs = self.classify(charts, self.shoot_points(src, d, big))
        center = 0.5 * (a0 + a1)
        candidates = [k for k in range(63)
                      if not sigs[k].same_basin(sigs[k + 1], self.jump_tol)]
        if not candidates:
            return None
        k = min(candidates, key=lambda k: abs(0.5 * (grid[k] + grid[k + 1]) - center))
        lo, hi = grid[k], grid[k + 1]
        sa, sb = sigs[k], sigs[k + 1]
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            d = np.array([[np.cos(mid), np.sin(mid)]])
            sig = self.classify(charts, self.shoot_points(src, d, big))[0]
            if sig.closer_to(sa, sb, self.jump_tol):
                lo, sa = mid, sig
            else:
                hi, sb = mid, sig
        mid = 0.5 * (lo + hi)
        d = np.array([[np.cos(mid), np.sin(mid)]])
        appr, linger = self.approach_stats_multi(charts, self.shoot_points(src, d, big), saddles)
        close = [k for k in range(len(saddles)) if appr[0][k] < 0.35 * self.cone_radius]
        if not close:
            return None
        best = max(close, key=lambda k: linger[0][k])
        return (float(mid), saddles[best])

    def approach_stats_multi(self, charts, w0: np.ndarray, targets: list[int],
                             chunk_T: float = 3.0):
        """Minimum cone-coordinate distance and time spent within the cone
        radius, per trajectory and target chord."""
        sys = self.system(charts)
        w = sys.wrap(np.atleast_2d(np.asarray(w0, float)).copy())
        B = w.shape[0]
        best = np.full((B, len(targets)), np.inf)
        linger = np.zeros((B, len(targets)))
        alive = np.ones(B, dtype=bool)
        t = 0.0
        floor_targets = min((self.chords.chords[i].energy for i in targets), default=0.0)
        while alive.any() and t < self.t_max:
            w_new, (times, path, _) = sys.flow(w[alive], chunk_T, record=True)
            idx = np.where(alive)[0]
            S, Ba = path.shape[0], path.shape[1]
            dts = np.diff(times, axis=0, prepend=np.zeros((1, Ba)))
            flat = path.reshape(S * Ba, -1)
            for k, ti in enumerate(targets):
                f = self.frames[ti]
                dd = np.linalg.norm(f.coords_of(flat, self.man), axis=1).reshape(S, Ba)
                best[idx, k] = np.minimum(best[idx, k], dd.min(axis=0))
                linger[idx, k] += (dts * (dd < self.cone_radius)).sum(axis=0)
            w[alive] = w_new
            E = sys.energy(w_new)
            stop = (E < self.floor) | (E < floor_targets - 1e-7)
            alive[idx[stop]] = False
            t += chunk_T
        return best, linger

    def count_trajectories(self, src: int, dst: int,
                           radius: float | None = None) -> tuple[int, dict]:
        """#_{Z/2} T_g(x; x') for ind x' = ind x - 1."""
        cs, cd = self.chords.chords[src], self.chords.chords[dst]
        if src == dst:
            raise ValueError("source equals target")
        if cd.morse_index != cs.morse_index - 1:
            raise ValueError("count_trajectories needs ind x' = ind x - 1")
        if cs.chart != cd.chart:
            return 0, {"hits": [], "reason": "different chart pair"}
        if cs.morse_index == 1:
            pts = self.shoot_points(src, np.array([[1.0], [-1.0]]), radius)
            sigs = self.classify(cs.chart, pts)
            hits = [i for i, s in enumerate(sigs) if s.kind == "chord" and s.chord == dst]
            return len(hits) % 2, {"hits": hits, "mode": "endpoints"}
        if cs.morse_index == 2:
            seps = self.separatrices(src, radius)
            hits = [a for a, s in seps if s == dst]
            return len(hits) % 2, {"hits": hits, "mode": "scan", "scan": self.scan}
        raise NotImplementedError("shooting spheres of dimension > 1 are gated to the algebra route")


@dataclass
class MorseComplex:
    chords: ChordSet
    metric: MetricSpec
    eps0: float
    basis: dict[int, list[int]]
    differentials: dict[int, np.ndarray]
    telemetry: dict = field(default_factory=dict)

    def to_mod2(self) -> Mod2Complex:
        basis = {p: [f"x{i}" for i in idxs] for p, idxs in self.basis.items()}
        return Mod2Complex(basis, dict(self.differentials))

    def homology_dims(self) -> dict[int, int]:
        from .algebra import homology
        dims, _ = homology(self.to_mod2())
        return dims


def build_complex(man: ChartedManifold, chords: ChordSet, metric: MetricSpec,
                  engine: MorseEngine | None = None,
                  engine_kwargs: dict | None = None) -> MorseComplex:
    """Assemble d_g from trajectory counts; abort unless d∘d = 0."""
    engine = engine or MorseEngine(man, chords, metric, **(engine_kwargs or {}))
    by_index: dict[int, list[int]] = {}
    for i, c in enumerate(chords.chords):
        by_index.setdefault(c.morse_index, []).append(i)
    diffs: dict[int, np.ndarray] = {}
    telemetry = {}
    for p in sorted(by_index):
        if p - 1 not in by_index:
            continue
        src_list, dst_list = by_index[p], by_index[p - 1]
        mat = np.zeros((len(dst_list), len(src_list)), dtype=np.uint8)
        for j, s in enumerate(src_list):
            for i, d in enumerate(dst_list):
                cnt, tele = engine.count_trajectories(s, d)
                mat[i, j] = cnt
                telemetry[(s, d)] = tele
        diffs[p] = mat
    cx = MorseComplex(chords, metric, engine.eps0, by_index, diffs, telemetry)
    try:
        cx.to_mod2().check_d_squared()
    except ValueError as e:
        raise RuntimeError(f"d∘d != 0; trajectory telemetry: {telemetry}") from e
    return cx
