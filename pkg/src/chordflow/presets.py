"""Standard desk-example builders shared by tests, scripts and the CLI."""

from __future__ import annotations

import numpy as np

from .chords import ChordSet, SolverConfig, find_chords
from .geometry import (ChartedManifold, NormalSection, TrigPoly, build_hopf_link,
                       build_K0, circle, perturb, perturb_component, standing_circle,
                       standing_torus)

HOPF_SUP_SIGMA = 0.2  # half the tubular-radius estimate of the round link


def curve_section(seed: int, base_amp: float = 0.12) -> NormalSection:
    """Ellipse-dominant radial perturbation with small symmetry-breaking modes."""
    rng = np.random.default_rng(seed)
    return NormalSection({
        0: TrigPoly([((2,), base_amp * (1 + 0.15 * rng.uniform(-1, 1)), float(rng.uniform(0, 2 * np.pi))),
                     ((3,), 0.02 * rng.uniform(0.5, 1.0), float(rng.uniform(0, 2 * np.pi)))]),
        1: TrigPoly([((1,), 0.02 * rng.uniform(0.5, 1.0), float(rng.uniform(0, 2 * np.pi))),
                     ((3,), 0.015 * rng.uniform(0.5, 1.0), float(rng.uniform(0, 2 * np.pi)))]),
    })


def perturbed_curve(seed: int, ambient: int = 3) -> ChartedManifold:
    return perturb(circle(ambient), curve_section(seed), max_sup=0.5)


def hopf_sections(seed: int, base_amp: float = 0.1) -> list[NormalSection]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(2):
        out.append(NormalSection({
            0: TrigPoly([((2,), base_amp * (1 + 0.2 * rng.uniform(-1, 1)), float(rng.uniform(0, 2 * np.pi))),
                         ((3,), 0.025 * rng.uniform(0.5, 1.0), float(rng.uniform(0, 2 * np.pi)))]),
            1: TrigPoly([((1,), 0.02 * rng.uniform(0.5, 1.0), float(rng.uniform(0, 2 * np.pi))),
                         ((2,), 0.02 * rng.uniform(0.5, 1.0), float(rng.uniform(0, 2 * np.pi)))]),
        }))
    return out


def perturbed_hopf(seed: int) -> ChartedManifold:
    link = build_hopf_link()
    secs = hopf_sections(seed)
    for s in secs:
        if s.sup_norm_bound() > HOPF_SUP_SIGMA + 0.05:
            raise ValueError("hopf section exceeds the tubular bound")
    return perturb_component(link, secs)


def standard_M(n: int, d: int) -> ChartedManifold:
    """The normalized M for the (n, d) family; dim M = n - 2d + 1."""
    dim_m = n - 2 * d + 1
    if dim_m == 2:
        return standing_torus(n - d)
    if dim_m == 1:
        return standing_circle(n - d)
    raise ValueError(f"no standard M of dimension {dim_m}")


def k0_manifold(n: int, d: int) -> ChartedManifold:
    return build_K0(n, d, standard_M(n, d))


def hopf_chords(man: ChartedManifold, seed: int = 0) -> ChordSet:
    return find_chords(man, SolverConfig(seed=seed, max_starts=80_000))
