"""NOON-like structure of post-selected fixed-N sectors.

A sector ``sum_mu A_mu |N/2-mu>_a |N/2+mu>_b`` is stored as a
:class:`~mzsim.states.SectorState` whose index ``i`` counts photons in mode
``b`` (``mu = -N/2 + i``).  Since ``J_z = (n_a - n_b)/2 = -mu``, the ``J_z``
ordering used by :mod:`mzsim.specfun` is the reversed array.

Phase-state overlaps use ``<phi|psi> = sum_nu exp(+i nu phi) A_nu``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .specfun import wigner_d_block
from .states import InputSpec, SectorState, sector_amplitudes

NOON_NORMALISATION = 1 / math.sqrt(2)


@dataclass(frozen=True)
class PhaseDistribution:
    grid: np.ndarray  # K points on [0, 2 pi)
    density: np.ndarray

    @property
    def spacing(self) -> float:
        return 2 * math.pi / len(self.grid)


@dataclass(frozen=True)
class NoonOverlap:
    probability: float
    relative_phase: float  # arg(A_{+N/2} / A_{-N/2}); nan if either edge vanishes


@dataclass(frozen=True)
class NoonCurve:
    n_bar: float
    total_n: int
    split: np.ndarray  # |alpha|^2 / n_bar
    p_noon: np.ndarray
    skipped: tuple[float, ...] = ()

    def peak_split(self) -> float:
        return float(self.split[int(np.argmax(self.p_noon))])


def relative_number_distribution(sector: SectorState) -> np.ndarray:
    """``P(mu) = |A_mu|^2`` for ``mu = -N/2 .. N/2``."""
    return np.abs(sector.amplitudes) ** 2


def beam_splitter_matrix(total_n: int) -> np.ndarray:
    """``exp(-i pi/2 J_x)`` on the ``N``-photon multiplet, ``J_z`` ordering.

    Built from the ``pi/2`` rotation block as
    ``exp(+i pi/2 J_z) d(pi/2) exp(-i pi/2 J_z)``.
    """
    d = wigner_d_block(total_n, math.pi / 2).entries
    m = np.arange(total_n + 1) - total_n / 2
    phase = np.exp(0.5j * math.pi * m)
    return phase[:, None] * d * phase.conj()[None, :]


def beam_splitter_rotate(sector: SectorState) -> SectorState:
    """Apply the 50:50 beam splitter ``exp(-i pi/2 J_x)`` within the sector."""
    u = beam_splitter_matrix(sector.total_n)
    out = u @ sector.amplitudes[::-1]
    return SectorState(sector.total_n, out[::-1].copy(), sector.weight)


def phase_distribution(sector: SectorState, grid_size: int) -> PhaseDistribution:
    """``P(phi)`` proportional to ``|sum_nu exp(i nu phi) A_nu|^2`` on a uniform
    grid, normalised so that ``sum(density) * dphi == 1``.

    Warns when ``grid_size < 8 (N + 1)``, which under-resolves the
    ``2 pi / N`` oscillation.
    """
    if grid_size < 1:
        raise ValueError("grid_size must be positive")
    n = sector.total_n
    if grid_size < 8 * (n + 1):
        warnings.warn(
            f"grid_size={grid_size} under-resolves the 2pi/N oscillation for N={n}; "
            f"use at least {8 * (n + 1)}",
            RuntimeWarning,
            stacklevel=2,
        )
    grid = 2 * math.pi * np.arange(grid_size) / grid_size
    # exp(i nu phi) = exp(-i N phi / 2) exp(i k phi); the common factor drops
    a = np.asarray(sector.amplitudes, dtype=complex)
    pad = (-a.size) % grid_size
    folded = np.pad(a, (0, pad)).reshape(-1, grid_size).sum(axis=0)
    amp = np.fft.ifft(folded) * grid_size
    dens = amp.real**2 + amp.imag**2
    dphi = 2 * math.pi / grid_size
    total = dens.sum() * dphi
    if total == 0:
        raise ValueError("phase distribution vanishes on the grid")
    return PhaseDistribution(grid, dens / total)


def dominant_harmonic(dist: PhaseDistribution) -> int:
    """Largest non-constant Fourier harmonic of the density (cycles per 2 pi)."""
    spec = np.abs(np.fft.rfft(dist.density))
    if spec.size < 2:
        return 0
    return int(np.argmax(spec[1:]) + 1)


def edge_weight(sector: SectorState) -> float:
    """``P(mu = -N/2) + P(mu = +N/2)`` (a single term when ``N = 0``)."""
    p = relative_number_distribution(sector)
    return float(p[0] + p[-1]) if sector.total_n else float(p[0])


def noon_overlap(sector_after_bs: SectorState) -> NoonOverlap:
    """Overlap with ``(|N,0> + |0,N>)/sqrt 2``: ``|A_{-N/2} + A_{N/2}|^2 / 2``."""
    if sector_after_bs.total_n < 1:
        raise ValueError("NOON overlap needs N >= 1")
    lo, hi = sector_after_bs.amplitudes[0], sector_after_bs.amplitudes[-1]
    prob = abs(NOON_NORMALISATION * (lo + hi)) ** 2
    rel = float(np.angle(hi / lo)) if lo != 0 and hi != 0 else math.nan
    return NoonOverlap(float(prob), rel)


def noon_scan(n_bar: float, split_grid: Sequence[float], total_n: int | None = None) -> NoonCurve:
    """``P_NOON`` of the rotated ``N``-photon sector against ``|alpha|^2 / n_bar``.

    ``total_n`` defaults to ``round(n_bar)``.  Splits whose sector has zero
    weight (e.g. odd ``N`` with no coherent light) are skipped.
    """
    if n_bar <= 0:
        raise ValueError("n_bar must be positive")
    n = int(round(n_bar)) if total_n is None else int(total_n)
    xs, ps, skipped = [], [], []
    for s in split_grid:
        if not 0 <= s <= 1:
            raise ValueError(f"split must lie in [0, 1], got {s}")
        spec = InputSpec.from_alpha2(s * n_bar, math.asinh(math.sqrt((1 - s) * n_bar)))
        try:
            sector = sector_amplitudes(spec, n)
        except ValueError:
            skipped.append(float(s))
            continue
        xs.append(float(s))
        ps.append(noon_overlap(beam_splitter_rotate(sector)).probability)
    return NoonCurve(float(n_bar), n, np.array(xs), np.array(ps), tuple(skipped))
