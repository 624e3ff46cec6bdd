"""Chain and ensemble diagnostics: integrated autocorrelation time, weighted
histograms, and triangle-plot data/SVG export."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ensemble import WeightedEnsemble, weighted_covariance, weighted_mean
from .errors import ChainTooShort, DomainError
from .linalg import fsum

MIN_CHAIN_LENGTH = 100
SOKAL_C = 5.0  # adaptive window: smallest T with T >= 5 * tau_hat(T)
DEFAULT_BINS = 50
DEFAULT_RANGE_SIGMAS = 4.0


def _autocorrelation(chain: np.ndarray) -> np.ndarray:
    """Normalized autocorrelation function via FFT."""
    n = chain.size
    centered = chain - chain.mean()
    size = 1 << (2 * n - 1).bit_length()
    transform = np.fft.rfft(centered, n=size)
    acf = np.fft.irfft(transform * np.conj(transform), n=size)[:n].real
    if acf[0] <= 0.0:
        raise ChainTooShort("chain is constant; autocorrelation undefined")
    return acf / acf[0]


def iact(chain) -> float:
    """Integrated autocorrelation time tau = 1 + 2 sum rho(t) with a
    Sokal-style adaptive window (smallest T with T >= 5 tau_hat(T))."""
    chain = np.asarray(chain, dtype=float)
    if chain.ndim != 1:
        raise DomainError("iact expects a 1-d chain; use iact_ensemble for 2-d")
    if chain.size < MIN_CHAIN_LENGTH:
        raise ChainTooShort(f"need at least {MIN_CHAIN_LENGTH} samples")
    return _windowed_tau(_autocorrelation(chain))


def _windowed_tau(rho: np.ndarray) -> float:
    tau = 2.0 * np.cumsum(rho) - 1.0  # tau_hat(T) = 1 + 2 sum_{t=1..T} rho(t)
    window = np.arange(len(tau)) >= SOKAL_C * tau
    t = np.argmax(window) if window.any() else len(tau) - 1
    return float(max(tau[t], 1e-12))


def iact_ensemble(chains: np.ndarray) -> float:
    """IACT from several walkers of one coordinate, shape (steps, walkers):
    per-walker autocorrelations are averaged before windowing."""
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2:
        raise DomainError("expected shape (steps, walkers)")
    if chains.shape[0] < MIN_CHAIN_LENGTH:
        raise ChainTooShort(f"need at least {MIN_CHAIN_LENGTH} steps")
    rho = np.mean(
        [_autocorrelation(chains[:, w]) for w in range(chains.shape[1])], axis=0
    )
    return _windowed_tau(rho)


@dataclass(frozen=True)
class Histogram1D:
    edges: np.ndarray  # length bins + 1, strictly increasing
    mass: np.ndarray  # length bins, nonnegative
    out_of_range: float


@dataclass(frozen=True)
class Histogram2D:
    x_edges: np.ndarray
    y_edges: np.ndarray
    mass: np.ndarray  # (bins_x, bins_y)
    out_of_range: float


def default_range(ensemble: WeightedEnsemble, coordinate_index: int) -> tuple:
    """Weighted mean +- 4 weighted standard deviations."""
    mu = weighted_mean(ensemble)[coordinate_index]
    var = weighted_covariance(ensemble)[coordinate_index, coordinate_index]
    sd = math.sqrt(max(var, 0.0))
    if sd == 0.0:
        sd = max(abs(mu), 1.0) * 1e-6
    return (mu - DEFAULT_RANGE_SIGMAS * sd, mu + DEFAULT_RANGE_SIGMAS * sd)


def weighted_histogram_1d(
    ensemble: WeightedEnsemble,
    coordinate_index: int,
    bins: int = DEFAULT_BINS,
    value_range: tuple | None = None,
) -> Histogram1D:
    if bins < 1:
        raise DomainError("bins must be >= 1")
    if not 0 <= coordinate_index < ensemble.n_theta:
        raise DomainError("coordinate index out of range")
    lo, hi = value_range or default_range(ensemble, coordinate_index)
    if not hi > lo:
        raise DomainError("histogram range must be increasing")
    edges = np.linspace(lo, hi, bins + 1)
    x = ensemble.samples[:, coordinate_index]
    w = ensemble.weights
    in_range = (x >= lo) & (x <= hi)
    mass, _ = np.histogram(x[in_range], bins=edges, weights=w[in_range])
    return Histogram1D(edges, mass, out_of_range=fsum(w[~in_range]))


def weighted_histogram_2d(
    ensemble: WeightedEnsemble,
    index_x: int,
    index_y: int,
    bins: int = DEFAULT_BINS,
    x_range: tuple | None = None,
    y_range: tuple | None = None,
) -> Histogram2D:
    if bins < 1:
        raise DomainError("bins must be >= 1")
    x_lo, x_hi = x_range or default_range(ensemble, index_x)
    y_lo, y_hi = y_range or default_range(ensemble, index_y)
    x_edges = np.linspace(x_lo, x_hi, bins + 1)
    y_edges = np.linspace(y_lo, y_hi, bins + 1)
    x = ensemble.samples[:, index_x]
    y = ensemble.samples[:, index_y]
    w = ensemble.weights
    in_range = (x >= x_lo) & (x <= x_hi) & (y >= y_lo) & (y <= y_hi)
    mass, _, _ = np.histogram2d(
        x[in_range], y[in_range], bins=(x_edges, y_edges), weights=w[in_range]
    )
    return Histogram2D(x_edges, y_edges, mass, out_of_range=fsum(w[~in_range]))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{value:.17g}" for value in row])


def triangle_export(
    ensemble: WeightedEnsemble, bins: int = DEFAULT_BINS, out_dir="."
) -> list[Path]:
    """Write 1-d histogram CSVs per coordinate, 2-d histogram CSVs per pair,
    and a minimal SVG triangle grid.  Deterministic for a fixed ensemble."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = ensemble.n_theta
    written: list[Path] = []
    hists1d = []
    for i in range(d):
        hist = weighted_histogram_1d(ensemble, i, bins)
        hists1d.append(hist)
        path = out / f"hist_theta_{i}.csv"
        _write_csv(
            path,
            ["bin_left", "bin_right", "mass"],
            zip(hist.edges[:-1], hist.edges[1:], hist.mass),
        )
        written.append(path)
    hists2d = {}
    for i in range(d):
        for j in range(i + 1, d):
            hist = weighted_histogram_2d(ensemble, i, j, bins)
            hists2d[(i, j)] = hist
            path = out / f"hist2d_theta_{i}_theta_{j}.csv"
            rows = []
            for a in range(bins):
                for b in range(bins):
                    rows.append(
                        (
                            hist.x_edges[a],
                            hist.x_edges[a + 1],
                            hist.y_edges[b],
                            hist.y_edges[b + 1],
                            hist.mass[a, b],
                        )
                    )
            _write_csv(
                path, ["x_left", "x_right", "y_left", "y_right", "mass"], rows
            )
            written.append(path)
    svg_path = out / "triangle.svg"
    svg_path.write_text(_triangle_svg(hists1d, hists2d, d))
    written.append(svg_path)
    return written


PANEL = 120  # panel edge length in SVG user units
GAP = 10


def _triangle_svg(hists1d, hists2d, d) -> str:
    size = d * PANEL + (d + 1) * GAP
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for i in range(d):
        x0 = GAP + i * (PANEL + GAP)
        y0 = GAP + i * (PANEL + GAP)
        parts.append(_bar_panel(hists1d[i], x0, y0))
        for j in range(i + 1, d):
            # lower triangle: row j, column i
            parts.append(
                _heat_panel(hists2d[(i, j)], GAP + i * (PANEL + GAP), GAP + j * (PANEL + GAP))
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _bar_panel(hist: Histogram1D, x0: float, y0: float) -> str:
    bins = hist.mass.size
    peak = hist.mass.max() if hist.mass.max() > 0 else 1.0
    width = PANEL / bins
    rects = [
        f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{PANEL}" height="{PANEL}" '
        f'fill="none" stroke="black" stroke-width="1"/>'
    ]
    for b in range(bins):
        h = PANEL * float(hist.mass[b]) / peak
        if h <= 0.0:
            continue
        rects.append(
            f'<rect x="{x0 + b * width:.2f}" y="{y0 + PANEL - h:.2f}" '
            f'width="{width:.2f}" height="{h:.2f}" fill="gray"/>'
        )
    return "\n".join(rects)


def _heat_panel(hist: Histogram2D, x0: float, y0: float) -> str:
    bins = hist.mass.shape[0]
    peak = hist.mass.max() if hist.mass.max() > 0 else 1.0
    cell = PANEL / bins
    rects = [
        f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{PANEL}" height="{PANEL}" '
        f'fill="none" stroke="black" stroke-width="1"/>'
    ]
    for a in range(bins):
        for b in range(bins):
            value = float(hist.mass[a, b]) / peak
            if value <= 0.0:
                continue
            shade = int(round(255 * (1.0 - value)))
            rects.append(
                f'<rect x="{x0 + a * cell:.2f}" '
                f'y="{y0 + PANEL - (b + 1) * cell:.2f}" '
                f'width="{cell:.2f}" height="{cell:.2f}" '
                f'fill="rgb({shade},{shade},{shade})"/>'
            )
    return "\n".join(rects)
