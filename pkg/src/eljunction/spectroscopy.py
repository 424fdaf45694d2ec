"""Emulated stroboscopic spectroscopy of Floquet states.

A pi/2 pulse on one or two sites prepares a superposition across particle
sectors 0..N. Each sector evolves with its own Floquet operator, and site
quadratures X = (a + a^dag)/sqrt2, P = i(a^dag - a)/sqrt2 read out the
coherences between adjacent sectors at t_n = nT. The DFT of those records,
averaged over initial configurations, peaks at the quasienergies.

DFT convention: A~_k = (1/Q) sum_n exp(+2 pi i k n / Q) A_n, so bin k maps to
eps_k = 2 pi k / (Q T), folded into (-omega/2, omega/2].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .basis import FockBasis, enumerate_basis, index_of
from .errors import ValidationError
from .floquet import FloquetResult, PropagatorSettings, floquet_analysis
from .model import DisorderRealization, ModelParams

OBSERVABLES = ("X_i", "P_i", "X_iX_j", "P_iP_j", "P_iX_j", "X_i+iP_i")


@dataclass(frozen=True, eq=False)
class SectorSpace:
    """Direct sum of Fock sectors 0..n_max on L sites."""

    L: int
    n_max: int
    bases: tuple = field(repr=False)
    offsets: tuple = field(repr=False)
    _ladder: dict = field(default_factory=dict, repr=False)

    @classmethod
    @lru_cache(maxsize=32)
    def build(cls, L: int, n_max: int) -> "SectorSpace":
        bases = tuple(enumerate_basis(n, L) for n in range(n_max + 1))
        offsets = tuple(int(x) for x in np.cumsum([0] + [len(b) for b in bases]))
        return cls(L=L, n_max=n_max, bases=bases, offsets=offsets)

    @property
    def dimension(self) -> int:
        return self.offsets[-1]

    def sector_slice(self, n: int) -> slice:
        return slice(self.offsets[n], self.offsets[n + 1])

    def flat_index(self, occupation) -> int:
        n = int(sum(occupation))
        return self.offsets[n] + index_of(occupation, self.bases[n]) - 1

    def annihilation(self, site: int) -> np.ndarray:
        """Dense a_site on the whole direct sum (1-based site), read-only."""
        if site not in self._ladder:
            i = site - 1
            a = np.zeros((self.dimension, self.dimension))
            for n in range(1, self.n_max + 1):
                lower = self.bases[n - 1]
                for col, s in enumerate(self.bases[n].states):
                    if s[i] == 0:
                        continue
                    target = s.copy()
                    target[i] -= 1
                    row = self.offsets[n - 1] + index_of(target, lower) - 1
                    a[row, self.offsets[n] + col] = np.sqrt(s[i])
            a.setflags(write=False)
            self._ladder[site] = a
        return self._ladder[site]


@dataclass(frozen=True)
class DirectSumState:
    space: SectorSpace
    amplitudes: np.ndarray
    sites: tuple

    def sector(self, n: int) -> np.ndarray:
        return self.amplitudes[self.space.sector_slice(n)]

    def sector_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(self.sector(n)) ** 2 for n in range(self.space.n_max + 1)])


def prepare_superposition(sites, L: int) -> DirectSumState:
    """Product of (|0> + |1>)/sqrt2 on each pulsed site, vacuum elsewhere."""
    sites = tuple(int(s) for s in sites)
    if len(sites) not in (1, 2):
        raise ValidationError("sites", f"need one or two sites, got {len(sites)}")
    if len(set(sites)) != len(sites):
        raise ValidationError("sites", f"repeated site index in {sites}")
    if any(not 1 <= s <= L for s in sites):
        raise ValidationError("sites", f"sites must lie in 1..{L}, got {sites}")
    space = SectorSpace.build(L, len(sites))
    psi = np.zeros(space.dimension, dtype=complex)
    amp = 2.0 ** (-len(sites) / 2)
    for r in range(len(sites) + 1):
        for subset in combinations(sites, r):
            occ = [0] * L
            for s in subset:
                occ[s - 1] = 1
            psi[space.flat_index(occ)] = amp
    return DirectSumState(space=space, amplitudes=psi, sites=sites)


@dataclass(frozen=True)
class SectorFloquet:
    """Floquet data for every sector 1..n_max (sector 0 is the static vacuum)."""

    results: tuple
    period: float

    @classmethod
    def compute(cls, n_max, params, disorder=None, settings=None) -> "SectorFloquet":
        results = tuple(
            floquet_analysis(params.replace(N=n), disorder, settings) for n in range(1, n_max + 1)
        )
        return cls(results=results, period=params.period)

    def sector(self, n: int) -> FloquetResult:
        return self.results[n - 1]


def evolve_stroboscopic(state: DirectSumState, floquet: SectorFloquet, Q: int) -> np.ndarray:
    """States at t_n = nT, n = 0..Q-1, as rows of a (Q, dim) array."""
    space = state.space
    n = np.arange(Q)
    out = np.zeros((Q, space.dimension), dtype=complex)
    out[:, space.sector_slice(0)] = state.sector(0)
    for sector in range(1, space.n_max + 1):
        res = floquet.sector(sector)
        coeff = res.modes.conj().T @ state.sector(sector)
        phases = np.exp(-1j * np.outer(n, res.quasienergies) * floquet.period)
        out[:, space.sector_slice(sector)] = (phases * coeff) @ res.modes.T
    return out


@dataclass(frozen=True)
class SignalTrace:
    values: np.ndarray
    period: float
    label: str


def _observable_matrix(space: SectorSpace, observable: str, sites) -> np.ndarray:
    if observable not in OBSERVABLES:
        raise ValidationError("observable", f"unknown observable {observable!r}; choose from {OBSERVABLES}")
    two_site = observable in ("X_iX_j", "P_iP_j", "P_iX_j")
    if two_site and (len(sites) != 2 or sites[0] == sites[1]):
        raise ValidationError("observable", f"{observable} needs two distinct sites, got {tuple(sites)}")
    if not two_site and len(sites) < 1:
        raise ValidationError("observable", f"{observable} needs a site")

    def quad(kind, site):
        a = space.annihilation(site)
        if kind == "X":
            return (a + a.T) / np.sqrt(2)
        return 1j * (a.T - a) / np.sqrt(2)

    i = sites[0]
    if observable == "X_i":
        return quad("X", i)
    if observable == "P_i":
        return quad("P", i)
    if observable == "X_i+iP_i":
        # (X + iP) = sqrt2 a, so its expectation is the complex quadrature
        return np.sqrt(2) * space.annihilation(i)
    j = sites[1]
    first, second = {"X_iX_j": ("X", "X"), "P_iP_j": ("P", "P"), "P_iX_j": ("P", "X")}[observable]
    return quad(first, i) @ quad(second, j)


def stroboscopic_trace(
    state: DirectSumState,
    observable: str,
    Q: int,
    params: ModelParams | None = None,
    disorder: DisorderRealization | None = None,
    settings: PropagatorSettings | None = None,
    floquet: SectorFloquet | None = None,
    sites=None,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> SignalTrace:
    """Expectation of ``observable`` at t_n = nT for n = 0..Q-1.

    Operators act on a direct sum extended by one sector so that products
    like a_i a_j^dag are exact on the prepared state. ``X_i+iP_i`` gives the
    complex quadrature <X> + i<P>; every other observable is real.
    """
    if Q < 2:
        raise ValidationError("Q", f"need at least 2 periods, got {Q}")
    sites = tuple(sites or state.sites)
    if floquet is None:
        if params is None:
            raise ValidationError("params", "need model parameters or precomputed Floquet data")
        floquet = SectorFloquet.compute(state.space.n_max, params, disorder, settings)
    states = evolve_stroboscopic(state, floquet, Q)
    big = SectorSpace.build(state.space.L, state.space.n_max + 1)
    op = _observable_matrix(big, observable, sites)
    padded = np.zeros((Q, big.dimension), dtype=complex)
    padded[:, : state.space.dimension] = states
    values = np.einsum("ni,ij,nj->n", padded.conj(), op, padded)
    if observable != "X_i+iP_i":
        values = values.real
    if noise_sigma > 0:
        rng = rng or np.random.default_rng(0)
        noise = rng.normal(0.0, noise_sigma, size=Q)
        if np.iscomplexobj(values):
            noise = noise + 1j * rng.normal(0.0, noise_sigma, size=Q)
        values = values + noise
    return SignalTrace(values=values, period=floquet.period, label=f"{observable}{sites}")


def cosine_trace(quasienergies, weights, Q: int, period: float) -> np.ndarray:
    """sum_lambda w_lambda cos(eps_lambda n T) for n = 0..Q-1."""
    n = np.arange(Q)
    return np.cos(np.outer(n, quasienergies) * period) @ np.asarray(weights)


def fold(eps, omega):
    """Fold energies into (-omega/2, omega/2]."""
    return omega / 2 - np.mod(omega / 2 - np.asarray(eps, dtype=float), omega)


@dataclass(frozen=True)
class PowerSpectrum:
    power: np.ndarray
    period: float
    averaged: bool = True

    @property
    def Q(self) -> int:
        return len(self.power)

    @property
    def bins(self) -> np.ndarray:
        return np.arange(self.Q)

    @property
    def omega(self) -> float:
        return 2 * np.pi / self.period

    @property
    def bin_width(self) -> float:
        return 2 * np.pi / (self.Q * self.period)

    @property
    def eps(self) -> np.ndarray:
        return fold(self.bins * self.bin_width, self.omega)


def dft(values) -> np.ndarray:
    """(1/Q) sum_n exp(+2 pi i k n / Q) A_n, which is numpy's inverse FFT."""
    return np.fft.ifft(np.asarray(values))


def power_spectrum(traces) -> PowerSpectrum:
    """Average |A~_k|^2 uniformly over the supplied traces."""
    traces = list(traces)
    if not traces:
        raise ValidationError("traces", "need at least one trace")
    Q = len(traces[0].values)
    if any(len(t.values) != Q for t in traces):
        raise ValidationError("traces", "all traces must have the same length")
    power = np.zeros(Q)
    for t in traces:
        power += np.abs(dft(t.values)) ** 2
    return PowerSpectrum(power=power / len(traces), period=traces[0].period, averaged=len(traces) > 1)


@dataclass(frozen=True)
class PeakSet:
    eps: np.ndarray
    weights: np.ndarray
    bins: np.ndarray
    bin_width: float

    def __len__(self) -> int:
        return len(self.eps)

    @property
    def participation_ratio(self) -> float:
        w = self.weights / self.weights.sum()
        return float(1.0 / np.sum(w**2))


def extract_peaks(
    spectrum: PowerSpectrum,
    threshold: float = 1e-3,
    include_dc: bool = False,
    refine: bool = True,
    normalize: bool = True,
) -> PeakSet:
    """Local maxima of the power spectrum above ``threshold * max(power)``.

    With ``refine`` the fractional bin offset of each peak comes from the
    ratio of the peak bin to its larger neighbour (exact for an isolated
    complex exponential under a rectangular window), and the amplitude is
    corrected for the resulting scalloping loss. Weights are amplitudes,
    i.e. sqrt(power), normalized to sum to one unless ``normalize`` is off.
    """
    if threshold <= 0:
        raise ValidationError("threshold", f"must be > 0, got {threshold}")
    p = spectrum.power
    Q = len(p)
    amp = np.sqrt(p)
    left, right = np.roll(p, 1), np.roll(p, -1)
    is_peak = (p > left) & (p >= right) & (p > threshold * p.max())
    if not include_dc:
        is_peak[0] = False
    idx = np.nonzero(is_peak)[0]
    frac = np.zeros(len(idx))
    weights = amp[idx].copy()
    if refine:
        for n, k in enumerate(idx):
            a_l, a_r = amp[(k - 1) % Q], amp[(k + 1) % Q]
            side, a_side = (1, a_r) if a_r >= a_l else (-1, a_l)
            delta = a_side / (amp[k] + a_side)
            frac[n] = side * delta
            if delta > 1e-12:
                weights[n] = amp[k] * Q * np.sin(np.pi * delta / Q) / np.sin(np.pi * delta)
    eps = fold((idx + frac) * spectrum.bin_width, spectrum.omega)
    if normalize and weights.size:
        weights = weights / weights.sum()
    order = np.argsort(eps)
    return PeakSet(eps=eps[order], weights=weights[order], bins=idx[order], bin_width=spectrum.bin_width)


def _periodogram(R, eps, period):
    """Averaged |(1/Q) sum_n R_n exp(+i eps n T)|^2 at a continuous eps."""
    phase = np.exp(1j * eps * period * np.arange(R.shape[1]))
    return float(np.mean(np.abs(R @ phase) ** 2)) / R.shape[1] ** 2


def _fit_component(R, eps0, bin_width, period):
    # maximize the averaged periodogram within one bin of eps0, then take
    # per-trace amplitudes by projection
    res = minimize_scalar(
        lambda e: -_periodogram(R, e, period),
        bounds=(eps0 - bin_width, eps0 + bin_width),
        method="bounded",
        options={"xatol": bin_width * 1e-6},
    )
    eps = float(res.x)
    Q = R.shape[1]
    wave = np.exp(-1j * eps * period * np.arange(Q))
    amps = R @ wave.conj() / Q
    return eps, amps, wave


def _waves(eps, period, Q):
    return np.exp(-1j * np.outer(np.arange(Q), eps) * period)


def _joint_refine(Y, eps, bin_width, period):
    """Variable projection: fit all frequencies at once, amplitudes by least squares."""
    Q = Y.shape[1]
    x0 = np.asarray(eps) / bin_width

    def resid(x):
        E = _waves(x * bin_width, period, Q)
        coef = np.linalg.lstsq(E, Y.T, rcond=None)[0]
        r = Y.T - E @ coef
        return np.concatenate([r.real.ravel(), r.imag.ravel()])

    sol = least_squares(resid, x0, bounds=(x0 - 2.0, x0 + 2.0), xtol=1e-10, ftol=1e-12)
    eps = sol.x * bin_width
    E = _waves(eps, period, Q)
    amps = np.linalg.lstsq(E, Y.T, rcond=None)[0].T  # traces x components
    return eps, amps


def relax_peaks(
    traces,
    threshold: float = 1e-3,
    max_components: int | None = None,
    sweeps: int = 3,
    joint_limit: int = 24,
    normalize: bool = True,
) -> PeakSet:
    """Peaks by successive subtraction from the averaged power spectrum.

    The strongest bin of the averaged residual spectrum is refined to a
    continuous frequency and its exponential is fitted in every trace. While
    there are at most ``joint_limit`` components all frequencies are then
    re-fitted jointly (amplitudes by linear least squares), which separates
    levels down to about one bin apart; beyond that, ``sweeps`` cyclic passes
    re-fit each component with the others removed. The search stops when the
    residual peak falls below ``threshold`` times the original maximum.
    Weights are RMS amplitudes over traces.
    """
    if threshold <= 0:
        raise ValidationError("threshold", f"must be > 0, got {threshold}")
    traces = list(traces)
    spectrum = power_spectrum(traces)
    period = spectrum.period
    Y = np.array([np.asarray(t.values, dtype=complex) for t in traces])
    Q = Y.shape[1]
    bw = spectrum.bin_width
    limit = max_components or Q // 2
    floor = threshold * spectrum.power.max()
    eps = np.empty(0)
    amps = np.empty((Y.shape[0], 0), dtype=complex)
    R = Y.copy()
    while len(eps) < limit:
        power = np.mean(np.abs(np.fft.ifft(R, axis=1)) ** 2, axis=0)
        k = int(np.argmax(power))
        if power[k] <= floor:
            break
        e_new, a_new, _ = _fit_component(R, k * bw, bw, period)
        eps = np.append(eps, e_new)
        amps = np.column_stack([amps, a_new])
        if len(eps) <= joint_limit:
            eps, amps = _joint_refine(Y, eps, bw, period)
            close = np.abs(eps[:-1] - eps[-1]) < 1e-3 * bw
            if close.any():
                # the new component collapsed onto an old one: nothing left to resolve
                eps, amps = eps[:-1], amps[:, :-1]
                eps, amps = _joint_refine(Y, eps, bw, period)
                R = Y - amps @ _waves(eps, period, Q).T
                break
        R = Y - amps @ _waves(eps, period, Q).T
    if len(eps) > joint_limit:
        for _ in range(sweeps):
            for j in range(len(eps)):
                R = R + np.outer(amps[:, j], _waves(eps[j : j + 1], period, Q)[:, 0])
                eps[j], amps[:, j], wave = _fit_component(R, eps[j], bw, period)
                R = R - np.outer(amps[:, j], wave)
    if not len(eps):
        return PeakSet(np.empty(0), np.empty(0), np.empty(0, int), bw)
    weights = np.sqrt(np.mean(np.abs(amps) ** 2, axis=0))
    folded = fold(eps, spectrum.omega)
    bins = np.mod(np.rint(eps / bw).astype(int), Q)
    if normalize:
        weights = weights / weights.sum()
    order = np.argsort(folded)
    return PeakSet(eps=folded[order], weights=weights[order], bins=bins[order], bin_width=bw)


def circular_distance(a, b, omega):
    d = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    return np.minimum(d, omega - d)


@dataclass(frozen=True)
class ResolutionReport:
    """How well a peak set reproduces a reference quasienergy list."""

    recovered: np.ndarray  # bool per reference level
    nearest_peak: np.ndarray  # index into the peak set, -1 if none
    merged: list  # groups of reference indices sharing one peak
    resolution: float


def resolution_report(peaks: PeakSet, reference_eps, omega: float) -> ResolutionReport:
    """Match reference levels to peaks within one DFT bin and flag merges."""
    ref = np.asarray(reference_eps, dtype=float)
    if len(peaks) == 0:
        return ResolutionReport(np.zeros(len(ref), bool), -np.ones(len(ref), int), [], peaks.bin_width)
    dist = circular_distance(ref, peaks.eps, omega)
    nearest = np.argmin(dist, axis=1)
    recovered = dist[np.arange(len(ref)), nearest] <= peaks.bin_width
    merged = []
    for p in np.unique(nearest[recovered]):
        group = np.nonzero(recovered & (nearest == p))[0]
        if len(group) > 1:
            merged.append(group.tolist())
    return ResolutionReport(recovered, np.where(recovered, nearest, -1), merged, peaks.bin_width)


def single_particle_configurations(L: int):
    return [(i,) for i in range(1, L + 1)]


def pair_configurations(L: int):
    return list(combinations(range(1, L + 1), 2))


@dataclass(frozen=True)
class SpectroscopyRun:
    traces: list
    spectrum: PowerSpectrum
    peaks: PeakSet
    floquet: SectorFloquet
    configurations: list


def run_spectroscopy(
    params: ModelParams,
    disorder: DisorderRealization | None = None,
    Q: int = 700,
    N: int = 1,
    settings: PropagatorSettings | None = None,
    threshold: float = 1e-3,
    noise_sigma: float = 0.0,
    include_dc: bool | None = None,
    observable: str | None = None,
    seed: int = 0,
    method: str = "relax",
) -> SpectroscopyRun:
    """Full protocol: prepare each configuration, record, average, pick peaks.

    N=1 pulses every single site and records the complex quadrature of that
    site; N=2 pulses every site pair and records X_iX_j. Bin 0 is skipped for
    real observables, whose static background lands there; the complex
    quadrature has no static part, so by default its bin 0 is kept. Those
    bin-0 rules apply to the plain local-maximum picker (``method="local-max"``);
    the default subtraction method fits every component, static ones included.
    """
    if N == 1:
        configs = single_particle_configurations(params.L)
        observable = observable or "X_i+iP_i"
    elif N == 2:
        configs = pair_configurations(params.L)
        observable = observable or "X_iX_j"
    else:
        raise ValidationError("N", "spectroscopy supports one- and two-particle preparations")
    floquet = SectorFloquet.compute(N, params, disorder, settings)
    rng = np.random.default_rng(seed)
    traces = [
        stroboscopic_trace(
            prepare_superposition(c, params.L), observable, Q, floquet=floquet, noise_sigma=noise_sigma, rng=rng
        )
        for c in configs
    ]
    spectrum = power_spectrum(traces)
    if method == "relax":
        peaks = relax_peaks(traces, threshold)
    elif method == "local-max":
        if include_dc is None:
            include_dc = observable == "X_i+iP_i"
        peaks = extract_peaks(spectrum, threshold, include_dc=include_dc)
    else:
        raise ValidationError("method", f"expected 'relax' or 'local-max', got {method!r}")
    return SpectroscopyRun(traces=traces, spectrum=spectrum, peaks=peaks, floquet=floquet, configurations=configs)


def direct_weights(result: FloquetResult, basis: FockBasis, configurations) -> np.ndarray:
    """|C_{lambda,l}|^2 for each prepared configuration (rows) and Floquet state."""
    rows = []
    for c in configurations:
        occ = [0] * basis.L
        for s in c:
            occ[s - 1] = 1
        rows.append(np.abs(result.modes[index_of(occ, basis) - 1]) ** 2)
    return np.array(rows)


def averaged_direct_weights(result: FloquetResult, basis: FockBasis, configurations) -> np.ndarray:
    """RMS over configurations of |C_lambda|^2: what an averaged peak height measures."""
    w = direct_weights(result, basis, configurations)
    return np.sqrt(np.mean(w**2, axis=0))
