"""Sliding-window feature extraction over the canonical signal.

Four feature kinds are supported:

* ``raw4``      - the four canonical channels, passed through unchanged.
* ``stats``     - mean / variance / energy / min / max / polynomial fit
                  coefficients over several trailing windows.
* ``dft``       - magnitude and phase of low-order discrete Fourier
                  coefficients over trailing windows.
* ``composite`` - an explicit column subset of stats+dft (e.g. a selected
                  feature union concatenated with phase columns).

All windows are causal: the window for row t ends at t and never looks
ahead, so every feature can be computed online.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .signal import CHANNELS, CanonicalSignal

KINDS = ("raw4", "stats", "dft", "composite")

STAT_NAMES = ("mean", "var", "energy", "min", "max")


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class Column:
    """Descriptor of one feature column: source channel, statistic, window."""

    channel: str
    stat: str
    window_ms: int = 0

    @property
    def name(self) -> str:
        if self.window_ms == 0:
            return f"{self.channel}.{self.stat}"
        return f"{self.channel}.{self.stat}.w{self.window_ms}"

    @classmethod
    def parse(cls, name: str) -> "Column":
        parts = name.split(".")
        if len(parts) == 2:
            return cls(parts[0], parts[1], 0)
        if len(parts) == 3 and parts[2].startswith("w"):
            return cls(parts[0], parts[1], int(parts[2][1:]))
        raise FeatureError(f"unparseable column name: {name!r}")


@dataclass
class FeatureSpec:
    kind: str = "stats"
    stat_windows_ms: list[int] = field(
        default_factory=lambda: [100, 500, 1000, 2000])
    dft_windows_ms: list[int] = field(default_factory=lambda: [640, 5120])
    dft_degree: int = 5
    polynomial_order: int = 2
    composite_columns: list[str] | None = None

    def validate(self, rate_hz: float) -> None:
        if self.kind not in KINDS:
            raise FeatureError(f"unknown feature kind {self.kind!r}")
        period_ms = 1000.0 / rate_hz
        for ms in list(self.stat_windows_ms) + list(self.dft_windows_ms):
            n = ms / period_ms
            if ms <= 0 or abs(n - round(n)) > 1e-9 or round(n) < 1:
                raise FeatureError(
                    f"window of {ms} ms is not a positive multiple of the "
                    f"{period_ms} ms sample period")
        if self.dft_degree < 1:
            raise FeatureError("dft_degree must be >= 1")
        if self.polynomial_order < 0:
            raise FeatureError("polynomial_order must be >= 0")


@dataclass
class FeatureMatrix:
    columns: list[Column]
    values: np.ndarray  # (time_steps, n_features)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        names = self.names
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise FeatureError(f"duplicate column names: {dupes}")
        if self.values.shape != (self.values.shape[0], len(self.columns)):
            raise FeatureError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.columns)} columns")
        if not np.all(np.isfinite(self.values)):
            raise FeatureError("feature matrix contains NaN/Inf")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __len__(self):
        return len(self.values)

    def subset(self, names: list[str]) -> "FeatureMatrix":
        index = {c.name: i for i, c in enumerate(self.columns)}
        missing = [n for n in names if n not in index]
        if missing:
            raise FeatureError(f"unknown columns requested: {missing}")
        idx = [index[n] for n in names]
        return FeatureMatrix(columns=[self.columns[i] for i in idx],
                             values=self.values[:, idx])

    @staticmethod
    def hstack(parts: list["FeatureMatrix"]) -> "FeatureMatrix":
        if not parts:
            raise FeatureError("nothing to concatenate")
        rows = {len(p) for p in parts}
        if len(rows) != 1:
            raise FeatureError(f"row count mismatch across parts: {rows}")
        cols = [c for p in parts for c in p.columns]
        return FeatureMatrix(columns=cols,
                             values=np.hstack([p.values for p in parts]))

    # -- persistence: CSV + JSON sidecar of column descriptors -------------

    def save_csv(self, path: str | Path) -> None:
        path = Path(path)
        header = ",".join(self.names)
        np.savetxt(path, self.values, delimiter=",", header=header,
                   comments="", fmt="%.17g")
        sidecar = [{"channel": c.channel, "stat": c.stat,
                    "window_ms": c.window_ms} for c in self.columns]
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(sidecar, indent=1) + "\n")

    @classmethod
    def load_csv(cls, path: str | Path) -> "FeatureMatrix":
        path = Path(path)
        sidecar = json.loads(
            path.with_suffix(path.suffix + ".json").read_text())
        columns = [Column(d["channel"], d["stat"], d["window_ms"])
                   for d in sidecar]
        values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(columns=columns, values=values)


def _window_samples(ms: int, rate_hz: float) -> int:
    return int(round(ms * rate_hz / 1000.0))


def _polyfit_matrix(length: int, order: int) -> np.ndarray:
    """Least-squares projector onto polynomial coefficients (c0..c_order).

    Fit is over x = 0..length-1; underdetermined prefixes get the min-norm
    solution via the pseudoinverse.
    """
    v = np.vander(np.arange(length, dtype=float), order + 1, increasing=True)
    return np.linalg.pinv(v)


def window_stats(signal: CanonicalSignal, spec: FeatureSpec) -> FeatureMatrix:
    """Per channel x window x statistic feature matrix, causally aligned.

    Windows shorter than nominal at scene start are computed over the
    available prefix.
    """
    spec.validate(signal.rate_hz)
    n = len(signal)
    order = spec.polynomial_order
    stat_names = list(STAT_NAMES) + [f"poly{d}" for d in range(order + 1)]
    columns: list[Column] = []
    blocks: list[np.ndarray] = []
    proj_cache: dict[int, np.ndarray] = {}

    for ci, channel in enumerate(CHANNELS):
        x = signal.values[:, ci]
        for ms in spec.stat_windows_ms:
            w = _window_samples(ms, signal.rate_hz)
            out = np.empty((n, len(stat_names)))
            n_full = max(n - w + 1, 0)
            if n_full > 0:
                view = sliding_window_view(x, w)  # (n_full, w)
                full = np.empty((n_full, len(stat_names)))
                full[:, 0] = view.mean(axis=1)
                full[:, 1] = view.var(axis=1)
                full[:, 2] = (view ** 2).mean(axis=1)
                full[:, 3] = view.min(axis=1)
                full[:, 4] = view.max(axis=1)
                if w not in proj_cache:
                    proj_cache[w] = _polyfit_matrix(w, order)
                full[:, 5:] = view @ proj_cache[w].T
                out[w - 1:] = full
            for t in range(min(w - 1, n)):
                win = x[:t + 1]
                length = t + 1
                if length not in proj_cache:
                    proj_cache[length] = _polyfit_matrix(length, order)
                out[t, 0] = win.mean()
                out[t, 1] = win.var()
                out[t, 2] = (win ** 2).mean()
                out[t, 3] = win.min()
                out[t, 4] = win.max()
                out[t, 5:] = proj_cache[length] @ win
            blocks.append(out)
            columns.extend(Column(channel, s, ms) for s in stat_names)

    return FeatureMatrix(columns=columns, values=np.hstack(blocks))


def window_dft(signal: CanonicalSignal, spec: FeatureSpec) -> FeatureMatrix:
    """Magnitude and phase of DFT coefficients k = 1..degree per window.

    Convention: unnormalized X_k = sum_n x_n exp(-2 pi i k n / N) over the
    trailing window of N samples ending at the current row; rows earlier
    than N-1 use a left-zero-padded window. DC is excluded. Phase lies in
    (-pi, pi].
    """
    spec.validate(signal.rate_hz)
    n = len(signal)
    ks = np.arange(1, spec.dft_degree + 1)
    columns: list[Column] = []
    blocks: list[np.ndarray] = []

    for ci, channel in enumerate(CHANNELS):
        x = signal.values[:, ci]
        for ms in spec.dft_windows_ms:
            w = _window_samples(ms, signal.rate_hz)
            padded = np.concatenate([np.zeros(w - 1), x])
            view = sliding_window_view(padded, w)  # (n, w)
            basis = np.exp(-2j * np.pi * np.outer(np.arange(w), ks) / w)
            coef = view @ basis  # (n, K)
            mag = np.abs(coef)
            phase = np.angle(coef)
            phase = np.where(phase <= -np.pi, np.pi, phase)
            out = np.empty((n, 2 * len(ks)))
            out[:, :len(ks)] = mag
            out[:, len(ks):] = phase
            blocks.append(out)
            columns.extend(Column(channel, f"dft_mag_k{k}", ms) for k in ks)
            columns.extend(Column(channel, f"dft_phase_k{k}", ms) for k in ks)

    return FeatureMatrix(columns=columns, values=np.hstack(blocks))


def raw4(signal: CanonicalSignal) -> FeatureMatrix:
    return FeatureMatrix(
        columns=[Column(ch, "raw") for ch in CHANNELS],
        values=signal.values.copy())


def assemble(signal: CanonicalSignal, spec: FeatureSpec) -> FeatureMatrix:
    """Build the feature matrix requested by `spec.kind`."""
    spec.validate(signal.rate_hz)
    if spec.kind == "raw4":
        return raw4(signal)
    if spec.kind == "stats":
        return window_stats(signal, spec)
    if spec.kind == "dft":
        return window_dft(signal, spec)
    if spec.kind == "composite":
        if not spec.composite_columns:
            raise FeatureError("composite kind requires composite_columns")
        if len(set(spec.composite_columns)) != len(spec.composite_columns):
            dupes = sorted({c for c in spec.composite_columns
                            if spec.composite_columns.count(c) > 1})
            raise FeatureError(f"duplicate composite columns: {dupes}")
        full = FeatureMatrix.hstack(
            [window_stats(signal, spec), window_dft(signal, spec)])
        return full.subset(spec.composite_columns)
    raise FeatureError(f"unknown feature kind {spec.kind!r}")
