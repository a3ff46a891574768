"""Sliding-window features vs brute-force oracles."""

import numpy as np
import pytest

from startdetect.features import (Column, FeatureError, FeatureMatrix,
                                  FeatureSpec, assemble, raw4, window_dft,
                                  window_stats)
from startdetect.signal import CHANNELS, CanonicalSignal


def _signal(rng, n=300, rate=100.0):
    return CanonicalSignal(values=rng.normal(size=(n, 4)), rate_hz=rate)


def _brute_stats(x, t, w, order):
    """Independent per-row recomputation of every statistic."""
    win = x[max(t - w + 1, 0):t + 1]
    v = np.vander(np.arange(len(win), dtype=float), order + 1,
                  increasing=True)
    coef, *_ = np.linalg.lstsq(v, win, rcond=None)
    if len(win) < order + 1:  # underdetermined: min-norm solution
        coef = np.linalg.pinv(v) @ win
    return np.concatenate([[win.mean(), win.var(), (win ** 2).mean(),
                            win.min(), win.max()], coef])


def _brute_dft(x, t, w, degree):
    """O(N^2) direct summation with left zero padding."""
    padded = np.concatenate([np.zeros(w - 1), x])
    win = padded[t:t + w]
    mags, phases = [], []
    for k in range(1, degree + 1):
        c = sum(win[i] * np.exp(-2j * np.pi * k * i / w) for i in range(w))
        mags.append(abs(c))
        ph = np.angle(c)
        phases.append(np.pi if ph <= -np.pi else ph)
    return np.array(mags + phases)


class TestWindowStats:
    def test_matches_brute_force(self, rng):
        # [DERIVED] oracle: direct recomputation per (row, channel, window)
        sig = _signal(rng, n=260)
        spec = FeatureSpec(kind="stats", stat_windows_ms=[100, 500, 2000])
        fm = window_stats(sig, spec)
        cols = {c.name: i for i, c in enumerate(fm.columns)}
        stat_names = ["mean", "var", "energy", "min", "max",
                      "poly0", "poly1", "poly2"]
        for t in [0, 1, 3, 9, 10, 49, 120, 259]:
            for ci, ch in enumerate(CHANNELS):
                for ms in [100, 500, 2000]:
                    w = int(ms / 10)
                    expected = _brute_stats(sig.values[:, ci], t, w, 2)
                    got = [fm.values[t, cols[f"{ch}.{s}.w{ms}"]]
                           for s in stat_names]
                    np.testing.assert_allclose(
                        got, expected, atol=1e-9, rtol=1e-9,
                        err_msg=f"t={t} ch={ch} w={ms}")

    def test_column_count(self, rng):
        fm = window_stats(_signal(rng), FeatureSpec(kind="stats"))
        # 4 channels x 4 windows x (5 stats + 3 poly coefficients)
        assert len(fm.columns) == 128

    def test_causality(self, rng):
        sig = _signal(rng, n=200)
        spec = FeatureSpec(kind="stats", stat_windows_ms=[500])
        a = window_stats(sig, spec)
        tampered = sig.values.copy()
        tampered[150:] += 100.0  # future relative to row 149
        b = window_stats(CanonicalSignal(tampered, sig.rate_hz), spec)
        np.testing.assert_array_equal(a.values[:150], b.values[:150])

    def test_poly_recovers_exact_trend(self):
        # a quadratic signal is fit exactly: poly2 of 3 + 2x + x^2
        n, w = 80, 50
        x = np.arange(n, dtype=float)
        vals = np.zeros((n, 4))
        # evaluate the polynomial in window-local coordinates per row
        sig = CanonicalSignal(vals, 100.0)
        for t in range(n):
            lo = max(t - w + 1, 0)
            local = np.arange(t - lo + 1, dtype=float)
            sig.values[lo:t + 1, 0] = 3 + 2 * local + local ** 2
        fm = window_stats(sig, FeatureSpec(kind="stats",
                                           stat_windows_ms=[500]))
        cols = {c.name: i for i, c in enumerate(fm.columns)}
        t = n - 1
        got = [fm.values[t, cols[f"acc_mag_xy.poly{d}.w500"]]
               for d in range(3)]
        np.testing.assert_allclose(got, [3.0, 2.0, 1.0], atol=1e-8)

    def test_rejects_window_not_on_grid(self, rng):
        with pytest.raises(FeatureError, match="multiple"):
            window_stats(_signal(rng),
                         FeatureSpec(kind="stats", stat_windows_ms=[105]))


class TestWindowDft:
    def test_matches_direct_summation(self, rng):
        sig = _signal(rng, n=120)
        spec = FeatureSpec(kind="dft", dft_windows_ms=[640], dft_degree=5)
        fm = window_dft(sig, spec)
        cols = {c.name: i for i, c in enumerate(fm.columns)}
        for t in [0, 5, 63, 64, 119]:
            for ci, ch in enumerate(CHANNELS):
                expected = _brute_dft(sig.values[:, ci], t, 64, 5)
                got = [fm.values[t, cols[f"{ch}.dft_mag_k{k}.w640"]]
                       for k in range(1, 6)]
                got += [fm.values[t, cols[f"{ch}.dft_phase_k{k}.w640"]]
                        for k in range(1, 6)]
                np.testing.assert_allclose(got, expected, atol=1e-9,
                                           rtol=1e-9)

    def test_pure_cosine_magnitude(self):
        # [DERIVED] X_k of A*cos(2 pi k n / N) has magnitude A*N/2 at k
        n_samp, k, amp = 64, 3, 2.5
        x = amp * np.cos(2 * np.pi * k * np.arange(200) / n_samp)
        vals = np.zeros((200, 4))
        vals[:, 1] = x
        fm = window_dft(CanonicalSignal(vals, 100.0),
                        FeatureSpec(kind="dft", dft_windows_ms=[640]))
        cols = {c.name: i for i, c in enumerate(fm.columns)}
        row = 199  # full window, coherent with the cosine period
        assert fm.values[row, cols["acc_z.dft_mag_k3.w640"]] == \
            pytest.approx(amp * n_samp / 2, rel=1e-9)
        assert fm.values[row, cols["acc_z.dft_mag_k2.w640"]] == \
            pytest.approx(0.0, abs=1e-9)

    def test_column_count(self, rng):
        fm = window_dft(_signal(rng), FeatureSpec(kind="dft"))
        # 4 channels x 2 windows x 5 harmonics x (mag + phase)
        assert len(fm.columns) == 80

    def test_phase_in_half_open_interval(self, rng):
        fm = window_dft(_signal(rng, n=400), FeatureSpec(kind="dft"))
        phase_idx = [i for i, c in enumerate(fm.columns)
                     if c.stat.startswith("dft_phase")]
        ph = fm.values[:, phase_idx]
        assert np.all(ph > -np.pi) and np.all(ph <= np.pi)


class TestAssemble:
    def test_stats_plus_dft_column_total(self, rng):
        sig = _signal(rng)
        total = len(window_stats(sig, FeatureSpec()).columns) + \
            len(window_dft(sig, FeatureSpec()).columns)
        assert total == 208

    def test_raw4_passthrough(self, rng):
        sig = _signal(rng)
        fm = raw4(sig)
        np.testing.assert_array_equal(fm.values, sig.values)
        assert fm.names == [f"{c}.raw" for c in CHANNELS]

    def test_composite_subset(self, rng):
        sig = _signal(rng, n=150)
        wanted = ["acc_z.mean.w500", "gyro_z.var.w100",
                  "acc_mag_xy.dft_phase_k1.w640"]
        fm = assemble(sig, FeatureSpec(kind="composite",
                                       composite_columns=wanted))
        assert fm.names == wanted
        full = FeatureMatrix.hstack([
            window_stats(sig, FeatureSpec()), window_dft(sig, FeatureSpec())])
        np.testing.assert_array_equal(fm.values,
                                      full.subset(wanted).values)

    def test_composite_requires_columns(self, rng):
        with pytest.raises(FeatureError, match="composite_columns"):
            assemble(_signal(rng), FeatureSpec(kind="composite"))

    def test_composite_rejects_duplicates(self, rng):
        with pytest.raises(FeatureError, match="duplicate"):
            assemble(_signal(rng), FeatureSpec(
                kind="composite",
                composite_columns=["acc_z.mean.w500", "acc_z.mean.w500"]))

    def test_unknown_kind_rejected(self, rng):
        with pytest.raises(FeatureError, match="unknown feature kind"):
            assemble(_signal(rng), FeatureSpec(kind="wavelets"))


class TestFeatureMatrix:
    def test_duplicate_columns_rejected(self):
        cols = [Column("acc_z", "mean", 100), Column("acc_z", "mean", 100)]
        with pytest.raises(FeatureError, match="duplicate"):
            FeatureMatrix(columns=cols, values=np.zeros((3, 2)))

    def test_nan_rejected(self):
        with pytest.raises(FeatureError, match="NaN"):
            FeatureMatrix(columns=[Column("acc_z", "mean", 100)],
                          values=np.array([[np.nan]]))

    def test_subset_unknown_column(self, rng):
        fm = raw4(_signal(rng, n=10))
        with pytest.raises(FeatureError, match="unknown columns"):
            fm.subset(["acc_z.median.w100"])

    def test_csv_roundtrip(self, rng, tmp_path):
        fm = window_stats(_signal(rng, n=40),
                          FeatureSpec(stat_windows_ms=[100]))
        path = tmp_path / "f.csv"
        fm.save_csv(path)
        back = FeatureMatrix.load_csv(path)
        assert back.names == fm.names
        np.testing.assert_allclose(back.values, fm.values, rtol=0, atol=0)

    def test_column_name_roundtrip(self):
        for c in [Column("acc_z", "mean", 500), Column("gyro_z", "raw")]:
            assert Column.parse(c.name) == c
