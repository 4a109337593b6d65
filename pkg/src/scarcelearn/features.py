"""Epoching, 1-Hz log-PSD features, standardization and the PCA baseline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import get_window

from .errors import InputError, ParameterError, ShapeError
from .signal import RawRecording

N_CHANNELS = 8
FREQS_HZ = np.arange(1, 40)
N_FEATURES = N_CHANNELS * FREQS_HZ.size
LOG_FLOOR = 1e-12
UNLABELED = -1


@dataclass
class FeatureMatrix:
    """N x D feature rows with optional labels.

    ``labels`` holds 1 (engaged), 0 (disengaged) or -1 (unlabeled).
    ``index`` carries stable row ids, used by the leakage audit.
    """

    values: np.ndarray
    labels: np.ndarray | None = None
    times: np.ndarray | None = None
    subject_id: str = ""
    index: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        n = self.values.shape[0]
        if not np.all(np.isfinite(self.values)):
            raise InputError("feature matrix contains NaN or Inf")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if self.labels.size != n:
                raise ShapeError(f"{self.labels.size} labels for {n} rows")
            if not np.isin(self.labels, (UNLABELED, 0, 1)).all():
                raise InputError("labels must be 0, 1 or -1 (unlabeled)")
        self.times = (np.arange(n, dtype=np.float64) if self.times is None
                      else np.asarray(self.times, dtype=np.float64).reshape(-1))
        if self.times.size != n:
            raise ShapeError(f"{self.times.size} times for {n} rows")
        self.index = (np.arange(n, dtype=np.int64) if self.index is None
                      else np.asarray(self.index, dtype=np.int64).reshape(-1))
        if self.index.size != n:
            raise ShapeError(f"{self.index.size} row ids for {n} rows")

    def __len__(self):
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None and bool(np.any(self.labels != UNLABELED))

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return FeatureMatrix(
            self.values[rows],
            None if self.labels is None else self.labels[rows],
            self.times[rows],
            self.subject_id,
            self.index[rows],
        )

    def labeled(self) -> "FeatureMatrix":
        if self.labels is None:
            return self.take(np.zeros(len(self), dtype=bool))
        return self.take(self.labels != UNLABELED)

    def unlabeled(self) -> "FeatureMatrix":
        if self.labels is None:
            return self.take(np.ones(len(self), dtype=bool))
        return self.take(self.labels == UNLABELED)

    def with_values(self, values) -> "FeatureMatrix":
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if values.shape[0] != len(self):
            raise ShapeError(f"{values.shape[0]} rows replacing {len(self)}")
        return replace(self, values=values)

    @staticmethod
    def concat(parts) -> "FeatureMatrix":
        parts = list(parts)
        labels = [p.labels if p.labels is not None else np.full(len(p), UNLABELED) for p in parts]
        return FeatureMatrix(
            np.vstack([p.values for p in parts]),
            np.concatenate(labels),
            np.concatenate([p.times for p in parts]),
            parts[0].subject_id if parts else "",
            np.concatenate([p.index for p in parts]),
        )


def _samples(seconds: float, fs: float, what: str) -> int:
    n = seconds * fs
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise ParameterError(f"{what} of {seconds} s is not a whole number of samples at {fs} Hz")
    return int(round(n))


def epoch_signal(rec: RawRecording, window_s: float = 3.0, step_s: float = 1.0):
    """Slice a recording into overlapping windows.

    Returns ``(epochs, start_times)`` with epochs shaped (n_epochs, channels, window).
    """
    fs = rec.sample_rate_hz
    win = _samples(window_s, fs, "window")
    step = _samples(step_s, fs, "step")
    if rec.n_samples < win:
        raise InputError(f"recording of {rec.duration_s:g} s is shorter than the {window_s:g} s window")
    count = (rec.n_samples - win) // step + 1
    starts = np.arange(count) * step
    view = np.lib.stride_tricks.sliding_window_view(rec.data, win, axis=1)[:, starts]
    return np.ascontiguousarray(view.transpose(1, 0, 2)), starts / fs


def bin_powers(epochs, fs: float = 200.0) -> np.ndarray:
    """Linear power in 1-Hz bins centred on 1..39 Hz, shape (..., channels, 39).

    Hann-windowed periodogram; power is density times frequency spacing, so
    the bins of a stationary signal sum to at most its mean square.
    """
    epochs = np.asarray(epochs, dtype=np.float64)
    n = epochs.shape[-1]
    win = get_window("hann", n, fftbins=True)
    spec = np.fft.rfft(epochs * win, axis=-1)
    density = np.abs(spec) ** 2 / (fs * np.sum(win ** 2))
    density[..., 1:] *= 2.0
    if n % 2 == 0:
        density[..., -1] /= 2.0
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    df = fs / n
    out = np.empty(epochs.shape[:-1] + (FREQS_HZ.size,))
    for k, f in enumerate(FREQS_HZ):
        sel = (freqs >= f - 0.5) & (freqs < f + 0.5)
        out[..., k] = density[..., sel].sum(axis=-1) * df
    return out


def psd_features(epoch, fs: float = 200.0, window_s: float = 3.0) -> np.ndarray:
    """312 log-power features (39 bins x 8 channels, channel-major) for one epoch."""
    epoch = np.asarray(epoch, dtype=np.float64)
    expected = (N_CHANNELS, _samples(window_s, fs, "window"))
    if epoch.shape != expected:
        raise ShapeError(f"epoch shape {epoch.shape}, expected {expected}")
    return log_power(bin_powers(epoch, fs)).reshape(-1)


def log_power(power):
    return 10.0 * np.log10(np.asarray(power) + LOG_FLOOR)


def featurize(rec: RawRecording, window_s: float = 3.0, step_s: float = 1.0,
              subject_id: str = "", labels=None, time_offset_s: float = 0.0) -> FeatureMatrix:
    """Epoch a recording and compute PSD features for every epoch."""
    if rec.n_channels != N_CHANNELS:
        raise ShapeError(f"expected {N_CHANNELS} channels, got {rec.n_channels}")
    epochs, starts = epoch_signal(rec, window_s, step_s)
    values = log_power(bin_powers(epochs, rec.sample_rate_hz)).reshape(len(epochs), -1)
    if labels is not None and np.ndim(labels) == 0:
        labels = np.full(len(epochs), int(labels))
    return FeatureMatrix(values, labels, starts + time_offset_s, subject_id)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X):
        if isinstance(X, FeatureMatrix):
            return X.with_values(self.apply(X.values))
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.size:
            raise ShapeError(f"standardizer fitted on {self.mean.size} features, got {X.shape[-1]}")
        return (X - self.mean) / self.std


def fit_standardizer(train, floor: float = 1e-8) -> Standardizer:
    X = train.values if isinstance(train, FeatureMatrix) else np.atleast_2d(np.asarray(train, float))
    if X.shape[0] < 2:
        raise InputError("standardizer needs at least 2 rows")
    return Standardizer(X.mean(axis=0), np.maximum(X.std(axis=0), floor))


def apply_standardizer(s: Standardizer, X):
    return s.apply(X)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # D x M, orthonormal columns
    explained_variance: np.ndarray = field(default=None)

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def transform(self, X):
        if isinstance(X, FeatureMatrix):
            return X.with_values(self.transform(X.values))
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.size:
            raise ShapeError(f"PCA fitted on {self.mean.size} features, got {X.shape[-1]}")
        return (X - self.mean) @ self.components

    def inverse_transform(self, Z):
        return np.asarray(Z) @ self.components.T + self.mean


def pca_fit(train, m: int = 30) -> PcaModel:
    X = train.values if isinstance(train, FeatureMatrix) else np.atleast_2d(np.asarray(train, float))
    n, d = X.shape
    if not 1 <= m <= min(n - 1, d):
        raise ParameterError(f"cannot keep {m} components from {n} rows of dimension {d}")
    mean = X.mean(axis=0)
    cov = np.cov(X - mean, rowvar=False, bias=False).reshape(d, d)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:m]
    comps = evecs[:, order]
    # deterministic sign: largest-magnitude loading positive
    signs = np.sign(comps[np.argmax(np.abs(comps), axis=0), np.arange(m)])
    comps = comps * np.where(signs == 0, 1.0, signs)
    return PcaModel(mean, comps, evals[order])


def pca_transform(model: PcaModel, X):
    return model.transform(X)
