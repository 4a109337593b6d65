"""EEG preprocessing: bipolar derivation, IIR filtering, SWT denoising."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pywt
from scipy import signal as sps

from .errors import ChannelError, InputError, ParameterError, StructureError

WAVELET = "coif3"
SWT_LEVEL = 6


@dataclass(frozen=True)
class BipolarPair:
    positive: str
    negative: str

    def __post_init__(self):
        if self.positive == self.negative:
            raise ParameterError(
                f"bipolar pair needs two distinct electrodes, got {self.positive}-{self.negative}"
            )

    @property
    def label(self) -> str:
        return f"{self.positive}-{self.negative}"

    @classmethod
    def parse(cls, text: str) -> "BipolarPair":
        pos, sep, neg = text.partition("-")
        if not sep or not pos or not neg:
            raise ParameterError(f"cannot parse bipolar pair {text!r}")
        return cls(pos.strip(), neg.strip())


DEFAULT_PAIRS = tuple(
    BipolarPair.parse(p)
    for p in ("Cz-Oz", "C3-C4", "F3-Cz", "F3-C4", "P7-Oz", "P8-Oz", "Pz-Oz", "P3-Oz")
)


@dataclass
class RawRecording:
    """Multichannel recording, ``data`` is channels x samples."""

    sample_rate_hz: float
    channel_names: list[str]
    data: np.ndarray

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        self.channel_names = [str(n) for n in self.channel_names]
        if not self.sample_rate_hz > 0:
            raise InputError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.data.ndim != 2 or self.data.shape[0] != len(self.channel_names):
            raise InputError(
                f"{len(self.channel_names)} channel names for data of shape {self.data.shape}"
            )
        if len(set(self.channel_names)) != len(self.channel_names):
            raise InputError("duplicate channel names")
        if not np.all(np.isfinite(self.data)):
            raise InputError("recording contains NaN or Inf samples")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.data[self.channel_names.index(name)]
        except ValueError:
            raise ChannelError(name) from None

    def with_data(self, data: np.ndarray, names=None) -> "RawRecording":
        return RawRecording(self.sample_rate_hz, list(names or self.channel_names), data)


@dataclass
class WaveletBands:
    """Stationary wavelet coefficients of one padded signal.

    ``details[0]`` is the finest band (level 1, upper half of the spectrum);
    ``details[-1]`` is level ``level``. ``pad`` holds (left, right) padding
    and ``length`` the original signal length.
    """

    level: int
    approximation: np.ndarray
    details: list[np.ndarray]
    pad: tuple[int, int] = (0, 0)
    length: int | None = None
    wavelet: str = WAVELET

    def bands(self) -> list[np.ndarray]:
        """All bands ordered from lowest to highest frequency."""
        return [self.approximation, *reversed(self.details)]

    def replace(self, approximation, details) -> "WaveletBands":
        return WaveletBands(self.level, approximation, list(details), self.pad, self.length, self.wavelet)


def derive_bipolar(rec: RawRecording, pairs=DEFAULT_PAIRS) -> RawRecording:
    pairs = [p if isinstance(p, BipolarPair) else BipolarPair.parse(p) for p in pairs]
    rows = [rec.channel(p.positive) - rec.channel(p.negative) for p in pairs]
    return rec.with_data(np.vstack(rows) if rows else np.empty((0, rec.n_samples)),
                         [p.label for p in pairs])


def _check_frequency(freq: float, fs: float, what: str):
    if not 0 < freq < fs / 2:
        raise ParameterError(f"{what} {freq} Hz outside (0, {fs / 2}) for fs={fs} Hz")


def highpass_sos(cutoff_hz: float, fs: float, order: int = 4) -> np.ndarray:
    _check_frequency(cutoff_hz, fs, "high-pass cutoff")
    return sps.butter(order, cutoff_hz, btype="highpass", fs=fs, output="sos")


def notch_ba(center_hz: float, fs: float, quality: float = 30.0):
    _check_frequency(center_hz, fs, "notch center")
    return sps.iirnotch(center_hz, quality, fs=fs)


def highpass_filter(rec: RawRecording, cutoff_hz: float = 0.5, order: int = 4) -> RawRecording:
    """Zero-phase Butterworth high-pass applied forward and backward."""
    sos = highpass_sos(cutoff_hz, rec.sample_rate_hz, order)
    return rec.with_data(sps.sosfiltfilt(sos, rec.data, axis=-1))


def notch_filter(rec: RawRecording, center_hz: float = 60.0, quality: float = 30.0) -> RawRecording:
    b, a = notch_ba(center_hz, rec.sample_rate_hz, quality)
    return rec.with_data(sps.filtfilt(b, a, rec.data, axis=-1))


def band_edges(fs: float, level: int = SWT_LEVEL) -> list[tuple[float, float]]:
    """Nominal frequency range of each SWT band, lowest band first."""
    edges = [(0.0, fs / 2 ** (level + 1))]
    for j in range(level, 0, -1):
        edges.append((fs / 2 ** (j + 1), fs / 2 ** j))
    return edges


def swt_decompose(x, level: int = SWT_LEVEL, wavelet: str = WAVELET) -> WaveletBands:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InputError("swt_decompose needs a non-empty 1-D signal")
    if level < 1:
        raise ParameterError(f"level must be >= 1, got {level}")
    block = 2 ** level
    total = -(-x.size // block) * block
    left = (total - x.size) // 2
    right = total - x.size - left
    padded = np.pad(x, (left, right), mode="symmetric")
    coeffs = pywt.swt(padded, wavelet, level=level, trim_approx=True, norm=True)
    return WaveletBands(level, coeffs[0], list(reversed(coeffs[1:])), (left, right), x.size, wavelet)


def threshold_bands(bands: WaveletBands, k: float = 1.5) -> WaveletBands:
    """Replace outlying coefficients by their band mean.

    A coefficient is an outlier when it lies more than ``k`` sample standard
    deviations from the band mean; statistics come from the unmodified band.
    """
    if not k > 0:
        raise ParameterError(f"threshold multiplier must be positive, got {k}")

    def clip(band):
        band = np.asarray(band, dtype=np.float64)
        if band.size < 2:
            return band.copy()
        mean = band.mean()
        std = band.std(ddof=1)
        return np.where(np.abs(band - mean) > k * std, mean, band)

    return bands.replace(clip(bands.approximation), [clip(d) for d in bands.details])


def swt_reconstruct(bands: WaveletBands) -> np.ndarray:
    all_bands = [bands.approximation, *bands.details]
    if len(bands.details) != bands.level:
        raise StructureError(f"expected {bands.level} detail bands, got {len(bands.details)}")
    n = len(bands.approximation)
    if any(len(b) != n for b in all_bands):
        raise StructureError("wavelet bands have inconsistent lengths")
    if n % 2 ** bands.level:
        raise StructureError(f"band length {n} is not a multiple of 2^{bands.level}")
    coeffs = [bands.approximation, *reversed(bands.details)]
    y = pywt.iswt(coeffs, bands.wavelet, norm=True)
    left, right = bands.pad
    return y[left:n - right] if right else y[left:]


def wavelet_denoise(x, k: float = 1.5, level: int = SWT_LEVEL) -> np.ndarray:
    return swt_reconstruct(threshold_bands(swt_decompose(x, level), k))


def denoise(rec: RawRecording, *, highpass_hz: float = 0.5, notch_hz: float | None = 60.0,
            wavelet_k: float | None = 1.5, level: int = SWT_LEVEL) -> RawRecording:
    """High-pass, notch, then SWT outlier thresholding, channel by channel.

    Pass ``notch_hz=None`` or ``wavelet_k=None`` to skip a stage.
    """
    out = highpass_filter(rec, highpass_hz)
    if notch_hz is not None:
        out = notch_filter(out, notch_hz)
    if wavelet_k is not None:
        data = np.vstack([wavelet_denoise(ch, wavelet_k, level) for ch in out.data]) \
            if out.n_channels else out.data
        out = out.with_data(data)
    return out
