"""Synthetic labeled EEG sessions standing in for the simulator recordings.

Each subject gets one continuous recording of 8 bipolar-equivalent channels:

    unlabeled lead-in | engaged block | disengaged block | unlabeled tail

Unlabeled stretches switch between the two states with random dwell times.
Every channel is a sum of band-limited rhythms whose log-amplitudes wander
slowly (per-channel, per-band AR(1) processes in dB), plus pink background,
mains interference, baseline drift and sparse spikes. Disengagement raises
alpha power on the posterior channels and lowers 15-30 Hz power everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from ..features import FeatureMatrix, UNLABELED, featurize
from ..signal import DEFAULT_PAIRS, RawRecording, denoise

ENGAGED, DISENGAGED = 1, 0

# (low Hz, high Hz, baseline amplitude, nuisance std in dB)
DEFAULT_BANDS = (
    ("delta", 1.0, 4.0, 1.2, 8.0),
    ("theta", 4.0, 8.0, 1.0, 7.0),
    ("alpha", 8.0, 13.0, 1.0, 2.0),
    ("beta", 13.0, 30.0, 0.6, 2.0),
    ("gamma_low", 30.0, 37.0, 0.3, 8.0),
    ("gamma_high", 37.0, 45.0, 0.3, 8.0),
)


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 15
    labeled_minutes_per_class: float = 10.0
    unlabeled_minutes: float = 10.0
    sample_rate_hz: float = 200.0
    seed: int = 0
    channels: tuple = tuple(p.label for p in DEFAULT_PAIRS)
    alpha_channels: tuple = ("Cz-Oz", "P7-Oz", "P8-Oz", "Pz-Oz", "P3-Oz")
    alpha_gain_db: float = 4.0
    beta_change_db: float = -2.0
    bands: tuple = DEFAULT_BANDS
    nuisance_tau_s: float = 8.0
    broadband_gain_std_db: float = 1.5
    pink_amplitude: float = 0.5
    line_noise_amplitude: float = 2.0
    drift_amplitude: float = 5.0
    spike_rate_per_min: float = 1.0
    spike_amplitude: float = 30.0
    dwell_mean_s: float = 20.0
    subject_spread_db: float = 2.0
    preprocess: bool = True

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ValueError("n_subjects must be >= 1")
        if self.labeled_minutes_per_class <= 0 or self.unlabeled_minutes < 0:
            raise ValueError("durations must be positive")


@dataclass
class SubjectSession:
    subject_id: str
    recording: RawRecording
    state: np.ndarray  # per-sample 1 engaged, 0 disengaged (drives the rhythms)
    labeled: np.ndarray  # per-sample 1 engaged, 0 disengaged, -1 unlabeled


def _ar1_db(rng, n_steps, n_series, std_db, tau_steps):
    """Stationary AR(1) log-amplitude paths, shape (n_series, n_steps)."""
    rho = np.exp(-1.0 / max(tau_steps, 1e-9))
    innov = rng.normal(0.0, std_db * np.sqrt(1 - rho ** 2), (n_series, n_steps))
    out = np.empty_like(innov)
    out[:, 0] = rng.normal(0.0, std_db, n_series)
    for k in range(1, n_steps):
        out[:, k] = rho * out[:, k - 1] + innov[:, k]
    return out


def _to_samples(per_second, n, fs):
    t_sec = np.arange(per_second.shape[-1])
    t = np.arange(n) / fs
    return np.vstack([np.interp(t, t_sec, row) for row in np.atleast_2d(per_second)])


def _pink(rng, shape):
    white = rng.normal(size=shape)
    spec = np.fft.rfft(white, axis=-1)
    f = np.arange(spec.shape[-1], dtype=np.float64)
    f[0] = 1.0
    pink = np.fft.irfft(spec / np.sqrt(f), n=shape[-1], axis=-1)
    return pink / pink.std(axis=-1, keepdims=True)


def _state_track(rng, cfg: SynthConfig):
    """Per-second engagement state and label, lead-in / engaged / disengaged / tail."""
    lab = int(round(cfg.labeled_minutes_per_class * 60))
    unl = int(round(cfg.unlabeled_minutes * 60))
    lead = unl // 2
    tail = unl - lead

    def switching(n):
        out = np.empty(n, dtype=np.int64)
        k, cur = 0, int(rng.integers(0, 2))
        while k < n:
            dwell = max(3, int(rng.exponential(cfg.dwell_mean_s)))
            out[k:k + dwell] = cur
            k += dwell
            cur = 1 - cur
        return out

    state = np.concatenate([switching(lead), np.full(lab, ENGAGED), np.full(lab, DISENGAGED), switching(tail)])
    label = np.concatenate([np.full(lead, UNLABELED), np.full(lab, ENGAGED),
                            np.full(lab, DISENGAGED), np.full(tail, UNLABELED)])
    return state, label


def generate_subject(cfg: SynthConfig, index: int) -> SubjectSession:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))
    fs = cfg.sample_rate_hz
    state_s, label_s = _state_track(rng, cfg)
    n_sec = state_s.size
    n = int(round(n_sec * fs))
    n_ch = len(cfg.channels)
    posterior = np.array([ch in cfg.alpha_channels for ch in cfg.channels])

    # smooth the state over ~1 s so switches are not instantaneous
    disengaged = _to_samples(np.convolve(1.0 - state_s, np.ones(3) / 3, mode="same")[None], n, fs)[0]
    tau = cfg.nuisance_tau_s
    data = np.zeros((n_ch, n))
    subject_offsets = rng.normal(0.0, cfg.subject_spread_db, (len(cfg.bands), n_ch))
    for k, (name, lo, hi, amp, std_db) in enumerate(cfg.bands):
        sos = sps.butter(4, [lo, hi], btype="bandpass", fs=fs, output="sos")
        carrier = sps.sosfilt(sos, rng.normal(size=(n_ch, n)), axis=-1)
        carrier /= carrier.std(axis=-1, keepdims=True)
        env_db = _to_samples(_ar1_db(rng, n_sec, n_ch, std_db, tau), n, fs)
        env_db += subject_offsets[k][:, None]
        if name == "alpha":
            env_db += cfg.alpha_gain_db * disengaged[None, :] * posterior[:, None]
        if lo >= 13.0 and hi <= 30.0:
            env_db += cfg.beta_change_db * disengaged[None, :]
        data += amp * 10 ** (env_db / 20.0) * carrier

    gain_db = _to_samples(_ar1_db(rng, n_sec, n_ch, cfg.broadband_gain_std_db, tau), n, fs)
    data = data * 10 ** (gain_db / 20.0) + cfg.pink_amplitude * _pink(rng, (n_ch, n))

    t = np.arange(n) / fs
    phase = rng.uniform(0, 2 * np.pi, (n_ch, 1))
    data += cfg.line_noise_amplitude * np.sin(2 * np.pi * 60.0 * t + phase)
    drift_f = rng.uniform(0.02, 0.2, (n_ch, 1))
    data += cfg.drift_amplitude * np.sin(2 * np.pi * drift_f * t + phase)
    n_spikes = rng.poisson(cfg.spike_rate_per_min * n / fs / 60.0 * n_ch)
    for _ in range(n_spikes):
        ch, pos = int(rng.integers(n_ch)), int(rng.integers(n - 4))
        data[ch, pos:pos + 4] += cfg.spike_amplitude * rng.choice((-1.0, 1.0)) * np.hanning(6)[1:5]

    rec = RawRecording(fs, list(cfg.channels), data)
    per_sample = lambda track: np.repeat(track, int(round(fs)))[:n]  # noqa: E731
    return SubjectSession(f"S{index + 1:02d}", rec, per_sample(state_s), per_sample(label_s))


def session_features(session: SubjectSession, preprocess: bool = True) -> FeatureMatrix:
    """Featurize one session; an epoch takes the label at its centre sample."""
    rec = denoise(session.recording) if preprocess else session.recording
    fm = featurize(rec, subject_id=session.subject_id)
    fs = rec.sample_rate_hz
    centre = np.minimum(((fm.times + 1.5) * fs).astype(np.int64), rec.n_samples - 1)
    fm.labels = session.labeled[centre].astype(np.int64)
    return fm


def generate_synthetic(cfg: SynthConfig):
    """Yield one SubjectSession per subject, deterministic in ``cfg.seed``."""
    for index in range(cfg.n_subjects):
        yield generate_subject(cfg, index)


def synthetic_dataset(cfg: SynthConfig) -> dict[str, FeatureMatrix]:
    return {s.subject_id: session_features(s, cfg.preprocess) for s in generate_synthetic(cfg)}
