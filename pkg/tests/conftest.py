import numpy as np
import pytest

from scarcelearn.experiments.synth import SynthConfig, synthetic_dataset


def tone(freq, fs=200.0, seconds=10.0, amp=1.0, phase=0.0):
    t = np.arange(int(round(fs * seconds))) / fs
    return amp * np.sin(2 * np.pi * freq * t + phase)


def amplitude_at(x, freq, fs=200.0):
    """Amplitude of a sinusoid at ``freq`` by projection on sin/cos (integer cycles assumed)."""
    t = np.arange(x.size) / fs
    s = 2 * np.mean(x * np.sin(2 * np.pi * freq * t))
    c = 2 * np.mean(x * np.cos(2 * np.pi * freq * t))
    return float(np.hypot(s, c))


@pytest.fixture(scope="session")
def small_dataset():
    """Two short synthetic subjects, enough for end-to-end pipeline tests."""
    cfg = SynthConfig(n_subjects=2, labeled_minutes_per_class=3, unlabeled_minutes=2, seed=3)
    return synthetic_dataset(cfg)


# -- acceptance summary -------------------------------------------------------------

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Records one pass/fail line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":a-z"))):
        terminalreporter.write_line(line)
