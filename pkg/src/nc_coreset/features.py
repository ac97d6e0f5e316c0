"""Audio front-end: 16 kHz mono WAV loading, 3 s duration fix, 80-band log-mel.

Conventions (fixed so outputs reproduce byte-for-byte): periodic Hann window,
window length = FFT size = 512, hop 160, no center padding, power spectrum,
HTK mel scale (2595 * log10(1 + f/700)) with 82 equally-mel-spaced points
from 0 to 8000 Hz, no filter area normalization, natural log with floor 1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nc_coreset.errors import (
    ClipTooShort,
    CorruptFile,
    EmptyClip,
    NegativePower,
    ShapeMismatch,
    UnsupportedFormat,
)

SAMPLE_RATE = 16000
N_FFT = 512
HOP = 160
N_BANDS = 80
F_MIN = 0.0
F_MAX = 8000.0
LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray  # float64 in [-1, 1]
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class MelSpectrogram:
    bands: int
    frames: int
    values: np.ndarray  # (bands, frames) log-energies


def load_wav(path) -> AudioClip:
    """Read a 16-bit PCM mono 16 kHz RIFF/WAVE file; no silent resampling."""
    import wave

    try:
        with wave.open(str(path), "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            comp = wav.getcomptype()
            n = wav.getnframes()
            raw = wav.readframes(n)
    except wave.Error as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise CorruptFile(f"{path}: unexpected end of file") from exc

    if comp != "NONE" or width != 2:
        raise UnsupportedFormat(f"{path}: need 16-bit PCM, got {width * 8}-bit {comp}")
    if channels != 1:
        raise UnsupportedFormat(f"{path}: need mono, got {channels} channels")
    if rate != SAMPLE_RATE:
        raise UnsupportedFormat(f"{path}: need {SAMPLE_RATE} Hz, got {rate}")
    if len(raw) < 2 * n:
        raise CorruptFile(f"{path}: data chunk shorter than declared frame count")

    pcm = np.frombuffer(raw, dtype="<i2", count=n)
    return AudioClip(samples=pcm.astype(np.float64) / 32768.0, sample_rate=SAMPLE_RATE)


def fix_duration(clip: AudioClip, seconds: float = 3.0) -> AudioClip:
    """Trim to, or zero-pad up to, round(seconds * 16000) samples."""
    if len(clip) == 0:
        raise EmptyClip("cannot fix duration of an empty clip")
    target = int(round(seconds * clip.sample_rate))
    samples = clip.samples
    if len(samples) >= target:
        out = samples[:target]
    else:
        out = np.concatenate([samples, np.zeros(target - len(samples))])
    return AudioClip(samples=out, sample_rate=clip.sample_rate)


def hann_periodic(n: int = N_FFT) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


def frame_count(n_samples: int) -> int:
    return 1 + (n_samples - N_FFT) // HOP


def stft_power(clip: AudioClip) -> np.ndarray:
    """Power spectrogram, (257, frames); frames start at 0, 160, 320, ..."""
    samples = clip.samples
    if len(samples) < N_FFT:
        raise ClipTooShort(f"need >= {N_FFT} samples, got {len(samples)}")
    n_frames = frame_count(len(samples))
    window = hann_periodic()
    power = np.empty((N_FFT // 2 + 1, n_frames), dtype=np.float64)
    for t in range(n_frames):
        frame = samples[t * HOP : t * HOP + N_FFT] * window
        spectrum = np.fft.rfft(frame)
        power[:, t] = spectrum.real**2 + spectrum.imag**2
    return power


def hz_to_mel(f: np.ndarray | float) -> np.ndarray | float:
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m: np.ndarray | float) -> np.ndarray | float:
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges_hz(n_bands: int = N_BANDS) -> np.ndarray:
    """n_bands + 2 triangle corner frequencies, equally spaced on the mel scale."""
    mels = np.linspace(hz_to_mel(F_MIN), hz_to_mel(F_MAX), n_bands + 2)
    return np.asarray(mel_to_hz(mels))


def mel_filterbank(n_bands: int = N_BANDS, n_fft: int = N_FFT) -> np.ndarray:
    """(n_bands, n_fft//2 + 1) triangular filters; peak 1.0, no normalization."""
    edges = mel_band_edges_hz(n_bands)
    bin_hz = np.arange(n_fft // 2 + 1) * (SAMPLE_RATE / n_fft)
    bank = np.zeros((n_bands, bin_hz.shape[0]), dtype=np.float64)
    for m in range(n_bands):
        left, center, right = edges[m], edges[m + 1], edges[m + 2]
        rising = (bin_hz - left) / (center - left)
        falling = (right - bin_hz) / (right - center)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def log_mel(power: np.ndarray, floor_epsilon: float = LOG_FLOOR) -> MelSpectrogram:
    """Apply the 80-band filterbank then a floored natural log."""
    power = np.asarray(power, dtype=np.float64)
    if power.ndim != 2 or power.shape[0] != N_FFT // 2 + 1:
        raise ShapeMismatch(f"power must be ({N_FFT // 2 + 1}, frames), got {power.shape}")
    if power.shape[1] == 0:
        raise ShapeMismatch("power has no frames")
    if np.any(power < 0.0):
        raise NegativePower("power spectrogram has negative values")
    bank = mel_filterbank()
    values = np.log(np.maximum(bank @ power, floor_epsilon))
    return MelSpectrogram(bands=N_BANDS, frames=power.shape[1], values=values)


def melspectrogram(clip: AudioClip, seconds: float = 3.0) -> MelSpectrogram:
    """Duration-normalized log-mel features for one clip."""
    return log_mel(stft_power(fix_duration(clip, seconds)))
