"""MFCC front-end and context-window feature construction.

Pipeline: raw mono audio -> framed/windowed signal -> 14-dim MFCC
(C0-C12 + log energy) -> mean/variance normalization -> context
stacking -> per-band temporal DCT reduction.

Front-end conventions (fixed for every system in the package):
16 kHz audio, pre-emphasis 0.97, 512-point FFT, 26 triangular mel
filters over 0-8000 Hz, log floored at ln(1e-10), orthonormal DCT-II.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft
import scipy.io.wavfile
import scipy.signal

from .errors import ClipTooShort, DimensionMismatch, EmptyInput

CANONICAL_SAMPLE_RATE = 16000
PREEMPHASIS = 0.97
NFFT = 512
NUM_MEL_FILTERS = 26
MEL_LOW_HZ = 0.0
MEL_HIGH_HZ = 8000.0
LOG_FLOOR = float(np.log(1e-10))
STD_FLOOR = 1e-8

DEFAULT_FRAME_LENGTH_MS = 25.0
DEFAULT_FRAME_SHIFT_MS = 10.0


class FeatureKind(enum.Enum):
    MFCC14 = "mfcc14"
    MFCC_DELTA42 = "mfcc_delta42"
    STACKED = "stacked"
    DCT_REDUCED = "dct_reduced"
    POSTERIOR = "posterior"


@dataclass
class AudioClip:
    """Raw mono signal with its sample rate. Samples are floats in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")


@dataclass
class FeatureSequence:
    """T x D matrix of per-frame features plus frame timing metadata."""

    frames: np.ndarray
    feature_kind: FeatureKind
    frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS
    frame_length_ms: float = DEFAULT_FRAME_LENGTH_MS

    def __post_init__(self):
        self.frames = np.atleast_2d(np.asarray(self.frames, dtype=np.float64))

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class NormStats:
    """Per-dimension mean and (floored) standard deviation."""

    mean: np.ndarray
    std: np.ndarray


@dataclass
class ContextConfig:
    """Context window geometry for the NN input stream."""

    width: int = 49
    dct_enabled: bool = True
    dct_keep_per_band: int = 33

    def __post_init__(self):
        if self.width < 1 or self.width % 2 == 0:
            raise ValueError(f"context width must be odd and positive, got {self.width}")
        if self.dct_keep_per_band < 1 or self.dct_keep_per_band > self.width:
            raise ValueError("dct_keep_per_band must be in [1, width]")


def load_wav(path) -> AudioClip:
    """Load a PCM WAV file as a mono clip at the canonical 16 kHz rate.

    Stereo files are averaged to mono; other sample rates are resampled.
    """
    rate, data = scipy.io.wavfile.read(path)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    else:
        samples = data.astype(np.float64)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if rate != CANONICAL_SAMPLE_RATE:
        g = np.gcd(int(rate), CANONICAL_SAMPLE_RATE)
        samples = scipy.signal.resample_poly(samples, CANONICAL_SAMPLE_RATE // g, rate // g)
        rate = CANONICAL_SAMPLE_RATE
    return AudioClip(samples=samples, sample_rate=int(rate))


def periodic_hamming(n: int) -> np.ndarray:
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _frame_matrix(samples: np.ndarray, win: int, hop: int) -> np.ndarray:
    n = len(samples)
    if n < win:
        raise ClipTooShort(f"clip of {n} samples cannot fit one {win}-sample frame")
    num_frames = (n - win) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(num_frames)[:, None]
    return samples[idx]


def frame_signal(clip: AudioClip,
                 frame_length_ms: float = DEFAULT_FRAME_LENGTH_MS,
                 frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS) -> np.ndarray:
    """Split a clip into overlapping frames multiplied by a periodic Hamming window.

    Frame t starts at ``t * hop`` samples; a trailing partial frame is
    discarded. Raises ClipTooShort when no full frame fits.
    """
    win = int(round(frame_length_ms * clip.sample_rate / 1000.0))
    hop = int(round(frame_shift_ms * clip.sample_rate / 1000.0))
    frames = _frame_matrix(clip.samples, win, hop)
    return frames * periodic_hamming(win)[None, :]


def mel_filterbank(sample_rate: int = CANONICAL_SAMPLE_RATE,
                   nfft: int = NFFT,
                   num_filters: int = NUM_MEL_FILTERS,
                   low_hz: float = MEL_LOW_HZ,
                   high_hz: float = MEL_HIGH_HZ) -> np.ndarray:
    """Triangular mel filterbank as a (num_filters, nfft//2 + 1) matrix."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    mel_points = np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), num_filters + 2)
    hz_points = mel_to_hz(mel_points)
    bins = np.floor((nfft + 1) * hz_points / sample_rate).astype(int)
    fbank = np.zeros((num_filters, nfft // 2 + 1))
    for j in range(num_filters):
        left, center, right = bins[j], bins[j + 1], bins[j + 2]
        for i in range(left, center):
            fbank[j, i] = (i - left) / max(center - left, 1)
        for i in range(center, right):
            fbank[j, i] = (right - i) / max(right - center, 1)
    return fbank


_FBANK_CACHE: dict[tuple, np.ndarray] = {}


def _cached_fbank(sample_rate: int) -> np.ndarray:
    key = (sample_rate, NFFT, NUM_MEL_FILTERS)
    if key not in _FBANK_CACHE:
        _FBANK_CACHE[key] = mel_filterbank(sample_rate)
    return _FBANK_CACHE[key]


def _mfcc_from_frames(windowed: np.ndarray, raw_energy: np.ndarray,
                      sample_rate: int, num_ceps: int) -> np.ndarray:
    pspec = np.abs(np.fft.rfft(windowed, NFFT, axis=1)) ** 2
    mel_energies = pspec @ _cached_fbank(sample_rate).T
    log_mel = np.log(np.maximum(mel_energies, 1e-10))
    ceps = scipy.fft.dct(log_mel, type=2, axis=1, norm="ortho")[:, :num_ceps]
    log_e = np.log(np.maximum(raw_energy, 1e-10))
    return np.hstack([ceps, log_e[:, None]])


def compute_mfcc(frame: np.ndarray, sample_rate: int,
                 num_ceps: int = 13, raw_energy: float | None = None) -> np.ndarray:
    """MFCC vector [C0..C12, logE] for one windowed frame.

    ``raw_energy`` overrides the energy term with the pre-window frame
    energy; when omitted the windowed frame's energy is used.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if raw_energy is None:
        raw_energy = float(np.sum(frame ** 2))
    return _mfcc_from_frames(frame[None, :], np.array([raw_energy]),
                             sample_rate, num_ceps)[0]


def mfcc_sequence(clip: AudioClip,
                  frame_length_ms: float = DEFAULT_FRAME_LENGTH_MS,
                  frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS,
                  num_ceps: int = 13) -> FeatureSequence:
    """Full front-end: pre-emphasis, framing, MFCC + log raw energy per frame."""
    emphasized = np.append(clip.samples[0],
                           clip.samples[1:] - PREEMPHASIS * clip.samples[:-1])
    win = int(round(frame_length_ms * clip.sample_rate / 1000.0))
    hop = int(round(frame_shift_ms * clip.sample_rate / 1000.0))
    raw_frames = _frame_matrix(emphasized, win, hop)
    raw_energy = np.sum(raw_frames ** 2, axis=1)
    windowed = raw_frames * periodic_hamming(win)[None, :]
    feats = _mfcc_from_frames(windowed, raw_energy, clip.sample_rate, num_ceps)
    return FeatureSequence(frames=feats, feature_kind=FeatureKind.MFCC14,
                           frame_shift_ms=frame_shift_ms,
                           frame_length_ms=frame_length_ms)


def _delta(frames: np.ndarray) -> np.ndarray:
    # +/-2 frame linear regression with replicated boundaries:
    # d_t = (1*(x[t+1]-x[t-1]) + 2*(x[t+2]-x[t-2])) / 10
    t = frames.shape[0]
    idx = np.arange(t)
    p1 = frames[np.minimum(idx + 1, t - 1)]
    p2 = frames[np.minimum(idx + 2, t - 1)]
    m1 = frames[np.maximum(idx - 1, 0)]
    m2 = frames[np.maximum(idx - 2, 0)]
    return ((p1 - m1) + 2.0 * (p2 - m2)) / 10.0


def append_deltas(seq: FeatureSequence) -> FeatureSequence:
    """42-dim stream: statics, deltas, and delta-deltas of the deltas."""
    d = _delta(seq.frames)
    dd = _delta(d)
    return FeatureSequence(frames=np.hstack([seq.frames, d, dd]),
                           feature_kind=FeatureKind.MFCC_DELTA42,
                           frame_shift_ms=seq.frame_shift_ms,
                           frame_length_ms=seq.frame_length_ms)


def fit_norm_stats(seqs: list[FeatureSequence]) -> NormStats:
    """Pooled per-dimension mean/std over all frames of all sequences."""
    if not seqs:
        raise EmptyInput("no sequences to fit normalization statistics on")
    pooled = np.vstack([s.frames for s in seqs])
    if pooled.shape[0] == 0:
        raise EmptyInput("no frames to fit normalization statistics on")
    mean = pooled.mean(axis=0)
    std = np.maximum(pooled.std(axis=0), STD_FLOOR)
    return NormStats(mean=mean, std=std)


def apply_norm(seq: FeatureSequence, stats: NormStats) -> FeatureSequence:
    if seq.dim != len(stats.mean):
        raise DimensionMismatch(
            f"sequence dim {seq.dim} != stats dim {len(stats.mean)}")
    return FeatureSequence(frames=(seq.frames - stats.mean) / stats.std,
                           feature_kind=seq.feature_kind,
                           frame_shift_ms=seq.frame_shift_ms,
                           frame_length_ms=seq.frame_length_ms)


def stack_context(seq: FeatureSequence, width: int) -> FeatureSequence:
    """Concatenate ``width`` consecutive frames around each frame.

    Out-of-range neighbors are clamped to the first/last frame, so the
    frame count is preserved and every frame keeps its label.
    """
    if width < 1 or width % 2 == 0:
        raise ValueError(f"context width must be odd and positive, got {width}")
    t = seq.num_frames
    half = (width - 1) // 2
    idx = np.clip(np.arange(t)[:, None] + np.arange(-half, half + 1)[None, :], 0, t - 1)
    stacked = seq.frames[idx].reshape(t, width * seq.dim)
    return FeatureSequence(frames=stacked, feature_kind=FeatureKind.STACKED,
                           frame_shift_ms=seq.frame_shift_ms,
                           frame_length_ms=seq.frame_length_ms)


def temporal_dct_reduce(stacked: FeatureSequence, width: int,
                        keep_per_band: int) -> FeatureSequence:
    """Per-band temporal DCT over the stacked window, truncated to
    ``keep_per_band`` coefficients per original feature dimension.

    Output ordering is band-major: all kept coefficients of band 0,
    then band 1, and so on.
    """
    if stacked.dim % width != 0:
        raise DimensionMismatch(
            f"stacked dim {stacked.dim} not divisible by width {width}")
    if keep_per_band < 1 or keep_per_band > width:
        raise ValueError("keep_per_band must be in [1, width]")
    t = stacked.num_frames
    num_bands = stacked.dim // width
    # rows are frame-major ([frame -h .. +h] x bands); band trajectory sits on stride num_bands
    traj = stacked.frames.reshape(t, width, num_bands).transpose(0, 2, 1)
    coeffs = scipy.fft.dct(traj, type=2, axis=2, norm="ortho")[:, :, :keep_per_band]
    return FeatureSequence(frames=coeffs.reshape(t, num_bands * keep_per_band),
                           feature_kind=FeatureKind.DCT_REDUCED,
                           frame_shift_ms=stacked.frame_shift_ms,
                           frame_length_ms=stacked.frame_length_ms)


def invert_temporal_dct(reduced: FeatureSequence, width: int,
                        keep_per_band: int) -> FeatureSequence:
    """Inverse of temporal_dct_reduce (zero-padded when truncated)."""
    t = reduced.num_frames
    num_bands = reduced.dim // keep_per_band
    coeffs = reduced.frames.reshape(t, num_bands, keep_per_band)
    padded = np.zeros((t, num_bands, width))
    padded[:, :, :keep_per_band] = coeffs
    traj = scipy.fft.idct(padded, type=2, axis=2, norm="ortho")
    stacked = traj.transpose(0, 2, 1).reshape(t, width * num_bands)
    return FeatureSequence(frames=stacked, feature_kind=FeatureKind.STACKED,
                           frame_shift_ms=reduced.frame_shift_ms,
                           frame_length_ms=reduced.frame_length_ms)


# --- feature cache file format ("ACFT") ---

_FEATURE_MAGIC = b"ACFT"
_FEATURE_VERSION = 1
_KIND_CODES = {k: i for i, k in enumerate(FeatureKind)}
_CODE_KINDS = {i: k for k, i in _KIND_CODES.items()}


def save_features(seq: FeatureSequence, path) -> None:
    """Write a sequence to the binary per-clip cache format."""
    header = _FEATURE_MAGIC + struct.pack(
        "<IIIBf", _FEATURE_VERSION, seq.num_frames, seq.dim,
        _KIND_CODES[seq.feature_kind], seq.frame_shift_ms)
    with open(path, "wb") as f:
        f.write(header)
        f.write(seq.frames.astype("<f4").tobytes())


def load_features(path) -> FeatureSequence:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _FEATURE_MAGIC:
            raise DimensionMismatch(f"{path}: not a feature cache file")
        version, t, d, kind_code, shift = struct.unpack("<IIIBf", f.read(17))
        if version != _FEATURE_VERSION:
            raise DimensionMismatch(f"{path}: unsupported version {version}")
        data = np.frombuffer(f.read(4 * t * d), dtype="<f4").reshape(t, d)
    return FeatureSequence(frames=data.astype(np.float64),
                           feature_kind=_CODE_KINDS[kind_code],
                           frame_shift_ms=float(shift))
