"""Labeled I/Q frame generation for the background channel.

Occupied frames carry unit-energy QPSK symbols through Rayleigh fading plus
AWGN; idle frames are noise only. Noise is unit-variance complex (half the
power on each of I and Q) and the signal is scaled to hit the configured SNR.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FADING_MODES = ("sample", "block")


@dataclass(frozen=True)
class RngSeed:
    """Explicit seed for a random stream.

    ``(master_seed, stream_index)`` identify a stream; ``path`` lets callers
    carve further independent sub-streams without colliding with siblings.
    """

    master_seed: int
    stream_index: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0 or any(k < 0 for k in self.path):
            raise ValueError("stream indices must be non-negative")

    def child(self, *keys: int) -> RngSeed:
        return RngSeed(self.master_seed, self.stream_index, self.path + tuple(int(k) for k in keys))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index, *self.path))

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed_sequence())


@dataclass(frozen=True)
class ChannelParams:
    rayleigh_scale: float = 1.0
    snr_db: float = 3.0
    samples_per_frame: int = 16
    fading: str = "sample"

    def __post_init__(self):
        if not self.rayleigh_scale > 0:
            raise ValueError("rayleigh_scale must be positive")
        if self.samples_per_frame < 1:
            raise ValueError("samples_per_frame must be at least 1")
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if self.fading not in FADING_MODES:
            raise ValueError(f"fading must be one of {FADING_MODES}")

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def signal_amplitude(self) -> float:
        # E|h|^2 = 2 * scale^2 for a Rayleigh envelope; undo it so that
        # mean signal power equals snr_linear against unit noise power.
        return float(np.sqrt(self.snr_linear / (2.0 * self.rayleigh_scale**2)))


@dataclass(frozen=True)
class OccupancyProcess:
    p_occupied: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p_occupied <= 1.0:
            raise ValueError("p_occupied must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class IqFrame:
    iq: np.ndarray = field(repr=False)
    occupied: bool

    def __post_init__(self):
        iq = np.asarray(self.iq, dtype=float)
        if iq.ndim != 2 or iq.shape[0] != 2:
            raise ValueError(f"iq must have shape (2, n), got {iq.shape}")
        if not np.all(np.isfinite(iq)):
            raise ValueError("iq entries must be finite")
        object.__setattr__(self, "iq", iq)
        object.__setattr__(self, "occupied", bool(self.occupied))

    def __eq__(self, other):
        if not isinstance(other, IqFrame):
            return NotImplemented
        return self.occupied == other.occupied and np.array_equal(self.iq, other.iq)

    __hash__ = None


def draw_components(
    occupied: np.ndarray, ch: ChannelParams, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw complex signal and noise parts for a batch of frames.

    Returns ``(signal, noise)``, each complex with shape ``(n, samples)``.
    Signal rows are zero where ``occupied`` is false.
    """
    occupied = np.asarray(occupied, dtype=bool)
    n, m = occupied.shape[0], ch.samples_per_frame
    bits = rng.integers(0, 2, size=(n, m, 2))
    symbols = ((2 * bits[..., 0] - 1) + 1j * (2 * bits[..., 1] - 1)) / np.sqrt(2.0)
    taps = m if ch.fading == "sample" else 1
    # complex Gaussian with per-component std = scale -> Rayleigh(scale) envelope
    h = ch.rayleigh_scale * (rng.standard_normal((n, taps)) + 1j * rng.standard_normal((n, taps)))
    noise = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2.0)
    signal = ch.signal_amplitude * h * symbols * occupied[:, None]
    return signal, noise


def to_iq(x: np.ndarray) -> np.ndarray:
    """Complex ``(n, m)`` samples to real ``(n, 2, m)`` I/Q blocks."""
    return np.stack([x.real, x.imag], axis=1)


def gen_batch(occupied: np.ndarray, ch: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    signal, noise = draw_components(occupied, ch, rng)
    return to_iq(signal + noise)


def gen_frame(occupied: bool, ch: ChannelParams, seed: RngSeed) -> IqFrame:
    iq = gen_batch(np.array([occupied]), ch, seed.rng())[0]
    return IqFrame(iq, occupied)


def gen_dataset(n: int, occ: OccupancyProcess, ch: ChannelParams, seed: RngSeed) -> list[IqFrame]:
    if n < 1:
        raise ValueError("dataset size must be at least 1")
    rng = seed.rng()
    labels = rng.random(n) < occ.p_occupied
    iq = gen_batch(labels, ch, rng)
    return [IqFrame(x, y) for x, y in zip(iq, labels)]


def split_dataset(
    data: Sequence[IqFrame], train_fraction: float, seed: RngSeed
) -> tuple[list[IqFrame], list[IqFrame]]:
    if not data:
        raise ValueError("cannot split an empty dataset")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n_train = int(round(train_fraction * len(data)))
    order = seed.rng().permutation(len(data))
    return [data[i] for i in order[:n_train]], [data[i] for i in order[n_train:]]


def stack_frames(frames: Iterable[IqFrame]) -> tuple[np.ndarray, np.ndarray]:
    """Frames to ``(x, y)`` arrays: ``x`` is ``(n, 2, m)``, ``y`` is 0/1 occupancy."""
    frames = list(frames)
    if not frames:
        return np.empty((0, 2, 0)), np.empty(0, dtype=int)
    x = np.stack([f.iq for f in frames])
    y = np.array([int(f.occupied) for f in frames])
    return x, y


def dump_frames_csv(frames: Sequence[IqFrame], path: str | Path) -> None:
    """Write frames as ``frame_id, occupied, i_0.., q_0..`` rows."""
    m = frames[0].iq.shape[1] if frames else 16
    header = ["frame_id", "occupied"] + [f"i_{k}" for k in range(m)] + [f"q_{k}" for k in range(m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, f in enumerate(frames):
            w.writerow([k, int(f.occupied), *map(repr, f.iq[0].tolist()), *map(repr, f.iq[1].tolist())])


def load_frames_csv(path: str | Path) -> list[IqFrame]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    m = (len(header) - 2) // 2
    frames = []
    for row in body:
        vals = np.array([float(v) for v in row[2:]])
        frames.append(IqFrame(vals.reshape(2, m), bool(int(row[1]))))
    return frames
