"""Domain types and link physics for NC-OFDM spectrum allocation.

Rates are bits/s everywhere inside the library; the CLI converts to Mbps
only when writing CSV. Channel numbers are 1-based in configs, reports and
CSV headers, and 0-based inside arrays.

Per-link rates are accumulated as sequential float sums in ascending
channel order. The solver and the exhaustive oracle use the same
accumulation, so their objective values are bit-identical and can be
compared exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

BOLTZMANN_J_PER_K = 1.380649e-23
SPEED_OF_LIGHT_M_PER_S = 3.0e8


class ValidationError(ValueError):
    """An input violates a documented precondition."""


def as_rng(rng) -> np.random.Generator:
    """Normalize an int seed (or None) into a numpy Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def rng_streams(rng, count: int) -> list[np.random.Generator]:
    """Derive `count` independent child generators, deterministically.

    An integer seed yields the family (seed, 0), (seed, 1), ...; passing a
    Generator splits it with `spawn`, which is deterministic in its state.
    """
    if isinstance(rng, np.random.Generator):
        return list(rng.spawn(count))
    seed = int(rng)
    return [np.random.default_rng((seed, k)) for k in range(count)]


def _frozen_array(values, dtype) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Scenario description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkSpec:
    """One point-to-point link, given either as tx/rx coordinates (meters)
    or directly as a tx-rx distance in meters."""

    id: str
    tx: tuple[float, float] | None = None
    rx: tuple[float, float] | None = None
    distance: float | None = None

    def __post_init__(self):
        if self.distance is not None:
            if self.tx is not None or self.rx is not None:
                raise ValidationError(
                    f"link {self.id!r}: give tx/rx or distance, not both")
            d = float(self.distance)
            if not (math.isfinite(d) and d > 0):
                raise ValidationError(f"link {self.id!r}: distance must be > 0")
            object.__setattr__(self, "distance", d)
        else:
            if self.tx is None or self.rx is None:
                raise ValidationError(
                    f"link {self.id!r}: give both tx and rx, or a distance")
            tx = (float(self.tx[0]), float(self.tx[1]))
            rx = (float(self.rx[0]), float(self.rx[1]))
            object.__setattr__(self, "tx", tx)
            object.__setattr__(self, "rx", rx)
            if not self.length() > 0:
                raise ValidationError(
                    f"link {self.id!r}: tx and rx must not coincide")

    def length(self) -> float:
        """Tx-rx separation in meters."""
        if self.distance is not None:
            return self.distance
        return math.dist(self.tx, self.rx)


@dataclass(frozen=True)
class InterfererSpec:
    """An out-of-network transmitter occupying a fixed set of channels.

    `db_above_noise` is the received interference level per occupied
    channel, in dB relative to the per-channel noise power N0*W.
    """

    name: str
    channels: tuple[int, ...]
    db_above_noise: float

    def __post_init__(self):
        chans = tuple(int(c) for c in self.channels)
        if not chans:
            raise ValidationError(f"interferer {self.name!r}: empty channel set")
        if any(c < 1 for c in chans):
            raise ValidationError(
                f"interferer {self.name!r}: channel numbers are 1-based")
        object.__setattr__(self, "channels", chans)
        if not math.isfinite(self.db_above_noise):
            raise ValidationError(
                f"interferer {self.name!r}: level must be finite")


@dataclass(frozen=True)
class ScenarioConfig:
    """Declarative description of a simulation scenario."""

    links: tuple[LinkSpec, ...]
    num_channels: int
    channel_bandwidth: float        # Hz
    temperature: float              # Kelvin
    tx_power_per_channel: float     # Watts, same for every link and channel
    span_bound: int                 # max allowed span, in channels
    rng_seed: int
    subcarriers_per_channel: int = 1
    center_frequency: float = 1.5e9
    rician_k_db: float = 30.0
    interferers: tuple[InterfererSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "interferers", tuple(self.interferers))
        self.validate(strict_bounds=False)
        if self.span_bound < self.min_span_bound:
            warnings.warn(
                f"span_bound={self.span_bound} is below ceil(M/N)="
                f"{self.min_span_bound}; some spectrum must go unused",
                stacklevel=2)

    # -- derived quantities --------------------------------------------

    @property
    def num_links(self) -> int:
        return len(self.links)

    @property
    def noise_density(self) -> float:
        """One-sided noise power spectral density N0 = k*T, W/Hz."""
        return BOLTZMANN_J_PER_K * self.temperature

    @property
    def noise_power_per_channel(self) -> float:
        """Thermal noise power in one channel, N0*W, Watts."""
        return self.noise_density * self.channel_bandwidth

    @property
    def min_span_bound(self) -> int:
        """Smallest span bound that still lets N links cover M channels."""
        return -(-self.num_channels // self.num_links)

    def interferer_names(self) -> tuple[str, ...]:
        return tuple(spec.name for spec in self.interferers)

    # -- validation ----------------------------------------------------

    def validate(self, strict_bounds: bool = False) -> None:
        if not self.links:
            raise ValidationError("at least one link is required")
        ids = [link.id for link in self.links]
        if len(set(ids)) != len(ids):
            raise ValidationError("link ids must be unique")
        if self.num_channels < 1:
            raise ValidationError("num_channels must be >= 1")
        if not self.channel_bandwidth > 0:
            raise ValidationError("channel_bandwidth must be > 0")
        if not self.temperature > 0:
            raise ValidationError("temperature must be > 0")
        if not self.tx_power_per_channel > 0:
            raise ValidationError("tx_power_per_channel must be > 0")
        if self.subcarriers_per_channel < 1:
            raise ValidationError("subcarriers_per_channel must be >= 1")
        if not self.center_frequency > 0:
            raise ValidationError("center_frequency must be > 0")
        if math.isnan(self.rician_k_db):
            raise ValidationError("rician_k_db must not be NaN")
        if not 1 <= self.span_bound <= self.num_channels:
            raise ValidationError(
                f"span_bound must be in [1, {self.num_channels}]")
        if int(self.rng_seed) < 0:
            raise ValidationError("rng_seed must be a nonnegative integer")
        names = [spec.name for spec in self.interferers]
        if len(set(names)) != len(names):
            raise ValidationError("interferer names must be unique")
        for spec in self.interferers:
            bad = [c for c in spec.channels if c > self.num_channels]
            if bad:
                raise ValidationError(
                    f"interferer {spec.name!r}: channels {bad} exceed "
                    f"num_channels={self.num_channels}")
        if strict_bounds and self.span_bound < self.min_span_bound:
            raise ValidationError(
                f"strict bounds: span_bound={self.span_bound} is below "
                f"ceil(M/N)={self.min_span_bound}")


# ---------------------------------------------------------------------------
# Numeric problem data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemInstance:
    """A fully numeric allocation problem: per-link per-channel capacities
    plus the span bound. This is all the optimizer ever sees."""

    num_links: int
    num_channels: int
    channel_bandwidth: float
    capacity: np.ndarray            # (num_links, num_channels), bits/s
    span_bound: int

    def __post_init__(self):
        cap = np.array(self.capacity, dtype=np.float64)
        if cap.shape != (self.num_links, self.num_channels):
            raise ValidationError(
                f"capacity shape {cap.shape} does not match "
                f"({self.num_links}, {self.num_channels})")
        if self.num_links < 1 or self.num_channels < 1:
            raise ValidationError("need at least one link and one channel")
        if not np.all(np.isfinite(cap)) or np.any(cap < 0):
            raise ValidationError("capacities must be finite and >= 0")
        if not 1 <= self.span_bound <= self.num_channels:
            raise ValidationError(
                f"span_bound must be in [1, {self.num_channels}]")
        cap.setflags(write=False)
        object.__setattr__(self, "capacity", cap)

    def with_span_bound(self, span_bound: int) -> "ProblemInstance":
        return replace(self, span_bound=int(span_bound))


@dataclass(frozen=True)
class GainMatrix:
    """Dimensionless power gains, one per (link, channel)."""

    values: np.ndarray

    def __post_init__(self):
        g = np.array(self.values, dtype=np.float64)
        if g.ndim != 2:
            raise ValidationError("gain matrix must be 2-D")
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise ValidationError("gains must be finite and > 0")
        g.setflags(write=False)
        object.__setattr__(self, "values", g)


@dataclass(frozen=True)
class InterferenceMatrix:
    """Received interference power in Watts, one per (link, channel)."""

    values: np.ndarray

    def __post_init__(self):
        u = np.array(self.values, dtype=np.float64)
        if u.ndim != 2:
            raise ValidationError("interference matrix must be 2-D")
        if not np.all(np.isfinite(u)) or np.any(u < 0):
            raise ValidationError("interference must be finite and >= 0")
        u.setflags(write=False)
        object.__setattr__(self, "values", u)


@dataclass(frozen=True)
class AllocationMatrix:
    """Binary channel assignment, one row per link.

    Entry (l, m) is 1 when link l transmits on channel m. Orthogonality
    (no channel shared by two links) is required by every consumer but is
    checked there, not here, so partially built matrices can be wrapped.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries)
        if a.ndim != 2:
            raise ValidationError("allocation must be 2-D")
        if a.size and not np.isin(a, (0, 1)).all():
            raise ValidationError("allocation entries must be 0 or 1")
        a = a.astype(np.int8)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def num_links(self) -> int:
        return self.entries.shape[0]

    @property
    def num_channels(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def zeros(cls, num_links: int, num_channels: int) -> "AllocationMatrix":
        return cls(np.zeros((num_links, num_channels), dtype=np.int8))

    @classmethod
    def from_owner_vector(cls, owners: Sequence[int],
                          num_links: int) -> "AllocationMatrix":
        """Build from a per-channel owner vector, -1 meaning unassigned."""
        owners = list(owners)
        a = np.zeros((num_links, len(owners)), dtype=np.int8)
        for m, l in enumerate(owners):
            if l < 0:
                continue
            if l >= num_links:
                raise ValidationError(f"owner {l} out of range")
            a[l, m] = 1
        return cls(a)

    def owner_vector(self) -> list[int]:
        """Per-channel owner index, -1 for unassigned. Requires orthogonality."""
        if not self.is_orthogonal():
            raise ValidationError("owner_vector needs an orthogonal allocation")
        owners = [-1] * self.num_channels
        for l in range(self.num_links):
            for m in np.flatnonzero(self.entries[l]):
                owners[int(m)] = l
        return owners

    def column_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def is_orthogonal(self) -> bool:
        return bool((self.column_sums() <= 1).all())

    def row_span(self, link: int) -> int:
        return spectral_span(self.entries[link])

    def spans(self) -> list[int]:
        return [self.row_span(l) for l in range(self.num_links)]

    def occupied_channels(self, link: int) -> tuple[int, ...]:
        """1-based channel numbers used by a link."""
        return tuple(int(m) + 1 for m in np.flatnonzero(self.entries[link]))


def as_allocation(obj) -> AllocationMatrix:
    if isinstance(obj, AllocationMatrix):
        return obj
    return AllocationMatrix(np.asarray(obj))


@dataclass(frozen=True)
class RateResult:
    """Per-channel and per-link rates for one allocation, bits/s."""

    per_channel: np.ndarray        # (num_links, num_channels)
    per_link: np.ndarray           # (num_links,)
    maxmin: float

    def __post_init__(self):
        pc = _frozen_array(self.per_channel, np.float64)
        pl = _frozen_array(self.per_link, np.float64)
        if pc.ndim != 2 or pl.shape != (pc.shape[0],):
            raise ValidationError("rate arrays have inconsistent shapes")
        object.__setattr__(self, "per_channel", pc)
        object.__setattr__(self, "per_link", pl)
        object.__setattr__(self, "maxmin", float(self.maxmin))


# ---------------------------------------------------------------------------
# Physics
# ---------------------------------------------------------------------------

def path_loss_gain(distance_m: float, frequency_hz: float) -> float:
    """Free-space line-of-sight power gain (c / (4 pi d f))^2.

    Monotone decreasing in both distance and frequency; antenna and coding
    gains are taken as unity.
    """
    if not (distance_m > 0 and math.isfinite(distance_m)):
        raise ValidationError("distance must be > 0")
    if not (frequency_hz > 0 and math.isfinite(frequency_hz)):
        raise ValidationError("frequency must be > 0")
    amplitude = SPEED_OF_LIGHT_M_PER_S / (4.0 * math.pi * distance_m * frequency_hz)
    return amplitude * amplitude


def sample_rician_power_gain(k_db: float, rng, size=None):
    """Draw |X|^2 for a Rician envelope X with K = 10^(k_db/10).

    Normalized so E[|X|^2] = 1. k_db = +inf gives the deterministic
    line-of-sight limit (exactly 1), k_db = -inf the Rayleigh limit.
    Returns a float for size=None, else an ndarray.
    """
    if math.isnan(k_db):
        raise ValidationError("k_db must not be NaN")
    gen = as_rng(rng)
    if math.isinf(k_db) and k_db > 0:
        return 1.0 if size is None else np.ones(size)
    k = 10.0 ** (k_db / 10.0)
    los = math.sqrt(k / (k + 1.0))
    sigma = math.sqrt(1.0 / (2.0 * (k + 1.0)))
    re = los + sigma * gen.standard_normal(size)
    im = sigma * gen.standard_normal(size)
    return re * re + im * im


def compute_sinr(power_w: float, gain: float,
                 noise_power_w: float, interference_w: float) -> float:
    """Signal to interference-plus-noise ratio p*g / (N0*W + u)."""
    if not noise_power_w > 0:
        raise ValidationError("noise power must be > 0")
    if not (power_w > 0 and gain > 0):
        raise ValidationError("power and gain must be > 0")
    if interference_w < 0:
        raise ValidationError("interference must be >= 0")
    return power_w * gain / (noise_power_w + interference_w)


def compute_capacity(bandwidth_hz: float, sinr: float) -> float:
    """Shannon capacity W * log2(1 + sinr), bits/s."""
    if not bandwidth_hz > 0:
        raise ValidationError("bandwidth must be > 0")
    if sinr < 0 or math.isnan(sinr):
        raise ValidationError("sinr must be >= 0")
    return bandwidth_hz * math.log2(1.0 + sinr)


def spectral_span(row) -> int:
    """Span of a binary occupancy row, in channels.

    Highest minus lowest occupied index plus one; 0 for an all-zero row
    (an empty allocation occupies no spectrum).
    """
    arr = np.asarray(row)
    if arr.ndim != 1:
        raise ValidationError("row must be 1-D")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValidationError("row entries must be 0 or 1")
    occupied = np.flatnonzero(arr)
    if occupied.size == 0:
        return 0
    return int(occupied[-1]) - int(occupied[0]) + 1


def link_rate(capacity_row, allocation_row) -> float:
    """Canonical per-link rate: sequential sum of assigned capacities in
    ascending channel order. All objective arithmetic goes through here."""
    total = 0.0
    for m in range(len(allocation_row)):
        if allocation_row[m]:
            total += float(capacity_row[m])
    return total


def evaluate_rates(inst: ProblemInstance, allocation) -> RateResult:
    """Rates achieved by an allocation: each assigned channel runs at
    capacity, unassigned channels contribute nothing."""
    alloc = as_allocation(allocation)
    if alloc.entries.shape != inst.capacity.shape:
        raise ValidationError(
            f"allocation shape {alloc.entries.shape} does not match "
            f"instance shape {inst.capacity.shape}")
    if not alloc.is_orthogonal():
        raise ValidationError("allocation shares a channel between links")
    per_channel = inst.capacity * alloc.entries
    per_link = [link_rate(inst.capacity[l], alloc.entries[l])
                for l in range(inst.num_links)]
    return RateResult(per_channel=per_channel,
                      per_link=np.array(per_link),
                      maxmin=min(per_link))
