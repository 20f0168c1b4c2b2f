"""Virtual-clock model of the streaming pipeline between drone and offloading unit.

Per frame: capture -> encode -> packetized transmission -> propagation/reading
-> inference (FIFO on the offloading unit) -> uplink -> onboard planning.
All times are milliseconds on a single simulation clock.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from typing import Sequence

import numpy as np


class InvalidConfig(ValueError):
    pass


def packet_count(payload: int, mtu: int, header_bytes: int = 0) -> int:
    """Packets needed for ``payload`` bytes when each packet carries mtu - header_bytes."""
    if mtu <= 0:
        raise InvalidConfig(f"mtu must be positive, got {mtu}")
    if payload < 0:
        raise InvalidConfig(f"payload must be >= 0, got {payload}")
    per_packet = mtu - header_bytes
    if per_packet <= 0:
        raise InvalidConfig(f"header_bytes ({header_bytes}) leaves no room in mtu {mtu}")
    return -(-payload // per_packet)


@dataclass(frozen=True)
class Delay:
    """A delay distribution in ms. Samples are clamped at 0."""
    kind: str = "constant"  # constant | gaussian | lognormal | empirical
    mean: float = 0.0
    sigma: float = 0.0
    samples: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "gaussian", "lognormal", "empirical"):
            raise InvalidConfig(f"unknown delay kind {self.kind!r}")
        if self.sigma < 0:
            raise InvalidConfig("delay sigma must be >= 0")
        if self.kind == "empirical" and not self.samples:
            raise InvalidConfig("empirical delay needs samples")
        if self.kind == "lognormal" and self.mean <= 0:
            raise InvalidConfig("lognormal delay needs a positive mean")
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "constant":
            x = self.mean
        elif self.kind == "gaussian":
            x = rng.normal(self.mean, self.sigma) if self.sigma > 0 else self.mean
        elif self.kind == "lognormal":
            # parametrized by the mean and std of the delay itself
            s2 = math.log1p((self.sigma / self.mean) ** 2)
            x = rng.lognormal(math.log(self.mean) - s2 / 2.0, math.sqrt(s2))
        else:
            x = self.samples[int(rng.integers(len(self.samples)))]
        return max(0.0, float(x))

    @classmethod
    def from_dict(cls, d) -> "Delay":
        if isinstance(d, (int, float)):
            return cls("constant", float(d))
        d = dict(d)
        if "samples" in d:
            d["samples"] = tuple(d["samples"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "mean": self.mean, "sigma": self.sigma}
        if self.kind == "empirical":
            d["samples"] = list(self.samples)
        return d


def _c(ms: float) -> Delay:
    return Delay("constant", ms)


@dataclass(frozen=True)
class LinkConfig:
    format: str = "RAW"
    raw_bytes: int = 76800
    jpeg_bytes_mean: int = 6000
    mtu: int = 1022
    header_bytes: int = 0
    capture_ms: Delay = field(default_factory=lambda: _c(0.0))
    encode_ms: Delay = field(default_factory=lambda: _c(0.0))
    transmit_ms: Delay = field(default_factory=lambda: _c(0.0))
    propagation_ms: Delay = field(default_factory=lambda: _c(0.0))
    inference_ms: Delay = field(default_factory=lambda: Delay("gaussian", 51.0, 5.0))
    planning_ms: Delay = field(default_factory=lambda: _c(0.5))
    command_uplink_ms: Delay = field(default_factory=lambda: _c(2.0))
    pipelined: bool = False

    def __post_init__(self):
        if self.format not in ("RAW", "JPEG"):
            raise InvalidConfig(f"format must be RAW or JPEG, got {self.format!r}")
        if self.mtu <= 0:
            raise InvalidConfig("mtu must be positive")

    @property
    def payload_bytes(self) -> int:
        return self.raw_bytes if self.format == "RAW" else self.jpeg_bytes_mean

    @classmethod
    def from_dict(cls, d: dict) -> "LinkConfig":
        kw = {}
        for f in fields(cls):
            if f.name not in d:
                continue
            v = d[f.name]
            kw[f.name] = Delay.from_dict(v) if f.name.endswith("_ms") else v
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise InvalidConfig(f"link: unknown fields {sorted(unknown)}")
        return cls(**kw)

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = v.to_dict() if isinstance(v, Delay) else v
        return d


def load_calibration() -> dict:
    with resources.files("nanonav.data").joinpath("calibration.json").open() as fh:
        return json.load(fh)


def default_link_config(fmt: str = "RAW") -> LinkConfig:
    cal = load_calibration()["link"]
    if fmt not in cal:
        raise InvalidConfig(f"no calibrated link profile for {fmt!r}")
    return LinkConfig.from_dict({"format": fmt, **cal[fmt]})


@dataclass(frozen=True)
class FrameEvent:
    frame_index: int
    t_capture_start: float
    t_encode_done: float
    t_tx_done: float
    t_arrival: float
    t_inference_start: float
    t_inference_done: float
    t_command_applied: float
    n_packets: int


FRAME_FIELDS = [f.name for f in fields(FrameEvent)]


def schedule_frames(cfg: LinkConfig, horizon_ms: float, rng: np.random.Generator,
                    t0: float = 0.0) -> list[FrameEvent]:
    """Frames whose capture starts before ``horizon_ms``.

    Without ``pipelined`` the camera waits for the previous transmission to end
    (one frame in flight). The reading side is in-order, and inference is a
    FIFO queue: it starts at max(arrival, previous inference end).
    """
    if horizon_ms <= 0:
        raise InvalidConfig("horizon_ms must be positive")
    n_packets = packet_count(cfg.payload_bytes, cfg.mtu, cfg.header_bytes)
    events = []
    t_capture = t0
    prev_tx_done = t0
    prev_arrival = -math.inf
    prev_inf_done = -math.inf
    k = 0
    while t_capture < horizon_ms:
        t_enc = t_capture + cfg.capture_ms.sample(rng) + cfg.encode_ms.sample(rng)
        tx_start = max(t_enc, prev_tx_done)
        t_tx = tx_start + cfg.transmit_ms.sample(rng)
        t_arr = max(t_tx + cfg.propagation_ms.sample(rng), prev_arrival)
        t_inf_start = max(t_arr, prev_inf_done)
        t_inf = t_inf_start + cfg.inference_ms.sample(rng)
        t_cmd = t_inf + cfg.command_uplink_ms.sample(rng) + cfg.planning_ms.sample(rng)
        events.append(FrameEvent(k, t_capture, t_enc, t_tx, t_arr, t_inf_start, t_inf, t_cmd, n_packets))
        prev_tx_done, prev_arrival, prev_inf_done = t_tx, t_arr, t_inf
        t_next = t_enc if cfg.pipelined else t_tx
        if t_next <= t_capture:
            # zero-delay pipeline: force progress
            t_next = t_capture + 1.0
        t_capture = t_next
        k += 1
    return events


def end_to_end_latency(ev: FrameEvent) -> float:
    return ev.t_command_applied - ev.t_capture_start


def inter_arrivals(events: Sequence[FrameEvent]) -> np.ndarray:
    return np.diff([e.t_arrival for e in events])


def frames_to_csv(events: Sequence[FrameEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRAME_FIELDS)
    for e in events:
        w.writerow([e.frame_index] + [f"{getattr(e, n):.3f}" for n in FRAME_FIELDS[1:-1]] + [e.n_packets])
    return buf.getvalue()
