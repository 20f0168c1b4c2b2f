"""Master (offloading unit) and drone state machines plus their wire codec.

Both sides share the states ground -> hovering -> ready -> stopping -> ground.
The master commands each transition and waits for the drone to report the
target state before adopting it. Step functions are pure; the caller owns the
channels and their timing.

Wire layout, little-endian: kind u8 | code u8 | length u16 | payload.
"""
from __future__ import annotations

import logging
import struct
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Optional, Union

from .geometry import Pose2D
from .perception import BoundingBox, Detection, ObstacleClass

log = logging.getLogger(__name__)


class SyncState(IntEnum):
    GROUND = 0
    HOVERING = 1
    READY = 2
    STOPPING = 3


NEXT_STATE = {
    SyncState.GROUND: SyncState.HOVERING,
    SyncState.HOVERING: SyncState.READY,
    SyncState.READY: SyncState.STOPPING,
    SyncState.STOPPING: SyncState.GROUND,
}


class MessageKind(IntEnum):
    COMMAND = 0
    STATE_REPORT = 1
    TASK_EVENT = 2
    POSE_TELEMETRY = 3
    DETECTION_DATA = 4


class TaskEvent(IntEnum):
    INTERMEDIATE_WAYPOINT = 0
    FINAL_WAYPOINT = 1


class FlightStatus(str, Enum):
    ON_GROUND = "on_ground"
    AT_HEIGHT = "at_height"
    TASK_RUNNING = "task_running"
    LANDED = "landed"


@dataclass(frozen=True)
class PoseTelemetry:
    t_ms: float
    x: float
    y: float
    yaw: float


@dataclass(frozen=True)
class DetectionData:
    frame_index: int
    detection: Optional[Detection] = None


Payload = Union[None, PoseTelemetry, DetectionData]


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    code: int
    payload: Payload = None

    def __str__(self):
        name = self.kind.name.lower()
        if self.kind in (MessageKind.COMMAND, MessageKind.STATE_REPORT):
            return f"{name}({SyncState(self.code).name.lower()})"
        if self.kind == MessageKind.TASK_EVENT:
            return f"{name}({TaskEvent(self.code).name.lower()})"
        return f"{name}[{self.code}]"


def command(target: SyncState) -> Message:
    return Message(MessageKind.COMMAND, int(target))


def state_report(state: SyncState) -> Message:
    return Message(MessageKind.STATE_REPORT, int(state))


def task_event(ev: TaskEvent) -> Message:
    return Message(MessageKind.TASK_EVENT, int(ev))


def pose_telemetry(t_ms: float, pose: Pose2D) -> Message:
    return Message(MessageKind.POSE_TELEMETRY, 0, PoseTelemetry(t_ms, pose.x, pose.y, pose.yaw))


def detection_data(frame_index: int, det: Optional[Detection]) -> Message:
    code = 0 if det is None else 1 + list(ObstacleClass).index(det.obstacle_id)
    return Message(MessageKind.DETECTION_DATA, code, DetectionData(frame_index, det))


# ---------------------------------------------------------------- codec

class DecodeError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


_HEADER = struct.Struct("<BBH")
_POSE = struct.Struct("<4d")
_FRAME = struct.Struct("<I")
_BOX = struct.Struct("<5d")
_CODE_RANGE = {
    MessageKind.COMMAND: range(4),
    MessageKind.STATE_REPORT: range(4),
    MessageKind.TASK_EVENT: range(2),
    MessageKind.POSE_TELEMETRY: range(1),
    MessageKind.DETECTION_DATA: range(len(ObstacleClass) + 1),
}


def encode_message(m: Message) -> bytes:
    if m.code not in _CODE_RANGE[m.kind]:
        raise ValueError(f"code {m.code} invalid for {m.kind.name}")
    if m.kind == MessageKind.POSE_TELEMETRY:
        p = m.payload
        body = _POSE.pack(p.t_ms, p.x, p.y, p.yaw)
    elif m.kind == MessageKind.DETECTION_DATA:
        d = m.payload
        body = _FRAME.pack(d.frame_index)
        if d.detection is not None:
            b = d.detection.box
            body += _BOX.pack(d.detection.score, b.xm, b.ym, b.xM, b.yM)
    else:
        body = b""
    return _HEADER.pack(int(m.kind), m.code, len(body)) + body


def decode_message(data: bytes) -> Message:
    if len(data) < _HEADER.size:
        raise DecodeError(f"truncated header ({len(data)} bytes)", len(data))
    kind_raw, code, length = _HEADER.unpack_from(data, 0)
    try:
        kind = MessageKind(kind_raw)
    except ValueError:
        raise DecodeError(f"unknown message kind {kind_raw}", 0) from None
    if code not in _CODE_RANGE[kind]:
        raise DecodeError(f"invalid code {code} for {kind.name}", 1)
    off = _HEADER.size
    if len(data) < off + length:
        raise DecodeError(f"payload truncated, need {length} bytes", len(data))
    if len(data) > off + length:
        raise DecodeError("trailing bytes", off + length)
    body = data[off:off + length]

    def expect(n: int):
        if length != n:
            raise DecodeError(f"{kind.name} payload must be {n} bytes, got {length}", 2)

    if kind == MessageKind.POSE_TELEMETRY:
        expect(_POSE.size)
        return Message(kind, code, PoseTelemetry(*_POSE.unpack(body)))
    if kind == MessageKind.DETECTION_DATA:
        if code == 0:
            expect(_FRAME.size)
            return Message(kind, code, DetectionData(_FRAME.unpack(body)[0], None))
        expect(_FRAME.size + _BOX.size)
        (idx,) = _FRAME.unpack_from(body, 0)
        score, xm, ym, xM, yM = _BOX.unpack_from(body, _FRAME.size)
        det = Detection(list(ObstacleClass)[code - 1], score, BoundingBox(xm, ym, xM, yM))
        return Message(kind, code, DetectionData(idx, det))
    expect(0)
    return Message(kind, code)


# ---------------------------------------------------------------- state machines

@dataclass(frozen=True)
class MasterState:
    state: SyncState = SyncState.GROUND
    pending: Optional[SyncState] = None  # state we are waiting for the drone to report
    resend: bool = False
    done: bool = False


@dataclass(frozen=True)
class DroneState:
    state: SyncState = SyncState.GROUND
    pending: Optional[SyncState] = None  # transition waiting on flight status


def master_step(ms: MasterState, incoming: Optional[Message] = None,
                outbound: Optional[DetectionData] = None) -> tuple[MasterState, list[Message]]:
    """Advance the master by one tick.

    ``outbound`` is a processed frame; it is forwarded only in ready.
    """
    out = []
    if ms.resend and ms.pending is not None and ms.pending != SyncState.GROUND:
        out.append(command(ms.pending))
    ms = replace(ms, resend=False)

    if incoming is not None and incoming.kind == MessageKind.STATE_REPORT:
        reported = SyncState(incoming.code)
        if ms.pending is not None and reported == ms.pending:
            ms = replace(ms, state=reported, pending=None)
            if reported == SyncState.HOVERING:
                out.append(command(SyncState.READY))
                ms = replace(ms, pending=SyncState.READY)
            elif reported == SyncState.STOPPING:
                # landing is autonomous; wait for the ground report
                ms = replace(ms, pending=SyncState.GROUND)
            elif reported == SyncState.GROUND:
                ms = replace(ms, done=True)
        elif ms.pending is None and reported == ms.state:
            pass
        else:
            log.info("master: unexpected report %s (state %s, pending %s)",
                     reported.name, ms.state.name, ms.pending.name if ms.pending is not None else None)
            ms = replace(ms, resend=True)
    elif incoming is not None and incoming.kind == MessageKind.TASK_EVENT:
        if (incoming.code == TaskEvent.FINAL_WAYPOINT and ms.state == SyncState.READY
                and ms.pending is None):
            out.append(command(SyncState.STOPPING))
            ms = replace(ms, pending=SyncState.STOPPING)

    if ms.state == SyncState.GROUND and ms.pending is None and not ms.done:
        out.append(command(SyncState.HOVERING))
        ms = replace(ms, pending=SyncState.HOVERING)
    if outbound is not None and ms.state == SyncState.READY and ms.pending is None:
        out.append(detection_data(outbound.frame_index, outbound.detection))
    return ms, out


def drone_step(ds: DroneState, incoming: Optional[Message], flight_status: FlightStatus,
               task: Optional[TaskEvent] = None, pose: Optional[PoseTelemetry] = None
               ) -> tuple[DroneState, list[Message]]:
    """Advance the drone by one tick.

    ``task`` is a waypoint event from the onboard planner; ``pose`` a telemetry
    sample to forward. The caller routes consumed detection_data to the planner.
    """
    out = []
    if incoming is not None and incoming.kind == MessageKind.COMMAND:
        target = SyncState(incoming.code)
        if target == ds.pending:
            pass
        elif (ds.pending is None and target == NEXT_STATE[ds.state]
              and target != SyncState.GROUND):
            if target == SyncState.HOVERING:
                ds = replace(ds, pending=SyncState.HOVERING)
            elif target == SyncState.READY:
                ds = replace(ds, state=SyncState.READY)
                out.append(state_report(ds.state))
            elif target == SyncState.STOPPING:
                ds = replace(ds, state=SyncState.STOPPING, pending=SyncState.GROUND)
                out.append(state_report(ds.state))
        else:
            if target != ds.state:
                log.info("drone: rejected command %s in state %s", target.name, ds.state.name)
            out.append(state_report(ds.state))

    if ds.pending == SyncState.HOVERING and flight_status == FlightStatus.AT_HEIGHT:
        ds = replace(ds, state=SyncState.HOVERING, pending=None)
        out.append(state_report(ds.state))
    elif ds.pending == SyncState.GROUND and flight_status == FlightStatus.LANDED:
        ds = replace(ds, state=SyncState.GROUND, pending=None)
        out.append(state_report(ds.state))

    if task is not None and ds.state == SyncState.READY:
        out.append(task_event(task))
    if pose is not None:
        out.append(Message(MessageKind.POSE_TELEMETRY, 0, pose))
    return ds, out


# ---------------------------------------------------------------- exhaustive check

@dataclass(frozen=True)
class _World:
    master: MasterState
    drone: DroneState
    to_drone: tuple
    to_master: tuple
    phys: FlightStatus
    final_fired: bool
    passed_hovering: bool
    sent: int        # messages sent before the first joint ready
    joint_ready: bool


@dataclass
class CheckReport:
    states: int
    safety_ok: bool
    agreement_ok: bool
    live_ok: bool
    max_messages_to_ready: int
    violations: list


def _phys_next(w: _World) -> Optional[FlightStatus]:
    d = w.drone
    if d.pending == SyncState.HOVERING and w.phys == FlightStatus.ON_GROUND:
        return FlightStatus.AT_HEIGHT
    if d.state == SyncState.READY and w.phys == FlightStatus.AT_HEIGHT:
        return FlightStatus.TASK_RUNNING
    if d.pending == SyncState.GROUND and w.phys in (FlightStatus.AT_HEIGHT, FlightStatus.TASK_RUNNING):
        return FlightStatus.LANDED
    return None


def _successors(w: _World) -> list[_World]:
    res = []

    def emit(w2: _World, new_msgs: list, to_drone: bool) -> _World:
        q = (w2.to_drone if to_drone else w2.to_master) + tuple(new_msgs)
        sent = w2.sent if w2.joint_ready else w2.sent + len(new_msgs)
        w2 = replace(w2, sent=sent, **({"to_drone": q} if to_drone else {"to_master": q}))
        jr = w2.joint_ready or (w2.master.state == SyncState.READY and w2.drone.state == SyncState.READY)
        return replace(w2, joint_ready=jr)

    # master tick, consuming the head of its inbox if any, with or without a frame to forward
    for frame in (None, DetectionData(0, None)):
        inbox = w.to_master
        msg = inbox[0] if inbox else None
        ms, out = master_step(w.master, msg, frame)
        w2 = replace(w, master=ms, to_master=inbox[1:])
        res.append(emit(w2, out, to_drone=True))
    # drone tick, optionally raising the final-waypoint event once
    tasks = [None]
    if w.drone.state == SyncState.READY and not w.final_fired:
        tasks.append(TaskEvent.FINAL_WAYPOINT)
    for task in tasks:
        inbox = w.to_drone
        msg = inbox[0] if inbox else None
        ds, out = drone_step(w.drone, msg, w.phys, task)
        w2 = replace(w, drone=ds, to_drone=inbox[1:],
                     final_fired=w.final_fired or task is not None,
                     passed_hovering=w.passed_hovering or ds.state == SyncState.HOVERING)
        res.append(emit(w2, out, to_drone=False))
    nxt = _phys_next(w)
    if nxt is not None:
        res.append(replace(w, phys=nxt))
    return res


def check_protocol(max_in_flight: int = 2, max_messages: int = 6) -> CheckReport:
    """Explore every interleaving of master ticks, drone ticks and flight progress.

    Paths that would put more than ``max_in_flight`` messages on the channels are cut.
    """
    init = _World(MasterState(), DroneState(), (), (), FlightStatus.ON_GROUND, False, False, 0, False)
    seen = {init}
    edges: dict = {}
    queue = deque([init])
    violations = []
    while queue:
        w = queue.popleft()
        succ = [s for s in _successors(w) if len(s.to_drone) + len(s.to_master) <= max_in_flight]
        edges[w] = succ
        for s in succ:
            if s not in seen:
                seen.add(s)
                queue.append(s)

    safety_ok = agreement_ok = True
    max_sent = 0
    for w in seen:
        if w.drone.state == SyncState.READY and not w.passed_hovering:
            safety_ok = False
            violations.append(("ready without hovering", w))
        if not w.to_drone and not w.to_master and w.master.state != w.drone.state:
            agreement_ok = False
            violations.append(("disagreement at quiescence", w))
        if w.joint_ready:
            max_sent = max(max_sent, w.sent)

    # every state that has not yet reached joint ready must be able to
    can_reach = {w for w in seen if w.joint_ready}
    rev: dict = {}
    for w, succ in edges.items():
        for s in succ:
            rev.setdefault(s, []).append(w)
    stack = list(can_reach)
    while stack:
        s = stack.pop()
        for p in rev.get(s, ()):
            if p not in can_reach:
                can_reach.add(p)
                stack.append(p)
    stuck = [w for w in seen if w not in can_reach]
    live_ok = not stuck and bool(max_sent) and max_sent <= max_messages
    violations.extend(("cannot reach joint ready", w) for w in stuck[:5])
    return CheckReport(len(seen), safety_ok, agreement_ok, live_ok, max_sent, violations)
