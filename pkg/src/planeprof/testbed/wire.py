"""Wire protocol: length-prefixed UTF-8 JSON frames over stream sockets.

Framing is bit-exact: a 4-byte big-endian unsigned length followed by
exactly that many bytes of UTF-8 JSON. The body is an object with the
fields ``msg_type``, ``sender``, ``seq`` and ``payload`` (an object),
serialized with sorted keys and compact separators so identical messages
produce identical bytes. ``seq`` increases strictly per (sender,
msg_type) stream.
"""

from __future__ import annotations

import json
import socket
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple

MAX_FRAME_BYTES = 1 << 20
LENGTH_PREFIX_BYTES = 4


class WireError(Exception):
    """A frame violates the protocol."""


class MsgType(str, Enum):
    REGISTER = "register"
    REGISTER_ACK = "register_ack"
    HEARTBEAT = "heartbeat"
    COMMISSION_WORKFLOW = "commission_workflow"
    DECOMMISSION_WORKFLOW = "decommission_workflow"
    CLIENT_REQUEST = "client_request"
    CLIENT_REPLY = "client_reply"
    NAME_LOOKUP = "name_lookup"
    NAME_ANSWER = "name_answer"
    SHUTDOWN = "shutdown"


@dataclass(frozen=True)
class Message:
    msg_type: MsgType
    sender: str
    seq: int
    payload: dict = field(default_factory=dict)


def encode(msg: Message) -> bytes:
    body = json.dumps(
        {
            "msg_type": msg.msg_type.value,
            "sender": msg.sender,
            "seq": msg.seq,
            "payload": msg.payload,
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    if len(body) > MAX_FRAME_BYTES:
        raise WireError(f"frame of {len(body)} bytes exceeds limit")
    return len(body).to_bytes(LENGTH_PREFIX_BYTES, "big") + body


def decode_body(body: bytes) -> Message:
    try:
        obj = json.loads(body.decode("utf-8"))
        return Message(
            msg_type=MsgType(obj["msg_type"]),
            sender=obj["sender"],
            seq=int(obj["seq"]),
            payload=obj["payload"],
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise WireError(f"bad frame body: {exc}") from exc


class FrameDecoder:
    """Incremental decoder; feed it bytes, get complete messages back."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> List[Message]:
        self._buf.extend(data)
        out: List[Message] = []
        while True:
            if len(self._buf) < LENGTH_PREFIX_BYTES:
                return out
            length = int.from_bytes(self._buf[:LENGTH_PREFIX_BYTES], "big")
            if length > MAX_FRAME_BYTES:
                raise WireError(f"frame length {length} exceeds limit")
            end = LENGTH_PREFIX_BYTES + length
            if len(self._buf) < end:
                return out
            body = bytes(self._buf[LENGTH_PREFIX_BYTES:end])
            del self._buf[:end]
            out.append(decode_body(body))


class SequenceCounters:
    """Strictly increasing sequence numbers per (sender, msg_type)."""

    def __init__(self) -> None:
        self._next: Dict[Tuple[str, MsgType], int] = defaultdict(int)

    def next(self, sender: str, msg_type: MsgType) -> int:
        seq = self._next[(sender, msg_type)]
        self._next[(sender, msg_type)] = seq + 1
        return seq


def send_message(sock: socket.socket, msg: Message) -> None:
    sock.sendall(encode(msg))


def recv_message(sock: socket.socket, decoder: FrameDecoder, timeout_s: float) -> Message:
    """Blocking receive of one message; helper for handshakes and tests."""
    sock.settimeout(timeout_s)
    try:
        while True:
            data = sock.recv(65536)
            if not data:
                raise WireError("connection closed mid-frame")
            msgs = decoder.feed(data)
            if msgs:
                if len(msgs) > 1:
                    raise WireError("recv_message got more than one frame")
                return msgs[0]
    finally:
        sock.settimeout(None)
