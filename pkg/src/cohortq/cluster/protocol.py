"""Length-prefixed framed messages over a reliable stream.

Frame layout (little-endian):

    u32 frame length (bytes after this field)
    u32 envelope length
    envelope: UTF-8 JSON  {"v": 1, "kind": ..., "executionId"?, ...}
    binary attachment (frame length - 8 - envelope length bytes), used to
    ship import containers without base64 overhead

Unknown protocol versions are rejected at the REGISTER handshake.
"""

from __future__ import annotations

import asyncio
import json
import struct

from ..errors import ProtocolError

PROTOCOL_VERSION = 1
MAX_FRAME = 1 << 30

KINDS = (
    "REGISTER",
    "REGISTERED",
    "REJECTED",
    "ASSIGN_BUCKETS",
    "LOAD_IMPORT",
    "LOAD_DONE",
    "EXECUTE_QUERY",
    "RESULT_BATCH",
    "WORKER_DONE",
    "WORKER_FAILED",
    "CANCEL",
    "PING",
    "PONG",
)


def encode_frame(doc: dict, binary: bytes = b"") -> bytes:
    envelope = json.dumps(doc, separators=(",", ":")).encode("utf-8")
    total = 4 + len(envelope) + len(binary)
    return struct.pack("<II", total, len(envelope)) + envelope + binary


async def write_message(writer: asyncio.StreamWriter, doc: dict, binary: bytes = b""):
    doc = dict(doc)
    doc.setdefault("v", PROTOCOL_VERSION)
    writer.write(encode_frame(doc, binary))
    await writer.drain()


async def read_message(reader: asyncio.StreamReader) -> tuple[dict, bytes]:
    header = await reader.readexactly(8)
    total, env_len = struct.unpack("<II", header)
    if total > MAX_FRAME or env_len > total - 4:
        raise ProtocolError(f"oversized or malformed frame ({total} bytes)")
    body = await reader.readexactly(total - 4)
    try:
        doc = json.loads(body[:env_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed envelope: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") not in KINDS:
        raise ProtocolError(f"unknown message kind {doc.get('kind')!r}")
    return doc, body[env_len:]
