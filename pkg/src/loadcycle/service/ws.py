"""Minimal RFC 6455 WebSocket framing for the duplex message channel.

Supports what the labeling UI needs: the server-side upgrade handshake,
masked client text frames, unmasked server text frames, ping/pong and
close. One text frame carries one protocol message.
"""

from __future__ import annotations

import base64
import hashlib
import struct

GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT, OP_TEXT, OP_CLOSE, OP_PING, OP_PONG = 0x0, 0x1, 0x8, 0x9, 0xA


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def handshake_response(headers: dict[str, str]) -> bytes:
    key = headers.get("sec-websocket-key", "")
    return (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n"
        "\r\n"
    ).encode("ascii")


def encode_frame(payload: bytes, opcode: int = OP_TEXT, mask: bool = False) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0x00
    if n < 126:
        head += bytes([mask_bit | n])
    elif n < 1 << 16:
        head += bytes([mask_bit | 126]) + struct.pack("!H", n)
    else:
        head += bytes([mask_bit | 127]) + struct.pack("!Q", n)
    if mask:
        key = struct.pack("!I", 0x12345678)
        body = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return head + key + body
    return head + payload


async def read_frame(reader) -> tuple[int, bytes]:
    """Read one (possibly fragmented) frame; returns (opcode, payload)."""
    opcode = None
    parts: list[bytes] = []
    while True:
        b1, b2 = await reader.readexactly(2)
        fin = b1 & 0x80
        op = b1 & 0x0F
        masked = b2 & 0x80
        n = b2 & 0x7F
        if n == 126:
            (n,) = struct.unpack("!H", await reader.readexactly(2))
        elif n == 127:
            (n,) = struct.unpack("!Q", await reader.readexactly(8))
        key = await reader.readexactly(4) if masked else None
        payload = await reader.readexactly(n)
        if key:
            payload = bytes(c ^ key[i % 4] for i, c in enumerate(payload))
        if op != OP_CONT:
            opcode = op
        parts.append(payload)
        if fin:
            return opcode, b"".join(parts)
