"""Core domain types: packets, RTP headers, frames, sessions, QoE windows.

All timestamps are carried internally as 64-bit microsecond integers and
converted to float seconds only at API edges, so window assignment never
drifts.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import Optional

MICROS_PER_S = 1_000_000
RTP_FIXED_HEADER_LEN = 12


class RtpError(ValueError):
    """Base class for RTP parse failures."""


class RtpTooShort(RtpError):
    pass


class RtpBadVersion(RtpError):
    pass


class MediaClass(enum.Enum):
    AUDIO = "audio"
    VIDEO = "video"
    VIDEO_RETX = "video_retx"
    OTHER = "other"


@dataclass(frozen=True, slots=True)
class RtpHeader:
    version: int
    padding: bool
    extension: bool
    marker: bool
    csrc_count: int
    payload_type: int
    sequence: int
    timestamp: int
    ssrc: int
    csrcs: tuple = ()
    header_len: int = RTP_FIXED_HEADER_LEN


def parse_rtp_header(raw: bytes) -> RtpHeader:
    """Parse the fixed RTP header (plus CSRC list) from a UDP payload.

    Extension blocks are not decoded but are counted in ``header_len`` so
    callers can compute the media payload size.
    """
    if len(raw) < RTP_FIXED_HEADER_LEN:
        raise RtpTooShort(f"need >= 12 bytes, got {len(raw)}")
    b0 = raw[0]
    version = b0 >> 6
    if version != 2:
        raise RtpBadVersion(f"RTP version {version} != 2")
    padding = bool(b0 & 0x20)
    extension = bool(b0 & 0x10)
    csrc_count = b0 & 0x0F
    b1 = raw[1]
    marker = bool(b1 & 0x80)
    payload_type = b1 & 0x7F
    sequence, = struct.unpack_from(">H", raw, 2)
    timestamp, ssrc = struct.unpack_from(">II", raw, 4)

    header_len = RTP_FIXED_HEADER_LEN + 4 * csrc_count
    if len(raw) < header_len:
        raise RtpTooShort(f"CSRC list overruns payload ({len(raw)} < {header_len})")
    csrcs = struct.unpack_from(f">{csrc_count}I", raw, 12) if csrc_count else ()
    if extension:
        if len(raw) < header_len + 4:
            raise RtpTooShort("extension header overruns payload")
        ext_words, = struct.unpack_from(">H", raw, header_len + 2)
        header_len += 4 + 4 * ext_words
        if len(raw) < header_len:
            raise RtpTooShort("extension block overruns payload")
    return RtpHeader(version, padding, extension, marker, csrc_count,
                     payload_type, sequence, timestamp, ssrc, csrcs, header_len)


def serialize_rtp_header(h: RtpHeader) -> bytes:
    """Inverse of parse_rtp_header for headers without an extension block."""
    if h.extension:
        raise ValueError("extension block serialization is unsupported")
    b0 = (h.version << 6) | (int(h.padding) << 5) | (h.csrc_count & 0x0F)
    b1 = (int(h.marker) << 7) | (h.payload_type & 0x7F)
    out = struct.pack(">BBHII", b0, b1, h.sequence & 0xFFFF,
                      h.timestamp & 0xFFFFFFFF, h.ssrc & 0xFFFFFFFF)
    if h.csrc_count:
        out += struct.pack(f">{h.csrc_count}I", *h.csrcs)
    return out


@dataclass(frozen=True, slots=True)
class PacketRecord:
    arrival_us: int
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    payload_len: int
    rtp: Optional[RtpHeader] = None
    media_class: Optional[MediaClass] = None

    @property
    def arrival_time(self) -> float:
        return self.arrival_us / MICROS_PER_S


@dataclass(frozen=True, slots=True)
class Frame:
    frame_id: int
    packet_indices: tuple
    size_bytes: int
    start_us: int
    end_us: int
    rtp_timestamps: frozenset = frozenset()

    @property
    def start_time(self) -> float:
        return self.start_us / MICROS_PER_S

    @property
    def end_time(self) -> float:
        return self.end_us / MICROS_PER_S


@dataclass
class Session:
    session_id: str
    vca_label: str
    packets: list

    def __post_init__(self):
        prev = -1
        for p in self.packets:
            if p.arrival_us < prev:
                raise ValueError("packets must be sorted by arrival time")
            prev = p.arrival_us

    def __len__(self):
        return len(self.packets)

    def video_packets(self) -> list:
        return [p for p in self.packets if p.media_class is MediaClass.VIDEO]


@dataclass
class QoeWindow:
    window_start: int
    duration_s: float = 1.0
    fps: Optional[float] = None
    bitrate_kbps: Optional[float] = None
    frame_jitter_ms: Optional[float] = None
    frame_height: Optional[int] = None
    resolution_class: Optional[str] = None


def window_of(arrival_time: float) -> int:
    """Epoch second containing an arrival time; the boundary second belongs
    to the next window."""
    return int(arrival_time // 1.0)


def window_of_us(arrival_us: int) -> int:
    return arrival_us // MICROS_PER_S
