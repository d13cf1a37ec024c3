"""Trace and ground-truth readers plus estimate/truth alignment.

Supported inputs: classic pcap (Ethernet link type, IPv4/UDP only), the
packet CSV schema, and the per-second ground-truth CSV schema.
"""

from __future__ import annotations

import csv
import math
import os
import struct
import tempfile
from dataclasses import dataclass

from .session import (MICROS_PER_S, MediaClass, PacketRecord, QoeWindow,
                      RtpError, RtpHeader, Session, parse_rtp_header,
                      serialize_rtp_header)

PACKET_CSV_HEADER = ["ts_us", "src_ip", "dst_ip", "src_port", "dst_port",
                     "udp_payload_len", "rtp_pt", "rtp_seq", "rtp_ts",
                     "rtp_marker", "rtp_ssrc"]
TRUTH_CSV_HEADER = ["t_sec", "fps", "bitrate_kbps", "frame_jitter_ms",
                    "frame_height"]

PCAP_MAGIC_US = 0xA1B2C3D4
PCAP_MAGIC_NS = 0xA1B23C4D
LINKTYPE_ETHERNET = 1


class IngestError(Exception):
    pass


class BadMagic(IngestError):
    pass


class UnsupportedLinkType(IngestError):
    pass


class Truncated(IngestError):
    pass


class Empty(IngestError):
    pass


class BadHeader(IngestError):
    pass


class BadRow(IngestError):
    def __init__(self, line_no, msg):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


class DuplicateSecond(IngestError):
    pass


class SessionFiltered(IngestError):
    pass


class NoOverlap(IngestError):
    pass


@dataclass
class GroundTruthSeries:
    session_id: str
    rows: list  # QoeWindow, strictly increasing window_start


@dataclass
class AlignedPair:
    session_id: str
    window_start: int
    truth: QoeWindow


def read_pcap(path, session_id=None, vca_label=""):
    """Read a classic pcap file into a Session of IPv4/UDP packets.

    Non-IPv4 and non-UDP packets are skipped and counted on the returned
    session as ``skipped_count``. RTP parsing is attempted on every UDP
    payload and attached when it succeeds.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 24:
        raise Truncated("pcap global header incomplete")
    magic_le, = struct.unpack_from("<I", data, 0)
    magic_be, = struct.unpack_from(">I", data, 0)
    if magic_le in (PCAP_MAGIC_US, PCAP_MAGIC_NS):
        endian, magic = "<", magic_le
    elif magic_be in (PCAP_MAGIC_US, PCAP_MAGIC_NS):
        endian, magic = ">", magic_be
    else:
        raise BadMagic(f"unknown pcap magic 0x{magic_le:08x}")
    nanos = magic == PCAP_MAGIC_NS
    _vmaj, _vmin, _tz, _sig, _snap, network = struct.unpack_from(
        endian + "HHiIII", data, 4)
    if network != LINKTYPE_ETHERNET:
        raise UnsupportedLinkType(f"link type {network} != Ethernet(1)")

    packets = []
    skipped = 0
    off = 24
    while off < len(data):
        if off + 16 > len(data):
            raise Truncated("record header incomplete")
        ts_sec, ts_frac, incl_len, _orig = struct.unpack_from(
            endian + "IIII", data, off)
        off += 16
        if off + incl_len > len(data):
            raise Truncated("record shorter than declared length")
        buf = data[off:off + incl_len]
        off += incl_len
        arrival_us = ts_sec * MICROS_PER_S + (ts_frac // 1000 if nanos else ts_frac)
        rec = _decode_ethernet_ipv4_udp(buf, arrival_us)
        if rec is None:
            skipped += 1
        else:
            packets.append(rec)
    if not packets:
        raise Empty("no IPv4/UDP packets in capture")
    packets.sort(key=lambda p: p.arrival_us)
    sess = Session(session_id or os.path.basename(path), vca_label, packets)
    sess.skipped_count = skipped
    return sess


def _decode_ethernet_ipv4_udp(buf, arrival_us):
    if len(buf) < 14 + 20 + 8:
        return None
    ethertype, = struct.unpack_from(">H", buf, 12)
    if ethertype != 0x0800:
        return None
    ip_off = 14
    vihl = buf[ip_off]
    if vihl >> 4 != 4:
        return None
    ihl = (vihl & 0x0F) * 4
    proto = buf[ip_off + 9]
    if proto != 17:
        return None
    src_ip = ".".join(str(b) for b in buf[ip_off + 12:ip_off + 16])
    dst_ip = ".".join(str(b) for b in buf[ip_off + 16:ip_off + 20])
    udp_off = ip_off + ihl
    if len(buf) < udp_off + 8:
        return None
    src_port, dst_port, udp_len, _cksum = struct.unpack_from(">HHHH", buf, udp_off)
    payload_len = max(0, udp_len - 8)
    payload = buf[udp_off + 8:udp_off + 8 + payload_len]
    rtp = None
    try:
        rtp = parse_rtp_header(payload)
    except RtpError:
        pass
    return PacketRecord(arrival_us, src_ip, dst_ip, src_port, dst_port,
                        payload_len, rtp)


def write_pcap(session, path):
    """Write a Session back out as a classic pcap (µs) Ethernet capture.

    Payload bytes are the serialized RTP header (when present) padded with
    zeros, so read_pcap round-trips the session.
    """
    out = bytearray()
    out += struct.pack("<IHHiIII", PCAP_MAGIC_US, 2, 4, 0, 0, 65535,
                       LINKTYPE_ETHERNET)
    for p in session.packets:
        payload = bytearray(p.payload_len)
        if p.rtp is not None:
            hdr = serialize_rtp_header(p.rtp)
            payload[:len(hdr)] = hdr
        udp = struct.pack(">HHHH", p.src_port, p.dst_port,
                          8 + p.payload_len, 0) + bytes(payload)
        total_len = 20 + len(udp)
        sip = bytes(int(x) for x in p.src_ip.split("."))
        dip = bytes(int(x) for x in p.dst_ip.split("."))
        ip = struct.pack(">BBHHHBBH", 0x45, 0, total_len, 0, 0, 64, 17, 0) + sip + dip
        eth = b"\x02" * 6 + b"\x04" * 6 + struct.pack(">H", 0x0800)
        rec = eth + ip + udp
        out += struct.pack("<IIII", p.arrival_us // MICROS_PER_S,
                           p.arrival_us % MICROS_PER_S, len(rec), len(rec))
        out += rec
    _atomic_write_bytes(path, bytes(out))


def read_packet_csv(path, session_id=None, vca_label=""):
    """Read the packet CSV schema into a Session. RTP columns use -1 for
    absent."""
    packets = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PACKET_CSV_HEADER:
            raise BadHeader(f"expected {','.join(PACKET_CSV_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                (ts_us, src_ip, dst_ip, src_port, dst_port, plen,
                 pt, seq, ts, marker, ssrc) = row
                ts_us = int(ts_us)
                pt = int(pt)
                rtp = None
                if pt >= 0:
                    rtp = RtpHeader(2, False, False, bool(int(marker)), 0,
                                    pt, int(seq), int(ts), int(ssrc))
                packets.append(PacketRecord(
                    ts_us, src_ip, dst_ip, int(src_port), int(dst_port),
                    int(plen), rtp))
            except (ValueError, IndexError) as exc:
                raise BadRow(line_no, str(exc)) from exc
    if not packets:
        raise Empty("no packet rows")
    packets.sort(key=lambda p: p.arrival_us)
    if session_id is None:
        session_id = os.path.splitext(os.path.basename(path))[0]
        session_id = session_id.removesuffix(".packets")
    return Session(session_id, vca_label, packets)


def write_packet_csv(session, path):
    rows = []
    for p in session.packets:
        if p.rtp is not None:
            r = p.rtp
            rtp_cols = [r.payload_type, r.sequence, r.timestamp,
                        int(r.marker), r.ssrc]
        else:
            rtp_cols = [-1, -1, -1, -1, -1]
        rows.append([p.arrival_us, p.src_ip, p.dst_ip, p.src_port,
                     p.dst_port, p.payload_len] + rtp_cols)
    _atomic_write_csv(path, PACKET_CSV_HEADER, rows)


def read_ground_truth_csv(path, session_id=None):
    """Read the per-second QoE ground-truth CSV. frame_height=-1 means
    unknown; nan for any missing float metric."""
    rows = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRUTH_CSV_HEADER:
            raise BadHeader(f"expected {','.join(TRUTH_CSV_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t_sec = int(row[0])
                fps, br, jit = (float(row[1]), float(row[2]), float(row[3]))
                height = int(row[4])
            except (ValueError, IndexError) as exc:
                raise BadRow(line_no, str(exc)) from exc
            if t_sec in seen:
                raise DuplicateSecond(f"t_sec={t_sec} repeated")
            seen.add(t_sec)
            rows.append(QoeWindow(
                window_start=t_sec,
                fps=None if math.isnan(fps) else fps,
                bitrate_kbps=None if math.isnan(br) else br,
                frame_jitter_ms=None if math.isnan(jit) else jit,
                frame_height=None if height < 0 else height))
    rows.sort(key=lambda r: r.window_start)
    sid = session_id or os.path.splitext(os.path.basename(path))[0]
    return GroundTruthSeries(sid, rows)


def write_ground_truth_csv(rows, path):
    """Write QoeWindow rows in the ground-truth CSV schema."""
    def fmt(v):
        return "nan" if v is None else f"{v:.6f}"
    out = []
    for r in sorted(rows, key=lambda r: r.window_start):
        out.append([r.window_start, fmt(r.fps), fmt(r.bitrate_kbps),
                    fmt(r.frame_jitter_ms),
                    -1 if r.frame_height is None else r.frame_height])
    _atomic_write_csv(path, TRUTH_CSV_HEADER, out)


def session_interior_windows(session):
    """Epoch seconds fully covered by the session (partial edge seconds
    dropped)."""
    first = session.packets[0].arrival_us // MICROS_PER_S
    last = session.packets[-1].arrival_us // MICROS_PER_S
    return range(first + 1, last)


def align(session, truth, offset_s=0):
    """Pair complete session windows with ground-truth rows.

    Sessions whose truth series has fewer rows than whole seconds in its
    span are rejected outright. Partial first/last session seconds are
    always excluded.
    """
    if not session.packets or not truth.rows:
        raise NoOverlap("empty input")
    t_first = truth.rows[0].window_start + offset_s
    t_last = truth.rows[-1].window_start + offset_s
    span = t_last - t_first + 1
    if len(truth.rows) < span:
        raise SessionFiltered(
            f"{len(truth.rows)} truth rows over a {span}-second span")
    by_sec = {r.window_start + offset_s: r for r in truth.rows}
    pairs = []
    for sec in session_interior_windows(session):
        row = by_sec.get(sec)
        if row is not None:
            pairs.append(AlignedPair(session.session_id, sec, row))
    if not pairs:
        raise NoOverlap("no common complete windows")
    return pairs


def _atomic_write_bytes(path, blob):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(c) for c in row) for row in rows]
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())
