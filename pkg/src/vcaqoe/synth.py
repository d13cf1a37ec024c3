"""Synthetic VCA session generator with exact ground truth.

Frames are emitted on a fixed schedule, fragmented into near-equal packets
(intra-frame size spread <= 1 byte), and interleaved with audio. Each
packet's UDP payload is written as media bytes + 12 so the fixed-RTP-header
deduction downstream recovers the media byte count exactly. A separate
impairment pass adds delay jitter, Bernoulli loss, and optional
retransmissions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, Optional

import numpy as np

from .classify import PayloadTypeMap
from .ingest import GroundTruthSeries, _atomic_write_csv
from .session import (MICROS_PER_S, RTP_FIXED_HEADER_LEN, MediaClass,
                      PacketRecord, QoeWindow, RtpHeader, Session)

FRAME_LOG_HEADER = ["frame_id", "emit_us", "complete_us", "media_bytes",
                    "rtp_ts"]

# Minimum media bytes per packet keeps every video payload >= 564 bytes.
MIN_PACKET_MEDIA = 552
INTRA_FRAME_GAP_US = 100
# Frame-height tiers as a function of per-second bitrate (kbps).
HEIGHT_TIERS = ((400.0, 180), (1000.0, 360), (float("inf"), 720))
# Separation margin for base chunk sizes between nearby frames; keeps every
# cross-frame packet-size difference > 2 even with the +1 remainder byte.
SEPARATION_MARGIN = 4

SRC = ("10.0.0.2", 50000)
DST = ("192.0.2.10", 3478)


class InvalidProfile(ValueError):
    pass


@dataclass(frozen=True)
class SenderProfile:
    fps: float = 30.0
    bitrate_kbps: float = 800.0
    max_payload: int = 1200
    keyframe_interval: int = 0          # 0 disables keyframes
    keyframe_multiplier: float = 2.0
    frame_size_jitter: float = 0.05     # relative stddev (lognormal)
    audio_pps: float = 50.0
    audio_size_range: tuple = (89, 385)
    sampling_freq: int = 90000
    payload_type_map: Optional[Dict[int, MediaClass]] = None
    separable: bool = True
    separable_depth: int = 3
    start_time_s: float = 1_700_000_000.2
    video_ssrc: int = 0x11111111
    audio_ssrc: int = 0x22222222

    @property
    def rtp_ts_increment(self):
        return self.sampling_freq / self.fps

    def ptmap(self):
        if self.payload_type_map:
            return PayloadTypeMap(dict(self.payload_type_map))
        return PayloadTypeMap()

    def validate(self):
        if self.fps <= 0 or self.bitrate_kbps <= 0:
            raise InvalidProfile("fps and bitrate must be positive")
        if self.max_payload <= RTP_FIXED_HEADER_LEN:
            raise InvalidProfile("max_payload must exceed the RTP header")
        lo, hi = self.audio_size_range
        if not (1 <= lo <= hi):
            raise InvalidProfile("bad audio size range")


@dataclass(frozen=True)
class ImpairmentProfile:
    base_delay_ms: float = 0.0
    delay_jitter_ms: float = 0.0
    loss_prob: float = 0.0
    retransmit: bool = False
    rtt_ms: float = 50.0

    def __post_init__(self):
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")
        if min(self.base_delay_ms, self.delay_jitter_ms, self.rtt_ms) < 0:
            raise ValueError("delays must be non-negative")


@dataclass(frozen=True)
class FrameLogEntry:
    frame_id: int
    emit_us: int
    complete_us: int
    media_bytes: int
    rtp_ts: int


def fragment_sizes(size, max_payload):
    """Split a frame of `size` media bytes into ceil(size/max_payload)
    near-equal chunks; the remainder is spread one byte each over the first
    chunks, so the intra-frame spread never exceeds one byte."""
    n_pkts = max(1, math.ceil(size / max_payload))
    chunk = size // n_pkts
    rem = size - chunk * n_pkts
    return [chunk + 1 if j < rem else chunk for j in range(n_pkts)]


def generate(profile: SenderProfile, duration_s: float, seed: int,
             session_id=None, vca_label="synthetic"):
    """Generate (Session, GroundTruthSeries, frame log) for one session."""
    profile.validate()
    if duration_s < 2:
        raise InvalidProfile("duration must be at least 2 seconds")
    rng = np.random.default_rng([int(seed), 0xC0FFEE])
    ptmap = profile.ptmap()
    pt_video = ptmap.payload_type_for(MediaClass.VIDEO)
    pt_audio = ptmap.payload_type_for(MediaClass.AUDIO)
    if pt_video is None:
        raise InvalidProfile("payload type map lacks a video entry")

    start_us = int(round(profile.start_time_s * MICROS_PER_S))
    n_frames = int(math.floor(duration_s * profile.fps))
    mean_media = profile.bitrate_kbps * 1000.0 / 8.0 / profile.fps

    packets = []
    frame_log = []
    seq = 0
    recent_chunks = []
    for i in range(n_frames):
        emit_us = start_us + int(round(i * MICROS_PER_S / profile.fps))
        size = mean_media
        if (profile.keyframe_interval
                and i % profile.keyframe_interval == 0):
            size *= profile.keyframe_multiplier
        if profile.frame_size_jitter > 0:
            size *= math.exp(rng.normal(0.0, profile.frame_size_jitter))
        size = max(MIN_PACKET_MEDIA, int(round(size)))

        n_pkts = max(1, math.ceil(size / profile.max_payload))
        chunk = size // n_pkts
        if chunk < MIN_PACKET_MEDIA:
            size = MIN_PACKET_MEDIA * n_pkts
            chunk = MIN_PACKET_MEDIA
        if profile.separable:
            depth = max(1, int(profile.separable_depth))
            while any(abs(chunk - c) < SEPARATION_MARGIN
                      for c in recent_chunks[-depth:]):
                size += n_pkts
                chunk = size // n_pkts
        chunks = fragment_sizes(size, profile.max_payload)
        recent_chunks.append(chunk)
        if len(recent_chunks) > 8:
            recent_chunks = recent_chunks[-8:]

        rtp_ts = int(round(i * profile.rtp_ts_increment)) & 0xFFFFFFFF
        for j, media in enumerate(chunks):
            pkt_us = emit_us + j * INTRA_FRAME_GAP_US
            hdr = RtpHeader(2, False, False, j == n_pkts - 1, 0, pt_video,
                            seq & 0xFFFF, rtp_ts, profile.video_ssrc)
            packets.append(PacketRecord(
                pkt_us, SRC[0], DST[0], SRC[1], DST[1],
                media + RTP_FIXED_HEADER_LEN, hdr))
            seq += 1
        complete_us = emit_us + (n_pkts - 1) * INTRA_FRAME_GAP_US
        frame_log.append(FrameLogEntry(i, emit_us, complete_us, size, rtp_ts))

    # Interleaved audio stream.
    if profile.audio_pps > 0 and pt_audio is not None:
        lo, hi = profile.audio_size_range
        n_audio = int(math.floor(duration_s * profile.audio_pps))
        aud_seq = 0
        for k in range(n_audio):
            t_us = start_us + int(round(k * MICROS_PER_S / profile.audio_pps)) + 37
            size = int(rng.integers(lo, hi + 1))
            hdr = RtpHeader(2, False, False, True, 0, pt_audio,
                            aud_seq & 0xFFFF,
                            int(k * 48000 / profile.audio_pps) & 0xFFFFFFFF,
                            profile.audio_ssrc)
            packets.append(PacketRecord(t_us, SRC[0], DST[0], SRC[1] + 2,
                                        DST[1], size, hdr))
            aud_seq += 1

    packets.sort(key=lambda p: p.arrival_us)
    sid = session_id or f"synth-{seed}"
    session = Session(sid, vca_label, packets)
    truth = truth_from_frame_log(frame_log, sid,
                                 first_us=packets[0].arrival_us,
                                 last_us=packets[-1].arrival_us)
    return session, truth, frame_log


def truth_from_frame_log(frame_log, session_id="synth", w=1,
                         first_us=None, last_us=None):
    """Exact per-window ground truth from the emitted frame log.

    fps counts frames completing in the window, bitrate sums their media
    bytes, jitter is the population stddev of completion gaps (gaps belong
    to the later frame's window), and frame height follows the bitrate
    tier. Jitter is missing for windows with fewer than 3 frames.
    """
    w = int(w)
    wus = w * MICROS_PER_S
    if first_us is None:
        first_us = frame_log[0].emit_us
    if last_us is None:
        last_us = frame_log[-1].complete_us
    first_key = (first_us // wus) * w
    last_key = (last_us // wus) * w

    counts, nbytes, gaps = {}, {}, {}
    prev = None
    for f in frame_log:
        k = (f.complete_us // wus) * w
        counts[k] = counts.get(k, 0) + 1
        nbytes[k] = nbytes.get(k, 0) + f.media_bytes
        if prev is not None:
            gaps.setdefault(k, []).append(f.complete_us - prev)
        prev = f.complete_us

    rows = []
    for k in range(first_key, last_key + w, w):
        n = counts.get(k, 0)
        br = nbytes.get(k, 0) * 8.0 / w / 1000.0
        jit = None
        if n >= 3 and len(gaps.get(k, [])) >= 2:
            jit = float(np.std(np.asarray(gaps[k], dtype=np.int64))) / 1000.0
        height = None
        if n > 0:
            for edge, h in HEIGHT_TIERS:
                if br <= edge:
                    height = h
                    break
        rows.append(QoeWindow(window_start=k, duration_s=float(w), fps=n / w,
                              bitrate_kbps=br, frame_jitter_ms=jit,
                              frame_height=height))
    return GroundTruthSeries(session_id, rows)


def impair(session, profile: ImpairmentProfile, seed, ptmap=None):
    """Apply per-packet delay jitter, Bernoulli loss, and optional
    retransmission of lost video packets on the retransmission payload
    type. Output is re-sorted by arrival; reordering emerges from jitter.
    """
    rng = np.random.default_rng([int(seed), 0x1A7E17])
    ptmap = ptmap or PayloadTypeMap()
    pt_retx = ptmap.payload_type_for(MediaClass.VIDEO_RETX)
    base_us = profile.base_delay_ms * 1000.0
    jitter_us = profile.delay_jitter_ms * 1000.0
    rtt_us = profile.rtt_ms * 1000.0

    n = len(session.packets)
    delays = np.full(n, base_us)
    if jitter_us > 0:
        delays = base_us + np.maximum(0.0, rng.normal(0.0, jitter_us, n))
    lost = (rng.random(n) < profile.loss_prob if profile.loss_prob > 0
            else np.zeros(n, dtype=bool))

    out = []
    for i, p in enumerate(session.packets):
        if lost[i]:
            is_video = (p.rtp is not None
                        and ptmap.lookup(p.rtp.payload_type) is MediaClass.VIDEO)
            if profile.retransmit and is_video and pt_retx is not None:
                hdr = replace(p.rtp, payload_type=pt_retx)
                out.append(replace(p, rtp=hdr,
                                   arrival_us=p.arrival_us
                                   + int(round(rtt_us + delays[i]))))
            continue
        out.append(replace(p, arrival_us=p.arrival_us + int(round(delays[i]))))
    out.sort(key=lambda p: p.arrival_us)
    return Session(session.session_id, session.vca_label, out)


def write_frame_log_csv(frame_log, path):
    rows = [[f.frame_id, f.emit_us, f.complete_us, f.media_bytes, f.rtp_ts]
            for f in frame_log]
    _atomic_write_csv(path, FRAME_LOG_HEADER, rows)


def read_frame_log_csv(path):
    import csv
    entries = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FRAME_LOG_HEADER:
            raise ValueError(f"expected {','.join(FRAME_LOG_HEADER)}")
        for row in reader:
            if row:
                entries.append(FrameLogEntry(*(int(c) for c in row)))
    return entries
