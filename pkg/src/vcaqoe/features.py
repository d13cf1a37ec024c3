"""Per-window feature extraction from video packet streams.

Two canonical feature sets share the 12 flow-level statistics: the IP/UDP
set adds two fragmentation-semantics features, the RTP set adds 12
header-derived features. Column order is fixed for model portability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import assemble_rtp
from .classify import PayloadTypeMap
from .session import MICROS_PER_S, MediaClass

FLOW_FEATURES = [
    "bytes_per_s", "pkts_per_s",
    "size_mean", "size_std", "size_median", "size_min", "size_max",
    "iat_mean", "iat_std", "iat_median", "iat_min", "iat_max",
]
SEMANTIC_FEATURES = ["n_unique_sizes", "n_microbursts"]
RTP_ONLY_FEATURES = [
    "unique_rtp_ts_video", "unique_rtp_ts_retx",
    "unique_rtp_ts_intersection", "unique_rtp_ts_union",
    "marker_sum_video", "marker_sum_retx", "ooo_count",
    "lag_mean", "lag_std", "lag_median", "lag_min", "lag_max",
]

IPUDP_FEATURE_NAMES = FLOW_FEATURES + SEMANTIC_FEATURES
RTP_FEATURE_NAMES = FLOW_FEATURES + RTP_ONLY_FEATURES

SEQ_HALF_RANGE = 32768


class FeatureError(Exception):
    pass


class MissingRtp(FeatureError):
    pass


@dataclass(frozen=True)
class SemanticParams:
    theta_iat_ms: float = 3.0
    sampling_freq: int = 90000

    def __post_init__(self):
        if self.theta_iat_ms <= 0 or self.sampling_freq <= 0:
            raise ValueError("theta_iat_ms and sampling_freq must be positive")


def _five_stats(values):
    if len(values) == 0:
        return [0.0] * 5
    a = np.asarray(values, dtype=np.float64)
    return [float(a.mean()), float(a.std()), float(np.median(a)),
            float(a.min()), float(a.max())]


def flow_stats(window_packets, w=1.0):
    """12 flow-level statistics over one window of video packets."""
    n = len(window_packets)
    if n == 0:
        return [0.0] * 12
    sizes = [p.payload_len for p in window_packets]
    out = [sum(sizes) / w, n / w]
    out += _five_stats(sizes)
    if n < 2:
        out += [0.0] * 5
    else:
        arrivals = np.array([p.arrival_us for p in window_packets],
                            dtype=np.int64)
        iats = np.diff(arrivals) / MICROS_PER_S
        out += _five_stats(iats)
    return out


def semantic_features(window_packets, params=SemanticParams()):
    """Unique packet-size count and microburst count for one window."""
    n = len(window_packets)
    if n == 0:
        return (0.0, 0.0)
    n_unique = len({p.payload_len for p in window_packets})
    theta_us = params.theta_iat_ms * 1000.0
    bursts = 1
    prev = window_packets[0].arrival_us
    for p in window_packets[1:]:
        if p.arrival_us - prev >= theta_us:
            bursts += 1
        prev = p.arrival_us
    return (float(n_unique), float(bursts))


def _ooo_count(video_packets):
    count = 0
    prev = None
    for p in video_packets:
        seq = p.rtp.sequence
        if prev is not None:
            raw = seq - prev
            if raw < 0 and -raw <= SEQ_HALF_RANGE:
                count += 1
        prev = seq
    return count


def _signed_ts_delta(ts, ts0):
    d = (ts - ts0) & 0xFFFFFFFF
    if d >= 1 << 31:
        d -= 1 << 32
    return d


def frame_lags(frames, origin, sampling_freq):
    """Per-frame delay relative to the schedule implied by RTP timestamps.

    origin is (end_us, rtp_ts) of the session's first video frame, which by
    construction has zero lag.
    """
    t0_us, ts0 = origin
    lags = []
    for f in frames:
        ts = min(f.rtp_timestamps)
        sched_us = t0_us + _signed_ts_delta(ts, ts0) * MICROS_PER_S / sampling_freq
        lags.append((f.end_us - sched_us) / MICROS_PER_S)
    return lags


def rtp_features(window_packets, params=SemanticParams(), ptmap=None,
                 origin=None, window_frames=None):
    """RTP feature block for one window (12 values).

    window_packets must be media-classified; the video and retransmission
    streams are told apart by media_class. window_frames are the RTP frames
    ending in this window (used for lag); origin anchors the lag schedule at
    the session's first video frame.
    """
    ptmap = ptmap or PayloadTypeMap()
    video = [p for p in window_packets if p.media_class is MediaClass.VIDEO]
    retx = [p for p in window_packets
            if p.media_class is MediaClass.VIDEO_RETX]
    for p in video + retx:
        if p.rtp is None:
            raise MissingRtp("RTP features need RTP headers")
    ts_v = {p.rtp.timestamp for p in video}
    ts_r = {p.rtp.timestamp for p in retx}
    out = [float(len(ts_v)), float(len(ts_r)),
           float(len(ts_v & ts_r)), float(len(ts_v | ts_r)),
           float(sum(p.rtp.marker for p in video)),
           float(sum(p.rtp.marker for p in retx)),
           float(_ooo_count(video))]
    if window_frames and origin is not None:
        out += _five_stats(frame_lags(window_frames, origin,
                                      params.sampling_freq))
    else:
        out += [0.0] * 5
    return out


def session_feature_rows(session, feature_set="ipudp", w=1,
                         params=SemanticParams(), ptmap=None):
    """Per-window feature vectors for a media-classified session.

    Returns (window_starts, matrix) covering every w-second window between
    the first and last video packet, inclusive; callers drop edge windows
    during alignment. feature_set is "ipudp" or "rtp".
    """
    if feature_set not in ("ipudp", "rtp"):
        raise ValueError(f"unknown feature set {feature_set!r}")
    w = int(w)
    wus = w * MICROS_PER_S
    video = session.video_packets()
    if not video:
        return [], np.zeros((0, len(IPUDP_FEATURE_NAMES
                                    if feature_set == "ipudp"
                                    else RTP_FEATURE_NAMES)))

    first_key = (video[0].arrival_us // wus) * w
    last_key = (video[-1].arrival_us // wus) * w
    keys = list(range(first_key, last_key + w, w))
    by_window = {k: [] for k in keys}
    for p in video:
        by_window[(p.arrival_us // wus) * w].append(p)

    if feature_set == "rtp":
        retx = [p for p in session.packets
                if p.media_class is MediaClass.VIDEO_RETX]
        for p in retx:
            k = (p.arrival_us // wus) * w
            if k in by_window:
                by_window[k].append(p)
        frames = assemble_rtp(video)
        origin = (frames[0].end_us, min(frames[0].rtp_timestamps))
        frames_by_window = {k: [] for k in keys}
        for f in frames:
            k = (f.end_us // wus) * w
            if k in frames_by_window:
                frames_by_window[k].append(f)

    rows = []
    for k in keys:
        pkts = sorted(by_window.get(k, []), key=lambda p: p.arrival_us)
        vid = [p for p in pkts if p.media_class is MediaClass.VIDEO]
        row = flow_stats(vid, float(w))
        if feature_set == "ipudp":
            row += list(semantic_features(vid, params))
        else:
            row += rtp_features(pkts, params, ptmap, origin,
                                frames_by_window.get(k, []))
        rows.append(row)
    return keys, np.asarray(rows, dtype=np.float64)
