"""Frame assembly: packet-size lookback heuristic and RTP grouping.

Both assemblers deduct the 12-byte fixed RTP header from every packet when
accounting frame bytes, since that portion carries no media.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ingest import _atomic_write_csv
from .session import RTP_FIXED_HEADER_LEN, Frame

FRAME_CSV_HEADER = ["frame_id", "n_packets", "size_bytes", "start_us",
                    "end_us", "rtp_ts_list"]


class AssemblyError(Exception):
    pass


class MissingRtp(AssemblyError):
    pass


@dataclass(frozen=True)
class IpUdpAssemblyParams:
    delta_size_max: int = 2
    n_max: int = 2

    def __post_init__(self):
        if self.delta_size_max < 0 or self.n_max < 1:
            raise ValueError("delta_size_max >= 0 and n_max >= 1 required")


# Per-VCA lookback depths; unlabeled sessions use the default params above.
NMAX_PROFILES = {"meet": 3, "teams": 2, "webex": 1}


def params_for_vca(vca_label):
    n_max = NMAX_PROFILES.get(vca_label.lower(), 2) if vca_label else 2
    return IpUdpAssemblyParams(n_max=n_max)


def assemble_ipudp(video_packets, params=IpUdpAssemblyParams()):
    """Group video packets into frames by payload-size similarity.

    Each packet is compared against up to n_max previous packets, most
    recent first; it joins the frame of the first one whose size is within
    delta_size_max, otherwise it opens a new frame.
    """
    labels = _ipudp_labels(video_packets, params)
    return _build_frames(video_packets, labels)


def _ipudp_labels(video_packets, params):
    sizes = [p.payload_len for p in video_packets]
    labels = [0] * len(sizes)
    delta = params.delta_size_max
    n_max = params.n_max
    next_id = 0
    for i, size in enumerate(sizes):
        assigned = False
        for j in range(i - 1, max(-1, i - 1 - n_max), -1):
            if abs(sizes[j] - size) <= delta:
                labels[i] = labels[j]
                assigned = True
                break
        if not assigned:
            labels[i] = next_id
            next_id += 1
    return labels


def assemble_rtp(video_packets):
    """Group video packets into frames by RTP timestamp (order-independent).

    The marker-bit packet, when present, fixes the frame end time; otherwise
    the latest member arrival does.
    """
    for p in video_packets:
        if p.rtp is None:
            raise MissingRtp("all packets must carry RTP headers")
    groups = {}
    for i, p in enumerate(video_packets):
        groups.setdefault(p.rtp.timestamp, []).append(i)
    frames = []
    for ts, idxs in groups.items():
        end_us = None
        for i in idxs:
            p = video_packets[i]
            if p.rtp.marker:
                end_us = p.arrival_us
        if end_us is None:
            end_us = max(video_packets[i].arrival_us for i in idxs)
        size = sum(video_packets[i].payload_len - RTP_FIXED_HEADER_LEN
                   for i in idxs)
        start_us = min(video_packets[i].arrival_us for i in idxs)
        frames.append(Frame(0, tuple(idxs), size, start_us, end_us,
                            frozenset((ts,))))
    frames.sort(key=lambda f: (f.end_us, f.start_us))
    return [Frame(i, f.packet_indices, f.size_bytes, f.start_us, f.end_us,
                  f.rtp_timestamps) for i, f in enumerate(frames)]


def _build_frames(video_packets, labels):
    members = {}
    for i, lab in enumerate(labels):
        members.setdefault(lab, []).append(i)
    frames = []
    for idxs in members.values():
        arrivals = [video_packets[i].arrival_us for i in idxs]
        size = sum(video_packets[i].payload_len - RTP_FIXED_HEADER_LEN
                   for i in idxs)
        ts = frozenset(video_packets[i].rtp.timestamp for i in idxs
                       if video_packets[i].rtp is not None)
        frames.append(Frame(0, tuple(idxs), size, min(arrivals),
                            max(arrivals), ts))
    frames.sort(key=lambda f: (f.end_us, f.start_us))
    return [Frame(i, f.packet_indices, f.size_bytes, f.start_us, f.end_us,
                  f.rtp_timestamps) for i, f in enumerate(frames)]


@dataclass
class AssemblyDiagnostics:
    split_count: int
    coalesce_count: int
    interleave_count: int


def diagnose(estimated, truth_packets, params=IpUdpAssemblyParams()):
    """Count the heuristic's failure modes against RTP-derived truth.

    splits: true frames whose intra-frame size spread exceeds the size
    threshold; coalesces: estimated frames spanning more than one true RTP
    timestamp; interleaves: estimated frames whose members are not
    contiguous in arrival order.
    """
    for p in truth_packets:
        if p.rtp is None:
            raise MissingRtp("truth packets must carry RTP timestamps")

    by_ts = {}
    for p in truth_packets:
        by_ts.setdefault(p.rtp.timestamp, []).append(p.payload_len)
    split_count = sum(
        1 for sizes in by_ts.values()
        if max(sizes) - min(sizes) > params.delta_size_max)

    coalesce_count = 0
    interleave_count = 0
    for f in estimated:
        ts = {truth_packets[i].rtp.timestamp for i in f.packet_indices}
        if len(ts) > 1:
            coalesce_count += 1
        idxs = sorted(f.packet_indices)
        if idxs[-1] - idxs[0] != len(idxs) - 1:
            interleave_count += 1
    return AssemblyDiagnostics(split_count, coalesce_count, interleave_count)


def write_frames_csv(frames, path):
    rows = []
    for f in frames:
        ts_list = ";".join(str(t) for t in sorted(f.rtp_timestamps))
        rows.append([f.frame_id, len(f.packet_indices), f.size_bytes,
                     f.start_us, f.end_us, ts_list])
    _atomic_write_csv(path, FRAME_CSV_HEADER, rows)
