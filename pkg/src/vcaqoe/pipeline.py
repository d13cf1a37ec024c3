"""End-to-end helpers chaining classification, assembly, and estimation."""

from __future__ import annotations

from .assembly import IpUdpAssemblyParams, assemble_ipudp, assemble_rtp
from .classify import (PayloadTypeMap, SizeThreshold, classify_by_payload_type,
                       classify_by_size)
from .heuristics import estimate_series
from .ingest import session_interior_windows


def analyze_session(session, method="ipudp", params=None, threshold=None,
                    ptmap=None, w=1.0):
    """Per-window QoE estimates for one session.

    method "ipudp": size-threshold classification + size-difference
    assembly; method "rtp": payload-type classification + RTP-timestamp
    grouping. Returns {window_start: QoeWindow}.
    """
    if method == "ipudp":
        tagged = classify_by_size(session, threshold or SizeThreshold())
        frames = assemble_ipudp(tagged.video_packets(),
                                params or IpUdpAssemblyParams())
    elif method == "rtp":
        tagged = classify_by_payload_type(session, ptmap or PayloadTypeMap())
        frames = assemble_rtp(tagged.video_packets())
    else:
        raise ValueError(f"unknown method {method!r}")
    span = (session.packets[0].arrival_us, session.packets[-1].arrival_us)
    return estimate_series(frames, w, span_us=span)


def paired_metric(est_series, truth_rows, metric, session=None, w=1):
    """(pred, truth) lists for one metric over shared complete windows.

    truth_rows: QoeWindow list keyed by window_start. When a session is
    given, its partial first/last seconds are excluded.
    """
    w = int(w)
    truth_by_key = {r.window_start: r for r in truth_rows}
    keys = sorted(set(est_series) & set(truth_by_key))
    if session is not None:
        interior = session_interior_windows(session)
        lo = ((interior.start + w - 1) // w) * w
        hi = (interior.stop // w) * w
        keys = [k for k in keys if lo <= k and k + w <= hi]
    pred = [getattr(est_series[k], metric) for k in keys]
    truth = [getattr(truth_by_key[k], metric) for k in keys]
    return pred, truth
