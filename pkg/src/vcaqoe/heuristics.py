"""Per-window QoE estimates from an assembled frame sequence.

Frame rate counts frames ending inside the window, bitrate averages their
bits, and frame jitter is the population stddev of consecutive frame
end-time gaps. Gaps straddling a window boundary belong to the later
frame's window. Jitter is computed in the integer-microsecond domain so
constant gaps yield exactly zero.
"""

from __future__ import annotations

import numpy as np

from .session import MICROS_PER_S, QoeWindow

MIN_FRAMES_FOR_JITTER = 3


def _window_key(end_us, w_us):
    """Window start in seconds; an int for whole-second windows, a float
    otherwise (sub-second window variants)."""
    start_us = (end_us // w_us) * w_us
    if start_us % MICROS_PER_S == 0 and w_us % MICROS_PER_S == 0:
        return start_us // MICROS_PER_S
    return start_us / MICROS_PER_S


def frame_rate(frames, window, w=1.0):
    """Frames ending in the given window per second."""
    w_us = int(round(w * MICROS_PER_S))
    return sum(1 for f in frames if _window_key(f.end_us, w_us) == window) / w


def bitrate(frames, window, w=1.0):
    """kbps of frame bytes ending in the given window."""
    w_us = int(round(w * MICROS_PER_S))
    total = sum(f.size_bytes for f in frames
                if _window_key(f.end_us, w_us) == window)
    return total * 8.0 / w / 1000.0


def frame_jitter(frames, window, w=1.0):
    """Frame jitter in ms for one window, or None when fewer than 3 frames
    end in it."""
    series = estimate_series(frames, w)
    row = series.get(window)
    return None if row is None else row.frame_jitter_ms


def estimate_series(frames, w=1.0, span_us=None):
    """All per-window QoE estimates for a frame sequence.

    Returns {window_start: QoeWindow} covering every window between the
    first and last frame end, or over span_us=(first, last) when given so
    frame-free windows report zero. Resolution is never estimated by this
    method.
    """
    if not frames and span_us is None:
        return {}
    w_us = int(round(w * MICROS_PER_S))
    ordered = sorted(frames, key=lambda f: f.end_us)
    if span_us is not None:
        first_key = _window_key(span_us[0], w_us)
        last_key = _window_key(span_us[1], w_us)
    else:
        first_key = _window_key(ordered[0].end_us, w_us)
        last_key = _window_key(ordered[-1].end_us, w_us)
    step = w_us // MICROS_PER_S if w_us % MICROS_PER_S == 0 else None

    counts = {}
    bytes_in = {}
    gaps = {}
    prev_end = None
    for f in ordered:
        k = _window_key(f.end_us, w_us)
        counts[k] = counts.get(k, 0) + 1
        bytes_in[k] = bytes_in.get(k, 0) + f.size_bytes
        if prev_end is not None:
            gaps.setdefault(k, []).append(f.end_us - prev_end)
        prev_end = f.end_us

    if step:
        keys = range(first_key, last_key + step, step)
    else:
        keys = sorted(counts)
    out = {}
    for k in keys:
        n = counts.get(k, 0)
        jit = None
        if n >= MIN_FRAMES_FOR_JITTER and len(gaps.get(k, [])) >= 2:
            jit = float(np.std(np.asarray(gaps[k], dtype=np.int64))) / 1000.0
        out[k] = QoeWindow(window_start=k, duration_s=w,
                           fps=n / w,
                           bitrate_kbps=bytes_in.get(k, 0) * 8.0 / w / 1000.0,
                           frame_jitter_ms=jit)
    return out
