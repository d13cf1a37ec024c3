"""Concrete sensitivity-sweep runners over synthetic corpora.

Each runner regenerates a deterministic corpus per axis value (or reuses
one corpus where the axis is a pure analysis parameter) and reports the
frame-rate MAE of the packet-size heuristic.
"""

from __future__ import annotations

from .assembly import IpUdpAssemblyParams
from .evaluation import mae, sweep
from .pipeline import analyze_session, paired_metric
from .synth import ImpairmentProfile, SenderProfile, generate, impair, \
    truth_from_frame_log


def _corpus(profile, n_sessions, duration_s, seed, impairment=None):
    out = []
    for i in range(n_sessions):
        session, truth, frame_log = generate(profile, duration_s, seed + i)
        if impairment is not None:
            session = impair(session, impairment, seed + i,
                             profile.ptmap())
        out.append((session, truth, frame_log))
    return out


def _fps_mae(corpus, assembly_params=None, w=1):
    pred, truth = [], []
    for session, truth_series, frame_log in corpus:
        if w != 1:
            truth_series = truth_from_frame_log(frame_log,
                                                session.session_id, w=w)
        est = analyze_session(session, "ipudp", assembly_params, w=float(w))
        p, t = paired_metric(est, truth_series.rows, "fps", session, w=w)
        pred += p
        truth += t
    return mae(pred, truth)


def loss_sweep(loss_values_pct, profile=None, n_sessions=5, duration_s=30.0,
               seeds=(0, 1, 2, 3, 4)):
    """Frame-rate MAE of the size heuristic vs Bernoulli loss rate,
    averaged over seeds."""
    profile = profile or SenderProfile()

    def run(loss_pct):
        maes = []
        for s in seeds:
            imp = ImpairmentProfile(delay_jitter_ms=5.0,
                                    loss_prob=loss_pct / 100.0)
            corpus = _corpus(profile, n_sessions, duration_s,
                             1000 * (s + 1), imp)
            maes.append(_fps_mae(corpus))
        return sum(maes) / len(maes)

    return sweep(run, list(loss_values_pct))


def jitter_sweep(jitter_values_ms, profile=None, n_sessions=5,
                 duration_s=30.0, seeds=(0, 1, 2, 3, 4)):
    profile = profile or SenderProfile()

    def run(jitter_ms):
        maes = []
        for s in seeds:
            imp = ImpairmentProfile(delay_jitter_ms=jitter_ms)
            corpus = _corpus(profile, n_sessions, duration_s,
                             1000 * (s + 1), imp)
            maes.append(_fps_mae(corpus))
        return sum(maes) / len(maes)

    return sweep(run, list(jitter_values_ms))


def window_sweep(window_sizes_s, profile=None, n_sessions=5,
                 duration_s=60.0, seed=0,
                 impairment=ImpairmentProfile(delay_jitter_ms=30.0,
                                              loss_prob=0.02)):
    """Frame-rate MAE vs prediction window size on one impaired corpus."""
    profile = profile or SenderProfile()
    corpus = _corpus(profile, n_sessions, duration_s, seed, impairment)
    return sweep(lambda w: _fps_mae(corpus, w=int(w)), list(window_sizes_s))


def lookback_sweep(lookbacks, profile=None, n_sessions=5, duration_s=30.0,
                   seed=0, impairment=None):
    """Frame-rate MAE vs packet-lookback depth on one corpus.

    The default profile mimics a low-rate sender with one packet per frame
    and adjacent-only size separation, where deep lookback wrongly merges
    alternating same-size frames.
    """
    profile = profile or SenderProfile(
        bitrate_kbps=250.0, frame_size_jitter=0.0, keyframe_interval=0,
        separable_depth=1)
    corpus = _corpus(profile, n_sessions, duration_s, seed, impairment)

    def run(n_max):
        params = IpUdpAssemblyParams(n_max=int(n_max))
        return _fps_mae(corpus, params)

    return sweep(run, list(lookbacks))
