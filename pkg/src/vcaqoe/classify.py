"""Media classification: tag packets audio/video/retransmission/other.

Two paths: a payload-size threshold usable on fully encrypted traffic, and
an RTP payload-type mapping used as the ground-truth path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict

from .session import MediaClass, Session

DEFAULT_VMIN = 500
KEEPALIVE_LEN = 304

# Lab Teams-like payload-type profile.
TEAMS_LAB_PROFILE: Dict[int, MediaClass] = {
    111: MediaClass.AUDIO,
    102: MediaClass.VIDEO,
    103: MediaClass.VIDEO_RETX,
}


class ClassifyError(Exception):
    pass


class OverlappingRanges(ClassifyError):
    pass


class MissingClass(ClassifyError):
    pass


class LengthMismatch(ClassifyError):
    pass


@dataclass(frozen=True)
class SizeThreshold:
    v_min: int = DEFAULT_VMIN

    def __post_init__(self):
        if self.v_min <= 0:
            raise ValueError("v_min must be positive")


@dataclass
class PayloadTypeMap:
    mapping: Dict[int, MediaClass] = field(
        default_factory=lambda: dict(TEAMS_LAB_PROFILE))
    keepalive_len: int = KEEPALIVE_LEN

    def lookup(self, payload_type):
        return self.mapping.get(payload_type, MediaClass.OTHER)

    def payload_type_for(self, cls):
        for pt, c in self.mapping.items():
            if c is cls:
                return pt
        return None


def load_payload_type_map(path, vca=None):
    """Load `vca,pt,class` lines into a PayloadTypeMap, optionally filtered
    to one VCA profile."""
    mapping = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, pt, cls = (c.strip() for c in line.split(","))
            if vca is not None and name != vca:
                continue
            mapping[int(pt)] = MediaClass(cls)
    return PayloadTypeMap(mapping)


def classify_by_size(session, threshold=SizeThreshold()):
    """Tag packets >= v_min bytes as video; everything else as other."""
    packets = [
        replace(p, media_class=(MediaClass.VIDEO
                                if p.payload_len >= threshold.v_min
                                else MediaClass.OTHER))
        for p in session.packets
    ]
    return Session(session.session_id, session.vca_label, packets)


def classify_by_payload_type(session, ptmap=None):
    """Tag packets via their RTP payload type (ground-truth path).

    Packets without RTP map to other; retransmission packets of exactly the
    keep-alive length carry no media and also map to other.
    """
    ptmap = ptmap or PayloadTypeMap()
    packets = []
    for p in session.packets:
        if p.rtp is None:
            cls = MediaClass.OTHER
        else:
            cls = ptmap.lookup(p.rtp.payload_type)
            if cls is MediaClass.VIDEO_RETX and p.payload_len == ptmap.keepalive_len:
                cls = MediaClass.OTHER
        packets.append(replace(p, media_class=cls))
    return Session(session.session_id, session.vca_label, packets)


def fit_vmin(labeled):
    """Fit the size threshold as the midpoint between the largest audio and
    smallest video packet of a payload-type-labeled session."""
    audio_max = None
    video_min = None
    for p in labeled.packets:
        if p.media_class is MediaClass.AUDIO:
            audio_max = p.payload_len if audio_max is None else max(audio_max, p.payload_len)
        elif p.media_class is MediaClass.VIDEO:
            video_min = p.payload_len if video_min is None else min(video_min, p.payload_len)
    if audio_max is None or video_min is None:
        raise MissingClass("need both audio and video packets")
    if audio_max >= video_min:
        raise OverlappingRanges(
            f"audio max {audio_max} >= video min {video_min}")
    return SizeThreshold((audio_max + video_min) // 2)


@dataclass
class MediaConfusion:
    """2x2 video vs non-video confusion: rows actual, columns predicted."""
    counts: list          # [[nv->nv, nv->v], [v->nv, v->v]]
    row_percent: list     # row-normalized percentages
    row_totals: list
    labels = ("non_video", "video")

    def video_recall(self):
        return 0.0 if self.row_totals[1] == 0 else self.row_percent[1][1] / 100.0

    def non_video_rejection(self):
        return 0.0 if self.row_totals[0] == 0 else self.row_percent[0][0] / 100.0


def classification_report(predicted, truth):
    """Confusion matrix of size-based predictions against payload-type
    truth, collapsed to video vs non-video."""
    if len(predicted.packets) != len(truth.packets):
        raise LengthMismatch(
            f"{len(predicted.packets)} != {len(truth.packets)} packets")
    counts = [[0, 0], [0, 0]]
    for p, t in zip(predicted.packets, truth.packets):
        actual = 1 if t.media_class is MediaClass.VIDEO else 0
        pred = 1 if p.media_class is MediaClass.VIDEO else 0
        counts[actual][pred] += 1
    totals = [sum(row) for row in counts]
    percent = [[(100.0 * c / tot if tot else 0.0) for c in row]
               for row, tot in zip(counts, totals)]
    return MediaConfusion(counts, percent, totals)
