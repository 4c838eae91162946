"""Joint audio/video fingerprint selection under a byte budget."""

from .allocator import (
    AllocationResult,
    CurvePair,
    RateModel,
    arbitrary_allocate,
    audio_first_allocate,
    brute_force_allocate,
    dp_allocate,
    greedy_allocate,
    lagrangian_allocate,
    rate_coverage_series,
)
from .coverage import CoverageCurve, PointSet, brute_force_cover, build_neighborhoods, coverage_curve, rkcp3
from .fingerprint import (
    AudioParams,
    AudioSegment,
    FingerprintParams,
    VideoFingerprint,
    hamming,
    segment_distance,
    video_fingerprint,
)

__version__ = "0.1.0"
