"""
HiRRR

Hybrid & integrative reduced-rank regression: joint low-rank modeling of a
primary outcome with surrogate outcomes, augmented by single-record data.
"""

from importlib.metadata import version

try:
    __version__ = version("hirrr")
except Exception:
    # Fallback version if package metadata is not available
    __version__ = "unknown"

__author__ = "HiRRR Developers"
