"""Hash-derived randomness for telemetry generation.

Every draw is keyed by the scenario seed plus a stable stream key, so a fault
perturbing one stream leaves every other stream byte-identical, and rendering
is reproducible across platforms and Python versions (no RNG state involved).
"""

from __future__ import annotations

import hashlib
import math

GAUSS_CLAMP = 2.5  # nominal noise is clamped at +/-2.5 sigma


def _digest(parts: tuple) -> bytes:
    key = "\x1f".join(str(p) for p in parts)
    return hashlib.sha256(key.encode("utf-8")).digest()


def unit(*parts) -> float:
    """Uniform float in [0, 1) derived from the key parts."""
    value = int.from_bytes(_digest(parts)[:8], "big")
    return value / 2.0**64


def gauss(mu: float, sigma: float, *parts, clamp: float = GAUSS_CLAMP) -> float:
    """Clamped Gaussian draw around ``mu``; Box-Muller over two hash uniforms."""
    u1 = max(unit(*parts, "u1"), 1e-12)
    u2 = unit(*parts, "u2")
    z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
    z = max(-clamp, min(clamp, z))
    return mu + sigma * z


def jitter(hi: float, *parts) -> float:
    """Uniform in [0, hi); used for span durations, which only jitter upward."""
    return unit(*parts) * hi


def pick(seq, *parts):
    if not seq:
        raise ValueError("cannot pick from an empty sequence")
    return seq[int(unit(*parts) * len(seq))]
