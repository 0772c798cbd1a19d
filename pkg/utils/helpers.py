from typing import List, Optional

import numpy as np

from utils.logger import get_logger

logger = get_logger(__name__)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    PCG64 generator for the stream identified by (seed, *stream).

    SeedSequence mixes the whole tuple, so e.g. (seed, trial, STREAM_SUBSET)
    and (seed, trial, STREAM_ROUNDS) are independent and reproducible no
    matter in which order or process they are created.
    """
    if seed < 0 or any(s < 0 for s in stream):
        raise ValueError(f"Seed components must be non-negative, got {(seed, *stream)}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))


def parse_value_list(text: str) -> List[float]:
    """
    Parse a comma separated CLI list ("0.1,0.2,0.3") into floats.

    Integers stay exact because float() of a small int literal is exact.
    """
    values = []
    for chunk in text.split(','):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            values.append(float(chunk))
        except ValueError as e:
            raise ValueError(f"Not a number in value list: {chunk!r}") from e
    if not values:
        raise ValueError("Empty value list")
    return values


def format_time(seconds: Optional[float]) -> str:
    """Seconds to MM:SS (or H:MM:SS past an hour)."""
    if seconds is None or seconds < 0:
        return "00:00"

    total_seconds = int(round(seconds))
    hours, rest = divmod(total_seconds, 3600)
    minutes, secs = divmod(rest, 60)

    if hours:
        return f"{hours}:{minutes:02d}:{secs:02d}"
    return f"{minutes:02d}:{secs:02d}"
