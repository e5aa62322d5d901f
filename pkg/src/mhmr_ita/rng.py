"""Deterministic random streams built on the Philox counter-based generator.

Every source of randomness in the package draws from a Philox4x64-10 stream
keyed by explicit 64-bit words, so results are reproducible bit-for-bit and
independent streams never overlap:

* mission simulation uses ``stream(seed, mission_id)``; the Bernoulli draw
  for POI ``p`` is the ``p``-th double of that stream (draw_index = p),
* context sampling uses ``stream(seed, CONTEXT_STREAM)``,
* action sampling inside option ``n`` uses ``stream(seed, DECODE_STREAM + n)``,
* sub-seeds are derived with ``derive(...)`` (first 64-bit word of the keyed
  stream), never by arithmetic on raw seeds.

Doubles come from numpy's standard 53-bit conversion of the Philox output.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Fixed stream tags; values are arbitrary but frozen.
CONTEXT_STREAM = 0x636F6E74  # "cont"
DECODE_STREAM = 0x64656300  # "dec" + option index
INIT_STREAM = 0x696E6974  # "init"
SHUFFLE_STREAM = 0x73687566  # "shuf"


def stream(word0: int, word1: int = 0) -> np.random.Generator:
    """A Philox4x64-10 generator keyed by two 64-bit words."""
    key = np.array([word0 & _MASK64, word1 & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive(word0: int, word1: int = 0) -> int:
    """Derive a 64-bit sub-seed from a keyed stream (its first output word)."""
    bg = np.random.Philox(key=np.array([word0 & _MASK64, word1 & _MASK64], dtype=np.uint64))
    return int(bg.random_raw(1)[0])
