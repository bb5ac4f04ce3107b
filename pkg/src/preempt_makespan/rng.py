"""Counter-based random streams.

Every random number is a pure function of ``(seed, episode, draw)``, hashed
with the SplitMix64 finalizer::

    key_seed    = mix(seed ^ SEED_SALT)
    key_episode = mix(key_seed + (episode + 1) * GAMMA)
    bits        = mix(key_episode + (draw + 1) * GAMMA)

with all arithmetic modulo 2**64.  Uniforms are ``((bits >> 11) + 0.5) / 2**53``
and so lie strictly inside (0, 1).  Because no generator state is carried
between episodes, episode ``i`` draws the same numbers whether the run is
sequential, chunked, vectorized over many episodes, or replayed alone.
"""

from __future__ import annotations

import numpy as np

RNG_ID = "splitmix64-counter/v1 (seed, episode, draw)"

_MASK = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SEED_SALT = np.uint64(0x5851F42D4C957F2D)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 2.0 ** -53


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _seed_word(seed: int) -> np.ndarray:
    return np.array([int(seed) & _MASK], dtype=np.uint64)


def counter_bits(seed: int, episodes: np.ndarray, draw: int) -> np.ndarray:
    """64-bit hash outputs for one draw index across many episodes."""
    ep = np.asarray(episodes, dtype=np.uint64).reshape(-1)
    key = _mix(_seed_word(seed) ^ _SEED_SALT)
    key_ep = _mix(key + (ep + np.uint64(1)) * _GAMMA)
    d = np.array([(int(draw) + 1) & _MASK], dtype=np.uint64)
    return _mix(key_ep + d * _GAMMA)


def counter_uniform(seed: int, episodes: np.ndarray, draw: int) -> np.ndarray:
    bits = counter_bits(seed, episodes, draw)
    return ((bits >> _S11).astype(np.float64) + 0.5) * _INV53


def counter_exponential(seed: int, episodes: np.ndarray, draw: int) -> np.ndarray:
    """Unit-mean exponential variates, strictly positive."""
    return -np.log(counter_uniform(seed, episodes, draw))


class EpisodeStream:
    """Sequential view of one episode's counter stream."""

    def __init__(self, seed: int, episode: int, start: int = 0) -> None:
        self.seed = int(seed)
        self.episode = int(episode)
        self.counter = int(start)
        self._ep = np.array([self.episode], dtype=np.uint64)

    def uniform(self) -> float:
        u = counter_uniform(self.seed, self._ep, self.counter)
        self.counter += 1
        return float(u[0])

    def standard_exponential(self) -> float:
        e = counter_exponential(self.seed, self._ep, self.counter)
        self.counter += 1
        return float(e[0])

    def __repr__(self) -> str:
        return f"EpisodeStream(seed={self.seed}, episode={self.episode}, counter={self.counter})"
