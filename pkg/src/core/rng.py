"""Flujos aleatorios reproducibles derivados de una única semilla raíz.

Cada flujo se identifica por (etiqueta, índice); la etiqueta se reduce a un
entero con blake2b y entra en el spawn_key de numpy.SeedSequence, así que
los flujos no dependen del orden en que se piden.
"""

import hashlib

import numpy as np


def _tag_key(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest(), "big")


class SeedStreams:
    """Fábrica de generadores hijos a partir de una semilla raíz"""

    def __init__(self, root_seed: int):
        if root_seed < 0:
            raise ValueError("root seed must be non-negative")
        self.root_seed = int(root_seed)

    def sequence(self, tag: str, index: int = 0) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.root_seed, spawn_key=(_tag_key(tag), int(index)))

    def stream(self, tag: str, index: int = 0) -> np.random.Generator:
        return np.random.default_rng(self.sequence(tag, index))

    def seed_for(self, tag: str, index: int = 0) -> int:
        """Semilla entera de 64 bits para consumidores que piden un int"""
        return int(self.sequence(tag, index).generate_state(1, dtype=np.uint64)[0])
