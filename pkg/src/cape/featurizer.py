"""Text featurizers producing fixed-width embedding vectors.

The hashed bag-of-words featurizer stands in for a large pre-trained
encoder: each token maps deterministically to a pseudo-random unit vector
and a text embeds as the mean of its token vectors, so embeddings are
order-invariant with L2 norm at most 1.  Alternatively, embeddings
produced by an external encoder can be ingested from a CSV file, one row
of floats per example.

Featurizers are stateless after construction (the token cache is a pure
memo) and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hashing import stable_seed

FEATURIZER_KINDS = ("hashed_bow", "precomputed")


@dataclass(frozen=True)
class FeaturizerConfig:
    kind: str = "hashed_bow"
    dimension: int = 64
    hash_seed: int = 0
    source_path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in FEATURIZER_KINDS:
            raise ValueError(f"kind must be one of {FEATURIZER_KINDS}, got {self.kind!r}")
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.kind == "precomputed" and not self.source_path:
            raise ValueError("precomputed featurizer needs a source_path")


class HashedBowFeaturizer:
    """Mean of per-token pseudo-random unit vectors.

    Token vectors are seeded through blake2b on (hash_seed, token), never
    the process-salted builtin hash, so the same text embeds identically
    across runs and platforms.
    """

    def __init__(self, config: FeaturizerConfig):
        if config.kind != "hashed_bow":
            raise ValueError(f"expected a hashed_bow config, got kind={config.kind!r}")
        self.config = config
        self._token_cache: dict[str, np.ndarray] = {}

    def token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            rng = np.random.default_rng(stable_seed(self.config.hash_seed, "token", token))
            vec = rng.standard_normal(self.config.dimension)
            vec /= np.linalg.norm(vec)
            vec.flags.writeable = False
            self._token_cache[token] = vec
        return vec

    def embed(self, text: str) -> np.ndarray:
        tokens = text.lower().split()
        if not tokens:
            return np.zeros(self.config.dimension)
        out = np.zeros(self.config.dimension)
        for tok in tokens:
            out += self.token_vector(tok)
        out /= len(tokens)
        return out

    def embed_texts(self, texts) -> np.ndarray:
        return np.stack([self.embed(t) for t in texts]) if texts else np.zeros((0, self.config.dimension))


def embed_hashed_bow(text: str, config: FeaturizerConfig) -> np.ndarray:
    """One-shot hashed bag-of-words embedding of ``text``."""
    return HashedBowFeaturizer(config).embed(text)


def load_precomputed(path, config: FeaturizerConfig, expected_rows: int | None = None) -> np.ndarray:
    """Load externally produced embeddings from CSV (no header, floats only).

    Row i holds the embedding of dataset example i.  Width must equal the
    configured dimension; ``expected_rows``, when given, must match the file.
    """
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            cells = line.strip().split(",")
            if len(cells) != config.dimension:
                raise ValueError(
                    f"{path}: row {i}: expected {config.dimension} columns, found {len(cells)}"
                )
            parsed = []
            for j, cell in enumerate(cells, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(f"{path}: row {i}, column {j}: not a number: {cell.strip()!r}") from None
            rows.append(parsed)
    if expected_rows is not None and len(rows) != expected_rows:
        raise ValueError(f"{path}: expected {expected_rows} rows, found {len(rows)}")
    matrix = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{path}: embeddings contain non-finite values")
    return matrix


def save_precomputed(matrix: np.ndarray, path) -> None:
    """Write embeddings as CSV with shortest round-tripping float text."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def featurize_texts(texts, config: FeaturizerConfig, expected_rows: int | None = None) -> np.ndarray:
    """Feature matrix (one row per text) for either featurizer kind."""
    if config.kind == "hashed_bow":
        return HashedBowFeaturizer(config).embed_texts(list(texts))
    return load_precomputed(config.source_path, config, expected_rows=expected_rows)
