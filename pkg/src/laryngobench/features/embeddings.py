"""Precomputed frame-level embeddings: interchange format and mean pooling.

File layout::

    id,dim=512
    rec001,0.12,-0.5,...      # one line per frame, D values
    rec001,...
    rec002,...

Frames of one id are contiguous.  The same format carries externally computed
88-dim acoustic vectors (one frame per id).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


class EmbeddingFormatError(ValueError):
    pass


def _parse_header(line: str, path) -> int:
    parts = line.strip().split(",")
    if len(parts) != 2 or parts[0] != "id" or not parts[1].startswith("dim="):
        raise EmbeddingFormatError(f"{path}: header must be 'id,dim=<D>', got {line.strip()!r}")
    try:
        dim = int(parts[1][4:])
    except ValueError:
        raise EmbeddingFormatError(f"{path}: bad dimension in header {line.strip()!r}") from None
    if dim < 1:
        raise EmbeddingFormatError(f"{path}: dimension must be positive")
    return dim


def _parse_row(line: str, dim: int, lineno: int, path) -> tuple[str, np.ndarray]:
    rid, _, rest = line.rstrip("\r\n").partition(",")
    values = np.array(rest.split(","), dtype=float) if rest else np.empty(0)
    if values.size != dim:
        raise EmbeddingFormatError(
            f"{path}: id {rid!r} row {lineno} has {values.size} values, expected {dim}")
    return rid, values


def load_embeddings(path, expected_dim: int | None = None) -> dict[str, np.ndarray]:
    """Load ``{id: (T, D) array}``; ids keep their file order."""
    path = Path(path)
    out: dict[str, list[np.ndarray]] = {}
    dim = None
    last_id = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if dim is None:
                dim = _parse_header(line, path)
                if expected_dim is not None and dim != expected_dim:
                    raise EmbeddingFormatError(
                        f"{path}: declared dimension {dim}, expected {expected_dim}")
                continue
            rid, values = _parse_row(line, dim, lineno, path)
            if rid != last_id and rid in out:
                raise EmbeddingFormatError(f"{path}: frames for id {rid!r} are not contiguous (row {lineno})")
            out.setdefault(rid, []).append(values)
            last_id = rid
    return {k: np.vstack(v) for k, v in out.items()}


class EmbeddingIndex:
    """Byte-offset index so one id's frames can be read without parsing the whole file."""

    def __init__(self, path):
        self.path = Path(path)
        self.offsets: dict[str, tuple[int, int]] = {}
        with self.path.open("rb") as fh:
            header = fh.readline()
            if not header.strip():
                self.dim = None
                return
            self.dim = _parse_header(header.decode("utf-8"), self.path)
            pos = fh.tell()
            current, start = None, pos
            for raw in iter(fh.readline, b""):
                rid = raw.split(b",", 1)[0].decode("utf-8")
                if rid != current:
                    if current is not None:
                        self.offsets[current] = (start, pos)
                    current, start = rid, pos
                pos += len(raw)
            if current is not None:
                self.offsets[current] = (start, pos)

    def __contains__(self, rid: str) -> bool:
        return rid in self.offsets

    def load(self, rid: str) -> np.ndarray:
        start, end = self.offsets[rid]
        with self.path.open("rb") as fh:
            fh.seek(start)
            block = fh.read(end - start).decode("utf-8")
        rows = [_parse_row(line, self.dim, i, self.path)[1]
                for i, line in enumerate(block.splitlines()) if line.strip()]
        return np.vstack(rows)


def write_embeddings(path, embeddings: dict[str, np.ndarray], fmt: str = "%.6g") -> None:
    items = list(embeddings.items())
    dims = {np.atleast_2d(m).shape[1] for _, m in items}
    if len(dims) > 1:
        raise EmbeddingFormatError(f"mixed dimensions {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with Path(path).open("w", encoding="utf-8") as fh:
        if not items:
            return
        fh.write(f"id,dim={dim}\n")
        for rid, m in items:
            for row in np.atleast_2d(m):
                fh.write(rid + "," + ",".join(fmt % v for v in row) + "\n")


def mean_pool(frames: np.ndarray) -> np.ndarray:
    frames = np.atleast_2d(np.asarray(frames, dtype=float))
    if frames.shape[0] < 1:
        raise ValueError("cannot pool zero frames")
    # summing in sorted order makes the result independent of frame order
    return np.sort(frames, axis=0).sum(axis=0) / frames.shape[0]
