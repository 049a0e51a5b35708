"""Reading undirected simple graphs from disk.

Two formats are accepted:

* dense CSV: ``n`` rows of ``n`` comma-separated 0/1 entries, symmetric with
  a zero diagonal;
* edge list: a header line ``n=<int>`` followed by whitespace-separated
  ``i j`` pairs of 0-based vertex ids (``#`` starts a comment).
"""

from pathlib import Path

import numpy as np

from .errors import AlignmentError, InvalidInput


def _validate(a, source):
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"{source}: adjacency matrix must be square, got shape {a.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise InvalidInput(f"{source}: entries must be 0 or 1")
    if not np.array_equal(a, a.T):
        raise InvalidInput(f"{source}: adjacency matrix is not symmetric")
    if np.any(np.diag(a) != 0):
        raise InvalidInput(f"{source}: self-loops are not allowed")
    return a


def read_dense_csv(path):
    try:
        a = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except ValueError as exc:
        raise InvalidInput(f"{path}: could not parse dense CSV ({exc})") from None
    return _validate(a, path)


def read_edge_list(path):
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].replace(" ", "").startswith("n="):
        raise InvalidInput(f"{path}: edge list must start with a header line 'n=<int>'")
    try:
        n = int(lines[0].replace(" ", "")[2:])
    except ValueError:
        raise InvalidInput(f"{path}: malformed header {lines[0]!r}") from None
    if n < 1:
        raise InvalidInput(f"{path}: n must be positive")
    a = np.zeros((n, n))
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise InvalidInput(f"{path}: line {lineno}: expected 'i j', got {ln!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise InvalidInput(f"{path}: line {lineno}: non-integer vertex id") from None
        if not (0 <= i < n and 0 <= j < n):
            raise InvalidInput(f"{path}: line {lineno}: vertex id out of range [0, {n})")
        if i == j:
            raise InvalidInput(f"{path}: line {lineno}: self-loops are not allowed")
        a[i, j] = a[j, i] = 1.0
    return a


def read_graph(path):
    """Read a graph, detecting the format from the first non-blank line."""
    path = Path(path)
    if not path.is_file():
        raise InvalidInput(f"{path}: no such file")
    for ln in path.read_text().splitlines():
        if ln.strip() and not ln.strip().startswith("#"):
            if ln.replace(" ", "").startswith("n="):
                return read_edge_list(path)
            break
    return read_dense_csv(path)


def read_graph_pair(path1, path2):
    a1, a2 = read_graph(path1), read_graph(path2)
    if a1.shape != a2.shape:
        raise AlignmentError(f"graphs have {a1.shape[0]} and {a2.shape[0]} vertices")
    return np.stack([a1, a2])


def write_dense_csv(path, a):
    np.savetxt(path, np.asarray(a, dtype=int), fmt="%d", delimiter=",")


def write_edge_list(path, a):
    a = np.asarray(a)
    i, j = np.nonzero(np.triu(a, 1))
    with open(path, "w") as fh:
        fh.write(f"n={a.shape[0]}\n")
        for u, v in zip(i, j):
            fh.write(f"{u} {v}\n")
