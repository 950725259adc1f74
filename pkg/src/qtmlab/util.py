"""Seeding, counting and file-writing helpers."""

import hashlib
import json
import math
import os
import tempfile

import numpy as np
from scipy.special import gammaln


def stable_seed(*parts) -> int:
    """Deterministic 64-bit seed derived from a tuple of strings and numbers.

    Floats go through repr so the mapping is reproducible across runs and
    platforms.
    """
    tokens = []
    for p in parts:
        if isinstance(p, (np.integer,)):
            p = int(p)
        if isinstance(p, (np.floating,)):
            p = float(p)
        if isinstance(p, bool) or not isinstance(p, (int, float, str)):
            raise TypeError(f"unhashable seed part: {p!r}")
        tokens.append(repr(p) if not isinstance(p, str) else p)
    digest = hashlib.sha256("\x1f".join(tokens).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_from(*parts) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(stable_seed(*parts)))


def compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length `parts` summing to `total`.

    Rows come out in lexicographic order, shape (C(total+parts-1, parts-1), parts).
    """
    if parts < 1:
        raise ValueError("parts must be >= 1")
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    if parts == 2:
        k = np.arange(total + 1, dtype=np.int64)
        return np.stack([k, total - k], axis=1)
    count = math.comb(total + parts - 1, parts - 1)
    out = np.zeros((count, parts), dtype=np.int64)
    row = 0
    comp = np.zeros(parts, dtype=np.int64)

    def fill(pos: int, remaining: int):
        nonlocal row
        if pos == parts - 1:
            comp[pos] = remaining
            out[row] = comp
            row += 1
            return
        for k in range(remaining + 1):
            comp[pos] = k
            fill(pos + 1, remaining - k)

    fill(0, total)
    return out


def multinomial_weights(counts: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Multinomial pmf over rows of a count matrix, via log-gamma for stability."""
    counts = np.asarray(counts, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    total = counts[0].sum()
    logw = gammaln(total + 1.0) - gammaln(counts + 1.0).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.where(counts > 0, counts * np.log(probs)[None, :], 0.0)
    logw += logp.sum(axis=1)
    return np.exp(logw)


def multinomial_rows(rng: np.random.Generator, n_per_row: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Multinomial draws with a different trial count per row.

    numpy's multinomial wants a scalar count, so split category by category
    with binomials conditioned on what remains.
    """
    n_rem = np.asarray(n_per_row, dtype=np.int64).copy()
    probs = np.asarray(probs, dtype=np.float64)
    s = probs.shape[0]
    out = np.zeros((n_rem.shape[0], s), dtype=np.int64)
    p_rem = 1.0
    for t in range(s - 1):
        frac = 0.0 if p_rem <= 0 else min(1.0, probs[t] / p_rem)
        draw = rng.binomial(n_rem, frac)
        out[:, t] = draw
        n_rem -= draw
        p_rem -= probs[t]
    out[:, s - 1] = n_rem
    return out


def dump_json(obj) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write_text(path: str, text: str):
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def canonical_hash(obj) -> str:
    """Hex digest of an object's canonical JSON form."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()


def fmt_cell(x) -> str:
    """CSV cell formatting: round-trippable floats, lowercase booleans."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)
