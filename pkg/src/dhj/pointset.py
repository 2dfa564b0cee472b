"""Dense point sets of [k]^n with exact rational densities."""
from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from dhj.cube import Subspace, Word, check_ambient, digits, format_symbols, parse_symbols

WORDSET_MAGIC = "# wordset v1"


class WordsetError(ValueError):
    pass


class PointSet:
    """An immutable subset of ``[k]^n`` backed by a boolean bitmap in index order."""

    __slots__ = ("k", "n", "_bits", "_count")

    def __init__(self, k: int, n: int, bits: np.ndarray):
        size = check_ambient(k, n)
        bits = np.array(bits, dtype=bool, copy=True).reshape(-1)
        if bits.shape[0] != size:
            raise ValueError(f"bitmap has {bits.shape[0]} flags, [{k}]^{n} has {size}")
        bits.setflags(write=False)
        self.k, self.n = k, n
        self._bits = bits
        self._count = int(bits.sum())

    # -- constructors
    @classmethod
    def empty(cls, k: int, n: int) -> "PointSet":
        return cls(k, n, np.zeros(check_ambient(k, n), dtype=bool))

    @classmethod
    def full(cls, k: int, n: int) -> "PointSet":
        return cls(k, n, np.ones(check_ambient(k, n), dtype=bool))

    @classmethod
    def from_indices(cls, k: int, n: int, indices: Iterable[int]) -> "PointSet":
        bits = np.zeros(check_ambient(k, n), dtype=bool)
        idx = np.fromiter((int(i) for i in indices), dtype=np.int64) \
            if not isinstance(indices, np.ndarray) else indices.astype(np.int64)
        bits[idx] = True
        return cls(k, n, bits)

    @classmethod
    def from_words(cls, k: int, n: int, words: Iterable[Word | str]) -> "PointSet":
        idx = []
        for w in words:
            if isinstance(w, str):
                w = Word.parse(w, k)
            if w.k != k or w.n != n:
                raise ValueError(f"word {w} is not in [{k}]^{n}")
            idx.append(w.index)
        return cls.from_indices(k, n, idx)

    @classmethod
    def from_predicate(cls, k: int, n: int, pred: Callable[[np.ndarray], np.ndarray]) -> "PointSet":
        """Build from a vectorised predicate over the ``(k**n, n)`` letter array."""
        return cls(k, n, np.asarray(pred(digits(k, n)), dtype=bool))

    # -- basic protocol
    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def size(self) -> int:
        return self._bits.shape[0]

    def __len__(self) -> int:
        return self._count

    def __contains__(self, item) -> bool:
        if isinstance(item, Word):
            if item.k != self.k or item.n != self.n:
                return False
            item = item.index
        return bool(self._bits[int(item)])

    def __iter__(self) -> Iterator[Word]:
        for i in self.indices():
            yield Word.from_index(int(i), self.k, self.n)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return (self.k, self.n) == (other.k, other.n) and np.array_equal(self._bits, other._bits)

    def __hash__(self) -> int:
        return hash((self.k, self.n, self._bits.tobytes()))

    def __repr__(self) -> str:
        words = ",".join(self.texts()[:8])
        more = "..." if self._count > 8 else ""
        return f"PointSet(k={self.k}, n={self.n}, |A|={self._count}, {{{words}{more}}})"

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self._bits)

    def texts(self) -> list[str]:
        return [str(w) for w in self]

    # -- algebra
    def _check(self, other: "PointSet") -> None:
        if (self.k, self.n) != (other.k, other.n):
            raise ValueError(f"ambient mismatch: [{self.k}]^{self.n} vs [{other.k}]^{other.n}")

    def __or__(self, other: "PointSet") -> "PointSet":
        self._check(other)
        return PointSet(self.k, self.n, self._bits | other._bits)

    def __and__(self, other: "PointSet") -> "PointSet":
        self._check(other)
        return PointSet(self.k, self.n, self._bits & other._bits)

    def __sub__(self, other: "PointSet") -> "PointSet":
        self._check(other)
        return PointSet(self.k, self.n, self._bits & ~other._bits)

    def __invert__(self) -> "PointSet":
        return PointSet(self.k, self.n, ~self._bits)

    union, intersection, difference = __or__, __and__, __sub__

    def complement(self) -> "PointSet":
        return ~self

    def issubset(self, other: "PointSet") -> bool:
        self._check(other)
        return not np.any(self._bits & ~other._bits)

    def contains_all(self, indices: np.ndarray) -> bool:
        return bool(np.all(self._bits[indices]))

    # -- densities
    def density(self) -> Fraction:
        return Fraction(self._count, self.size)

    def density_in(self, V: Subspace) -> Fraction:
        if (V.k, V.n) != (self.k, self.n):
            raise ValueError(f"ambient mismatch: subspace of [{V.k}]^{V.n}, set in [{self.k}]^{self.n}")
        idx = V.indices()
        return Fraction(int(self._bits[idx].sum()), len(idx))

    def slice(self, prefix: Word | tuple[int, ...]) -> "PointSet":
        """``A_x = {y : x ^ y in A}`` for a prefix ``x`` of length ``l < n``."""
        letters = prefix.letters if isinstance(prefix, Word) else tuple(prefix)
        l = len(letters)
        if not 1 <= l < self.n:
            raise ValueError(f"prefix length {l} must satisfy 1 <= l < n={self.n}")
        if isinstance(prefix, Word) and prefix.k != self.k:
            raise ValueError(f"alphabet mismatch: {prefix.k} vs {self.k}")
        start = Word(self.k, letters).index * self.k ** (self.n - l)
        return PointSet(self.k, self.n - l, self._bits[start:start + self.k ** (self.n - l)])

    def slice_counts(self, l: int) -> np.ndarray:
        """Cardinalities of ``A_x`` for all prefixes ``x`` of length ``l``, in index order."""
        if not 0 <= l <= self.n:
            raise ValueError(f"prefix length {l} out of range")
        return self._bits.reshape(self.k ** l, -1).sum(axis=1)

    def pullback(self, V: Subspace) -> "PointSet":
        """``{a in [k]^m : V(a) in A}``: the trace of A on V read in the model cube."""
        if (V.k, V.n) != (self.k, self.n):
            raise ValueError("ambient mismatch")
        return PointSet(self.k, V.dim, self._bits[V.indices()])

    def pushforward(self, V: Subspace) -> "PointSet":
        """Image of this subset of ``[k]^m`` under ``V`` in the ambient cube of ``V``."""
        if self.k != V.k or self.n != V.dim:
            raise ValueError("model cube mismatch")
        return PointSet.from_indices(V.k, V.n, V.indices()[self._bits])


def at_least(counts: np.ndarray, size: int, bound: Fraction) -> np.ndarray:
    """Exact elementwise ``counts / size >= bound`` that never overflows int64."""
    bound = Fraction(bound)
    need = -(-bound.numerator * size // bound.denominator)  # ceil(bound * size)
    counts = np.asarray(counts)
    if need <= 0:
        return np.ones(counts.shape, dtype=bool)
    if need > size:
        return np.zeros(counts.shape, dtype=bool)
    return counts >= need


def density(A: PointSet) -> Fraction:
    return A.density()


def density_in(A: PointSet, V: Subspace) -> Fraction:
    return A.density_in(V)


def slice_set(A: PointSet, x: Word) -> PointSet:
    return A.slice(x)


# ---------------------------------------------------------------- wordset v1

def emit_wordset(A: PointSet) -> str:
    lines = [WORDSET_MAGIC, f"k={A.k} n={A.n}"]
    lines.extend(A.texts())
    return "\n".join(lines) + "\n"


def _parse_header(line: str) -> tuple[int, int]:
    fields = dict(tok.split("=", 1) for tok in line.split() if "=" in tok)
    if set(fields) != {"k", "n"} or len(line.split()) != 2:
        raise WordsetError(f"bad header {line!r}, expected 'k=<k> n=<n>'")
    try:
        return int(fields["k"]), int(fields["n"])
    except ValueError:
        raise WordsetError(f"bad header {line!r}") from None


def parse_wordset_text(text: str, allow_variables: bool = False):
    """Parse wordset text; returns ``(k, n, symbol tuples)`` in file order."""
    header = None
    entries: list[tuple[int, ...]] = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            header = _parse_header(line)
            continue
        k, n = header
        try:
            syms = parse_symbols(line, k)
        except ValueError as e:
            raise WordsetError(f"line {lineno}: {e}") from None
        if len(syms) != n:
            raise WordsetError(f"line {lineno}: {line!r} has length {len(syms)}, expected {n}")
        if not allow_variables and any(s < 0 for s in syms):
            raise WordsetError(f"line {lineno}: {line!r} contains variables")
        if syms in seen:
            raise WordsetError(f"line {lineno}: duplicate word {line!r}")
        seen.add(syms)
        entries.append(syms)
    if header is None:
        raise WordsetError("missing 'k=<k> n=<n>' header")
    return header[0], header[1], entries


def parse_wordset(source: str | Path) -> PointSet:
    """Read a wordset file (path) or wordset text into a PointSet."""
    text = Path(source).read_text() if _looks_like_path(source) else str(source)
    k, n, entries = parse_wordset_text(text)
    try:
        check_ambient(k, n)
    except ValueError as e:
        raise WordsetError(str(e)) from None
    return PointSet.from_words(k, n, (Word(k, e) for e in entries))


def write_wordset(A: PointSet, path: str | Path) -> None:
    Path(path).write_text(emit_wordset(A))


def _looks_like_path(source) -> bool:
    if isinstance(source, Path):
        return True
    text = str(source)
    return bool(text) and "\n" not in text and Path(text).is_file()


def format_word(letters, k: int) -> str:
    return format_symbols(letters, k)
