"""Words, variable words, combinatorial lines and subspaces of [k]^n.

Words are stored as tuples of letters in ``1..k``.  Inside a variable word
the variable ``v_j`` is encoded as the negative integer ``-j`` so the same
generator can be instantiated over any alphabet ``k' <= k`` (needed for
restrictions ``V|k'``) or reinterpreted over ``[k+1]`` when lifting.

Points of ``[k]^n`` are addressed by the big-endian mixed-radix index
``sum((x_i - 1) * k**(n - i))``; a prefix therefore owns a contiguous block
of indices, which is what makes slicing and concatenation cheap.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

#: Largest ambient cube (number of points) accepted by any constructor.
MAX_POINTS = 2 ** 28


class AmbientTooLarge(ValueError):
    pass


def check_ambient(k: int, n: int) -> int:
    """Validate an ambient cube and return its number of points."""
    if k < 2:
        raise ValueError(f"alphabet size must be >= 2, got {k}")
    if n < 0:
        raise ValueError(f"length must be >= 0, got {n}")
    size = k ** n
    if size > MAX_POINTS:
        raise AmbientTooLarge(f"[{k}]^{n} has {size} points, cap is {MAX_POINTS}")
    return size


@dataclass(frozen=True)
class Alphabet:
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"alphabet size must be >= 2, got {self.k}")

    @property
    def letters(self) -> range:
        return range(1, self.k + 1)


# ---------------------------------------------------------------- text forms

def _symbol_text(s: int, k: int) -> str:
    if s > 0:
        return str(s)
    if k <= 9:
        return chr(ord("a") - s - 1)
    return f"v{-s}"


def format_symbols(symbols: Sequence[int], k: int) -> str:
    if k <= 9:
        return "".join(_symbol_text(s, k) for s in symbols)
    return ".".join(_symbol_text(s, k) for s in symbols)


def parse_symbols(text: str, k: int) -> tuple[int, ...]:
    """Parse the text form of a word or variable word over ``[k]``."""
    text = text.strip()
    if not text:
        raise ValueError("empty word")
    tokens = list(text) if k <= 9 else text.split(".")
    out = []
    for tok in tokens:
        if tok.isdigit():
            s = int(tok)
            if not 1 <= s <= k:
                raise ValueError(f"letter {s} out of range for k={k} in {text!r}")
        elif k <= 9 and len(tok) == 1 and tok.isalpha() and tok.islower():
            s = -(ord(tok) - ord("a") + 1)
        elif tok == "v":
            s = -1
        elif k > 9 and tok.startswith("v") and tok[1:].isdigit() and int(tok[1:]) >= 1:
            s = -int(tok[1:])
        else:
            raise ValueError(f"bad symbol {tok!r} in {text!r}")
        out.append(s)
    return tuple(out)


# ---------------------------------------------------------------- words

@dataclass(frozen=True)
class Word:
    k: int
    letters: tuple[int, ...]

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"alphabet size must be >= 2, got {self.k}")
        object.__setattr__(self, "letters", tuple(int(a) for a in self.letters))
        if not self.letters:
            raise ValueError("words have length >= 1")
        for a in self.letters:
            if not 1 <= a <= self.k:
                raise ValueError(f"letter {a} out of range for k={self.k}")

    @classmethod
    def parse(cls, text: str, k: int) -> "Word":
        symbols = parse_symbols(text, k)
        if any(s < 0 for s in symbols):
            raise ValueError(f"{text!r} contains variables")
        return cls(k, symbols)

    @classmethod
    def from_index(cls, idx: int, k: int, n: int) -> "Word":
        return cls(k, letters_of(idx, k, n))

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def index(self) -> int:
        return index_of(self.letters, self.k)

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return format_symbols(self.letters, self.k)

    def __add__(self, other: "Word") -> "Word":
        return concat(self, other)


def index_of(letters: Sequence[int], k: int) -> int:
    idx = 0
    for a in letters:
        idx = idx * k + (a - 1)
    return idx


def letters_of(idx: int, k: int, n: int) -> tuple[int, ...]:
    if not 0 <= idx < k ** n:
        raise ValueError(f"index {idx} outside [{k}]^{n}")
    out = [0] * n
    for p in range(n - 1, -1, -1):
        idx, r = divmod(idx, k)
        out[p] = r + 1
    return tuple(out)


def concat(x: Word, y: Word) -> Word:
    if x.k != y.k:
        raise ValueError(f"alphabet mismatch: {x.k} vs {y.k}")
    return Word(x.k, x.letters + y.letters)


@functools.lru_cache(maxsize=64)
def digits(k: int, n: int) -> np.ndarray:
    """All words of ``[k]^n`` as a read-only ``(k**n, n)`` array, in index order."""
    size = check_ambient(k, n)
    if n == 0:
        out = np.zeros((1, 0), dtype=np.int8)
    else:
        idx = np.arange(size, dtype=np.int64)
        out = np.empty((size, n), dtype=np.int8)
        for p in range(n - 1, -1, -1):
            out[:, p] = idx % k + 1
            idx //= k
    out.setflags(write=False)
    return out


def place_values(k: int, n: int) -> np.ndarray:
    return np.array([k ** (n - 1 - p) for p in range(n)], dtype=np.int64)


# ---------------------------------------------------------------- variable words

@dataclass(frozen=True)
class VariableWord:
    """A word over ``[k]`` plus variables ``v_1..v_m`` (encoded ``-1..-m``)."""

    k: int
    symbols: tuple[int, ...]

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"alphabet size must be >= 2, got {self.k}")
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if not self.symbols:
            raise ValueError("variable words have length >= 1")
        for s in self.symbols:
            if s == 0 or s > self.k:
                raise ValueError(f"symbol {s} out of range for k={self.k}")
        used = {-s for s in self.symbols if s < 0}
        if not used:
            raise ValueError("a variable word needs at least one variable")
        if used != set(range(1, max(used) + 1)):
            raise ValueError(f"variables must be v_1..v_m, got {sorted(used)}")

    @classmethod
    def parse(cls, text: str, k: int) -> "VariableWord":
        return cls(k, parse_symbols(text, k))

    @property
    def n(self) -> int:
        return len(self.symbols)

    @cached_property
    def m(self) -> int:
        return -min(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __str__(self) -> str:
        return format_symbols(self.symbols, self.k)

    def is_canonical(self) -> bool:
        seen = 0
        for s in self.symbols:
            if s < 0:
                if -s > seen + 1:
                    return False
                seen = max(seen, -s)
        return True

    def canonical(self) -> "VariableWord":
        """Rename variables so first occurrences appear in order v_1, v_2, ..."""
        rename: dict[int, int] = {}
        out = []
        for s in self.symbols:
            if s < 0:
                s = rename.setdefault(s, -(len(rename) + 1))
            out.append(s)
        return VariableWord(self.k, tuple(out))

    def instantiate(self, a: Sequence[int], k: int | None = None) -> Word:
        """Substitute ``a[j-1]`` for ``v_j``; letters may come from ``[k]`` (default self.k)."""
        k = self.k if k is None else k
        if len(a) != self.m:
            raise ValueError(f"expected {self.m} letters, got {len(a)}")
        for x in a:
            if not 1 <= x <= k:
                raise ValueError(f"letter {x} out of range for k={k}")
        return Word(max(k, self.k), tuple(s if s > 0 else a[-s - 1] for s in self.symbols))

    def lex_key(self) -> tuple[int, ...]:
        # symbol order 1 < ... < k < v_1 < ... < v_m
        return tuple(s if s > 0 else self.k - s for s in self.symbols)

    def with_alphabet(self, k: int) -> "VariableWord":
        return VariableWord(k, self.symbols)


def compose(outer: VariableWord, inner: VariableWord) -> VariableWord:
    """Substitute the symbols of ``inner`` (length ``outer.m``) for the variables of ``outer``.

    Constants of ``inner`` must be valid letters of ``outer.k``.
    """
    if inner.n != outer.m:
        raise ValueError(f"inner length {inner.n} != outer dimension {outer.m}")
    syms = tuple(s if s > 0 else inner.symbols[-s - 1] for s in outer.symbols)
    return VariableWord(outer.k, syms).canonical()


def append_constants(z: VariableWord, suffix: Sequence[int], prefix: Sequence[int] = ()) -> VariableWord:
    return VariableWord(z.k, tuple(prefix) + z.symbols + tuple(suffix))


# ---------------------------------------------------------------- subspaces

@dataclass(frozen=True)
class Subspace:
    """The m-dimensional subspace (a line when m = 1) generated by a variable word."""

    generator: VariableWord

    def __post_init__(self):
        if not self.generator.is_canonical():
            object.__setattr__(self, "generator", self.generator.canonical())

    @classmethod
    def parse(cls, text: str, k: int) -> "Subspace":
        return cls(VariableWord.parse(text, k))

    @classmethod
    def identity(cls, k: int, m: int) -> "Subspace":
        return cls(VariableWord(k, tuple(range(-1, -m - 1, -1))))

    @classmethod
    def of(cls, k: int, symbols: Sequence[int]) -> "Subspace":
        return cls(VariableWord(k, tuple(symbols)))

    @property
    def k(self) -> int:
        return self.generator.k

    @property
    def n(self) -> int:
        return self.generator.n

    @property
    def dim(self) -> int:
        return self.generator.m

    @property
    def is_line(self) -> bool:
        return self.dim == 1

    def __str__(self) -> str:
        return str(self.generator)

    def lex_key(self) -> tuple[int, ...]:
        return self.generator.lex_key()

    @cached_property
    def _affine(self) -> tuple[int, np.ndarray]:
        z, k, n = self.generator.symbols, self.k, self.n
        const = sum((s - 1) * k ** (n - 1 - p) for p, s in enumerate(z) if s > 0)
        w = np.zeros(self.dim, dtype=np.int64)
        for p, s in enumerate(z):
            if s < 0:
                w[-s - 1] += k ** (n - 1 - p)
        return const, w

    def indices(self, kprime: int | None = None) -> np.ndarray:
        """Ambient indices of ``z(a)`` for ``a`` running over ``[k']^m`` in index order."""
        kprime = self.k if kprime is None else kprime
        if not 1 <= kprime <= self.k:
            raise ValueError(f"k'={kprime} out of range for k={self.k}")
        const, w = self._affine
        return const + (digits(kprime, self.dim).astype(np.int64) - 1) @ w

    def points(self) -> list[Word]:
        return [Word.from_index(int(i), self.k, self.n) for i in self.indices()]

    def embed(self, w: Word) -> Word:
        """Image of ``w`` in ``[k]^m`` under the natural isomorphism with this subspace."""
        if len(w) != self.dim:
            raise ValueError(f"word length {len(w)} != subspace dimension {self.dim}")
        if w.k > self.k:
            raise ValueError(f"alphabet mismatch: {w.k} > {self.k}")
        return self.generator.instantiate(w.letters)

    def compose(self, inner: "Subspace") -> "Subspace":
        """The subspace of the ambient cube that is the image of ``inner`` (a subspace of [k]^m)."""
        if inner.k > self.k:
            raise ValueError(f"alphabet mismatch: {inner.k} > {self.k}")
        return Subspace(compose(self.generator, inner.generator))

    def lift(self, k: int) -> "Subspace":
        """The same generator read over alphabet ``k`` (e.g. lifting V|k to [k+1])."""
        return Subspace(self.generator.with_alphabet(k))

    def contains(self, word: Word) -> bool:
        if word.n != self.n or word.k != self.k:
            return False
        assigned: dict[int, int] = {}
        for s, a in zip(self.generator.symbols, word.letters):
            if s > 0:
                if s != a:
                    return False
            elif assigned.setdefault(s, a) != a:
                return False
        return True


Line = Subspace


def subspace_points(V: Subspace) -> "PointSet":
    from dhj.pointset import PointSet
    return PointSet.from_indices(V.k, V.n, V.indices())


def restrict(V: Subspace, kprime: int) -> "PointSet":
    """Points of ``V|k'``: instantiations using letters from ``[k']`` only."""
    from dhj.pointset import PointSet
    if not 2 <= kprime <= V.k:
        raise ValueError(f"k'={kprime} must satisfy 2 <= k' <= {V.k}")
    return PointSet.from_indices(V.k, V.n, V.indices(kprime))


def embed(V: Subspace, w: Word) -> Word:
    return V.embed(w)


# ---------------------------------------------------------------- enumeration

def canonical_words(k: int, n: int, m: int) -> Iterator[tuple[int, ...]]:
    """Canonical m-variable words of length n, in lexicographic order 1<..<k<v_1<..<v_m."""
    if m < 1 or n < m:
        return
    buf = [0] * n

    def rec(pos: int, used: int) -> Iterator[tuple[int, ...]]:
        if pos == n:
            if used == m:
                yield tuple(buf)
            return
        remaining = n - pos
        if remaining > m - used:
            for a in range(1, k + 1):
                buf[pos] = a
                yield from rec(pos + 1, used)
        for j in range(1, min(used + 1, m) + 1):
            if j == used + 1 or remaining > m - used:
                buf[pos] = -j
                yield from rec(pos + 1, max(used, j))

    yield from rec(0, 0)


def enumerate_subspaces(k: int, n: int, m: int) -> Iterator[Subspace]:
    for syms in canonical_words(k, n, m):
        yield Subspace(VariableWord(k, syms))


def enumerate_lines(k: int, n: int) -> Iterator[Subspace]:
    check_ambient(k, n)
    return enumerate_subspaces(k, n, 1)


def count_lines(k: int, n: int) -> int:
    if k < 2 or n < 1:
        raise ValueError("need k >= 2 and n >= 1")
    return (k + 1) ** n - k ** n


def count_subspaces(k: int, n: int, m: int) -> int:
    """Number of m-dimensional subspaces: sum_j C(n, j) k^(n-j) S(j, m)."""
    from math import comb
    if m < 1 or n < m:
        return 0
    # Stirling numbers of the second kind by the standard recurrence
    S = [[0] * (m + 1) for _ in range(n + 1)]
    S[0][0] = 1
    for a in range(1, n + 1):
        for b in range(1, min(a, m) + 1):
            S[a][b] = b * S[a - 1][b] + S[a - 1][b - 1]
    return sum(comb(n, j) * k ** (n - j) * S[j][m] for j in range(m, n + 1))


def lines_within(V: Subspace) -> Iterator[Subspace]:
    """Lines of the ambient cube contained in ``V``, as images of the lines of ``[k]^m``."""
    for ell in enumerate_lines(V.k, V.dim):
        yield V.compose(ell)


@functools.lru_cache(maxsize=32)
def line_matrix(k: int, n: int) -> tuple[tuple[Subspace, ...], np.ndarray]:
    """All lines of ``[k]^n`` in enumeration order with their ``(L, k)`` index matrix."""
    lines = tuple(enumerate_lines(k, n))
    mat = np.array([ell.indices() for ell in lines], dtype=np.int64).reshape(len(lines), k)
    mat.setflags(write=False)
    return lines, mat


def subspace_chunks(k: int, n: int, m: int, kprime: int | None = None,
                    chunk: int = 4096) -> Iterator[tuple[list[Subspace], np.ndarray]]:
    """Yield ``(subspaces, index matrix)`` blocks over all m-dim subspaces in lex order.

    Row ``r`` of the matrix lists the indices of ``V|k'`` for the r-th subspace.
    """
    kprime = k if kprime is None else kprime
    grid = digits(kprime, m).astype(np.int64) - 1
    pv = place_values(k, n)
    gen = canonical_words(k, n, m)
    while True:
        block = list(itertools.islice(gen, chunk))
        if not block:
            return
        arr = np.array(block, dtype=np.int64)
        const = ((np.where(arr > 0, arr, 1) - 1) * pv).sum(axis=1)
        w = np.zeros((len(block), m), dtype=np.int64)
        for j in range(1, m + 1):
            w[:, j - 1] = ((arr == -j) * pv).sum(axis=1)
        yield [Subspace(VariableWord(k, s)) for s in block], const[:, None] + w @ grid.T
