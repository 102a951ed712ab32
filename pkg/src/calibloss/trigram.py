"""Character-trigram word models: the head-versus-tail experiment.

A word ``w`` is scored as ``q(w) = prod P(c_i | c_{i-2} c_{i-1})`` over
``^^w$``, where ``^`` pads the start and ``$`` ends the word.  Training with
``alpha = 1`` sets the conditionals to relative frequencies, which
minimizes expected log loss among trigram models; ``alpha > 1`` trains on
``p**alpha`` instead and so favours the head of the distribution.
"""
from __future__ import annotations

import math
import unicodedata
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import AlphabetMismatch, BadLine, EmptyCorpus, ParameterOutOfRange
from .losses import get_loss

LETTERS = "abcdefghijklmnopqrstuvwxyz"
START = "^"
END = "$"
K = len(LETTERS) + 1  # letters plus one boundary symbol per slot
_CODE = {c: i for i, c in enumerate(LETTERS)}
BOUNDARY = len(LETTERS)  # index of '^' in context slots and '$' in the outcome slot


@dataclass(frozen=True, eq=False)
class Corpus:
    words: tuple[str, ...]
    weights: np.ndarray
    noise: np.ndarray  # True for words added as foreign noise

    def __post_init__(self):
        if not self.words:
            raise EmptyCorpus("corpus has no words")
        if len(set(self.words)) != len(self.words):
            raise ValueError("corpus words must be unique")

    @property
    def probs(self) -> np.ndarray:
        return self.weights / math.fsum(self.weights.tolist())

    def __len__(self):
        return len(self.words)


@dataclass(frozen=True, eq=False)
class TrigramModel:
    table: np.ndarray  # (K, K, K): [c_{-2}, c_{-1}, next]
    alpha: float
    smoothing: float

    def word_prob(self, word: str) -> float:
        return float(word_probs(self, [word])[0])


def normalize_word(raw: str) -> str:
    """Lowercase, strip accents by NFD decomposition, and drop anything outside a-z."""
    decomposed = unicodedata.normalize("NFD", raw.strip().lower())
    return "".join(c for c in decomposed if c in _CODE)


def _from_pairs(pairs: Iterable[tuple[str, float]], noise: bool = False) -> Corpus:
    words, weights = [], []
    seen = {}
    for raw, w in pairs:
        word = normalize_word(raw)
        if not word:
            warnings.warn(f"{raw!r} has no letters left after normalization; dropped", stacklevel=3)
            continue
        if word in seen:
            warnings.warn(f"{raw!r} duplicates {seen[word]!r} after normalization; keeping the first",
                          stacklevel=3)
            continue
        seen[word] = raw
        words.append(word)
        weights.append(float(w))
    if not words:
        raise EmptyCorpus("no usable words")
    return Corpus(tuple(words), np.asarray(weights), np.full(len(words), noise))


def ingest(source, noise: bool = False) -> Corpus:
    """Read ``word<TAB>frequency`` lines from a path or an iterable of lines."""
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = list(source)
    pairs = []
    for n, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        word, sep, freq = line.rpartition("\t")
        try:
            w = float(freq)
        except ValueError:
            raise BadLine(n, line) from None
        if not sep or not word.strip() or not math.isfinite(w) or w <= 0:
            raise BadLine(n, line)
        pairs.append((word, w))
    if not pairs:
        raise EmptyCorpus("no entries found")
    return _from_pairs(pairs, noise)


def from_counts(counts: dict[str, float], noise: bool = False) -> Corpus:
    return _from_pairs(counts.items(), noise)


def bundled(name: str) -> Corpus:
    """Bundled word lists: ``english`` (Zipf-weighted) and ``foreign`` (accented French and German)."""
    fname = {"english": "english_mini.tsv", "foreign": "foreign_mini.tsv"}[name]
    text = resources.files("calibloss.data").joinpath(fname).read_text(encoding="utf-8")
    return ingest(text.splitlines(), noise=(name == "foreign"))


def mix_noise(base: Corpus, noise: Corpus, mass: float) -> Corpus:
    """Give ``noise`` words total mass ``mass`` split uniformly; base words keep their relative weights."""
    if not 0 < mass < 1:
        raise ParameterOutOfRange(f"noise mass must be in (0, 1), got {mass}")
    taken = set(base.words)
    extra = [w for w in noise.words if w not in taken]
    dropped = len(noise.words) - len(extra)
    if dropped:
        warnings.warn(f"{dropped} noise words already in the base corpus; base weights kept", stacklevel=2)
    if not extra:
        raise EmptyCorpus("no noise words left after removing overlaps")
    bw = base.probs * (1 - mass)
    nw = np.full(len(extra), mass / len(extra))
    return Corpus(base.words + tuple(extra), np.concatenate([bw, nw]),
                  np.concatenate([base.noise, np.ones(len(extra), dtype=bool)]))


def _triples(word: str) -> np.ndarray:
    try:
        codes = [_CODE[c] for c in word]
    except KeyError as e:
        raise AlphabetMismatch(f"{word!r} contains {e.args[0]!r}, outside a-z") from None
    seq = [BOUNDARY, BOUNDARY] + codes + [BOUNDARY]
    return np.array([seq[i:i + 3] for i in range(len(seq) - 2)], dtype=np.int64)


def train(corpus: Corpus, reweight_alpha: float = 1.0, smoothing: float = 0.0) -> TrigramModel:
    """Weighted relative trigram frequencies under ``pbar ~ p**alpha``, plus optional pseudo-counts."""
    if reweight_alpha <= 0:
        raise ParameterOutOfRange("alpha must be positive")
    if smoothing < 0:
        raise ParameterOutOfRange("smoothing must be non-negative")
    if not len(corpus):
        raise EmptyCorpus("cannot train on an empty corpus")
    logp = np.log(corpus.probs) * reweight_alpha
    pbar = np.exp(logp - logp.max())
    pbar /= pbar.sum()
    counts = np.zeros((K, K, K))
    for word, w in zip(corpus.words, pbar):
        t = _triples(word)
        np.add.at(counts, (t[:, 0], t[:, 1], t[:, 2]), w)
    counts += smoothing
    totals = counts.sum(axis=2, keepdims=True)
    table = np.divide(counts, totals, out=np.full_like(counts, 1.0 / K), where=totals > 0)
    return TrigramModel(table, reweight_alpha, smoothing)


def word_probs(model: TrigramModel, words: Sequence[str]) -> np.ndarray:
    out = np.empty(len(words))
    for i, word in enumerate(words):
        t = _triples(word)
        c = model.table[t[:, 0], t[:, 1], t[:, 2]]
        out[i] = 0.0 if np.any(c == 0) else math.exp(np.log(c).sum())
    return out


def evaluate_probs(qw: np.ndarray, corpus: Corpus, losses=("log", "loglog")) -> dict[str, float]:
    """``E_{word ~ p} f(1/q(word))`` for each loss, with q taken as-is (never renormalized)."""
    p = corpus.probs
    out = {}
    for name in losses:
        loss = get_loss(name)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            v = loss.values(qw)
        out[loss.name] = math.inf if np.any(np.isposinf(v) & (p > 0)) else math.fsum((p * v).tolist())
    return out


def evaluate(model: TrigramModel, corpus: Corpus, losses=("log", "loglog")) -> dict[str, float]:
    return evaluate_probs(word_probs(model, corpus.words), corpus, losses)


def head_mass(model_or_probs, corpus: Corpus) -> float:
    """Total q-mass on the corpus's base (non-noise) words."""
    if isinstance(model_or_probs, TrigramModel):
        qw = word_probs(model_or_probs, corpus.words)
    else:
        qw = np.asarray(model_or_probs, dtype=np.float64)
    return math.fsum(qw[~corpus.noise].tolist())


def cumulative_curve(model: TrigramModel, corpus: Corpus) -> np.ndarray:
    """Rows ``(rank, p-cum, q-cum)`` with words ordered by decreasing p."""
    p = corpus.probs
    order = np.argsort(-p, kind="stable")
    qw = word_probs(model, corpus.words)
    return np.column_stack([np.arange(1, p.size + 1), np.cumsum(p[order]), np.cumsum(qw[order])])


def sample_words(model: TrigramModel, k: int, max_len: int = 20, seed: int = 0) -> list[str]:
    """Walk the conditionals from ``^^`` until ``$`` or ``max_len`` letters."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(k):
        a = b = BOUNDARY
        chars = []
        while len(chars) < max_len:
            c = int(rng.choice(K, p=model.table[a, b]))
            if c == BOUNDARY:
                break
            chars.append(LETTERS[c])
            a, b = b, c
        out.append("".join(chars))
    return out


def experiment(corpus: Corpus, alphas=(1.0, 1.4), losses=("log", "loglog"),
               smoothing: float = 0.0) -> list[dict]:
    """One row per model: the target p itself, then one trigram model per alpha."""
    rows = [{"model": "p", "alpha": None, **evaluate_probs(corpus.probs, corpus, losses),
             "head_mass": head_mass(corpus.probs, corpus)}]
    for a in alphas:
        m = train(corpus, a, smoothing)
        rows.append({"model": f"trigram(alpha={a:g})", "alpha": a, **evaluate(m, corpus, losses),
                     "head_mass": head_mass(m, corpus)})
    return rows
