"""Topic analysis of dataset titles, descriptions or keywords with LDA.

The sampler is collapsed Gibbs sampling compiled with numba. Documents are
always swept in order of their dataset id and all random draws come from a
single seeded numpy generator, so a fit depends only on the set of
documents, not on the order they were supplied in.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import DatasetRecord, LandscapeRegistry, _data_path, read_token_list

FIELDS = ("title", "description", "keywords")
_WORD_RE = re.compile(r"\w+", re.UNICODE)


def load_stopwords(list_id: str) -> frozenset:
    """Shipped stopword list by language code (``de``, ``en``), or ``none``."""
    if list_id == "none":
        return frozenset()
    return frozenset(read_token_list(_data_path(f"stopwords_{list_id}.txt")))


def tokenize(text: str, stopwords: frozenset = frozenset()) -> list[str]:
    tokens = (t.lower() for t in _WORD_RE.findall(text))
    return [t for t in tokens if len(t) >= 2 and t not in stopwords]


@dataclass
class Corpus:
    documents: list
    vocabulary: dict
    stopword_list_id: str
    dropped: int = 0

    def __len__(self):
        return len(self.documents)

    @property
    def terms(self) -> list[str]:
        out = [""] * len(self.vocabulary)
        for t, i in self.vocabulary.items():
            out[i] = t
        return out

    def term_counts(self) -> Counter:
        return Counter(t for _, toks in self.documents for t in toks)


def _field_text(record: DatasetRecord, field_name: str) -> str:
    if field_name == "keywords":
        return " ".join(record.keywords)
    return getattr(record, field_name) or ""


def corpus_from_texts(items, stopword_list_id: str = "de") -> Corpus:
    """Corpus from ``(doc_id, text)`` pairs; empty documents are dropped."""
    stop = load_stopwords(stopword_list_id)
    docs, dropped = [], 0
    for doc_id, text in items:
        toks = tokenize(text or "", stop)
        if toks:
            docs.append((str(doc_id), toks))
        else:
            dropped += 1
    vocab = {t: i for i, t in enumerate(sorted({t for _, toks in docs for t in toks}))}
    return Corpus(docs, vocab, stopword_list_id, dropped)


def build_corpus(registry: LandscapeRegistry, field: str = "title", stopword_list_id: str = "de") -> Corpus:
    if field not in FIELDS:
        raise ValueError(f"field must be one of {FIELDS}, got {field!r}")
    records = registry.projection[0]
    return corpus_from_texts(((str(r.node), _field_text(r, field)) for r in records), stopword_list_id)


@dataclass
class TopicModel:
    k: int
    phi: np.ndarray
    doc_topic: np.ndarray
    iterations: int
    seed: int
    alpha: float
    beta: float
    terms: list = field(repr=False)
    doc_ids: list = field(repr=False)
    term_counts: np.ndarray = field(repr=False)
    log_likelihood: float = float("nan")
    token_count: int = 0

    @property
    def perplexity(self) -> float:
        if not self.token_count:
            return float("nan")
        return math.exp(-self.log_likelihood / self.token_count)


@numba.njit(cache=True)
def _gibbs(words, doc_index, z, n_dk, n_kw, n_k, uniforms, alpha, beta, iterations):
    n_tokens = words.shape[0]
    k = n_k.shape[0]
    v = n_kw.shape[1]
    vbeta = v * beta
    p = np.empty(k)
    for it in range(iterations):
        for i in range(n_tokens):
            w = words[i]
            d = doc_index[i]
            t = z[i]
            n_dk[d, t] -= 1
            n_kw[t, w] -= 1
            n_k[t] -= 1
            total = 0.0
            for j in range(k):
                total += (n_dk[d, j] + alpha) * (n_kw[j, w] + beta) / (n_k[j] + vbeta)
                p[j] = total
            u = uniforms[it, i] * total
            t = 0
            while t < k - 1 and p[t] < u:
                t += 1
            z[i] = t
            n_dk[d, t] += 1
            n_kw[t, w] += 1
            n_k[t] += 1


def fit_lda(corpus: Corpus, k: int = 6, iterations: int = 1000, seed: int = 20210601,
            alpha: float | None = None, beta: float = 0.01) -> TopicModel:
    """Collapsed Gibbs LDA; ``alpha`` defaults to ``50 / k``."""
    if len(corpus) == 0:
        raise ValueError("cannot fit a topic model on an empty corpus")
    if k < 2:
        raise ValueError("k must be >= 2")
    v = len(corpus.vocabulary)
    if k > v:
        raise ValueError(f"k={k} exceeds vocabulary size {v}")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    alpha = 50.0 / k if alpha is None else float(alpha)

    docs = sorted(corpus.documents, key=lambda d: d[0])
    words = np.array([corpus.vocabulary[t] for _, toks in docs for t in toks], dtype=np.int64)
    doc_index = np.array([d for d, (_, toks) in enumerate(docs) for _ in toks], dtype=np.int64)
    n_docs, n_tokens = len(docs), len(words)

    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.integers(0, k, size=n_tokens).astype(np.int64)
    n_dk = np.zeros((n_docs, k), dtype=np.int64)
    n_kw = np.zeros((k, v), dtype=np.int64)
    np.add.at(n_dk, (doc_index, z), 1)
    np.add.at(n_kw, (z, words), 1)
    n_k = n_kw.sum(axis=1)

    # draw in blocks to bound memory on large corpora
    block = max(1, min(iterations, 5_000_000 // max(n_tokens, 1)))
    done = 0
    while done < iterations:
        step = min(block, iterations - done)
        uniforms = rng.random((step, n_tokens))
        _gibbs(words, doc_index, z, n_dk, n_kw, n_k, uniforms, alpha, beta, step)
        done += step

    phi = (n_kw + beta) / (n_k[:, None] + v * beta)
    doc_topic = (n_dk + alpha) / (n_dk.sum(axis=1)[:, None] + k * alpha)
    phi /= phi.sum(axis=1, keepdims=True)
    doc_topic /= doc_topic.sum(axis=1, keepdims=True)

    token_prob = np.einsum("ik,ik->i", doc_topic[doc_index], phi[:, words].T)
    ll = float(np.log(token_prob).sum())

    return TopicModel(
        k=k, phi=phi, doc_topic=doc_topic, iterations=iterations, seed=seed, alpha=alpha, beta=beta,
        terms=corpus.terms, doc_ids=[d for d, _ in docs],
        term_counts=np.bincount(words, minlength=v), log_likelihood=ll, token_count=n_tokens,
    )


def top_terms(model: TopicModel, per_topic: int = 10) -> list:
    """Per topic, the ``per_topic`` heaviest terms as ``(term, count, weight)``."""
    out = []
    for t in range(model.k):
        if per_topic <= 0:
            out.append((t, []))
            continue
        # stable sort on -weight keeps vocabulary order among ties
        order = np.argsort(-model.phi[t], kind="stable")[:per_topic]
        out.append((t, [(model.terms[i], int(model.term_counts[i]), float(model.phi[t, i])) for i in order]))
    return out


def perplexity_by_k(corpus: Corpus, ks, iterations: int = 200, seed: int = 20210601, beta: float = 0.01) -> dict:
    """Training-set perplexity for each candidate topic count."""
    return {k: fit_lda(corpus, k=k, iterations=iterations, seed=seed, beta=beta).perplexity
            for k in ks if 2 <= k <= len(corpus.vocabulary)}
