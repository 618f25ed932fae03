"""Time the Gibbs sampler on synthetic titles."""

import argparse
import time

from odlq.synthetic import synthetic_titles
from odlq.topics import corpus_from_texts, fit_lda, top_terms


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--titles", type=int, default=5000)
    ap.add_argument("--k", type=int, default=6)
    ap.add_argument("--iterations", type=int, default=1000)
    args = ap.parse_args()

    corpus = corpus_from_texts(synthetic_titles(args.titles, seed=5))
    fit_lda(corpus, k=2, iterations=2)  # jit warm-up
    start = time.perf_counter()
    model = fit_lda(corpus, k=args.k, iterations=args.iterations)
    elapsed = time.perf_counter() - start
    print(f"{len(corpus)} documents, {len(corpus.vocabulary)} terms, {args.iterations} iterations: {elapsed:.2f}s")
    print(f"perplexity {model.perplexity:.1f}")
    for t, terms in top_terms(model, 6):
        print(t, " ".join(w for w, _, _ in terms))


if __name__ == "__main__":
    main()
