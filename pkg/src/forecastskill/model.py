"""Text-only skill classifier.

Justifications become bag-of-n-gram counts over lowercased tokens with every
digit replaced by ``0``. Each justification is wrapped in ``<s>`` ... ``</s>``
so that n-grams crossing sentence boundaries inside it survive, and n-grams
seen once in training collapse into a single ``<UNK>`` feature.

Counts are passed through ``log1p`` and each row is scaled to unit length
before training, which keeps the logistic loss smooth enough for the fixed
step size. Optional dense metric features are z-scored with training moments
and appended after the n-gram block.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .textproc import tokenize

UNK = "<UNK>"
BOS, EOS = "<s>", "</s>"
FORMAT_MAGIC = "forecastskill-model"
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Featurization


def normalize_tokens(text: str) -> list[str]:
    """Lowercased tokens with digits mapped to ``0``.

    >>> normalize_tokens("Before 1 October 2019?")
    ['before', '0', 'october', '0000', '?']
    """
    return ["".join("0" if c.isdigit() else c for c in t.lower()) for t in tokenize(text).tokens]


def ngrams(text: str, sizes: Iterable[int]) -> Iterable[str]:
    toks = [BOS, *normalize_tokens(text), EOS]
    for n in sorted(set(sizes)):
        for i in range(len(toks) - n + 1):
            yield " ".join(toks[i : i + n])


def _as_texts(doc) -> list[str]:
    return [doc] if isinstance(doc, str) else list(doc)


def _doc_counts(doc, sizes) -> Counter:
    c: Counter = Counter()
    for text in _as_texts(doc):
        c.update(ngrams(text, sizes))
    return c


@dataclass
class DenseBlock:
    """Dense metric features with the training-split moments used to scale them."""

    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, rows: Sequence[Mapping[str, float | None]], names: Sequence[str]) -> "DenseBlock":
        raw = _dense_matrix(rows, names)
        mean = np.nanmean(raw, axis=0) if raw.size else np.zeros(len(names))
        mean = np.where(np.isnan(mean), 0.0, mean)
        filled = np.where(np.isnan(raw), mean, raw)
        std = filled.std(axis=0) if raw.size else np.ones(len(names))
        std = np.where(std > 0, std, 1.0)
        return cls(tuple(names), mean, std)

    def transform(self, rows: Sequence[Mapping[str, float | None]]) -> np.ndarray:
        raw = _dense_matrix(rows, self.names)
        filled = np.where(np.isnan(raw), self.mean, raw)
        return (filled - self.mean) / self.std


def _dense_matrix(rows, names) -> np.ndarray:
    out = np.full((len(rows), len(names)), np.nan)
    for i, row in enumerate(rows):
        for j, name in enumerate(names):
            v = row.get(name)
            if v is not None:
                out[i, j] = float(v)
    return out


@dataclass
class FeatureSpace:
    ngram_sizes: tuple[int, ...] = (1, 2)
    min_count: int = 2
    vocabulary: dict[str, int] = field(default_factory=dict)
    dense: DenseBlock | None = None

    def __post_init__(self):
        if not self.ngram_sizes or min(self.ngram_sizes) < 1:
            raise ValueError("n-gram sizes must be positive integers")
        if self.min_count < 1:
            raise ValueError("min_count must be at least 1")

    @property
    def n_sparse(self) -> int:
        return len(self.vocabulary)

    @property
    def n_features(self) -> int:
        return self.n_sparse + (len(self.dense.names) if self.dense else 0)

    def feature_names(self) -> list[str]:
        names = sorted(self.vocabulary, key=self.vocabulary.__getitem__)
        if self.dense:
            names.extend(f"dense:{n}" for n in self.dense.names)
        return names

    def vocab_hash(self) -> str:
        return hashlib.sha256("\n".join(self.feature_names()).encode("utf-8")).hexdigest()


def build_space(
    docs: Sequence,
    ngram_sizes: Iterable[int] = (1, 2),
    min_count: int = 2,
    dense_rows: Sequence[Mapping[str, float | None]] | None = None,
    dense_names: Sequence[str] = (),
) -> FeatureSpace:
    """Vocabulary from training documents only.

    N-grams with a total training count below ``min_count`` are left out and
    will be counted as ``<UNK>``. ``<UNK>`` always has index 0; the remaining
    entries follow in lexicographic order.
    """
    sizes = tuple(sorted(set(ngram_sizes)))
    totals: Counter = Counter()
    for doc in docs:
        totals.update(_doc_counts(doc, sizes))
    kept = sorted(g for g, c in totals.items() if c >= min_count)
    vocab = {UNK: 0}
    for g in kept:
        vocab[g] = len(vocab)
    dense = None
    if dense_names:
        if dense_rows is None or len(dense_rows) != len(docs):
            raise ValueError("dense features need one row per document")
        dense = DenseBlock.fit(dense_rows, dense_names)
    return FeatureSpace(sizes, min_count, vocab, dense)


def featurize(docs: Sequence, space: FeatureSpace) -> sp.csr_matrix:
    """Raw n-gram counts, one row per document.

    A document is one justification or a sequence of justifications whose
    counts are added together.
    """
    if not space.vocabulary:
        raise ValueError("feature space has an empty vocabulary")
    vocab = space.vocabulary
    rows, cols, vals = [], [], []
    for i, doc in enumerate(docs):
        per_col: dict[int, int] = defaultdict(int)
        for g, c in _doc_counts(doc, space.ngram_sizes).items():
            per_col[vocab.get(g, 0)] += c
        for j in sorted(per_col):
            rows.append(i)
            cols.append(j)
            vals.append(per_col[j])
    return sp.csr_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=(len(docs), len(vocab)))


def scale_counts(X: sp.spmatrix) -> sp.csr_matrix:
    """log1p of each count, then unit L2 norm per row (empty rows stay zero)."""
    X = sp.csr_matrix(X, dtype=float, copy=True)
    X.data = np.log1p(X.data)
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    norms[norms == 0] = 1.0
    return sp.csr_matrix(sp.diags(1.0 / norms) @ X)


def design_matrix(
    docs: Sequence, space: FeatureSpace, dense_rows: Sequence[Mapping[str, float | None]] | None = None
) -> sp.csr_matrix:
    """Scaled n-gram block followed by the z-scored dense block, if any."""
    X = scale_counts(featurize(docs, space))
    if space.dense is not None:
        if dense_rows is None or len(dense_rows) != len(docs):
            raise ValueError("dense features need one row per document")
        X = sp.hstack([X, sp.csr_matrix(space.dense.transform(dense_rows))], format="csr")
    return X


# ---------------------------------------------------------------------------
# Logistic regression


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    l2: float = 1e-4
    epochs: int = 500
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.l2 < 0 or self.epochs < 1 or self.tol < 0:
            raise ValueError("invalid training configuration")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logreg_loss_grad(w: np.ndarray, b: float, X, y: np.ndarray, l2: float) -> tuple[float, np.ndarray, float]:
    """Mean cross-entropy plus ``l2 / 2 * ||w||^2`` and its gradient.

    The bias is not penalized.
    """
    z = X @ w + b
    # log(1 + e^z) - y z, written to stay finite for large |z|
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(w @ w)
    r = (_sigmoid(z) - y) / y.size
    gw = np.asarray(X.T @ r).ravel() + l2 * w
    gb = float(r.sum())
    return loss, gw, gb


@dataclass
class ModelArtifact:
    weights: np.ndarray
    bias: float
    space: FeatureSpace
    config: TrainConfig
    provenance: str = ""
    loss_history: list[float] = field(default_factory=list)
    grad_norm: float = float("nan")

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X @ self.weights).ravel() + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(int)

    def score_docs(self, docs: Sequence, dense_rows=None) -> np.ndarray:
        return self.predict_proba(design_matrix(docs, self.space, dense_rows))


def train_logreg(
    X, y: Sequence[int], config: TrainConfig | None = None, space: FeatureSpace | None = None, provenance: str = ""
) -> ModelArtifact:
    """Full-batch gradient descent from zero weights.

    Stops after ``config.epochs`` steps or once the gradient norm falls
    below ``config.tol``. The update order is fixed, so the result does not
    depend on the seed or on threading; the seed is recorded for provenance.
    """
    config = config or TrainConfig()
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.size:
        raise ValueError("X and y differ in length")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    n_pos = int(y.sum())
    if n_pos < 2 or y.size - n_pos < 2:
        raise ValueError("need at least two examples of each class")
    if sp.issparse(X):
        X = sp.csr_matrix(X, dtype=float)
    else:
        X = np.asarray(X, dtype=float)
    w = np.zeros(X.shape[1])
    b = 0.0
    history = []
    gnorm = float("inf")
    for _ in range(config.epochs):
        loss, gw, gb = logreg_loss_grad(w, b, X, y, config.l2)
        history.append(loss)
        gnorm = math.sqrt(float(gw @ gw) + gb * gb)
        if gnorm < config.tol:
            break
        w = w - config.learning_rate * gw
        b = b - config.learning_rate * gb
    else:
        loss, gw, gb = logreg_loss_grad(w, b, X, y, config.l2)
        history.append(loss)
        gnorm = math.sqrt(float(gw @ gw) + gb * gb)
    if space is None:
        space = FeatureSpace(vocabulary={f"x{j}": j for j in range(X.shape[1])})
    return ModelArtifact(w, b, space, config, provenance, history, gnorm)


def provenance_hash(docs: Sequence, labels: Sequence[int]) -> str:
    h = hashlib.sha256()
    for doc, lab in zip(docs, labels):
        for text in _as_texts(doc):
            h.update(text.encode("utf-8"))
            h.update(b"\x1f")
        h.update(f"\x1e{int(lab)}\x1d".encode())
    return h.hexdigest()


def fit_text_classifier(
    docs: Sequence,
    labels: Sequence[int],
    ngram_sizes: Iterable[int] = (1, 2),
    min_count: int = 2,
    config: TrainConfig | None = None,
    dense_rows: Sequence[Mapping[str, float | None]] | None = None,
    dense_names: Sequence[str] = (),
    use_ngrams: bool = True,
) -> ModelArtifact:
    """Build the feature space on ``docs`` and train on them.

    With ``use_ngrams=False`` the n-gram block is reduced to the ``<UNK>``
    column, which carries no text identity, so only dense features inform
    the model.
    """
    space = build_space(docs, ngram_sizes, min_count if use_ngrams else 10**12, dense_rows, dense_names)
    X = design_matrix(docs, space, dense_rows)
    return train_logreg(X, labels, config, space, provenance_hash(docs, labels))


# ---------------------------------------------------------------------------
# Serialization


def save_model(artifact: ModelArtifact, path: str | Path) -> None:
    """Versioned file: magic line, JSON header, vocabulary, then raw weights.

    The weight block holds the feature weights followed by the bias, as
    little-endian 8-byte floats.
    """
    space = artifact.space
    header = {
        "format_version": FORMAT_VERSION,
        "config": asdict(artifact.config),
        "seed": artifact.config.seed,
        "ngram_sizes": list(space.ngram_sizes),
        "min_count": space.min_count,
        "n_sparse": space.n_sparse,
        "n_features": space.n_features,
        "vocab_sha256": space.vocab_hash(),
        "provenance_sha256": artifact.provenance,
        "dense": None
        if space.dense is None
        else {"names": list(space.dense.names), "mean": space.dense.mean.tolist(), "std": space.dense.std.tolist()},
        "final_loss": artifact.loss_history[-1] if artifact.loss_history else None,
        "grad_norm": artifact.grad_norm,
    }
    vocab = sorted(space.vocabulary, key=space.vocabulary.__getitem__)
    buf = io.BytesIO()
    buf.write(f"{FORMAT_MAGIC} {FORMAT_VERSION}\n".encode())
    buf.write(json.dumps(header, sort_keys=True).encode() + b"\n")
    for g in vocab:
        buf.write(json.dumps(g, ensure_ascii=False).encode("utf-8") + b"\n")
    values = np.append(artifact.weights, artifact.bias).astype("<f8")
    buf.write(f"weights {values.size}\n".encode())
    buf.write(values.tobytes())
    Path(path).write_bytes(buf.getvalue())


class ModelFormatError(ValueError):
    pass


def load_model(path: str | Path) -> ModelArtifact:
    data = Path(path).read_bytes()
    stream = io.BytesIO(data)
    magic = stream.readline().decode().split()
    if len(magic) != 2 or magic[0] != FORMAT_MAGIC:
        raise ModelFormatError(f"{path}: not a model file")
    if int(magic[1]) != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {magic[1]}")
    header = json.loads(stream.readline())
    vocab = {json.loads(stream.readline()): i for i in range(header["n_sparse"])}
    tag = stream.readline().decode().split()
    if len(tag) != 2 or tag[0] != "weights" or int(tag[1]) != header["n_features"] + 1:
        raise ModelFormatError(f"{path}: corrupt weight block")
    raw = stream.read()
    if len(raw) != 8 * int(tag[1]):
        raise ModelFormatError(f"{path}: truncated weight block")
    values = np.frombuffer(raw, dtype="<f8").astype(float)
    dense = None
    if header["dense"] is not None:
        d = header["dense"]
        dense = DenseBlock(tuple(d["names"]), np.asarray(d["mean"]), np.asarray(d["std"]))
    space = FeatureSpace(tuple(header["ngram_sizes"]), header["min_count"], vocab, dense)
    if space.vocab_hash() != header["vocab_sha256"]:
        raise ModelFormatError(f"{path}: vocabulary hash mismatch")
    config = TrainConfig(**header["config"])
    return ModelArtifact(values[:-1].copy(), float(values[-1]), space, config, header["provenance_sha256"],
                         [header["final_loss"]] if header["final_loss"] is not None else [], header["grad_norm"])


# ---------------------------------------------------------------------------
# Evaluation


def stratified_folds(labels: Sequence[int], k: int, seed: int) -> list[int]:
    """Fold index per example; each class is shuffled then dealt round-robin."""
    labels = list(labels)
    if k < 2:
        raise ValueError("k must be at least 2")
    fold = [0] * len(labels)
    rng = np.random.Generator(np.random.PCG64(seed))
    for cls in sorted(set(labels)):
        idx = [i for i, lab in enumerate(labels) if lab == cls]
        if k > len(idx):
            raise ValueError(f"k={k} exceeds the size of class {cls} ({len(idx)})")
        for pos, i in enumerate(rng.permutation(idx)):
            fold[int(i)] = pos % k
    return fold


@dataclass(frozen=True)
class CVResult:
    mean_accuracy: float
    fold_accuracies: tuple[float, ...]


def crossval_accuracy(
    docs: Sequence,
    labels: Sequence[int],
    k: int = 5,
    seed: int = 0,
    ngram_sizes: Iterable[int] = (1, 2),
    min_count: int = 2,
    config: TrainConfig | None = None,
    dense_rows: Sequence[Mapping[str, float | None]] | None = None,
    dense_names: Sequence[str] = (),
    use_ngrams: bool = True,
) -> CVResult:
    """Stratified k-fold accuracy; the feature space is rebuilt inside every fold."""
    folds = stratified_folds(labels, k, seed)
    y = np.asarray(labels, dtype=int)
    accs = []
    for f in range(k):
        tr = [i for i, g in enumerate(folds) if g != f]
        te = [i for i, g in enumerate(folds) if g == f]
        pick = lambda seq, idx: None if seq is None else [seq[i] for i in idx]
        model = fit_text_classifier(
            pick(docs, tr), y[tr], ngram_sizes, min_count, config, pick(dense_rows, tr), dense_names, use_ngrams
        )
        X = design_matrix(pick(docs, te), model.space, pick(dense_rows, te))
        accs.append(float(np.mean(model.predict(X) == y[te])))
    return CVResult(math.fsum(accs) / k, tuple(accs))


def top_features(artifact: ModelArtifact, n: int) -> tuple[list[tuple[str, float]], list[tuple[str, float]]]:
    """The ``n`` highest- and ``n`` lowest-weighted n-grams, ties by n-gram text."""
    vocab = artifact.space.vocabulary
    if n < 0 or n > len(vocab):
        raise ValueError(f"n={n} outside 0..{len(vocab)}")
    pairs = [(g, float(artifact.weights[j])) for g, j in vocab.items()]
    high = sorted(pairs, key=lambda gw: (-gw[1], gw[0]))[:n]
    low = sorted(pairs, key=lambda gw: (gw[1], gw[0]))[:n]
    return high, low


def precision_at_n(scores: Mapping[str, float], positive: Iterable[str], n: int) -> float:
    """Share of true positives among the ``n`` highest scores, ties by id."""
    if n < 1 or n > len(scores):
        raise ValueError(f"N={n} outside 1..{len(scores)}")
    pos = set(positive)
    ranked = sorted(scores, key=lambda a: (-scores[a], a))
    return sum(1 for a in ranked[:n] if a in pos) / n


# ---------------------------------------------------------------------------
# Early identification


@dataclass(frozen=True)
class EarlyResult:
    ns: tuple[int, ...]
    model_precision: tuple[float, ...]
    baseline_precision: tuple[float, ...]
    validation_precision: tuple[float | None, ...]
    n_train: int
    n_validation: int
    n_test: int
    n_test_top: int


def split_authors(top: Sequence[str], bottom: Sequence[str], seed: int, fractions=(0.6, 0.2, 0.2)):
    """60/20/20 split inside each group; returns (train, val, test) author lists."""
    rng = np.random.Generator(np.random.PCG64(seed))
    out = ([], [], [])
    for group in (sorted(top), sorted(bottom)):
        perm = [group[int(i)] for i in rng.permutation(len(group))]
        n_tr = int(round(fractions[0] * len(perm)))
        n_va = int(round(fractions[1] * len(perm)))
        out[0].extend(perm[:n_tr])
        out[1].extend(perm[n_tr : n_tr + n_va])
        out[2].extend(perm[n_tr + n_va :])
    return tuple(sorted(x) for x in out)


def early_identification(
    records: Sequence,
    z: Mapping[str, float],
    ranking: Sequence[str],
    ns: Sequence[int] = (1, 5, 10),
    seed: int = 0,
    ngram_sizes: Iterable[int] = (1, 2),
    min_count: int = 2,
    config: TrainConfig | None = None,
) -> EarlyResult:
    """Identify skilled authors from their first justification.

    ``ranking`` lists authors best first; its first half is the positive
    class. The classifier trains on all justifications of training authors
    combined; validation and test authors contribute their earliest
    justification only. The baseline ranks test authors by the standardized
    Brier score of that same earliest forecast (lower is better).
    """
    half = len(ranking) // 2
    top, bottom = list(ranking[:half]), list(ranking[len(ranking) - half :])
    train, val, test = split_authors(top, bottom, seed)
    top_set = set(top)

    by_author: dict[str, list] = defaultdict(list)
    for r in records:
        if r.justification.strip():
            by_author[r.author_id].append(r)
    for recs in by_author.values():
        recs.sort(key=lambda r: (r.timestamp, r.record_id))

    train = [a for a in train if by_author.get(a)]
    docs = [[r.justification for r in by_author[a]] for a in train]
    labels = [1 if a in top_set else 0 for a in train]
    model = fit_text_classifier(docs, labels, ngram_sizes, min_count, config)

    def first_scores(authors):
        authors = [a for a in authors if by_author.get(a)]
        firsts = [by_author[a][0] for a in authors]
        probs = model.score_docs([r.justification for r in firsts]) if firsts else []
        return {a: float(p) for a, p in zip(authors, probs)}, {a: -z.get(r.record_id, 0.0) for a, r in zip(authors, firsts)}

    test_model, test_base = first_scores(test)
    val_model, _ = first_scores(val)
    for n in ns:
        if n > len(test_model):
            raise ValueError(f"N={n} exceeds the {len(test_model)} test authors")
    return EarlyResult(
        ns=tuple(ns),
        model_precision=tuple(precision_at_n(test_model, top_set, n) for n in ns),
        baseline_precision=tuple(precision_at_n(test_base, top_set, n) for n in ns),
        validation_precision=tuple(precision_at_n(val_model, top_set, n) if n <= len(val_model) else None for n in ns),
        n_train=len(train),
        n_validation=len(val_model),
        n_test=len(test_model),
        n_test_top=sum(1 for a in test_model if a in top_set),
    )


# ---------------------------------------------------------------------------
# Financial split


def financial_split(
    records: Sequence,
    labels: Mapping[str, int],
    eval_frac: float = 0.2,
    seed: int = 0,
    train_years: tuple[int, int] = (2014, 2016),
    dev_year: int = 2017,
    test_year: int = 2018,
) -> tuple[list, list, list]:
    """Company-disjoint, time-separated train/dev/test sets.

    Companies are shuffled with ``seed`` and the first ``eval_frac`` share
    becomes the evaluation group. Train keeps train-group records dated in
    ``train_years``; dev and test keep evaluation-group records from
    ``dev_year`` and ``test_year``. Dev and test are balanced by downsampling
    the majority label. Only records present in ``labels`` take part.
    """
    if not 0.0 < eval_frac < 1.0:
        raise ValueError("eval_frac must lie strictly between 0 and 1")
    labelled = [r for r in records if r.record_id in labels]
    companies = sorted({r.target_id for r in labelled})
    rng = np.random.Generator(np.random.PCG64(seed))
    shuffled = [companies[int(i)] for i in rng.permutation(len(companies))]
    n_eval = max(1, int(round(eval_frac * len(companies)))) if len(companies) > 1 else 0
    eval_cos = set(shuffled[:n_eval])

    def year(r) -> int:
        ts = r.timestamp
        return ts.year if isinstance(ts, datetime) else int(str(ts)[:4])

    lo, hi = train_years
    train = [r for r in labelled if r.target_id not in eval_cos and lo <= year(r) <= hi]
    dev = [r for r in labelled if r.target_id in eval_cos and year(r) == dev_year]
    test = [r for r in labelled if r.target_id in eval_cos and year(r) == test_year]

    def balance(rows):
        by_label = defaultdict(list)
        for r in sorted(rows, key=lambda r: r.record_id):
            by_label[labels[r.record_id]].append(r)
        if len(by_label) < 2:
            return []
        m = min(len(v) for v in by_label.values())
        kept = []
        for lab in sorted(by_label):
            group = by_label[lab]
            idx = sorted(int(i) for i in rng.permutation(len(group))[:m])
            kept.extend(group[i] for i in idx)
        return sorted(kept, key=lambda r: r.record_id)

    dev, test = balance(dev), balance(test)
    train.sort(key=lambda r: r.record_id)
    for name, part in (("train", train), ("dev", dev), ("test", test)):
        if not part:
            raise ValueError(f"{name} split is empty after filtering")
    return train, dev, test


def label_extremes(errors: Mapping[str, float], k: int) -> dict[str, int]:
    """1 for the ``k`` smallest errors, 0 for the ``k`` largest; ties by id."""
    if 2 * k > len(errors):
        raise ValueError(f"K={k} exceeds half of {len(errors)} forecasts")
    ordered = sorted(errors, key=lambda rid: (errors[rid], rid))
    out = {rid: 1 for rid in ordered[:k]}
    out.update({rid: 0 for rid in ordered[len(ordered) - k :]})
    return out
