"""Cost-sensitive multi-class domain classifier.

The model is a linear softmax over sparse features of the encoded domain:
character 1/2/3-gram counts, a one-hot of the TLD, a one-hot of the SLD
length and the scaled total length. It is trained with mini-batch Adam on
class-weighted cross-entropy, weights ``(N / N_i) ** gamma``.
"""

from __future__ import annotations

import json
import logging
import math
import random
import struct
from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from sesame.domain import ALPHABET, MAX_LEN, N_CODES, EncodedDomain, InvalidDomain, decode, encode, prepare

log = logging.getLogger(__name__)

GAMMA = 0.3
MAGIC = b"SESAMEM1"
FORMAT_VERSION = 1


class EmptyFamily(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


class InsufficientData(ValueError):
    pass


# --- data -------------------------------------------------------------------


@dataclass
class LabeledDataset:
    domains: list[str]
    labels: np.ndarray
    label_names: list[str]
    deterministic: list[bool]
    sources: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.domains) != len(self.labels):
            raise ValueError("domains and labels differ in length")
        if not self.sources:
            self.sources = [""] * len(self.domains)

    def __len__(self) -> int:
        return len(self.domains)

    @property
    def per_class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(self.label_names))

    @property
    def total(self) -> int:
        return len(self.domains)

    def subset(self, idx: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(
            domains=[self.domains[i] for i in idx],
            labels=self.labels[idx],
            label_names=self.label_names,
            deterministic=self.deterministic,
            sources=[self.sources[i] for i in idx],
        )


def _campaigns(fam) -> list[dict]:
    if fam.known_campaigns:
        return list(fam.known_campaigns)
    # families without tracked seeds (non-deterministic): one "campaign" per TLD
    if [p.name for p in fam.seed_schema] == ["tld"]:
        return [{"tld": t} for t in fam.tlds]
    raise EmptyFamily(f"{fam.name} has no campaigns to sample")


def _split_quota(total: int, parts: int) -> list[int]:
    base, rem = divmod(total, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def sample_family(fam, per_class_target: int, end: date, rng: random.Random) -> list[tuple[str, str]]:
    """(domain, seed_id) pairs: equal share per campaign, dates drawn uniformly."""
    out: list[tuple[str, str]] = []
    seen: set[str] = set()
    camps = _campaigns(fam)
    for camp, quota in zip(camps, _split_quota(per_class_target, len(camps))):
        sid = fam.seed_id(camp)
        got = 0
        if fam.date_dependent:
            span = max((end - fam.first_seen).days, 0)
            stale = 0
            while got < quota and stale < 20:
                day = fam.first_seen + timedelta(days=rng.randint(0, span))
                before = got
                for d in fam.generate(camp, day, min(fam.default_count, quota - got)):
                    if d.normalized not in seen and got < quota:
                        seen.add(d.normalized)
                        out.append((d.normalized, sid))
                        got += 1
                stale = stale + 1 if got == before else 0
        else:
            for d in fam.generate(camp, None, quota):
                if d.normalized not in seen and got < quota:
                    seen.add(d.normalized)
                    out.append((d.normalized, sid))
                    got += 1
    if not out:
        raise EmptyFamily(f"{fam.name} generated no domains")
    return out


def build_training_set(
    zoo_families: Sequence,
    benign_source: Iterable[str],
    per_class_target: int = 5000,
    end: date | None = None,
    seed: int = 0,
    benign_name: str = "benign",
) -> LabeledDataset:
    """Per class ``min(per_class_target, available unique)`` domains, benign last.

    Benign domains are the first ``per_class_target`` valid lines of the source.
    """
    rng = random.Random(seed)
    end = end or date(2025, 12, 31)
    domains, labels, sources = [], [], []
    names, det = [], []
    for i, fam in enumerate(zoo_families):
        for dom, sid in sample_family(fam, per_class_target, end, rng):
            domains.append(dom)
            labels.append(i)
            sources.append(sid)
        names.append(fam.name)
        det.append(fam.deterministic)
    b = len(names)
    seen: set[str] = set()
    for raw in benign_source:
        if len(seen) >= per_class_target:
            break
        try:
            dom = prepare(raw).normalized
        except InvalidDomain:
            continue
        if dom in seen:
            continue
        seen.add(dom)
        domains.append(dom)
        labels.append(b)
        sources.append("benign")
    if not seen:
        raise EmptyFamily("benign source yielded no domains")
    names.append(benign_name)
    det.append(True)
    return LabeledDataset(domains, np.array(labels), names, det, sources)


def compute_class_weights(counts: Sequence[int] | LabeledDataset, gamma: float = GAMMA) -> np.ndarray:
    if isinstance(counts, LabeledDataset):
        counts = counts.per_class_counts
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts <= 0):
        raise ValueError("every class needs at least one sample")
    return (counts.sum() / counts) ** gamma


# --- features ---------------------------------------------------------------

N1 = N_CODES - 1
NGRAM_DIMS = (N1, N1**2, N1**3)
NGRAM_OFFSETS = (0, N1, N1 + N1**2)
N_NGRAM = sum(NGRAM_DIMS)
N_LEN_BUCKETS = MAX_LEN + 1


@dataclass(frozen=True)
class FeatureSchema:
    tld_vocab: tuple[str, ...]

    @property
    def n_features(self) -> int:
        # n-grams | tld one-hot (+ other) | sld-length one-hot | scaled length
        return N_NGRAM + len(self.tld_vocab) + 1 + N_LEN_BUCKETS + 1

    def featurize(self, items: Sequence[EncodedDomain | str]) -> sp.csr_matrix:
        tld_index = {t: i for i, t in enumerate(self.tld_vocab)}
        tld_base = N_NGRAM
        len_base = tld_base + len(self.tld_vocab) + 1
        scalar = len_base + N_LEN_BUCKETS
        rows, cols, vals = [], [], []
        for r, item in enumerate(items):
            enc = item if isinstance(item, EncodedDomain) else encode(item)
            text = decode(enc)
            c = [x - 1 for x in enc.codes[: enc.length]]
            feats: Counter[int] = Counter()
            for n, off in zip((1, 2, 3), NGRAM_OFFSETS):
                for i in range(len(c) - n + 1):
                    idx = 0
                    for x in c[i : i + n]:
                        idx = idx * N1 + x
                    feats[off + idx] += 1
            tld = text.rsplit(".", 1)[-1] if "." in text else ""
            sld = text.rsplit(".", 1)[0].rsplit(".", 1)[-1]
            feats[tld_base + tld_index.get(tld, len(self.tld_vocab))] += 1
            feats[len_base + min(len(sld), MAX_LEN)] += 1
            for k in sorted(feats):
                rows.append(r)
                cols.append(k)
                vals.append(float(feats[k]))
            rows.append(r)
            cols.append(scalar)
            vals.append(enc.length / MAX_LEN)
        return sp.csr_matrix(
            (np.array(vals), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
            shape=(len(items), self.n_features),
        )


def schema_for(domains: Iterable[str]) -> FeatureSchema:
    return FeatureSchema(tuple(sorted({d.rsplit(".", 1)[-1] for d in domains})))


# --- model ------------------------------------------------------------------


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    epochs: int = 8
    batch_size: int = 256
    learning_rate: float = 0.02
    l2: float = 1e-6
    val_fraction: float = 0.3
    gamma: float = GAMMA


@dataclass
class LinearModel:
    """Trained artifact; immutable after training, safe to share across threads."""

    label_names: list[str]
    deterministic: list[bool]
    schema: FeatureSchema
    W: np.ndarray
    b: np.ndarray
    charset: str = ALPHABET

    def scores(self, items: Sequence[EncodedDomain | str]) -> np.ndarray:
        X = self.schema.featurize(items)
        return np.asarray(X @ self.W) + self.b

    def predict_proba(self, items: Sequence[EncodedDomain | str]) -> np.ndarray:
        if len(items) == 0:
            return np.zeros((0, len(self.label_names)))
        return softmax(self.scores(items))

    def predict(self, items: Sequence[EncodedDomain | str]) -> np.ndarray:
        # argmax returns the first maximum: ties go to the lowest label index
        return np.argmax(self.predict_proba(items), axis=1)

    def to_bytes(self) -> bytes:
        header = {
            "format_version": FORMAT_VERSION,
            "charset": self.charset,
            "labels": self.label_names,
            "deterministic": self.deterministic,
            "feature_schema": {
                "ngrams": [1, 2, 3],
                "max_len": MAX_LEN,
                "tld_vocab": list(self.schema.tld_vocab),
                "length_buckets": N_LEN_BUCKETS,
            },
            "W_shape": list(self.W.shape),
            "b_shape": list(self.b.shape),
            "dtype": "<f8",
        }
        hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        return (
            MAGIC
            + struct.pack("<I", len(hb))
            + hb
            + self.W.astype("<f8").tobytes(order="C")
            + self.b.astype("<f8").tobytes(order="C")
        )

    @classmethod
    def from_bytes(cls, blob: bytes) -> "LinearModel":
        if blob[:8] != MAGIC:
            raise ValueError("not a model file")
        (hlen,) = struct.unpack("<I", blob[8:12])
        header = json.loads(blob[12 : 12 + hlen])
        if header["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {header['format_version']}")
        if header["charset"] != ALPHABET:
            raise ValueError("model was trained with a different character table")
        off = 12 + hlen
        wn = math.prod(header["W_shape"])
        W = np.frombuffer(blob, dtype="<f8", count=wn, offset=off).reshape(header["W_shape"]).copy()
        b = np.frombuffer(blob, dtype="<f8", count=math.prod(header["b_shape"]), offset=off + 8 * wn).copy()
        return cls(
            label_names=header["labels"],
            deterministic=header["deterministic"],
            schema=FeatureSchema(tuple(header["feature_schema"]["tld_vocab"])),
            W=W,
            b=b,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "LinearModel":
        return cls.from_bytes(Path(path).read_bytes())


def predict_proba(model: LinearModel, d: EncodedDomain | str) -> np.ndarray:
    return model.predict_proba([d])[0]


def train(
    ds: LabeledDataset,
    weights: np.ndarray | None = None,
    config: TrainConfig = TrainConfig(),
    X: sp.csr_matrix | None = None,
) -> LinearModel:
    """Train on a 0.7/0.3 split and keep the epoch with the best held-out weighted F1."""
    if len(ds) == 0:
        raise InsufficientData("empty dataset")
    n_classes = len(ds.label_names)
    if weights is None:
        counts = np.maximum(ds.per_class_counts, 1)
        weights = compute_class_weights(counts, config.gamma)
    schema = schema_for(ds.domains)
    if X is None:
        X = schema.featurize(ds.domains)
    y = ds.labels
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(ds))
    n_val = int(round(config.val_fraction * len(ds))) if len(ds) >= 10 else 0
    val_idx, tr_idx = np.sort(perm[:n_val]), perm[n_val:]
    Xtr, ytr = X[tr_idx], y[tr_idx]
    wtr = weights[ytr]

    n_feat = X.shape[1]
    W = np.zeros((n_feat, n_classes))
    b = np.zeros(n_classes)
    mW, vW = np.zeros_like(W), np.zeros_like(W)
    mb, vb = np.zeros_like(b), np.zeros_like(b)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    t = 0
    best = (-1.0, W.copy(), b.copy())
    for epoch in range(config.epochs):
        order = rng.permutation(len(tr_idx))
        total_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            bi = order[start : start + config.batch_size]
            xb, yb, wb = Xtr[bi], ytr[bi], wtr[bi]
            z = np.asarray(xb @ W) + b
            p = softmax(z)
            norm = wb.sum()
            total_loss += float(-(wb * np.log(p[np.arange(len(bi)), yb] + 1e-300)).sum() / norm)
            g = p
            g[np.arange(len(bi)), yb] -= 1.0
            g *= (wb / norm)[:, None]
            gW = np.asarray(xb.T @ g) + config.l2 * W
            gb = g.sum(axis=0)
            t += 1
            mW = beta1 * mW + (1 - beta1) * gW
            vW = beta2 * vW + (1 - beta2) * gW * gW
            mb = beta1 * mb + (1 - beta1) * gb
            vb = beta2 * vb + (1 - beta2) * gb * gb
            lr_t = config.learning_rate * math.sqrt(1 - beta2**t) / (1 - beta1**t)
            W -= lr_t * mW / (np.sqrt(vW) + eps)
            b -= lr_t * mb / (np.sqrt(vb) + eps)
        if not math.isfinite(total_loss) or not np.all(np.isfinite(W)):
            raise DivergenceError(f"non-finite loss at epoch {epoch}")
        if n_val:
            pred = np.argmax(np.asarray(X[val_idx] @ W) + b, axis=1)
            f1 = compute_metrics(confusion_matrix(y[val_idx], pred, n_classes)).weighted_f1
        else:
            f1 = float(epoch)
        log.debug("epoch %d loss %.4f val-F1 %.4f", epoch, total_loss, f1)
        if f1 > best[0]:
            best = (f1, W.copy(), b.copy())
    return LinearModel(list(ds.label_names), list(ds.deterministic), schema, best[1], best[2])


# --- evaluation -------------------------------------------------------------


@dataclass(frozen=True)
class EvalMetrics:
    overall_accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    confusion_matrix: np.ndarray
    zero_division: tuple[int, ...] = ()

    def as_dict(self) -> dict:
        d = asdict(self)
        d["confusion_matrix"] = self.confusion_matrix.tolist()
        d["zero_division"] = list(self.zero_division)
        return d


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def compute_metrics(cm: np.ndarray, per_class_counts: Sequence[int] | None = None) -> EvalMetrics:
    """Overall accuracy and N_i/N-weighted precision, recall and F1.

    Rows are true classes, columns predictions. Classes whose ratio has a
    zero denominator contribute 0 and are listed in ``zero_division``.
    """
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError("confusion matrix must be square")
    tp = np.diag(cm).astype(float)
    fn = cm.sum(axis=1) - tp
    fp = cm.sum(axis=0) - tp
    n_i = np.asarray(per_class_counts, dtype=float) if per_class_counts is not None else tp + fn
    n = n_i.sum()
    zero = set()

    def ratio(num, den):
        out = np.zeros_like(num)
        ok = den > 0
        out[ok] = num[ok] / den[ok]
        zero.update(int(i) for i in np.flatnonzero(~ok & (n_i > 0)))
        return out

    acc = tp.sum() / (tp + fn).sum() if (tp + fn).sum() else 0.0
    w = n_i / n if n else np.zeros_like(n_i)
    precision = float((ratio(tp, tp + fp) * w).sum())
    recall = float((ratio(tp, tp + fn) * w).sum())
    f1 = float((ratio(2 * tp, 2 * tp + fp + fn) * w).sum())
    return EvalMetrics(float(acc), precision, recall, f1, cm, tuple(sorted(zero)))


def fold_assignment(ds: LabeledDataset, k: int = 5, seed: int = 0) -> tuple[list[np.ndarray], np.ndarray]:
    """Validation folds plus the indices of classes too small to validate.

    Entries are put in a canonical order before the seeded shuffle, so the
    folds depend on content, not on input order.
    """
    counts = ds.per_class_counts
    rare = {c for c in range(len(counts)) if 0 < counts[c] < k}
    eligible = [i for i in range(len(ds)) if ds.labels[i] not in rare]
    if len(eligible) < k:
        raise InsufficientData(f"need at least {k} entries, have {len(eligible)}")
    eligible.sort(key=lambda i: (ds.domains[i], int(ds.labels[i]), ds.sources[i]))
    rng = np.random.default_rng(seed)
    shuffled = np.asarray(eligible, dtype=np.int64)[rng.permutation(len(eligible))]
    folds = [np.sort(f) for f in np.array_split(shuffled, k)]
    rare_idx = np.array([i for i in range(len(ds)) if ds.labels[i] in rare], dtype=np.int64)
    if rare:
        log.info("classes %s have fewer than %d members; kept in training folds only", sorted(rare), k)
    return folds, rare_idx


@dataclass
class CVResult:
    folds: list[EvalMetrics]
    mean: EvalMetrics


def mean_metrics(folds: Sequence[EvalMetrics]) -> EvalMetrics:
    return EvalMetrics(
        overall_accuracy=float(np.mean([m.overall_accuracy for m in folds])),
        weighted_precision=float(np.mean([m.weighted_precision for m in folds])),
        weighted_recall=float(np.mean([m.weighted_recall for m in folds])),
        weighted_f1=float(np.mean([m.weighted_f1 for m in folds])),
        confusion_matrix=sum(m.confusion_matrix for m in folds),
        zero_division=tuple(sorted({z for m in folds for z in m.zero_division})),
    )


def k_fold_cv(
    ds: LabeledDataset,
    k: int = 5,
    config: TrainConfig = TrainConfig(),
    split_seed: int = 0,
    predictions: list | None = None,
) -> CVResult:
    """k-fold CV; fold models are discarded, fold metrics averaged.

    If ``predictions`` is a list, (dataset index, predicted label) pairs of
    every validation entry are appended to it.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    folds, rare_idx = fold_assignment(ds, k, split_seed)
    n_classes = len(ds.label_names)
    results = []
    for f, val in enumerate(folds):
        train_idx = np.concatenate([g for j, g in enumerate(folds) if j != f] + [rare_idx])
        sub = ds.subset(np.sort(train_idx))
        # weights from the full label set; absent classes get weight of a singleton
        counts = np.maximum(sub.per_class_counts, 1)
        model = train(sub, compute_class_weights(counts, config.gamma), config)
        pred = model.predict([ds.domains[i] for i in val])
        if predictions is not None:
            predictions.extend(zip(val.tolist(), pred.tolist()))
        results.append(compute_metrics(confusion_matrix(ds.labels[val], pred, n_classes)))
    return CVResult(results, mean_metrics(results))
