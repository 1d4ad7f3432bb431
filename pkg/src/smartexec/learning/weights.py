"""The ``weights.dat`` bundle: all three trained models plus their normalizer.

Layout (line oriented, ``#`` starts a comment)::

    hpxml-weights v1
    features bias threads iterations total_ops float_ops comparison_ops loop_level
    normalizer <feature> <log10p1:0|1> <mean> <stddev>      (x6)
    binary policy <7 numbers>
    multinomial chunk classes 0.001 0.01 0.10 0.50
    row <7 numbers>                                          (x4, last all zero)
    multinomial prefetch classes 1 5 10 100 500
    row <7 numbers>                                          (x5, last all zero)

Numbers are written with 17 significant digits so a load reproduces every
weight bit for bit.  The binary model's class order is fixed by the format:
class 0 is ``seq`` and class 1 is ``par``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from smartexec.learning.data import CHUNK_CLASSES, PREFETCH_CLASSES
from smartexec.learning.logistic import BinaryModel, MultinomialModel
from smartexec.learning.normalize import Normalizer
from smartexec.loopir import FEATURE_NAMES

MAGIC = "hpxml-weights"
FORMAT_VERSION = 1
N_FEATURES = len(FEATURE_NAMES)


class WeightsFormatError(ValueError):
    pass


@dataclass(frozen=True)
class WeightsBundle:
    policy_model: BinaryModel
    chunk_model: MultinomialModel
    prefetch_model: MultinomialModel
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        _check_classes("chunk", self.chunk_model.class_names, CHUNK_CLASSES)
        _check_classes("prefetch", self.prefetch_model.class_names, PREFETCH_CLASSES)
        norms = {self.policy_model.normalizer, self.chunk_model.normalizer,
                 self.prefetch_model.normalizer}
        if len(norms) != 1:
            raise ValueError("all models in a bundle must share one normalizer")
        for m in (self.chunk_model, self.prefetch_model):
            if m.W.shape[1] != N_FEATURES or np.any(m.W[-1] != 0):
                raise ValueError("multinomial reference row must be all zero")
        if self.policy_model.w.shape != (N_FEATURES,):
            raise ValueError(f"binary weights must have length {N_FEATURES}")

    @property
    def normalizer(self) -> Normalizer:
        return self.policy_model.normalizer


def _same_classes(got, expected) -> bool:
    try:
        return len(got) == len(expected) and all(
            float(a) == float(b) for a, b in zip(got, expected))
    except ValueError:
        return False


def _check_classes(what, got, expected):
    if not _same_classes(got, expected):
        raise ValueError(f"{what} classes must be {' '.join(expected)}, got {' '.join(got)}")


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def format_weights(bundle: WeightsBundle) -> str:
    n = bundle.normalizer
    lines = [f"{MAGIC} v{bundle.format_version}", "features " + " ".join(FEATURE_NAMES)]
    for name, lg, mean, std in zip(FEATURE_NAMES[1:], n.log10p1, n.mean, n.stddev):
        lines.append(f"normalizer {name} {int(lg)} {_fmt(mean)} {_fmt(std)}")
    lines.append("binary policy " + " ".join(map(_fmt, bundle.policy_model.w)))
    for tag, model, classes in (("chunk", bundle.chunk_model, CHUNK_CLASSES),
                                ("prefetch", bundle.prefetch_model, PREFETCH_CLASSES)):
        lines.append(f"multinomial {tag} classes " + " ".join(classes))
        lines.extend("row " + " ".join(map(_fmt, row)) for row in model.W)
    return "\n".join(lines) + "\n"


def save_weights(bundle: WeightsBundle, path) -> None:
    Path(path).write_text(format_weights(bundle), encoding="utf-8")


class _Lines:
    def __init__(self, text: str, source: str):
        self.source = source
        self.items = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            body = raw.split("#", 1)[0].split()
            if body:
                self.items.append((lineno, body))
        self.pos = 0

    def error(self, msg: str, lineno: int | None = None) -> WeightsFormatError:
        where = f"{self.source}:{lineno}" if lineno else self.source
        return WeightsFormatError(f"{where}: {msg}")

    def next(self, *prefix: str):
        if self.pos >= len(self.items):
            raise self.error(f"unexpected end of file, expected {' '.join(prefix)!r}")
        lineno, words = self.items[self.pos]
        self.pos += 1
        if tuple(words[:len(prefix)]) != prefix:
            raise self.error(f"expected line starting with {' '.join(prefix)!r}", lineno)
        return lineno, words[len(prefix):]

    def numbers(self, lineno: int, words, count: int) -> list[float]:
        if len(words) != count:
            raise self.error(f"expected {count} values, found {len(words)}", lineno)
        try:
            values = [float(w) for w in words]
        except ValueError as exc:
            raise self.error(str(exc), lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise self.error("non-finite value", lineno)
        return values


def parse_weights(text: str, source: str = "<weights>") -> WeightsBundle:
    lines = _Lines(text, source)
    lineno, rest = lines.next(MAGIC)
    if rest != [f"v{FORMAT_VERSION}"]:
        raise lines.error(f"unsupported version {' '.join(rest)!r}", lineno)
    lineno, rest = lines.next("features")
    if tuple(rest) != FEATURE_NAMES:
        raise lines.error("feature list does not match " + " ".join(FEATURE_NAMES), lineno)

    log_flags, means, stds = [], [], []
    for name in FEATURE_NAMES[1:]:
        lineno, rest = lines.next("normalizer", name)
        if not rest or rest[0] not in ("0", "1"):
            raise lines.error("log10p1 flag must be 0 or 1", lineno)
        mean, std = lines.numbers(lineno, rest[1:], 2)
        if std <= 0:
            raise lines.error("stddev must be positive", lineno)
        log_flags.append(rest[0] == "1")
        means.append(mean)
        stds.append(std)
    normalizer = Normalizer(tuple(log_flags), tuple(means), tuple(stds))

    lineno, rest = lines.next("binary", "policy")
    policy = BinaryModel(np.array(lines.numbers(lineno, rest, N_FEATURES)), normalizer)

    models = []
    for tag, classes in (("chunk", CHUNK_CLASSES), ("prefetch", PREFETCH_CLASSES)):
        lineno, rest = lines.next("multinomial", tag, "classes")
        if not _same_classes(rest, classes):
            raise lines.error(f"{tag} classes must be {' '.join(classes)}", lineno)
        rows = []
        for _ in classes:
            lineno, rest = lines.next("row")
            rows.append(lines.numbers(lineno, rest, N_FEATURES))
        if any(v != 0.0 for v in rows[-1]):
            raise lines.error(f"{tag}: last (reference) row must be all zero", lineno)
        models.append(MultinomialModel(np.array(rows), classes, normalizer))

    if lines.pos != len(lines.items):
        raise lines.error("trailing content", lines.items[lines.pos][0])
    return WeightsBundle(policy, models[0], models[1])


def load_weights(path) -> WeightsBundle:
    path = Path(path)
    return parse_weights(path.read_text(encoding="utf-8"), str(path))


def zero_bundle() -> WeightsBundle:
    """All-zero weights with an identity normalizer; every decision hits its tie rule."""
    norm = Normalizer.identity()
    return WeightsBundle(
        BinaryModel(np.zeros(N_FEATURES), norm),
        MultinomialModel(np.zeros((len(CHUNK_CLASSES), N_FEATURES)), CHUNK_CLASSES, norm),
        MultinomialModel(np.zeros((len(PREFETCH_CLASSES), N_FEATURES)), PREFETCH_CLASSES, norm),
    )
