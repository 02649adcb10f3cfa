"""Matplotlib figure rendering for report output."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

KIND_NAMES = {
    "more_than_one_word": "more than one word",
    "missing_word": "missing word",
    "bracket_unmatched": "bracket unmatched",
    "other": "other",
    "over_generation": "over generation",
    "word_mismatch": "word mismatch",
    "prediction_failure": "prediction failure",
}


def _labelled(counter) -> tuple[list[str], list[int]]:
    items = [(KIND_NAMES.get(k, k), v) for k, v in sorted(counter.items()) if v > 0]
    return [k for k, _ in items], [v for _, v in items]


def save_invalid_kind_pie(counter, path: str | Path, title: str = "Invalid tree distribution") -> bool:
    labels, values = _labelled(counter)
    if not values:
        return False
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.pie(values, labels=labels, autopct="%1.0f%%", startangle=90)
    ax.set_title(title)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return True


def save_unfaithful_kind_bars(counter, path: str | Path, title: str = "Unfaithful tree kinds") -> bool:
    labels, values = _labelled(counter)
    if not values:
        return False
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, values, color="#4878a8")
    ax.set_ylabel("sentences")
    ax.set_title(title)
    plt.setp(ax.get_xticklabels(), rotation=20, ha="right")
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return True


def save_domain_f1_bars(rows, path: str | Path, title: str = "Valid vs overall F1") -> bool:
    groups = [r.group for r in rows]
    if not groups:
        return False
    valid = [r.score.valid_f1 for r in rows]
    overall = [r.score.overall_f1 for r in rows]
    x = range(len(groups))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(6, len(groups) * 1.2), 4))
    ax.bar([i - width / 2 for i in x], valid, width, label="valid F1", color="#4878a8")
    ax.bar([i + width / 2 for i in x], overall, width, label="overall F1", color="#d1605e")
    ax.set_xticks(list(x))
    ax.set_xticklabels(groups, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("F1")
    ax.set_title(title)
    ax.legend()
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return True


def save_length_f1_curve(
    buckets: Sequence[tuple[str, object]],
    path: str | Path,
    title: str = "F1 by input length",
) -> bool:
    points = [(label, score.overall_f1) for label, score in buckets if score is not None]
    if not points:
        return False
    labels = [p[0] for p in points]
    values = [p[1] for p in points]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(labels, values, marker="o", color="#4878a8")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("overall F1")
    ax.set_xlabel("sentence length")
    ax.set_title(title)
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return True


def save_span_length_f1(
    buckets: Sequence[tuple[str, float, float, float, int]],
    path: str | Path,
    title: str = "F1 by span length",
) -> bool:
    if not buckets:
        return False
    labels = [b[0] for b in buckets]
    values = [b[3] for b in buckets]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(labels, values, marker="s", color="#6a9f58")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("F1")
    ax.set_xlabel("span length")
    ax.set_title(title)
    plt.setp(ax.get_xticklabels(), rotation=45, ha="right")
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return True
