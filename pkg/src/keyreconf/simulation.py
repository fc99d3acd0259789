"""Monte-Carlo validation of the closed-form model.

A simulated typist walks a password over a shuffled layout and accrues
keystroke plus scan time; its deterministic mode reproduces the expected
entry time formula exactly (both evaluate in exact rationals).  A simulated
observer who knows the shuffling scheme attacks random passwords; its exact
enumeration mode reproduces the guess-probability formula, and its sampling
mode brackets it.  Entry rate and error metrics match the text-entry
definitions used throughout: one word is five characters including spaces,
and the error rate is edit distance over stimulus length.
"""
from __future__ import annotations

import collections
import csv
import io
import json
import math
import random
import statistics
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .layout import KeyboardLayout, KeyId
from .security_model import TimingParams
from .shuffle import (FullShuffle, RegionShuffle, RowShuffle, Seed,
                      ShuffledLayout, ShuffleStrategy, derive_seed, shuffle)
from . import shuffle as shuffle_mod

EXACT_FULL_ENUM_CAP = 200_000


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class SimulatedTypist:
    timing: TimingParams
    scan_policy: str = "row_major"  # or "random"; orders inspections only
    mode: str = "expected"  # "expected" | "stochastic"

    def __post_init__(self):
        if self.scan_policy not in ("row_major", "random"):
            raise InputError(f"unknown scan policy {self.scan_policy!r}")
        if self.mode not in ("expected", "stochastic"):
            raise InputError(f"unknown mode {self.mode!r}")

    @property
    def alpha(self) -> float:
        return self.timing.alpha


@dataclass(frozen=True)
class Observer:
    knows_strategy: bool = True
    inference: str = "perfect"

    def __post_init__(self):
        if not self.knows_strategy or self.inference != "perfect":
            raise InputError("only the perfect, strategy-aware observer is modeled")


@dataclass(frozen=True)
class TrialResult:
    stimulus: str
    response: str
    duration_s: float
    keystrokes: tuple[tuple[float, KeyId], ...]  # (t_ms, physical key)
    mean_candidates: float  # mean per-character scan-set size


@dataclass(frozen=True)
class Metrics:
    wpm: float
    cer: float


# ---------------------------------------------------------------------------
# Typist


def _legend_sources(layout: KeyboardLayout, group: frozenset[KeyId]) -> dict[str, KeyId]:
    sources: dict[str, KeyId] = {}
    for key in sorted(layout.keys, key=lambda k: (k.id not in group,) + layout.sort_key(k.id)):
        sources.setdefault(key.default_legend, key.id)
    return sources


def simulate_entry(typist: SimulatedTypist, shuffled: ShuffledLayout,
                   password: str, seed: Seed = 0) -> TrialResult:
    """Type ``password`` on the shuffled layout and account the time.

    Cost model per character: the first always pays a full scan of its
    candidate set (k keys at DT each) plus a keystroke; later characters are
    recalled with probability alpha (keystroke only) or rescanned in full.
    Expected mode replaces the recall draws with their expectation, which
    lands exactly on the closed-form entry time.  No typing errors are
    injected; the model accounts time, not mistakes.
    """
    layout = shuffled.base
    sources = _legend_sources(layout, shuffled.group)
    inverse = {src: phys for phys, src in shuffled.perm.items()}

    kt = Fraction(typist.timing.kt_s)
    dt = Fraction(typist.timing.dt_s)
    alpha = Fraction(typist.timing.alpha)
    rng = random.Random(int(seed) & (2**64 - 1))

    t = Fraction(0)
    keystrokes: list[tuple[float, KeyId]] = []
    candidate_sizes: list[int] = []
    for i, char in enumerate(password):
        source = sources.get(char)
        if source is None:
            raise InputError(f"character {char!r} has no key in layout {layout.name!r}")
        physical = inverse.get(source, source)
        k_i = len(shuffled.orbit_of(source)) if source in shuffled.group else 1
        candidate_sizes.append(k_i)
        if i == 0:
            t += k_i * dt
        elif typist.mode == "expected":
            t += (1 - alpha) * (k_i * dt)
        else:
            if rng.random() >= typist.timing.alpha:
                t += k_i * dt
        t += kt
        keystrokes.append((float(t * 1000), physical))

    response = "".join(shuffle_mod.decode_press(shuffled, phys) for _, phys in keystrokes)
    return TrialResult(
        stimulus=password,
        response=response,
        duration_s=float(t),
        keystrokes=tuple(keystrokes),
        mean_candidates=statistics.fmean(candidate_sizes) if candidate_sizes else 0.0,
    )


# ---------------------------------------------------------------------------
# Observer


@dataclass(frozen=True)
class ObserverEstimate:
    p: float
    trials: int
    exact: bool
    ci95: tuple[float, float]


def _orbit_sizes(strategy: ShuffleStrategy, group: Sequence[KeyId],
                 layout: KeyboardLayout | None) -> list[int]:
    """Per-key candidate-set size the observer faces, aligned with ``group``."""
    members = sorted(set(group))
    if isinstance(strategy, FullShuffle):
        return [len(members)] * len(members)
    if layout is None:
        raise InputError("row and region strategies need the layout to size orbits")
    shuffled = shuffle(layout, frozenset(members), strategy, seed=0)
    return [len(shuffled.orbit_of(k)) for k in members]


def observer_attack(strategy: ShuffleStrategy, group: Sequence[KeyId], n: int,
                    trials: int = 0, seed: Seed = 0, *,
                    layout: KeyboardLayout | None = None,
                    mode: str = "auto",
                    full_enum_cap: int = EXACT_FULL_ENUM_CAP) -> ObserverEstimate:
    """Success probability of a strategy-aware observer guessing the password.

    Exact mode enumerates the password space (up to ``full_enum_cap``
    passwords; independence composes longer ones) in rational arithmetic.
    Sampling mode draws passwords and observer guesses with a seeded PCG64
    stream and reports a 95% binomial interval.
    """
    if n < 1:
        raise InputError("password length must be >= 1")
    sizes = _orbit_sizes(strategy, group, layout)
    g = len(sizes)
    if g == 0:
        raise InputError("observer group is empty")

    if mode == "auto":
        mode = "exact" if g**n <= 10**6 else "sample"

    if mode == "exact":
        p = _exact_success(sizes, n, full_enum_cap)
        return ObserverEstimate(p=float(p), trials=0, exact=True, ci95=(float(p), float(p)))
    if mode != "sample":
        raise InputError(f"unknown observer mode {mode!r}")
    if trials < 1:
        raise InputError("sampling mode needs trials >= 1")
    hits = _sample_success(sizes, n, trials, seed)
    p_hat = hits / trials
    half = 1.96 * math.sqrt(max(p_hat * (1 - p_hat), 0.0) / trials)
    return ObserverEstimate(p=p_hat, trials=trials, exact=False,
                            ci95=(max(0.0, p_hat - half), min(1.0, p_hat + half)))


def _exact_success(sizes: Sequence[int], n: int, full_enum_cap: int) -> Fraction:
    g = len(sizes)
    if g**n <= full_enum_cap:
        # Enumerate every password; the observer matches a character with
        # probability 1/orbit.  Group terms by denominator to stay fast.
        counts: dict[int, int] = {}
        for pw in product(sizes, repeat=n):
            denom = math.prod(pw)
            counts[denom] = counts.get(denom, 0) + 1
        total = sum((Fraction(c, d) for d, c in sorted(counts.items())), Fraction(0))
        return total / g**n
    size_counts = collections.Counter(sizes)
    per_char = sum((Fraction(c, s) for s, c in sorted(size_counts.items())),
                   Fraction(0)) / g
    return per_char**n


def _sample_success(sizes: Sequence[int], n: int, trials: int, seed: Seed) -> int:
    rng = np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))
    inv = np.array([1.0 / s for s in sizes])
    hits = 0
    chunk = 1_000_000
    remaining = trials
    while remaining > 0:
        m = min(chunk, remaining)
        keys = rng.integers(0, len(sizes), size=(m, n))
        per_char = rng.random((m, n)) < inv[keys]
        hits += int(per_char.all(axis=1).sum())
        remaining -= m
    return hits


# ---------------------------------------------------------------------------
# Text-entry metrics


def wpm(response: str, duration_s: float) -> float:
    """Words per minute; one word is five consecutive characters.

    (chars / 5) / (minutes) folded into a single division, so the value is
    one rounding away from exact.
    """
    if duration_s <= 0:
        raise InputError("duration must be positive")
    return len(response) * 12.0 / duration_s


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance, single-row dynamic program."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def cer(stimulus: str, response: str) -> float:
    """Character error rate: edit distance over stimulus length."""
    if not stimulus:
        raise InputError("stimulus must be non-empty")
    return levenshtein(stimulus, response) / len(stimulus)


# ---------------------------------------------------------------------------
# Campaigns


@dataclass(frozen=True)
class TrialRow:
    strategy: str
    seed: int
    password_len: int
    k_eff: float
    duration_s: float
    wpm: float
    cer: float


@dataclass(frozen=True)
class CampaignReport:
    rows: tuple[TrialRow, ...]
    summary: Mapping[str, Mapping[str, float]]
    config: Mapping

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["strategy", "seed", "password_len", "k_eff",
                         "duration_s", "wpm", "cer"])
        for r in self.rows:
            writer.writerow([r.strategy, r.seed, r.password_len, repr(r.k_eff),
                             repr(r.duration_s), repr(r.wpm), repr(r.cer)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "config": dict(self.config),
            "summary": {k: dict(v) for k, v in self.summary.items()},
            "rows": [r.__dict__ for r in self.rows],
        }, sort_keys=True)


def strategy_label(strategy: ShuffleStrategy) -> str:
    if isinstance(strategy, RegionShuffle):
        return f"region{strategy.region_size}"
    return "row" if isinstance(strategy, RowShuffle) else "full"


def campaign(strategies: Sequence[ShuffleStrategy], typist: SimulatedTypist,
             passwords: Sequence[str], seeds: Sequence[Seed], *,
             layout: KeyboardLayout, group: frozenset[KeyId]) -> CampaignReport:
    """Run every (strategy, seed, password) trial and summarize per strategy.

    Trials are independent given their derived seeds, so they could fan out
    over workers; results are assembled in seed order either way.
    """
    if not strategies or not passwords or not seeds:
        raise InputError("strategies, passwords and seeds must be non-empty")
    rows: list[TrialRow] = []
    by_strategy: dict[str, list[TrialRow]] = {}
    for strategy in strategies:
        label = strategy_label(strategy)
        for seed in seeds:
            for p_idx, password in enumerate(passwords):
                shuffle_seed = derive_seed(seed, label, p_idx, "shuffle")
                typist_seed = derive_seed(seed, label, p_idx, "typist")
                shuffled = shuffle(layout, group, strategy, shuffle_seed)
                trial = simulate_entry(typist, shuffled, password, typist_seed)
                row = TrialRow(
                    strategy=label,
                    seed=int(seed),
                    password_len=len(password),
                    k_eff=trial.mean_candidates,
                    duration_s=trial.duration_s,
                    wpm=wpm(trial.response, trial.duration_s),
                    cer=cer(trial.stimulus, trial.response),
                )
                rows.append(row)
                by_strategy.setdefault(label, []).append(row)

    summary: dict[str, dict[str, float]] = {}
    for label, trials in by_strategy.items():
        wpms = [t.wpm for t in trials]
        durations = [t.duration_s for t in trials]
        summary[label] = {
            "trials": float(len(trials)),
            "wpm_mean": statistics.fmean(wpms),
            "wpm_sd": statistics.stdev(wpms) if len(wpms) > 1 else 0.0,
            "duration_mean": statistics.fmean(durations),
            "duration_sd": statistics.stdev(durations) if len(durations) > 1 else 0.0,
        }
    config = {
        "strategies": [strategy_label(s) for s in strategies],
        "mode": typist.mode,
        "alpha": typist.timing.alpha,
        "KT": typist.timing.kt_s,
        "DT": typist.timing.dt_s,
        "passwords": len(passwords),
        "seeds": [int(s) for s in seeds],
        "layout": layout.name,
        "group_size": len(group),
    }
    return CampaignReport(rows=tuple(rows), summary=summary, config=config)
