"""Monte-Carlo generation of trajectory prefixes.

Rational model entries are converted once to floats. Every batch is split
into fixed-size blocks of trajectory indices and block ``b`` draws from the
stream ``(seed, b)``, so results never depend on the number of workers.
"""

from __future__ import annotations

import csv
import json
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import accumulate
from typing import Callable, Iterable, Mapping, Sequence, TextIO

import numpy as np

from .chains import StochasticMatrix
from .trajectory import GlobalState, Trajectory

DEFAULT_STEP_BUDGET = 10**6
BLOCK_SIZE = 1024


class SamplingError(RuntimeError):
    """A site exhausted its step budget or a rejection loop gave up."""


class RNGStream:
    """Reproducible uniform stream keyed by ``(seed, stream)``.

    Philox is counter based, so each ``(seed, stream)`` pair names an
    independent sequence without any shared state between workers.
    """

    def __init__(self, seed: int, stream: int = 0, buffer: int = 4096):
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be nonnegative")
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
        self.seed = int(seed)
        self.stream = int(stream)
        self._gen = np.random.Generator(np.random.Philox(ss))
        self._size = buffer
        self._buf: list[float] = []
        self._pos = 0

    def uniform(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(self._size).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def choose(self, table: _Table) -> str:
        states, cdf = table
        i = bisect_right(cdf, self.uniform() * cdf[-1])
        return states[min(i, len(states) - 1)]


_Table = tuple[tuple[str, ...], list[float]]


def _table(law: Mapping) -> _Table:
    items = [(v, float(p)) for v, p in law.items() if p > 0]
    if not items:
        raise SamplingError("empty law")
    return tuple(v for v, _ in items), list(accumulate(p for _, p in items))


@dataclass(frozen=True)
class OmegaPrefix:
    """Observed finite prefix of a maximal trajectory started at ``start``."""

    start: GlobalState
    body: Trajectory
    sync_count: int
    truncated: bool = True

    @property
    def y_sequence(self) -> tuple[str, ...]:
        """Synchronization states ``Y_1, Y_2, ...`` seen in the body."""
        return self.body.q_sequence

    def to_json(self) -> dict:
        return {
            "start": list(self.start),
            "w1": list(self.body.w1),
            "w2": list(self.body.w2),
            "sync_count": self.sync_count,
            "truncated": self.truncated,
        }


def _run_site(rng: RNGStream, tables: Callable[[str], _Table], u: str, stop, budget: int) -> list[str]:
    path = []
    for _ in range(budget):
        v = rng.choose(tables(u))
        path.append(v)
        if v in stop:
            return path
        u = v
    raise SamplingError(f"step budget {budget} exhausted before reaching {sorted(stop)} (last state {u!r})")


class DirectSampler:
    """Samples elementary trajectories from the adapted family of a model.

    For open models (no shared states) the horizon of :meth:`sample_prefix`
    counts steps per site instead of synchronizations.
    """

    def __init__(self, model, step_budget: int = DEFAULT_STEP_BUDGET):
        self.model = model
        self.step_budget = step_budget
        self._tables: dict = {}

    @property
    def system(self):
        return self.model.system

    def _site_table(self, site: int, y: str, u: str) -> _Table:
        key = (site, y, u)
        t = self._tables.get(key)
        if t is None:
            t = self._tables[key] = _table(self.model.step_law(site, y, u))
        return t

    def _sync_table(self, alpha: GlobalState) -> _Table:
        key = ("sync", alpha)
        t = self._tables.get(key)
        if t is None:
            t = self._tables[key] = _table(self.model.sync_law(alpha))
        return t

    def draw_target(self, alpha: GlobalState, rng: RNGStream) -> str:
        return rng.choose(self._sync_table(alpha))

    def site_path(self, site: int, y: str, u: str, rng: RNGStream) -> list[str]:
        return _run_site(rng, lambda x: self._site_table(site, y, x), u, {y}, self.step_budget)

    def sample_elementary(self, alpha: GlobalState, rng: RNGStream) -> tuple[list[str], list[str]]:
        alpha = tuple(alpha)
        y = self.draw_target(alpha, rng)
        return self.site_path(1, y, alpha[0], rng), self.site_path(2, y, alpha[1], rng)

    def sample_prefix(self, start: GlobalState, horizon: int, rng: RNGStream) -> OmegaPrefix:
        start = tuple(start)
        if self.model.kind() == "open":
            return self._open_prefix(start, horizon, rng)
        w1: list[str] = []
        w2: list[str] = []
        alpha = start
        for _ in range(horizon):
            p1, p2 = self.sample_elementary(alpha, rng)
            w1 += p1
            w2 += p2
            alpha = (p1[-1], p2[-1])
        return OmegaPrefix(start, Trajectory(tuple(w1), tuple(w2), self.system), horizon)

    def _open_prefix(self, start, steps, rng) -> OmegaPrefix:
        words = []
        for site, u in ((1, start[0]), (2, start[1])):
            m = self.model.chain(site)
            path = []
            for _ in range(steps):
                key = ("open", site, u)
                t = self._tables.get(key)
                if t is None:
                    t = self._tables[key] = _table(m.row(u))
                u = rng.choose(t)
                path.append(u)
            words.append(tuple(path))
        return OmegaPrefix(start, Trajectory(words[0], words[1], self.system), 0)


class RejectionSampler:
    """Runs the two raw chains independently and keeps agreeing first hits."""

    def __init__(self, m1: StochasticMatrix, m2: StochasticMatrix, max_attempts: int = 10_000,
                 step_budget: int = DEFAULT_STEP_BUDGET):
        from .trajectory import DistributedSystem

        self.m1 = m1
        self.m2 = m2
        self.system = DistributedSystem(m1.index, m2.index)
        self.max_attempts = max_attempts
        self.step_budget = step_budget
        self._tables = {1: {u: _table(m1.row(u)) for u in m1.index}, 2: {u: _table(m2.row(u)) for u in m2.index}}
        self.attempts = 0
        self.accepted = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts if self.attempts else float("nan")

    def sample_elementary(self, alpha: GlobalState, rng: RNGStream) -> tuple[list[str], list[str]]:
        return self.sample_elementary_rejection(alpha, rng)

    def sample_elementary_rejection(self, alpha: GlobalState, rng: RNGStream) -> tuple[list[str], list[str]]:
        q = self.system.shared
        for _ in range(self.max_attempts):
            self.attempts += 1
            p1 = _run_site(rng, self._tables[1].__getitem__, alpha[0], q, self.step_budget)
            p2 = _run_site(rng, self._tables[2].__getitem__, alpha[1], q, self.step_budget)
            if p1[-1] == p2[-1]:
                self.accepted += 1
                return p1, p2
        raise SamplingError(
            f"no agreeing first hit from {tuple(alpha)} in {self.max_attempts} attempts "
            f"(acceptance rate {self.acceptance_rate:.4g})"
        )

    def sample_prefix(self, start: GlobalState, horizon: int, rng: RNGStream) -> OmegaPrefix:
        start = tuple(start)
        w1: list[str] = []
        w2: list[str] = []
        alpha = start
        for _ in range(horizon):
            p1, p2 = self.sample_elementary_rejection(alpha, rng)
            w1 += p1
            w2 += p2
            alpha = (p1[-1], p2[-1])
        return OmegaPrefix(start, Trajectory(tuple(w1), tuple(w2), self.system), horizon)


class CoupledSampler(DirectSampler):
    """Adversarial sampler whose site-2 path copies the length of the site-1 path.

    Site-2 paths are redrawn until their length matches; after
    ``max_redraws`` failures the closest one is kept. The marginal law of
    ``Y`` is left untouched, but the local independence property fails.
    """

    def __init__(self, model, max_redraws: int = 200, **kw):
        super().__init__(model, **kw)
        self.max_redraws = max_redraws

    def sample_elementary(self, alpha, rng):
        alpha = tuple(alpha)
        y = self.draw_target(alpha, rng)
        p1 = self.site_path(1, y, alpha[0], rng)
        best = None
        for _ in range(self.max_redraws):
            p2 = self.site_path(2, y, alpha[1], rng)
            if len(p2) == len(p1):
                return p1, p2
            if best is None or abs(len(p2) - len(p1)) < abs(len(best) - len(p1)):
                best = p2
        return p1, best


class PerturbedSampler(DirectSampler):
    """Direct sampler with one synchronization row shifted by ``delta``.

    Mass ``delta`` moves from the last to the first entry of row ``state``.
    """

    def __init__(self, model, state: str | None = None, delta: float = 0.05, **kw):
        super().__init__(model, **kw)
        q0 = model.q0
        if len(q0) < 2:
            raise ValueError("perturbation needs at least two synchronization states")
        self.state = q0[0] if state is None else state
        row = [float(model.sync_matrix[self.state, y]) for y in q0]
        shift = min(delta, row[-1])
        row[0] += shift
        row[-1] -= shift
        self._perturbed = (tuple(q0), list(accumulate(row)))

    def _sync_table(self, alpha):
        if alpha == (self.state, self.state):
            return self._perturbed
        return super()._sync_table(alpha)


def _draw_block(args) -> list[OmegaPrefix]:
    sampler, start, count, horizon, seed, block = args
    rng = RNGStream(seed, block)
    return [sampler.sample_prefix(start, horizon, rng) for _ in range(count)]


def draw_prefixes(
    sampler,
    start: GlobalState,
    n: int,
    horizon: int,
    seed: int = 0,
    threads: int = 1,
    block_size: int = BLOCK_SIZE,
) -> list[OmegaPrefix]:
    """Draw ``n`` prefixes; identical output for any ``threads``."""
    start = tuple(start)
    jobs = []
    for b, lo in enumerate(range(0, n, block_size)):
        jobs.append((sampler, start, min(block_size, n - lo), horizon, seed, b))
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(_draw_block, jobs))
    else:
        blocks = [_draw_block(j) for j in jobs]
    return [p for block in blocks for p in block]


def draw_elementary(sampler, start: GlobalState, n: int, seed: int = 0,
                    block_size: int = BLOCK_SIZE) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """First elementary trajectory of ``n`` independent runs, as word pairs."""
    start = tuple(start)
    out = []
    for b, lo in enumerate(range(0, n, block_size)):
        rng = RNGStream(seed, b)
        for _ in range(min(block_size, n - lo)):
            p1, p2 = sampler.sample_elementary(start, rng)
            out.append((tuple(p1), tuple(p2)))
    return out


def write_jsonl(prefixes: Iterable[OmegaPrefix], fh: TextIO) -> None:
    for p in prefixes:
        fh.write(json.dumps(p.to_json(), separators=(",", ":")) + "\n")


def read_jsonl(fh: TextIO, system) -> list[OmegaPrefix]:
    out = []
    for line in fh:
        if line.strip():
            d = json.loads(line)
            body = Trajectory(tuple(d["w1"]), tuple(d["w2"]), system)
            out.append(OmegaPrefix(tuple(d["start"]), body, d["sync_count"], d.get("truncated", True)))
    return out


def write_y_csv(prefixes: Sequence[OmegaPrefix], fh: TextIO) -> None:
    width = max((len(p.y_sequence) for p in prefixes), default=0)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["index", "start_x", "start_z"] + [f"Y{k}" for k in range(1, width + 1)])
    for i, p in enumerate(prefixes):
        w.writerow([i, *p.start, *p.y_sequence])
