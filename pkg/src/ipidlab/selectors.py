"""The seven IPv4 ID selection methods.

Counter-based methods: a single globally incrementing counter, one
counter per connection, one counter per (src, dst) destination pair
with Windows-style purge sequences, and one counter per keyed-hash
bucket with Linux-style stochastic increments (in an exclusively locked
and a deliberately racy variant). PRNG-based methods: a searchable
queue of the last k values, an iterated Knuth shuffle reserving k
values, and stateless pure random selection.

Concurrency contracts per method:

* ``global``: the read-modify-write is one indivisible step.
* ``per-connection``: the caller owns the state; one requester at a time.
* ``per-destination``, ``prng-queue``, ``prng-shuffle``: one global
  mutual-exclusion region per request.
* ``per-bucket-exclusive``: per-bucket mutual exclusion across the step.
* ``per-bucket-racy``: the timestamp exchange and the counter add are
  each indivisible, but two concurrent requesters may interleave
  between them (the only permitted nondeterminism).
* ``prng-pure``: no shared state; each thread owns a generator.
"""
from __future__ import annotations

import struct
import threading
from collections import deque
from dataclasses import dataclass
from typing import Optional

from .clock import MonotonicClock, tick_elapsed
from .constants import IPID_MASK, IPID_SPACE
from .rng import derive_seed, make_rng
from .siphash import siphash24

__all__ = [
    "METHODS",
    "ConfigError",
    "ConnectionState",
    "FlowKey",
    "SelectorConfig",
    "bucket_index",
    "fold_salt",
    "new_selector",
]

# Stable method-name enumeration; the cross-module contract.
METHOD_GLOBAL = "global"
METHOD_PER_CONNECTION = "per-connection"
METHOD_PER_DESTINATION = "per-destination"
METHOD_PER_BUCKET_EXCLUSIVE = "per-bucket-exclusive"
METHOD_PER_BUCKET_RACY = "per-bucket-racy"
METHOD_PRNG_QUEUE = "prng-queue"
METHOD_PRNG_SHUFFLE = "prng-shuffle"
METHOD_PRNG_PURE = "prng-pure"

METHODS = (
    METHOD_GLOBAL,
    METHOD_PER_CONNECTION,
    METHOD_PER_DESTINATION,
    METHOD_PER_BUCKET_EXCLUSIVE,
    METHOD_PER_BUCKET_RACY,
    METHOD_PRNG_QUEUE,
    METHOD_PRNG_SHUFFLE,
    METHOD_PRNG_PURE,
)

COUNTER_METHODS = (
    METHOD_GLOBAL,
    METHOD_PER_CONNECTION,
    METHOD_PER_DESTINATION,
    METHOD_PER_BUCKET_EXCLUSIVE,
    METHOD_PER_BUCKET_RACY,
)
PRNG_METHODS = (METHOD_PRNG_QUEUE, METHOD_PRNG_SHUFFLE, METHOD_PRNG_PURE)

PORT_BEARING_PROTOCOLS = frozenset({6, 17})  # TCP, UDP

BUCKET_COUNT_MIN = 1 << 11
BUCKET_COUNT_MAX = 1 << 18
DEFAULT_QUEUE_K = 1 << 13
DEFAULT_SHUFFLE_K = 1 << 15
DEFAULT_PURGE_THRESHOLD = 1 << 15


class ConfigError(ValueError):
    """Invalid selector configuration; the message names the field."""


@dataclass(frozen=True, slots=True)
class FlowKey:
    """Flow identity: addresses, protocol, and ports when port-bearing."""

    src_addr: int
    dst_addr: int
    protocol: int
    src_port: Optional[int] = None
    dst_port: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.src_addr <= 0xFFFFFFFF:
            raise ValueError(f"src_addr out of 32-bit range: {self.src_addr}")
        if not 0 <= self.dst_addr <= 0xFFFFFFFF:
            raise ValueError(f"dst_addr out of 32-bit range: {self.dst_addr}")
        if not 0 <= self.protocol <= 0xFF:
            raise ValueError(f"protocol out of 8-bit range: {self.protocol}")
        port_bearing = self.protocol in PORT_BEARING_PROTOCOLS
        has_ports = self.src_port is not None and self.dst_port is not None
        if port_bearing != has_ports:
            raise ValueError(
                "ports must be present exactly when the protocol is "
                f"port-bearing (protocol={self.protocol})"
            )
        for p in (self.src_port, self.dst_port):
            if p is not None and not 0 <= p <= 0xFFFF:
                raise ValueError(f"port out of 16-bit range: {p}")


@dataclass
class SelectorConfig:
    """Method choice plus every tunable shared by the selector family.

    ``k`` defaults per method (queue 2^13, shuffle 2^15, pure 0).
    ``hash_key`` is derived from ``seed`` when omitted. ``seed=None``
    uses OS entropy (production default); a fixed seed makes every
    method's output sequence reproducible.
    """

    method: str
    r: int = BUCKET_COUNT_MIN
    k: Optional[int] = None
    purge_threshold: int = DEFAULT_PURGE_THRESHOLD
    stale_timeout_s: float = 60.0
    purge_interval_s: float = 0.5
    purge_batch_floor: int = 1000
    add_check_limit: int = 5000
    hash_key: Optional[bytes] = None
    avoid_zero: bool = True
    seed: Optional[int] = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(
                f"method: unknown {self.method!r}; expected one of {METHODS}"
            )
        if self.method in (METHOD_PER_BUCKET_EXCLUSIVE, METHOD_PER_BUCKET_RACY):
            if not BUCKET_COUNT_MIN <= self.r <= BUCKET_COUNT_MAX:
                raise ConfigError(
                    f"r: bucket count {self.r} outside "
                    f"[{BUCKET_COUNT_MIN}, {BUCKET_COUNT_MAX}]"
                )
        if self.method in PRNG_METHODS and self.k is not None:
            if not 0 <= self.k < IPID_SPACE:
                raise ConfigError(f"k: reserved count {self.k} outside [0, 2^16)")
        if self.hash_key is not None and len(self.hash_key) != 16:
            raise ConfigError("hash_key: must be exactly 16 bytes (128 bits)")
        if self.purge_threshold < 1:
            raise ConfigError("purge_threshold: must be >= 1")
        if self.purge_interval_s <= 0:
            raise ConfigError("purge_interval_s: must be positive")
        if self.stale_timeout_s < 0:
            raise ConfigError("stale_timeout_s: must be non-negative")
        if self.purge_batch_floor < 0:
            raise ConfigError("purge_batch_floor: must be non-negative")
        if self.add_check_limit < 0:
            raise ConfigError("add_check_limit: must be non-negative")

    def resolved_k(self) -> int:
        if self.k is not None:
            return self.k
        if self.method == METHOD_PRNG_QUEUE:
            return DEFAULT_QUEUE_K
        if self.method == METHOD_PRNG_SHUFFLE:
            return DEFAULT_SHUFFLE_K
        return 0

    def resolved_hash_key(self) -> bytes:
        if self.hash_key is not None:
            return self.hash_key
        if self.seed is None:
            import secrets

            return secrets.token_bytes(16)
        return struct.pack(
            "<QQ",
            derive_seed(self.seed, "hash-key", 0),
            derive_seed(self.seed, "hash-key", 1),
        )


class ConnectionState:
    """One 16-bit counter; randomly initialized at connection establishment."""

    __slots__ = ("counter",)

    def __init__(self, counter: int):
        self.counter = counter & IPID_MASK


def fold_salt(salt: int) -> int:
    """XOR-fold a 64-bit salt into 16 bits (its four 16-bit words)."""
    return (salt ^ (salt >> 16) ^ (salt >> 32) ^ (salt >> 48)) & IPID_MASK


def bucket_index(flow: FlowKey, key: bytes, r: int) -> int:
    """Keyed-hash bucket for a flow: SipHash-2-4(dst, src, proto) mod r.

    Ports are deliberately not part of the hash input. Pure function of
    (flow, key, r).
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    msg = struct.pack("<IIB", flow.dst_addr, flow.src_addr, flow.protocol)
    return siphash24(key, msg) % r


class _SelectorBase:
    method: str = ""

    def __init__(self, config: SelectorConfig):
        self.config = config


class GloballyIncrementingSelector(_SelectorBase):
    """Single shared counter; +1 mod 2^16 per request, indivisibly."""

    method = METHOD_GLOBAL

    def __init__(self, config: SelectorConfig, rng):
        super().__init__(config)
        self._lock = threading.Lock()
        self._counter = rng.getrandbits(16)

    @property
    def counter(self) -> int:
        return self._counter

    @counter.setter
    def counter(self, value: int) -> None:
        with self._lock:
            self._counter = value & IPID_MASK

    def next_global(self) -> int:
        with self._lock:
            self._counter = v = (self._counter + 1) & IPID_MASK
        return v


class PerConnectionSelector(_SelectorBase):
    """One counter per connection; the caller owns each state object."""

    method = METHOD_PER_CONNECTION

    def __init__(self, config: SelectorConfig, rng):
        super().__init__(config)
        self._rng = rng

    def new_connection(self) -> ConnectionState:
        return ConnectionState(self._rng.getrandbits(16))

    def next_per_connection(self, state: ConnectionState) -> int:
        state.counter = v = (state.counter + 1) & IPID_MASK
        return v


class PerDestinationSelector(_SelectorBase):
    """Hash table of (src, dst) counters bounded by purge sequences.

    The table size is checked at most once per purge interval. At a
    check, a purge runs when the table exceeds its purge threshold or
    more than ``add_check_limit`` entries were added since the last
    check; it removes up to max{purge_batch_floor, added-since-check}
    stale entries. Entries are stale when last accessed longer than the
    stale timeout ago, or unconditionally when the table exceeds twice
    its threshold. Purged-then-revisited destinations restart from a
    fresh random counter.
    """

    method = METHOD_PER_DESTINATION

    def __init__(self, config: SelectorConfig, clock, rng):
        super().__init__(config)
        self._lock = threading.Lock()
        self._clock = clock
        self._rng = rng
        self._table: dict[tuple[int, int], list[int]] = {}
        self._purge_interval = clock.seconds_to_ticks(config.purge_interval_s)
        self._stale_ticks = clock.seconds_to_ticks(config.stale_timeout_s)
        self._threshold = config.purge_threshold
        self._batch_floor = config.purge_batch_floor
        self._add_limit = config.add_check_limit
        self._last_check = clock.now()
        self._added_since_check = 0

    def __len__(self) -> int:
        return len(self._table)

    def next_per_destination(self, src_addr: int, dst_addr: int) -> int:
        with self._lock:
            now = self._clock.now()
            if tick_elapsed(self._last_check, now) >= self._purge_interval:
                self._purge_check(now)
            key = (src_addr, dst_addr)
            entry = self._table.get(key)
            if entry is None:
                self._table[key] = [self._rng.getrandbits(16), now]
                self._added_since_check += 1
                return self._table[key][0]
            entry[0] = v = (entry[0] + 1) & IPID_MASK
            entry[1] = now
            return v

    def _purge_check(self, now: int) -> None:
        added = self._added_since_check
        self._added_since_check = 0
        self._last_check = now
        size = len(self._table)
        if size <= self._threshold and added <= self._add_limit:
            return
        all_stale = size > 2 * self._threshold
        cap = max(self._batch_floor, added)
        stale_ticks = self._stale_ticks
        removed = 0
        for key, entry in list(self._table.items()):
            if removed >= cap:
                break
            if all_stale or tick_elapsed(entry[1], now) > stale_ticks:
                del self._table[key]
                removed += 1


class PerBucketSelector(_SelectorBase):
    """r keyed-hash buckets with stochastic increments.

    The increment is uniform over [1, max{1, elapsed ticks since the
    bucket was last touched}]. Bucket counters initialize to seeded
    random values; timestamps initialize to construction time.
    """

    def __init__(self, config: SelectorConfig, clock, rng, racy: bool):
        super().__init__(config)
        self.method = METHOD_PER_BUCKET_RACY if racy else METHOD_PER_BUCKET_EXCLUSIVE
        self._racy = racy
        self._clock = clock
        self._rng = rng
        self._r = config.r
        self._key = config.resolved_hash_key()
        now = clock.now()
        self._counters = [rng.getrandbits(16) for _ in range(config.r)]
        self._stamps = [now] * config.r
        self._locks = [threading.Lock() for _ in range(config.r)]
        self._index_cache: dict[tuple[int, int, int], int] = {}

    @property
    def hash_key(self) -> bytes:
        return self._key

    def bucket_index(self, flow: FlowKey) -> int:
        ident = (flow.src_addr, flow.dst_addr, flow.protocol)
        j = self._index_cache.get(ident)
        if j is None:
            j = self._index_cache[ident] = bucket_index(flow, self._key, self._r)
        return j

    def bucket_counter(self, j: int) -> int:
        return self._counters[j]

    def next_per_bucket(self, flow: FlowKey) -> int:
        j = self.bucket_index(flow)
        if self._racy:
            return self._next_racy(j)
        return self._next_exclusive(j)

    def _next_exclusive(self, j: int) -> int:
        counters = self._counters
        with self._locks[j]:
            t_now = self._clock.now()
            delta = tick_elapsed(self._stamps[j], t_now)
            self._stamps[j] = t_now
            inc = 1 if delta <= 1 else self._rng.randint(1, delta)
            counters[j] = v = (counters[j] + inc) & IPID_MASK
        return v

    def _next_racy(self, j: int) -> int:
        # Two short indivisible sections: the timestamp exchange and the
        # counter add. Other requests may interleave between them.
        lock = self._locks[j]
        t_now = self._clock.now()
        with lock:
            t_old = self._stamps[j]
            self._stamps[j] = t_now
        delta = tick_elapsed(t_old, t_now)
        inc = 1 if delta <= 1 else self._rng.randint(1, delta)
        counters = self._counters
        with lock:
            counters[j] = v = (counters[j] + inc) & IPID_MASK
        return v


class PrngQueueSelector(_SelectorBase):
    """Uniform draws filtered through a FIFO of the last k values.

    A 2^16-entry membership table gives constant-time "already queued"
    checks; bit i is set exactly when value i is in the FIFO.
    """

    method = METHOD_PRNG_QUEUE

    def __init__(self, config: SelectorConfig, rng):
        super().__init__(config)
        self._lock = threading.Lock()
        self._rng = rng
        self._k = config.resolved_k()
        self._avoid_zero = config.avoid_zero
        self._queue: deque[int] = deque()
        self._member = bytearray(IPID_SPACE)

    @property
    def queue_len(self) -> int:
        return len(self._queue)

    def next_prng_queue(self) -> int:
        with self._lock:
            draw = self._rng.getrandbits
            member = self._member
            avoid = self._avoid_zero
            v = draw(16)
            while (avoid and v == 0) or member[v]:
                v = draw(16)
            k = self._k
            if k:
                q = self._queue
                if len(q) == k:
                    member[q.popleft()] = 0
                q.append(v)
                member[v] = 1
        return v


class PrngShuffleSelector(_SelectorBase):
    """Iterated Knuth shuffle over the full 2^16-value permutation.

    Each returned value is swapped back among the previous 2^16 - k
    cyclic positions (including its own), so the head cannot reach it
    again for at least k + 1 further positions. A skipped zero (when
    zero-avoidance is on) consumes one of those positions without
    producing an output, so duplicate outputs are at least k apart:
    every window of k consecutive outputs is duplicate-free.
    """

    method = METHOD_PRNG_SHUFFLE

    def __init__(self, config: SelectorConfig, rng):
        super().__init__(config)
        self._lock = threading.Lock()
        self._rng = rng
        self._k = config.resolved_k()
        self._avoid_zero = config.avoid_zero
        perm = list(range(IPID_SPACE))
        rng.shuffle(perm)
        self._perm = perm
        self._head = 0

    @property
    def permutation(self) -> list[int]:
        return list(self._perm)

    def next_prng_shuffle(self) -> int:
        with self._lock:
            perm = self._perm
            randrange = self._rng.randrange
            span = IPID_SPACE - self._k  # swap distance drawn from [0, span-1]
            avoid = self._avoid_zero
            while True:
                i = self._head
                v = perm[i]
                j = (i - randrange(span)) & IPID_MASK
                perm[i], perm[j] = perm[j], perm[i]
                self._head = (i + 1) & IPID_MASK
                if v or not avoid:
                    return v


class PrngPureSelector(_SelectorBase):
    """Stateless uniform selection salted per packet; no shared state.

    Each thread lazily receives its own generator stream (derived from
    the seed and thread arrival order), so concurrent requesters never
    contend.
    """

    method = METHOD_PRNG_PURE

    def __init__(self, config: SelectorConfig, rng=None):
        super().__init__(config)
        self._avoid_zero = config.avoid_zero
        self._seed = config.seed
        self._rng_override = rng
        self._local = threading.local()
        self._ctx_lock = threading.Lock()
        self._ctx_count = 0

    def _context_rng(self):
        if self._rng_override is not None:
            self._local.draw = self._rng_override.getrandbits
            return self._local.draw
        with self._ctx_lock:
            idx = self._ctx_count
            self._ctx_count += 1
        seed = None if self._seed is None else derive_seed(self._seed, "pure", idx)
        rng = make_rng(seed)
        self._local.draw = rng.getrandbits
        return rng.getrandbits

    def next_prng_pure(self, salt: int = 0) -> int:
        draw = getattr(self._local, "draw", None)
        if draw is None:
            draw = self._context_rng()
        folded = (salt ^ (salt >> 16) ^ (salt >> 32) ^ (salt >> 48)) & IPID_MASK
        v = draw(16) ^ folded
        if self._avoid_zero:
            while v == 0:
                v = draw(16) ^ folded
        return v

    def thread_requester(self, start_salt: int = 0):
        """Bind the calling thread's generator once and return a flat
        request closure (the benchmark hot path).

        The closure salts each draw with an incrementing packet counter
        starting at ``start_salt``; its one ignored argument lets it
        serve directly as a per-record request function.
        """
        draw = getattr(self._local, "draw", None)
        if draw is None:
            draw = self._context_rng()
        avoid = self._avoid_zero
        salt = start_salt

        def request(_record=None, _mask=IPID_MASK) -> int:
            nonlocal salt
            salt += 1
            s = salt
            folded = (s ^ (s >> 16) ^ (s >> 32) ^ (s >> 48)) & _mask
            v = draw(16) ^ folded
            while avoid and v == 0:
                v = draw(16) ^ folded
            return v

        return request


def new_selector(config: SelectorConfig, clock=None, rng=None):
    """Build a selector for ``config.method``; validates the config.

    ``clock`` (per-destination, per-bucket) defaults to the real
    monotonic tick clock; pass a :class:`~ipidlab.clock.VirtualClock`
    for deterministic tests. ``rng`` overrides the seeded generator.
    """
    config.validate()
    method = config.method
    if rng is None and method != METHOD_PRNG_PURE:
        seed = config.seed
        rng = make_rng(None if seed is None else derive_seed(seed, method))
    if clock is None:
        clock = MonotonicClock()
    if method == METHOD_GLOBAL:
        return GloballyIncrementingSelector(config, rng)
    if method == METHOD_PER_CONNECTION:
        return PerConnectionSelector(config, rng)
    if method == METHOD_PER_DESTINATION:
        return PerDestinationSelector(config, clock, rng)
    if method == METHOD_PER_BUCKET_EXCLUSIVE:
        return PerBucketSelector(config, clock, rng, racy=False)
    if method == METHOD_PER_BUCKET_RACY:
        return PerBucketSelector(config, clock, rng, racy=True)
    if method == METHOD_PRNG_QUEUE:
        return PrngQueueSelector(config, rng)
    if method == METHOD_PRNG_SHUFFLE:
        return PrngShuffleSelector(config, rng)
    if method == METHOD_PRNG_PURE:
        return PrngPureSelector(config, rng)
    raise ConfigError(f"method: unknown {method!r}")
