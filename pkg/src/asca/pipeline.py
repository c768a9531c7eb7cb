"""Per-sample orchestration: encode, dictionary update, running-error ledger,
controller-driven growth, and bit-exact checkpointing.

Checkpoint layout (all integers little-endian):

    magic "ASCA" | version u16 | payload_len u64 | payload | crc32 u32

The payload holds the config as length-prefixed JSON, the dictionary
matrices as length-prefixed f64 blocks, the automaton table, the ledger,
the warm-start code, and the growth records. The CRC covers everything
before it. All randomness in a session is derived from the config seed and
the number of growth events, so no generator state needs to be stored.
"""

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .automaton import GrowthAutomaton
from .dictlearn import Dictionary, GrowthRecord, init_dictionary
from .linalg import as_vector, residual_sq
from .solver import SolveOpts, dynamic_solve, energy, fista_solve

CHECKPOINT_MAGIC = b"ASCA"
CHECKPOINT_VERSION = 1

SERIES_CSV_HEADER = "k,sq_error,tmse,dim,state,action,growth"


class PipelineError(RuntimeError):
    """Processing failed at a specific sample; the ledger before it is intact."""

    def __init__(self, sample_index: int, message: str):
        super().__init__(f"sample {sample_index}: {message}")
        self.sample_index = sample_index


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class CheckpointFormatError(CheckpointError):
    """File is not a checkpoint (bad magic or malformed payload)."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an unsupported format version."""


class CheckpointTruncatedError(CheckpointError):
    """File is shorter than its header declares."""


class CheckpointChecksumError(CheckpointError):
    """CRC32 over the stored bytes does not match."""


@dataclass(frozen=True)
class SessionConfig:
    """Static configuration of one encoding session."""

    solve_opts: SolveOpts = field(default_factory=SolveOpts)
    initial_dim: int = 50
    actions: tuple = (5, 15, 20, 30, 35)
    threshold: float = 0.5
    sigma: float = 0.5
    controller_period: int = 4
    alternations_max: int = 10
    outer_rel_tol: float = 1e-4
    seed: int = 0
    dynamic_mode: bool = False

    def __post_init__(self):
        if self.initial_dim < 1:
            raise ValueError("initial_dim must be >= 1")
        if self.controller_period < 1:
            raise ValueError("controller_period must be >= 1")
        if self.alternations_max < 1:
            raise ValueError("alternations_max must be >= 1")
        if self.outer_rel_tol <= 0.0:
            raise ValueError("outer_rel_tol must be positive")
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))


@dataclass
class SampleRecord:
    """Ledger row for one processed sample.

    ``dim`` is the dictionary size after any growth applied at this step, so
    dimension jumps are visible at the sample that triggered them.
    """

    k: int
    sq_error: float
    tmse: float
    dim: int
    state_visited: int | None = None
    action_taken: int | None = None


@dataclass
class SessionLedger:
    """Running error sums and the per-sample series."""

    err_sum: float = 0.0
    series: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.series)

    def tmse(self) -> float:
        """Running mean of the recorded squared residuals."""
        if not self.series:
            raise ValueError("tmse is undefined on an empty ledger")
        return self.err_sum / len(self.series)


def _growth_seed(base_seed: int, growth_index: int) -> int:
    # deterministic per-event seed; stored in the GrowthRecord for replay
    return int(base_seed) + 1_000_003 * (growth_index + 1)


class Session:
    """One strictly sequential encoding run over a patch stream."""

    def __init__(self, config: SessionConfig, input_dim: int, controller_enabled: bool = True):
        self.config = config
        self.input_dim = int(input_dim)
        self.dictionary = init_dictionary(self.input_dim, config.initial_dim, config.seed)
        self.automaton = (
            GrowthAutomaton(config.actions, config.threshold, config.sigma)
            if controller_enabled
            else None
        )
        self.ledger = SessionLedger()
        self.last_code = np.zeros(config.initial_dim)
        self.growth_records: list = []

    @property
    def controller_enabled(self) -> bool:
        return self.automaton is not None

    def _padded_last_code(self) -> np.ndarray:
        n = self.dictionary.n
        if self.last_code.shape[0] == n:
            return self.last_code
        out = np.zeros(n)
        out[: self.last_code.shape[0]] = self.last_code
        return out

    def process_sample(self, y) -> SampleRecord:
        """Encode one sample, update the dictionary, and maybe grow it.

        Alternates (solve with the current dictionary) and (accumulate + one
        dictionary pass) until the relative energy change between
        alternations drops below ``outer_rel_tol`` or ``alternations_max``
        is reached. The squared residual of the final code under the final
        dictionary is frozen into the ledger. Every ``controller_period``
        samples, a running mean above the threshold triggers the automaton
        and the dictionary grows by the returned action.
        """
        y = as_vector(y, "y")
        if y.shape[0] != self.input_dim:
            raise ValueError(f"sample length {y.shape[0]} != input dim {self.input_dim}")
        cfg = self.config
        opts = cfg.solve_opts
        anchor = self._padded_last_code()
        x = anchor
        eye = np.eye(self.dictionary.n) if cfg.dynamic_mode else None
        e_prev = None
        for _ in range(cfg.alternations_max):
            if cfg.dynamic_mode:
                code = dynamic_solve(self.dictionary.B, y, anchor, eye, opts)
            else:
                code = fista_solve(self.dictionary.B, y, x, opts)
            x = code.coeffs
            self.dictionary.accumulate(x, y)
            self.dictionary.odl_update(passes=1)
            e = energy(self.dictionary.B, y, x, opts.lam)
            if e_prev is not None and abs(e - e_prev) < cfg.outer_rel_tol * max(e_prev, 1e-12):
                break
            e_prev = e
        sq = residual_sq(y, self.dictionary.B, x)
        self.last_code = x
        self.ledger.err_sum += sq
        k = self.ledger.k + 1
        tm = self.ledger.err_sum / k
        state_idx = None
        action = None
        if (
            self.automaton is not None
            and k % cfg.controller_period == 0
            and tm > cfg.threshold
        ):
            state_idx = self.automaton.classify(tm)
            action = self.automaton.step(tm)
            seed_used = _growth_seed(cfg.seed, len(self.growth_records))
            self.growth_records.append(self.dictionary.grow(action, seed_used))
        record = SampleRecord(
            k=k,
            sq_error=sq,
            tmse=tm,
            dim=self.dictionary.n,
            state_visited=state_idx,
            action_taken=action,
        )
        self.ledger.series.append(record)
        return record


def run_stream(session: Session, patches) -> SessionLedger:
    """Fold ``process_sample`` over an ordered patch sequence.

    The first failure aborts with the sample index attached; everything
    recorded before it stays in the session ledger.
    """
    for idx, y in enumerate(patches):
        try:
            session.process_sample(y)
        except Exception as exc:
            raise PipelineError(idx + 1, str(exc)) from exc
    return session.ledger


def _opt_int(v) -> str:
    return "" if v is None else str(v)


def write_series_csv(ledger: SessionLedger, path) -> None:
    """Write the per-sample log; floats use shortest round-trip formatting."""
    lines = [SERIES_CSV_HEADER]
    for r in ledger.series:
        lines.append(
            f"{r.k},{r.sq_error!r},{r.tmse!r},{r.dim},"
            f"{_opt_int(r.state_visited)},{_opt_int(r.action_taken)},{_opt_int(r.action_taken)}"
        )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


# -- checkpoint encoding ----------------------------------------------------


class _Writer:
    def __init__(self):
        self.parts = []

    def raw(self, b: bytes):
        self.parts.append(b)

    def u8(self, v: int):
        self.raw(struct.pack("<B", v))

    def u32(self, v: int):
        self.raw(struct.pack("<I", v))

    def i64(self, v: int):
        self.raw(struct.pack("<q", v))

    def u64(self, v: int):
        self.raw(struct.pack("<Q", v))

    def f64(self, v: float):
        self.raw(struct.pack("<d", v))

    def blob(self, b: bytes):
        self.u64(len(b))
        self.raw(b)

    def matrix(self, arr: np.ndarray):
        self.u32(arr.shape[0])
        self.u32(arr.shape[1])
        self.blob(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    def vector(self, arr: np.ndarray):
        self.u32(arr.shape[0])
        self.raw(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointFormatError("payload ended inside a field")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def blob(self) -> bytes:
        return self.take(self.u64())

    def matrix(self) -> np.ndarray:
        rows = self.u32()
        cols = self.u32()
        data = self.blob()
        if len(data) != rows * cols * 8:
            raise CheckpointFormatError("matrix block has the wrong size")
        return np.frombuffer(data, dtype="<f8").reshape(rows, cols).copy()

    def vector(self) -> np.ndarray:
        n = self.u32()
        return np.frombuffer(self.take(n * 8), dtype="<f8").copy()


def _config_to_json(config: SessionConfig) -> bytes:
    d = {
        "solve_opts": {
            "lam": config.solve_opts.lam,
            "gamma": config.solve_opts.gamma,
            "max_iters": config.solve_opts.max_iters,
            "rel_tol": config.solve_opts.rel_tol,
        },
        "initial_dim": config.initial_dim,
        "actions": list(config.actions),
        "threshold": config.threshold,
        "sigma": config.sigma,
        "controller_period": config.controller_period,
        "alternations_max": config.alternations_max,
        "outer_rel_tol": config.outer_rel_tol,
        "seed": config.seed,
        "dynamic_mode": config.dynamic_mode,
    }
    return json.dumps(d, sort_keys=True).encode("utf-8")


def _config_from_json(raw: bytes) -> SessionConfig:
    d = json.loads(raw.decode("utf-8"))
    opts = SolveOpts(**d.pop("solve_opts"))
    d["actions"] = tuple(d["actions"])
    return SessionConfig(solve_opts=opts, **d)


def _encode_session(session: Session) -> bytes:
    w = _Writer()
    w.blob(_config_to_json(session.config))
    w.u8(1 if session.controller_enabled else 0)
    w.u32(session.input_dim)
    d = session.dictionary
    w.u64(d.samples_seen)
    w.f64(d.unit_c)
    w.matrix(d.B)
    w.matrix(d.gram_acc)
    w.matrix(d.cross_acc)
    if session.automaton is not None:
        aut = session.automaton
        w.u32(len(aut.states))
        w.f64(aut.threshold)
        w.f64(aut.sigma)
        w.f64(aut.memory_init)
        for st in aut.states:
            w.u32(st.action_ell)
            w.f64(st.lb)
            w.f64(st.ub)
            w.f64(st.memory)
            w.f64(st.best_err)
    ledger = session.ledger
    w.f64(ledger.err_sum)
    w.u64(len(ledger.series))
    for r in ledger.series:
        w.u64(r.k)
        w.f64(r.sq_error)
        w.f64(r.tmse)
        w.u32(r.dim)
        w.i64(-1 if r.state_visited is None else r.state_visited)
        w.i64(-1 if r.action_taken is None else r.action_taken)
    w.vector(session.last_code)
    w.u32(len(session.growth_records))
    for g in session.growth_records:
        w.u64(g.at_sample)
        w.u32(g.old_dim)
        w.u32(g.added)
        w.i64(g.rng_seed_used)
    return w.getvalue()


def _decode_session(payload: bytes) -> Session:
    r = _Reader(payload)
    config = _config_from_json(r.blob())
    controller = bool(r.u8())
    input_dim = r.u32()
    session = Session(config, input_dim, controller_enabled=controller)
    samples_seen = r.u64()
    unit_c = r.f64()
    b_mat = r.matrix()
    gram = r.matrix()
    cross = r.matrix()
    session.dictionary = Dictionary(
        b_mat, gram, cross, samples_seen=samples_seen, unit_c=unit_c
    )
    if controller:
        h = r.u32()
        threshold = r.f64()
        sigma = r.f64()
        memory_init = r.f64()
        actions = []
        fields = []
        for _ in range(h):
            actions.append(r.u32())
            fields.append((r.f64(), r.f64(), r.f64(), r.f64()))
        aut = GrowthAutomaton(actions, threshold, sigma, memory_init=memory_init)
        for st, (lb, ub, memory, best_err) in zip(aut.states, fields):
            st.lb, st.ub, st.memory, st.best_err = lb, ub, memory, best_err
        session.automaton = aut
    ledger = SessionLedger()
    ledger.err_sum = r.f64()
    count = r.u64()
    for _ in range(count):
        k = r.u64()
        sq = r.f64()
        tm = r.f64()
        dim = r.u32()
        state = r.i64()
        action = r.i64()
        ledger.series.append(
            SampleRecord(
                k=k,
                sq_error=sq,
                tmse=tm,
                dim=dim,
                state_visited=None if state < 0 else int(state),
                action_taken=None if action < 0 else int(action),
            )
        )
    session.ledger = ledger
    session.last_code = r.vector()
    n_growth = r.u32()
    session.growth_records = [
        GrowthRecord(
            at_sample=r.u64(), old_dim=r.u32(), added=r.u32(), rng_seed_used=r.i64()
        )
        for _ in range(n_growth)
    ]
    if r.pos != len(payload):
        raise CheckpointFormatError("payload has trailing bytes")
    return session


def checkpoint_save(session: Session, path) -> None:
    """Serialize the full session state; the round trip is bit-exact."""
    payload = _encode_session(session)
    head = CHECKPOINT_MAGIC + struct.pack("<H", CHECKPOINT_VERSION)
    head += struct.pack("<Q", len(payload))
    crc = zlib.crc32(head + payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(head + payload + struct.pack("<I", crc))


def checkpoint_load(path) -> Session:
    """Restore a session; validates magic, version, length, and CRC first."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 14:
        raise CheckpointTruncatedError(f"file has only {len(blob)} bytes")
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"bad magic {blob[:4]!r}")
    (version,) = struct.unpack("<H", blob[4:6])
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported version {version}")
    (payload_len,) = struct.unpack("<Q", blob[6:14])
    expect = 14 + payload_len + 4
    if len(blob) != expect:
        raise CheckpointTruncatedError(f"expected {expect} bytes, file has {len(blob)}")
    body = blob[:-4]
    (crc_stored,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise CheckpointChecksumError("checksum mismatch")
    return _decode_session(blob[14:-4])
