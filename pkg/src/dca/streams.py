"""Timestamped event streams and their delivery paths.

An event stream is a timestamp-ordered sequence of signal-set and
antigen events. Streams can be generated synthetically (a scripted
remote-session scenario containing an address scan), written to and
read from a line-oriented log with bit-exact round-trips, replayed at
a configurable rate, or pushed over a length-prefixed socket transport
into a tissue server. All delivery paths funnel into the same
event-driven runner, so they produce identical migration records for
equal seeds.
"""

from __future__ import annotations

import logging
import math
import random
import socket
import struct
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence, TextIO

from .analysis import (AntigenVerdict, PairedTTestResult, aggregate,
                       mean_and_std, paired_t_test, process_mag)
from .core import SignalVector, WeightMatrix
from .tissue import MigrationRecord, PopulationConfig, Tissue

log = logging.getLogger(__name__)

SIGNAL_SET = "S"
ANTIGEN = "A"

# wire framing: 4-byte big-endian unsigned length, then one event line
FRAME_HEADER = struct.Struct(">I")
MAX_FRAME = 4096


class StreamFormatError(ValueError):
    """Malformed or out-of-order event stream content."""


class ProtocolError(Exception):
    """Wire-framing violation (oversized or truncated frame)."""


class SinkDisconnected(Exception):
    """Replay sink went away; carries the count of undelivered events."""

    def __init__(self, undelivered: int):
        super().__init__(f"sink disconnected with {undelivered} undelivered events")
        self.undelivered = undelivered


@dataclass(frozen=True)
class Event:
    """One timestamped input to the tissue server.

    `kind` is SIGNAL_SET (payload: signals) or ANTIGEN (payload: label
    and source process name). Timestamps are seconds since stream start
    and must be non-decreasing within a stream.
    """

    timestamp: float
    kind: str
    signals: Optional[SignalVector] = None
    label: Optional[str] = None
    process: Optional[str] = None

    def __post_init__(self):
        if self.timestamp < 0 or not math.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite and non-negative")
        if self.kind == SIGNAL_SET:
            if self.signals is None:
                raise ValueError("signal-set event requires a signal vector")
        elif self.kind == ANTIGEN:
            if not self.label or not self.process:
                raise ValueError("antigen event requires label and process")
        else:
            raise ValueError(f"unknown event kind {self.kind!r}")

    @classmethod
    def signal_set(cls, timestamp: float, signals: SignalVector) -> "Event":
        return cls(timestamp, SIGNAL_SET, signals=signals)

    @classmethod
    def antigen(cls, timestamp: float, label: str, process: str) -> "Event":
        return cls(timestamp, ANTIGEN, label=label, process=process)


def format_event(e: Event) -> str:
    """Serialize one event to its log line (no trailing newline).

    Floats are rendered with repr so that parsing restores them
    bit-exactly.
    """
    if e.kind == SIGNAL_SET:
        s = e.signals
        return "\t".join((repr(e.timestamp), SIGNAL_SET, repr(s.pamp),
                          repr(s.danger), repr(s.safe), repr(s.inflammation)))
    return "\t".join((repr(e.timestamp), ANTIGEN, e.label, e.process))


def parse_event(line: str, lineno: int = 0) -> Event:
    parts = line.split("\t")
    try:
        if len(parts) == 6 and parts[1] == SIGNAL_SET:
            ts, _, p, d, s, ic = parts
            return Event.signal_set(float(ts), SignalVector(
                pamp=float(p), danger=float(d), safe=float(s),
                inflammation=float(ic)))
        if len(parts) == 4 and parts[1] == ANTIGEN:
            ts, _, label, process = parts
            return Event.antigen(float(ts), label, process)
    except (ValueError, TypeError) as exc:
        raise StreamFormatError(f"line {lineno}: {exc}") from exc
    raise StreamFormatError(f"line {lineno}: unrecognized event layout")


def write_log(events: Iterable[Event], fh: TextIO) -> None:
    for e in events:
        fh.write(format_event(e) + "\n")


def read_log(fh: TextIO) -> list[Event]:
    """Parse an event log, rejecting decreasing timestamps.

    Errors carry the 1-based offending line number.
    """
    events: list[Event] = []
    last = -math.inf
    for lineno, line in enumerate(fh, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        e = parse_event(line, lineno)
        if e.timestamp < last:
            raise StreamFormatError(
                f"line {lineno}: timestamp {e.timestamp!r} decreases "
                f"(previous {last!r})")
        last = e.timestamp
        events.append(e)
    return events


# ---------------------------------------------------------------------------
# signal derivation from per-second traffic counters


@dataclass(frozen=True)
class SignalScales:
    """Free conversion constants from traffic counters to concentrations.

    pamp = k_pamp * icmp-unreachable/s; danger = k_danger * packets/s;
    safe = max(0, safe_max - k_safe * |delta of the 2-second moving
    average of packets/s|).
    """

    k_pamp: float = 0.15
    k_danger: float = 0.05
    k_safe: float = 0.3
    safe_max: float = 5.0


def derive_signals(pps: Sequence[float], unreachable: Sequence[float],
                   user_absent: bool = False,
                   scales: SignalScales = SignalScales()) -> list[SignalVector]:
    """Convert per-second traffic counters into one SignalVector per second.

    The safe signal is the inverse rate of change of traffic: full at
    steady load, eroded by the absolute change of the 2-sample moving
    average of packets/sec, floored at zero.
    """
    if len(pps) != len(unreachable):
        raise ValueError("counter series must have equal length")
    if any(v < 0 for v in pps) or any(v < 0 for v in unreachable):
        raise ValueError("traffic counters must be non-negative")
    ic = 1.0 if user_absent else 0.0
    out: list[SignalVector] = []
    prev_ma: Optional[float] = None
    prev_sample: Optional[float] = None
    for t, load in enumerate(pps):
        window_prev = load if prev_sample is None else prev_sample
        ma = (load + window_prev) / 2.0
        delta = 0.0 if prev_ma is None else ma - prev_ma
        out.append(SignalVector(
            pamp=scales.k_pamp * unreachable[t],
            danger=scales.k_danger * load,
            safe=max(0.0, scales.safe_max - scales.k_safe * abs(delta)),
            inflammation=ic,
        ))
        prev_ma, prev_sample = ma, load
    return out


# ---------------------------------------------------------------------------
# synthetic remote-session scenario


@dataclass(frozen=True)
class ScenarioConfig:
    """Scripted remote-session timeline containing an address scan.

    Five phases run back to back: log-in, scan, pause, file transfer,
    session close. Traffic is a noisy packets/sec series; the scan
    phase adds ICMP destination-unreachable errors for addresses with
    no host behind them. `transfer_bytes` sets the transfer-phase
    traffic level via the packet size.
    """

    login_duration: int = 30
    scan_duration: int = 30
    pause_duration: int = 30
    transfer_duration: int = 15
    close_duration: int = 10
    address_count: int = 1000
    fraction_unreachable: float = 0.9
    baseline_pps: float = 10.0
    scan_pps: float = 200.0
    transfer_bytes: float = 3.3e6
    packet_bytes: float = 1000.0
    user_absent: bool = True
    noise_seed: int = 0
    scales: SignalScales = field(default_factory=SignalScales)

    def __post_init__(self):
        durations = (self.login_duration, self.scan_duration,
                     self.pause_duration, self.transfer_duration,
                     self.close_duration)
        if min(durations) <= 0:
            raise ValueError("phase durations must be positive")
        if not 0.0 <= self.fraction_unreachable <= 1.0:
            raise ValueError("fraction_unreachable must lie in [0, 1]")
        if min(self.baseline_pps, self.scan_pps, self.transfer_bytes,
               self.packet_bytes, self.address_count) <= 0:
            raise ValueError("traffic parameters must be positive")

    @property
    def total_duration(self) -> int:
        return (self.login_duration + self.scan_duration + self.pause_duration
                + self.transfer_duration + self.close_duration)

    def phase_of(self, second: int) -> str:
        edges = (
            ("login", self.login_duration),
            ("scan", self.scan_duration),
            ("pause", self.pause_duration),
            ("transfer", self.transfer_duration),
            ("close", self.close_duration),
        )
        acc = 0
        for name, dur in edges:
            acc += dur
            if second < acc:
                return name
        return "close"


# synthetic processes active in the session; per-phase antigen
# emissions per second. The scanner only emits while scanning; the
# ssh-daemon children only emit during session setup.
PROCESS_RATES: dict[str, dict[str, float]] = {
    "ssh-daemon": {"login": 4.0},
    "shell": {"login": 6.0, "scan": 4.0, "pause": 2.0, "transfer": 1.0,
              "close": 4.0},
    "scanner": {"scan": 33.0},
    "forward-agent": {"login": 4.0, "scan": 4.0, "pause": 4.0,
                      "transfer": 4.0, "close": 4.0},
    "file-transfer": {"transfer": 19.0},
}

SCANNER_PROCESS = "scanner"
TRANSFER_PROCESS = "file-transfer"


def _emission_count(rate: float, rng: random.Random) -> int:
    whole = int(rate)
    return whole + (1 if rng.random() < rate - whole else 0)


def generate_scenario(cfg: ScenarioConfig) -> list[Event]:
    """Emit the scenario's event stream: one signal set per second plus
    per-process antigen events, deterministically from the noise seed."""
    rng = random.Random(cfg.noise_seed)
    seconds = cfg.total_duration
    transfer_pps = cfg.transfer_bytes / cfg.packet_bytes / cfg.transfer_duration
    scan_rate = cfg.address_count / cfg.scan_duration

    pps: list[float] = []
    unreachable: list[float] = []
    for t in range(seconds):
        phase = cfg.phase_of(t)
        if phase == "scan":
            # bursty probing traffic: large swings defeat the moving average
            load = cfg.scan_pps * rng.uniform(0.3, 1.7)
            unreach = scan_rate * cfg.fraction_unreachable * rng.uniform(0.8, 1.2)
        elif phase == "transfer":
            # bulk copy: high, mostly steady traffic with mild rate wobble
            load = transfer_pps + rng.gauss(0.0, 12.0)
            unreach = 0.0
        else:
            load = cfg.baseline_pps + rng.gauss(0.0, 1.0)
            unreach = 0.0
        pps.append(max(0.0, load))
        unreachable.append(max(0.0, unreach))

    signals = derive_signals(pps, unreachable, cfg.user_absent, cfg.scales)

    # a fixed pid universe per process; the ssh-daemon spawns children
    pid_counts = {"ssh-daemon": 4, "shell": 1, "scanner": 1,
                  "forward-agent": 1, "file-transfer": 1}
    labels = {
        proc: [f"{proc}:{1000 + 17 * i + offset}"
               for offset in range(pid_counts[proc])]
        for i, proc in enumerate(PROCESS_RATES)
    }

    events: list[Event] = []
    for t in range(seconds):
        events.append(Event.signal_set(float(t), signals[t]))
        phase = cfg.phase_of(t)
        emissions: list[tuple[str, str]] = []
        for proc, rates in PROCESS_RATES.items():
            rate = rates.get(phase, 0.0)
            if proc == "ssh-daemon" and t >= cfg.login_duration - 10:
                # daemon children are quiet once the session is up
                rate = 0.0
            for _ in range(_emission_count(rate, rng)):
                emissions.append((rng.choice(labels[proc]), proc))
        for i, (label, proc) in enumerate(emissions):
            events.append(Event.antigen(
                t + (i + 1) / (len(emissions) + 1), label, proc))
    return events


def scenario_process_groups(events: Iterable[Event]) -> dict[str, set[str]]:
    """Map each source process to the set of antigen labels it emitted."""
    groups: dict[str, set[str]] = {}
    for e in events:
        if e.kind == ANTIGEN:
            groups.setdefault(e.process, set()).add(e.label)
    return groups


# ---------------------------------------------------------------------------
# event delivery into a tissue


@dataclass(frozen=True)
class SignalMask:
    """Which signal channels a run actually uses; masked channels are
    zeroed before reaching the tissue."""

    use_pamp: bool = True
    use_danger: bool = True
    use_safe: bool = True
    use_inflammation: bool = True

    def apply(self, s: SignalVector) -> SignalVector:
        return SignalVector(
            pamp=s.pamp if self.use_pamp else 0.0,
            danger=s.danger if self.use_danger else 0.0,
            safe=s.safe if self.use_safe else 0.0,
            inflammation=s.inflammation if self.use_inflammation else 0.0,
        )


class EventDrivenRunner:
    """Maps an event stream onto tissue ticks: one tick per whole second
    of logical time; each event is applied before the tick covering its
    second runs. Wall-clock pacing never affects the outcome."""

    def __init__(self, tissue: Tissue, mask: SignalMask = SignalMask()):
        self.tissue = tissue
        self.mask = mask
        self._last_ts = -math.inf

    def apply(self, event: Event) -> None:
        if event.timestamp < self._last_ts:
            raise StreamFormatError(
                f"event timestamp {event.timestamp!r} decreases")
        self._last_ts = event.timestamp
        while self.tissue.compartment.clock < int(event.timestamp):
            self.tissue.tick()
        if event.kind == SIGNAL_SET:
            self.tissue.set_signals(self.mask.apply(event.signals))
        else:
            self.tissue.deposit_antigen(event.label)

    def run(self, events: Iterable[Event]) -> None:
        last = None
        for e in events:
            self.apply(e)
            last = e
        if last is not None:
            while self.tissue.compartment.clock <= int(last.timestamp):
                self.tissue.tick()

    def drain(self, max_ticks: int = 100) -> None:
        """Keep ticking under the final signals until no immature cell
        still holds antigen (or the safety cap is reached)."""
        for _ in range(max_ticks):
            if not any(cell.antigen_store for cell in self.tissue.pool):
                return
            self.tissue.tick()


def replay(events: Sequence[Event], rate, sink,
           sleep: Callable[[float], None] = time.sleep) -> None:
    """Deliver events to a sink in order, pacing inter-event delays by
    1/rate; rate "max" never waits. `sink` is anything with apply().

    Logical time comes from event timestamps either way, so rate only
    affects wall-clock duration, never outcomes.
    """
    if rate != "max":
        rate = float(rate)
        if rate <= 0:
            raise ValueError("replay rate must be positive or 'max'")
    prev_ts: Optional[float] = None
    for i, e in enumerate(events):
        if rate != "max" and prev_ts is not None and e.timestamp > prev_ts:
            sleep((e.timestamp - prev_ts) / rate)
        prev_ts = e.timestamp
        try:
            sink.apply(e)
        except (OSError, ProtocolError) as exc:
            raise SinkDisconnected(len(events) - i) from exc


# ---------------------------------------------------------------------------
# framed socket transport


def _send_frame(sock: socket.socket, payload: bytes) -> None:
    if len(payload) > MAX_FRAME:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds {MAX_FRAME}")
    sock.sendall(FRAME_HEADER.pack(len(payload)) + payload)


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    """Read exactly n bytes; None on clean EOF at a frame boundary."""
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            if buf:
                raise ProtocolError(
                    f"connection closed mid-frame ({len(buf)}/{n} bytes)")
            return None
        buf += chunk
    return buf


def _recv_frame(sock: socket.socket) -> Optional[bytes]:
    header = _recv_exact(sock, FRAME_HEADER.size)
    if header is None:
        return None
    (length,) = FRAME_HEADER.unpack(header)
    if length > MAX_FRAME:
        raise ProtocolError(f"declared frame length {length} exceeds {MAX_FRAME}")
    payload = _recv_exact(sock, length)
    if payload is None:
        raise ProtocolError("connection closed before frame payload")
    return payload


class StreamClient:
    """Pushes events to a tissue server over the framed transport."""

    def __init__(self, host: str, port: int):
        self._sock = socket.create_connection((host, port))

    def apply(self, event: Event) -> None:
        _send_frame(self._sock, format_event(event).encode("utf-8"))

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class TissueServer:
    """Accepts framed event streams and feeds them to one tissue run.

    Clients (for example one signal client and one antigen client)
    connect, push their streams, and disconnect; once the expected
    number of clients has finished, their streams are merged by
    timestamp and applied at tick boundaries via the shared runner. A
    client that violates the frame protocol is dropped (its partial
    stream discarded) without disturbing the others.
    """

    def __init__(self, runner: EventDrivenRunner, expected_clients: int = 1,
                 host: str = "127.0.0.1", port: int = 0):
        if expected_clients <= 0:
            raise ValueError("expected_clients must be positive")
        self.runner = runner
        self.expected_clients = expected_clients
        self._listener = socket.create_server((host, port))
        self._streams: list[tuple[int, list[Event]]] = []
        self._lock = threading.Lock()
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    def _accept_loop(self) -> None:
        handlers = []
        for index in range(self.expected_clients):
            conn, _ = self._listener.accept()
            t = threading.Thread(target=self._serve_client,
                                 args=(conn, index), daemon=True)
            t.start()
            handlers.append(t)
        for t in handlers:
            t.join()
        self._listener.close()

    def _serve_client(self, conn: socket.socket, index: int) -> None:
        events: list[Event] = []
        try:
            with conn:
                while True:
                    payload = _recv_frame(conn)
                    if payload is None:
                        break
                    events.append(parse_event(payload.decode("utf-8")))
        except ProtocolError as exc:
            log.warning("client %d dropped: %s", index, exc)
            return
        except StreamFormatError as exc:
            log.warning("client %d sent a malformed event: %s", index, exc)
            return
        with self._lock:
            self._streams.append((index, events))

    def wait(self) -> list[MigrationRecord]:
        """Block until all expected clients finish, then run the merged
        stream through the tissue and return its migration records."""
        self._thread.join()
        tagged = [
            (e.timestamp, 0 if e.kind == SIGNAL_SET else 1, index, i, e)
            for index, events in sorted(self._streams)
            for i, e in enumerate(events)
        ]
        merged = [entry[-1] for entry in sorted(tagged, key=lambda x: x[:4])]
        self.runner.run(merged)
        self.runner.drain()
        return self.runner.tissue.records


# ---------------------------------------------------------------------------
# the scan-detection experiment series


@dataclass(frozen=True)
class PortscanExperiment:
    """One row of the experiment series: which signals are active and
    the safe-to-mature weight override."""

    number: int
    mask: SignalMask
    safe_mat_weight: float


PORTSCAN_EXPERIMENTS: dict[int, PortscanExperiment] = {
    1: PortscanExperiment(1, SignalMask(use_pamp=False, use_inflammation=False), -1.0),
    2: PortscanExperiment(2, SignalMask(use_inflammation=False), -1.0),
    3: PortscanExperiment(3, SignalMask(use_inflammation=False), -2.0),
    4: PortscanExperiment(4, SignalMask(), -2.0),
}


@dataclass
class PortscanResult:
    """Aggregate outcome of one experiment over its repeats."""

    experiment: PortscanExperiment
    per_process_runs: dict[str, list[Optional[float]]]
    process_table: dict[str, tuple[float, float, float]]
    scanner_vs_transfer: PairedTTestResult
    antigen_per_cell: float
    verdicts_per_run: list[dict[str, AntigenVerdict]]


def run_portscan_experiment(scenario: ScenarioConfig, experiment: int,
                            seed: int = 0, repeats: int = 10,
                            num_cells: int = 500) -> PortscanResult:
    """Run one signal-combination experiment over fresh scenario noise
    per repeat, reporting per-process mature-presentation fractions,
    the scanner-vs-transfer paired test, and antigen per migrated cell."""
    try:
        exp = PORTSCAN_EXPERIMENTS[experiment]
    except KeyError:
        raise ValueError(f"unknown experiment number {experiment}") from None
    weights = WeightMatrix().with_safe_mat_weight(exp.safe_mat_weight)

    per_process: dict[str, list[Optional[float]]] = {}
    per_process_counts: dict[str, list[float]] = {}
    verdicts_per_run: list[dict[str, AntigenVerdict]] = []
    antigen_per_cell_runs: list[float] = []
    for r in range(repeats):
        events = generate_scenario(replace(
            scenario, noise_seed=scenario.noise_seed + 100003 * seed + r))
        cfg = PopulationConfig.portscan(
            seed=seed * 1000003 + r, num_cells=num_cells,
            tissue_antigen_capacity=num_cells, weights=weights)
        runner = EventDrivenRunner(Tissue(cfg), mask=exp.mask)
        runner.run(events)
        runner.drain()
        records = runner.tissue.records
        verdicts = aggregate(records)
        verdicts_per_run.append(verdicts)
        groups = scenario_process_groups(events)
        for name, mag in process_mag(verdicts, groups).items():
            per_process.setdefault(name, []).append(mag)
            per_process_counts.setdefault(name, []).append(
                sum(verdicts[l].total for l in groups[name] if l in verdicts))
        presented = sum(len(rec.antigens) for rec in records)
        antigen_per_cell_runs.append(presented / len(records) if records else 0.0)

    table: dict[str, tuple[float, float, float]] = {}
    for name, runs in per_process.items():
        defined = [v for v in runs if v is not None]
        mean, std = mean_and_std(defined) if defined else (0.0, 0.0)
        count_mean, _ = mean_and_std(per_process_counts[name])
        table[name] = (count_mean, mean, std)

    scanner = per_process.get(SCANNER_PROCESS, [])
    transfer = per_process.get(TRANSFER_PROCESS, [])
    pairs = [(x, y) for x, y in zip(scanner, transfer)
             if x is not None and y is not None]
    ttest = paired_t_test([p[0] for p in pairs], [p[1] for p in pairs])
    return PortscanResult(
        experiment=exp,
        per_process_runs=per_process,
        process_table=table,
        scanner_vs_transfer=ttest,
        antigen_per_cell=sum(antigen_per_cell_runs) / len(antigen_per_cell_runs),
        verdicts_per_run=verdicts_per_run,
    )
