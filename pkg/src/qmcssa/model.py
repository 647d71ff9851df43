"""Black-box model interface: built-in analytic surrogate plus a
line-oriented subprocess protocol for driving external models.

The surrogate stands in for a general equilibrium solver. Per output it is
a quadratic with sparse interactions,

    y_r = sum_j A[r,j] b_j + sum_j B[r,j] b_j^2 + sum_{pairs} C[r,p] b_j b_j'

with coefficients drawn deterministically from the model seed. Linear
terms dominate and each output's "own" input block is weighted 10x the
cross blocks, so responses to signed shocks are asymmetric but smooth.
There is no constant term: a zero shock vector maps to zero outputs.

Subprocess protocol (version ``ssa-proto/1``), line-delimited over
stdin/stdout, flushed after every line:

    parent -> child   ssa-proto/1
    child  -> parent  ssa-proto/1
    parent -> child   <index>,<b_1>,...,<b_d>     (floats, 17 sig. digits)
    child  -> parent  <index>,<y_1>,...,<y_m>

Responses may arrive out of order; association is by index. A malformed
response or a per-evaluation timeout fails that record only, never the
batch. ``python -m qmcssa.model --inputs D --outputs M --seed S`` serves
the surrogate over this protocol.
"""

from __future__ import annotations

import logging
import shlex
import subprocess
import sys
import threading
import queue as queue_mod
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = "ssa-proto/1"
MODEL_KINDS = ("surrogate", "external")

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class ModelSpec:
    """What to evaluate: the built-in surrogate or an external command."""

    kind: str
    output_labels: tuple[str, ...]
    n_inputs: int
    surrogate_seed: int = 0
    external_command: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ConfigurationError(
                f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}"
            )
        if not self.output_labels:
            raise ConfigurationError("output_labels must be nonempty")
        if len(set(self.output_labels)) != len(self.output_labels):
            raise ConfigurationError("output_labels must be unique")
        if self.n_inputs < 1:
            raise ConfigurationError("n_inputs must be >= 1")
        if self.kind == "external" and not self.external_command:
            raise ConfigurationError("external model needs external_command")

    @property
    def n_outputs(self) -> int:
        return len(self.output_labels)


@dataclass
class EvaluationRecord:
    """One model evaluation, keyed by its sequence index."""

    index: int
    inputs: np.ndarray
    outputs: np.ndarray | None
    status: str  # "ok" | "failed"
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


# --------------------------------------------------------------------------
# Surrogate
# --------------------------------------------------------------------------

def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


class _CoefficientStream:
    """SplitMix64 stream delivering unit doubles for coefficient draws."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def unit(self) -> float:
        self._state = (self._state + _GAMMA) & _MASK64
        return (_mix64(self._state) >> 11) * 2.0**-53

    def signed(self, lo: float, hi: float) -> float:
        sign = 1.0 if self.unit() < 0.5 else -1.0
        return sign * (lo + (hi - lo) * self.unit())


@dataclass(frozen=True)
class SurrogateCoefficients:
    linear: np.ndarray  # (n_outputs, n_inputs)
    quadratic: np.ndarray  # (n_outputs, n_inputs)
    interaction: np.ndarray  # (n_outputs, n_pairs)
    pairs: tuple[tuple[int, int], ...]


def _input_group(j: int, n_inputs: int, n_outputs: int) -> int:
    """Block partition of inputs over outputs (its "own" region)."""
    return j * n_outputs // n_inputs


@lru_cache(maxsize=16)
def surrogate_coefficients(spec: ModelSpec) -> SurrogateCoefficients:
    """Deterministic coefficient tables for a surrogate spec.

    Draw order is fixed (all linear, then all quadratic, then all
    interaction coefficients, output-major) so tables are reproducible.
    Magnitudes: linear in [0.5, 1.5) scaled by 1 for the own block and 0.1
    across blocks; quadratic and interaction in [0.001, 0.003). Signs are
    independent fair draws.
    """
    if spec.kind != "surrogate":
        raise ConfigurationError("coefficients exist for surrogate models only")
    n_out, n_in = spec.n_outputs, spec.n_inputs
    stream = _CoefficientStream(spec.surrogate_seed)
    linear = np.empty((n_out, n_in))
    for r in range(n_out):
        for j in range(n_in):
            scale = 1.0 if _input_group(j, n_in, n_out) == r else 0.1
            linear[r, j] = scale * stream.signed(0.5, 1.5)
    quadratic = np.empty((n_out, n_in))
    for r in range(n_out):
        for j in range(n_in):
            quadratic[r, j] = stream.signed(0.001, 0.003)
    pairs = tuple(
        (j1, j2)
        for j1 in range(n_in)
        for j2 in range(j1 + 1, n_in)
        if _input_group(j1, n_in, n_out) == _input_group(j2, n_in, n_out)
    )
    interaction = np.empty((n_out, len(pairs)))
    for r in range(n_out):
        for p in range(len(pairs)):
            interaction[r, p] = stream.signed(0.001, 0.003)
    return SurrogateCoefficients(
        linear=linear, quadratic=quadratic, interaction=interaction, pairs=pairs
    )


def surrogate_evaluate(beta: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """Evaluate the surrogate at one shock vector."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (spec.n_inputs,):
        raise ConfigurationError(
            f"model expects {spec.n_inputs} inputs, got shape {beta.shape}"
        )
    coef = surrogate_coefficients(spec)
    out = coef.linear @ beta
    out += coef.quadratic @ (beta * beta)
    if coef.pairs:
        j1 = np.fromiter((p[0] for p in coef.pairs), dtype=np.int64)
        j2 = np.fromiter((p[1] for p in coef.pairs), dtype=np.int64)
        out += coef.interaction @ (beta[j1] * beta[j2])
    return out


def surrogate_serve_command(spec: ModelSpec) -> str:
    """Command line serving this surrogate over the subprocess protocol."""
    return (
        f"{shlex.quote(sys.executable)} -m qmcssa.model "
        f"--inputs {spec.n_inputs} --outputs {spec.n_outputs} "
        f"--seed {spec.surrogate_seed}"
    )


# --------------------------------------------------------------------------
# Subprocess protocol, parent side
# --------------------------------------------------------------------------

def format_request(index: int, values: np.ndarray) -> str:
    return ",".join([str(index)] + [f"{float(v):.17g}" for v in values])


def parse_response(line: str, n_outputs: int) -> tuple[int, np.ndarray]:
    parts = line.rstrip("\n").split(",")
    index = int(parts[0])
    values = np.array([float(c) for c in parts[1:]], dtype=np.float64)
    if values.shape != (n_outputs,):
        raise ValueError(f"expected {n_outputs} outputs, got {len(values)}")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite output values")
    return index, values


class _ProtocolWorker:
    """One child process plus a reader thread feeding a line queue."""

    def __init__(self, argv: list[str], timeout: float) -> None:
        self.argv = argv
        self.timeout = timeout
        self.proc: subprocess.Popen | None = None
        self.lines: queue_mod.Queue = queue_mod.Queue()
        self._spawn(initial=True)

    def _spawn(self, initial: bool = False) -> None:
        try:
            self.proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ConfigurationError(
                f"cannot spawn model command {shlex.join(self.argv)!r}: {exc}"
            ) from exc
        self.lines = queue_mod.Queue()
        reader = threading.Thread(
            target=self._read_loop, args=(self.proc, self.lines), daemon=True
        )
        reader.start()
        try:
            self.proc.stdin.write(PROTOCOL_VERSION + "\n")
            self.proc.stdin.flush()
            first = self.lines.get(timeout=self.timeout)
            if first is None or first.strip() != PROTOCOL_VERSION:
                raise ConfigurationError(
                    f"model command did not answer the {PROTOCOL_VERSION} "
                    f"handshake (got {first!r})"
                )
        except (queue_mod.Empty, BrokenPipeError) as exc:
            raise ConfigurationError(
                f"model command {shlex.join(self.argv)!r} failed the protocol "
                "handshake"
            ) from exc

    @staticmethod
    def _read_loop(proc: subprocess.Popen, lines: queue_mod.Queue) -> None:
        for line in proc.stdout:
            lines.put(line)
        lines.put(None)  # EOF sentinel

    def _respawn(self) -> None:
        self.kill()
        self._spawn()

    def kill(self) -> None:
        if self.proc is not None and self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()

    def evaluate(self, index: int, values: np.ndarray, n_outputs: int
                 ) -> tuple[np.ndarray | None, str]:
        """Run one request/response round trip; (outputs, detail)."""
        try:
            self.proc.stdin.write(format_request(index, values) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self._respawn()
            return None, "model process pipe closed before request"
        deadline = self.timeout
        while True:
            try:
                line = self.lines.get(timeout=deadline)
            except queue_mod.Empty:
                self._respawn()
                return None, f"timeout after {self.timeout}s"
            if line is None:
                self._respawn()
                return None, "model process exited before responding"
            try:
                got_index, outputs = parse_response(line, n_outputs)
            except (ValueError, IndexError) as exc:
                # if the index prefix parses it names the failed evaluation
                try:
                    got_index = int(line.split(",", 1)[0])
                except ValueError:
                    logger.warning("unparseable model output line: %r", line.strip())
                    continue
                if got_index == index:
                    return None, f"malformed response: {exc}"
                logger.warning("model response for unexpected index %d", got_index)
                continue
            if got_index == index:
                return outputs, ""
            logger.warning("model response for unexpected index %d", got_index)


def external_evaluate_batch(
    shocks,
    spec: ModelSpec,
    workers: int = 1,
    timeout: float = 60.0,
) -> list[EvaluationRecord]:
    """Evaluate every shock row through the external command.

    Up to ``workers`` child pipelines run concurrently; results are keyed
    by index so the outcome is independent of scheduling. Failed
    evaluations (timeout, malformed or missing response) become
    status=failed records and never abort the batch.
    """
    if spec.kind != "external":
        raise ConfigurationError("external_evaluate_batch needs an external model")
    values = shocks.values
    n = values.shape[0]
    if values.shape[1] != spec.n_inputs:
        raise ConfigurationError(
            f"shock matrix has {values.shape[1]} columns, model expects {spec.n_inputs}"
        )
    argv = shlex.split(spec.external_command)
    workers = max(1, min(workers, n))
    records: dict[int, EvaluationRecord] = {}
    records_lock = threading.Lock()
    work: queue_mod.Queue = queue_mod.Queue()
    for i in range(n):
        work.put(i)
    spawn_error: list[Exception] = []

    def run_worker() -> None:
        try:
            client = _ProtocolWorker(argv, timeout)
        except ConfigurationError as exc:
            spawn_error.append(exc)
            return
        try:
            while True:
                try:
                    i = work.get_nowait()
                except queue_mod.Empty:
                    return
                try:
                    outputs, detail = client.evaluate(i, values[i], spec.n_outputs)
                except ConfigurationError as exc:
                    outputs, detail = None, f"model respawn failed: {exc}"
                status = "ok" if outputs is not None else "failed"
                if detail:
                    logger.warning("evaluation %d failed: %s", i, detail)
                with records_lock:
                    records[i] = EvaluationRecord(
                        index=i, inputs=values[i], outputs=outputs,
                        status=status, detail=detail,
                    )
        finally:
            client.kill()

    threads = [threading.Thread(target=run_worker) for _ in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if spawn_error:
        raise spawn_error[0]
    missing = [i for i in range(n) if i not in records]
    for i in missing:
        records[i] = EvaluationRecord(
            index=i, inputs=values[i], outputs=None,
            status="failed", detail="worker exited before evaluation",
        )
    return [records[i] for i in range(n)]


def surrogate_evaluate_batch(shocks, spec: ModelSpec) -> list[EvaluationRecord]:
    """In-process surrogate evaluation, row by row.

    Kept deliberately per-row (no matrix-matrix shortcut) so the arithmetic
    is identical to what a protocol child computes per request.
    """
    if spec.kind != "surrogate":
        raise ConfigurationError("surrogate_evaluate_batch needs a surrogate model")
    values = shocks.values
    out = []
    for i in range(values.shape[0]):
        out.append(
            EvaluationRecord(
                index=i,
                inputs=values[i],
                outputs=surrogate_evaluate(values[i], spec),
                status="ok",
            )
        )
    return out


# --------------------------------------------------------------------------
# Subprocess protocol, child side (surrogate server)
# --------------------------------------------------------------------------

def serve_surrogate(spec: ModelSpec, stdin=None, stdout=None) -> int:
    """Serve the surrogate over the protocol until stdin closes."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    first = stdin.readline()
    if first.strip() != PROTOCOL_VERSION:
        stdout.write(f"protocol-error unsupported version {first.strip()!r}\n")
        stdout.flush()
        return 2
    stdout.write(PROTOCOL_VERSION + "\n")
    stdout.flush()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        index = parts[0]
        beta = np.array([float(c) for c in parts[1:]], dtype=np.float64)
        outputs = surrogate_evaluate(beta, spec)
        stdout.write(
            ",".join([index] + [f"{float(v):.17g}" for v in outputs]) + "\n"
        )
        stdout.flush()
    return 0


def _main(argv: list[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(
        prog="python -m qmcssa.model",
        description="Serve the built-in surrogate over the ssa-proto/1 protocol.",
    )
    parser.add_argument("--inputs", type=int, required=True)
    parser.add_argument("--outputs", type=int, required=True)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    spec = ModelSpec(
        kind="surrogate",
        output_labels=tuple(f"out_{r + 1}" for r in range(args.outputs)),
        n_inputs=args.inputs,
        surrogate_seed=args.seed,
    )
    return serve_surrogate(spec)


if __name__ == "__main__":
    sys.exit(_main())
