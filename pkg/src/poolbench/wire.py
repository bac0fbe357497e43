"""Client side of the external-model wire protocol.

Newline-delimited JSON over the worker's stdin/stdout:

    -> {"op":"handshake","version":1}   <- {"ok":true,"model":str,"classes":int|null}
    -> {"op":"fit","X":[[..]],"y":[..],"seed":int}  <- {"ok":true,"fit_seconds":real}
    -> {"op":"predict_proba","X":[[..]]}            <- {"ok":true,"proba":[[..]]}
    -> {"op":"shutdown"}                            <- {"ok":true}
    any failure                                     <- {"ok":false,"error":str}

Reals travel as shortest round-trip decimals (plain JSON numbers). One
request is in flight at a time; a worker holds a single model, so callers
must consume predictions from one fit before issuing the next.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
import time
from pathlib import Path

import numpy as np

from .errors import WorkerError

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 300.0


class WorkerClient:
    """Owns one worker subprocess: spawn, handshake, request/reply, shutdown."""

    def __init__(self, argv: list[str], request_timeout: float = DEFAULT_TIMEOUT):
        self.argv = list(argv)
        self.request_timeout = request_timeout
        self.model_name: str | None = None
        self.declared_classes: int | None = None
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._lock = threading.Lock()

    def start(self) -> None:
        if self._proc is not None:
            return
        self._proc = subprocess.Popen(
            self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)
        reader = threading.Thread(target=self._pump, daemon=True)
        reader.start()
        reply = self._request({"op": "handshake", "version": PROTOCOL_VERSION})
        self.model_name = reply.get("model")
        self.declared_classes = reply.get("classes")

    def _pump(self) -> None:
        assert self._proc is not None and self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def _request(self, message: dict) -> dict:
        with self._lock:
            if self._proc is None or self._proc.poll() is not None:
                raise WorkerError(f"worker {self.argv[0]!r} is not running")
            assert self._proc.stdin is not None
            self._proc.stdin.write(json.dumps(message) + "\n")
            self._proc.stdin.flush()
            try:
                line = self._lines.get(timeout=self.request_timeout)
            except queue.Empty:
                self.kill()
                raise WorkerError(
                    f"worker timed out after {self.request_timeout}s on "
                    f"op={message.get('op')!r}") from None
            if line is None:
                raise WorkerError("worker closed its output stream")
            try:
                reply = json.loads(line)
            except json.JSONDecodeError as exc:
                self.kill()
                raise WorkerError(f"worker sent non-JSON reply: {line!r}") from exc
            if not reply.get("ok"):
                raise WorkerError(f"worker error: {reply.get('error', 'unknown')}")
            return reply

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int) -> float:
        reply = self._request({
            "op": "fit",
            "X": np.asarray(X, dtype=np.float64).tolist(),
            "y": np.asarray(y, dtype=np.int64).tolist(),
            "seed": int(seed),
        })
        return float(reply.get("fit_seconds", 0.0))

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        reply = self._request({
            "op": "predict_proba",
            "X": np.asarray(X, dtype=np.float64).tolist(),
        })
        proba = np.asarray(reply["proba"], dtype=np.float64)
        if proba.ndim != 2 or proba.shape[0] != np.asarray(X).shape[0]:
            raise WorkerError("worker returned a malformed probability matrix")
        return proba

    def shutdown(self) -> None:
        if self._proc is None:
            return
        try:
            if self._proc.poll() is None:
                self._request({"op": "shutdown"})
        except WorkerError:
            pass
        finally:
            self.kill()

    def kill(self) -> None:
        if self._proc is None:
            return
        if self._proc.poll() is None:
            self._proc.kill()
        try:
            self._proc.wait(timeout=10)
        except subprocess.TimeoutExpired:  # pragma: no cover
            pass
        self._proc = None

    def __enter__(self) -> "WorkerClient":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


class ExternalPredictor:
    """fit/predict_proba adapter over a WorkerClient, for the pool contract."""

    def __init__(self, client: WorkerClient, seed: int = 0):
        self.client = client
        self.seed = seed
        self.last_fit_seconds = 0.0
        self._fitted = False

    def fit(self, X, y, class_count: int | None = None):
        self.client.start()
        started = time.perf_counter()
        worker_seconds = self.client.fit(X, y, self.seed)
        self.last_fit_seconds = worker_seconds or (time.perf_counter() - started)
        self._fitted = True
        return self

    def predict_proba(self, X) -> np.ndarray:
        if not self._fitted:
            raise WorkerError("external predictor used before fit")
        return self.client.predict_proba(X)


def external_model(name: str, argv: list[str], seed: int = 0,
                   request_timeout: float = DEFAULT_TIMEOUT):
    """BaseModel handle over an external worker command line."""
    from .learners import BaseModel

    client = WorkerClient(argv, request_timeout=request_timeout)

    def factory(s: int) -> BaseModel:
        return BaseModel(name, "external", s, ExternalPredictor(client, seed=s),
                         supports_refit=True, factory=factory)

    return factory(seed)


def resolve_worker_argv(spec: str | list[str], base_dir: Path | None = None) -> list[str]:
    """Accept a command string or argv list from config; resolve a leading
    relative script path against the config directory."""
    argv = spec.split() if isinstance(spec, str) else list(spec)
    if not argv:
        raise WorkerError("empty worker command")
    if base_dir is not None:
        head = Path(argv[0])
        if not head.is_absolute() and (base_dir / head).exists():
            argv[0] = str(base_dir / head)
    return argv
