"""Bridge to external scorer processes over newline-delimited JSON.

The child process speaks the wire protocol on its standard streams:

* handshake (first line from the child):
  ``{"proto": "cmlm-scorer", "version": 1, "vocab_size": <int>}``
* request: ``{"id": <int>, "src": [<int>...], "tgt": [<int or null>...],
  "n": <int>, "topk": <int>}`` where ``null`` marks MASK
* response: ``{"id": <int>, "preds": [{"pos": <int>,
  "dist": [[<token>, <prob>], ...]}, ...]}``

All integers are token ids and all floats are linear probabilities.
Requests on one connection are serialized; responses must arrive in
request order with matching ids.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
from typing import Sequence

import numpy as np

from ..types import MASK, HypothesisState
from .base import Scorer, top_lengths, triangular_length_probs

HANDSHAKE_PROTO = "cmlm-scorer"
HANDSHAKE_VERSION = 1
#: Tolerated excess when checking that reported top-k mass does not exceed 1.
MASS_TOL = 1e-6


class ProtocolError(RuntimeError):
    """The child violated the wire protocol; the message carries the offending line."""


class ScorerTimeout(ProtocolError):
    """The child did not answer within the configured timeout."""


class DesyncError(ProtocolError):
    """A response id did not match the pending request id."""


class ExternalScorer(Scorer):
    """Runs a scorer child process and validates every exchange.

    ``command`` is the child command line (string or argv list). ``topk``
    bounds the per-position distribution size requested from the child;
    returned mass is renormalized to 1. The wire protocol carries no length
    model, so length candidates come from the same triangular proposal the
    planted scorer uses.
    """

    def __init__(self, command: str | Sequence[str], topk: int = 8, timeout: float = 10.0) -> None:
        if topk < 1:
            raise ValueError("topk must be >= 1")
        self.command = command
        self.topk = topk
        self.timeout = timeout
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._lock = threading.Lock()
        self._next_id = 0
        self._handshake()

    # -- plumbing -----------------------------------------------------------

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _read_line(self) -> str:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ScorerTimeout(f"no response within {self.timeout}s") from None
        if line is None:
            raise ProtocolError("scorer process closed its output stream")
        return line

    def _read_json(self) -> dict:
        line = self._read_line()
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed JSON from scorer: {line.rstrip()!r}") from exc
        if not isinstance(msg, dict):
            raise ProtocolError(f"expected a JSON object, got: {line.rstrip()!r}")
        return msg

    def _handshake(self) -> None:
        msg = self._read_json()
        if msg.get("proto") != HANDSHAKE_PROTO or msg.get("version") != HANDSHAKE_VERSION:
            raise ProtocolError(f"unexpected handshake: {msg!r}")
        vocab = msg.get("vocab_size")
        if not isinstance(vocab, int) or vocab < 2:
            raise ProtocolError(f"handshake lacks a usable vocab_size: {msg!r}")
        self.vocab_size = vocab

    def close(self) -> None:
        if self._proc.poll() is None:
            if self._proc.stdin is not None:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalScorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- scorer contract -----------------------------------------------------

    def distributions(
        self, src: Sequence[int], state: HypothesisState, *, all_positions: bool = False
    ) -> dict[int, np.ndarray]:
        if all_positions:
            raise ProtocolError("the wire protocol serves masked positions only")
        masked = state.masked_positions
        tgt = [None if t == MASK else t for t in state.tokens]
        with self._lock:
            request_id = self._next_id
            self._next_id += 1
            payload = {
                "id": request_id,
                "src": [int(t) for t in src],
                "tgt": tgt,
                "n": state.n,
                "topk": self.topk,
            }
            assert self._proc.stdin is not None
            try:
                self._proc.stdin.write(json.dumps(payload) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise ProtocolError("scorer process is gone") from exc
            msg = self._read_json()
        if "error" in msg:
            raise ProtocolError(f"scorer reported an error: {msg['error']}")
        if msg.get("id") != request_id:
            raise DesyncError(f"expected response id {request_id}, got {msg.get('id')!r}")
        return self._parse_preds(msg, masked)

    def _parse_preds(self, msg: dict, masked: tuple[int, ...]) -> dict[int, np.ndarray]:
        preds = msg.get("preds")
        if not isinstance(preds, list):
            raise ProtocolError(f"response lacks a preds list: {msg!r}")
        out: dict[int, np.ndarray] = {}
        for entry in preds:
            pos = entry.get("pos") if isinstance(entry, dict) else None
            dist = entry.get("dist") if isinstance(entry, dict) else None
            if not isinstance(pos, int) or not isinstance(dist, list) or not dist:
                raise ProtocolError(f"malformed prediction entry: {entry!r}")
            if pos in out:
                raise ProtocolError(f"duplicate prediction for position {pos}")
            vec = np.zeros(self.vocab_size)
            for item in dist:
                if not (isinstance(item, list) and len(item) == 2):
                    raise ProtocolError(f"malformed dist item: {item!r}")
                token, prob = item
                if not isinstance(token, int) or not 0 <= token < self.vocab_size:
                    raise ProtocolError(f"token id {token!r} outside vocabulary")
                prob = float(prob)
                if prob < 0:
                    raise ProtocolError(f"negative probability {prob} for token {token}")
                vec[token] += prob
            mass = float(vec.sum())
            if mass <= 0 or mass > 1.0 + MASS_TOL:
                raise ProtocolError(f"position {pos}: top-k mass {mass} is not a probability")
            out[pos] = vec / mass
        if set(out) != set(masked):
            raise ProtocolError(
                f"response covers positions {sorted(out)}, expected masked positions {sorted(masked)}"
            )
        return out

    def predict_lengths(self, src: Sequence[int], beam: int) -> list[tuple[int, float]]:
        if not src:
            raise ValueError("src must be non-empty")
        return top_lengths(triangular_length_probs(len(src)), beam)
