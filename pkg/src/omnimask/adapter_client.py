"""Client side of the adapter subprocess protocol."""

from __future__ import annotations

import subprocess
from typing import Optional, Sequence

import numpy as np

from . import protocol
from .errors import AdapterError

TRACK_LOST = "track_lost"


class AdapterClient:
    """Spawns an adapter subprocess and exchanges protocol records.

    The constructor performs the hello handshake; use as a context
    manager to guarantee the subprocess is reaped.
    """

    def __init__(self, argv: Sequence[str], cwd: Optional[str] = None):
        self.argv = list(argv)
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                cwd=cwd,
            )
        except OSError as exc:
            raise AdapterError(f"failed to spawn adapter {self.argv}: {exc}") from exc
        hello = self._request({"kind": "hello", "protocol_version": protocol.PROTOCOL_VERSION})
        if hello.get("kind") != "hello":
            raise AdapterError(f"adapter handshake failed: {hello}")
        self.capabilities = tuple(hello.get("capabilities", ()))

    def __enter__(self) -> "AdapterClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def _request(self, record: dict) -> dict:
        if self._proc.poll() is not None:
            raise AdapterError(f"adapter exited with code {self._proc.returncode}")
        protocol.write_record(self._proc.stdin, record)
        response = protocol.read_record(self._proc.stdout)
        if response is None:
            raise AdapterError("adapter closed its output stream mid-session")
        if response.get("kind") == "error":
            raise AdapterError(f"adapter error: {response.get('message', '<no message>')}")
        return response

    def _mask_or_none(self, response: dict) -> Optional[np.ndarray]:
        kind = response.get("kind")
        if kind == "no_detection":
            return None
        if kind == "mask":
            return protocol.load_mask_payload(response)
        raise AdapterError(f"unexpected adapter response kind {kind!r}")

    def detect_person(self, image_path) -> Optional[np.ndarray]:
        """Union person mask for one image, or None if nothing detected."""
        resp = self._request({"kind": "detect_person", "image_path": str(image_path)})
        return self._mask_or_none(resp)

    def track_begin(self, session_id: str, image_path, point: tuple[float, float]):
        """Open a propagation session with a point prompt on the first frame.

        Returns a mask, None (no detection), or TRACK_LOST.
        """
        resp = self._request(
            {
                "kind": "track_begin",
                "session_id": session_id,
                "image_path": str(image_path),
                "point_prompt": {"u": point[0], "v": point[1]},
            }
        )
        if resp.get("kind") == "track_lost":
            return TRACK_LOST
        return self._mask_or_none(resp)

    def track_next(self, session_id: str, image_path):
        """Propagate the session to the next frame (submission order)."""
        resp = self._request(
            {"kind": "track_next", "session_id": session_id, "image_path": str(image_path)}
        )
        if resp.get("kind") == "track_lost":
            return TRACK_LOST
        return self._mask_or_none(resp)

    def track_end(self, session_id: str) -> None:
        self._request({"kind": "track_end", "session_id": session_id})
