"""Request loop: protocol records in, backend answers out.

Single-threaded; at most one active propagation session per session_id,
frames strictly in submission order. Malformed records and backend
failures produce error responses and never tear down other sessions.
"""

from __future__ import annotations

import json
import sys

from . import protocol
from .backends import TRACK_LOST


def serve(backend, stdin=None, stdout=None, inline_masks: bool = False) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    sessions: set[str] = set()

    def reply(record: dict) -> None:
        protocol.write_record(stdout, record)

    def reply_result(result, image_path: str) -> None:
        if result is TRACK_LOST:
            reply({"kind": "track_lost"})
        elif result is None:
            reply({"kind": "no_detection"})
        else:
            reply(protocol.mask_response(result, image_path, inline_masks))

    while True:
        try:
            request = protocol.read_record(stdin)
        except (ValueError, json.JSONDecodeError) as exc:
            reply({"kind": "error", "message": f"malformed record: {exc}"})
            continue
        if request is None:
            return
        kind = request.get("kind")
        try:
            if kind == "hello":
                reply(
                    {
                        "kind": "hello",
                        "protocol_version": protocol.PROTOCOL_VERSION,
                        "capabilities": list(backend.capabilities),
                    }
                )
            elif kind == "detect_person":
                reply_result(backend.detect(request["image_path"]), request["image_path"])
            elif kind == "track_begin":
                session = request["session_id"]
                prompt = request["point_prompt"]
                result = backend.track_begin(
                    session, request["image_path"], (prompt["u"], prompt["v"])
                )
                if result is not TRACK_LOST:
                    sessions.add(session)
                reply_result(result, request["image_path"])
            elif kind == "track_next":
                session = request["session_id"]
                if session not in sessions:
                    reply({"kind": "error", "message": f"unknown session {session!r}"})
                    continue
                result = backend.track_next(session, request["image_path"])
                reply_result(result, request["image_path"])
            elif kind == "track_end":
                session = request.get("session_id")
                if session not in sessions:
                    reply({"kind": "error", "message": f"unknown session {session!r}"})
                    continue
                sessions.discard(session)
                backend.track_end(session)
                reply({"kind": "ok"})
            else:
                reply({"kind": "error", "message": f"unknown request kind {kind!r}"})
        except (KeyError, FileNotFoundError, ValueError, OSError) as exc:
            reply({"kind": "error", "message": str(exc)})
