"""Live sessions and the wire protocol behind the companion UI.

A session owns one trial engine and advances it a tick at a time; a socket
client (or a replayed log) feeds it messages, and every tick fans out a small
batch of JSON updates.  Controller samples are coalesced latest-wins per hand
per tick, so clients may stream faster than the loop without backing it up,
and a slow reader drops frames rather than stalling the tick.  All messages
are JSON objects carrying ``schema_version`` and a ``tick`` stamp; the
session's tick counter is monotone even across resets.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import math
import os
from collections import deque
from dataclasses import replace
from typing import Mapping

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .behaviors import AssistMode, ControllerInput
from .geometry import GeometryError, Pose
from .harness import (
    HANDS,
    SCHEMA_VERSION,
    HarnessError,
    TrialConfig,
    TrialLog,
    TrialMetrics,
    TrialEngine,
    compute_metrics,
)
from .intention import FRAME_RATE_HZ, ModelWeights
from .planner import GoalLibrary

CLIENT_TYPES = ("controller_input", "set_mode", "set_task", "reset")
SERVER_TYPES = ("state_update", "plan_update", "behavior_update", "feedback", "metrics", "error")


class WireError(ValueError):
    """Inbound message the service refuses to act on."""

    def __init__(self, reason: str, *, version_mismatch: bool = False):
        super().__init__(reason)
        self.reason = reason
        # a client speaking another schema gets hung up on instead of a reply
        self.version_mismatch = version_mismatch


def parse_client(raw) -> dict:
    """Validate one client message (text or an already-decoded object) and
    return it as a plain dict.  Anything off-contract raises WireError."""
    if isinstance(raw, (str, bytes)):
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise WireError(f"invalid JSON: {exc}") from None
    else:
        msg = raw
    if not isinstance(msg, dict):
        raise WireError("message must be a JSON object")
    kind = msg.get("type")
    if kind not in CLIENT_TYPES:
        raise WireError(f"unknown message type {kind!r}")
    ver = msg.get("schema_version")
    if ver != SCHEMA_VERSION:
        raise WireError(f"schema_version {ver!r} is not {SCHEMA_VERSION}", version_mismatch=True)
    tick = msg.get("tick")
    if not isinstance(tick, int) or isinstance(tick, bool) or tick < 0:
        raise WireError("tick must be a non-negative integer")

    if kind == "controller_input":
        if msg.get("hand") not in HANDS:
            raise WireError(f"unknown hand {msg.get('hand')!r}")
        pose = msg.get("pose")
        if not isinstance(pose, (list, tuple)) or len(pose) != 7:
            raise WireError("pose must be 7 numbers: xyz + wxyz")
        try:
            Pose.from_array(np.asarray(pose, dtype=np.float64))
        except (GeometryError, TypeError, ValueError) as exc:
            raise WireError(f"bad pose: {exc}") from None
        for flag in ("grasp_button", "finger_open"):
            if not isinstance(msg.get(flag, False), bool):
                raise WireError(f"{flag} must be a boolean")
    elif kind == "set_mode":
        try:
            AssistMode(msg.get("mode"))
        except ValueError:
            raise WireError(f"unknown mode {msg.get('mode')!r}") from None
    elif kind == "set_task":
        if not isinstance(msg.get("task"), str):
            raise WireError("task must be a string")
    elif kind == "reset":
        seed = msg.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
            raise WireError("seed must be an integer")
    return msg


def _finite(x: float):
    # NaN is not JSON; browsers reject it even though json.dumps emits it
    return None if isinstance(x, float) and math.isnan(x) else x


class Session:
    """One live loop plus its connected-client bookkeeping.

    ``apply`` mutates state for one already-parsed client message and returns
    any direct replies; ``tick`` advances the engine on the coalesced inputs
    and returns the broadcast batch.  Both are plain synchronous calls — the
    socket layer funnels every connection through a single task, so the loop
    stays the only writer.
    """

    def __init__(
        self,
        cfg: TrialConfig,
        lib: GoalLibrary | None = None,
        weights: ModelWeights | None = None,
        log_dir: str | None = None,
    ):
        self.lib = lib or GoalLibrary.builtin()
        self.weights = weights
        self.log_dir = log_dir
        self.clients = 0
        self.tick_no = 0  # wire stamp; survives resets so it stays monotone
        self.last_log: TrialLog | None = None
        self.last_log_path: str | None = None
        self.last_metrics: TrialMetrics | None = None
        self._start(cfg)

    def _start(self, cfg: TrialConfig) -> None:
        engine = TrialEngine(cfg, self.lib, self.weights)  # may reject the task
        self.cfg = cfg
        self.engine = engine
        # hold-last default: an idle hand keeps its spawn pose until told
        self.latest = {h: ControllerInput(h, self.engine.world.hands[h]) for h in HANDS}
        self.finished = False
        self._sent_behavior: dict | None = None
        self._sent_plan: object = ()

    # -- client messages ----------------------------------------------------

    def apply(self, msg: Mapping) -> list:
        kind = msg["type"]
        if kind == "controller_input":
            h = msg["hand"]
            self.latest[h] = ControllerInput(
                h,
                Pose.from_array(np.asarray(msg["pose"], dtype=np.float64)),
                grasp_button=bool(msg.get("grasp_button", False)),
                finger_open=bool(msg.get("finger_open", False)),
            )
            return []
        if kind == "set_mode":
            self.engine.mode = AssistMode(msg["mode"])  # live, no reset
            return []
        if kind == "set_task":
            mode = self.engine.mode  # the mode toggle outlives the reset
            try:
                self._start(replace(self.cfg, task=msg["task"], mode=mode))
            except HarnessError as exc:
                return [self._stamp({"type": "error", "reason": str(exc)})]
            return []
        if kind == "reset":
            seed = msg.get("seed")
            mode = self.engine.mode
            self._start(replace(self.cfg, mode=mode) if seed is None else replace(self.cfg, seed=int(seed), mode=mode))
            return []
        raise WireError(f"unknown message type {kind!r}")

    def resync(self) -> None:
        """Forget what was already announced so the next tick rebroadcasts the
        current plan and behavior rows.  Called when a client joins: those
        messages only go out on change, and a late joiner missed them.
        Re-delivery is harmless to everyone else (same content, same tick)."""
        self._sent_behavior = None
        self._sent_plan = ()

    # -- loop ----------------------------------------------------------------

    def _stamp(self, msg: dict) -> dict:
        msg["schema_version"] = SCHEMA_VERSION
        msg["tick"] = self.tick_no
        return msg

    def _state_update(self) -> dict:
        eng = self.engine
        return self._stamp(
            {
                "type": "state_update",
                "task": self.cfg.task,
                "mode": eng.mode.value,
                "trial_tick": eng.t,
                "done": self.finished,
                "world": eng.world.to_dict(),
            }
        )

    def tick(self) -> list:
        """Advance one tick; returns the messages to broadcast, state first."""
        out = []
        eng = self.engine
        self.tick_no += 1
        if not eng.done:
            rec = eng.step(dict(self.latest))
            plan_key = (json.dumps(rec["plan"], sort_keys=True), eng.plan_label)
            if plan_key != self._sent_plan:
                ghost = rec["plan"]["target_pose"] if rec["plan"] else None
                out.append(
                    self._stamp({"type": "plan_update", "step": rec["plan"], "label": eng.plan_label, "ghost": ghost})
                )
                self._sent_plan = plan_key
            if rec["behavior"] != self._sent_behavior:
                out.append(
                    self._stamp({"type": "behavior_update", "behaviors": rec["behavior"], "mode": eng.mode.value})
                )
                self._sent_behavior = rec["behavior"]
            for ev in rec["events"]:
                out.append(self._stamp(dict(ev, type="feedback")))
        if eng.done and not self.finished:
            self.finished = True
            self.last_log = eng.finish()
            self.last_metrics = compute_metrics(self.last_log, self.lib)
            if self.log_dir is not None:
                name = f"{self.cfg.task}_{self.cfg.mode.value}_s{self.cfg.seed}_t{self.tick_no}.log.jsonl"
                self.last_log_path = os.path.join(self.log_dir, name)
                self.last_log.write(self.last_log_path)
            m = self.last_metrics
            out.append(
                self._stamp(
                    {
                        "type": "metrics",
                        "metrics": {
                            "time": m.time,
                            "success": m.success,
                            "progress": m.progress,
                            "position_error": _finite(m.position_error),
                            "orientation_error_deg": _finite(m.orientation_error_deg),
                        },
                    }
                )
            )
        # state always goes out, trial over or not, so late joiners and mode
        # flips render; it leads the batch so clients draw before annotating
        out.insert(0, self._state_update())
        return out


def replay_log(
    log: TrialLog,
    lib: GoalLibrary | None = None,
    weights: ModelWeights | None = None,
) -> TrialMetrics:
    """Feed a recorded trial's tick-stamped inputs through a fresh session,
    exactly as a socket client would, and return the metrics it reports.

    A trial and its replay must score identically — the loop is driven by its
    inputs alone, so this doubles as the regression guard for hidden state.
    """
    if not log.ticks:
        raise HarnessError("log carries no tick records to replay")
    sess = Session(log.config, lib=lib, weights=weights)
    for rec in log.ticks:
        for h in HANDS:
            d = rec["inputs"][h]
            sess.apply(
                parse_client(
                    {
                        "type": "controller_input",
                        "schema_version": SCHEMA_VERSION,
                        "tick": int(rec["t"]),
                        "hand": h,
                        "pose": list(d["pose"]),
                        "grasp_button": bool(d["grasp"]),
                        "finger_open": bool(d["finger"]),
                    }
                )
            )
        sess.tick()
        if sess.finished:
            break
    if not sess.finished:
        # truncated recording: score whatever state it reached
        sess.last_log = sess.engine.finish()
        sess.last_metrics = compute_metrics(sess.last_log, sess.lib)
    return sess.last_metrics


# ---------------------------------------------------------------------------
# socket front-end


def build_app(session: Session, hz: float = float(FRAME_RATE_HZ), static_dir=None):
    """FastAPI app around one session: ``/ws`` speaks the wire schema,
    ``/healthz`` reports loop vitals, and an optional static directory serves
    the UI bundle.  The simulation task starts with the app's lifespan."""
    queues: set = set()
    inbox: deque = deque()  # (reply queue, parsed message), drained in order

    def _offer(q, text: str) -> None:
        try:
            q.put_nowait(text)
        except asyncio.QueueFull:
            with contextlib.suppress(asyncio.QueueEmpty):
                q.get_nowait()  # drop the oldest frame, keep the connection
            q.put_nowait(text)

    async def _loop() -> None:
        period = 1.0 / hz
        aio = asyncio.get_running_loop()
        next_at = aio.time()
        while True:
            while inbox:
                q, msg = inbox.popleft()
                for reply in session.apply(msg):
                    _offer(q, json.dumps(reply))
            for out in session.tick():
                text = json.dumps(out)
                for q in list(queues):
                    _offer(q, text)
            next_at += period
            await asyncio.sleep(max(0.0, next_at - aio.time()))

    @contextlib.asynccontextmanager
    async def _lifespan(app):
        task = asyncio.create_task(_loop())
        try:
            yield
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task

    app = FastAPI(lifespan=_lifespan)
    app.state.session = session

    @app.get("/healthz")
    def healthz():
        return {
            "ok": True,
            "schema_version": SCHEMA_VERSION,
            "tick": session.tick_no,
            "clients": session.clients,
            "task": session.cfg.task,
            "mode": session.engine.mode.value,
        }

    async def _pump(sock: WebSocket, q) -> None:
        with contextlib.suppress(Exception):  # peer vanishing ends the pump
            while True:
                await sock.send_text(await q.get())

    @app.websocket("/ws")
    async def ws(sock: WebSocket):
        await sock.accept()
        ver = sock.query_params.get("schema_version")
        if ver is not None and ver != str(SCHEMA_VERSION):
            await sock.send_text(
                json.dumps(
                    {
                        "type": "error",
                        "schema_version": SCHEMA_VERSION,
                        "tick": session.tick_no,
                        "reason": f"schema_version {ver} is not {SCHEMA_VERSION}",
                    }
                )
            )
            await sock.close(code=4003)
            return
        q: asyncio.Queue = asyncio.Queue(maxsize=256)
        queues.add(q)
        session.clients += 1
        session.resync()  # catch the newcomer up on plan and behavior rows
        pump = asyncio.create_task(_pump(sock, q))
        try:
            while True:
                raw = await sock.receive_text()
                try:
                    msg = parse_client(raw)
                except WireError as exc:
                    err = json.dumps(
                        {"type": "error", "schema_version": SCHEMA_VERSION, "tick": session.tick_no, "reason": exc.reason}
                    )
                    if exc.version_mismatch:
                        await sock.send_text(err)
                        break  # different schema: refuse further service
                    _offer(q, err)  # malformed: answer it, keep the connection
                    continue
                inbox.append((q, msg))
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await pump
            queues.discard(q)
            session.clients -= 1

    if static_dir is not None:
        from starlette.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(
    cfg: TrialConfig,
    port: int = 8750,
    host: str = "127.0.0.1",
    lib: GoalLibrary | None = None,
    weights: ModelWeights | None = None,
    static_dir=None,
    hz: float = float(FRAME_RATE_HZ),
    log_dir: str | None = None,
) -> None:
    """Run the socket service until interrupted."""
    import uvicorn

    app = build_app(Session(cfg, lib=lib, weights=weights, log_dir=log_dir), hz=hz, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
