import datetime
import json
import logging
from contextvars import ContextVar
from typing import Any

import numpy as np

logger = logging.getLogger("sparsepls")

_run_id_ctx: ContextVar[str | None] = ContextVar("run_id", default=None)
_trial_id_ctx: ContextVar[int | None] = ContextVar("trial_id", default=None)
_fold_id_ctx: ContextVar[int | None] = ContextVar("fold_id", default=None)
_method_ctx: ContextVar[str | None] = ContextVar("method", default=None)

def set_run_id(run_id: str | None) -> None:
    _run_id_ctx.set(run_id)

def get_run_id() -> str | None:
    return _run_id_ctx.get()

def set_trial_id(trial_id: int | None) -> None:
    _trial_id_ctx.set(trial_id)

def get_trial_id() -> int | None:
    return _trial_id_ctx.get()

def set_fold_id(fold_id: int | None) -> None:
    """Track which CV fold is being fitted so solver logs can be traced back."""
    _fold_id_ctx.set(fold_id)

def get_fold_id() -> int | None:
    return _fold_id_ctx.get()

def set_method(method: str | None) -> None:
    _method_ctx.set(method)

def get_method() -> str | None:
    return _method_ctx.get()


# ---------------------------------------------------------------------------
# Structured JSON logging
# ---------------------------------------------------------------------------

def _json_default(value: Any) -> Any:
    # numpy scalars and small arrays show up in solver diagnostics.
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def _base_payload(event: str, level: str, **fields) -> dict:
    payload = {
        "ts": datetime.datetime.now(datetime.timezone.utc).isoformat().replace("+00:00", "Z"),
        "level": level,
        "event": event,
        **{k: v for k, v in fields.items() if v is not None},
    }
    run_id   = get_run_id()
    trial_id = get_trial_id()
    fold_id  = get_fold_id()
    method   = get_method()

    if run_id is not None   and "run_id"   not in payload: payload["run_id"]   = run_id
    if trial_id is not None and "trial_id" not in payload: payload["trial_id"] = trial_id
    if fold_id is not None  and "fold_id"  not in payload: payload["fold_id"]  = fold_id
    if method is not None   and "method"   not in payload: payload["method"]   = method

    return payload


def log_event(event: str, level: str = "info", **fields) -> None:
    """Emit a structured JSON log line carrying the current run/trial/fold context."""
    name = level if level in ("debug", "info", "warning", "error", "critical") else "info"
    # Solver loops log at debug; skip the JSON encoding when nobody listens.
    if not logger.isEnabledFor(getattr(logging, name.upper())):
        return
    payload = _base_payload(event, name, **fields)
    getattr(logger, name)(json.dumps(payload, ensure_ascii=False, default=_json_default))


def configure_logging(level: str = "INFO") -> None:
    """Attach a message-only stderr handler; the payload is already JSON."""
    if not any(getattr(h, "_sparsepls", False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(message)s"))
        handler._sparsepls = True
        logger.addHandler(handler)
    logger.setLevel(level.upper())
