# net/__init__.py
from net.model import (
    ArcKind,
    ArcRecord,
    ContractError,
    Incidence,
    Marking,
    MergeError,
    Net,
    NetBuilder,
    NetError,
    PlaceKind,
    PlaceRecord,
    Port,
    PortDirection,
    PortRole,
    SafetyViolation,
    Trace,
    TransitionRecord,
    UnknownNodeError,
    enabled,
    fire,
    incidence,
    merge,
    postset,
    preset,
    readset,
    validate,
)

__all__ = [
    "ArcKind", "ArcRecord", "ContractError", "Incidence", "Marking", "MergeError", "Net",
    "NetBuilder", "NetError", "PlaceKind", "PlaceRecord", "Port", "PortDirection", "PortRole",
    "SafetyViolation", "Trace", "TransitionRecord", "UnknownNodeError", "enabled", "fire",
    "incidence", "merge", "postset", "preset", "readset", "validate",
]
