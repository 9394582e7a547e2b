from .manager import Execution, Manager
from .protocol import PROTOCOL_VERSION, read_message, write_message
from .worker import WorkerNode

__all__ = [
    "Execution",
    "Manager",
    "PROTOCOL_VERSION",
    "read_message",
    "write_message",
    "WorkerNode",
]
