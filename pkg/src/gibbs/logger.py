import dataclasses
import json
import sys
from json import JSONEncoder
from typing import Any, TextIO

import numpy as np


class GibbsEncoder(JSONEncoder):
    def default(self, o: Any) -> Any:
        if isinstance(o, np.ndarray):
            return o.tolist()

        if isinstance(o, np.generic):
            return o.item()

        if dataclasses.is_dataclass(o):
            return {field.name: getattr(o, field.name) for field in dataclasses.fields(o)}

        return o.__dict__


class Logger:
    def __init__(self, stream: TextIO = None) -> None:
        self.logs = ""
        self.stream = stream
        self.enabled = True

    def print(self, *objects: Any, sep: str = " ", end: str = "\n") -> None:
        self.logs += sep.join(map(str, objects)) + end

    def flush(self, event: str, data: dict[str, Any] = None) -> None:
        if self.enabled:
            print(json.dumps({
                "event": event,
                "data": data or {},
                "logs": self.logs,
            }, cls=GibbsEncoder, separators=(",", ":"), sort_keys=True), file=self.stream or sys.stderr)

        self.logs = ""


logger = Logger()
