"""
Debug and Monitoring System
----------------------
Logging for the whole package plus residual monitors for iterative solvers.
"""

import logging
from collections import deque
from threading import Lock

import numpy as np


class ResidualMonitor:
    """Keeps the most recent residuals of an iterative solve"""

    def __init__(self, window: int = 200):
        self.buffer = deque(maxlen=window)
        self.lock = Lock()
        self.count = 0

    def update(self, value: float):
        """Append one residual"""
        with self.lock:
            self.buffer.append(float(value))
            self.count += 1

    def stagnated(self, improvement: float = 1e-3) -> bool:
        """True once a full window passed without the residual dropping below
        (1 - improvement) times the value at the start of the window"""
        with self.lock:
            if len(self.buffer) < self.buffer.maxlen:
                return False
            return min(list(self.buffer)[1:]) > (1.0 - improvement) * self.buffer[0]

    def clear(self):
        with self.lock:
            self.buffer.clear()

    def get_data(self) -> np.ndarray:
        """Retrieve the stored residuals"""
        with self.lock:
            return np.array(list(self.buffer)) if self.buffer else np.zeros(0)


class DebugSystem:
    def __init__(self, name: str = 'optoloop'):
        self.logger = logging.getLogger(name)
        self.logger.addHandler(logging.NullHandler())
        self.signal_monitors = {}
        self.lock = Lock()

    def configure(self, verbosity: int = 0):
        """Route messages to stderr; 0 = warnings, 1 = info, 2+ = debug"""
        level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
        self.logger.setLevel(level)
        if not any(isinstance(h, logging.StreamHandler) and not isinstance(h, logging.NullHandler)
                   for h in self.logger.handlers):
            handler = logging.StreamHandler()
            handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
            self.logger.addHandler(handler)

    def monitor(self, name: str, window: int = 200) -> ResidualMonitor:
        """Register a fresh monitor under name and return it"""
        monitor = ResidualMonitor(window)
        with self.lock:
            self.signal_monitors[name] = monitor
        return monitor

    def get_signal_data(self, name: str) -> np.ndarray:
        if name in self.signal_monitors:
            return self.signal_monitors[name].get_data()
        return np.zeros(0)

    def log(self, message: str):
        """Log a debug message"""
        self.logger.debug(message)

    def info(self, message: str):
        self.logger.info(message)

    def warn(self, message: str):
        self.logger.warning(message)


DEBUG = DebugSystem()
