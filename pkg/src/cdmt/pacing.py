"""Token-bucket pacing for the UDP downlink sender."""

from __future__ import annotations

import time


class TokenBucket:
    """Byte-denominated token bucket.

    Refills continuously at rate_bps/8 bytes per second; capacity bounds
    the burst after an idle period. wait_for() blocks (in slices no longer
    than tick_s, default 10 ms) until the requested amount is affordable.
    """

    def __init__(self, rate_bps: float, capacity_bytes: int | None = None,
                 tick_s: float = 0.010, clock=time.monotonic):
        if rate_bps <= 0:
            raise ValueError("rate_bps must be positive")
        self.rate_Bps = rate_bps / 8.0
        self.capacity = capacity_bytes if capacity_bytes is not None \
            else max(1, int(self.rate_Bps * 0.05))
        self._budget = float(self.capacity)
        self._clock = clock
        self._last = clock()
        self._tick_s = tick_s

    def _refill(self) -> None:
        now = self._clock()
        self._budget = min(float(self.capacity),
                           self._budget + (now - self._last) * self.rate_Bps)
        self._last = now

    def try_take(self, nbytes: int) -> bool:
        self._refill()
        if self._budget >= nbytes:
            self._budget -= nbytes
            return True
        return False

    def wait_for(self, nbytes: int, should_stop=lambda: False) -> bool:
        """Block until nbytes are affordable; False if should_stop fired."""
        while not self.try_take(nbytes):
            if should_stop():
                return False
            shortfall = nbytes - self._budget
            time.sleep(min(self._tick_s, max(0.0005, shortfall / self.rate_Bps)))
        return True
