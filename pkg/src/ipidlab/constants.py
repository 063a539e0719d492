"""Shared constants for the 16-bit IPID value space and 32-bit tick timestamps."""

IPID_BITS = 16
IPID_SPACE = 1 << IPID_BITS  # 65536 possible identifier values
IPID_MASK = IPID_SPACE - 1

TICK_BITS = 32
TICK_MASK = (1 << TICK_BITS) - 1
