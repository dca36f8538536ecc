"""Local differential privacy for appliance-level smart meter streams.

Users quantize per-appliance readings, one-hot encode them, perturb the bits
with optimized unary encoding and release them under w-event budget
schedulers; a server estimates per-level counts, energy rankings and
similarity to the truth.
"""

__version__ = "0.1.0"
