"""Cross-view geolocalization and damage-level classification, end to end.

Paired street-level panoramas and overhead tiles are generated
procedurally, embedded by a shared-weight convolutional encoder trained
contrastively, and classified for damage level by a dual-branch windowed
attention model. Everything runs on a small tape-based autodiff engine so
the whole stack is testable on a desktop CPU.
"""

__version__ = "0.1.0"
