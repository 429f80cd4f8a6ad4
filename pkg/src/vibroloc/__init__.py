"""Desk-scale vibro-acoustic contact localization toolkit.

Synthetic 7-channel vibration data, an STFT preprocessing pipeline, a
multi-channel spectrogram transformer trained from scratch, evaluation
harnesses, and a stroke-order planner, tied together by the ``vibroloc``
command-line tool.
"""

__version__ = "0.1.0"
