"""markmt: human feedback for machine translation, end to end.

A small, numpy-based toolkit for running annotation studies on machine
translation output (error markings, error corrections, user choice), for
fine-tuning a desk-scale encoder-decoder model from the collected feedback
via token-weighted likelihood objectives, and for analyzing the results
(effort, agreement, quality, significance, mixed-effects models).
"""

__version__ = "0.1.0"
