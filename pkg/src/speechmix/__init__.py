"""speechmix: corpus augmentation and evaluation toolkit for ASR experiments.

Provides manifest handling, transcript normalization, WER/CER scoring,
log-mel feature extraction, time/frequency masking, prompt filtering,
real+synthetic dataset composition, a fixed-step midpoint ODE integrator,
and a batch protocol for external recognizer/synthesizer tools.
"""

__version__ = "0.1.0"
