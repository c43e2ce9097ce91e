"""Span-based semantic proto-role labeling: marker-gated bidirectional
recurrent encoding with pairwise self-attention, trained from scratch on a
minimal reverse-mode autodiff core, combined in seed ensembles, and scored
with the matching evaluation and significance suite.
"""

__version__ = "0.1.0"
