"""speechconf: semi-supervised speech-confidence classification toolkit.

Pipeline stages: audio canonicalization, prosodic feature extraction
(egemaps-lite-88 + auxiliary probabilities), multi-rater aggregation
(ICC 2,k + Dawid-Skene), calibrated uncertainty-filtered pseudo-labelling,
and a late-fusion hybrid classifier over ingested encoder embeddings,
evaluated under a fixed leakage-audited stratified k-fold protocol.
"""

__version__ = "0.1.0"

CLASS_NAMES = ("low", "medium", "high")
