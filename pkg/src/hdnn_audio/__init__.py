"""Per-frame audio concept classification.

MFCC front-end, context-window/DCT feature construction, RBM-pretrained
MLPs, a two-stage posterior cascade, and a GMM-UBM baseline, with a
synthetic-concept corpus for desk-scale experiments.
"""

__version__ = "0.1.0"
