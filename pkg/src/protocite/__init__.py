"""protocite: interpretable multi-label citation prediction.

Builds citation-labeled context spans from legal-style documents,
discovers precedent and provision prototypes in an embedding space,
trains a similarity-based classifier, and evaluates with F1 scores,
masking perturbations and prototype explanations.
"""

__version__ = "0.1.0"
